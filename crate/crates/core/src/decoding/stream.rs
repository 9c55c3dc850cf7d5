use std::collections::VecDeque;

use super::Labeler;
use crate::data::labels::{PERIOD, QUESTION};
use crate::error::{Error, Result};

/// Streaming parameters: `frame_rate` words are consumed per inference and a
/// sentence is frozen once `lookahead_words` words follow its end mark.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodePolicy {
    pub frame_rate: usize,
    pub lookahead_words: usize,
    pub end_of_sentence: Vec<String>,
    /// Safety valve for models that stop predicting sentence ends: when the
    /// buffer still holds more words than this after a step, the oldest
    /// surplus words are emitted as they stand. `None` never forces output.
    pub max_buffer: Option<usize>,
}

impl Default for DecodePolicy {
    fn default() -> Self {
        Self::new(3, 6)
    }
}

impl DecodePolicy {
    pub fn new(frame_rate: usize, lookahead_words: usize) -> Self {
        Self {
            frame_rate,
            lookahead_words,
            end_of_sentence: vec![PERIOD.to_string(), QUESTION.to_string()],
            max_buffer: None,
        }
    }

    pub fn with_max_buffer(self, max_buffer: usize) -> Self {
        Self {
            max_buffer: Some(max_buffer),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_rate == 0 {
            return Err(Error::Config("frame rate must be at least 1".into()));
        }
        if self.max_buffer.is_some_and(|m| m < self.frame_rate) {
            return Err(Error::Config("max_buffer must be at least the frame rate".into()));
        }
        Ok(())
    }
}

/// A finalized word. Emissions are never revised.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Emission {
    /// Index of the word in the whole stream.
    pub position: usize,
    pub word: String,
    pub punct: String,
    pub disf: String,
}

/// Earliest punctuation change seen at one inference step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Revision {
    pub step: usize,
    /// Stream index of the earliest word whose punctuation label changed.
    pub position: usize,
    /// Words between that position and the end of the stream as it stood
    /// before this step's words arrived.
    pub distance: usize,
    /// Whether words were removed from the front of the buffer since the
    /// previous inference, so lost history may explain the change.
    pub after_removal: bool,
}

/// Buffer, emitted log and revision log of one stream.
#[derive(Clone, Debug, Default)]
pub struct StreamState {
    buffer: Vec<String>,
    labels: Vec<(usize, usize)>,
    offset: usize,
    emitted: Vec<Emission>,
    revisions: Vec<Revision>,
    steps: usize,
    max_buffer: usize,
    removed_since_inference: bool,
    forced: usize,
    finished: bool,
}

impl StreamState {
    pub fn buffer(&self) -> &[String] {
        &self.buffer
    }

    /// Stream index of the first buffered word.
    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn consumed(&self) -> usize {
        self.offset + self.buffer.len()
    }

    pub fn emitted(&self) -> &[Emission] {
        &self.emitted
    }

    pub fn revisions(&self) -> &[Revision] {
        &self.revisions
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Largest buffer length seen after any push.
    pub fn max_buffer(&self) -> usize {
        self.max_buffer
    }

    /// Words emitted by the buffer cap rather than by a sentence end.
    pub fn forced(&self) -> usize {
        self.forced
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Largest revision distance, 0 when nothing was ever revised.
    pub fn max_revision(&self) -> usize {
        self.revisions.iter().map(|r| r.distance).max().unwrap_or(0)
    }
}

/// Incremental decoder: re-tags the buffer on every step and freezes whole
/// sentences once enough words follow their end mark.
pub struct StreamDecoder<L: Labeler> {
    model: L,
    policy: DecodePolicy,
    eos: Vec<usize>,
    state: StreamState,
    pending: VecDeque<String>,
}

impl<L: Labeler> StreamDecoder<L> {
    /// `model` may be a reference, an `Arc` or an owned labeler.
    pub fn new(model: L, policy: DecodePolicy) -> Result<Self> {
        policy.validate()?;
        let scheme = model.scheme();
        let eos = policy
            .end_of_sentence
            .iter()
            .filter_map(|l| scheme.punct_index(l))
            .collect();
        Ok(Self {
            model,
            policy,
            eos,
            state: StreamState::default(),
            pending: VecDeque::new(),
        })
    }

    pub fn state(&self) -> &StreamState {
        &self.state
    }

    pub fn into_state(self) -> StreamState {
        self.state
    }

    pub fn policy(&self) -> &DecodePolicy {
        &self.policy
    }

    /// One inference step on `1..=frame_rate` new words.
    pub fn step(&mut self, words: &[String]) -> Result<Vec<Emission>> {
        if self.state.finished {
            return Err(Error::contract("stream step after finish"));
        }
        if words.is_empty() || words.len() > self.policy.frame_rate {
            return Err(Error::contract(format!(
                "a step takes 1..={} words, got {}",
                self.policy.frame_rate,
                words.len()
            )));
        }
        self.state.buffer.extend_from_slice(words);
        self.state.max_buffer = self.state.max_buffer.max(self.state.buffer.len());
        self.infer(self.state.consumed() - words.len())?;

        let mut out = Vec::new();
        if let Some(mark) = self.state.labels.iter().position(|(p, _)| self.eos.contains(p)) {
            let after = self.state.buffer.len() - (mark + 1);
            if after >= self.policy.lookahead_words {
                out = self.emit(mark + 1);
            }
        }
        if let Some(cap) = self.policy.max_buffer {
            let surplus = self.state.buffer.len().saturating_sub(cap);
            if surplus > 0 {
                self.state.forced += surplus;
                out.extend(self.emit(surplus));
            }
        }
        Ok(out)
    }

    /// Queues words and runs a step for every complete frame.
    pub fn push(&mut self, words: impl IntoIterator<Item = String>) -> Result<Vec<Emission>> {
        if self.state.finished {
            return Err(Error::contract("stream push after finish"));
        }
        self.pending.extend(words);
        let mut out = Vec::new();
        while self.pending.len() >= self.policy.frame_rate {
            let frame: Vec<String> = self.pending.drain(..self.policy.frame_rate).collect();
            out.extend(self.step(&frame)?);
        }
        Ok(out)
    }

    /// Processes any queued partial frame, re-tags the residual buffer once
    /// more and emits everything left.
    pub fn finish(&mut self) -> Result<Vec<Emission>> {
        if self.state.finished {
            return Err(Error::contract("stream already finished"));
        }
        let mut out = Vec::new();
        if !self.pending.is_empty() {
            let frame: Vec<String> = self.pending.drain(..).collect();
            out.extend(self.step(&frame)?);
        }
        if !self.state.buffer.is_empty() {
            self.infer(self.state.consumed())?;
            out.extend(self.emit(self.state.buffer.len()));
        }
        self.state.finished = true;
        Ok(out)
    }

    /// Re-tags the buffer; `horizon` is the stream length before the newest
    /// words arrived.
    fn infer(&mut self, horizon: usize) -> Result<()> {
        let (punct, disf) = self.model.label(&self.state.buffer)?;
        if punct.len() != self.state.buffer.len() || disf.len() != self.state.buffer.len() {
            return Err(Error::contract(format!(
                "labeler returned {}/{} labels for {} words",
                punct.len(),
                disf.len(),
                self.state.buffer.len()
            )));
        }
        let step = self.state.steps;
        self.state.steps += 1;
        let changed = self
            .state
            .labels
            .iter()
            .zip(&punct)
            .position(|((old, _), new)| old != new);
        if let Some(i) = changed {
            let position = self.state.offset + i;
            self.state.revisions.push(Revision {
                step,
                position,
                distance: horizon - position,
                after_removal: self.state.removed_since_inference,
            });
        }
        self.state.removed_since_inference = false;
        self.state.labels = punct.into_iter().zip(disf).collect();
        Ok(())
    }

    fn emit(&mut self, count: usize) -> Vec<Emission> {
        let scheme = self.model.scheme();
        let offset = self.state.offset;
        let out: Vec<Emission> = self
            .state
            .buffer
            .drain(..count)
            .zip(self.state.labels.drain(..count))
            .enumerate()
            .map(|(i, (word, (p, d)))| Emission {
                position: offset + i,
                word,
                punct: scheme.punct_name(p).to_string(),
                disf: scheme.disf_name(d).to_string(),
            })
            .collect();
        self.state.offset += count;
        self.state.removed_since_inference = true;
        self.state.emitted.extend(out.iter().cloned());
        out
    }
}

/// Streams `words` through a fresh decoder and returns its final state.
pub fn decode_stream<L: Labeler + ?Sized>(model: &L, words: &[String], policy: &DecodePolicy) -> Result<StreamState> {
    let mut dec = StreamDecoder::new(model, policy.clone())?;
    for frame in words.chunks(policy.frame_rate) {
        dec.step(frame)?;
    }
    dec.finish()?;
    Ok(dec.into_state())
}
