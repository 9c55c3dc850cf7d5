//! Offline tagging, the streaming decoder and the overlapped-chunk baseline.

mod chunk;
mod stream;

use std::time::{Duration, Instant};

pub use chunk::{chunk_decode, ChunkOutput, ChunkPolicy};
pub use stream::{decode_stream, DecodePolicy, Emission, Revision, StreamDecoder, StreamState};

use crate::data::{LabelScheme, TokenSequence};
use crate::error::{Error, Result};
use crate::model::TrainedModel;

/// Anything that assigns punctuation and disfluency label indices to a word
/// sequence under a fixed label scheme.
pub trait Labeler {
    fn scheme(&self) -> &LabelScheme;

    fn label(&self, words: &[String]) -> Result<(Vec<usize>, Vec<usize>)>;
}

impl Labeler for TrainedModel {
    fn scheme(&self) -> &LabelScheme {
        TrainedModel::scheme(self)
    }

    /// Argmax labels with orphan `I-` disfluency tags promoted to `B-`.
    fn label(&self, words: &[String]) -> Result<(Vec<usize>, Vec<usize>)> {
        let (p, mut d) = self.tag_words(words)?;
        TrainedModel::scheme(self).repair_disf(&mut d);
        Ok((p, d))
    }
}

impl<T: Labeler + ?Sized> Labeler for &T {
    fn scheme(&self) -> &LabelScheme {
        (**self).scheme()
    }

    fn label(&self, words: &[String]) -> Result<(Vec<usize>, Vec<usize>)> {
        (**self).label(words)
    }
}

impl<T: Labeler + ?Sized> Labeler for std::sync::Arc<T> {
    fn scheme(&self) -> &LabelScheme {
        (**self).scheme()
    }

    fn label(&self, words: &[String]) -> Result<(Vec<usize>, Vec<usize>)> {
        (**self).label(words)
    }
}

pub(crate) fn labeled<L: Labeler + ?Sized>(
    model: &L,
    words: &[String],
    punct: &[usize],
    disf: &[usize],
) -> Result<TokenSequence> {
    let scheme = model.scheme();
    TokenSequence::labeled(
        words.to_vec(),
        punct.iter().map(|&i| scheme.punct_name(i).to_string()).collect(),
        disf.iter().map(|&i| scheme.disf_name(i).to_string()).collect(),
    )
}

/// Tags a whole utterance with a single inference.
pub fn tag_offline<L: Labeler + ?Sized>(model: &L, words: &[String]) -> Result<TokenSequence> {
    if words.is_empty() {
        return Err(Error::EmptyInput("words to tag"));
    }
    let (p, d) = model.label(words)?;
    labeled(model, words, &p, &d)
}

/// Outcome of [`redecode_baseline`].
#[derive(Clone, Debug)]
pub struct RedecodeRun {
    /// Words consumed before the run ended.
    pub words_done: usize,
    pub elapsed: Duration,
    /// False when the deadline cut the run short.
    pub completed: bool,
}

/// Re-tags the entire stream history after every frame of `frame_rate`
/// words, never discarding anything. Stops early once `deadline` has
/// elapsed, so a run that outlasts a competitor can be abandoned.
pub fn redecode_baseline<L: Labeler + ?Sized>(
    model: &L,
    words: &[String],
    frame_rate: usize,
    deadline: Option<Duration>,
) -> Result<RedecodeRun> {
    if frame_rate == 0 {
        return Err(Error::Config("frame rate must be at least 1".into()));
    }
    let start = Instant::now();
    let mut end = 0;
    while end < words.len() {
        end = (end + frame_rate).min(words.len());
        model.label(&words[..end])?;
        if deadline.is_some_and(|d| start.elapsed() > d) && end < words.len() {
            return Ok(RedecodeRun {
                words_done: end,
                elapsed: start.elapsed(),
                completed: false,
            });
        }
    }
    Ok(RedecodeRun {
        words_done: end,
        elapsed: start.elapsed(),
        completed: true,
    })
}
