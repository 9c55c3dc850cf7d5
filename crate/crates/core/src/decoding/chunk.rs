use super::{labeled, Labeler};
use crate::data::TokenSequence;
use crate::error::{Error, Result};

/// Overlapping-chunk parameters: chunks of `chunk` words start every
/// `window` words, and each chunk's labels are kept for its first
/// `chunk - min_words_cut` positions before the next chunk takes over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChunkPolicy {
    pub chunk: usize,
    pub window: usize,
    pub min_words_cut: usize,
}

impl Default for ChunkPolicy {
    fn default() -> Self {
        Self {
            chunk: 30,
            window: 15,
            min_words_cut: 10,
        }
    }
}

impl ChunkPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.chunk == 0 {
            return Err(Error::Config("chunk and window must be positive".into()));
        }
        if self.window + self.min_words_cut > self.chunk {
            return Err(Error::Config(format!(
                "window {} plus min_words_cut {} exceeds chunk {}: positions would be skipped",
                self.window, self.min_words_cut, self.chunk
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChunkOutput {
    pub sequence: TokenSequence,
    /// Index of the chunk whose label was kept, per word.
    pub origin: Vec<usize>,
    /// Start offset of each decoded chunk.
    pub chunk_starts: Vec<usize>,
}

pub fn chunk_decode<L: Labeler + ?Sized>(model: &L, words: &[String], policy: ChunkPolicy) -> Result<ChunkOutput> {
    policy.validate()?;
    if words.is_empty() {
        return Err(Error::EmptyInput("words to tag"));
    }
    let n = words.len();
    let keep = policy.chunk - policy.min_words_cut;
    let mut punct = vec![0; n];
    let mut disf = vec![0; n];
    let mut origin = vec![usize::MAX; n];
    let mut starts = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + policy.chunk).min(n);
        let last = end == n;
        let (p, d) = model.label(&words[start..end])?;
        let idx = starts.len();
        // Positions before `from` belong to the previous chunk.
        let from = if idx == 0 { 0 } else { start - policy.window + keep };
        let to = if last { n } else { start + keep };
        for pos in from..to {
            punct[pos] = p[pos - start];
            disf[pos] = d[pos - start];
            origin[pos] = idx;
        }
        starts.push(start);
        if last {
            break;
        }
        start += policy.window;
    }
    Ok(ChunkOutput {
        sequence: labeled(model, words, &punct, &disf)?,
        origin,
        chunk_starts: starts,
    })
}
