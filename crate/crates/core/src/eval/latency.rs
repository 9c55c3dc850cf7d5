use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::decoding::{decode_stream, DecodePolicy, Labeler, Revision};
use crate::error::{Error, Result};

/// Count of streams per maximum punctuation-position change.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Histogram {
    buckets: BTreeMap<usize, usize>,
}

impl Histogram {
    pub fn add(&mut self, bucket: usize) {
        *self.buckets.entry(bucket).or_default() += 1;
    }

    pub fn count(&self, bucket: usize) -> usize {
        self.buckets.get(&bucket).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.buckets.values().sum()
    }

    /// Streams whose maximum change exceeds `limit`.
    pub fn mass_above(&self, limit: usize) -> usize {
        self.buckets.range(limit.saturating_add(1)..).map(|(_, c)| c).sum()
    }

    pub fn max_bucket(&self) -> Option<usize> {
        self.buckets.keys().next_back().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.buckets.iter().map(|(&b, &c)| (b, c))
    }

    /// `bucket<TAB>count` lines in ascending bucket order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (b, c) in self.iter() {
            let _ = writeln!(out, "{b}\t{c}");
        }
        out
    }
}

/// One histogram entry per stream: the largest revision distance in its log,
/// or 0 for a stream that was never revised.
pub fn position_change_histogram<'a>(logs: impl IntoIterator<Item = &'a [Revision]>) -> Histogram {
    let mut h = Histogram::default();
    for log in logs {
        h.add(log.iter().map(|r| r.distance).max().unwrap_or(0));
    }
    h
}

#[derive(Clone, Debug)]
pub struct LatencyReport {
    pub histogram: Histogram,
    /// Median total inference time over the timed runs.
    pub total: Duration,
    pub words: usize,
    pub runs: Vec<Duration>,
}

impl LatencyReport {
    pub fn words_per_second(&self) -> f64 {
        let s = self.total.as_secs_f64();
        if s > 0.0 {
            self.words as f64 / s
        } else {
            f64::INFINITY
        }
    }
}

pub fn median_duration(runs: &[Duration]) -> Duration {
    let mut sorted = runs.to_vec();
    sorted.sort();
    match sorted.len() {
        0 => Duration::ZERO,
        n if n % 2 == 1 => sorted[n / 2],
        n => (sorted[n / 2 - 1] + sorted[n / 2]) / 2,
    }
}

/// Streams every utterance of `streams` through the decoder `runs` times
/// after one untimed warm-up pass. Only decoding is timed.
pub fn bench<L: Labeler + ?Sized>(
    model: &L,
    streams: &[Vec<String>],
    policy: &DecodePolicy,
    runs: usize,
) -> Result<LatencyReport> {
    if runs == 0 {
        return Err(Error::Config("bench needs at least one run".into()));
    }
    let mut logs = Vec::with_capacity(streams.len());
    for s in streams {
        logs.push(decode_stream(model, s, policy)?.revisions().to_vec());
    }
    let histogram = position_change_histogram(logs.iter().map(Vec::as_slice));
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = Instant::now();
        for s in streams {
            decode_stream(model, s, policy)?;
        }
        times.push(start.elapsed());
    }
    Ok(LatencyReport {
        histogram,
        total: median_duration(&times),
        words: streams.iter().map(Vec::len).sum(),
        runs: times,
    })
}
