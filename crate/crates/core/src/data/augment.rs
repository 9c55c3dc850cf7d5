use rand::Rng;

use super::corpus::TokenSequence;
use super::labels::OUTSIDE;

/// Share of a batch that receives an appended truncated segment.
pub const DEFAULT_AUGMENT_PROB: f64 = 0.5;

/// Appends, to each sample with probability `prob`, a random-length prefix of
/// another sample from the batch.
///
/// The appended words keep their labels except the last one, whose
/// punctuation becomes `O` because the stream was cut mid-sentence.
pub fn truncation_augment<R: Rng + ?Sized>(
    batch: &[TokenSequence],
    rng: &mut R,
    prob: f64,
) -> Vec<TokenSequence> {
    let n = batch.len();
    batch
        .iter()
        .enumerate()
        .map(|(i, seq)| {
            if n == 0 || !rng.random_bool(prob.clamp(0.0, 1.0)) {
                return seq.clone();
            }
            let donor_idx = if n == 1 {
                i
            } else {
                let j = rng.random_range(0..n - 1);
                if j >= i { j + 1 } else { j }
            };
            let donor = &batch[donor_idx];
            if donor.is_empty() {
                return seq.clone();
            }
            let cut = rng.random_range(1..=donor.len());
            append_prefix(seq, donor, cut)
        })
        .collect()
}

fn append_prefix(seq: &TokenSequence, donor: &TokenSequence, cut: usize) -> TokenSequence {
    let mut words = seq.words().to_vec();
    words.extend_from_slice(&donor.words()[..cut]);
    match (seq.punct(), seq.disf(), donor.punct(), donor.disf()) {
        (Some(p), Some(d), Some(dp), Some(dd)) => {
            let mut punct = p.to_vec();
            punct.extend_from_slice(&dp[..cut]);
            if let Some(last) = punct.last_mut() {
                *last = OUTSIDE.to_string();
            }
            let mut disf = d.to_vec();
            disf.extend_from_slice(&dd[..cut]);
            TokenSequence::labeled(words, punct, disf)
                .expect("a prefix of a valid BIO sequence is valid")
        }
        _ => TokenSequence::unlabeled(words),
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::data::synth::{synth_generate, GrammarConfig};

    #[test]
    fn zero_probability_is_identity() {
        let batch = synth_generate(1, 20, &GrammarConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(truncation_augment(&batch, &mut rng, 0.0), batch);
    }

    #[test]
    fn augmented_samples_extend_with_a_donor_prefix() {
        let batch = synth_generate(2, 50, &GrammarConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = truncation_augment(&batch, &mut rng, 1.0);
        for (orig, aug) in batch.iter().zip(&out) {
            assert!(aug.len() > orig.len());
            assert_eq!(&aug.words()[..orig.len()], orig.words());
            let added = aug.len() - orig.len();
            let tail = &aug.words()[orig.len()..];
            assert!(batch.iter().any(|d| d.len() >= added && &d.words()[..added] == tail));
            assert_eq!(aug.punct().unwrap().last().unwrap(), OUTSIDE);
            assert_eq!(&aug.punct().unwrap()[..orig.len()], orig.punct().unwrap());
        }
    }

    #[test]
    fn about_half_are_augmented() {
        let batch = synth_generate(3, 10_000, &GrammarConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let out = truncation_augment(&batch, &mut rng, DEFAULT_AUGMENT_PROB);
        let augmented = batch.iter().zip(&out).filter(|(a, b)| a.len() != b.len()).count();
        let frac = augmented as f64 / batch.len() as f64;
        assert!((frac - 0.5).abs() <= 0.02, "fraction {frac}");
    }
}
