use super::{EmbedError, Embedder, EmbeddingVector};

pub const TRIGRAM_DIMENSION: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Offline embedder: character trigrams of the lowercased text, hashed into
/// 256 count buckets, then L2-normalized.
///
/// Whitespace runs collapse to a single space and the text is padded with one
/// space on each side, so word boundaries form trigrams of their own and
/// one- or two-character inputs still produce a vector. Hashing is 64-bit
/// FNV-1a over the trigram's UTF-8 bytes; nothing depends on the platform,
/// the process, or call order.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrigramEmbedder;

impl TrigramEmbedder {
    pub fn new() -> Self {
        Self
    }

    fn counts(text: &str) -> Vec<f64> {
        let mut normalized = String::with_capacity(text.len() + 2);
        normalized.push(' ');
        for (i, word) in text.split_whitespace().enumerate() {
            if i > 0 {
                normalized.push(' ');
            }
            normalized.extend(word.chars().flat_map(char::to_lowercase));
        }
        normalized.push(' ');

        let chars: Vec<char> = normalized.chars().collect();
        let mut counts = vec![0.0; TRIGRAM_DIMENSION];
        let mut buf = [0u8; 12];
        for window in chars.windows(3) {
            let mut len = 0;
            for c in window {
                len += c.encode_utf8(&mut buf[len..]).len();
            }
            let bucket = fnv1a(&buf[..len]) % TRIGRAM_DIMENSION as u64;
            counts[bucket as usize] += 1.0;
        }
        counts
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME)
    })
}

impl Embedder for TrigramEmbedder {
    fn dimension(&self) -> usize {
        TRIGRAM_DIMENSION
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        EmbeddingVector::normalize(&Self::counts(text))
    }

    fn max_in_flight(&self) -> usize {
        usize::MAX
    }

    fn name(&self) -> &str {
        "trigram-256"
    }
}
