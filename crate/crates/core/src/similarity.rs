//! Static relevance between a query and a model description.
//!
//! Text is embedded with a hashed bag of tokens: lowercase, split on runs of
//! non-alphanumeric characters, hash each token with 64-bit FNV-1a into one of
//! `D` buckets, count, L2-normalize. All components are non-negative so the
//! cosine of two embeddings lies in `[0, 1]`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

pub const DEFAULT_DIMENSION: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Lowercased alphanumeric runs of `text`, in order of appearance.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(core::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// Wraps values the caller has already normalized.
    pub fn from_unit(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|v| v * v).sum())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

/// Maps text to a fixed-dimension vector. Implementations must be
/// deterministic and produce non-negative, unit-norm (or zero) vectors.
pub trait Embedder {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> EmbeddingVector;

    fn embed_tokens(&self, tokens: &[String]) -> EmbeddingVector;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    dim: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIMENSION)
    }
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a64(token.as_bytes()) % self.dim as u64) as usize
    }
}

impl Embedder for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> EmbeddingVector {
        self.embed_tokens(&tokenize(text))
    }

    fn embed_tokens(&self, tokens: &[String]) -> EmbeddingVector {
        let mut counts = vec![0.0f64; self.dim];
        for t in tokens {
            counts[self.bucket(t)] += 1.0;
        }
        let norm = libm::sqrt(counts.iter().map(|c| c * c).sum());
        if norm > 0.0 {
            counts.iter_mut().for_each(|c| *c /= norm);
        }
        EmbeddingVector(counts)
    }
}

/// Dot product of two embeddings, clamped to `[0, 1]`.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok(dot.clamp(0.0, 1.0))
}

/// Late-interaction score: every query token takes its best match among the
/// description tokens, and the maxima are averaged.
pub fn maxsim_similarity<E: Embedder + ?Sized>(
    embedder: &E,
    query_tokens: &[String],
    description_tokens: &[String],
) -> Result<f64> {
    if query_tokens.is_empty() || description_tokens.is_empty() {
        return Err(Error::EmptyTokens);
    }
    let desc: Vec<EmbeddingVector> = description_tokens
        .iter()
        .map(|t| embedder.embed_tokens(core::slice::from_ref(t)))
        .collect();
    let mut total = 0.0;
    for q in query_tokens {
        let qv = embedder.embed_tokens(core::slice::from_ref(q));
        let mut best = 0.0f64;
        for d in &desc {
            best = best.max(cosine_similarity(&qv, d)?);
        }
        total += best;
    }
    Ok(total / query_tokens.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SimilarityMethod {
    #[default]
    Cosine,
    MaxSim,
}

/// Precomputed description side of the static score.
#[derive(Debug, Clone)]
pub struct DescriptionIndex {
    pub tokens: Vec<String>,
    pub embedding: EmbeddingVector,
}

impl DescriptionIndex {
    pub fn new<E: Embedder + ?Sized>(embedder: &E, description: &str) -> Self {
        let tokens = tokenize(description);
        let embedding = embedder.embed_tokens(&tokens);
        Self { tokens, embedding }
    }
}

/// Precomputed query side of the static score.
#[derive(Debug, Clone)]
pub struct QueryIndex {
    pub tokens: Vec<String>,
    pub embedding: EmbeddingVector,
}

impl QueryIndex {
    pub fn new<E: Embedder + ?Sized>(embedder: &E, query: &str) -> Self {
        let tokens = tokenize(query);
        let embedding = embedder.embed_tokens(&tokens);
        Self { tokens, embedding }
    }
}

/// Static score of a query against a description. Empty inputs score 0.
pub fn static_score<E: Embedder + ?Sized>(
    embedder: &E,
    method: SimilarityMethod,
    query: &QueryIndex,
    description: &DescriptionIndex,
) -> Result<f64> {
    match method {
        SimilarityMethod::Cosine => cosine_similarity(&query.embedding, &description.embedding),
        SimilarityMethod::MaxSim => {
            if query.tokens.is_empty() || description.tokens.is_empty() {
                Ok(0.0)
            } else {
                maxsim_similarity(embedder, &query.tokens, &description.tokens)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').map(ToString::to_string).collect()
    }

    fn distinct_buckets(e: &HashingEmbedder, words: &[&str]) -> bool {
        let mut b: Vec<_> = words.iter().map(|w| e.bucket(w)).collect();
        b.sort_unstable();
        b.dedup();
        b.len() == words.len()
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x8594_4171_f739_67e8);
    }

    #[test]
    fn tokenizer_normalizes_case_and_punctuation() {
        assert_eq!(tokenize("Flu, flu!"), toks("flu flu"));
        assert_eq!(tokenize("  sore-throat  & FEVER2 "), toks("sore throat fever2"));
        assert!(tokenize("!!").is_empty());
    }

    #[test]
    fn empty_text_embeds_to_zero() {
        let e = HashingEmbedder::default();
        let v = e.embed("");
        assert!(v.is_zero());
        assert_eq!(v.dim(), DEFAULT_DIMENSION);
    }

    #[test]
    fn punctuation_variants_embed_identically() {
        let e = HashingEmbedder::default();
        assert_eq!(e.embed("Flu, flu!"), e.embed("flu flu"));
    }

    #[test]
    fn cosine_examples() {
        let e = HashingEmbedder::default();
        let a = e.embed("sore throat and fever");
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);

        assert!(distinct_buckets(&e, &["flu", "fever", "cough"]));
        // {flu:1, fever:1} . {flu:1, cough:1} = 1, both norms sqrt(2).
        let s = cosine_similarity(&e.embed("flu fever"), &e.embed("flu cough")).unwrap();
        assert!((s - 0.5).abs() < 1e-12);

        assert!(distinct_buckets(&e, &["stock", "bond", "flu", "fever"]));
        let s = cosine_similarity(&e.embed("stock bond"), &e.embed("flu fever")).unwrap();
        assert_eq!(s, 0.0);

        assert_eq!(cosine_similarity(&e.embed(""), &a).unwrap(), 0.0);
    }

    #[test]
    fn cosine_rejects_dimension_mismatch() {
        let a = HashingEmbedder::new(8).embed("x");
        let b = HashingEmbedder::new(16).embed("x");
        assert_eq!(
            cosine_similarity(&a, &b),
            Err(Error::DimensionMismatch { left: 8, right: 16 })
        );
    }

    #[test]
    fn maxsim_examples() {
        let e = HashingEmbedder::default();
        assert_eq!(
            maxsim_similarity(&e, &toks("flu ache"), &toks("flu ache pain")).unwrap(),
            1.0
        );
        assert!(distinct_buckets(&e, &["stock", "bond", "flu", "fever"]));
        assert_eq!(maxsim_similarity(&e, &toks("stock bond"), &toks("flu fever")).unwrap(), 0.0);
        // Brute force over token pairs: flu->flu 1, pain->{flu, ache} 0.
        assert!(distinct_buckets(&e, &["flu", "pain", "ache"]));
        assert_eq!(maxsim_similarity(&e, &toks("flu pain"), &toks("flu ache")).unwrap(), 0.5);
        assert_eq!(maxsim_similarity(&e, &[], &toks("flu")), Err(Error::EmptyTokens));
    }

    #[test]
    fn static_score_empty_query_is_zero() {
        let e = HashingEmbedder::default();
        let d = DescriptionIndex::new(&e, "flu assistant");
        let q = QueryIndex::new(&e, "");
        for m in [SimilarityMethod::Cosine, SimilarityMethod::MaxSim] {
            assert_eq!(static_score(&e, m, &q, &d).unwrap(), 0.0);
        }
    }
}
