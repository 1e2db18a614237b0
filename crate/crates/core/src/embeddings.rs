//! Text embeddings and vector similarity.
//!
//! The thought hypergraph stores one embedding per vertex and compares them
//! with cosine similarity. Two encoder kinds exist: a fully in-process
//! feature-hashing encoder that is deterministic for a given `(dim, seed)`
//! pair — the default for tests and offline runs — and an adapter hook for an
//! external embedding service.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Default embedding dimensionality for the hash encoder.
pub const DEFAULT_DIM: usize = 256;

/// Dense embedding vector. Components are finite `f64`s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn zeros(dim: usize) -> Self {
        EmbeddingVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// True when every component is exactly zero (the embedding of empty text).
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|x| *x == 0.0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EncodeError {
    /// External backend failed; callers may retry (the failure is transient
    /// from this module's point of view).
    #[error("embedding backend failure: {0}")]
    Backend(String),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Backend contract for external embedding services.
pub trait EmbeddingBackend: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EncodeError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    DeterministicTest,
    ExternalProvider,
}

/// Text-to-vector encoder used throughout the hypergraph.
#[derive(Clone)]
pub enum Encoder {
    Deterministic(HashEncoder),
    External(Arc<dyn EmbeddingBackend>),
}

impl Encoder {
    /// Deterministic feature-hash encoder with the given dimensionality and seed.
    pub fn deterministic(dim: usize, seed: u64) -> Self {
        Encoder::Deterministic(HashEncoder::new(dim, seed))
    }

    pub fn kind(&self) -> EncoderKind {
        match self {
            Encoder::Deterministic(_) => EncoderKind::DeterministicTest,
            Encoder::External(_) => EncoderKind::ExternalProvider,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Encoder::Deterministic(h) => h.dim(),
            Encoder::External(b) => b.dim(),
        }
    }

    pub fn encode(&self, text: &str) -> Result<EmbeddingVector, EncodeError> {
        match self {
            Encoder::Deterministic(h) => Ok(h.encode(text)),
            Encoder::External(b) => {
                let v = b.embed(text)?;
                if v.dim() != b.dim() {
                    return Err(EncodeError::DimensionMismatch { expected: b.dim(), got: v.dim() });
                }
                Ok(v)
            }
        }
    }
}

impl std::fmt::Debug for Encoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Encoder::Deterministic(h) => f.debug_tuple("Deterministic").field(h).finish(),
            Encoder::External(b) => f.debug_struct("External").field("dim", &b.dim()).finish(),
        }
    }
}

impl Default for Encoder {
    fn default() -> Self {
        Encoder::deterministic(DEFAULT_DIM, 0)
    }
}

/// Seeded feature-hashing encoder.
///
/// Text is lowercased and split on whitespace; every token is hashed into one
/// of `dim` buckets with a ±1 contribution, and the result is L2-normalised.
/// Identical `(dim, seed, text)` always produces bit-identical output, and
/// texts sharing no tokens are (near-)orthogonal. Empty or whitespace-only
/// text encodes to the zero vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEncoder {
    dim: usize,
    seed: u64,
}

impl HashEncoder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim >= 1, "embedding dimension must be at least 1");
        HashEncoder { dim, seed }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn encode(&self, text: &str) -> EmbeddingVector {
        let mut values = vec![0.0f64; self.dim];
        let lowered = text.to_lowercase();
        for token in lowered.split_whitespace() {
            let h = token_hash(self.seed, token);
            let bucket = (h % self.dim as u64) as usize;
            let sign = if (h >> 63) & 1 == 1 { 1.0 } else { -1.0 };
            values[bucket] += sign;
        }
        let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        }
        EmbeddingVector(values)
    }
}

/// Stable token hash: FNV-1a folded with the encoder seed, then a splitmix64
/// finaliser. Hand-rolled so the mapping never shifts under toolchain updates.
fn token_hash(seed: u64, token: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in token.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    // splitmix64 finaliser for avalanche
    h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Cosine similarity in `[-1, 1]`.
///
/// Degenerate inputs (either vector has zero norm) yield a defined `0.0`;
/// use [`cosine_checked`] when the caller needs to observe that case.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    cosine_checked(a, b).0
}

/// Cosine similarity plus a degeneracy flag. The flag is `true` when either
/// input has zero norm, in which case the similarity is a defined `0.0`
/// rather than an error.
pub fn cosine_checked(a: &EmbeddingVector, b: &EmbeddingVector) -> (f64, bool) {
    assert_eq!(a.dim(), b.dim(), "cosine inputs must share dimensionality");
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.0.iter().zip(&b.0) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return (0.0, true);
    }
    let raw = dot / (na.sqrt() * nb.sqrt());
    (raw.clamp(-1.0, 1.0), false)
}

/// Full pairwise similarity matrix. Symmetric; diagonal entries are 1 except
/// for zero vectors, whose degenerate self-similarity is 0.
pub fn similarity_matrix(vectors: &[EmbeddingVector]) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let s = cosine(&vectors[i], &vectors[j]);
            m[i][j] = s;
            m[j][i] = s;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Textbook cosine used as an independent oracle for the library routines.
    fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    }

    #[test]
    fn empty_text_encodes_to_zero_vector() {
        let enc = HashEncoder::new(DEFAULT_DIM, 7);
        assert!(enc.encode("").is_zero());
        assert!(enc.encode("   \t\n").is_zero());
        assert_eq!(enc.encode("").dim(), DEFAULT_DIM);
    }

    #[test]
    fn encoding_is_bit_for_bit_deterministic() {
        let enc = HashEncoder::new(256, 42);
        let a = enc.encode("kafka topic input-text with tumbling windows");
        let b = enc.encode("kafka topic input-text with tumbling windows");
        assert_eq!(a, b);
        // Same text, different seed: different vector.
        let c = HashEncoder::new(256, 43).encode("kafka topic input-text with tumbling windows");
        assert_ne!(a, c);
    }

    #[test]
    fn distinct_texts_are_not_perfectly_similar() {
        let enc = HashEncoder::new(DEFAULT_DIM, 0);
        let a = enc.encode("kafka source");
        let b = enc.encode("file sink");
        let s = cosine(&a, &b);
        assert!(s < 1.0, "disjoint-token texts must not have cosine 1, got {s}");
    }

    #[test]
    fn case_and_spacing_normalise_to_the_same_vector() {
        let enc = HashEncoder::new(128, 3);
        assert_eq!(enc.encode("Kafka   Source"), enc.encode("kafka source"));
    }

    #[test]
    fn nonempty_text_is_unit_norm() {
        let enc = HashEncoder::new(64, 11);
        let v = enc.encode("count words every thirty seconds");
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_of_known_vectors_matches_hand_value() {
        let a = EmbeddingVector(vec![1.0, 0.0]);
        let b = EmbeddingVector(vec![1.0, 1.0]);
        let s = cosine(&a, &b);
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(cosine(&a, &a), 1.0);
        let opp = EmbeddingVector(vec![-1.0, 0.0]);
        assert_eq!(cosine(&a, &opp), -1.0);
    }

    #[test]
    fn zero_norm_input_flags_degeneracy_and_returns_zero() {
        let z = EmbeddingVector::zeros(4);
        let a = EmbeddingVector(vec![0.5, 0.5, 0.0, 0.0]);
        let (s, degenerate) = cosine_checked(&z, &a);
        assert_eq!(s, 0.0);
        assert!(degenerate);
        let (s2, degenerate2) = cosine_checked(&a, &a);
        assert!(!degenerate2);
        assert!((s2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn similarity_matrix_matches_pairwise_oracle() {
        let enc = HashEncoder::new(32, 5);
        let vs: Vec<EmbeddingVector> =
            ["alpha beta", "beta gamma", "delta", "", "alpha beta"].iter().map(|t| enc.encode(t)).collect();
        let m = similarity_matrix(&vs);
        for i in 0..vs.len() {
            for j in 0..vs.len() {
                let expect = oracle_cosine(vs[i].as_slice(), vs[j].as_slice());
                assert!((m[i][j] - expect).abs() < 1e-12, "entry ({i},{j})");
                assert_eq!(m[i][j], m[j][i]);
            }
        }
        // Diagonal: 1 for real vectors, 0 for the zero vector at index 3.
        assert!((m[0][0] - 1.0).abs() < 1e-15);
        assert_eq!(m[3][3], 0.0);
        // Duplicate texts are identical.
        assert!((m[0][4] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn external_backend_dimension_mismatch_is_an_error() {
        struct Short;
        impl EmbeddingBackend for Short {
            fn dim(&self) -> usize {
                8
            }
            fn embed(&self, _text: &str) -> Result<EmbeddingVector, EncodeError> {
                Ok(EmbeddingVector::zeros(4))
            }
        }
        let enc = Encoder::External(Arc::new(Short));
        assert!(matches!(enc.encode("x"), Err(EncodeError::DimensionMismatch { expected: 8, got: 4 })));
    }

    proptest! {
        #[test]
        fn cosine_is_symmetric_and_bounded(
            a in proptest::collection::vec(-100.0f64..100.0, 6),
            b in proptest::collection::vec(-100.0f64..100.0, 6),
        ) {
            let va = EmbeddingVector(a);
            let vb = EmbeddingVector(b);
            let s1 = cosine(&va, &vb);
            let s2 = cosine(&vb, &va);
            prop_assert_eq!(s1, s2);
            prop_assert!((-1.0..=1.0).contains(&s1));
        }

        #[test]
        fn encoded_norm_is_zero_or_one(text in "\\PC{0,64}") {
            let enc = HashEncoder::new(96, 9);
            let v = enc.encode(&text);
            let n = v.norm();
            prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-9);
        }
    }
}
