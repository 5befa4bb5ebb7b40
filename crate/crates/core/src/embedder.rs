//! Hashed bag-of-pieces features and the trainable linear embedder.
//!
//! A text's wordpieces are folded into a fixed-width vector by signed
//! feature hashing: each piece is FNV-1a hashed, the hash modulo `hash_dim`
//! picks a bucket and hash bit 63 picks a sign, and the piece contributes
//! `±1` to that bucket. Colliding pieces of opposite sign cancel instead of
//! inflating the bucket, which keeps collision noise zero-mean.
//!
//! The embedder itself is one trainable linear map `out_dim × hash_dim`
//! applied to the hashed counts, followed by L2 normalization. Finetuning
//! replaces the projection transactionally and bumps [`EmbedderState::version`],
//! so a failed finetune can never leave a half-updated model behind.
//!
//! [`FileEmbedder`] is the frozen alternative: precomputed vectors keyed by
//! item id, loaded from disk and normalized once.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};

use crate::error::{Error, Result};
use crate::hash::fnv1a64;

/// Norm below which a vector is treated as zero and left unnormalized.
pub const NORM_FLOOR: f64 = 1e-12;

/// A dense embedding; either L2-normalized or all zeros.
pub type EmbeddingVector = Vec<f64>;

/// Sparse signed piece counts: `(bucket, count)` sorted by bucket, with
/// exact zeros (full cancellations) dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCounts {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseCounts {
    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(bucket, count) in &self.entries {
            out[bucket] = count;
        }
        out
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, c)| c * c).sum::<f64>().sqrt()
    }
}

/// Folds pieces into `hash_dim` signed buckets.
pub fn featurize<S: AsRef<str>>(pieces: &[S], hash_dim: usize) -> SparseCounts {
    assert!(hash_dim > 0, "hash_dim must be positive");
    let mut buckets: HashMap<usize, f64> = HashMap::new();
    for piece in pieces {
        let h = fnv1a64(piece.as_ref().as_bytes());
        let bucket = (h % hash_dim as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        *buckets.entry(bucket).or_insert(0.0) += sign;
    }
    let mut entries: Vec<(usize, f64)> = buckets
        .into_iter()
        .filter(|&(_, count)| count != 0.0)
        .collect();
    entries.sort_unstable_by_key(|&(bucket, _)| bucket);
    SparseCounts {
        dim: hash_dim,
        entries,
    }
}

/// Normalizes `v` to unit L2 norm in place; vectors with norm below
/// [`NORM_FLOOR`] are zeroed instead. Returns the original norm.
pub fn l2_normalize_in_place(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < NORM_FLOOR {
        v.fill(0.0);
    } else {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

/// The trainable linear embedder.
#[derive(Debug, Clone)]
pub struct EmbedderState {
    hash_dim: usize,
    out_dim: usize,
    /// Row-major `out_dim × hash_dim`.
    projection: Vec<f64>,
    version: u64,
}

impl EmbedderState {
    /// Fresh projection with Gaussian entries of standard deviation
    /// `1 / sqrt(hash_dim)`, so raw outputs start at unit scale for
    /// unit-scale inputs.
    pub fn new(hash_dim: usize, out_dim: usize, seed: u64) -> Self {
        assert!(hash_dim > 0 && out_dim > 0, "dimensions must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0 / (hash_dim as f64).sqrt()).expect("positive sd");
        let projection = (0..hash_dim * out_dim)
            .map(|_| normal.sample(&mut rng))
            .collect();
        Self {
            hash_dim,
            out_dim,
            projection,
            version: 0,
        }
    }

    /// Wraps an existing row-major `out_dim × hash_dim` matrix at version 0.
    ///
    /// Gradient checkers use this to evaluate the loss at perturbed weights
    /// without going through the training path.
    pub fn from_projection(hash_dim: usize, out_dim: usize, projection: Vec<f64>) -> Result<Self> {
        if hash_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidConfig("dimensions must be positive".into()));
        }
        if projection.len() != hash_dim * out_dim {
            return Err(Error::DimensionMismatch {
                expected: hash_dim * out_dim,
                got: projection.len(),
            });
        }
        Ok(Self {
            hash_dim,
            out_dim,
            projection,
            version: 0,
        })
    }

    pub fn hash_dim(&self) -> usize {
        self.hash_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// Incremented once per successful finetune.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn projection(&self) -> &[f64] {
        &self.projection
    }

    pub(crate) fn projection_mut(&mut self) -> &mut [f64] {
        &mut self.projection
    }

    pub(crate) fn bump_version(&mut self) {
        self.version += 1;
    }

    /// Raw (unnormalized) projection of hashed counts.
    pub fn project(&self, counts: &SparseCounts) -> Result<Vec<f64>> {
        if counts.dim != self.hash_dim {
            return Err(Error::DimensionMismatch {
                expected: self.hash_dim,
                got: counts.dim,
            });
        }
        let mut out = vec![0.0; self.out_dim];
        for (row, out_value) in out.iter_mut().enumerate() {
            let row_slice = &self.projection[row * self.hash_dim..(row + 1) * self.hash_dim];
            let mut acc = 0.0;
            for &(bucket, count) in &counts.entries {
                acc += row_slice[bucket] * count;
            }
            *out_value = acc;
        }
        Ok(out)
    }

    /// L2-normalized embedding (all zeros when the projection is below the
    /// norm floor).
    pub fn embed(&self, counts: &SparseCounts) -> Result<EmbeddingVector> {
        let mut out = self.project(counts)?;
        l2_normalize_in_place(&mut out);
        Ok(out)
    }
}

/// Frozen embeddings loaded from disk, keyed by item id.
///
/// File format: one line per item, `id<TAB>v1,v2,...,vk`. Vectors are
/// L2-normalized on load. Every line must have the same width and ids must
/// be unique.
#[derive(Debug, Clone)]
pub struct FileEmbedder {
    vectors: HashMap<String, EmbeddingVector>,
    dim: usize,
}

impl FileEmbedder {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let display = path.display().to_string();
        let mut vectors: HashMap<String, EmbeddingVector> = HashMap::new();
        let mut dim = None;
        for (line_no, line) in text.lines().enumerate() {
            let line_no = line_no + 1;
            if line.trim().is_empty() {
                continue;
            }
            let format_err = |message: String| Error::Format {
                path: display.clone(),
                line: line_no,
                message,
            };
            let (id, values) = line
                .split_once('\t')
                .ok_or_else(|| format_err("expected `id<TAB>values`".into()))?;
            if id.is_empty() {
                return Err(format_err("empty id".into()));
            }
            let mut vector = Vec::new();
            for raw in values.split(',') {
                let value: f64 = raw
                    .trim()
                    .parse()
                    .map_err(|_| format_err(format!("bad float {raw:?}")))?;
                if !value.is_finite() {
                    return Err(format_err(format!("non-finite value {raw:?}")));
                }
                vector.push(value);
            }
            match dim {
                None => dim = Some(vector.len()),
                Some(d) if d != vector.len() => {
                    return Err(format_err(format!(
                        "expected {d} values, got {}",
                        vector.len()
                    )));
                }
                Some(_) => {}
            }
            l2_normalize_in_place(&mut vector);
            if vectors.insert(id.to_owned(), vector).is_some() {
                return Err(Error::DuplicateEmbeddingId(id.to_owned()));
            }
        }
        let dim = dim.ok_or_else(|| Error::Format {
            path: display,
            line: 0,
            message: "file has no embeddings".into(),
        })?;
        Ok(Self { vectors, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn lookup(&self, id: &str) -> Result<&EmbeddingVector> {
        self.vectors
            .get(id)
            .ok_or_else(|| Error::EmbeddingNotFound(id.to_owned()))
    }
}
