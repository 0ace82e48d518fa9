//! Externally supplied sentence embeddings and cosine similarity.
//!
//! Table format: one line per record, `record_id v1 v2 ... vd`, whitespace
//! separated. Lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::numeric::format_sig9;

use super::SimilarityError;

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, SimilarityError> {
    if a.len() != b.len() {
        return Err(SimilarityError::DimMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(SimilarityError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: BTreeMap::new(),
        }
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

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.vectors.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<(), SimilarityError> {
        let id = id.into();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(SimilarityError::Parse {
                line: 0,
                reason: format!("record id `{id}` is empty or contains whitespace"),
            });
        }
        if self.vectors.is_empty() && self.dim == 0 {
            self.dim = vector.len();
        }
        if vector.len() != self.dim || self.dim == 0 {
            return Err(SimilarityError::DimMismatch {
                left: self.dim,
                right: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(SimilarityError::NonFinite(id));
        }
        self.vectors.insert(id, vector);
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, SimilarityError> {
        let mut table = EmbeddingTable::new(0);
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let id = fields.next().expect("non-blank line");
            let values = fields
                .map(|f| f.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| SimilarityError::Parse {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            table.insert(id, values).map_err(|e| match e {
                SimilarityError::Parse { reason, .. } => SimilarityError::Parse {
                    line: i + 1,
                    reason,
                },
                other => other,
            })?;
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimilarityError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Serialized body, nine significant digits per value.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, v) in &self.vectors {
            out.push_str(id);
            for x in v {
                let _ = write!(out, " {}", format_sig9(*x));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[0.3, -2.0, 1.0], &[0.3, -2.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let v = cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(
            cosine_similarity(&[1.0], &[1.0, 2.0]),
            Err(SimilarityError::DimMismatch { left: 1, right: 2 })
        );
        assert_eq!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 2.0]),
            Err(SimilarityError::ZeroVector)
        );
    }

    #[test]
    fn table_round_trip() {
        let mut t = EmbeddingTable::new(0);
        t.insert("a", vec![1.0, -0.123456789012, 3e-7]).unwrap();
        t.insert("b", vec![0.0, 2.0, 1.0 / 3.0]).unwrap();
        let back = EmbeddingTable::parse(&format!("# header\n{}", t.to_text())).unwrap();
        assert_eq!(back.dim(), 3);
        for (id, v) in t.iter() {
            for (x, y) in v.iter().zip(back.get(id).unwrap()) {
                assert!((x - y).abs() <= 5e-9 * x.abs());
            }
        }
    }

    #[test]
    fn ragged_table_rejected() {
        assert!(matches!(
            EmbeddingTable::parse("a 1 2\nb 1\n"),
            Err(SimilarityError::DimMismatch { .. })
        ));
        assert!(matches!(
            EmbeddingTable::parse("a 1 x\n"),
            Err(SimilarityError::Parse { line: 1, .. })
        ));
    }
}
