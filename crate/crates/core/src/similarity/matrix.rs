//! All-pairs equation similarity over distinct templates.
//!
//! Persistence: a tab-separated header of template keys followed by one row
//! per template of tab-separated scores (nine significant digits). Lines
//! starting with `#` before the header are ignored.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::equation::EquationTree;
use crate::numeric::format_sig9;

use super::ted::{distance_with, similarity_from_distance, OrderedTree, PostorderTree, TedScratch};
use super::SimilarityError;

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    keys: Vec<String>,
    index: HashMap<String, usize>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    /// Computes every unordered pair once. Rows are distributed over the
    /// rayon pool; the result does not depend on the partitioning.
    pub fn build(templates: &[EquationTree]) -> Result<Self, SimilarityError> {
        let keys: Vec<String> = templates.iter().map(EquationTree::template_key).collect();
        let index = index_keys(&keys)?;
        let n = templates.len();
        let prepared: Vec<(PostorderTree<_>, usize)> = templates
            .iter()
            .map(|t| (PostorderTree::new(&OrderedTree::from(t)), t.size()))
            .collect();

        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map_init(TedScratch::default, |scratch, i| {
                let (ti, si) = &prepared[i];
                prepared[i + 1..]
                    .iter()
                    .map(|(tj, sj)| similarity_from_distance(distance_with(ti, tj, scratch), *si, *sj))
                    .collect()
            })
            .collect();

        let mut values = vec![0.0; n * n];
        for (i, row) in upper.into_iter().enumerate() {
            values[i * n + i] = 1.0;
            for (offset, v) in row.into_iter().enumerate() {
                let j = i + 1 + offset;
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Ok(SimilarityMatrix { keys, index, values })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.keys.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.keys.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn by_key(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.get(self.index_of(a)?, self.index_of(b)?))
    }

    pub fn to_text(&self) -> String {
        let mut out = self.keys.join("\t");
        out.push('\n');
        for i in 0..self.len() {
            let row: Vec<String> = self.row(i).iter().map(|v| format_sig9(*v)).collect();
            let _ = writeln!(out, "{}", row.join("\t"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, SimilarityError> {
        let mut lines = text
            .lines()
            .enumerate()
            .skip_while(|(_, l)| l.starts_with('#'));
        let Some((_, header)) = lines.next() else {
            return Err(SimilarityError::Parse {
                line: 0,
                reason: "missing header".into(),
            });
        };
        let keys: Vec<String> = if header.is_empty() {
            Vec::new()
        } else {
            header.split('\t').map(str::to_string).collect()
        };
        let index = index_keys(&keys)?;
        let n = keys.len();
        let mut values = Vec::with_capacity(n * n);
        let mut rows = 0;
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let row = line
                .split('\t')
                .map(|f| f.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| SimilarityError::Parse {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            if row.len() != n {
                return Err(SimilarityError::Parse {
                    line: i + 1,
                    reason: format!("expected {n} columns, found {}", row.len()),
                });
            }
            values.extend(row);
            rows += 1;
        }
        if rows != n {
            return Err(SimilarityError::Parse {
                line: 0,
                reason: format!("expected {n} rows, found {rows}"),
            });
        }
        Ok(SimilarityMatrix { keys, index, values })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimilarityError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Largest `|M_ij - M_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

fn index_keys(keys: &[String]) -> Result<HashMap<String, usize>, SimilarityError> {
    let mut index = HashMap::with_capacity(keys.len());
    for (i, k) in keys.iter().enumerate() {
        if index.insert(k.clone(), i).is_some() {
            return Err(SimilarityError::DuplicateTemplate(k.clone()));
        }
    }
    Ok(index)
}
