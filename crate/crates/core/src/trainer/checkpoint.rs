//! Plain-text checkpoints.
//!
//! ```text
//! mwpcl-checkpoint 1
//! dim <d>
//! seed <seed>
//! vocab <V>
//! <token>            (V lines)
//! classes <K>
//! <template key>     (K lines)
//! embed <V> <d>
//! <d values>         (V rows)
//! classifier <d> <K>
//! <K values>         (d rows)
//! ```
//! Values use the shortest decimal that round-trips exactly.

use std::fmt::Write as _;
use std::path::Path;

use super::{EncoderParams, TrainError};

const MAGIC: &str = "mwpcl-checkpoint";
const VERSION: u32 = 1;

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str, TrainError> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok(l)
            }
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, reason: impl Into<String>) -> TrainError {
        TrainError::Checkpoint {
            line: self.last,
            reason: reason.into(),
        }
    }

    fn field(&mut self, name: &str) -> Result<Vec<&'a str>, TrainError> {
        let line = self.next()?;
        let mut parts = line.split(' ');
        if parts.next() != Some(name) {
            return Err(self.err(format!("expected `{name}`")));
        }
        Ok(parts.collect())
    }

    fn number<T: std::str::FromStr>(&self, s: &str) -> Result<T, TrainError> {
        s.parse().map_err(|_| self.err(format!("bad number `{s}`")))
    }

    fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<Vec<f64>, TrainError> {
        let dims = self.field(name)?;
        let dims: Vec<usize> = dims.iter().map(|d| self.number(d)).collect::<Result<_, _>>()?;
        if dims != [rows, cols] {
            return Err(self.err(format!("expected shape {rows} x {cols}")));
        }
        let mut out = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = self.next()?;
            let row: Vec<f64> = line
                .split(' ')
                .map(|v| self.number(v))
                .collect::<Result<_, _>>()?;
            if row.len() != cols {
                return Err(self.err(format!("expected {cols} values")));
            }
            out.extend(row);
        }
        Ok(out)
    }
}

fn write_matrix(out: &mut String, name: &str, values: &[f64], rows: usize, cols: usize) {
    let _ = writeln!(out, "{name} {rows} {cols}");
    for r in 0..rows {
        let row: Vec<String> = values[r * cols..(r + 1) * cols].iter().map(f64::to_string).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

impl EncoderParams {
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {VERSION}");
        let _ = writeln!(out, "dim {}", self.dim());
        let _ = writeln!(out, "seed {}", self.rng_seed);
        let _ = writeln!(out, "vocab {}", self.vocab().len());
        for t in self.vocab() {
            let _ = writeln!(out, "{t}");
        }
        let _ = writeln!(out, "classes {}", self.num_classes());
        for c in self.classes() {
            let _ = writeln!(out, "{c}");
        }
        write_matrix(&mut out, "embed", &self.embed, self.vocab().len(), self.dim());
        write_matrix(&mut out, "classifier", &self.classifier, self.dim(), self.num_classes());
        out
    }

    /// Parses a checkpoint; leading `#` lines are skipped.
    pub fn from_checkpoint(text: &str) -> Result<Self, TrainError> {
        let mut lines = Lines {
            inner: text.lines().enumerate().peekable(),
            last: 0,
        };
        while lines.inner.peek().is_some_and(|(_, l)| l.starts_with('#')) {
            lines.next()?;
        }
        let header = lines.field(MAGIC)?;
        if header != [VERSION.to_string().as_str()] {
            return Err(lines.err("unsupported checkpoint version"));
        }
        let dim: usize = {
            let f = lines.field("dim")?;
            lines.number(f.first().copied().unwrap_or(""))?
        };
        let seed: u64 = {
            let f = lines.field("seed")?;
            lines.number(f.first().copied().unwrap_or(""))?
        };
        let mut list = |name: &str| -> Result<Vec<String>, TrainError> {
            let f = lines.field(name)?;
            let n: usize = lines.number(f.first().copied().unwrap_or(""))?;
            (0..n).map(|_| lines.next().map(str::to_string)).collect()
        };
        let vocab = list("vocab")?;
        let classes = list("classes")?;
        let embed = lines.matrix("embed", vocab.len(), dim)?;
        let classifier = lines.matrix("classifier", dim, classes.len())?;
        if embed.iter().chain(&classifier).any(|v| !v.is_finite()) {
            return Err(lines.err("non-finite weight"));
        }
        Ok(EncoderParams::from_parts(vocab, classes, dim, embed, classifier, seed))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrainError> {
        std::fs::write(path, self.to_checkpoint())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrainError> {
        Self::from_checkpoint(&std::fs::read_to_string(path)?)
    }
}
