//! Descriptor sets and labeled index pairs: loading, validation, saving,
//! splitting, and synthetic generation.

mod synth;

pub use synth::{gen_synthetic, SynthConfig, SynthPreset};

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng;

/// N rows of n-dimensional descriptors. Values are stored at 32-bit float
/// width (the width of the DHD1 on-disk format); numerics widen to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    dim: usize,
    data: Vec<f32>,
    ids: Vec<String>,
}

impl DescriptorSet {
    /// Builds from `f64` rows (values are narrowed to `f32`).
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::invalid(format!(
                    "row {i} has {} values, expected {dim}",
                    row.len()
                )));
            }
            data.extend(row.iter().map(|&v| v as f32));
        }
        Self::from_flat(dim, data)
    }

    /// Builds from a flat row-major buffer.
    pub fn from_flat(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("descriptor dimension must be >= 1"));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "descriptor buffer of {} values is not a positive multiple of dim {dim}",
                data.len()
            )));
        }
        let count = data.len() / dim;
        for (k, v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::invalid(format!(
                    "non-finite value at row {}, column {}",
                    k / dim + 1,
                    k % dim + 1
                )));
            }
        }
        let ids = (0..count).map(|i| i.to_string()).collect();
        Ok(DescriptorSet { dim, data, ids })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&v| v as f64).collect()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn raw_data(&self) -> &[f32] {
        &self.data
    }

    /// New set containing the given rows, in the given order. Ids carry over.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("subset of zero rows"));
        }
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        let mut ids = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.count() {
                return Err(Error::invalid(format!("subset index {i} out of range")));
            }
            data.extend_from_slice(self.row(i));
            ids.push(self.ids[i].clone());
        }
        Ok(DescriptorSet {
            dim: self.dim,
            data,
            ids,
        })
    }
}

/// Whether a pair set marks similar or dissimilar pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairLabel {
    Positive,
    Negative,
}

impl PairLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PairLabel::Positive => "positive",
            PairLabel::Negative => "negative",
        }
    }
}

/// Labeled index pairs into a [`DescriptorSet`], canonicalized so `i <= j`
/// and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSet {
    label: PairLabel,
    pairs: Vec<(usize, usize)>,
}

impl PairSet {
    pub fn new(
        label: PairLabel,
        raw: Vec<(usize, usize)>,
        descriptor_count: usize,
        allow_degenerate: bool,
    ) -> Result<Self> {
        let mut pairs = Vec::with_capacity(raw.len());
        let mut seen = HashSet::with_capacity(raw.len());
        for (i, j) in raw {
            if i >= descriptor_count || j >= descriptor_count {
                return Err(Error::invalid(format!(
                    "pair ({i}, {j}) out of range for {descriptor_count} descriptors"
                )));
            }
            if i == j && !allow_degenerate {
                return Err(Error::invalid(format!(
                    "degenerate pair ({i}, {i}) not allowed"
                )));
            }
            let canon = (i.min(j), i.max(j));
            if seen.insert(canon) {
                pairs.push(canon);
            }
        }
        Ok(PairSet { label, pairs })
    }

    /// Pairs already canonical, deduplicated, and in range.
    pub(crate) fn from_canonical(label: PairLabel, pairs: Vec<(usize, usize)>) -> Self {
        PairSet { label, pairs }
    }

    pub fn label(&self) -> PairLabel {
        self.label
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Sorted distinct descriptor indices referenced by these pairs.
    pub fn referenced_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self.pairs.iter().flat_map(|&(i, j)| [i, j]).collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }
}

/// Sorted distinct descriptor indices referenced by any of the pair sets.
pub fn referenced_indices(sets: &[&PairSet]) -> Vec<usize> {
    let mut idx: Vec<usize> = sets
        .iter()
        .flat_map(|s| s.pairs.iter().flat_map(|&(i, j)| [i, j]))
        .collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

const DHD1_MAGIC: &[u8; 4] = b"DHD1";

/// Loads descriptors from DHD1 binary or headerless CSV, sniffing by magic
/// bytes. Both loaders produce identical sets for equivalent content.
pub fn load_descriptors(path: impl AsRef<Path>) -> Result<DescriptorSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(DHD1_MAGIC) {
        parse_dhd1(path, &bytes)
    } else {
        parse_csv(path, &bytes)
    }
}

fn parse_dhd1(path: &Path, bytes: &[u8]) -> Result<DescriptorSet> {
    if bytes.len() < 16 {
        return Err(Error::malformed(path, "truncated DHD1 header"));
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    if dim == 0 || count == 0 {
        return Err(Error::malformed(path, "DHD1 header declares an empty set"));
    }
    let expected = 16 + 4 * dim * count;
    if bytes.len() != expected {
        return Err(Error::malformed(
            path,
            format!("expected {expected} bytes for {count}x{dim}, found {}", bytes.len()),
        ));
    }
    let mut data = Vec::with_capacity(dim * count);
    for (k, chunk) in bytes[16..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::malformed(
                path,
                format!("non-finite value at row {}, column {}", k / dim + 1, k % dim + 1),
            ));
        }
        data.push(v);
    }
    DescriptorSet::from_flat(dim, data).map_err(|e| Error::malformed(path, e.to_string()))
}

fn parse_csv(path: &Path, bytes: &[u8]) -> Result<DescriptorSet> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::malformed(path, "not UTF-8 text"))?;
    let mut dim = 0usize;
    let mut data = Vec::new();
    let mut rows = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        rows += 1;
        let mut width = 0usize;
        for (col, cell) in line.split(',').enumerate() {
            let v: f32 = cell.trim().parse().map_err(|_| {
                Error::malformed(
                    path,
                    format!("unparseable value at row {}, column {}", lineno + 1, col + 1),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::malformed(
                    path,
                    format!("non-finite value at row {}, column {}", lineno + 1, col + 1),
                ));
            }
            data.push(v);
            width += 1;
        }
        if rows == 1 {
            dim = width;
        } else if width != dim {
            return Err(Error::malformed(
                path,
                format!("row {} has {width} values, expected {dim}", lineno + 1),
            ));
        }
    }
    if rows == 0 {
        return Err(Error::malformed(path, "empty descriptor file"));
    }
    DescriptorSet::from_flat(dim, data).map_err(|e| Error::malformed(path, e.to_string()))
}

/// Writes descriptors: CSV when the path ends in `.csv`, DHD1 otherwise.
pub fn save_descriptors(path: impl AsRef<Path>, set: &DescriptorSet) -> Result<()> {
    let path = path.as_ref();
    let bytes = if path.extension().is_some_and(|e| e == "csv") {
        let mut text = String::new();
        for i in 0..set.count() {
            for (c, v) in set.row(i).iter().enumerate() {
                if c > 0 {
                    text.push(',');
                }
                let _ = write!(text, "{v}");
            }
            text.push('\n');
        }
        text.into_bytes()
    } else {
        let mut bytes = Vec::with_capacity(16 + 4 * set.data.len());
        bytes.extend_from_slice(DHD1_MAGIC);
        bytes.extend_from_slice(&(set.dim as u32).to_le_bytes());
        bytes.extend_from_slice(&(set.count() as u64).to_le_bytes());
        for v in &set.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Loads a pair file: one `i j` per line, 0-based, `#` comment lines
/// ignored. Pairs come back canonicalized and deduplicated.
pub fn load_pairs(
    path: impl AsRef<Path>,
    label: PairLabel,
    descriptor_count: usize,
) -> Result<PairSet> {
    load_pairs_opts(path, label, descriptor_count, false)
}

pub fn load_pairs_opts(
    path: impl AsRef<Path>,
    label: PairLabel,
    descriptor_count: usize,
    allow_degenerate: bool,
) -> Result<PairSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut raw = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (a, b) = match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(Error::malformed(
                    path,
                    format!("line {}: expected \"i j\"", lineno + 1),
                ))
            }
        };
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| {
                Error::malformed(path, format!("line {}: bad index {s:?}", lineno + 1))
            })
        };
        raw.push((parse(a)?, parse(b)?));
    }
    PairSet::new(label, raw, descriptor_count, allow_degenerate)
        .map_err(|e| Error::malformed(path, e.to_string()))
}

pub fn save_pairs(path: impl AsRef<Path>, set: &PairSet) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for &(i, j) in set.pairs() {
        let _ = writeln!(text, "{i} {j}");
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Splits a pair set into disjoint train/test parts with
/// `|train| = round(ratio * |pairs|)`, shuffled deterministically by seed.
pub fn split_pairs(p: &PairSet, ratio: f64, seed: u64) -> Result<(PairSet, PairSet)> {
    if p.len() < 2 {
        return Err(Error::invalid("need at least 2 pairs to split"));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid("split ratio must lie in (0, 1)"));
    }
    let mut pairs = p.pairs.clone();
    let mut rng = rng::seeded(seed);
    let len = pairs.len();
    rng::shuffle_take(&mut pairs, len, &mut rng);
    let train_len = (ratio * len as f64).round() as usize;
    if train_len == 0 || train_len == len {
        return Err(Error::invalid(format!(
            "ratio {ratio} leaves an empty side for {len} pairs"
        )));
    }
    let test = pairs.split_off(train_len);
    Ok((
        PairSet::from_canonical(p.label, pairs),
        PairSet::from_canonical(p.label, test),
    ))
}
