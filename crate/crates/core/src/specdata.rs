//! Labeled hyperspectral pixel data: containers, on-disk formats, pairwise
//! extraction, train/test splits and synthetic Gaussian pairs.
//!
//! On disk a dataset is a small text header plus two raw files:
//!
//! ```text
//! n = 4
//! d = 3
//! raw_file = pixels.f32      # n*d little-endian f32, pixel-major
//! label_file = labels.i32    # n little-endian i32 class ids
//! class_map = 1:Asphalt,2:Meadows
//! ```
//!
//! Relative file names resolve against the header's directory. A plain CSV
//! with one pixel per row and the class id in the last column is also read.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed;

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }

    pub fn from_sign(value: i32) -> Result<Self> {
        match value {
            -1 => Ok(Label::Negative),
            1 => Ok(Label::Positive),
            other => Err(Error::InvalidArgument(format!(
                "label must be -1 or +1, got {other}"
            ))),
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Negative => Label::Positive,
            Label::Positive => Label::Negative,
        }
    }
}

/// Class ids and names behind the two binary labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassPair {
    pub positive_id: i32,
    pub positive_name: String,
    pub negative_id: i32,
    pub negative_name: String,
}

/// Pixel preprocessing applied before an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Divide every value by the largest absolute value in the dataset.
    #[default]
    GlobalMax,
    None,
}

impl std::str::FromStr for Normalization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "global_max" => Ok(Normalization::GlobalMax),
            "none" => Ok(Normalization::None),
            other => Err(format!("unknown normalization '{other}' (global_max|none)")),
        }
    }
}

impl std::fmt::Display for Normalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Normalization::GlobalMax => "global_max",
            Normalization::None => "none",
        })
    }
}

fn check_pixels(bands: usize, values: &[f64], n: usize) -> Result<()> {
    if bands == 0 {
        return Err(Error::InvalidArgument("band count must be >= 1".into()));
    }
    if values.len() != n * bands {
        return Err(Error::SizeMismatch(format!(
            "{} values for {n} pixels of {bands} bands",
            values.len()
        )));
    }
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            pixel: pos / bands,
            band: pos % bands,
        });
    }
    Ok(())
}

fn global_max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Pixels with their original (multi-class) ids.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassDataset {
    bands: usize,
    values: Vec<f64>,
    class_ids: Vec<i32>,
    /// Declared classes in header order.
    class_map: Vec<(i32, String)>,
}

impl MulticlassDataset {
    pub fn new(
        bands: usize,
        values: Vec<f64>,
        class_ids: Vec<i32>,
        class_map: Vec<(i32, String)>,
    ) -> Result<Self> {
        if class_ids.is_empty() {
            return Err(Error::InvalidArgument("dataset has no pixels".into()));
        }
        check_pixels(bands, &values, class_ids.len())?;
        for &id in &class_ids {
            if !class_map.iter().any(|(c, _)| *c == id) {
                return Err(Error::UnknownClass(id));
            }
        }
        Ok(Self {
            bands,
            values,
            class_ids,
            class_map,
        })
    }

    pub fn len(&self) -> usize {
        self.class_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_ids.is_empty()
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixel(&self, j: usize) -> &[f64] {
        &self.values[j * self.bands..(j + 1) * self.bands]
    }

    pub fn class_ids(&self) -> &[i32] {
        &self.class_ids
    }

    pub fn class_map(&self) -> &[(i32, String)] {
        &self.class_map
    }

    pub fn class_name(&self, id: i32) -> Option<&str> {
        self.class_map
            .iter()
            .find(|(c, _)| *c == id)
            .map(|(_, n)| n.as_str())
    }

    pub fn normalized(&self, mode: Normalization) -> Self {
        let mut out = self.clone();
        if mode == Normalization::GlobalMax {
            let m = global_max_abs(&out.values);
            if m > 0.0 {
                out.values.iter_mut().for_each(|v| *v /= m);
            }
        }
        out
    }

    /// Binary dataset from the pixels of two classes; `class_a` becomes the
    /// positive label. Pixel order is preserved.
    pub fn extract_pair(&self, class_a: i32, class_b: i32) -> Result<LabeledDataset> {
        if class_a == class_b {
            return Err(Error::InvalidPair(format!(
                "identical class ids ({class_a}, {class_b})"
            )));
        }
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (j, &id) in self.class_ids.iter().enumerate() {
            let label = if id == class_a {
                Label::Positive
            } else if id == class_b {
                Label::Negative
            } else {
                continue;
            };
            values.extend_from_slice(self.pixel(j));
            labels.push(label);
        }
        for (id, label) in [(class_a, Label::Positive), (class_b, Label::Negative)] {
            if !labels.contains(&label) {
                return Err(Error::InvalidPair(format!("class {id} has no pixels")));
            }
        }
        let name = |id: i32| self.class_name(id).map_or_else(|| id.to_string(), str::to_owned);
        let mut ds = LabeledDataset::new(self.bands, values, labels)?;
        ds.classes = Some(ClassPair {
            positive_id: class_a,
            positive_name: name(class_a),
            negative_id: class_b,
            negative_name: name(class_b),
        });
        Ok(ds)
    }
}

/// Free-function form of [`MulticlassDataset::extract_pair`].
pub fn extract_pair(data: &MulticlassDataset, class_a: i32, class_b: i32) -> Result<LabeledDataset> {
    data.extract_pair(class_a, class_b)
}

/// Binary labeled pixels, stored pixel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    bands: usize,
    values: Vec<f64>,
    labels: Vec<Label>,
    pub classes: Option<ClassPair>,
}

impl LabeledDataset {
    pub fn new(bands: usize, values: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidArgument("dataset has no pixels".into()));
        }
        check_pixels(bands, &values, labels.len())?;
        Ok(Self {
            bands,
            values,
            labels,
            classes: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<Label>) -> Result<Self> {
        let bands = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != bands) {
            return Err(Error::DimensionMismatch("ragged pixel rows".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::SizeMismatch(format!(
                "{} pixels but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        Self::new(bands, rows.concat(), labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixel(&self, j: usize) -> &[f64] {
        &self.values[j * self.bands..(j + 1) * self.bands]
    }

    pub fn pixels(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.bands)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let mut values = Vec::with_capacity(indices.len() * self.bands);
        let mut labels = Vec::with_capacity(indices.len());
        for &j in indices {
            values.extend_from_slice(self.pixel(j));
            labels.push(self.labels[j]);
        }
        LabeledDataset {
            bands: self.bands,
            values,
            labels,
            classes: self.classes.clone(),
        }
    }

    /// Same pixels with every value multiplied by `c`.
    pub fn scaled(&self, c: f64) -> LabeledDataset {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn normalized(&self, mode: Normalization) -> Self {
        match mode {
            Normalization::GlobalMax => {
                let m = global_max_abs(&self.values);
                if m > 0.0 {
                    self.scaled(1.0 / m)
                } else {
                    self.clone()
                }
            }
            Normalization::None => self.clone(),
        }
    }
}

struct Header {
    n: usize,
    d: usize,
    raw_file: PathBuf,
    label_file: PathBuf,
    class_map: Vec<(i32, String)>,
}

fn parse_class_map(text: &str) -> std::result::Result<Vec<(i32, String)>, String> {
    let mut out: Vec<(i32, String)> = Vec::new();
    for entry in text.split(',').map(str::trim).filter(|e| !e.is_empty()) {
        let (id, name) = entry
            .split_once(':')
            .ok_or_else(|| format!("class_map entry '{entry}' is not id:name"))?;
        let id: i32 = id
            .trim()
            .parse()
            .map_err(|_| format!("class id '{}' is not an integer", id.trim()))?;
        if out.iter().any(|(c, _)| *c == id) {
            return Err(format!("class id {id} declared twice"));
        }
        out.push((id, name.trim().to_owned()));
    }
    if out.is_empty() {
        return Err("class_map is empty".into());
    }
    Ok(out)
}

fn read_header(path: &Path) -> Result<Header> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    let mut fields: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(i + 1, format!("expected key = value, got '{line}'")))?;
        fields.insert(key.trim().to_owned(), (i + 1, value.trim().to_owned()));
    }
    let get = |key: &str| {
        fields
            .get(key)
            .ok_or_else(|| parse_err(0, format!("missing key '{key}'")))
    };
    let count = |key: &str| -> Result<usize> {
        let (line, v) = get(key)?;
        v.parse()
            .map_err(|_| parse_err(*line, format!("{key} must be a non-negative integer")))
    };
    let (map_line, map_text) = get("class_map")?;
    Ok(Header {
        n: count("n")?,
        d: count("d")?,
        raw_file: base.join(&get("raw_file")?.1),
        label_file: base.join(&get("label_file")?.1),
        class_map: parse_class_map(map_text).map_err(|m| parse_err(*map_line, m))?,
    })
}

fn read_exact_len(path: &Path, expected: usize, what: &str) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected {
        return Err(Error::SizeMismatch(format!(
            "{what} {} has {} bytes, header implies {expected}",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes)
}

/// `(n, d)` declared by a header; the data files are only checked for size.
pub fn header_dims(header_path: impl AsRef<Path>) -> Result<(usize, usize)> {
    let header = read_header(header_path.as_ref())?;
    for (path, len) in [
        (&header.raw_file, header.n * header.d * 4),
        (&header.label_file, header.n * 4),
    ] {
        let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
        if meta.len() != len as u64 {
            return Err(Error::SizeMismatch(format!(
                "{} has {} bytes, header implies {len}",
                path.display(),
                meta.len()
            )));
        }
    }
    Ok((header.n, header.d))
}

/// Reads a header-described dataset keeping all class ids.
pub fn load_multiclass(header_path: impl AsRef<Path>) -> Result<MulticlassDataset> {
    let header = read_header(header_path.as_ref())?;
    let raw = read_exact_len(&header.raw_file, header.n * header.d * 4, "raw matrix")?;
    let lab = read_exact_len(&header.label_file, header.n * 4, "label file")?;
    let values = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let ids = lab
        .chunks_exact(4)
        .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    MulticlassDataset::new(header.d, values, ids, header.class_map)
}

/// Reads a two-class dataset. The first class in `class_map` becomes the
/// negative label and the second the positive label.
pub fn load_dataset(header_path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let multi = load_multiclass(header_path)?;
    match multi.class_map() {
        [(neg, _), (pos, _)] => {
            let (pos, neg) = (*pos, *neg);
            multi.extract_pair(pos, neg)
        }
        other => Err(Error::InvalidPair(format!(
            "binary load needs exactly 2 declared classes, found {}",
            other.len()
        ))),
    }
}

/// Reads a CSV with one pixel per row and the integer class id last.
/// Classes are declared in ascending id order, named by their id.
pub fn load_csv(path: impl AsRef<Path>) -> Result<MulticlassDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::new();
    let mut ids = Vec::new();
    let mut bands = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse_err = |message: String| Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            message,
        };
        let row: std::result::Result<Vec<f64>, _> =
            cells[..cells.len() - 1].iter().map(|c| c.parse::<f64>()).collect();
        let row = match row {
            Ok(r) => r,
            // a header row is allowed before any data
            Err(_) if ids.is_empty() && bands.is_none() => continue,
            Err(e) => return Err(parse_err(format!("bad value: {e}"))),
        };
        let id: i32 = cells[cells.len() - 1]
            .parse()
            .map_err(|_| parse_err("last column must be an integer class id".into()))?;
        match bands {
            None => bands = Some(row.len()),
            Some(b) if b != row.len() => {
                return Err(parse_err(format!("expected {b} bands, got {}", row.len())))
            }
            _ => {}
        }
        values.extend(row);
        ids.push(id);
    }
    let mut declared: Vec<i32> = ids.clone();
    declared.sort_unstable();
    declared.dedup();
    let class_map = declared.into_iter().map(|c| (c, c.to_string())).collect();
    MulticlassDataset::new(bands.unwrap_or(0), values, ids, class_map)
}

/// Writes `dataset` as header + raw files next to `header_path`. Raw file
/// names are derived from the header's file stem.
pub fn write_dataset(dataset: &LabeledDataset, header_path: impl AsRef<Path>) -> Result<()> {
    let header_path = header_path.as_ref();
    let classes = dataset.classes.clone().unwrap_or_else(|| ClassPair {
        positive_id: 1,
        positive_name: "positive".into(),
        negative_id: -1,
        negative_name: "negative".into(),
    });
    let stem = header_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset");
    let dir = header_path.parent().unwrap_or(Path::new("."));
    let raw_name = format!("{stem}.f32");
    let label_name = format!("{stem}.labels.i32");

    let raw: Vec<u8> = dataset
        .values
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect();
    let labels: Vec<u8> = dataset
        .labels
        .iter()
        .flat_map(|l| match l {
            Label::Positive => classes.positive_id.to_le_bytes(),
            Label::Negative => classes.negative_id.to_le_bytes(),
        })
        .collect();
    let header = format!(
        "n = {}\nd = {}\nraw_file = {raw_name}\nlabel_file = {label_name}\nclass_map = {}:{},{}:{}\n",
        dataset.len(),
        dataset.bands,
        classes.negative_id,
        classes.negative_name,
        classes.positive_id,
        classes.positive_name,
    );
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let write = |p: PathBuf, bytes: &[u8]| fs::write(&p, bytes).map_err(|e| Error::io(p, e));
    write(dir.join(raw_name), &raw)?;
    write(dir.join(label_name), &labels)?;
    write(header_path.to_owned(), header.as_bytes())
}

/// How many pixels of each class go into a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitBalance {
    /// Equal per-class counts (remainder to the positive class).
    #[default]
    Balanced,
    /// Per-class counts proportional to the dataset's class frequencies.
    Proportional,
}

impl std::str::FromStr for SplitBalance {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "balanced" => Ok(SplitBalance::Balanced),
            "proportional" => Ok(SplitBalance::Proportional),
            other => Err(format!("unknown balance '{other}' (balanced|proportional)")),
        }
    }
}

impl std::fmt::Display for SplitBalance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SplitBalance::Balanced => "balanced",
            SplitBalance::Proportional => "proportional",
        })
    }
}

/// Disjoint train/test index sets into a [`LabeledDataset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

impl SplitPlan {
    /// The plan with train and test roles exchanged (second fold).
    pub fn swapped(&self) -> SplitPlan {
        SplitPlan {
            train_indices: self.test_indices.clone(),
            test_indices: self.train_indices.clone(),
            seed: self.seed,
        }
    }
}

fn positive_share(total: usize, n_pos: usize, n: usize, balance: SplitBalance) -> usize {
    match balance {
        SplitBalance::Balanced => total - total / 2,
        SplitBalance::Proportional => {
            let share = (total as f64 * n_pos as f64 / n as f64).round() as usize;
            if total >= 2 {
                share.clamp(1, total - 1)
            } else {
                share.min(total)
            }
        }
    }
}

pub fn make_split(
    dataset: &LabeledDataset,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<SplitPlan> {
    make_split_with(dataset, n_train, n_test, seed, SplitBalance::Balanced)
}

/// Samples disjoint train and test sets without replacement.
pub fn make_split_with(
    dataset: &LabeledDataset,
    n_train: usize,
    n_test: usize,
    seed: u64,
    balance: SplitBalance,
) -> Result<SplitPlan> {
    let n = dataset.len();
    if n_train == 0 || n_test == 0 {
        return Err(Error::InvalidArgument("split sizes must be >= 1".into()));
    }
    if n_train + n_test > n {
        return Err(Error::InsufficientSamples(format!(
            "{n_train} train + {n_test} test > {n} pixels"
        )));
    }
    let n_pos = dataset.count(Label::Positive);
    if n_pos == 0 || n_pos == n {
        return Err(Error::InsufficientSamples(
            "split needs both labels present".into(),
        ));
    }
    let train_pos = positive_share(n_train, n_pos, n, balance);
    let test_pos = positive_share(n_test, n_pos, n, balance);

    let mut rng = seed::rng(seed);
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n_test);
    for (label, n_tr, n_te) in [
        (Label::Positive, train_pos, test_pos),
        (Label::Negative, n_train - train_pos, n_test - test_pos),
    ] {
        let mut idx: Vec<usize> = (0..n).filter(|&j| dataset.labels[j] == label).collect();
        if n_tr + n_te > idx.len() {
            return Err(Error::InsufficientSamples(format!(
                "{label:?} class has {} pixels, split needs {}",
                idx.len(),
                n_tr + n_te
            )));
        }
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..n_tr]);
        test.extend_from_slice(&idx[n_tr..n_tr + n_te]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan {
        train_indices: train,
        test_indices: test,
        seed,
    })
}

/// Two spherical Gaussian clouds at `±(separation/2)·u` for a random unit
/// direction `u`. The positive class comes first.
pub fn synth_gaussian_pair(
    d: usize,
    n_per_class: usize,
    separation: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if d == 0 || n_per_class == 0 {
        return Err(Error::InvalidArgument(
            "synthetic data needs d >= 1 and n_per_class >= 1".into(),
        ));
    }
    if !(noise_sigma >= 0.0) || !separation.is_finite() {
        return Err(Error::InvalidArgument(
            "noise_sigma must be >= 0 and separation finite".into(),
        ));
    }
    let mut rng = seed::rng(seed);
    let mut u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        u.iter_mut().for_each(|v| *v /= norm);
    } else {
        u[0] = 1.0;
    }
    let mut values = Vec::with_capacity(2 * n_per_class * d);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for label in [Label::Positive, Label::Negative] {
        let offset = label.sign() * separation / 2.0;
        for _ in 0..n_per_class {
            for &ui in &u {
                let noise: f64 = rng.sample(StandardNormal);
                values.push(offset * ui + noise_sigma * noise);
            }
            labels.push(label);
        }
    }
    let mut ds = LabeledDataset::new(d, values, labels)?;
    ds.classes = Some(ClassPair {
        positive_id: 1,
        positive_name: "cloud_a".into(),
        negative_id: 2,
        negative_name: "cloud_b".into(),
    });
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(dir: &Path, n: usize, d: usize, values: &[f32], ids: &[i32], raw_len: usize) -> PathBuf {
        let raw: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).take(raw_len).collect();
        fs::write(dir.join("p.f32"), raw).unwrap();
        fs::write(
            dir.join("p.i32"),
            ids.iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>(),
        )
        .unwrap();
        let h = dir.join("p.hdr");
        fs::write(
            &h,
            format!("n = {n}\nd = {d}\nraw_file = p.f32\nlabel_file = p.i32\nclass_map = 1:low, 2:high\n"),
        )
        .unwrap();
        h
    }

    #[test]
    fn load_small_header_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let values: Vec<f32> = (0..12).map(|v| v as f32 * 0.5).collect();
        let h = write_raw(dir.path(), 4, 3, &values, &[1, 2, 2, 1], 48);
        let ds = load_dataset(&h).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.bands(), 3);
        assert_eq!(
            ds.labels(),
            &[Label::Negative, Label::Positive, Label::Positive, Label::Negative]
        );
        assert_eq!(ds.pixel(1), &[1.5, 2.0, 2.5]);
    }

    #[test]
    fn short_raw_file_is_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let values: Vec<f32> = vec![0.0; 12];
        let h = write_raw(dir.path(), 4, 3, &values, &[1, 2, 2, 1], 44);
        assert!(matches!(load_dataset(&h), Err(Error::SizeMismatch(_))));
    }

    #[test]
    fn missing_header_is_io_error() {
        assert!(matches!(
            load_dataset("/nonexistent/nothing.hdr"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn non_finite_and_unknown_class_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut values: Vec<f32> = vec![0.0; 12];
        values[4] = f32::NAN;
        let h = write_raw(dir.path(), 4, 3, &values, &[1, 2, 2, 1], 48);
        assert!(matches!(
            load_dataset(&h),
            Err(Error::NonFinite { pixel: 1, band: 1 })
        ));
        let h = write_raw(dir.path(), 4, 3, &[0.0; 12], &[1, 2, 7, 1], 48);
        assert!(matches!(load_dataset(&h), Err(Error::UnknownClass(7))));
    }

    #[test]
    fn write_then_load_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let values: Vec<f32> = (0..12).map(|v| (v as f32).sin()).collect();
        let h = write_raw(dir.path(), 4, 3, &values, &[1, 2, 2, 1], 48);
        let ds = load_dataset(&h).unwrap();
        let out = dir.path().join("copy.hdr");
        write_dataset(&ds, &out).unwrap();
        assert_eq!(
            fs::read(dir.path().join("p.f32")).unwrap(),
            fs::read(dir.path().join("copy.f32")).unwrap()
        );
        assert_eq!(load_dataset(&out).unwrap(), ds);
    }

    #[test]
    fn csv_loading() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, "b1,b2,class\n0.1,0.2,3\n0.3,0.4,1\n0.5,0.6,3\n").unwrap();
        let m = load_csv(&p).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.bands(), 2);
        assert_eq!(m.class_ids(), &[3, 1, 3]);
        assert_eq!(m.class_map().len(), 2);
        fs::write(&p, "0.1,0.2,3\n0.3,1\n").unwrap();
        assert!(matches!(load_csv(&p), Err(Error::Parse { line: 2, .. })));
    }

    fn four_by_one(ids: Vec<i32>) -> MulticlassDataset {
        let n = ids.len();
        MulticlassDataset::new(
            1,
            (0..n).map(|v| v as f64).collect(),
            ids,
            vec![(1, "a".into()), (2, "b".into()), (3, "c".into())],
        )
        .unwrap()
    }

    #[test]
    fn extract_pair_filters_and_orders() {
        let m = four_by_one(vec![1, 2, 3, 1]);
        let p = extract_pair(&m, 1, 2).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(
            p.labels(),
            &[Label::Positive, Label::Negative, Label::Positive]
        );
        assert_eq!(p.values(), &[0.0, 1.0, 3.0]);
        assert!(matches!(extract_pair(&m, 1, 1), Err(Error::InvalidPair(_))));
        let m = four_by_one(vec![1, 1, 3, 1]);
        assert!(matches!(extract_pair(&m, 1, 2), Err(Error::InvalidPair(_))));
    }

    #[test]
    fn split_is_disjoint_balanced_and_reproducible() {
        let ds = synth_gaussian_pair(3, 1000, 2.0, 1.0, 11).unwrap();
        let a = make_split(&ds, 1000, 1000, 7).unwrap();
        let b = make_split(&ds, 1000, 1000, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.train_indices.len(), 1000);
        assert_eq!(a.test_indices.len(), 1000);
        let mut all: Vec<usize> = a.train_indices.iter().chain(&a.test_indices).copied().collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 2000);
        let train = ds.subset(&a.train_indices);
        assert_eq!(train.count(Label::Positive), 500);
        assert_ne!(make_split(&ds, 1000, 1000, 8).unwrap(), a);
    }

    #[test]
    fn split_errors() {
        let ds = synth_gaussian_pair(2, 10, 2.0, 1.0, 1).unwrap();
        assert!(matches!(
            make_split(&ds, 15, 10, 0),
            Err(Error::InsufficientSamples(_))
        ));
        // 10 positives cannot cover 7 + 4 balanced slots
        assert!(matches!(
            make_split(&ds, 14, 8, 0),
            Err(Error::InsufficientSamples(_))
        ));
    }

    #[test]
    fn proportional_split_follows_frequencies() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for j in 0..100 {
            rows.push(vec![j as f64]);
            labels.push(if j < 75 { Label::Positive } else { Label::Negative });
        }
        let ds = LabeledDataset::from_rows(&rows, labels).unwrap();
        let plan = make_split_with(&ds, 40, 40, 3, SplitBalance::Proportional).unwrap();
        assert_eq!(ds.subset(&plan.train_indices).count(Label::Positive), 30);
        assert_eq!(ds.subset(&plan.test_indices).count(Label::Negative), 10);
    }

    #[test]
    fn synth_is_deterministic_and_noise_free_case_is_two_points() {
        let a = synth_gaussian_pair(4, 5, 3.0, 0.0, 9).unwrap();
        assert_eq!(a, synth_gaussian_pair(4, 5, 3.0, 0.0, 9).unwrap());
        assert_eq!(a.len(), 10);
        for j in 1..5 {
            assert_eq!(a.pixel(j), a.pixel(0));
            assert_eq!(a.pixel(5 + j), a.pixel(5));
        }
        let dist: f64 = a
            .pixel(0)
            .iter()
            .zip(a.pixel(5))
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((dist - 3.0).abs() < 1e-12);
        assert!(synth_gaussian_pair(0, 5, 1.0, 1.0, 0).is_err());
        assert!(synth_gaussian_pair(3, 5, 1.0, -1.0, 0).is_err());
    }

    #[test]
    fn global_max_normalization_bounds_values() {
        let ds = synth_gaussian_pair(5, 20, 4.0, 1.0, 2).unwrap();
        let n = ds.normalized(Normalization::GlobalMax);
        let m = n.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!((m - 1.0).abs() < 1e-15);
        assert_eq!(ds.normalized(Normalization::None), ds);
    }
}
