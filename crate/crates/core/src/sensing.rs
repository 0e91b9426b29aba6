//! Measurement operators and compression of pixel spectra.
//!
//! A fixed coded aperture uses one `d'×d` matrix for every pixel; a DMD-style
//! sensor draws each pixel's matrix from a pool of `k` matrices. FCA is the
//! pool with `k = 1`.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed;
use crate::specdata::{Label, LabeledDataset};

/// Tolerance on `‖ΦΦᵀ − I‖_max` for orthonormal-rows matrices.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementKind {
    /// Rows taken from a random orthogonal matrix, so `ΦΦᵀ = I`.
    OrthonormalRows,
    /// Entries `±1/√d'` with equal probability.
    SignBernoulli,
}

impl MeasurementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MeasurementKind::OrthonormalRows => "orthonormal",
            MeasurementKind::SignBernoulli => "sign_bernoulli",
        }
    }
}

impl std::str::FromStr for MeasurementKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "orthonormal" => Ok(MeasurementKind::OrthonormalRows),
            "sign_bernoulli" => Ok(MeasurementKind::SignBernoulli),
            other => Err(format!(
                "unknown measurement kind '{other}' (orthonormal|sign_bernoulli)"
            )),
        }
    }
}

/// A `d'×d` measurement operator.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    rows: DMatrix<f64>,
    kind: MeasurementKind,
    seed: u64,
    /// `(ΦΦᵀ)⁻¹` for non-orthonormal kinds; `None` when singular.
    gram_inverse: Option<DMatrix<f64>>,
}

fn check_dims(d_prime: usize, d: usize) -> Result<()> {
    if d_prime == 0 || d_prime > d {
        return Err(Error::InvalidArgument(format!(
            "measurement count d'={d_prime} must satisfy 1 <= d' <= d={d}"
        )));
    }
    Ok(())
}

/// The number of `d'`-row matrices needed to span `ℝᵈ`: `⌈d/d'⌉`.
pub fn min_spanning_pool(d: usize, d_prime: usize) -> usize {
    d.div_ceil(d_prime.max(1))
}

/// Random `d'×d` matrix with orthonormal rows, deterministic per seed.
///
/// Draws a Gaussian matrix row by row and orthogonalizes the first `d'` rows
/// (Householder QR of the transpose, with the sign of each `R` diagonal
/// fixed positive). The result equals the first `d'` rows of the
/// Gram-Schmidt orthogonalization of a `d×d` Gaussian matrix, so the row
/// space is uniformly distributed.
pub fn gen_orthonormal(d_prime: usize, d: usize, seed: u64) -> Result<MeasurementMatrix> {
    check_dims(d_prime, d)?;
    let mut rng = seed::rng(seed);
    let gaussian = DMatrix::<f64>::from_row_iterator(
        d_prime,
        d,
        (0..d_prime * d).map(|_| rng.sample::<f64, _>(StandardNormal)),
    );
    let qr = gaussian.transpose().qr();
    let r = qr.r();
    let mut q = qr.q();
    for c in 0..d_prime {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    MeasurementMatrix::new(q.transpose(), MeasurementKind::OrthonormalRows, seed)
}

/// Random sign matrix with entries `±1/√d'`.
pub fn gen_sign_bernoulli(d_prime: usize, d: usize, seed: u64) -> Result<MeasurementMatrix> {
    check_dims(d_prime, d)?;
    let mut rng = seed::rng(seed);
    let scale = 1.0 / (d_prime as f64).sqrt();
    let rows = DMatrix::<f64>::from_row_iterator(
        d_prime,
        d,
        (0..d_prime * d).map(|_| if rng.random::<bool>() { scale } else { -scale }),
    );
    MeasurementMatrix::new(rows, MeasurementKind::SignBernoulli, seed)
}

pub fn generate(kind: MeasurementKind, d_prime: usize, d: usize, seed: u64) -> Result<MeasurementMatrix> {
    match kind {
        MeasurementKind::OrthonormalRows => gen_orthonormal(d_prime, d, seed),
        MeasurementKind::SignBernoulli => gen_sign_bernoulli(d_prime, d, seed),
    }
}

impl MeasurementMatrix {
    /// Wraps explicit rows. Orthonormal-rows matrices are checked against
    /// [`ORTHONORMAL_TOLERANCE`].
    pub fn new(rows: DMatrix<f64>, kind: MeasurementKind, seed: u64) -> Result<Self> {
        check_dims(rows.nrows(), rows.ncols())?;
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("measurement matrix is not finite".into()));
        }
        let gram = &rows * rows.transpose();
        let gram_inverse = match kind {
            MeasurementKind::OrthonormalRows => {
                let dev = (&gram - DMatrix::identity(rows.nrows(), rows.nrows())).amax();
                if dev > ORTHONORMAL_TOLERANCE {
                    return Err(Error::InvalidArgument(format!(
                        "rows are not orthonormal (max deviation {dev:e})"
                    )));
                }
                None
            }
            MeasurementKind::SignBernoulli => gram.cholesky().map(|c| c.inverse()),
        };
        Ok(Self {
            rows,
            kind,
            seed,
            gram_inverse,
        })
    }

    /// The `d×d` identity (or its first `d'` rows).
    pub fn identity(d_prime: usize, d: usize) -> Result<Self> {
        check_dims(d_prime, d)?;
        Self::new(
            DMatrix::identity(d_prime, d),
            MeasurementKind::OrthonormalRows,
            0,
        )
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn kind(&self) -> MeasurementKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn d_prime(&self) -> usize {
        self.rows.nrows()
    }

    pub fn d(&self) -> usize {
        self.rows.ncols()
    }

    /// `y = Φx`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for a {}x{} measurement matrix",
                x.len(),
                self.d_prime(),
                self.d()
            )));
        }
        let mut y = vec![0.0; self.d_prime()];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.rows.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
        Ok(y)
    }

    /// Maps a measurement back to signal space: `Φᵀ(ΦΦᵀ)⁻¹y`.
    ///
    /// For a pixel `x` this is `Px`, the orthogonal projection onto the row
    /// space, and `⟨lift(Φx), w⟩` is the compressed-domain estimate of `⟨x, w⟩`.
    pub fn lift(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.d_prime() {
            return Err(Error::DimensionMismatch(format!(
                "measurement of length {} for d'={}",
                y.len(),
                self.d_prime()
            )));
        }
        let coeffs: Vec<f64> = match self.kind {
            MeasurementKind::OrthonormalRows => y.to_vec(),
            MeasurementKind::SignBernoulli => {
                let inv = self
                    .gram_inverse
                    .as_ref()
                    .ok_or(Error::SingularGram { seed: self.seed })?;
                (inv * DVector::from_column_slice(y)).as_slice().to_vec()
            }
        };
        let mut out = vec![0.0; self.d()];
        for (i, c) in coeffs.iter().enumerate() {
            for (o, r) in out.iter_mut().zip(self.rows.row(i).iter()) {
                *o += c * r;
            }
        }
        Ok(out)
    }

    /// Orthogonal projection of `v` onto the row space of `Φ`.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.lift(&self.apply(v)?)
    }
}

/// Free-function form of [`MeasurementMatrix::project`].
pub fn project(matrix: &MeasurementMatrix, v: &[f64]) -> Result<Vec<f64>> {
    matrix.project(v)
}

/// `k` measurement matrices of identical shape.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPool {
    matrices: Vec<MeasurementMatrix>,
    seed: u64,
}

impl MeasurementPool {
    pub fn new(matrices: Vec<MeasurementMatrix>, seed: u64) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::InvalidArgument("pool must hold at least one matrix".into()))?;
        let shape = (first.d_prime(), first.d());
        if matrices.iter().any(|m| (m.d_prime(), m.d()) != shape) {
            return Err(Error::DimensionMismatch(
                "pool matrices differ in shape".into(),
            ));
        }
        Ok(Self { matrices, seed })
    }

    /// Pool of one matrix (the FCA configuration).
    pub fn single(matrix: MeasurementMatrix) -> Self {
        let seed = matrix.seed;
        Self {
            matrices: vec![matrix],
            seed,
        }
    }

    pub fn k(&self) -> usize {
        self.matrices.len()
    }

    pub fn d_prime(&self) -> usize {
        self.matrices[0].d_prime()
    }

    pub fn d(&self) -> usize {
        self.matrices[0].d()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kind(&self) -> MeasurementKind {
        self.matrices[0].kind
    }

    pub fn matrix(&self, t: usize) -> &MeasurementMatrix {
        &self.matrices[t]
    }

    pub fn matrices(&self) -> &[MeasurementMatrix] {
        &self.matrices
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.matrices.iter().map(|m| m.seed).collect()
    }

    /// All rows stacked into a `(k·d')×d` matrix.
    pub fn stacked(&self) -> DMatrix<f64> {
        let (dp, d) = (self.d_prime(), self.d());
        DMatrix::from_fn(self.k() * dp, d, |r, c| self.matrices[r / dp].rows[(r % dp, c)])
    }
}

pub fn gen_pool(k: usize, d_prime: usize, d: usize, seed: u64) -> Result<MeasurementPool> {
    gen_pool_with(MeasurementKind::OrthonormalRows, k, d_prime, d, seed)
}

/// `k` independent matrices seeded `seed+1 … seed+k`.
pub fn gen_pool_with(
    kind: MeasurementKind,
    k: usize,
    d_prime: usize,
    d: usize,
    seed: u64,
) -> Result<MeasurementPool> {
    if k == 0 {
        return Err(Error::InvalidArgument("pool size k must be >= 1".into()));
    }
    check_dims(d_prime, d)?;
    if k > 1 && k < min_spanning_pool(d, d_prime) {
        warn!(
            "pool size k={k} < ceil(d/d')={}: pool rows cannot span the spectral space",
            min_spanning_pool(d, d_prime)
        );
    }
    let matrices = (1..=k as u64)
        .map(|i| generate(kind, d_prime, d, seed.wrapping_add(i)))
        .collect::<Result<Vec<_>>>()?;
    MeasurementPool::new(matrices, seed)
}

/// Pool index of every pixel (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentMap {
    indices: Vec<usize>,
    k: usize,
    seed: u64,
}

impl AssignmentMap {
    pub fn from_indices(indices: Vec<usize>, k: usize, seed: u64) -> Result<Self> {
        if let Some(bad) = indices.iter().find(|&&t| t >= k) {
            return Err(Error::InvalidArgument(format!(
                "pool index {bad} out of range for k={k}"
            )));
        }
        Ok(Self { indices, k, seed })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn usage(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        self.indices.iter().for_each(|&t| counts[t] += 1);
        counts
    }
}

/// i.i.d. uniform pool indices for `n` pixels.
pub fn assign(n: usize, k: usize, seed: u64) -> Result<AssignmentMap> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidArgument("assign needs n >= 1 and k >= 1".into()));
    }
    let mut rng = seed::rng(seed);
    let indices = (0..n).map(|_| rng.random_range(0..k)).collect();
    Ok(AssignmentMap { indices, k, seed })
}

/// Measurements `y_j = Φ^{(t_j)} x_j` with their labels and pool.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedDataset {
    measurements: Vec<f64>,
    assignment: AssignmentMap,
    labels: Vec<Label>,
    pool: Arc<MeasurementPool>,
}

impl CompressedDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn d_prime(&self) -> usize {
        self.pool.d_prime()
    }

    pub fn measurement(&self, j: usize) -> &[f64] {
        let dp = self.d_prime();
        &self.measurements[j * dp..(j + 1) * dp]
    }

    pub fn pool_index(&self, j: usize) -> usize {
        self.assignment.indices[j]
    }

    pub fn assignment(&self) -> &AssignmentMap {
        &self.assignment
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn pool(&self) -> &MeasurementPool {
        &self.pool
    }

    pub fn shared_pool(&self) -> Arc<MeasurementPool> {
        Arc::clone(&self.pool)
    }

    /// `Φ^{(t_j)ᵀ}(Φ^{(t_j)}Φ^{(t_j)ᵀ})⁻¹ y_j` for every pixel, pixel-major.
    pub fn lifted(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len() * self.pool.d());
        for j in 0..self.len() {
            out.extend(self.pool.matrix(self.pool_index(j)).lift(self.measurement(j))?);
        }
        Ok(out)
    }
}

pub fn sense(
    dataset: &LabeledDataset,
    pool: Arc<MeasurementPool>,
    map: &AssignmentMap,
) -> Result<CompressedDataset> {
    if map.len() != dataset.len() {
        return Err(Error::DimensionMismatch(format!(
            "assignment for {} pixels, dataset has {}",
            map.len(),
            dataset.len()
        )));
    }
    if map.k() != pool.k() {
        return Err(Error::DimensionMismatch(format!(
            "assignment drawn for k={}, pool has k={}",
            map.k(),
            pool.k()
        )));
    }
    if pool.d() != dataset.bands() {
        return Err(Error::DimensionMismatch(format!(
            "pool expects d={}, dataset has {} bands",
            pool.d(),
            dataset.bands()
        )));
    }
    let mut measurements = Vec::with_capacity(dataset.len() * pool.d_prime());
    for (x, &t) in dataset.pixels().zip(map.indices()) {
        measurements.extend(pool.matrix(t).apply(x)?);
    }
    Ok(CompressedDataset {
        measurements,
        assignment: map.clone(),
        labels: dataset.labels().to_vec(),
        pool,
    })
}

const END_HEADER: &str = "end_header\n";

/// Writes a pool as a text header followed by the row-major f64 matrices.
pub fn write_pool(pool: &MeasurementPool, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let seeds: Vec<String> = pool.seeds().iter().map(u64::to_string).collect();
    let mut bytes = format!(
        "k = {}\nd_prime = {}\nd = {}\nkind = {}\npool_seed = {}\nseeds = {}\n{END_HEADER}",
        pool.k(),
        pool.d_prime(),
        pool.d(),
        pool.kind().as_str(),
        pool.seed(),
        seeds.join(",")
    )
    .into_bytes();
    for m in pool.matrices() {
        for i in 0..m.d_prime() {
            for j in 0..m.d() {
                bytes.extend_from_slice(&m.rows[(i, j)].to_le_bytes());
            }
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_pool(path: impl AsRef<Path>) -> Result<MeasurementPool> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |message: String| Error::Parse {
        path: path.to_owned(),
        line: 0,
        message,
    };
    let split = bytes
        .windows(END_HEADER.len())
        .position(|w| w == END_HEADER.as_bytes())
        .ok_or_else(|| parse_err("missing end_header".into()))?;
    let header = std::str::from_utf8(&bytes[..split]).map_err(|e| parse_err(e.to_string()))?;
    let body = &bytes[split + END_HEADER.len()..];
    let field = |key: &str| -> Result<&str> {
        header
            .lines()
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| k.trim() == key)
            .map(|(_, v)| v.trim())
            .ok_or_else(|| parse_err(format!("missing key '{key}'")))
    };
    let num = |key: &str| -> Result<u64> {
        field(key)?
            .parse()
            .map_err(|_| parse_err(format!("{key} is not an integer")))
    };
    let (k, dp, d) = (num("k")? as usize, num("d_prime")? as usize, num("d")? as usize);
    let kind: MeasurementKind = field("kind")?.parse().map_err(parse_err)?;
    let seeds: Vec<u64> = field("seeds")?
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| parse_err("bad seed list".into())))
        .collect::<Result<_>>()?;
    if seeds.len() != k || body.len() != k * dp * d * 8 {
        return Err(Error::SizeMismatch(format!(
            "pool file {} does not hold {k} matrices of {dp}x{d}",
            path.display()
        )));
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let matrices = seeds
        .iter()
        .map(|&s| {
            let rows = DMatrix::from_row_iterator(dp, d, values.by_ref().take(dp * d));
            MeasurementMatrix::new(rows, kind, s)
        })
        .collect::<Result<Vec<_>>>()?;
    MeasurementPool::new(matrices, num("pool_seed")?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specdata::synth_gaussian_pair;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn max_gram_deviation(m: &MeasurementMatrix) -> f64 {
        let g = m.rows() * m.rows().transpose();
        (g - DMatrix::identity(m.d_prime(), m.d_prime())).amax()
    }

    #[test]
    fn square_orthonormal_is_orthogonal() {
        let m = gen_orthonormal(3, 3, 5).unwrap();
        let g = m.rows().transpose() * m.rows();
        assert!((g - DMatrix::identity(3, 3)).amax() <= 1e-10);
    }

    #[test]
    fn orthonormal_rows_for_many_shapes() {
        for (dp, d) in [(1, 1), (1, 103), (3, 103), (5, 9), (20, 20), (7, 64)] {
            for s in 0..5 {
                let m = gen_orthonormal(dp, d, s).unwrap();
                assert_eq!((m.d_prime(), m.d()), (dp, d));
                assert!(max_gram_deviation(&m) <= 1e-10);
                for i in 0..dp {
                    assert!((m.rows().row(i).norm() - 1.0).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn orthonormal_is_seed_deterministic() {
        assert_eq!(gen_orthonormal(2, 6, 3).unwrap(), gen_orthonormal(2, 6, 3).unwrap());
        assert_ne!(gen_orthonormal(2, 6, 3).unwrap(), gen_orthonormal(2, 6, 4).unwrap());
    }

    #[test]
    fn too_many_rows_rejected() {
        assert!(gen_orthonormal(4, 3, 0).is_err());
        assert!(gen_orthonormal(0, 3, 0).is_err());
        assert!(gen_pool(0, 1, 3, 0).is_err());
    }

    #[test]
    fn sign_bernoulli_entries() {
        let m = gen_sign_bernoulli(3, 50, 1).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!(m.rows().iter().all(|&v| v == s || v == -s));
    }

    #[test]
    fn pool_shapes_and_seeds() {
        let p = gen_pool(1, 2, 5, 10).unwrap();
        assert_eq!(p.k(), 1);
        assert_eq!(p.seeds(), vec![11]);
        let p = gen_pool(min_spanning_pool(103, 1), 1, 103, 0).unwrap();
        assert_eq!(p.k(), 103);
        assert_eq!(min_spanning_pool(103, 3), 35);
        assert_eq!(p.seeds(), (1..=103).collect::<Vec<u64>>());
    }

    #[test]
    fn default_pool_spans_signal_space() {
        // numeric rank from singular values on small instances
        for (dp, d) in [(1, 6), (2, 7), (3, 9), (4, 10)] {
            for s in 0..10 {
                let p = gen_pool(min_spanning_pool(d, dp), dp, d, 100 * s).unwrap();
                let sv = p.stacked().singular_values();
                let rank = sv.iter().filter(|&&v| v > 1e-10 * sv.max()).count();
                assert_eq!(rank, d, "d'={dp} d={d} seed={s}");
            }
        }
    }

    #[test]
    fn assignment_concentration() {
        let k1 = assign(50, 1, 3).unwrap();
        assert!(k1.indices().iter().all(|&t| t == 0));
        // Binomial(10^4, 0.1): mean 1000, sd 30; 5 sd gives [850, 1150].
        for s in 0..20 {
            let a = assign(10_000, 10, s).unwrap();
            for c in a.usage() {
                assert!((850..=1150).contains(&c), "seed {s}: count {c}");
            }
        }
        let a = assign(2000, 20, 1).unwrap();
        assert!(a.usage().iter().all(|&c| c > 1));
        assert_eq!(assign(100, 7, 9).unwrap(), assign(100, 7, 9).unwrap());
    }

    #[test]
    fn identity_and_coordinate_sensing() {
        let ds = synth_gaussian_pair(4, 6, 2.0, 1.0, 3).unwrap();
        let pool = Arc::new(MeasurementPool::single(MeasurementMatrix::identity(4, 4).unwrap()));
        let c = sense(&ds, pool, &assign(ds.len(), 1, 0).unwrap()).unwrap();
        for j in 0..ds.len() {
            assert_eq!(c.measurement(j), ds.pixel(j));
        }
        let e1 = Arc::new(MeasurementPool::single(MeasurementMatrix::identity(1, 4).unwrap()));
        let c = sense(&ds, e1, &assign(ds.len(), 1, 0).unwrap()).unwrap();
        for j in 0..ds.len() {
            assert_eq!(c.measurement(j), &[ds.pixel(j)[0]]);
        }
    }

    #[test]
    fn sensing_matches_naive_loop() {
        let ds = synth_gaussian_pair(9, 20, 2.0, 1.0, 4).unwrap();
        let pool = Arc::new(gen_pool(4, 3, 9, 77).unwrap());
        let map = assign(ds.len(), 4, 5).unwrap();
        let c = sense(&ds, Arc::clone(&pool), &map).unwrap();
        for j in 0..ds.len() {
            let phi = pool.matrix(map.indices()[j]).rows();
            for i in 0..3 {
                let mut acc = 0.0;
                for b in 0..9 {
                    acc += phi[(i, b)] * ds.pixel(j)[b];
                }
                let got = c.measurement(j)[i];
                assert!((got - acc).abs() <= 1e-12 * acc.abs().max(1.0));
            }
        }
    }

    #[test]
    fn sense_dimension_mismatch() {
        let ds = synth_gaussian_pair(5, 3, 2.0, 1.0, 4).unwrap();
        let pool = Arc::new(gen_pool(2, 1, 6, 0).unwrap());
        assert!(sense(&ds, Arc::clone(&pool), &assign(6, 2, 0).unwrap()).is_err());
        assert!(sense(&ds, pool, &assign(5, 2, 0).unwrap()).is_err());
    }

    #[test]
    fn single_pool_equals_pool_of_identical_matrices() {
        let ds = synth_gaussian_pair(6, 10, 2.0, 1.0, 8).unwrap();
        let m = gen_orthonormal(2, 6, 2).unwrap();
        let single = sense(
            &ds,
            Arc::new(MeasurementPool::single(m.clone())),
            &assign(20, 1, 0).unwrap(),
        )
        .unwrap();
        let many = sense(
            &ds,
            Arc::new(MeasurementPool::new(vec![m.clone(), m.clone(), m], 0).unwrap()),
            &assign(20, 3, 1).unwrap(),
        )
        .unwrap();
        for j in 0..20 {
            assert_eq!(single.measurement(j), many.measurement(j));
        }
    }

    #[test]
    fn projection_properties() {
        let v: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).cos()).collect();
        for m in [gen_orthonormal(3, 8, 1).unwrap(), gen_sign_bernoulli(3, 8, 2).unwrap()] {
            let p = m.project(&v).unwrap();
            let pp = m.project(&p).unwrap();
            assert!(p.iter().zip(&pp).all(|(a, b)| (a - b).abs() <= 1e-10));
            let a = [0.3, -1.2, 2.0];
            let in_span: Vec<f64> = (0..8)
                .map(|c| (0..3).map(|r| m.rows()[(r, c)] * a[r]).sum())
                .collect();
            let back = m.project(&in_span).unwrap();
            assert!(back.iter().zip(&in_span).all(|(a, b)| (a - b).abs() <= 1e-10));
        }
        let full = gen_orthonormal(8, 8, 3).unwrap();
        let p = full.project(&v).unwrap();
        assert!(p.iter().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-10));
    }

    #[test]
    fn repeated_sign_rows_are_singular() {
        let rows = DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 1.0, 1.0, -1.0, 1.0]);
        let m = MeasurementMatrix::new(rows, MeasurementKind::SignBernoulli, 42).unwrap();
        assert!(matches!(
            m.project(&[1.0, 2.0, 3.0]),
            Err(Error::SingularGram { seed: 42 })
        ));
    }

    #[test]
    fn sketch_is_unbiased_after_rescaling() {
        // E[(d/d')·⟨Px, w⟩] = ⟨x, w⟩ for uniformly random d'-dim row spaces.
        let (d, dp, n) = (8, 2, 100_000u64);
        let x: Vec<f64> = (0..d).map(|i| 1.0 + i as f64 * 0.25).collect();
        let w: Vec<f64> = (0..d).map(|i| (i as f64).sin() + 0.5).collect();
        let truth = dot(&x, &w);
        let scale = d as f64 / dp as f64;
        let samples: Vec<f64> = (0..n)
            .map(|s| scale * dot(&gen_orthonormal(dp, d, s).unwrap().project(&x).unwrap(), &w))
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - truth).abs() <= 5.0 * se, "mean {mean} truth {truth} se {se}");
    }

    #[test]
    fn pool_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = gen_pool(3, 2, 5, 9).unwrap();
        let path = dir.path().join("pool.bin");
        write_pool(&p, &path).unwrap();
        assert_eq!(read_pool(&path).unwrap(), p);
        let b = gen_pool_with(MeasurementKind::SignBernoulli, 2, 2, 5, 1).unwrap();
        write_pool(&b, &path).unwrap();
        assert_eq!(read_pool(&path).unwrap(), b);
    }
}
