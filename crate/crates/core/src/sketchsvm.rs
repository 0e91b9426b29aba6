//! Linear SVMs with the smooth exponential loss `ℓ(r) = e^{−γr}`.
//!
//! Three objectives share one evaluation path, each of the form
//!
//! ```text
//! (1/n) Σ_j ℓ(z_j(⟨f_j, w⟩ − b_{g_j})) + (λ/2)‖w‖²
//! ```
//!
//! and differ only in the feature vectors `f_j` and bias groups `g_j`:
//!
//! - ground truth: `f_j = x_j`, one bias;
//! - sketched: `f_j = Φᵀ(ΦΦᵀ)⁻¹y_j` for pixel `j`'s pool matrix, one bias per
//!   pool entry (all biases frozen at zero gives the bias-free form);
//! - low-dimensional: `f_j = y_j ∈ ℝ^{d'}`, fixed matrix only.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sensing::{CompressedDataset, MeasurementMatrix, MeasurementPool};
use crate::solver::{self, SolverConfig};
use crate::specdata::{Label, LabeledDataset};

/// Margins below `−MARGIN_FLOOR/γ` are clamped before exponentiation.
pub const MARGIN_FLOOR: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub gamma: f64,
    pub lambda: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            lambda: 1e-3,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !(self.lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "loss needs gamma > 0 and lambda >= 0 (got gamma={}, lambda={})",
                self.gamma, self.lambda
            )));
        }
        Ok(())
    }
}

/// `(e^{−γr}, −γe^{−γr})`, with `r` clamped at `−MARGIN_FLOOR/γ`.
pub fn exp_loss(margin: f64, gamma: f64) -> (f64, f64) {
    let r = margin.max(-MARGIN_FLOOR / gamma);
    let value = (-gamma * r).exp();
    (value, -gamma * value)
}

/// Objective value and gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub grad_w: Vec<f64>,
    /// One entry per bias; a single entry for the one-bias objectives.
    pub grad_biases: Vec<f64>,
}

impl Evaluation {
    pub fn grad_b(&self) -> f64 {
        self.grad_biases[0]
    }
}

/// Whether biases are optimized or held at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BiasMode {
    #[default]
    Learned,
    /// All biases fixed at 0.
    Frozen,
}

/// Feature rows with label signs and bias groups.
struct Design {
    dim: usize,
    features: Vec<f64>,
    signs: Vec<f64>,
    groups: Vec<usize>,
    n_groups: usize,
}

impl Design {
    fn ground_truth(data: &LabeledDataset) -> Self {
        Design {
            dim: data.bands(),
            features: data.values().to_vec(),
            signs: data.labels().iter().map(|l| l.sign()).collect(),
            groups: vec![0; data.len()],
            n_groups: 1,
        }
    }

    fn sketched(data: &CompressedDataset) -> Result<Self> {
        Ok(Design {
            dim: data.pool().d(),
            features: data.lifted()?,
            signs: data.labels().iter().map(|l| l.sign()).collect(),
            groups: data.assignment().indices().to_vec(),
            n_groups: data.pool().k(),
        })
    }

    fn lowdim(data: &CompressedDataset) -> Result<Self> {
        if data.pool().k() != 1 {
            return Err(Error::InvalidArgument(format!(
                "low-dimensional objective needs a fixed matrix (k=1), got k={}",
                data.pool().k()
            )));
        }
        let features = (0..data.len())
            .flat_map(|j| data.measurement(j).iter().copied())
            .collect();
        Ok(Design {
            dim: data.d_prime(),
            features,
            signs: data.labels().iter().map(|l| l.sign()).collect(),
            groups: vec![0; data.len()],
            n_groups: 1,
        })
    }

    fn len(&self) -> usize {
        self.signs.len()
    }

    fn check(&self, w: &[f64], biases: &[f64]) -> Result<()> {
        if w.len() != self.dim || biases.len() != self.n_groups {
            return Err(Error::DimensionMismatch(format!(
                "objective expects w in R^{} and {} biases, got {} and {}",
                self.dim,
                self.n_groups,
                w.len(),
                biases.len()
            )));
        }
        Ok(())
    }

    /// Value; writes gradients when buffers are given.
    fn evaluate(
        &self,
        w: &[f64],
        biases: &[f64],
        cfg: &LossConfig,
        mut grads: Option<(&mut [f64], &mut [f64])>,
    ) -> f64 {
        let inv_n = 1.0 / self.len() as f64;
        if let Some((gw, gb)) = grads.as_mut() {
            gw.iter_mut().zip(w).for_each(|(g, wi)| *g = cfg.lambda * wi);
            gb.iter_mut().for_each(|g| *g = 0.0);
        }
        let mut loss = 0.0;
        for ((f, &z), &t) in self
            .features
            .chunks_exact(self.dim)
            .zip(&self.signs)
            .zip(&self.groups)
        {
            let score: f64 = f.iter().zip(w).map(|(a, b)| a * b).sum();
            let (l, dl) = exp_loss(z * (score - biases[t]), cfg.gamma);
            loss += l;
            if let Some((gw, gb)) = grads.as_mut() {
                let c = dl * z * inv_n;
                gw.iter_mut().zip(f).for_each(|(g, fi)| *g += c * fi);
                gb[t] -= c;
            }
        }
        let reg: f64 = w.iter().map(|v| v * v).sum();
        loss * inv_n + 0.5 * cfg.lambda * reg
    }

    fn evaluation(&self, w: &[f64], biases: &[f64], cfg: &LossConfig) -> Result<Evaluation> {
        self.check(w, biases)?;
        let mut grad_w = vec![0.0; self.dim];
        let mut grad_biases = vec![0.0; self.n_groups];
        let value = self.evaluate(w, biases, cfg, Some((&mut grad_w, &mut grad_biases)));
        Ok(Evaluation {
            value,
            grad_w,
            grad_biases,
        })
    }

    /// Minimizes from zero; returns `(w, biases, report)`.
    fn fit(&self, cfg: &LossConfig, solver_cfg: &SolverConfig, bias: BiasMode) -> Result<(Vec<f64>, Vec<f64>, FitReport)> {
        cfg.validate()?;
        let dim = self.dim;
        let (x, report) = match bias {
            BiasMode::Learned => {
                let m = solver::minimize(
                    |x, g| {
                        let (gw, gb) = g.split_at_mut(dim);
                        self.evaluate(&x[..dim], &x[dim..], cfg, Some((gw, gb)))
                    },
                    vec![0.0; dim + self.n_groups],
                    solver_cfg,
                )?;
                let report = FitReport::from(&m);
                (m.x, report)
            }
            BiasMode::Frozen => {
                let zeros = vec![0.0; self.n_groups];
                let mut scratch = vec![0.0; self.n_groups];
                let m = solver::minimize(
                    |x, g| self.evaluate(x, &zeros, cfg, Some((g, &mut scratch))),
                    vec![0.0; dim],
                    solver_cfg,
                )?;
                let report = FitReport::from(&m);
                let mut x = m.x;
                x.extend_from_slice(&zeros);
                (x, report)
            }
        };
        let biases = x[dim..].to_vec();
        let mut w = x;
        w.truncate(dim);
        Ok((w, biases, report))
    }
}

/// Objective on full spectra with margin `z(xᵀw − b)`.
pub fn objective_ground_truth(
    w: &[f64],
    b: f64,
    dataset: &LabeledDataset,
    cfg: &LossConfig,
) -> Result<Evaluation> {
    Design::ground_truth(dataset).evaluation(w, &[b], cfg)
}

/// Bias-pool objective on compressed data, margin `z(yᵀ(ΦΦᵀ)⁻¹Φw − b_t)`.
pub fn objective_sketched(
    w: &[f64],
    biases: &[f64],
    compressed: &CompressedDataset,
    cfg: &LossConfig,
) -> Result<Evaluation> {
    Design::sketched(compressed)?.evaluation(w, biases, cfg)
}

/// Objective in measurement space for a fixed matrix, margin `z(yᵀw̃ − b)`.
pub fn objective_lowdim(
    w_tilde: &[f64],
    b: f64,
    compressed: &CompressedDataset,
    cfg: &LossConfig,
) -> Result<Evaluation> {
    Design::lowdim(compressed)?.evaluation(w_tilde, &[b], cfg)
}

/// Solver outcome attached to every trained model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub objective: f64,
}

impl From<&solver::Minimum> for FitReport {
    fn from(m: &solver::Minimum) -> Self {
        FitReport {
            converged: m.converged,
            iterations: m.iterations,
            grad_norm: m.grad_norm,
            objective: m.value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fit<M> {
    pub model: M,
    pub report: FitReport,
}

fn sign_label(margin: f64) -> Label {
    // sign(0) -> +1
    if margin >= 0.0 {
        Label::Positive
    } else {
        Label::Negative
    }
}

/// `(w*, b*)` trained on full spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthClassifier {
    pub w: Vec<f64>,
    pub b: f64,
}

impl GroundTruthClassifier {
    pub fn margin(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.w).map(|(a, b)| a * b).sum::<f64>() - self.b
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        sign_label(self.margin(x))
    }

    pub fn predict_all(&self, data: &LabeledDataset) -> Vec<Label> {
        data.pixels().map(|x| self.predict(x)).collect()
    }
}

/// `(ŵ*, b_1 … b_k)` trained on compressed data, bound to its pool.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchedClassifier {
    pub w: Vec<f64>,
    pub biases: Vec<f64>,
    pool: Arc<MeasurementPool>,
}

impl SketchedClassifier {
    pub fn new(w: Vec<f64>, biases: Vec<f64>, pool: Arc<MeasurementPool>) -> Result<Self> {
        if biases.len() != pool.k() || w.len() != pool.d() {
            return Err(Error::DimensionMismatch(format!(
                "classifier with {} weights and {} biases for a pool of k={} over d={}",
                w.len(),
                biases.len(),
                pool.k(),
                pool.d()
            )));
        }
        if w.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("classifier is not finite".into()));
        }
        Ok(Self { w, biases, pool })
    }

    pub fn pool(&self) -> &MeasurementPool {
        &self.pool
    }

    /// Identifier of the pool the biases belong to (its seed).
    pub fn pool_ref(&self) -> u64 {
        self.pool.seed()
    }

    pub fn k(&self) -> usize {
        self.biases.len()
    }

    /// `yᵀ(ΦΦᵀ)⁻¹Φw − b_t` for pool entry `t`.
    pub fn margin(&self, y: &[f64], t: usize) -> Result<f64> {
        if t >= self.k() {
            return Err(Error::InvalidArgument(format!(
                "pool index {t} out of range for k={}",
                self.k()
            )));
        }
        let lifted = self.pool.matrix(t).lift(y)?;
        Ok(lifted.iter().zip(&self.w).map(|(a, b)| a * b).sum::<f64>() - self.biases[t])
    }

    pub fn predict(&self, y: &[f64], t: usize) -> Result<Label> {
        self.margin(y, t).map(sign_label)
    }

    pub fn predict_all(&self, data: &CompressedDataset) -> Result<Vec<Label>> {
        (0..data.len())
            .map(|j| self.predict(data.measurement(j), data.pool_index(j)))
            .collect()
    }
}

/// Free-function form of [`SketchedClassifier::predict`].
pub fn predict(classifier: &SketchedClassifier, y: &[f64], t: usize) -> Result<Label> {
    classifier.predict(y, t)
}

/// `(w̃*, b)` living in measurement space.
#[derive(Debug, Clone, PartialEq)]
pub struct LowDimClassifier {
    pub w_tilde: Vec<f64>,
    pub b: f64,
}

impl LowDimClassifier {
    /// `Φᵀ(ΦΦᵀ)⁻¹w̃`, the equivalent signal-space classifier.
    pub fn lift(&self, matrix: &MeasurementMatrix) -> Result<Vec<f64>> {
        matrix.lift(&self.w_tilde)
    }
}

pub fn train_ground_truth(
    dataset: &LabeledDataset,
    cfg: &LossConfig,
    solver_cfg: &SolverConfig,
) -> Result<Fit<GroundTruthClassifier>> {
    let (w, b, report) = Design::ground_truth(dataset).fit(cfg, solver_cfg, BiasMode::Learned)?;
    Ok(Fit {
        model: GroundTruthClassifier { w, b: b[0] },
        report,
    })
}

pub fn train_sketched(
    compressed: &CompressedDataset,
    cfg: &LossConfig,
    solver_cfg: &SolverConfig,
) -> Result<Fit<SketchedClassifier>> {
    train_sketched_with(compressed, cfg, solver_cfg, BiasMode::Learned)
}

pub fn train_sketched_with(
    compressed: &CompressedDataset,
    cfg: &LossConfig,
    solver_cfg: &SolverConfig,
    bias: BiasMode,
) -> Result<Fit<SketchedClassifier>> {
    let (w, biases, report) = Design::sketched(compressed)?.fit(cfg, solver_cfg, bias)?;
    Ok(Fit {
        model: SketchedClassifier::new(w, biases, compressed.shared_pool())?,
        report,
    })
}

pub fn train_lowdim(
    compressed: &CompressedDataset,
    cfg: &LossConfig,
    solver_cfg: &SolverConfig,
    bias: BiasMode,
) -> Result<Fit<LowDimClassifier>> {
    let (w_tilde, b, report) = Design::lowdim(compressed)?.fit(cfg, solver_cfg, bias)?;
    Ok(Fit {
        model: LowDimClassifier { w_tilde, b: b[0] },
        report,
    })
}

/// Classifier file contents, independent of the pool object.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredClassifier {
    pub d: usize,
    pub k: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub pool_ref: u64,
    pub w: Vec<f64>,
    pub biases: Vec<f64>,
}

impl StoredClassifier {
    /// Rebinds to `pool`, which must be the one the classifier was trained on.
    pub fn bind(self, pool: Arc<MeasurementPool>) -> Result<SketchedClassifier> {
        if pool.seed() != self.pool_ref {
            return Err(Error::InvalidArgument(format!(
                "classifier was trained on pool {}, got pool {}",
                self.pool_ref,
                pool.seed()
            )));
        }
        SketchedClassifier::new(self.w, self.biases, pool)
    }
}

const END_HEADER: &str = "end_header\n";

/// Text header followed by little-endian f64 `w` then biases.
pub fn write_classifier(
    classifier: &SketchedClassifier,
    cfg: &LossConfig,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = format!(
        "d = {}\nk = {}\ngamma = {}\nlambda = {}\npool_ref = {}\n{END_HEADER}",
        classifier.w.len(),
        classifier.k(),
        cfg.gamma,
        cfg.lambda,
        classifier.pool_ref()
    )
    .into_bytes();
    for v in classifier.w.iter().chain(&classifier.biases) {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_classifier(path: impl AsRef<Path>) -> Result<StoredClassifier> {
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
    let field = |key: &str| -> Result<&str> {
        header
            .lines()
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| k.trim() == key)
            .map(|(_, v)| v.trim())
            .ok_or_else(|| parse_err(format!("missing key '{key}'")))
    };
    fn num<T: std::str::FromStr>(s: &str, key: &str, err: impl Fn(String) -> Error) -> Result<T> {
        s.parse().map_err(|_| err(format!("{key} is not a number")))
    }
    let d: usize = num(field("d")?, "d", parse_err)?;
    let k: usize = num(field("k")?, "k", parse_err)?;
    let body = &bytes[split + END_HEADER.len()..];
    if body.len() != (d + k) * 8 {
        return Err(Error::SizeMismatch(format!(
            "classifier file {} does not hold {d} weights and {k} biases",
            path.display()
        )));
    }
    let mut values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let biases = values.split_off(d);
    Ok(StoredClassifier {
        d,
        k,
        gamma: num(field("gamma")?, "gamma", parse_err)?,
        lambda: num(field("lambda")?, "lambda", parse_err)?,
        pool_ref: num(field("pool_ref")?, "pool_ref", parse_err)?,
        w: values,
        biases,
    })
}
