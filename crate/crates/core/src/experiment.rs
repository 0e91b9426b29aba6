//! Configuration-driven experiment runs.
//!
//! A config is a flat `key = value` text file (`#` starts a comment). Every
//! key can also be given on the command line; command-line values win.
//! A run writes into `output_dir`:
//!
//! - `resolved.cfg`: every setting with defaults and `k = auto` resolved,
//!   plus derived pair seeds as comments; re-running it reproduces the run;
//! - `trials.csv`: one row per fold of every trial;
//! - `report.csv`, `tables.md`: per-pair summaries and pairwise tables;
//! - `histograms/`: `bin_left,count` accuracy histograms per pair and scheme;
//! - `dumps/`: the pool and classifier of trial 0, fold 0, per pair and scheme.
//!
//! `output_dir` and `workers` do not influence results and are left out of
//! `resolved.cfg`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use crate::error::{Error, Result};
use crate::eval::{self, render, Scheme, SweepReport, TrialConfig};
use crate::sensing::{self, MeasurementKind};
use crate::sketchsvm::{self, LossConfig};
use crate::solver::SolverConfig;
use crate::specdata::{self, MulticlassDataset, Normalization, SplitBalance};

/// Recognized keys, in `resolved.cfg` order.
pub const KEYS: &[&str] = &[
    "dataset",
    "synth_d",
    "synth_n_per_class",
    "synth_separation",
    "synth_sigma",
    "synth_seed",
    "classes",
    "schemes",
    "d_prime",
    "k",
    "kind",
    "trials",
    "n_train",
    "n_test",
    "balance",
    "normalize",
    "gamma",
    "lambda",
    "gamma_ground_truth",
    "lambda_ground_truth",
    "max_iterations",
    "gradient_tolerance",
    "lbfgs_memory",
    "master_seed",
    "output_dir",
    "workers",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub d: usize,
    pub n_per_class: usize,
    pub separation: f64,
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic(SynthSpec),
    /// A `.csv` file or a dataset header.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolSize {
    /// `⌈d/d'⌉`.
    Auto,
    Fixed(usize),
}

impl PoolSize {
    pub fn resolve(self, d: usize, d_prime: usize) -> usize {
        match self {
            PoolSize::Auto => sensing::min_spanning_pool(d, d_prime),
            PoolSize::Fixed(k) => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClassSelection {
    /// Every declared class, in declaration order.
    All,
    List(Vec<i32>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub classes: ClassSelection,
    pub schemes: Vec<Scheme>,
    pub d_prime: usize,
    pub k: PoolSize,
    pub kind: MeasurementKind,
    pub trials: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub balance: SplitBalance,
    pub normalize: Normalization,
    pub loss: LossConfig,
    pub loss_ground_truth: LossConfig,
    pub solver: SolverConfig,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// 0 means one per available core.
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// Where a setting came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Flag(String),
    Default,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub origin: Origin,
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match &self.origin {
            Origin::Line(l) => write!(f, "line {l}: {sev}: {}", self.message),
            Origin::Flag(k) => write!(f, "flag --{k}: {sev}: {}", self.message),
            Origin::Default => write!(f, "{sev}: {}", self.message),
        }
    }
}

/// Raw `key -> (origin, value)` settings before typing.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (Origin, String)>,
    /// Base for relative dataset paths.
    base_dir: PathBuf,
    diagnostics: Vec<Diagnostic>,
}

impl RawConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Self {
        let mut raw = RawConfig {
            base_dir: base_dir.into(),
            ..RawConfig::default()
        };
        for (i, line) in text.lines().enumerate() {
            let origin = Origin::Line(i + 1);
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                raw.error(origin, format!("expected 'key = value', got '{line}'"));
                continue;
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                raw.error(origin, format!("unknown key '{key}'"));
                continue;
            }
            if let Some((Origin::Line(prev), _)) = raw.entries.get(key) {
                let message = format!("'{key}' already set on line {prev}");
                raw.error(origin.clone(), message);
            }
            raw.entries
                .insert(key.to_owned(), (origin, value.trim().to_owned()));
        }
        raw
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self::parse(&text, base))
    }

    /// The preset behind `--quick`: small synthetic data, 50 trials.
    pub fn quick() -> Self {
        let mut raw = RawConfig::default();
        for (k, v) in [
            ("dataset", "synthetic"),
            ("synth_d", "16"),
            ("synth_n_per_class", "200"),
            ("synth_separation", "6"),
            ("synth_sigma", "0.5"),
            ("trials", "50"),
            ("n_train", "100"),
            ("n_test", "100"),
            ("d_prime", "1"),
            ("output_dir", "quick_out"),
        ] {
            raw.entries.insert(k.into(), (Origin::Default, v.into()));
        }
        raw
    }

    /// Applies a command-line value; unknown keys are reported.
    pub fn set_flag(&mut self, key: &str, value: &str) {
        let key = key.replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            self.error(Origin::Flag(key.clone()), format!("unknown key '{key}'"));
            return;
        }
        self.entries
            .insert(key.clone(), (Origin::Flag(key), value.to_owned()));
    }

    fn error(&mut self, origin: Origin, message: String) {
        self.diagnostics.push(Diagnostic {
            origin,
            severity: Severity::Error,
            message,
        });
    }

    fn get(&self, key: &str) -> Option<&(Origin, String)> {
        self.entries.get(key)
    }

    /// Typed config plus every diagnostic found. The config is `None` when
    /// any error was reported.
    pub fn resolve(&self) -> (Option<ExperimentConfig>, Vec<Diagnostic>) {
        let mut diags = self.diagnostics.clone();
        let field = |key: &str, default: &str| -> (Origin, String) {
            self.get(key)
                .cloned()
                .unwrap_or_else(|| (Origin::Default, default.to_owned()))
        };
        macro_rules! typed {
            ($key:expr, $default:expr, $ty:ty) => {{
                let (origin, text) = field($key, $default);
                match text.parse::<$ty>() {
                    Ok(v) => (origin, v),
                    Err(e) => {
                        diags.push(Diagnostic {
                            origin: origin.clone(),
                            severity: Severity::Error,
                            message: format!("{}: cannot parse '{}': {}", $key, text, e),
                        });
                        (origin, $default.parse::<$ty>().unwrap_or_default())
                    }
                }
            }};
        }

        let (_, dataset_text) = field("dataset", "synthetic");
        let (_, synth_d) = typed!("synth_d", "32", usize);
        let (_, synth_n) = typed!("synth_n_per_class", "1000", usize);
        let (_, synth_sep) = typed!("synth_separation", "8", f64);
        let (o_sigma, synth_sigma) = typed!("synth_sigma", "0.5", f64);
        let (_, synth_seed) = typed!("synth_seed", "1", u64);
        let dataset = if dataset_text == "synthetic" {
            DatasetSource::Synthetic(SynthSpec {
                d: synth_d,
                n_per_class: synth_n,
                separation: synth_sep,
                sigma: synth_sigma,
                seed: synth_seed,
            })
        } else {
            let p = PathBuf::from(&dataset_text);
            let p = if p.is_relative() { self.base_dir.join(p) } else { p };
            DatasetSource::File(fs::canonicalize(&p).unwrap_or(p))
        };
        if let DatasetSource::Synthetic(s) = &dataset {
            check(s.d >= 1, &Origin::Default, "synth_d must be >= 1".into(), &mut diags);
            check(s.n_per_class >= 1, &Origin::Default, "synth_n_per_class must be >= 1".into(), &mut diags);
            check(s.sigma >= 0.0, &o_sigma, "synth_sigma must be >= 0".into(), &mut diags);
        }

        let (o_classes, classes_text) = field("classes", "all");
        let classes = if classes_text == "all" {
            ClassSelection::All
        } else {
            let ids: std::result::Result<Vec<i32>, _> =
                classes_text.split(',').map(|c| c.trim().parse::<i32>()).collect();
            match ids {
                Ok(ids) => {
                    let mut sorted = ids.clone();
                    sorted.sort_unstable();
                    sorted.dedup();
                    check(ids.len() >= 2, &o_classes, "classes needs at least two ids".into(), &mut diags);
                    check(sorted.len() == ids.len(), &o_classes, "classes lists an id twice".into(), &mut diags);
                    ClassSelection::List(ids)
                }
                Err(_) => {
                    check(false, &o_classes, format!("classes: expected 'all' or a comma-separated id list, got '{classes_text}'"), &mut diags);
                    ClassSelection::All
                }
            }
        };

        let (o_schemes, schemes_text) = field("schemes", "fca,dmd");
        let mut schemes = Vec::new();
        for s in schemes_text.split(',').map(str::trim) {
            match s.parse::<Scheme>() {
                Ok(s) if !schemes.contains(&s) => schemes.push(s),
                Ok(_) => check(false, &o_schemes, format!("scheme '{s}' listed twice"), &mut diags),
                Err(e) => check(false, &o_schemes, e, &mut diags),
            }
        }
        schemes.sort();

        let (o_dp, d_prime) = typed!("d_prime", "1", usize);
        check(d_prime >= 1, &o_dp, "d_prime must be >= 1".into(), &mut diags);
        let (o_k, k_text) = field("k", "auto");
        let k = if k_text == "auto" {
            PoolSize::Auto
        } else {
            match k_text.parse::<usize>() {
                Ok(k) => {
                    check(k >= 1, &o_k, "k must be >= 1 or 'auto'".into(), &mut diags);
                    PoolSize::Fixed(k)
                }
                Err(_) => {
                    check(false, &o_k, format!("k: expected an integer or 'auto', got '{k_text}'"), &mut diags);
                    PoolSize::Auto
                }
            }
        };
        let (o_kind, kind_text) = field("kind", "orthonormal");
        let kind = kind_text.parse::<MeasurementKind>().unwrap_or_else(|e| {
            check(false, &o_kind, e, &mut diags);
            MeasurementKind::OrthonormalRows
        });
        let (o_trials, trials) = typed!("trials", "1000", usize);
        check(trials >= 1, &o_trials, "trials must be ≥ 1".into(), &mut diags);
        let (o_tr, n_train) = typed!("n_train", "1000", usize);
        check(n_train >= 2, &o_tr, "n_train must be >= 2".into(), &mut diags);
        let (o_te, n_test) = typed!("n_test", "1000", usize);
        check(n_test >= 2, &o_te, "n_test must be >= 2".into(), &mut diags);
        let (o_bal, bal_text) = field("balance", "balanced");
        let balance = bal_text.parse::<SplitBalance>().unwrap_or_else(|e| {
            check(false, &o_bal, e, &mut diags);
            SplitBalance::Balanced
        });
        let (o_norm, norm_text) = field("normalize", "global_max");
        let normalize = norm_text.parse::<Normalization>().unwrap_or_else(|e| {
            check(false, &o_norm, e, &mut diags);
            Normalization::GlobalMax
        });
        let (o_g, gamma) = typed!("gamma", "1", f64);
        check(gamma > 0.0, &o_g, "gamma must be > 0".into(), &mut diags);
        let (o_l, lambda) = typed!("lambda", "0.001", f64);
        check(lambda >= 0.0, &o_l, "lambda must be >= 0".into(), &mut diags);
        let (o_gg, gamma_gt) = typed!("gamma_ground_truth", &gamma.to_string(), f64);
        check(gamma_gt > 0.0, &o_gg, "gamma_ground_truth must be > 0".into(), &mut diags);
        let (o_lg, lambda_gt) = typed!("lambda_ground_truth", &lambda.to_string(), f64);
        check(lambda_gt >= 0.0, &o_lg, "lambda_ground_truth must be >= 0".into(), &mut diags);
        let (o_it, max_iterations) = typed!("max_iterations", "5000", usize);
        check(max_iterations >= 1, &o_it, "max_iterations must be >= 1".into(), &mut diags);
        let (o_tol, gradient_tolerance) = typed!("gradient_tolerance", "1e-7", f64);
        check(gradient_tolerance > 0.0, &o_tol, "gradient_tolerance must be > 0".into(), &mut diags);
        let (o_mem, memory) = typed!("lbfgs_memory", "10", usize);
        check(memory >= 1, &o_mem, "lbfgs_memory must be >= 1".into(), &mut diags);
        let (_, master_seed) = typed!("master_seed", "0", u64);
        let (_, output_dir) = field("output_dir", "out");
        let (_, workers) = typed!("workers", "0", usize);

        let ok = !diags.iter().any(|d| d.severity == Severity::Error);
        let cfg = ExperimentConfig {
            dataset,
            classes,
            schemes,
            d_prime,
            k,
            kind,
            trials,
            n_train,
            n_test,
            balance,
            normalize,
            loss: LossConfig { gamma, lambda },
            loss_ground_truth: LossConfig {
                gamma: gamma_gt,
                lambda: lambda_gt,
            },
            solver: SolverConfig {
                max_iterations,
                gradient_tolerance,
                memory,
                ..SolverConfig::default()
            },
            master_seed,
            output_dir: PathBuf::from(output_dir),
            workers,
        };
        (ok.then_some(cfg), diags)
    }
}

fn check(cond: bool, origin: &Origin, message: String, diags: &mut Vec<Diagnostic>) {
    if !cond {
        diags.push(Diagnostic {
            origin: origin.clone(),
            severity: Severity::Error,
            message,
        });
    }
}

fn k_origin(raw: &RawConfig) -> Origin {
    raw.get("k").map_or(Origin::Default, |(o, _)| o.clone())
}

fn span_warning(origin: Origin, k: usize, d: usize, d_prime: usize) -> Option<Diagnostic> {
    let need = sensing::min_spanning_pool(d, d_prime);
    (k < need).then(|| Diagnostic {
        origin,
        severity: Severity::Warning,
        message: format!(
            "k={k} is below ceil(d/d')={need} for d={d}, d'={d_prime}: the pool cannot span the spectral space"
        ),
    })
}

/// Band count of the configured dataset without loading a header's raw data.
fn dataset_bands(source: &DatasetSource) -> Result<usize> {
    match source {
        DatasetSource::Synthetic(s) => Ok(s.d),
        DatasetSource::File(p) if is_csv(p) => Ok(specdata::load_csv(p)?.bands()),
        DatasetSource::File(p) => Ok(specdata::header_dims(p)?.1),
    }
}

fn is_csv(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// All problems with a config: parse and range errors, a missing dataset,
/// `d' > d`, and a warning when `k < ⌈d/d'⌉`.
pub fn validate_raw(raw: &RawConfig) -> Vec<Diagnostic> {
    let (cfg, mut diags) = raw.resolve();
    let Some(cfg) = cfg else { return diags };
    match dataset_bands(&cfg.dataset) {
        Ok(d) => {
            if cfg.d_prime > d {
                diags.push(Diagnostic {
                    origin: raw.get("d_prime").map_or(Origin::Default, |(o, _)| o.clone()),
                    severity: Severity::Error,
                    message: format!("d_prime={} exceeds the band count d={d}", cfg.d_prime),
                });
            } else if let PoolSize::Fixed(k) = cfg.k {
                diags.extend(span_warning(k_origin(raw), k, d, cfg.d_prime));
            }
        }
        Err(e) => diags.push(Diagnostic {
            origin: raw.get("dataset").map_or(Origin::Default, |(o, _)| o.clone()),
            severity: Severity::Error,
            message: format!("dataset unusable: {e}"),
        }),
    }
    diags
}

pub fn validate(path: impl AsRef<Path>) -> Result<Vec<Diagnostic>> {
    Ok(validate_raw(&RawConfig::load(path)?))
}

fn load_data(cfg: &ExperimentConfig) -> Result<MulticlassDataset> {
    let data = match &cfg.dataset {
        DatasetSource::Synthetic(s) => {
            let pair = specdata::synth_gaussian_pair(s.d, s.n_per_class, s.separation, s.sigma, s.seed)?;
            let classes = pair.classes.clone().expect("synthetic pairs carry class names");
            let ids = pair
                .labels()
                .iter()
                .map(|l| match l {
                    specdata::Label::Positive => classes.positive_id,
                    specdata::Label::Negative => classes.negative_id,
                })
                .collect();
            MulticlassDataset::new(
                pair.bands(),
                pair.values().to_vec(),
                ids,
                vec![
                    (classes.positive_id, classes.positive_name),
                    (classes.negative_id, classes.negative_name),
                ],
            )?
        }
        DatasetSource::File(p) if is_csv(p) => specdata::load_csv(p)?,
        DatasetSource::File(p) => specdata::load_multiclass(p)?,
    };
    Ok(data.normalized(cfg.normalize))
}

/// Everything `run` needs after the dataset is known.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub config: ExperimentConfig,
    pub classes: Vec<i32>,
    pub bands: usize,
    pub k: usize,
}

impl ResolvedRun {
    pub fn trial_config(&self) -> TrialConfig {
        let c = &self.config;
        TrialConfig {
            d_prime: c.d_prime,
            k: self.k,
            n_train: c.n_train,
            n_test: c.n_test,
            balance: c.balance,
            kind: c.kind,
            loss: c.loss,
            loss_ground_truth: c.loss_ground_truth,
            solver: c.solver.clone(),
        }
    }

    /// `resolved.cfg` contents.
    pub fn render(&self) -> String {
        let c = &self.config;
        let mut out = String::from(
            "# resolved experiment configuration; output_dir and workers do not affect results\n",
        );
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        match &c.dataset {
            DatasetSource::Synthetic(s) => {
                put("dataset", "synthetic".into());
                put("synth_d", s.d.to_string());
                put("synth_n_per_class", s.n_per_class.to_string());
                put("synth_separation", s.separation.to_string());
                put("synth_sigma", s.sigma.to_string());
                put("synth_seed", s.seed.to_string());
            }
            DatasetSource::File(p) => put("dataset", p.display().to_string()),
        }
        let ids: Vec<String> = self.classes.iter().map(i32::to_string).collect();
        put("classes", ids.join(","));
        let schemes: Vec<&str> = c.schemes.iter().map(|s| s.as_str()).collect();
        put("schemes", schemes.join(",").to_ascii_lowercase());
        put("d_prime", c.d_prime.to_string());
        put("k", self.k.to_string());
        put("kind", c.kind.as_str().into());
        put("trials", c.trials.to_string());
        put("n_train", c.n_train.to_string());
        put("n_test", c.n_test.to_string());
        put("balance", c.balance.to_string());
        put("normalize", c.normalize.to_string());
        put("gamma", c.loss.gamma.to_string());
        put("lambda", c.loss.lambda.to_string());
        put("gamma_ground_truth", c.loss_ground_truth.gamma.to_string());
        put("lambda_ground_truth", c.loss_ground_truth.lambda.to_string());
        put("max_iterations", c.solver.max_iterations.to_string());
        put("gradient_tolerance", c.solver.gradient_tolerance.to_string());
        put("lbfgs_memory", c.solver.memory.to_string());
        put("master_seed", c.master_seed.to_string());
        out.push_str(&format!("# bands d = {}\n", self.bands));
        for (a, b) in eval::class_pairs(&self.classes) {
            out.push_str(&format!(
                "# pair {a}:{b} seed = {}\n",
                eval::pair_seed(c.master_seed, a, b)
            ));
        }
        out
    }
}

/// Result of a completed run.
#[derive(Debug)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub sweep: SweepReport,
    pub files: Vec<PathBuf>,
    /// Trials with at least one fit that stopped at `max_iterations`.
    pub non_converged: usize,
}

fn resolve_run(cfg: ExperimentConfig, data: &MulticlassDataset) -> Result<ResolvedRun> {
    let declared: Vec<i32> = data.class_map().iter().map(|(c, _)| *c).collect();
    let classes = match &cfg.classes {
        ClassSelection::All => declared,
        ClassSelection::List(ids) => {
            if let Some(missing) = ids.iter().find(|c| !declared.contains(c)) {
                return Err(Error::UnknownClass(*missing));
            }
            ids.clone()
        }
    };
    if classes.len() < 2 {
        return Err(Error::InvalidPair("dataset declares fewer than two classes".into()));
    }
    if cfg.d_prime > data.bands() {
        return Err(Error::Config(format!(
            "d_prime={} exceeds the band count d={}",
            cfg.d_prime,
            data.bands()
        )));
    }
    let k = cfg.k.resolve(data.bands(), cfg.d_prime);
    Ok(ResolvedRun {
        bands: data.bands(),
        k,
        classes,
        config: cfg,
    })
}

fn write(path: PathBuf, contents: &[u8], files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn pair_stem(e: &eval::ExperimentReport, scheme: Scheme) -> String {
    format!(
        "{}_{}_{}",
        e.pair.positive_id,
        e.pair.negative_id,
        scheme.as_str().to_ascii_lowercase()
    )
}

/// Writes `report.csv`, `tables.md` and the histograms for a sweep.
pub fn write_summaries(sweep: &SweepReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    mkdir(dir)?;
    write(dir.join("report.csv"), render::report_csv(sweep).as_bytes(), &mut files)?;
    write(dir.join("tables.md"), render::markdown_tables(sweep).as_bytes(), &mut files)?;
    let hist_dir = dir.join("histograms");
    mkdir(&hist_dir)?;
    for e in &sweep.entries {
        for s in &e.schemes {
            write(
                hist_dir.join(format!("hist_{}.csv", pair_stem(e, s.scheme))),
                render::histogram_csv(&s.histogram).as_bytes(),
                &mut files,
            )?;
        }
    }
    Ok(files)
}

/// Runs a resolved config end to end and writes every output file.
pub fn run_config(cfg: ExperimentConfig) -> Result<RunOutcome> {
    let data = load_data(&cfg)?;
    let run = resolve_run(cfg, &data)?;
    let c = &run.config;
    if c.schemes.contains(&Scheme::Dmd) {
        if let Some(w) = span_warning(Origin::Default, run.k, run.bands, c.d_prime) {
            log::warn!("{}", w.message);
        }
    }
    info!(
        "{} pixels, d={}, d'={}, k={}, {} class pairs, {} trials",
        data.len(),
        run.bands,
        c.d_prime,
        run.k,
        eval::class_pairs(&run.classes).len(),
        c.trials
    );
    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(c.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let trial_cfg = run.trial_config();
    let sweep = threads.install(|| {
        eval::pairwise_sweep(&data, &run.classes, &c.schemes, &trial_cfg, c.trials, c.master_seed)
    })?;

    let dir = c.output_dir.clone();
    mkdir(&dir)?;
    let mut files = Vec::new();
    write(dir.join("resolved.cfg"), run.render().as_bytes(), &mut files)?;
    write(dir.join("trials.csv"), render::trials_csv(&sweep).as_bytes(), &mut files)?;
    files.extend(write_summaries(&sweep, &dir)?);

    let dumps = dir.join("dumps");
    mkdir(&dumps)?;
    for (a, b) in eval::class_pairs(&run.classes) {
        let pair = data.extract_pair(a, b)?;
        let e = sweep.entry(a, b).expect("sweep covers every pair");
        for &scheme in &c.schemes {
            let seed = eval::trial_seed(eval::pair_seed(c.master_seed, a, b), 0);
            let art = eval::fold_artifacts(&pair, scheme, &trial_cfg, seed, 0)?;
            let pool_path = dumps.join(format!("pool_{}.bin", pair_stem(e, scheme)));
            sensing::write_pool(&art.pool, &pool_path)?;
            files.push(pool_path);
            let clf_path = dumps.join(format!("classifier_{}.bin", pair_stem(e, scheme)));
            sketchsvm::write_classifier(&art.classifier, &c.loss, &clf_path)?;
            files.push(clf_path);
        }
    }
    let non_converged = sweep.entries.iter().map(|e| e.non_converged()).sum();
    info!("wrote {} files to {}", files.len(), dir.display());
    Ok(RunOutcome {
        output_dir: dir,
        sweep,
        files,
        non_converged,
    })
}

/// Resolves raw settings (reporting every error) and runs them.
pub fn run_raw(raw: &RawConfig) -> Result<RunOutcome> {
    let (cfg, diags) = raw.resolve();
    for d in diags.iter().filter(|d| d.severity == Severity::Warning) {
        log::warn!("{d}");
    }
    match cfg {
        Some(cfg) => run_config(cfg),
        None => Err(Error::Config(
            diags
                .iter()
                .filter(|d| d.severity == Severity::Error)
                .map(Diagnostic::to_string)
                .collect::<Vec<_>>()
                .join("\n"),
        )),
    }
}

pub fn run(config_path: impl AsRef<Path>) -> Result<RunOutcome> {
    run_raw(&RawConfig::load(config_path)?)
}

/// Re-renders summaries from a stored `trials.csv`.
pub fn report(trials_csv: impl AsRef<Path>, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let path = trials_csv.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let sweep = render::parse_trials_csv(&text)?;
    write_summaries(&sweep, out_dir.as_ref())
}
