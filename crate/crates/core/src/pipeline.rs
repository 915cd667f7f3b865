//! End-to-end experiment: split, auxiliary pair search, hyperparameter
//! selection, alpha sweep, baselines and Shapley rank tables, all written to
//! one run directory together with a manifest and an id-flow log.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::cohort::{load_csv, split, Cohort, Feature, Preprocessor, SplitSpec, N_FEATURES};
use crate::error::{Error, Result};
use crate::evaluation::{
    evaluate_baselines, shap_rank_table, write_baselines_csv, write_shap_ranks_aa, write_shap_ranks_stage, BaselineRow,
    ShapMethod, ShapReport, DEFAULT_PERMUTATIONS,
};
use crate::manifest::{sha256_file, Manifest};
use crate::models::{FeaturePair, LogRegOptions, Predictor};
use crate::regularization::TrainMode;
use crate::staging::{stage_cohort, StagingThresholds};
use crate::training::{
    alpha_seed, run_sweep, search_aux_pair, select_hyperparams, train, write_loss_csv, write_metrics_csv, CvPlan,
    Dataset, IdAudit, PairSearch, RegKind, Role, Selection, SweepResult, TrainConfig, DEFAULT_BATCH_SIZE,
    DEFAULT_HIDDEN, DEFAULT_K, EPOCH_GRID, LEARNING_RATE_GRID,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegChoice {
    Aa,
    Stage,
}

impl RegChoice {
    pub fn tag(self) -> &'static str {
        match self {
            RegChoice::Aa => "aa",
            RegChoice::Stage => "stage",
        }
    }
}

impl FromStr for RegChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aa" => Ok(RegChoice::Aa),
            "stage" | "sc" => Ok(RegChoice::Stage),
            _ => Err(Error::Validation(format!(
                "unknown regularizer `{s}` (expected aa or stage)"
            ))),
        }
    }
}

/// Parses `start:end:step` (inclusive) or a single value.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Validation(format!("bad grid `{s}`; expected start:end:step"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts.as_slice() {
        [v] if v.is_finite() => Ok(vec![*v]),
        [start, end, step] if start.is_finite() && end.is_finite() && *step > 0.0 && end >= start => {
            let n = ((end - start) / step).round();
            if ((start + n * step) - end).abs() > 1e-9 * step.max(1.0) {
                return Err(bad());
            }
            Ok((0..=n as usize).map(|i| start + i as f64 * step).collect())
        }
        _ => Err(bad()),
    }
}

fn fmt_list<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn parse_list<T: FromStr>(s: &str, key: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::Validation(format!("manifest `{key}`: cannot parse `{p}`")))
        })
        .collect()
}

/// The default architecture first, then narrower single-layer candidates.
pub fn default_hidden_grid() -> Vec<Vec<usize>> {
    vec![DEFAULT_HIDDEN.to_vec(), vec![16], vec![8], vec![4]]
}

/// `32-16,16,8`: architectures separated by commas, layers by dashes.
pub fn fmt_hidden_grid(grid: &[Vec<usize>]) -> String {
    grid.iter()
        .map(|h| h.iter().map(usize::to_string).collect::<Vec<_>>().join("-"))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn parse_hidden_grid(s: &str) -> Result<Vec<Vec<usize>>> {
    s.split(',')
        .map(|arch| {
            arch.split('-')
                .map(|w| {
                    w.trim()
                        .parse::<usize>()
                        .ok()
                        .filter(|&w| w > 0)
                        .ok_or_else(|| Error::Validation(format!("bad hidden layer width `{w}` in `{s}`")))
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub reg: RegChoice,
    pub alphas: Vec<f64>,
    pub split: SplitSpec,
    pub k: usize,
    /// Base seed for folds, initialization and Shapley sampling.
    pub seed: u64,
    /// Candidate hidden-layer widths; every candidate enters the selection grid.
    pub hidden_grid: Vec<Vec<usize>>,
    pub batch_size: usize,
    pub learning_rates: Vec<f64>,
    pub epochs: Vec<usize>,
    pub thresholds: StagingThresholds,
    pub shap_permutations: usize,
    pub logreg: LogRegOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            reg: RegChoice::Aa,
            alphas: (0..=8).map(f64::from).collect(),
            split: SplitSpec::default(),
            k: DEFAULT_K,
            seed: 7,
            hidden_grid: default_hidden_grid(),
            batch_size: DEFAULT_BATCH_SIZE,
            learning_rates: LEARNING_RATE_GRID.to_vec(),
            epochs: EPOCH_GRID.to_vec(),
            thresholds: StagingThresholds::default(),
            shap_permutations: DEFAULT_PERMUTATIONS,
            logreg: LogRegOptions::default(),
        }
    }
}

impl PipelineConfig {
    pub fn cv_seed(&self) -> u64 {
        self.seed
    }

    pub fn train_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    pub fn shap_seed(&self) -> u64 {
        self.seed.wrapping_add(2)
    }

    /// Selection grid in (architecture, epochs, learning rate) order.
    pub fn grid(&self) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for hidden in &self.hidden_grid {
            let mut layer_sizes = vec![N_FEATURES];
            layer_sizes.extend(hidden);
            layer_sizes.push(1);
            for &epochs in &self.epochs {
                for &learning_rate in &self.learning_rates {
                    out.push(TrainConfig {
                        layer_sizes: layer_sizes.clone(),
                        learning_rate,
                        epochs,
                        batch_size: self.batch_size,
                        seed: self.train_seed(),
                        alpha: 0.0,
                        mode: TrainMode::LossPlusReg,
                    });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.thresholds.validate()?;
        if self.alphas.is_empty() {
            return Err(Error::Validation("empty alpha grid".into()));
        }
        if self.learning_rates.is_empty() || self.epochs.is_empty() {
            return Err(Error::Validation("empty hyperparameter grid".into()));
        }
        if self.hidden_grid.is_empty()
            || self.hidden_grid.iter().flatten().any(|&h| h == 0)
            || self.batch_size == 0
            || self.shap_permutations == 0
        {
            return Err(Error::Validation(
                "layer sizes, batch size and permutation count must be positive".into(),
            ));
        }
        if self.k < 2 {
            return Err(Error::Validation("k must be at least 2".into()));
        }
        Ok(())
    }

    /// Writes every setting needed to reproduce a run.
    pub fn write_to(&self, m: &mut Manifest) {
        m.set("reg", self.reg.tag());
        m.set("alphas", fmt_list(&self.alphas));
        m.set("seed", self.seed);
        m.set("seed.cv", self.cv_seed());
        m.set("seed.train", self.train_seed());
        m.set("seed.shap", self.shap_seed());
        m.set("split.seed", self.split.seed);
        let (a, b, c) = self.split.fractions;
        m.set("split.fractions", fmt_list(&[a, b, c]));
        m.set(
            "split.fixed_counts",
            self.split
                .fixed_counts
                .map(|(a, b, c)| fmt_list(&[a, b, c]))
                .unwrap_or_default(),
        );
        m.set("cv.k", self.k);
        m.set("train.hidden_grid", fmt_hidden_grid(&self.hidden_grid));
        m.set("train.batch_size", self.batch_size);
        m.set("train.learning_rates", fmt_list(&self.learning_rates));
        m.set("train.epochs", fmt_list(&self.epochs));
        let t = &self.thresholds;
        m.set("staging.b2m_low", t.b2m_low);
        m.set("staging.b2m_high", t.b2m_high);
        m.set("staging.albumin_min", t.albumin_min);
        m.set("staging.ldh_young", t.ldh_young);
        m.set("staging.ldh_old", t.ldh_old);
        m.set("staging.age_cut", t.age_cut);
        m.set("shap.permutations", self.shap_permutations);
        m.set("logreg.max_iter", self.logreg.max_iter);
        m.set("logreg.grad_tol", self.logreg.grad_tol);
        m.set("logreg.initial_step", self.logreg.initial_step);
    }

    pub fn from_manifest(m: &Manifest) -> Result<Self> {
        fn num<T: FromStr>(m: &Manifest, key: &str) -> Result<T> {
            let v = m.require(key)?;
            v.parse()
                .map_err(|_| Error::Validation(format!("manifest `{key}`: cannot parse `{v}`")))
        }
        let fractions: Vec<f64> = parse_list(m.require("split.fractions")?, "split.fractions")?;
        let fixed: Vec<usize> = parse_list(m.require("split.fixed_counts")?, "split.fixed_counts")?;
        if fractions.len() != 3 || !(fixed.is_empty() || fixed.len() == 3) {
            return Err(Error::Validation("manifest split entries are malformed".into()));
        }
        Ok(Self {
            reg: m.require("reg")?.parse()?,
            alphas: parse_list(m.require("alphas")?, "alphas")?,
            split: SplitSpec {
                seed: num(m, "split.seed")?,
                fractions: (fractions[0], fractions[1], fractions[2]),
                fixed_counts: (!fixed.is_empty()).then(|| (fixed[0], fixed[1], fixed[2])),
            },
            k: num(m, "cv.k")?,
            seed: num(m, "seed")?,
            hidden_grid: parse_hidden_grid(m.require("train.hidden_grid")?)?,
            batch_size: num(m, "train.batch_size")?,
            learning_rates: parse_list(m.require("train.learning_rates")?, "train.learning_rates")?,
            epochs: parse_list(m.require("train.epochs")?, "train.epochs")?,
            thresholds: StagingThresholds {
                b2m_low: num(m, "staging.b2m_low")?,
                b2m_high: num(m, "staging.b2m_high")?,
                albumin_min: num(m, "staging.albumin_min")?,
                ldh_young: num(m, "staging.ldh_young")?,
                ldh_old: num(m, "staging.ldh_old")?,
                age_cut: num(m, "staging.age_cut")?,
            },
            shap_permutations: num(m, "shap.permutations")?,
            logreg: LogRegOptions {
                max_iter: num(m, "logreg.max_iter")?,
                grad_tol: num(m, "logreg.grad_tol")?,
                initial_step: num(m, "logreg.initial_step")?,
            },
        })
    }
}

/// Everything a run produced, for programmatic inspection.
#[derive(Debug)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    pub pair_search: PairSearch,
    pub selection: Selection,
    pub sweep: SweepResult,
    pub baselines: Vec<BaselineRow>,
    pub shap: Vec<(f64, ShapReport)>,
    pub audit: IdAudit,
    pub test_ids: Vec<String>,
    /// File name to sha256 of every output except the manifest.
    pub outputs: BTreeMap<String, String>,
}

/// Error annotated with the pipeline stage that produced it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "stage `{}` failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

trait AtStage<T> {
    fn at(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

/// Creates `<root>/run-<unix seconds>`, adding `-N` if that name is taken.
pub fn create_run_dir(root: &Path) -> Result<PathBuf> {
    fs::create_dir_all(root)?;
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let base = format!("run-{secs}");
    for n in 0.. {
        let name = if n == 0 { base.clone() } else { format!("{base}-{n}") };
        let dir = root.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}

fn write_file(dir: &Path, name: &str, f: impl FnOnce(BufWriter<File>) -> Result<()>) -> Result<()> {
    f(BufWriter::new(File::create(dir.join(name))?))
}

/// Runs the full protocol on a cohort file inside a fresh run directory
/// under `out_root`.
pub fn run_pipeline(
    cohort_path: &Path,
    config: &PipelineConfig,
    out_root: &Path,
) -> std::result::Result<RunSummary, StageError> {
    let run_dir = create_run_dir(out_root).at("setup")?;
    run_pipeline_in(cohort_path, config, &run_dir)
}

/// Runs the full protocol writing into an existing directory.
pub fn run_pipeline_in(
    cohort_path: &Path,
    config: &PipelineConfig,
    run_dir: &Path,
) -> std::result::Result<RunSummary, StageError> {
    let manifest_path = run_dir.join("manifest.txt");
    let mut manifest = Manifest::new();
    manifest.set("tool", "riss-reg");
    manifest.set("tool_version", TOOL_VERSION);
    manifest.set("command", "pipeline");
    manifest.set("input.cohort", cohort_path.display());
    manifest.set("status", "running");
    config.write_to(&mut manifest);
    let result = (|| {
        config.validate().at("config")?;
        manifest.set("input.sha256", sha256_file(cohort_path).at("load")?);
        manifest.write(&manifest_path).at("manifest")?;
        execute(cohort_path, config, run_dir, &mut manifest)
    })();
    match &result {
        Ok(summary) => {
            for (name, digest) in &summary.outputs {
                manifest.set(format!("output.{name}.sha256"), digest);
            }
            manifest.set("status", "complete");
        }
        Err(e) => {
            manifest.set("status", "failed");
            manifest.set("failed_stage", e.stage);
            manifest.set("error", e.error.to_string().replace('\n', " "));
        }
    }
    manifest.write(&manifest_path).at("manifest")?;
    result
}

fn execute(
    cohort_path: &Path,
    config: &PipelineConfig,
    run_dir: &Path,
    manifest: &mut Manifest,
) -> std::result::Result<RunSummary, StageError> {
    let cohort = load_csv(cohort_path).at("load")?;
    if cohort.is_empty() {
        return Err(Error::Empty("cohort has no records".into())).at("load");
    }
    // Staging errors (negative or non-finite values) surface before any fit.
    stage_cohort(&cohort, &config.thresholds).at("staging")?;

    let audit = IdAudit::new();
    let parts = split(&cohort, &config.split).at("split")?;
    manifest.set(
        "split.sizes",
        fmt_list(&[parts.aux.len(), parts.kf.len(), parts.test.len()]),
    );
    let test_ids: Vec<String> = parts.test.ids().iter().map(|s| s.to_string()).collect();

    let plan = CvPlan::new(&parts.kf, config.k, config.cv_seed()).at("cv_plan")?;
    let pair_search = search_aux_pair(
        &Feature::ALL,
        &plan,
        &parts.kf,
        &parts.aux,
        &config.logreg,
        Some(&audit),
    )
    .at("pair_search")?;
    manifest.set("aux.pair", pair_search.best);
    manifest.set("aux.weights", fmt_list(&pair_search.model.weights));
    manifest.set("aux.bias", pair_search.model.bias);
    let aux = &pair_search.model;

    let selection =
        select_hyperparams(&config.grid(), &plan, &parts.kf, &config.thresholds, Some(&audit)).at("select")?;
    manifest.set("selected.layer_sizes", fmt_list(&selection.best.layer_sizes));
    manifest.set("selected.learning_rate", selection.best.learning_rate);
    manifest.set("selected.epochs", selection.best.epochs);

    audit.record("preprocess", Role::Fit, &parts.kf.ids());
    let pre = Preprocessor::fit(parts.kf.records().iter()).at("preprocess")?;
    let kf_set = Dataset::from_records(parts.kf.records(), &pre, &config.thresholds, Some(aux)).at("preprocess")?;
    let test_set = Dataset::from_records(parts.test.records(), &pre, &config.thresholds, Some(aux)).at("preprocess")?;

    let reg = match config.reg {
        RegChoice::Aa => RegKind::AuxiliaryAlignment(aux.clone()),
        RegChoice::Stage => RegKind::StageConsistency,
    };
    let sweep = run_sweep(&config.alphas, &selection.best, &reg, &kf_set, &test_set, Some(&audit)).at("sweep")?;
    for p in &sweep.points {
        match &p.outcome {
            Ok(f) => {
                let ratio = if f.train.reg_loss > 0.0 {
                    f.train.loss1 / f.train.reg_loss
                } else {
                    f64::INFINITY
                };
                manifest.set(format!("ratio.alpha={}", p.alpha), ratio);
            }
            Err(e) => manifest.set(format!("failed.alpha={}", p.alpha), e.replace('\n', " ")),
        }
    }

    let stage_only_cfg = TrainConfig {
        alpha: 1.0,
        mode: TrainMode::RegOnly,
        seed: alpha_seed(selection.best.seed, 1.0),
        ..selection.best.clone()
    };
    let stage_only = train(&stage_only_cfg, &kf_set, &RegKind::StageConsistency, None)
        .at("baselines")?
        .predictor;
    let alpha0: Predictor = match sweep.model(0.0) {
        Some(p) => p.clone(),
        None => {
            let cfg = TrainConfig {
                alpha: 0.0,
                seed: alpha_seed(selection.best.seed, 0.0),
                ..selection.best.clone()
            };
            train(&cfg, &kf_set, &RegKind::None, None).at("baselines")?.predictor
        }
    };
    let baselines = evaluate_baselines(
        aux,
        &stage_only,
        &alpha0,
        &[
            ("kf", parts.kf.records(), &kf_set),
            ("test", parts.test.records(), &test_set),
        ],
    )
    .at("baselines")?;

    let method = ShapMethod::PermutationSampled {
        n_permutations: config.shap_permutations,
        seed: config.shap_seed(),
    };
    manifest.set("shap.method", method);
    manifest.set("shap.baseline", "zero vector in standardized space");
    let models: Vec<(f64, &Predictor)> = sweep
        .points
        .iter()
        .filter_map(|p| p.outcome.as_ref().ok().map(|f| (p.alpha, &f.predictor)))
        .collect();
    let shap = shap_rank_table(&models, test_set.x.view(), method).at("shap")?;

    audit.check_isolated(&test_ids).at("audit")?;
    let tag = config.reg.tag();
    let outputs = write_outputs(
        run_dir,
        tag,
        &cohort,
        config,
        &pair_search,
        &selection,
        &sweep,
        &baselines,
        &shap,
        &audit,
    )
    .at("write")?;
    Ok(RunSummary {
        run_dir: run_dir.to_path_buf(),
        pair_search,
        selection,
        sweep,
        baselines,
        shap,
        audit,
        test_ids,
        outputs,
    })
}

#[allow(clippy::too_many_arguments)]
fn write_outputs(
    dir: &Path,
    tag: &str,
    cohort: &Cohort,
    config: &PipelineConfig,
    pair_search: &PairSearch,
    selection: &Selection,
    sweep: &SweepResult,
    baselines: &[BaselineRow],
    shap: &[(f64, ShapReport)],
    audit: &IdAudit,
) -> Result<BTreeMap<String, String>> {
    let mut names = Vec::new();
    let mut put = |name: String, f: &dyn Fn(BufWriter<File>) -> Result<()>| -> Result<()> {
        write_file(dir, &name, f)?;
        names.push(name);
        Ok(())
    };
    put(format!("{tag}_metr_test.csv"), &|w| {
        write_metrics_csv(&sweep.test_rows(), w)
    })?;
    put(format!("{tag}_loss_test.csv"), &|w| {
        write_loss_csv(&sweep.test_rows(), w)
    })?;
    put(format!("{tag}_metr_kf.csv"), &|w| {
        write_metrics_csv(&sweep.train_rows(), w)
    })?;
    put(format!("{tag}_loss_kf.csv"), &|w| {
        write_loss_csv(&sweep.train_rows(), w)
    })?;
    put("baselines.csv".into(), &|w| write_baselines_csv(baselines, w))?;
    put(format!("shap_ranks_{tag}.csv"), &|w| match config.reg {
        RegChoice::Aa => write_shap_ranks_aa(shap, w),
        RegChoice::Stage => write_shap_ranks_stage(shap, w),
    })?;
    put("shap_mean_abs.csv".into(), &|w| {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["alpha".to_string()];
        header.extend(Feature::ALL.iter().map(|f| f.column().to_string()));
        out.write_record(&header)?;
        for (alpha, r) in shap {
            let mut rec = vec![alpha.to_string()];
            rec.extend(r.mean_abs.iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    })?;
    put("pair_search.csv".into(), &|w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["pair", "mean_val_loss"])?;
        for s in &pair_search.scores {
            out.write_record([
                s.pair.to_string(),
                s.mean_loss.map(|l| l.to_string()).unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    })?;
    put("selection.csv".into(), &|w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["layer_sizes", "learning_rate", "epochs", "mean_val_loss"])?;
        for (c, s) in config.grid().iter().zip(&selection.scores) {
            out.write_record([
                fmt_hidden_grid(std::slice::from_ref(&c.layer_sizes)),
                c.learning_rate.to_string(),
                c.epochs.to_string(),
                s.map(|l| l.to_string()).unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    })?;
    put("stages.csv".into(), &|w| {
        let st = stage_cohort(cohort, &config.thresholds)?;
        crate::staging::write_stage_report(cohort, &st, w)
    })?;
    put("id_flow.csv".into(), &|w| audit.write_csv(w))?;
    names
        .into_iter()
        .map(|n| {
            let d = sha256_file(dir.join(&n))?;
            Ok((n, d))
        })
        .collect()
}

/// Reruns a pipeline from its manifest into a fresh run directory and
/// compares output digests. Returns the summary and the names of outputs
/// whose digest differs from the recorded one.
pub fn rerun_from_manifest(
    manifest_path: &Path,
    cohort_override: Option<&Path>,
    out_root: &Path,
) -> std::result::Result<(RunSummary, Vec<String>), StageError> {
    let m = Manifest::load(manifest_path).at("manifest")?;
    let config = PipelineConfig::from_manifest(&m).at("manifest")?;
    let cohort_path = match cohort_override {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(m.require("input.cohort").at("manifest")?),
    };
    let digest = sha256_file(&cohort_path).at("load")?;
    if let Some(expected) = m.get("input.sha256") {
        if expected != digest {
            return Err(Error::Validation(format!(
                "cohort digest {digest} does not match the manifest's {expected}"
            )))
            .at("load");
        }
    }
    let summary = run_pipeline(&cohort_path, &config, out_root)?;
    let mut mismatched = Vec::new();
    for (name, d) in &summary.outputs {
        if let Some(expected) = m.get(&format!("output.{name}.sha256")) {
            if expected != d {
                mismatched.push(name.clone());
            }
        }
    }
    Ok((summary, mismatched))
}

/// Recorded pair of a finished run, parsed back from its manifest.
pub fn manifest_pair(m: &Manifest) -> Result<FeaturePair> {
    let s = m.require("aux.pair")?;
    let (a, b) = s
        .split_once('+')
        .ok_or_else(|| Error::Validation(format!("bad pair `{s}`")))?;
    FeaturePair::from_names(a, b)
}
