//! The `hnn` command line: simulate, fit, tune, structure and angles.
//!
//! Settings resolve in three layers. Built-in defaults are overridden by a
//! JSON config file (`--config`), which is overridden by flags. The resolved
//! [`RunConfig`] is echoed into every JSON output and can be passed back in as
//! `--config` to repeat a run.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::hierarchy::{PenaltySpec, Preprocessing, RankProfile, Subset, SubsetLattice, ViewSet};
use crate::io::{read_csv, read_json, write_csv, write_json};
use crate::linalg::{self, Basis, Matrix};
use crate::refit::{refit, RefitResult};
use crate::simgen::{self, ScoreScheme, SimulationConfig};
use crate::solver::{duality_gap, fit_hnn, FitResult, SolverConfig};
use crate::subspaces::{
    compare_angles, decompose, structure_report, StructureKind, StructureReport, StructuresJson, SubspaceDecomposition,
};
use crate::tuning::{self, compute_weights, estimate_noise, BcvReport, Consensus, SureWeights, TuneConfig, TuningGrid};

#[derive(Debug, Parser)]
#[command(name = "hnn", version, about = "Hierarchical nuclear norm decomposition of multi-view data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Comma-separated view CSV files, rows are samples.
    #[arg(long, global = true, value_delimiter = ',')]
    pub views: Option<Vec<PathBuf>>,
    /// JSON run configuration; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Dual step size, in (0, 2).
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Relative primal change at which the solver stops.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    /// Points per axis of the tuning grid.
    #[arg(long, global = true)]
    pub grid_points: Option<usize>,
    #[arg(long, global = true)]
    pub n_splits: Option<usize>,
    #[arg(long, global = true)]
    pub rank_tol: Option<f64>,
    #[arg(long, global = true)]
    pub angle_tol: Option<f64>,
    /// Worker threads for tuning; defaults to the number of logical cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// CSV files carry a header row.
    #[arg(long, global = true)]
    pub header: bool,
    #[arg(long, global = true, value_enum)]
    pub preprocess: Option<PreprocessArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PreprocessArg {
    CenterScale,
    Scale,
    None,
}

impl From<PreprocessArg> for Preprocessing {
    fn from(a: PreprocessArg) -> Self {
        match a {
            PreprocessArg::CenterScale => Preprocessing::CenterScale,
            PreprocessArg::Scale => Preprocessing::Scale,
            PreprocessArg::None => Preprocessing::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Orthogonal,
    NonOrthogonal,
    AllPairs,
}

impl From<SchemeArg> for ScoreScheme {
    fn from(a: SchemeArg) -> Self {
        match a {
            SchemeArg::Orthogonal => ScoreScheme::Orthogonal,
            SchemeArg::NonOrthogonal => ScoreScheme::NonOrthogonal,
            SchemeArg::AllPairs => ScoreScheme::AllPairs,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a simulated dataset with known structure.
    Simulate(SimulateArgs),
    /// Fit at fixed penalties, refit, and report the structures.
    Fit(PenaltyArgs),
    /// Select penalties by bi-cross-validation, then fit at the selection.
    Tune(TuneArgs),
    /// Decompose given estimates into joint, partial and individual structures.
    Structure,
    /// Principal-angle cosines between the structures of two results.
    Angles(AnglesArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    /// two-view, three-view, three-view-equal or three-view-mixed.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long)]
    pub snr: Option<f64>,
    /// Centre score draws so column centring keeps the signal ranks.
    #[arg(long)]
    pub center_scores: bool,
    /// Also write the true signals and structure bases.
    #[arg(long)]
    pub include_truth: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PenaltyArgs {
    /// JSON penalty file: `{"views": D, "terms": [{"subset": [1,2], "lambda": x}, ...]}`.
    #[arg(long, conflicts_with_all = ["levels", "lambda"])]
    pub penalty: Option<PathBuf>,
    /// Level parameters from singletons up to the full set, applied through
    /// the SURE weights.
    #[arg(long, value_delimiter = ',', conflicts_with = "lambda")]
    pub levels: Option<Vec<f64>>,
    /// The same penalty on every subset.
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TuneArgs {
    /// JSON array of level-parameter points replacing the generated grid.
    #[arg(long)]
    pub grid: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AnglesArgs {
    /// A `structures.json` file or a CSV whose columns span a subspace.
    pub first: PathBuf,
    pub second: PathBuf,
}

/// How the penalty of a fit is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyChoice {
    Spec(PenaltySpec),
    Levels(Vec<f64>),
    Uniform(f64),
}

/// The fully resolved settings of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub views: Vec<PathBuf>,
    pub header: bool,
    pub preprocess: Preprocessing,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub solver: SolverConfig,
    pub points_per_axis: usize,
    pub n_splits: usize,
    pub grid: Option<Vec<Vec<f64>>>,
    pub penalty: Option<PenaltyChoice>,
    pub simulation: Option<SimulationConfig>,
    pub include_truth: bool,
    pub inputs: Vec<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let tune = TuneConfig::default();
        RunConfig {
            command: String::new(),
            views: Vec::new(),
            header: false,
            preprocess: Preprocessing::CenterScale,
            out: PathBuf::from("hnn-out"),
            workers: None,
            seed: None,
            solver: SolverConfig::default(),
            points_per_axis: tune.points_per_axis,
            n_splits: tune.n_splits,
            grid: None,
            penalty: None,
            simulation: None,
            include_truth: false,
            inputs: Vec::new(),
        }
    }
}

impl RunConfig {
    /// Defaults, then the config file, then flags.
    pub fn resolve(cli: &Cli) -> Result<RunConfig> {
        let c = &cli.common;
        let mut cfg: RunConfig = match &c.config {
            Some(path) => read_json(path).with_context(|| format!("reading config {}", path.display()))?,
            None => RunConfig::default(),
        };
        cfg.command = command_name(&cli.command).to_string();
        if let Some(v) = &c.views {
            cfg.views = v.clone();
        }
        if c.header {
            cfg.header = true;
        }
        if let Some(p) = c.preprocess {
            cfg.preprocess = p.into();
        }
        if let Some(o) = &c.out {
            cfg.out = o.clone();
        }
        if c.workers.is_some() {
            cfg.workers = c.workers;
        }
        if c.seed.is_some() {
            cfg.seed = c.seed;
        }
        let s = &mut cfg.solver;
        if let Some(g) = c.gamma {
            s.gamma = g;
        }
        if let Some(e) = c.epsilon {
            s.epsilon = e;
        }
        if let Some(m) = c.max_iters {
            s.max_iters = m;
        }
        if let Some(t) = c.rank_tol {
            s.rank_tol = t;
        }
        if let Some(t) = c.angle_tol {
            s.angle_tol = t;
        }
        if let Some(m) = c.grid_points {
            cfg.points_per_axis = m;
        }
        if let Some(n) = c.n_splits {
            cfg.n_splits = n;
        }
        match &cli.command {
            Command::Simulate(a) => cfg.resolve_simulation(a)?,
            Command::Fit(a) => {
                if let Some(path) = &a.penalty {
                    let spec: PenaltySpec =
                        read_json(path).with_context(|| format!("reading penalty {}", path.display()))?;
                    cfg.penalty = Some(PenaltyChoice::Spec(spec));
                } else if let Some(l) = &a.levels {
                    cfg.penalty = Some(PenaltyChoice::Levels(l.clone()));
                } else if let Some(x) = a.lambda {
                    cfg.penalty = Some(PenaltyChoice::Uniform(x));
                }
            }
            Command::Tune(a) => {
                if let Some(path) = &a.grid {
                    let points: Vec<Vec<f64>> =
                        read_json(path).with_context(|| format!("reading grid {}", path.display()))?;
                    cfg.grid = Some(points);
                }
            }
            Command::Structure => {}
            Command::Angles(a) => cfg.inputs = vec![a.first.clone(), a.second.clone()],
        }
        cfg.solver.validate()?;
        cfg.check_inputs()?;
        Ok(cfg)
    }

    fn resolve_simulation(&mut self, a: &SimulateArgs) -> Result<()> {
        let scheme = a.scheme.map(ScoreScheme::from);
        let mut sim = match (&a.preset, self.simulation.take()) {
            (Some(name), _) => SimulationConfig::preset(name, scheme.unwrap_or(ScoreScheme::Orthogonal), 0)?,
            (None, Some(sim)) => {
                let mut sim = sim;
                if let Some(s) = scheme {
                    sim.scheme = s;
                }
                sim
            }
            (None, None) => SimulationConfig::two_view(scheme.unwrap_or(ScoreScheme::Orthogonal), 0),
        };
        if let Some(seed) = self.seed {
            sim.seed = seed;
        }
        self.seed = Some(sim.seed);
        if let Some(snr) = a.snr {
            sim.snr = snr;
        }
        if a.center_scores {
            sim.center_scores = true;
        }
        if a.include_truth {
            self.include_truth = true;
        }
        sim.validate()?;
        self.simulation = Some(sim);
        Ok(())
    }

    /// Exactly one input source, and every input path exists.
    fn check_inputs(&self) -> Result<()> {
        match self.command.as_str() {
            "simulate" => {
                if !self.views.is_empty() {
                    bail!("simulate generates its own data and takes no --views");
                }
            }
            "angles" => {
                for p in &self.inputs {
                    if !p.is_file() {
                        bail!("input {} does not exist", p.display());
                    }
                }
            }
            _ => {
                if self.views.is_empty() {
                    bail!("{} needs --views with at least one CSV file", self.command);
                }
                if self.simulation.is_some() {
                    bail!("{} reads --views; a simulation config is a second input source", self.command);
                }
                for p in &self.views {
                    if !p.is_file() {
                        bail!("view file {} does not exist", p.display());
                    }
                }
            }
        }
        if self.command == "fit" && self.penalty.is_none() {
            bail!("fit needs one of --penalty, --levels or --lambda");
        }
        Ok(())
    }

    pub fn tune_config(&self) -> TuneConfig {
        TuneConfig {
            points_per_axis: self.points_per_axis,
            n_splits: self.n_splits,
            seed: self.seed.unwrap_or(0),
            solver: self.solver.clone(),
            grid: self.grid.clone(),
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate(_) => "simulate",
        Command::Fit(_) => "fit",
        Command::Tune(_) => "tune",
        Command::Structure => "structure",
        Command::Angles(_) => "angles",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureRankEntry {
    pub subset: Subset,
    pub kind: StructureKind,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularValues {
    pub subset: Subset,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthJson {
    pub config: RunConfig,
    pub structure_ranks: Vec<StructureRankEntry>,
    pub rank_profile: RankProfile,
    pub noise_sd: Vec<f64>,
    pub singular_values: Vec<SingularValues>,
    /// Present with `--include-truth`.
    pub structures: Option<StructuresJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub converged: bool,
    pub iters: usize,
    pub final_objective: f64,
    pub duality_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitJson {
    pub config: RunConfig,
    pub penalty: PenaltySpec,
    pub levels: Option<Vec<f64>>,
    pub weights: Option<SureWeights>,
    pub diagnostics: Diagnostics,
    pub rank_profile: RankProfile,
    pub structure_report: StructureReport,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureJson {
    pub config: RunConfig,
    pub per_view_rank: Vec<usize>,
    pub rank_profile: RankProfile,
    pub structure_ranks: Vec<StructureRankEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitJson {
    pub config: RunConfig,
    pub split_index: usize,
    pub report: BcvReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusJson {
    pub config: RunConfig,
    pub weights: SureWeights,
    pub grid: TuningGrid,
    pub consensus: Consensus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleRow {
    pub first: String,
    pub second: String,
    pub first_dim: usize,
    pub second_dim: usize,
    pub cosines: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnglesJson {
    pub config: RunConfig,
    pub rows: Vec<AngleRow>,
}

/// Structure label such as `J(1,2,3)`, `J(1,2)` or `I(2)`.
pub fn structure_label(s: Subset) -> String {
    let prefix = if s.len() == 1 { "I" } else { "J" };
    format!("{prefix}{s}")
}

fn structure_ranks(views: usize, dims: impl Fn(Subset) -> usize) -> Result<Vec<StructureRankEntry>> {
    Ok(SubsetLattice::new(views)?
        .iter()
        .map(|s| StructureRankEntry { subset: s, kind: StructureKind::of(s, views), rank: dims(s) })
        .collect())
}

struct Writer {
    dir: PathBuf,
    header: bool,
    files: Vec<FileEntry>,
}

impl Writer {
    fn new(dir: &Path, header: bool) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Writer { dir: dir.to_path_buf(), header, files: Vec::new() })
    }

    fn csv(&mut self, name: &str, m: &Matrix) -> Result<()> {
        linalg::check_finite(m, name)?;
        write_csv(&self.dir.join(name), m, self.header)?;
        self.files.push(FileEntry { path: name.to_string(), rows: m.nrows(), cols: m.ncols() });
        Ok(())
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        write_json(&self.dir.join(name), value)?;
        Ok(())
    }
}

fn load_views(cfg: &RunConfig) -> Result<ViewSet> {
    let views = cfg
        .views
        .iter()
        .map(|p| read_csv(p, cfg.header).with_context(|| format!("reading view {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    Ok(ViewSet::new(views)?)
}

/// Every view's column space splits into the joint structure, the span of
/// the shared structures containing it at each level, and its individual
/// structure.
/// Mismatches are logged as warnings.
fn check_accounting(decomp: &SubspaceDecomposition) {
    for d in 0..decomp.views {
        let expected = decomp.column_spaces[d].dim();
        let shared: usize = decomp.spans_q.iter().filter(|((v, _), _)| *v == d).map(|(_, q)| q.dim()).sum();
        let got = decomp.joint.dim() + shared + decomp.individual[d].dim();
        if got != expected {
            log::warn!(
                "structures of view {} account for dimension {got}, its column space has {expected}",
                d + 1
            );
        }
    }
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let sim = cfg.simulation.as_ref().ok_or_else(|| anyhow!("no simulation config"))?;
    let truth = simgen::generate(sim)?;
    let mut w = Writer::new(&cfg.out, cfg.header)?;
    for (d, x) in truth.data.views().iter().enumerate() {
        w.csv(&format!("view_{}.csv", d + 1), x)?;
    }
    let mut structures = None;
    if cfg.include_truth {
        for (d, m) in truth.signals.iter().enumerate() {
            w.csv(&format!("signal_{}.csv", d + 1), m)?;
        }
        let decomp = decompose(&truth.signals, cfg.solver.rank_tol, cfg.solver.angle_tol)?;
        structures = Some(decomp.to_json());
    }
    let ranks = truth.structure_ranks();
    let truth_json = TruthJson {
        config: cfg.clone(),
        structure_ranks: structure_ranks(sim.views(), |s| ranks[&s])?,
        rank_profile: truth.rank_profile(cfg.solver.rank_tol, cfg.solver.angle_tol)?,
        noise_sd: truth.noise_sd.clone(),
        singular_values: truth
            .singular_values
            .iter()
            .map(|(&subset, v)| SingularValues { subset, values: v.clone() })
            .collect(),
        structures,
    };
    w.json("truth.json", &truth_json)?;
    w.json("manifest.json", &Manifest { config: cfg.clone(), files: w.files.clone() })?;
    Ok(())
}

/// Everything a fit writes, shared by `fit` and the final step of `tune`.
struct FitBundle {
    penalty: PenaltySpec,
    levels: Option<Vec<f64>>,
    weights: Option<SureWeights>,
    fit: FitResult,
    refit: RefitResult,
}

fn write_fit_bundle(cfg: &RunConfig, data: &ViewSet, b: &FitBundle) -> Result<()> {
    let decomp = decompose(&b.fit.estimate, cfg.solver.rank_tol, cfg.solver.angle_tol)?;
    check_accounting(&decomp);
    let report = structure_report(data, &b.fit, &b.refit, &decomp)?;
    let gap = duality_gap(data, &b.fit.state, &b.penalty)?;
    if !b.fit.converged {
        log::warn!("solver stopped after {} iterations without converging", b.fit.iters);
    }
    let mut w = Writer::new(&cfg.out, cfg.header)?;
    for (d, t) in data.transforms().iter().enumerate() {
        w.csv(&format!("estimate_{}.csv", d + 1), &t.invert(&b.fit.estimate[d]))?;
    }
    for (d, t) in data.transforms().iter().enumerate() {
        w.csv(&format!("refit_{}.csv", d + 1), &t.invert(&b.refit.estimate[d]))?;
    }
    w.json("structures.json", &decomp.to_json())?;
    let out = FitJson {
        config: cfg.clone(),
        penalty: b.penalty.clone(),
        levels: b.levels.clone(),
        weights: b.weights.clone(),
        diagnostics: Diagnostics {
            converged: b.fit.converged,
            iters: b.fit.iters,
            final_objective: b.fit.final_objective,
            duality_gap: gap,
        },
        rank_profile: b.fit.rank_profile.clone(),
        structure_report: report,
        files: w.files.clone(),
    };
    w.json("fit.json", &out)?;
    Ok(())
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    let raw = load_views(cfg)?;
    let data = raw.preprocess(cfg.preprocess)?;
    let (penalty, levels, weights) = match cfg.penalty.as_ref().ok_or_else(|| anyhow!("no penalty given"))? {
        PenaltyChoice::Spec(spec) => {
            if spec.views() != data.len() {
                bail!("penalty covers {} views, data has {}", spec.views(), data.len());
            }
            (spec.clone(), None, None)
        }
        PenaltyChoice::Uniform(x) => (PenaltySpec::uniform(data.len(), *x)?, None, None),
        PenaltyChoice::Levels(levels) => {
            if levels.len() != data.len() {
                bail!("--levels needs {} values, one per subset size", data.len());
            }
            let weights = compute_weights(&data, &estimate_noise(&data)?)?;
            (weights.penalty(levels)?, Some(levels.clone()), Some(weights))
        }
    };
    let fit = fit_hnn(&data, &penalty, &cfg.solver)?;
    let refit = refit(&data, &fit, cfg.solver.rank_tol)?;
    write_fit_bundle(cfg, &data, &FitBundle { penalty, levels, weights, fit, refit })
}

pub fn cmd_tune(cfg: &RunConfig) -> Result<()> {
    let raw = load_views(cfg)?;
    let data = raw.preprocess(cfg.preprocess)?;
    let result = tuning::tune(&data, &cfg.tune_config())?;
    let w = Writer::new(&cfg.out, cfg.header)?;
    for (r, report) in result.reports.iter().enumerate() {
        w.json(
            &format!("bcv_split_{}.json", r + 1),
            &SplitJson { config: cfg.clone(), split_index: r + 1, report: report.clone() },
        )?;
    }
    w.json(
        "consensus.json",
        &ConsensusJson {
            config: cfg.clone(),
            weights: result.weights.clone(),
            grid: result.grid.clone(),
            consensus: result.consensus.clone(),
        },
    )?;
    let point = result.consensus.point.clone();
    let bundle = FitBundle {
        penalty: result.weights.penalty(&point)?,
        levels: Some(point),
        weights: Some(result.weights),
        fit: result.fit,
        refit: result.refit,
    };
    write_fit_bundle(cfg, &data, &bundle)
}

pub fn cmd_structure(cfg: &RunConfig) -> Result<()> {
    let estimate = load_views(cfg)?;
    let decomp = decompose(estimate.views(), cfg.solver.rank_tol, cfg.solver.angle_tol)?;
    check_accounting(&decomp);
    let dims = decomp.dims();
    let out = StructureJson {
        config: cfg.clone(),
        per_view_rank: decomp.column_spaces.iter().map(Basis::dim).collect(),
        rank_profile: RankProfile::from_estimate(estimate.views(), cfg.solver.rank_tol, cfg.solver.angle_tol)?,
        structure_ranks: structure_ranks(decomp.views, |s| dims[&s])?,
    };
    let w = Writer::new(&cfg.out, cfg.header)?;
    w.json("structures.json", &decomp.to_json())?;
    w.json("structure.json", &out)?;
    Ok(())
}

/// Named bases from a `structures.json` file or the column space of a CSV.
fn load_structures(path: &Path, cfg: &RunConfig) -> Result<(usize, Vec<(String, Basis)>)> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let mut value: serde_json::Value = read_json(path).with_context(|| format!("reading {}", path.display()))?;
        // A simulation truth report nests its structures.
        if value.get("structures").is_some_and(|v| v.is_object() || v.is_null()) {
            value = value["structures"].take();
            if value.is_null() {
                bail!("{} carries no structures; simulate with --include-truth", path.display());
            }
        }
        let s: StructuresJson =
            serde_json::from_value(value).with_context(|| format!("reading structures from {}", path.display()))?;
        if s.structures.is_empty() {
            bail!("{} lists no structures", path.display());
        }
        let bases = s
            .structures
            .iter()
            .map(|b| Ok((structure_label(b.subset), b.to_basis(s.rows)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok((s.rows, bases))
    } else {
        let m = read_csv(path, cfg.header).with_context(|| format!("reading {}", path.display()))?;
        let basis = linalg::column_basis(&m, cfg.solver.rank_tol)?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok((m.nrows(), vec![(name, basis)]))
    }
}

pub fn angle_rows(first: &[(String, Basis)], second: &[(String, Basis)]) -> Result<Vec<AngleRow>> {
    let mut rows = Vec::new();
    for (na, a) in first {
        for (nb, b) in second {
            rows.push(AngleRow {
                first: na.clone(),
                second: nb.clone(),
                first_dim: a.dim(),
                second_dim: b.dim(),
                cosines: compare_angles(a, b)?,
            });
        }
    }
    Ok(rows)
}

/// Long format: one line per cosine, and one line with an empty cosine for
/// an empty spectrum.
fn angles_csv(rows: &[AngleRow]) -> String {
    let mut s = String::from("first,second,index,cosine\n");
    for r in rows {
        if r.cosines.is_empty() {
            s.push_str(&format!("{},{},,\n", r.first, r.second));
        }
        for (k, c) in r.cosines.iter().enumerate() {
            s.push_str(&format!("{},{},{},{}\n", r.first, r.second, k + 1, c));
        }
    }
    s
}

pub fn cmd_angles(cfg: &RunConfig) -> Result<()> {
    let (rows_a, first) = load_structures(&cfg.inputs[0], cfg)?;
    let (rows_b, second) = load_structures(&cfg.inputs[1], cfg)?;
    if rows_a != rows_b {
        bail!("structures live in spaces of dimension {rows_a} and {rows_b}");
    }
    let rows = angle_rows(&first, &second)?;
    let csv = angles_csv(&rows);
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    std::fs::write(cfg.out.join("angles.csv"), &csv)?;
    write_json(&cfg.out.join("angles.json"), &AnglesJson { config: cfg.clone(), rows })?;
    print!("{csv}");
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = RunConfig::resolve(cli)?;
    if let Some(n) = cfg.workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("worker pool already initialised: {e}");
        }
    }
    log::info!("running {} into {}", cfg.command, cfg.out.display());
    match cfg.command.as_str() {
        "simulate" => cmd_simulate(&cfg),
        "fit" => cmd_fit(&cfg),
        "tune" => cmd_tune(&cfg),
        "structure" => cmd_structure(&cfg),
        "angles" => cmd_angles(&cfg),
        other => bail!("unknown command {other}"),
    }
}

pub fn main() -> ExitCode {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("HNN_LOG", "warn")).try_init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hnn: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
