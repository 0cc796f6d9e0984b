//! The subcommands. Each returns the files it wrote and any warnings; a warning
//! maps to exit status 1 with all outputs still written.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use ebsurf::argmax::argmax_report;
use ebsurf::band::global_band;
use ebsurf::chain::io::load_trace;
use ebsurf::chain::{segment_tours, simulate, AtHyper, HyperKernel, IidChain, Target};
use ebsurf::estimators::estimate_surfaces;
use ebsurf::models::lda::LdaGibbs;
use ebsurf::models::synth::{
    read_corpus, read_regression_csv, synth_corpus, synth_regression, write_corpus, write_regression_csv,
};
use ebsurf::models::toy::{toy_mh_sampler, NormalHierModel, ToyExact, ToyExactKernel};
use ebsurf::models::vs::{RegressionData, VsGibbs};
use ebsurf::numeric::default_batches;
use ebsurf::prior::build_family;
use ebsurf::tempering::{
    bridge_log_zeta, lattice_anchors, occupancy, occupancy_ratio, tune_zeta, StChain, TuneOptions, ZetaUpdate,
};
use ebsurf::{ArgmaxOptions, ChainTrace, HyperPoint, PriorFamily, Reference, Reweighter, StGrid, TourIndex};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, Length, ModelConfig, ModelId, RunConfig, SynthConfig, ZetaInit};
use crate::output::{num, Outputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Surface,
    Argmax,
    /// With `Some(n)`, runs `n` replications of the toy chain and reports band coverage.
    Band {
        replicate: Option<usize>,
    },
    StTune,
    StRun,
    Synth,
    OracleCheck,
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Run(anyhow::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Run(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Run(e)
    }
}

impl From<ebsurf::Error> for CliError {
    fn from(e: ebsurf::Error) -> Self {
        CliError::Run(e.into())
    }
}

#[derive(Debug, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    /// One-line summaries for the terminal.
    pub notes: Vec<String>,
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Report, CliError> {
    let mut out = Outputs::new(&cfg.out_dir, &cfg.hash)?;
    let mut report = Report::default();
    match command {
        Command::Surface => surface(cfg, &mut out, &mut report)?,
        Command::Argmax => argmax(cfg, &mut out, &mut report)?,
        Command::Band { replicate: None } => band(cfg, &mut out, &mut report)?,
        Command::Band { replicate: Some(reps) } => band_replicate(cfg, reps, &mut out, &mut report)?,
        Command::StTune => st_tune(cfg, &mut out, &mut report)?,
        Command::StRun => st_run(cfg, &mut out, &mut report)?,
        Command::Synth => synth(cfg, &mut out, &mut report)?,
        Command::OracleCheck => oracle_check(cfg, &mut out, &mut report)?,
    }
    report.files = out.written;
    Ok(report)
}

/// Independent 64-bit seed for stream `name` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("eight bytes"))
}

/// Hyperparameter names for column headers.
pub fn param_names(family: &str) -> [&'static str; 2] {
    match family {
        "normal-hier" => ["mu", "tau2"],
        "vs-bernoulli-zellner" => ["w", "g"],
        "lda-dirichlet" => ["eta", "alpha"],
        _ => ["h1", "h2"],
    }
}

fn toy_model(m: &ModelConfig) -> Result<NormalHierModel> {
    Ok(NormalHierModel::new(m.y.clone(), m.sigma0)?)
}

/// Hyperparameter-indexed kernels the CLI can drive.
enum Kernel {
    Toy(ToyExactKernel),
    Vs(VsGibbs),
    Lda(LdaGibbs),
}

macro_rules! with_kernel {
    ($k:expr, |$v:ident| $body:expr) => {
        match $k {
            Kernel::Toy($v) => $body,
            Kernel::Vs($v) => $body,
            Kernel::Lda($v) => $body,
        }
    };
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

fn kernel_for(m: &ModelConfig) -> Result<Kernel> {
    Ok(match m.id {
        ModelId::Toy | ModelId::ToyImh => Kernel::Toy(ToyExactKernel { model: toy_model(m)? }),
        ModelId::Vs => {
            let path = m.data.as_ref().expect("checked when typing the config");
            let (x, y) = read_regression_csv(open(path)?).with_context(|| format!("reading {}", path.display()))?;
            Kernel::Vs(VsGibbs::new(Arc::new(RegressionData::new(x, y)?)))
        }
        ModelId::Lda => {
            let path = m.data.as_ref().expect("checked when typing the config");
            let corpus = read_corpus(open(path)?, m.vocab.expect("checked when typing the config"))
                .with_context(|| format!("reading {}", path.display()))?;
            Kernel::Lda(LdaGibbs { corpus: Arc::new(corpus), topics: m.topics, eps: m.eps })
        }
    })
}

fn kernel_family(k: &Kernel) -> Result<Arc<dyn PriorFamily>> {
    let meta = with_kernel!(k, |v| v.meta());
    Ok(build_family(&meta.family, &meta.family_dims)?)
}

fn family_of(trace: &ChainTrace) -> Result<Arc<dyn PriorFamily>> {
    Ok(build_family(&trace.meta.family, &trace.meta.family_dims)?)
}

/// Rejects points outside the family's domain, blaming `section.key`.
fn check_points(
    cfg: &RunConfig,
    family: &dyn PriorFamily,
    points: &[HyperPoint],
    section: &str,
    key: &str,
) -> Result<(), CliError> {
    for p in points {
        if p.len() != family.dim() {
            return Err(cfg.err_key(section, key, format!("needs {} coordinates", family.dim())).into());
        }
        if let Err(e) = family.validate(p) {
            return Err(cfg.err_key(section, key, e).into());
        }
    }
    Ok(())
}

/// Runs the configured chain, or loads `[chain] trace`. Returns whether it was loaded.
fn obtain_trace(cfg: &RunConfig) -> Result<(ChainTrace, bool), CliError> {
    if let Some(path) = &cfg.trace {
        let trace = load_trace(path).with_context(|| format!("reading trace {}", path.display()))?;
        return Ok((trace, true));
    }
    if cfg.h1.is_none() && cfg.st.is_some() {
        return Ok((run_st_chain(cfg)?.0, false));
    }
    let model = cfg.require_model()?;
    let length = cfg.require_length()?;
    let h1 = cfg.require_h1()?.to_vec();
    let kernel = kernel_for(model)?;
    let family = kernel_family(&kernel)?;
    check_points(cfg, &*family, std::slice::from_ref(&h1), "chain", "h1")?;
    let target = match length {
        Length::Steps(n) => Target::Steps(n),
        Length::Regenerations(r) => Target::Regenerations(r),
    };
    let trace = match (model.id, kernel) {
        (ModelId::Toy, Kernel::Toy(k)) => simulate(&mut IidChain(ToyExact { model: k.model, h1 }), target, cfg.seed)?,
        (ModelId::ToyImh, Kernel::Toy(k)) => {
            toy_mh_sampler(&k.model, &h1, model.proposal_sd, model.c, target, cfg.seed)?.0
        }
        (_, Kernel::Vs(k)) => simulate(&mut AtHyper { kernel: k, h1 }, target, cfg.seed)?,
        (_, Kernel::Lda(k)) => simulate(&mut AtHyper { kernel: k, h1 }, target, cfg.seed)?,
        _ => unreachable!("kernel follows the model id"),
    };
    Ok((trace, false))
}

/// Tours when the trace has enough of them for tour-based errors.
fn tours_of(trace: &ChainTrace) -> Result<Option<TourIndex>> {
    if !trace.has_regenerations() {
        return Ok(None);
    }
    let tours = segment_tours(trace)?;
    Ok(if tours.count() >= 2 { Some(tours) } else { None })
}

fn functionals(cfg: &RunConfig, trace: &ChainTrace) -> Result<Vec<String>, CliError> {
    match &cfg.functionals {
        None => Ok(trace.functionals().to_vec()),
        Some(names) => {
            for g in names {
                if g != "B" && !trace.functionals().contains(g) {
                    let known = trace.functionals().join(", ");
                    return Err(cfg
                        .err_key(
                            "inference",
                            "functionals",
                            format!("unknown functional `{g}`; the trace records {known}"),
                        )
                        .into());
                }
            }
            Ok(names.clone())
        }
    }
}

fn grid_for(cfg: &RunConfig, family: &dyn PriorFamily) -> Result<Vec<HyperPoint>, CliError> {
    let grid = cfg.require_grid()?.to_vec();
    check_points(cfg, family, &grid, "grid", "points")?;
    Ok(grid)
}

fn point_cells(h: &[f64]) -> Vec<String> {
    h.iter().map(|x| num(*x)).collect()
}

fn surface(cfg: &RunConfig, out: &mut Outputs, report: &mut Report) -> Result<(), CliError> {
    let (trace, loaded) = obtain_trace(cfg)?;
    if !loaded {
        out.trace("trace.txt", &trace)?;
    }
    let family = family_of(&trace)?;
    let grid = grid_for(cfg, &*family)?;
    let names: Vec<String> = functionals(cfg, &trace)?.into_iter().filter(|g| g != "B").collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let rw = Reweighter::new(&trace, &*family)?;
    let tours = tours_of(&trace)?;
    let (s, fs) = estimate_surfaces(&rw, tours.as_ref(), &grid, &refs)?;

    let mut header: Vec<String> = param_names(&trace.meta.family).iter().map(|s| s.to_string()).collect();
    header.extend(["B", "se_B", "ess", "unreliable"].map(String::from));
    for g in &names {
        header.push(format!("I_{g}"));
        header.push(format!("se_{g}"));
    }
    let rows: Vec<Vec<String>> = (0..grid.len())
        .map(|i| {
            let mut r = point_cells(&grid[i]);
            r.extend([num(s.values[i]), num(s.se[i]), num(s.ess[i]), (s.unreliable[i] as u8).to_string()]);
            for f in &fs {
                r.push(num(f.values[i]));
                r.push(num(f.se[i]));
            }
            r
        })
        .collect();
    let method = serde_json::to_value(s.se_method).map_err(anyhow::Error::from)?;
    let comments = vec![format!("n={} R={} se_method={}", s.n, s.r, method.as_str().unwrap_or("?"))];
    out.csv("surface.csv", &comments, &header, &rows)?;
    let flagged = s.unreliable.iter().filter(|u| **u).count();
    report.notes.push(format!("surface over {} points from {} draws; {flagged} points with low ess", grid.len(), s.n));
    Ok(())
}

fn argmax(cfg: &RunConfig, out: &mut Outputs, report: &mut Report) -> Result<(), CliError> {
    let (trace, loaded) = obtain_trace(cfg)?;
    if !loaded {
        out.trace("trace.txt", &trace)?;
    }
    let family = family_of(&trace)?;
    let rect = cfg.require_rect()?;
    check_points(cfg, &*family, &rect.corners(), "rect", "lower")?;
    let rw = Reweighter::new(&trace, &*family)?;
    let opts = ArgmaxOptions { seed: cfg.seed, ..ArgmaxOptions::default() };
    let tours = tours_of(&trace)?;
    let rep = match &tours {
        Some(t) => argmax_report(&rw, Some(t), rect, cfg.alpha, None, &opts)?,
        None => {
            let m = cfg.batches.unwrap_or_else(|| default_batches(rw.len()));
            argmax_report(&rw, None, rect, cfg.alpha, Some(m), &opts)?
        }
    };
    out.json("argmax.json", &rep)?;
    let header: Vec<String> = param_names(&trace.meta.family).iter().map(|s| s.to_string()).collect();
    let (rows, comments) = match &rep.ellipse {
        Some(e) => (
            e.boundary.iter().map(|p| point_cells(p)).collect(),
            vec![format!("alpha={} threshold={}", rep.alpha, num(e.threshold))],
        ),
        None => (Vec::new(), vec!["no confidence region: the curvature estimate is singular".to_string()]),
    };
    out.csv("ellipse.csv", &comments, &header, &rows)?;
    report.notes.push(format!(
        "h_n = ({}) by {:?} variance",
        rep.h_n.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", "),
        rep.method
    ));
    if rep.multimodal_flag {
        report.notes.push("the surface has more than one local maximum in the rect; h_n is the best found".into());
    }
    if rep.boundary_flag {
        report.warnings.push("the argmax lies on the boundary of the rect".into());
    }
    if rep.batch_boundary_flag {
        report.warnings.push("some batch argmax lies on the boundary of the rect".into());
    }
    Ok(())
}

#[derive(Serialize)]
struct Bands<'a> {
    bands: &'a [ebsurf::BandReport],
}

fn compute_bands(
    rw: &Reweighter<'_>,
    targets: &[String],
    grid: &[HyperPoint],
    m: usize,
    alpha: f64,
) -> Result<Vec<ebsurf::BandReport>> {
    targets
        .iter()
        .map(|g| Ok(global_band(rw, if g == "B" { None } else { Some(g.as_str()) }, grid, m, alpha)?))
        .collect()
}

fn band_targets(cfg: &RunConfig, trace: &ChainTrace) -> Result<Vec<String>, CliError> {
    let mut names = functionals(cfg, trace)?;
    if cfg.functionals.is_none() {
        names.insert(0, "B".into());
    }
    Ok(names)
}

fn band(cfg: &RunConfig, out: &mut Outputs, report: &mut Report) -> Result<(), CliError> {
    let (trace, loaded) = obtain_trace(cfg)?;
    if !loaded {
        out.trace("trace.txt", &trace)?;
    }
    let family = family_of(&trace)?;
    let grid = grid_for(cfg, &*family)?;
    let targets = band_targets(cfg, &trace)?;
    let rw = Reweighter::new(&trace, &*family)?;
    let m = cfg.batches.unwrap_or_else(|| default_batches(trace.len()));
    let bands = compute_bands(&rw, &targets, &grid, m, cfg.alpha)?;

    let mut header: Vec<String> = param_names(&trace.meta.family).iter().map(|s| s.to_string()).collect();
    for g in &targets {
        header.extend([format!("center_{g}"), format!("lower_{g}"), format!("upper_{g}")]);
    }
    let rows: Vec<Vec<String>> = (0..grid.len())
        .map(|i| {
            let mut r = point_cells(&grid[i]);
            for b in &bands {
                r.extend([num(b.center[i]), num(b.center[i] - b.half_width), num(b.center[i] + b.half_width)]);
            }
            r
        })
        .collect();
    let comments = vec![format!("M={m} alpha={}", cfg.alpha)];
    out.csv("band.csv", &comments, &header, &rows)?;
    out.json("band.json", &Bands { bands: &bands })?;
    for b in &bands {
        report.notes.push(format!(
            "{}: half-width {:.6e} with M={}",
            b.functional.as_deref().unwrap_or("B"),
            b.half_width,
            b.batches
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct Coverage {
    replications: usize,
    n: usize,
    #[serde(rename = "M")]
    batches: usize,
    alpha: f64,
    targets: Vec<TargetCoverage>,
}

#[derive(Serialize)]
struct TargetCoverage {
    functional: String,
    covered: usize,
    coverage: f64,
    mean_half_width: f64,
}

/// One replication: its seed, length, and per-target (half-width, covered).
struct Replicate {
    seed: u64,
    n: usize,
    cells: Vec<(f64, bool)>,
}

/// Closed-form value of a band target on the toy model.
fn toy_truth(model: &NormalHierModel, target: &str, h: &[f64], h1: &[f64]) -> Option<f64> {
    match target {
        "B" => Some((model.log_marginal(h) - model.log_marginal(h1)).exp()),
        "theta1" => Some(model.i_theta1(h)),
        "one" => Some(1.0),
        _ => None,
    }
}

fn band_replicate(cfg: &RunConfig, reps: usize, out: &mut Outputs, report: &mut Report) -> Result<(), CliError> {
    let model_cfg = cfg.require_model()?;
    if !model_cfg.id.is_toy() {
        return Err(cfg.err_key("model", "id", "band replication needs a closed form; use toy or toy-imh").into());
    }
    if cfg.trace.is_some() {
        return Err(cfg.err_key("chain", "trace", "band replication runs fresh chains; remove `trace`").into());
    }
    if reps < 1 {
        return Err(CliError::Run(anyhow!("--replicate needs at least one replication")));
    }
    let model = toy_model(model_cfg)?;
    let h1 = cfg.require_h1()?.to_vec();
    cfg.require_length()?;
    let family = model.family();
    let grid = grid_for(cfg, &family)?;
    check_points(cfg, &family, std::slice::from_ref(&h1), "chain", "h1")?;

    let first = obtain_trace(cfg)?.0;
    let targets = band_targets(cfg, &first)?;
    let truths: Vec<Vec<f64>> = targets
        .iter()
        .map(|g| {
            grid.iter().map(|h| toy_truth(&model, g, h, &h1)).collect::<Option<Vec<f64>>>().ok_or_else(|| {
                cfg.err_key("inference", "functionals", format!("no closed form for `{g}`; use B, theta1 or one"))
            })
        })
        .collect::<Result<_, _>>()?;

    let rows: Vec<Replicate> = (0..reps)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let seed = derive_seed(cfg.seed, &format!("band-replicate-{i}"));
            let mut rep_cfg = cfg.clone();
            rep_cfg.seed = seed;
            let trace = obtain_trace(&rep_cfg).map_err(|e| anyhow!("{e}"))?.0;
            let rw = Reweighter::new(&trace, &family)?;
            let m = cfg.batches.unwrap_or_else(|| default_batches(trace.len()));
            let bands = compute_bands(&rw, &targets, &grid, m, cfg.alpha)?;
            let cells = bands.iter().zip(&truths).map(|(b, t)| (b.half_width, b.covers(t))).collect();
            Ok(Replicate { seed, n: trace.len(), cells })
        })
        .collect::<Result<_>>()?;

    let mut header = vec!["replicate".to_string(), "seed".into(), "n".into()];
    for g in &targets {
        header.extend([format!("half_width_{g}"), format!("covered_{g}")]);
    }
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, rep)| {
            let mut r = vec![i.to_string(), rep.seed.to_string(), rep.n.to_string()];
            for (w, c) in &rep.cells {
                r.extend([num(*w), (*c as u8).to_string()]);
            }
            r
        })
        .collect();
    out.csv("band_replicates.csv", &[], &header, &csv_rows)?;

    let n = rows.iter().map(|r| r.n).sum::<usize>() / reps;
    let summary = Coverage {
        replications: reps,
        n,
        batches: cfg.batches.unwrap_or_else(|| default_batches(n)),
        alpha: cfg.alpha,
        targets: targets
            .iter()
            .enumerate()
            .map(|(j, g)| {
                let covered = rows.iter().filter(|r| r.cells[j].1).count();
                TargetCoverage {
                    functional: g.clone(),
                    covered,
                    coverage: covered as f64 / reps as f64,
                    mean_half_width: rows.iter().map(|r| r.cells[j].0).sum::<f64>() / reps as f64,
                }
            })
            .collect(),
    };
    out.json("band_coverage.json", &summary)?;
    for t in &summary.targets {
        report
            .notes
            .push(format!("{}: simultaneous coverage {:.3} over {reps} replications", t.functional, t.coverage));
    }
    Ok(())
}

/// Explicit `[st] anchors`, else a lattice over `[st]` lower/upper or the rect.
fn st_anchors(cfg: &RunConfig) -> Result<Vec<HyperPoint>, CliError> {
    let st = cfg.require_st()?;
    if let Some(a) = &st.anchors {
        return Ok(a.clone());
    }
    let rect = match &st.rect {
        Some(r) => r,
        None => cfg.require_rect()?,
    };
    if st.per_axis.len() != rect.dim() {
        return Err(cfg.err_key("st", "per_axis", format!("needs {} counts", rect.dim())).into());
    }
    Ok(lattice_anchors(rect, &st.per_axis))
}

pub fn write_zeta(out: &mut Outputs, name: &str, family: &str, grid: &StGrid) -> Result<PathBuf> {
    let mut header = vec!["label".to_string()];
    header.extend(param_names(family).iter().map(|s| s.to_string()));
    header.push("log_zeta".into());
    let rows: Vec<Vec<String>> = grid
        .anchors
        .iter()
        .zip(&grid.log_zeta)
        .enumerate()
        .map(|(j, (a, z))| {
            let mut r = vec![j.to_string()];
            r.extend(point_cells(a));
            r.push(num(*z));
            r
        })
        .collect();
    out.csv(name, &[], &header, &rows)
}

/// Reads a table written by [`write_zeta`].
pub fn read_zeta(path: &Path) -> Result<StGrid> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut anchors = Vec::new();
    let mut log_zeta = Vec::new();
    let mut header = false;
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header {
            header = true;
            continue;
        }
        let cells = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| anyhow!("{}:{}: bad number", path.display(), no + 1))?;
        if cells.len() < 3 || cells[0] as usize != anchors.len() {
            bail!("{}:{}: expected `label, coordinates, log_zeta` in label order", path.display(), no + 1);
        }
        anchors.push(cells[1..cells.len() - 1].to_vec());
        log_zeta.push(cells[cells.len() - 1]);
    }
    Ok(StGrid::new(anchors, log_zeta)?)
}

/// Starting `zeta`: a stored table, or the configured initialiser on the lattice.
fn initial_grid(cfg: &RunConfig, kernel: &Kernel, family: &dyn PriorFamily) -> Result<StGrid, CliError> {
    let st = cfg.require_st()?;
    if let Some(path) = &st.zeta {
        let grid = read_zeta(path)?;
        check_points(cfg, family, &grid.anchors, "st", "zeta")?;
        return Ok(grid);
    }
    let anchors = st_anchors(cfg)?;
    let key = if st.anchors.is_some() { "anchors" } else { "per_axis" };
    check_points(cfg, family, &anchors, "st", key)?;
    Ok(match st.init {
        ZetaInit::Flat => StGrid::flat(anchors)?,
        ZetaInit::Bridge => {
            let seed = derive_seed(cfg.seed, "st-bridge");
            let lz = with_kernel!(kernel, |k| bridge_log_zeta(k, &anchors, family, st.bridge_steps, seed))?;
            StGrid::new(anchors, lz)?
        }
    })
}

fn occupancy_csv(out: &mut Outputs, family: &str, grid: &StGrid, occ: &[f64]) -> Result<PathBuf> {
    let mut header = vec!["label".to_string()];
    header.extend(param_names(family).iter().map(|s| s.to_string()));
    header.push("occupancy".into());
    let rows: Vec<Vec<String>> = grid
        .anchors
        .iter()
        .zip(occ)
        .enumerate()
        .map(|(j, (a, o))| {
            let mut r = vec![j.to_string()];
            r.extend(point_cells(a));
            r.push(num(*o));
            r
        })
        .collect();
    out.csv("occupancy.csv", &[format!("m={}", grid.len())], &header, &rows)
}

fn st_tune(cfg: &RunConfig, out: &mut Outputs, report: &mut Report) -> Result<(), CliError> {
    let st = cfg.require_st()?;
    let kernel = kernel_for(cfg.require_model()?)?;
    let family = kernel_family(&kernel)?;
    let fam_name = family.name().to_string();
    let grid = initial_grid(cfg, &kernel, &*family)?;
    let opts = TuneOptions {
        rounds: st.rounds,
        steps_per_round: st.steps_per_round,
        max_ratio: st.max_ratio,
        update: match st.kappa {
            Some(kappa) => ZetaUpdate::Occupancy { kappa },
            None => ZetaUpdate::Marginal,
        },
        seed: cfg.seed,
    };
    let tuned = with_kernel!(kernel, |k| tune_zeta(k, grid, &*family, &opts).map(|(r, _)| r))?;
    write_zeta(out, "zeta.csv", &fam_name, &tuned.grid)?;
    if let Some(occ) = &tuned.grid.occupancy {
        occupancy_csv(out, &fam_name, &tuned.grid, occ)?;
    }
    out.json("tune.json", &tuned)?;
    let ratio = tuned.grid.occupancy.as_deref().map_or(f64::NAN, occupancy_ratio);
    report.notes.push(format!(
        "{} anchors, {} rounds, occupancy ratio {ratio:.3}",
        tuned.grid.len(),
        tuned.rounds_used
    ));
    if !tuned.converged {
        report.warnings.push(format!("tuning did not reach occupancy ratio {} in {} rounds", st.max_ratio, st.rounds));
    }
    Ok(())
}

#[derive(Serialize)]
struct StRunSummary {
    m: usize,
    n: usize,
    occupancy: Vec<f64>,
    occupancy_ratio: f64,
}

/// Runs serial tempering over the configured anchors for `[st] n` (or `[chain] n`) steps.
fn run_st_chain(cfg: &RunConfig) -> Result<(ChainTrace, StGrid), CliError> {
    let st = cfg.require_st()?;
    let n = match (st.n, cfg.length) {
        (Some(n), _) | (None, Some(Length::Steps(n))) => n,
        (None, Some(Length::Regenerations(_))) => {
            return Err(cfg.err_key("chain", "R", "serial tempering runs a fixed number of steps; set `n`").into())
        }
        (None, None) => return Err(cfg.err_key("st", "n", "set the number of steps in [st] n or [chain] n").into()),
    };
    let kernel = kernel_for(cfg.require_model()?)?;
    let family = kernel_family(&kernel)?;
    let grid = initial_grid(cfg, &kernel, &*family)?;
    let trace = with_kernel!(kernel, |k| {
        let mut chain = StChain::new(k, grid.clone(), &*family)?;
        simulate(&mut chain, Target::Steps(n), cfg.seed)
    })?;
    Ok((trace, grid))
}

fn st_run(cfg: &RunConfig, out: &mut Outputs, report: &mut Report) -> Result<(), CliError> {
    let (trace, grid) = run_st_chain(cfg)?;
    let (m, n) = (grid.len(), trace.len());
    out.trace("trace.txt", &trace)?;
    let occ = occupancy(trace.labels().expect("tempering traces carry labels"), m);
    occupancy_csv(out, &trace.meta.family, &grid, &occ)?;
    let ratio = occupancy_ratio(&occ);
    out.json("st_run.json", &StRunSummary { m, n, occupancy: occ, occupancy_ratio: ratio })?;
    report.notes.push(format!("{n} steps over {m} anchors, occupancy ratio {ratio:.3}"));
    Ok(())
}

fn synth(cfg: &RunConfig, out: &mut Outputs, report: &mut Report) -> Result<(), CliError> {
    let synth_cfg = cfg.synth.as_ref().ok_or_else(|| cfg.raw.err(None, "missing [synth] section"))?;
    match *synth_cfg {
        SynthConfig::Regression { rows, predictors, sparsity, snr } => {
            let (x, y, truth) = synth_regression(cfg.seed, rows, predictors, sparsity, snr)
                .map_err(|e| cfg.err_key("synth", "kind", e))?;
            let mut buf = Vec::new();
            write_regression_csv(&x, &y, &mut buf)?;
            out.text("regression.csv", &buf)?;
            out.json("truth.json", &truth)?;
            report.notes.push(format!("{rows} rows, {predictors} predictors, support {:?}", truth.support));
        }
        SynthConfig::Corpus { docs, vocab, topics, doc_length, eta, alpha } => {
            let (corpus, truth) = synth_corpus(cfg.seed, docs, vocab, topics, doc_length, eta, alpha)
                .map_err(|e| cfg.err_key("synth", "kind", e))?;
            let mut buf = Vec::new();
            write_corpus(&corpus, &mut buf)?;
            out.text("corpus.txt", &buf)?;
            out.json("truth.json", &truth)?;
            report.notes.push(format!("{docs} documents of {doc_length} tokens over {vocab} words"));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleSummary {
    n: usize,
    #[serde(rename = "R")]
    r: usize,
    points: usize,
    b_within_4se: usize,
    i_within_4se: usize,
    b_share: f64,
    i_share: f64,
    h_n: Vec<f64>,
    h_0: Vec<f64>,
    h_0_on_boundary: bool,
    argmax_distance: f64,
    pass: bool,
}

fn oracle_check(cfg: &RunConfig, out: &mut Outputs, report: &mut Report) -> Result<(), CliError> {
    let model_cfg = cfg.require_model()?;
    if !model_cfg.id.is_toy() {
        return Err(cfg.err_key("model", "id", "oracle checks need the toy model").into());
    }
    let model = toy_model(model_cfg)?;
    let (trace, loaded) = obtain_trace(cfg)?;
    if !loaded {
        out.trace("trace.txt", &trace)?;
    }
    let h1 = match &trace.meta.reference {
        Reference::Single { h1 } => h1.clone(),
        Reference::Mixture { .. } => return Err(CliError::Run(anyhow!("oracle checks need a single-reference trace"))),
    };
    let family = model.family();
    let grid = grid_for(cfg, &family)?;
    let rw = Reweighter::new(&trace, &family)?;
    let tours = tours_of(&trace)?;
    let (s, fs) = estimate_surfaces(&rw, tours.as_ref(), &grid, &["theta1"])?;
    let b_true: Vec<f64> = grid.iter().map(|h| (model.log_marginal(h) - model.log_marginal(&h1)).exp()).collect();
    let i_true: Vec<f64> = grid.iter().map(|h| model.i_theta1(h)).collect();
    let within = |v: &[f64], se: &[f64], t: &[f64]| {
        v.iter().zip(se).zip(t).filter(|((v, s), t)| (*v - *t).abs() <= 4.0 * *s).count()
    };
    let b_hits = within(&s.values, &s.se, &b_true);
    let i_hits = within(&fs[0].values, &fs[0].se, &i_true);

    let mut header: Vec<String> = param_names("normal-hier").iter().map(|s| s.to_string()).collect();
    header.extend(["B", "B_true", "se_B", "I_theta1", "I_theta1_true", "se_theta1"].map(String::from));
    let rows: Vec<Vec<String>> = (0..grid.len())
        .map(|i| {
            let mut r = point_cells(&grid[i]);
            r.extend([s.values[i], b_true[i], s.se[i], fs[0].values[i], i_true[i], fs[0].se[i]].map(num));
            r
        })
        .collect();
    out.csv("oracle.csv", &[], &header, &rows)?;

    let rect = cfg.require_rect()?;
    let opts = ArgmaxOptions { seed: cfg.seed, ..ArgmaxOptions::default() };
    let h_n = ebsurf::argmax::maximize_surface(&rw, rect, &opts)?.h;
    let (h_0, h_0_on_boundary) = model.argmax(rect);
    let dist = h_n.iter().zip(&h_0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let points = grid.len();
    let (b_share, i_share) = (b_hits as f64 / points as f64, i_hits as f64 / points as f64);
    let pass = b_share >= 0.95 && i_share >= 0.95;
    out.json(
        "oracle.json",
        &OracleSummary {
            n: s.n,
            r: s.r,
            points,
            b_within_4se: b_hits,
            i_within_4se: i_hits,
            b_share,
            i_share,
            h_n,
            h_0,
            h_0_on_boundary,
            argmax_distance: dist,
            pass,
        },
    )?;
    report
        .notes
        .push(format!("B within 4 SE at {b_hits}/{points}, I_theta1 at {i_hits}/{points}; |h_n - h_0| = {dist:.4}"));
    if !pass {
        report.warnings.push("fewer than 95% of grid points within 4 standard errors".into());
    }
    Ok(())
}
