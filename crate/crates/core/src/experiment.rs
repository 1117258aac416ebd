//! Seeded Monte-Carlo experiments: variable SNR, variable M and empirical
//! phase transitions, with CSV output.
//!
//! Every realization derives its seed from the master seed and the sweep
//! point, runs on the worker pool, and is aggregated in realization order, so
//! tables do not depend on the number of threads.

use std::fs;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::metrics::{contour_half, success_area, GridField, RealizationMetrics};
use crate::model::{linear_to_db, make_instance, make_joint_instance, PriorKind};
use crate::recover::{amp, bamp, bossamp_group, bossamp_joint, lambda_heuristic, StoppingRule};
use crate::rng::{derive_seed, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    VariableSnr,
    VariableM,
    PhaseTransition,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::VariableSnr => "variable-snr",
            Family::VariableM => "variable-m",
            Family::PhaseTransition => "phase-transition",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Amp,
    Bamp,
    BossampGroup,
    BossampJoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorChoice {
    SparseBinary,
    SparseGaussian,
}

/// A scalar, an explicit list, or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Sweep<T> {
    Value(T),
    List(Vec<T>),
    Range { start: T, stop: T, step: T },
}

impl<T: Copy> Sweep<T> {
    fn is_scalar(&self) -> bool {
        matches!(self, Sweep::Value(_))
    }
}

impl Sweep<usize> {
    fn points(&self) -> Result<Vec<usize>> {
        match self {
            Sweep::Value(v) => Ok(vec![*v]),
            Sweep::List(v) => Ok(v.clone()),
            Sweep::Range { start, stop, step } => {
                if *step == 0 || start > stop {
                    return Err(Error::Config(format!(
                        "integer range {start}..={stop} step {step} is empty or unbounded"
                    )));
                }
                Ok((*start..=*stop).step_by(*step).collect())
            }
        }
    }
}

impl Sweep<f64> {
    fn points(&self) -> Result<Vec<f64>> {
        match self {
            Sweep::Value(v) => Ok(vec![*v]),
            Sweep::List(v) => Ok(v.clone()),
            Sweep::Range { start, stop, step } => float_range(*start, *stop, *step),
        }
    }
}

fn float_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(start <= stop) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::Config(format!(
            "range {start}..={stop} step {step} is empty or unbounded"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    // round to 12 decimals so 0.05 * 3 prints as 0.15
    Ok((0..=count)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

fn default_sigma_x_sq() -> f64 {
    1.0
}
fn default_one() -> usize {
    1
}
fn default_eps_tol() -> f64 {
    1e-4
}
fn default_t_max() -> usize {
    100
}
fn default_axis() -> Sweep<f64> {
    Sweep::Range {
        start: 0.05,
        stop: 0.95,
        step: 0.05,
    }
}

/// Experiment description, read from a TOML document. Unknown keys are
/// rejected.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the CLI subcommand when given.
    pub family: Option<Family>,
    pub algorithm: Algorithm,
    pub prior: PriorChoice,
    #[serde(default = "default_sigma_x_sq")]
    pub sigma_x_sq: f64,
    pub n: usize,
    /// Number of nonzeros; derived per cell for phase transitions.
    pub k: Option<usize>,
    /// Measurements; derived per cell for phase transitions.
    pub m: Option<Sweep<usize>>,
    /// Measurement SNR in dB (`inf` for noiseless). Phase transitions
    /// default to noiseless.
    pub snr_db: Option<Sweep<f64>>,
    #[serde(default = "default_one")]
    pub group_size: usize,
    #[serde(default = "default_one")]
    pub blocks: usize,
    /// Joint runs only: one sensing matrix for all blocks instead of one per
    /// block.
    #[serde(default)]
    pub shared_matrix: bool,
    pub realizations: usize,
    pub master_seed: u64,
    #[serde(default = "default_eps_tol")]
    pub eps_tol: f64,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    /// Soft-threshold multiplier for AMP; defaults to `2.678 K^-0.181`.
    pub lambda: Option<f64>,
    /// M/N axis of the phase-transition grid.
    #[serde(default = "default_axis")]
    pub undersampling: Sweep<f64>,
    /// K/M axis of the phase-transition grid.
    #[serde(default = "default_axis")]
    pub sparsity: Sweep<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    fn prior_kind(&self) -> PriorKind {
        match self.prior {
            PriorChoice::SparseBinary => PriorKind::SparseBinary,
            PriorChoice::SparseGaussian => PriorKind::SparseGaussian {
                sigma_x_sq: self.sigma_x_sq,
            },
        }
    }

    fn stopping(&self) -> Result<StoppingRule> {
        StoppingRule::new(self.eps_tol, self.t_max).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks the config for `family` and expands it into sweep points.
    pub fn plan(&self, family: Family) -> Result<Plan> {
        let bad = |msg: String| Err(Error::Config(msg));
        if let Some(f) = self.family {
            if f != family {
                return bad(format!(
                    "config declares family {} but {} was requested",
                    f.name(),
                    family.name()
                ));
            }
        }
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.realizations == 0 {
            return bad("realizations must be positive".into());
        }
        if self.group_size == 0 || self.n % self.group_size != 0 {
            return bad(format!(
                "group_size {} does not divide n = {}",
                self.group_size, self.n
            ));
        }
        if self.blocks == 0 {
            return bad("blocks must be positive".into());
        }
        if self.blocks > 1 && self.algorithm != Algorithm::BossampJoint {
            return bad("blocks > 1 requires algorithm = bossamp_joint".into());
        }
        if self.prior == PriorChoice::SparseGaussian && !(self.sigma_x_sq > 0.0) {
            return bad(format!("sigma_x_sq must be positive, got {}", self.sigma_x_sq));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) {
                return bad(format!("lambda must be positive, got {l}"));
            }
        }
        self.stopping()?;
        let check_snr = |s: f64| -> Result<()> {
            if s.is_nan() || s == f64::NEG_INFINITY {
                return Err(Error::Config(format!("snr_db {s} is not usable")));
            }
            Ok(())
        };

        let points = match family {
            Family::VariableSnr | Family::VariableM => {
                let k = match self.k {
                    Some(k) => k,
                    None => return bad("k is required".into()),
                };
                self.check_sparsity(k)?;
                let m = self
                    .m
                    .as_ref()
                    .ok_or_else(|| Error::Config("m is required".into()))?;
                let snr = self
                    .snr_db
                    .as_ref()
                    .ok_or_else(|| Error::Config("snr_db is required".into()))?;
                if family == Family::VariableSnr && !m.is_scalar() {
                    return bad("variable-snr sweeps snr_db; m must be a single value".into());
                }
                if family == Family::VariableM && !snr.is_scalar() {
                    return bad("variable-m sweeps m; snr_db must be a single value".into());
                }
                let ms = m.points()?;
                let snrs = snr.points()?;
                let mut pts = Vec::new();
                for &m in &ms {
                    if m == 0 {
                        return bad("m must be positive".into());
                    }
                    for &s in &snrs {
                        check_snr(s)?;
                        let key = match family {
                            Family::VariableSnr => s.to_bits(),
                            _ => m as u64,
                        };
                        pts.push(SweepPoint {
                            m,
                            k,
                            snr_db: s,
                            key,
                            cell: None,
                        });
                    }
                }
                pts
            }
            Family::PhaseTransition => {
                if self.k.is_some() || self.m.is_some() {
                    return bad("phase-transition derives m and k from the grid; remove them".into());
                }
                let snr = match &self.snr_db {
                    None => f64::INFINITY,
                    Some(Sweep::Value(s)) => *s,
                    Some(_) => return bad("phase-transition takes a single snr_db".into()),
                };
                check_snr(snr)?;
                let xs = self.undersampling.points()?;
                let ys = self.sparsity.points()?;
                for (name, axis) in [("undersampling", &xs), ("sparsity", &ys)] {
                    if axis.is_empty() || axis.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
                        return bad(format!("{name} axis values must lie in (0, 1)"));
                    }
                    if axis.windows(2).any(|w| w[0] >= w[1]) {
                        return bad(format!("{name} axis must be strictly increasing"));
                    }
                }
                let mut pts = Vec::new();
                for (iy, &rho) in ys.iter().enumerate() {
                    for (ix, &delta) in xs.iter().enumerate() {
                        let m = (delta * self.n as f64).round() as usize;
                        if m == 0 || m > self.n {
                            return bad(format!(
                                "undersampling {delta} gives M = {m} outside 1..={}",
                                self.n
                            ));
                        }
                        let k = grid_sparsity(rho, m, self.group_size).min(self.n);
                        pts.push(SweepPoint {
                            m,
                            k,
                            snr_db: snr,
                            key: ((iy as u64) << 32) | ix as u64,
                            cell: Some((ix, iy)),
                        });
                    }
                }
                return Ok(Plan {
                    family,
                    points: pts,
                    axes: Some((xs, ys)),
                });
            }
        };
        Ok(Plan {
            family,
            points,
            axes: None,
        })
    }

    fn check_sparsity(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.n {
            return Err(Error::Config(format!("k = {k} must lie in 1..={}", self.n)));
        }
        if k % self.group_size != 0 {
            return Err(Error::Config(format!(
                "k = {k} is not divisible by group_size {}",
                self.group_size
            )));
        }
        Ok(())
    }
}

/// `round(rho * m)` rounded down to a multiple of the group size, at least one
/// group.
pub fn grid_sparsity(rho: f64, m: usize, group_size: usize) -> usize {
    let k = (rho * m as f64).round() as usize;
    (k / group_size * group_size).max(group_size)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub m: usize,
    pub k: usize,
    pub snr_db: f64,
    /// Seed key: identical keys give identical instances across configs.
    key: u64,
    cell: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub family: Family,
    pub points: Vec<SweepPoint>,
    axes: Option<(Vec<f64>, Vec<f64>)>,
}

/// Aggregated statistics of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub m: usize,
    pub k: usize,
    pub snr_db: f64,
    pub mean_nmse: f64,
    pub mean_fanmse: f64,
    pub mean_iterations: f64,
    pub avg_success: f64,
    /// Configured realizations, including diverged ones.
    pub realizations: usize,
    /// Realizations left out of the means after a numeric divergence.
    pub diverged: usize,
    /// Mean iterations over successful realizations only (NaN if none).
    pub mean_success_iterations: f64,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepValue {
    Int(usize),
    Float(f64),
}

#[derive(Debug, Clone)]
pub struct ResultTable {
    pub family: Family,
    pub master_seed: u64,
    pub sweep_columns: Vec<&'static str>,
    pub sweep_values: Vec<Vec<SweepValue>>,
    pub points: Vec<PointSummary>,
}

impl ResultTable {
    pub fn diverged(&self) -> usize {
        self.points.iter().map(|p| p.diverged).sum()
    }

    /// CSV text: one header row, fixed-point decimals with ten digits after
    /// the point, rows in sweep order.
    pub fn to_csv(&self) -> String {
        let mut header: Vec<&str> = self.sweep_columns.clone();
        header.extend([
            "mean_nmse_db",
            "mean_fanmse_db",
            "mean_iterations",
            "avg_success",
            "realizations",
            "master_seed",
        ]);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&header).expect("in-memory write");
        for (vals, p) in self.sweep_values.iter().zip(&self.points) {
            let mut row: Vec<String> = vals
                .iter()
                .map(|v| match v {
                    SweepValue::Int(i) => i.to_string(),
                    SweepValue::Float(f) => fmt_decimal(*f),
                })
                .collect();
            row.extend([
                fmt_decimal(linear_to_db(p.mean_nmse)),
                fmt_decimal(linear_to_db(p.mean_fanmse)),
                fmt_decimal(p.mean_iterations),
                fmt_decimal(p.avg_success),
                p.realizations.to_string(),
                self.master_seed.to_string(),
            ]);
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }
}

pub fn fmt_decimal(v: f64) -> String {
    format!("{v:.10}")
}

/// Writes `text` to `path`, attaching the path to any I/O error.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_csv(table: &ResultTable, path: &Path) -> Result<()> {
    write_text(path, &table.to_csv())
}

/// Average-success grid of a phase-transition run.
#[derive(Debug, Clone)]
pub struct ExperimentGrid {
    pub undersampling_axis: Vec<f64>,
    pub sparsity_axis: Vec<f64>,
    /// `cells[iy][ix]` for sparsity index `iy` and undersampling index `ix`.
    pub cells: Vec<Vec<PointSummary>>,
}

impl ExperimentGrid {
    pub fn success_field(&self) -> Result<GridField> {
        GridField::new(
            self.undersampling_axis.clone(),
            self.sparsity_axis.clone(),
            self.cells
                .iter()
                .map(|row| row.iter().map(|c| c.avg_success).collect())
                .collect(),
        )
    }

    pub fn contour(&self) -> Result<Vec<Vec<(f64, f64)>>> {
        Ok(contour_half(&self.success_field()?))
    }

    pub fn success_area(&self) -> Result<f64> {
        Ok(success_area(&self.success_field()?))
    }
}

/// Contour polylines as CSV: `polyline,point,undersampling,sparsity`.
pub fn contour_csv(polylines: &[Vec<(f64, f64)>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["polyline", "point", "undersampling", "sparsity"])
        .expect("in-memory write");
    for (i, line) in polylines.iter().enumerate() {
        for (j, &(x, y)) in line.iter().enumerate() {
            w.write_record([i.to_string(), j.to_string(), fmt_decimal(x), fmt_decimal(y)])
                .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

enum Outcome {
    Done(RealizationMetrics),
    Diverged,
}

fn run_realization(config: &ExperimentConfig, point: &SweepPoint, seed: u64) -> Result<Outcome> {
    let stop = config.stopping()?;
    let kind = config.prior_kind();
    let solved = match config.algorithm {
        Algorithm::BossampJoint => {
            let inst = make_joint_instance(
                point.m,
                config.n,
                point.k,
                config.group_size,
                config.blocks,
                kind,
                point.snr_db,
                config.shared_matrix,
                seed,
            )?;
            let groups = (config.group_size > 1).then_some(&inst.groups);
            bossamp_joint(&inst.ys, &inst.matrices, &inst.prior, groups, stop).map(|res| {
                let x_hat: Vec<f64> = res.iter().flat_map(|r| r.x_hat.iter().copied()).collect();
                let x_true: Vec<f64> = inst.xs.concat();
                (x_true, x_hat, res[0].iterations)
            })
        }
        alg => {
            let inst = make_instance(point.m, config.n, point.k, config.group_size, kind, point.snr_db, seed)?;
            let res = match alg {
                Algorithm::Amp => {
                    let lambda = config.lambda.unwrap_or_else(|| lambda_heuristic(point.k));
                    amp(&inst.y, &inst.a, lambda, stop)
                }
                Algorithm::Bamp => bamp(&inst.y, &inst.a, &inst.prior, stop),
                _ => bossamp_group(&inst.y, &inst.a, &inst.prior, &inst.groups, stop),
            };
            res.map(|r| (inst.x_true, r.x_hat, r.iterations))
        }
    };
    match solved {
        Ok((x_true, x_hat, iterations)) => Ok(Outcome::Done(RealizationMetrics::evaluate(
            &x_true, &x_hat, iterations, seed,
        )?)),
        Err(Error::Divergence { iteration, quantity }) => {
            warn!(
                "realization seed {seed:#018x} (M={}, K={}) diverged at iteration {iteration}: {quantity}",
                point.m, point.k
            );
            Ok(Outcome::Diverged)
        }
        Err(e) => Err(e),
    }
}

fn summarize(point: &SweepPoint, seeds: Vec<u64>, outcomes: Vec<Outcome>) -> PointSummary {
    let done: Vec<&RealizationMetrics> = outcomes
        .iter()
        .filter_map(|o| match o {
            Outcome::Done(m) => Some(m),
            Outcome::Diverged => None,
        })
        .collect();
    let count = done.len();
    let mean = |f: &dyn Fn(&RealizationMetrics) -> f64| {
        if count == 0 {
            f64::NAN
        } else {
            done.iter().map(|m| f(m)).sum::<f64>() / count as f64
        }
    };
    let successes: Vec<&&RealizationMetrics> = done.iter().filter(|m| m.success).collect();
    let mean_success_iterations = if successes.is_empty() {
        f64::NAN
    } else {
        successes.iter().map(|m| m.iterations as f64).sum::<f64>() / successes.len() as f64
    };
    PointSummary {
        m: point.m,
        k: point.k,
        snr_db: point.snr_db,
        mean_nmse: mean(&|m| m.nmse),
        mean_fanmse: mean(&|m| m.fanmse),
        mean_iterations: mean(&|m| m.iterations as f64),
        avg_success: mean(&|m| if m.success { 1.0 } else { 0.0 }),
        realizations: outcomes.len(),
        diverged: outcomes.len() - count,
        mean_success_iterations,
        seeds,
    }
}

fn execute(config: &ExperimentConfig, plan: &Plan) -> Result<Vec<PointSummary>> {
    let tasks: Vec<(usize, u64)> = plan
        .points
        .iter()
        .enumerate()
        .flat_map(|(p, point)| {
            let base = derive_seed(config.master_seed, Role::Cell, point.key);
            (0..config.realizations).map(move |r| (p, derive_seed(base, Role::Realization, r as u64)))
        })
        .collect();
    let outcomes: Vec<Outcome> = tasks
        .par_iter()
        .map(|&(p, seed)| run_realization(config, &plan.points[p], seed))
        .collect::<Result<_>>()?;

    let mut outcomes = outcomes.into_iter();
    let mut seeds = tasks.into_iter().map(|t| t.1);
    Ok(plan
        .points
        .iter()
        .map(|point| {
            let o: Vec<Outcome> = outcomes.by_ref().take(config.realizations).collect();
            let s: Vec<u64> = seeds.by_ref().take(config.realizations).collect();
            summarize(point, s, o)
        })
        .collect())
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot build a pool of {t} threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs a variable-SNR or variable-M experiment. `threads = None` uses the
/// global pool.
pub fn run_experiment(config: &ExperimentConfig, family: Family, threads: Option<usize>) -> Result<ResultTable> {
    if family == Family::PhaseTransition {
        let (grid, _) = run_phase_transition(config, threads)?;
        return Ok(grid_table(config, &grid));
    }
    let plan = config.plan(family)?;
    let points = with_pool(threads, || execute(config, &plan))??;
    let (sweep_columns, sweep_values) = match family {
        Family::VariableSnr => (
            vec!["snr_db", "m"],
            points
                .iter()
                .map(|p| vec![SweepValue::Float(p.snr_db), SweepValue::Int(p.m)])
                .collect(),
        ),
        _ => (
            vec!["m", "snr_db"],
            points
                .iter()
                .map(|p| vec![SweepValue::Int(p.m), SweepValue::Float(p.snr_db)])
                .collect(),
        ),
    };
    Ok(ResultTable {
        family,
        master_seed: config.master_seed,
        sweep_columns,
        sweep_values,
        points,
    })
}

/// Populates the phase-transition grid and extracts its 0.5 contour.
pub fn run_phase_transition(
    config: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<(ExperimentGrid, Vec<Vec<(f64, f64)>>)> {
    let plan = config.plan(Family::PhaseTransition)?;
    let (xs, ys) = plan.axes.clone().expect("phase-transition plan carries axes");
    let points = with_pool(threads, || execute(config, &plan))??;
    let mut cells: Vec<Vec<PointSummary>> = vec![Vec::with_capacity(xs.len()); ys.len()];
    for (point, summary) in plan.points.iter().zip(points) {
        let (_, iy) = point.cell.expect("grid point");
        cells[iy].push(summary);
    }
    let grid = ExperimentGrid {
        undersampling_axis: xs,
        sparsity_axis: ys,
        cells,
    };
    let contour = grid.contour()?;
    Ok((grid, contour))
}

/// Flattens a grid into a result table with `undersampling,sparsity,m,k`
/// sweep columns, sparsity-major.
pub fn grid_table(config: &ExperimentConfig, grid: &ExperimentGrid) -> ResultTable {
    let mut sweep_values = Vec::new();
    let mut points = Vec::new();
    for (iy, row) in grid.cells.iter().enumerate() {
        for (ix, cell) in row.iter().enumerate() {
            sweep_values.push(vec![
                SweepValue::Float(grid.undersampling_axis[ix]),
                SweepValue::Float(grid.sparsity_axis[iy]),
                SweepValue::Int(cell.m),
                SweepValue::Int(cell.k),
            ]);
            points.push(cell.clone());
        }
    }
    ResultTable {
        family: Family::PhaseTransition,
        master_seed: config.master_seed,
        sweep_columns: vec!["undersampling", "sparsity", "m", "k"],
        sweep_values,
        points,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
algorithm = "bamp"
prior = "sparse_binary"
n = 100
k = 10
m = 50
snr_db = [20.0, 30.0]
realizations = 2
master_seed = 7
"#;

    #[test]
    fn parses_and_plans() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.eps_tol, 1e-4);
        assert_eq!(cfg.t_max, 100);
        let plan = cfg.plan(Family::VariableSnr).unwrap();
        assert_eq!(plan.points.len(), 2);
        assert!(cfg.plan(Family::VariableM).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{BASE}\nrealisations = 3\n");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("realisations"), "{err}");
    }

    #[test]
    fn k_must_be_divisible_by_group_size() {
        let text = BASE.replace("k = 10", "k = 10\ngroup_size = 4");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert!(cfg.plan(Family::VariableSnr).is_err());
    }

    #[test]
    fn family_mismatch_is_rejected() {
        let text = format!("family = \"variable-m\"\n{BASE}");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert!(cfg.plan(Family::VariableSnr).is_err());
    }

    #[test]
    fn phase_transition_axes() {
        let text = r#"
algorithm = "amp"
prior = "sparse_binary"
n = 100
group_size = 2
realizations = 1
master_seed = 1
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let plan = cfg.plan(Family::PhaseTransition).unwrap();
        assert_eq!(plan.points.len(), 19 * 19);
        let (xs, ys) = plan.axes.unwrap();
        assert_eq!(xs.len(), 19);
        assert_eq!(xs[2], 0.15);
        assert_eq!(ys[18], 0.95);
        assert!(plan.points.iter().all(|p| p.snr_db == f64::INFINITY));

        let out_of_range = format!("{text}\nsparsity = [0.5, 1.0]\n");
        let cfg = ExperimentConfig::from_toml(&out_of_range).unwrap();
        assert!(cfg.plan(Family::PhaseTransition).is_err());
        let with_m = format!("{text}\nm = 10\n");
        let cfg = ExperimentConfig::from_toml(&with_m).unwrap();
        assert!(cfg.plan(Family::PhaseTransition).is_err());
    }

    #[test]
    fn grid_sparsity_rounding() {
        assert_eq!(grid_sparsity(0.05, 13, 2), 2);
        assert_eq!(grid_sparsity(0.5, 101, 2), 50);
        assert_eq!(grid_sparsity(0.95, 243, 8), 224);
        assert_eq!(grid_sparsity(0.05, 10, 8), 8);
    }

    #[test]
    fn float_range_is_inclusive() {
        let r = float_range(0.05, 0.95, 0.05).unwrap();
        assert_eq!(r.len(), 19);
        assert_eq!(r[0], 0.05);
        assert_eq!(r[18], 0.95);
        assert!(float_range(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn csv_formatting() {
        assert_eq!(fmt_decimal(linear_to_db(1.0)), "0.0000000000");
        let table = ResultTable {
            family: Family::VariableM,
            master_seed: 3,
            sweep_columns: vec!["m", "snr_db"],
            sweep_values: vec![],
            points: vec![],
        };
        assert_eq!(
            table.to_csv(),
            "m,snr_db,mean_nmse_db,mean_fanmse_db,mean_iterations,avg_success,realizations,master_seed\n"
        );
    }

    #[test]
    fn write_csv_reports_path() {
        let table = ResultTable {
            family: Family::VariableM,
            master_seed: 3,
            sweep_columns: vec!["m"],
            sweep_values: vec![],
            points: vec![],
        };
        let err = write_csv(&table, Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }
}
