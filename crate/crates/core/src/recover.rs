//! AMP, BAMP and BOSSAMP solvers with the L-value group/prior updates.
//!
//! L-values follow the convention `L = log P(x = 0) / P(x != 0)`, so large
//! positive values favour a zero entry.

use rayon::prelude::*;

use crate::denoise::{denoise_into, generic_posterior, logit, sigmoid, soft_threshold};
use crate::error::{Error, Result};
use crate::linalg::{dist_sq, norm, norm_sq, SensingMatrix};
use crate::model::{clamp_gamma, GroupStructure, PriorKind, SignalPrior};

/// Accumulated L-values are clamped to this magnitude before the prior update.
pub const L_MAX: f64 = 500.0;

/// Relative floor on the effective noise estimate, scaled by `||y||^2/M + 1`.
pub const BETA_FLOOR: f64 = 1e-12;

/// Default soft-threshold multiplier `2.678 K^-0.181`, tuned for `N = 1000`.
pub fn lambda_heuristic(k: usize) -> f64 {
    2.678 * (k.max(1) as f64).powf(-0.181)
}

/// Relative-change tolerance and iteration cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    pub eps_tol: f64,
    pub t_max: usize,
}

impl StoppingRule {
    pub fn new(eps_tol: f64, t_max: usize) -> Result<Self> {
        if !(eps_tol > 0.0) || t_max == 0 {
            return Err(Error::invalid(format!(
                "stopping rule needs eps_tol > 0 and t_max >= 1, got {eps_tol} and {t_max}"
            )));
        }
        Ok(StoppingRule { eps_tol, t_max })
    }

    /// Whether the do-while loop runs another iteration after iteration `t`.
    ///
    /// Returns `(continue, converged)`. A zero previous iterate counts as
    /// converged only on the first iteration, and only if the new iterate is
    /// zero as well.
    fn check(&self, t: usize, change: f64, prev_norm: f64) -> (bool, bool) {
        let converged = if prev_norm == 0.0 {
            t == 1 && change == 0.0
        } else {
            change <= self.eps_tol * prev_norm
        };
        (!converged && t < self.t_max, converged)
    }
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule {
            eps_tol: 1e-4,
            t_max: 100,
        }
    }
}

/// Optional instrumentation for a solver run.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions<'a> {
    /// Record `beta` (and NMSE against `reference`) every iteration.
    pub trace: bool,
    /// Keep a copy of every iterate `x^t`.
    pub keep_iterates: bool,
    /// Ground truth for the NMSE trajectory.
    pub reference: Option<&'a [f64]>,
    /// Include the Onsager correction in the residual. Only tests turn this off.
    #[doc(hidden)]
    pub onsager: bool,
}

impl Default for SolverOptions<'_> {
    fn default() -> Self {
        SolverOptions {
            trace: false,
            keep_iterates: false,
            reference: None,
            onsager: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub beta: f64,
    pub nmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub x_hat: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trajectory: Option<Vec<IterationRecord>>,
    pub iterates: Option<Vec<Vec<f64>>>,
}

/// Per-run iteration state.
#[derive(Debug, Clone)]
pub struct RecoveryState {
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub beta: f64,
    pub gamma: Vec<f64>,
    pub lbar: Vec<f64>,
    pub t: usize,
    x_prev: Vec<f64>,
    slope: Vec<f64>,
    ax: Vec<f64>,
}

impl RecoveryState {
    fn new(y: &[f64], gamma0: &[f64]) -> Self {
        let n = gamma0.len();
        RecoveryState {
            x: vec![0.0; n],
            r: y.to_vec(),
            u: vec![0.0; n],
            beta: 0.0,
            gamma: gamma0.to_vec(),
            lbar: gamma0.iter().map(|&g| logit(g)).collect(),
            t: 0,
            x_prev: vec![0.0; n],
            slope: vec![0.0; n],
            ax: vec![0.0; y.len()],
        }
    }
}

struct Recorder<'a> {
    opts: SolverOptions<'a>,
    trajectory: Vec<IterationRecord>,
    iterates: Vec<Vec<f64>>,
}

impl<'a> Recorder<'a> {
    fn new(opts: SolverOptions<'a>) -> Self {
        Recorder {
            opts,
            trajectory: Vec::new(),
            iterates: Vec::new(),
        }
    }

    fn record(&mut self, x: &[f64], beta: f64) {
        if self.opts.trace {
            let nmse = self.opts.reference.and_then(|truth| {
                let e = norm_sq(truth);
                (e > 0.0).then(|| dist_sq(truth, x) / e)
            });
            self.trajectory.push(IterationRecord { beta, nmse });
        }
        if self.opts.keep_iterates {
            self.iterates.push(x.to_vec());
        }
    }

    fn finish(self, x_hat: Vec<f64>, iterations: usize, converged: bool) -> RecoveryResult {
        RecoveryResult {
            x_hat,
            iterations,
            converged,
            trajectory: self.opts.trace.then_some(self.trajectory),
            iterates: self.opts.keep_iterates.then_some(self.iterates),
        }
    }
}

fn check_dims(y: &[f64], a: &SensingMatrix, n: usize) -> Result<()> {
    if y.len() != a.rows() {
        return Err(Error::invalid(format!(
            "measurement length {} does not match {} matrix rows",
            y.len(),
            a.rows()
        )));
    }
    if n != a.cols() {
        return Err(Error::invalid(format!(
            "signal length {n} does not match {} matrix columns",
            a.cols()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("measurements must be finite"));
    }
    Ok(())
}

fn ensure_finite(v: &[f64], iteration: usize, quantity: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence {
            iteration,
            quantity,
        })
    }
}

fn beta_floor(y: &[f64]) -> f64 {
    BETA_FLOOR * (norm_sq(y) / y.len() as f64 + 1.0)
}

/// Runs AMP with soft thresholding at `tau = lambda ||r|| / sqrt(M)`.
pub fn amp(y: &[f64], a: &SensingMatrix, lambda: f64, stop: StoppingRule) -> Result<RecoveryResult> {
    amp_with(y, a, lambda, stop, SolverOptions::default())
}

pub fn amp_with(
    y: &[f64],
    a: &SensingMatrix,
    lambda: f64,
    stop: StoppingRule,
    opts: SolverOptions<'_>,
) -> Result<RecoveryResult> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let (m, n) = (a.rows(), a.cols());
    check_dims(y, a, n)?;
    let mf = m as f64;
    let mut rec = Recorder::new(opts);
    let mut x = vec![0.0; n];
    let mut x_prev = vec![0.0; n];
    let mut r = y.to_vec();
    let mut u = vec![0.0; n];
    let mut ax = vec![0.0; m];
    let mut t = 0;
    loop {
        t += 1;
        std::mem::swap(&mut x, &mut x_prev);
        let tau = lambda / mf.sqrt() * norm(&r);
        a.apply_transpose(&r, &mut u);
        let mut active = 0usize;
        for i in 0..n {
            x[i] = soft_threshold(x_prev[i] + u[i], tau);
            active += (x[i] != 0.0) as usize;
        }
        let b = if opts.onsager { active as f64 / mf } else { 0.0 };
        a.apply(&x, &mut ax);
        for i in 0..m {
            r[i] = y[i] - ax[i] + b * r[i];
        }
        ensure_finite(&x, t, "estimate")?;
        ensure_finite(&r, t, "residual")?;
        rec.record(&x, norm_sq(&r) / mf);
        let (more, converged) = stop.check(t, dist_sq(&x, &x_prev).sqrt(), norm(&x_prev));
        if !more {
            return Ok(rec.finish(x, t, converged));
        }
    }
}

/// One BAMP iteration: decoupled measurements, effective noise, MMSE
/// denoising and the Onsager-corrected residual. Leaves `u^{t-1}` and
/// `beta^{t-1}` in the state for the subsequent group update.
fn bamp_step(
    st: &mut RecoveryState,
    y: &[f64],
    a: &SensingMatrix,
    kind: &PriorKind,
    floor: f64,
    onsager: bool,
) -> Result<()> {
    let mf = a.rows() as f64;
    st.t += 1;
    std::mem::swap(&mut st.x, &mut st.x_prev);
    a.apply_transpose(&st.r, &mut st.u);
    for (ui, &xi) in st.u.iter_mut().zip(&st.x_prev) {
        *ui += xi;
    }
    st.beta = (norm_sq(&st.r) / mf).max(floor);
    ensure_finite(&st.u, st.t, "decoupled measurement")?;
    if !st.beta.is_finite() {
        return Err(Error::Divergence {
            iteration: st.t,
            quantity: "effective noise",
        });
    }
    denoise_into(kind, &st.u, st.beta, &st.gamma, &mut st.x, &mut st.slope)?;
    let c = if onsager {
        st.slope.iter().sum::<f64>() / mf
    } else {
        0.0
    };
    a.apply(&st.x, &mut st.ax);
    for ((ri, &yi), &axi) in st.r.iter_mut().zip(y).zip(&st.ax) {
        *ri = yi - axi + c * *ri;
    }
    ensure_finite(&st.x, st.t, "estimate")?;
    ensure_finite(&st.r, st.t, "residual")?;
    Ok(())
}

/// Runs BAMP with the zero probabilities held at `prior.gamma0()`.
pub fn bamp(y: &[f64], a: &SensingMatrix, prior: &SignalPrior, stop: StoppingRule) -> Result<RecoveryResult> {
    bamp_with(y, a, prior, stop, SolverOptions::default())
}

pub fn bamp_with(
    y: &[f64],
    a: &SensingMatrix,
    prior: &SignalPrior,
    stop: StoppingRule,
    opts: SolverOptions<'_>,
) -> Result<RecoveryResult> {
    run_group(y, a, prior, None, stop, opts)
}

/// Runs BOSSAMP: BAMP plus an extrinsic group update anchored on the initial
/// zero probabilities and a prior update after every iteration.
pub fn bossamp_group(
    y: &[f64],
    a: &SensingMatrix,
    prior: &SignalPrior,
    groups: &GroupStructure,
    stop: StoppingRule,
) -> Result<RecoveryResult> {
    bossamp_group_with(y, a, prior, groups, stop, SolverOptions::default())
}

pub fn bossamp_group_with(
    y: &[f64],
    a: &SensingMatrix,
    prior: &SignalPrior,
    groups: &GroupStructure,
    stop: StoppingRule,
    opts: SolverOptions<'_>,
) -> Result<RecoveryResult> {
    if groups.len() != prior.len() {
        return Err(Error::invalid(format!(
            "group structure covers {} entries but the prior has {}",
            groups.len(),
            prior.len()
        )));
    }
    run_group(y, a, prior, Some(groups), stop, opts)
}

fn run_group(
    y: &[f64],
    a: &SensingMatrix,
    prior: &SignalPrior,
    groups: Option<&GroupStructure>,
    stop: StoppingRule,
    opts: SolverOptions<'_>,
) -> Result<RecoveryResult> {
    let n = prior.len();
    check_dims(y, a, n)?;
    let floor = beta_floor(y);
    let gamma0 = prior.gamma0();
    let prior_l: Vec<f64> = gamma0.iter().map(|&g| logit(g)).collect();
    let mut st = RecoveryState::new(y, gamma0);
    let mut innov = vec![0.0; n];
    let mut rec = Recorder::new(opts);
    loop {
        bamp_step(&mut st, y, a, prior.kind(), floor, opts.onsager)?;
        if let Some(groups) = groups {
            innovations_into(prior.kind(), &st.u, st.beta, &mut innov)?;
            for i in 0..n {
                let mates = groups.mates(i);
                if mates.is_empty() {
                    st.lbar[i] = prior_l[i];
                    st.gamma[i] = gamma0[i];
                } else {
                    let ext: f64 = mates.iter().map(|&l| innov[l]).sum();
                    st.lbar[i] = (prior_l[i] + ext).clamp(-L_MAX, L_MAX);
                    st.gamma[i] = prior_update_scalar(st.lbar[i]);
                }
            }
            ensure_finite(&st.lbar, st.t, "accumulated L-value")?;
        }
        rec.record(&st.x, st.beta);
        let (more, converged) = stop.check(st.t, dist_sq(&st.x, &st.x_prev).sqrt(), norm(&st.x_prev));
        if !more {
            let t = st.t;
            return Ok(rec.finish(st.x, t, converged));
        }
    }
}

/// Innovation L-values of a `{0, 1}` prior: `(1 - 2u) / (2 beta)`.
pub fn innovation_l_binary(u: &[f64], beta: f64) -> Vec<f64> {
    u.iter().map(|&v| (1.0 - 2.0 * v) / (2.0 * beta)).collect()
}

/// Innovation L-values of a Bernoulli-Gaussian prior:
/// `log N(u | 0, beta) - log N(u | 0, beta + sigma_x_sq)`.
pub fn innovation_l_gauss(u: &[f64], beta: f64, sigma_x_sq: f64) -> Vec<f64> {
    u.iter().map(|&v| innovation_gauss(v, beta, sigma_x_sq)).collect()
}

#[inline]
fn innovation_gauss(u: f64, beta: f64, sigma_x_sq: f64) -> f64 {
    0.5 * (sigma_x_sq / beta).ln_1p() - 0.5 * u * u * sigma_x_sq / (beta * (beta + sigma_x_sq))
}

/// Innovation L-values under an arbitrary nonzero density, through the
/// convolution of the density with the effective noise.
pub fn innovation_l_generic(u: &[f64], beta: f64, kind: &PriorKind) -> Result<Vec<f64>> {
    let mut out = vec![0.0; u.len()];
    innovations_into(kind, u, beta, &mut out)?;
    Ok(out)
}

fn innovations_into(kind: &PriorKind, u: &[f64], beta: f64, out: &mut [f64]) -> Result<()> {
    match kind {
        PriorKind::SparseBinary => {
            for (o, &v) in out.iter_mut().zip(u) {
                *o = (1.0 - 2.0 * v) / (2.0 * beta);
            }
        }
        PriorKind::SparseGaussian { sigma_x_sq } => {
            for (o, &v) in out.iter_mut().zip(u) {
                *o = innovation_gauss(v, beta, *sigma_x_sq);
            }
        }
        PriorKind::Generic(density) => {
            for (o, &v) in out.iter_mut().zip(u) {
                // gamma does not enter the innovation
                *o = generic_posterior(v, beta, 0.5, density)?.innovation;
            }
        }
    }
    Ok(())
}

/// Posterior probability that each entry belongs to the zero component of
/// the two-Gaussian mixture `gamma N(0, beta) + (1 - gamma) N(0, beta + sigma_x_sq)`.
pub fn responsibilities(u: &[f64], beta: f64, sigma_x_sq: f64, gamma_prev: &[f64]) -> Vec<f64> {
    u.iter()
        .zip(gamma_prev)
        .map(|(&v, &g)| {
            let l = logit(clamp_gamma(g)) + innovation_gauss(v, beta, sigma_x_sq);
            sigmoid(l).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
        })
        .collect()
}

/// `out[n] = sum of innov[l] over the groupmates l of n`.
pub fn extrinsic_sums(innov: &[f64], groups: &GroupStructure) -> Vec<f64> {
    (0..groups.len())
        .map(|i| groups.mates(i).iter().map(|&l| innov[l]).sum())
        .collect()
}

fn anchored(gamma0: &[f64], ext: Vec<f64>) -> Vec<f64> {
    gamma0
        .iter()
        .zip(ext)
        .map(|(&g, e)| logit(g) + e)
        .collect()
}

fn check_group_lengths(u: &[f64], gamma0: &[f64], groups: &GroupStructure) -> Result<()> {
    if u.len() != gamma0.len() || u.len() != groups.len() {
        return Err(Error::invalid(format!(
            "length mismatch: u {}, gamma0 {}, groups {}",
            u.len(),
            gamma0.len(),
            groups.len()
        )));
    }
    Ok(())
}

/// Binary extrinsic group update: prior L-value plus the innovations of all
/// groupmates, excluding the entry's own innovation.
pub fn group_update_binary(
    u: &[f64],
    beta: f64,
    gamma0: &[f64],
    groups: &GroupStructure,
) -> Result<Vec<f64>> {
    check_group_lengths(u, gamma0, groups)?;
    let innov = innovation_l_binary(u, beta);
    Ok(anchored(gamma0, extrinsic_sums(&innov, groups)))
}

/// Gaussian extrinsic group update.
pub fn group_update_gauss(
    u: &[f64],
    beta: f64,
    gamma0: &[f64],
    sigma_x_sq: f64,
    groups: &GroupStructure,
) -> Result<Vec<f64>> {
    check_group_lengths(u, gamma0, groups)?;
    let innov = innovation_l_gauss(u, beta, sigma_x_sq);
    Ok(anchored(gamma0, extrinsic_sums(&innov, groups)))
}

/// Extrinsic group update for any prior family.
pub fn group_update_generic(
    u: &[f64],
    beta: f64,
    gamma0: &[f64],
    prior: &PriorKind,
    groups: &GroupStructure,
) -> Result<Vec<f64>> {
    check_group_lengths(u, gamma0, groups)?;
    let innov = innovation_l_generic(u, beta, prior)?;
    Ok(anchored(gamma0, extrinsic_sums(&innov, groups)))
}

#[inline]
fn prior_update_scalar(lbar: f64) -> f64 {
    clamp_gamma(sigmoid(lbar.clamp(-L_MAX, L_MAX)))
}

/// Maps accumulated L-values back to clamped zero probabilities.
pub fn prior_update(lbar: &[f64]) -> Vec<f64> {
    lbar.iter().map(|&l| prior_update_scalar(l)).collect()
}

fn block_innovations(kind: &PriorKind, us: &[Vec<f64>], betas: &[f64]) -> Result<Vec<Vec<f64>>> {
    us.iter()
        .zip(betas)
        .map(|(u, &b)| innovation_l_generic(u, b, kind))
        .collect()
}

/// Extrinsic L-value sums across blocks. Without groups each entry collects
/// the innovations at its own index from every other block; with groups it
/// collects those of its groupmates in every other block. Returns `None`
/// where the extrinsic set is empty.
fn collective_extrinsic(innov: &[Vec<f64>], groups: Option<&GroupStructure>) -> Vec<Vec<Option<f64>>> {
    let blocks = innov.len();
    let n = innov[0].len();
    (0..blocks)
        .map(|b| {
            (0..n)
                .map(|i| {
                    if blocks < 2 {
                        return None;
                    }
                    match groups {
                        None => Some(
                            (0..blocks).filter(|&j| j != b).map(|j| innov[j][i]).sum(),
                        ),
                        Some(g) => {
                            let mates = g.mates(i);
                            if mates.is_empty() {
                                return None;
                            }
                            Some(
                                mates
                                    .iter()
                                    .map(|&l| {
                                        (0..blocks)
                                            .filter(|&j| j != b)
                                            .map(|j| innov[j][l])
                                            .sum::<f64>()
                                    })
                                    .sum(),
                            )
                        }
                    }
                })
                .collect()
        })
        .collect()
}

fn check_block_shapes(us: &[Vec<f64>], betas: &[f64], gamma0: &[Vec<f64>]) -> Result<usize> {
    if us.is_empty() || us.len() != betas.len() || us.len() != gamma0.len() {
        return Err(Error::invalid("u, betas and gamma0 need one entry per block"));
    }
    let n = us[0].len();
    if us.iter().chain(gamma0).any(|v| v.len() != n) {
        return Err(Error::invalid("all blocks must have the same length"));
    }
    Ok(n)
}

fn collective_lbar(
    gamma0: &[Vec<f64>],
    ext: Vec<Vec<Option<f64>>>,
) -> Vec<Vec<f64>> {
    gamma0
        .iter()
        .zip(ext)
        .map(|(g0, e)| {
            g0.iter()
                .zip(e)
                .map(|(&g, e)| logit(g) + e.unwrap_or(0.0))
                .collect()
        })
        .collect()
}

/// Collective extrinsic update for jointly sparse blocks. `us`, `gamma0` and
/// the result are block-major: `us[b][n]`.
pub fn group_update_joint(
    us: &[Vec<f64>],
    betas: &[f64],
    gamma0: &[Vec<f64>],
    prior: &PriorKind,
) -> Result<Vec<Vec<f64>>> {
    check_block_shapes(us, betas, gamma0)?;
    let innov = block_innovations(prior, us, betas)?;
    Ok(collective_lbar(gamma0, collective_extrinsic(&innov, None)))
}

/// Combined group and joint update: each entry collects the innovations of
/// its groupmates `i != n` in the other blocks `j != b`.
pub fn group_update_joint_group(
    us: &[Vec<f64>],
    betas: &[f64],
    gamma0: &[Vec<f64>],
    groups: &GroupStructure,
    prior: &PriorKind,
) -> Result<Vec<Vec<f64>>> {
    let n = check_block_shapes(us, betas, gamma0)?;
    if groups.len() != n {
        return Err(Error::invalid(format!(
            "group structure covers {} entries, blocks have {n}",
            groups.len()
        )));
    }
    let innov = block_innovations(prior, us, betas)?;
    Ok(collective_lbar(gamma0, collective_extrinsic(&innov, Some(groups))))
}

/// Runs BOSSAMP on `ys.len()` jointly sparse blocks.
///
/// `matrices` holds either one matrix shared by all blocks or one per block.
/// With `groups` the combined group and joint update is used, otherwise the
/// collective update across blocks at each index.
pub fn bossamp_joint(
    ys: &[Vec<f64>],
    matrices: &[SensingMatrix],
    prior: &SignalPrior,
    groups: Option<&GroupStructure>,
    stop: StoppingRule,
) -> Result<Vec<RecoveryResult>> {
    bossamp_joint_with(ys, matrices, prior, groups, stop, SolverOptions::default())
}

/// As [`bossamp_joint`]; `opts.reference`, when given, is the block-major
/// concatenation of the true signals.
pub fn bossamp_joint_with(
    ys: &[Vec<f64>],
    matrices: &[SensingMatrix],
    prior: &SignalPrior,
    groups: Option<&GroupStructure>,
    stop: StoppingRule,
    opts: SolverOptions<'_>,
) -> Result<Vec<RecoveryResult>> {
    let blocks = ys.len();
    if blocks == 0 {
        return Err(Error::invalid("joint recovery needs at least one block"));
    }
    if matrices.len() != 1 && matrices.len() != blocks {
        return Err(Error::invalid(format!(
            "expected 1 or {blocks} sensing matrices, got {}",
            matrices.len()
        )));
    }
    let n = prior.len();
    let matrix = |b: usize| if matrices.len() == 1 { &matrices[0] } else { &matrices[b] };
    for (b, y) in ys.iter().enumerate() {
        check_dims(y, matrix(b), n)?;
        if y.len() != ys[0].len() {
            return Err(Error::invalid("all blocks must have the same number of measurements"));
        }
    }
    if let Some(g) = groups {
        if g.len() != n {
            return Err(Error::invalid(format!(
                "group structure covers {} entries but the prior has {n}",
                g.len()
            )));
        }
    }
    if let Some(r) = opts.reference {
        if r.len() != n * blocks {
            return Err(Error::invalid("reference must concatenate all blocks"));
        }
    }

    let gamma0 = prior.gamma0();
    let prior_l: Vec<f64> = gamma0.iter().map(|&g| logit(g)).collect();
    let floors: Vec<f64> = ys.iter().map(|y| beta_floor(y)).collect();
    let mut states: Vec<RecoveryState> = ys.iter().map(|y| RecoveryState::new(y, gamma0)).collect();
    let mut recorders: Vec<Recorder> = (0..blocks)
        .map(|b| {
            let mut o = opts;
            o.reference = opts.reference.map(|r| &r[b * n..(b + 1) * n]);
            Recorder::new(o)
        })
        .collect();
    let mut innov = vec![vec![0.0; n]; blocks];
    let kind = prior.kind();

    loop {
        states
            .par_iter_mut()
            .enumerate()
            .try_for_each(|(b, st)| bamp_step(st, &ys[b], matrix(b), kind, floors[b], opts.onsager))?;
        let t = states[0].t;
        innov
            .par_iter_mut()
            .zip(states.par_iter())
            .try_for_each(|(out, st)| innovations_into(kind, &st.u, st.beta, out))?;
        let ext = collective_extrinsic(&innov, groups);
        for (st, e) in states.iter_mut().zip(ext) {
            for (i, e) in e.into_iter().enumerate() {
                match e {
                    None => {
                        st.lbar[i] = prior_l[i];
                        st.gamma[i] = gamma0[i];
                    }
                    Some(e) => {
                        st.lbar[i] = (prior_l[i] + e).clamp(-L_MAX, L_MAX);
                        st.gamma[i] = prior_update_scalar(st.lbar[i]);
                    }
                }
            }
            ensure_finite(&st.lbar, t, "accumulated L-value")?;
        }
        for (rec, st) in recorders.iter_mut().zip(&states) {
            rec.record(&st.x, st.beta);
        }
        let change: f64 = states.iter().map(|s| dist_sq(&s.x, &s.x_prev)).sum::<f64>().sqrt();
        let prev: f64 = states.iter().map(|s| norm_sq(&s.x_prev)).sum::<f64>().sqrt();
        let (more, converged) = stop.check(t, change, prev);
        if !more {
            return Ok(recorders
                .into_iter()
                .zip(states)
                .map(|(rec, st)| rec.finish(st.x, t, converged))
                .collect());
        }
    }
}
