//! Scalar denoisers for the decoupled problem `u = x + N(0, beta)`.
//!
//! `F` is the posterior mean, `G` the posterior variance and `F'` the
//! derivative of `F` in `u`, which equals `G / beta` for these priors. All
//! logistic and exponential terms go through log-domain forms so that
//! `|(1 - 2u) / (2 beta)|` far beyond 700 saturates instead of producing NaN.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{clamp_gamma, PriorKind};
use crate::quadrature::{integrate, Tolerance};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Largest double strictly below one.
const ONE_MINUS_ULP: f64 = 1.0 - f64::EPSILON / 2.0;

/// Half-width of the Gaussian kernel window, in standard deviations.
const KERNEL_WIDTH: f64 = 40.0;

pub fn soft_threshold(u: f64, tau: f64) -> f64 {
    if u > tau {
        u - tau
    } else if u < -tau {
        u + tau
    } else {
        0.0
    }
}

/// `log(p / (1 - p))`
pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// `1 / (1 + exp(-x))` without overflow.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Returns `(sigmoid(x), sigmoid(-x))`, each accurate to full relative
/// precision.
fn sigmoid_pair(x: f64) -> (f64, f64) {
    if x >= 0.0 {
        let e = (-x).exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        let e = x.exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    }
}

/// Log-odds that the entry is one, i.e. minus the conditional L-value.
#[inline]
fn binary_activity(u: f64, beta: f64, gamma: f64) -> f64 {
    -((1.0 - 2.0 * u) / (2.0 * beta) + logit(clamp_gamma(gamma)))
}

#[inline]
fn saturate_unit(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, ONE_MINUS_ULP)
}

/// Posterior mean of a `{0, 1}` entry with zero probability `gamma`.
pub fn f_binary(u: f64, beta: f64, gamma: f64) -> f64 {
    saturate_unit(sigmoid(binary_activity(u, beta, gamma)))
}

/// Posterior variance `F - F^2` of a `{0, 1}` entry.
pub fn g_binary(u: f64, beta: f64, gamma: f64) -> f64 {
    let (p1, p0) = sigmoid_pair(binary_activity(u, beta, gamma));
    saturate_unit(p1) * saturate_unit(p0)
}

pub fn fprime_binary(u: f64, beta: f64, gamma: f64) -> f64 {
    g_binary(u, beta, gamma) / beta
}

/// Auxiliary quantities of the Bernoulli-Gaussian posterior.
#[derive(Debug, Clone, Copy)]
struct GaussAux {
    /// `q / (1 + q)` with `q = sigma_x_sq / beta`.
    gain: f64,
    /// `log m`, the log-odds of the zero component given `u`.
    log_m: f64,
    /// Posterior probability that the entry is active, `1 / (1 + m)`.
    active: f64,
    /// `m / (1 + m)`.
    inactive: f64,
}

#[inline]
fn gauss_aux(u: f64, beta: f64, gamma: f64, sigma_x_sq: f64) -> GaussAux {
    let q = sigma_x_sq / beta;
    let gain = sigma_x_sq / (sigma_x_sq + beta);
    let log_m = logit(clamp_gamma(gamma)) + 0.5 * q.ln_1p() - 0.5 * u * u * gain / beta;
    let (inactive, active) = sigmoid_pair(log_m);
    GaussAux {
        gain,
        log_m,
        active,
        inactive,
    }
}

/// Posterior mean `u * M` for the Bernoulli-Gaussian prior.
pub fn f_gauss(u: f64, beta: f64, gamma: f64, sigma_x_sq: f64) -> f64 {
    let aux = gauss_aux(u, beta, gamma, sigma_x_sq);
    u * aux.gain * aux.active
}

/// The closed form `beta * M + m`.
///
/// This is not the posterior variance: the `m` term lacks the factor
/// `F^2`. Use [`conditional_variance_gauss`] for the true second moment.
pub fn g_gauss(u: f64, beta: f64, gamma: f64, sigma_x_sq: f64) -> f64 {
    let aux = gauss_aux(u, beta, gamma, sigma_x_sq);
    beta * aux.gain * aux.active + aux.log_m.exp()
}

/// `g_gauss / beta`.
pub fn fprime_gauss(u: f64, beta: f64, gamma: f64, sigma_x_sq: f64) -> f64 {
    g_gauss(u, beta, gamma, sigma_x_sq) / beta
}

/// Posterior variance `beta * M + m * F^2` of the Bernoulli-Gaussian prior.
pub fn conditional_variance_gauss(u: f64, beta: f64, gamma: f64, sigma_x_sq: f64) -> f64 {
    let aux = gauss_aux(u, beta, gamma, sigma_x_sq);
    let mean_if_active = u * aux.gain;
    beta * aux.gain * aux.active + mean_if_active * mean_if_active * aux.active * aux.inactive
}

/// Exact derivative of [`f_gauss`] in `u`.
pub fn fprime_gauss_exact(u: f64, beta: f64, gamma: f64, sigma_x_sq: f64) -> f64 {
    conditional_variance_gauss(u, beta, gamma, sigma_x_sq) / beta
}

type PdfFn = dyn Fn(f64) -> f64 + Send + Sync;

/// User-supplied density on a bounded support.
#[derive(Clone)]
pub struct CustomDensity {
    pdf: Arc<PdfFn>,
    lo: f64,
    hi: f64,
    breakpoints: Vec<f64>,
}

impl CustomDensity {
    /// `pdf` must integrate to one over `[lo, hi]`; `breakpoints` mark kinks
    /// or discontinuities the quadrature should not straddle.
    pub fn new(
        pdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lo: f64,
        hi: f64,
        breakpoints: Vec<f64>,
    ) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!(
                "density support must be a finite interval, got [{lo}, {hi}]"
            )));
        }
        Ok(CustomDensity {
            pdf: Arc::new(pdf),
            lo,
            hi,
            breakpoints,
        })
    }
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDensity")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("breakpoints", &self.breakpoints)
            .finish_non_exhaustive()
    }
}

/// Distribution of the nonzero entries under a generic spike-and-slab prior.
#[derive(Debug, Clone)]
pub enum NonzeroDensity {
    /// Discrete atoms `(location, weight)`; weights are normalized.
    Atoms(Vec<(f64, f64)>),
    /// `Normal(0, variance)`, integrated numerically.
    Normal { variance: f64 },
    Uniform { lo: f64, hi: f64 },
    Custom(CustomDensity),
}

impl NonzeroDensity {
    pub fn point_mass(at: f64) -> Self {
        NonzeroDensity::Atoms(vec![(at, 1.0)])
    }

    pub fn atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if atoms.is_empty()
            || atoms.iter().any(|a| !a.0.is_finite() || !(a.1 >= 0.0))
            || !(total > 0.0)
        {
            return Err(Error::invalid("atoms need finite locations and positive total weight"));
        }
        Ok(NonzeroDensity::Atoms(
            atoms.into_iter().map(|(x, w)| (x, w / total)).collect(),
        ))
    }

    pub fn normal(variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::invalid(format!("normal variance must be positive, got {variance}")));
        }
        Ok(NonzeroDensity::Normal { variance })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("uniform support [{lo}, {hi}] is empty")));
        }
        Ok(NonzeroDensity::Uniform { lo, hi })
    }

    /// Draws one nonzero value. Custom densities cannot be sampled.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match self {
            NonzeroDensity::Atoms(atoms) => {
                let mut t: f64 = rng.random();
                for &(x, w) in atoms {
                    if t < w {
                        return Ok(x);
                    }
                    t -= w;
                }
                Ok(atoms[atoms.len() - 1].0)
            }
            NonzeroDensity::Normal { variance } => {
                let z: f64 = rng.sample(StandardNormal);
                Ok(z * variance.sqrt())
            }
            NonzeroDensity::Uniform { lo, hi } => Ok(rng.random_range(*lo..*hi)),
            NonzeroDensity::Custom(_) => Err(Error::invalid(
                "custom densities can be used for recovery but not for signal generation",
            )),
        }
    }
}

/// Posterior summary of one entry under a generic prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarPosterior {
    pub mean: f64,
    pub variance: f64,
    /// `log N(u | 0, beta) - log (f * N(0, beta))(u)`: the evidence for the
    /// zero spike over the nonzero component.
    pub innovation: f64,
}

/// Moments of the nonzero component restricted to the kernel window:
/// `(log_weight, centered_mean, centered_second)` where the weight is the
/// convolution value and the log zero-spike evidence shares its scaling.
struct SlabMoments {
    /// `log N(u | 0, beta)` in the shared scaling.
    log_zero: f64,
    /// `log (f * N(0, beta))(u)` in the shared scaling; `-inf` if negligible.
    log_slab: f64,
    /// Mean of `x` under the slab posterior.
    mean: f64,
    /// Variance of `x` under the slab posterior.
    variance: f64,
}

fn slab_moments_atoms(u: f64, beta: f64, atoms: &[(f64, f64)]) -> SlabMoments {
    let shift = atoms
        .iter()
        .map(|&(a, _)| (u - a) * (u - a))
        .fold(f64::INFINITY, f64::min);
    let mut w0 = 0.0;
    let mut w1 = 0.0;
    for &(a, w) in atoms {
        let k = w * (-((u - a) * (u - a) - shift) / (2.0 * beta)).exp();
        w0 += k;
        w1 += k * (a - u);
    }
    let c1 = w1 / w0;
    let mut w2 = 0.0;
    for &(a, w) in atoms {
        let k = w * (-((u - a) * (u - a) - shift) / (2.0 * beta)).exp();
        w2 += k * (a - u - c1) * (a - u - c1);
    }
    SlabMoments {
        log_zero: -(u * u - shift) / (2.0 * beta),
        log_slab: w0.ln(),
        mean: u + c1,
        variance: w2 / w0,
    }
}

fn slab_moments_continuous(
    u: f64,
    beta: f64,
    pdf: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<SlabMoments> {
    let dist = if u < lo {
        lo - u
    } else if u > hi {
        u - hi
    } else {
        0.0
    };
    let reach = dist + KERNEL_WIDTH * beta.sqrt();
    let a = lo.max(u - reach);
    let b = hi.min(u + reach);
    let norm = -0.5 * (LN_2PI + beta.ln());
    let shift = dist * dist;
    let kernel = |v: f64| (norm - ((u - v) * (u - v) - shift) / (2.0 * beta)).exp();
    let mut cuts = breakpoints.to_vec();
    cuts.push(u);
    let [c0, c1, c2] = integrate(
        |v| {
            let w = pdf(v) * kernel(v);
            let d = v - u;
            [w, w * d, w * d * d]
        },
        a,
        b,
        &cuts,
        tol,
    )?;
    let log_zero = norm - (u * u - shift) / (2.0 * beta);
    if !(c0 > 0.0) {
        return Ok(SlabMoments {
            log_zero,
            log_slab: f64::NEG_INFINITY,
            mean: 0.0,
            variance: 0.0,
        });
    }
    let m1 = c1 / c0;
    Ok(SlabMoments {
        log_zero,
        log_slab: c0.ln(),
        mean: u + m1,
        variance: (c2 / c0 - m1 * m1).max(0.0),
    })
}

/// Posterior mean, variance and innovation L-value of one entry under the
/// prior `gamma * delta(x) + (1 - gamma) * density(x)`.
pub fn generic_posterior(
    u: f64,
    beta: f64,
    gamma: f64,
    density: &NonzeroDensity,
) -> Result<ScalarPosterior> {
    generic_posterior_with(u, beta, gamma, density, Tolerance::default())
}

pub fn generic_posterior_with(
    u: f64,
    beta: f64,
    gamma: f64,
    density: &NonzeroDensity,
    tol: Tolerance,
) -> Result<ScalarPosterior> {
    if !(beta > 0.0) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    let slab = match density {
        NonzeroDensity::Atoms(atoms) => slab_moments_atoms(u, beta, atoms),
        NonzeroDensity::Normal { variance } => {
            let s = variance.sqrt();
            let norm = -0.5 * (LN_2PI + variance.ln());
            let pdf = move |x: f64| (norm - x * x / (2.0 * variance)).exp();
            let lim = KERNEL_WIDTH * s;
            slab_moments_continuous(u, beta, &pdf, -lim, lim, &[0.0], tol)?
        }
        NonzeroDensity::Uniform { lo, hi } => {
            let h = 1.0 / (hi - lo);
            slab_moments_continuous(u, beta, &|_| h, *lo, *hi, &[], tol)?
        }
        NonzeroDensity::Custom(c) => {
            slab_moments_continuous(u, beta, &*c.pdf, c.lo, c.hi, &c.breakpoints, tol)?
        }
    };
    let innovation = slab.log_zero - slab.log_slab;
    let (inactive, active) = sigmoid_pair(logit(clamp_gamma(gamma)) + innovation);
    let mean = active * slab.mean;
    let variance = active * slab.variance + active * inactive * slab.mean * slab.mean;
    Ok(ScalarPosterior {
        mean,
        variance,
        innovation,
    })
}

/// Posterior mean under a generic prior.
pub fn f_generic(u: f64, beta: f64, gamma: f64, density: &NonzeroDensity) -> Result<f64> {
    Ok(generic_posterior(u, beta, gamma, density)?.mean)
}

/// Posterior variance under a generic prior.
pub fn g_generic(u: f64, beta: f64, gamma: f64, density: &NonzeroDensity) -> Result<f64> {
    Ok(generic_posterior(u, beta, gamma, density)?.variance)
}

pub fn fprime_generic(u: f64, beta: f64, gamma: f64, density: &NonzeroDensity) -> Result<f64> {
    Ok(g_generic(u, beta, gamma, density)? / beta)
}

/// Applies the MMSE denoiser of `kind` entry-wise: writes `F(u_n)` into `x`
/// and `F'(u_n)` into `slope`, each with its own `gamma_n`.
///
/// The Gaussian case uses the exact posterior variance for `F'`.
pub fn denoise_into(
    kind: &PriorKind,
    u: &[f64],
    beta: f64,
    gamma: &[f64],
    x: &mut [f64],
    slope: &mut [f64],
) -> Result<()> {
    debug_assert!(u.len() == gamma.len() && u.len() == x.len() && u.len() == slope.len());
    match kind {
        PriorKind::SparseBinary => {
            for i in 0..u.len() {
                let (p1, p0) = sigmoid_pair(binary_activity(u[i], beta, gamma[i]));
                let p1 = saturate_unit(p1);
                x[i] = p1;
                slope[i] = p1 * saturate_unit(p0) / beta;
            }
        }
        PriorKind::SparseGaussian { sigma_x_sq } => {
            for i in 0..u.len() {
                let aux = gauss_aux(u[i], beta, gamma[i], *sigma_x_sq);
                let mean_if_active = u[i] * aux.gain;
                x[i] = mean_if_active * aux.active;
                slope[i] = aux.gain * aux.active
                    + mean_if_active * mean_if_active * aux.active * aux.inactive / beta;
            }
        }
        PriorKind::Generic(density) => {
            for i in 0..u.len() {
                let post = generic_posterior(u[i], beta, gamma[i], density)?;
                x[i] = post.mean;
                slope[i] = post.variance / beta;
            }
        }
    }
    Ok(())
}
