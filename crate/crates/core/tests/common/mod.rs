//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gauss-Hermite nodes and weights for the weight `exp(-t^2)`, found by
/// Newton iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0f64;
    for i in 0..(n + 1) / 2 {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - (x - mean) * (x - mean) / (2.0 * var)
}

/// Posterior mean and variance of `x in {0, 1}` with `P(x = 0) = gamma`,
/// observed as `u = x + N(0, beta)`, by direct Bayes sums.
pub fn two_point_posterior(u: f64, beta: f64, gamma: f64) -> (f64, f64) {
    let l1 = (1.0 - gamma).ln() + ln_normal(u, 1.0, beta);
    let l0 = gamma.ln() + ln_normal(u, 0.0, beta);
    let p1 = 1.0 / (1.0 + (l0 - l1).exp());
    let p0 = 1.0 / (1.0 + (l1 - l0).exp());
    (p1, p1 * p0)
}

/// Posterior mean and variance under `gamma delta_0 + (1 - gamma) N(0, s)`
/// observed through `N(0, beta)` noise. The slab integrals use Gauss-Hermite
/// quadrature with the narrower Gaussian factor as the weight.
pub fn spike_slab_posterior(u: f64, beta: f64, gamma: f64, s: f64, gh: &(Vec<f64>, Vec<f64>)) -> (f64, f64) {
    let (t, w) = gh;
    let mut pts = Vec::with_capacity(t.len() + 1);
    let base = (1.0 - gamma).ln() - 0.5 * PI.ln();
    for (&ti, &wi) in t.iter().zip(w) {
        let (x, lw) = if beta <= s {
            let x = u + (2.0 * beta).sqrt() * ti;
            (x, wi.ln() + base + ln_normal(x, 0.0, s))
        } else {
            let x = (2.0 * s).sqrt() * ti;
            (x, wi.ln() + base + ln_normal(u, x, beta))
        };
        pts.push((x, lw));
    }
    pts.push((0.0, gamma.ln() + ln_normal(u, 0.0, beta)));
    let shift = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = pts.iter().map(|p| (p.1 - shift).exp()).sum();
    let mean = pts.iter().map(|p| (p.1 - shift).exp() * p.0).sum::<f64>() / z;
    let var = pts
        .iter()
        .map(|p| (p.1 - shift).exp() * (p.0 - mean) * (p.0 - mean))
        .sum::<f64>()
        / z;
    (mean, var)
}

/// Random denoiser inputs: `u` is a noisy draw from the prior.
#[derive(Debug, Clone, Copy)]
pub struct Draw {
    pub u: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sigma_x_sq: f64,
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller keeps the oracle free of the crate's sampling path
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

pub fn binary_draws(count: usize, beta_min: f64, seed: u64) -> Vec<Draw> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let beta = log_uniform(&mut rng, beta_min, 10.0);
            let gamma = rng.random_range(0.01..0.99);
            let x = if rng.random::<f64>() < gamma { 0.0 } else { 1.0 };
            Draw {
                u: x + beta.sqrt() * std_normal(&mut rng),
                beta,
                gamma,
                sigma_x_sq: 1.0,
            }
        })
        .collect()
}

pub fn gauss_draws(count: usize, seed: u64) -> Vec<Draw> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let beta = log_uniform(&mut rng, 1e-4, 10.0);
            let gamma = rng.random_range(0.01..0.99);
            let sigma_x_sq = log_uniform(&mut rng, 0.1, 10.0);
            let x = if rng.random::<f64>() < gamma {
                0.0
            } else {
                sigma_x_sq.sqrt() * std_normal(&mut rng)
            };
            Draw {
                u: x + beta.sqrt() * std_normal(&mut rng),
                beta,
                gamma,
                sigma_x_sq,
            }
        })
        .collect()
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if got == want {
        0.0
    } else {
        (got - want).abs() / want.abs()
    }
}

/// Fourth-order central difference of `f` at `u` with step `h`, and a bound
/// on its rounding error. Values are taken to be resolved no finer than the
/// smallest normal number, where the denoisers saturate.
pub fn central_difference(f: impl Fn(f64) -> f64, u: f64, h: f64) -> (f64, f64) {
    let (a, b, c, d) = (f(u - 2.0 * h), f(u - h), f(u + h), f(u + 2.0 * h));
    let fd = (a - 8.0 * b + 8.0 * c - d) / (12.0 * h);
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    (fd, 18.0 * (f64::EPSILON * scale + f64::MIN_POSITIVE) / (12.0 * h))
}
