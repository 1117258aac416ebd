//! Globally adaptive 15-point Gauss–Kronrod quadrature for small vector
//! integrands.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-9,
            rel: 1e-12,
            max_intervals: 400,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel<const D: usize> {
    lo: f64,
    hi: f64,
    value: [f64; D],
    error: [f64; D],
}

fn gk15<const D: usize, F: Fn(f64) -> [f64; D]>(f: &F, lo: f64, hi: f64) -> Panel<D> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kron = [0.0; D];
    let mut gauss = [0.0; D];
    for d in 0..D {
        kron[d] = WGK[7] * fc[d];
        gauss[d] = WG[3] * fc[d];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for d in 0..D {
            let s = f1[d] + f2[d];
            kron[d] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[d] += WG[j / 2] * s;
            }
        }
    }
    let mut value = [0.0; D];
    let mut error = [0.0; D];
    for d in 0..D {
        value[d] = kron[d] * half;
        error[d] = ((kron[d] - gauss[d]) * half).abs();
    }
    Panel {
        lo,
        hi,
        value,
        error,
    }
}

/// Integrates `f` over `[lo, hi]`, splitting first at every breakpoint that
/// falls strictly inside the interval.
///
/// Converges when, for every component, the summed error estimate is below
/// `max(tol.abs, tol.rel * |value|)`.
pub fn integrate<const D: usize, F: Fn(f64) -> [f64; D]>(
    f: F,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<[f64; D]> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::invalid(format!(
            "quadrature bounds must be finite and ordered, got [{lo}, {hi}]"
        )));
    }
    if lo == hi {
        return Ok([0.0; D]);
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > lo && b < hi)
        .collect();
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lo);
    edges.extend(cuts);
    edges.push(hi);

    let mut panels: Vec<Panel<D>> = edges.windows(2).map(|w| gk15(&f, w[0], w[1])).collect();
    loop {
        let mut value = [0.0; D];
        let mut error = [0.0; D];
        for p in &panels {
            for d in 0..D {
                value[d] += p.value[d];
                error[d] += p.error[d];
            }
        }
        let converged = (0..D).all(|d| error[d] <= tol.abs.max(tol.rel * value[d].abs()));
        if converged {
            return Ok(value);
        }
        if panels.len() >= tol.max_intervals {
            let worst = (0..D).map(|d| error[d]).fold(0.0, f64::max);
            return Err(Error::Quadrature {
                lo,
                hi,
                estimate: worst,
                evaluations: panels.len() * 15,
            });
        }
        // Bisect the panel with the largest error relative to its component's
        // target.
        let scale: [f64; D] = std::array::from_fn(|d| tol.abs.max(tol.rel * value[d].abs()));
        let (idx, _) = panels
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let e = (0..D).map(|d| p.error[d] / scale[d]).fold(0.0, f64::max);
                (i, e)
            })
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        let p = panels.swap_remove(idx);
        let mid = 0.5 * (p.lo + p.hi);
        if !(mid > p.lo && mid < p.hi) {
            return Err(Error::Quadrature {
                lo,
                hi,
                estimate: p.error.iter().copied().fold(0.0, f64::max),
                evaluations: panels.len() * 15,
            });
        }
        panels.push(gk15(&f, p.lo, mid));
        panels.push(gk15(&f, mid, p.hi));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let [v] = integrate(|x| [x.powi(5) - 2.0 * x], 0.0, 2.0, &[], Tolerance::default()).unwrap();
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn gaussian_moments() {
        let s = 0.3f64;
        let pdf = |x: f64| (-(x * x) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
        let [m0, m1, m2] = integrate(
            |x| {
                let p = pdf(x);
                [p, x * p, x * x * p]
            },
            -40.0 * s,
            40.0 * s,
            &[0.0],
            Tolerance::default(),
        )
        .unwrap();
        assert!((m0 - 1.0).abs() < 1e-12);
        assert!(m1.abs() < 1e-12);
        assert!((m2 - s * s).abs() < 1e-12);
    }

    #[test]
    fn kink_needs_breakpoint_or_refinement() {
        let [v] = integrate(|x: f64| [x.abs()], -1.0, 3.0, &[], Tolerance::default()).unwrap();
        assert!((v - 5.0).abs() < 1e-9);
    }

    #[test]
    fn empty_interval() {
        let [v] = integrate(|_| [1.0], 2.0, 2.0, &[], Tolerance::default()).unwrap();
        assert_eq!(v, 0.0);
        assert!(integrate(|_| [1.0], 0.0, f64::INFINITY, &[], Tolerance::default()).is_err());
    }
}
