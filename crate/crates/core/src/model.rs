//! Problem instances: sensing matrices, group structure, signal priors,
//! structured sparse signals and SNR-calibrated noise.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::denoise::NonzeroDensity;
use crate::error::{Error, Result};
use crate::linalg::{norm_sq, SensingMatrix};
use crate::rng::{derive_seed, rng_from_seed, Role};

/// Lower/upper clamp applied to every zero probability.
pub const GAMMA_EPS: f64 = 1e-12;

pub fn clamp_gamma(g: f64) -> f64 {
    if g.is_nan() {
        return 0.5;
    }
    g.clamp(GAMMA_EPS, 1.0 - GAMMA_EPS)
}

/// Converts an SNR in dB to a linear power ratio. `+inf` stays `+inf`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear ratio to dB.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Index groups over `0..n`, possibly overlapping.
///
/// For every index the union of its groupmates (excluding itself, each
/// counted once) is precomputed in compressed form, since that is the set the
/// extrinsic updates sum over.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStructure {
    groups: Vec<Vec<usize>>,
    n: usize,
    mate_offsets: Vec<usize>,
    mates: Vec<usize>,
    overlapping: bool,
}

impl GroupStructure {
    pub fn new(n: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("group structure over zero indices"));
        }
        let mut membership: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::invalid(format!("group {g} is empty")));
            }
            for &i in members {
                if i >= n {
                    return Err(Error::invalid(format!(
                        "group {g} contains index {i} outside 0..{n}"
                    )));
                }
                if membership[i].last() == Some(&g) {
                    return Err(Error::invalid(format!(
                        "group {g} lists index {i} more than once"
                    )));
                }
                membership[i].push(g);
            }
        }
        if let Some(i) = membership.iter().position(|m| m.is_empty()) {
            return Err(Error::invalid(format!("index {i} belongs to no group")));
        }
        let overlapping = membership.iter().any(|m| m.len() > 1);

        let mut mate_offsets = Vec::with_capacity(n + 1);
        let mut mates = Vec::new();
        mate_offsets.push(0);
        let mut scratch = Vec::new();
        for (i, gs) in membership.iter().enumerate() {
            scratch.clear();
            for &g in gs {
                scratch.extend(groups[g].iter().copied().filter(|&l| l != i));
            }
            if gs.len() > 1 {
                scratch.sort_unstable();
                scratch.dedup();
            }
            mates.extend_from_slice(&scratch);
            mate_offsets.push(mates.len());
        }

        Ok(GroupStructure {
            groups,
            n,
            mate_offsets,
            mates,
            overlapping,
        })
    }

    /// Contiguous equally sized groups `{0..gs}, {gs..2gs}, ...`.
    pub fn contiguous(n: usize, group_size: usize) -> Result<Self> {
        if group_size == 0 || n == 0 || n % group_size != 0 {
            return Err(Error::invalid(format!(
                "group size {group_size} does not divide signal length {n}"
            )));
        }
        let groups = (0..n / group_size)
            .map(|g| (g * group_size..(g + 1) * group_size).collect())
            .collect();
        Self::new(n, groups)
    }

    pub fn singletons(n: usize) -> Result<Self> {
        Self::contiguous(n, 1)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn is_overlapping(&self) -> bool {
        self.overlapping
    }

    /// Indices sharing a group with `i`, excluding `i`.
    pub fn mates(&self, i: usize) -> &[usize] {
        &self.mates[self.mate_offsets[i]..self.mate_offsets[i + 1]]
    }

    /// Common group size if the structure is a partition into equal groups.
    pub fn uniform_size(&self) -> Option<usize> {
        if self.overlapping {
            return None;
        }
        let gs = self.groups[0].len();
        self.groups.iter().all(|g| g.len() == gs).then_some(gs)
    }
}

/// Family of the per-entry signal prior.
#[derive(Debug, Clone)]
pub enum PriorKind {
    /// Nonzero entries equal one.
    SparseBinary,
    /// Nonzero entries are `Normal(0, sigma_x_sq)`.
    SparseGaussian { sigma_x_sq: f64 },
    /// Nonzero entries follow an arbitrary density.
    Generic(NonzeroDensity),
}

impl PriorKind {
    pub fn name(&self) -> &'static str {
        match self {
            PriorKind::SparseBinary => "sparse_binary",
            PriorKind::SparseGaussian { .. } => "sparse_gaussian",
            PriorKind::Generic(_) => "generic",
        }
    }
}

/// Spike-and-slab prior `gamma * delta(x) + (1 - gamma) * f(x)` with
/// per-entry zero probabilities.
#[derive(Debug, Clone)]
pub struct SignalPrior {
    kind: PriorKind,
    gamma0: Vec<f64>,
}

impl SignalPrior {
    pub fn new(kind: PriorKind, gamma0: Vec<f64>) -> Result<Self> {
        if let PriorKind::SparseGaussian { sigma_x_sq } = kind {
            if !(sigma_x_sq > 0.0 && sigma_x_sq.is_finite()) {
                return Err(Error::invalid(format!(
                    "sparse Gaussian prior needs a positive variance, got {sigma_x_sq}"
                )));
            }
        }
        if gamma0.is_empty() {
            return Err(Error::invalid("prior needs at least one entry"));
        }
        let gamma0 = gamma0.into_iter().map(clamp_gamma).collect();
        Ok(SignalPrior { kind, gamma0 })
    }

    /// Uniform zero probability `1 - k/n` for a signal with `k` known nonzeros.
    pub fn with_known_sparsity(kind: PriorKind, n: usize, k: usize) -> Result<Self> {
        if k > n {
            return Err(Error::invalid(format!("sparsity {k} exceeds length {n}")));
        }
        let gamma = 1.0 - k as f64 / n as f64;
        Self::new(kind, vec![gamma; n])
    }

    pub fn kind(&self) -> &PriorKind {
        &self.kind
    }

    pub fn gamma0(&self) -> &[f64] {
        &self.gamma0
    }

    pub fn len(&self) -> usize {
        self.gamma0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma0.is_empty()
    }
}

/// One compressed-sensing problem `y = A x + w`.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub a: SensingMatrix,
    pub x_true: Vec<f64>,
    pub y: Vec<f64>,
    pub noise_var: f64,
    pub groups: GroupStructure,
    pub prior: SignalPrior,
    pub seed: u64,
}

/// Several jointly sparse problems `y_b = A_b x_b + w_b` sharing one support.
#[derive(Debug, Clone)]
pub struct JointInstance {
    pub matrices: Vec<SensingMatrix>,
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<Vec<f64>>,
    pub noise_vars: Vec<f64>,
    pub groups: GroupStructure,
    pub prior: SignalPrior,
    pub seed: u64,
}

impl JointInstance {
    pub fn blocks(&self) -> usize {
        self.xs.len()
    }

    /// Matrix used by block `b` (a single shared matrix is broadcast).
    pub fn matrix(&self, b: usize) -> &SensingMatrix {
        if self.matrices.len() == 1 {
            &self.matrices[0]
        } else {
            &self.matrices[b]
        }
    }
}

pub fn gen_sensing_matrix(m: usize, n: usize, seed: u64) -> Result<SensingMatrix> {
    SensingMatrix::gaussian(m, n, seed)
}

pub fn gen_group_structure(n: usize, group_size: usize) -> Result<GroupStructure> {
    GroupStructure::contiguous(n, group_size)
}

/// Picks `k / group_size` groups uniformly without replacement. Returns the
/// sorted list of active group indices.
pub fn gen_support(groups: &GroupStructure, k: usize, seed: u64) -> Result<Vec<usize>> {
    let gs = groups.uniform_size().ok_or_else(|| {
        Error::invalid("signal generation needs equally sized non-overlapping groups")
    })?;
    let n = groups.len();
    if k > n {
        return Err(Error::invalid(format!("sparsity {k} exceeds length {n}")));
    }
    if k % gs != 0 {
        return Err(Error::invalid(format!(
            "sparsity {k} is not a multiple of the group size {gs}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut active = sample(&mut rng, groups.num_groups(), k / gs).into_vec();
    active.sort_unstable();
    Ok(active)
}

fn fill_active(
    groups: &GroupStructure,
    active: &[usize],
    kind: &PriorKind,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let mut x = vec![0.0; groups.len()];
    for &g in active {
        for &i in &groups.groups()[g] {
            x[i] = match kind {
                PriorKind::SparseBinary => 1.0,
                PriorKind::SparseGaussian { sigma_x_sq } => {
                    let z: f64 = rng.sample(StandardNormal);
                    z * sigma_x_sq.sqrt()
                }
                PriorKind::Generic(d) => d.sample(rng)?,
            };
        }
    }
    Ok(x)
}

/// Draws a group-sparse signal with exactly `k` nonzero entries.
pub fn gen_signal(
    groups: &GroupStructure,
    k: usize,
    prior: &SignalPrior,
    seed: u64,
) -> Result<Vec<f64>> {
    let active = gen_support(groups, k, derive_seed(seed, Role::Signal, 0))?;
    let mut rng = rng_from_seed(derive_seed(seed, Role::Signal, 1));
    fill_active(groups, &active, prior.kind(), &mut rng)
}

/// Noise variance realizing `snr = ||A x||^2 / (M sigma_w^2)`.
pub fn calibrate_noise(a: &SensingMatrix, x: &[f64], snr: f64) -> Result<f64> {
    if !(snr > 0.0) {
        return Err(Error::invalid(format!("SNR must be positive, got {snr}")));
    }
    let energy = norm_sq(&a.mul_vec(x));
    if energy == 0.0 {
        return Err(Error::DegenerateSignal(
            "signal has zero measurement energy; SNR is undefined".into(),
        ));
    }
    Ok(energy / (a.rows() as f64 * snr))
}

fn add_noise(y: &mut [f64], noise_var: f64, seed: u64) {
    if noise_var == 0.0 {
        return;
    }
    let sd = noise_var.sqrt();
    let mut rng = rng_from_seed(seed);
    for v in y.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v += sd * z;
    }
}

fn check_snr_db(snr_db: f64) -> Result<()> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::invalid(format!("SNR {snr_db} dB is not usable")));
    }
    Ok(())
}

/// Builds a full instance. `snr_db = +inf` yields noiseless measurements.
pub fn make_instance(
    m: usize,
    n: usize,
    k: usize,
    group_size: usize,
    kind: PriorKind,
    snr_db: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    check_snr_db(snr_db)?;
    let groups = gen_group_structure(n, group_size)?;
    let prior = SignalPrior::with_known_sparsity(kind, n, k)?;
    let a = gen_sensing_matrix(m, n, derive_seed(seed, Role::Matrix, 0))?;
    let x_true = gen_signal(&groups, k, &prior, derive_seed(seed, Role::Signal, 0))?;
    let mut y = a.mul_vec(&x_true);
    let noise_var = if snr_db == f64::INFINITY {
        0.0
    } else {
        calibrate_noise(&a, &x_true, db_to_linear(snr_db))?
    };
    add_noise(&mut y, noise_var, derive_seed(seed, Role::Noise, 0));
    Ok(ProblemInstance {
        a,
        x_true,
        y,
        noise_var,
        groups,
        prior,
        seed,
    })
}

/// Builds `blocks` jointly sparse problems sharing the active groups. With
/// `shared_matrix` a single sensing matrix serves every block; otherwise each
/// block draws its own. Noise is calibrated per block.
#[allow(clippy::too_many_arguments)]
pub fn make_joint_instance(
    m: usize,
    n: usize,
    k: usize,
    group_size: usize,
    blocks: usize,
    kind: PriorKind,
    snr_db: f64,
    shared_matrix: bool,
    seed: u64,
) -> Result<JointInstance> {
    check_snr_db(snr_db)?;
    if blocks == 0 {
        return Err(Error::invalid("joint instance needs at least one block"));
    }
    let groups = gen_group_structure(n, group_size)?;
    let prior = SignalPrior::with_known_sparsity(kind, n, k)?;
    let active = gen_support(&groups, k, derive_seed(seed, Role::Signal, 0))?;
    let matrices = if shared_matrix {
        vec![gen_sensing_matrix(m, n, derive_seed(seed, Role::Matrix, 0))?]
    } else {
        (0..blocks)
            .map(|b| gen_sensing_matrix(m, n, derive_seed(seed, Role::Matrix, b as u64)))
            .collect::<Result<_>>()?
    };
    let mut xs = Vec::with_capacity(blocks);
    let mut ys = Vec::with_capacity(blocks);
    let mut noise_vars = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let mut rng = rng_from_seed(derive_seed(seed, Role::Signal, 1 + b as u64));
        let x = fill_active(&groups, &active, prior.kind(), &mut rng)?;
        let a = if shared_matrix { &matrices[0] } else { &matrices[b] };
        let mut y = a.mul_vec(&x);
        let noise_var = if snr_db == f64::INFINITY {
            0.0
        } else {
            calibrate_noise(a, &x, db_to_linear(snr_db))?
        };
        add_noise(&mut y, noise_var, derive_seed(seed, Role::Noise, b as u64));
        xs.push(x);
        ys.push(y);
        noise_vars.push(noise_var);
    }
    Ok(JointInstance {
        matrices,
        xs,
        ys,
        noise_vars,
        groups,
        prior,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contiguous_group_counts() {
        assert_eq!(gen_group_structure(1000, 2).unwrap().num_groups(), 500);
        assert_eq!(gen_group_structure(1000, 8).unwrap().num_groups(), 125);
        let single = gen_group_structure(4, 4).unwrap();
        assert_eq!(single.groups(), &[vec![0, 1, 2, 3]]);
        assert!(gen_group_structure(1000, 3).is_err());
        assert!(gen_group_structure(10, 0).is_err());
    }

    #[test]
    fn group_structure_validation() {
        assert!(GroupStructure::new(3, vec![vec![0, 1]]).is_err());
        assert!(GroupStructure::new(3, vec![vec![0, 1, 2], vec![]]).is_err());
        assert!(GroupStructure::new(3, vec![vec![0, 0, 1, 2]]).is_err());
        assert!(GroupStructure::new(3, vec![vec![0, 1, 3]]).is_err());
    }

    #[test]
    fn overlapping_mates_are_a_union() {
        let g = GroupStructure::new(4, vec![vec![0, 1, 2], vec![2, 3], vec![1, 2]]).unwrap();
        assert!(g.is_overlapping());
        assert_eq!(g.mates(2), &[0, 1, 3]);
        assert_eq!(g.mates(0), &[1, 2]);
        assert_eq!(g.mates(3), &[2]);
        assert_eq!(g.uniform_size(), None);
    }

    #[test]
    fn active_group_count_matches_sparsity() {
        let groups = gen_group_structure(1000, 5).unwrap();
        let active = gen_support(&groups, 160, 3).unwrap();
        assert_eq!(active.len(), 32);
        assert!(gen_support(&groups, 161, 3).is_err());
        assert!(gen_support(&groups, 1005, 3).is_err());
    }

    #[test]
    fn zero_sparsity_gives_zero_signal() {
        let groups = gen_group_structure(20, 2).unwrap();
        let prior = SignalPrior::with_known_sparsity(PriorKind::SparseBinary, 20, 0).unwrap();
        let x = gen_signal(&groups, 0, &prior, 1).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn binary_signal_has_exact_sparsity() {
        let groups = gen_group_structure(1000, 8).unwrap();
        let prior = SignalPrior::with_known_sparsity(PriorKind::SparseBinary, 1000, 160).unwrap();
        let x = gen_signal(&groups, 160, &prior, 99).unwrap();
        assert_eq!(x.iter().filter(|&&v| v == 1.0).count(), 160);
        assert!(x.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn calibrate_noise_direct_ratio() {
        let a = SensingMatrix::identity(100).unwrap();
        let x = vec![1.0; 100];
        assert_eq!(calibrate_noise(&a, &x, 1.0).unwrap(), 1.0);
        assert_eq!(calibrate_noise(&a, &x, 2.0).unwrap(), 0.5);
        assert!(matches!(
            calibrate_noise(&a, &[0.0; 100], 1.0),
            Err(Error::DegenerateSignal(_))
        ));
        assert!(calibrate_noise(&a, &x, 0.0).is_err());
    }

    #[test]
    fn operating_point_snr() {
        let snr = db_to_linear(25.0);
        assert!((snr - 316.227_766_016_837_9).abs() < 1e-9);
    }

    #[test]
    fn noiseless_sentinel() {
        let inst = make_instance(30, 60, 6, 2, PriorKind::SparseBinary, f64::INFINITY, 4).unwrap();
        assert_eq!(inst.noise_var, 0.0);
        assert_eq!(inst.y, inst.a.mul_vec(&inst.x_true));
    }

    #[test]
    fn gamma_is_clamped() {
        let p = SignalPrior::new(PriorKind::SparseBinary, vec![0.0, 1.0, 0.3]).unwrap();
        assert_eq!(p.gamma0(), &[GAMMA_EPS, 1.0 - GAMMA_EPS, 0.3]);
        assert!(SignalPrior::new(PriorKind::SparseGaussian { sigma_x_sq: 0.0 }, vec![0.5]).is_err());
    }

    #[test]
    fn joint_instance_shares_support() {
        let inst = make_joint_instance(
            20,
            40,
            8,
            2,
            3,
            PriorKind::SparseGaussian { sigma_x_sq: 1.0 },
            20.0,
            true,
            5,
        )
        .unwrap();
        let support = |x: &Vec<f64>| x.iter().map(|&v| v != 0.0).collect::<Vec<_>>();
        assert_eq!(support(&inst.xs[0]), support(&inst.xs[1]));
        assert_eq!(support(&inst.xs[0]), support(&inst.xs[2]));
        assert_ne!(inst.xs[0], inst.xs[1]);
        assert_eq!(inst.matrices.len(), 1);
    }
}
