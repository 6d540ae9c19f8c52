//! Numerical cross-checks over the unitary group.
//!
//! Unitaries are parameterized as `U = G_01·G_02⋯G_{N−2,N−1}·D`, a product of
//! two-level complex rotations in ascending pair order followed by diagonal
//! phases. Because `D` only rephases columns, `|U_kl|²` depends on the
//! rotation parameters alone, and the searches below vary only those.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::{channel_distance, initial_energy, involution_energy, metrotropy_matching, StationarySystem};
use crate::optimize::{levenberg_marquardt, nelder_mead_with_restarts, Outcome};
use crate::permutation::{enumerate_involutions, Permutation};
use crate::stochastic::{unistochastic_of, BistochasticMatrix, Complex64, UnitaryMatrix};

/// Largest dimension accepted by the numerical searches.
pub const MAX_VERIFY_SIZE: usize = 8;

/// Two involution energies closer than this count as tied.
pub const DEGENERACY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub multistarts: usize,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    pub seed: u64,
    pub refute_threshold: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { multistarts: 64, max_iterations: 2000, convergence_tol: 1e-10, seed: 0, refute_threshold: 1e-3 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.multistarts == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidParameter("multistarts and max_iterations must be positive".into()));
        }
        if !(self.convergence_tol > 0.0 && self.convergence_tol.is_finite()) {
            return Err(Error::InvalidParameter("convergence_tol must be positive".into()));
        }
        if !(self.refute_threshold > self.convergence_tol && self.refute_threshold.is_finite()) {
            return Err(Error::InvalidParameter("refute_threshold must exceed convergence_tol".into()));
        }
        Ok(())
    }

    /// Residual below which a unistochastic witness is accepted.
    pub fn certify_threshold(&self) -> f64 {
        self.convergence_tol * 100.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Converged,
    NoStartConverged,
}

/// Numerical minimum of the post-measurement energy next to the analytic one.
///
/// For two levels the two agree. From three levels on, the search regularly
/// finds unistochastic channels below `(v0 + E)/2`, so `gap` can be
/// markedly negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub status: SearchStatus,
    pub numerical_min: f64,
    pub analytic_min: f64,
    /// `numerical_min − analytic_min`.
    pub gap: f64,
    pub best_unitary: UnitaryMatrix,
    /// `|best_unitary|²` with rows reordered to maximize the trace. Rows may
    /// be relabeled freely since `Pᵀ·P` does not see the order.
    pub best_channel: BistochasticMatrix,
    pub starts_converged: usize,
    pub analytic_permutation: Permutation,
    pub config: OptimizerConfig,
    /// Distance of `best_channel` to the nearest `(𝟙 + σ)/2` over optimal
    /// involutions `σ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_distance: Option<f64>,
    /// True when exactly one involution attains the optimum and it extracts
    /// a positive amount.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unique_optimum: Option<bool>,
}

/// Outcome of the unistochasticity search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum UnistochasticVerdict {
    Certified { witness: UnitaryMatrix, residual: f64 },
    Refuted { residual: f64 },
    Inconclusive { residual: f64 },
}

impl UnistochasticVerdict {
    pub fn residual(&self) -> f64 {
        match self {
            Self::Certified { residual, .. } | Self::Refuted { residual } | Self::Inconclusive { residual } => {
                *residual
            }
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Certified { .. } => 0,
            Self::Refuted { .. } => 1,
            Self::Inconclusive { .. } => 2,
        }
    }
}

fn dimension_of(params: usize) -> Result<usize> {
    let n = (params as f64).sqrt().round() as usize;
    if n == 0 || n * n != params {
        return Err(Error::InvalidParameter(format!("{params} parameters is not N² for any positive N")));
    }
    Ok(n)
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

// Row-major G_01·G_02⋯ for angle/phase pairs in `rotations`.
fn rotation_product(n: usize, rotations: &[f64]) -> Vec<Complex64> {
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    for k in 0..n {
        m[k * n + k] = Complex64::new(1.0, 0.0);
    }
    for (p, (i, j)) in pairs(n).enumerate() {
        let (s, c) = rotations[2 * p].sin_cos();
        let phase = Complex64::from_polar(s, rotations[2 * p + 1]);
        for k in 0..n {
            let a = m[k * n + i];
            let b = m[k * n + j];
            m[k * n + i] = a * c + b * phase;
            m[k * n + j] = b * c - a * phase.conj();
        }
    }
    m
}

fn rotation_moduli(n: usize, rotations: &[f64]) -> Vec<f64> {
    rotation_product(n, rotations).iter().map(|z| z.norm_sqr()).collect()
}

/// Smooth map from `N²` reals onto the unitary group.
///
/// The first `N(N−1)` entries are (angle, phase) for the rotations on pairs
/// `(0,1), (0,2), …, (N−2,N−1)`; the last `N` are the diagonal phases.
pub fn parameterized_unitary(params: &[f64]) -> Result<UnitaryMatrix> {
    let n = dimension_of(params.len())?;
    if params.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("non-finite parameter".into()));
    }
    let rotations = &params[..n * (n - 1)];
    let phases = &params[n * (n - 1)..];
    let m = rotation_product(n, rotations);
    let u = DMatrix::from_fn(n, n, |k, l| m[k * n + l] * Complex64::from_polar(1.0, phases[l]));
    Ok(UnitaryMatrix::from_entries_unchecked(u))
}

fn unitary_from_rotations(n: usize, rotations: &[f64]) -> UnitaryMatrix {
    let mut params = rotations.to_vec();
    params.resize(n * n, 0.0);
    parameterized_unitary(&params).expect("length is N²")
}

fn energy_of_moduli(sys: &StationarySystem, n: usize, p: &[f64]) -> f64 {
    let (e, r) = (sys.energies(), sys.populations());
    (0..n)
        .map(|k| {
            let row = &p[k * n..(k + 1) * n];
            let pe: f64 = row.iter().zip(e).map(|(a, b)| a * b).sum();
            let pr: f64 = row.iter().zip(r).map(|(a, b)| a * b).sum();
            pe * pr
        })
        .sum()
}

fn random_start(cfg: &OptimizerConfig, start: usize, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(start as u64);
    (0..dim).map(|_| rng.random_range(-PI..PI)).collect()
}

// Runs every start (in parallel) and returns the outcomes in start order.
fn multistart(cfg: &OptimizerConfig, dim: usize, local: impl Fn(&[f64]) -> Outcome + Sync) -> Vec<Outcome> {
    (0..cfg.multistarts).into_par_iter().map(|s| local(&random_start(cfg, s, dim))).collect()
}

// Lowest value, ties to the lowest start index.
fn best_of(outcomes: &[Outcome]) -> &Outcome {
    outcomes.iter().reduce(|best, o| if o.value < best.value { o } else { best }).expect("at least one start")
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_VERIFY_SIZE {
        return Err(Error::TooLarge { what: "unitary search", n, limit: MAX_VERIFY_SIZE, hint: "" });
    }
    Ok(())
}

/// Multi-start Nelder–Mead minimization of `Eᵀ·Pᵀ·P·r` with `P = |U|²`.
pub fn minimize_post_measurement_energy(sys: &StationarySystem, cfg: &OptimizerConfig) -> Result<VerificationReport> {
    cfg.validate()?;
    let n = sys.dim();
    check_size(n)?;
    let dim = n * (n - 1);
    let objective = |x: &[f64]| energy_of_moduli(sys, n, &rotation_moduli(n, x));
    let outcomes =
        multistart(cfg, dim, |x0| nelder_mead_with_restarts(objective, x0, cfg.convergence_tol, cfg.max_iterations));
    let best = best_of(&outcomes);
    let starts_converged = outcomes.iter().filter(|o| o.converged).count();

    let unitary = unitary_from_rotations(n, &best.x);
    let (best_unitary, best_channel) = canonical_rows(&unitary);
    let analytic = metrotropy_matching(sys);
    let analytic_min = analytic.final_energy;
    Ok(VerificationReport {
        status: if starts_converged > 0 { SearchStatus::Converged } else { SearchStatus::NoStartConverged },
        numerical_min: best.value,
        analytic_min,
        gap: best.value - analytic_min,
        best_unitary,
        best_channel,
        starts_converged,
        analytic_permutation: analytic.optimal_permutation,
        config: *cfg,
        channel_distance: None,
        unique_optimum: None,
    })
}

/// [`minimize_post_measurement_energy`] plus the distance of the numerical
/// channel to the analytic family `(𝟙 + σ)/2`.
pub fn verify_metrotropy(sys: &StationarySystem, cfg: &OptimizerConfig) -> Result<VerificationReport> {
    let mut report = minimize_post_measurement_energy(sys, cfg)?;
    let v0 = involution_energy(sys, &report.analytic_permutation)?;
    let optimal: Vec<Permutation> = enumerate_involutions(sys.dim())?
        .into_iter()
        .filter(|s| involution_energy(sys, s).is_ok_and(|v| v - v0 <= DEGENERACY_TOL))
        .collect();
    let distance = optimal
        .iter()
        .map(|s| channel_distance(&report.best_channel, &BistochasticMatrix::identity_mixture(s)))
        .fold(f64::INFINITY, f64::min);
    let extracted = (initial_energy(sys) - v0) / 2.0 > DEGENERACY_TOL;
    report.channel_distance = Some(distance);
    report.unique_optimum = Some(optimal.len() == 1 && extracted);
    Ok(report)
}

// Reorders the rows of `u` so that `|u|²` has maximal trace; the first
// maximizer in a fixed search order wins.
fn canonical_rows(u: &UnitaryMatrix) -> (UnitaryMatrix, BistochasticMatrix) {
    let p = unistochastic_of(u);
    let n = p.dim();
    let m = p.entries();
    // dp over the set of rows already placed on columns 0..popcount
    let full = 1usize << n;
    let mut score = vec![f64::NEG_INFINITY; full];
    let mut choice = vec![usize::MAX; full];
    score[0] = 0.0;
    for mask in 0..full {
        if score[mask] == f64::NEG_INFINITY {
            continue;
        }
        let col = mask.count_ones() as usize;
        if col == n {
            continue;
        }
        for row in 0..n {
            if mask & (1 << row) != 0 {
                continue;
            }
            let next = mask | (1 << row);
            let s = score[mask] + m[(row, col)];
            if s > score[next] {
                score[next] = s;
                choice[next] = row;
            }
        }
    }
    let mut order = vec![0; n];
    let mut mask = full - 1;
    for col in (0..n).rev() {
        let row = choice[mask];
        order[col] = row;
        mask &= !(1 << row);
    }
    let entries = DMatrix::from_fn(n, n, |k, l| u.entries()[(order[k], l)]);
    let unitary = UnitaryMatrix::from_entries_unchecked(entries);
    let channel = unistochastic_of(&unitary);
    (unitary, channel)
}

/// Searches for a unitary `U` with `|U|² = b`.
///
/// Minimizes `‖|U|² − b‖²` (squared Frobenius norm) by Levenberg–Marquardt
/// from `cfg.multistarts` random starts. Two-level inputs are decided in
/// closed form.
pub fn decide_unistochastic(b: &BistochasticMatrix, cfg: &OptimizerConfig) -> Result<UnistochasticVerdict> {
    cfg.validate()?;
    let n = b.dim();
    check_size(n)?;
    let target = b.entries();
    let residual_of = |u: &UnitaryMatrix| {
        let p = unistochastic_of(u);
        (p.entries() - target).iter().map(|x| x * x).sum::<f64>()
    };

    if n <= 2 {
        let witness = if n == 1 {
            UnitaryMatrix::identity(1)?
        } else {
            let (c, s) = (target[(0, 0)].sqrt(), target[(1, 0)].sqrt());
            let re = |x: f64| Complex64::new(x, 0.0);
            UnitaryMatrix::from_entries_unchecked(DMatrix::from_row_slice(2, 2, &[re(c), re(-s), re(s), re(c)]))
        };
        let residual = residual_of(&witness);
        return Ok(UnistochasticVerdict::Certified { witness, residual });
    }

    let dim = n * (n - 1);
    let residuals = |x: &[f64]| -> Vec<f64> {
        rotation_moduli(n, x).iter().enumerate().map(|(idx, p)| p - target[(idx / n, idx % n)]).collect()
    };
    let outcomes =
        multistart(cfg, dim, |x0| levenberg_marquardt(residuals, x0, cfg.convergence_tol, cfg.max_iterations));
    let best = best_of(&outcomes);
    let residual = best.value;
    Ok(if residual < cfg.certify_threshold() {
        UnistochasticVerdict::Certified { witness: unitary_from_rotations(n, &best.x), residual }
    } else if residual > cfg.refute_threshold {
        UnistochasticVerdict::Refuted { residual }
    } else {
        UnistochasticVerdict::Inconclusive { residual }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::{post_measurement_energy, realizing_unitary};
    use proptest::prelude::*;
    use rand::Rng;

    fn quick() -> OptimizerConfig {
        OptimizerConfig { multistarts: 8, ..OptimizerConfig::default() }
    }

    fn worked() -> StationarySystem {
        StationarySystem::new(vec![0.0, 1.0, 2.0], vec![0.2, 0.5, 0.3]).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = [
            OptimizerConfig { multistarts: 0, ..Default::default() },
            OptimizerConfig { max_iterations: 0, ..Default::default() },
            OptimizerConfig { convergence_tol: 0.0, ..Default::default() },
            OptimizerConfig { refute_threshold: 1e-12, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn zero_parameters_give_identity() {
        for n in 1..=5 {
            let u = parameterized_unitary(&vec![0.0; n * n]).unwrap();
            assert_eq!(u, UnitaryMatrix::identity(n).unwrap());
        }
        assert!(parameterized_unitary(&[0.0; 5]).is_err());
        assert!(parameterized_unitary(&[]).is_err());
    }

    #[test]
    fn single_rotation_is_balanced_mixer() {
        let mut params = vec![0.0; 9];
        params[0] = PI / 4.0;
        let u = parameterized_unitary(&params).unwrap();
        let p = unistochastic_of(&u);
        let expected = [[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]];
        for (i, row) in expected.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                assert!((p.entries()[(i, j)] - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn worked_example_goes_below_involution_channel() {
        let sys = worked();
        let report = verify_metrotropy(&sys, &quick()).unwrap();
        assert_eq!(report.status, SearchStatus::Converged);
        assert!((report.analytic_min - 0.95).abs() < 1e-12);
        assert_eq!(report.unique_optimum, Some(true));
        // The search finds a unistochastic channel below (v0 + E)/2.
        assert!(report.best_unitary.deviation() < 1e-12);
        let recomputed = post_measurement_energy(&sys, &unistochastic_of(&report.best_unitary)).unwrap();
        assert!((recomputed - report.numerical_min).abs() < 1e-12);
        assert!(report.gap < -2e-3);
        assert!((report.numerical_min - 91.0 / 96.0).abs() < 1e-6);
        assert!(report.channel_distance.unwrap() > 1e-2);
        assert_eq!(unistochastic_of(&report.best_unitary), report.best_channel);
    }

    #[test]
    fn two_level_search_matches_closed_form() {
        let sys = StationarySystem::new(vec![-0.4, 0.9], vec![0.35, 0.65]).unwrap();
        let report = verify_metrotropy(&sys, &quick()).unwrap();
        assert!(report.gap.abs() < 1e-6);
        assert_eq!(report.unique_optimum, Some(true));
        assert!(report.channel_distance.unwrap() < 1e-3);
    }

    #[test]
    fn passive_system_keeps_its_energy() {
        let sys = StationarySystem::new(vec![-1.0, 0.0, 1.0], vec![0.5, 0.3, 0.2]).unwrap();
        let report = verify_metrotropy(&sys, &quick()).unwrap();
        assert!((report.numerical_min - initial_energy(&sys)).abs() < 1e-6);
        assert_eq!(report.unique_optimum, Some(false));
    }

    #[test]
    fn fully_excited_qutrit_goes_below_zero() {
        let sys = StationarySystem::new(vec![-1.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]).unwrap();
        let report = verify_metrotropy(&sys, &quick()).unwrap();
        assert!(report.analytic_min.abs() < 1e-12);
        // P = [[1/2, 1/12, 5/12], [0, 5/6, 1/6], [1/2, 1/12, 5/12]] reaches -1/24.
        let p = BistochasticMatrix::from_rows(&[
            vec![0.5, 1.0 / 12.0, 5.0 / 12.0],
            vec![0.0, 5.0 / 6.0, 1.0 / 6.0],
            vec![0.5, 1.0 / 12.0, 5.0 / 12.0],
        ])
        .unwrap();
        assert!((post_measurement_energy(&sys, &p).unwrap() + 1.0 / 24.0).abs() < 1e-15);
        assert!(report.numerical_min <= -1.0 / 24.0 + 1e-6);
        assert!(matches!(decide_unistochastic(&p, &quick()).unwrap(), UnistochasticVerdict::Certified { .. }));
    }

    #[test]
    fn search_is_deterministic() {
        let a = minimize_post_measurement_energy(&worked(), &quick()).unwrap();
        let b = minimize_post_measurement_energy(&worked(), &quick()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let other = OptimizerConfig { seed: 1, ..quick() };
        let c = minimize_post_measurement_energy(&worked(), &other).unwrap();
        assert!((c.numerical_min - a.numerical_min).abs() < 1e-6);
    }

    #[test]
    fn size_guard() {
        let n = MAX_VERIFY_SIZE + 1;
        let sys = StationarySystem::new(vec![0.0; n], vec![1.0 / n as f64; n]).unwrap();
        assert!(matches!(minimize_post_measurement_energy(&sys, &quick()), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn exhausted_budget_is_reported() {
        let cfg = OptimizerConfig { multistarts: 2, max_iterations: 1, ..OptimizerConfig::default() };
        let report = minimize_post_measurement_energy(&worked(), &cfg).unwrap();
        assert_eq!(report.status, SearchStatus::NoStartConverged);
        assert_eq!(report.starts_converged, 0);
    }

    #[test]
    fn canonical_rows_undo_relabeling() {
        let sigma = Permutation::transposition(4, 1, 3).unwrap();
        let u = realizing_unitary(&sigma).unwrap();
        // shuffle rows by a 4-cycle
        let shuffled = UnitaryMatrix::new(DMatrix::from_fn(4, 4, |k, l| u.entries()[((k + 1) % 4, l)])).unwrap();
        let (_, channel) = canonical_rows(&shuffled);
        assert_eq!(channel, BistochasticMatrix::identity_mixture(&sigma));
    }

    #[test]
    fn decides_known_matrices() {
        let cfg = quick();
        let perm = BistochasticMatrix::from_permutation(&Permutation::from_map(vec![2, 0, 1]).unwrap());
        assert!(matches!(decide_unistochastic(&perm, &cfg).unwrap(), UnistochasticVerdict::Certified { .. }));
        let mixture = BistochasticMatrix::identity_mixture(&Permutation::transposition(3, 0, 2).unwrap());
        let verdict = decide_unistochastic(&mixture, &cfg).unwrap();
        let UnistochasticVerdict::Certified { witness, residual } = verdict else {
            panic!("expected a witness, got {verdict:?}");
        };
        assert!(residual < cfg.certify_threshold());
        assert!(unistochastic_of(&witness).max_abs_diff(mixture.entries()) < 1e-4);

        let half = 0.5;
        let counterexample =
            BistochasticMatrix::from_rows(&[vec![half, half, 0.0], vec![0.0, half, half], vec![half, 0.0, half]])
                .unwrap();
        let verdict = decide_unistochastic(&counterexample, &cfg).unwrap();
        assert!(matches!(verdict, UnistochasticVerdict::Refuted { .. }), "{verdict:?}");
        assert_eq!(verdict.exit_code(), 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn parameterized_unitary_is_unitary(n in 1usize..=6, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params: Vec<f64> = (0..n * n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let u = parameterized_unitary(&params).unwrap();
            prop_assert!(u.deviation() < 1e-12);
        }

        #[test]
        fn two_level_matrices_are_certified(p in 0.0f64..=1.0) {
            let b = BistochasticMatrix::from_rows(&[vec![p, 1.0 - p], vec![1.0 - p, p]]).unwrap();
            let verdict = decide_unistochastic(&b, &OptimizerConfig::default()).unwrap();
            let certified = matches!(verdict, UnistochasticVerdict::Certified { .. });
            prop_assert!(certified);
            prop_assert!(verdict.residual() < 1e-20);
        }
    }
}
