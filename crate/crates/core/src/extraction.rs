//! Ergotropy and metrotropy of stationary systems.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::lexicographic_max_weight_matching;
use crate::permutation::{enumerate_involutions, Permutation, MAX_ENUMERATION_SIZE};
use crate::stochastic::{
    max_abs_diff, BistochasticMatrix, Complex64, ComplexRows, UnitaryMatrix, NEGATIVITY_TOL, SUM_TOL,
};

/// Largest permutation list accepted by [`u_matrix`] (all of `S_5`).
pub const U_MATRIX_LIMIT: usize = 120;

const HERMITIAN_TOL: f64 = 1e-9;

/// Diagonal data of a Hamiltonian and a state commuting with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSystem", into = "RawSystem")]
pub struct StationarySystem {
    energies: Vec<f64>,
    populations: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSystem {
    energies: Vec<f64>,
    populations: Vec<f64>,
}

impl StationarySystem {
    pub fn new(energies: Vec<f64>, populations: Vec<f64>) -> Result<Self> {
        if energies.is_empty() {
            return Err(Error::EmptyDimension);
        }
        if energies.len() != populations.len() {
            return Err(Error::DimensionMismatch { left: energies.len(), right: populations.len() });
        }
        if let Some(k) = energies.iter().position(|e| !e.is_finite()) {
            return Err(Error::InvalidSystem(format!("energy {k} is not finite")));
        }
        if let Some(k) = populations.iter().position(|r| !r.is_finite() || *r < -NEGATIVITY_TOL) {
            return Err(Error::InvalidSystem(format!("population {k} = {} is negative or not finite", populations[k])));
        }
        let total: f64 = populations.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidSystem(format!("populations sum to {total}, not 1")));
        }
        Ok(Self { energies, populations })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::DimensionMismatch { left: self.dim(), right: n });
        }
        Ok(())
    }
}

impl TryFrom<RawSystem> for StationarySystem {
    type Error = Error;

    fn try_from(raw: RawSystem) -> Result<Self> {
        Self::new(raw.energies, raw.populations)
    }
}

impl From<StationarySystem> for RawSystem {
    fn from(sys: StationarySystem) -> Self {
        RawSystem { energies: sys.energies, populations: sys.populations }
    }
}

/// A Hermitian, unit-trace, positive semidefinite complex matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexRows", into = "ComplexRows")]
pub struct DensityMatrix {
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        check_hermitian(&entries).map_err(Error::InvalidDensityMatrix)?;
        let trace = entries.trace();
        if (trace.re - 1.0).abs() > SUM_TOL || trace.im.abs() > SUM_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace is {trace}, not 1")));
        }
        let lowest = hermitian_eigenvalues(&entries).into_iter().fold(f64::INFINITY, f64::min);
        if lowest < -HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!("eigenvalue {lowest:e} is negative")));
        }
        Ok(Self { entries })
    }

    /// The diagonal state with the given populations.
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        let n = populations.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(populations[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }
}

impl TryFrom<ComplexRows> for DensityMatrix {
    type Error = Error;

    fn try_from(rows: ComplexRows) -> Result<Self> {
        let n = rows.re.len();
        let shape_ok = rows.im.len() == n && rows.re.iter().chain(rows.im.iter()).all(|row| row.len() == n);
        if !shape_ok {
            return Err(Error::InvalidDensityMatrix("rows are not square".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| Complex64::new(rows.re[i][j], rows.im[i][j])))
    }
}

impl From<DensityMatrix> for ComplexRows {
    fn from(rho: DensityMatrix) -> Self {
        let n = rho.dim();
        let part =
            |f: fn(&Complex64) -> f64| (0..n).map(|i| (0..n).map(|j| f(&rho.entries[(i, j)])).collect()).collect();
        ComplexRows { re: part(|z| z.re), im: part(|z| z.im) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractionKind {
    Ergotropy,
    Metrotropy,
}

/// Result of an optimal extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub kind: ExtractionKind,
    pub value: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub optimal_permutation: Permutation,
    pub channel: BistochasticMatrix,
    pub realizing_unitary: UnitaryMatrix,
}

/// `E = Σ_k E_k r_k`.
pub fn initial_energy(sys: &StationarySystem) -> f64 {
    permuted_energy(sys, &Permutation::identity(sys.dim()).expect("dimension is positive"))
}

// Σ_k E[σ(k)] r[k], summed in ascending k so the identity reproduces
// `initial_energy` bit for bit.
fn permuted_energy(sys: &StationarySystem, sigma: &Permutation) -> f64 {
    sys.populations.iter().enumerate().map(|(k, r)| sys.energies[sigma.apply(k)] * r).sum()
}

/// `Eᵀ·σ·r = Σ_k E[σ(k)] r[k]` for any permutation `σ`.
pub fn involution_energy(sys: &StationarySystem, sigma: &Permutation) -> Result<f64> {
    sys.check_dim(sigma.len())?;
    Ok(permuted_energy(sys, sigma))
}

/// Ergotropy: the largest population is sent to the lowest energy, the
/// second largest to the second lowest, and so on.
pub fn ergotropy(sys: &StationarySystem) -> ExtractionReport {
    let n = sys.dim();
    let mut by_population: Vec<usize> = (0..n).collect();
    by_population.sort_by(|&a, &b| sys.populations[b].total_cmp(&sys.populations[a]));
    let mut by_energy: Vec<usize> = (0..n).collect();
    by_energy.sort_by(|&a, &b| sys.energies[a].total_cmp(&sys.energies[b]));
    let mut map = vec![0; n];
    for (&from, &to) in by_population.iter().zip(&by_energy) {
        map[from] = to;
    }
    let mut sigma = Permutation::from_map(map).expect("sorted orders form a bijection");

    let initial = initial_energy(sys);
    let mut final_energy = permuted_energy(sys, &sigma);
    if final_energy > initial {
        // Only possible through rounding when the state is already passive.
        sigma = Permutation::identity(n).expect("dimension is positive");
        final_energy = initial;
    }
    ExtractionReport {
        kind: ExtractionKind::Ergotropy,
        value: initial - final_energy,
        initial_energy: initial,
        final_energy,
        channel: BistochasticMatrix::from_permutation(&sigma),
        realizing_unitary: UnitaryMatrix::from_permutation(&sigma),
        optimal_permutation: sigma,
    }
}

fn metrotropy_report(sys: &StationarySystem, sigma: Permutation) -> ExtractionReport {
    let initial = initial_energy(sys);
    let v0 = permuted_energy(sys, &sigma);
    let (sigma, v0) = if v0 > initial {
        (Permutation::identity(sys.dim()).expect("dimension is positive"), initial)
    } else {
        (sigma, v0)
    };
    ExtractionReport {
        kind: ExtractionKind::Metrotropy,
        value: (initial - v0) / 2.0,
        initial_energy: initial,
        final_energy: (v0 + initial) / 2.0,
        channel: BistochasticMatrix::identity_mixture(&sigma),
        realizing_unitary: realizing_unitary(&sigma).expect("optimum is an involution"),
        optimal_permutation: sigma,
    }
}

/// Metrotropy `M = (E − v0)/2` by exhaustive search over all involutions
/// (`N ≤ 12`).
///
/// This is the energy extracted by the best channel of the form
/// `(𝟙 + σ)/2`. For two levels it is the optimum over all rank-one
/// measurements; from three levels on, other measurements can extract more
/// (see [`crate::verify`]).
///
/// Ties keep the first minimizer in enumeration order.
pub fn metrotropy_bruteforce(sys: &StationarySystem) -> Result<ExtractionReport> {
    let n = sys.dim();
    if n > MAX_ENUMERATION_SIZE {
        return Err(Error::TooLarge {
            what: "brute-force metrotropy",
            n,
            limit: MAX_ENUMERATION_SIZE,
            hint: "; use metrotropy_matching instead",
        });
    }
    let mut best: Option<(f64, Permutation)> = None;
    for sigma in enumerate_involutions(n)? {
        let v = permuted_energy(sys, &sigma);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, sigma));
        }
    }
    let (_, sigma) = best.expect("the identity is always enumerated");
    Ok(metrotropy_report(sys, sigma))
}

/// Metrotropy via maximum-weight matching with weights
/// `w_ab = (E_a − E_b)(r_a − r_b)`; polynomial in `N`.
///
/// Weights are scaled so the largest is `2^50` and rounded to integers, which
/// keeps the matching exact. Among matchings of equal weight the
/// lexicographically smallest edge set wins.
pub fn metrotropy_matching(sys: &StationarySystem) -> ExtractionReport {
    let n = sys.dim();
    let e = &sys.energies;
    let r = &sys.populations;
    let weight = |a: usize, b: usize| (e[a] - e[b]) * (r[a] - r[b]);
    let wmax = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).map(|(a, b)| weight(a, b)).fold(0.0, f64::max);
    let pairs = if wmax > 0.0 {
        let scale = (1u64 << 50) as f64;
        let table: Vec<Vec<i64>> =
            (0..n).map(|a| (0..n).map(|b| (weight(a, b) / wmax * scale).round() as i64).collect()).collect();
        // Rounding moves each edge by at most half a unit.
        lexicographic_max_weight_matching(n, |a, b| table[a][b], n as i64)
    } else {
        Vec::new()
    };
    let sigma = Permutation::from_transpositions(n, &pairs).expect("matching edges are disjoint");
    metrotropy_report(sys, sigma)
}

/// A real-modulus construction of the unitary whose unistochastic matrix is
/// `(𝟙 + σ)/2`.
///
/// For each pair `a < b` of `σ`, column `a` is `c(e_a + e_b)` and column `b`
/// is `c(e_a − e_b)` with `c = (1 + i)/2`; fixed points keep `e_x`. Since
/// `|c|² = 1/2` exactly in binary floating point, the squared moduli are
/// exactly `0`, `1/2` or `1`. `c` differs from `1/√2` by the block phase
/// `e^{iπ/4}`, which no real double can avoid.
pub fn realizing_unitary(sigma: &Permutation) -> Result<UnitaryMatrix> {
    if !sigma.is_involution() {
        return Err(Error::NotInvolution);
    }
    let n = sigma.len();
    let c = Complex64::new(0.5, 0.5);
    let mut u = DMatrix::<Complex64>::identity(n, n);
    for (a, b) in sigma.transpositions() {
        u[(a, a)] = c;
        u[(b, a)] = c;
        u[(a, b)] = c;
        u[(b, b)] = -c;
    }
    Ok(UnitaryMatrix::from_entries_unchecked(u))
}

/// Energy after the measurement channel `p`: `Eᵀ·pᵀ·p·r`.
pub fn post_measurement_energy(sys: &StationarySystem, p: &BistochasticMatrix) -> Result<f64> {
    sys.check_dim(p.dim())?;
    let m = p.entries();
    let n = sys.dim();
    // (p·E)·(p·r)
    let pe: Vec<f64> = (0..n).map(|k| (0..n).map(|l| m[(k, l)] * sys.energies[l]).sum()).collect();
    let pr: Vec<f64> = (0..n).map(|k| (0..n).map(|l| m[(k, l)] * sys.populations[l]).sum()).collect();
    Ok(pe.iter().zip(&pr).map(|(a, b)| a * b).sum())
}

/// Energy after a unitary whose unistochastic matrix is `p`: `Eᵀ·p·r`.
pub fn post_unitary_energy(sys: &StationarySystem, p: &BistochasticMatrix) -> Result<f64> {
    sys.check_dim(p.dim())?;
    let m = p.entries();
    let n = sys.dim();
    Ok((0..n).map(|k| sys.energies[k] * (0..n).map(|l| m[(k, l)] * sys.populations[l]).sum::<f64>()).sum())
}

/// `u_ij = Eᵀ·((σ_iᵀσ_j + σ_jᵀσ_i)/2)·r`, a diagnostic limited to
/// [`U_MATRIX_LIMIT`] permutations.
pub fn u_matrix(sys: &StationarySystem, perms: &[Permutation]) -> Result<DMatrix<f64>> {
    if perms.len() > U_MATRIX_LIMIT {
        return Err(Error::TooLarge { what: "u matrix", n: perms.len(), limit: U_MATRIX_LIMIT, hint: " permutations" });
    }
    for sigma in perms {
        sys.check_dim(sigma.len())?;
    }
    let inverses: Vec<Permutation> = perms.iter().map(Permutation::inverse).collect();
    let m = perms.len();
    let mut u = DMatrix::zeros(m, m);
    for i in 0..m {
        u[(i, i)] = initial_energy(sys);
        for j in i + 1..m {
            let ij = permuted_energy(sys, &inverses[i].compose(&perms[j])?);
            let ji = permuted_energy(sys, &inverses[j].compose(&perms[i])?);
            let value = (ij + ji) / 2.0;
            u[(i, j)] = value;
            u[(j, i)] = value;
        }
    }
    Ok(u)
}

/// Ergotropy of an arbitrary state: `Tr(Hρ) − Σ_k E↑_k r↓_k` over the
/// eigenvalues of `h` ascending and of `ρ` descending.
pub fn general_ergotropy(h: &DMatrix<Complex64>, rho: &DensityMatrix) -> Result<f64> {
    check_hermitian(h).map_err(Error::InvalidParameter)?;
    if h.nrows() != rho.dim() {
        return Err(Error::DimensionMismatch { left: h.nrows(), right: rho.dim() });
    }
    let mut energies = hermitian_eigenvalues(h);
    energies.sort_by(f64::total_cmp);
    let mut populations = hermitian_eigenvalues(rho.entries());
    populations.sort_by(|a, b| b.total_cmp(a));
    let passive: f64 = energies.iter().zip(&populations).map(|(e, r)| e * r).sum();
    let energy = (h * rho.entries()).trace().re;
    Ok((energy - passive).max(0.0))
}

fn check_hermitian(m: &DMatrix<Complex64>) -> std::result::Result<(), String> {
    let n = m.nrows();
    if n == 0 {
        return Err("empty matrix".into());
    }
    if m.ncols() != n {
        return Err(format!("matrix is {}x{}, not square", n, m.ncols()));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err("non-finite entry".into());
    }
    let deviation = (m - m.adjoint()).iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    if deviation > HERMITIAN_TOL {
        return Err(format!("not Hermitian (deviation {deviation:e})"));
    }
    Ok(())
}

fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    // Symmetrize so tiny anti-Hermitian noise cannot leak into the solver.
    let sym = (m + m.adjoint()).map(|z| z * 0.5);
    SymmetricEigen::new(sym).eigenvalues.iter().copied().collect()
}

/// Largest entrywise distance between two channel matrices.
pub fn channel_distance(a: &BistochasticMatrix, b: &BistochasticMatrix) -> f64 {
    max_abs_diff(a.entries(), b.entries())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::unistochastic_of;
    use proptest::prelude::*;

    fn sys(e: &[f64], r: &[f64]) -> StationarySystem {
        StationarySystem::new(e.to_vec(), r.to_vec()).unwrap()
    }

    fn worked() -> StationarySystem {
        sys(&[0.0, 1.0, 2.0], &[0.2, 0.5, 0.3])
    }

    fn swap(n: usize, a: usize, b: usize) -> Permutation {
        Permutation::transposition(n, a, b).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn system_validation() {
        assert!(StationarySystem::new(vec![], vec![]).is_err());
        assert!(StationarySystem::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(StationarySystem::new(vec![0.0, f64::NAN], vec![0.5, 0.5]).is_err());
        assert!(StationarySystem::new(vec![0.0, 1.0], vec![1.1, -0.1]).is_err());
        assert!(StationarySystem::new(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(StationarySystem::new(vec![3.0, -1.0], vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn initial_energy_examples() {
        assert!(close(initial_energy(&worked()), 0.0 * 0.2 + 1.0 * 0.5 + 2.0 * 0.3));
        assert_eq!(initial_energy(&sys(&[4.0, -2.0, 7.0], &[1.0, 0.0, 0.0])), 4.0);
        let uniform = sys(&[1.0, 2.0, 3.0, 6.0], &[0.25; 4]);
        assert!(close(initial_energy(&uniform), 3.0));
    }

    #[test]
    fn worked_example_ergotropy() {
        let report = ergotropy(&worked());
        assert!(close(report.final_energy, 0.7));
        assert!(close(report.value, 0.4));
        // largest population (level 1) to energy 0, then level 2 to 1, level 0 to 2
        assert_eq!(report.optimal_permutation.map(), &[2, 0, 1]);
        assert!(!report.optimal_permutation.is_involution());
        assert_eq!(report.kind, ExtractionKind::Ergotropy);
        assert!(close(post_unitary_energy(&worked(), &report.channel).unwrap(), 0.7));
    }

    #[test]
    fn passive_state_has_zero_ergotropy() {
        let report = ergotropy(&sys(&[-1.0, 0.0, 1.0], &[0.6, 0.3, 0.1]));
        assert!(report.optimal_permutation.is_identity());
        assert_eq!(report.value, 0.0);
    }

    #[test]
    fn ergotropy_ties_are_stable() {
        // equal populations on levels 0 and 2, equal energies on levels 1 and 2
        let report = ergotropy(&sys(&[2.0, 1.0, 1.0], &[0.4, 0.2, 0.4]));
        // populations descending: 0, 2, 1; energies ascending: 1, 2, 0
        assert_eq!(report.optimal_permutation.map(), &[1, 0, 2]);
    }

    #[test]
    fn simplex_vertices() {
        let h = [-1.0, 0.0, 1.0];
        let cases = [([0.0, 0.0, 1.0], 2.0, 1.0), ([0.0, 1.0, 0.0], 1.0, 0.5), ([1.0, 0.0, 0.0], 0.0, 0.0)];
        for (r, w, m) in cases {
            let s = sys(&h, &r);
            assert!(close(ergotropy(&s).value, w));
            assert!(close(metrotropy_bruteforce(&s).unwrap().value, m));
            assert!(close(metrotropy_matching(&s).value, m));
        }
    }

    #[test]
    fn involution_energy_examples() {
        let s = worked();
        let id = Permutation::identity(3).unwrap();
        assert_eq!(involution_energy(&s, &id).unwrap(), initial_energy(&s));
        assert!(close(involution_energy(&s, &swap(3, 0, 1)).unwrap(), 1.0 * 0.2 + 0.0 * 0.5 + 2.0 * 0.3));
        assert!(close(involution_energy(&s, &swap(3, 1, 2)).unwrap(), 0.0 * 0.2 + 2.0 * 0.5 + 1.0 * 0.3));
        assert!(involution_energy(&s, &swap(2, 0, 1)).is_err());
    }

    #[test]
    fn worked_example_metrotropy() {
        let s = worked();
        for report in [metrotropy_bruteforce(&s).unwrap(), metrotropy_matching(&s)] {
            assert_eq!(report.kind, ExtractionKind::Metrotropy);
            assert_eq!(report.optimal_permutation, swap(3, 0, 1));
            assert!(close(report.value, 0.15));
            assert!(close(report.final_energy, 0.95));
            assert!(report.value <= ergotropy(&s).value / 2.0);
            assert_eq!(report.channel, BistochasticMatrix::identity_mixture(&swap(3, 0, 1)));
            assert_eq!(unistochastic_of(&report.realizing_unitary), report.channel);
        }
    }

    #[test]
    fn passive_state_has_zero_metrotropy() {
        let s = sys(&[-1.0, 0.0, 1.0, 2.0], &[0.4, 0.3, 0.2, 0.1]);
        assert_eq!(metrotropy_bruteforce(&s).unwrap().value, 0.0);
        assert_eq!(metrotropy_matching(&s).value, 0.0);
        assert!(metrotropy_matching(&s).optimal_permutation.is_identity());
    }

    #[test]
    fn uniform_populations_have_no_positive_edges() {
        let s = sys(&[3.0, -1.0, 0.5], &[1.0 / 3.0; 3]);
        let report = metrotropy_matching(&s);
        assert_eq!(report.value, 0.0);
        assert!(report.optimal_permutation.is_identity());
    }

    #[test]
    fn qubit_stationary_metrotropy() {
        let (bz, rz) = (0.7, 0.6);
        let s = sys(&[-bz, bz], &[(1.0 - rz) / 2.0, (1.0 + rz) / 2.0]);
        assert!(close(metrotropy_matching(&s).value, rz * bz));
        assert!(close(ergotropy(&s).value, 2.0 * rz * bz));
    }

    #[test]
    fn bruteforce_guard() {
        let n = MAX_ENUMERATION_SIZE + 1;
        let s = sys(&vec![0.0; n], &vec![1.0 / n as f64; n]);
        assert!(matches!(metrotropy_bruteforce(&s), Err(Error::TooLarge { .. })));
        // the matching route has no such limit
        let large = sys(&(0..40).map(f64::from).collect::<Vec<_>>(), &{
            let mut r = vec![0.0; 40];
            r[39] = 1.0;
            r
        });
        let report = metrotropy_matching(&large);
        assert_eq!(report.optimal_permutation.transpositions(), vec![(0, 39)]);
        assert!(close(report.value, 39.0 / 2.0));
    }

    #[test]
    fn realizing_unitary_examples() {
        assert_eq!(realizing_unitary(&Permutation::identity(3).unwrap()).unwrap(), UnitaryMatrix::identity(3).unwrap());
        let u = realizing_unitary(&swap(2, 0, 1)).unwrap();
        // equal to the real mixer rows (1,1)/√2, (1,-1)/√2 up to a global phase
        let phase = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mixer = [[s, s], [s, -s]];
        for (i, row) in mixer.iter().enumerate() {
            for (j, &m) in row.iter().enumerate() {
                assert!((u.entries()[(i, j)] - phase * m).norm() < 1e-15);
            }
        }
        let u3 = realizing_unitary(&swap(3, 0, 1)).unwrap();
        assert_eq!(u3.entries()[(2, 2)], Complex64::new(1.0, 0.0));
        assert_eq!(u3.entries()[(0, 2)], Complex64::new(0.0, 0.0));
        assert!(matches!(realizing_unitary(&Permutation::from_map(vec![1, 2, 0]).unwrap()), Err(Error::NotInvolution)));
    }

    #[test]
    fn post_measurement_examples() {
        let s = worked();
        let id = BistochasticMatrix::identity(3).unwrap();
        assert_eq!(post_measurement_energy(&s, &id).unwrap(), initial_energy(&s));
        let mix = BistochasticMatrix::identity_mixture(&swap(3, 0, 1));
        assert!(close(post_measurement_energy(&s, &mix).unwrap(), (0.8 + 1.1) / 2.0));
        let cycle = BistochasticMatrix::from_permutation(&Permutation::from_map(vec![2, 0, 1]).unwrap());
        assert!(close(post_measurement_energy(&s, &cycle).unwrap(), 1.1));
        let uniform = BistochasticMatrix::from_rows(&vec![vec![1.0 / 3.0; 3]; 3]).unwrap();
        assert!(close(post_unitary_energy(&s, &uniform).unwrap(), 1.0));
        assert!(close(post_unitary_energy(&s, &id).unwrap(), 1.1));
        assert!(post_unitary_energy(&s, &BistochasticMatrix::identity(2).unwrap()).is_err());
    }

    #[test]
    fn u_matrix_examples() {
        let s = worked();
        let perms =
            vec![Permutation::identity(3).unwrap(), swap(3, 0, 1), Permutation::from_map(vec![1, 2, 0]).unwrap()];
        let u = u_matrix(&s, &perms).unwrap();
        for i in 0..3 {
            assert_eq!(u[(i, i)], initial_energy(&s));
            for j in 0..3 {
                assert_eq!(u[(i, j)], u[(j, i)]);
            }
        }
        assert!(close(u[(0, 1)], 0.8));
        // symmetrized 3-cycle: (σ + σᵀ)/2 averaged energies
        let cycle = &perms[2];
        let expected = (involution_energy(&s, cycle).unwrap() + involution_energy(&s, &cycle.inverse()).unwrap()) / 2.0;
        assert!(close(u[(0, 2)], expected));
        let too_many = vec![Permutation::identity(3).unwrap(); U_MATRIX_LIMIT + 1];
        assert!(u_matrix(&s, &too_many).is_err());
    }

    #[test]
    fn general_ergotropy_examples() {
        let s = worked();
        let h = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            3,
            s.energies().iter().map(|&e| Complex64::new(e, 0.0)),
        ));
        let rho = DensityMatrix::diagonal(s.populations()).unwrap();
        assert!(close(general_ergotropy(&h, &rho).unwrap(), ergotropy(&s).value));
        let mixed = DensityMatrix::diagonal(&[1.0 / 3.0; 3]).unwrap();
        assert!(general_ergotropy(&h, &mixed).unwrap().abs() < 1e-12);

        // qubit: ρ = (𝟙 + R·σ)/2 with H = bz σz
        let (bz, norm, theta) = (1.3, 0.8, 0.9f64);
        let (x, z) = (norm * theta.sin(), norm * theta.cos());
        let c = Complex64::new;
        let rho = DensityMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[c((1.0 + z) / 2.0, 0.0), c(x / 2.0, 0.0), c(x / 2.0, 0.0), c((1.0 - z) / 2.0, 0.0)],
        ))
        .unwrap();
        let hq = DMatrix::from_row_slice(2, 2, &[c(bz, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-bz, 0.0)]);
        assert!(close(general_ergotropy(&hq, &rho).unwrap(), bz * norm * (1.0 + theta.cos())));
    }

    #[test]
    fn density_matrix_validation() {
        let c = Complex64::new;
        let non_hermitian = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, 0.0), c(0.0, 0.0), c(0.5, 0.0)]);
        assert!(DensityMatrix::new(non_hermitian).is_err());
        assert!(DensityMatrix::diagonal(&[0.7, 0.7]).is_err());
        assert!(DensityMatrix::diagonal(&[1.2, -0.2]).is_err());
        let rho = DensityMatrix::diagonal(&[0.25, 0.75]).unwrap();
        let json = serde_json::to_string(&rho).unwrap();
        assert_eq!(serde_json::from_str::<DensityMatrix>(&json).unwrap(), rho);
    }

    #[test]
    fn report_serde_round_trip() {
        let report = metrotropy_matching(&worked());
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"kind\":\"metrotropy\""));
        assert_eq!(serde_json::from_str::<ExtractionReport>(&json).unwrap(), report);
        let s: StationarySystem = serde_json::from_str(r#"{"energies":[0,1],"populations":[0.5,0.5]}"#).unwrap();
        assert_eq!(s.dim(), 2);
        assert!(serde_json::from_str::<StationarySystem>(r#"{"energies":[0,1],"populations":[0.5,0.6]}"#).is_err());
    }

    fn system_strategy(sizes: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = StationarySystem> {
        sizes.prop_flat_map(|n| {
            (proptest::collection::vec(-1.0f64..1.0, n), proptest::collection::vec(0.0f64..1.0, n)).prop_filter_map(
                "degenerate simplex draw",
                |(e, raw)| {
                    // exponential spacings give a uniform simplex point
                    let g: Vec<f64> = raw.iter().map(|u| -(1.0 - u).ln()).collect();
                    let total: f64 = g.iter().sum();
                    (total > 0.0).then(|| StationarySystem::new(e, g.iter().map(|x| x / total).collect()).unwrap())
                },
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn metrotropy_bounded_by_half_ergotropy(s in system_strategy(2..=8)) {
            let w = ergotropy(&s).value;
            let m = metrotropy_matching(&s).value;
            prop_assert!(m >= 0.0);
            prop_assert!(m <= w / 2.0 + 1e-12);
            if w == 0.0 {
                prop_assert_eq!(m, 0.0);
            }
            // an involutive ergotropy optimum forces equality
            if ergotropy(&s).optimal_permutation.is_involution() {
                prop_assert!((w / 2.0 - m).abs() < 1e-12);
            }
        }

        #[test]
        fn matching_equals_bruteforce(s in system_strategy(2..=7)) {
            let brute = metrotropy_bruteforce(&s).unwrap();
            let matched = metrotropy_matching(&s);
            prop_assert_eq!(brute.value, matched.value);
            prop_assert_eq!(brute.final_energy, matched.final_energy);
        }

        #[test]
        fn saturating_channel_and_unitary(s in system_strategy(2..=8)) {
            let report = metrotropy_matching(&s);
            let sigma = &report.optimal_permutation;
            prop_assert!(sigma.is_involution());
            let v0 = involution_energy(&s, sigma).unwrap();
            let e = initial_energy(&s);
            let measured = post_measurement_energy(&s, &report.channel).unwrap();
            prop_assert!((measured - (v0 + e) / 2.0).abs() < 1e-12);
            let p = unistochastic_of(&report.realizing_unitary);
            prop_assert_eq!(&p, &report.channel);
            prop_assert!(p.entries().iter().all(|&x| x == 0.0 || x == 0.5 || x == 1.0));
        }

        #[test]
        fn two_levels_always_half(s in system_strategy(2..=2)) {
            let w = ergotropy(&s).value;
            prop_assert!((metrotropy_matching(&s).value - w / 2.0).abs() < 1e-12);
        }

        #[test]
        fn general_ergotropy_reduces_to_stationary(s in system_strategy(2..=6)) {
            let n = s.dim();
            let h = DMatrix::from_fn(n, n, |i, j| Complex64::new(if i == j { s.energies()[i] } else { 0.0 }, 0.0));
            let rho = DensityMatrix::diagonal(s.populations()).unwrap();
            prop_assert!((general_ergotropy(&h, &rho).unwrap() - ergotropy(&s).value).abs() < 1e-12);
        }
    }
}
