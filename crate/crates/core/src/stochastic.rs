//! Bistochastic and unitary matrices, the unistochastic map `U ↦ |U|²`,
//! and Birkhoff decomposition into a convex combination of permutations.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permutation::Permutation;

pub type Complex64 = Complex<f64>;

/// Entries may dip this far below zero and still be accepted (unchanged).
pub const NEGATIVITY_TOL: f64 = 1e-12;
/// Allowed deviation of each row and column sum from one.
pub const SUM_TOL: f64 = 1e-9;
/// Allowed Frobenius norm of `U·U† − 𝟙`.
pub const UNITARITY_TOL: f64 = 1e-9;

// Residual entries at or below this are treated as outside the support
// during Birkhoff extraction.
const SUPPORT_TOL: f64 = 1e-13;

/// A square non-negative matrix whose rows and columns each sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct BistochasticMatrix {
    entries: DMatrix<f64>,
}

impl BistochasticMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 {
            return Err(Error::EmptyDimension);
        }
        if entries.ncols() != n {
            return Err(Error::NotBistochastic(format!("matrix is {}x{}, not square", n, entries.ncols())));
        }
        for ((i, j), &x) in entries.iter().enumerate().map(|(idx, x)| ((idx % n, idx / n), x)) {
            if !x.is_finite() {
                return Err(Error::NotBistochastic(format!("entry ({i},{j}) is not finite")));
            }
            if x < -NEGATIVITY_TOL {
                return Err(Error::NotBistochastic(format!("entry ({i},{j}) = {x} is negative")));
            }
        }
        for i in 0..n {
            let row: f64 = entries.row(i).sum();
            if (row - 1.0).abs() > SUM_TOL {
                return Err(Error::NotBistochastic(format!("row {i} sums to {row}")));
            }
            let col: f64 = entries.column(i).sum();
            if (col - 1.0).abs() > SUM_TOL {
                return Err(Error::NotBistochastic(format!("column {i} sums to {col}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows).map_err(Error::NotBistochastic)?)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Ok(Self::from_permutation(&Permutation::identity(n)?))
    }

    pub fn from_permutation(sigma: &Permutation) -> Self {
        Self { entries: sigma.to_matrix() }
    }

    /// `(𝟙 + σ)/2`. Entries are exactly 0, 1/2 or 1.
    pub fn identity_mixture(sigma: &Permutation) -> Self {
        let n = sigma.len();
        let p = sigma.to_matrix();
        let entries = DMatrix::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            (id + p[(i, j)]) / 2.0
        });
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn transpose(&self) -> Self {
        Self { entries: self.entries.transpose() }
    }

    /// Matrix product; bistochastic matrices are closed under it.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { left: self.dim(), right: other.dim() });
        }
        Self::new(&self.entries * &other.entries)
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &DMatrix<f64>) -> f64 {
        max_abs_diff(&self.entries, other)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        rows_of(&self.entries)
    }
}

impl TryFrom<Vec<Vec<f64>>> for BistochasticMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<BistochasticMatrix> for Vec<Vec<f64>> {
    fn from(m: BistochasticMatrix) -> Self {
        m.rows()
    }
}

/// A square complex matrix with `U·U† = 𝟙`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexRows", into = "ComplexRows")]
pub struct UnitaryMatrix {
    entries: DMatrix<Complex64>,
}

impl UnitaryMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 {
            return Err(Error::EmptyDimension);
        }
        if entries.ncols() != n {
            return Err(Error::NotUnitary(format!("matrix is {}x{}, not square", n, entries.ncols())));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NotUnitary("non-finite entry".into()));
        }
        let deviation = unitarity_deviation(&entries);
        if deviation > UNITARITY_TOL {
            return Err(Error::NotUnitary(format!("|U U^† - 1|_F = {deviation:e}")));
        }
        Ok(Self { entries })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Ok(Self::from_permutation(&Permutation::identity(n)?))
    }

    /// Permutation matrix with all phases zero.
    pub fn from_permutation(sigma: &Permutation) -> Self {
        Self { entries: sigma.to_matrix().map(|x| Complex64::new(x, 0.0)) }
    }

    pub(crate) fn from_entries_unchecked(entries: DMatrix<Complex64>) -> Self {
        debug_assert!(unitarity_deviation(&entries) <= UNITARITY_TOL);
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// `‖U·U† − 𝟙‖_F`.
    pub fn deviation(&self) -> f64 {
        unitarity_deviation(&self.entries)
    }
}

/// Serialized form of a complex matrix: separate real and imaginary rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplexRows {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl TryFrom<ComplexRows> for UnitaryMatrix {
    type Error = Error;

    fn try_from(rows: ComplexRows) -> Result<Self> {
        let re = matrix_from_rows(&rows.re).map_err(Error::NotUnitary)?;
        let im = matrix_from_rows(&rows.im).map_err(Error::NotUnitary)?;
        if re.shape() != im.shape() {
            return Err(Error::NotUnitary("real and imaginary parts differ in shape".into()));
        }
        Self::new(re.zip_map(&im, Complex64::new))
    }
}

impl From<UnitaryMatrix> for ComplexRows {
    fn from(u: UnitaryMatrix) -> Self {
        ComplexRows { re: rows_of(&u.entries.map(|z| z.re)), im: rows_of(&u.entries.map(|z| z.im)) }
    }
}

fn unitarity_deviation(u: &DMatrix<Complex64>) -> f64 {
    let n = u.nrows();
    let product = u * u.adjoint();
    (product - DMatrix::<Complex64>::identity(n, n)).norm()
}

/// `P_kl = |U_kl|²`.
pub fn unistochastic_of(u: &UnitaryMatrix) -> BistochasticMatrix {
    BistochasticMatrix { entries: u.entries.map(|z| z.norm_sqr()) }
}

/// Weights `λ_i ≥ 0` summing to one, paired with permutations `σ_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexCombination {
    weights: Vec<f64>,
    perms: Vec<Permutation>,
}

impl ConvexCombination {
    pub fn new(weights: Vec<f64>, perms: Vec<Permutation>) -> Result<Self> {
        if weights.is_empty() || weights.len() != perms.len() {
            return Err(Error::InvalidParameter(
                "weights and permutations must be non-empty and of equal length".into(),
            ));
        }
        let n = perms[0].len();
        if let Some(p) = perms.iter().find(|p| p.len() != n) {
            return Err(Error::DimensionMismatch { left: n, right: p.len() });
        }
        if weights.iter().any(|&w| w.is_nan() || w < 0.0) {
            return Err(Error::InvalidParameter("weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidParameter(format!("weights sum to {total}")));
        }
        Ok(Self { weights, perms })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn perms(&self) -> &[Permutation] {
        &self.perms
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `Σ λ_i · matrix(σ_i)`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.perms[0].len();
        let mut m = DMatrix::zeros(n, n);
        for (w, p) in self.weights.iter().zip(&self.perms) {
            for k in 0..n {
                m[(p.apply(k), k)] += w;
            }
        }
        m
    }
}

/// Greedy Birkhoff decomposition.
///
/// Each step finds a perfect matching on the support of the residual
/// (Kuhn's augmenting paths, rows and columns in ascending order), removes
/// that permutation with the smallest matched entry as weight, and zeroes
/// the entry that hit the minimum. If the greedy pass produces more than
/// `(N−1)² + 1` terms, the combination is pruned by Carathéodory reduction.
pub fn birkhoff_decompose(b: &BistochasticMatrix) -> ConvexCombination {
    let n = b.dim();
    let mut residual = b.entries.clone();
    let mut weights = Vec::new();
    let mut perms = Vec::new();

    while residual.iter().any(|&x| x > SUPPORT_TOL) {
        let Some(row_to_col) = perfect_matching(n, |i, j| residual[(i, j)] > SUPPORT_TOL) else {
            break;
        };
        let (min_row, weight) = row_to_col
            .iter()
            .enumerate()
            .map(|(i, &j)| (i, residual[(i, j)]))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        let mut map = vec![0; n];
        for (i, &j) in row_to_col.iter().enumerate() {
            residual[(i, j)] -= weight;
            map[j] = i;
        }
        residual[(min_row, row_to_col[min_row])] = 0.0;
        weights.push(weight);
        perms.push(Permutation::from_map(map).expect("a perfect matching is a bijection"));
    }

    caratheodory_reduce(n, &mut weights, &mut perms);
    ConvexCombination { weights, perms }
}

/// Row-to-column perfect matching on the bipartite graph `allowed(row, col)`.
fn perfect_matching(n: usize, allowed: impl Fn(usize, usize) -> bool) -> Option<Vec<usize>> {
    fn augment(
        row: usize,
        n: usize,
        allowed: &impl Fn(usize, usize) -> bool,
        visited: &mut [bool],
        col_owner: &mut [Option<usize>],
    ) -> bool {
        for col in 0..n {
            if !allowed(row, col) || visited[col] {
                continue;
            }
            visited[col] = true;
            let free = match col_owner[col] {
                None => true,
                Some(other) => augment(other, n, allowed, visited, col_owner),
            };
            if free {
                col_owner[col] = Some(row);
                return true;
            }
        }
        false
    }

    let mut col_owner: Vec<Option<usize>> = vec![None; n];
    for row in 0..n {
        let mut visited = vec![false; n];
        if !augment(row, n, &allowed, &mut visited, &mut col_owner) {
            return None;
        }
    }
    let mut row_to_col = vec![0; n];
    for (col, owner) in col_owner.iter().enumerate() {
        row_to_col[owner.expect("all rows matched")] = col;
    }
    Some(row_to_col)
}

/// Shrinks a convex combination of permutation matrices to at most
/// `(N−1)² + 1` terms, the affine dimension of the Birkhoff polytope plus one.
fn caratheodory_reduce(n: usize, weights: &mut Vec<f64>, perms: &mut Vec<Permutation>) {
    let limit = (n - 1) * (n - 1) + 1;
    while weights.len() > limit {
        let k = weights.len();
        let mut a = DMatrix::<f64>::zeros(n * n + 1, k);
        for (c, p) in perms.iter().enumerate() {
            for col in 0..n {
                a[(p.apply(col) * n + col, c)] = 1.0;
            }
            a[(n * n, c)] = 1.0;
        }
        let mut z = null_vector(a);
        if !z.iter().any(|&x| x > 0.0) {
            z.iter_mut().for_each(|x| *x = -*x);
        }
        let (drop, step) = z
            .iter()
            .enumerate()
            .filter(|&(_, &zi)| zi > 1e-12)
            .map(|(i, &zi)| (i, weights[i] / zi))
            .fold((usize::MAX, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        for (w, zi) in weights.iter_mut().zip(&z) {
            *w -= step * zi;
        }
        weights[drop] = 0.0;
        let mut i = 0;
        while i < weights.len() {
            if weights[i] <= 0.0 {
                weights.remove(i);
                perms.remove(i);
            } else {
                i += 1;
            }
        }
    }
}

/// A non-zero vector in the kernel of a matrix with more columns than rank,
/// via reduced row echelon form with partial pivoting.
fn null_vector(mut a: DMatrix<f64>) -> Vec<f64> {
    let (rows, cols) = a.shape();
    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (best, mag) =
            (r..rows)
                .map(|i| (i, a[(i, c)].abs()))
                .fold((r, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if mag < 1e-9 {
            continue;
        }
        a.swap_rows(r, best);
        let pivot = a[(r, c)];
        for j in 0..cols {
            a[(r, j)] /= pivot;
        }
        for i in 0..rows {
            if i != r {
                let factor = a[(i, c)];
                if factor != 0.0 {
                    for j in 0..cols {
                        a[(i, j)] -= factor * a[(r, j)];
                    }
                }
            }
        }
        pivot_cols.push(c);
        r += 1;
    }
    let free = (0..cols).find(|c| !pivot_cols.contains(c)).expect("more columns than rank");
    let mut z = vec![0.0; cols];
    z[free] = 1.0;
    for (row, &pc) in pivot_cols.iter().enumerate() {
        z[pc] = -a[(row, free)];
    }
    z
}

pub(crate) fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub(crate) fn rows_of<T: nalgebra::Scalar + Copy>(m: &DMatrix<T>) -> Vec<Vec<T>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> std::result::Result<DMatrix<f64>, String> {
    let n = rows.len();
    if n == 0 {
        return Err("matrix has no rows".into());
    }
    let cols = rows[0].len();
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(format!("row {i} has {} entries, expected {cols}", row.len()));
    }
    Ok(DMatrix::from_fn(n, cols, |i, j| rows[i][j]))
}
