//! Permutations of `0..n` stored as index maps.
//!
//! `map[k]` is the image of `k`. The matrix form used throughout the crate
//! sends basis vector `e_k` to `e_{σ(k)}`, so `matrix[σ(k)][k] = 1` and
//! `matrix(a ∘ b) = matrix(a) · matrix(b)`.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `n` accepted by [`enumerate_involutions`]. `T(12) = 140152`.
pub const MAX_ENUMERATION_SIZE: usize = 12;

/// A bijection on `{0, …, n-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDimension);
        }
        Ok(Self { map: (0..n).collect() })
    }

    /// Builds a permutation from its image list, checking bijectivity.
    pub fn from_map(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        if n == 0 {
            return Err(Error::EmptyDimension);
        }
        let mut seen = vec![false; n];
        for &image in &map {
            if image >= n {
                return Err(Error::InvalidPermutation(format!("image {image} out of range for n = {n}")));
            }
            if seen[image] {
                return Err(Error::InvalidPermutation(format!("image {image} appears more than once")));
            }
            seen[image] = true;
        }
        Ok(Self { map })
    }

    /// The transposition exchanging `a` and `b` on `n` points.
    pub fn transposition(n: usize, a: usize, b: usize) -> Result<Self> {
        Self::from_transpositions(n, &[(a, b)])
    }

    /// Product of disjoint transpositions; fails if the pairs overlap.
    pub fn from_transpositions(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut map: Vec<usize> = Self::identity(n)?.map;
        for &(a, b) in pairs {
            if a >= n || b >= n || a == b {
                return Err(Error::InvalidPermutation(format!("bad transposition ({a} {b}) for n = {n}")));
            }
            if map[a] != a || map[b] != b {
                return Err(Error::InvalidPermutation(format!("transposition ({a} {b}) overlaps another pair")));
            }
            map.swap(a, b);
        }
        Ok(Self { map })
    }

    /// Builds a permutation from disjoint cycles; unlisted points are fixed.
    pub fn from_cycles(n: usize, cycles: &[Vec<usize>]) -> Result<Self> {
        let mut map: Vec<usize> = (0..n).collect();
        let mut touched = vec![false; n];
        for cycle in cycles {
            for (i, &point) in cycle.iter().enumerate() {
                if point >= n || touched[point] {
                    return Err(Error::InvalidPermutation(format!("cycle point {point} is out of range or repeated")));
                }
                touched[point] = true;
                map[point] = cycle[(i + 1) % cycle.len()];
            }
        }
        Self::from_map(map)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn apply(&self, k: usize) -> usize {
        self.map[k]
    }

    /// `(a ∘ b)(k) = a(b(k))`.
    pub fn compose(&self, b: &Permutation) -> Result<Permutation> {
        check_same_len(self, b)?;
        Ok(Permutation { map: b.map.iter().map(|&k| self.map[k]).collect() })
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.map.len()];
        for (k, &image) in self.map.iter().enumerate() {
            inv[image] = k;
        }
        Permutation { map: inv }
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(k, &image)| k == image)
    }

    /// `σ ∘ σ = id`, i.e. every cycle has length at most two.
    pub fn is_involution(&self) -> bool {
        self.map.iter().enumerate().all(|(k, &image)| self.map[image] == k)
    }

    /// The transposed pairs `(a, b)` with `a < b`, ascending. Only
    /// meaningful for involutions; other cycles are ignored.
    pub fn transpositions(&self) -> Vec<(usize, usize)> {
        self.map
            .iter()
            .enumerate()
            .filter(|&(k, &image)| k < image && self.map[image] == k)
            .map(|(k, &image)| (k, image))
            .collect()
    }

    /// Disjoint cycle decomposition, each cycle starting at its smallest
    /// element; fixed points are omitted.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.map.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] || self.map[start] == start {
                seen[start] = true;
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut k = self.map[start];
            while k != start {
                seen[k] = true;
                cycle.push(k);
                k = self.map[k];
            }
            out.push(cycle);
        }
        out
    }

    /// Permutation matrix with `m[σ(k)][k] = 1`.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.map.len();
        let mut m = DMatrix::zeros(n, n);
        for (k, &image) in self.map.iter().enumerate() {
            m[(image, k)] = 1.0;
        }
        m
    }
}

/// Cycle notation, e.g. `(0 2 1)(3 4)`; the identity prints as `()`.
impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return f.write_str("()");
        }
        for cycle in cycles {
            f.write_str("(")?;
            for (i, k) in cycle.iter().enumerate() {
                if i > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{k}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(map: Vec<usize>) -> Result<Self> {
        Self::from_map(map)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.map
    }
}

fn check_same_len(a: &Permutation, b: &Permutation) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { left: a.len(), right: b.len() });
    }
    Ok(())
}

/// Whether `a` and `b` are complementary: for all `i, j, h, k`,
/// `A_ij = A_hk = B_ik = 1` implies `B_hj = 1`.
///
/// With `A_ij = 1 ⇔ i = a(j)` the quadruple condition collapses to
/// `a(j) = b(k) ⇒ a(k) = b(j)` for every pair `(j, k)`.
pub fn is_complementary(a: &Permutation, b: &Permutation) -> Result<bool> {
    check_same_len(a, b)?;
    let b_inv = b.inverse();
    Ok((0..a.len()).all(|j| {
        let k = b_inv.apply(a.apply(j));
        a.apply(k) == b.apply(j)
    }))
}

/// All involutions of `S_n` in lexicographic order of their maps.
pub fn enumerate_involutions(n: usize) -> Result<Vec<Permutation>> {
    if n == 0 {
        return Err(Error::EmptyDimension);
    }
    if n > MAX_ENUMERATION_SIZE {
        return Err(Error::TooLarge { what: "involution enumeration", n, limit: MAX_ENUMERATION_SIZE, hint: "" });
    }
    let mut out = Vec::new();
    let mut map: Vec<Option<usize>> = vec![None; n];
    extend_involutions(&mut map, &mut out);
    Ok(out)
}

// Decides the smallest unassigned point: fixed first, then paired with each
// larger free point in ascending order. That order is lexicographic in `map`.
fn extend_involutions(map: &mut [Option<usize>], out: &mut Vec<Permutation>) {
    let Some(i) = map.iter().position(Option::is_none) else {
        out.push(Permutation { map: map.iter().map(|m| m.unwrap()).collect() });
        return;
    };
    map[i] = Some(i);
    extend_involutions(map, out);
    for j in i + 1..map.len() {
        if map[j].is_none() {
            map[i] = Some(j);
            map[j] = Some(i);
            extend_involutions(map, out);
            map[j] = None;
        }
    }
    map[i] = None;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perm(map: &[usize]) -> Permutation {
        Permutation::from_map(map.to_vec()).unwrap()
    }

    fn telephone(n: usize) -> usize {
        let (mut prev, mut cur) = (1usize, 1usize);
        for k in 2..=n {
            let next = cur + (k - 1) * prev;
            prev = cur;
            cur = next;
        }
        cur
    }

    // Straight transcription of the four-index definition.
    fn complementary_by_quadruples(a: &Permutation, b: &Permutation) -> bool {
        let (am, bm) = (a.to_matrix(), b.to_matrix());
        let n = a.len();
        for i in 0..n {
            for j in 0..n {
                for h in 0..n {
                    for k in 0..n {
                        if am[(i, j)] == 1.0 && am[(h, k)] == 1.0 && bm[(i, k)] == 1.0 && bm[(h, j)] != 1.0 {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    fn all_permutations(n: usize) -> Vec<Permutation> {
        fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Permutation>) {
            if prefix.len() == used.len() {
                out.push(Permutation::from_map(prefix.clone()).unwrap());
                return;
            }
            for v in 0..used.len() {
                if !used[v] {
                    used[v] = true;
                    prefix.push(v);
                    rec(prefix, used, out);
                    prefix.pop();
                    used[v] = false;
                }
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), &mut vec![false; n], &mut out);
        out
    }

    #[test]
    fn identity_maps_each_point_to_itself() {
        assert_eq!(Permutation::identity(3).unwrap().map(), &[0, 1, 2]);
        assert_eq!(Permutation::identity(1).unwrap().map(), &[0]);
        assert_eq!(Permutation::identity(0), Err(Error::EmptyDimension));
    }

    #[test]
    fn from_map_rejects_non_bijections() {
        assert!(Permutation::from_map(vec![0, 0, 1]).is_err());
        assert!(Permutation::from_map(vec![0, 3, 1]).is_err());
        assert!(Permutation::from_map(vec![]).is_err());
    }

    #[test]
    fn compose_examples() {
        let swap01 = Permutation::transposition(3, 0, 1).unwrap();
        assert!(swap01.compose(&swap01).unwrap().is_identity());

        let cycle = perm(&[1, 2, 0]);
        assert_eq!(cycle.compose(&cycle).unwrap(), perm(&[2, 0, 1]));
        assert!(cycle.compose(&cycle.inverse()).unwrap().is_identity());

        let sigma = perm(&[3, 1, 0, 2]);
        let id = Permutation::identity(4).unwrap();
        assert_eq!(id.compose(&sigma).unwrap(), sigma);

        assert!(matches!(id.compose(&cycle), Err(Error::DimensionMismatch { left: 4, right: 3 })));
    }

    #[test]
    fn compose_matches_matrix_product() {
        for a in all_permutations(4) {
            for b in all_permutations(4).iter().step_by(5) {
                let ab = a.compose(b).unwrap();
                assert_eq!(ab.to_matrix(), a.to_matrix() * b.to_matrix());
            }
        }
    }

    #[test]
    fn inverse_examples() {
        assert!(Permutation::identity(5).unwrap().inverse().is_identity());
        assert_eq!(perm(&[1, 2, 0]).inverse(), perm(&[2, 0, 1]));
        for p in all_permutations(4) {
            assert_eq!(p.inverse().to_matrix(), p.to_matrix().transpose());
            if p.is_involution() {
                assert_eq!(p.inverse(), p);
            }
        }
    }

    #[test]
    fn involution_examples() {
        assert!(Permutation::identity(3).unwrap().is_involution());
        assert!(!perm(&[1, 2, 0]).is_involution());
        assert!(!perm(&[2, 0, 1]).is_involution());
        assert!(Permutation::transposition(3, 0, 1).unwrap().is_involution());
        for p in all_permutations(4) {
            let m = p.to_matrix();
            assert_eq!(p.is_involution(), m == m.transpose());
        }
    }

    #[test]
    fn involution_counts_follow_telephone_numbers() {
        assert_eq!(enumerate_involutions(2).unwrap().len(), 2);
        assert_eq!(enumerate_involutions(6).unwrap().len(), 76);
        for n in 1..=10 {
            assert_eq!(enumerate_involutions(n).unwrap().len(), telephone(n), "n = {n}");
        }
    }

    #[test]
    fn involutions_of_three_points_in_lexicographic_order() {
        let maps: Vec<Vec<usize>> = enumerate_involutions(3).unwrap().into_iter().map(Vec::from).collect();
        assert_eq!(maps, vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2], vec![2, 1, 0]]);
    }

    #[test]
    fn enumeration_is_sorted_and_exhaustive() {
        for n in 1..=6 {
            let got = enumerate_involutions(n).unwrap();
            let mut expected: Vec<Permutation> =
                all_permutations(n).into_iter().filter(Permutation::is_involution).collect();
            expected.sort();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn enumeration_guard() {
        assert!(matches!(enumerate_involutions(13), Err(Error::TooLarge { n: 13, limit: 12, .. })));
        assert_eq!(enumerate_involutions(0), Err(Error::EmptyDimension));
    }

    #[test]
    fn complementarity_matches_quadruple_definition() {
        let perms = all_permutations(4);
        for a in &perms {
            for b in &perms {
                assert_eq!(is_complementary(a, b).unwrap(), complementary_by_quadruples(a, b), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn complementarity_examples() {
        let id = Permutation::identity(3).unwrap();
        assert!(!is_complementary(&id, &perm(&[1, 2, 0])).unwrap());
        assert!(is_complementary(&id, &Permutation::transposition(3, 1, 2).unwrap()).unwrap());

        let a = Permutation::from_transpositions(4, &[(0, 1)]).unwrap();
        let b = Permutation::from_transpositions(4, &[(2, 3)]).unwrap();
        assert!(is_complementary(&a, &b).unwrap());
        assert!(is_complementary(&id, &id).unwrap());
        assert!(is_complementary(&id, &Permutation::identity(4).unwrap()).is_err());
    }

    #[test]
    fn cycle_notation() {
        assert_eq!(Permutation::identity(3).unwrap().to_string(), "()");
        assert_eq!(perm(&[2, 0, 1]).to_string(), "(0 2 1)");
        assert_eq!(perm(&[1, 0, 3, 2]).to_string(), "(0 1)(2 3)");
        assert_eq!(Permutation::from_cycles(4, &[vec![0, 2, 1]]).unwrap(), perm(&[2, 0, 1, 3]));
        assert_eq!(perm(&[1, 0, 3, 2]).transpositions(), vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn serde_uses_the_map() {
        let p = perm(&[2, 0, 1]);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, "[2,0,1]");
        assert_eq!(serde_json::from_str::<Permutation>(&json).unwrap(), p);
        assert!(serde_json::from_str::<Permutation>("[0,0]").is_err());
    }
}
