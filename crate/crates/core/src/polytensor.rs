//! Compressed Kronecker powers.
//!
//! The `i`-th compressed power of `x ∈ R^N` holds one entry per monomial of
//! degree `i`, i.e. one entry per multiset of `i` mode indices. Multisets are
//! stored as non-decreasing tuples and enumerated in lexicographic order, so
//! for `N = 2, i = 2` the order is `x0*x0, x0*x1, x1*x1`. Every operator matrix
//! in this crate uses that convention.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Version tag of the monomial ordering, recorded in serialized models.
pub const ORDERING_VERSION: &str = "sorted-lex-v1";

/// Largest `N^i` for which the dense selection/duplication patterns may be
/// materialized.
pub const KRONECKER_SIZE_LIMIT: u128 = 1 << 22;

/// A multiset of mode indices, stored as a non-decreasing tuple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultisetIndex {
    entries: Vec<usize>,
}

impl MultisetIndex {
    /// Builds a multiset from arbitrary indices; the entries are sorted.
    pub fn new(mut entries: Vec<usize>) -> Self {
        entries.sort_unstable();
        Self { entries }
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn degree(&self) -> usize {
        self.entries.len()
    }

    /// Largest mode index, or `None` for the empty multiset.
    pub fn max_mode(&self) -> Option<usize> {
        self.entries.last().copied()
    }

    /// Number of distinct orderings of the entries: `i! / prod(r_j!)`.
    pub fn multiplicity(&self) -> usize {
        multiplicity(&self.entries)
    }

    /// Position of this multiset in the canonical enumeration over `base_dim`
    /// symbols.
    pub fn rank(&self, base_dim: usize) -> Result<usize> {
        rank_sorted(&self.entries, base_dim)
    }
}

/// A compressed power `x^i` together with the degree and base dimension it was
/// built for.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedPower {
    pub degree: usize,
    pub base_dim: usize,
    pub values: DVector<f64>,
}

/// `binomial(N + i - 1, i)`, the number of monomials of degree `i` in `N`
/// variables.
pub fn compressed_dim(base_dim: usize, degree: usize) -> Result<usize> {
    if base_dim == 0 || degree == 0 {
        return Err(Error::InvalidArgument(format!(
            "compressed_dim needs N >= 1 and i >= 1, got N = {base_dim}, i = {degree}"
        )));
    }
    multiset_count(base_dim, degree).ok_or(Error::Overflow("compressed_dim"))
}

/// Number of multisets of size `k` over `s` symbols, `None` on overflow.
/// `k = 0` gives 1.
fn multiset_count(s: usize, k: usize) -> Option<usize> {
    if k == 0 {
        return Some(1);
    }
    if s == 0 {
        return Some(0);
    }
    // binomial(s + k - 1, k) computed incrementally; each partial product is an
    // exact binomial coefficient so the division is exact.
    let mut acc: u128 = 1;
    for j in 0..k as u128 {
        acc = acc.checked_mul(s as u128 + j)? / (j + 1);
        if acc > usize::MAX as u128 {
            return None;
        }
    }
    usize::try_from(acc).ok()
}

/// Sum of `compressed_dim(n, i)` for `i = 1..=degree`.
pub fn total_compressed_dim(base_dim: usize, degree: usize) -> Result<usize> {
    (1..=degree).try_fold(0usize, |acc, i| {
        acc.checked_add(compressed_dim(base_dim, i)?)
            .ok_or(Error::Overflow("total_compressed_dim"))
    })
}

/// All multisets of size `degree` over `base_dim` symbols in canonical order.
pub fn enumerate_multisets(base_dim: usize, degree: usize) -> Result<Vec<MultisetIndex>> {
    let count = compressed_dim(base_dim, degree)?;
    let mut out = Vec::with_capacity(count);
    let mut current = vec![0usize; degree];
    loop {
        out.push(MultisetIndex {
            entries: current.clone(),
        });
        // advance to the lexicographic successor among non-decreasing tuples
        let Some(pos) = (0..degree).rev().find(|&p| current[p] + 1 < base_dim) else {
            break;
        };
        let next = current[pos] + 1;
        for slot in &mut current[pos..] {
            *slot = next;
        }
    }
    debug_assert_eq!(out.len(), count);
    Ok(out)
}

/// Canonical position of a sorted tuple among all multisets of its size.
fn rank_sorted(entries: &[usize], base_dim: usize) -> Result<usize> {
    let degree = entries.len();
    let mut rank = 0usize;
    let mut prev = 0usize;
    for (pos, &value) in entries.iter().enumerate() {
        if value >= base_dim || value < prev {
            return Err(Error::InvalidArgument(format!(
                "multiset {entries:?} is not a sorted tuple over {base_dim} symbols"
            )));
        }
        let remaining = degree - pos - 1;
        for smaller in prev..value {
            rank += multiset_count(base_dim - smaller, remaining)
                .ok_or(Error::Overflow("multiset rank"))?;
        }
        prev = value;
    }
    Ok(rank)
}

/// Inverse of [`MultisetIndex::rank`].
pub fn unrank(rank: usize, base_dim: usize, degree: usize) -> Result<MultisetIndex> {
    let total = compressed_dim(base_dim, degree)?;
    if rank >= total {
        return Err(Error::InvalidArgument(format!(
            "rank {rank} out of range for {total} multisets"
        )));
    }
    let mut entries = Vec::with_capacity(degree);
    let mut left = rank;
    let mut value = 0usize;
    for pos in 0..degree {
        let remaining = degree - pos - 1;
        loop {
            let block = multiset_count(base_dim - value, remaining)
                .ok_or(Error::Overflow("multiset unrank"))?;
            if left < block {
                break;
            }
            left -= block;
            value += 1;
        }
        entries.push(value);
    }
    Ok(MultisetIndex { entries })
}

fn multiplicity(sorted: &[usize]) -> usize {
    let mut result = 1usize;
    let mut run = 0usize;
    for (pos, value) in sorted.iter().enumerate() {
        if pos > 0 && sorted[pos - 1] == *value {
            run += 1;
        } else {
            run = 1;
        }
        // i!/prod(r!) built as prod over positions of (pos+1)/run
        result = result * (pos + 1) / run;
    }
    result
}

/// Number of distinct orderings of a multiset.
pub fn multiset_multiplicity(index: &MultisetIndex) -> usize {
    index.multiplicity()
}

/// The compressed power `x^i` as a [`CompressedPower`].
pub fn compressed_power(x: &DVector<f64>, degree: usize) -> Result<CompressedPower> {
    let len = compressed_dim(x.len(), degree)?;
    let mut values = DVector::zeros(len);
    fill_compressed_power(x.as_slice(), degree, values.as_mut_slice());
    Ok(CompressedPower {
        degree,
        base_dim: x.len(),
        values,
    })
}

/// Writes `x^i` into `out`, which must have length `compressed_dim(x.len(), i)`.
///
/// Entries are produced in canonical order by extending each degree-`(i-1)`
/// prefix with a last index no smaller than its own last index.
pub fn fill_compressed_power(x: &[f64], degree: usize, out: &mut [f64]) {
    let n = x.len();
    if degree == 1 {
        out.copy_from_slice(x);
        return;
    }
    let mut cursor = 0usize;
    fill_recursive(x, n, degree, 0, 1.0, out, &mut cursor);
    debug_assert_eq!(cursor, out.len());
}

fn fill_recursive(
    x: &[f64],
    n: usize,
    remaining: usize,
    start: usize,
    prefix: f64,
    out: &mut [f64],
    cursor: &mut usize,
) {
    if remaining == 1 {
        for &value in &x[start..n] {
            out[*cursor] = prefix * value;
            *cursor += 1;
        }
        return;
    }
    for idx in start..n {
        fill_recursive(x, n, remaining - 1, idx, prefix * x[idx], out, cursor);
    }
}

/// Stacked compressed powers `[x; x^2; ...; x^degree]`.
pub fn stacked_powers(x: &[f64], degree: usize) -> Result<Vec<f64>> {
    let total = total_compressed_dim(x.len(), degree)?;
    let mut out = vec![0.0; total];
    let mut offset = 0;
    for i in 1..=degree {
        let len = compressed_dim(x.len(), i)?;
        fill_compressed_power(x, i, &mut out[offset..offset + len]);
        offset += len;
    }
    Ok(out)
}

/// A sparse 0/1 matrix given by the positions of its ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroOnePattern {
    pub nrows: usize,
    pub ncols: usize,
    /// `(row, col)` positions of the ones, sorted by row.
    pub ones: Vec<(usize, usize)>,
}

impl ZeroOnePattern {
    pub fn mul_vec(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        crate::error::check_dim("ZeroOnePattern::mul_vec", self.ncols, v.len())?;
        let mut out = DVector::zeros(self.nrows);
        for &(r, c) in &self.ones {
            out[r] += v[c];
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for &(r, c) in &self.ones {
            m[(r, c)] = 1.0;
        }
        m
    }
}

fn kronecker_len(base_dim: usize, degree: usize) -> Result<usize> {
    let size = (base_dim as u128)
        .checked_pow(degree as u32)
        .ok_or(Error::Overflow("Kronecker power size"))?;
    if size > KRONECKER_SIZE_LIMIT {
        return Err(Error::SizeGuard {
            what: "full Kronecker power",
            size,
            limit: KRONECKER_SIZE_LIMIT,
        });
    }
    Ok(size as usize)
}

/// Digits of a full Kronecker position, most significant first.
fn kronecker_digits(mut pos: usize, base_dim: usize, degree: usize) -> Vec<usize> {
    let mut digits = vec![0; degree];
    for slot in digits.iter_mut().rev() {
        *slot = pos % base_dim;
        pos /= base_dim;
    }
    digits
}

/// Selection pattern `S` with `x^i = S (x ⊗ ... ⊗ x)`; row `α` picks the
/// Kronecker position of the sorted tuple `α`.
pub fn selection_matrix(base_dim: usize, degree: usize) -> Result<ZeroOnePattern> {
    let full = kronecker_len(base_dim, degree)?;
    let multisets = enumerate_multisets(base_dim, degree)?;
    let ones = multisets
        .iter()
        .enumerate()
        .map(|(row, alpha)| {
            let col = alpha
                .entries
                .iter()
                .fold(0usize, |acc, &a| acc * base_dim + a);
            (row, col)
        })
        .collect();
    Ok(ZeroOnePattern {
        nrows: multisets.len(),
        ncols: full,
        ones,
    })
}

/// Duplication pattern `D` with `x ⊗ ... ⊗ x = D x^i`.
pub fn duplication_matrix(base_dim: usize, degree: usize) -> Result<ZeroOnePattern> {
    let full = kronecker_len(base_dim, degree)?;
    let ncols = compressed_dim(base_dim, degree)?;
    let mut ones = Vec::with_capacity(full);
    for pos in 0..full {
        let mut digits = kronecker_digits(pos, base_dim, degree);
        digits.sort_unstable();
        ones.push((pos, rank_sorted(&digits, base_dim)?));
    }
    Ok(ZeroOnePattern {
        nrows: full,
        ncols,
        ones,
    })
}

/// Dense `x ⊗ ... ⊗ x` (`degree` factors). Test-scale helper.
pub fn kron_power(x: &DVector<f64>, degree: usize) -> Result<DVector<f64>> {
    kronecker_len(x.len(), degree)?;
    let mut acc = DVector::from_element(1, 1.0);
    for _ in 0..degree {
        acc = acc.kronecker(x);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tuples(list: &[MultisetIndex]) -> Vec<Vec<usize>> {
        list.iter().map(|m| m.entries().to_vec()).collect()
    }

    #[test]
    fn compressed_dim_examples() {
        assert_eq!(compressed_dim(3, 2).unwrap(), 6);
        assert_eq!(compressed_dim(7, 1).unwrap(), 7);
        assert_eq!(compressed_dim(128, 2).unwrap(), 8256);
        assert_eq!(compressed_dim(4096, 3).unwrap(), 11_461_636_096);
    }

    #[test]
    fn compressed_dim_reports_overflow() {
        assert!(matches!(
            compressed_dim(usize::MAX / 2, 40),
            Err(Error::Overflow(_))
        ));
        assert!(compressed_dim(0, 2).is_err());
        assert!(compressed_dim(3, 0).is_err());
    }

    #[test]
    fn enumeration_examples() {
        assert_eq!(
            tuples(&enumerate_multisets(2, 2).unwrap()),
            vec![vec![0, 0], vec![0, 1], vec![1, 1]]
        );
        assert_eq!(
            tuples(&enumerate_multisets(3, 1).unwrap()),
            vec![vec![0], vec![1], vec![2]]
        );
        assert_eq!(
            tuples(&enumerate_multisets(2, 3).unwrap()),
            vec![vec![0, 0, 0], vec![0, 0, 1], vec![0, 1, 1], vec![1, 1, 1]]
        );
    }

    #[test]
    fn compressed_power_examples() {
        let p = compressed_power(&DVector::from_vec(vec![1.0, 2.0]), 2).unwrap();
        assert_eq!(p.values.as_slice(), &[1.0, 2.0, 4.0]);
        let p = compressed_power(&DVector::from_vec(vec![1.0, 0.0, 2.0]), 2).unwrap();
        assert_eq!(p.values.as_slice(), &[1.0, 0.0, 2.0, 0.0, 0.0, 4.0]);
        let p = compressed_power(&DVector::from_vec(vec![1.5]), 4).unwrap();
        assert_eq!(p.values.as_slice(), &[1.5f64.powi(4)]);
        let x = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        assert_eq!(compressed_power(&x, 1).unwrap().values, x);
    }

    #[test]
    fn multiplicity_examples() {
        assert_eq!(MultisetIndex::new(vec![0, 0]).multiplicity(), 1);
        assert_eq!(MultisetIndex::new(vec![0, 1]).multiplicity(), 2);
        assert_eq!(MultisetIndex::new(vec![0, 0, 1]).multiplicity(), 3);
        assert_eq!(MultisetIndex::new(vec![2, 0, 1]).multiplicity(), 6);
        assert_eq!(MultisetIndex::new(vec![1, 1, 0, 0]).multiplicity(), 6);
    }

    #[test]
    fn selection_picks_sorted_representatives() {
        let sel = selection_matrix(2, 2).unwrap();
        assert_eq!(sel.ones, vec![(0, 0), (1, 1), (2, 3)]);
        let dup = duplication_matrix(2, 2).unwrap();
        let expected = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        );
        assert_eq!(dup.to_dense(), expected);
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let full = dup
            .mul_vec(&compressed_power(&x, 2).unwrap().values)
            .unwrap();
        assert_eq!(full.as_slice(), &[1.0, 2.0, 2.0, 4.0]);
    }

    #[test]
    fn selection_times_duplication_is_identity() {
        for (n, i) in [(2, 2), (3, 3), (4, 2), (3, 4)] {
            let prod = selection_matrix(n, i).unwrap().to_dense()
                * duplication_matrix(n, i).unwrap().to_dense();
            let dim = compressed_dim(n, i).unwrap();
            assert_eq!(prod, DMatrix::identity(dim, dim));
        }
    }

    #[test]
    fn duplication_columns_sum_to_multiplicity() {
        let dup = duplication_matrix(3, 3).unwrap().to_dense();
        for (col, alpha) in enumerate_multisets(3, 3).unwrap().iter().enumerate() {
            assert_eq!(dup.column(col).sum() as usize, alpha.multiplicity());
        }
    }

    #[test]
    fn size_guard_trips() {
        assert!(matches!(
            selection_matrix(4096, 3),
            Err(Error::SizeGuard { .. })
        ));
    }

    #[test]
    fn stacked_powers_layout() {
        let s = stacked_powers(&[2.0, 3.0], 2).unwrap();
        assert_eq!(s, vec![2.0, 3.0, 4.0, 6.0, 9.0]);
    }

    proptest! {
        #[test]
        fn selection_of_kronecker_is_compressed_power(
            n in 1usize..=8,
            degree in 1usize..=4,
            seed in proptest::collection::vec(-3.0f64..3.0, 8),
        ) {
            let x = DVector::from_iterator(n, seed.iter().copied().take(n));
            let sel = selection_matrix(n, degree).unwrap();
            let via_kron = sel.mul_vec(&kron_power(&x, degree).unwrap()).unwrap();
            let direct = compressed_power(&x, degree).unwrap().values;
            // the selected Kronecker entry multiplies the same factors in the
            // same order, so the equality is exact
            prop_assert_eq!(via_kron, direct);
        }

        #[test]
        fn rank_unrank_round_trip(n in 1usize..=9, degree in 1usize..=4) {
            let list = enumerate_multisets(n, degree).unwrap();
            prop_assert_eq!(list.len(), compressed_dim(n, degree).unwrap());
            for (pos, alpha) in list.iter().enumerate() {
                prop_assert_eq!(alpha.rank(n).unwrap(), pos);
                prop_assert_eq!(&unrank(pos, n, degree).unwrap(), alpha);
            }
            let total: usize = list.iter().map(|a| a.multiplicity()).sum();
            prop_assert_eq!(total, n.pow(degree as u32));
        }

        #[test]
        fn powers_are_homogeneous(
            c in -2.0f64..2.0,
            xs in proptest::collection::vec(-2.0f64..2.0, 1..6),
            degree in 1usize..=4,
        ) {
            let x = DVector::from_vec(xs);
            let scaled = compressed_power(&(&x * c), degree).unwrap().values;
            let base = compressed_power(&x, degree).unwrap().values * c.powi(degree as i32);
            for (a, b) in scaled.iter().zip(base.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }
}
