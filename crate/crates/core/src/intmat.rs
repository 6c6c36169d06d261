//! Integer matrices with Hermite and Smith normal forms and saturated
//! kernels, all with unimodular transforms tracked.
//!
//! Only small matrices pass through here (symplectic 4x4 blocks, 2x4 pairing
//! matrices), so the textbook gcd-stepping algorithms are plenty.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::linalg::QMat;
use crate::number::QRat;
use crate::{Error, Result};

/// Dense integer matrix, row major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IMat {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IMat { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, BigInt::one());
        }
        m
    }

    pub fn from_rows_i64(rows: &[Vec<i64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|row| row.len()).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::domain("ragged rows in matrix constructor"));
        }
        Ok(IMat {
            rows: r,
            cols: c,
            data: rows.iter().flatten().map(|&v| BigInt::from(v)).collect(),
        })
    }

    pub fn from_rows(rows: Vec<Vec<BigInt>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|row| row.len()).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::domain("ragged rows in matrix constructor"));
        }
        Ok(IMat { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> Vec<BigInt> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn col(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self.at(i, j).clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.at(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "dimension mismatch in matrix product");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.at(i, j) + a * other.at(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut s = BigInt::zero();
                for j in 0..self.cols {
                    s += self.at(i, j) * &v[j];
                }
                s
            })
            .collect()
    }

    pub fn to_qmat(&self) -> QMat {
        let mut m = QMat::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.set(i, j, QRat::from_integer(self.at(i, j).clone()));
            }
        }
        m
    }

    pub fn rank(&self) -> usize {
        self.to_qmat().rank()
    }

    pub fn det(&self) -> BigInt {
        let d = self.to_qmat().det();
        assert!(d.is_integer());
        d.to_integer()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// `row[a] += f * row[b]`.
    fn add_row_multiple(&mut self, a: usize, b: usize, f: &BigInt) {
        for j in 0..self.cols {
            let v = self.at(a, j) + f * self.at(b, j);
            self.set(a, j, v);
        }
    }

    fn negate_row(&mut self, a: usize) {
        for j in 0..self.cols {
            let v = -self.at(a, j);
            self.set(a, j, v);
        }
    }

    /// Row Hermite normal form: returns `(h, u)` with `u * self = h`,
    /// `u` unimodular, `h` in row echelon form with positive pivots and
    /// entries above each pivot reduced into `[0, pivot)`.
    pub fn row_hnf(&self) -> (IMat, IMat) {
        let mut h = self.clone();
        let mut u = IMat::identity(self.rows);
        let mut r = 0;
        for c in 0..h.cols {
            if r == h.rows {
                break;
            }
            // Clear column c below row r by gcd steps.
            loop {
                let mut pivot: Option<usize> = None;
                for i in r..h.rows {
                    if !h.at(i, c).is_zero() {
                        pivot = match pivot {
                            Some(p) if h.at(p, c).abs() <= h.at(i, c).abs() => Some(p),
                            _ => Some(i),
                        };
                    }
                }
                let Some(p) = pivot else { break };
                h.swap_rows(r, p);
                u.swap_rows(r, p);
                let mut done = true;
                for i in r + 1..h.rows {
                    if h.at(i, c).is_zero() {
                        continue;
                    }
                    let q = -h.at(i, c).div_floor(h.at(r, c));
                    h.add_row_multiple(i, r, &q);
                    u.add_row_multiple(i, r, &q);
                    if !h.at(i, c).is_zero() {
                        done = false;
                    }
                }
                if done {
                    break;
                }
            }
            if h.at(r, c).is_zero() {
                continue;
            }
            if h.at(r, c).is_negative() {
                h.negate_row(r);
                u.negate_row(r);
            }
            // Reduce entries above the pivot into [0, pivot).
            for i in 0..r {
                let q = -h.at(i, c).div_floor(h.at(r, c));
                if !q.is_zero() {
                    h.add_row_multiple(i, r, &q);
                    u.add_row_multiple(i, r, &q);
                }
            }
            r += 1;
        }
        (h, u)
    }

    /// Basis of the saturated integer kernel `{x : self * x = 0}`.
    ///
    /// The rows of the unimodular transform that map the transpose onto its
    /// HNF and land on zero rows are exactly such a basis.
    pub fn kernel(&self) -> Vec<Vec<BigInt>> {
        let t = self.transpose();
        let (h, u) = t.row_hnf();
        let mut basis = Vec::new();
        for i in 0..h.rows {
            if (0..h.cols).all(|j| h.at(i, j).is_zero()) {
                basis.push(u.row(i));
            }
        }
        basis
    }

    /// Smith normal form: `(u, s, v)` with `u * self * v = s`, `u`, `v`
    /// unimodular, `s` diagonal with `s[0][0] | s[1][1] | ...`, diagonal
    /// entries nonnegative.
    pub fn snf(&self) -> (IMat, IMat, IMat) {
        let mut s = self.clone();
        let mut u = IMat::identity(self.rows);
        let mut v = IMat::identity(self.cols);
        let n = self.rows.min(self.cols);
        for t in 0..n {
            'pivot: loop {
                // Find the smallest nonzero entry in the trailing block.
                let mut best: Option<(usize, usize)> = None;
                for i in t..s.rows {
                    for j in t..s.cols {
                        if !s.at(i, j).is_zero() {
                            best = match best {
                                Some((bi, bj))
                                    if s.at(bi, bj).abs() <= s.at(i, j).abs() =>
                                {
                                    Some((bi, bj))
                                }
                                _ => Some((i, j)),
                            };
                        }
                    }
                }
                let Some((bi, bj)) = best else { break 'pivot };
                s.swap_rows(t, bi);
                u.swap_rows(t, bi);
                s.swap_cols_with(&mut v, t, bj);
                // Clear row and column t.
                let mut dirty = false;
                for i in t + 1..s.rows {
                    if !s.at(i, t).is_zero() {
                        let q = -s.at(i, t).div_floor(s.at(t, t));
                        s.add_row_multiple(i, t, &q);
                        u.add_row_multiple(i, t, &q);
                        if !s.at(i, t).is_zero() {
                            dirty = true;
                        }
                    }
                }
                for j in t + 1..s.cols {
                    if !s.at(t, j).is_zero() {
                        let q = -s.at(t, j).div_floor(s.at(t, t));
                        s.add_col_multiple(&mut v, j, t, &q);
                        if !s.at(t, j).is_zero() {
                            dirty = true;
                        }
                    }
                }
                if dirty {
                    continue 'pivot;
                }
                // Row and column clear; enforce divisibility of the rest.
                let mut offender = None;
                'scan: for i in t + 1..s.rows {
                    for j in t + 1..s.cols {
                        if !(s.at(i, j) % s.at(t, t)).is_zero() {
                            offender = Some(i);
                            break 'scan;
                        }
                    }
                }
                match offender {
                    Some(i) => {
                        s.add_row_multiple(t, i, &BigInt::one());
                        u.add_row_multiple(t, i, &BigInt::one());
                        continue 'pivot;
                    }
                    None => break 'pivot,
                }
            }
            if s.at(t, t).is_negative() {
                s.negate_row(t);
                u.negate_row(t);
            }
        }
        (u, s, v)
    }

    fn swap_cols_with(&mut self, v: &mut IMat, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
        for i in 0..v.rows {
            v.data.swap(i * v.cols + a, i * v.cols + b);
        }
    }

    /// `col[a] += f * col[b]`, mirrored on the right transform `v`.
    fn add_col_multiple(&mut self, v: &mut IMat, a: usize, b: usize, f: &BigInt) {
        for i in 0..self.rows {
            let val = self.at(i, a) + f * self.at(i, b);
            self.set(i, a, val);
        }
        for i in 0..v.rows {
            let val = v.at(i, a) + f * v.at(i, b);
            v.set(i, a, val);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_imat(rng: &mut StdRng, rows: usize, cols: usize) -> IMat {
        let rows_data: Vec<Vec<i64>> = (0..rows)
            .map(|_| (0..cols).map(|_| rng.gen_range(-8..=8)).collect())
            .collect();
        IMat::from_rows_i64(&rows_data).unwrap()
    }

    fn is_unimodular(m: &IMat) -> bool {
        m.nrows() == m.ncols() && m.det().abs() == BigInt::one()
    }

    #[test]
    fn hnf_has_transform_and_echelon_shape() {
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..40 {
            let rows = rng.gen_range(1..6);
            let cols = rng.gen_range(1..6);
            let a = random_imat(&mut rng, rows, cols);
            let (h, u) = a.row_hnf();
            assert!(is_unimodular(&u));
            assert_eq!(u.mul(&a), h);
            // Pivots move strictly right; entries above pivots reduced.
            let mut last_pivot: i64 = -1;
            for i in 0..h.nrows() {
                let Some(p) = (0..h.ncols()).find(|&j| !h.at(i, j).is_zero()) else {
                    // All-zero rows come last.
                    for i2 in i..h.nrows() {
                        assert!((0..h.ncols()).all(|j| h.at(i2, j).is_zero()));
                    }
                    break;
                };
                assert!((p as i64) > last_pivot);
                last_pivot = p as i64;
                assert!(h.at(i, p).is_positive());
                for i2 in 0..i {
                    assert!(!h.at(i2, p).is_negative() && h.at(i2, p) < h.at(i, p));
                }
            }
        }
    }

    #[test]
    fn kernel_vectors_annihilate_and_saturate() {
        let mut rng = StdRng::seed_from_u64(19);
        for _ in 0..40 {
            let rows = rng.gen_range(1..5);
            let cols = rng.gen_range(1..6);
            let a = random_imat(&mut rng, rows, cols);
            let ker = a.kernel();
            assert_eq!(ker.len(), a.ncols() - a.rank());
            for x in &ker {
                for entry in a.mul_vec(x) {
                    assert!(entry.is_zero());
                }
            }
            if !ker.is_empty() {
                let km = IMat::from_rows(ker.clone()).unwrap();
                // The basis spans a saturated sublattice: all invariant
                // factors are 1.
                let (_, s, _) = km.snf();
                for t in 0..km.nrows().min(km.ncols()) {
                    if t < km.rank() {
                        assert_eq!(s.at(t, t), &BigInt::one());
                    }
                }
                assert_eq!(km.rank(), ker.len());
            }
        }
    }

    #[test]
    fn snf_diagonal_with_divisibility_chain() {
        let mut rng = StdRng::seed_from_u64(29);
        for _ in 0..40 {
            let rows = rng.gen_range(1..6);
            let cols = rng.gen_range(1..6);
            let a = random_imat(&mut rng, rows, cols);
            let (u, s, v) = a.snf();
            assert!(is_unimodular(&u));
            assert!(is_unimodular(&v));
            assert_eq!(u.mul(&a).mul(&v), s);
            for i in 0..s.nrows() {
                for j in 0..s.ncols() {
                    if i != j {
                        assert!(s.at(i, j).is_zero());
                    }
                }
            }
            let n = rows.min(cols);
            for t in 0..n {
                assert!(!s.at(t, t).is_negative());
                if t + 1 < n && !s.at(t + 1, t + 1).is_zero() {
                    assert!(
                        !s.at(t, t).is_zero(),
                        "zero invariant factor before a nonzero one"
                    );
                    assert!((s.at(t + 1, t + 1) % s.at(t, t)).is_zero());
                }
            }
        }
    }

    #[test]
    fn snf_of_known_matrix() {
        // Classic example: [[2, 4, 4], [-6, 6, 12], [10, -4, -16]] has
        // invariant factors 2, 6, 12.
        let a = IMat::from_rows_i64(&[
            vec![2, 4, 4],
            vec![-6, 6, 12],
            vec![10, -4, -16],
        ])
        .unwrap();
        let (_, s, _) = a.snf();
        assert_eq!(s.at(0, 0), &BigInt::from(2));
        assert_eq!(s.at(1, 1), &BigInt::from(6));
        assert_eq!(s.at(2, 2), &BigInt::from(12));
    }
}
