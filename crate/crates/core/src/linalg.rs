//! Dense exact linear algebra over the rationals and over prime fields.
//!
//! Everything here is plain Gaussian elimination with exact arithmetic: no
//! pivoting heuristics are needed because there is no rounding. The `F_p`
//! variant exists because rational elimination on large coefficient matrices
//! is slow and a rank computed mod p is still a valid *lower* bound (hence an
//! upper bound for the dimension estimates built on corank).

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::number::{divisors, is_prime, mul_mod, pow_mod, qq, qrat_mod, QRat};
use crate::{Error, Result};

/// Dense matrix over the rationals, row major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QMat {
    rows: usize,
    cols: usize,
    data: Vec<QRat>,
}

impl QMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        QMat { rows, cols, data: vec![QRat::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, QRat::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<QRat>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|row| row.len()).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::domain("ragged rows in matrix constructor"));
        }
        Ok(QMat { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> &QRat {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: QRat) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[QRat] {
        &self.data[i * self.cols..(i + 1) * self.cols]
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

    pub fn mul_vec(&self, v: &[QRat]) -> Vec<QRat> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut s = QRat::zero();
                for j in 0..self.cols {
                    s += self.at(i, j) * &v[j];
                }
                s
            })
            .collect()
    }

    pub fn trace(&self) -> QRat {
        assert_eq!(self.rows, self.cols);
        let mut t = QRat::zero();
        for i in 0..self.rows {
            t += self.at(i, i);
        }
        t
    }

    fn add_diag(&mut self, c: &QRat) {
        assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            let v = self.at(i, i) + c;
            self.set(i, i, v);
        }
    }

    /// Reduced row echelon form together with the pivot columns.
    pub fn rref(&self) -> (QMat, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| !m.at(i, c).is_zero()) else {
                continue;
            };
            m.swap_rows(r, p);
            let inv = QRat::one() / m.at(r, c);
            for j in c..m.cols {
                let v = m.at(r, j) * &inv;
                m.set(r, j, v);
            }
            for i in 0..m.rows {
                if i != r && !m.at(i, c).is_zero() {
                    let f = m.at(i, c).clone();
                    for j in c..m.cols {
                        let v = m.at(i, j) - &f * m.at(r, j);
                        m.set(i, j, v);
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of the right nullspace.
    pub fn nullspace(&self) -> Vec<Vec<QRat>> {
        let (r, pivots) = self.rref();
        let mut basis = Vec::new();
        let pivot_set: std::collections::BTreeSet<usize> = pivots.iter().copied().collect();
        for free in 0..self.cols {
            if pivot_set.contains(&free) {
                continue;
            }
            let mut v = vec![QRat::zero(); self.cols];
            v[free] = QRat::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -r.at(row, free).clone();
            }
            basis.push(v);
        }
        basis
    }

    /// Any solution of `self * x = b`, or `None` if inconsistent.
    pub fn solve(&self, b: &[QRat]) -> Option<Vec<QRat>> {
        assert_eq!(self.rows, b.len());
        let mut aug = Self::zeros(self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                aug.set(i, j, self.at(i, j).clone());
            }
            aug.set(i, self.cols, b[i].clone());
        }
        let (r, pivots) = aug.rref();
        if pivots.contains(&self.cols) {
            return None; // pivot in the augmented column
        }
        let mut x = vec![QRat::zero(); self.cols];
        for (row, &pc) in pivots.iter().enumerate() {
            x[pc] = r.at(row, self.cols).clone();
        }
        Some(x)
    }

    pub fn det(&self) -> QRat {
        assert_eq!(self.rows, self.cols, "determinant of non-square matrix");
        let mut m = self.clone();
        let mut det = QRat::one();
        for c in 0..m.cols {
            let Some(p) = (c..m.rows).find(|&i| !m.at(i, c).is_zero()) else {
                return QRat::zero();
            };
            if p != c {
                m.swap_rows(c, p);
                det = -det;
            }
            det *= m.at(c, c);
            let inv = QRat::one() / m.at(c, c);
            for i in c + 1..m.rows {
                if m.at(i, c).is_zero() {
                    continue;
                }
                let f = m.at(i, c) * &inv;
                for j in c..m.cols {
                    let v = m.at(i, j) - &f * m.at(c, j);
                    m.set(i, j, v);
                }
            }
        }
        det
    }

    /// Characteristic polynomial, ascending coefficients, monic of degree n.
    /// Computed by the Faddeev–LeVerrier trace recurrence, which stays exact
    /// over the rationals.
    pub fn char_poly(&self) -> Vec<QRat> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut coeffs = vec![QRat::zero(); n + 1];
        coeffs[n] = QRat::one();
        let mut m = Self::identity(n);
        for k in 1..=n {
            m = self.mul(&m);
            let c = -(m.trace() / qq(k as i64));
            coeffs[n - k] = c.clone();
            m.add_diag(&c);
        }
        coeffs
    }
}

/// Dense matrix over `F_p` for a prime `p < 2^32` (entries and pivots fit
/// comfortably; products use 128-bit intermediates).
#[derive(Clone, Debug)]
pub struct FpMat {
    p: u64,
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl FpMat {
    pub fn zeros(p: u64, rows: usize, cols: usize) -> Self {
        assert!(is_prime(p), "FpMat modulus must be prime");
        assert!(p < (1 << 32), "FpMat modulus must fit 32 bits");
        FpMat { p, rows, cols, data: vec![0; rows * cols] }
    }

    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        self.data[i * self.cols + j] = v % self.p;
    }

    pub fn at(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.cols + j]
    }

    /// Reduce a rational matrix mod p. Errors if any denominator vanishes
    /// mod p.
    pub fn from_qmat(m: &QMat, p: u64) -> Result<Self> {
        let mut f = Self::zeros(p, m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = qrat_mod(m.at(i, j), p).ok_or_else(|| {
                    Error::domain(format!("denominator divisible by {p} at ({i}, {j})"))
                })?;
                f.set(i, j, v);
            }
        }
        Ok(f)
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        let p = m.p;
        let mut rank = 0;
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(pivot) = (r..m.rows).find(|&i| m.at(i, c) != 0) else {
                continue;
            };
            if pivot != r {
                for j in 0..m.cols {
                    m.data.swap(r * m.cols + j, pivot * m.cols + j);
                }
            }
            let inv = pow_mod(m.at(r, c), p - 2, p);
            for i in r + 1..m.rows {
                let f = m.at(i, c);
                if f == 0 {
                    continue;
                }
                let scale = mul_mod(f, inv, p);
                for j in c..m.cols {
                    let v = (m.at(i, j) + p - mul_mod(scale, m.at(r, j), p)) % p;
                    m.set(i, j, v);
                }
            }
            rank += 1;
            r += 1;
        }
        rank
    }
}

/// Integer roots of a monic integer polynomial (ascending coefficients,
/// leading 1). Roots are found by divisor search on the constant term, so
/// the result is complete for monic integer input; non-integral input
/// returns an error rather than a wrong answer.
pub fn integer_roots(poly: &[QRat]) -> Result<Vec<BigInt>> {
    if poly.is_empty() || poly.last().unwrap() != &QRat::one() {
        return Err(Error::domain("root search expects a monic polynomial"));
    }
    if poly.iter().any(|c| !c.is_integer()) {
        return Err(Error::domain(
            "root search expects integer coefficients (the operator must \
             preserve an integral structure)",
        ));
    }
    let ints: Vec<BigInt> = poly.iter().map(|c| c.to_integer()).collect();
    let eval = |x: &BigInt| -> BigInt {
        let mut acc = BigInt::zero();
        for c in ints.iter().rev() {
            acc = acc * x + c;
        }
        acc
    };
    let mut roots = Vec::new();
    if ints[0].is_zero() {
        roots.push(BigInt::zero());
    }
    let c0 = ints
        .iter()
        .find(|c| !c.is_zero())
        .expect("monic polynomial has a nonzero coefficient")
        .abs();
    if let Some(c0_small) = c0.to_i64() {
        for d in divisors(c0_small.max(1)) {
            for cand in [BigInt::from(d), BigInt::from(-d)] {
                if eval(&cand).is_zero() && !roots.contains(&cand) {
                    roots.push(cand);
                }
            }
        }
    } else {
        // Constant term too large to factor; scan a modest window and report
        // what is found. Callers treat missing roots as "did not split".
        for d in -10_000i64..=10_000 {
            let cand = BigInt::from(d);
            if eval(&cand).is_zero() && !roots.contains(&cand) {
                roots.push(cand);
            }
        }
    }
    roots.sort();
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_qmat(rng: &mut StdRng, rows: usize, cols: usize) -> QMat {
        let mut m = QMat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, qq(rng.gen_range(-6..=6)));
            }
        }
        m
    }

    #[test]
    fn rref_nullspace_and_rank_are_consistent() {
        let mut rng = StdRng::seed_from_u64(71);
        for _ in 0..40 {
            let rows = rng.gen_range(1..7);
            let cols = rng.gen_range(1..7);
            let m = random_qmat(&mut rng, rows, cols);
            let rank = m.rank();
            let ns = m.nullspace();
            assert_eq!(rank + ns.len(), cols);
            for v in &ns {
                for entry in m.mul_vec(v) {
                    assert!(entry.is_zero());
                }
            }
            // Nullspace vectors are linearly independent.
            if !ns.is_empty() {
                let nm = QMat::from_rows(ns).unwrap();
                assert_eq!(nm.rank(), cols - rank);
            }
        }
    }

    #[test]
    fn solve_round_trips_on_consistent_systems() {
        let mut rng = StdRng::seed_from_u64(73);
        for _ in 0..40 {
            let rows = rng.gen_range(1..6);
            let cols = rng.gen_range(1..6);
            let m = random_qmat(&mut rng, rows, cols);
            let x: Vec<QRat> = (0..cols).map(|_| qq(rng.gen_range(-4..=4))).collect();
            let b = m.mul_vec(&x);
            let sol = m.solve(&b).expect("constructed system must be consistent");
            assert_eq!(m.mul_vec(&sol), b);
        }
        // An inconsistent system.
        let m = QMat::from_rows(vec![vec![qq(1), qq(1)], vec![qq(2), qq(2)]]).unwrap();
        assert!(m.solve(&[qq(1), qq(3)]).is_none());
    }

    #[test]
    fn determinant_matches_cofactor_expansion() {
        let mut rng = StdRng::seed_from_u64(79);
        for _ in 0..30 {
            let m = random_qmat(&mut rng, 3, 3);
            let brute = m.at(0, 0) * &(m.at(1, 1) * m.at(2, 2) - m.at(1, 2) * m.at(2, 1))
                - m.at(0, 1) * &(m.at(1, 0) * m.at(2, 2) - m.at(1, 2) * m.at(2, 0))
                + m.at(0, 2) * &(m.at(1, 0) * m.at(2, 1) - m.at(1, 1) * m.at(2, 0));
            assert_eq!(m.det(), brute);
        }
    }

    #[test]
    fn char_poly_satisfies_cayley_hamilton() {
        let mut rng = StdRng::seed_from_u64(83);
        for _ in 0..10 {
            let n = rng.gen_range(1..6);
            let m = random_qmat(&mut rng, n, n);
            let cp = m.char_poly();
            assert_eq!(cp.len(), n + 1);
            assert_eq!(cp[n], QRat::one());
            // p(M) = 0.
            let mut acc = QMat::zeros(n, n);
            let mut power = QMat::identity(n);
            for c in &cp {
                for i in 0..n {
                    for j in 0..n {
                        let v = acc.at(i, j) + c * power.at(i, j);
                        acc.set(i, j, v);
                    }
                }
                power = m.mul(&power);
            }
            assert_eq!(acc, QMat::zeros(n, n));
            // Constant coefficient is (-1)^n det.
            let sign = if n % 2 == 0 { qq(1) } else { qq(-1) };
            assert_eq!(cp[0], sign * m.det());
        }
    }

    #[test]
    fn fp_rank_agrees_with_rational_rank_on_small_entries() {
        let mut rng = StdRng::seed_from_u64(89);
        for _ in 0..30 {
            let rows = rng.gen_range(1..8);
            let cols = rng.gen_range(1..8);
            let m = random_qmat(&mut rng, rows, cols);
            let f = FpMat::from_qmat(&m, 1_000_003).unwrap();
            assert_eq!(f.rank(), m.rank());
        }
    }

    #[test]
    fn integer_root_search() {
        // (x - 2)(x + 3)(x^2 + 1) = x^4 + x^3 - 5x^2 + x - 6
        let poly = vec![qq(-6), qq(1), qq(-5), qq(1), qq(1)];
        let roots = integer_roots(&poly).unwrap();
        assert_eq!(roots, vec![BigInt::from(-3), BigInt::from(2)]);
        // x^2 with root 0.
        let poly = vec![qq(0), qq(0), qq(1)];
        assert_eq!(integer_roots(&poly).unwrap(), vec![BigInt::zero()]);
        assert!(integer_roots(&[qq_half(), qq(1)]).is_err());
    }

    fn qq_half() -> QRat {
        crate::number::qq_frac(1, 2)
    }
}
