//! Rational symplectic 4x4 matrices and coset machinery for level changes.
//!
//! The degree-2 symplectic group acts through 4x4 matrices `g` satisfying
//! `g' J g = J`, where `J` is the standard alternating form built from
//! 2x2 blocks as `[[0, -I], [I, 0]]`.  For a level `N`, the paramodular
//! group of that level consists of the rational symplectic matrices that
//! stabilize the reference lattice `Z + Z + Z + NZ`; concretely, entries are
//! integral except that the (2,4)-entry may have denominator `N`, while the
//! (1,2), (3,2), (4,1), (4,2), (4,3) entries must be divisible by `N`.  The
//! integral points of that group form the stabilizer subgroup used for coset
//! enumeration.
//!
//! Three explicit coset constructions live here, all needed by the operator
//! that averages a form at level `N*q` down to level `N`:
//!
//! * [`p3_reps`] — representatives of the integral-stabilizer quotient
//!   between levels `N` and `N*q`, parametrized by the projective space
//!   `P^3(Z/q)`; there are `1 + q + q^2 + q^3` of them.
//! * [`klingen_column_reps`] — representatives of the quotient of the full
//!   paramodular group by its integral points, parametrized by `P^1(Z/N)`
//!   through an SL2 embedding; there are `N * prod_{p|N} (1 + 1/p)` of them.
//! * [`decompose`] — the factorization `g = kappa * u` of a rational
//!   symplectic matrix into a paramodular stabilizer element `kappa` and a
//!   block-upper-triangular (Siegel parabolic) factor `u`, which exists for
//!   every `g` when the level is squarefree.
//!
//! All arithmetic is exact: matrices carry `BigRational` entries and the
//! lattice work inside [`decompose`] runs over arbitrary-precision integers.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::intmat::IMat;
use crate::number::{is_prime, is_squarefree, prime_factors, qq, QRat};
use crate::{Error, Result};

/// Exact rational 2x2 matrix, used for the blocks of a parabolic factor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mat2q {
    e: [[QRat; 2]; 2],
}

impl Mat2q {
    pub fn from_rows(rows: [[QRat; 2]; 2]) -> Self {
        Mat2q { e: rows }
    }

    pub fn from_rows_i64(rows: [[i64; 2]; 2]) -> Self {
        Mat2q {
            e: rows.map(|r| r.map(qq)),
        }
    }

    pub fn identity() -> Self {
        Mat2q::from_rows_i64([[1, 0], [0, 1]])
    }

    pub fn at(&self, i: usize, j: usize) -> &QRat {
        &self.e[i][j]
    }

    pub fn mul(&self, other: &Mat2q) -> Mat2q {
        let mut e = std::array::from_fn(|_| std::array::from_fn(|_| QRat::zero()));
        for (i, row) in self.e.iter().enumerate() {
            for j in 0..2 {
                let mut acc = QRat::zero();
                for (k, x) in row.iter().enumerate() {
                    acc += x * &other.e[k][j];
                }
                e[i][j] = acc;
            }
        }
        Mat2q { e }
    }

    pub fn transpose(&self) -> Mat2q {
        Mat2q {
            e: std::array::from_fn(|i| std::array::from_fn(|j| self.e[j][i].clone())),
        }
    }

    pub fn det(&self) -> QRat {
        &self.e[0][0] * &self.e[1][1] - &self.e[0][1] * &self.e[1][0]
    }

    pub fn trace(&self) -> QRat {
        &self.e[0][0] + &self.e[1][1]
    }

    pub fn is_integral(&self) -> bool {
        self.e.iter().flatten().all(|x| x.is_integer())
    }
}

/// Exact rational 4x4 matrix with symplectic-group predicates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mat4 {
    e: [[QRat; 4]; 4],
}

impl Mat4 {
    pub fn zero() -> Self {
        Mat4 {
            e: std::array::from_fn(|_| std::array::from_fn(|_| QRat::zero())),
        }
    }

    pub fn identity() -> Self {
        let mut m = Mat4::zero();
        for i in 0..4 {
            m.e[i][i] = QRat::one();
        }
        m
    }

    pub fn from_rows(rows: [[QRat; 4]; 4]) -> Self {
        Mat4 { e: rows }
    }

    pub fn from_rows_i64(rows: [[i64; 4]; 4]) -> Self {
        Mat4 {
            e: rows.map(|r| r.map(qq)),
        }
    }

    /// The defining alternating form `[[0, -I], [I, 0]]` in 2x2 blocks.
    pub fn standard_form() -> Self {
        Mat4::from_rows_i64([
            [0, 0, -1, 0],
            [0, 0, 0, -1],
            [1, 0, 0, 0],
            [0, 1, 0, 0],
        ])
    }

    pub fn at(&self, i: usize, j: usize) -> &QRat {
        &self.e[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: QRat) {
        self.e[i][j] = v;
    }

    pub fn col(&self, j: usize) -> [QRat; 4] {
        std::array::from_fn(|i| self.e[i][j].clone())
    }

    /// The 2x2 block whose upper-left corner sits at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize) -> Mat2q {
        Mat2q {
            e: std::array::from_fn(|i| std::array::from_fn(|j| self.e[r0 + i][c0 + j].clone())),
        }
    }

    pub fn mul(&self, other: &Mat4) -> Mat4 {
        let mut out = Mat4::zero();
        for (i, row) in self.e.iter().enumerate() {
            for j in 0..4 {
                let mut acc = QRat::zero();
                for (k, x) in row.iter().enumerate() {
                    acc += x * &other.e[k][j];
                }
                out.e[i][j] = acc;
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat4 {
        Mat4 {
            e: std::array::from_fn(|i| std::array::from_fn(|j| self.e[j][i].clone())),
        }
    }

    /// Inverse of a symplectic matrix, computed exactly as `-J g' J`.
    ///
    /// Only valid when `self` is symplectic; callers that are unsure should
    /// check [`Mat4::is_symplectic`] first.
    pub fn symplectic_inverse(&self) -> Mat4 {
        let j = Mat4::standard_form();
        let mut m = j.mul(&self.transpose()).mul(&j);
        for row in m.e.iter_mut() {
            for x in row.iter_mut() {
                *x = -std::mem::take(x);
            }
        }
        m
    }

    pub fn is_integral(&self) -> bool {
        self.e.iter().flatten().all(|x| x.is_integer())
    }

    pub fn is_symplectic(&self) -> bool {
        let j = Mat4::standard_form();
        self.transpose().mul(&j).mul(self) == j
    }

    pub fn is_sp4_z(&self) -> bool {
        self.is_integral() && self.is_symplectic()
    }

    /// Membership in the paramodular group of the given level: symplectic,
    /// stabilizing the lattice `Z + Z + Z + (level)Z`.
    pub fn is_in_paramodular(&self, level: i64) -> bool {
        if level < 1 || !self.is_symplectic() {
            return false;
        }
        let n = qq(level);
        for i in 0..4 {
            for j in 0..4 {
                let x = &self.e[i][j];
                let ok = match (i, j) {
                    // Denominator N is allowed only in the (2,4) slot.
                    (1, 3) => (x * &n).is_integer(),
                    // These five slots must be divisible by N.
                    (0, 1) | (2, 1) | (3, 0) | (3, 1) | (3, 2) => (x / &n).is_integer(),
                    _ => x.is_integer(),
                };
                if !ok {
                    return false;
                }
            }
        }
        true
    }

    /// Membership in the integral points of the paramodular group.
    pub fn is_in_gamma0_prime(&self, level: i64) -> bool {
        self.is_integral() && self.is_in_paramodular(level)
    }

    /// Symplectic with vanishing lower-left 2x2 block, i.e. an element of the
    /// Siegel parabolic subgroup (stabilizer of the plane spanned by the
    /// first two coordinate vectors).
    pub fn is_siegel_parabolic(&self) -> bool {
        self.is_symplectic()
            && [(2, 0), (2, 1), (3, 0), (3, 1)]
                .iter()
                .all(|&(i, j)| self.e[i][j].is_zero())
    }
}

/// Alternating pairing `x' J y` of two integer 4-vectors.
///
/// The same formula serves rows (`x J y'`) and columns (`x' J y`) because
/// the form is its own negative transpose.
fn pair(x: &[BigInt], y: &[BigInt]) -> BigInt {
    &x[2] * &y[0] + &x[3] * &y[1] - &x[0] * &y[2] - &x[1] * &y[3]
}

/// Extended gcd over a slice: returns `(g, c)` with `sum c_i v_i = g >= 0`
/// and `g` the gcd of the entries.
fn ext_gcd_combo(v: &[BigInt]) -> (BigInt, Vec<BigInt>) {
    let mut g = BigInt::zero();
    let mut coeffs = vec![BigInt::zero(); v.len()];
    for (i, x) in v.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        if g.is_zero() {
            coeffs[i] = if x.is_negative() {
                -BigInt::one()
            } else {
                BigInt::one()
            };
            g = x.abs();
            continue;
        }
        let eg = g.extended_gcd(x);
        for c in coeffs.iter_mut() {
            *c *= &eg.x;
        }
        coeffs[i] = eg.y;
        g = eg.gcd;
    }
    if g.is_negative() {
        g = -g;
        for c in coeffs.iter_mut() {
            *c = -std::mem::take(c);
        }
    }
    (g, coeffs)
}

/// Completes a primitive integer row to an integral symplectic matrix having
/// that row at the bottom.
///
/// The construction solves `<r2, r4> = -1` by extended gcd, picks a basis
/// vector of the rank-2 kernel orthogonal to `r2` and `r4` for `r3`, solves
/// `<rho, r3> = -1`, and corrects `rho` by multiples of `r2` and `r4` to kill
/// the remaining pairings.  When the bottom row is `(aN, bN, cN, d)` the
/// result automatically lies in the integral paramodular stabilizer of level
/// `N`: the symplectic row relations force the divisibility of the remaining
/// constrained entries.
pub fn complete_bottom_row(row: &[i64; 4]) -> Result<Mat4> {
    let r4: Vec<BigInt> = row.iter().map(|&x| BigInt::from(x)).collect();
    let content = r4.iter().fold(BigInt::zero(), |acc, e| acc.gcd(e));
    if content != BigInt::one() {
        return Err(Error::domain(format!(
            "bottom row {row:?} is not primitive (content {content})"
        )));
    }

    // x . w4 = <x, r4> for any row x; primitivity of r4 makes w4 primitive.
    let w4 = vec![-&r4[2], -&r4[3], r4[0].clone(), r4[1].clone()];
    let (g, c) = ext_gcd_combo(&w4);
    debug_assert!(g.is_one());
    let r2: Vec<BigInt> = c.iter().map(|x| -x).collect();

    let u2 = vec![-&r2[2], -&r2[3], r2[0].clone(), r2[1].clone()];
    let constraints = IMat::from_rows(vec![u2, w4])?;
    let kernel = constraints.kernel();
    if kernel.len() != 2 {
        return Err(Error::verification(
            "perpendicular space of a symplectic pair has wrong rank",
        ));
    }
    let r3 = kernel[0].clone();

    let w3 = vec![-&r3[2], -&r3[3], r3[0].clone(), r3[1].clone()];
    let (g3, c3) = ext_gcd_combo(&w3);
    if !g3.is_one() {
        return Err(Error::verification(
            "kernel basis vector is not primitive",
        ));
    }
    let rho: Vec<BigInt> = c3.iter().map(|x| -x).collect();

    let p4 = pair(&rho, &r4);
    let p2 = pair(&rho, &r2);
    let r1: Vec<BigInt> = (0..4)
        .map(|k| &rho[k] + &p4 * &r2[k] - &p2 * &r4[k])
        .collect();

    let mut m = Mat4::zero();
    for (i, r) in [&r1, &r2, &r3, &r4].into_iter().enumerate() {
        for (j, x) in r.iter().enumerate() {
            m.set(i, j, QRat::from(x.clone()));
        }
    }
    if !m.is_symplectic() {
        return Err(Error::verification("bottom-row completion is not symplectic"));
    }
    Ok(m)
}

/// Normal forms for the points of `P^3(Z/q)` in a fixed scan order:
/// `(1,b,c,d)`, then `(0,1,c,d)`, then `(0,0,1,d)`, then `(0,0,0,1)`.
fn p3_normal_forms(q: i64) -> Vec<[i64; 4]> {
    let mut out = Vec::new();
    for b in 0..q {
        for c in 0..q {
            for d in 0..q {
                out.push([1, b, c, d]);
            }
        }
    }
    for c in 0..q {
        for d in 0..q {
            out.push([0, 1, c, d]);
        }
    }
    for d in 0..q {
        out.push([0, 0, 1, d]);
    }
    out.push([0, 0, 0, 1]);
    out
}

/// Coset representatives, between the integral paramodular stabilizers of
/// levels `N` and `N*q`, indexed by `P^3(Z/q)` through bottom rows.
///
/// Each class `(a, b, c, d)` is realized as the bottom row
/// `(aN, bN, cN, delta)` with `delta = d mod q` shifted until it is coprime
/// to `N`, then divided by its content and completed to an integral
/// symplectic matrix.  Distinct classes give distinct cosets and every coset
/// arises, so the list has `1 + q + q^2 + q^3` entries.
pub fn p3_reps(q: i64, level: i64) -> Result<Vec<Mat4>> {
    if q < 2 || !is_prime(q as u64) {
        return Err(Error::domain(format!("auxiliary modulus {q} must be prime")));
    }
    if level < 1 {
        return Err(Error::domain(format!("level {level} must be positive")));
    }
    if level % q == 0 {
        return Err(Error::domain(format!(
            "auxiliary prime {q} must not divide the level {level}"
        )));
    }

    let mut out = Vec::new();
    for nf in p3_normal_forms(q) {
        let [a, b, c, d] = nf;
        let delta = (0..=level)
            .map(|m| d + m * q)
            .find(|delta| delta.gcd(&level) == 1)
            .ok_or_else(|| Error::verification("no unit residue found for bottom row"))?;
        let mut row = [a * level, b * level, c * level, delta];
        let content = row.iter().fold(0i64, |acc, &e| acc.gcd(&e));
        for e in row.iter_mut() {
            *e /= content;
        }
        let m = complete_bottom_row(&row)?;
        if !m.is_in_gamma0_prime(level) {
            return Err(Error::verification(
                "projective representative left the level subgroup",
            ));
        }
        out.push(m);
    }
    Ok(out)
}

/// Embeds an SL2(Z) matrix `[[a, b], [c, d]]` into the paramodular group of
/// the given level, acting on the second coordinate pair:
/// rows `(1,0,0,0), (0,a,0,b/N), (0,0,1,0), (0,cN,0,d)`.
pub fn embed_sl2(level: i64, m: [[i64; 2]; 2]) -> Result<Mat4> {
    let [[a, b], [c, d]] = m;
    if a * d - b * c != 1 {
        return Err(Error::domain(format!(
            "matrix [[{a}, {b}], [{c}, {d}]] does not have determinant 1"
        )));
    }
    let mut g = Mat4::identity();
    g.set(1, 1, qq(a));
    g.set(1, 3, qq(b) / qq(level));
    g.set(3, 1, qq(c * level));
    g.set(3, 3, qq(d));
    Ok(g)
}

/// Lifts a residue pair `(a, b)` that is primitive mod `n` to a coprime
/// integer pair congruent to it, scanning offsets in a fixed order.
fn coprime_lift(a: i64, b: i64, n: i64) -> (i64, i64) {
    for total in 0.. {
        for i in 0..=total {
            let j = total - i;
            let x = a + i * n;
            let y = b + j * n;
            if x.gcd(&y) == 1 {
                return (x, y);
            }
        }
    }
    unreachable!("a primitive residue pair always lifts to a coprime pair");
}

/// Coset representatives for the full paramodular group of a level over its
/// integral points, one per point of `P^1(Z/N)`.
///
/// The class of an SL2(Z) matrix with top row `(a, b)` depends exactly on
/// `(a mod N, b mod N)` up to unit scalars, so the representatives are
/// enumerated by canonicalizing each primitive residue pair to its
/// lexicographic minimum over units, lifting to a coprime integer pair,
/// completing to SL2(Z), and embedding.  The count is
/// `N * prod_{p | N} (1 + 1/p)`.
pub fn klingen_column_reps(level: i64) -> Result<Vec<Mat4>> {
    if level < 1 {
        return Err(Error::domain(format!("level {level} must be positive")));
    }
    if level == 1 {
        return Ok(vec![Mat4::identity()]);
    }

    let units: Vec<i64> = (1..level).filter(|u| u.gcd(&level) == 1).collect();
    let mut classes = BTreeSet::new();
    for a in 0..level {
        for b in 0..level {
            if a.gcd(&b).gcd(&level) != 1 {
                continue;
            }
            let canon = units
                .iter()
                .map(|&u| ((u * a) % level, (u * b) % level))
                .min()
                .expect("unit group is nonempty");
            classes.insert(canon);
        }
    }

    let mut out = Vec::with_capacity(classes.len());
    for (a, b) in classes {
        let (top_a, top_b) = coprime_lift(a, b, level);
        let eg = top_a.extended_gcd(&top_b);
        // top_a * x + top_b * y = 1, giving determinant 1 below.
        let (x, y) = if eg.gcd == 1 {
            (eg.x, eg.y)
        } else {
            (-eg.x, -eg.y)
        };
        let g = embed_sl2(level, [[top_a, top_b], [-y, x]])?;
        if !g.is_in_paramodular(level) {
            return Err(Error::verification(
                "embedded representative left the paramodular group",
            ));
        }
        out.push(g);
    }
    Ok(out)
}

/// Index of the integral points inside the full paramodular group:
/// `N * prod_{p | N} (1 + 1/p)` for squarefree `N`.
pub fn klingen_index(level: i64) -> i64 {
    if level == 1 {
        return 1;
    }
    let mut idx = level;
    for p in prime_factors(level) {
        idx = idx / p * (p + 1);
    }
    idx
}

/// Factors a rational symplectic matrix as `kappa * u` with `kappa` in the
/// paramodular group of the (squarefree) level and `u` block upper
/// triangular.
///
/// The plane spanned by the first two columns of `g` is totally isotropic;
/// its intersection `L` with the reference lattice is computed exactly as a
/// saturated kernel, and the Smith normal form of the pairing between `L`
/// and the lattice produces bases `(A1, A2)` of `L` and `(b1, b2)` of a
/// complementary pair with the pairing pattern of the standard symplectic
/// basis.  Those four vectors are the columns of `kappa` (the last divided
/// by the level), and `u = kappa^{-1} g`.  For squarefree levels the pairing
/// always has elementary divisors `(1, level)`; any other outcome is
/// reported as an error rather than patched over.
pub fn decompose(g: &Mat4, level: i64) -> Result<(Mat4, Mat4)> {
    if level < 1 || !is_squarefree(level) {
        return Err(Error::domain(format!(
            "factorization level {level} must be positive and squarefree"
        )));
    }
    if !g.is_symplectic() {
        return Err(Error::domain("matrix to factor is not symplectic"));
    }
    if g.is_in_paramodular(level) {
        return Ok((g.clone(), Mat4::identity()));
    }
    if g.is_siegel_parabolic() {
        return Ok((Mat4::identity(), g.clone()));
    }

    // Lattice basis scaling: coordinates xi correspond to points T*xi of the
    // reference lattice Z + Z + Z + (level)Z.
    let mut t = IMat::identity(4);
    t.set(3, 3, BigInt::from(level));
    let j_int = IMat::from_rows_i64(&[
        vec![0, 0, -1, 0],
        vec![0, 0, 0, -1],
        vec![1, 0, 0, 0],
        vec![0, 1, 0, 0],
    ])?;
    let jt = j_int.mul(&t);

    // A lattice point T*xi lies on the plane spanned by the first two
    // columns of g exactly when it pairs to zero with both; clear
    // denominators to get integer constraint rows.
    let mut w_rows = Vec::new();
    for idx in 0..2 {
        let v = g.col(idx);
        let mut entries = Vec::new();
        let mut denom_lcm = BigInt::one();
        for jcol in 0..4 {
            let mut acc = QRat::zero();
            for (k, vk) in v.iter().enumerate() {
                acc += vk * QRat::from(jt.at(k, jcol).clone());
            }
            denom_lcm = denom_lcm.lcm(acc.denom());
            entries.push(acc);
        }
        let mut row: Vec<BigInt> = entries
            .iter()
            .map(|x| (x * QRat::from(denom_lcm.clone())).to_integer())
            .collect();
        let content = row.iter().fold(BigInt::zero(), |acc, e| acc.gcd(e));
        if content.is_zero() {
            return Err(Error::verification("spanning column of the plane is zero"));
        }
        for e in row.iter_mut() {
            *e /= &content;
        }
        w_rows.push(row);
    }

    let kernel = IMat::from_rows(w_rows)?.kernel();
    if kernel.len() != 2 {
        return Err(Error::verification(
            "plane-lattice intersection has wrong rank",
        ));
    }

    // Pairing of the intersection lattice against the reference basis.
    let mut f = IMat::zeros(4, 2);
    for (jcol, base) in kernel.iter().enumerate() {
        for (i, x) in base.iter().enumerate() {
            f.set(i, jcol, x.clone());
        }
    }
    let tf = t.mul(&f);
    let p = tf.transpose().mul(&jt);
    let (u, s, v) = p.snf();
    let d1 = s.at(0, 0).clone();
    let d2 = s.at(1, 1).clone();
    if d1 != BigInt::one() || d2 != BigInt::from(level) {
        return Err(Error::verification(format!(
            "plane pairing has elementary divisors ({d1}, {d2}), need (1, {level})"
        )));
    }

    // New basis of the intersection lattice adapted to the divisors, plus
    // the dual pair read off from the column operations.
    let combo = |row: usize| -> Vec<BigInt> {
        (0..4)
            .map(|k| u.at(row, 0) * &kernel[0][k] + u.at(row, 1) * &kernel[1][k])
            .collect()
    };
    let a1 = t.mul_vec(&combo(0));
    let a2 = t.mul_vec(&combo(1));
    let mu1 = t.mul_vec(&v.col(0));
    let mu2 = t.mul_vec(&v.col(1));
    let b1: Vec<BigInt> = mu1.iter().map(|x| -x).collect();
    let mut b2: Vec<BigInt> = mu2.iter().map(|x| -x).collect();
    // <b1, A1> = +1, so subtracting <b1, b2> * A1 clears the cross pairing.
    let cross = pair(&b1, &b2);
    for (k, e) in b2.iter_mut().enumerate() {
        *e -= &cross * &a1[k];
    }

    let big_level = BigInt::from(level);
    let mut kappa = Mat4::zero();
    for k in 0..4 {
        kappa.set(k, 0, QRat::from(a1[k].clone()));
        kappa.set(k, 1, QRat::from(a2[k].clone()));
        kappa.set(k, 2, QRat::from(b1[k].clone()));
        kappa.set(k, 3, QRat::new(b2[k].clone(), big_level.clone()));
    }
    let upper = kappa.symplectic_inverse().mul(g);
    if !kappa.is_in_paramodular(level) || !upper.is_siegel_parabolic() || kappa.mul(&upper) != *g {
        return Err(Error::verification("factorization postcondition failed"));
    }
    Ok((kappa, upper))
}

/// Shrinks the parabolic factor of a decomposition `g = kappa * upper`
/// without changing the coset `K(level) * upper`, hence without changing the
/// value of a slashed form.
///
/// Block-diagonal matrices `[[A, 0], [0, A^{-T}]]` with `A` integral, of
/// determinant `+-1`, and upper-right entry divisible by the level lie in
/// the paramodular group; absorbing one into `kappa` replaces the
/// lower-right block `d` of `upper` by `O d`, where `O = A'` ranges over the
/// transposed congruence group (lower-left entry divisible by the level).
/// The generators act on the rows of `d` as `row1 += k * row2` and
/// `row2 += k * level * row1`, so a constrained Gauss reduction makes the
/// rows short.  Raw factors from the Smith-normal-form construction can have
/// entries in the billions; the slash action reads Fourier coefficients at
/// indices grown quadratically in those entries, so without this step the
/// averaging operator would demand absurd source precision.
fn reduce_parabolic_factor(kappa: &Mat4, upper: &Mat4, level: i64) -> Result<(Mat4, Mat4)> {
    let r1 = [upper.at(2, 2).clone(), upper.at(2, 3).clone()];
    let r2 = [upper.at(3, 2).clone(), upper.at(3, 3).clone()];
    let dot = |x: &[QRat; 2], y: &[QRat; 2]| &x[0] * &y[0] + &x[1] * &y[1];
    let big_level = BigInt::from(level);
    // A row vector `beta * level * r1 + delta * r2`, tracked by its integer
    // coordinate pair `(beta, delta)`.
    let from_coords = |be: &BigInt, de: &BigInt| -> [QRat; 2] {
        let bq = QRat::from(be * &big_level);
        let dq = QRat::from(de.clone());
        [&bq * &r1[0] + &dq * &r2[0], &bq * &r1[1] + &dq * &r2[1]]
    };
    let round_to_int = |x: &QRat| -> BigInt {
        (x + QRat::new(BigInt::one(), BigInt::from(2)))
            .floor()
            .to_integer()
    };

    // Gauss-reduce the lattice of admissible second rows.  Swaps are fine
    // here: any unimodular change of the coordinate pair is allowed, the
    // congruence condition is captured by the `level * r1` generator.
    let mut c1 = (BigInt::one(), BigInt::zero());
    let mut c2 = (BigInt::zero(), BigInt::one());
    let mut v1 = from_coords(&c1.0, &c1.1);
    let mut v2 = from_coords(&c2.0, &c2.1);
    for _ in 0..200 {
        if dot(&v1, &v1) > dot(&v2, &v2) {
            std::mem::swap(&mut c1, &mut c2);
            std::mem::swap(&mut v1, &mut v2);
        }
        let k = round_to_int(&(dot(&v2, &v1) / dot(&v1, &v1)));
        if k.is_zero() {
            break;
        }
        let kq = QRat::from(k.clone());
        v2 = [&v2[0] - &kq * &v1[0], &v2[1] - &kq * &v1[1]];
        c2 = (&c2.0 - &k * &c1.0, &c2.1 - &k * &c1.1);
    }

    // Shortest admissible second row whose coordinates extend to a
    // determinant-one operation: need gcd(delta, level * beta) = 1.  The
    // identity operation contributes the pair (0, 1), so the search space is
    // never empty; small combinations of the reduced basis give a short one.
    let mut best: Option<(QRat, BigInt, BigInt)> = None;
    for a in -5i64..=5 {
        for b in -5i64..=5 {
            if a == 0 && b == 0 {
                continue;
            }
            let be = a * &c1.0 + b * &c2.0;
            let de = a * &c1.1 + b * &c2.1;
            if (&de).gcd(&(&be * &big_level)) != BigInt::one() {
                continue;
            }
            let v = from_coords(&be, &de);
            let norm = dot(&v, &v);
            if best.as_ref().map_or(true, |(bn, _, _)| norm < *bn) {
                best = Some((norm, be, de));
            }
        }
    }
    let (_, beta, delta) = best.unwrap_or((QRat::zero(), BigInt::zero(), BigInt::one()));

    // Complete to a determinant-one operation and shear-reduce its first row.
    let ext = delta.extended_gcd(&(&beta * &big_level));
    let (alpha, gamma_c) = (ext.x, -ext.y);
    let s2 = from_coords(&beta, &delta);
    let s1 = [
        QRat::from(alpha.clone()) * &r1[0] + QRat::from(gamma_c.clone()) * &r2[0],
        QRat::from(alpha.clone()) * &r1[1] + QRat::from(gamma_c.clone()) * &r2[1],
    ];
    let mut row1_coords = (alpha, gamma_c);
    let k = round_to_int(&(dot(&s1, &s2) / dot(&s2, &s2)));
    if !k.is_zero() {
        row1_coords = (
            &row1_coords.0 - &k * &beta * &big_level,
            &row1_coords.1 - &k * &delta,
        );
    }
    let op = [
        [QRat::from(row1_coords.0), QRat::from(row1_coords.1)],
        [QRat::from(&beta * &big_level), QRat::from(delta)],
    ];

    // gamma^{-1} = [[(O^{-1})', 0], [0, O]]; absorbing gamma into kappa
    // replaces the parabolic factor's lower-right block by O times it.
    let odet = &op[0][0] * &op[1][1] - &op[0][1] * &op[1][0];
    let mut gamma_inv = Mat4::zero();
    gamma_inv.set(0, 0, &op[1][1] / &odet);
    gamma_inv.set(1, 0, -(&op[0][1] / &odet));
    gamma_inv.set(0, 1, -(&op[1][0] / &odet));
    gamma_inv.set(1, 1, &op[0][0] / &odet);
    for i in 0..2 {
        for j in 0..2 {
            gamma_inv.set(2 + i, 2 + j, op[i][j].clone());
        }
    }
    let gamma = gamma_inv.symplectic_inverse();
    let new_kappa = kappa.mul(&gamma);
    let new_upper = gamma_inv.mul(upper);
    if !new_kappa.is_in_paramodular(level) || !new_upper.is_siegel_parabolic() {
        return Err(Error::verification(
            "parabolic factor reduction left the required groups",
        ));
    }
    Ok((new_kappa, new_upper))
}

/// One coset term of the level-lowering average: the factorization
/// `g = kappa * upper` of a representative, with the blocks of `upper` that
/// the slash action reads off.
#[derive(Clone, Debug)]
pub struct TraceCoset {
    /// Stabilizer-side factor; lies in the paramodular group of `level * q`.
    pub kappa: Mat4,
    /// Siegel-parabolic factor the form is slashed by.
    pub upper: Mat4,
    /// Lower-right 2x2 block of `upper`.
    pub d_block: Mat2q,
    /// Upper-right 2x2 block of `upper`.
    pub b_block: Mat2q,
}

/// Builds the full set of parabolic coset factors for averaging a form at
/// level `level * q` down to `level`: products of the projective
/// representatives with the column representatives, each factored through
/// [`decompose`] at the composite level.
pub fn coset_reps_for_trace(level: i64, q: i64) -> Result<Vec<TraceCoset>> {
    if !is_squarefree(level) {
        return Err(Error::domain(format!("level {level} must be squarefree")));
    }
    let g1s = p3_reps(q, level)?;
    let g2s = klingen_column_reps(level)?;
    let mut out = Vec::with_capacity(g1s.len() * g2s.len());
    for g1 in &g1s {
        for g2 in &g2s {
            let g = g1.mul(g2);
            let (kappa, upper) = decompose(&g, level * q)?;
            let (kappa, upper) = reduce_parabolic_factor(&kappa, &upper, level * q)?;
            let d_block = upper.block(2, 2);
            let b_block = upper.block(0, 2);
            out.push(TraceCoset {
                kappa,
                upper,
                d_block,
                b_block,
            });
        }
    }
    Ok(out)
}
