//! Exact arithmetic with roots of unity.
//!
//! The averaging operator that lowers the level of a form multiplies Fourier
//! coefficients by phases `e(x) = exp(2 pi i x)` at rational `x`.  Summed
//! over a full set of cosets the phases must conspire to give a rational
//! number, and we want that cancellation verified exactly rather than
//! floated through.  A [`CyclotomicValue`] stores a formal combination
//! `sum_j c_j zeta_M^j` with rational coefficients, where `zeta_M` is the
//! order-`M` root `e(1/M)`.  Addition rescales both operands to the least
//! common order; multiplication convolves exponents modulo the order.
//!
//! Deciding whether a combination is rational reduces the coefficient
//! polynomial modulo the `M`-th cyclotomic polynomial: the powers
//! `zeta_M^0, ..., zeta_M^{phi(M)-1}` are linearly independent over the
//! rationals, so the value is rational exactly when the remainder is a
//! constant.  [`cyclotomic_polynomial`] computes the modulus by exact
//! division of `x^M - 1` by the lower-order cyclotomic factors.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::number::{divisors, QRat};
use crate::{Error, Result};

/// A rational linear combination of the `order`-th roots of unity.
#[derive(Clone, Debug)]
pub struct CyclotomicValue {
    order: i64,
    coeffs: Vec<QRat>,
}

impl CyclotomicValue {
    pub fn zero() -> Self {
        CyclotomicValue {
            order: 1,
            coeffs: vec![QRat::zero()],
        }
    }

    pub fn one() -> Self {
        CyclotomicValue::rational(QRat::one())
    }

    pub fn rational(x: QRat) -> Self {
        CyclotomicValue {
            order: 1,
            coeffs: vec![x],
        }
    }

    /// The root of unity `zeta_order^exp`, with `exp` reduced modulo
    /// `order`.
    pub fn root_of_unity(order: i64, exp: i64) -> Self {
        assert!(order >= 1, "order must be positive");
        let mut coeffs = vec![QRat::zero(); order as usize];
        coeffs[exp.rem_euclid(order) as usize] = QRat::one();
        CyclotomicValue { order, coeffs }
    }

    /// The phase `e(x) = exp(2 pi i x)`: a root of unity whose order is the
    /// denominator of `x`.
    pub fn e(x: &QRat) -> Self {
        let order = i64::try_from(x.denom()).expect("phase denominator fits in i64");
        let exp_big = x.numer().mod_floor(x.denom());
        let exp = i64::try_from(&exp_big).expect("reduced numerator fits in i64");
        CyclotomicValue::root_of_unity(order, exp)
    }

    pub fn order(&self) -> i64 {
        self.order
    }

    /// Rewrites the combination at a larger order (a multiple of the current
    /// one): `zeta_M^j = zeta_L^{j L / M}`.
    fn rescaled(&self, new_order: i64) -> Self {
        assert!(new_order % self.order == 0);
        if new_order == self.order {
            return self.clone();
        }
        let step = (new_order / self.order) as usize;
        let mut coeffs = vec![QRat::zero(); new_order as usize];
        for (j, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                coeffs[j * step] = c.clone();
            }
        }
        CyclotomicValue {
            order: new_order,
            coeffs,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let order = self.order.lcm(&other.order);
        let mut out = self.rescaled(order);
        let rhs = other.rescaled(order);
        for (a, b) in out.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *a += b;
        }
        out
    }

    /// In-place addition; cheap when both operands share an order, as they
    /// do in an accumulation loop run at a precomputed common order.
    pub fn add_assign(&mut self, other: &Self) {
        let order = self.order.lcm(&other.order);
        if order != self.order {
            *self = self.rescaled(order);
        }
        let rhs = other.rescaled(order);
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *a += b;
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let order = self.order.lcm(&other.order);
        let lhs = self.rescaled(order);
        let rhs = other.rescaled(order);
        let n = order as usize;
        let mut coeffs = vec![QRat::zero(); n];
        for (i, a) in lhs.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                coeffs[(i + j) % n] += a * b;
            }
        }
        CyclotomicValue { order, coeffs }
    }

    pub fn scale(&self, k: &QRat) -> Self {
        CyclotomicValue {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    /// Remainder of the coefficient polynomial modulo the cyclotomic
    /// polynomial of the order; degree is below `phi(order)`.
    fn reduced(&self) -> Vec<QRat> {
        let phi: Vec<QRat> = cyclotomic_polynomial(self.order)
            .into_iter()
            .map(QRat::from)
            .collect();
        poly_rem_monic(&self.coeffs, &phi)
    }

    /// The exact rational value, if the combination collapses to one.
    pub fn try_rational(&self) -> Option<QRat> {
        let r = self.reduced();
        if r[1..].iter().all(|c| c.is_zero()) {
            Some(r[0].clone())
        } else {
            None
        }
    }

    /// Like [`CyclotomicValue::try_rational`], but an irrational outcome is
    /// an error labeled with the caller's context.
    pub fn expect_rational(&self, context: &str) -> Result<QRat> {
        self.try_rational().ok_or_else(|| {
            Error::verification(format!(
                "{context}: root-of-unity combination of order {} did not collapse to a rational",
                self.order
            ))
        })
    }

    pub fn is_zero_value(&self) -> bool {
        self.try_rational().is_some_and(|x| x.is_zero())
    }
}

/// Remainder of `num` (coefficients ascending) modulo a monic `den`.
fn poly_rem_monic(num: &[QRat], den: &[QRat]) -> Vec<QRat> {
    debug_assert!(den.last().is_some_and(|c| c.is_one()));
    let dd = den.len() - 1;
    let mut r = num.to_vec();
    for i in (dd..r.len()).rev() {
        let f = std::mem::replace(&mut r[i], QRat::zero());
        if f.is_zero() {
            continue;
        }
        for (k, dc) in den[..dd].iter().enumerate() {
            let delta = dc * &f;
            r[i - dd + k] -= delta;
        }
    }
    r.truncate(dd.max(1));
    while r.len() < dd.max(1) {
        r.push(QRat::zero());
    }
    r
}

fn poly_mul(a: &[QRat], b: &[QRat]) -> Vec<QRat> {
    let mut out = vec![QRat::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Exact quotient `num / den` for a monic divisor; errors if the division
/// leaves a remainder.
fn poly_div_exact(num: &[QRat], den: &[QRat]) -> Result<Vec<QRat>> {
    debug_assert!(den.last().is_some_and(|c| c.is_one()));
    let dd = den.len() - 1;
    if num.len() <= dd {
        return Err(Error::verification("polynomial division underflow"));
    }
    let mut r = num.to_vec();
    let mut quot = vec![QRat::zero(); r.len() - dd];
    for i in (dd..r.len()).rev() {
        let f = std::mem::replace(&mut r[i], QRat::zero());
        if f.is_zero() {
            continue;
        }
        quot[i - dd] = f.clone();
        for (k, dc) in den[..dd].iter().enumerate() {
            let delta = dc * &f;
            r[i - dd + k] -= delta;
        }
    }
    if r.iter().any(|c| !c.is_zero()) {
        return Err(Error::verification("polynomial division left a remainder"));
    }
    Ok(quot)
}

/// Coefficients (ascending, integral, monic) of the `m`-th cyclotomic
/// polynomial, computed by exact division of `x^m - 1` by the cyclotomic
/// polynomials of the proper divisors of `m`.
pub fn cyclotomic_polynomial(m: i64) -> Vec<BigInt> {
    assert!(m >= 1, "cyclotomic polynomial needs m >= 1");
    let mut table: std::collections::BTreeMap<i64, Vec<QRat>> = std::collections::BTreeMap::new();
    for d in divisors(m) {
        let mut num = vec![QRat::zero(); d as usize + 1];
        num[0] = -QRat::one();
        num[d as usize] = QRat::one();
        let mut den = vec![QRat::one()];
        for e in divisors(d) {
            if e < d {
                den = poly_mul(&den, &table[&e]);
            }
        }
        let quot = poly_div_exact(&num, &den)
            .expect("x^d - 1 is divisible by the lower cyclotomic factors");
        table.insert(d, quot);
    }
    table[&m]
        .iter()
        .map(|c| {
            assert!(c.is_integer(), "cyclotomic coefficients are integers");
            c.to_integer()
        })
        .collect()
}
