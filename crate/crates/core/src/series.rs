//! Exact two-variable Laurent series: the coefficient ring for everything
//! built here.
//!
//! Two storage conventions hold throughout the crate:
//!
//! * [`ZetaPoly`] keys are *doubled* exponents: key `r` holds the coefficient
//!   of `zeta^(r/2)`. Theta factors genuinely involve half-integral powers of
//!   `zeta`, and doubling keeps every key an integer.
//! * [`FourierSeries`] stores slices above a rational `q_offset`: the slice
//!   at step `s >= 0` multiplies `q^(q_offset + s)`. Slices exist for
//!   `0 <= s < prec`; the series is *unknown* from `q^(q_offset + prec)` on
//!   and identically zero below `q_offset`.
//!
//! All arithmetic tracks precision sharply: a product of series known to
//! `prec_a` and `prec_b` steps with valuations `v_a`, `v_b` is correct for
//! `min(prec_a + v_b, prec_b + v_a)` steps, and that is what gets recorded.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, ToPrimitive, Zero};

use crate::number::{factorial, qq, QRat};
use crate::{Error, Result};

/// Laurent polynomial in `zeta` over the rationals, with doubled exponents.
///
/// Zero coefficients are never stored, so structural equality is semantic
/// equality.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ZetaPoly {
    coeffs: BTreeMap<i64, QRat>,
}

impl ZetaPoly {
    pub fn zero() -> Self {
        ZetaPoly::default()
    }

    pub fn one() -> Self {
        ZetaPoly::monomial(0, qq(1))
    }

    /// `c * zeta^(exp2 / 2)`.
    pub fn monomial(exp2: i64, c: QRat) -> Self {
        let mut p = ZetaPoly::zero();
        p.add_to(exp2, &c);
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (i64, QRat)>>(terms: I) -> Self {
        let mut p = ZetaPoly::zero();
        for (e, c) in terms {
            p.add_to(e, &c);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficient of `zeta^(exp2 / 2)`.
    pub fn coeff(&self, exp2: i64) -> QRat {
        self.coeffs.get(&exp2).cloned().unwrap_or_else(QRat::zero)
    }

    /// Add `c * zeta^(exp2 / 2)`, pruning a coefficient that cancels to zero.
    pub fn add_to(&mut self, exp2: i64, c: &QRat) {
        if c.is_zero() {
            return;
        }
        let entry = self.coeffs.entry(exp2).or_insert_with(QRat::zero);
        *entry += c;
        if entry.is_zero() {
            self.coeffs.remove(&exp2);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &QRat)> {
        self.coeffs.iter().map(|(&e, c)| (e, c))
    }

    pub fn min_exp2(&self) -> Option<i64> {
        self.coeffs.keys().next().copied()
    }

    pub fn max_exp2(&self) -> Option<i64> {
        self.coeffs.keys().next_back().copied()
    }

    /// If the polynomial is a single term, that term.
    pub fn as_monomial(&self) -> Option<(i64, &QRat)> {
        if self.coeffs.len() == 1 {
            self.coeffs.iter().next().map(|(&e, c)| (e, c))
        } else {
            None
        }
    }

    pub fn scale(&mut self, c: &QRat) {
        if c.is_zero() {
            self.coeffs.clear();
            return;
        }
        for v in self.coeffs.values_mut() {
            *v *= c;
        }
    }

    pub fn scaled(&self, c: &QRat) -> Self {
        let mut p = self.clone();
        p.scale(c);
        p
    }

    /// Multiply by `zeta^(exp2 / 2)`, shifting every key.
    pub fn shifted(&self, exp2: i64) -> Self {
        ZetaPoly {
            coeffs: self.coeffs.iter().map(|(&e, c)| (e + exp2, c.clone())).collect(),
        }
    }

    /// Accumulate `a * b` into `self`.
    pub fn add_mul(&mut self, a: &ZetaPoly, b: &ZetaPoly) {
        for (ea, ca) in a.iter() {
            for (eb, cb) in b.iter() {
                self.add_to(ea + eb, &(ca * cb));
            }
        }
    }

    /// Value at `zeta = 1`: the sum of all coefficients.
    pub fn eval_at_one(&self) -> QRat {
        let mut s = QRat::zero();
        for c in self.coeffs.values() {
            s += c;
        }
        s
    }

    /// Exact Laurent division. Errors if `self` is not a multiple of `d`.
    pub fn div_exact(&self, d: &ZetaPoly) -> Result<ZetaPoly> {
        if self.is_zero() {
            return Ok(ZetaPoly::zero());
        }
        if d.is_zero() {
            return Err(Error::domain("zeta-polynomial division by zero"));
        }
        let dmin = d.min_exp2().unwrap();
        let dmax = d.max_exp2().unwrap();
        let dlead = d.coeff(dmin);
        // An exact quotient has exponents <= self.max - d.max; past that the
        // division cannot close and we bail out.
        let quot_max = self.max_exp2().unwrap() - dmax;
        let mut rem = self.clone();
        let mut quot = ZetaPoly::zero();
        while let Some(rmin) = rem.min_exp2() {
            let e = rmin - dmin;
            if e > quot_max {
                return Err(Error::domain("zeta-polynomial division is not exact"));
            }
            let c = rem.coeff(rmin) / &dlead;
            quot.add_to(e, &c);
            for (de, dc) in d.iter() {
                rem.add_to(e + de, &(-(&c * dc)));
            }
        }
        Ok(quot)
    }
}

impl std::ops::AddAssign<&ZetaPoly> for ZetaPoly {
    fn add_assign(&mut self, rhs: &ZetaPoly) {
        for (e, c) in rhs.iter() {
            self.add_to(e, c);
        }
    }
}

impl std::ops::SubAssign<&ZetaPoly> for ZetaPoly {
    fn sub_assign(&mut self, rhs: &ZetaPoly) {
        for (e, c) in rhs.iter() {
            self.add_to(e, &-c.clone());
        }
    }
}

impl std::ops::Add for &ZetaPoly {
    type Output = ZetaPoly;
    fn add(self, rhs: &ZetaPoly) -> ZetaPoly {
        let mut p = self.clone();
        p += rhs;
        p
    }
}

impl std::ops::Sub for &ZetaPoly {
    type Output = ZetaPoly;
    fn sub(self, rhs: &ZetaPoly) -> ZetaPoly {
        let mut p = self.clone();
        p -= rhs;
        p
    }
}

impl std::ops::Mul for &ZetaPoly {
    type Output = ZetaPoly;
    fn mul(self, rhs: &ZetaPoly) -> ZetaPoly {
        let mut p = ZetaPoly::zero();
        p.add_mul(self, rhs);
        p
    }
}

impl std::ops::Neg for &ZetaPoly {
    type Output = ZetaPoly;
    fn neg(self) -> ZetaPoly {
        self.scaled(&-qq(1))
    }
}

impl fmt::Display for ZetaPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.iter() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if e == 0 {
                write!(f, "{c}")?;
            } else if e % 2 == 0 {
                write!(f, "{c}*z^{}", e / 2)?;
            } else {
                write!(f, "{c}*z^({e}/2)")?;
            }
        }
        Ok(())
    }
}

/// Laurent series in `q` with [`ZetaPoly`] slices and a rational leading
/// exponent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FourierSeries {
    q_offset: QRat,
    terms: BTreeMap<i64, ZetaPoly>,
    prec: i64,
}

impl FourierSeries {
    /// The zero series, known through `q^(offset + prec)` exclusive.
    pub fn zero(q_offset: QRat, prec: i64) -> Self {
        assert!(prec >= 0, "negative precision");
        FourierSeries { q_offset, terms: BTreeMap::new(), prec }
    }

    /// The constant series 1.
    pub fn one(prec: i64) -> Self {
        Self::monomial(QRat::zero(), 0, qq(1), prec)
    }

    /// `c * q^q_exp * zeta^(zeta2 / 2)` known for `prec` steps past `q_exp`.
    pub fn monomial(q_exp: QRat, zeta2: i64, c: QRat, prec: i64) -> Self {
        let mut s = Self::zero(q_exp, prec);
        s.add_term(0, zeta2, &c);
        s
    }

    pub fn q_offset(&self) -> &QRat {
        &self.q_offset
    }

    pub fn prec(&self) -> i64 {
        self.prec
    }

    /// Absolute exponent below which the series is fully known.
    pub fn abs_prec(&self) -> QRat {
        &self.q_offset + qq(self.prec)
    }

    /// Smallest step carrying a nonzero slice; `prec` for the zero series.
    pub fn valuation_step(&self) -> i64 {
        self.terms.keys().next().copied().unwrap_or(self.prec)
    }

    pub fn is_zero_series(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn slice(&self, step: i64) -> Option<&ZetaPoly> {
        self.terms.get(&step)
    }

    pub fn iter_slices(&self) -> impl Iterator<Item = (i64, &ZetaPoly)> {
        self.terms.iter().map(|(&s, p)| (s, p))
    }

    /// Iterate all stored coefficients as `(step, zeta2, value)`.
    pub fn iter_coeffs(&self) -> impl Iterator<Item = (i64, i64, &QRat)> {
        self.terms
            .iter()
            .flat_map(|(&s, p)| p.iter().map(move |(e, c)| (s, e, c)))
    }

    pub fn set_slice(&mut self, step: i64, poly: ZetaPoly) {
        assert!((0..self.prec).contains(&step), "slice step out of range");
        if poly.is_zero() {
            self.terms.remove(&step);
        } else {
            self.terms.insert(step, poly);
        }
    }

    /// Add `c * q^(q_offset + step) * zeta^(zeta2 / 2)`.
    pub fn add_term(&mut self, step: i64, zeta2: i64, c: &QRat) {
        assert!((0..self.prec).contains(&step), "term step out of range");
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(step).or_default();
        entry.add_to(zeta2, c);
        if entry.is_zero() {
            self.terms.remove(&step);
        }
    }

    /// Coefficient of `q^q_exp * zeta^(zeta2 / 2)`. Exponents below the
    /// offset or off the step lattice are genuinely zero; exponents at or
    /// past the precision bound are an error.
    pub fn coeff(&self, q_exp: &QRat, zeta2: i64) -> Result<QRat> {
        let diff = q_exp - &self.q_offset;
        if !diff.is_integer() {
            return Ok(QRat::zero());
        }
        let step = diff
            .to_integer()
            .to_i64()
            .ok_or_else(|| Error::domain("exponent out of i64 range"))?;
        if step < 0 {
            return Ok(QRat::zero());
        }
        if step >= self.prec {
            return Err(Error::precision(format!(
                "coefficient of q^{q_exp} requested but series is only known below q^{}",
                self.abs_prec()
            )));
        }
        Ok(self
            .terms
            .get(&step)
            .map(|p| p.coeff(zeta2))
            .unwrap_or_else(QRat::zero))
    }

    /// Drop knowledge at and beyond `new_prec` steps. Never extends.
    pub fn truncate(&mut self, new_prec: i64) {
        assert!(new_prec >= 0, "negative precision");
        if new_prec < self.prec {
            self.prec = new_prec;
            self.terms.retain(|&s, _| s < new_prec);
        }
    }

    /// Multiply by `q^delta` (any rational `delta`).
    pub fn shift_q(&mut self, delta: &QRat) {
        self.q_offset += delta;
    }

    /// Re-express over a lower offset differing by an integer. Precision in
    /// steps grows by the shift; the absolute precision bound is unchanged.
    pub fn rebase_down(&mut self, new_offset: &QRat) -> Result<()> {
        let diff = &self.q_offset - new_offset;
        if !diff.is_integer() || diff.is_negative() {
            return Err(Error::domain(
                "rebase target must sit an integer number of steps below the current offset",
            ));
        }
        let shift = diff
            .to_integer()
            .to_i64()
            .ok_or_else(|| Error::domain("offset shift out of i64 range"))?;
        if shift == 0 {
            return Ok(());
        }
        self.terms = std::mem::take(&mut self.terms)
            .into_iter()
            .map(|(s, p)| (s + shift, p))
            .collect();
        self.prec += shift;
        self.q_offset = new_offset.clone();
        Ok(())
    }

    pub fn neg(&self) -> Self {
        let mut s = self.clone();
        for p in s.terms.values_mut() {
            p.scale(&-qq(1));
        }
        s
    }

    pub fn scale(&mut self, c: &QRat) {
        if c.is_zero() {
            self.terms.clear();
            return;
        }
        for p in self.terms.values_mut() {
            p.scale(c);
        }
    }

    pub fn scaled(&self, c: &QRat) -> Self {
        let mut s = self.clone();
        s.scale(c);
        s
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let diff = &self.q_offset - &other.q_offset;
        if !diff.is_integer() {
            return Err(Error::domain(format!(
                "cannot add series with offsets {} and {}: they differ by a non-integer",
                self.q_offset, other.q_offset
            )));
        }
        let d = diff
            .to_integer()
            .to_i64()
            .ok_or_else(|| Error::domain("offset difference out of i64 range"))?;
        // Rebase both onto the smaller offset; shift_a/shift_b are the step
        // shifts each side needs.
        let (offset, shift_a, shift_b) = if d >= 0 {
            (other.q_offset.clone(), d, 0)
        } else {
            (self.q_offset.clone(), 0, -d)
        };
        let prec = (self.prec + shift_a).min(other.prec + shift_b);
        let mut out = Self::zero(offset, prec);
        for (s, p) in self.iter_slices() {
            if s + shift_a < prec {
                out.set_slice(s + shift_a, p.clone());
            }
        }
        for (s, p) in other.iter_slices() {
            let t = s + shift_b;
            if t < prec {
                let entry = out.terms.entry(t).or_default();
                *entry += p;
                if entry.is_zero() {
                    out.terms.remove(&t);
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let va = self.valuation_step();
        let vb = other.valuation_step();
        let prec = (self.prec + vb).min(other.prec + va).max(0);
        let mut out = Self::zero(&self.q_offset + &other.q_offset, prec);
        for (sa, pa) in self.iter_slices() {
            if sa >= prec {
                break;
            }
            for (&sb, pb) in other.terms.range(..prec - sa) {
                let entry = out.terms.entry(sa + sb).or_default();
                entry.add_mul(pa, pb);
            }
        }
        out.terms.retain(|_, p| !p.is_zero());
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        if e == 0 {
            // Precision bookkeeping for an empty product: everything known.
            return Self::one(self.prec + self.valuation_step() * 2);
        }
        let mut acc = self.clone();
        for _ in 1..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// In-place multiplication by the sparse sum
    /// `sum of c * q^step * zeta^(zeta2 / 2)` over `(step, zeta2, c)` terms
    /// with `step >= 0`; products past the precision bound are dropped.
    ///
    /// One pass of this replaces a whole cascade of [`Self::mul_one_minus`]
    /// calls when the factor is available in closed sparse form (theta
    /// series via the triple product, eta powers via pentagonal numbers),
    /// which turns a quadratic-in-precision factor count into the sparse
    /// term count.
    pub fn mul_sparse_terms(&mut self, factor: &[(i64, i64, QRat)]) {
        assert!(
            factor.iter().all(|(step, _, _)| *step >= 0),
            "sparse factor steps must be nonnegative"
        );
        let mut out: BTreeMap<i64, ZetaPoly> = BTreeMap::new();
        for (&s, poly) in &self.terms {
            for (step, zeta2, c) in factor {
                let ns = s + step;
                if ns >= self.prec || c.is_zero() {
                    continue;
                }
                let entry = out.entry(ns).or_default();
                for (e, v) in poly.iter() {
                    entry.add_to(e + zeta2, &(v * c));
                }
            }
        }
        out.retain(|_, p| !p.is_zero());
        self.terms = out;
    }

    /// Multiply by the monomial `c * q^q_delta * zeta^(zeta2 / 2)`.
    pub fn mul_monomial(&mut self, q_delta: &QRat, zeta2: i64, c: &QRat) {
        self.q_offset += q_delta;
        if c.is_zero() {
            self.terms.clear();
            return;
        }
        self.terms = std::mem::take(&mut self.terms)
            .into_iter()
            .map(|(s, p)| (s, p.shifted(zeta2).scaled(c)))
            .collect();
    }

    /// Multiply every slice by a fixed `zeta`-polynomial. Precision is
    /// unchanged because no `q`-mixing occurs.
    pub fn mul_zeta_poly(&mut self, p: &ZetaPoly) {
        if p.is_zero() {
            self.terms.clear();
            return;
        }
        self.terms = std::mem::take(&mut self.terms)
            .into_iter()
            .map(|(s, q)| (s, &q * p))
            .collect();
        self.terms.retain(|_, q| !q.is_zero());
    }

    /// In-place multiplication by `1 - q^n * zeta^(zeta2 / 2)` with `n >= 0`.
    /// Here `n` counts steps above the offset.
    pub fn mul_one_minus(&mut self, n: i64, zeta2: i64) {
        assert!(n >= 0, "factor exponent must be nonnegative");
        if n == 0 {
            let factor =
                &ZetaPoly::one() - &ZetaPoly::monomial(zeta2, qq(1));
            self.mul_zeta_poly(&factor);
            return;
        }
        // Descending so each read of step s - n sees the original slice.
        let steps: Vec<i64> = self.terms.keys().rev().copied().collect();
        for s in steps {
            if s + n >= self.prec {
                continue;
            }
            let src = self.terms.get(&s).unwrap().shifted(zeta2);
            let entry = self.terms.entry(s + n).or_default();
            *entry -= &src;
            if entry.is_zero() {
                self.terms.remove(&(s + n));
            }
        }
    }

    /// In-place division by `1 - q^n * zeta^(zeta2 / 2)` with `n >= 1`,
    /// i.e. multiplication by the geometric series in `q^n * zeta^(zeta2/2)`.
    pub fn div_one_minus(&mut self, n: i64, zeta2: i64) {
        assert!(n >= 1, "geometric inversion needs a positive q-exponent");
        // Ascending so each read of step s - n sees the already-updated slice.
        for s in n..self.prec {
            let src = match self.terms.get(&(s - n)) {
                Some(p) => p.shifted(zeta2),
                None => continue,
            };
            let entry = self.terms.entry(s).or_default();
            *entry += &src;
            if entry.is_zero() {
                self.terms.remove(&s);
            }
        }
    }

    /// `(1 - q^n * zeta^(zeta2 / 2))^e` applied multiplicatively, for any
    /// integer `e`. Negative `e` requires `n >= 1`.
    pub fn pow_one_minus(&mut self, n: i64, zeta2: i64, e: i64) -> Result<()> {
        if e >= 0 {
            for _ in 0..e {
                self.mul_one_minus(n, zeta2);
            }
        } else {
            if n == 0 {
                return Err(Error::domain(
                    "cannot invert a pure zeta factor inside a q-series",
                ));
            }
            for _ in 0..-e {
                self.div_one_minus(n, zeta2);
            }
        }
        Ok(())
    }

    /// Exact division. The quotient must again have polynomial slices;
    /// otherwise this errors. Precision follows the product rule applied to
    /// `self * d^(-1)`.
    pub fn div_exact(&self, d: &Self) -> Result<Self> {
        let vd = d.valuation_step();
        if vd >= d.prec {
            return Err(Error::domain("division by a series with no visible terms"));
        }
        let va = self.valuation_step();
        let lead = d.terms.get(&vd).unwrap();
        // Same rule as multiplying by d^(-1), which has valuation 0 and is
        // known for d.prec - vd steps.
        let prec = self.prec.min(d.prec - vd + va).max(0);
        let offset = &(&self.q_offset - &d.q_offset) - qq(vd);
        let mut out = Self::zero(offset, prec);
        for s in va..prec {
            // acc = self[s] - sum_{j < s} out[j] * d[s - j + vd]
            let mut acc = self.terms.get(&s).cloned().unwrap_or_default();
            for (j, bj) in out.terms.range(va..s) {
                if let Some(dt) = d.terms.get(&(s - j + vd)) {
                    let mut prod = ZetaPoly::zero();
                    prod.add_mul(bj, dt);
                    acc -= &prod;
                }
            }
            if acc.is_zero() {
                continue;
            }
            let q = acc.div_exact(lead).map_err(|_| {
                Error::domain("series division is not exact at the slice level")
            })?;
            out.terms.insert(s, q);
        }
        Ok(out)
    }

    /// Multiplicative inverse. The contract requires the leading slice to be
    /// a single term, which keeps slice divisions trivially exact.
    pub fn invert(&self) -> Result<Self> {
        let v = self.valuation_step();
        if v >= self.prec {
            return Err(Error::domain("cannot invert a series with no visible terms"));
        }
        if self.terms.get(&v).unwrap().as_monomial().is_none() {
            return Err(Error::domain(
                "inversion requires a one-term leading slice",
            ));
        }
        let num = Self::one(self.prec - v);
        num.div_exact(self)
    }

    /// `exp(-self)` for a series with zero offset and strictly positive
    /// valuation, so the exponential closes at the stored precision.
    pub fn exp_neg(&self) -> Result<Self> {
        if !self.q_offset.is_zero() {
            return Err(Error::domain("exp needs a series based at q^0"));
        }
        if !self.is_zero_series() && self.valuation_step() < 1 {
            return Err(Error::domain("exp needs a series with no constant term"));
        }
        let prec = self.prec;
        let mut out = Self::one(prec);
        let mut power = Self::one(prec);
        let mut k: u64 = 0;
        loop {
            k += 1;
            power = power.mul(self);
            power.truncate(prec);
            if power.is_zero_series() {
                break;
            }
            let sign = if k % 2 == 0 { qq(1) } else { qq(-1) };
            let coeff = sign / QRat::from_integer(factorial(k));
            out = out.add(&power.scaled(&coeff))?;
        }
        out.truncate(prec);
        Ok(out)
    }

    /// Compare with `other` wherever both are known, i.e. below the smaller
    /// absolute precision. Offsets may differ by any rational; coefficients
    /// off the other's step lattice must then vanish.
    pub fn agrees_with(&self, other: &Self) -> bool {
        let bound = self.abs_prec().min(other.abs_prec());
        let check = |a: &Self, b: &Self| -> bool {
            for (s, e, c) in a.iter_coeffs() {
                let q_exp = &a.q_offset + qq(s);
                if q_exp >= bound {
                    continue;
                }
                match b.coeff(&q_exp, e) {
                    Ok(bc) => {
                        if &bc != c {
                            return false;
                        }
                    }
                    Err(_) => return false,
                }
            }
            true
        };
        check(self, other) && check(other, self)
    }
}

impl fmt::Display for FourierSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero_series() {
            return write!(f, "0 + O(q^{})", self.abs_prec());
        }
        let mut first = true;
        for (s, p) in self.iter_slices() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let e = &self.q_offset + qq(s);
            write!(f, "({p})*q^{e}")?;
        }
        write!(f, " + O(q^{})", self.abs_prec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::qq_frac;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_poly(rng: &mut StdRng, span: i64) -> ZetaPoly {
        let mut p = ZetaPoly::zero();
        for e in -span..=span {
            if rng.gen_bool(0.4) {
                p.add_to(e, &qq(rng.gen_range(-5..=5)));
            }
        }
        p
    }

    fn random_series(rng: &mut StdRng, offset: QRat, prec: i64) -> FourierSeries {
        let mut s = FourierSeries::zero(offset, prec);
        for step in 0..prec {
            if rng.gen_bool(0.7) {
                s.set_slice(step, random_poly(rng, 4));
            }
        }
        s
    }

    #[test]
    fn zeta_poly_mul_matches_naive_convolution() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let a = random_poly(&mut rng, 6);
            let b = random_poly(&mut rng, 6);
            let prod = &a * &b;
            for e in -30..=30 {
                let mut expect = QRat::zero();
                for (ea, ca) in a.iter() {
                    expect += ca * &b.coeff(e - ea);
                }
                assert_eq!(prod.coeff(e), expect, "exp2 {e}");
            }
            assert_eq!(prod, &b * &a);
        }
    }

    #[test]
    fn zeta_poly_division_round_trips_and_rejects_inexact() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..100 {
            let mut a = random_poly(&mut rng, 5);
            let mut d = random_poly(&mut rng, 5);
            if d.is_zero() {
                d = ZetaPoly::one();
            }
            if a.is_zero() {
                a.add_to(1, &qq(2));
            }
            let prod = &a * &d;
            assert_eq!(prod.div_exact(&d).unwrap(), a);
        }
        // (1 + z) is not divisible by (1 + z^2).
        let num = ZetaPoly::from_terms([(0, qq(1)), (2, qq(1))]);
        let den = ZetaPoly::from_terms([(0, qq(1)), (4, qq(1))]);
        assert!(num.div_exact(&den).is_err());
    }

    #[test]
    fn series_multiplication_is_associative_and_distributive() {
        let mut rng = StdRng::seed_from_u64(37);
        for _ in 0..20 {
            let a = random_series(&mut rng, qq_frac(1, 8), 5);
            let b = random_series(&mut rng, qq_frac(3, 8), 5);
            let c = random_series(&mut rng, qq_frac(-1, 8), 5);
            let ab_c = a.mul(&b).mul(&c);
            let a_bc = a.mul(&b.mul(&c));
            assert!(ab_c.agrees_with(&a_bc));
            // b and c have offsets differing by an integer (-3/8 vs 3/8 do
            // not, so use b and a shifted copy of b instead).
            let mut b2 = random_series(&mut rng, qq_frac(3, 8), 5);
            b2.shift_q(&qq(2));
            let sum = b.add(&b2).unwrap();
            let lhs = a.mul(&sum);
            let rhs = a.mul(&b).add(&a.mul(&b2)).unwrap();
            assert!(lhs.agrees_with(&rhs));
        }
    }

    #[test]
    fn multiplication_tracks_sharp_precision() {
        // a known for 3 steps from q^0; b = q^2 * (unit) known 5 steps past
        // its offset. Errors of a enter the product at q^(3+2) = q^5, errors
        // of b at q^7, so the product is known below q^5: 3 steps above its
        // offset q^2.
        let mut a = FourierSeries::one(3);
        a.add_term(1, 0, &qq(7));
        let b = FourierSeries::monomial(qq(2), 0, qq(1), 5);
        let prod = a.mul(&b);
        assert_eq!(prod.prec(), 3);
        assert_eq!(prod.abs_prec(), qq(5));
        assert_eq!(prod.q_offset(), &qq(2));
        // Additive alignment: offsets 1/8 and 25/8 differ by 3 steps.
        let x = FourierSeries::monomial(qq_frac(1, 8), 1, qq(1), 10);
        let y = FourierSeries::monomial(qq_frac(25, 8), 1, qq(1), 4);
        let s = x.add(&y).unwrap();
        assert_eq!(s.q_offset(), &qq_frac(1, 8));
        assert_eq!(s.prec(), 7);
        assert_eq!(s.coeff(&qq_frac(25, 8), 1).unwrap(), qq(1));
        // Offsets differing by a non-integer refuse to add.
        let z = FourierSeries::monomial(qq_frac(1, 3), 0, qq(1), 4);
        assert!(x.add(&z).is_err());
    }

    #[test]
    fn inversion_round_trips_on_random_unit_series() {
        let mut rng = StdRng::seed_from_u64(101);
        for trial in 0..100 {
            let v = rng.gen_range(0..3);
            let prec = rng.gen_range(v + 2..v + 9);
            let offset_num = rng.gen_range(-3..4);
            let mut a = random_series(&mut rng, qq_frac(offset_num, 24), prec);
            // Force a one-term unit at the valuation step.
            for s in 0..=v {
                a.set_slice(s, ZetaPoly::zero());
            }
            a.set_slice(v, ZetaPoly::monomial(rng.gen_range(-4..=4), qq(rng.gen_range(1..5))));
            let inv = a.invert().unwrap();
            let prod = a.mul(&inv);
            assert!(prod.agrees_with(&FourierSeries::one(1)), "trial {trial}");
            // The product is known for prec - v steps beyond q^0.
            assert_eq!(prod.abs_prec(), qq(prec - v), "trial {trial}");
        }
    }

    #[test]
    fn inversion_requires_monomial_lead() {
        let mut a = FourierSeries::one(5);
        a.add_term(0, 2, &qq(1));
        assert!(a.invert().is_err());
        // ... but exact division by it can still succeed when it divides.
        let b = a.mul(&a);
        let q = b.div_exact(&a).unwrap();
        assert!(q.agrees_with(&a));
    }

    #[test]
    fn division_round_trips_with_polynomial_leads() {
        let mut rng = StdRng::seed_from_u64(211);
        for _ in 0..50 {
            let mut d = random_series(&mut rng, qq(0), 6);
            let mut lead = random_poly(&mut rng, 2);
            if lead.is_zero() {
                lead = ZetaPoly::one();
            }
            d.set_slice(0, lead);
            let a = random_series(&mut rng, qq_frac(1, 2), 6);
            let prod = a.mul(&d);
            let back = prod.div_exact(&d).unwrap();
            assert!(back.agrees_with(&a));
        }
    }

    #[test]
    fn geometric_factors_round_trip() {
        let mut rng = StdRng::seed_from_u64(307);
        for _ in 0..40 {
            let a = random_series(&mut rng, qq(0), 8);
            let n = rng.gen_range(1..4);
            let z = rng.gen_range(-3..=3);
            let mut b = a.clone();
            b.div_one_minus(n, z);
            b.mul_one_minus(n, z);
            assert_eq!(b, a);
            let mut c = a.clone();
            c.mul_one_minus(n, z);
            c.div_one_minus(n, z);
            assert_eq!(c, a);
        }
    }

    #[test]
    fn zero_step_factor_matches_zeta_poly_multiplication() {
        let mut rng = StdRng::seed_from_u64(401);
        let a = random_series(&mut rng, qq(0), 6);
        let mut lhs = a.clone();
        lhs.mul_one_minus(0, 3);
        let mut rhs = a.clone();
        rhs.mul_zeta_poly(&ZetaPoly::from_terms([(0, qq(1)), (3, qq(-1))]));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn exp_neg_of_q_matches_factorials() {
        let a = FourierSeries::monomial(qq(0), 0, qq(1), 8).mul(&FourierSeries::monomial(
            qq(1),
            0,
            qq(1),
            8,
        ));
        // a = q with offset 1; rebase to offset 0 so exp sees steps.
        let mut a = a;
        a.rebase_down(&qq(0)).unwrap();
        let e = a.exp_neg().unwrap();
        for s in 0..e.prec() {
            let sign = if s % 2 == 0 { qq(1) } else { qq(-1) };
            let expect = sign / QRat::from_integer(factorial(s as u64));
            assert_eq!(e.coeff(&qq(s), 0).unwrap(), expect, "step {s}");
        }
    }

    #[test]
    fn exp_neg_is_a_homomorphism() {
        let mut rng = StdRng::seed_from_u64(509);
        for _ in 0..10 {
            let mut a = random_series(&mut rng, qq(0), 7);
            let mut b = random_series(&mut rng, qq(0), 7);
            a.set_slice(0, ZetaPoly::zero());
            b.set_slice(0, ZetaPoly::zero());
            let lhs = a.exp_neg().unwrap().mul(&b.exp_neg().unwrap());
            let rhs = a.add(&b).unwrap().exp_neg().unwrap();
            assert!(lhs.agrees_with(&rhs));
            // exp(-a) * exp(a) = 1.
            let one = a.exp_neg().unwrap().mul(&a.neg().exp_neg().unwrap());
            assert!(one.agrees_with(&FourierSeries::one(7)));
        }
    }

    #[test]
    fn coefficient_lookup_respects_precision() {
        let s = FourierSeries::monomial(qq_frac(1, 8), 3, qq(2), 4);
        assert_eq!(s.coeff(&qq_frac(1, 8), 3).unwrap(), qq(2));
        assert_eq!(s.coeff(&qq_frac(9, 8), 3).unwrap(), qq(0));
        assert_eq!(s.coeff(&qq(0), 0).unwrap(), qq(0)); // below the offset
        assert_eq!(s.coeff(&qq_frac(1, 2), 0).unwrap(), qq(0)); // off-lattice
        assert!(s.coeff(&qq_frac(33, 8), 0).is_err()); // past precision
    }

    #[test]
    fn rebase_preserves_absolute_precision() {
        let mut s = FourierSeries::monomial(qq(3), 1, qq(5), 4);
        let before = s.abs_prec();
        s.rebase_down(&qq(0)).unwrap();
        assert_eq!(s.abs_prec(), before);
        assert_eq!(s.prec(), 7);
        assert_eq!(s.coeff(&qq(3), 1).unwrap(), qq(5));
        assert!(s.rebase_down(&qq(-2)).is_ok());
        assert!(s.rebase_down(&qq(2)).is_err()); // would move the offset up
        assert!(s.rebase_down(&qq_frac(1, 2)).is_err()); // non-integer shift
    }
}
