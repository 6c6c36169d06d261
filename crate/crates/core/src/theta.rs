//! Eta powers, odd theta functions, theta blocks and theta quotients.
//!
//! The basic building blocks are
//!
//! * `eta = q^(1/24) * prod (1 - q^n)`,
//! * `theta_r = q^(1/8) (zeta^(r/2) - zeta^(-r/2))
//!    * prod (1 - q^n)(1 - q^n zeta^r)(1 - q^n zeta^(-r))`,
//!
//! and two composite shapes: *theta blocks*
//! `eta^(2k - t) * theta_{r_1} ... theta_{r_t}` (weight `k`, written
//! `TB(k; r_1,...,r_t)`) and weight-zero *theta quotients*
//! `prod theta_{d_i} / theta_{e_i}` with `e_i | d_i`, whose slices stay
//! Laurent polynomials because each `(1 - q^n zeta^(e_i))` denominator factor
//! inverts as a geometric series and the zeta-leading ratio collapses to
//! `zeta^((e-d)/2) (1 + zeta^e + ... + zeta^(d-e))`.

use std::fmt;
use std::str::FromStr;

use num_traits::Zero;

use crate::number::{qq, qq_frac, qrat_to_i64, QRat};
use crate::series::{FourierSeries, ZetaPoly};
use crate::{Error, Result};

/// `eta(tau)` up to `q^(1/24 + prec)`.
pub fn eta(prec: i64) -> FourierSeries {
    eta_power(1, prec)
}

/// `eta(tau)^e` for any integer `e`, with offset `e/24`.
pub fn eta_power(e: i64, prec: i64) -> FourierSeries {
    let v = eta_power_coeffs(e, prec);
    let mut s = FourierSeries::zero(QRat::zero(), prec);
    for (step, c) in v.iter().enumerate() {
        if !c.is_zero() {
            s.add_term(step as i64, 0, c);
        }
    }
    s.shift_q(&qq_frac(e, 24));
    s
}

/// Coefficients of `prod (1 - q^n)^e` through `q^(prec - 1)`: pentagonal
/// convolutions for positive powers, partition numbers for negative ones.
fn eta_power_coeffs(e: i64, prec: i64) -> Vec<QRat> {
    let mut v = vec![QRat::zero(); prec as usize];
    v[0] = qq(1);
    if e >= 0 {
        let pent = pentagonal_terms(prec);
        for _ in 0..e {
            v = convolve_sparse(&v, &pent);
        }
    } else {
        let parts = partition_counts(prec);
        for _ in 0..-e {
            v = convolve_dense(&v, &parts);
        }
    }
    v
}

/// Pentagonal-number expansion of `prod (1 - q^n)`, as sparse
/// `(step, coefficient)` terms below `prec`.
fn pentagonal_terms(prec: i64) -> Vec<(i64, QRat)> {
    let mut t = vec![(0, qq(1))];
    let mut j = 1i64;
    loop {
        let g1 = j * (3 * j - 1) / 2;
        if g1 >= prec {
            break;
        }
        let sign = if j % 2 == 1 { qq(-1) } else { qq(1) };
        t.push((g1, sign.clone()));
        let g2 = j * (3 * j + 1) / 2;
        if g2 < prec {
            t.push((g2, sign));
        }
        j += 1;
    }
    t
}

/// Partition numbers `p(0), ..., p(prec - 1)` via the pentagonal recurrence.
fn partition_counts(prec: i64) -> Vec<QRat> {
    let mut p = vec![QRat::zero(); prec as usize];
    p[0] = qq(1);
    for n in 1..prec as usize {
        let mut acc = QRat::zero();
        let mut j = 1i64;
        loop {
            let g1 = (j * (3 * j - 1) / 2) as usize;
            if g1 > n {
                break;
            }
            let sign = if j % 2 == 1 { qq(1) } else { qq(-1) };
            acc += &sign * &p[n - g1];
            let g2 = (j * (3 * j + 1) / 2) as usize;
            if g2 <= n {
                acc += &sign * &p[n - g2];
            }
            j += 1;
        }
        p[n] = acc;
    }
    p
}

/// Convolution of a dense coefficient vector with sparse steps, truncated to
/// the input length.
fn convolve_sparse(v: &[QRat], terms: &[(i64, QRat)]) -> Vec<QRat> {
    let mut out = vec![QRat::zero(); v.len()];
    for (i, c) in v.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        for (step, s) in terms {
            let k = i + *step as usize;
            if k < out.len() {
                out[k] += c * s;
            }
        }
    }
    out
}

/// Truncated product of two dense coefficient vectors.
fn convolve_dense(a: &[QRat], b: &[QRat]) -> Vec<QRat> {
    let mut out = vec![QRat::zero(); a.len()];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(out.len() - i) {
            if !y.is_zero() {
                out[i + j] += x * y;
            }
        }
    }
    out
}

/// The normalized factor `theta_r / (q^(1/8) zeta^(r/2))` as sparse
/// `(step, zeta2, coefficient)` terms below `prec`, via the triple product:
/// the pair `j, -(j + 1)` shares the step `j(j + 1)/2` with opposite signs.
fn theta_factor_terms(r: i64, prec: i64) -> Vec<(i64, i64, QRat)> {
    let mut t = Vec::new();
    let mut j = 0i64;
    loop {
        let step = j * (j + 1) / 2;
        if step >= prec {
            break;
        }
        let sign = if j % 2 == 0 { qq(1) } else { qq(-1) };
        t.push((step, 2 * r * j, sign.clone()));
        t.push((step, -2 * r * (j + 1), -sign));
        j += 1;
    }
    t
}

/// The odd theta function scaled in its elliptic variable:
/// `theta_r(tau, z) = theta(tau, r z)`, as the explicit double sum
/// `sum_n (-1)^n q^((2n+1)^2 / 8) zeta^(r (2n+1) / 2)`.
pub fn theta(r: i64, prec: i64) -> FourierSeries {
    let mut s = FourierSeries::zero(qq_frac(1, 8), prec);
    let mut n = 0i64;
    loop {
        let step = n * (n + 1) / 2; // (2n+1)^2/8 - 1/8
        if step >= prec {
            break;
        }
        let sign = if n % 2 == 0 { qq(1) } else { qq(-1) };
        // n and -(n+1) give the same q-power with opposite zeta-powers and
        // opposite signs (for odd multipliers of zeta), handled together.
        s.add_term(step, r * (2 * n + 1), &sign);
        s.add_term(step, -r * (2 * n + 1), &-sign);
        n += 1;
    }
    s
}

/// A theta block `TB(k; r_1, ..., r_t) = eta^(2k - t) prod theta_{r_i}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThetaBlock {
    weight: i64,
    thetas: Vec<i64>,
}

impl ThetaBlock {
    pub fn new(weight: i64, mut thetas: Vec<i64>) -> Result<Self> {
        if thetas.iter().any(|&r| r < 1) {
            return Err(Error::domain("theta multipliers must be positive"));
        }
        thetas.sort_unstable();
        Ok(ThetaBlock { weight, thetas })
    }

    pub fn weight(&self) -> i64 {
        self.weight
    }

    pub fn thetas(&self) -> &[i64] {
        &self.thetas
    }

    /// Jacobi index `(1/2) sum r_i^2`.
    pub fn index(&self) -> QRat {
        qq_frac(self.thetas.iter().map(|r| r * r).sum(), 2)
    }

    /// The index when it is integral, as required for trivial character.
    pub fn index_integral(&self) -> Result<i64> {
        qrat_to_i64(&self.index())
            .ok_or_else(|| Error::domain("theta block has half-integral index"))
    }

    /// Leading `q`-exponent `(2k + 2t)/24`; the block transforms without
    /// character exactly when this is an integer.
    pub fn q_valuation(&self) -> QRat {
        qq_frac(2 * self.weight + 2 * self.thetas.len() as i64, 24)
    }

    pub fn has_trivial_character(&self) -> bool {
        self.q_valuation().is_integer()
    }

    /// The `q`-leading coefficient `prod (zeta^(r/2) - zeta^(-r/2))`.
    pub fn leading_poly(&self) -> ZetaPoly {
        let mut p = ZetaPoly::one();
        for &r in &self.thetas {
            let factor =
                ZetaPoly::from_terms([(r, qq(1)), (-r, qq(-1))]);
            p = &p * &factor;
        }
        p
    }

    /// Default expansion precision: a quarter of the index plus margin.
    pub fn default_prec(&self) -> i64 {
        let idx = self.index();
        let quarter = (idx / qq(4)).ceil();
        qrat_to_i64(&quarter).unwrap_or(0) + 4
    }

    /// Expand through `prec` steps past the leading exponent.
    ///
    /// Each theta factor enters in its triple-product sum form
    /// `(zeta^(r/2) - zeta^(-r/2)) prod (1-q^n)(1-q^n zeta^r)(1-q^n zeta^-r)
    /// = zeta^(r/2) sum_j (-1)^j q^(j(j+1)/2) zeta^(r j)`, so multiplying it
    /// in costs one sparse pass instead of a `(1 - x)`-cascade per exponent.
    /// The remaining eta power `eta^(2k - t)` is a pure `q`-series: positive
    /// powers come from pentagonal-number convolutions, negative ones from
    /// the partition recurrence.
    pub fn expand(&self, prec: i64) -> Result<FourierSeries> {
        if prec < 1 {
            return Err(Error::domain("expansion needs at least one term"));
        }
        let eta_pow = 2 * self.weight - self.thetas.len() as i64;
        let mut eta = vec![QRat::zero(); prec as usize];
        eta[0] = qq(1);
        if eta_pow >= 0 {
            let pent = pentagonal_terms(prec);
            for _ in 0..eta_pow {
                eta = convolve_sparse(&eta, &pent);
            }
        } else {
            let parts = partition_counts(prec);
            for _ in 0..-eta_pow {
                eta = convolve_dense(&eta, &parts);
            }
        }

        let mut s = FourierSeries::zero(QRat::zero(), prec);
        for (step, c) in eta.iter().enumerate() {
            if !c.is_zero() {
                s.add_term(step as i64, 0, c);
            }
        }
        for &r in &self.thetas {
            s.mul_sparse_terms(&theta_factor_terms(r, prec));
        }
        s.mul_zeta_poly(&ZetaPoly::monomial(self.thetas.iter().sum(), qq(1)));
        s.shift_q(&self.q_valuation());
        Ok(s)
    }
}

/// Grid prefilter for cuspidality.  A form of index `m` is a cusp form
/// exactly when `n + r x + m x^2 > 0` over its support for every real `x`;
/// minimizing over the support gives a 1-periodic function bounded above by
/// `m x^2` plus the `q`-order of the restriction `zeta -> q^x`, and that
/// order is computable factor by factor: the leading product contributes
/// `-x sum(r_i) / 2`, and each `(1 - q^n zeta^(-r_i))` with `n < r_i x`
/// contributes `n - r_i x`.  A genuine cusp block therefore stays positive
/// at every sample `x = j / L`, so this test never discards one.  Scaled by
/// `2 L^2` to stay in integers.
fn passes_valuation_grid(weight: i64, thetas: &[i64]) -> bool {
    let ell = thetas.len() as i64;
    let lead = (2 * weight + 2 * ell) / 24;
    let index2 = thetas.iter().map(|d| d * d).sum::<i64>();
    let dsum = thetas.iter().sum::<i64>();
    let samples = (2 * dsum).max(24);
    for j in 0..samples {
        // 2 L^2 * (m x^2 + lead - x sum(d)/2), with m = index2 / 2.
        let mut v = index2 * j * j + 2 * samples * samples * lead - samples * dsum * j;
        for &d in thetas {
            let ceil = (d * j + samples - 1).div_euclid(samples);
            // sum over 1 <= n < d x of (n - d x), scaled by 2 L^2
            v += samples * samples * ceil * (ceil - 1) - 2 * samples * (ceil - 1) * d * j;
        }
        if v <= 0 {
            return false;
        }
    }
    true
}

/// Enumerate theta blocks of the given weight and factor count whose index
/// is `index` (so the squares of the multipliers sum to `2 * index`) and
/// that expand to nonzero Jacobi cusp forms, in ascending lexicographic
/// order of the multiplier list, stopping after `max_count` finds.  A fast
/// valuation grid discards most non-cuspidal shapes; survivors are expanded
/// through the singular window and checked exactly.
pub fn cusp_blocks(
    weight: i64,
    factors: usize,
    index: i64,
    max_count: usize,
) -> Result<Vec<ThetaBlock>> {
    if index < 1 || factors == 0 || max_count == 0 {
        return Err(Error::domain(
            "cusp block search needs a positive index, factor count, and quota",
        ));
    }
    if (2 * weight + 2 * factors as i64) % 24 != 0 {
        return Err(Error::domain(format!(
            "{factors} theta factors at weight {weight} carry a nontrivial character"
        )));
    }
    fn rec(
        weight: i64,
        index: i64,
        max_count: usize,
        slots: usize,
        sum_left: i64,
        min_d: i64,
        cur: &mut Vec<i64>,
        out: &mut Vec<ThetaBlock>,
    ) -> Result<()> {
        if out.len() == max_count {
            return Ok(());
        }
        if slots == 0 {
            if sum_left != 0 || !passes_valuation_grid(weight, cur) {
                return Ok(());
            }
            let block = ThetaBlock::new(weight, cur.clone())?;
            let series = block.expand(index / 4 + 2)?;
            let exp = crate::jacobi::JacobiExpansion::from_series(&series, weight, index)?;
            if !exp.is_zero() && exp.is_cusp_expansion()? {
                out.push(block);
            }
            return Ok(());
        }
        let floor_rest = (slots as i64 - 1) * min_d * min_d;
        let mut d = min_d;
        while d * d + floor_rest <= sum_left {
            cur.push(d);
            rec(weight, index, max_count, slots - 1, sum_left - d * d, d, cur, out)?;
            cur.pop();
            d += 1;
        }
        Ok(())
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(factors);
    rec(weight, index, max_count, factors, 2 * index, 1, &mut cur, &mut out)?;
    Ok(out)
}

impl fmt::Display for ThetaBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TB({}; ", self.weight)?;
        for (i, r) in self.thetas.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{r}")?;
        }
        write!(f, ")")
    }
}

impl FromStr for ThetaBlock {
    type Err = Error;

    /// Accepts `TB(k; r1,r2,...)`, with arbitrary spacing; the list may be
    /// empty (`TB(12;)` is the discriminant cusp form).
    fn from_str(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .strip_prefix("TB(")
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| Error::parse(format!("theta block must look like TB(k; r,...): {s}")))?;
        let (k_part, r_part) = inner
            .split_once(';')
            .ok_or_else(|| Error::parse(format!("missing ';' in theta block: {s}")))?;
        let weight: i64 = k_part
            .trim()
            .parse()
            .map_err(|_| Error::parse(format!("bad weight in theta block: {s}")))?;
        let mut thetas = Vec::new();
        for piece in r_part.split(',') {
            let piece = piece.trim();
            if piece.is_empty() {
                continue;
            }
            let r: i64 = piece
                .parse()
                .map_err(|_| Error::parse(format!("bad theta multiplier {piece:?} in {s}")))?;
            thetas.push(r);
        }
        ThetaBlock::new(weight, thetas)
    }
}

/// A weight-zero quotient `prod theta_{d_i} / theta_{e_i}` with `e_i | d_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThetaQuotient {
    pairs: Vec<(i64, i64)>,
}

impl ThetaQuotient {
    pub fn new(pairs: Vec<(i64, i64)>) -> Result<Self> {
        for &(d, e) in &pairs {
            if e < 1 || d < e {
                return Err(Error::domain(format!(
                    "quotient pair {d}/{e} needs d >= e >= 1"
                )));
            }
            if d % e != 0 {
                return Err(Error::domain(format!(
                    "quotient pair {d}/{e}: denominator must divide numerator \
                     for polynomial slices"
                )));
            }
        }
        Ok(ThetaQuotient { pairs })
    }

    pub fn pairs(&self) -> &[(i64, i64)] {
        &self.pairs
    }

    /// Jacobi index `sum (d_i^2 - e_i^2)/2`.
    pub fn index(&self) -> QRat {
        qq_frac(self.pairs.iter().map(|(d, e)| d * d - e * e).sum(), 2)
    }

    pub fn index_integral(&self) -> Result<i64> {
        qrat_to_i64(&self.index())
            .ok_or_else(|| Error::domain("theta quotient has half-integral index"))
    }

    /// The slice at `q^0`: `prod zeta^((e-d)/2) (1 + zeta^e + ... + zeta^(d-e))`.
    pub fn leading_poly(&self) -> ZetaPoly {
        let mut p = ZetaPoly::one();
        for &(d, e) in &self.pairs {
            let ratio = ZetaPoly::from_terms(
                (0..d / e).map(|j| ((e - d) + 2 * j * e, qq(1))),
            );
            p = &p * &ratio;
        }
        p
    }

    /// Expand through `q^prec` exclusive. Offset 0; every `(1 - q^n)` factor
    /// cancels between numerator and denominator, and denominator factors
    /// invert as geometric series.
    pub fn expand(&self, prec: i64) -> Result<FourierSeries> {
        let mut s = FourierSeries::one(prec);
        s.mul_zeta_poly(&self.leading_poly());
        for n in 1..prec {
            for &(d, e) in &self.pairs {
                s.mul_one_minus(n, 2 * d);
                s.mul_one_minus(n, -2 * d);
                s.div_one_minus(n, 2 * e);
                s.div_one_minus(n, -2 * e);
            }
        }
        Ok(s)
    }
}

impl fmt::Display for ThetaQuotient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (d, e)) in self.pairs.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}/{e}")?;
        }
        Ok(())
    }
}

impl FromStr for ThetaQuotient {
    type Err = Error;

    /// Accepts `d/e,d/e,...`, e.g. `8/1,18/6,14/7`.
    fn from_str(s: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for piece in s.split(',') {
            let piece = piece.trim();
            if piece.is_empty() {
                continue;
            }
            let (d_str, e_str) = piece
                .split_once('/')
                .ok_or_else(|| Error::parse(format!("quotient factor {piece:?} needs d/e")))?;
            let d: i64 = d_str
                .trim()
                .parse()
                .map_err(|_| Error::parse(format!("bad numerator in {piece:?}")))?;
            let e: i64 = e_str
                .trim()
                .parse()
                .map_err(|_| Error::parse(format!("bad denominator in {piece:?}")))?;
            pairs.push((d, e));
        }
        if pairs.is_empty() {
            return Err(Error::parse("empty theta quotient"));
        }
        ThetaQuotient::new(pairs)
    }
}
