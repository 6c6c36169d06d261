//! Exponential (Borcherds-type) lifts of weight-zero Jacobi forms.
//!
//! A weakly holomorphic weight-0 Jacobi form `psi` of index N with integer
//! Fourier coefficients `c(n, r)` determines a meromorphic paramodular form
//! of level N and weight `c(0, 0) / 2`. This module computes its numerical
//! skeleton exactly:
//!
//! * the leading exponents `(A, B, C)` of `q^A zeta^B xi^C`, the count `D0`
//!   entering the Fricke sign `(-1)^(k + D0)`, and the sign itself;
//! * divisor data: which modular surfaces inside the moduli space the lift
//!   vanishes on, with multiplicities, read off the singular part of `psi`;
//! * Fourier-Jacobi slices by two independent routes — the infinite product
//!   expanded factor by factor with xi-grading, and the additive form
//!   `Theta * xi^C * exp(-G)` with `G` the weight-0 additive lift of `psi` —
//!   whose agreement is a strong correctness check on everything upstream.
//!
//! The product route needs `c(0, r) >= 0` for all r (otherwise the leading
//! slice is not a Laurent polynomial in zeta and is rejected); the inputs
//! used in practice satisfy this.

use num_integer::binomial;
use num_traits::{ToPrimitive, Zero};

use crate::jacobi::JacobiExpansion;
use crate::number::{divisor_power_sum, isqrt, qq, qq_frac, qrat_to_i64, QRat};
use crate::series::FourierSeries;
use crate::siegel::{jacobi_slice_series, SiegelExpansion};
use crate::theta::ThetaBlock;
use crate::{Error, Result};

/// Leading exponents and sign data of the exponential lift.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LiftInvariants {
    /// Weight `c(0, 0) / 2`.
    pub weight: i64,
    /// Leading `q`-exponent.
    pub lead_q: i64,
    /// Leading `zeta`-exponent.
    pub lead_zeta: i64,
    /// Leading `xi`-exponent; a multiple of the level for the inputs here.
    pub lead_xi: i64,
    /// `sum over n < 0 of sigma_0(|n|) c(n, 0)`.
    pub negative_term_count: i64,
    /// Fricke-involution eigenvalue `(-1)^(weight + negative_term_count)`.
    pub fricke_sign: i64,
}

fn check_weight_zero(psi: &JacobiExpansion) -> Result<()> {
    if psi.weight() != 0 {
        return Err(Error::domain(format!(
            "exponential lift input must have weight 0, found {}",
            psi.weight()
        )));
    }
    Ok(())
}

/// Integer coefficient lookup; the exponential lift is only defined for
/// integral input data.
fn int_coeff(psi: &JacobiExpansion, n: i64, r: i64) -> Result<i64> {
    let v = psi.coeff(n, r)?;
    qrat_to_i64(&v).ok_or_else(|| {
        Error::domain(format!("coefficient c({n}, {r}) = {v} is not an integer"))
    })
}

pub fn lift_invariants(psi: &JacobiExpansion) -> Result<LiftInvariants> {
    check_weight_zero(psi)?;
    let c00 = int_coeff(psi, 0, 0)?;
    if c00.rem_euclid(2) != 0 {
        return Err(Error::domain(format!(
            "c(0, 0) = {c00} must be even (it is twice the weight)"
        )));
    }
    let weight = c00 / 2;
    let mut sum0 = 0i64; // sum over r > 0 of c(0, r)
    let mut sum1 = 0i64; // weighted by r
    let mut sum2 = 0i64; // weighted by r^2
    for r in 1..=psi.index() {
        let c = int_coeff(psi, 0, r)?;
        sum0 += c;
        sum1 += r * c;
        sum2 += r * r * c;
    }
    let lead_q = qq_frac(c00, 24) + qq_frac(sum0, 12);
    let lead_q = qrat_to_i64(&lead_q).ok_or_else(|| {
        Error::domain(format!("leading q-exponent {lead_q} is not integral"))
    })?;
    if sum1.rem_euclid(2) != 0 || sum2.rem_euclid(2) != 0 {
        return Err(Error::domain(
            "leading zeta/xi exponents are not integral",
        ));
    }
    let mut negative_term_count = 0i64;
    for n in psi.n_min()..0 {
        let c = int_coeff(psi, n, 0)?;
        if c != 0 {
            let sigma = divisor_power_sum(-n, 0)
                .to_i64()
                .ok_or_else(|| Error::domain("divisor count overflow"))?;
            negative_term_count += sigma * c;
        }
    }
    let fricke_sign = if (weight + negative_term_count).rem_euclid(2) == 0 {
        1
    } else {
        -1
    };
    Ok(LiftInvariants {
        weight,
        lead_q,
        lead_zeta: sum1 / 2,
        lead_xi: sum2 / 2,
        negative_term_count,
        fricke_sign,
    })
}

/// Whether the lift is a *holomorphic cusp* form, decidable from the weight
/// and leading xi-exponent alone: weight 2 and odd weights are automatically
/// cuspidal when holomorphic; for weights 4, 6, 8, 10, 14 cuspidality is
/// equivalent to a positive leading xi-exponent. Other weights are out of
/// scope (`None`).
pub fn cusp_verdict(weight: i64, lead_xi: i64) -> Option<bool> {
    if weight == 2 || weight.rem_euclid(2) == 1 {
        return Some(true);
    }
    if [4, 6, 8, 10, 14].contains(&weight) {
        return Some(lead_xi > 0);
    }
    None
}

/// The theta block carried by the leading Fourier-Jacobi coefficient: weight
/// `c(0,0)/2` with theta factor `r` repeated `c(0, r)` times. Its index is
/// the leading xi-exponent and its q-valuation the leading q-exponent.
pub fn leading_theta_block(psi: &JacobiExpansion) -> Result<ThetaBlock> {
    let inv = lift_invariants(psi)?;
    let mut thetas = Vec::new();
    for r in 1..=psi.index() {
        let c = int_coeff(psi, 0, r)?;
        if c < 0 {
            return Err(Error::domain(format!(
                "c(0, {r}) = {c} < 0: leading coefficient is not a theta block"
            )));
        }
        for _ in 0..c {
            thetas.push(r);
        }
    }
    let block = ThetaBlock::new(inv.weight, thetas)?;
    debug_assert_eq!(block.index(), qq(inv.lead_xi));
    debug_assert_eq!(block.q_valuation(), qq(inv.lead_q));
    Ok(block)
}

// ---------------------------------------------------------------------------
// Divisor data
// ---------------------------------------------------------------------------

/// One modular-surface component of the lift divisor: discriminant, label
/// `r` modulo `2N` folded into `[0, N]`, and the vanishing order (which the
/// tables keep even when it is 0, recording that the surface is met by the
/// singular support but the contributions cancel).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DivisorRow {
    pub disc: i64,
    pub label: i64,
    pub mult: i64,
}

/// Largest `r^2 - 4 n N` over the singular support; the divisor sums below
/// terminate once `j^2 disc` exceeds this.
fn singular_disc_ceiling(psi: &JacobiExpansion) -> Result<i64> {
    let mut ceiling = 0;
    for (n, r, _) in psi.singular_part()? {
        ceiling = ceiling.max(r * r - 4 * n * psi.index());
    }
    Ok(ceiling)
}

/// The canonical residue: smallest `|rt|` with `rt = label (mod 2N)` and
/// `rt^2 >= disc`, preferring the positive sign on ties.
fn canonical_residue(level: i64, disc: i64, label: i64) -> i64 {
    let mut best: Option<i64> = None;
    for t in -4..=4i64 {
        let rt = label + 2 * level * t;
        if rt * rt < disc {
            continue;
        }
        match best {
            None => best = Some(rt),
            Some(b) => {
                if rt.abs() < b.abs() || (rt.abs() == b.abs() && rt > b) {
                    best = Some(rt);
                }
            }
        }
    }
    best.expect("residue sweep covers the minimum")
}

/// Vanishing order of the lift along the surface `(disc, label)`, together
/// with whether any term of the sum touched the singular support.
fn divisor_multiplicity_impl(
    psi: &JacobiExpansion,
    disc: i64,
    label: i64,
) -> Result<(i64, bool)> {
    let level = psi.index();
    let rt = canonical_residue(level, disc, label);
    let p = (rt * rt - disc) / (4 * level);
    debug_assert_eq!((rt * rt - disc).rem_euclid(4 * level), 0);
    let ceiling = singular_disc_ceiling(psi)?;
    let mut mult = 0i64;
    let mut touched = false;
    let mut j = 1i64;
    while j * j * disc <= ceiling {
        let c = int_coeff(psi, j * j * p, j * rt)?;
        if c != 0 {
            touched = true;
            mult += c;
        }
        j += 1;
    }
    Ok((mult, touched))
}

/// Vanishing order of the lift along the surface with discriminant `disc`
/// and label `r`; requires `4N | r^2 - disc`.
pub fn divisor_multiplicity(psi: &JacobiExpansion, disc: i64, label: i64) -> Result<i64> {
    check_weight_zero(psi)?;
    let level = psi.index();
    if disc < 1 || !(0..=level).contains(&label) {
        return Err(Error::domain("surface label out of range"));
    }
    if (label * label - disc).rem_euclid(4 * level) != 0 {
        return Err(Error::domain(format!(
            "no surface with discriminant {disc} and label {label} at level {level}"
        )));
    }
    Ok(divisor_multiplicity_impl(psi, disc, label)?.0)
}

/// All surfaces met by the singular support of `psi`, sorted by
/// `(disc, label)`. Rows whose contributions cancel to zero are kept.
pub fn enumerate_divisor(psi: &JacobiExpansion) -> Result<Vec<DivisorRow>> {
    check_weight_zero(psi)?;
    let level = psi.index();
    let mut cand_disc = std::collections::BTreeSet::new();
    for (n, r, _) in psi.singular_part()? {
        let disc0 = r * r - 4 * n * level;
        if disc0 <= 0 {
            continue;
        }
        let mut j = 1;
        while j * j <= disc0 {
            if disc0 % (j * j) == 0 {
                cand_disc.insert(disc0 / (j * j));
            }
            j += 1;
        }
    }
    let mut rows = Vec::new();
    for &disc in &cand_disc {
        for label in 0..=level {
            if (label * label - disc).rem_euclid(4 * level) != 0 {
                continue;
            }
            let (mult, touched) = divisor_multiplicity_impl(psi, disc, label)?;
            if touched {
                rows.push(DivisorRow { disc, label, mult });
            }
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Fourier-Jacobi expansion, product route
// ---------------------------------------------------------------------------

/// Coefficients of `(1 - X)^e` through degree `jmax`.
fn binomial_row(e: i64, jmax: i64) -> Vec<i64> {
    let mut out = Vec::with_capacity(jmax as usize + 1);
    for j in 0..=jmax {
        if e >= 0 {
            if j > e {
                out.push(0);
            } else {
                let b = binomial(e, j);
                out.push(if j % 2 == 0 { b } else { -b });
            }
        } else {
            out.push(binomial(-e - 1 + j, j));
        }
    }
    out
}

/// Expand the product form of the lift through `extra + 1` Fourier-Jacobi
/// slices, each to `nprec` powers of q past the leading exponent. Returns
/// `(m, series)` pairs where slice `m` is the coefficient of `xi^(m N)`.
pub fn expand_product(
    psi: &JacobiExpansion,
    extra: i64,
    nprec: i64,
) -> Result<Vec<(i64, FourierSeries)>> {
    let inv = lift_invariants(psi)?;
    let level = psi.index();
    if inv.lead_xi.rem_euclid(level) != 0 {
        return Err(Error::domain(
            "leading xi-exponent is not a multiple of the level",
        ));
    }
    let m0 = inv.lead_xi / level;
    if extra < 0 || nprec < 1 {
        return Err(Error::domain("need at least one slice and one q-power"));
    }
    // Leading slice before the xi-dependent factors:
    //   q^A zeta^B prod_{n >= 1, r} (1 - q^n zeta^r)^{c(0, r)}
    //           * prod_{r < 0} (1 - zeta^r)^{c(0, r)}.
    let mut lead = FourierSeries::monomial(qq(inv.lead_q), 2 * inv.lead_zeta, qq(1), nprec);
    for r in 1..=level {
        let e = int_coeff(psi, 0, r)?;
        if e < 0 {
            return Err(Error::domain(format!(
                "c(0, {r}) = {e} < 0: leading slice is not a Laurent polynomial",
            )));
        }
        lead.pow_one_minus(0, -2 * r, e)?;
    }
    for n in 1..nprec {
        let rbound = level + isqrt(4 * n * level);
        for r in -rbound..=rbound {
            let e = int_coeff(psi, 0, r)?;
            if e != 0 {
                lead.pow_one_minus(n, 2 * r, e)?;
            }
        }
    }
    let mut state: Vec<FourierSeries> = Vec::new();
    state.push(lead);
    for _ in 0..extra {
        state.push(FourierSeries::zero(qq(inv.lead_q), nprec));
    }
    // xi-graded factors (1 - q^n zeta^r xi^(m N))^{c(n m, r)} for m >= 1.
    for m in 1..=extra {
        for n in 0..nprec {
            let rbound = level + isqrt(4 * n * m * level);
            for r in -rbound..=rbound {
                let e = int_coeff(psi, n * m, r)?;
                if e == 0 {
                    continue;
                }
                let jmax = extra / m;
                let coeffs = binomial_row(e, jmax);
                for g in (0..=extra).rev() {
                    let mut acc = state[g as usize].clone();
                    let mut changed = false;
                    for j in 1..=g / m {
                        let b = coeffs[j as usize];
                        if b == 0 {
                            continue;
                        }
                        let mut shifted = state[(g - j * m) as usize].clone();
                        shifted.mul_monomial(&qq(j * n), 2 * j * r, &qq(b));
                        if shifted.is_zero_series() {
                            continue;
                        }
                        acc = acc.add(&shifted)?;
                        changed = true;
                    }
                    if changed {
                        let mut acc = acc;
                        acc.truncate(nprec);
                        state[g as usize] = acc;
                    }
                }
            }
        }
    }
    Ok(state
        .into_iter()
        .enumerate()
        .map(|(g, s)| (m0 + g as i64, s))
        .collect())
}

// ---------------------------------------------------------------------------
// Fourier-Jacobi expansion, additive route
// ---------------------------------------------------------------------------

/// Expand the additive form `Theta * xi^C * exp(-G)` of the lift, where `G`
/// has slice `m >= 1` equal to `psi | V_m` (weight-0 index-raising, with
/// `1/j` weights in the divisor sum). Same output convention as
/// [`expand_product`].
pub fn expand_additive(
    psi: &JacobiExpansion,
    extra: i64,
    nprec: i64,
) -> Result<Vec<(i64, FourierSeries)>> {
    let inv = lift_invariants(psi)?;
    let level = psi.index();
    let m0 = inv.lead_xi / level;
    let lead = leading_theta_block(psi)?.expand(nprec)?;
    // G as a graded vector over xi^(m N), m = 1..=extra.
    let mut g_slices: Vec<FourierSeries> = Vec::new();
    for m in 1..=extra {
        g_slices.push(jacobi_slice_series(&psi.apply_v(m)?));
    }
    // exp(-G) by the graded Taylor series: grade >= 1 terms are nilpotent.
    let mut exp: Vec<FourierSeries> = (0..=extra)
        .map(|g| {
            if g == 0 {
                FourierSeries::one(nprec)
            } else {
                FourierSeries::zero(QRat::zero(), nprec)
            }
        })
        .collect();
    let mut term: Vec<FourierSeries> = exp.clone();
    for i in 1..=extra {
        // term <- term * (-G) / i, graded.
        let mut next: Vec<FourierSeries> = (0..=extra)
            .map(|_| FourierSeries::zero(QRat::zero(), nprec))
            .collect();
        for g1 in 0..=extra {
            if term[g1 as usize].is_zero_series() {
                continue;
            }
            for g2 in 1..=extra - g1 {
                let piece = term[g1 as usize]
                    .mul(&g_slices[(g2 - 1) as usize])
                    .scaled(&-qq_frac(1, i));
                if piece.is_zero_series() {
                    continue;
                }
                let tgt = (g1 + g2) as usize;
                let mut sum = next[tgt].add(&piece)?;
                sum.truncate(nprec);
                next[tgt] = sum;
            }
        }
        for g in 0..=extra as usize {
            let mut sum = exp[g].add(&next[g])?;
            sum.truncate(nprec);
            exp[g] = sum;
            term[g] = next[g].clone();
        }
    }
    let mut out = Vec::new();
    for g in 0..=extra {
        let mut slice = lead.mul(&exp[g as usize]);
        slice.truncate(nprec);
        out.push((m0 + g, slice));
    }
    Ok(out)
}

/// Run both expansion routes and check they agree slice by slice on the
/// overlap of their precision windows.
pub fn cross_check_expansions(psi: &JacobiExpansion, extra: i64, nprec: i64) -> Result<()> {
    let prod = expand_product(psi, extra, nprec)?;
    let add = expand_additive(psi, extra, nprec)?;
    for ((m1, s1), (m2, s2)) in prod.iter().zip(add.iter()) {
        if m1 != m2 {
            return Err(Error::verification("slice indices diverge"));
        }
        if !s1.agrees_with(s2) {
            return Err(Error::verification(format!(
                "product and additive expansions disagree on slice m = {m1}"
            )));
        }
    }
    Ok(())
}

/// Assemble the lift as a Siegel expansion: product-route slices plus the
/// exactly-zero slices below the leading xi-exponent, cross-verified for
/// class-function consistency. Only for inputs whose verdict is cuspidal.
pub fn assemble(psi: &JacobiExpansion, extra: i64, nprec: i64) -> Result<SiegelExpansion> {
    let inv = lift_invariants(psi)?;
    let level = psi.index();
    let cusp = cusp_verdict(inv.weight, inv.lead_xi).ok_or_else(|| {
        Error::domain(format!("no cuspidality rule for weight {}", inv.weight))
    })?;
    if !cusp {
        return Err(Error::domain(
            "assembly implemented for cuspidal lifts only",
        ));
    }
    let m0 = inv.lead_xi / level;
    let mut slices = Vec::new();
    // The xi-valuation is exactly the leading exponent, so slices below it
    // vanish identically; record them with a wide window.
    for m in 1..m0 {
        slices.push((
            m,
            JacobiExpansion::from_canonical_coeffs(
                inv.weight,
                m * level,
                0,
                1 << 30,
                std::iter::empty(),
            )?,
        ));
    }
    for (m, series) in expand_product(psi, extra, nprec)? {
        slices.push((m, JacobiExpansion::from_series(&series, inv.weight, m * level)?));
    }
    SiegelExpansion::from_fourier_jacobi(level, inv.weight, true, &slices)
}

/// Convenience: expand a theta-quotient description of `psi` and validate it
/// as a weight-0 Jacobi expansion at its own index, with enough precision
/// for the singular part plus `margin` further rows.
pub fn weight_zero_input(
    quotient: &crate::theta::ThetaQuotient,
    margin: i64,
) -> Result<JacobiExpansion> {
    let index = qrat_to_i64(&quotient.index())
        .ok_or_else(|| Error::domain("quotient index is not integral"))?;
    let prec = index / 4 + 1 + margin;
    let series = quotient.expand(prec)?;
    JacobiExpansion::from_series(&series, 0, index)
}
