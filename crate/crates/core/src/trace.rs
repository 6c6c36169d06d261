//! Averaging a paramodular form at level `N*q` down to level `N`.
//!
//! For squarefree `N` and a prime `q` not dividing `N`, the composite-level
//! paramodular group and the level-`N` group intersect in a common
//! finite-index subgroup, and summing slashes of a level-`N*q` form over
//! coset representatives of that subgroup inside the level-`N` group
//! produces a level-`N` form.  Each representative factors as
//! `kappa * u` with `kappa` in the composite-level group (so it acts
//! trivially) and `u` block upper triangular; writing `u` with lower-right
//! block `d` and upper-right block `b`, the slash acts on Fourier
//! coefficients by
//!
//! ```text
//! a(t; f|u) = det(d)^(-k) * e(tr(t d' b)) * a(d t d'; f)
//! ```
//!
//! so the averaged coefficient at `t` is the sum of those terms over all
//! cosets.  Reads at indices that leave the composite-level lattice
//! contribute zero; the root-of-unity phases are accumulated exactly at a
//! common order and must collapse to a rational number at the end, which is
//! asserted rather than assumed.

use std::collections::BTreeMap;

use num_integer::Integer;
use num_traits::Zero;
use rayon::prelude::*;

use crate::cyclotomic::CyclotomicValue;
use crate::number::{is_prime, is_squarefree, isqrt, qq, qq_frac, qrat_to_i64, QRat};
use crate::siegel::{canonical_class, index_det, SiegelExpansion};
use crate::symplectic::{coset_reps_for_trace, Mat2q, TraceCoset};
use crate::{Error, Result};

/// One additive term of an averaged coefficient, before phase accumulation.
struct PhaseTerm {
    /// Rational argument of the phase `e(x)`.
    phase: QRat,
    /// `det(d)^(-k)` times the source coefficient.
    scale: QRat,
}

/// The raw coset sum for the averaged coefficient at an arbitrary index
/// triple `(n, r, m)` of the target level, not necessarily canonical.
///
/// This is the probe the class-function tests drive: it evaluates the
/// defining sum directly, with no canonicalization of the requested index,
/// so agreement across an orbit of index triples is evidence about the
/// operator rather than about the lookup path.
pub fn trace_coefficient(
    f: &SiegelExpansion,
    cosets: &[TraceCoset],
    target_level: i64,
    key: (i64, i64, i64),
) -> Result<QRat> {
    let (n, r, m) = key;
    let weight = f.weight();
    let source_level = f.level();
    let t = Mat2q::from_rows([
        [qq(n), qq_frac(r, 2)],
        [qq_frac(r, 2), qq(m * target_level)],
    ]);

    let mut terms = Vec::with_capacity(cosets.len());
    let mut order = 1i64;
    for coset in cosets {
        let d = &coset.d_block;
        let dt = d.transpose();
        let s = d.mul(&t).mul(&dt);
        // Read off the source index triple; a non-lattice index means this
        // coset contributes nothing.
        let sn = qrat_to_i64(s.at(0, 0));
        let sr = qrat_to_i64(&(s.at(0, 1) * qq(2)));
        let sm = qrat_to_i64(&(s.at(1, 1) / qq(source_level)));
        let (Some(sn), Some(sr), Some(sm)) = (sn, sr, sm) else {
            continue;
        };
        let source = f.coeff(sn, sr, sm).map_err(|e| {
            Error::precision(format!(
                "averaging read at source index ({sn}, {sr}, {sm}) for target \
                 ({n}, {r}, {m}): {e}"
            ))
        })?;
        if source.is_zero() {
            continue;
        }
        let phase = t.mul(&dt).mul(&coset.b_block).trace();
        let det_scale = d.det().pow(-(weight as i32));
        order = order.lcm(&i64::try_from(phase.denom()).map_err(|_| {
            Error::verification("phase denominator exceeds machine range")
        })?);
        terms.push(PhaseTerm {
            phase,
            scale: det_scale * source,
        });
    }

    let mut acc = CyclotomicValue::root_of_unity(order, 0).scale(&QRat::zero());
    for term in terms {
        acc.add_assign(&CyclotomicValue::e(&term.phase).scale(&term.scale));
    }
    acc.expect_rational(&format!("averaged coefficient at ({n}, {r}, {m})"))
}

/// Averages a cusp expansion at level `target_level * q` down to
/// `target_level`, producing canonical-class coefficients for all slices up
/// to `m_max` and determinants up to `det_cap`.
pub fn trace_down(
    f: &SiegelExpansion,
    target_level: i64,
    q: i64,
    m_max: i64,
    det_cap: i64,
) -> Result<SiegelExpansion> {
    if target_level < 1 || !is_squarefree(target_level) {
        return Err(Error::domain(format!(
            "target level {target_level} must be positive and squarefree"
        )));
    }
    if q < 2 || !is_prime(q as u64) || target_level % q == 0 {
        return Err(Error::domain(format!(
            "auxiliary modulus {q} must be a prime not dividing {target_level}"
        )));
    }
    if f.level() != target_level * q {
        return Err(Error::domain(format!(
            "expansion has level {}, expected {}",
            f.level(),
            target_level * q
        )));
    }
    if !f.is_cusp() {
        return Err(Error::domain("averaging is implemented for cusp expansions"));
    }
    if m_max < 1 || det_cap < 1 {
        return Err(Error::domain("output domain must be nonempty"));
    }

    let cosets = coset_reps_for_trace(target_level, q)?;

    // Canonical target keys within the requested domain.
    let mut keys = Vec::new();
    for m in 1..=m_max {
        let four_mn = 4 * m * target_level;
        let n_hi = (det_cap + (m * target_level) * (m * target_level)) / four_mn;
        for n in 1..=n_hi {
            let rmax = isqrt(4 * n * m * target_level).min(m * target_level);
            for r in 0..=rmax {
                let det = index_det(target_level, n, r, m);
                if det <= 0 || det > det_cap {
                    continue;
                }
                if canonical_class(target_level, n, r, m)?.key() == (n, r, m) {
                    keys.push((n, r, m));
                }
            }
        }
    }

    let computed: Result<Vec<((i64, i64, i64), QRat)>> = keys
        .par_iter()
        .map(|&key| trace_coefficient(f, &cosets, target_level, key).map(|v| (key, v)))
        .collect();
    let coeffs: BTreeMap<(i64, i64, i64), QRat> = computed?.into_iter().collect();
    SiegelExpansion::from_class_coeffs(
        target_level,
        f.weight(),
        true,
        m_max,
        det_cap,
        coeffs,
    )
}
