//! Degree-two Fourier expansions for paramodular level N.
//!
//! Coefficients are indexed by semidefinite forms `t = [[n, r/2], [r/2, mN]]`
//! and are class functions under the group of integral 2x2 matrices with
//! determinant +-1 whose upper-right entry is divisible by N, acting by
//! `t -> g' t g`; a weight-k form picks up `(det g)^k`. Every class of
//! definite forms has a unique representative minimizing `(m, n, |r|)`
//! lexicographically with `r >= 0`; its `m` is the minimal Fourier-Jacobi
//! support of the class, the quantity the weight-four certification machinery
//! keys on.
//!
//! Equivalence is decided exactly: both forms are Gauss-reduced over
//! `GL_2(Z)` with transforms tracked; they are equivalent under the congruence
//! group iff some `g1 * u * g2^(-1)`, with `u` an automorph of the common
//! reduced form, has upper-right entry divisible by N.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::jacobi::JacobiExpansion;
use crate::number::{inv_mod, is_squarefree, isqrt, qq, QRat};
use crate::series::{FourierSeries, ZetaPoly};
use crate::{Error, Result};

/// `4 n m N - r^2`: four times the determinant of the index form. Positive
/// on definite forms, zero on rank <= 1, negative outside the cone.
pub fn index_det(level: i64, n: i64, r: i64, m: i64) -> i64 {
    4 * n * m * level - r * r
}

// ---------------------------------------------------------------------------
// 2x2 integer matrices and Gauss reduction of binary forms
// ---------------------------------------------------------------------------

/// Integer 2x2 matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mat2 {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl Mat2 {
    pub const I: Mat2 = Mat2 { a: 1, b: 0, c: 0, d: 1 };

    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn det(&self) -> i64 {
        self.a * self.d - self.b * self.c
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    /// Inverse of a determinant +-1 matrix.
    pub fn inverse_unimodular(&self) -> Mat2 {
        let det = self.det();
        assert!(det == 1 || det == -1, "inverse of non-unimodular matrix");
        Mat2 {
            a: self.d * det,
            b: -self.b * det,
            c: -self.c * det,
            d: self.a * det,
        }
    }
}

/// Integer Gram matrix `[[a, b], [b, c]]` of a binary form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Gram {
    a: i64,
    b: i64,
    c: i64,
}

impl Gram {
    fn disc(&self) -> i64 {
        self.a * self.c - self.b * self.b
    }

    /// `g' G g`.
    fn transform(&self, g: &Mat2) -> Gram {
        let (a, b, c) = (self.a, self.b, self.c);
        Gram {
            a: a * g.a * g.a + 2 * b * g.a * g.c + c * g.c * g.c,
            b: a * g.a * g.b + b * (g.a * g.d + g.b * g.c) + c * g.c * g.d,
            c: a * g.b * g.b + 2 * b * g.b * g.d + c * g.d * g.d,
        }
    }

    fn value(&self, x: i64, y: i64) -> i64 {
        self.a * x * x + 2 * self.b * x * y + self.c * y * y
    }
}

/// Reduce a positive definite Gram matrix to the unique `GL_2(Z)`-reduced
/// shape `0 <= 2b <= a <= c`, returning the transform `g` with
/// `g' G g = reduced`.
fn gauss_reduce(mut f: Gram) -> (Gram, Mat2) {
    assert!(f.disc() > 0 && f.a > 0, "Gauss reduction needs a definite form");
    let mut g = Mat2::I;
    loop {
        if f.a > f.c {
            let u = Mat2::new(0, 1, 1, 0);
            f = f.transform(&u);
            g = g.mul(&u);
            continue;
        }
        if 2 * f.b.abs() > f.a {
            // Translate b into (-a/2, a/2].
            let mut k = -f.b.div_euclid(f.a);
            if 2 * (f.b + k * f.a) > f.a {
                k -= 1;
            }
            let u = Mat2::new(1, k, 0, 1);
            f = f.transform(&u);
            g = g.mul(&u);
            continue;
        }
        if f.b < 0 {
            let u = Mat2::new(1, 0, 0, -1);
            f = f.transform(&u);
            g = g.mul(&u);
            continue;
        }
        if f.a > f.c {
            continue;
        }
        break;
    }
    debug_assert!(0 <= 2 * f.b && 2 * f.b <= f.a && f.a <= f.c);
    (f, g)
}

/// All integer representations `G(x, y) = value` of a definite form.
fn representations(f: &Gram, value: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    if value < 0 {
        return out;
    }
    let disc = f.disc();
    let ybound = isqrt(f.a * value / disc) + 1;
    for y in -ybound..=ybound {
        // a x^2 + 2 b y x + (c y^2 - value) = 0
        let quarter_disc = f.a * value - disc * y * y;
        if quarter_disc < 0 {
            continue;
        }
        let s = isqrt(quarter_disc);
        if s * s != quarter_disc {
            continue;
        }
        for sign in [1i64, -1] {
            let num = -f.b * y + sign * s;
            if num % f.a == 0 {
                let x = num / f.a;
                let pair = (x, y);
                if f.value(pair.0, pair.1) == value && !out.contains(&pair) {
                    out.push(pair);
                }
            }
        }
    }
    out
}

/// The finite automorphism group `{u in GL_2(Z) : u' G u = G}` of a definite
/// form (at most 12 elements).
fn automorphisms(f: &Gram) -> Vec<Mat2> {
    let mut out = Vec::new();
    for (x1, y1) in representations(f, f.a) {
        for &(x2, y2) in &representations(f, f.c) {
            let u = Mat2::new(x1, x2, y1, y2);
            let det = u.det();
            if det != 1 && det != -1 {
                continue;
            }
            if f.transform(&u) == *f {
                out.push(u);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Canonical classes
// ---------------------------------------------------------------------------

/// Result of canonicalizing a semidefinite index `(n, r, m)`: the minimal
/// representative and which transporter determinants (+1, -1) carry the
/// *queried* form onto it. A weight-k coefficient at the query equals
/// `(det)^k` times the coefficient at the representative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CanonicalClass {
    pub n: i64,
    pub r: i64,
    pub m: i64,
    pub det_plus: bool,
    pub det_minus: bool,
}

impl CanonicalClass {
    pub fn key(&self) -> (i64, i64, i64) {
        (self.n, self.r, self.m)
    }

    /// Minimal Fourier-Jacobi support of the class.
    pub fn min_fj_support(&self) -> i64 {
        self.m
    }
}

fn gram_of(level: i64, n: i64, r: i64, m: i64) -> Gram {
    Gram { a: 2 * n, b: r, c: 2 * m * level }
}

/// Which transporter determinants carry `source` onto `target` within the
/// level group. Both must be definite. `source_red` is the Gauss reduction
/// of the source, precomputed by the caller.
fn transporter_dets(
    level: i64,
    source_red: &(Gram, Mat2),
    target: &Gram,
) -> (bool, bool) {
    let (r1, g1) = *source_red;
    let (r2, g2) = gauss_reduce(*target);
    if r1 != r2 {
        return (false, false);
    }
    let g2inv = g2.inverse_unimodular();
    let mut plus = false;
    let mut minus = false;
    for u in automorphisms(&r1) {
        let h = g1.mul(&u).mul(&g2inv);
        if h.b.rem_euclid(level) == 0 {
            match h.det() {
                1 => plus = true,
                -1 => minus = true,
                _ => unreachable!(),
            }
        }
        if plus && minus {
            break;
        }
    }
    (plus, minus)
}

/// Canonicalize a semidefinite index `(n, r, m)` at the given level.
///
/// Definite forms are handled for any level; rank <= 1 forms additionally
/// require a squarefree level (the only case where the cusp combinatorics
/// below are complete). Indefinite input is a domain error.
pub fn canonical_class(level: i64, n: i64, r: i64, m: i64) -> Result<CanonicalClass> {
    if level < 1 {
        return Err(Error::domain("level must be positive"));
    }
    let d = index_det(level, n, r, m);
    if d < 0 || n < 0 || m < 0 {
        return Err(Error::domain(format!(
            "({n}, {r}, {m}) is not positive semidefinite at level {level}"
        )));
    }
    if d > 0 {
        let source = gram_of(level, n, r, m);
        let source_red = gauss_reduce(source);
        for mp in 1..=m {
            for rt in 0..=mp * level {
                let num = d + rt * rt;
                if num % (4 * mp * level) != 0 {
                    continue;
                }
                let np = num / (4 * mp * level);
                let target = gram_of(level, np, rt, mp);
                let (plus, minus) = transporter_dets(level, &source_red, &target);
                if plus || minus {
                    return Ok(CanonicalClass { n: np, r: rt, m: mp, det_plus: plus, det_minus: minus });
                }
            }
        }
        return Err(Error::domain(
            "internal: definite class scan missed its own representative",
        ));
    }
    // Rank <= 1. The form is content * (a x + b y)^2 with (a, b) primitive,
    // and the orbit of (a, b) under the level group is classified by
    // gcd(b, N) when N is squarefree.
    if n == 0 && r == 0 && m == 0 {
        return Ok(CanonicalClass { n: 0, r: 0, m: 0, det_plus: true, det_minus: true });
    }
    if !is_squarefree(level) {
        return Err(Error::domain(
            "rank-one canonicalization implemented for squarefree levels only",
        ));
    }
    let mn = m * level;
    let content = gcd3(n, r, mn);
    let a = isqrt(n / content);
    let b_abs = isqrt(mn / content);
    debug_assert_eq!(content * a * a, n);
    debug_assert_eq!(content * b_abs * b_abs, mn);
    debug_assert_eq!((2 * content * a * b_abs).abs(), r.abs());
    let e = num_integer::Integer::gcd(&b_abs, &level);
    let e = if b_abs == 0 { level } else { e };
    let (cn, cr, cm) = if e == level {
        (content, 0, 0)
    } else if e == 1 {
        (0, 0, content / level)
    } else {
        (content, 2 * content * e, content * e * e / level)
    };
    // A determinant -1 self-transporter exists whenever gcd(N/e, e) | 2,
    // which always holds for squarefree N.
    Ok(CanonicalClass { n: cn, r: cr, m: cm, det_plus: true, det_minus: true })
}

fn gcd3(a: i64, b: i64, c: i64) -> i64 {
    use num_integer::Integer;
    a.gcd(&b).gcd(&c)
}

/// Apply a group element `g` (upper-right divisible by the level, det +-1)
/// to an index triple: `t -> g' t g` in `(n, r, m)` coordinates.
pub fn apply_to_index(level: i64, g: &Mat2, n: i64, r: i64, m: i64) -> Result<(i64, i64, i64)> {
    if g.b.rem_euclid(level) != 0 || g.det().abs() != 1 {
        return Err(Error::domain("matrix is not in the level group"));
    }
    let b0 = g.b / level;
    let n2 = g.a * g.a * n + g.a * g.c * r + g.c * g.c * m * level;
    let r2 = 2 * g.a * g.b * n + (g.a * g.d + g.b * g.c) * r + 2 * g.c * g.d * m * level;
    let m2 = b0 * b0 * level * n + b0 * g.d * r + g.d * g.d * m;
    Ok((n2, r2, m2))
}

// ---------------------------------------------------------------------------
// Siegel expansions
// ---------------------------------------------------------------------------

/// Which canonical classes an expansion knows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Domain {
    /// Per-slice knowledge: canonical `m` maps to the exclusive bound on `n`.
    FourierJacobi(BTreeMap<i64, i64>),
    /// Canonical classes with slice at most `m_max` and `4 n m N - r^2` at
    /// most `det_cap`.
    ///
    /// The slice bound is load-bearing: for composite levels the canonical
    /// slice of a class is not bounded by any function of its determinant
    /// alone, so a pure determinant cap cannot honestly claim to know "all
    /// small classes". Operators that produce det-shaped output therefore
    /// also state how many slices they actually scanned.
    SliceDet { m_max: i64, det_cap: i64 },
}

impl Domain {
    pub fn contains(&self, level: i64, n: i64, r: i64, m: i64) -> bool {
        match self {
            Domain::FourierJacobi(map) => map.get(&m).is_some_and(|&p| n < p),
            Domain::SliceDet { m_max, det_cap } => {
                m <= *m_max && index_det(level, n, r, m) <= *det_cap
            }
        }
    }
}

/// Truncated Fourier expansion of a degree-two form of paramodular level N.
///
/// Storage keys are *slice-reduced*: within each Fourier-Jacobi slice `m`,
/// the key `(n, r, m)` has `0 <= r <= m N` and minimal `n` under the
/// translations preserving `m` (exactly the canonical keys of a Jacobi form
/// of index `m N`). Lookups canonicalize across slices.
#[derive(Clone, Debug)]
pub struct SiegelExpansion {
    level: i64,
    weight: i64,
    cusp: bool,
    domain: Domain,
    coeffs: BTreeMap<(i64, i64, i64), QRat>,
}

impl SiegelExpansion {
    pub fn level(&self) -> i64 {
        self.level
    }

    pub fn weight(&self) -> i64 {
        self.weight
    }

    pub fn is_cusp(&self) -> bool {
        self.cusp
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn iter_coeffs(&self) -> impl Iterator<Item = ((i64, i64, i64), &QRat)> {
        self.coeffs.iter().map(|(&k, v)| (k, v))
    }

    /// Coefficient at an arbitrary integral index triple. Zero outside the
    /// semidefinite cone, zero on rank <= 1 indices of cusp expansions, and
    /// a precision error outside the stored domain.
    pub fn coeff(&self, n: i64, r: i64, m: i64) -> Result<QRat> {
        if n < 0 || m < 0 || index_det(self.level, n, r, m) < 0 {
            return Ok(QRat::zero());
        }
        if self.cusp && index_det(self.level, n, r, m) == 0 {
            return Ok(QRat::zero());
        }
        let cls = canonical_class(self.level, n, r, m)?;
        if !self.domain.contains(self.level, cls.n, cls.r, cls.m) {
            return Err(Error::precision(format!(
                "coefficient at ({n}, {r}, {m}) reduces to {:?}, outside the stored domain",
                cls.key()
            )));
        }
        let v = self.coeffs.get(&cls.key()).cloned().unwrap_or_else(QRat::zero);
        let odd = self.weight.rem_euclid(2) == 1;
        if odd {
            if cls.det_plus && cls.det_minus {
                return Ok(QRat::zero());
            }
            if cls.det_minus {
                return Ok(-v);
            }
        }
        Ok(v)
    }

    /// The Gritsenko lift of a Jacobi cusp form of index N: weight is
    /// preserved, and
    /// `a(n, r, m) = sum over j | gcd(n, r, m) of j^(k-1) c(n m / j^2, r / j)`.
    /// Slices `1..=m_max` are materialized; slice `m` knows `n` through
    /// `(prec - 1) / m`.
    pub fn gritsenko_lift(phi: &JacobiExpansion, m_max: i64) -> Result<SiegelExpansion> {
        let level = phi.index();
        let weight = phi.weight();
        if !phi.is_cusp_expansion()? {
            return Err(Error::domain(
                "lift implemented for cusp input (nonzero singular part found)",
            ));
        }
        if m_max < 1 {
            return Err(Error::domain("need at least one Fourier-Jacobi slice"));
        }
        let mut domain = BTreeMap::new();
        let mut coeffs = BTreeMap::new();
        for m in 1..=m_max {
            let nprec = (phi.prec() - 1).div_euclid(m) + 1;
            if nprec < 1 {
                return Err(Error::precision(format!(
                    "source precision {} cannot feed slice m = {m}",
                    phi.prec()
                )));
            }
            domain.insert(m, nprec);
            for n in 1..nprec {
                let rmax = isqrt(4 * n * m * level).min(m * level);
                for r in 0..=rmax {
                    let mut total = QRat::zero();
                    for j in crate::number::divisors(gcd3(n, r, m)) {
                        let weight_factor = qq(j).pow((weight - 1) as i32);
                        total += weight_factor * phi.coeff(n * m / (j * j), r / j)?;
                    }
                    if !total.is_zero() {
                        coeffs.insert((n, r, m), total);
                    }
                }
            }
        }
        Ok(SiegelExpansion {
            level,
            weight,
            cusp: true,
            domain: Domain::FourierJacobi(domain),
            coeffs,
        })
    }

    /// Assemble an expansion from explicit Fourier-Jacobi slices (weight k,
    /// slice `m` of Jacobi index `m N`), then verify that coefficients are
    /// constant on cross-slice classes wherever two slices see the same
    /// class. That consistency is exactly what distinguishes a
    /// paramodular-invariant collection from an arbitrary pile of Jacobi
    /// forms.
    pub fn from_fourier_jacobi(
        level: i64,
        weight: i64,
        cusp: bool,
        slices: &[(i64, JacobiExpansion)],
    ) -> Result<SiegelExpansion> {
        let mut domain = BTreeMap::new();
        let mut coeffs = BTreeMap::new();
        for (m, slice) in slices {
            if slice.index() != m * level {
                return Err(Error::domain(format!(
                    "slice m = {m} must have Jacobi index {} (found {})",
                    m * level,
                    slice.index()
                )));
            }
            if slice.weight() != weight {
                return Err(Error::domain("slice weight mismatch"));
            }
            if slice.n_min() < 0 {
                return Err(Error::domain(
                    "holomorphic expansions cannot have negative q-powers",
                ));
            }
            domain.insert(*m, slice.prec());
            for (n, r, c) in slice.iter_canonical() {
                coeffs.insert((n, r, *m), c.clone());
            }
        }
        let exp = SiegelExpansion {
            level,
            weight,
            cusp,
            domain: Domain::FourierJacobi(domain),
            coeffs,
        };
        exp.verify_cross_slice_consistency()?;
        Ok(exp)
    }

    fn verify_cross_slice_consistency(&self) -> Result<()> {
        let odd = self.weight.rem_euclid(2) == 1;
        for (&(n, r, m), v) in &self.coeffs {
            let cls = canonical_class(self.level, n, r, m)?;
            if cls.key() == (n, r, m) {
                continue;
            }
            if !self.domain.contains(self.level, cls.n, cls.r, cls.m) {
                continue; // representative not stored; nothing to compare
            }
            let canon_v = self.coeffs.get(&cls.key()).cloned().unwrap_or_else(QRat::zero);
            let mut expect = canon_v;
            if odd {
                if cls.det_plus && cls.det_minus {
                    expect = QRat::zero();
                } else if cls.det_minus {
                    expect = -expect;
                }
            }
            if *v != expect {
                return Err(Error::verification(format!(
                    "slice coefficient at ({n}, {r}, {m}) is {v}, but its class \
                     representative {:?} carries {expect}: slices are not \
                     coefficients of one paramodular form",
                    cls.key()
                )));
            }
        }
        Ok(())
    }

    /// Assemble an expansion directly from canonical-class coefficients with
    /// a slice-and-determinant domain, the shape produced by averaging and
    /// Hecke operators. Keys must be canonical class representatives lying
    /// inside the stated domain; zeros are dropped, and for odd weight a
    /// class fixed by a determinant-minus transporter must carry zero.
    pub fn from_class_coeffs(
        level: i64,
        weight: i64,
        cusp: bool,
        m_max: i64,
        det_cap: i64,
        coeffs: BTreeMap<(i64, i64, i64), QRat>,
    ) -> Result<SiegelExpansion> {
        if level < 1 || m_max < 0 || det_cap < 0 {
            return Err(Error::domain(
                "level must be positive and domain bounds nonnegative",
            ));
        }
        let domain = Domain::SliceDet { m_max, det_cap };
        let odd = weight.rem_euclid(2) == 1;
        let mut clean = BTreeMap::new();
        for ((n, r, m), v) in coeffs {
            if v.is_zero() {
                continue;
            }
            if cusp && index_det(level, n, r, m) == 0 {
                return Err(Error::domain(format!(
                    "cusp expansion cannot carry the rank <= 1 key ({n}, {r}, {m})"
                )));
            }
            let cls = canonical_class(level, n, r, m)?;
            if cls.key() != (n, r, m) {
                return Err(Error::domain(format!(
                    "key ({n}, {r}, {m}) is not canonical; its representative is {:?}",
                    cls.key()
                )));
            }
            if !domain.contains(level, n, r, m) {
                return Err(Error::domain(format!(
                    "key ({n}, {r}, {m}) lies outside the stated domain"
                )));
            }
            if odd && cls.det_plus && cls.det_minus {
                return Err(Error::verification(format!(
                    "odd-weight coefficient at self-paired class ({n}, {r}, {m}) must vanish"
                )));
            }
            clean.insert((n, r, m), v);
        }
        Ok(SiegelExpansion {
            level,
            weight,
            cusp,
            domain,
            coeffs: clean,
        })
    }

    /// Extract the Fourier-Jacobi slice `m` as a Jacobi expansion of index
    /// `m N`, using stored keys directly when the domain is slice-shaped.
    pub fn fourier_jacobi(&self, m: i64) -> Result<JacobiExpansion> {
        match &self.domain {
            Domain::FourierJacobi(map) => {
                let &nprec = map.get(&m).ok_or_else(|| {
                    Error::precision(format!("slice m = {m} is not stored"))
                })?;
                let coeffs: Vec<(i64, i64, QRat)> = self
                    .coeffs
                    .range((0, 0, m)..(nprec, i64::MAX, m + 1))
                    .filter(|&(&(n, _, mm), _)| mm == m && n < nprec)
                    .map(|(&(n, r, _), c)| (n, r, c.clone()))
                    .collect();
                JacobiExpansion::from_canonical_coeffs(
                    self.weight,
                    m * self.level,
                    0,
                    nprec,
                    coeffs,
                )
            }
            Domain::SliceDet { m_max, det_cap } => {
                if m > *m_max {
                    return Err(Error::precision(format!(
                        "slice m = {m} exceeds the stored slice bound {m_max}"
                    )));
                }
                // The box precision must be sound for every r: the largest
                // determinant in a slice row occurs at r = 0, so all keys
                // with n < nprec are known iff 4 (nprec - 1) m N <= cap.
                let nprec = det_cap / (4 * m * self.level) + 1;
                let mut coeffs = Vec::new();
                for n in 0..nprec {
                    let rmax = isqrt(4 * n * m * self.level).min(m * self.level);
                    for r in 0..=rmax {
                        let c = self.coeff(n, r, m)?;
                        if !c.is_zero() {
                            coeffs.push((n, r, c));
                        }
                    }
                }
                JacobiExpansion::from_canonical_coeffs(
                    self.weight,
                    m * self.level,
                    0,
                    nprec,
                    coeffs,
                )
            }
        }
    }

    /// Linear combination with another expansion of the same level/weight.
    pub fn add_scaled(&self, factor: &QRat, other: &Self) -> Result<SiegelExpansion> {
        if self.level != other.level || self.weight != other.weight {
            return Err(Error::domain("level/weight mismatch in combination"));
        }
        let domain = match (&self.domain, &other.domain) {
            (Domain::FourierJacobi(a), Domain::FourierJacobi(b)) => {
                let mut merged = BTreeMap::new();
                for (m, pa) in a {
                    if let Some(pb) = b.get(m) {
                        merged.insert(*m, (*pa).min(*pb));
                    }
                }
                Domain::FourierJacobi(merged)
            }
            (
                Domain::SliceDet { m_max: ma, det_cap: da },
                Domain::SliceDet { m_max: mb, det_cap: db },
            ) => Domain::SliceDet {
                m_max: (*ma).min(*mb),
                det_cap: (*da).min(*db),
            },
            _ => {
                return Err(Error::domain(
                    "cannot combine slice-shaped and det-bounded domains",
                ))
            }
        };
        let mut coeffs: BTreeMap<(i64, i64, i64), QRat> = BTreeMap::new();
        for (key, v) in self.iter_coeffs() {
            if domain.contains(self.level, key.0, key.1, key.2) {
                coeffs.insert(key, v.clone());
            }
        }
        for (key, v) in other.iter_coeffs() {
            if domain.contains(self.level, key.0, key.1, key.2) {
                let entry = coeffs.entry(key).or_insert_with(QRat::zero);
                *entry += factor * v;
            }
        }
        coeffs.retain(|_, v| !v.is_zero());
        Ok(SiegelExpansion {
            level: self.level,
            weight: self.weight,
            cusp: self.cusp && other.cusp,
            domain,
            coeffs,
        })
    }

    pub fn scaled(&self, factor: &QRat) -> SiegelExpansion {
        let mut out = self.clone();
        if factor.is_zero() {
            out.coeffs.clear();
            return out;
        }
        for v in out.coeffs.values_mut() {
            *v *= factor;
        }
        out
    }

    /// Coefficient of `f | mu_c` at `(n, r, m)`, where `mu_c` is the
    /// Atkin-Lehner involution at an exact divisor `c` of the level
    /// (`gcd(c, N/c) = 1`). The pullback index is `alpha_c t alpha_c'` with
    /// `alpha_c = c^(-1/2) [[c, -chat], [N, 1 - (N/c) chat]]` and `chat` the
    /// least positive inverse of `N/c` mod `c`; integrality of the result is
    /// asserted, not assumed.
    pub fn al_coeff(&self, c: i64, n: i64, r: i64, m: i64) -> Result<QRat> {
        let (n2, r2, m2) = al_index_map(self.level, c, n, r, m)?;
        self.coeff(n2, r2, m2)
    }

    /// Slice-wise product of two expansions. This is plain series arithmetic
    /// per Fourier-Jacobi slice: `(fg)_m = sum over m1 + m2 = m of
    /// f_{m1} g_{m2}`, with slice 0 of a cusp factor identically zero.
    pub fn multiply(&self, other: &Self, m_max: i64) -> Result<SiegelExpansion> {
        if self.level != other.level {
            return Err(Error::domain("level mismatch in product"));
        }
        if !(self.cusp && other.cusp) {
            return Err(Error::domain(
                "product implemented for cusp factors (slice 0 must vanish)",
            ));
        }
        if m_max < 2 {
            return Err(Error::domain("product of cusp expansions starts at slice 2"));
        }
        let weight = self.weight + other.weight;
        let mut slices = Vec::new();
        for m in 2..=m_max {
            let mut acc: Option<FourierSeries> = None;
            for m1 in 1..m {
                let m2 = m - m1;
                let f1 = jacobi_slice_series(&self.fourier_jacobi(m1)?);
                let f2 = jacobi_slice_series(&other.fourier_jacobi(m2)?);
                let prod = f1.mul(&f2);
                acc = Some(match acc {
                    None => prod,
                    Some(s) => {
                        let mut p = prod;
                        let mut s = s;
                        let joint = s.prec().min(p.prec());
                        s.truncate(joint);
                        p.truncate(joint);
                        s.add(&p)?
                    }
                });
            }
            let series = acc.expect("m >= 2 always has a decomposition");
            let slice = JacobiExpansion::from_series(&series, weight, m * self.level)?;
            slices.push((m, slice));
        }
        SiegelExpansion::from_fourier_jacobi(self.level, weight, true, &slices)
    }
}

/// Index map of the Atkin-Lehner involution at `c`: returns the triple the
/// pullback reads its coefficient from.
pub fn al_index_map(
    level: i64,
    c: i64,
    n: i64,
    r: i64,
    m: i64,
) -> Result<(i64, i64, i64)> {
    if c < 1 || level % c != 0 {
        return Err(Error::domain(format!("{c} does not divide the level {level}")));
    }
    let q = level / c;
    if num_integer::Integer::gcd(&c, &q) != 1 {
        return Err(Error::domain(format!(
            "{c} is not an exact divisor of {level} (gcd with {q} is not 1)"
        )));
    }
    if c == 1 {
        return Ok((n, r, m));
    }
    let chat = inv_mod(q, c)
        .ok_or_else(|| Error::domain(format!("no inverse of {q} mod {c}")))?;
    // Work with the doubled Gram matrix T = [[2n, r], [r, 2mN]] and
    // M = sqrt(c) * alpha_c; then T' = M T M' / c must be integral with the
    // right divisibility pattern.
    let mm = Mat2::new(c, -chat, level, 1 - q * chat);
    debug_assert_eq!(mm.det(), c);
    let t11 = 2 * n;
    let t12 = r;
    let t22 = 2 * m * level;
    // M T:
    let (x11, x12) = (mm.a * t11 + mm.b * t12, mm.a * t12 + mm.b * t22);
    let (x21, x22) = (mm.c * t11 + mm.d * t12, mm.c * t12 + mm.d * t22);
    // (M T) M':
    let y11 = x11 * mm.a + x12 * mm.b;
    let y12 = x11 * mm.c + x12 * mm.d;
    let y21 = x21 * mm.a + x22 * mm.b;
    let y22 = x21 * mm.c + x22 * mm.d;
    debug_assert_eq!(y12, y21);
    if y11 % (2 * c) != 0 || y12 % c != 0 || y22 % (2 * c * level) != 0 {
        return Err(Error::verification(format!(
            "Atkin-Lehner pullback of ({n}, {r}, {m}) at c = {c} is not integral"
        )));
    }
    Ok((y11 / (2 * c), y12 / c, y22 / (2 * c * level)))
}

/// Re-emit a Jacobi expansion as a raw series (all class members, full
/// `zeta`-support), the inverse of `JacobiExpansion::from_series`.
pub fn jacobi_slice_series(exp: &JacobiExpansion) -> FourierSeries {
    let steps = exp.prec() - exp.n_min();
    let mut f = FourierSeries::zero(qq(exp.n_min()), steps);
    for n in exp.n_min()..exp.prec() {
        let mut poly = ZetaPoly::zero();
        // Support bound: r^2 <= 4 n m plus the singular window |r| <= m when
        // n is small; the union is covered by |r| <= m + isqrt(4 n m).
        let rbound = exp.index() + isqrt((4 * n * exp.index()).max(0));
        for r in -rbound..=rbound {
            let c = exp
                .coeff(n, r)
                .expect("lookup inside the declared window");
            if !c.is_zero() {
                poly.add_to(2 * r, &c);
            }
        }
        f.set_slice(n - exp.n_min(), poly);
    }
    f
}
