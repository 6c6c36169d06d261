//! Dimension bounds for paramodular cusp forms from truncated
//! Fourier–Jacobi data.
//!
//! A degree-two cusp form of level `N` that is a Fricke eigenform with
//! eigenvalue `eps` has Fourier–Jacobi slices `phi_1, phi_2, ...` whose
//! coefficients obey two families of linear relations:
//!
//! * *class consistency*: `c(n, r; phi_m) = c(n', r'; phi_m')` whenever the
//!   index forms `(n, r, m)` and `(n', r', m')` lie in the same orbit under
//!   the integral automorphism group of the level (even weight throughout);
//! * *eigenform symmetry*: `c(n, r; phi_m) = eps * c(m, -r; phi_n)`.
//!
//! Given bases of candidate Jacobi expansions for the first `m_max` slice
//! indices, the tuples `(phi_1, ..., phi_m_max)` satisfying every enumerable
//! relation up to a determinant cap form a linear subspace `V`.  The genuine
//! cusp forms inject into `V` once enough relations are imposed, so
//! `dim V` is an upper bound for the dimension of the cusp space with that
//! eigenvalue.  The bound can be computed exactly over the rationals or, much
//! faster, over a prime field; a prime-field rank never exceeds the rational
//! rank, so the modular computation still yields a valid upper bound.
//!
//! The module builds the relation list (with tags that keep each constraint
//! auditable), assembles the corresponding matrix over the chosen field,
//! reports `dim V`, and can extract an explicit rational basis of `V` as
//! tuples of Jacobi expansions for downstream nonlift hunting.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;
use rayon::prelude::*;

use crate::jacobi::JacobiExpansion;
use crate::linalg::{FpMat, QMat};
use crate::number::{isqrt, qq, QRat};
use crate::siegel::{canonical_class, index_det};
use crate::{Error, Result};

/// Default prime modulus for fast rank computations.
pub const DEFAULT_MODULUS: u64 = 1_000_003;

/// The coefficient field a rank computation runs over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    /// Exact rational arithmetic: slow, but a certificate-grade rank.
    Rational,
    /// The prime field with the given number of elements.
    Prime(u64),
}

impl Default for Field {
    fn default() -> Self {
        Field::Prime(DEFAULT_MODULUS)
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Rational => write!(f, "Q"),
            Field::Prime(q) => write!(f, "F{q}"),
        }
    }
}

/// A list of Jacobi expansions of one weight and one index, used as the
/// coordinate space for one Fourier–Jacobi slice.  The list may be empty
/// (a slice known to contain no candidates still participates in relations
/// through the zero functional).
#[derive(Clone, Debug)]
pub struct JacobiBasis {
    weight: i64,
    index: i64,
    elements: Vec<JacobiExpansion>,
}

impl JacobiBasis {
    pub fn new(weight: i64, index: i64, elements: Vec<JacobiExpansion>) -> Result<Self> {
        if index < 1 {
            return Err(Error::domain("basis index must be positive"));
        }
        for e in &elements {
            if e.weight() != weight || e.index() != index {
                return Err(Error::domain(format!(
                    "basis element of weight {} and index {} in a basis declared ({weight}, {index})",
                    e.weight(),
                    e.index()
                )));
            }
        }
        Ok(JacobiBasis { weight, index, elements })
    }

    pub fn weight(&self) -> i64 {
        self.weight
    }

    pub fn index(&self) -> i64 {
        self.index
    }

    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[JacobiExpansion] {
        &self.elements
    }
}

/// One linear constraint, tagged by its origin so a report can be audited
/// without rebuilding the enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    /// `c(left; phi_{left.2}) = c(right; phi_{right.2})`: the two index
    /// triples lie in one class of the level's automorphism group but in
    /// distinct translation orbits, so the constraint is not a tautology.
    Class {
        left: (i64, i64, i64),
        right: (i64, i64, i64),
    },
    /// `c(n, r; phi_m) = eps * c(m, -r; phi_n)`.
    Eigen { n: i64, r: i64, m: i64 },
}

/// The enumerated constraints of a [`RestrictionProblem`] together with
/// their matrix rows over the problem's bases.
#[derive(Clone, Debug)]
pub struct RelationSet {
    relations: Vec<Relation>,
    rows: Vec<Vec<QRat>>,
}

impl RelationSet {
    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }
}

/// A dimension-bound instance: level, weight, Fricke eigenvalue, bases for
/// the slice indices `N, 2N, ..., m_max * N`, a determinant cap bounding
/// which relations are enumerated, and the field to compute ranks over.
#[derive(Clone, Debug)]
pub struct RestrictionProblem {
    level: i64,
    weight: i64,
    sign: i64,
    det_cap: i64,
    field: Field,
    bases: Vec<JacobiBasis>,
}

impl RestrictionProblem {
    pub fn new(
        level: i64,
        weight: i64,
        sign: i64,
        det_cap: i64,
        field: Field,
        bases: Vec<JacobiBasis>,
    ) -> Result<Self> {
        if level < 1 {
            return Err(Error::domain("level must be positive"));
        }
        if weight < 1 || weight % 2 != 0 {
            return Err(Error::domain(
                "restriction relations are implemented for positive even weight",
            ));
        }
        if sign != 1 && sign != -1 {
            return Err(Error::domain("eigenvalue must be +1 or -1"));
        }
        if det_cap < 1 {
            return Err(Error::domain("determinant cap must be positive"));
        }
        if bases.is_empty() {
            return Err(Error::domain("at least one slice basis is required"));
        }
        for (i, b) in bases.iter().enumerate() {
            let m = i as i64 + 1;
            if b.index() != m * level {
                return Err(Error::domain(format!(
                    "slice {m} basis has index {}, expected {}",
                    b.index(),
                    m * level
                )));
            }
            if b.weight() != weight {
                return Err(Error::domain(format!(
                    "slice {m} basis has weight {}, expected {weight}",
                    b.weight()
                )));
            }
        }
        Ok(RestrictionProblem { level, weight, sign, det_cap, field, bases })
    }

    pub fn level(&self) -> i64 {
        self.level
    }

    pub fn weight(&self) -> i64 {
        self.weight
    }

    pub fn sign(&self) -> i64 {
        self.sign
    }

    pub fn m_max(&self) -> i64 {
        self.bases.len() as i64
    }

    pub fn det_cap(&self) -> i64 {
        self.det_cap
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn basis(&self, m: i64) -> Result<&JacobiBasis> {
        usize::try_from(m - 1)
            .ok()
            .and_then(|i| self.bases.get(i))
            .ok_or_else(|| Error::domain(format!("no basis for slice {m}")))
    }

    /// Total coordinate count `sum of slice dimensions`.
    pub fn total_dim(&self) -> usize {
        self.bases.iter().map(JacobiBasis::dim).sum()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.bases.len());
        let mut acc = 0;
        for b in &self.bases {
            offs.push(acc);
            acc += b.dim();
        }
        offs
    }

    /// All translation-reduced index triples `(n, r, m)` with `m <= m_max`
    /// and determinant in `(0, det_cap]`, slice by slice.
    fn reduced_box(&self) -> Vec<(i64, i64, i64)> {
        let mut keys = Vec::new();
        for m in 1..=self.m_max() {
            let idx = m * self.level;
            for r in 0..=idx {
                // 4 n idx - r^2 in [1, det_cap]
                let lo = (r * r + 1 + 4 * idx - 1).div_euclid(4 * idx).max(1);
                let mut n = lo;
                while index_det(self.level, n, r, m) <= self.det_cap {
                    keys.push((n, r, m));
                    n += 1;
                }
            }
        }
        keys
    }

    /// Enumerate every constraint within the cap and build its matrix row.
    ///
    /// Class constraints pair translation-reduced triples lying in one
    /// automorphism class; pairs inside a single translation orbit are
    /// tautologies and never appear.  Eigenform constraints run over all
    /// `n, m <= m_max` and every `r` with determinant in range, normalized
    /// to `n <= m` (and `r >= 0` on the diagonal) to list each constraint
    /// once.  A constraint touching a coefficient beyond some basis
    /// element's precision is an error naming the offending read: silent
    /// skipping would quietly weaken the bound.
    pub fn build_relations(&self) -> Result<RelationSet> {
        let mut relations = Vec::new();

        let mut groups: BTreeMap<(i64, i64, i64), Vec<(i64, i64, i64)>> = BTreeMap::new();
        for (n, r, m) in self.reduced_box() {
            let class = canonical_class(self.level, n, r, m)?;
            groups.entry(class.key()).or_default().push((n, r, m));
        }
        for members in groups.values() {
            for i in 0..members.len() {
                for j in i + 1..members.len() {
                    relations.push(Relation::Class { left: members[i], right: members[j] });
                }
            }
        }

        for m in 1..=self.m_max() {
            for n in 1..=m {
                let prod = 4 * n * m * self.level;
                let r_hi = isqrt(prod - 1);
                for r in -r_hi..=r_hi {
                    if prod - r * r > self.det_cap {
                        continue;
                    }
                    if n == m && r < 0 {
                        continue;
                    }
                    relations.push(Relation::Eigen { n, r, m });
                }
            }
        }

        let rows = relations
            .par_iter()
            .map(|rel| self.relation_row(rel))
            .collect::<Result<Vec<_>>>()?;
        Ok(RelationSet { relations, rows })
    }

    /// Add `scale` times the coefficient functional at `(n, r)` of slice `m`
    /// to `row`.
    fn accumulate(
        &self,
        row: &mut [QRat],
        offsets: &[usize],
        m: i64,
        n: i64,
        r: i64,
        scale: &QRat,
    ) -> Result<()> {
        let basis = self.basis(m)?;
        let off = offsets[(m - 1) as usize];
        for (j, e) in basis.elements().iter().enumerate() {
            let v = e.coeff(n, r).map_err(|err| match err {
                Error::Precision(msg) => Error::precision(format!(
                    "relation touches slice {m} at ({n}, {r}): {msg}"
                )),
                other => other,
            })?;
            row[off + j] += v * scale;
        }
        Ok(())
    }

    fn relation_row(&self, rel: &Relation) -> Result<Vec<QRat>> {
        let offsets = self.offsets();
        let mut row = vec![QRat::zero(); self.total_dim()];
        match *rel {
            Relation::Class { left, right } => {
                self.accumulate(&mut row, &offsets, left.2, left.0, left.1, &qq(1))?;
                self.accumulate(&mut row, &offsets, right.2, right.0, right.1, &qq(-1))?;
            }
            Relation::Eigen { n, r, m } => {
                self.accumulate(&mut row, &offsets, m, n, r, &qq(1))?;
                self.accumulate(&mut row, &offsets, n, m, -r, &qq(-self.sign))?;
            }
        }
        Ok(row)
    }

    fn matrix(&self, rels: &RelationSet) -> Result<QMat> {
        if rels.rows.is_empty() {
            // A single zero row keeps the column count honest.
            return QMat::from_rows(vec![vec![QRat::zero(); self.total_dim()]]);
        }
        QMat::from_rows(rels.rows.clone())
    }

    /// Rank of the constraint matrix over the problem's field.
    pub fn relation_rank(&self, rels: &RelationSet) -> Result<usize> {
        let m = self.matrix(rels)?;
        match self.field {
            Field::Rational => Ok(m.rank()),
            Field::Prime(q) => Ok(FpMat::from_qmat(&m, q)?.rank()),
        }
    }

    /// `dim V = total dimension - rank`: an upper bound for the dimension
    /// of the cusp space with this eigenvalue once the relations are known
    /// to pin the truncation.
    pub fn dim_bound(&self, rels: &RelationSet) -> Result<usize> {
        Ok(self.total_dim() - self.relation_rank(rels)?)
    }

    /// Evaluate every relation on a concrete slice tuple, by direct
    /// coefficient reads (the tuple need not lie in the problem's bases).
    /// Genuine eigenform truncations return all zeros.
    pub fn residuals(&self, tuple: &[JacobiExpansion], rels: &RelationSet) -> Result<Vec<QRat>> {
        if tuple.len() != self.bases.len() {
            return Err(Error::domain(format!(
                "tuple has {} slices, problem has {}",
                tuple.len(),
                self.bases.len()
            )));
        }
        for (i, phi) in tuple.iter().enumerate() {
            let m = i as i64 + 1;
            if phi.index() != m * self.level || phi.weight() != self.weight {
                return Err(Error::domain(format!(
                    "tuple slice {m} has (weight, index) = ({}, {}), expected ({}, {})",
                    phi.weight(),
                    phi.index(),
                    self.weight,
                    m * self.level
                )));
            }
        }
        let slice = |m: i64| &tuple[(m - 1) as usize];
        rels.relations
            .iter()
            .map(|rel| match *rel {
                Relation::Class { left, right } => {
                    Ok(slice(left.2).coeff(left.0, left.1)?
                        - slice(right.2).coeff(right.0, right.1)?)
                }
                Relation::Eigen { n, r, m } => {
                    Ok(slice(m).coeff(n, r)? - qq(self.sign) * slice(n).coeff(m, -r)?)
                }
            })
            .collect()
    }

    /// A rational basis of the solution space `V`, each vector expressed as
    /// a tuple of Jacobi expansions `(phi_1, ..., phi_m_max)`.  Requires the
    /// rational field: a prime-field kernel need not lift to characteristic
    /// zero, so candidates extracted from it would be unusable downstream.
    pub fn extract_solution_basis(&self, rels: &RelationSet) -> Result<Vec<Vec<JacobiExpansion>>> {
        if self.field != Field::Rational {
            return Err(Error::domain(
                "solution extraction needs the rational field; rerun over Q",
            ));
        }
        let kernel = self.matrix(rels)?.nullspace();
        let offsets = self.offsets();
        let mut out = Vec::with_capacity(kernel.len());
        for v in kernel {
            let mut tuple = Vec::with_capacity(self.bases.len());
            for (i, basis) in self.bases.iter().enumerate() {
                let m = i as i64 + 1;
                let mut phi = JacobiExpansion::from_canonical_coeffs(
                    self.weight,
                    m * self.level,
                    0,
                    basis
                        .elements()
                        .iter()
                        .map(JacobiExpansion::prec)
                        .min()
                        .unwrap_or(i64::MAX),
                    [],
                )?;
                for (j, e) in basis.elements().iter().enumerate() {
                    let c = &v[offsets[i] + j];
                    if !c.is_zero() {
                        phi = phi.add(&e.scaled(c))?;
                    }
                }
                tuple.push(phi);
            }
            out.push(tuple);
        }
        Ok(out)
    }

    /// One-line summary `JR N k eps m_max det_cap field dim rank bound`.
    pub fn report(&self, rels: &RelationSet) -> Result<String> {
        let rank = self.relation_rank(rels)?;
        let bound = self.total_dim() - rank;
        let eps = if self.sign == 1 { '+' } else { '-' };
        Ok(format!(
            "JR {} {} {} {} {} {} {} {} {}",
            self.level,
            self.weight,
            eps,
            self.m_max(),
            self.det_cap,
            self.field,
            self.total_dim(),
            rank,
            bound
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::qq_frac;
    use crate::siegel::SiegelExpansion;
    use crate::theta::cusp_blocks;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// A synthetic expansion: not a modular form, just a coefficient table
    /// wide enough for the enumeration windows in these tests.
    fn synthetic(weight: i64, index: i64, prec: i64, seed: u64) -> JacobiExpansion {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut coeffs = Vec::new();
        for n in 1..prec {
            for r in 0..=index {
                if rng.gen_range(0..3) == 0 {
                    coeffs.push((n, r, qq(rng.gen_range(-4..5))));
                }
            }
        }
        JacobiExpansion::from_canonical_coeffs(weight, index, 0, prec, coeffs).unwrap()
    }

    fn synthetic_problem(sign: i64, det_cap: i64, field: Field) -> RestrictionProblem {
        let b1 = JacobiBasis::new(
            2,
            5,
            vec![synthetic(2, 5, 8, 11), synthetic(2, 5, 8, 12)],
        )
        .unwrap();
        let b2 = JacobiBasis::new(2, 10, vec![synthetic(2, 10, 8, 21)]).unwrap();
        RestrictionProblem::new(5, 2, sign, det_cap, field, vec![b1, b2]).unwrap()
    }

    #[test]
    fn relation_tags_are_well_formed() {
        let p = synthetic_problem(1, 32, Field::Rational);
        let rels = p.build_relations().unwrap();
        assert!(!rels.is_empty());
        for rel in rels.relations() {
            match *rel {
                Relation::Class { left, right } => {
                    assert_ne!(left, right);
                    let dl = index_det(5, left.0, left.1, left.2);
                    let dr = index_det(5, right.0, right.1, right.2);
                    assert_eq!(dl, dr, "{rel:?}");
                    assert!((1..=32).contains(&dl));
                    for t in [left, right] {
                        assert!((1..=2).contains(&t.2));
                        // Translation-reduced member of its own slice.
                        let (n1, r1, _) = JacobiExpansion::canonicalize(t.2 * 5, t.0, t.1);
                        assert_eq!((n1, r1), (t.0, t.1));
                    }
                    let kl = canonical_class(5, left.0, left.1, left.2).unwrap().key();
                    let kr = canonical_class(5, right.0, right.1, right.2).unwrap().key();
                    assert_eq!(kl, kr);
                }
                Relation::Eigen { n, r, m } => {
                    assert!(1 <= n && n <= m && m <= 2);
                    assert!(n < m || r >= 0);
                    let det = 4 * n * m * 5 - r * r;
                    assert!((1..=32).contains(&det), "{rel:?}");
                }
            }
        }
    }

    #[test]
    fn relation_count_matches_brute_force_scan() {
        let level = 5i64;
        let cap = 32i64;
        let p = synthetic_problem(1, cap, Field::Rational);
        let rels = p.build_relations().unwrap();

        // Independent scan for class pairs: collect reduced triples from a
        // generous raw box, then double-loop over unordered pairs.
        let mut reduced = Vec::new();
        for m in 1..=2i64 {
            let idx = m * level;
            for n in 1..=cap {
                for r in -idx..=idx {
                    let det = 4 * n * idx - r * r;
                    if det < 1 || det > cap {
                        continue;
                    }
                    let (n1, r1, _) = JacobiExpansion::canonicalize(idx, n, r);
                    if (n1, r1) == (n, r) {
                        reduced.push((n, r, m));
                    }
                }
            }
        }
        let mut class_pairs = 0usize;
        for i in 0..reduced.len() {
            for j in i + 1..reduced.len() {
                let (a, b) = (reduced[i], reduced[j]);
                let ka = canonical_class(level, a.0, a.1, a.2).unwrap();
                let kb = canonical_class(level, b.0, b.1, b.2).unwrap();
                if ka.key() == kb.key() {
                    class_pairs += 1;
                }
            }
        }
        assert!(class_pairs > 0, "test instance should produce class pairs");

        // Independent scan for eigenform constraints.
        let mut eigen = 0usize;
        for m in 1..=2i64 {
            for n in 1..=m {
                for r in -200..=200i64 {
                    let det = 4 * n * m * level - r * r;
                    if det < 1 || det > cap {
                        continue;
                    }
                    if n == m && r < 0 {
                        continue;
                    }
                    eigen += 1;
                }
            }
        }

        let built_class = rels
            .relations()
            .iter()
            .filter(|r| matches!(r, Relation::Class { .. }))
            .count();
        let built_eigen = rels.len() - built_class;
        assert_eq!(built_class, class_pairs);
        assert_eq!(built_eigen, eigen);
    }

    #[test]
    fn no_relations_in_an_empty_cap_leaves_the_full_dimension() {
        // det = 4 n m N - r^2 = 1 is impossible (it would be 3 mod 4), so a
        // cap of 1 enumerates nothing.
        let p = synthetic_problem(1, 1, Field::Rational);
        let rels = p.build_relations().unwrap();
        assert!(rels.is_empty());
        assert_eq!(p.dim_bound(&rels).unwrap(), p.total_dim());
        assert_eq!(p.total_dim(), 3);
    }

    #[test]
    fn diagonal_eigen_relations_only_bite_for_the_minus_sign() {
        // One slice only: every eigenform constraint is diagonal, and even
        // weight makes c(n, r) = c(n, -r) automatic, so the plus sign adds
        // nothing while the minus sign forces those coefficients to vanish.
        let basis = JacobiBasis::new(2, 5, vec![synthetic(2, 5, 8, 31)]).unwrap();
        let plus =
            RestrictionProblem::new(5, 2, 1, 20, Field::Rational, vec![basis.clone()]).unwrap();
        let rels = plus.build_relations().unwrap();
        assert!(rels
            .relations()
            .iter()
            .any(|r| matches!(r, Relation::Eigen { .. })));
        assert_eq!(plus.dim_bound(&rels).unwrap(), 1);

        let minus = RestrictionProblem::new(5, 2, -1, 20, Field::Rational, vec![basis]).unwrap();
        let rels = minus.build_relations().unwrap();
        assert_eq!(minus.dim_bound(&rels).unwrap(), 0);
    }

    /// The first `count` weight-4 index-30 cusp blocks as expansions.  All
    /// three blocks at that index exist, but they span only a 2-dimensional
    /// space (see `theta_blocks_can_be_linearly_dependent`), so fixtures
    /// that need an independent family take the first two.
    fn level_30_blocks(count: usize, prec: i64) -> Vec<JacobiExpansion> {
        cusp_blocks(4, 8, 30, count)
            .unwrap()
            .iter()
            .map(|b| {
                let series = b.expand(prec).unwrap();
                JacobiExpansion::from_series(&series, 4, 30).unwrap()
            })
            .collect()
    }

    /// Bases for slices `1..=m_max` at level 30: two independent index-30
    /// cusp blocks and their images under the index-raising operators, i.e.
    /// the slice data of their two lifts.
    fn level_30_problem(sign: i64, m_max: i64, det_cap: i64, field: Field) -> RestrictionProblem {
        let slice1 = level_30_blocks(2, 35);
        let bases = (1..=m_max)
            .map(|m| {
                let elems: Vec<JacobiExpansion> =
                    slice1.iter().map(|phi| phi.apply_v(m).unwrap()).collect();
                JacobiBasis::new(4, 30 * m, elems).unwrap()
            })
            .collect();
        RestrictionProblem::new(30, 4, sign, det_cap, field, bases).unwrap()
    }

    #[test]
    fn theta_blocks_can_be_linearly_dependent() {
        // The three eight-factor cusp blocks of index 30 satisfy one linear
        // relation: their coefficient matrix over the common window has rank
        // 2.  Searching for blocks never certifies independence by itself.
        let exps = level_30_blocks(3, 20);
        let mut keys = std::collections::BTreeSet::new();
        for e in &exps {
            for (n, r, _) in e.iter_canonical() {
                keys.insert((n, r));
            }
        }
        let rows: Vec<Vec<QRat>> = exps
            .iter()
            .map(|e| keys.iter().map(|&(n, r)| e.coeff(n, r).unwrap()).collect())
            .collect();
        assert_eq!(QMat::from_rows(rows).unwrap().rank(), 2);
    }

    #[test]
    fn lift_truncations_satisfy_every_plus_relation() {
        let p = level_30_problem(1, 2, 240, Field::Rational);
        let rels = p.build_relations().unwrap();
        assert_eq!(rels.len(), 48);
        for phi in level_30_blocks(2, 35) {
            let tuple = vec![phi.apply_v(1).unwrap(), phi.apply_v(2).unwrap()];
            let res = p.residuals(&tuple, &rels).unwrap();
            assert!(res.iter().all(QRat::is_zero), "nonzero residual");
        }
    }

    #[test]
    fn solution_space_is_exactly_the_lift_truncations() {
        let p = level_30_problem(1, 2, 240, Field::Rational);
        let rels = p.build_relations().unwrap();
        assert_eq!(p.dim_bound(&rels).unwrap(), 2);
        assert_eq!(p.report(&rels).unwrap(), "JR 30 4 + 2 240 Q 4 2 2");

        // Every solution tuple must be the two-term truncation of the lift
        // of its own first slice.
        let basis = p.extract_solution_basis(&rels).unwrap();
        assert_eq!(basis.len(), 2);
        for tuple in &basis {
            assert!(!tuple[0].is_zero());
            let lift = SiegelExpansion::gritsenko_lift(&tuple[0], 2).unwrap();
            let expected = lift.fourier_jacobi(2).unwrap();
            let diff = tuple[1].add(&expected.scaled(&qq(-1))).unwrap();
            assert!(diff.is_zero(), "second slice is not the lift slice");
        }
    }

    #[test]
    fn minus_sign_space_at_level_30_is_zero() {
        // The spanned candidates are plus-eigenform truncations, so the
        // minus-sign system admits only the zero tuple.
        let p = level_30_problem(-1, 2, 240, Field::Rational);
        let rels = p.build_relations().unwrap();
        assert_eq!(p.dim_bound(&rels).unwrap(), 0);
        assert!(p.extract_solution_basis(&rels).unwrap().is_empty());
    }

    #[test]
    fn bounds_shrink_as_the_cap_and_slice_count_grow() {
        // More relations can only cut the solution space down.
        let mut previous = usize::MAX;
        for cap in [8, 60, 240] {
            let p = level_30_problem(-1, 2, cap, Field::Rational);
            let rels = p.build_relations().unwrap();
            let bound = p.dim_bound(&rels).unwrap();
            assert!(bound <= previous, "cap {cap} raised the bound");
            previous = bound;
        }

        // One-slice vs two-slice problems at a fixed cap.
        let one = level_30_problem(1, 1, 240, Field::Rational);
        let one_bound = one.dim_bound(&one.build_relations().unwrap()).unwrap();
        let two = level_30_problem(1, 2, 240, Field::Rational);
        let two_bound = two.dim_bound(&two.build_relations().unwrap()).unwrap();
        assert!(two_bound <= one_bound);
        assert_eq!((one_bound, two_bound), (2, 2));
    }

    #[test]
    fn prime_field_rank_never_exceeds_the_rational_rank() {
        let mut rng = StdRng::seed_from_u64(0x5eed_7001);
        for trial in 0..6 {
            let cap = rng.gen_range(8..40);
            let pq = synthetic_problem(-1, cap, Field::Prime(DEFAULT_MODULUS));
            let pr = synthetic_problem(-1, cap, Field::Rational);
            let rels = pr.build_relations().unwrap();
            let rq = pq.relation_rank(&rels).unwrap();
            let rr = pr.relation_rank(&rels).unwrap();
            assert!(rq <= rr, "trial {trial}: mod rank {rq} > rational rank {rr}");
            assert!(pq.dim_bound(&rels).unwrap() >= pr.dim_bound(&rels).unwrap());
        }

        // On the genuine instance the default modulus loses nothing.
        let p = level_30_problem(1, 2, 240, Field::Prime(DEFAULT_MODULUS));
        let rels = p.build_relations().unwrap();
        assert_eq!(p.dim_bound(&rels).unwrap(), 2);
        assert_eq!(
            p.report(&rels).unwrap(),
            "JR 30 4 + 2 240 F1000003 4 2 2"
        );
    }

    #[test]
    fn small_characteristic_rejects_a_denominator_it_divides() {
        let e = JacobiExpansion::from_canonical_coeffs(
            2,
            5,
            0,
            8,
            [(1i64, 1i64, qq_frac(1, 5))],
        )
        .unwrap();
        let basis = JacobiBasis::new(2, 5, vec![e]).unwrap();
        let p = RestrictionProblem::new(5, 2, -1, 20, Field::Prime(5), vec![basis]).unwrap();
        let rels = p.build_relations().unwrap();
        match p.relation_rank(&rels) {
            Err(Error::Domain(msg)) => assert!(msg.contains("divisible by 5"), "{msg}"),
            other => panic!("expected a denominator rejection, got {other:?}"),
        }
    }

    #[test]
    fn precision_shortfall_names_the_offending_read() {
        // The slice-2 basis stores only n = 1, but the diagonal constraint
        // at (2, r) with determinant 80 - r^2 <= 60 reads n = 2 there.
        let short = JacobiExpansion::from_canonical_coeffs(
            2,
            10,
            0,
            2,
            [(1i64, 0i64, qq(1))],
        )
        .unwrap();
        let b1 = JacobiBasis::new(2, 5, vec![synthetic(2, 5, 8, 61)]).unwrap();
        let b2 = JacobiBasis::new(2, 10, vec![short]).unwrap();
        let p = RestrictionProblem::new(5, 2, 1, 60, Field::Rational, vec![b1, b2]).unwrap();
        match p.build_relations() {
            Err(Error::Precision(msg)) => assert!(msg.contains("slice 2"), "{msg}"),
            other => panic!("expected a precision error, got {other:?}"),
        }
    }

    #[test]
    fn solution_extraction_requires_the_rational_field() {
        let p = synthetic_problem(1, 20, Field::Prime(DEFAULT_MODULUS));
        let rels = p.build_relations().unwrap();
        assert!(matches!(p.extract_solution_basis(&rels), Err(Error::Domain(_))));
    }

    #[test]
    fn malformed_problems_are_rejected() {
        let b = JacobiBasis::new(2, 5, vec![synthetic(2, 5, 8, 1)]).unwrap();
        // Wrong slice index (slice 1 must have index = level).
        assert!(RestrictionProblem::new(6, 2, 1, 20, Field::Rational, vec![b.clone()]).is_err());
        // Odd weight is out of scope.
        assert!(JacobiBasis::new(3, 5, vec![synthetic(2, 5, 8, 1)]).is_err());
        let b3 = JacobiBasis::new(3, 5, vec![]).unwrap();
        assert!(RestrictionProblem::new(5, 3, 1, 20, Field::Rational, vec![b3]).is_err());
        // Bad eigenvalue and empty basis list.
        assert!(RestrictionProblem::new(5, 2, 0, 20, Field::Rational, vec![b.clone()]).is_err());
        assert!(RestrictionProblem::new(5, 2, 1, 20, Field::Rational, vec![]).is_err());
        // Mixed weight inside one basis.
        assert!(JacobiBasis::new(2, 5, vec![synthetic(4, 5, 8, 2)]).is_err());
    }

    #[test]
    fn empty_slice_basis_still_constrains_other_slices() {
        // With no slice-1 candidates, the eigenform relations pin slice-2
        // coefficients c(1, r) to eps * c(2, -r; 0) = 0.
        let b1 = JacobiBasis::new(2, 5, vec![]).unwrap();
        let b2 = JacobiBasis::new(2, 10, vec![synthetic(2, 10, 8, 41)]).unwrap();
        let p = RestrictionProblem::new(5, 2, 1, 40, Field::Rational, vec![b1, b2]).unwrap();
        let rels = p.build_relations().unwrap();
        let bound = p.dim_bound(&rels).unwrap();
        assert_eq!(bound, 0, "synthetic slice-2 form should violate a relation");
    }

}
