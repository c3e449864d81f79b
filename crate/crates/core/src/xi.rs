//! The Ξ-sequence of an operator relative to a band system, computed from the
//! partial-trace definition and from the closed forms of both families.
//!
//! Operators use the orientation `T_ij = <T e_j, e_i>`: row `i`, column `j`.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::family::{CoefficientFamily, FamilyError, FamilyKind};
use crate::scalar::{rational_to_f64, Rational, Scalar, ScalarError};
use crate::systems::BandSystem;
use crate::witness::VecSeq;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum XiError {
    #[error("operator entry ({row}, {col}) lies outside the window (indices <= {limit})")]
    SupportExceedsWindow { row: usize, col: usize, limit: usize },
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error("vector dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("sequence has {len} vectors, need at least {need}")]
    TooShort { len: usize, need: usize },
}

/// Finitely supported operator `(row, col) -> value`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseOperator<S> {
    entries: BTreeMap<(usize, usize), S>,
}

impl<S: Scalar> SparseOperator<S> {
    pub fn new() -> Self {
        SparseOperator { entries: BTreeMap::new() }
    }

    /// Sets `T_{row,col}`; writing zero removes the entry.
    pub fn set(&mut self, row: usize, col: usize, value: S) {
        if value.is_zero() {
            self.entries.remove(&(row, col));
        } else {
            self.entries.insert((row, col), value);
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: S) {
        let current = self.get(row, col);
        self.set(row, col, current + value);
    }

    pub fn get(&self, row: usize, col: usize) -> S {
        self.entries.get(&(row, col)).cloned().unwrap_or_else(S::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &S)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn trace(&self) -> S {
        self.entries
            .iter()
            .filter(|((i, j), _)| i == j)
            .fold(S::zero(), |acc, (_, v)| acc + v.clone())
    }

    /// Largest row or column index in the support.
    pub fn max_index(&self) -> Option<usize> {
        self.entries.keys().map(|(i, j)| (*i).max(*j)).max()
    }

    /// Sum of absolute entry values, a finite-window stand-in for the trace norm.
    pub fn abs_sum(&self) -> S {
        self.entries.values().fold(S::zero(), |acc, v| acc + v.abs())
    }

    pub fn scaled(&self, alpha: &S) -> Self {
        let mut out = SparseOperator::new();
        for (&(i, j), v) in &self.entries {
            out.set(i, j, alpha.clone() * v.clone());
        }
        out
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: &S, other: &Self, beta: &S) -> Self {
        let mut out = self.scaled(alpha);
        for (&(i, j), v) in &other.entries {
            out.add(i, j, beta.clone() * v.clone());
        }
        out
    }

    pub fn to_exact(&self) -> Result<SparseOperator<Rational>, ScalarError> {
        let mut out = SparseOperator::new();
        for (&(i, j), v) in &self.entries {
            out.set(i, j, v.to_exact()?);
        }
        Ok(out)
    }

    pub fn from_exact(op: &SparseOperator<Rational>) -> Self {
        let mut out = SparseOperator::new();
        for (&(i, j), v) in &op.entries {
            out.set(i, j, S::from_rational(v));
        }
        out
    }

    /// `[[row, col, "value"], ...]` in row-major order.
    pub fn entries_json(&self) -> Value {
        Value::Array(self.entries.iter().map(|((i, j), v)| json!([i, j, v.format()])).collect())
    }

    pub fn from_entries<I: IntoIterator<Item = (usize, usize, S)>>(entries: I) -> Self {
        let mut out = SparseOperator::new();
        for (i, j, v) in entries {
            out.add(i, j, v);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiProvenance {
    Definitional,
    ClosedFormLw,
    ClosedFormPenta,
}

impl std::fmt::Display for XiProvenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            XiProvenance::Definitional => "definitional",
            XiProvenance::ClosedFormLw => "closed_form_lw",
            XiProvenance::ClosedFormPenta => "closed_form_penta",
        })
    }
}

/// `Ξ_0..=Ξ_N`, held exactly. Float-mode inputs are converted exactly, so the
/// values are the true Ξ of the stored data.
#[derive(Debug, Clone, PartialEq)]
pub struct XiSeq {
    pub values: Vec<Rational>,
    pub provenance: XiProvenance,
}

impl XiSeq {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, n: usize) -> Option<&Rational> {
        self.values.get(n)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(rational_to_f64).collect()
    }

    pub fn as_scalars<S: Scalar>(&self) -> Vec<S> {
        self.values.iter().map(S::from_rational).collect()
    }

    /// CSV with columns `n,xi,provenance`; values printed in the scalar type `S`.
    pub fn to_csv<S: Scalar>(&self) -> String {
        let mut out = String::from("n,xi,provenance\n");
        for (n, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{n},{},{}\n", S::from_rational(v).format(), self.provenance));
        }
        out
    }
}

fn exact_entries<S: Scalar>(op: &SparseOperator<S>) -> Result<BTreeMap<(usize, usize), Rational>, ScalarError> {
    op.iter().map(|(k, v)| Ok((k, v.to_exact()?))).collect()
}

fn check_support<S: Scalar>(op: &SparseOperator<S>, limit: usize) -> Result<(), XiError> {
    for ((row, col), _) in op.iter() {
        if row > limit || col > limit {
            return Err(XiError::SupportExceedsWindow { row, col, limit });
        }
    }
    Ok(())
}

/// `<T f_m, f*_m>` for `m = 0..=n`, exactly.
pub fn pairings<S: Scalar>(op: &SparseOperator<S>, system: &BandSystem, n: usize) -> Result<Vec<Rational>, XiError> {
    let t = exact_entries(op)?;
    let mut out = Vec::with_capacity(n + 1);
    for m in 0..=n {
        let f = system.f::<S>(m)?;
        let fs = system.f_star::<S>(m)?;
        let mut acc = Rational::zero();
        for (j, fj) in f.iter() {
            let fj = fj.to_exact()?;
            for (i, fi) in fs.iter() {
                if let Some(tij) = t.get(&(i, j)) {
                    acc += fi.to_exact()? * &fj * tij;
                }
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// Ξ from the definition, accumulated one index at a time:
/// `Ξ_m = Ξ_{m-1} + <T f_m, f*_m> - T_mm`.
pub fn xi_definitional<S: Scalar>(op: &SparseOperator<S>, system: &BandSystem, n: usize) -> Result<XiSeq, XiError> {
    check_support(op, n + system.bandwidth())?;
    let pairs = pairings(op, system, n)?;
    let mut values = Vec::with_capacity(n + 1);
    let mut acc = Rational::zero();
    for (m, p) in pairs.into_iter().enumerate() {
        acc += p - op.get(m, m).to_exact()?;
        values.push(acc.clone());
    }
    Ok(XiSeq { values, provenance: XiProvenance::Definitional })
}

fn coef<S: Scalar>(family: &CoefficientFamily, which: crate::family::Coefficient, n: i64) -> Result<Rational, XiError> {
    Ok(family.coefficient::<S>(which, n)?.to_exact()?)
}

/// Tridiagonal closed form: `Ξ_{2k} = a_{2k+1} T_{2k+1,2k}`,
/// `Ξ_{2k-1} = a_{2k} T_{2k-1,2k}`.
pub fn xi_closed_lw<S: Scalar>(op: &SparseOperator<S>, family: &CoefficientFamily, n: usize) -> Result<XiSeq, XiError> {
    use crate::family::Coefficient::A;
    family.expect_kind(FamilyKind::Lw)?;
    let mut values = Vec::with_capacity(n + 1);
    for m in 0..=n {
        let a = coef::<S>(family, A, m as i64 + 1)?;
        let t = if m % 2 == 0 { op.get(m + 1, m) } else { op.get(m, m + 1) };
        values.push(a * t.to_exact()?);
    }
    Ok(XiSeq { values, provenance: XiProvenance::ClosedFormLw })
}

/// One value of the pentadiagonal closed form, four lines per block `4j..4j+3`.
pub fn xi_penta_at<S: Scalar>(op: &SparseOperator<S>, family: &CoefficientFamily, m: usize) -> Result<Rational, XiError> {
    let t = |i: usize, j: usize| op.get(i, j).to_exact();
    let base = m - m % 4;
    let k = (base / 2) as i64;
    Ok(match m % 4 {
        0 => {
            let p = family.penta_at::<S>(k)?;
            p.a.to_exact()? * t(base + 1, base)? + p.c.to_exact()? * t(base + 2, base)?
        }
        1 => {
            let p = family.penta_at::<S>(k)?;
            -p.d.to_exact()? * t(base + 2, base)? + p.b.to_exact()? * t(base + 2, base + 1)?
        }
        2 => {
            let p = family.penta_at::<S>(k + 1)?;
            p.a.to_exact()? * t(base + 2, base + 3)? + p.c.to_exact()? * t(base + 2, base + 4)?
        }
        _ => {
            let p = family.penta_at::<S>(k + 1)?;
            -p.d.to_exact()? * t(base + 2, base + 4)? + p.b.to_exact()? * t(base + 3, base + 4)?
        }
    })
}

/// Pentadiagonal closed form for `Ξ_0..=Ξ_n`.
pub fn xi_closed_penta<S: Scalar>(op: &SparseOperator<S>, family: &CoefficientFamily, n: usize) -> Result<XiSeq, XiError> {
    family.expect_kind(FamilyKind::Penta)?;
    let values = (0..=n).map(|m| xi_penta_at(op, family, m)).collect::<Result<_, _>>()?;
    Ok(XiSeq { values, provenance: XiProvenance::ClosedFormPenta })
}

/// Closed form matching the system's family kind.
pub fn xi_closed<S: Scalar>(op: &SparseOperator<S>, system: &BandSystem, n: usize) -> Result<XiSeq, XiError> {
    match system.kind() {
        FamilyKind::Lw => xi_closed_lw(op, system.family(), n),
        FamilyKind::Penta => xi_closed_penta(op, system.family(), n),
    }
}

/// Trace of `T = sum_{t,l} <u_t, v_l> e_t (x) e_l` truncated to `n`, and the
/// direct sum `sum_{m<=n} <u_m, v_m>`.
pub fn trace_two_ways<S: Scalar>(u: &VecSeq<S>, v: &VecSeq<S>, n: usize) -> Result<(S, S), XiError> {
    if u.dim() != v.dim() {
        return Err(XiError::DimensionMismatch(u.dim(), v.dim()));
    }
    for seq in [u, v] {
        if seq.len() < n + 1 {
            return Err(XiError::TooShort { len: seq.len(), need: n + 1 });
        }
    }
    let mut op = SparseOperator::new();
    for t in 0..=n {
        for l in 0..=n {
            op.set(t, l, u.dot_with(t, v, l));
        }
    }
    let direct = (0..=n).fold(S::zero(), |acc, m| acc + u.dot_with(m, v, m));
    Ok((op.trace(), direct))
}

/// Largest absolute difference between two Ξ sequences on their shared prefix.
pub fn max_abs_difference(a: &XiSeq, b: &XiSeq) -> Rational {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .fold(Rational::zero(), |m, d| if d > m { d } else { m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{builtin_family, parse_family, BUILTIN_NAMES};
    use crate::witness::VecRole;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    fn int(v: i64) -> Rational {
        Rational::from_int(v)
    }

    fn q(p: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(p), BigInt::from(d))
    }

    #[test]
    fn zero_operator_has_zero_xi() {
        let s = BandSystem::new(builtin_family("penta_unit").unwrap()).unwrap();
        let op = SparseOperator::<Rational>::new();
        let xi = xi_definitional(&op, &s, 30).unwrap();
        assert!(xi.values.iter().all(Zero::is_zero));
        assert!(xi_closed(&op, &s, 30).unwrap().values.iter().all(Zero::is_zero));
    }

    #[test]
    fn single_subdiagonal_entry_in_tridiagonal_system() {
        let fam = parse_family("n+4", FamilyKind::Lw).unwrap();
        let s = BandSystem::new(fam.clone()).unwrap();
        let op = SparseOperator::from_entries([(1, 0, int(1))]);
        assert_eq!(xi_definitional(&op, &s, 3).unwrap().values[0], int(5));
        assert_eq!(xi_closed_lw(&op, &fam, 3).unwrap().values[0], int(5));
    }

    #[test]
    fn unit_entry_reads_off_c_and_d() {
        let fam = parse_family("3; 2; 5", FamilyKind::Penta).unwrap();
        let s = BandSystem::new(fam.clone()).unwrap();
        let op = SparseOperator::from_entries([(2, 0, int(1))]);
        let closed = xi_closed_penta(&op, &fam, 5).unwrap();
        assert_eq!(closed.values[0], int(5));
        assert_eq!(closed.values[1], int(-1));
        assert_eq!(xi_definitional(&op, &s, 5).unwrap(), XiSeq { provenance: XiProvenance::Definitional, ..closed });
    }

    #[test]
    fn first_block_of_reciprocal_annihilator() {
        let fam = builtin_family("penta_unit").unwrap();
        let s = BandSystem::new(fam).unwrap();
        let op = SparseOperator::from_entries([(1, 0, int(1)), (2, 1, int(1)), (0, 0, int(-1))]);
        let xi = xi_definitional(&op, &s, 1).unwrap();
        assert_eq!(xi.values, vec![int(1), int(1)]);
    }

    #[test]
    fn support_outside_window_is_rejected() {
        let s = BandSystem::new(builtin_family("lw_linear").unwrap()).unwrap();
        let op = SparseOperator::from_entries([(9, 0, 1.0)]);
        assert_eq!(
            xi_definitional(&op, &s, 5),
            Err(XiError::SupportExceedsWindow { row: 9, col: 0, limit: 6 })
        );
    }

    #[test]
    fn trace_matches_direct_sum() {
        let mut u = VecSeq::new(2, VecRole::U);
        let mut v = VecSeq::new(2, VecRole::V);
        for m in 0..=6 {
            let e = if m % 2 == 0 { vec![int(1), int(0)] } else { vec![int(0), int(1)] };
            u.push(e.clone());
            v.push(if m % 3 == 0 { e } else { vec![int(1), int(1)] });
        }
        // overlaps: every index contributes 1
        assert_eq!(trace_two_ways(&u, &v, 6).unwrap(), (int(7), int(7)));
        let zeros = VecSeq::zeros(2, VecRole::U, 7);
        assert_eq!(trace_two_ways(&zeros, &v, 6).unwrap(), (int(0), int(0)));
        let w = VecSeq::<Rational>::zeros(1, VecRole::W, 7);
        assert!(matches!(trace_two_ways(&w, &v, 3), Err(XiError::DimensionMismatch(1, 2))));
        assert!(matches!(trace_two_ways(&u, &v, 9), Err(XiError::TooShort { .. })));
        let _ = q(1, 2);
    }

    fn arb_operator(max: usize) -> impl Strategy<Value = SparseOperator<Rational>> {
        prop::collection::vec((0..=max, 0..=max, -20i64..=20, 1i64..=5), 0..40).prop_map(|es| {
            SparseOperator::from_entries(es.into_iter().map(|(i, j, p, d)| (i, j, q(p, d))))
        })
    }

    proptest! {
        #[test]
        fn closed_forms_match_definition(op in arb_operator(20), which in 0usize..5) {
            let fam = builtin_family(BUILTIN_NAMES[which]).unwrap();
            let s = BandSystem::new(fam).unwrap();
            let def = xi_definitional(&op, &s, 20).unwrap();
            let closed = xi_closed(&op, &s, 20).unwrap();
            prop_assert_eq!(def.values, closed.values);
        }

        #[test]
        fn xi_is_linear(t1 in arb_operator(16), t2 in arb_operator(16), a in -5i64..5, b in -5i64..5) {
            let s = BandSystem::new(builtin_family("penta_geometric").unwrap()).unwrap();
            let (a, b) = (int(a), int(b));
            let lhs = xi_definitional(&t1.combine(&a, &t2, &b), &s, 14).unwrap();
            let x1 = xi_definitional(&t1, &s, 14).unwrap();
            let x2 = xi_definitional(&t2, &s, 14).unwrap();
            for n in 0..=14 {
                prop_assert_eq!(&lhs.values[n], &(&a * &x1.values[n] + &b * &x2.values[n]));
            }
        }

        #[test]
        fn annihilation_iff_xi_identity(op in arb_operator(10), which in 0usize..5, solve in any::<bool>()) {
            let s = BandSystem::new(builtin_family(BUILTIN_NAMES[which]).unwrap()).unwrap();
            let n = 10;
            let mut op = op;
            if solve {
                // The diagonal entry enters its own pairing with weight one.
                for (m, p) in pairings(&op, &s, n).unwrap().into_iter().enumerate() {
                    op.add(m, m, -p);
                }
            }
            let pairs = pairings(&op, &s, n).unwrap();
            let xi = xi_definitional(&op, &s, n).unwrap();
            let mut diag = Rational::zero();
            let mut identity_so_far = true;
            for m in 0..=n {
                diag += op.get(m, m);
                identity_so_far &= (&xi.values[m] + &diag).is_zero();
                let annihilated = pairs[..=m].iter().all(Zero::is_zero);
                prop_assert_eq!(identity_so_far, annihilated);
            }
            if solve {
                prop_assert!(identity_so_far);
            }
        }

        #[test]
        fn planar_trace_identity(coords in prop::collection::vec(-1.0f64..1.0, 84)) {
            let mut u = VecSeq::new(2, VecRole::U);
            let mut v = VecSeq::new(2, VecRole::V);
            for c in coords.chunks(4) {
                u.push(vec![c[0], c[1]]);
                v.push(vec![c[2], c[3]]);
            }
            let (a, b) = trace_two_ways(&u, &v, 20).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn float_closed_form_matches_definition_for_geometric_family() {
        let fam = builtin_family("lw_geometric2").unwrap();
        let s = BandSystem::new(fam.clone()).unwrap();
        let op = SparseOperator::from_entries([(40, 41, 0.3), (41, 40, -1.7), (40, 40, 2.0), (39, 40, 0.1)]);
        let def = xi_definitional(&op, &s, 50).unwrap().to_f64();
        let closed = xi_closed_lw(&op, &fam, 50).unwrap().to_f64();
        for (x, y) in def.iter().zip(&closed) {
            assert!((x - y).abs() <= 1e-10);
        }
    }
}
