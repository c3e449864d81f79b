//! The tridiagonal and pentadiagonal biorthogonal systems as sparse band
//! vectors over the orthonormal basis `e_0, e_1, ...`.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{Signed, Zero};
use serde_json::{json, Value};

use crate::family::{CoefficientFamily, FamilyError, FamilyKind};
use crate::scalar::{rational_to_f64, Rational, Scalar, ScalarError};

/// Sparse vector supported near `center`; zero entries are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct BandVector<S> {
    center: usize,
    entries: BTreeMap<usize, S>,
}

impl<S: Scalar> BandVector<S> {
    pub fn new(center: usize) -> Self {
        BandVector { center, entries: BTreeMap::new() }
    }

    pub fn center(&self) -> usize {
        self.center
    }

    /// Adds `value * e_index`; negative indices are outside the basis and dropped.
    fn push(&mut self, index: i64, value: S) {
        if index < 0 || value.is_zero() {
            return;
        }
        self.entries.insert(index as usize, value);
    }

    pub fn get(&self, index: usize) -> S {
        self.entries.get(&index).cloned().unwrap_or_else(S::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &S)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_offset(&self) -> usize {
        self.entries.keys().map(|k| k.abs_diff(self.center)).max().unwrap_or(0)
    }

    /// Exact inner product of the stored values.
    pub fn dot_exact(&self, other: &BandVector<S>) -> Result<Rational, ScalarError> {
        let mut acc = Rational::zero();
        for (k, v) in &self.entries {
            if let Some(w) = other.entries.get(k) {
                acc += v.to_exact()? * w.to_exact()?;
            }
        }
        Ok(acc)
    }

    pub fn to_json(&self) -> Value {
        Value::Array(self.entries.iter().map(|(k, v)| json!([k, v.format()])).collect())
    }
}

/// A biorthogonal pair `f_t, f*_t`, generated lazily from its family.
#[derive(Debug, Clone)]
pub struct BandSystem {
    kind: FamilyKind,
    family: Arc<CoefficientFamily>,
    bandwidth: usize,
}

pub fn build_lw_system(family: CoefficientFamily) -> Result<BandSystem, FamilyError> {
    family.expect_kind(FamilyKind::Lw)?;
    Ok(BandSystem { kind: FamilyKind::Lw, family: Arc::new(family), bandwidth: 1 })
}

/// Rejects families whose probed coefficients break `c_n + d_n = a_n b_n`.
pub fn build_penta_system(family: CoefficientFamily) -> Result<BandSystem, FamilyError> {
    family.expect_kind(FamilyKind::Penta)?;
    family.validate()?;
    Ok(BandSystem::penta_unchecked(family))
}

impl BandSystem {
    pub fn new(family: CoefficientFamily) -> Result<BandSystem, FamilyError> {
        match family.kind() {
            FamilyKind::Lw => build_lw_system(family),
            FamilyKind::Penta => build_penta_system(family),
        }
    }

    /// Pentadiagonal system without the constraint probe.
    pub fn penta_unchecked(family: CoefficientFamily) -> BandSystem {
        BandSystem { kind: FamilyKind::Penta, family: Arc::new(family), bandwidth: 2 }
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn family(&self) -> &CoefficientFamily {
        &self.family
    }

    pub fn f<S: Scalar>(&self, t: usize) -> Result<BandVector<S>, FamilyError> {
        match self.kind {
            FamilyKind::Lw => self.lw_vector(t, false),
            FamilyKind::Penta => self.penta_vector(t, false),
        }
    }

    pub fn f_star<S: Scalar>(&self, t: usize) -> Result<BandVector<S>, FamilyError> {
        match self.kind {
            FamilyKind::Lw => self.lw_vector(t, true),
            FamilyKind::Penta => self.penta_vector(t, true),
        }
    }

    fn lw_vector<S: Scalar>(&self, t: usize, star: bool) -> Result<BandVector<S>, FamilyError> {
        let mut v = BandVector::new(t);
        let ti = t as i64;
        let odd = t % 2 == 1;
        v.push(ti, S::one());
        // Odd f and even f* carry the off-diagonal pair.
        if odd != star {
            v.push(ti - 1, -self.family.a::<S>(ti)?);
            v.push(ti + 1, self.family.a::<S>(ti + 1)?);
        }
        Ok(v)
    }

    fn penta_vector<S: Scalar>(&self, t: usize, star: bool) -> Result<BandVector<S>, FamilyError> {
        let fam = &self.family;
        let mut v = BandVector::new(t);
        let base = (t - t % 4) as i64;
        let j2 = base / 2;
        v.push(t as i64, S::one());
        match (t % 4, star) {
            (0, false) | (2, true) => {}
            (0, true) => {
                let prev = fam.penta_at::<S>(j2 - 1)?;
                let cur = fam.penta_at::<S>(j2)?;
                v.push(base - 2, prev.d);
                v.push(base - 1, -prev.b);
                v.push(base + 1, cur.a);
                v.push(base + 2, cur.c);
            }
            (1, false) => v.push(base, -fam.penta_at::<S>(j2)?.a),
            (1, true) => v.push(base + 2, fam.penta_at::<S>(j2)?.b),
            (2, false) => {
                let cur = fam.penta_at::<S>(j2)?;
                let next = fam.penta_at::<S>(j2 + 1)?;
                v.push(base, cur.d);
                v.push(base + 1, -cur.b);
                v.push(base + 3, next.a);
                v.push(base + 4, next.c);
            }
            (3, false) => v.push(base + 4, fam.penta_at::<S>(j2 + 1)?.b),
            (3, true) => v.push(base + 2, -fam.penta_at::<S>(j2 + 1)?.a),
            _ => unreachable!(),
        }
        Ok(v)
    }

    /// `f_0..=f_n` and `f*_0..=f*_n`.
    pub fn window<S: Scalar>(&self, n: usize) -> Result<(Vec<BandVector<S>>, Vec<BandVector<S>>), FamilyError> {
        let mut f = Vec::with_capacity(n + 1);
        let mut fs = Vec::with_capacity(n + 1);
        for t in 0..=n {
            f.push(self.f(t)?);
            fs.push(self.f_star(t)?);
        }
        Ok((f, fs))
    }

    /// JSON array of `{index, f, f_star}` with entries as `[k, value]` pairs.
    pub fn window_json<S: Scalar>(&self, n: usize) -> Result<Value, FamilyError> {
        let (f, fs) = self.window::<S>(n)?;
        Ok(Value::Array(
            f.iter()
                .zip(&fs)
                .enumerate()
                .map(|(t, (a, b))| json!({"index": t, "f": a.to_json(), "f_star": b.to_json()}))
                .collect(),
        ))
    }

    /// Float tolerance for biorthogonality: `1e-12` relative to the largest
    /// coefficient magnitude in the window.
    pub fn biorthogonality_tolerance(&self, n: usize) -> Result<f64, FamilyError> {
        let (f, fs) = self.window::<f64>(n)?;
        let scale = f
            .iter()
            .chain(&fs)
            .flat_map(|v| v.iter().map(|(_, x)| x.abs()))
            .fold(1.0f64, f64::max);
        Ok(1e-12 * scale)
    }
}

/// Largest `|<f_t, f*_l> - delta_tl|` over `0 <= t, l <= n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiorthogonalityResidual {
    pub value: Rational,
    pub location: Option<(usize, usize)>,
}

impl BiorthogonalityResidual {
    pub fn as_f64(&self) -> f64 {
        rational_to_f64(&self.value)
    }
}

/// Vectors are built in the scalar type `S`; inner products are then taken
/// exactly, so the float result is the residual of the rounded vectors.
/// Pairs farther apart than twice the bandwidth have disjoint supports and
/// are skipped.
pub fn check_biorthogonality<S: Scalar>(system: &BandSystem, n: usize) -> Result<BiorthogonalityResidual, FamilyError> {
    let (f, fs) = system.window::<S>(n)?;
    let reach = 2 * system.bandwidth();
    let mut worst = BiorthogonalityResidual { value: Rational::zero(), location: None };
    for t in 0..=n {
        for l in t.saturating_sub(reach)..=(t + reach).min(n) {
            let mut r = f[t].dot_exact(&fs[l]).map_err(non_finite)?;
            if t == l {
                r -= Rational::from_int(1);
            }
            let r = r.abs();
            if r > worst.value {
                worst = BiorthogonalityResidual { value: r, location: Some((t, l)) };
            }
        }
    }
    Ok(worst)
}

fn non_finite(_: ScalarError) -> FamilyError {
    FamilyError::NonFinite
}
