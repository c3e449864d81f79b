//! Explicit witnesses for the failure of density: vector sequences in ℝ or
//! ℝ², the annihilating operators assembled from them, and the direct
//! pentadiagonal annihilator.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{mu_lw, penta_mu_at, ClassifyError, PentaCase};
use crate::family::{CoefficientFamily, FamilyError, FamilyKind, PentaCoefficients};
use crate::scalar::{rational_to_f64, Rational, Scalar, ScalarError};
use crate::xi::{xi_penta_at, SparseOperator, XiError};

/// Tolerance on the right-triangle identity.
pub const TRIANGLE_TOLERANCE: f64 = 1e-10;

/// Slack allowed when an arccos argument overshoots ±1 through rounding.
const COSINE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WitnessError {
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error(transparent)]
    Xi(#[from] XiError),
    #[error("coefficient {name}_{index} is zero")]
    ZeroCoefficient { name: &'static str, index: usize },
    #[error("angle at n = {index} is infeasible (cosine {cosine})")]
    AngleInfeasible { index: usize, cosine: f64 },
    #[error("all three ratios are infinite at n = {index}")]
    InfiniteMu { index: usize },
    #[error("right-triangle identity fails: (AX)^-2 + (BY)^-2 differs from Z^2 by a relative {residual}")]
    TriangleInfeasible { residual: f64 },
    #[error("triangle lengths and coefficients must be finite and nonzero")]
    DegenerateTriangle,
    #[error("non-positive radicand for {quantity} at n = {index}")]
    NonPositiveRadicand { index: usize, quantity: &'static str },
    #[error("vector {index} has zero length")]
    ZeroLength { index: usize },
    #[error("pair does not satisfy the Ξ relation at n = {index} (residual {residual})")]
    RelationViolated { index: usize, residual: f64 },
    #[error("Ξ vanishes at the last index; nothing is left after trimming")]
    NothingLeft,
    #[error("no nonzero vector is available to carry the starred partner")]
    EmptyWitness,
    #[error("sequence has {len} vectors, need at least {need}")]
    TooShort { len: usize, need: usize },
    #[error("non-finite value at n = {index}")]
    NonFinite { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VecRole {
    R,
    U,
    V,
    UStar,
    VStar,
    W,
    WStar,
}

/// A sequence of vectors in ℝ^k.
#[derive(Debug, Clone, PartialEq)]
pub struct VecSeq<S> {
    dim: usize,
    role: VecRole,
    vectors: Vec<Vec<S>>,
}

impl<S: Scalar> VecSeq<S> {
    pub fn new(dim: usize, role: VecRole) -> Self {
        VecSeq { dim, role, vectors: Vec::new() }
    }

    pub fn zeros(dim: usize, role: VecRole, len: usize) -> Self {
        VecSeq { dim, role, vectors: vec![vec![S::zero(); dim]; len] }
    }

    pub fn push(&mut self, v: Vec<S>) {
        assert_eq!(v.len(), self.dim, "vector dimension");
        self.vectors.push(v);
    }

    pub fn set(&mut self, n: usize, v: Vec<S>) {
        assert_eq!(v.len(), self.dim, "vector dimension");
        self.vectors[n] = v;
    }

    pub fn get(&self, n: usize) -> &[S] {
        &self.vectors[n]
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn role(&self) -> VecRole {
        self.role
    }

    pub fn iter(&self) -> impl Iterator<Item = &[S]> {
        self.vectors.iter().map(Vec::as_slice)
    }

    pub fn dot_with(&self, i: usize, other: &VecSeq<S>, j: usize) -> S {
        dot(&self.vectors[i], &other.vectors[j])
    }

    pub fn dot_exact(&self, i: usize, other: &VecSeq<S>, j: usize) -> Result<Rational, ScalarError> {
        dot_exact(&self.vectors[i], &other.vectors[j])
    }

    pub fn norm_sq(&self, n: usize) -> S {
        dot(&self.vectors[n], &self.vectors[n])
    }

    pub fn length(&self, n: usize) -> f64 {
        self.vectors[n].iter().map(|x| x.to_f64().powi(2)).sum::<f64>().sqrt()
    }

    pub fn squared_lengths(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.length(n).powi(2)).collect()
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        self.vectors.iter().map(|v| v.iter().map(Scalar::format).collect()).collect()
    }

    pub fn from_strings(dim: usize, role: VecRole, rows: &[Vec<String>]) -> Option<Self> {
        let mut out = VecSeq::new(dim, role);
        for row in rows {
            if row.len() != dim {
                return None;
            }
            out.vectors.push(row.iter().map(|s| S::parse_scalar(s)).collect::<Option<Vec<S>>>()?);
        }
        Some(out)
    }
}

fn dot<S: Scalar>(x: &[S], y: &[S]) -> S {
    x.iter().zip(y).fold(S::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
}

fn dot_exact<S: Scalar>(x: &[S], y: &[S]) -> Result<Rational, ScalarError> {
    let mut acc = Rational::zero();
    for (a, b) in x.iter().zip(y) {
        acc += a.to_exact()? * b.to_exact()?;
    }
    Ok(acc)
}

fn sign<S: Scalar>(x: &S) -> S {
    if x.is_negative() {
        -S::one()
    } else {
        S::one()
    }
}

fn check_kind(family: &CoefficientFamily, kind: FamilyKind) -> Result<(), WitnessError> {
    Ok(family.expect_kind(kind)?)
}

/// Collinear witness `r_0..=r_last` with `|r_n| = μ_n` and
/// `a_{n+1} r_n r_{n+1} = 1` for every `n < last`.
pub fn lw_witness_k1<S: Scalar>(family: &CoefficientFamily, last: usize) -> Result<VecSeq<S>, WitnessError> {
    check_kind(family, FamilyKind::Lw)?;
    let mu = mu_lw::<S>(family, last.max(1))?;
    let mut r = VecSeq::new(1, VecRole::R);
    // σ_1 = +1, so r_0 takes the sign of a_1.
    let mut sigma = sign(&family.a::<S>(1)?);
    r.push(vec![sigma.clone() * mu.values[0].clone()]);
    sigma = S::one();
    for n in 1..=last {
        if n > 1 {
            sigma = sigma * sign(&family.a::<S>(n as i64)?);
        }
        r.push(vec![sigma.clone() * mu.values[n].clone()]);
    }
    Ok(r)
}

/// `R_0 = |a_1|^{-1/2}`, `R_n = max(|a_n|^{-1/2}, |a_{n+1}|^{-1/2})`.
pub fn lw_radii(family: &CoefficientFamily, last: usize) -> Result<Vec<f64>, WitnessError> {
    check_kind(family, FamilyKind::Lw)?;
    let inv_sqrt = |n: usize| -> Result<f64, WitnessError> {
        let a = family.a::<f64>(n as i64)?;
        if a == 0.0 {
            return Err(WitnessError::ZeroCoefficient { name: "a", index: n });
        }
        Ok(1.0 / a.abs().sqrt())
    };
    let mut radii = Vec::with_capacity(last + 1);
    radii.push(inv_sqrt(1)?);
    let mut prev = inv_sqrt(1)?;
    for n in 1..=last {
        let next = inv_sqrt(n + 1)?;
        radii.push(prev.max(next));
        prev = next;
    }
    Ok(radii)
}

/// Planar witness with `|r_n| = R_n` and `a_n <r_n, r_{n-1}> = 1`, built by
/// turning each vector through `arccos(1/(a_n R_n R_{n-1}))` from the last.
pub fn lw_witness_k2(family: &CoefficientFamily, last: usize) -> Result<VecSeq<f64>, WitnessError> {
    let radii = lw_radii(family, last)?;
    let mut r = VecSeq::new(2, VecRole::R);
    r.push(vec![radii[0], 0.0]);
    let mut phi = 0.0f64;
    for n in 1..=last {
        let a = family.a::<f64>(n as i64)?;
        let mut cosine = 1.0 / (a * radii[n] * radii[n - 1]);
        if !cosine.is_finite() {
            return Err(WitnessError::NonFinite { index: n });
        }
        if cosine.abs() > 1.0 {
            if cosine.abs() > 1.0 + COSINE_SLACK {
                return Err(WitnessError::AngleInfeasible { index: n, cosine });
            }
            cosine = cosine.signum();
        }
        phi = (phi + cosine.acos()).rem_euclid(TAU);
        r.push(vec![radii[n] * phi.cos(), radii[n] * phi.sin()]);
    }
    Ok(r)
}

/// Turns `r` into a `(w, w*)` pair: `w = r`, `w*` zero except `<w_0, w*_0> = -1`.
pub fn wrap_as_w<S: Scalar>(r: &VecSeq<S>) -> Result<(VecSeq<S>, VecSeq<S>), WitnessError> {
    if r.is_empty() {
        return Err(WitnessError::EmptyWitness);
    }
    let norm = r.norm_sq(0);
    if norm.is_zero() {
        return Err(WitnessError::EmptyWitness);
    }
    let mut w = r.clone();
    w.role = VecRole::W;
    let mut w_star = VecSeq::zeros(r.dim(), VecRole::WStar, r.len());
    w_star.set(0, r.get(0).iter().map(|x| -(x.clone() / norm.clone())).collect());
    Ok((w, w_star))
}

/// Output of [`normalize_lw_witness`]; `r_n` is zero for `n < start`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedWitness {
    pub start: usize,
    pub r: VecSeq<f64>,
}

/// Rescales a pair satisfying `a_{n+1} <w_n, w_{n+1}> = Ξ_n`, with
/// `Ξ_n = -Σ_{m<=n} <w_m, w*_m>`, into a sequence satisfying
/// `a_{n+1} <r_n, r_{n+1}> = 1`.
///
/// Indices up to the last zero of Ξ are dropped. The scale factors satisfy
/// `λ_n λ_{n+1} = 1/Ξ_n`, starting from a unit first vector.
pub fn normalize_lw_witness(
    w: &VecSeq<f64>,
    w_star: &VecSeq<f64>,
    family: &CoefficientFamily,
    last: usize,
) -> Result<NormalizedWitness, WitnessError> {
    check_kind(family, FamilyKind::Lw)?;
    for seq in [w, w_star] {
        if seq.len() < last + 1 {
            return Err(WitnessError::TooShort { len: seq.len(), need: last + 1 });
        }
    }
    let mut xi = Vec::with_capacity(last + 1);
    let mut acc = 0.0;
    for n in 0..=last {
        acc -= w.dot_with(n, w_star, n);
        xi.push(acc);
    }
    let scale = xi.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let is_zero = |x: f64| x.abs() <= 1e-12 * scale;
    let start = match (0..last).rev().find(|&n| is_zero(xi[n])) {
        Some(n) => n + 1,
        None => 0,
    };
    if start >= last {
        return Err(WitnessError::NothingLeft);
    }
    for n in start..=last {
        if w.length(n) == 0.0 {
            return Err(WitnessError::ZeroLength { index: n });
        }
    }
    for n in start..last {
        let a = family.a::<f64>(n as i64 + 1)?;
        let residual = (a * w.dot_with(n, w, n + 1) - xi[n]).abs();
        if residual > 1e-9 * xi[n].abs().max(1.0) {
            return Err(WitnessError::RelationViolated { index: n, residual });
        }
    }
    let mut r = VecSeq::zeros(w.dim(), VecRole::R, last + 1);
    let mut lambda = 1.0 / w.length(start);
    for n in start..=last {
        r.set(n, w.get(n).iter().map(|x| lambda * x).collect());
        if n < last {
            lambda = 1.0 / (xi[n] * lambda);
        }
    }
    Ok(NormalizedWitness { start, r })
}

fn coefficient_nonzero<S: Scalar>(value: &S, name: &'static str, index: usize) -> Result<(), WitnessError> {
    if value.is_zero() {
        Err(WitnessError::ZeroCoefficient { name, index })
    } else {
        Ok(())
    }
}

/// Trace-class annihilator for the pentadiagonal system over coefficient
/// indices `0..count` (basis window `0..=2*count`).
///
/// `T_00 = -1`; for each index the entries of the case attaining μ_n are
/// written so that `Ξ_m = 1` throughout, and `Σ|T_ij| = 1 + Σ μ_n`.
pub fn penta_annihilator<S: Scalar>(family: &CoefficientFamily, count: usize) -> Result<SparseOperator<S>, WitnessError> {
    check_kind(family, FamilyKind::Penta)?;
    let mut t = SparseOperator::new();
    t.set(0, 0, -S::one());
    for n in 0..count {
        let p = family.penta_at::<S>(n as i64)?;
        let (_, case) = penta_mu_at(&p);
        let case = case.ok_or(WitnessError::InfiniteMu { index: n })?;
        // Each index owns a 3x3 corner starting at basis index 2n.
        let s = 2 * n;
        let even = n % 2 == 0;
        match case {
            PentaCase::Reciprocal => {
                let (ia, ib) = (S::one() / p.a.clone(), S::one() / p.b.clone());
                if even {
                    t.set(s + 1, s, ia);
                    t.set(s + 2, s + 1, ib);
                } else {
                    t.set(s, s + 1, ia);
                    t.set(s + 1, s + 2, ib);
                }
            }
            PentaCase::DTerm => {
                let (x, y) = (p.b.clone() / p.d.clone(), -(S::one() / p.d.clone()));
                if even {
                    t.set(s + 1, s, x);
                    t.set(s + 2, s, y);
                } else {
                    t.set(s, s + 1, x);
                    t.set(s, s + 2, y);
                }
            }
            PentaCase::CTerm => {
                let (x, y) = (S::one() / p.c.clone(), p.a.clone() / p.c.clone());
                if even {
                    t.set(s + 2, s, x);
                    t.set(s + 2, s + 1, y);
                } else {
                    t.set(s, s + 2, x);
                    t.set(s + 1, s + 2, y);
                }
            }
        }
    }
    Ok(t)
}

/// Per-index lengths for the planar pentadiagonal witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthPlan {
    /// `V_0..=V_count`
    pub v: Vec<f64>,
    /// `M_0..=M_{count+1}`, with `M_0 = 0`
    pub m: Vec<f64>,
    /// `U_0..U_count`
    pub u: Vec<f64>,
    /// Attaining case for `0..=count`
    pub cases: Vec<PentaCase>,
    /// `μ_0..=μ_count`
    pub mu: Vec<f64>,
}

impl LengthPlan {
    pub fn count(&self) -> usize {
        self.u.len()
    }
}

/// Float coefficients at `n` with the attaining case and μ_n.
///
/// The case is chosen exactly whenever the family has rational values, so a
/// product such as `a_n b_n` overflowing `f64` does not disturb it. Only the
/// coefficients the case uses have to be finite.
pub fn selected_case(
    family: &CoefficientFamily,
    n: usize,
) -> Result<(PentaCoefficients<f64>, f64, PentaCase), WitnessError> {
    let (p, value, case) = match family.penta_at::<Rational>(n as i64) {
        Ok(exact) => {
            let (value, case) = penta_mu_at(&exact);
            let p = PentaCoefficients {
                a: exact.a.to_f64(),
                b: exact.b.to_f64(),
                c: exact.c.to_f64(),
                d: exact.d.to_f64(),
            };
            (p, value.map(|v| v.to_f64()), case)
        }
        Err(FamilyError::Eval { .. }) => {
            let p = family.penta_at::<f64>(n as i64)?;
            if ![p.a, p.b, p.c, p.d].iter().all(|x| x.is_finite()) {
                return Err(WitnessError::NonFinite { index: n });
            }
            let (value, case) = penta_mu_at(&p);
            (p, value, case)
        }
        Err(e) => return Err(e.into()),
    };
    let (value, case) = match (value, case) {
        (Some(v), Some(c)) => (v, c),
        _ => return Err(WitnessError::InfiniteMu { index: n }),
    };
    let used = match case {
        PentaCase::Reciprocal => [p.a, p.b],
        PentaCase::CTerm => [p.a, p.c],
        PentaCase::DTerm => [p.b, p.d],
    };
    if !used.iter().all(|x| x.is_finite()) || !value.is_finite() {
        return Err(WitnessError::NonFinite { index: n });
    }
    Ok((p, value, case))
}

/// Lengths `V_n`, `M_n`, `U_n` for coefficient indices `0..count`, following
/// the case that attains μ_n at each index. `M_0 = 0`, so the first step
/// uses the same rules as every other.
pub fn penta_length_plan(family: &CoefficientFamily, count: usize) -> Result<LengthPlan, WitnessError> {
    check_kind(family, FamilyKind::Penta)?;
    let mut coeffs = Vec::with_capacity(count + 1);
    let mut cases = Vec::with_capacity(count + 1);
    let mut mu = Vec::with_capacity(count + 1);
    for n in 0..=count {
        let (p, value, case) = selected_case(family, n)?;
        mu.push(value);
        cases.push(case);
        coeffs.push(p);
    }
    let mut m = vec![0.0f64];
    let mut v = Vec::with_capacity(count + 1);
    for n in 0..=count {
        let p = &coeffs[n];
        let (a, b, c, d) = (p.a.abs(), p.b.abs(), p.c.abs(), p.d.abs());
        let (next_m, floor) = match cases[n] {
            PentaCase::Reciprocal => (1.0 / b.sqrt(), 1.0 / a.sqrt()),
            PentaCase::CTerm => ((a / c).sqrt().max(1.0 / c.sqrt()), 2.0 / c.sqrt()),
            PentaCase::DTerm => ((b / d).sqrt().max(1.0 / d.sqrt()), (2.0 + b.sqrt()) / d.sqrt()),
        };
        v.push(m[n].max(floor));
        m.push(next_m);
    }
    let mut u = Vec::with_capacity(count);
    for n in 0..count {
        let p = &coeffs[n];
        let (vn, vn1) = (v[n], v[n + 1]);
        let value = match cases[n] {
            PentaCase::Reciprocal => {
                (1.0 / (p.a * vn).powi(2) + 1.0 / (p.b * vn1).powi(2)).sqrt()
            }
            PentaCase::CTerm => {
                let radicand = (p.c * vn1 * vn).powi(2) - 1.0;
                if radicand <= 0.0 {
                    return Err(WitnessError::NonPositiveRadicand { index: n, quantity: "U" });
                }
                p.a.abs() * vn / radicand.sqrt()
            }
            PentaCase::DTerm => {
                let radicand = (p.d * vn * vn1).powi(2) - 1.0;
                if radicand <= 0.0 {
                    return Err(WitnessError::NonPositiveRadicand { index: n, quantity: "U" });
                }
                p.b.abs() * vn1 / radicand.sqrt()
            }
        };
        if !value.is_finite() {
            return Err(WitnessError::NonFinite { index: n });
        }
        u.push(value);
    }
    Ok(LengthPlan { v, m, u, cases, mu })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vertex {
    X,
    Y,
    Z,
}

/// Three planar vectors with `<x, y> = 0`, `<x, z> = 1/A`, `<y, z> = 1/B`
/// and lengths `X`, `Y`, `Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleSolution {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
    pub a: f64,
    pub b: f64,
    pub lengths: [f64; 3],
    /// Angle between `x` and `z`.
    pub alpha: f64,
}

/// Places `z = (Z, 0)`, `x = X (p, q)`, `y = Y (q, -p)` with
/// `p = 1/(AXZ)`, `q = 1/(BYZ)`; requires `p² + q² = 1`.
pub fn triangle_solve(a: f64, b: f64, x: f64, y: f64, z: f64) -> Result<TriangleSolution, WitnessError> {
    let all = [a, b, x, y, z];
    if all.iter().any(|v| !v.is_finite() || *v == 0.0) || x < 0.0 || y < 0.0 || z < 0.0 {
        return Err(WitnessError::DegenerateTriangle);
    }
    let p = 1.0 / (a * x * z);
    let q = 1.0 / (b * y * z);
    let residual = p * p + q * q - 1.0;
    if !(residual.abs() <= TRIANGLE_TOLERANCE) {
        return Err(WitnessError::TriangleInfeasible { residual });
    }
    Ok(TriangleSolution {
        x: [x * p, x * q],
        y: [y * q, -y * p],
        z: [z, 0.0],
        a,
        b,
        lengths: [x, y, z],
        alpha: q.atan2(p),
    })
}

impl TriangleSolution {
    /// Same triangle in a frame where `vertex` lies on the positive first
    /// axis. Coordinates come from the prescribed inner products, so the two
    /// inner products that should vanish or match exactly do.
    pub fn anchored(&self, vertex: Vertex) -> TriangleSolution {
        let [x, y, _] = self.lengths;
        let (a, b) = (self.a, self.b);
        let mut out = *self;
        match vertex {
            Vertex::X => {
                out.x = [x, 0.0];
                out.y = [0.0, y];
                out.z = [1.0 / (a * x), 1.0 / (b * y)];
            }
            Vertex::Y => {
                out.y = [y, 0.0];
                out.x = [0.0, x];
                out.z = [1.0 / (b * y), 1.0 / (a * x)];
            }
            Vertex::Z => {}
        }
        out
    }
}

fn dot2(p: [f64; 2], q: [f64; 2]) -> f64 {
    p[0] * q[0] + p[1] * q[1]
}

/// Planar pentadiagonal witness together with the split of each `u_n` into
/// the parts paired with `v_n` and with `v_{n+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PentaWitness {
    pub u: VecSeq<f64>,
    pub v: VecSeq<f64>,
    pub u_first: VecSeq<f64>,
    pub u_second: VecSeq<f64>,
    pub plan: LengthPlan,
}

/// Local coordinates of `(u, v_{n+1})` in a frame where `v_n = (V_n, 0)`,
/// plus the split of `u`.
fn local_step(
    case: PentaCase,
    p: &PentaCoefficients<f64>,
    vn: f64,
    vn1: f64,
    un: f64,
) -> Result<([f64; 2], [f64; 2], [f64; 2], [f64; 2]), WitnessError> {
    let zero = [0.0, 0.0];
    Ok(match case {
        PentaCase::Reciprocal => {
            let t = triangle_solve(p.a, p.b, vn, vn1, un)?.anchored(Vertex::X);
            // v_n and v_{n+1} are orthogonal, so u splits along the axes.
            (t.z, t.y, [t.z[0], 0.0], [0.0, t.z[1]])
        }
        PentaCase::CTerm if p.a == 0.0 || un == 0.0 => {
            let along = 1.0 / (p.c * vn);
            let across = radicand_sqrt(vn1 * vn1 - along * along)?;
            (zero, [along, across], zero, zero)
        }
        PentaCase::CTerm => {
            let t = triangle_solve(p.c / p.a, p.c, un, vn, vn1)?.anchored(Vertex::Y);
            (t.x, t.z, zero, t.x)
        }
        PentaCase::DTerm if p.b == 0.0 || un == 0.0 => {
            let along = -1.0 / (p.d * vn);
            let across = radicand_sqrt(vn1 * vn1 - along * along)?;
            (zero, [along, across], zero, zero)
        }
        PentaCase::DTerm => {
            let t = triangle_solve(p.d / p.b, -p.d, un, vn1, vn)?;
            (t.x, t.y, t.x, zero)
        }
    })
}

fn radicand_sqrt(x: f64) -> Result<f64, WitnessError> {
    if x < -TRIANGLE_TOLERANCE {
        Err(WitnessError::TriangleInfeasible { residual: x })
    } else {
        Ok(x.max(0.0).sqrt())
    }
}

/// Builds `u_0..u_count` and `v_0..=v_count` satisfying both pentadiagonal
/// Ξ relations with value 1 at every coefficient index `n < count`.
///
/// Each step solves a right triangle in a frame anchored on `v_n` and carries
/// it to the plane by the rotation taking the first axis to the direction of
/// the already placed `v_n`.
pub fn penta_witness_2d(family: &CoefficientFamily, count: usize) -> Result<PentaWitness, WitnessError> {
    let plan = penta_length_plan(family, count)?;
    let mut u = VecSeq::new(2, VecRole::U);
    let mut v = VecSeq::new(2, VecRole::V);
    let mut u_first = VecSeq::new(2, VecRole::U);
    let mut u_second = VecSeq::new(2, VecRole::U);
    v.push(vec![0.0, plan.v[0]]);
    for n in 0..count {
        let (p, _, _) = selected_case(family, n)?;
        let (lu, lv, la, lb) = local_step(plan.cases[n], &p, plan.v[n], plan.v[n + 1], plan.u[n])?;
        let g = [v.get(n)[0], v.get(n)[1]];
        let norm = dot2(g, g).sqrt();
        if norm == 0.0 {
            return Err(WitnessError::ZeroLength { index: n });
        }
        let e1 = [g[0] / norm, g[1] / norm];
        let e2 = [-e1[1], e1[0]];
        let place = |c: [f64; 2]| vec![c[0] * e1[0] + c[1] * e2[0], c[0] * e1[1] + c[1] * e2[1]];
        u.push(place(lu));
        u_first.push(place(la));
        u_second.push(place(lb));
        v.push(place(lv));
    }
    Ok(PentaWitness { u, v, u_first, u_second, plan })
}

/// Operator given by row and column vectors: `T_ij = <row_i, col_j>`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankKOperator<S> {
    dim: usize,
    window: usize,
    rows: BTreeMap<usize, Vec<S>>,
    cols: BTreeMap<usize, Vec<S>>,
}

impl<S: Scalar> RankKOperator<S> {
    pub fn new(dim: usize, window: usize) -> Self {
        RankKOperator { dim, window, rows: BTreeMap::new(), cols: BTreeMap::new() }
    }

    pub fn set_row(&mut self, i: usize, v: Vec<S>) {
        assert_eq!(v.len(), self.dim);
        self.rows.insert(i, v);
    }

    pub fn set_col(&mut self, j: usize, v: Vec<S>) {
        assert_eq!(v.len(), self.dim);
        self.cols.insert(j, v);
    }

    pub fn entry(&self, i: usize, j: usize) -> S {
        match (self.rows.get(&i), self.cols.get(&j)) {
            (Some(r), Some(c)) => dot(r, c),
            _ => S::zero(),
        }
    }

    /// Entries with `|i - j| <= reach` plus the diagonal, inside the window.
    /// Entries farther out never meet a band vector pair of half-width
    /// `reach / 2`.
    pub fn to_sparse(&self, reach: usize) -> SparseOperator<S> {
        let mut out = SparseOperator::new();
        for &i in self.rows.keys().filter(|&&i| i <= self.window) {
            for j in i.saturating_sub(reach)..=(i + reach).min(self.window) {
                out.set(i, j, self.entry(i, j));
            }
        }
        out
    }
}

fn starred_partner<S: Scalar>(v: &[S]) -> Result<Vec<S>, WitnessError> {
    let norm = dot(v, v);
    if norm.is_zero() {
        return Err(WitnessError::EmptyWitness);
    }
    Ok(v.iter().map(|x| -(x.clone() / norm.clone())).collect())
}

/// `<-v/|v|², v>` is -1 identically; store it without the float rounding.
fn with_unit_corner<S: Scalar>(mut t: SparseOperator<S>) -> SparseOperator<S> {
    t.set(0, 0, -S::one());
    t
}

/// Tridiagonal operator from `r_0..=r_N`: even `r_m` are columns, odd `r_m`
/// rows, and row 0 carries `-r_0/|r_0|²`, so `T_00 = -1` and
/// `Ξ_m = a_{m+1} <r_m, r_{m+1}>`.
pub fn assemble_lw<S: Scalar>(r: &VecSeq<S>) -> Result<SparseOperator<S>, WitnessError> {
    if r.is_empty() {
        return Err(WitnessError::EmptyWitness);
    }
    let window = r.len() - 1;
    let mut op = RankKOperator::new(r.dim(), window);
    for m in 0..=window {
        if m % 2 == 0 {
            op.set_col(m, r.get(m).to_vec());
        } else {
            op.set_row(m, r.get(m).to_vec());
        }
    }
    op.set_row(0, starred_partner(r.get(0))?);
    Ok(with_unit_corner(op.to_sparse(2)))
}

/// Pentadiagonal operator from a planar witness over the basis window
/// `0..=2*count`. `v_n` sits at index `2n`, the two parts of `u_n` at `2n+1`,
/// alternating between row and column so that the Ξ relations read off the
/// witness inner products.
pub fn assemble_penta(witness: &PentaWitness) -> Result<SparseOperator<f64>, WitnessError> {
    let count = witness.u.len();
    let mut op = RankKOperator::new(2, 2 * count);
    for n in 0..=count {
        let v = witness.v.get(n).to_vec();
        if n % 2 == 0 {
            op.set_col(2 * n, v);
        } else {
            op.set_row(2 * n, v);
        }
    }
    for n in 0..count {
        let (first, second) = (witness.u_first.get(n).to_vec(), witness.u_second.get(n).to_vec());
        if n % 2 == 0 {
            op.set_row(2 * n + 1, first);
            op.set_col(2 * n + 1, second);
        } else {
            op.set_col(2 * n + 1, first);
            op.set_row(2 * n + 1, second);
        }
    }
    op.set_row(0, starred_partner(witness.v.get(0))?);
    Ok(with_unit_corner(op.to_sparse(4)))
}

/// Row mass of one pentadiagonal index as a function of its free entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMass {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    pub min: f64,
    pub argmin: f64,
    /// Value at the operator's own free entry.
    pub current: f64,
    pub free_entry: (usize, usize),
    pub xi: (f64, f64),
}

/// `g(x) = |(Ξ_{2n} - c x)/a| + |x| + |(Ξ_{2n+1} + d x)/b|`.
pub fn row_mass_value(a: f64, b: f64, c: f64, d: f64, xi: (f64, f64), x: f64) -> f64 {
    ((xi.0 - c * x) / a).abs() + x.abs() + ((xi.1 + d * x) / b).abs()
}

/// Minimum of the row mass over the free entry at coefficient index `n`,
/// evaluated at the breakpoints `0`, `Ξ_{2n}/c_n` and `-Ξ_{2n+1}/d_n`.
/// A breakpoint is dropped when its `c_n` or `d_n` vanishes.
pub fn row_mass_diagnostic<S: Scalar>(
    op: &SparseOperator<S>,
    family: &CoefficientFamily,
    n: usize,
) -> Result<RowMass, WitnessError> {
    check_kind(family, FamilyKind::Penta)?;
    let p = family.penta_at::<f64>(n as i64)?;
    coefficient_nonzero(&p.a, "a", n)?;
    coefficient_nonzero(&p.b, "b", n)?;
    let xi = (
        rational_to_f64(&xi_penta_at(op, family, 2 * n)?),
        rational_to_f64(&xi_penta_at(op, family, 2 * n + 1)?),
    );
    let free_entry = if n % 2 == 0 { (2 * n + 2, 2 * n) } else { (2 * n, 2 * n + 2) };
    let mut breakpoints = vec![0.0];
    if p.c != 0.0 {
        breakpoints.push(xi.0 / p.c);
    }
    if p.d != 0.0 {
        breakpoints.push(-xi.1 / p.d);
    }
    let values: Vec<f64> = breakpoints.iter().map(|&x| row_mass_value(p.a, p.b, p.c, p.d, xi, x)).collect();
    let (argmin, min) = breakpoints
        .iter()
        .zip(&values)
        .fold((0.0, f64::INFINITY), |best, (&x, &g)| if g < best.1 { (x, g) } else { best });
    let current = row_mass_value(p.a, p.b, p.c, p.d, xi, op.get(free_entry.0, free_entry.1).to_f64());
    Ok(RowMass { breakpoints, values, min, argmin, current, free_entry, xi })
}
