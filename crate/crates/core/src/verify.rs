//! Brute-force checks on operators and witnesses, gathered into reports.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::{CoefficientFamily, FamilyError, FamilyKind};
use crate::scalar::{Mode, Rational, Scalar, ScalarError};
use crate::systems::BandSystem;
use crate::witness::{LengthPlan, VecSeq};
use crate::xi::{pairings, xi_definitional, SparseOperator, XiError};

/// Default absolute tolerance on float residuals.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Relative tolerance on vector lengths.
pub const LENGTH_TOLERANCE: f64 = 1e-12;

/// Slack on the length bounds.
pub const BOUND_SLACK: f64 = 1e-12;

/// Last-decade increment below which a partial-sum sequence counts as flat.
pub const FLAT_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Xi(#[from] XiError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error("{name} has {len} vectors, need {need}")]
    TooShort { name: &'static str, len: usize, need: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub worst_value: String,
    pub location: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<Check>,
    pub mode: Mode,
    pub window: usize,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(mode: Mode, window: usize) -> Self {
        Report { checks: Vec::new(), mode, window, warnings: Vec::new() }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
        self.warnings.extend(other.warnings);
    }

    /// `fail` if any check failed, otherwise `pass`.
    pub fn status(&self) -> CheckStatus {
        if self.checks.iter().any(|c| c.status == CheckStatus::Fail) {
            CheckStatus::Fail
        } else {
            CheckStatus::Pass
        }
    }

    pub fn passed(&self) -> bool {
        self.status() == CheckStatus::Pass
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| c.status == CheckStatus::Fail)
    }

    pub fn count(&self, status: CheckStatus) -> usize {
        self.checks.iter().filter(|c| c.status == status).count()
    }

    pub fn named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Check> + 'a {
        self.checks.iter().filter(move |c| c.name == name)
    }
}

/// True when both reports have the same status at every position and the
/// same location for every failure.
pub fn agree_check_by_check(a: &Report, b: &Report) -> bool {
    a.checks.len() == b.checks.len()
        && a.checks.iter().zip(&b.checks).all(|(x, y)| {
            x.status == y.status && (x.status != CheckStatus::Fail || x.location == y.location)
        })
}

fn format_residual<S: Scalar>(r: &Rational) -> String {
    S::from_rational(r).format()
}

fn within(residual: &Rational, tol: f64) -> bool {
    let tol = Rational::from_float(tol.max(0.0)).unwrap_or_else(Rational::zero);
    residual.abs() <= tol
}

fn location(n: usize) -> Option<String> {
    Some(format!("n={n}"))
}

/// Highest index whose band fits in the window, if any.
fn last_checked(window: usize, bandwidth: usize) -> Option<usize> {
    window.checked_sub(bandwidth)
}

/// Check `n` covers indices `0..=n`: it fails once any of them is out of
/// tolerance, reports the largest residual so far, and locates the first
/// failing index. Indices past the last residual are skipped.
fn prefix_checks<S: Scalar>(name: &str, residuals: &[Rational], window: usize, tol: f64, report: &mut Report) {
    let mut worst = Rational::zero();
    let mut first_bad = None;
    for (n, r) in residuals.iter().enumerate() {
        let r = r.abs();
        if first_bad.is_none() && !within(&r, tol) {
            first_bad = Some(n);
        }
        if r > worst {
            worst = r;
        }
        report.push(Check {
            name: name.to_string(),
            status: if first_bad.is_some() { CheckStatus::Fail } else { CheckStatus::Pass },
            worst_value: format_residual::<S>(&worst),
            location: location(first_bad.unwrap_or(n)),
        });
    }
    for n in residuals.len()..=window {
        report.push(Check {
            name: name.to_string(),
            status: CheckStatus::Skipped,
            worst_value: String::new(),
            location: location(n),
        });
    }
}

/// Annihilation `<T f_m, f*_m> = 0` for `m <= n`, one check per `n`.
/// Indices whose band leaves the window are skipped.
pub fn verify_annihilation<S: Scalar>(
    op: &SparseOperator<S>,
    system: &BandSystem,
    window: usize,
    tol: f64,
) -> Result<Report, VerifyError> {
    let mut report = Report::new(S::MODE, window);
    let residuals = match last_checked(window, system.bandwidth()) {
        Some(last) => pairings(op, system, last)?,
        None => Vec::new(),
    };
    prefix_checks::<S>("annihilation", &residuals, window, tol, &mut report);
    Ok(report)
}

/// `Ξ_m + Σ_{s<=m} T_ss = 0` for `m <= n`, one check per `n`. Agrees with
/// [`verify_annihilation`] check by check, since the left side is the sum of
/// the pairings up to `m`.
pub fn verify_xi_identity<S: Scalar>(
    op: &SparseOperator<S>,
    system: &BandSystem,
    window: usize,
    tol: f64,
) -> Result<Report, VerifyError> {
    let mut report = Report::new(S::MODE, window);
    let mut residuals = Vec::new();
    if let Some(last) = last_checked(window, system.bandwidth()) {
        let xi = xi_definitional(op, system, last)?;
        let mut diag = Rational::zero();
        for (m, x) in xi.values.iter().enumerate() {
            diag += op.get(m, m).to_exact()?;
            residuals.push(x + &diag);
        }
    }
    prefix_checks::<S>("xi_identity", &residuals, window, tol, &mut report);
    Ok(report)
}

/// Worst residual and first index beyond tolerance over a sequence.
struct Tracker {
    worst: Rational,
    worst_at: Option<usize>,
    first_bad: Option<usize>,
}

impl Tracker {
    fn new() -> Self {
        Tracker { worst: Rational::zero(), worst_at: None, first_bad: None }
    }

    fn record(&mut self, n: usize, residual: Rational, tol: f64) {
        let residual = residual.abs();
        if self.first_bad.is_none() && !within(&residual, tol) {
            self.first_bad = Some(n);
        }
        if self.worst_at.is_none() || residual > self.worst {
            self.worst = residual;
            self.worst_at = Some(n);
        }
    }

    fn check<S: Scalar>(self, name: &str) -> Check {
        let status = match (self.worst_at, self.first_bad) {
            (None, _) => CheckStatus::Skipped,
            (_, Some(_)) => CheckStatus::Fail,
            _ => CheckStatus::Pass,
        };
        Check {
            name: name.to_string(),
            status,
            worst_value: format_residual::<S>(&self.worst),
            location: self.first_bad.or(self.worst_at).and_then(location),
        }
    }
}

fn need<S: Scalar>(name: &'static str, seq: &VecSeq<S>, len: usize) -> Result<(), VerifyError> {
    if seq.len() < len {
        Err(VerifyError::TooShort { name, len: seq.len(), need: len })
    } else {
        Ok(())
    }
}

/// `a_{n+1} <r_n, r_{n+1}> = 1` for `n < last`, exactly evaluated.
pub fn verify_lw_relation<S: Scalar>(
    r: &VecSeq<S>,
    family: &CoefficientFamily,
    last: usize,
    tol: f64,
) -> Result<Report, VerifyError> {
    family.expect_kind(FamilyKind::Lw)?;
    need("r", r, last + 1)?;
    let mut tracker = Tracker::new();
    for n in 0..last {
        let a = family.a::<S>(n as i64 + 1)?.to_exact()?;
        let residual = a * r.dot_exact(n, r, n + 1)? - Rational::from_integer(1.into());
        tracker.record(n, residual, tol);
    }
    let mut report = Report::new(S::MODE, last);
    report.push(tracker.check::<S>("lw_relation"));
    Ok(report)
}

/// Both pentadiagonal relations for `j < count`:
/// `a_j <u_j, v_j> + c_j <v_{j+1}, v_j> = 1` and
/// `-d_j <v_{j+1}, v_j> + b_j <v_{j+1}, u_j> = 1`.
pub fn verify_penta_relations<S: Scalar>(
    u: &VecSeq<S>,
    v: &VecSeq<S>,
    family: &CoefficientFamily,
    count: usize,
    tol: f64,
) -> Result<Report, VerifyError> {
    family.expect_kind(FamilyKind::Penta)?;
    need("u", u, count)?;
    need("v", v, count + 1)?;
    let one = Rational::from_integer(1.into());
    let mut first = Tracker::new();
    let mut second = Tracker::new();
    for j in 0..count {
        let p = family.penta_at::<S>(j as i64)?;
        let (a, b, c, d) = (p.a.to_exact()?, p.b.to_exact()?, p.c.to_exact()?, p.d.to_exact()?);
        let vv = v.dot_exact(j + 1, v, j)?;
        first.record(j, a * u.dot_exact(j, v, j)? + c * &vv - &one, tol);
        second.record(j, -d * vv + b * v.dot_exact(j + 1, u, j)? - &one, tol);
    }
    let mut report = Report::new(S::MODE, count);
    report.push(first.check::<S>("penta_relation_even"));
    report.push(second.check::<S>("penta_relation_odd"));
    Ok(report)
}

/// Relative deviation of `|x_n|` from `expected[n]`.
pub fn verify_lengths<S: Scalar>(name: &str, seq: &VecSeq<S>, expected: &[f64], tol: f64) -> Check {
    let mut worst = 0.0f64;
    let mut worst_at = None;
    let mut first_bad = None;
    for (n, &e) in expected.iter().enumerate().take(seq.len()) {
        let dev = (seq.length(n) - e).abs() / e.abs().max(f64::MIN_POSITIVE);
        let dev = if seq.length(n) == e { 0.0 } else { dev };
        if first_bad.is_none() && !(dev <= tol) {
            first_bad = Some(n);
        }
        if worst_at.is_none() || dev > worst || dev.is_nan() {
            worst = dev;
            worst_at = Some(n);
        }
    }
    float_check(name, worst, worst_at, first_bad)
}

/// Exact length check: `|x_n|² = expected[n]²`.
pub fn verify_lengths_exact<S: Scalar>(name: &str, seq: &VecSeq<S>, expected: &[S], tol: f64) -> Result<Check, VerifyError> {
    let mut tracker = Tracker::new();
    for (n, e) in expected.iter().enumerate().take(seq.len()) {
        let e = e.to_exact()?;
        tracker.record(n, seq.dot_exact(n, seq, n)? - &e * &e, tol);
    }
    Ok(tracker.check::<S>(name))
}

fn float_check(name: &str, worst: f64, worst_at: Option<usize>, first_bad: Option<usize>) -> Check {
    let status = match (worst_at, first_bad) {
        (None, _) => CheckStatus::Skipped,
        (_, Some(_)) => CheckStatus::Fail,
        _ => CheckStatus::Pass,
    };
    Check {
        name: name.to_string(),
        status,
        worst_value: worst.format(),
        location: first_bad.or(worst_at).and_then(location),
    }
}

/// `trace(T) = expected` within `tol`.
pub fn verify_trace<S: Scalar>(op: &SparseOperator<S>, expected: &S, tol: f64) -> Result<Check, VerifyError> {
    let residual = op.trace().to_exact()? - expected.to_exact()?;
    Ok(Check {
        name: "trace".to_string(),
        status: if within(&residual, tol) { CheckStatus::Pass } else { CheckStatus::Fail },
        worst_value: format_residual::<S>(&residual.abs()),
        location: Some("trace".to_string()),
    })
}

/// `Σ|T_ij| <= bound`, with the excess as the reported value.
pub fn verify_entry_mass<S: Scalar>(op: &SparseOperator<S>, bound: &S) -> Result<Check, VerifyError> {
    let excess = op.abs_sum().to_exact()? - bound.to_exact()?;
    Ok(Check {
        name: "entry_mass".to_string(),
        status: if excess <= Rational::zero() { CheckStatus::Pass } else { CheckStatus::Fail },
        worst_value: format_residual::<S>(&excess),
        location: Some("sum".to_string()),
    })
}

/// `M_{n+1} <= √μ_n`, `V_n <= max(2√μ_n, M_n)` and `U_n <= 2√μ_n` for each
/// index of the plan. The reported value is the largest excess.
pub fn bounds_report(plan: &LengthPlan) -> Report {
    let count = plan.count();
    let mut report = Report::new(Mode::Float, count);
    let mut run = |name: &str, pairs: Vec<(f64, f64)>| {
        let mut worst = f64::NEG_INFINITY;
        let mut worst_at = None;
        let mut first_bad = None;
        for (n, (lhs, rhs)) in pairs.into_iter().enumerate() {
            let excess = lhs - rhs;
            if first_bad.is_none() && !(lhs <= rhs * (1.0 + BOUND_SLACK)) {
                first_bad = Some(n);
            }
            if excess > worst {
                worst = excess;
                worst_at = Some(n);
            }
        }
        report.push(float_check(name, worst, worst_at, first_bad));
    };
    let root = |n: usize| plan.mu[n].sqrt();
    run("bound_m", (0..count).map(|n| (plan.m[n + 1], root(n))).collect());
    run("bound_v", (0..count).map(|n| (plan.v[n], (2.0 * root(n)).max(plan.m[n]))).collect());
    run("bound_u", (0..count).map(|n| (plan.u[n], 2.0 * root(n))).collect());
    report
}

/// Partial sums of a non-negative sequence and how flat they are at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monitor {
    pub partial_sums: Vec<f64>,
    pub total: f64,
    /// Sum of the terms with index in `(N/10, N]`.
    pub last_decade_increment: f64,
    pub monotone: bool,
}

impl Monitor {
    pub fn is_flat(&self) -> bool {
        self.last_decade_increment < FLAT_THRESHOLD
    }
}

/// Partial sums of `values[0..=N]`; no verdict.
pub fn summability_monitor(values: &[f64]) -> Monitor {
    let mut partial_sums = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    let mut monotone = true;
    for &x in values {
        let next = acc + x;
        monotone &= next >= acc;
        acc = next;
        partial_sums.push(acc);
    }
    let last = values.len().saturating_sub(1);
    let increment = values.iter().enumerate().filter(|(n, _)| *n > last / 10).map(|(_, x)| x).sum();
    Monitor { partial_sums, total: acc, last_decade_increment: increment, monotone }
}

/// Monitor as a check that passes when the sums are monotone and flat.
pub fn monitor_check(name: &str, monitor: &Monitor) -> Check {
    Check {
        name: name.to_string(),
        status: if monitor.monotone && monitor.is_flat() { CheckStatus::Pass } else { CheckStatus::Fail },
        worst_value: monitor.last_decade_increment.format(),
        location: Some(format!("n={}", monitor.partial_sums.len().saturating_sub(1))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::builtin_family;
    use crate::witness::{
        assemble_lw, lw_witness_k1, lw_witness_k2, penta_annihilator, penta_length_plan, penta_witness_2d, VecRole,
    };
    use num_bigint::BigInt;
    use num_traits::One;

    fn system(name: &str) -> BandSystem {
        BandSystem::new(builtin_family(name).unwrap()).unwrap()
    }

    #[test]
    fn annihilator_passes_both_checks() {
        let s = system("penta_geometric");
        let t = penta_annihilator::<Rational>(s.family(), 20).unwrap();
        let a = verify_annihilation(&t, &s, 40, 0.0).unwrap();
        let x = verify_xi_identity(&t, &s, 40, 0.0).unwrap();
        assert!(a.passed() && x.passed());
        assert!(agree_check_by_check(&a, &x));
        assert_eq!(a.count(CheckStatus::Skipped), 2);
        assert_eq!(a.checks.len(), 41);
        assert!(a.checks.iter().filter(|c| c.status == CheckStatus::Pass).all(|c| c.worst_value == "0"));
    }

    #[test]
    fn unit_corner_fails_at_zero() {
        let s = system("lw_linear");
        let mut t = SparseOperator::<Rational>::new();
        t.set(0, 0, Rational::one());
        let a = verify_annihilation(&t, &s, 5, 0.0).unwrap();
        let fail = a.first_failure().unwrap();
        assert_eq!(fail.location.as_deref(), Some("n=0"));
        assert_eq!(fail.worst_value, "1");
        let x = verify_xi_identity(&t, &s, 5, 0.0).unwrap();
        assert_eq!(x.first_failure().unwrap().location.as_deref(), Some("n=0"));
        assert_eq!(a.status(), CheckStatus::Fail);
    }

    #[test]
    fn zero_operator_passes() {
        let s = system("penta_unit");
        let t = SparseOperator::<f64>::new();
        let a = verify_annihilation(&t, &s, 10, DEFAULT_TOLERANCE).unwrap();
        assert!(a.passed());
        assert!(a.checks.iter().filter(|c| c.status == CheckStatus::Pass).all(|c| c.worst_value == "0.0"));
    }

    #[test]
    fn perturbation_fails_at_first_affected_index() {
        let s = system("lw_geometric2");
        let r = lw_witness_k1::<Rational>(s.family(), 12).unwrap();
        let mut t = assemble_lw(&r).unwrap();
        let eps = Rational::new(BigInt::from(1), BigInt::from(1000));
        // T_{6,5} enters Ξ_5 through a_6 and nothing earlier.
        t.add(5, 6, eps.clone());
        let x = verify_xi_identity(&t, &s, 12, 0.0).unwrap();
        let fail = x.first_failure().unwrap();
        assert_eq!(fail.location.as_deref(), Some("n=5"));
        let a6 = s.family().a::<Rational>(6).unwrap();
        assert_eq!(fail.worst_value, (eps * a6).to_string());
        let a = verify_annihilation(&t, &s, 12, 0.0).unwrap();
        assert_eq!(a.first_failure().unwrap().location, fail.location);
    }

    #[test]
    fn penta_relations_for_planar_witness() {
        let f = builtin_family("penta_unit").unwrap();
        let w = penta_witness_2d(&f, 30).unwrap();
        let rep = verify_penta_relations(&w.u, &w.v, &f, 30, 1e-9).unwrap();
        assert!(rep.passed(), "{rep:?}");
        let zu = VecSeq::<f64>::zeros(2, VecRole::U, 30);
        let zv = VecSeq::<f64>::zeros(2, VecRole::V, 31);
        let rep = verify_penta_relations(&zu, &zv, &f, 30, 1e-9).unwrap();
        assert_eq!(rep.first_failure().unwrap().location.as_deref(), Some("n=0"));
    }

    #[test]
    fn single_rotated_step_passes_on_its_index_only() {
        let f = builtin_family("penta_geometric").unwrap();
        let w = penta_witness_2d(&f, 3).unwrap();
        // Rotate everything: inner products are unchanged.
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rot = |seq: &VecSeq<f64>| {
            let mut out = VecSeq::new(2, seq.role());
            for x in seq.iter() {
                out.push(vec![c * x[0] - s * x[1], s * x[0] + c * x[1]]);
            }
            out
        };
        let (u, v) = (rot(&w.u), rot(&w.v));
        assert!(verify_penta_relations(&u, &v, &f, 3, 1e-10).unwrap().passed());
        let mut v2 = v.clone();
        v2.set(3, vec![0.0, 0.0]);
        let rep = verify_penta_relations(&u, &v2, &f, 3, 1e-10).unwrap();
        assert_eq!(rep.first_failure().unwrap().location.as_deref(), Some("n=2"));
    }

    #[test]
    fn lw_relation_and_lengths() {
        let f = builtin_family("lw_geometric2").unwrap();
        let r = lw_witness_k1::<Rational>(&f, 50).unwrap();
        assert!(verify_lw_relation(&r, &f, 50, 0.0).unwrap().passed());
        let mu = crate::classify::mu_lw::<Rational>(&f, 50).unwrap();
        let c = verify_lengths_exact("length", &r, &mu.values, 0.0).unwrap();
        assert_eq!(c.status, CheckStatus::Pass);
        let r2 = lw_witness_k2(&f, 50).unwrap();
        assert!(verify_lw_relation(&r2, &f, 50, 1e-10).unwrap().passed());
        let radii = crate::witness::lw_radii(&f, 50).unwrap();
        assert_eq!(verify_lengths("length", &r2, &radii, LENGTH_TOLERANCE).status, CheckStatus::Pass);
        let wrong: Vec<f64> = radii.iter().map(|x| x * 1.01).collect();
        assert_eq!(verify_lengths("length", &r2, &wrong, LENGTH_TOLERANCE).status, CheckStatus::Fail);
    }

    #[test]
    fn bounds_hold_for_reciprocal_builtins() {
        for name in ["penta_unit", "penta_geometric"] {
            let plan = penta_length_plan(&builtin_family(name).unwrap(), 200).unwrap();
            let rep = bounds_report(&plan);
            assert!(rep.passed(), "{name}: {rep:?}");
        }
    }

    #[test]
    fn bounds_report_flags_small_b_in_d_case() {
        // d-term case with |b| < 16/9: the V bound overshoots.
        let f = crate::family::parse_family("4; 1/10; 1/5", FamilyKind::Penta).unwrap();
        let plan = penta_length_plan(&f, 4).unwrap();
        let rep = bounds_report(&plan);
        assert_eq!(rep.named("bound_v").next().unwrap().status, CheckStatus::Fail);
    }

    #[test]
    fn monitor_examples() {
        let geometric: Vec<f64> = (0..=1000).map(|n| 0.5f64.powi(n)).collect();
        let m = summability_monitor(&geometric);
        assert!(m.last_decade_increment < 1e-8 && m.monotone);
        assert!((m.total - 2.0).abs() < 1e-12);
        let harmonic: Vec<f64> = (0..=1000).map(|n| if n == 0 { 0.0 } else { 1.0 / n as f64 }).collect();
        let m = summability_monitor(&harmonic);
        assert!((m.last_decade_increment - 10f64.ln()).abs() < 1e-2);
        assert_eq!(monitor_check("ell2", &m).status, CheckStatus::Fail);
        let zeros = summability_monitor(&[0.0; 100]);
        assert_eq!(zeros.total, 0.0);
        assert!(zeros.is_flat());
    }

    #[test]
    fn report_json_shape() {
        let s = system("lw_linear");
        let t = SparseOperator::<Rational>::new();
        let rep = verify_annihilation(&t, &s, 2, 0.0).unwrap();
        let json = serde_json::to_value(&rep).unwrap();
        assert_eq!(json["mode"], "rational");
        assert_eq!(json["checks"][0]["status"], "pass");
        assert_eq!(json["checks"][2]["status"], "skipped");
        let back: Report = serde_json::from_value(json).unwrap();
        assert_eq!(back, rep);
    }
}
