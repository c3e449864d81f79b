//! Criterion sequences and density verdicts.
//!
//! Tridiagonal systems: one-point density fails exactly when the μ-sequence
//! (alternating products of coefficients) is square summable; k-point density
//! for `k >= 2` fails exactly when `1/a_n` is summable. Pentadiagonal
//! systems: rank-one density and k-point density for `k >= 2` fail exactly
//! when the three-ratio μ-sequence is summable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::{CoefficientFamily, FamilyError, FamilyKind, PentaCoefficients};
use crate::scalar::Scalar;

pub const DEFAULT_HORIZON: usize = 100_000;
pub const HORIZON_ENV: &str = "BANDDENSITY_HORIZON";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error("a_{index} is zero")]
    ZeroCoefficient { index: usize },
    #[error("series term {index} is {value}; terms must be non-negative numbers")]
    InvalidTerm { index: usize, value: f64 },
    #[error("k must be at least 1")]
    InvalidK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuKind {
    LwOnePoint,
    LwRecipA,
    PentaMin,
}

/// A criterion sequence indexed from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MuSeq<S> {
    pub values: Vec<S>,
    pub kind: MuKind,
}

/// Which of the three pentadiagonal ratios attains the minimum.
///
/// Numbered in display order: `1/|a| + 1/|b|`, `(1 + |b|)/|d|`, `(1 + |a|)/|c|`.
/// Ties go to the lowest number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PentaCase {
    Reciprocal,
    DTerm,
    CTerm,
}

impl PentaCase {
    pub fn number(self) -> u8 {
        match self {
            PentaCase::Reciprocal => 1,
            PentaCase::DTerm => 2,
            PentaCase::CTerm => 3,
        }
    }
}

/// Pentadiagonal μ-sequence; `None` stands for `+∞` (all three ratios infinite).
#[derive(Debug, Clone, PartialEq)]
pub struct PentaMuSeq<S> {
    pub values: Vec<Option<S>>,
    pub cases: Vec<Option<PentaCase>>,
}

impl<S: Scalar> PentaMuSeq<S> {
    pub fn kind(&self) -> MuKind {
        MuKind::PentaMin
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.as_ref().map_or(f64::INFINITY, Scalar::to_f64)).collect()
    }
}

/// `μ_0 = 1`, `μ_n = 1/(|a_n| μ_{n-1})` for `1 <= n <= last`.
///
/// Both alternating products stop at index 1, so `|a_{n+1}| μ_n μ_{n+1} = 1`.
pub fn mu_lw<S: Scalar>(family: &CoefficientFamily, last: usize) -> Result<MuSeq<S>, ClassifyError> {
    family.expect_kind(FamilyKind::Lw)?;
    let mut values = Vec::with_capacity(last + 1);
    values.push(S::one());
    for n in 1..=last {
        let a = family.a::<S>(n as i64)?;
        if a.is_zero() {
            return Err(ClassifyError::ZeroCoefficient { index: n });
        }
        let prev = values[n - 1].clone();
        values.push(S::one() / (a.abs() * prev));
    }
    Ok(MuSeq { values, kind: MuKind::LwOnePoint })
}

/// `1/|a_n|` for `1 <= n <= last`, with a zero placeholder at index 0.
pub fn recip_a<S: Scalar>(family: &CoefficientFamily, last: usize) -> Result<MuSeq<S>, ClassifyError> {
    family.expect_kind(FamilyKind::Lw)?;
    let mut values = Vec::with_capacity(last + 1);
    values.push(S::zero());
    for n in 1..=last {
        let a = family.a::<S>(n as i64)?;
        if a.is_zero() {
            return Err(ClassifyError::ZeroCoefficient { index: n });
        }
        values.push(S::one() / a.abs());
    }
    Ok(MuSeq { values, kind: MuKind::LwRecipA })
}

fn ratio<S: Scalar>(num: S, den: &S) -> Option<S> {
    if den.is_zero() {
        None
    } else {
        Some(num / den.abs())
    }
}

/// The three ratios at one index, `None` where a zero coefficient makes one infinite.
pub fn penta_ratios<S: Scalar>(p: &PentaCoefficients<S>) -> [Option<S>; 3] {
    let reciprocal = match (ratio(S::one(), &p.a), ratio(S::one(), &p.b)) {
        (Some(x), Some(y)) => Some(x + y),
        _ => None,
    };
    [
        reciprocal,
        ratio(S::one() + p.b.abs(), &p.d),
        ratio(S::one() + p.a.abs(), &p.c),
    ]
}

pub fn penta_mu_at<S: Scalar>(p: &PentaCoefficients<S>) -> (Option<S>, Option<PentaCase>) {
    let cases = [PentaCase::Reciprocal, PentaCase::DTerm, PentaCase::CTerm];
    let mut best: (Option<S>, Option<PentaCase>) = (None, None);
    for (value, case) in penta_ratios(p).into_iter().zip(cases) {
        if let Some(v) = value {
            if best.0.as_ref().map_or(true, |b| v < *b) {
                best = (Some(v), Some(case));
            }
        }
    }
    best
}

/// Pentadiagonal μ for `0 <= n <= last` with the attaining case.
pub fn mu_penta<S: Scalar>(family: &CoefficientFamily, last: usize) -> Result<PentaMuSeq<S>, ClassifyError> {
    family.expect_kind(FamilyKind::Penta)?;
    let mut values = Vec::with_capacity(last + 1);
    let mut cases = Vec::with_capacity(last + 1);
    for n in 0..=last {
        let (v, c) = penta_mu_at(&family.penta_at::<S>(n as i64)?);
        values.push(v);
        cases.push(c);
    }
    Ok(PentaMuSeq { values, cases })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesOutcome {
    Converges,
    Diverges,
    Inconclusive,
}

/// Numbers behind a heuristic summability call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub partial_sum: f64,
    pub horizon: usize,
    pub slope: Option<f64>,
    pub last_decade_increment: f64,
    pub outcome: SeriesOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub horizon: usize,
    pub delta: f64,
    pub tolerance: f64,
    pub use_symbolic_facts: bool,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { horizon: DEFAULT_HORIZON, delta: 0.1, tolerance: 1e-12, use_symbolic_facts: true }
    }
}

impl ClassifyOptions {
    /// Defaults with the horizon taken from `BANDDENSITY_HORIZON` when set.
    pub fn from_env() -> Self {
        let mut opts = Self::default();
        if let Some(h) = std::env::var(HORIZON_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
            if h >= 1 {
                opts.horizon = h;
            }
        }
        opts
    }
}

/// Number of geometric blocks used for the tail slope.
const SLOPE_BLOCKS: usize = 20;

/// Least-squares slope of log(block mean) against log(block centre) over the
/// last decade `(H/10, H]`. Block means smooth out sequences whose even and
/// odd terms live on different scales.
fn tail_slope(terms: &[f64]) -> Option<f64> {
    let h = terms.len();
    let lo = (h / 10).max(1) as f64;
    let hi = h as f64;
    if hi <= lo {
        return None;
    }
    let mut points = Vec::new();
    let mut start = lo.floor() as usize + 1;
    for k in 1..=SLOPE_BLOCKS {
        let edge = (lo * (hi / lo).powf(k as f64 / SLOPE_BLOCKS as f64)).round() as usize;
        let end = edge.min(h);
        if end < start {
            continue;
        }
        // terms[i] is the term with index i + 1
        let block = &terms[start - 1..end];
        let mean = block.iter().sum::<f64>() / block.len() as f64;
        if mean > 0.0 && mean.is_finite() {
            let centre = ((start as f64) * (end as f64)).sqrt();
            points.push((centre.ln(), mean.ln()));
        }
        start = end + 1;
    }
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Heuristic summability call for non-negative terms `x_1, ..., x_H`
/// (`terms[i]` is `x_{i+1}`).
///
/// Diverges when the tail slope is at least `-1 - δ/10` and the last decade
/// still adds more than the tolerance; converges when the last decade adds at
/// most `tolerance * max(1, S_H)` or the slope is at most `-1 - δ`. Anything
/// else is inconclusive. An infinite term is divergent outright.
pub fn series_diagnostic(terms: &[f64], opts: &ClassifyOptions) -> Result<Evidence, ClassifyError> {
    for (i, &x) in terms.iter().enumerate() {
        if x.is_nan() || x < 0.0 {
            return Err(ClassifyError::InvalidTerm { index: i + 1, value: x });
        }
    }
    let h = terms.len();
    let partial_sum: f64 = terms.iter().sum();
    if terms.iter().any(|x| x.is_infinite()) {
        return Ok(Evidence {
            partial_sum,
            horizon: h,
            slope: None,
            last_decade_increment: f64::INFINITY,
            outcome: SeriesOutcome::Diverges,
        });
    }
    let increment: f64 = terms[(h / 10).min(h)..].iter().sum();
    let slope = tail_slope(terms);
    let flat = increment <= opts.tolerance * partial_sum.max(1.0);
    let outcome = match slope {
        Some(s) if s >= -1.0 - opts.delta / 10.0 && increment > opts.tolerance => SeriesOutcome::Diverges,
        _ if flat => SeriesOutcome::Converges,
        Some(s) if s <= -1.0 - opts.delta => SeriesOutcome::Converges,
        _ => SeriesOutcome::Inconclusive,
    };
    Ok(Evidence { partial_sum, horizon: h, slope, last_decade_increment: increment, outcome })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityProperty {
    OnePointDense,
    #[serde(rename = "k_point_dense_k_ge_2")]
    KPointDenseKGe2,
    RankOneDense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Yes,
    No,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    SymbolicFact,
    PartialSumHeuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub property: DensityProperty,
    pub answer: Answer,
    pub basis: Basis,
    pub evidence: Option<Evidence>,
}

/// Dense exactly when the criterion sequence is *not* summable.
fn from_summability(property: DensityProperty, summable: bool) -> Verdict {
    Verdict {
        property,
        answer: if summable { Answer::No } else { Answer::Yes },
        basis: Basis::SymbolicFact,
        evidence: None,
    }
}

fn from_evidence(property: DensityProperty, evidence: Evidence) -> Verdict {
    let answer = match evidence.outcome {
        SeriesOutcome::Converges => Answer::No,
        SeriesOutcome::Diverges => Answer::Yes,
        SeriesOutcome::Inconclusive => Answer::Inconclusive,
    };
    Verdict { property, answer, basis: Basis::PartialSumHeuristic, evidence: Some(evidence) }
}

/// Float terms up to the horizon, cut at the first non-finite coefficient.
fn lw_terms(family: &CoefficientFamily, k: usize, horizon: usize) -> Result<Vec<f64>, ClassifyError> {
    let mut terms = Vec::with_capacity(horizon);
    let mut mu = 1.0f64;
    for n in 1..=horizon {
        let a = family.a::<f64>(n as i64)?;
        if a == 0.0 {
            return Err(ClassifyError::ZeroCoefficient { index: n });
        }
        if !a.is_finite() {
            break;
        }
        if k == 1 {
            mu = 1.0 / (a.abs() * mu);
            if mu == 0.0 || !mu.is_finite() {
                break;
            }
            terms.push(mu * mu);
        } else {
            terms.push(1.0 / a.abs());
        }
    }
    Ok(terms)
}

/// Tridiagonal verdict: `k = 1` asks about one-point density, `k >= 2` about
/// k-point density (the answer is the same for every `k >= 2`).
pub fn classify_lw(family: &CoefficientFamily, k: usize, opts: &ClassifyOptions) -> Result<Verdict, ClassifyError> {
    family.expect_kind(FamilyKind::Lw)?;
    if k == 0 {
        return Err(ClassifyError::InvalidK);
    }
    let property = if k == 1 { DensityProperty::OnePointDense } else { DensityProperty::KPointDenseKGe2 };
    if opts.use_symbolic_facts {
        let fact = family.facts().and_then(|f| if k == 1 { f.mu_in_l2 } else { f.recip_a_in_l1 });
        if let Some(summable) = fact {
            return Ok(from_summability(property, summable));
        }
    }
    let terms = lw_terms(family, k, opts.horizon)?;
    Ok(from_evidence(property, series_diagnostic(&terms, opts)?))
}

/// Pentadiagonal verdict covering rank-one density and k-point density for
/// every `k >= 2` at once.
pub fn classify_penta(family: &CoefficientFamily, opts: &ClassifyOptions) -> Result<Verdict, ClassifyError> {
    family.expect_kind(FamilyKind::Penta)?;
    let property = DensityProperty::RankOneDense;
    if opts.use_symbolic_facts {
        if let Some(summable) = family.facts().and_then(|f| f.mu_penta_in_l1) {
            return Ok(from_summability(property, summable));
        }
    }
    let mut terms = Vec::with_capacity(opts.horizon);
    for n in 0..opts.horizon {
        let p = family.penta_at::<f64>(n as i64)?;
        if ![p.a, p.b, p.c, p.d].iter().all(|x| x.is_finite()) {
            break;
        }
        terms.push(penta_mu_at(&p).0.unwrap_or(f64::INFINITY));
    }
    Ok(from_evidence(property, series_diagnostic(&terms, opts)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{builtin_family, parse_family, BUILTIN_NAMES};
    use crate::scalar::Rational;
    use num_bigint::BigInt;

    use num_traits::One;
    fn q(p: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(p), BigInt::from(d))
    }

    fn numeric() -> ClassifyOptions {
        ClassifyOptions { use_symbolic_facts: false, ..ClassifyOptions::default() }
    }

    /// Direct alternating products, independent of the recursion.
    fn mu_by_products(a: impl Fn(usize) -> Rational, n: usize) -> Rational {
        let mut num = Rational::one();
        let mut den = Rational::one();
        let mut m = n as i64;
        while m >= 1 {
            den *= a(m as usize);
            if m >= 2 {
                num *= a(m as usize - 1);
            }
            m -= 2;
        }
        num / den
    }

    #[test]
    fn linear_family_mu_values() {
        let f = builtin_family("lw_linear").unwrap();
        let mu = mu_lw::<Rational>(&f, 12).unwrap();
        assert_eq!(mu.values[2], q(1, 2));
        assert_eq!(mu.values[4], q(3, 8));
        for n in 1..=12 {
            assert_eq!(mu.values[n], mu_by_products(|m| Rational::from_int(m as i64), n), "n = {n}");
        }
        assert_eq!(Rational::from_int(8) * &mu.values[7] * &mu.values[8], Rational::one());
        assert_eq!(Rational::from_int(2) * &mu.values[1] * &mu.values[2], Rational::one());
    }

    #[test]
    fn paired_squares_mu_is_one_on_even_indices() {
        let f = builtin_family("lw_paired_squares").unwrap();
        let mu = mu_lw::<Rational>(&f, 40).unwrap();
        for m in 0..=20 {
            assert_eq!(mu.values[2 * m], Rational::one());
        }
        for m in 0..20 {
            assert_eq!(mu.values[2 * m + 1], q(1, ((m + 1) * (m + 1)) as i64));
        }
    }

    #[test]
    fn telescoping_holds_exactly() {
        for name in ["lw_linear", "lw_geometric2", "lw_paired_squares"] {
            let f = builtin_family(name).unwrap();
            let mu = mu_lw::<Rational>(&f, 300).unwrap();
            for n in 1..300 {
                let a = f.a::<Rational>(n as i64 + 1).unwrap();
                assert_eq!(a * &mu.values[n] * &mu.values[n + 1], Rational::one());
            }
        }
    }

    #[test]
    fn penta_mu_values() {
        let f = builtin_family("penta_unit").unwrap();
        let mu = mu_penta::<Rational>(&f, 5).unwrap();
        assert!(mu.values.iter().all(|v| v.as_ref() == Some(&Rational::from_int(2))));
        assert!(mu.cases.iter().all(|c| *c == Some(PentaCase::Reciprocal)));

        let f = builtin_family("penta_geometric").unwrap();
        let mu = mu_penta::<Rational>(&f, 30).unwrap();
        for n in 1..=30 {
            assert_eq!(mu.values[n].clone().unwrap(), q(2, 1 << n));
        }
    }

    #[test]
    fn zero_coefficient_drops_its_ratios() {
        let p = PentaCoefficients { a: q(3, 1), b: q(0, 1), c: q(2, 1), d: q(-2, 1) };
        let r = penta_ratios(&p);
        assert!(r[0].is_none());
        assert_eq!(r[1], Some(q(1, 2)));
        assert_eq!(penta_mu_at(&p), (Some(q(1, 2)), Some(PentaCase::DTerm)));
        let p = PentaCoefficients { a: q(3, 1), b: q(0, 1), c: q(2, 1), d: q(0, 1) };
        assert_eq!(penta_mu_at(&p), (Some(q(2, 1)), Some(PentaCase::CTerm)));
        let z = PentaCoefficients { a: q(0, 1), b: q(0, 1), c: q(0, 1), d: q(0, 1) };
        assert_eq!(penta_mu_at(&z), (None, None));
    }

    #[test]
    fn ties_go_to_the_lowest_case() {
        // 1/1 + 1/1 = 2 = (1 + 1)/1
        let p = PentaCoefficients { a: q(1, 1), b: q(1, 1), c: q(0, 1), d: q(1, 1) };
        assert_eq!(penta_mu_at(&p), (Some(q(2, 1)), Some(PentaCase::Reciprocal)));
    }

    #[test]
    fn series_examples() {
        let opts = ClassifyOptions::default();
        let h = opts.horizon;
        let sq: Vec<f64> = (1..=h).map(|n| 1.0 / (n as f64).powi(2)).collect();
        assert_eq!(series_diagnostic(&sq, &opts).unwrap().outcome, SeriesOutcome::Converges);
        let harmonic: Vec<f64> = (1..=h).map(|n| 1.0 / n as f64).collect();
        let e = series_diagnostic(&harmonic, &opts).unwrap();
        assert_eq!(e.outcome, SeriesOutcome::Diverges);
        assert!((e.slope.unwrap() + 1.0).abs() < 1e-3);
        assert!((e.last_decade_increment - 10f64.ln()).abs() < 1e-3);
        let nlogn: Vec<f64> = (1..=h).map(|n| 1.0 / ((n as f64) * (n as f64 + 1.0).ln())).collect();
        assert_ne!(series_diagnostic(&nlogn, &opts).unwrap().outcome, SeriesOutcome::Diverges);
        let geometric: Vec<f64> = (1..=h).map(|n| 0.5f64.powi(n as i32)).collect();
        assert_eq!(series_diagnostic(&geometric, &opts).unwrap().outcome, SeriesOutcome::Converges);
        assert!(series_diagnostic(&[1.0, -1.0], &opts).is_err());
        assert!(series_diagnostic(&[1.0, f64::NAN], &opts).is_err());
        assert_eq!(series_diagnostic(&[1.0, f64::INFINITY], &opts).unwrap().outcome, SeriesOutcome::Diverges);
        assert_eq!(series_diagnostic(&[0.0; 50], &opts).unwrap().outcome, SeriesOutcome::Converges);
    }

    #[test]
    fn symbolic_verdicts() {
        let opts = ClassifyOptions::default();
        let v = |name: &str, k: usize| classify_lw(&builtin_family(name).unwrap(), k, &opts).unwrap();
        assert_eq!(v("lw_linear", 2).answer, Answer::Yes);
        assert_eq!(v("lw_paired_squares", 1).answer, Answer::Yes);
        assert_eq!(v("lw_paired_squares", 2).answer, Answer::No);
        assert_eq!(v("lw_geometric2", 1).answer, Answer::No);
        assert_eq!(v("lw_geometric2", 1).basis, Basis::SymbolicFact);
        assert!(v("lw_geometric2", 1).evidence.is_none());
        let p = |name: &str| classify_penta(&builtin_family(name).unwrap(), &opts).unwrap().answer;
        assert_eq!(p("penta_unit"), Answer::Yes);
        assert_eq!(p("penta_geometric"), Answer::No);
    }

    #[test]
    fn facts_agree_with_numeric_diagnostics() {
        let sym = ClassifyOptions::default();
        let num = numeric();
        for name in BUILTIN_NAMES {
            let f = builtin_family(name).unwrap();
            let pairs = match f.kind() {
                FamilyKind::Lw => vec![
                    (classify_lw(&f, 1, &sym).unwrap(), classify_lw(&f, 1, &num).unwrap()),
                    (classify_lw(&f, 2, &sym).unwrap(), classify_lw(&f, 2, &num).unwrap()),
                ],
                FamilyKind::Penta => vec![(classify_penta(&f, &sym).unwrap(), classify_penta(&f, &num).unwrap())],
            };
            for (s, n) in pairs {
                assert_eq!(n.basis, Basis::PartialSumHeuristic);
                if n.answer != Answer::Inconclusive {
                    assert_eq!(s.answer, n.answer, "{name} {:?} {:?}", s.property, n.evidence);
                }
            }
        }
    }

    #[test]
    fn heuristic_verdicts_for_dsl_families() {
        let opts = numeric();
        let f = parse_family("n", FamilyKind::Lw).unwrap();
        assert_eq!(classify_lw(&f, 1, &opts).unwrap().answer, Answer::Yes);
        let f = parse_family("n^2", FamilyKind::Lw).unwrap();
        assert_eq!(classify_lw(&f, 2, &opts).unwrap().answer, Answer::No);
        let f = parse_family("n^0.5", FamilyKind::Lw).unwrap();
        assert_eq!(classify_lw(&f, 2, &opts).unwrap().answer, Answer::Yes);
        // μ_n comparable to 1/n: harmonic, so dense
        let f = parse_family("2*(n+1); 2*(n+1); 1", FamilyKind::Penta).unwrap();
        let v = classify_penta(&f, &opts).unwrap();
        assert_eq!(v.answer, Answer::Yes);
        let f = parse_family("1; 1; 1/2", FamilyKind::Penta).unwrap();
        assert_eq!(classify_penta(&f, &opts).unwrap().answer, Answer::Yes);
    }

    #[test]
    fn verdict_json_shape() {
        let f = parse_family("n^2", FamilyKind::Lw).unwrap();
        let v = classify_lw(&f, 2, &ClassifyOptions { horizon: 1000, ..numeric() }).unwrap();
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["property"], "k_point_dense_k_ge_2");
        assert_eq!(json["basis"], "partial_sum_heuristic");
        assert!(json["evidence"]["partial_sum"].is_number());
        assert_eq!(json["evidence"]["horizon"], 1000);
    }
}
