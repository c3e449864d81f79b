//! Coefficient families `a_n` (tridiagonal) and `a_n, b_n, c_n, d_n`
//! (pentadiagonal), built from the expression language or by name.

mod expr;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use expr::{EvalError, Expr, SyntaxError};

use crate::scalar::{Rational, Scalar, ScalarError};

/// Indices probed when a family is validated at construction time.
pub const PROBE_INDICES: i64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Lw,
    Penta,
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyKind::Lw => "lw",
            FamilyKind::Penta => "penta",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coefficient {
    A,
    B,
    C,
    D,
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coefficient::A => "a",
            Coefficient::B => "b",
            Coefficient::C => "c",
            Coefficient::D => "d",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FamilyError {
    #[error("coefficient {component}: {source}")]
    Syntax {
        component: Coefficient,
        #[source]
        source: SyntaxError,
    },
    #[error("coefficient {component}: {source}")]
    Eval {
        component: Coefficient,
        #[source]
        source: EvalError,
    },
    #[error("c_n + d_n differs from a_n b_n at n = {index} (residual {residual})")]
    ConstraintViolation { index: i64, residual: String },
    #[error("a_{index} is zero; tridiagonal coefficients must be nonzero for n >= 1")]
    ZeroCoefficient { index: i64 },
    #[error("unknown built-in family `{0}`")]
    UnknownBuiltin(String),
    #[error("expected a {expected} family, got {found}")]
    WrongKind { expected: FamilyKind, found: FamilyKind },
    #[error("family specification is missing `{0}`")]
    MissingComponent(&'static str),
    #[error("coefficient value is not finite")]
    NonFinite,
    #[error("expected `a; b; c` or `a; b; c; d`, got {0} parts")]
    PartCount(usize),
}

/// Exact summability facts attached to built-in families.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummabilityFacts {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recip_a_in_l1: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_in_l2: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_penta_in_l1: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Source {
    Expr(Expr),
    /// `a_{2k-1} = a_{2k} = k^2`, not expressible without integer division.
    PairedSquares,
}

impl Source {
    fn eval<S: Scalar>(&self, n: i64) -> Result<S, EvalError> {
        match self {
            Source::Expr(e) => e.eval(n),
            Source::PairedSquares => {
                let k = (n + 1) / 2;
                Ok(S::from_int(k * k))
            }
        }
    }

    fn text(&self) -> String {
        match self {
            Source::Expr(e) => e.to_string(),
            Source::PairedSquares => "paired_squares".to_string(),
        }
    }
}

/// Serializable description from which a family can be rebuilt.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<FamilyKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl FamilySpec {
    pub fn build(&self) -> Result<CoefficientFamily, FamilyError> {
        let mut family = if let Some(name) = &self.builtin {
            builtin_family(name)?
        } else {
            let kind = self.kind.ok_or(FamilyError::MissingComponent("kind"))?;
            let a = self.a.as_deref().ok_or(FamilyError::MissingComponent("a"))?;
            match kind {
                FamilyKind::Lw => CoefficientFamily::lw(a)?,
                FamilyKind::Penta => {
                    let b = self.b.as_deref().ok_or(FamilyError::MissingComponent("b"))?;
                    let c = self.c.as_deref().ok_or(FamilyError::MissingComponent("c"))?;
                    CoefficientFamily::penta(a, b, c, self.d.as_deref())?
                }
            }
        };
        if let Some(label) = &self.label {
            family.label = label.clone();
            family.spec.label = Some(label.clone());
        }
        Ok(family)
    }
}

/// The four pentadiagonal coefficients at one index.
#[derive(Debug, Clone, PartialEq)]
pub struct PentaCoefficients<S> {
    pub a: S,
    pub b: S,
    pub c: S,
    pub d: S,
}

/// Immutable evaluator `n -> a_n` (tridiagonal) or `n -> (a_n, b_n, c_n, d_n)`.
#[derive(Debug, Clone)]
pub struct CoefficientFamily {
    kind: FamilyKind,
    label: String,
    a: Source,
    b: Option<Source>,
    c: Option<Source>,
    d: Option<Source>,
    facts: Option<SummabilityFacts>,
    spec: FamilySpec,
}

fn parse_component(text: &str, component: Coefficient) -> Result<Source, FamilyError> {
    Expr::parse(text)
        .map(Source::Expr)
        .map_err(|source| FamilyError::Syntax { component, source })
}

impl CoefficientFamily {
    /// Tridiagonal family from an expression for `a_n`.
    pub fn lw(a: &str) -> Result<Self, FamilyError> {
        let family = Self::lw_from_source(parse_component(a, Coefficient::A)?, format!("lw:a={}", a.trim()));
        family.validate()?;
        Ok(family)
    }

    fn lw_from_source(a: Source, label: String) -> Self {
        let spec = FamilySpec {
            kind: Some(FamilyKind::Lw),
            a: Some(a.text()),
            label: Some(label.clone()),
            ..FamilySpec::default()
        };
        CoefficientFamily { kind: FamilyKind::Lw, label, a, b: None, c: None, d: None, facts: None, spec }
    }

    /// Pentadiagonal family; `d` defaults to `a b - c`.
    pub fn penta(a: &str, b: &str, c: &str, d: Option<&str>) -> Result<Self, FamilyError> {
        let family = Self::penta_unvalidated(a, b, c, d)?;
        family.validate()?;
        Ok(family)
    }

    /// Pentadiagonal family that skips the `c + d = a b` probe.
    ///
    /// Used to study what happens when the constraint is broken.
    pub fn penta_unvalidated(a: &str, b: &str, c: &str, d: Option<&str>) -> Result<Self, FamilyError> {
        let sa = parse_component(a, Coefficient::A)?;
        let sb = parse_component(b, Coefficient::B)?;
        let sc = parse_component(c, Coefficient::C)?;
        let sd = d.map(|d| parse_component(d, Coefficient::D)).transpose()?;
        let mut label = format!("penta:a={};b={};c={}", a.trim(), b.trim(), c.trim());
        if let Some(d) = d {
            label.push_str(&format!(";d={}", d.trim()));
        }
        let spec = FamilySpec {
            kind: Some(FamilyKind::Penta),
            a: Some(sa.text()),
            b: Some(sb.text()),
            c: Some(sc.text()),
            d: sd.as_ref().map(Source::text),
            label: Some(label.clone()),
            builtin: None,
        };
        Ok(CoefficientFamily {
            kind: FamilyKind::Penta,
            label,
            a: sa,
            b: Some(sb),
            c: Some(sc),
            d: sd,
            facts: None,
            spec,
        })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self.spec.label = Some(self.label.clone());
        self
    }

    pub fn facts(&self) -> Option<&SummabilityFacts> {
        self.facts.as_ref()
    }

    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    pub fn has_derived_d(&self) -> bool {
        self.kind == FamilyKind::Penta && self.d.is_none()
    }

    pub fn expect_kind(&self, expected: FamilyKind) -> Result<(), FamilyError> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(FamilyError::WrongKind { expected, found: self.kind })
        }
    }

    /// Printed form of one coefficient, if the family defines it explicitly.
    pub fn expression(&self, which: Coefficient) -> Option<String> {
        match which {
            Coefficient::A => Some(self.a.text()),
            Coefficient::B => self.b.as_ref().map(Source::text),
            Coefficient::C => self.c.as_ref().map(Source::text),
            Coefficient::D => self.d.as_ref().map(Source::text),
        }
    }

    fn eval_source<S: Scalar>(source: &Source, which: Coefficient, n: i64) -> Result<S, FamilyError> {
        source.eval(n).map_err(|source| FamilyError::Eval { component: which, source })
    }

    /// One coefficient at index `n`; negative indices give zero, and `a_0 = 0`
    /// for tridiagonal families.
    pub fn coefficient<S: Scalar>(&self, which: Coefficient, n: i64) -> Result<S, FamilyError> {
        if n < 0 {
            return Ok(S::zero());
        }
        match (self.kind, which) {
            (FamilyKind::Lw, Coefficient::A) => {
                if n == 0 {
                    Ok(S::zero())
                } else {
                    Self::eval_source(&self.a, which, n)
                }
            }
            (FamilyKind::Lw, _) => Ok(S::zero()),
            (FamilyKind::Penta, Coefficient::A) => Self::eval_source(&self.a, which, n),
            (FamilyKind::Penta, Coefficient::B) => Self::eval_source(self.b.as_ref().unwrap(), which, n),
            (FamilyKind::Penta, Coefficient::C) => Self::eval_source(self.c.as_ref().unwrap(), which, n),
            (FamilyKind::Penta, Coefficient::D) => match &self.d {
                Some(d) => Self::eval_source(d, which, n),
                None => {
                    let a: S = self.coefficient(Coefficient::A, n)?;
                    let b: S = self.coefficient(Coefficient::B, n)?;
                    let c: S = self.coefficient(Coefficient::C, n)?;
                    Ok(a * b - c)
                }
            },
        }
    }

    /// `a_n`, the only coefficient of a tridiagonal family.
    pub fn a<S: Scalar>(&self, n: i64) -> Result<S, FamilyError> {
        self.coefficient(Coefficient::A, n)
    }

    pub fn penta_at<S: Scalar>(&self, n: i64) -> Result<PentaCoefficients<S>, FamilyError> {
        Ok(PentaCoefficients {
            a: self.coefficient(Coefficient::A, n)?,
            b: self.coefficient(Coefficient::B, n)?,
            c: self.coefficient(Coefficient::C, n)?,
            d: self.coefficient(Coefficient::D, n)?,
        })
    }

    /// `c_n + d_n - a_n b_n`, exact when the coefficients are rational.
    pub fn constraint_residual(&self, n: i64) -> Result<f64, FamilyError> {
        match self.penta_at::<Rational>(n) {
            Ok(p) => Ok(crate::scalar::rational_to_f64(&(p.c + p.d - p.a * p.b))),
            Err(FamilyError::Eval { source: EvalError { source: ScalarError::IrrationalPower(_), .. }, .. }) => {
                let p = self.penta_at::<f64>(n)?;
                let scale = 1f64.max((p.a * p.b).abs()).max(p.c.abs()).max(p.d.abs());
                let r = p.c + p.d - p.a * p.b;
                Ok(if r.abs() <= 1e-12 * scale { 0.0 } else { r })
            }
            Err(e) => Err(e),
        }
    }

    /// Probes `0..=PROBE_INDICES` for evaluation errors, zero tridiagonal
    /// coefficients and pentadiagonal constraint violations.
    pub fn validate(&self) -> Result<(), FamilyError> {
        for n in 0..=PROBE_INDICES {
            match self.kind {
                FamilyKind::Lw => {
                    if n == 0 {
                        continue;
                    }
                    let a = self.a::<f64>(n)?;
                    if a == 0.0 {
                        return Err(FamilyError::ZeroCoefficient { index: n });
                    }
                }
                FamilyKind::Penta => {
                    self.penta_at::<f64>(n)?;
                    if self.d.is_some() {
                        let r = self.constraint_residual(n)?;
                        if r != 0.0 {
                            return Err(FamilyError::ConstraintViolation { index: n, residual: format!("{r:?}") });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Parses `a` for tridiagonal families and `a; b; c[; d]` for pentadiagonal ones.
pub fn parse_family(text: &str, kind: FamilyKind) -> Result<CoefficientFamily, FamilyError> {
    match kind {
        FamilyKind::Lw => CoefficientFamily::lw(text),
        FamilyKind::Penta => {
            let parts: Vec<&str> = text.split(';').map(str::trim).collect();
            match parts.as_slice() {
                [a, b, c] => CoefficientFamily::penta(a, b, c, None),
                [a, b, c, d] => CoefficientFamily::penta(a, b, c, Some(d)),
                other => Err(FamilyError::PartCount(other.len())),
            }
        }
    }
}

pub const BUILTIN_NAMES: [&str; 5] =
    ["lw_linear", "lw_geometric2", "lw_paired_squares", "penta_unit", "penta_geometric"];

pub fn builtin_family(name: &str) -> Result<CoefficientFamily, FamilyError> {
    let (mut family, facts) = match name {
        "lw_linear" => (
            CoefficientFamily::lw("n")?,
            SummabilityFacts { recip_a_in_l1: Some(false), mu_in_l2: Some(false), mu_penta_in_l1: None },
        ),
        "lw_geometric2" => (
            CoefficientFamily::lw("2^n")?,
            SummabilityFacts { recip_a_in_l1: Some(true), mu_in_l2: Some(true), mu_penta_in_l1: None },
        ),
        "lw_paired_squares" => (
            CoefficientFamily::lw_from_source(Source::PairedSquares, name.to_string()),
            SummabilityFacts { recip_a_in_l1: Some(true), mu_in_l2: Some(false), mu_penta_in_l1: None },
        ),
        "penta_unit" => (
            CoefficientFamily::penta("1", "1", "1/2", None)?,
            SummabilityFacts { mu_penta_in_l1: Some(false), ..SummabilityFacts::default() },
        ),
        "penta_geometric" => (
            CoefficientFamily::penta("2^n", "2^n", "2^(2*n-1)", None)?,
            SummabilityFacts { mu_penta_in_l1: Some(true), ..SummabilityFacts::default() },
        ),
        other => return Err(FamilyError::UnknownBuiltin(other.to_string())),
    };
    family.label = name.to_string();
    family.facts = Some(facts);
    family.spec = FamilySpec { builtin: Some(name.to_string()), ..FamilySpec::default() };
    Ok(family)
}
