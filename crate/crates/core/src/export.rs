//! Witness construction end to end: build, verify, and serialize; and the
//! reverse check that recomputes a report from exported data alone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{mu_lw, mu_penta, ClassifyError};
use crate::family::{CoefficientFamily, FamilyError, FamilyKind, FamilySpec};
use crate::scalar::{Mode, Rational, Scalar};
use crate::systems::BandSystem;
use crate::verify::{
    bounds_report, summability_monitor, verify_annihilation, verify_entry_mass, verify_lengths,
    verify_lengths_exact, verify_lw_relation, verify_penta_relations, verify_trace, verify_xi_identity, Check,
    CheckStatus, Monitor, Report, VerifyError, DEFAULT_TOLERANCE, LENGTH_TOLERANCE,
};
use crate::witness::{
    assemble_lw, assemble_penta, lw_radii, lw_witness_k1, lw_witness_k2, penta_annihilator, penta_length_plan,
    penta_witness_2d, VecRole, VecSeq, WitnessError,
};
use crate::xi::SparseOperator;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExportError {
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Witness(#[from] WitnessError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("N must be at least 1")]
    InvalidWindow,
    #[error("the planar construction involves square roots and needs float mode")]
    PlanarNeedsFloat,
    #[error("construction {0:?} does not apply to a {1} family")]
    WrongConstruction(Construction, FamilyKind),
    #[error("cannot parse exported value `{0}`")]
    BadValue(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    LwCollinear,
    LwPlanar,
    PentaAnnihilator,
    PentaPlanar,
}

impl Construction {
    pub fn kind(self) -> FamilyKind {
        match self {
            Construction::LwCollinear | Construction::LwPlanar => FamilyKind::Lw,
            Construction::PentaAnnihilator | Construction::PentaPlanar => FamilyKind::Penta,
        }
    }

    pub fn is_planar(self) -> bool {
        matches!(self, Construction::LwPlanar | Construction::PentaPlanar)
    }
}

/// Construction as requested on the command line; the family kind decides
/// which concrete construction it means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionChoice {
    /// Scalar sequence (tridiagonal) or direct operator (pentadiagonal).
    Annihilator,
    Planar,
}

impl ConstructionChoice {
    pub fn resolve(choice: Option<ConstructionChoice>, kind: FamilyKind, k: usize) -> Construction {
        let choice = choice.unwrap_or(if k >= 2 { ConstructionChoice::Planar } else { ConstructionChoice::Annihilator });
        match (kind, choice) {
            (FamilyKind::Lw, ConstructionChoice::Annihilator) => Construction::LwCollinear,
            (FamilyKind::Lw, ConstructionChoice::Planar) => Construction::LwPlanar,
            (FamilyKind::Penta, ConstructionChoice::Annihilator) => Construction::PentaAnnihilator,
            (FamilyKind::Penta, ConstructionChoice::Planar) => Construction::PentaPlanar,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessRequest {
    pub k: usize,
    /// Window for tridiagonal families, number of four-index blocks for
    /// pentadiagonal ones.
    pub n: usize,
    pub mode: Mode,
    pub construction: Option<ConstructionChoice>,
    pub tolerance: Option<f64>,
}

impl WitnessRequest {
    pub fn new(k: usize, n: usize, mode: Mode) -> Self {
        WitnessRequest { k, n, mode, construction: None, tolerance: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSummary {
    pub quantity: String,
    pub total: f64,
    pub last_decade_increment: f64,
    pub monotone: bool,
    pub flat: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub status: CheckStatus,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub first_failure: Option<Check>,
    pub monitor: MonitorSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessExport {
    pub family_label: String,
    pub kind: FamilyKind,
    pub family: FamilySpec,
    pub mode: Mode,
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub construction: Construction,
    /// Largest basis index carried by the operator.
    pub window: usize,
    pub tolerance: f64,
    pub vectors: Vec<Vec<String>>,
    #[serde(default)]
    pub u_vectors: Vec<Vec<String>>,
    pub operator_entries: Vec<(usize, usize, String)>,
    pub residual_summary: ResidualSummary,
    pub report: Report,
    #[serde(default)]
    pub warnings: Vec<String>,
}

fn entries_of<S: Scalar>(op: &SparseOperator<S>) -> Vec<(usize, usize, String)> {
    op.iter().map(|((i, j), v)| (i, j, v.format())).collect()
}

/// Builds the requested witness, verifies it from its own exported form and
/// returns the export together with the report.
pub fn build_witness(family: &CoefficientFamily, req: &WitnessRequest) -> Result<(WitnessExport, Report), ExportError> {
    if req.k == 0 {
        return Err(ExportError::InvalidK);
    }
    if req.n == 0 {
        return Err(ExportError::InvalidWindow);
    }
    let construction = ConstructionChoice::resolve(req.construction, family.kind(), req.k);
    if construction.is_planar() && req.mode == Mode::Rational {
        return Err(ExportError::PlanarNeedsFloat);
    }
    let tolerance = req.tolerance.unwrap_or(match req.mode {
        Mode::Float => DEFAULT_TOLERANCE,
        Mode::Rational => 0.0,
    });
    let (vectors, u_vectors, entries, window) = match req.mode {
        Mode::Float => construct::<f64>(family, construction, req.n)?,
        Mode::Rational => construct::<Rational>(family, construction, req.n)?,
    };
    let mut export = WitnessExport {
        family_label: family.label().to_string(),
        kind: family.kind(),
        family: family.spec().clone(),
        mode: req.mode,
        k: req.k,
        n: req.n,
        construction,
        window,
        tolerance,
        vectors,
        u_vectors,
        operator_entries: entries,
        residual_summary: ResidualSummary {
            status: CheckStatus::Skipped,
            passed: 0,
            failed: 0,
            skipped: 0,
            first_failure: None,
            monitor: MonitorSummary {
                quantity: String::new(),
                total: 0.0,
                last_decade_increment: 0.0,
                monotone: true,
                flat: true,
            },
        },
        report: Report::new(req.mode, window),
        warnings: Vec::new(),
    };
    let (report, monitor) = recompute(&export)?;
    export.residual_summary = ResidualSummary {
        status: report.status(),
        passed: report.count(CheckStatus::Pass),
        failed: report.count(CheckStatus::Fail),
        skipped: report.count(CheckStatus::Skipped),
        first_failure: report.first_failure().cloned(),
        monitor,
    };
    export.warnings = report.warnings.clone();
    export.report = report.clone();
    Ok((export, report))
}

type Constructed = (Vec<Vec<String>>, Vec<Vec<String>>, Vec<(usize, usize, String)>, usize);

fn construct<S: Scalar>(family: &CoefficientFamily, construction: Construction, n: usize) -> Result<Constructed, ExportError> {
    if construction.kind() != family.kind() {
        return Err(ExportError::WrongConstruction(construction, family.kind()));
    }
    Ok(match construction {
        Construction::LwCollinear => {
            let r = lw_witness_k1::<S>(family, n)?;
            let op = assemble_lw(&r)?;
            (r.to_strings(), Vec::new(), entries_of(&op), n)
        }
        Construction::LwPlanar => {
            let r = lw_witness_k2(family, n)?;
            let op = assemble_lw(&r)?;
            (r.to_strings(), Vec::new(), entries_of(&op), n)
        }
        Construction::PentaAnnihilator => {
            let op = penta_annihilator::<S>(family, 2 * n)?;
            (Vec::new(), Vec::new(), entries_of(&op), 4 * n)
        }
        Construction::PentaPlanar => {
            let w = penta_witness_2d(family, 2 * n)?;
            let op = assemble_penta(&w)?;
            (w.v.to_strings(), w.u.to_strings(), entries_of(&op), 4 * n)
        }
    })
}

/// Recomputes the verification report from the exported family, vectors and
/// operator entries only.
pub fn verify_export(export: &WitnessExport) -> Result<Report, ExportError> {
    Ok(recompute(export)?.0)
}

fn recompute(export: &WitnessExport) -> Result<(Report, MonitorSummary), ExportError> {
    let family = export.family.build()?;
    let family = match &export.family.label {
        Some(_) => family,
        None => family.with_label(export.family_label.clone()),
    };
    if export.construction.kind() != family.kind() {
        return Err(ExportError::WrongConstruction(export.construction, family.kind()));
    }
    match export.mode {
        Mode::Float => recompute_in::<f64>(export, &family),
        Mode::Rational => {
            if export.construction.is_planar() {
                return Err(ExportError::PlanarNeedsFloat);
            }
            recompute_in::<Rational>(export, &family)
        }
    }
}

fn parse_vectors<S: Scalar>(rows: &[Vec<String>], role: VecRole) -> Result<VecSeq<S>, ExportError> {
    let dim = rows.first().map_or(1, Vec::len);
    VecSeq::from_strings(dim, role, rows).ok_or_else(|| ExportError::BadValue(format!("{role:?} vectors")))
}

fn parse_operator<S: Scalar>(entries: &[(usize, usize, String)]) -> Result<SparseOperator<S>, ExportError> {
    let mut op = SparseOperator::new();
    for (i, j, text) in entries {
        let value = S::parse_scalar(text).ok_or_else(|| ExportError::BadValue(text.clone()))?;
        op.set(*i, *j, value);
    }
    Ok(op)
}

fn summarize(quantity: &str, monitor: &Monitor) -> MonitorSummary {
    MonitorSummary {
        quantity: quantity.to_string(),
        total: monitor.total,
        last_decade_increment: monitor.last_decade_increment,
        monotone: monitor.monotone,
        flat: monitor.is_flat(),
    }
}

fn recompute_in<S: Scalar>(export: &WitnessExport, family: &CoefficientFamily) -> Result<(Report, MonitorSummary), ExportError> {
    let tol = export.tolerance;
    let window = export.window;
    let system = BandSystem::new(family.clone())?;
    let op = parse_operator::<S>(&export.operator_entries)?;
    let mut report = verify_annihilation(&op, &system, window, tol)?;
    report.extend(verify_xi_identity(&op, &system, window, tol)?);
    report.push(verify_trace(&op, &-S::one(), tol)?);

    let (quantity, monitor) = match export.construction {
        Construction::LwCollinear | Construction::LwPlanar => {
            let r = parse_vectors::<S>(&export.vectors, VecRole::R)?;
            report.extend(verify_lw_relation(&r, family, window, tol)?);
            if export.construction == Construction::LwCollinear {
                let mu = mu_lw::<S>(family, window)?;
                report.push(verify_lengths_exact("length_r", &r, &mu.values, tol)?);
            } else {
                report.push(verify_lengths("length_r", &r, &lw_radii(family, window)?, LENGTH_TOLERANCE));
            }
            ("|r_n|^2", summability_monitor(&r.squared_lengths()))
        }
        Construction::PentaAnnihilator => {
            let count = window / 2;
            let mu = mu_penta::<S>(family, count.saturating_sub(1))?;
            let mut total = S::zero();
            let mut terms = Vec::with_capacity(count);
            for (n, value) in mu.values.iter().enumerate().take(count) {
                let value = value.clone().ok_or(WitnessError::InfiniteMu { index: n })?;
                terms.push(value.to_f64());
                total = total + value;
            }
            let two = S::one() + S::one();
            report.push(verify_entry_mass(&op, &(S::one() + two * total))?);
            ("mu_n", summability_monitor(&terms))
        }
        Construction::PentaPlanar => {
            let count = window / 2;
            let v = parse_vectors::<S>(&export.vectors, VecRole::V)?;
            let u = parse_vectors::<S>(&export.u_vectors, VecRole::U)?;
            report.extend(verify_penta_relations(&u, &v, family, count, tol.max(DEFAULT_TOLERANCE * 10.0))?);
            let plan = penta_length_plan(family, count)?;
            report.push(verify_lengths("length_u", &u, &plan.u, LENGTH_TOLERANCE));
            report.push(verify_lengths("length_v", &v, &plan.v, LENGTH_TOLERANCE));
            report.extend(bounds_report(&plan));
            let mut squares = v.squared_lengths();
            for (n, x) in u.squared_lengths().into_iter().enumerate() {
                squares[n] += x;
            }
            ("|u_n|^2 + |v_n|^2", summability_monitor(&squares))
        }
    };
    report.mode = S::MODE;
    report.window = window;
    if !(monitor.is_flat() && monitor.monotone) {
        report.warnings.push(format!(
            "partial sums of {quantity} are not flat within the window (last-decade increment {})",
            monitor.last_decade_increment.format()
        ));
    }
    Ok((report, summarize(quantity, &monitor)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::builtin_family;

    #[test]
    fn penta_geometric_annihilator_round_trip() {
        let f = builtin_family("penta_geometric").unwrap();
        let (export, report) = build_witness(&f, &WitnessRequest::new(1, 10, Mode::Rational)).unwrap();
        assert!(report.passed(), "{:?}", report.first_failure());
        assert_eq!(export.construction, Construction::PentaAnnihilator);
        let json = serde_json::to_string(&export).unwrap();
        let back: WitnessExport = serde_json::from_str(&json).unwrap();
        assert_eq!(verify_export(&back).unwrap(), report);
        // Too short a window for the μ partial sums to settle.
        assert_eq!(export.warnings.len(), 1);
        let (export, _) = build_witness(&f, &WitnessRequest::new(1, 150, Mode::Float)).unwrap();
        assert!(export.warnings.is_empty(), "{:?}", export.warnings);
    }

    #[test]
    fn planar_exports_round_trip_in_float() {
        for (name, k) in [("penta_geometric", 2), ("lw_geometric2", 2), ("lw_geometric2", 1)] {
            let f = builtin_family(name).unwrap();
            let (export, report) = build_witness(&f, &WitnessRequest::new(k, 20, Mode::Float)).unwrap();
            assert!(report.passed(), "{name}: {:?}", report.first_failure());
            let json = serde_json::to_string(&export).unwrap();
            let back: WitnessExport = serde_json::from_str(&json).unwrap();
            assert_eq!(verify_export(&back).unwrap(), report, "{name}");
        }
    }

    #[test]
    fn divergent_lengths_warn_without_failing() {
        let f = builtin_family("lw_linear").unwrap();
        let (export, report) = build_witness(&f, &WitnessRequest::new(2, 200, Mode::Float)).unwrap();
        assert!(report.passed());
        assert_eq!(export.warnings.len(), 1);
        assert!(!export.residual_summary.monitor.flat);
    }

    #[test]
    fn rational_planar_is_rejected() {
        let f = builtin_family("penta_unit").unwrap();
        assert_eq!(build_witness(&f, &WitnessRequest::new(2, 5, Mode::Rational)).unwrap_err(), ExportError::PlanarNeedsFloat);
        assert_eq!(build_witness(&f, &WitnessRequest::new(0, 5, Mode::Float)).unwrap_err(), ExportError::InvalidK);
    }

    #[test]
    fn tampered_export_fails_verification() {
        let f = builtin_family("lw_geometric2").unwrap();
        let (mut export, _) = build_witness(&f, &WitnessRequest::new(1, 10, Mode::Rational)).unwrap();
        let entry = export.operator_entries.iter_mut().find(|e| (e.0, e.1) == (3, 4)).unwrap();
        entry.2 = "7".to_string();
        let report = verify_export(&export).unwrap();
        assert_eq!(report.first_failure().unwrap().location.as_deref(), Some("n=3"));
    }
}
