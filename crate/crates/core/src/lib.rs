//! Band-diagonal biorthogonal systems and their density properties.
//!
//! The crate models a tridiagonal system and a pentadiagonal family over an
//! orthonormal basis `e_0, e_1, ...`, computes the Ξ-sequence
//! of an operator relative to such a system, decides k-point and rank-one
//! density through the μ-sequence criteria, and builds the explicit
//! annihilating operators and planar vector sequences that witness the
//! failure of density.
//!
//! Two arithmetic modes are supported throughout: exact rationals
//! ([`Rational`]) and `f64`. Residual checks accumulate exactly in both modes,
//! so a float-mode residual is the exact residual of the stored `f64` data,
//! rounded once.

pub mod classify;
pub mod export;
pub mod family;
pub mod scalar;
pub mod systems;
pub mod verify;
pub mod witness;
pub mod xi;

pub use classify::{
    classify_lw, classify_penta, mu_lw, mu_penta, recip_a, series_diagnostic, Answer, Basis,
    ClassifyOptions, DensityProperty, Evidence, MuKind, MuSeq, PentaCase, PentaMuSeq,
    SeriesOutcome, Verdict,
};
pub use family::{builtin_family, parse_family, Coefficient, CoefficientFamily, FamilyKind, FamilySpec};
pub use scalar::{Mode, Rational, Scalar};
pub use export::{build_witness, verify_export, Construction, ConstructionChoice, WitnessExport, WitnessRequest};
pub use systems::{build_lw_system, build_penta_system, check_biorthogonality, BandSystem, BandVector};
pub use verify::{Check, CheckStatus, Report};
pub use witness::{VecRole, VecSeq};
pub use xi::{SparseOperator, XiProvenance, XiSeq};
