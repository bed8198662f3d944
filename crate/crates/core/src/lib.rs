#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod bloch;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod linalg;
pub mod lp;
pub mod mle;
pub mod oracle;
pub mod photonics;
pub mod report;
pub mod scalar;
pub mod scan;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use analytic::CertificateReport;
pub use bloch::{BlochVector, QubitState};
pub use geometry::PovmGeometry;
pub use mle::MleResult;
pub use oracle::EveStrategy;
pub use stats::OutcomeStats;

pub type BlochVector64 = BlochVector<f64>;
pub type BlochVector32 = BlochVector<f32>;
pub type QubitState64 = QubitState<f64>;
pub type QubitState32 = QubitState<f32>;
pub type PovmGeometry64 = PovmGeometry<f64>;
pub type PovmGeometry32 = PovmGeometry<f32>;
pub type OutcomeStats64 = OutcomeStats<f64>;
pub type OutcomeStats32 = OutcomeStats<f32>;
pub type CertificateReport64 = CertificateReport<f64>;
pub type CertificateReport32 = CertificateReport<f32>;
pub type EveStrategy64 = EveStrategy<f64>;
pub type EveStrategy32 = EveStrategy<f32>;
pub type MleResult64 = MleResult<f64>;
pub type MleResult32 = MleResult<f32>;
