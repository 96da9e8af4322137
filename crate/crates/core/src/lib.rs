//! Relaxed zero-forcing (RZF) coordinated beamforming for K-pair MISO and
//! MIMO interference channels.
//!
//! The crate covers the full beam-design pipeline:
//!
//! - **channel**: reproducible Rayleigh interference-channel instances with a
//!   plain-text interchange format.
//! - **projection**: complex subspace geometry — orthogonal projections onto
//!   growing spans, updated by a sequential one-vector recursion.
//! - **miso**: MF/ZF/virtual-SINR baselines, rate functionals, and RZF
//!   feasibility checks shared by all solvers.
//! - **sopc**: the fast sequential orthogonal projection combining solver for
//!   the per-transmitter RZF problem, plus two- and three-user closed forms.
//! - **oracle**: an exact convex reference solver (projected gradient with
//!   Dykstra projections and an active-set polish) with KKT certificates.
//! - **rate_control**: leakage-budget design — utility functions, the
//!   centralized alternating search, and distributed operating-point tables.
//! - **mimo**: the Frobenius-norm RZF extension with a projected-gradient
//!   precoder design.
//! - **experiment**: deterministic experiment drivers and result tables
//!   backing the CLI.
//!
//! Rates are base-2 logarithms (bits per channel use) throughout.

pub mod channel;
pub mod experiment;
pub mod mimo;
pub mod miso;
pub mod oracle;
pub mod projection;
pub mod rate_control;
pub mod sopc;

pub use channel::{Instance, MimoChannelSet, MisoChannelSet, RngSpec};
pub use miso::{BeamVector, LeakageBudget, RatePoint};
pub use oracle::{KktCertificate, OracleOptions, OracleSolution};
pub use projection::SpanAccumulator;
pub use sopc::{SopcSolution, Termination};

/// Complex scalar used across the crate.
pub type Cpx = num_complex::Complex64;
/// Complex column vector.
pub type CVector = nalgebra::DVector<Cpx>;
/// Complex dense matrix.
pub type CMatrix = nalgebra::DMatrix<Cpx>;
