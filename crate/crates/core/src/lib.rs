//! Nearest Ω-stable matrices.
//!
//! Given a real square matrix `A` and a region Ω of the complex plane built
//! from conic sectors, a vertical strip and real-centered disks, this crate
//! searches for a matrix `X = (J - R) P⁻¹` close to `A` in Frobenius norm whose
//! eigenvalues all lie in Ω. The triple `(J, R, P)` (skew, symmetric, PSD) is
//! constrained by linear matrix inequalities that are jointly convex, and the
//! non-convex objective is attacked by block coordinate descent.
//!
//! Module map:
//! - [`region`]: region primitives, membership and boundary sampling.
//! - [`numkernel`]: symmetric eigen utilities, triple assembly, matrix files.
//! - [`lmi`]: constraint operators in `(J, R, P)` and in the Lyapunov variable `X`.
//! - [`solver`]: the `(J, R)` subproblem, gradient steps, BCD, triple projection.
//! - [`init`]: identity, relaxed-LMI and true initializations.
//! - [`harness`]: synthetic data, studies, the discrete-time example, plot data.

pub mod error;
pub mod harness;
pub mod init;
pub mod lmi;
pub mod numkernel;
pub mod region;
pub mod solver;

pub use error::{Error, Result};
pub use numkernel::{DhTriple, Mat};
pub use region::{ConicSector, Disk, RegionSpec, VerticalStrip};
pub use solver::{SolveReport, SolverOptions, StepRule};
