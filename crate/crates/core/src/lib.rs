//! Level set topology optimisation of periodic microstructures.
//!
//! The crate implements inverse homogenisation on the unit cell `D = [0,1]^2`:
//! a design is tracked implicitly as the zero level set of one (single-phase)
//! or two (colour level sets, up to four phases) nodal functions, the periodic
//! linear-elasticity cell problems are solved with bilinear quadrilateral
//! elements and an ersatz void material, and shape sensitivities are extended
//! and regularised over the whole cell by solving identification problems in
//! `H¹_per(D)`.
//!
//! Two velocity strategies drive the Hamilton-Jacobi transport of the level
//! sets under equality constraints:
//!
//! * [`projection`] — an orthogonal-projection method: the extended constraint
//!   sensitivities are orthogonalised (linearly dependent constraints drop out
//!   naturally), the extended objective sensitivity is projected onto the
//!   complement, and the two parts are combined on the unit sphere of the
//!   `H` norm so that every constraint decreases at a prescribed rate.
//! * [`slp`] — a sequential linear programming baseline with trust regions.
//!
//! [`driver`] wires everything into the outer optimisation loop (line search
//! on the CFL coefficient, reinitialisation, stopping tests) and [`io`]
//! provides config parsing and CSV/VTK/JSON emission for the CLI.

pub mod driver;
pub mod fem;
pub mod functionals;
pub mod grid;
pub mod hilbertian;
pub mod homogenization;
pub mod io;
pub mod levelset;
pub mod linalg;
pub mod material;
pub mod projection;
pub mod slp;
pub mod tensor;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("linear solver failed: {0}")]
    Solver(String),
    #[error("numerical blow-up at time step {step}: {context}")]
    Blowup { step: usize, context: String },
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),
    #[error("all constraint sensitivities are linearly dependent or zero while residuals are nonzero: {0}")]
    InfeasibleDirection(String),
    #[error("design collapsed: {0}")]
    DesignCollapse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
