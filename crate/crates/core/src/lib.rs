//! Analysis toolkit for optimization-based safe controllers on control-affine
//! systems `ẋ = f(x) + g(x)u`.
//!
//! The crate covers two controller families built on a control barrier
//! function (CBF) pair `(h, α)`:
//!
//! * the **safety filter**, which minimally modifies a nominal input so that
//!   `∇hᵀ(f + g(k + u)) + α(h) ≥ 0`, and
//! * the **CLF-CBF QP**, which combines a relaxed control Lyapunov function
//!   (CLF) decrease constraint with the hard CBF constraint.
//!
//! On top of the controllers it provides equilibrium search and
//! classification ([`equilibria`]), closed-form boundary Jacobians and
//! spectra ([`spectral`]), a numerical check of the Hessian equivalence
//! relation between CBFs of the same safe set ([`equivalence`]), and fixed
//! step closed-loop simulation ([`sim`]).
//!
//! All evaluators are immutable, `Send + Sync` closures, so every analysis can
//! be run concurrently over many states.

pub mod controller;
pub mod equilibria;
pub mod equivalence;
pub mod error;
pub mod linalg;
pub mod model;
pub mod qp;
pub mod ser;
pub mod sim;
pub mod spectral;

pub use controller::{Controller, ControllerFamily, ControlOutput};
pub use equilibria::{
    Desirability, EquilibriumAnalysis, EquilibriumKind, EquilibriumReport, EquilibriumSearch, Multipliers,
};
pub use equivalence::{EquivalenceReport, EquivalenceVerdict};
pub use error::{Error, Result};
pub use model::{
    BallForm, BarrierPair, ClassK, Gamma, LyapunovPair, PositiveWeight, SafeSetGeometry,
    SystemModel, TransformStep,
};
pub use qp::{InputWeight, KktPoint, QpProblem};
pub use sim::{GridSpec, TerminalLabel, Trajectory};
pub use spectral::{SpectralResult, Stability};

/// Dense column vector used for states, inputs and gradients.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used for Jacobians, Hessians and input matrices.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Complex scalar used for eigenvalues.
pub type Complex = num_complex::Complex64;
