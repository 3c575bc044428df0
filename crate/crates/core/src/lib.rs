//! Pseudo-spectral simulator and verification harness for the singular
//! PDE-ODE chemotaxis system `u_t = Δu − ξ∇·(u∇ln c)`, `c_t = −μuc` and its
//! Cole-Hopf transformed parabolic-hyperbolic form on a periodic 2D torus.
//!
//! The numerical core is generic over the scalar type ([`Real`], implemented
//! for `f32` and `f64`); the aliases below fix it to `f64`, which is what the
//! experiment harness and CLI use.

pub mod cole_hopf;
pub mod evolve;
pub mod field;
pub mod flux_diag;
pub mod harness;
pub mod init_data;
pub mod scalar;
pub mod snapshot;

pub use scalar::Real;

pub type Grid = field::Grid<f64>;
pub type ScalarField = field::ScalarField<f64>;
pub type VectorField = field::VectorField<f64>;
pub type Spectrum = field::Spectrum<f64>;
pub type SimState = evolve::SimState<f64>;
pub type StepperConfig = evolve::StepperConfig<f64>;
pub type ChemistryParams = cole_hopf::ChemistryParams<f64>;
pub type DiagnosticsRecord = flux_diag::DiagnosticsRecord<f64>;
pub type Trajectory = evolve::Trajectory<f64>;
pub type InitialData = init_data::InitialData<f64>;

pub type Grid32 = field::Grid<f32>;
pub type ScalarField32 = field::ScalarField<f32>;
pub type VectorField32 = field::VectorField<f32>;
pub type SimState32 = evolve::SimState<f32>;
