//! Detecting a faint second source next to a bright one at sub-Rayleigh
//! separation: information rates, singular learning asymptotics, Bayesian free
//! energy and finite-sample hypothesis-test power for direct imaging and
//! spatial-mode demultiplexing (SPADE).

pub mod bayes;
pub mod error;
pub mod information;
pub mod numerics;
pub mod optics;
pub mod quadrature;
pub mod rng;
pub mod singular;
pub mod testing;

pub use error::{Error, Result};
pub use optics::{GaussianPsf, SceneParams};
pub use quadrature::QuadratureSpec;
