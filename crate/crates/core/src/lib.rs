//! Low-rank tensor regression by projected gradient descent.
//!
//! Coefficient tensors are fitted under Gaussian, logistic or Poisson
//! likelihoods with one of three constraint cones:
//!
//! * `Θ1(r)`: the slice ranks sum to at most `r`;
//! * `Θ2(r, s)`: at most `s` nonzero slices, each of rank at most `r`;
//! * `Θ3(r)`: every mode matricization has rank at most `r`.
//!
//! ```
//! use tensorpgd::datagen::{CaseSpec, SnrLevel};
//! use tensorpgd::pgd::{pgd_solve, PgdConfig};
//! use tensorpgd::projection::ConstraintSpec;
//!
//! let case = CaseSpec::lookup("8a", SnrLevel::High).unwrap().with_n(600);
//! let data = case.generate(7).unwrap();
//! let cfg = PgdConfig::new(ConstraintSpec::Theta2 { r: 5, s: 5 }, 0.5).max_iters(100);
//! let trace = pgd_solve(&data, &cfg).unwrap();
//! assert!(trace.final_rmse().unwrap() < 0.5);
//! ```

pub mod bench;
pub mod convex;
pub mod datagen;
pub mod error;
pub mod glm;
pub mod pgd;
pub mod projection;
pub mod spectral;
pub mod tensor;
pub mod width;

pub use error::{Error, Result};
pub use glm::{Dataset, GlmFamily};
pub use pgd::{pgd_solve, PgdConfig, RunTrace};
pub use projection::ConstraintSpec;
pub use tensor::DenseTensor;
