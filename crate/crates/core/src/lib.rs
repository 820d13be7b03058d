//! Stochastic integral mappings of infinitely divisible distributions,
//! computed on Lévy triplets.

pub mod error;
pub mod idlaw;
pub mod kernels;
pub mod mapping;
pub mod measures;
pub mod montecarlo;
pub mod quad;
pub mod roots;
pub mod special;

pub use error::{Error, Result};
pub use idlaw::Triplet;
pub use kernels::{Family, KernelSpec, Piece, StepKernel};
pub use measures::{GammaRep, LevyMeasure, PolarAtom, RadialRay, RadialTabulated, SphericalMeasure, Vector};
