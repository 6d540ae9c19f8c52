//! Ergotropy and metrotropy of finite quantum systems.
//!
//! ```
//! use metrotropy::{ergotropy, metrotropy_matching, StationarySystem};
//!
//! let sys = StationarySystem::new(vec![0.0, 1.0, 2.0], vec![0.2, 0.5, 0.3])?;
//! let w = ergotropy(&sys);
//! let m = metrotropy_matching(&sys);
//! assert!((w.value - 0.4).abs() < 1e-12);
//! assert!((m.value - 0.15).abs() < 1e-12);
//! assert_eq!(m.optimal_permutation.to_string(), "(0 1)");
//! # Ok::<(), metrotropy::Error>(())
//! ```

pub mod error;
pub mod extraction;
pub mod matching;
pub mod optimize;
pub mod permutation;
pub mod qubit;
pub mod stochastic;
pub mod verify;

pub use error::{Error, Result};
pub use extraction::{
    channel_distance, ergotropy, general_ergotropy, initial_energy, involution_energy, metrotropy_bruteforce,
    metrotropy_matching, post_measurement_energy, post_unitary_energy, realizing_unitary, u_matrix, DensityMatrix,
    ExtractionKind, ExtractionReport, StationarySystem,
};
pub use permutation::{enumerate_involutions, is_complementary, Permutation, MAX_ENUMERATION_SIZE};
pub use qubit::{project_bloch, qubit_ergotropy, qubit_metrotropy, BlochVector, QubitMetrotropy, QubitSystem};
pub use stochastic::{
    birkhoff_decompose, unistochastic_of, BistochasticMatrix, Complex64, ConvexCombination, UnitaryMatrix,
};
pub use verify::{
    decide_unistochastic, minimize_post_measurement_energy, parameterized_unitary, verify_metrotropy, OptimizerConfig,
    SearchStatus, UnistochasticVerdict, VerificationReport,
};
