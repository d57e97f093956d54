//! Deterministic numerical primitives shared by the model, training and
//! evaluation code.

pub mod decompose;
pub mod gradcheck;
pub mod matrix;
pub mod ops;
pub mod rng;
pub mod spectral;

pub use decompose::moving_avg_decompose;
pub use gradcheck::finite_diff_grad;
pub use matrix::{ComplexMatrix, RealMatrix};
pub use ops::{gelu, layer_norm, softmax_rows, LAYER_NORM_EPS};
pub use rng::SeedRng;
pub use spectral::{dft_rows, dft_rows_real, flip_spectrum, idft_rows};
