//! Numerical substrate: dense real tensors, complex matrices, a Hermitian
//! eigensolver and addressable random streams.

mod complex;
mod eig;
mod rng;
mod tensor;

pub use complex::{ComplexMatrix, SparseMatrix, C64, I, ONE, ZERO};
pub use eig::{hermitian_eig, symmetric_eig, HermitianEig, HERMITIAN_TOL, MAX_DIM};
pub use rng::{Distribution, RngStream, Sample};
pub use tensor::{matmul, Tensor};
