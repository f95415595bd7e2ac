//! Dense matrix primitives: storage, SVD, symmetric eigendecomposition,
//! fractional powers of PSD matrices, Kronecker products and vectorization.

mod eigen;
mod kron;
mod matrix;
mod svd;

pub use eigen::{psd_frac_power, symmetric_eigen, PsdSpectrum, SymmetricEigen, PSD_TOLERANCE};
pub use kron::{kron, mat_vec, unvec, vec};
pub use matrix::Matrix;
pub use svd::{svd, svd_full, SvdFactors};

