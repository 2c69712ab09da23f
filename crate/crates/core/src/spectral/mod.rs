//! Operators, windows and functional calculus.
//!
//! All calculus is expressed through `A = -L >= 0`: the window evaluated at
//! `sigma^2 L` in the literature is `w(sigma^2 lambda)` with `lambda` an
//! eigenvalue of `A`.

mod operator;
mod sigma;
mod window;

pub use operator::{
    apply_calculus, apply_calculus_complex, eigendecompose, fourier_multiplier, hermite_functions, hermite_grid,
    kernel_matrix, propagator, schrodinger_matrix, OperatorKind, OperatorSpec, Propagator, SpectralDecomp,
    DENSE_LIMIT,
};
pub use sigma::{GainTable, Normalization, ScaleFrame, SigmaGrid};
pub use window::{Window, WindowVariant};

pub(crate) use window::bump;
