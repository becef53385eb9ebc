//! Verblunsky coefficients of orthogonal polynomials on the unit circle with
//! varying weight `e^{-nV(cos λ)}`, the one-arc equilibrium problem, CMV
//! matrices and the asymptotic law for `α_{n+m}`.

pub mod error;
pub mod potential;
pub mod quadrature;
pub mod equilibrium;
pub mod verblunsky;
pub mod cmv;
pub mod asymptotics;

pub use error::{Error, Result};
pub use potential::Potential;
pub use quadrature::{trig_moments, MomentTable};
pub use cmv::{build_cmv, CmvMatrix, SymmetrizedPair};
pub use verblunsky::{levinson, verblunsky, OrthonormalBasis, VerblunskySequence};
pub use equilibrium::{solve_support, EquilibriumMeasure, SupportArc};
pub use asymptotics::{
    b_coeffs, fit_prediction, fourier_v, symbol_delta, symbol_delta_fourier, toeplitz_inverse_coeffs, AsymptoticModel,
    BTable, FitReport, FourierCoeffs, ToeplitzSymbol,
};
