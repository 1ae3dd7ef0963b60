//! Self-contained numerical kernels: ODE integration, quadrature, root
//! bracketing, periodic spectral differencing, finite differences,
//! Hermite interpolation and least-squares line fits.

pub mod fd;
pub mod fit;
pub mod interp;
pub mod ode;
pub mod quad;
pub mod roots;
pub mod spectral;

pub use fit::{linear_fit, LinearFit};
pub use ode::{Dp5, OdeOptions};
pub use quad::integrate;
pub use roots::bisect;
pub use spectral::PeriodicDiff;
