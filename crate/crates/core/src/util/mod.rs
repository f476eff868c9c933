//! Infrastructure numerics: quadrature, ODE integration, tridiagonal
//! solves, interpolation.  Everything here is generic machinery with no
//! knowledge of solitons or potentials.

pub mod interp;
pub mod ode;
pub mod quad;
pub mod special;
pub mod tridiag;
