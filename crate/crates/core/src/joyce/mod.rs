//! Vertical coordinates, Plebański functions, the heavenly equation and zero-section data.

mod chart;
mod heavenly;
mod kderiv;
mod pleb;
mod theta;
mod zero;

pub use heavenly::{canonical_hessian, canonical_hessian_steps, canonical_jacobian, heavenly_residual, CanonicalHessian};
pub use kderiv::{k_second_derivatives_fd, k_third_derivatives, k_third_derivatives_fd, k_third_derivatives_fd_ladder, k_third_derivatives_fd_levels, vertical_fields, K_FD_LADDER, KThird, VerticalField};
pub use pleb::{euler_rescale, euler_unit, euler_weights, homogeneity_defect, plebanski_w, plebanski_w_pii_general, EulerWeights};
pub use theta::{
    fiber_from_uniformized, lattice_distance, theta_inverse, theta_inverse_pair, theta_lattice, theta_map, uniformized_fiber,
    ThetaBackend, ThetaCoords, UniformizedFiber,
};
pub use zero::{involution_piii, joyce_connection, k_third_at_zero, prepotential_s, zero_section_gradient, JoyceConnection, Prepotential};
