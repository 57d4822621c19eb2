//! Built-in models: closed-form maps in normal form and the three degree of
//! freedom Hamiltonian with its Poincaré map.

mod hamiltonian;
mod poly;
mod twist;

pub use hamiltonian::{
    alpha, alpha_with_base, energy, fit_saddle_exponents, flow_step, ham_vector_field,
    pendulum_from_local, pendulum_local_coords, poincare_map, symplectic_step, FlowState,
    FourierTable, FourierTerm, HamiltonianSpec, LogBase, PoincareReturn, SaddleFit,
};
pub use poly::{
    make_defective, make_linear, make_poly, make_poly_with, Defect, PolyModel, PolyParams,
};
pub use twist::{make_twist_annulus, Frequency, TwistAnnulus};
