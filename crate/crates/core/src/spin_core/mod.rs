//! Spin operators, Hamiltonians, eigensystems and transition spectra.

mod dipolar;
mod hamiltonian;
mod operator;
mod spectrum;

pub use dipolar::{dipolar_coupling_tensor, secular_zz};
pub use hamiltonian::{
    build_nv_hamiltonian, build_p1_hamiltonian, build_strain_ef_hamiltonian, p1_electron_ops,
    strain_amplitudes, StrainTensor,
};
pub use operator::{
    eigensystem, identity, spin_operators, Eigensystem, HermitianOperator, Orientation,
    SpinOps, SpinQuantum,
};
pub use spectrum::{transition_spectrum, transition_spectrum_multi, Transition, DEGENERATE_GAP};

pub type C64 = num_complex::Complex64;
pub type CMatrix = nalgebra::DMatrix<C64>;
pub type Vec3 = nalgebra::Vector3<f64>;
