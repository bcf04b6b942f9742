//! Ericksen-Leslie nematic liquid crystals with the full Oseen-Frank energy:
//! small-tensor algebra, energies and stresses, grid fields, time
//! integrators, and relative-energy certification of trajectories.

pub mod tensor;
pub mod frank;
pub mod leslie;
pub mod fields;
pub mod solvers;
pub mod diagnostics;
pub mod cli;
