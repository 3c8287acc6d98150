//! Seeded instance generators for PET, D-optimal design and log
//! investment, plus the rank-one fast path for D-optimal design.

mod dopt;
mod json;
mod loginvest;
mod pet;
pub mod rng;

pub use dopt::{
    dense_q, gen_dopt, DoptFastState, DoptInstance, DoptKnapsackProblem, DoptProblem, FastStep,
    Knapsack,
};
pub use json::{Instance, InstanceFile};
pub use loginvest::{gen_log_invest, LogInvestInstance, LogInvestProblem};
pub use pet::{bins_per_voxel, draw_pet_probabilities, gen_pet, PetInstance, PetProblem};
