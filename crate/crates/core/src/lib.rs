//! Tensor network states augmented by weight states.

pub mod contraction;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod models;
mod labeled;
pub mod linalg;
pub mod network;
pub mod tensor;
pub mod variational;
pub mod weight;

pub use contraction::{
    border_rank_expectation, embed_mps_strategy, mps_strategy_expectation, stable_interpolate, tns_expectation,
    transfer_matrix_overlap, BtnsEmbedding, InterpolationPlan,
};
pub use error::{Error, Result};
pub use graph::{build_graph, snake_path, GraphKind, GraphSpec, NetworkShape, PathCover};
pub use network::{
    btns_evaluate, degeneration_evaluate, degeneration_to_btns, expectation_exact, random_init, tns_evaluate,
    BtnsRep, DegenerationCurve, Observable, TnsRep,
};
pub use models::{ed_ground_state, heisenberg_ring, separation_hamiltonian, Hamiltonian, KnownState, LocalTerm};
pub use tensor::{contract, inner, svd, SvdResult, Tensor, C64};
pub use weight::{
    border_rank_curve, build_weight_state, central_difference_curve, project_local_degree, weight_coefficient,
    weight_mps, ProductCurve, WeightSpec,
};
pub use variational::{
    apply_gate, energy_and_gradient, gradient_descent, imaginary_time, objective_and_gradient, trotter_gate,
    weighted_truncate, EnergyMethod, ItePlan, IteRow, Objective, OptimizerConfig, TraceRow,
};
pub use experiments::{run_experiment, AnsatzKind, AnsatzSpec, ExperimentConfig, ExperimentKind, ExperimentResult};
