//! Q-learning for continuous simplex actions with importance-sampled
//! accept-reject exploration, a stochastic generation-expansion benchmark, and
//! an exact scenario-tree oracle to score learned policies against.

pub mod approx;
pub mod error;
pub mod example1;
pub mod gep;
pub mod lattice;
pub mod mdp;
pub mod oracle;
pub mod qlearn;
pub mod samplers;

pub use approx::{argmin_action, features, ArgminParams, FeatureSpec, QApprox};
pub use error::{Error, Result};
pub use gep::GepInstance;
pub use mdp::{
    make_state, ActionShares, ExogenousDraw, Policy, Problem, SampleRecord, StageIndex,
    StateVector,
};
pub use oracle::{backward_induction, build_tree, percent_gap, simulate_policy, OracleSolution, ScenarioTree};
pub use qlearn::{extract_policy, run, GreedyPolicy, RunConfig, RunOutcome, RunReport, SamplerKind};
pub use samplers::{
    epsilon_at, epsilon_greedy_action, propose_uniform_shares, qis_sample_action, qratio,
    reevaluate_bounds, EpsilonSchedule, FeatureCache, QisBounds, SampleArchive,
};
