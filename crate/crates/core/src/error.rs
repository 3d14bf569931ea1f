use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("stage {stage}: no proposal accepted after {proposals} tries; the approximation looks collapsed or ill-conditioned")]
    ProposalBudget { stage: usize, proposals: usize },

    #[error("dispatch infeasible in block {block}: demand {demand:.3} MW exceeds total capacity {capacity:.3} MW")]
    Infeasible {
        block: usize,
        demand: f64,
        capacity: f64,
    },

    #[error("iteration {iteration}, stage {stage}: non-finite temporal-difference target")]
    NonFiniteTarget { iteration: usize, stage: usize },

    #[error("oracle needs about {required} {what} but the budget is {budget}; use a coarser shares lattice or scenario grid")]
    Budget {
        what: &'static str,
        required: u128,
        budget: u128,
    },

    #[error("dataset {path}: line {line}, column {column}: {message}")]
    Dataset {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        match self {
            e @ Error::AtIteration { .. } => e,
            e => Error::AtIteration {
                iteration,
                source: Box::new(e),
            },
        }
    }
}
