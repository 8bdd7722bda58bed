//! Policy synthesis for MDPs whose actions are guarded by finite-domain
//! parameters. Decides whether some assignment to the controllable parameters
//! meets an expected total reward threshold against every assignment to the
//! uncontrollable ones, using a conflict-driven finite-domain search coupled
//! with a probabilistic model-checking theory solver. Also synthesizes
//! decision-tree shaped policies by encoding the tree structure itself as
//! parameters.

pub mod colored;
pub mod dt;
pub mod ingest;
pub mod model;
pub mod oracle;
pub mod params;
pub mod robust;
pub mod solver;
pub mod theory;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Param(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("coloring error: {0}")]
    Coloring(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("timeout")]
    Timeout,
}

pub type Result<T> = std::result::Result<T, Error>;
