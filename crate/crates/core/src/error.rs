use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}, column `{column}`: {message}")]
    Parse {
        line: u64,
        column: String,
        message: String,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown patient `{0}`")]
    UnknownPatient(String),

    #[error("unknown node {0}")]
    UnknownNode(String),

    #[error("empty network: {0}")]
    EmptyNetwork(String),

    #[error("degenerate bipartite shape (n1={n1}, n2={n2}); centralization needs at least two nodes per set")]
    DegenerateShape { n1: usize, n2: usize },

    #[error("measure {0} is not a network-level measure")]
    NotNetworkLevel(String),

    #[error("zero rank variance")]
    ZeroVariance,

    #[error("training data has a single outcome class")]
    SingleClass,

    #[error("missing measure {0}")]
    MissingMeasure(String),

    #[error("infeasible synthetic configuration: {0}")]
    Infeasible(String),

    #[error("cancelled")]
    Cancelled,
}
