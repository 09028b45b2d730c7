use thiserror::Error;

/// Errors produced by configuration, closed forms, estimators and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("undefined for p = {p}, lambda = {lambda}: no connected vehicles can be observed")]
    NoConnectedVehicles { p: f64, lambda: f64 },

    #[error("overflow model diverges at rho = {rho} (requires rho < 1)")]
    Divergent { rho: f64 },

    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("budget exceeded: {requested} cell-cycles requested, cap is {cap}")]
    BudgetExceeded { requested: u64, cap: u64 },

    #[error("cell lambda = {lambda}, p = {p}: {source}")]
    Cell {
        lambda: f64,
        p: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("experiment grid is empty")]
    EmptyGrid,

    #[error("figure {figure} is missing cells: {missing}")]
    MissingCells { figure: String, missing: String },

    #[error("unknown {what} `{name}`")]
    UnknownName { what: &'static str, name: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
