use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rule does not cover group `{group}`{}", stratum.as_ref().map(|s| format!(" in stratum `{s}`")).unwrap_or_default())]
    Coverage { group: String, stratum: Option<String> },

    #[error("invalid decision rule: {0}")]
    InvalidRule(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid utility matrix: {0}")]
    InvalidUtility(String),

    #[error("invalid benefit matrix: {0}")]
    InvalidBenefit(String),

    #[error("invalid criterion: {0}")]
    InvalidCriterion(String),

    #[error("invalid assessment: {0}")]
    InvalidAssessment(String),

    #[error(
        "no group criterion is morally appropriate: the benefit must be produced by the decision or by the outcome"
    )]
    NoAppropriateCriterion,

    #[error("FEC vacuously satisfied; no constraint needed")]
    VacuousFec,

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("no feasible rule at gamma {gamma}; max achievable gamma found is {max_gamma}")]
    Infeasible { gamma: f64, max_gamma: f64 },

    #[error("degenerate stratification: every stratum has fewer than {min_count} records for some group")]
    DegenerateStratification { min_count: usize },

    #[error("oracle refuses {records} records (limit {limit})")]
    TooLarge { records: usize, limit: usize },

    #[error("stratified split failed: {0}")]
    Stratification(String),

    #[error("training diverged (non-finite loss at iteration {iteration}); try a smaller learning rate")]
    Divergence { iteration: usize },

    #[error("missing feature `{0}`")]
    MissingFeature(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("wizard aborted: {0}")]
    Aborted(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("toml decode: {0}")]
    TomlDecode(#[from] toml::de::Error),

    #[error("toml encode: {0}")]
    TomlEncode(#[from] toml::ser::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
