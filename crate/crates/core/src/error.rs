use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("operands carry different ring configurations")]
    ConfigMismatch,
    #[error("element is not a unit")]
    NotAUnit,
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("incompatible ring tags: {0}")]
    IncompatibleTags(String),
    #[error("certified window is empty")]
    WindowEmpty,
    #[error("query touches exponents outside the certified window: {0}")]
    UncertifiedWindow(String),
    #[error("window or degree cap exceeded: {0}")]
    WindowOverflow(String),
    #[error("series is zero at the working precision")]
    ZeroAtPrecision,
    #[error("leading coefficient is not a unit: {0}")]
    LeadingCoeffNotUnit(String),
    #[error("iteration failed to contract: {0}")]
    NoContraction(String),
    #[error("no calibration (u, m) with |u| rho_n^m = 1: {0}")]
    BadCalibration(String),
    #[error("no suitable j up to j_max = {0}")]
    JMaxExceeded(u32),
    #[error("not invertible at the working precision: {0}")]
    NotInvertibleAtPrecision(String),
    #[error("lambda is a unit; the twisted equation needs v_p(lambda) > 0")]
    LambdaIsUnit,
    #[error("no entry has a unit leading coefficient")]
    NoUnitLeadingEntry,
    #[error("degree descent stuck: {0} (retry at doubled precision)")]
    DegreeStuck(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("certificate failed verification: {0}")]
    VerificationFailed(String),
}

impl Error {
    /// Stable variant name, used in the JSON `"error"` field of the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::ConfigMismatch => "ConfigMismatch",
            Error::NotAUnit => "NotAUnit",
            Error::PrecisionExhausted(_) => "PrecisionExhausted",
            Error::IncompatibleTags(_) => "IncompatibleTags",
            Error::WindowEmpty => "WindowEmpty",
            Error::UncertifiedWindow(_) => "UncertifiedWindow",
            Error::WindowOverflow(_) => "WindowOverflow",
            Error::ZeroAtPrecision => "ZeroAtPrecision",
            Error::LeadingCoeffNotUnit(_) => "LeadingCoeffNotUnit",
            Error::NoContraction(_) => "NoContraction",
            Error::BadCalibration(_) => "BadCalibration",
            Error::JMaxExceeded(_) => "JMaxExceeded",
            Error::NotInvertibleAtPrecision(_) => "NotInvertibleAtPrecision",
            Error::LambdaIsUnit => "LambdaIsUnit",
            Error::NoUnitLeadingEntry => "NoUnitLeadingEntry",
            Error::DegreeStuck(_) => "DegreeStuck",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::Unsupported(_) => "Unsupported",
            Error::Parse(_) => "Parse",
            Error::VerificationFailed(_) => "VerificationFailed",
        }
    }
}
