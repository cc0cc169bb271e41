use iaec_core::aec_classic::AecError;
use iaec_core::dsp::DspError;
use iaec_core::eval::EvalError;
use iaec_core::fixtures::FixtureError;
use iaec_core::mixer::MixError;
use iaec_core::nnet::NnetError;
use iaec_core::train::TrainError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// Schema or validation failure, already prefixed with `path:line`.
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<DspError> for CliError {
    fn from(e: DspError) -> Self {
        match e {
            DspError::NonFinite(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<MixError> for CliError {
    fn from(e: MixError) -> Self {
        match e {
            MixError::BadSir(_) => CliError::Usage(e.to_string()),
            MixError::Dsp(d) => d.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<NnetError> for CliError {
    fn from(e: NnetError) -> Self {
        match e {
            NnetError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::NonFinite(_) => CliError::Numerical(e.to_string()),
            EvalError::BadTarget(_) => CliError::Usage(e.to_string()),
            EvalError::Nnet(n) => n.into(),
            EvalError::Mix(m) => m.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFinite { .. } => CliError::Numerical(e.to_string()),
            TrainError::Config(_) => CliError::Usage(e.to_string()),
            TrainError::Nnet(n) => n.into(),
            TrainError::Mix(m) => m.into(),
            TrainError::Dsp(d) => d.into(),
            TrainError::Eval(v) => v.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<AecError> for CliError {
    fn from(e: AecError) -> Self {
        match e {
            AecError::Singular => CliError::Numerical(e.to_string()),
            AecError::Config(_) => CliError::Usage(e.to_string()),
            AecError::Dsp(d) => d.into(),
            AecError::Length(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<FixtureError> for CliError {
    fn from(e: FixtureError) -> Self {
        match e {
            FixtureError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}
