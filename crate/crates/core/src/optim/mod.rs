//! Local optimizers shared by the estimation, GP and design modules.
//!
//! Both solvers are small dense implementations sized for the 2 to 20
//! dimensional problems that appear here.

mod levenberg_marquardt;
mod quasi_newton;

pub use levenberg_marquardt::{least_squares, LmOptions, LmReport};
pub use quasi_newton::{central_gradient, minimize, QnOptions, QnReport};

/// Why a local solve stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    GradientTolerance,
    StepTolerance,
    ValueTolerance,
    MaxIterations,
    LineSearchFailed,
    NonFinite,
}

impl StopReason {
    pub fn converged(self) -> bool {
        matches!(
            self,
            StopReason::GradientTolerance | StopReason::StepTolerance | StopReason::ValueTolerance
        )
    }
}
