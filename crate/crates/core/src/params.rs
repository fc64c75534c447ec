//! Exogenous model constants.

use thiserror::Error;

/// Rates and balance-sheet constants shared by every analysis route.
///
/// Time is measured in units of the loan-formation rate, so `gamma` defaults
/// to one. The remaining defaults are the reproduction values used for the
/// dense/sparse sweeps: `nu = 2`, `b0 = 2`, `n_agents = 1000`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    /// Loan-formation rate per agent (as borrower).
    pub gamma: f64,
    /// Maturation rate per link.
    pub lambda: f64,
    /// Disclosure rate per agent.
    pub nu: f64,
    /// Liquid assets held by every agent.
    pub b0: f64,
    /// Cost of miscoordination shared by every lender.
    pub c: f64,
    pub n_agents: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("{name} must be a finite non-negative number, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("n_agents must be at least 2, got {0}")]
    TooFewAgents(usize),
    #[error("lambda must be positive for a stationary state")]
    NoMaturation,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            gamma: 1.0,
            lambda: 0.05,
            nu: 2.0,
            b0: 2.0,
            c: 0.5,
            n_agents: 1000,
        }
    }
}

impl Params {
    pub fn with_c(self, c: f64) -> Self {
        Params { c, ..self }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Params { lambda, ..self }
    }

    pub fn with_b0(self, b0: f64) -> Self {
        Params { b0, ..self }
    }

    pub fn with_nu(self, nu: f64) -> Self {
        Params { nu, ..self }
    }

    /// Checks the sign constraints and the agent count.
    pub fn validate(&self) -> Result<(), ParamsError> {
        for (name, value) in [
            ("gamma", self.gamma),
            ("lambda", self.lambda),
            ("nu", self.nu),
            ("b0", self.b0),
            ("c", self.c),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ParamsError::Negative { name, value });
            }
        }
        if self.n_agents < 2 {
            return Err(ParamsError::TooFewAgents(self.n_agents));
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus `lambda > 0`, required by every
    /// stationary-state computation.
    pub fn validate_stationary(&self) -> Result<(), ParamsError> {
        self.validate()?;
        if self.lambda <= 0.0 {
            return Err(ParamsError::NoMaturation);
        }
        Ok(())
    }

    /// Connectivity of the link-formation/maturation process alone, `gamma / lambda`.
    pub fn erdos_renyi_connectivity(&self) -> f64 {
        self.gamma / self.lambda
    }
}
