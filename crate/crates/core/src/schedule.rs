//! Slack-clamped timestep rule for the fixed-rate physics task.

use crate::Real;

/// Fixed-rate loop configuration: nominal period, slack allowance and an
/// optional step budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerConfig {
    /// Nominal task period T in seconds.
    pub period: Real,
    /// Slack time t_s in seconds: the timestep may exceed T by at most this.
    pub slack: Real,
    /// Stop after this many steps when set.
    pub max_steps: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleError {
    NonPositivePeriod,
    NegativeSlack,
}

impl core::fmt::Display for ScheduleError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ScheduleError::NonPositivePeriod => write!(f, "scheduler period must be > 0"),
            ScheduleError::NegativeSlack => write!(f, "scheduler slack must be >= 0"),
        }
    }
}

impl core::error::Error for ScheduleError {}

impl SchedulerConfig {
    pub fn new(period: Real, slack: Real) -> Result<Self, ScheduleError> {
        let cfg = Self {
            period,
            slack,
            max_steps: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        if !(self.period > 0.0) {
            return Err(ScheduleError::NonPositivePeriod);
        }
        if !(self.slack >= 0.0) {
            return Err(ScheduleError::NegativeSlack);
        }
        Ok(())
    }
}

/// Simulation timestep for one wake-up: dt = min(T + t_d, T + t_s), where
/// t_d is the measured delay between the planned and actual wake-up times.
/// With no delay this reduces to dt = T; the slack bounds the worst case.
pub fn compute_timestep(period: Real, delay: Real, slack: Real) -> Real {
    let delay = delay.max(0.0);
    (period + delay).min(period + slack)
}
