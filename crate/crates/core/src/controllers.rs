//! Discrete-time controllers: proportional, conventional PID, and fuzzy
//! self-tuning PID.
//!
//! The PID law is positional: `u(k) = kp e(k) + ki sum(e) + kd (e(k) -
//! e(k-1))`. No sampling-period scaling is applied inside the law, so the
//! gains absorb the control period of whatever loop drives the controller.
//! The fuzzy variant recomputes its effective gains every step as initial
//! gains plus the inference increments.

use thiserror::Error;

use crate::fuzzy::{FuzzyError, FuzzyInferenceSystem, GainIncrements};

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("controller received a non-finite error input")]
    NonFiniteError,
    #[error("control period must be positive, got {0}")]
    InvalidPeriod(f64),
    #[error("output limits must satisfy lo < hi, got ({0}, {1})")]
    InvalidLimits(f64, f64),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
}

/// Proportional, integral, and derivative gains.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self { kp, ki, kd }
    }
}

/// Anything that can supply gain increments from (error, error change).
/// Implemented by the fuzzy system; a zero stub is provided for checking
/// that a fuzzy PID with no increments degenerates to the plain PID.
pub trait GainTuner: Send + Sync {
    fn increments(&self, error: f64, error_change: f64) -> GainIncrements;
}

impl GainTuner for FuzzyInferenceSystem {
    fn increments(&self, error: f64, error_change: f64) -> GainIncrements {
        self.infer(error, error_change).increments
    }
}

/// Tuner that never adjusts anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroTuner;

impl GainTuner for ZeroTuner {
    fn increments(&self, _error: f64, _error_change: f64) -> GainIncrements {
        GainIncrements::default()
    }
}

/// Discrete controller memory.
#[derive(Debug, Clone, Copy, Default)]
pub struct ControllerState {
    pub error_sum: f64,
    pub prev_error: f64,
    pub last_gains: PidGains,
    pub initialized: bool,
}

enum Law {
    Proportional { gain: f64 },
    Pid { gains: PidGains },
    FuzzyPid { initial: PidGains, tuner: Box<dyn GainTuner> },
}

/// Output of one control step: the actuator command and the gains that
/// produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub output: f64,
    pub gains: PidGains,
}

/// A stateful discrete controller with optional actuator saturation.
pub struct Controller {
    law: Law,
    state: ControllerState,
    output_limits: Option<(f64, f64)>,
}

impl Controller {
    pub fn proportional(gain: f64) -> Self {
        Self {
            law: Law::Proportional { gain },
            state: ControllerState::default(),
            output_limits: None,
        }
    }

    pub fn pid(gains: PidGains) -> Self {
        Self {
            law: Law::Pid { gains },
            state: ControllerState::default(),
            output_limits: None,
        }
    }

    pub fn fuzzy_pid(initial: PidGains, fis: FuzzyInferenceSystem) -> Self {
        Self::fuzzy_pid_with_tuner(initial, Box::new(fis))
    }

    pub fn fuzzy_pid_with_tuner(initial: PidGains, tuner: Box<dyn GainTuner>) -> Self {
        Self {
            law: Law::FuzzyPid { initial, tuner },
            state: ControllerState::default(),
            output_limits: None,
        }
    }

    /// Clamps the output to `[lo, hi]` and freezes the integral while the
    /// command is saturated in the direction the error would deepen.
    pub fn with_output_limits(mut self, lo: f64, hi: f64) -> Result<Self, ControllerError> {
        if !(lo < hi) {
            return Err(ControllerError::InvalidLimits(lo, hi));
        }
        self.output_limits = Some((lo, hi));
        Ok(self)
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    /// Advances the controller one step and returns the command together
    /// with the effective gains. `period` must be positive; the discrete
    /// law itself does not scale by it.
    pub fn compute(&mut self, error: f64, period: f64) -> Result<ControlOutput, ControllerError> {
        if !error.is_finite() {
            return Err(ControllerError::NonFiniteError);
        }
        if !(period > 0.0) {
            return Err(ControllerError::InvalidPeriod(period));
        }
        let error_change = if self.state.initialized {
            error - self.state.prev_error
        } else {
            0.0
        };

        let (raw, gains, candidate_sum) = match &self.law {
            Law::Proportional { gain } => (
                gain * error,
                PidGains::new(*gain, 0.0, 0.0),
                self.state.error_sum,
            ),
            Law::Pid { gains } => {
                let sum = self.state.error_sum + error;
                (pid_law(*gains, error, sum, error_change), *gains, sum)
            }
            Law::FuzzyPid { initial, tuner } => {
                let inc = tuner.increments(error, error_change);
                let gains = PidGains::new(
                    initial.kp + inc.kp,
                    initial.ki + inc.ki,
                    initial.kd + inc.kd,
                );
                let sum = self.state.error_sum + error;
                (pid_law(gains, error, sum, error_change), gains, sum)
            }
        };

        let (output, committed_sum) = match self.output_limits {
            None => (raw, candidate_sum),
            Some((lo, hi)) => {
                if raw > hi {
                    // Deepening saturation: keep the old accumulation.
                    let sum = if gains.ki * error > 0.0 {
                        self.state.error_sum
                    } else {
                        candidate_sum
                    };
                    (hi, sum)
                } else if raw < lo {
                    let sum = if gains.ki * error < 0.0 {
                        self.state.error_sum
                    } else {
                        candidate_sum
                    };
                    (lo, sum)
                } else {
                    (raw, candidate_sum)
                }
            }
        };

        self.state.error_sum = committed_sum;
        self.state.prev_error = error;
        self.state.initialized = true;
        self.state.last_gains = gains;
        Ok(ControlOutput { output, gains })
    }

    /// Returns the state to the pre-first-step condition; configuration is
    /// untouched.
    pub fn reset(&mut self) {
        self.state = ControllerState::default();
    }
}

fn pid_law(gains: PidGains, error: f64, error_sum: f64, error_change: f64) -> f64 {
    gains.kp * error + gains.ki * error_sum + gains.kd * error_change
}

/// Declarative controller configuration, buildable into a live controller.
/// This is what scenario files carry.
#[derive(Debug, Clone, PartialEq)]
pub enum ControllerSpec {
    Proportional {
        gain: f64,
    },
    Pid {
        gains: PidGains,
    },
    FuzzyPid {
        initial: PidGains,
        /// Half-width for all five fuzzy universes; the standard system is
        /// rescaled to it. 5.0 reproduces the standard system unchanged.
        universe_half_width: f64,
    },
}

impl ControllerSpec {
    pub fn build(&self) -> Result<Controller, ControllerError> {
        match *self {
            ControllerSpec::Proportional { gain } => Ok(Controller::proportional(gain)),
            ControllerSpec::Pid { gains } => Ok(Controller::pid(gains)),
            ControllerSpec::FuzzyPid {
                initial,
                universe_half_width,
            } => {
                let fis = FuzzyInferenceSystem::standard().rescale_universe(universe_half_width)?;
                Ok(Controller::fuzzy_pid(initial, fis))
            }
        }
    }
}
