//! Closed-loop assembly and execution: reference, controller, elevator
//! servo, pitch plant, unity attitude feedback, and an optional pitch-rate
//! inner loop, with disturbance injection.
//!
//! Per control step of length `dt`: form the error from the measured pitch
//! angle, advance the controller, subtract the rate-gyro feedback, drive
//! the servo and plant (each RK4 sub-stepped internally), and record
//! everything. All runs start from zero state.

use thiserror::Error;

use crate::controllers::{Controller, ControllerError, ControllerSpec};
use crate::lti::{LtiError, PlantCatalog, StateSpaceModel};

/// Output magnitude past which a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown plant `{0}`; catalog: pitch_747, servo_747, short_period")]
    UnknownPlant(String),
    #[error("config field `{field}`: {message}")]
    Config { field: &'static str, message: String },
    #[error(transparent)]
    Controller(#[from] ControllerError),
}

fn config_err(field: &'static str, message: impl Into<String>) -> SimError {
    SimError::Config {
        field,
        message: message.into(),
    }
}

/// Reference signal shapes.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSpec {
    /// 0 before `start`, `amplitude` afterwards.
    Step { amplitude: f64, start: f64 },
    /// 0 before `start`, then `slope * (t - start)`.
    Ramp { slope: f64, start: f64 },
    /// Piecewise-constant levels; each entry holds from its time until the
    /// next. 0 before the first entry.
    Schedule(Vec<(f64, f64)>),
}

impl ReferenceSpec {
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            ReferenceSpec::Step { amplitude, start } => {
                if t >= *start {
                    *amplitude
                } else {
                    0.0
                }
            }
            ReferenceSpec::Ramp { slope, start } => {
                if t >= *start {
                    slope * (t - start)
                } else {
                    0.0
                }
            }
            ReferenceSpec::Schedule(points) => points
                .iter()
                .take_while(|(time, _)| *time <= t)
                .last()
                .map(|(_, level)| *level)
                .unwrap_or(0.0),
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if let ReferenceSpec::Schedule(points) = self {
            if points.is_empty() {
                return Err(config_err("reference", "schedule must not be empty"));
            }
            if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(config_err(
                    "reference",
                    "schedule times must be strictly increasing",
                ));
            }
        }
        Ok(())
    }
}

/// Where a disturbance enters the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectionPoint {
    PlantInput,
    PlantOutput,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DisturbanceKind {
    /// Step of `magnitude` switched in at `start`.
    Abrupt { magnitude: f64, start: f64 },
    /// Sinusoid of `amplitude` and `frequency_hz` switched in at `start`.
    Continuous {
        amplitude: f64,
        frequency_hz: f64,
        start: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceSpec {
    pub kind: DisturbanceKind,
    pub injection: InjectionPoint,
}

impl DisturbanceSpec {
    pub fn value_at(&self, t: f64) -> f64 {
        match self.kind {
            DisturbanceKind::Abrupt { magnitude, start } => {
                if t >= start {
                    magnitude
                } else {
                    0.0
                }
            }
            DisturbanceKind::Continuous {
                amplitude,
                frequency_hz,
                start,
            } => {
                if t >= start {
                    amplitude * (2.0 * std::f64::consts::PI * frequency_hz * (t - start)).sin()
                } else {
                    0.0
                }
            }
        }
    }

    fn start(&self) -> f64 {
        match self.kind {
            DisturbanceKind::Abrupt { start, .. } => start,
            DisturbanceKind::Continuous { start, .. } => start,
        }
    }
}

/// Everything needed to run one closed-loop simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    /// Plant name from the catalog.
    pub plant: String,
    /// Actuator servo name from the catalog, or none for direct drive.
    pub servo: Option<String>,
    pub controller: ControllerSpec,
    /// Rate-gyro gain for the inner damping loop; none disables it. The
    /// sign convention is arranged so a positive gain damps regardless of
    /// the plant's gain sign.
    pub inner_loop_gain: Option<f64>,
    /// Control period, seconds.
    pub dt: f64,
    /// Total simulated time, seconds.
    pub duration: f64,
    pub reference: ReferenceSpec,
    pub disturbance: Option<DisturbanceSpec>,
    /// Loop polarity, +1 or -1: the sign of the amplifier driving the
    /// servo. -1 closes the loop correctly for the negative-gain pitch
    /// plant while the controller and its gain-scheduling tuner keep
    /// operating on the natural tracking error (reference - output).
    pub error_sign: f64,
    /// Actuator saturation bounds on the controller command; the integral
    /// freezes while saturated.
    pub output_limits: Option<(f64, f64)>,
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if PlantCatalog::by_name(&self.plant).is_none() {
            return Err(SimError::UnknownPlant(self.plant.clone()));
        }
        if let Some(servo) = &self.servo {
            if PlantCatalog::by_name(servo).is_none() {
                return Err(SimError::UnknownPlant(servo.clone()));
            }
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(config_err("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.duration >= self.dt) || !self.duration.is_finite() {
            return Err(config_err(
                "duration",
                format!("must be at least dt, got {}", self.duration),
            ));
        }
        if self.error_sign != 1.0 && self.error_sign != -1.0 {
            return Err(config_err(
                "error_sign",
                format!("must be +1 or -1, got {}", self.error_sign),
            ));
        }
        if let Some((lo, hi)) = self.output_limits {
            if !(lo < hi) {
                return Err(config_err(
                    "output_limits",
                    format!("must satisfy lo < hi, got ({lo}, {hi})"),
                ));
            }
        }
        self.reference.validate()?;
        if let Some(d) = &self.disturbance {
            let start = d.start();
            if !(0.0..=self.duration).contains(&start) {
                return Err(config_err(
                    "disturbance.start",
                    format!("must lie in [0, duration], got {start}"),
                ));
            }
            if let DisturbanceKind::Continuous { frequency_hz, .. } = d.kind {
                if !(frequency_hz > 0.0) {
                    return Err(config_err(
                        "disturbance.frequency_hz",
                        format!("must be positive, got {frequency_hz}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// One sample of the closed loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub reference: f64,
    pub error: f64,
    /// Controller command (servo input voltage before rate feedback).
    pub control: f64,
    /// Elevator deflection applied over the step starting at `t`.
    pub elevator: f64,
    /// Measured pitch angle at `t`.
    pub pitch: f64,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

/// Time-indexed record of a run. `divergence` carries the failure time when
/// the run blew up; the records up to that point are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub dt: f64,
    pub records: Vec<TraceRecord>,
    pub divergence: Option<f64>,
}

impl SimulationTrace {
    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn outputs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.pitch).collect()
    }

    pub fn references(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.reference).collect()
    }
}

/// Builds the controller from the config (applying the configured output
/// limits) and runs the loop.
pub fn run(config: &LoopConfig) -> Result<SimulationTrace, SimError> {
    config.validate()?;
    let mut controller = config.controller.build()?;
    if let Some((lo, hi)) = config.output_limits {
        controller = controller.with_output_limits(lo, hi)?;
    }
    run_with_controller(config, controller)
}

/// Runs the loop with an explicitly supplied controller, used as given —
/// the controller spec and output limits inside `config` are ignored.
/// Lets callers substitute controller internals, e.g. a fuzzy PID with a
/// stubbed tuner.
pub fn run_with_controller(
    config: &LoopConfig,
    mut controller: Controller,
) -> Result<SimulationTrace, SimError> {
    config.validate()?;
    let mut plant = PlantCatalog::by_name(&config.plant)
        .ok_or_else(|| SimError::UnknownPlant(config.plant.clone()))?
        .to_state_space();
    let mut servo: Option<StateSpaceModel> = match &config.servo {
        Some(name) => Some(
            PlantCatalog::by_name(name)
                .ok_or_else(|| SimError::UnknownPlant(name.clone()))?
                .to_state_space(),
        ),
        None => None,
    };

    let steps = (config.duration / config.dt).round() as usize;
    let mut records = Vec::with_capacity(steps + 1);
    let mut divergence = None;

    let mut pitch = 0.0; // measured output at the current step
    let mut last_plant_input = 0.0;

    for k in 0..=steps {
        let t = k as f64 * config.dt;
        let reference = config.reference.value_at(t);
        let error = reference - pitch;

        let control = match controller.compute(error, config.dt) {
            Ok(out) => out,
            Err(ControllerError::NonFiniteError) => {
                divergence = Some(t);
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let u = control.output;
        if !u.is_finite() || u.abs() > DIVERGENCE_LIMIT {
            divergence = Some(t);
            break;
        }

        // Rate-gyro feedback from the plant realization's derivative
        // output. The loop polarity wraps the whole summing junction, so a
        // positive rate gain damps for either plant gain sign.
        let servo_input = match config.inner_loop_gain {
            Some(gain) => {
                config.error_sign * (u - gain * plant.derivative_output(last_plant_input))
            }
            None => config.error_sign * u,
        };

        let disturbance = config.disturbance.map(|d| d.value_at(t)).unwrap_or(0.0);

        let elevator = match &mut servo {
            Some(model) => match model.step(servo_input, config.dt) {
                Ok(y) => y,
                Err(LtiError::Diverged { .. }) => {
                    divergence = Some(t);
                    break;
                }
                Err(_) => unreachable!("step only fails by divergence"),
            },
            None => servo_input,
        };

        let plant_input = match config.disturbance {
            Some(DisturbanceSpec {
                injection: InjectionPoint::PlantInput,
                ..
            }) => elevator + disturbance,
            _ => elevator,
        };

        let next_pitch = match plant.step(plant_input, config.dt) {
            Ok(y) => y,
            Err(LtiError::Diverged { .. }) => {
                divergence = Some(t);
                break;
            }
            Err(_) => unreachable!("step only fails by divergence"),
        };
        let next_pitch = match config.disturbance {
            Some(DisturbanceSpec {
                injection: InjectionPoint::PlantOutput,
                ..
            }) => next_pitch + disturbance,
            _ => next_pitch,
        };

        records.push(TraceRecord {
            t,
            reference,
            error,
            control: u,
            elevator,
            pitch,
            kp: control.gains.kp,
            ki: control.gains.ki,
            kd: control.gains.kd,
        });

        if !next_pitch.is_finite() || next_pitch.abs() > DIVERGENCE_LIMIT {
            divergence = Some(t + config.dt);
            break;
        }
        pitch = next_pitch;
        last_plant_input = plant_input;
    }

    Ok(SimulationTrace {
        dt: config.dt,
        records,
        divergence,
    })
}
