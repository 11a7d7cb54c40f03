//! Declarative simulation scenarios: a named bundle of labeled loop
//! configurations sharing one time base, an analysis specification, and
//! optional comparison pairs. Scenarios load from TOML files; the five
//! built-in experiment bundles ship embedded in the binary.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use fspid::controllers::{ControllerSpec, PidGains};
use fspid::metrics::{self, DisturbanceMetrics, StepMetrics};
use fspid::simloop::{
    self, DisturbanceKind, DisturbanceSpec, InjectionPoint, LoopConfig, ReferenceSpec,
    SimulationTrace,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Sim(#[from] simloop::SimError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

/// Reference signal description as written in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceFile {
    Step {
        amplitude: f64,
        #[serde(default)]
        start: f64,
    },
    Ramp {
        slope: f64,
        #[serde(default)]
        start: f64,
    },
    Schedule {
        points: Vec<(f64, f64)>,
    },
}

impl ReferenceFile {
    fn to_spec(&self) -> ReferenceSpec {
        match self {
            ReferenceFile::Step { amplitude, start } => ReferenceSpec::Step {
                amplitude: *amplitude,
                start: *start,
            },
            ReferenceFile::Ramp { slope, start } => ReferenceSpec::Ramp {
                slope: *slope,
                start: *start,
            },
            ReferenceFile::Schedule { points } => ReferenceSpec::Schedule(points.clone()),
        }
    }
}

/// Controller description as written in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControllerFile {
    Proportional {
        gain: f64,
    },
    Pid {
        kp: f64,
        ki: f64,
        kd: f64,
    },
    FuzzyPid {
        kp: f64,
        ki: f64,
        kd: f64,
        /// Half-width of the fuzzy universes; 5.0 is the standard system.
        #[serde(default = "default_universe")]
        universe: f64,
    },
}

fn default_universe() -> f64 {
    5.0
}

impl ControllerFile {
    fn to_spec(&self) -> ControllerSpec {
        match *self {
            ControllerFile::Proportional { gain } => ControllerSpec::Proportional { gain },
            ControllerFile::Pid { kp, ki, kd } => ControllerSpec::Pid {
                gains: PidGains::new(kp, ki, kd),
            },
            ControllerFile::FuzzyPid {
                kp,
                ki,
                kd,
                universe,
            } => ControllerSpec::FuzzyPid {
                initial: PidGains::new(kp, ki, kd),
                universe_half_width: universe,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceFile {
    Abrupt {
        magnitude: f64,
        start: f64,
        #[serde(default)]
        injection: InjectionFile,
    },
    Continuous {
        amplitude: f64,
        frequency_hz: f64,
        start: f64,
        #[serde(default)]
        injection: InjectionFile,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InjectionFile {
    #[default]
    PlantInput,
    PlantOutput,
}

impl DisturbanceFile {
    fn to_spec(&self) -> DisturbanceSpec {
        let (kind, injection) = match *self {
            DisturbanceFile::Abrupt {
                magnitude,
                start,
                injection,
            } => (DisturbanceKind::Abrupt { magnitude, start }, injection),
            DisturbanceFile::Continuous {
                amplitude,
                frequency_hz,
                start,
                injection,
            } => (
                DisturbanceKind::Continuous {
                    amplitude,
                    frequency_hz,
                    start,
                },
                injection,
            ),
        };
        DisturbanceSpec {
            kind,
            injection: match injection {
                InjectionFile::PlantInput => InjectionPoint::PlantInput,
                InjectionFile::PlantOutput => InjectionPoint::PlantOutput,
            },
        }
    }
}

/// One labeled loop configuration inside a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub label: String,
    pub plant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub servo: Option<String>,
    #[serde(default = "default_error_sign")]
    pub error_sign: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_loop_gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_limits: Option<(f64, f64)>,
    pub reference: ReferenceFile,
    pub controller: ControllerFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<DisturbanceFile>,
}

fn default_error_sign() -> f64 {
    1.0
}

impl RunFile {
    pub fn to_loop_config(&self, dt: f64, duration: f64) -> LoopConfig {
        LoopConfig {
            plant: self.plant.clone(),
            servo: self.servo.clone(),
            controller: self.controller.to_spec(),
            inner_loop_gain: self.inner_loop_gain,
            dt,
            duration,
            reference: self.reference.to_spec(),
            disturbance: self.disturbance.as_ref().map(|d| d.to_spec()),
            error_sign: self.error_sign,
            output_limits: self.output_limits,
        }
    }
}

/// What to measure on each finished trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalysisFile {
    /// Step metrics over the whole trace from `step_time`.
    Step { step_time: f64, target: f64 },
    /// Step metrics per (start, end, target) window; used for command
    /// tracking schedules.
    Segments { segments: Vec<(f64, f64, f64)> },
    /// Peak and RMS deviation from the reference from `window_start` on,
    /// plus step metrics of the initial response.
    Disturbance {
        step_time: f64,
        target: f64,
        window_start: f64,
    },
}

/// Named comparison between two run labels, rendered into the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparePair {
    pub baseline: String,
    pub candidate: String,
}

/// A fully described experiment bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub dt: f64,
    pub duration: f64,
    pub analysis: AnalysisFile,
    #[serde(default, rename = "compare", skip_serializing_if = "Vec::is_empty")]
    pub comparisons: Vec<ComparePair>,
    pub runs: Vec<RunFile>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        if !(self.dt > 0.0) {
            return Err(invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if self.duration < self.dt {
            return Err(invalid("duration", "must be at least dt"));
        }
        if self.runs.is_empty() {
            return Err(invalid("runs", "at least one labeled run is required"));
        }
        let mut labels = HashSet::new();
        for run in &self.runs {
            if run.label.is_empty() {
                return Err(invalid("runs.label", "must not be empty"));
            }
            if !labels.insert(run.label.as_str()) {
                return Err(invalid(
                    "runs.label",
                    format!("duplicate label `{}`", run.label),
                ));
            }
            run.to_loop_config(self.dt, self.duration)
                .validate()
                .map_err(|e| invalid(format!("runs.{}", run.label), e.to_string()))?;
        }
        if let AnalysisFile::Segments { segments } = &self.analysis {
            if segments.is_empty() {
                return Err(invalid("analysis.segments", "must not be empty"));
            }
            for &(start, end, _) in segments {
                if !(start < end) {
                    return Err(invalid(
                        "analysis.segments",
                        format!("segment [{start}, {end}] is empty"),
                    ));
                }
            }
        }
        for pair in &self.comparisons {
            for label in [&pair.baseline, &pair.candidate] {
                if !labels.contains(label.as_str()) {
                    return Err(invalid(
                        "compare",
                        format!("label `{label}` does not name a run"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["fig5", "fig6", "fig7", "fig8", "fig9"]
    }

    pub fn builtin(name: &str) -> Option<Scenario> {
        let text = match name {
            "fig5" => include_str!("../scenarios/fig5.toml"),
            "fig6" => include_str!("../scenarios/fig6.toml"),
            "fig7" => include_str!("../scenarios/fig7.toml"),
            "fig8" => include_str!("../scenarios/fig8.toml"),
            "fig9" => include_str!("../scenarios/fig9.toml"),
            _ => return None,
        };
        Some(Scenario::from_toml(text).expect("built-in scenario parses"))
    }

    /// Resolves a CLI argument: built-in name first, then filesystem path.
    pub fn resolve(name_or_path: &str) -> Result<Scenario, ScenarioError> {
        if let Some(s) = Self::builtin(name_or_path) {
            return Ok(s);
        }
        Self::load(Path::new(name_or_path))
    }
}

/// Analysis results for one labeled run.
#[derive(Debug, Clone, PartialEq)]
pub enum RunAnalysis {
    Step(StepMetrics),
    Segments(Vec<(f64, f64, StepMetrics)>),
    Disturbance {
        step: StepMetrics,
        rejection: DisturbanceMetrics,
    },
    /// The trace blew up at the recorded time; no metrics.
    Diverged { time: f64 },
    /// Zero analysis target; metrics are meaningless.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub label: String,
    pub trace: SimulationTrace,
    pub analysis: RunAnalysis,
}

#[derive(Debug)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub outcomes: Vec<RunOutcome>,
}

impl ScenarioReport {
    pub fn outcome(&self, label: &str) -> Option<&RunOutcome> {
        self.outcomes.iter().find(|o| o.label == label)
    }

    pub fn any_diverged(&self) -> bool {
        self.outcomes
            .iter()
            .any(|o| matches!(o.analysis, RunAnalysis::Diverged { .. }))
    }
}

fn analyze(trace: &SimulationTrace, analysis: &AnalysisFile) -> Result<RunAnalysis, ScenarioError> {
    if let Some(time) = trace.divergence {
        return Ok(RunAnalysis::Diverged { time });
    }
    let times = trace.times();
    let outputs = trace.outputs();
    match analysis {
        AnalysisFile::Step { step_time, target } => {
            if *target == 0.0 {
                return Ok(RunAnalysis::Degenerate);
            }
            Ok(RunAnalysis::Step(metrics::analyze_step(
                &times, &outputs, *step_time, *target,
            )?))
        }
        AnalysisFile::Segments { segments } => {
            let mut per_segment = Vec::with_capacity(segments.len());
            for &(start, end, target) in segments {
                if target == 0.0 {
                    return Ok(RunAnalysis::Degenerate);
                }
                let lo = times.partition_point(|&t| t < start);
                let hi = times.partition_point(|&t| t < end);
                let m = metrics::analyze_step(&times[lo..hi], &outputs[lo..hi], start, target)?;
                per_segment.push((start, end, m));
            }
            Ok(RunAnalysis::Segments(per_segment))
        }
        AnalysisFile::Disturbance {
            step_time,
            target,
            window_start,
        } => {
            if *target == 0.0 {
                return Ok(RunAnalysis::Degenerate);
            }
            let step = metrics::analyze_step(&times, &outputs, *step_time, *target)?;
            let rejection = metrics::disturbance_rejection(
                &times,
                &outputs,
                &trace.references(),
                *window_start,
            )?;
            Ok(RunAnalysis::Disturbance { step, rejection })
        }
    }
}

/// Runs every labeled configuration and analyzes the traces. Divergence in
/// one run does not abort the others.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioReport, ScenarioError> {
    scenario.validate()?;
    let mut outcomes = Vec::with_capacity(scenario.runs.len());
    for run in &scenario.runs {
        let config = run.to_loop_config(scenario.dt, scenario.duration);
        let trace = simloop::run(&config)?;
        let analysis = analyze(&trace, &scenario.analysis)?;
        outcomes.push(RunOutcome {
            label: run.label.clone(),
            trace,
            analysis,
        });
    }
    Ok(ScenarioReport {
        scenario: scenario.clone(),
        outcomes,
    })
}

/// CSV column order, fixed.
pub const CSV_HEADER: &str = "t,reference,error,u,delta_e,theta,kp,ki,kd";

pub fn trace_to_csv(trace: &SimulationTrace) -> String {
    let mut out = String::with_capacity(trace.records.len() * 64);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.t, r.reference, r.error, r.control, r.elevator, r.pitch, r.kp, r.ki, r.kd
        );
    }
    out
}

fn render_analysis(out: &mut String, analysis: &RunAnalysis) {
    match analysis {
        RunAnalysis::Step(m) => {
            let _ = write!(out, "{m}");
        }
        RunAnalysis::Segments(segments) => {
            for (start, end, m) in segments {
                let _ = writeln!(out, "  segment {start} s .. {end} s");
                let _ = write!(out, "{m}");
            }
        }
        RunAnalysis::Disturbance { step, rejection } => {
            let _ = write!(out, "{step}");
            let _ = writeln!(
                out,
                "  peak_deviation          {:.6}",
                rejection.peak_deviation
            );
            let _ = writeln!(
                out,
                "  rms_deviation           {:.6}",
                rejection.rms_deviation
            );
        }
        RunAnalysis::Diverged { time } => {
            let _ = writeln!(out, "  DIVERGED at t = {time} s");
        }
        RunAnalysis::Degenerate => {
            let _ = writeln!(out, "  degenerate analysis (zero target)");
        }
    }
}

/// Renders the human-readable summary: one block per label, then the
/// configured comparisons.
pub fn render_summary(report: &ScenarioReport) -> String {
    let mut out = String::new();
    let s = &report.scenario;
    let _ = writeln!(out, "scenario {}", s.name);
    if !s.description.is_empty() {
        let _ = writeln!(out, "# {}", s.description);
    }
    let _ = writeln!(out, "dt {}", s.dt);
    let _ = writeln!(out, "duration {}", s.duration);
    let _ = writeln!(
        out,
        "# bands: settling {}%, peak detection {}%",
        metrics::SETTLING_BAND * 100.0,
        metrics::PEAK_BAND * 100.0
    );
    for outcome in &report.outcomes {
        let _ = writeln!(out);
        let _ = writeln!(out, "label {}", outcome.label);
        render_analysis(&mut out, &outcome.analysis);
    }
    for pair in &s.comparisons {
        let (Some(a), Some(b)) = (
            report.outcome(&pair.baseline),
            report.outcome(&pair.candidate),
        ) else {
            continue;
        };
        let _ = writeln!(out);
        let _ = writeln!(out, "compare {} -> {}", pair.baseline, pair.candidate);
        match (&a.analysis, &b.analysis) {
            (RunAnalysis::Step(ma), RunAnalysis::Step(mb)) => {
                let _ = write!(out, "{}", metrics::compare(ma, mb));
            }
            (
                RunAnalysis::Disturbance {
                    step: ma,
                    rejection: ra,
                },
                RunAnalysis::Disturbance {
                    step: mb,
                    rejection: rb,
                },
            ) => {
                let _ = write!(out, "{}", metrics::compare(ma, mb));
                let _ = writeln!(
                    out,
                    "  peak_deviation {:.4} -> {:.4}",
                    ra.peak_deviation, rb.peak_deviation
                );
                let _ = writeln!(
                    out,
                    "  rms_deviation  {:.4} -> {:.4}",
                    ra.rms_deviation, rb.rms_deviation
                );
            }
            (RunAnalysis::Segments(sa), RunAnalysis::Segments(sb)) => {
                for ((start, end, ma), (_, _, mb)) in sa.iter().zip(sb) {
                    let _ = writeln!(out, "  segment {start} s .. {end} s");
                    let _ = write!(out, "{}", metrics::compare(ma, mb));
                }
            }
            _ => {
                let _ = writeln!(out, "  not comparable (divergence or mixed analyses)");
            }
        }
    }
    out
}

/// Writes one CSV per label plus the summary file. Returns the summary
/// path.
pub fn write_artifacts(report: &ScenarioReport, out_dir: &Path) -> Result<PathBuf, ScenarioError> {
    let io_err = |path: &Path, source: io::Error| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    };
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    for outcome in &report.outcomes {
        let path = out_dir.join(format!("{}_{}.csv", report.scenario.name, outcome.label));
        fs::write(&path, trace_to_csv(&outcome.trace)).map_err(|e| io_err(&path, e))?;
    }
    let summary_path = out_dir.join(format!("{}_summary.txt", report.scenario.name));
    fs::write(&summary_path, render_summary(report)).map_err(|e| io_err(&summary_path, e))?;
    Ok(summary_path)
}
