//! Scenario loading, validation, execution, and artifact contracts.

use fspid_cli::scenario::{
    run_scenario, trace_to_csv, write_artifacts, RunAnalysis, Scenario, ScenarioError, CSV_HEADER,
};

#[test]
fn builtins_resolve_by_name() {
    for name in Scenario::builtin_names() {
        let s = Scenario::builtin(name).unwrap();
        assert_eq!(&s.name, name);
        s.validate().unwrap();
    }
    assert!(Scenario::builtin("fig99").is_none());
}

#[test]
fn every_builtin_runs_without_divergence() {
    for name in Scenario::builtin_names() {
        let scenario = Scenario::builtin(name).unwrap();
        let report = run_scenario(&scenario).unwrap();
        assert!(!report.any_diverged(), "{name} diverged");
        assert_eq!(report.outcomes.len(), scenario.runs.len());
    }
}

#[test]
fn zero_dt_is_rejected_naming_the_field() {
    let mut s = Scenario::builtin("fig5").unwrap();
    s.dt = 0.0;
    match s.validate() {
        Err(ScenarioError::Invalid { field, .. }) => assert_eq!(field, "dt"),
        other => panic!("expected dt error, got {other:?}"),
    }
}

#[test]
fn duplicate_labels_are_rejected() {
    let mut s = Scenario::builtin("fig5").unwrap();
    let copy = s.runs[0].clone();
    s.runs.push(copy);
    match s.validate() {
        Err(ScenarioError::Invalid { field, message }) => {
            assert_eq!(field, "runs.label");
            assert!(message.contains("pc"));
        }
        other => panic!("expected label error, got {other:?}"),
    }
}

#[test]
fn unknown_plant_is_rejected_with_run_context() {
    let mut s = Scenario::builtin("fig5").unwrap();
    s.runs[0].plant = "a380".into();
    match s.validate() {
        Err(ScenarioError::Invalid { field, message }) => {
            assert_eq!(field, "runs.pc");
            assert!(message.contains("a380"));
        }
        other => panic!("expected plant error, got {other:?}"),
    }
}

#[test]
fn comparison_labels_must_exist() {
    let mut s = Scenario::builtin("fig9").unwrap();
    s.comparisons[0].candidate = "nope".into();
    assert!(matches!(
        s.validate(),
        Err(ScenarioError::Invalid { field, .. }) if field == "compare"
    ));
}

#[test]
fn toml_round_trip_preserves_the_scenario_and_its_traces() {
    for name in ["fig5", "fig7", "fig9"] {
        let original = Scenario::builtin(name).unwrap();
        let text = original.to_toml();
        let reloaded = Scenario::from_toml(&text).unwrap();
        assert_eq!(original, reloaded, "{name} round trip");

        let a = run_scenario(&original).unwrap();
        let b = run_scenario(&reloaded).unwrap();
        for (x, y) in a.outcomes.iter().zip(&b.outcomes) {
            assert_eq!(x.trace, y.trace, "{name}/{} trace changed", x.label);
        }
    }
}

#[test]
fn fuzzy_universe_override_is_honored() {
    let text = r#"
name = "wide"
dt = 0.05
duration = 2.0

[analysis]
kind = "step"
step_time = 0.0
target = 1.0

[[runs]]
label = "fspid"
plant = "short_period"

[runs.reference]
kind = "step"
amplitude = 1.0
start = 0.0

[runs.controller]
kind = "fuzzy_pid"
kp = 4.0
ki = 0.0
kd = 30.0
universe = 40.0
"#;
    let scenario = Scenario::from_toml(text).unwrap();
    let config = scenario.runs[0].to_loop_config(scenario.dt, scenario.duration);
    match &config.controller {
        fspid::controllers::ControllerSpec::FuzzyPid {
            universe_half_width,
            ..
        } => assert_eq!(*universe_half_width, 40.0),
        other => panic!("expected fuzzy spec, got {other:?}"),
    }
    // Runs with the rescaled system without error.
    run_scenario(&scenario).unwrap();
}

#[test]
fn zero_amplitude_reference_flags_degenerate_analysis() {
    let mut s = Scenario::builtin("fig8").unwrap();
    for run in &mut s.runs {
        run.reference = fspid_cli::scenario::ReferenceFile::Step {
            amplitude: 0.0,
            start: 0.0,
        };
    }
    if let fspid_cli::scenario::AnalysisFile::Step { target, .. } = &mut s.analysis {
        *target = 0.0;
    }
    let report = run_scenario(&s).unwrap();
    for outcome in &report.outcomes {
        assert!(matches!(outcome.analysis, RunAnalysis::Degenerate));
        assert!(outcome.trace.records.iter().all(|r| r.pitch == 0.0));
    }
}

#[test]
fn csv_has_the_documented_schema_and_finite_fields() {
    let scenario = Scenario::builtin("fig8").unwrap();
    let report = run_scenario(&scenario).unwrap();
    let csv = trace_to_csv(&report.outcomes[0].trace);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER);
    assert_eq!(CSV_HEADER, "t,reference,error,u,delta_e,theta,kp,ki,kd");
    let mut rows = 0;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 9);
        for field in fields {
            let value: f64 = field.parse().expect("numeric field");
            assert!(value.is_finite());
            assert!(!field.contains(['e', 'E']), "decimal notation only: {field}");
        }
        rows += 1;
    }
    assert_eq!(rows, report.outcomes[0].trace.records.len());
    assert!(csv.ends_with('\n'));
}

#[test]
fn artifacts_are_written_per_label_plus_summary() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = Scenario::builtin("fig9").unwrap();
    let report = run_scenario(&scenario).unwrap();
    let summary_path = write_artifacts(&report, dir.path()).unwrap();

    assert!(dir.path().join("fig9_cpid.csv").exists());
    assert!(dir.path().join("fig9_fspid.csv").exists());
    let summary = std::fs::read_to_string(&summary_path).unwrap();
    assert!(summary.contains("label cpid"));
    assert!(summary.contains("label fspid"));
    assert!(summary.contains("compare cpid -> fspid"));
    assert!(summary.contains("segment"));
}

#[test]
fn disturbance_summary_reports_deviation_per_controller() {
    let report = run_scenario(&Scenario::builtin("fig7").unwrap()).unwrap();
    let summary = fspid_cli::scenario::render_summary(&report);
    for label in [
        "cpid_abrupt",
        "fspid_abrupt",
        "cpid_continuous",
        "fspid_continuous",
    ] {
        assert!(summary.contains(&format!("label {label}")));
    }
    assert!(summary.contains("peak_deviation"));
    assert!(summary.contains("rms_deviation"));
    assert!(summary.contains("compare cpid_abrupt -> fspid_abrupt"));
}

#[test]
fn summary_reports_divergence_without_dropping_other_labels() {
    // A positively fed-back short-period loop diverges; its sibling run
    // still gets full metrics.
    let text = r#"
name = "mixed"
dt = 0.05
duration = 10.0

[analysis]
kind = "step"
step_time = 0.0
target = 1.0

[[runs]]
label = "bad"
plant = "short_period"
error_sign = -1.0

[runs.reference]
kind = "step"
amplitude = 1.0
start = 0.0

[runs.controller]
kind = "proportional"
gain = 5.0

[[runs]]
label = "good"
plant = "short_period"

[runs.reference]
kind = "step"
amplitude = 1.0
start = 0.0

[runs.controller]
kind = "proportional"
gain = 1.0
"#;
    let scenario = Scenario::from_toml(text).unwrap();
    let report = run_scenario(&scenario).unwrap();
    assert!(report.any_diverged());
    assert!(matches!(
        report.outcome("bad").unwrap().analysis,
        RunAnalysis::Diverged { .. }
    ));
    assert!(matches!(
        report.outcome("good").unwrap().analysis,
        RunAnalysis::Step(_)
    ));
    let summary = fspid_cli::scenario::render_summary(&report);
    assert!(summary.contains("DIVERGED"));
}
