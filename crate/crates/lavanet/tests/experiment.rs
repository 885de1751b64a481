//! Experiment lifecycle: creation, hooks, phase ordering, run-directory
//! artifacts.

use std::cell::RefCell;
use std::rc::Rc;

use lavanet::core::params::ParamValue;
use lavanet::experiment::HookPhase;
use lavanet::{ExperimentBuilder, ExperimentError};
use tempfile::TempDir;

fn small_overrides() -> Vec<(String, ParamValue)> {
    vec![
        ("trials".into(), ParamValue::UInt(2)),
        ("stepsPerTrial".into(), ParamValue::UInt(30)),
        ("reservoirExSize".into(), ParamValue::UInt(40)),
        ("reservoirInSize".into(), ParamValue::UInt(10)),
        ("reservoirConnPerNeuron".into(), ParamValue::UInt(8)),
        ("neuronsPerCore".into(), ParamValue::UInt(16)),
        ("inputNumTargetNeurons".into(), ParamValue::UInt(8)),
        ("inputSteps".into(), ParamValue::UInt(10)),
    ]
}

fn builder(dir: &TempDir) -> ExperimentBuilder {
    ExperimentBuilder::new("test")
        .overrides(small_overrides())
        .output_dir(dir.path())
}

#[test]
fn create_resolves_overrides_and_writes_parameters() {
    let dir = TempDir::new().unwrap();
    let exp = ExperimentBuilder::new("random-network-sequence-learning")
        .overrides(small_overrides())
        .seed(2)
        .output_dir(dir.path())
        .create()
        .unwrap();
    assert_eq!(exp.params().seed, 2);
    assert_eq!(exp.params().trials, 2);
    // Untouched keys keep their defaults.
    assert_eq!(exp.params().input_gen_spike_prob, 0.8);
    assert!(exp.run_dir().join("parameters.json").is_file());
    assert!(exp.run_dir().join("run.log").is_file());
    assert!(exp
        .run_dir()
        .file_name()
        .unwrap()
        .to_string_lossy()
        .ends_with("-random-network-sequence-learning"));
}

#[test]
fn empty_overrides_give_pure_defaults() {
    let dir = TempDir::new().unwrap();
    let exp = ExperimentBuilder::new("defaults")
        .output_dir(dir.path())
        .create()
        .unwrap();
    assert_eq!(exp.params(), &lavanet::core::params::ParameterSet::defaults());
}

#[test]
fn invalid_overrides_abort_with_every_violation() {
    let dir = TempDir::new().unwrap();
    let err = ExperimentBuilder::new("bad")
        .override_value("inputGenSpikeProb", ParamValue::Float(1.5))
        .override_value("trials", ParamValue::UInt(0))
        .output_dir(dir.path())
        .create()
        .unwrap_err();
    match err {
        ExperimentError::Validation(violations) => {
            assert!(violations.len() >= 2);
        }
        other => panic!("expected a validation error, got {other}"),
    }
}

#[test]
fn unknown_override_keys_are_hard_errors() {
    let dir = TempDir::new().unwrap();
    let err = ExperimentBuilder::new("typo")
        .override_value("bogusKey", ParamValue::UInt(1))
        .output_dir(dir.path())
        .create()
        .unwrap_err();
    assert!(matches!(err, ExperimentError::Override(_)));
    assert!(err.to_string().contains("bogusKey"));
}

#[test]
fn hooks_fire_in_order_at_their_phases() {
    let dir = TempDir::new().unwrap();
    let trace: Rc<RefCell<Vec<String>>> = Rc::new(RefCell::new(Vec::new()));
    let t = trace.clone();
    let mut exp = builder(&dir)
        .on_init(Box::new(move |e| {
            t.borrow_mut().push(format!("init:{}", e.name()));
        }))
        .create()
        .unwrap();
    let t = trace.clone();
    exp.register_hook(
        HookPhase::AfterBuild,
        Box::new(move |e| {
            t.borrow_mut()
                .push(format!("build:{}", e.current_weights().unwrap().nnz()));
        }),
    )
    .unwrap();
    let t = trace.clone();
    exp.register_hook(
        HookPhase::AfterBuild,
        Box::new(move |_| t.borrow_mut().push("build:second".into())),
    )
    .unwrap();
    let t = trace.clone();
    exp.register_hook(
        HookPhase::AfterRun,
        Box::new(move |e| {
            // afterRun sees the post-processed raster.
            let results = e.results().expect("results available in afterRun");
            t.borrow_mut().push(format!("run:{}", results.raster.steps));
        }),
    )
    .unwrap();

    exp.build().unwrap();
    exp.run().unwrap();

    let log = trace.borrow();
    assert_eq!(log.len(), 4);
    assert_eq!(log[0], "init:test");
    assert!(log[1].starts_with("build:"));
    assert_eq!(log[2], "build:second");
    assert_eq!(log[3], "run:60");
}

#[test]
fn late_hook_registration_is_rejected() {
    let dir = TempDir::new().unwrap();
    let mut exp = builder(&dir).create().unwrap();
    // onInit fired during create.
    assert!(matches!(
        exp.register_hook(HookPhase::OnInit, Box::new(|_| {})),
        Err(ExperimentError::HookTooLate("onInit"))
    ));
    exp.build().unwrap();
    assert!(matches!(
        exp.register_hook(HookPhase::AfterBuild, Box::new(|_| {})),
        Err(ExperimentError::HookTooLate("afterBuild"))
    ));
    exp.run().unwrap();
    assert!(matches!(
        exp.register_hook(HookPhase::AfterRun, Box::new(|_| {})),
        Err(ExperimentError::HookTooLate("afterRun"))
    ));
}

#[test]
fn phases_cannot_be_skipped_or_repeated() {
    let dir = TempDir::new().unwrap();
    let mut exp = builder(&dir).create().unwrap();
    assert!(matches!(exp.run(), Err(ExperimentError::NotBuilt)));
    exp.build().unwrap();
    assert!(matches!(exp.build(), Err(ExperimentError::AlreadyBuilt)));
    exp.run().unwrap();
    assert!(matches!(exp.run(), Err(ExperimentError::AlreadyRan)));
}

#[test]
fn run_directory_contains_all_enabled_exports() {
    let dir = TempDir::new().unwrap();
    let mut exp = builder(&dir).create().unwrap();
    exp.build().unwrap();
    exp.run().unwrap();
    let run_dir = exp.run_dir();
    for file in ["parameters.json", "run.log", "spikes_ex.csv", "spikes_in.csv"] {
        assert!(run_dir.join(file).is_file(), "{file} missing");
    }
    for trial in 0..2 {
        assert!(run_dir.join(format!("weights_trial_{trial}.csr")).is_file());
    }
    // Output probe disabled by default.
    assert!(!run_dir.join("spikes_out.csv").exists());
    let log = std::fs::read_to_string(run_dir.join("run.log")).unwrap();
    assert!(log.contains("[init]"));
    assert!(log.contains("build complete"));
    assert!(log.contains("trial 0 complete"));
    assert!(log.contains("run complete"));
}

#[test]
fn disabled_probes_skip_their_exports() {
    let dir = TempDir::new().unwrap();
    let mut exp = builder(&dir)
        .override_value("isExSpikeProbe", ParamValue::Bool(false))
        .override_value("isWeightProbe", ParamValue::Bool(false))
        .create()
        .unwrap();
    exp.build().unwrap();
    exp.run().unwrap();
    assert!(!exp.run_dir().join("spikes_ex.csv").exists());
    assert!(exp.run_dir().join("spikes_in.csv").is_file());
    assert!(!exp.run_dir().join("weights_trial_0.csr").exists());
    assert!(exp.results().unwrap().weight_snapshots.is_empty());
}

#[test]
fn no_input_and_zero_weights_give_an_empty_raster() {
    let dir = TempDir::new().unwrap();
    let mut exp = builder(&dir)
        .override_value("trials", ParamValue::UInt(1))
        .override_value("weightInit", ParamValue::Str("constant".into()))
        .override_value("weightExMean", ParamValue::Float(0.0))
        .override_value("weightInMean", ParamValue::Float(0.0))
        .override_value("inputIsSequence", ParamValue::Bool(false))
        .override_value("isLearningRule", ParamValue::Bool(false))
        .create()
        .unwrap();
    exp.build().unwrap();
    exp.run().unwrap();
    let results = exp.results().unwrap();
    assert_eq!(results.raster.count(), 0);
    assert_eq!(results.raster.steps, 30);
    assert_eq!(
        std::fs::read_to_string(exp.run_dir().join("spikes_ex.csv")).unwrap(),
        ""
    );
}

#[test]
fn snapshots_without_learning_all_equal_the_initial_matrix() {
    let dir = TempDir::new().unwrap();
    let mut exp = builder(&dir)
        .override_value("isLearningRule", ParamValue::Bool(false))
        .create()
        .unwrap();
    exp.build().unwrap();
    let initial = exp.current_weights().unwrap();
    exp.run().unwrap();
    let snapshots = &exp.results().unwrap().weight_snapshots;
    assert_eq!(snapshots.len(), 2);
    for snapshot in snapshots {
        assert_eq!(snapshot, &initial);
    }
}

#[test]
fn aborted_build_leaves_the_failing_phase_in_the_log() {
    let dir = TempDir::new().unwrap();
    let mut exp = builder(&dir)
        .override_value("learningRule", ParamValue::Str("2^*x1".into()))
        .create()
        .unwrap();
    let err = exp.build().unwrap_err();
    assert!(err.to_string().contains("position 2"));
    let log = std::fs::read_to_string(exp.run_dir().join("run.log")).unwrap();
    assert!(log.contains("[build]"));
    assert!(log.contains("parse error"));
    assert!(!log.contains("build complete"));
}

#[test]
fn voltage_probe_records_full_traces() {
    let dir = TempDir::new().unwrap();
    let mut exp = builder(&dir)
        .override_value("isVoltageProbe", ParamValue::Bool(true))
        .create()
        .unwrap();
    exp.build().unwrap();
    exp.run().unwrap();
    let results = exp.results().unwrap();
    let voltages = results.voltages.as_ref().expect("voltage traces recorded");
    assert_eq!(voltages.len(), 50 * 60);
    assert!(voltages.iter().any(|&v| v != 0.0));
}

#[test]
fn pooling_output_produces_out_raster_and_export() {
    let dir = TempDir::new().unwrap();
    let mut exp = builder(&dir)
        .override_value("outputIsPooling", ParamValue::Bool(true))
        .override_value("outputSize", ParamValue::UInt(4))
        .override_value("outputWeight", ParamValue::Float(400.0))
        .override_value("isOutSpikeProbe", ParamValue::Bool(true))
        .create()
        .unwrap();
    exp.build().unwrap();
    exp.run().unwrap();
    let results = exp.results().unwrap();
    let out_raster = results.out_raster.as_ref().expect("output raster present");
    assert_eq!(out_raster.neurons, 4);
    assert!(exp.run_dir().join("spikes_out.csv").is_file());
    assert!(out_raster.count() > 0, "outputs should fire with this drive");
}

#[test]
fn raster_svg_is_written_on_request() {
    let dir = TempDir::new().unwrap();
    let mut exp = builder(&dir).create().unwrap();
    exp.build().unwrap();
    exp.run().unwrap();
    let path = exp.write_raster_svg().unwrap();
    let svg = std::fs::read_to_string(path).unwrap();
    assert_eq!(
        svg.matches("<circle").count(),
        exp.results().unwrap().raster.count()
    );
}
