//! The experiment lifecycle: parameter resolution, build, trial loop,
//! post-processing and run-directory logging.
//!
//! An experiment is configuration plus hooks; build and run are fixed
//! sequences controlled entirely by parameters. Each experiment owns a
//! run directory `<outputDirectory>/<timestamp>-<name>/` holding
//! `parameters.json`, `run.log` and the enabled probe exports.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use lavanet_core::engine::{CoreStepper, SequentialStepper};
use lavanet_core::params::{
    DerivedParameters, LogLevel, ParamError, ParamValue, ParameterSet, Violation,
};
use lavanet_core::probes::{ProbeError, ProbeStore, SpikeRaster};
use lavanet_core::sim::{build_simulation, BuildError, Simulation};
use lavanet_core::sparse::SparseMatrix;
use lavanet_core::stimulus::InputPlan;
use thiserror::Error;

use crate::formats::{self, FormatError};
use crate::plot;
use crate::runner::ThreadedStepper;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Override(#[from] ParamError),
    #[error("parameter validation failed:{}", format_violations(.0))]
    Validation(Vec<Violation>),
    #[error("build failed: {0}")]
    Build(#[from] BuildError),
    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("hook registered too late: {0} has already fired")]
    HookTooLate(&'static str),
    #[error("experiment is not built yet")]
    NotBuilt,
    #[error("experiment was already built")]
    AlreadyBuilt,
    #[error("experiment already ran")]
    AlreadyRan,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("\n  {v}"))
        .collect::<String>()
}

impl ExperimentError {
    fn probe(err: ProbeError) -> Self {
        ExperimentError::Phase {
            phase: "post-process",
            source: Box::new(err),
        }
    }

    /// Whether this is a configuration problem (CLI exit code 1) rather
    /// than a runtime failure (exit code 2).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            ExperimentError::Override(_) | ExperimentError::Validation(_)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Phase {
    Created,
    Built,
    Ran,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HookPhase {
    OnInit,
    AfterBuild,
    AfterRun,
}

pub type Hook = Box<dyn FnMut(&Experiment)>;

/// One log line: timestamp, level, phase tag, message.
#[derive(Clone, Debug)]
pub struct LogEntry {
    pub timestamp: String,
    pub level: LogLevel,
    pub phase: String,
    pub message: String,
}

/// Write-through run log: entries land in `run.log` as they happen, so an
/// aborted run still shows its failing phase.
#[derive(Debug)]
pub struct RunLog {
    path: PathBuf,
    level: LogLevel,
    entries: Vec<LogEntry>,
}

impl RunLog {
    fn new(path: PathBuf, level: LogLevel) -> Self {
        RunLog {
            path,
            level,
            entries: Vec::new(),
        }
    }

    fn log(&mut self, level: LogLevel, phase: &str, message: impl Into<String>) {
        let entry = LogEntry {
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            level,
            phase: phase.to_string(),
            message: message.into(),
        };
        if level >= self.level {
            let line = format!(
                "{} {:7} [{}] {}\n",
                entry.timestamp,
                entry.level.as_str(),
                entry.phase,
                entry.message
            );
            let _ = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(&self.path)
                .and_then(|mut f| std::io::Write::write_all(&mut f, line.as_bytes()));
        }
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }
}

/// Post-processed datasets of a finished run.
#[derive(Clone, Debug)]
pub struct RunResults {
    /// Reservoir spike raster, `reservoirSize x totalSteps`.
    pub raster: SpikeRaster,
    /// Output-layer raster when pooling was enabled.
    pub out_raster: Option<SpikeRaster>,
    /// Delivered input-generator spikes over the excitatory pool.
    pub input_raster: SpikeRaster,
    /// Merged weight matrix after each trial (when probed).
    pub weight_snapshots: Vec<SparseMatrix>,
    /// Voltage traces `[neuron * totalSteps + step]` (when probed).
    pub voltages: Option<Vec<f64>>,
    pub runtime_seconds: f64,
}

/// Builder for [`Experiment`]; `create` resolves parameters, makes the
/// run directory and fires the `onInit` hooks.
pub struct ExperimentBuilder {
    name: String,
    overrides: Vec<(String, ParamValue)>,
    threads: usize,
    initial_weights: Option<SparseMatrix>,
    output_dir: Option<PathBuf>,
    on_init: Vec<Hook>,
}

impl ExperimentBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        ExperimentBuilder {
            name: name.into(),
            overrides: Vec::new(),
            threads: 1,
            initial_weights: None,
            output_dir: None,
            on_init: Vec::new(),
        }
    }

    pub fn override_value(mut self, key: impl Into<String>, value: ParamValue) -> Self {
        self.overrides.push((key.into(), value));
        self
    }

    pub fn overrides(mut self, pairs: Vec<(String, ParamValue)>) -> Self {
        self.overrides.extend(pairs);
        self
    }

    pub fn seed(self, seed: u64) -> Self {
        self.override_value("seed", ParamValue::UInt(seed))
    }

    /// Host worker threads for core stepping; never changes results.
    pub fn threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    /// Use a previously exported weight snapshot as the initial matrix
    /// instead of the configured initializer.
    pub fn initial_weights(mut self, matrix: SparseMatrix) -> Self {
        self.initial_weights = Some(matrix);
        self
    }

    /// Place the run directory under this path instead of the
    /// `outputDirectory` parameter.
    pub fn output_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.output_dir = Some(dir.into());
        self
    }

    /// Register an `onInit` hook; it fires at the end of `create`.
    pub fn on_init(mut self, hook: Hook) -> Self {
        self.on_init.push(hook);
        self
    }

    pub fn create(self) -> Result<Experiment, ExperimentError> {
        let params = ParameterSet::defaults().merge(&self.overrides)?;
        let violations = params.validate();
        if !violations.is_empty() {
            return Err(ExperimentError::Validation(violations));
        }
        let derived = params.derive().expect("validated above");

        let base = self
            .output_dir
            .unwrap_or_else(|| PathBuf::from(&params.output_directory));
        fs::create_dir_all(&base)?;
        let stamp = Utc::now().format("%Y%m%d-%H%M%S%3f");
        let mut run_dir = base.join(format!("{stamp}-{}", self.name));
        let mut suffix = 1u32;
        loop {
            match fs::create_dir(&run_dir) {
                Ok(()) => break,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists && suffix < 1000 => {
                    suffix += 1;
                    run_dir = base.join(format!("{stamp}-{}-{suffix}", self.name));
                }
                Err(e) => return Err(e.into()),
            }
        }

        let mut log = RunLog::new(run_dir.join("run.log"), params.log_level);
        log.log(LogLevel::Info, "init", format!("experiment `{}`", self.name));
        log.log(
            LogLevel::Info,
            "init",
            format!(
                "seed {}, {} trials x {} steps, reservoir {}+{}",
                params.seed,
                params.trials,
                params.steps_per_trial,
                params.reservoir_ex_size,
                params.reservoir_in_size
            ),
        );
        formats::write_parameters_json(&run_dir.join("parameters.json"), &params, &derived)?;
        log.log(LogLevel::Debug, "init", "parameters.json written");

        let mut experiment = Experiment {
            name: self.name,
            params,
            derived,
            run_dir,
            log,
            phase: Phase::Created,
            threads: self.threads,
            initial_weights: self.initial_weights,
            sim: None,
            results: None,
            hooks_after_build: Vec::new(),
            hooks_after_run: Vec::new(),
        };
        let mut hooks = self.on_init;
        for hook in &mut hooks {
            hook(&experiment);
        }
        experiment
            .log
            .log(LogLevel::Debug, "init", "onInit hooks fired");
        Ok(experiment)
    }
}

pub struct Experiment {
    name: String,
    params: ParameterSet,
    derived: DerivedParameters,
    run_dir: PathBuf,
    log: RunLog,
    phase: Phase,
    threads: usize,
    initial_weights: Option<SparseMatrix>,
    sim: Option<Simulation>,
    results: Option<RunResults>,
    hooks_after_build: Vec<Hook>,
    hooks_after_run: Vec<Hook>,
}

impl std::fmt::Debug for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Experiment")
            .field("name", &self.name)
            .field("phase", &self.phase)
            .field("run_dir", &self.run_dir)
            .finish_non_exhaustive()
    }
}

impl Experiment {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn derived(&self) -> &DerivedParameters {
        &self.derived
    }

    pub fn run_dir(&self) -> &Path {
        &self.run_dir
    }

    pub fn results(&self) -> Option<&RunResults> {
        self.results.as_ref()
    }

    pub fn input_plan(&self) -> Option<&InputPlan> {
        self.sim.as_ref().map(|s| &s.input_plan)
    }

    /// The current assembled weight matrix (after build: the step-0
    /// weights; after run: the final weights).
    pub fn current_weights(&self) -> Option<SparseMatrix> {
        self.sim.as_ref().map(Simulation::weights_snapshot)
    }

    pub fn log_entries(&self) -> &[LogEntry] {
        self.log.entries()
    }

    /// Register a hook; fails with `HookTooLate` once the phase has fired
    /// (`onInit` fires during create, so it can only be registered on the
    /// builder).
    pub fn register_hook(&mut self, phase: HookPhase, hook: Hook) -> Result<(), ExperimentError> {
        match phase {
            HookPhase::OnInit => Err(ExperimentError::HookTooLate("onInit")),
            HookPhase::AfterBuild => {
                if self.phase >= Phase::Built {
                    Err(ExperimentError::HookTooLate("afterBuild"))
                } else {
                    self.hooks_after_build.push(hook);
                    Ok(())
                }
            }
            HookPhase::AfterRun => {
                if self.phase >= Phase::Ran {
                    Err(ExperimentError::HookTooLate("afterRun"))
                } else {
                    self.hooks_after_run.push(hook);
                    Ok(())
                }
            }
        }
    }

    /// Build the network: weights, layout, chunks, inputs, noise, output,
    /// probes and the learning rule.
    pub fn build(&mut self) -> Result<(), ExperimentError> {
        match self.phase {
            Phase::Created => {}
            Phase::Built => return Err(ExperimentError::AlreadyBuilt),
            Phase::Ran => return Err(ExperimentError::AlreadyRan),
        }
        let sim = match build_simulation(&self.params, self.initial_weights.take()) {
            Ok(sim) => sim,
            Err(e) => {
                self.log.log(LogLevel::Error, "build", e.to_string());
                return Err(e.into());
            }
        };
        let snapshot = sim.weights_snapshot();
        self.log.log(
            LogLevel::Info,
            "build",
            format!(
                "weights initialized: {}x{}, nnz {}, init {}",
                snapshot.rows(),
                snapshot.cols(),
                snapshot.nnz(),
                self.params.weight_init.as_str()
            ),
        );
        self.log.log(
            LogLevel::Info,
            "build",
            format!(
                "layout: {} cores, {} chunks, per-core sizes {:?}",
                sim.core_count(),
                self.derived.chunk_count,
                sim.network
                    .layout()
                    .ranges()
                    .iter()
                    .map(|r| r.1 - r.0)
                    .collect::<Vec<_>>()
            ),
        );
        self.log.log(
            LogLevel::Info,
            "build",
            format!(
                "inputs: mode {:?}, {} generators; noise targets {}",
                sim.input_plan.mode,
                sim.network.generators().len(),
                self.params.noise_neurons
            ),
        );
        self.log.log(
            LogLevel::Info,
            "build",
            match &sim.readout {
                Some(r) => format!("output: pooling layer with {} neurons", r.output_size()),
                None => "output: none".to_string(),
            },
        );
        self.log.log(
            LogLevel::Info,
            "build",
            format!(
                "probes: ex={} in={} out={} weights={} voltage={}",
                self.params.is_ex_spike_probe,
                self.params.is_in_spike_probe,
                self.params.is_out_spike_probe,
                self.params.is_weight_probe,
                self.params.is_voltage_probe
            ),
        );
        self.log.log(
            LogLevel::Info,
            "build",
            match &sim.plasticity {
                Some(p) => format!(
                    "learning rule active, {} terms, epoch {}, weight cap {}",
                    p.ast.terms.len(),
                    p.config.epoch_length,
                    p.config.weight_max
                ),
                None => "learning rule disabled".to_string(),
            },
        );
        self.sim = Some(sim);
        self.phase = Phase::Built;
        self.fire_after_build();
        self.log.log(LogLevel::Info, "build", "build complete");
        Ok(())
    }

    /// Run all trials, post-process the probes and write the artifacts.
    pub fn run(&mut self) -> Result<(), ExperimentError> {
        match self.phase {
            Phase::Built => {}
            Phase::Created => return Err(ExperimentError::NotBuilt),
            Phase::Ran => return Err(ExperimentError::AlreadyRan),
        }
        let started = Instant::now();
        let sequential = SequentialStepper;
        let threaded = ThreadedStepper::new(self.threads);
        let stepper: &dyn CoreStepper = if self.threads > 1 {
            &threaded
        } else {
            &sequential
        };
        let sim = self.sim.as_mut().expect("phase is Built");
        let mut store = ProbeStore::new(sim.core_count());
        for trial in 0..self.params.trials {
            for _ in 0..self.params.steps_per_trial {
                let step = sim.step(stepper);
                for (core, fired) in step.per_core.iter().enumerate() {
                    store.record_step(core, fired, step.step);
                }
                store.record_out_spikes(&step.out_spikes, step.step);
                store.record_input_events(&step.input_events, step.step);
                if self.params.is_voltage_probe {
                    store.record_voltages(sim.network.voltages());
                }
            }
            sim.end_trial();
            if self.params.is_weight_probe {
                store.push_weight_snapshot(sim.weights_snapshot());
            }
            if self.params.reset_between_trials {
                sim.reset_trial(true);
            }
            self.log
                .log(LogLevel::Info, "run", format!("trial {trial} complete"));
        }

        let stacked = store
            .post_process(
                sim.network.layout(),
                self.derived.total_steps,
                self.params.reservoir_ex_size,
                sim.readout.as_ref().map(|r| r.output_size()),
            )
            .map_err(ExperimentError::probe)?;
        self.log.log(
            LogLevel::Info,
            "run",
            format!(
                "post-processed: {} reservoir spikes over {} steps",
                stacked.raster.count(),
                stacked.raster.steps
            ),
        );

        let (ex_spikes, in_spikes) =
            formats::split_raster_by_pool(&stacked.raster, self.params.reservoir_ex_size);
        if self.params.is_ex_spike_probe {
            fs::write(
                self.run_dir.join("spikes_ex.csv"),
                formats::format_spike_lines(&ex_spikes),
            )?;
        }
        if self.params.is_in_spike_probe {
            fs::write(
                self.run_dir.join("spikes_in.csv"),
                formats::format_spike_lines(&in_spikes),
            )?;
        }
        if self.params.is_out_spike_probe {
            if let Some(out_raster) = &stacked.out_raster {
                fs::write(
                    self.run_dir.join("spikes_out.csv"),
                    formats::format_spike_lines(&out_raster.spikes),
                )?;
            }
        }
        if self.params.is_weight_probe {
            for (k, snapshot) in stacked.weights.iter().enumerate() {
                formats::write_csr_file(
                    &self.run_dir.join(format!("weights_trial_{k}.csr")),
                    snapshot,
                )?;
            }
        }

        self.results = Some(RunResults {
            raster: stacked.raster,
            out_raster: stacked.out_raster,
            input_raster: stacked.input_raster,
            weight_snapshots: stacked.weights,
            voltages: stacked.voltages,
            runtime_seconds: started.elapsed().as_secs_f64(),
        });
        self.phase = Phase::Ran;
        self.fire_after_run();
        self.log.log(LogLevel::Info, "run", "run complete");
        Ok(())
    }

    /// Render the raster SVG into the run directory.
    pub fn write_raster_svg(&mut self) -> Result<PathBuf, ExperimentError> {
        let results = self.results.as_ref().ok_or(ExperimentError::NotBuilt)?;
        let path = self.run_dir.join("raster.svg");
        let svg = plot::render_run_raster(&self.params, &self.derived, results);
        fs::write(&path, svg)?;
        self.log.log(LogLevel::Info, "plot", "raster.svg written");
        Ok(path)
    }

    fn fire_after_build(&mut self) {
        let mut hooks = std::mem::take(&mut self.hooks_after_build);
        for hook in &mut hooks {
            hook(self);
        }
        self.hooks_after_build = hooks;
    }

    fn fire_after_run(&mut self) {
        let mut hooks = std::mem::take(&mut self.hooks_after_run);
        for hook in &mut hooks {
            hook(self);
        }
        self.hooks_after_run = hooks;
    }
}
