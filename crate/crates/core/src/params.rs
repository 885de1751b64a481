//! The layered parameter system.
//!
//! [`ParameterSet::defaults`] is the complete default experiment;
//! overrides are applied by key, derived parameters are computed from the
//! result, and [`ParameterSet::validate`] returns every violation instead
//! of stopping at the first one. Every knob consumed anywhere in the
//! crate appears here; there are no hidden parameters.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use thiserror::Error;

/// Placement/magnitude scheme for the initial reservoir weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightInit {
    Constant,
    Normal,
    LogNormal,
    Anisotropic2d,
}

impl WeightInit {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightInit::Constant => "constant",
            WeightInit::Normal => "normal",
            WeightInit::LogNormal => "lognormal",
            WeightInit::Anisotropic2d => "anisotropic2d",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "constant" => Some(WeightInit::Constant),
            "normal" => Some(WeightInit::Normal),
            "lognormal" => Some(WeightInit::LogNormal),
            "anisotropic2d" => Some(WeightInit::Anisotropic2d),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum LogLevel {
    Debug,
    Info,
    Warning,
    Error,
}

impl LogLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            LogLevel::Debug => "debug",
            LogLevel::Info => "info",
            LogLevel::Warning => "warning",
            LogLevel::Error => "error",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "debug" => Some(LogLevel::Debug),
            "info" => Some(LogLevel::Info),
            "warning" => Some(LogLevel::Warning),
            "error" => Some(LogLevel::Error),
            _ => None,
        }
    }
}

/// A dynamically typed parameter value, used for overrides and dumps.
#[derive(Clone, Debug, PartialEq)]
pub enum ParamValue {
    Bool(bool),
    UInt(u64),
    Float(f64),
    Str(String),
    Pair(u64, u64),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(v) => write!(f, "{v}"),
            ParamValue::UInt(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Str(v) => write!(f, "{v}"),
            ParamValue::Pair(a, b) => write!(f, "[{a}, {b}]"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("invalid value for `{key}`: expected {expected}")]
    InvalidValue { key: String, expected: &'static str },
}

/// A single validation failure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub key: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

/// All validation failures of a parameter set.
#[derive(Debug, Error, PartialEq, Eq)]
pub struct ValidationError(pub Vec<Violation>);

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} parameter violation(s):", self.0.len())?;
        for v in &self.0 {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

/// The complete experiment + system parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSet {
    // Experiment
    pub seed: u64,
    pub trials: usize,
    pub steps_per_trial: usize,
    // Neurons
    pub refractory_delay: usize,
    pub voltage_tau: f64,
    pub current_tau: f64,
    pub threshold_mant: f64,
    // Network
    pub reservoir_ex_size: usize,
    pub reservoir_in_size: usize,
    pub reservoir_conn_per_neuron: usize,
    pub neurons_per_core: usize,
    pub weight_init: WeightInit,
    pub weight_ex_mean: f64,
    pub weight_in_mean: f64,
    pub weight_sigma: f64,
    pub weight_max: f64,
    pub grid_width: usize,
    pub grid_height: usize,
    pub aniso_shift_magnitude: f64,
    pub aniso_profile_sigma: f64,
    // Plasticity
    pub is_learning_rule: bool,
    pub learning_rule: String,
    pub trace_tau_pre: f64,
    pub trace_tau_post: f64,
    pub trace_impulse: f64,
    pub learning_epoch: usize,
    // Input
    pub input_is_sequence: bool,
    pub input_sequence_size: usize,
    pub input_steps: usize,
    pub input_gen_spike_prob: f64,
    pub input_num_target_neurons: usize,
    pub input_is_topological: bool,
    pub input_square_side: usize,
    pub input_square_x: usize,
    pub input_square_y: usize,
    pub input_is_leave_n_out: bool,
    pub input_leave_out_count: usize,
    pub input_is_alternating: bool,
    pub input_region_count: usize,
    pub input_weight: f64,
    // Noise
    pub noise_neurons: usize,
    pub noise_spike_prob: f64,
    pub noise_weight: f64,
    // Output
    pub output_is_pooling: bool,
    pub output_size: usize,
    pub output_weight: f64,
    // Probes
    pub is_ex_spike_probe: bool,
    pub is_in_spike_probe: bool,
    pub is_out_spike_probe: bool,
    pub is_weight_probe: bool,
    pub is_voltage_probe: bool,
    // Trials
    pub reset_between_trials: bool,
    // System
    pub output_directory: String,
    pub log_level: LogLevel,
    pub plot_dimensions: (usize, usize),
}

/// Parameters computed from an experiment parameter set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerivedParameters {
    pub reservoir_size: usize,
    pub total_steps: usize,
    pub core_count: usize,
    pub chunk_count: usize,
    /// Stride of the within-trial input schedule.
    pub steps_per_input: usize,
    /// Half-open step windows within a trial during which input is active.
    pub input_windows: Vec<(usize, usize)>,
}

/// Every known parameter key, in documentation order. JSON documents use
/// exactly these names.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "trials",
    "stepsPerTrial",
    "refractoryDelay",
    "voltageTau",
    "currentTau",
    "thresholdMant",
    "reservoirExSize",
    "reservoirInSize",
    "reservoirConnPerNeuron",
    "neuronsPerCore",
    "weightInit",
    "weightExMean",
    "weightInMean",
    "weightSigma",
    "weightMax",
    "gridWidth",
    "gridHeight",
    "anisoShiftMagnitude",
    "anisoProfileSigma",
    "isLearningRule",
    "learningRule",
    "traceTauPre",
    "traceTauPost",
    "traceImpulse",
    "learningEpoch",
    "inputIsSequence",
    "inputSequenceSize",
    "inputSteps",
    "inputGenSpikeProb",
    "inputNumTargetNeurons",
    "inputIsTopological",
    "inputSquareSide",
    "inputSquareX",
    "inputSquareY",
    "inputIsLeaveNOut",
    "inputLeaveOutCount",
    "inputIsAlternating",
    "inputRegionCount",
    "inputWeight",
    "noiseNeurons",
    "noiseSpikeProb",
    "noiseWeight",
    "outputIsPooling",
    "outputSize",
    "outputWeight",
    "isExSpikeProbe",
    "isInSpikeProbe",
    "isOutSpikeProbe",
    "isWeightProbe",
    "isVoltageProbe",
    "resetBetweenTrials",
    "outputDirectory",
    "logLevel",
    "plotDimensions",
];

impl ParameterSet {
    /// The default experiment: a sequence-learning run on a 400/100
    /// reservoir. Noise and output-layer defaults are conventions; the
    /// inhibitory pool defaults to a quarter of the excitatory pool.
    pub fn defaults() -> Self {
        ParameterSet {
            seed: 1,
            trials: 10,
            steps_per_trial: 60,
            refractory_delay: 2,
            voltage_tau: 100.0,
            current_tau: 5.0,
            threshold_mant: 1200.0,
            reservoir_ex_size: 400,
            reservoir_in_size: 100,
            reservoir_conn_per_neuron: 35,
            neurons_per_core: 128,
            weight_init: WeightInit::LogNormal,
            weight_ex_mean: 24.0,
            weight_in_mean: 96.0,
            weight_sigma: 1.0,
            // 0 means "derive from the initial matrix" (twice the mean
            // excitatory-to-excitatory weight).
            weight_max: 0.0,
            grid_width: 20,
            grid_height: 20,
            aniso_shift_magnitude: 1.0,
            aniso_profile_sigma: 2.0,
            is_learning_rule: true,
            learning_rule: String::from("2^-2*x1*y0 - 2^-2*y1*x0 + 2^-4*x1*y1*y0 - 2^-3*y0*w*w"),
            trace_tau_pre: 20.0,
            trace_tau_post: 20.0,
            trace_impulse: 1.0,
            learning_epoch: 1,
            input_is_sequence: true,
            input_sequence_size: 3,
            input_steps: 20,
            input_gen_spike_prob: 0.8,
            input_num_target_neurons: 40,
            input_is_topological: false,
            input_square_side: 5,
            input_square_x: 0,
            input_square_y: 0,
            input_is_leave_n_out: false,
            input_leave_out_count: 5,
            input_is_alternating: false,
            input_region_count: 2,
            // A lone generator spike of this weight crosses the default
            // threshold within three steps: after injecting I once,
            // v(3) = (0.99*0.99 + 0.99*0.8 + 0.64)*I = 2.4121*I, and
            // 2.4121 * 500 > 1200.
            input_weight: 500.0,
            noise_neurons: 0,
            noise_spike_prob: 0.05,
            noise_weight: 50.0,
            output_is_pooling: false,
            output_size: 10,
            output_weight: 100.0,
            is_ex_spike_probe: true,
            is_in_spike_probe: true,
            is_out_spike_probe: false,
            is_weight_probe: true,
            is_voltage_probe: false,
            reset_between_trials: true,
            output_directory: String::from("runs"),
            log_level: LogLevel::Info,
            plot_dimensions: (1200, 600),
        }
    }

    /// Read a parameter by key.
    pub fn get(&self, key: &str) -> Option<ParamValue> {
        use ParamValue as V;
        let v = match key {
            "seed" => V::UInt(self.seed),
            "trials" => V::UInt(self.trials as u64),
            "stepsPerTrial" => V::UInt(self.steps_per_trial as u64),
            "refractoryDelay" => V::UInt(self.refractory_delay as u64),
            "voltageTau" => V::Float(self.voltage_tau),
            "currentTau" => V::Float(self.current_tau),
            "thresholdMant" => V::Float(self.threshold_mant),
            "reservoirExSize" => V::UInt(self.reservoir_ex_size as u64),
            "reservoirInSize" => V::UInt(self.reservoir_in_size as u64),
            "reservoirConnPerNeuron" => V::UInt(self.reservoir_conn_per_neuron as u64),
            "neuronsPerCore" => V::UInt(self.neurons_per_core as u64),
            "weightInit" => V::Str(self.weight_init.as_str().to_string()),
            "weightExMean" => V::Float(self.weight_ex_mean),
            "weightInMean" => V::Float(self.weight_in_mean),
            "weightSigma" => V::Float(self.weight_sigma),
            "weightMax" => V::Float(self.weight_max),
            "gridWidth" => V::UInt(self.grid_width as u64),
            "gridHeight" => V::UInt(self.grid_height as u64),
            "anisoShiftMagnitude" => V::Float(self.aniso_shift_magnitude),
            "anisoProfileSigma" => V::Float(self.aniso_profile_sigma),
            "isLearningRule" => V::Bool(self.is_learning_rule),
            "learningRule" => V::Str(self.learning_rule.clone()),
            "traceTauPre" => V::Float(self.trace_tau_pre),
            "traceTauPost" => V::Float(self.trace_tau_post),
            "traceImpulse" => V::Float(self.trace_impulse),
            "learningEpoch" => V::UInt(self.learning_epoch as u64),
            "inputIsSequence" => V::Bool(self.input_is_sequence),
            "inputSequenceSize" => V::UInt(self.input_sequence_size as u64),
            "inputSteps" => V::UInt(self.input_steps as u64),
            "inputGenSpikeProb" => V::Float(self.input_gen_spike_prob),
            "inputNumTargetNeurons" => V::UInt(self.input_num_target_neurons as u64),
            "inputIsTopological" => V::Bool(self.input_is_topological),
            "inputSquareSide" => V::UInt(self.input_square_side as u64),
            "inputSquareX" => V::UInt(self.input_square_x as u64),
            "inputSquareY" => V::UInt(self.input_square_y as u64),
            "inputIsLeaveNOut" => V::Bool(self.input_is_leave_n_out),
            "inputLeaveOutCount" => V::UInt(self.input_leave_out_count as u64),
            "inputIsAlternating" => V::Bool(self.input_is_alternating),
            "inputRegionCount" => V::UInt(self.input_region_count as u64),
            "inputWeight" => V::Float(self.input_weight),
            "noiseNeurons" => V::UInt(self.noise_neurons as u64),
            "noiseSpikeProb" => V::Float(self.noise_spike_prob),
            "noiseWeight" => V::Float(self.noise_weight),
            "outputIsPooling" => V::Bool(self.output_is_pooling),
            "outputSize" => V::UInt(self.output_size as u64),
            "outputWeight" => V::Float(self.output_weight),
            "isExSpikeProbe" => V::Bool(self.is_ex_spike_probe),
            "isInSpikeProbe" => V::Bool(self.is_in_spike_probe),
            "isOutSpikeProbe" => V::Bool(self.is_out_spike_probe),
            "isWeightProbe" => V::Bool(self.is_weight_probe),
            "isVoltageProbe" => V::Bool(self.is_voltage_probe),
            "resetBetweenTrials" => V::Bool(self.reset_between_trials),
            "outputDirectory" => V::Str(self.output_directory.clone()),
            "logLevel" => V::Str(self.log_level.as_str().to_string()),
            "plotDimensions" => V::Pair(self.plot_dimensions.0 as u64, self.plot_dimensions.1 as u64),
            _ => return None,
        };
        Some(v)
    }

    /// Set a parameter by key, coercing unsigned integers into float
    /// fields but rejecting everything else.
    pub fn set(&mut self, key: &str, value: &ParamValue) -> Result<(), ParamError> {
        fn as_uint(key: &str, v: &ParamValue) -> Result<u64, ParamError> {
            match v {
                ParamValue::UInt(u) => Ok(*u),
                _ => Err(ParamError::InvalidValue {
                    key: key.to_string(),
                    expected: "non-negative integer",
                }),
            }
        }
        fn as_usize(key: &str, v: &ParamValue) -> Result<usize, ParamError> {
            Ok(as_uint(key, v)? as usize)
        }
        fn as_float(key: &str, v: &ParamValue) -> Result<f64, ParamError> {
            match v {
                ParamValue::Float(x) => Ok(*x),
                ParamValue::UInt(u) => Ok(*u as f64),
                _ => Err(ParamError::InvalidValue {
                    key: key.to_string(),
                    expected: "number",
                }),
            }
        }
        fn as_bool(key: &str, v: &ParamValue) -> Result<bool, ParamError> {
            match v {
                ParamValue::Bool(b) => Ok(*b),
                _ => Err(ParamError::InvalidValue {
                    key: key.to_string(),
                    expected: "boolean",
                }),
            }
        }
        fn as_str<'v>(key: &str, v: &'v ParamValue) -> Result<&'v str, ParamError> {
            match v {
                ParamValue::Str(s) => Ok(s),
                _ => Err(ParamError::InvalidValue {
                    key: key.to_string(),
                    expected: "string",
                }),
            }
        }

        match key {
            "seed" => self.seed = as_uint(key, value)?,
            "trials" => self.trials = as_usize(key, value)?,
            "stepsPerTrial" => self.steps_per_trial = as_usize(key, value)?,
            "refractoryDelay" => self.refractory_delay = as_usize(key, value)?,
            "voltageTau" => self.voltage_tau = as_float(key, value)?,
            "currentTau" => self.current_tau = as_float(key, value)?,
            "thresholdMant" => self.threshold_mant = as_float(key, value)?,
            "reservoirExSize" => self.reservoir_ex_size = as_usize(key, value)?,
            "reservoirInSize" => self.reservoir_in_size = as_usize(key, value)?,
            "reservoirConnPerNeuron" => self.reservoir_conn_per_neuron = as_usize(key, value)?,
            "neuronsPerCore" => self.neurons_per_core = as_usize(key, value)?,
            "weightInit" => {
                self.weight_init = WeightInit::parse(as_str(key, value)?).ok_or(
                    ParamError::InvalidValue {
                        key: key.to_string(),
                        expected: "one of constant, normal, lognormal, anisotropic2d",
                    },
                )?
            }
            "weightExMean" => self.weight_ex_mean = as_float(key, value)?,
            "weightInMean" => self.weight_in_mean = as_float(key, value)?,
            "weightSigma" => self.weight_sigma = as_float(key, value)?,
            "weightMax" => self.weight_max = as_float(key, value)?,
            "gridWidth" => self.grid_width = as_usize(key, value)?,
            "gridHeight" => self.grid_height = as_usize(key, value)?,
            "anisoShiftMagnitude" => self.aniso_shift_magnitude = as_float(key, value)?,
            "anisoProfileSigma" => self.aniso_profile_sigma = as_float(key, value)?,
            "isLearningRule" => self.is_learning_rule = as_bool(key, value)?,
            "learningRule" => self.learning_rule = as_str(key, value)?.to_string(),
            "traceTauPre" => self.trace_tau_pre = as_float(key, value)?,
            "traceTauPost" => self.trace_tau_post = as_float(key, value)?,
            "traceImpulse" => self.trace_impulse = as_float(key, value)?,
            "learningEpoch" => self.learning_epoch = as_usize(key, value)?,
            "inputIsSequence" => self.input_is_sequence = as_bool(key, value)?,
            "inputSequenceSize" => self.input_sequence_size = as_usize(key, value)?,
            "inputSteps" => self.input_steps = as_usize(key, value)?,
            "inputGenSpikeProb" => self.input_gen_spike_prob = as_float(key, value)?,
            "inputNumTargetNeurons" => self.input_num_target_neurons = as_usize(key, value)?,
            "inputIsTopological" => self.input_is_topological = as_bool(key, value)?,
            "inputSquareSide" => self.input_square_side = as_usize(key, value)?,
            "inputSquareX" => self.input_square_x = as_usize(key, value)?,
            "inputSquareY" => self.input_square_y = as_usize(key, value)?,
            "inputIsLeaveNOut" => self.input_is_leave_n_out = as_bool(key, value)?,
            "inputLeaveOutCount" => self.input_leave_out_count = as_usize(key, value)?,
            "inputIsAlternating" => self.input_is_alternating = as_bool(key, value)?,
            "inputRegionCount" => self.input_region_count = as_usize(key, value)?,
            "inputWeight" => self.input_weight = as_float(key, value)?,
            "noiseNeurons" => self.noise_neurons = as_usize(key, value)?,
            "noiseSpikeProb" => self.noise_spike_prob = as_float(key, value)?,
            "noiseWeight" => self.noise_weight = as_float(key, value)?,
            "outputIsPooling" => self.output_is_pooling = as_bool(key, value)?,
            "outputSize" => self.output_size = as_usize(key, value)?,
            "outputWeight" => self.output_weight = as_float(key, value)?,
            "isExSpikeProbe" => self.is_ex_spike_probe = as_bool(key, value)?,
            "isInSpikeProbe" => self.is_in_spike_probe = as_bool(key, value)?,
            "isOutSpikeProbe" => self.is_out_spike_probe = as_bool(key, value)?,
            "isWeightProbe" => self.is_weight_probe = as_bool(key, value)?,
            "isVoltageProbe" => self.is_voltage_probe = as_bool(key, value)?,
            "resetBetweenTrials" => self.reset_between_trials = as_bool(key, value)?,
            "outputDirectory" => self.output_directory = as_str(key, value)?.to_string(),
            "logLevel" => {
                self.log_level =
                    LogLevel::parse(as_str(key, value)?).ok_or(ParamError::InvalidValue {
                        key: key.to_string(),
                        expected: "one of debug, info, warning, error",
                    })?
            }
            "plotDimensions" => match value {
                ParamValue::Pair(w, h) => self.plot_dimensions = (*w as usize, *h as usize),
                _ => {
                    return Err(ParamError::InvalidValue {
                        key: key.to_string(),
                        expected: "pair of integers [width, height]",
                    })
                }
            },
            _ => return Err(ParamError::UnknownParameter(key.to_string())),
        }
        Ok(())
    }

    /// Apply overrides on top of this set. Every overridden key takes the
    /// override value; unknown keys are hard errors.
    pub fn merge(&self, overrides: &[(String, ParamValue)]) -> Result<ParameterSet, ParamError> {
        let mut merged = self.clone();
        for (key, value) in overrides {
            merged.set(key, value)?;
        }
        Ok(merged)
    }

    /// Check every invariant, returning the full violation list.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        let mut fail = |key: &'static str, message: String| {
            violations.push(Violation { key, message });
        };

        let probability = |name: &'static str, p: f64, fail: &mut dyn FnMut(&'static str, String)| {
            if !(0.0..=1.0).contains(&p) {
                fail(name, format!("probability out of range (got {p})"));
            }
        };
        probability("inputGenSpikeProb", self.input_gen_spike_prob, &mut fail);
        probability("noiseSpikeProb", self.noise_spike_prob, &mut fail);

        // Decay factors 1 - 1/tau must land in [0, 1); NaN rejected.
        let tau = |name: &'static str, t: f64, fail: &mut dyn FnMut(&'static str, String)| {
            if t.is_nan() || t < 1.0 {
                fail(name, format!("time constant must be >= 1 (got {t})"));
            }
        };
        tau("voltageTau", self.voltage_tau, &mut fail);
        tau("currentTau", self.current_tau, &mut fail);
        tau("traceTauPre", self.trace_tau_pre, &mut fail);
        tau("traceTauPost", self.trace_tau_post, &mut fail);

        if self.trials == 0 {
            fail("trials", "must be at least 1".to_string());
        }
        if self.steps_per_trial == 0 {
            fail("stepsPerTrial", "must be at least 1".to_string());
        }
        if self.threshold_mant.is_nan() || self.threshold_mant <= 0.0 {
            fail(
                "thresholdMant",
                format!("must be positive (got {})", self.threshold_mant),
            );
        }
        if self.trace_impulse.is_nan() || self.trace_impulse <= 0.0 {
            fail(
                "traceImpulse",
                format!("must be positive (got {})", self.trace_impulse),
            );
        }
        if self.learning_epoch == 0 {
            fail("learningEpoch", "must be at least 1".to_string());
        }
        if self.reservoir_ex_size == 0 {
            fail("reservoirExSize", "must be at least 1".to_string());
        }
        if self.reservoir_in_size == 0 {
            fail("reservoirInSize", "must be at least 1".to_string());
        }

        let reservoir_size = self.reservoir_ex_size + self.reservoir_in_size;
        if self.reservoir_conn_per_neuron >= reservoir_size {
            fail(
                "reservoirConnPerNeuron",
                format!(
                    "must be smaller than the reservoir size ({} >= {reservoir_size})",
                    self.reservoir_conn_per_neuron
                ),
            );
        }
        if self.neurons_per_core == 0 || self.neurons_per_core > 1024 {
            fail(
                "neuronsPerCore",
                format!(
                    "must be in 1..=1024, a core time-multiplexes at most 1024 compartments (got {})",
                    self.neurons_per_core
                ),
            );
        }
        if self.input_num_target_neurons > self.reservoir_ex_size {
            fail(
                "inputNumTargetNeurons",
                format!(
                    "cannot exceed the excitatory pool ({} > {})",
                    self.input_num_target_neurons, self.reservoir_ex_size
                ),
            );
        }

        match self.weight_init {
            WeightInit::Normal | WeightInit::LogNormal => {
                if self.weight_sigma.is_nan() || self.weight_sigma <= 0.0 {
                    fail(
                        "weightSigma",
                        format!("must be positive for {} init", self.weight_init.as_str()),
                    );
                }
            }
            WeightInit::Anisotropic2d => {
                if self.grid_width * self.grid_height != self.reservoir_ex_size {
                    fail(
                        "gridWidth",
                        format!(
                            "gridWidth*gridHeight must equal reservoirExSize ({}*{} != {})",
                            self.grid_width, self.grid_height, self.reservoir_ex_size
                        ),
                    );
                }
                if self.aniso_profile_sigma.is_nan() || self.aniso_profile_sigma <= 0.0 {
                    fail(
                        "anisoProfileSigma",
                        "must be positive for anisotropic2d init".to_string(),
                    );
                }
            }
            WeightInit::Constant => {}
        }
        if self.weight_max < 0.0 {
            fail(
                "weightMax",
                format!("must be >= 0, 0 meaning automatic (got {})", self.weight_max),
            );
        }

        let input_modes = [
            self.input_is_sequence,
            self.input_is_topological,
            self.input_is_leave_n_out,
            self.input_is_alternating,
        ];
        if input_modes.iter().filter(|&&m| m).count() > 1 {
            fail(
                "inputIsSequence",
                "at most one input mode may be enabled".to_string(),
            );
        }
        if self.input_is_sequence {
            if self.input_sequence_size == 0 {
                fail("inputSequenceSize", "must be at least 1".to_string());
            }
            if self.input_sequence_size * self.input_steps > self.steps_per_trial {
                fail(
                    "inputSteps",
                    format!(
                        "sequence does not fit in a trial ({}*{} > {})",
                        self.input_sequence_size, self.input_steps, self.steps_per_trial
                    ),
                );
            }
        }
        if self.input_is_topological {
            if self.grid_width * self.grid_height != self.reservoir_ex_size {
                fail(
                    "gridWidth",
                    format!(
                        "topological input needs gridWidth*gridHeight == reservoirExSize ({}*{} != {})",
                        self.grid_width, self.grid_height, self.reservoir_ex_size
                    ),
                );
            }
            if self.input_square_x + self.input_square_side > self.grid_width
                || self.input_square_y + self.input_square_side > self.grid_height
            {
                fail(
                    "inputSquareSide",
                    "stimulated square does not fit in the grid".to_string(),
                );
            }
        }
        if self.input_is_leave_n_out && self.input_leave_out_count >= self.input_num_target_neurons
        {
            fail(
                "inputLeaveOutCount",
                format!(
                    "must be smaller than inputNumTargetNeurons ({} >= {})",
                    self.input_leave_out_count, self.input_num_target_neurons
                ),
            );
        }
        if self.input_is_alternating {
            if self.input_region_count < 2 {
                fail("inputRegionCount", "needs at least 2 regions".to_string());
            }
            if self.input_region_count * self.input_num_target_neurons > self.reservoir_ex_size {
                fail(
                    "inputRegionCount",
                    format!(
                        "regions do not fit in the excitatory pool ({}*{} > {})",
                        self.input_region_count,
                        self.input_num_target_neurons,
                        self.reservoir_ex_size
                    ),
                );
            }
        }
        if self.noise_neurons > reservoir_size {
            fail(
                "noiseNeurons",
                format!(
                    "cannot exceed the reservoir size ({} > {reservoir_size})",
                    self.noise_neurons
                ),
            );
        }
        if self.output_is_pooling {
            if self.output_size == 0 {
                fail("outputSize", "must be at least 1".to_string());
            } else if self.output_size > self.reservoir_ex_size {
                fail(
                    "outputSize",
                    format!(
                        "cannot exceed the excitatory pool ({} > {})",
                        self.output_size, self.reservoir_ex_size
                    ),
                );
            }
        }
        if self.plot_dimensions.0 == 0 || self.plot_dimensions.1 == 0 {
            fail("plotDimensions", "must be positive".to_string());
        }

        violations
    }

    /// Compute the derived parameters; fails with the full violation list
    /// if the set is invalid.
    pub fn derive(&self) -> Result<DerivedParameters, ValidationError> {
        let violations = self.validate();
        if !violations.is_empty() {
            return Err(ValidationError(violations));
        }
        let reservoir_size = self.reservoir_ex_size + self.reservoir_in_size;
        let core_count = reservoir_size.div_ceil(self.neurons_per_core);
        let input_windows: Vec<(usize, usize)> = if self.input_is_sequence {
            (0..self.input_sequence_size)
                .map(|k| (k * self.input_steps, (k + 1) * self.input_steps))
                .collect()
        } else if self.input_is_topological || self.input_is_leave_n_out || self.input_is_alternating
        {
            alloc::vec![(0, self.input_steps.min(self.steps_per_trial))]
        } else {
            Vec::new()
        };
        Ok(DerivedParameters {
            reservoir_size,
            total_steps: self.trials * self.steps_per_trial,
            core_count,
            chunk_count: core_count * core_count,
            steps_per_input: self.input_steps,
            input_windows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn defaults_match_documented_values() {
        let p = ParameterSet::defaults();
        assert_eq!(p.input_gen_spike_prob, 0.8);
        assert_eq!(p.trials, 10);
        assert_eq!(p.steps_per_trial, 60);
        assert_eq!(p.refractory_delay, 2);
        assert_eq!(p.voltage_tau, 100.0);
        assert_eq!(p.current_tau, 5.0);
        assert_eq!(p.threshold_mant, 1200.0);
        assert_eq!(p.reservoir_ex_size, 400);
        assert_eq!(p.reservoir_conn_per_neuron, 35);
        assert_eq!(p.input_sequence_size, 3);
        assert_eq!(p.input_steps, 20);
        assert_eq!(p.input_num_target_neurons, 40);
        assert!(p.is_ex_spike_probe && p.is_in_spike_probe && p.is_weight_probe);
    }

    #[test]
    fn defaults_self_validate() {
        assert!(ParameterSet::defaults().validate().is_empty());
    }

    #[test]
    fn merge_applies_override() {
        let p = ParameterSet::defaults();
        let merged = p
            .merge(&[("seed".to_string(), ParamValue::UInt(2))])
            .unwrap();
        assert_eq!(merged.seed, 2);
        assert_eq!(merged.trials, p.trials);
    }

    #[test]
    fn empty_merge_is_identity() {
        let p = ParameterSet::defaults();
        assert_eq!(p.merge(&[]).unwrap(), p);
    }

    #[test]
    fn merge_rejects_unknown_keys() {
        let p = ParameterSet::defaults();
        let err = p
            .merge(&[("bogusKey".to_string(), ParamValue::UInt(1))])
            .unwrap_err();
        assert_eq!(err, ParamError::UnknownParameter("bogusKey".to_string()));
    }

    #[test]
    fn merge_rejects_wrong_types() {
        let p = ParameterSet::defaults();
        let err = p
            .merge(&[("trials".to_string(), ParamValue::Str("ten".to_string()))])
            .unwrap_err();
        assert!(matches!(err, ParamError::InvalidValue { .. }));
    }

    #[test]
    fn merge_is_idempotent() {
        let p = ParameterSet::defaults();
        let overrides = vec![
            ("seed".to_string(), ParamValue::UInt(7)),
            ("trials".to_string(), ParamValue::UInt(3)),
            ("voltageTau".to_string(), ParamValue::Float(40.0)),
        ];
        let once = p.merge(&overrides).unwrap();
        let twice = once.merge(&overrides).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn probability_out_of_range_is_reported() {
        let mut p = ParameterSet::defaults();
        p.input_gen_spike_prob = 1.5;
        let violations = p.validate();
        assert!(violations
            .iter()
            .any(|v| v.key == "inputGenSpikeProb" && v.message.contains("probability out of range")));
    }

    #[test]
    fn target_count_cannot_exceed_excitatory_pool() {
        let mut p = ParameterSet::defaults();
        p.input_num_target_neurons = 600;
        p.reservoir_ex_size = 400;
        let violations = p.validate();
        assert!(violations.iter().any(|v| v.key == "inputNumTargetNeurons"));
    }

    #[test]
    fn validation_collects_all_violations() {
        let mut p = ParameterSet::defaults();
        p.input_gen_spike_prob = -0.1;
        p.noise_spike_prob = 2.0;
        p.trials = 0;
        assert!(p.validate().len() >= 3);
    }

    #[test]
    fn derive_computes_totals_and_cores() {
        let p = ParameterSet::defaults();
        let d = p.derive().unwrap();
        assert_eq!(d.total_steps, 600);
        assert_eq!(d.reservoir_size, 500);
        assert_eq!(d.core_count, 4);
        assert_eq!(d.chunk_count, 16);
        assert_eq!(d.input_windows, vec![(0, 20), (20, 40), (40, 60)]);
    }

    #[test]
    fn derive_matches_three_core_example() {
        let mut p = ParameterSet::defaults();
        p.reservoir_ex_size = 10;
        p.reservoir_in_size = 2;
        p.neurons_per_core = 4;
        p.reservoir_conn_per_neuron = 5;
        p.input_num_target_neurons = 4;
        let d = p.derive().unwrap();
        assert_eq!(d.reservoir_size, 12);
        assert_eq!(d.core_count, 3);
        assert_eq!(d.chunk_count, 9);
    }

    #[test]
    fn derive_is_pure() {
        let p = ParameterSet::defaults();
        assert_eq!(p.derive().unwrap(), p.derive().unwrap());
    }

    #[test]
    fn derive_propagates_validation_failure() {
        let mut p = ParameterSet::defaults();
        p.trials = 0;
        assert!(p.derive().is_err());
    }

    #[test]
    fn every_known_key_reads_and_writes() {
        // No hidden knobs: each key is gettable, and settable with its own
        // current value without changing anything.
        let p = ParameterSet::defaults();
        for key in KNOWN_KEYS {
            let value = p.get(key).unwrap_or_else(|| panic!("missing key {key}"));
            let mut q = p.clone();
            q.set(key, &value).unwrap();
            assert_eq!(q, p, "set({key}) with own value changed the set");
        }
    }

    #[test]
    fn get_rejects_unknown_keys() {
        assert!(ParameterSet::defaults().get("nope").is_none());
    }
}
