//! Composition of network, plasticity and readout into one simulation.
//!
//! One step runs in a fixed order: the readout pools the previous step's
//! excitatory spikes, every core advances against the previous global
//! spike vector, and the plasticity traces fold in the new spikes with the
//! rule applied at epoch boundaries. Trial handling (partial-epoch
//! application, snapshots, resets) is exposed as explicit calls so the
//! experiment layer and tests drive the same code path.

use alloc::vec::Vec;
use thiserror::Error;

use crate::engine::{build_noise, CoreStepper, Network, NeuronConfig};
use crate::params::{DerivedParameters, ParameterSet, ValidationError, WeightInit};
use crate::partition::{compute_layout, merge, split, PartitionError};
use crate::plasticity::{PlasticityConfig, PlasticityEngine, RuleAst, RuleParseError};
use crate::probes::PoolingReadout;
use crate::rng::{derive_key, stream, StreamKind};
use crate::sparse::SparseMatrix;
use crate::stimulus::{build_input_plan, realize_generators, InputPlan, StimulusError};
use crate::weights::{self, ReservoirWeights, WeightDistribution, WeightError};

#[derive(Debug, Error, PartialEq)]
pub enum BuildError {
    #[error(transparent)]
    Params(#[from] ValidationError),
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Stimulus(#[from] StimulusError),
    #[error("learning rule: {0}")]
    Rule(#[from] RuleParseError),
}

/// Everything produced by one simulation step.
#[derive(Clone, Debug)]
pub struct SimStep {
    pub step: usize,
    /// Global reservoir spike vector.
    pub spikes: Vec<bool>,
    /// Local spike indices per core.
    pub per_core: Vec<Vec<usize>>,
    /// Excitatory targets hit by input generators this step.
    pub input_events: Vec<usize>,
    /// Output-layer spikes (empty without a readout).
    pub out_spikes: Vec<usize>,
}

/// A built network with its optional plasticity and readout.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub network: Network,
    pub plasticity: Option<PlasticityEngine>,
    pub readout: Option<PoolingReadout>,
    pub input_plan: InputPlan,
    pub ex_size: usize,
}

/// Initial weights per the configured scheme, or wrap a caller-provided
/// matrix (a reloaded snapshot).
pub fn build_reservoir_weights(
    params: &ParameterSet,
    initial: Option<SparseMatrix>,
) -> Result<ReservoirWeights, WeightError> {
    let (n_ex, n_in) = (params.reservoir_ex_size, params.reservoir_in_size);
    if let Some(matrix) = initial {
        let expected = n_ex + n_in;
        if matrix.rows() != expected || matrix.cols() != expected {
            return Err(WeightError::ShapeMismatch {
                rows: matrix.rows(),
                cols: matrix.cols(),
                expected,
            });
        }
        return ReservoirWeights::from_matrix(matrix, n_ex);
    }
    let mut rng = stream(derive_key(params.seed, StreamKind::Weights, 0));
    let conn = params.reservoir_conn_per_neuron;
    match params.weight_init {
        WeightInit::Constant => weights::init_constant(
            n_ex,
            n_in,
            conn,
            params.weight_ex_mean,
            params.weight_in_mean,
            &mut rng,
        ),
        WeightInit::Normal => weights::init_random(
            n_ex,
            n_in,
            conn,
            WeightDistribution::Normal {
                mean: params.weight_ex_mean,
                sigma: params.weight_sigma,
            },
            WeightDistribution::Normal {
                mean: params.weight_in_mean,
                sigma: params.weight_sigma,
            },
            &mut rng,
        ),
        WeightInit::LogNormal => weights::init_random(
            n_ex,
            n_in,
            conn,
            WeightDistribution::lognormal_with_mean(params.weight_ex_mean, params.weight_sigma),
            WeightDistribution::lognormal_with_mean(params.weight_in_mean, params.weight_sigma),
            &mut rng,
        ),
        WeightInit::Anisotropic2d => weights::init_anisotropic(
            params.grid_width,
            params.grid_height,
            n_ex,
            n_in,
            conn,
            params.aniso_shift_magnitude,
            params.aniso_profile_sigma,
            params.weight_ex_mean,
            params.weight_in_mean,
            &mut rng,
        ),
    }
}

/// Weight cap for plasticity: the configured value, or twice the initial
/// mean ee weight when the parameter is 0 (automatic).
pub fn resolve_weight_max(params: &ParameterSet, initial_weights: &ReservoirWeights) -> f64 {
    if params.weight_max > 0.0 {
        params.weight_max
    } else {
        let mean = initial_weights.ee.mean_value();
        if mean > 0.0 {
            2.0 * mean
        } else {
            1.0
        }
    }
}

/// Build the plasticity engine when learning is enabled.
pub fn build_plasticity(
    params: &ParameterSet,
    initial_weights: &ReservoirWeights,
) -> Result<Option<PlasticityEngine>, RuleParseError> {
    if !params.is_learning_rule {
        return Ok(None);
    }
    let ast = RuleAst::parse(&params.learning_rule)?;
    let config = PlasticityConfig {
        tau_pre: params.trace_tau_pre,
        tau_post: params.trace_tau_post,
        impulse: params.trace_impulse,
        epoch_length: params.learning_epoch,
        weight_max: resolve_weight_max(params, initial_weights),
    };
    Ok(Some(PlasticityEngine::new(
        ast,
        config,
        params.reservoir_ex_size,
    )))
}

/// Assemble the complete simulation: weights, layout, chunks, inputs,
/// noise, readout and learning rule.
pub fn build_simulation(
    params: &ParameterSet,
    initial: Option<SparseMatrix>,
) -> Result<Simulation, BuildError> {
    let derived = params.derive()?;
    let reservoir = build_reservoir_weights(params, initial)?;
    let layout = compute_layout(derived.reservoir_size, params.neurons_per_core)?;
    let grid = split(&reservoir.assembled, &layout)?;
    let input_plan = build_input_plan(params)?;
    let mut generators = realize_generators(&input_plan, params.steps_per_trial, params.seed);
    if params.noise_neurons > 0 {
        generators.push(build_noise(params, &derived));
    }
    let readout = params.output_is_pooling.then(|| {
        PoolingReadout::new(
            params.reservoir_ex_size,
            params.output_size,
            params.output_weight,
            NeuronConfig::from_params(params),
        )
    });
    let plasticity = build_plasticity(params, &reservoir)?;
    let network = Network::new(grid, NeuronConfig::from_params(params), generators);
    Ok(Simulation {
        network,
        plasticity,
        readout,
        input_plan,
        ex_size: params.reservoir_ex_size,
    })
}

impl Simulation {
    /// Advance everything by one step.
    pub fn step(&mut self, stepper: &dyn CoreStepper) -> SimStep {
        let out_spikes = match &mut self.readout {
            Some(readout) => readout.pool_and_step(&self.network.prev_spikes()[..self.ex_size]),
            None => Vec::new(),
        };
        let output = self.network.step(stepper);
        if let Some(plasticity) = &mut self.plasticity {
            if plasticity.observe_step(&output.spikes[..self.ex_size]) {
                plasticity.apply_epoch(self.network.cores_mut(), self.ex_size);
            }
        }
        SimStep {
            step: output.step,
            spikes: output.spikes,
            per_core: output.per_core,
            input_events: output.input_events,
            out_spikes,
        }
    }

    /// Apply a pending partial learning epoch; call at every trial end
    /// before snapshots or resets.
    pub fn end_trial(&mut self) {
        if let Some(plasticity) = &mut self.plasticity {
            plasticity.end_trial(self.network.cores_mut(), self.ex_size);
        }
    }

    /// Zero all dynamic state (voltages, currents, refractory counters,
    /// pending spikes, the readout, and optionally the traces). Weights
    /// stay untouched.
    pub fn reset_trial(&mut self, reset_traces: bool) {
        self.network.reset_dynamics();
        if let Some(readout) = &mut self.readout {
            readout.reset();
        }
        if reset_traces {
            if let Some(plasticity) = &mut self.plasticity {
                plasticity.reset_traces();
            }
        }
    }

    /// The current assembled weight matrix, merged from the chunks.
    pub fn weights_snapshot(&self) -> SparseMatrix {
        merge(&self.network.weight_grid()).expect("chunk grid built from a consistent layout")
    }

    pub fn core_count(&self) -> usize {
        self.network.layout().core_count()
    }
}

/// Derived values the caller usually wants next to a simulation.
pub fn derive_for(params: &ParameterSet) -> Result<DerivedParameters, ValidationError> {
    params.derive()
}
