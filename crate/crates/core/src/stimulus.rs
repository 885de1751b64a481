//! Input plans: which excitatory neurons are stimulated when.
//!
//! Four modes are supported: a sequence of regions stimulated back to back
//! within each trial, a leave-n-out set that drops a few random members
//! per trial, a topological square on the 2D grid, and alternating regions
//! where each trial picks one region at random. Plans are pure functions
//! of the parameters and seed; the per-step Bernoulli draws happen later
//! in the spike generators the plan is realized into.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{GeneratorKind, SpikeGenerator};
use crate::params::ParameterSet;
use crate::rng::{derive_key, stream, StreamKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StimulusError {
    #[error("input sequence does not fit in a trial ({sequence} x {steps} > {steps_per_trial})")]
    WindowOverflow {
        sequence: usize,
        steps: usize,
        steps_per_trial: usize,
    },
    #[error("leave-out count {leave_out} must be smaller than the target count {targets}")]
    InvalidLeaveOut { leave_out: usize, targets: usize },
    #[error("square of side {side} at ({x}, {y}) does not fit a {width}x{height} grid")]
    SquareOutOfBounds {
        x: usize,
        y: usize,
        side: usize,
        width: usize,
        height: usize,
    },
    #[error("grid {width}x{height} does not cover {ex_size} excitatory neurons")]
    GridMismatch {
        width: usize,
        height: usize,
        ex_size: usize,
    },
    #[error("{regions} regions of {targets} neurons do not fit in {ex_size} excitatory neurons")]
    RegionsDontFit {
        regions: usize,
        targets: usize,
        ex_size: usize,
    },
    #[error("alternating input needs at least 2 regions, got {0}")]
    TooFewRegions(usize),
    #[error("{targets} targets do not fit in {ex_size} excitatory neurons")]
    TargetsExceedPool { targets: usize, ex_size: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputMode {
    None,
    Sequence,
    Topological,
    LeaveNOut,
    Alternating,
}

/// One stimulation interval within a trial.
#[derive(Clone, Debug, PartialEq)]
pub struct InputInterval {
    /// Excitatory neuron indices.
    pub targets: Vec<usize>,
    /// Half-open step window within the trial.
    pub window: (usize, usize),
    pub spike_prob: f64,
    pub injected_weight: f64,
}

/// Per-trial stimulation schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct InputPlan {
    pub mode: InputMode,
    /// `trials[k]` lists the intervals of trial `k`, in order.
    pub trials: Vec<Vec<InputInterval>>,
}

impl InputPlan {
    pub fn empty(trials: usize) -> Self {
        InputPlan {
            mode: InputMode::None,
            trials: vec![Vec::new(); trials],
        }
    }
}

/// Dispatch on the input mode flags; derives the plan stream from the
/// master seed.
pub fn build_input_plan(params: &ParameterSet) -> Result<InputPlan, StimulusError> {
    let mut rng = stream(derive_key(params.seed, StreamKind::StimulusPlan, 0));
    if params.input_is_sequence {
        build_sequence_input(params, &mut rng)
    } else if params.input_is_topological {
        build_topological_input(params)
    } else if params.input_is_leave_n_out {
        build_leave_n_out_input(params, &mut rng)
    } else if params.input_is_alternating {
        build_alternating_input(params, &mut rng)
    } else {
        Ok(InputPlan::empty(params.trials))
    }
}

fn sample_excitatory(rng: &mut ChaCha8Rng, ex_size: usize, count: usize) -> Vec<usize> {
    rand::seq::index::sample(rng, ex_size, count)
        .into_iter()
        .collect()
}

/// Disjoint regions stimulated back to back within every trial; region
/// `k` owns the window `[k*inputSteps, (k+1)*inputSteps)`.
pub fn build_sequence_input(
    params: &ParameterSet,
    rng: &mut ChaCha8Rng,
) -> Result<InputPlan, StimulusError> {
    let sequence = params.input_sequence_size;
    let steps = params.input_steps;
    if sequence * steps > params.steps_per_trial {
        return Err(StimulusError::WindowOverflow {
            sequence,
            steps,
            steps_per_trial: params.steps_per_trial,
        });
    }
    let per_region = params.input_num_target_neurons;
    let total = sequence * per_region;
    if total > params.reservoir_ex_size {
        return Err(StimulusError::TargetsExceedPool {
            targets: total,
            ex_size: params.reservoir_ex_size,
        });
    }
    let all = sample_excitatory(rng, params.reservoir_ex_size, total);
    let regions: Vec<Vec<usize>> = all.chunks(per_region).map(<[usize]>::to_vec).collect();
    let intervals: Vec<InputInterval> = regions
        .into_iter()
        .enumerate()
        .map(|(k, targets)| InputInterval {
            targets,
            window: (k * steps, (k + 1) * steps),
            spike_prob: params.input_gen_spike_prob,
            injected_weight: params.input_weight,
        })
        .collect();
    Ok(InputPlan {
        mode: InputMode::Sequence,
        trials: vec![intervals; params.trials],
    })
}

/// A fixed base set, stimulated minus `inputLeaveOutCount` freshly drawn
/// members in every trial.
pub fn build_leave_n_out_input(
    params: &ParameterSet,
    rng: &mut ChaCha8Rng,
) -> Result<InputPlan, StimulusError> {
    let target_count = params.input_num_target_neurons;
    let leave_out = params.input_leave_out_count;
    if leave_out >= target_count {
        return Err(StimulusError::InvalidLeaveOut {
            leave_out,
            targets: target_count,
        });
    }
    if target_count > params.reservoir_ex_size {
        return Err(StimulusError::TargetsExceedPool {
            targets: target_count,
            ex_size: params.reservoir_ex_size,
        });
    }
    let base = sample_excitatory(rng, params.reservoir_ex_size, target_count);
    let window = (0, params.input_steps.min(params.steps_per_trial));
    let trials = (0..params.trials)
        .map(|_| {
            let mut dropped = vec![false; base.len()];
            for position in rand::seq::index::sample(rng, base.len(), leave_out) {
                dropped[position] = true;
            }
            let targets = base
                .iter()
                .zip(&dropped)
                .filter(|&(_, &d)| !d)
                .map(|(&t, _)| t)
                .collect();
            vec![InputInterval {
                targets,
                window,
                spike_prob: params.input_gen_spike_prob,
                injected_weight: params.input_weight,
            }]
        })
        .collect();
    Ok(InputPlan {
        mode: InputMode::LeaveNOut,
        trials,
    })
}

/// A square of stimulated neurons on the 2D excitatory grid, row-major
/// from the given corner position, identical in every trial.
pub fn build_topological_input(params: &ParameterSet) -> Result<InputPlan, StimulusError> {
    let (width, height) = (params.grid_width, params.grid_height);
    if width * height != params.reservoir_ex_size {
        return Err(StimulusError::GridMismatch {
            width,
            height,
            ex_size: params.reservoir_ex_size,
        });
    }
    let (x, y, side) = (
        params.input_square_x,
        params.input_square_y,
        params.input_square_side,
    );
    if x + side > width || y + side > height {
        return Err(StimulusError::SquareOutOfBounds {
            x,
            y,
            side,
            width,
            height,
        });
    }
    let mut targets = Vec::with_capacity(side * side);
    for row in 0..side {
        for col in 0..side {
            targets.push((y + row) * width + (x + col));
        }
    }
    let interval = InputInterval {
        targets,
        window: (0, params.input_steps.min(params.steps_per_trial)),
        spike_prob: params.input_gen_spike_prob,
        injected_weight: params.input_weight,
    };
    Ok(InputPlan {
        mode: InputMode::Topological,
        trials: vec![vec![interval]; params.trials],
    })
}

/// Disjoint regions of which every trial stimulates one, chosen uniformly.
pub fn build_alternating_input(
    params: &ParameterSet,
    rng: &mut ChaCha8Rng,
) -> Result<InputPlan, StimulusError> {
    let regions = params.input_region_count;
    if regions < 2 {
        return Err(StimulusError::TooFewRegions(regions));
    }
    let per_region = params.input_num_target_neurons;
    if regions * per_region > params.reservoir_ex_size {
        return Err(StimulusError::RegionsDontFit {
            regions,
            targets: per_region,
            ex_size: params.reservoir_ex_size,
        });
    }
    let all = sample_excitatory(rng, params.reservoir_ex_size, regions * per_region);
    let region_sets: Vec<Vec<usize>> = all.chunks(per_region).map(<[usize]>::to_vec).collect();
    let window = (0, params.input_steps.min(params.steps_per_trial));
    let trials = (0..params.trials)
        .map(|_| {
            let chosen = rng.random_range(0..regions);
            vec![InputInterval {
                targets: region_sets[chosen].clone(),
                window,
                spike_prob: params.input_gen_spike_prob,
                injected_weight: params.input_weight,
            }]
        })
        .collect();
    Ok(InputPlan {
        mode: InputMode::Alternating,
        trials,
    })
}

/// Turn a plan into spike generators with global step windows, one per
/// (trial, interval), enumerated trial-major so generator stream indices
/// are stable.
pub fn realize_generators(
    plan: &InputPlan,
    steps_per_trial: usize,
    master_seed: u64,
) -> Vec<SpikeGenerator> {
    let mut generators = Vec::new();
    let mut index = 0u64;
    for (trial, intervals) in plan.trials.iter().enumerate() {
        let base = trial * steps_per_trial;
        for interval in intervals {
            generators.push(SpikeGenerator::new(
                GeneratorKind::Input,
                master_seed,
                index,
                interval.targets.clone(),
                vec![(base + interval.window.0, base + interval.window.1)],
                interval.spike_prob,
                interval.injected_weight,
            ));
            index += 1;
        }
    }
    generators
}
