//! Per-core recording and post-run stacking, plus the pooling readout.
//!
//! During a run every core appends to its own buffer; after the run the
//! buffers are stacked into whole-network datasets: one spike raster over
//! the full reservoir, merged per-trial weight matrices in CSR form, and
//! optional voltage traces. Stacking is pure concatenation because cores
//! own contiguous neuron ranges.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::engine::{cuba_neuron_step, NeuronConfig};
use crate::partition::CoreLayout;
use crate::sparse::SparseMatrix;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProbeError {
    #[error("core {core} recorded {recorded} of {expected} steps")]
    IncompleteRun {
        core: usize,
        recorded: usize,
        expected: usize,
    },
}

/// A boolean spike raster stored as a sorted `(step, neuron)` list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpikeRaster {
    pub neurons: usize,
    pub steps: usize,
    /// Sorted by step, then neuron.
    pub spikes: Vec<(usize, usize)>,
}

impl SpikeRaster {
    pub fn count(&self) -> usize {
        self.spikes.len()
    }

    /// Dense boolean view, indexed `[neuron * steps + step]`.
    pub fn dense(&self) -> Vec<bool> {
        let mut grid = vec![false; self.neurons * self.steps];
        for &(step, neuron) in &self.spikes {
            grid[neuron * self.steps + step] = true;
        }
        grid
    }

    /// One neuron's spike train as 0/1 reals.
    pub fn row(&self, neuron: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.steps];
        for &(step, n) in &self.spikes {
            if n == neuron {
                row[step] = 1.0;
            }
        }
        row
    }
}

/// Per-core recording buffers for one run.
#[derive(Clone, Debug, Default)]
pub struct ProbeStore {
    steps_recorded: Vec<usize>,
    core_spikes: Vec<Vec<(usize, usize)>>,
    out_spikes: Vec<(usize, usize)>,
    input_events: Vec<(usize, usize)>,
    voltages: Vec<Vec<f64>>,
    weight_snapshots: Vec<SparseMatrix>,
}

/// Whole-network datasets produced by [`ProbeStore::post_process`].
#[derive(Clone, Debug)]
pub struct StackedData {
    /// Reservoir raster, `reservoir_size x total_steps`.
    pub raster: SpikeRaster,
    /// Output-layer raster when an output was recorded.
    pub out_raster: Option<SpikeRaster>,
    /// Delivered input-generator spikes over the excitatory pool.
    pub input_raster: SpikeRaster,
    /// One merged weight matrix per probed trial.
    pub weights: Vec<SparseMatrix>,
    /// Voltage traces indexed `[neuron * total_steps + step]`.
    pub voltages: Option<Vec<f64>>,
}

impl ProbeStore {
    pub fn new(core_count: usize) -> Self {
        ProbeStore {
            steps_recorded: vec![0; core_count],
            core_spikes: vec![Vec::new(); core_count],
            out_spikes: Vec::new(),
            input_events: Vec::new(),
            voltages: Vec::new(),
            weight_snapshots: Vec::new(),
        }
    }

    /// Record one core's local spikes for step `t`. Steps must arrive in
    /// order, once per core.
    pub fn record_step(&mut self, core: usize, local_spikes: &[usize], t: usize) {
        debug_assert_eq!(self.steps_recorded[core], t, "steps must be recorded in order");
        for &local in local_spikes {
            self.core_spikes[core].push((t, local));
        }
        self.steps_recorded[core] += 1;
    }

    pub fn record_out_spikes(&mut self, out_spikes: &[usize], t: usize) {
        for &neuron in out_spikes {
            self.out_spikes.push((t, neuron));
        }
    }

    pub fn record_input_events(&mut self, targets: &[usize], t: usize) {
        for &target in targets {
            self.input_events.push((t, target));
        }
    }

    pub fn record_voltages(&mut self, voltages: Vec<f64>) {
        self.voltages.push(voltages);
    }

    pub fn push_weight_snapshot(&mut self, snapshot: SparseMatrix) {
        self.weight_snapshots.push(snapshot);
    }

    pub fn weight_snapshot_count(&self) -> usize {
        self.weight_snapshots.len()
    }

    pub fn recorded_spike_total(&self) -> usize {
        self.core_spikes.iter().map(Vec::len).sum()
    }

    /// Stack the per-core buffers into whole-network datasets.
    pub fn post_process(
        &self,
        layout: &CoreLayout,
        total_steps: usize,
        ex_size: usize,
        output_size: Option<usize>,
    ) -> Result<StackedData, ProbeError> {
        for (core, &recorded) in self.steps_recorded.iter().enumerate() {
            if recorded != total_steps {
                return Err(ProbeError::IncompleteRun {
                    core,
                    recorded,
                    expected: total_steps,
                });
            }
        }
        let mut spikes: Vec<(usize, usize)> = Vec::with_capacity(self.recorded_spike_total());
        for (core, buffer) in self.core_spikes.iter().enumerate() {
            let start = layout.range(core).0;
            spikes.extend(buffer.iter().map(|&(t, local)| (t, start + local)));
        }
        spikes.sort_unstable();
        let raster = SpikeRaster {
            neurons: layout.total_neurons(),
            steps: total_steps,
            spikes,
        };
        let out_raster = output_size.map(|neurons| {
            let mut spikes = self.out_spikes.clone();
            spikes.sort_unstable();
            SpikeRaster {
                neurons,
                steps: total_steps,
                spikes,
            }
        });
        let mut input_spikes = self.input_events.clone();
        input_spikes.sort_unstable();
        let input_raster = SpikeRaster {
            neurons: ex_size,
            steps: total_steps,
            spikes: input_spikes,
        };
        let voltages = if self.voltages.is_empty() {
            None
        } else {
            let n = layout.total_neurons();
            let mut stacked = vec![0.0; n * total_steps];
            for (t, snapshot) in self.voltages.iter().enumerate() {
                for (neuron, &v) in snapshot.iter().enumerate() {
                    stacked[neuron * total_steps + t] = v;
                }
            }
            Some(stacked)
        };
        Ok(StackedData {
            raster,
            out_raster,
            input_raster,
            weights: self.weight_snapshots.clone(),
            voltages,
        })
    }
}

/// The pooling readout layer: output neuron `k` integrates
/// `outputWeight * (spike count in its pool)` with the same CUBA LIF
/// dynamics as the reservoir.
#[derive(Clone, Debug)]
pub struct PoolingReadout {
    /// Contiguous excitatory index ranges, sizes differing by at most 1.
    pub pools: Vec<(usize, usize)>,
    pub output_weight: f64,
    config: NeuronConfig,
    voltage: Vec<f64>,
    current: Vec<f64>,
    refractory: Vec<usize>,
}

impl PoolingReadout {
    pub fn new(ex_size: usize, output_size: usize, output_weight: f64, config: NeuronConfig) -> Self {
        let base = ex_size / output_size;
        let remainder = ex_size % output_size;
        let mut pools = Vec::with_capacity(output_size);
        let mut start = 0;
        for k in 0..output_size {
            let size = base + usize::from(k < remainder);
            pools.push((start, start + size));
            start += size;
        }
        debug_assert_eq!(start, ex_size);
        PoolingReadout {
            pools,
            output_weight,
            config,
            voltage: vec![0.0; output_size],
            current: vec![0.0; output_size],
            refractory: vec![0; output_size],
        }
    }

    pub fn output_size(&self) -> usize {
        self.pools.len()
    }

    /// Pool the excitatory spikes of the previous step and advance the
    /// output neurons; returns the output spikes.
    pub fn pool_and_step(&mut self, ex_spikes: &[bool]) -> Vec<usize> {
        let mut fired = Vec::new();
        for (k, &(start, end)) in self.pools.iter().enumerate() {
            let count = ex_spikes[start..end].iter().filter(|&&s| s).count();
            let synaptic = self.output_weight * count as f64;
            if cuba_neuron_step(
                &mut self.voltage[k],
                &mut self.current[k],
                &mut self.refractory[k],
                synaptic,
                &self.config,
            ) {
                fired.push(k);
            }
        }
        fired
    }

    pub fn reset(&mut self) {
        self.voltage.fill(0.0);
        self.current.fill(0.0);
        self.refractory.fill(0);
    }

    pub fn voltages(&self) -> &[f64] {
        &self.voltage
    }
}

/// Centered moving average with truncated windows at the edges, each
/// normalized by its actual length.
pub fn smooth_spikes(row: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    let left = (window - 1) / 2;
    let right = window / 2;
    (0..row.len())
        .map(|t| {
            let lo = t.saturating_sub(left);
            let hi = usize::min(row.len(), t + right + 1);
            row[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}
