//! Trace-based plasticity on the excitatory-to-excitatory connections.
//!
//! Traces advance every step from the step's spikes; the rule is applied
//! once per learning epoch to every existing ee synapse, with `x*`
//! evaluated at the pre neuron, `y*` at the post neuron and `w` at the
//! synapse itself. The sparsity pattern never changes: no synapses are
//! created or pruned, and weights are clamped to `[0, weight_max]`, which
//! also preserves Dale's law for the excitatory pool. Updates touch only a
//! core's own row blocks, so partitioning does not affect the outcome.

pub mod rule;
pub mod traces;

pub use rule::{RuleAst, RuleParseError, RuleTerm, RuleVariable};
pub use traces::{update_traces, TraceState};

use crate::engine::CoreState;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlasticityConfig {
    pub tau_pre: f64,
    pub tau_post: f64,
    pub impulse: f64,
    /// Steps between rule applications within a trial.
    pub epoch_length: usize,
    pub weight_max: f64,
}

/// Rule, traces and epoch bookkeeping for one run.
#[derive(Clone, Debug)]
pub struct PlasticityEngine {
    pub ast: RuleAst,
    pub config: PlasticityConfig,
    pub traces: TraceState,
    steps_in_epoch: usize,
}

impl PlasticityEngine {
    pub fn new(ast: RuleAst, config: PlasticityConfig, n_ex: usize) -> Self {
        PlasticityEngine {
            ast,
            config,
            traces: TraceState::new(n_ex),
            steps_in_epoch: 0,
        }
    }

    /// Fold one step's excitatory spikes into the traces. Returns true
    /// when the learning epoch is complete and the rule should be applied.
    pub fn observe_step(&mut self, ex_spikes: &[bool]) -> bool {
        update_traces(
            &mut self.traces,
            ex_spikes,
            ex_spikes,
            self.config.tau_pre,
            self.config.tau_post,
            self.config.impulse,
        );
        self.steps_in_epoch += 1;
        self.steps_in_epoch >= self.config.epoch_length
    }

    /// Apply the rule to every ee synapse and start a new epoch.
    pub fn apply_epoch(&mut self, cores: &mut [CoreState], ex_size: usize) {
        apply_rule(
            &self.ast,
            cores,
            ex_size,
            &self.traces,
            self.config.weight_max,
        );
        self.traces.clear_epoch_flags();
        self.steps_in_epoch = 0;
    }

    /// Apply a partially filled epoch at a trial boundary, before any
    /// reset.
    pub fn end_trial(&mut self, cores: &mut [CoreState], ex_size: usize) {
        if self.steps_in_epoch > 0 {
            self.apply_epoch(cores, ex_size);
        }
    }

    pub fn reset_traces(&mut self) {
        self.traces.reset();
        self.steps_in_epoch = 0;
    }
}

/// One rule application over the ee entries of the per-core row blocks.
///
/// Each synapse's change is computed from the traces and its own current
/// weight, then clamped to `[0, weight_max]`; the stored pattern is
/// untouched even when a weight reaches zero.
pub fn apply_rule(
    ast: &RuleAst,
    cores: &mut [CoreState],
    ex_size: usize,
    traces: &TraceState,
    weight_max: f64,
) {
    for core in cores {
        let row_start = core.range.0;
        if row_start >= ex_size {
            continue;
        }
        let source_offsets = core.source_offsets.clone();
        for (chunk, col_start) in core.row_chunks.iter_mut().zip(source_offsets) {
            if col_start >= ex_size {
                continue;
            }
            for local_row in 0..chunk.rows() {
                let post = row_start + local_row;
                if post >= ex_size {
                    break;
                }
                let (cols, vals) = chunk.row_mut(local_row);
                for (k, &local_col) in cols.iter().enumerate() {
                    let pre = col_start + local_col;
                    if pre >= ex_size {
                        break;
                    }
                    let w = vals[k];
                    let delta = ast.evaluate(&|variable| match variable {
                        RuleVariable::X0 => f64::from(u8::from(traces.x0[pre])),
                        RuleVariable::X1 => traces.x1[pre],
                        RuleVariable::Y0 => f64::from(u8::from(traces.y0[post])),
                        RuleVariable::Y1 => traces.y1[post],
                        RuleVariable::Y2 => traces.y2[post],
                        RuleVariable::W => w,
                    });
                    vals[k] = (w + delta).clamp(0.0, weight_max);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::cores_from_grid;
    use crate::partition::{compute_layout, merge, split, ChunkGrid};
    use crate::sparse::SparseMatrix;
    use alloc::vec;
    use alloc::vec::Vec;

    fn grid_from(matrix: &SparseMatrix, per_core: usize) -> ChunkGrid {
        let layout = compute_layout(matrix.rows(), per_core).unwrap();
        split(matrix, &layout).unwrap()
    }

    fn merged_weights(cores: &[CoreState]) -> SparseMatrix {
        let layout = compute_layout(
            cores.iter().map(CoreState::size).sum(),
            cores[0].size().max(1),
        )
        .unwrap();
        let blocks = cores.iter().map(|c| c.row_chunks.clone()).collect();
        merge(&ChunkGrid::from_row_blocks(layout, blocks)).unwrap()
    }

    #[test]
    fn single_term_update_adds_coefficient_times_traces() {
        // w' = w + 2^-2 * x1(pre) * y0(post) = 10 + 0.25*4*1 = 11
        let ast = RuleAst::parse("2^-2*x1*y0").unwrap();
        let w = SparseMatrix::from_triplets(2, 2, vec![(1, 0, 10.0)]);
        let mut cores = cores_from_grid(grid_from(&w, 2));
        let mut traces = TraceState::new(2);
        traces.x1[0] = 4.0;
        traces.y0[1] = true;
        apply_rule(&ast, &mut cores, 2, &traces, 100.0);
        assert_eq!(merged_weights(&cores).get(1, 0), 11.0);
    }

    #[test]
    fn silent_post_neurons_contribute_nothing() {
        let ast = RuleAst::parse("2^-2*x1*y0 + 2^-3*y0*w").unwrap();
        let w = SparseMatrix::from_triplets(3, 3, vec![(1, 0, 5.0), (2, 0, 7.0)]);
        let mut cores = cores_from_grid(grid_from(&w, 3));
        let mut traces = TraceState::new(3);
        traces.x1[0] = 9.0;
        // y0 all false: every term carries a y0 factor, so nothing moves.
        apply_rule(&ast, &mut cores, 3, &traces, 100.0);
        let after = merged_weights(&cores);
        assert_eq!(after.get(1, 0), 5.0);
        assert_eq!(after.get(2, 0), 7.0);
    }

    #[test]
    fn weights_clamp_to_zero_and_weight_max() {
        let ast = RuleAst::parse("x1 - y1").unwrap();
        let w = SparseMatrix::from_triplets(2, 2, vec![(1, 0, 1.0), (0, 1, 1.0)]);
        let mut cores = cores_from_grid(grid_from(&w, 2));
        let mut traces = TraceState::new(2);
        traces.x1[0] = 100.0; // pushes (1,0) far above the cap
        traces.y1[0] = 100.0; // pushes (0,1) far below zero
        apply_rule(&ast, &mut cores, 2, &traces, 2.5);
        let after = merged_weights(&cores);
        assert_eq!(after.get(1, 0), 2.5);
        assert_eq!(after.get(0, 1), 0.0);
        assert_eq!(after.nnz(), 2, "pattern must survive a zero clamp");
    }

    #[test]
    fn only_ee_entries_are_touched() {
        // 3 excitatory + 2 inhibitory neurons; entries outside the ee
        // block keep their values.
        let entries = vec![
            (1usize, 0usize, 2.0),
            (3, 0, 2.0),  // ie
            (0, 4, -3.0), // ei
            (4, 3, -1.0), // ii
        ];
        let w = SparseMatrix::from_triplets(5, 5, entries);
        let mut cores = cores_from_grid(grid_from(&w, 2));
        let mut traces = TraceState::new(3);
        traces.x1.fill(10.0);
        traces.y0.fill(true);
        let ast = RuleAst::parse("2^-1*x1").unwrap();
        apply_rule(&ast, &mut cores, 3, &traces, 50.0);
        let after = merged_weights(&cores);
        assert_eq!(after.get(1, 0), 7.0);
        assert_eq!(after.get(3, 0), 2.0);
        assert_eq!(after.get(0, 4), -3.0);
        assert_eq!(after.get(4, 3), -1.0);
    }

    #[test]
    fn sparsity_pattern_is_invariant_under_many_epochs() {
        let entries: Vec<(usize, usize, f64)> = (0..8)
            .flat_map(|i| [(i, (i + 1) % 8, 1.0), (i, (i + 3) % 8, 2.0)])
            .collect();
        let w = SparseMatrix::from_triplets(8, 8, entries);
        let mut cores = cores_from_grid(grid_from(&w, 3));
        let pattern_before: Vec<Vec<usize>> = cores
            .iter()
            .flat_map(|c| c.row_chunks.iter().map(|m| m.column_indices().to_vec()))
            .collect();
        let ast = RuleAst::parse("2^-2*x1*y0 - 2^-3*y0*w").unwrap();
        let mut engine = PlasticityEngine::new(
            ast,
            PlasticityConfig {
                tau_pre: 20.0,
                tau_post: 20.0,
                impulse: 1.0,
                epoch_length: 1,
                weight_max: 4.0,
            },
            8,
        );
        let mut rng_state = 0xABCDu64;
        for _ in 0..300 {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            let spikes: Vec<bool> = (0..8).map(|i| (rng_state >> i) & 1 == 1).collect();
            if engine.observe_step(&spikes) {
                engine.apply_epoch(&mut cores, 8);
            }
        }
        let pattern_after: Vec<Vec<usize>> = cores
            .iter()
            .flat_map(|c| c.row_chunks.iter().map(|m| m.column_indices().to_vec()))
            .collect();
        assert_eq!(pattern_before, pattern_after);
        for value in merged_weights(&cores).values() {
            assert!((0.0..=4.0).contains(value));
        }
    }

    #[test]
    fn epoch_length_gates_application() {
        let ast = RuleAst::parse("x0").unwrap();
        let mut engine = PlasticityEngine::new(
            ast,
            PlasticityConfig {
                tau_pre: 20.0,
                tau_post: 20.0,
                impulse: 1.0,
                epoch_length: 3,
                weight_max: 100.0,
            },
            1,
        );
        assert!(!engine.observe_step(&[true]));
        assert!(!engine.observe_step(&[false]));
        assert!(engine.observe_step(&[false]));
    }
}
