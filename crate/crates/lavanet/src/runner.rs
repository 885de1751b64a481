//! Multi-threaded core stepping.
//!
//! Cores are split into contiguous groups, one scoped thread per group;
//! the join at the end of each step is the barrier between timesteps.
//! Each thread writes only its own output slots and reads the shared
//! previous-step spike vector, so the result is identical to the
//! sequential order for any thread count.

use lavanet_core::engine::{step_core, CoreState, CoreStepper, NeuronConfig};

pub struct ThreadedStepper {
    threads: usize,
}

impl ThreadedStepper {
    pub fn new(threads: usize) -> Self {
        ThreadedStepper {
            threads: threads.max(1),
        }
    }
}

impl CoreStepper for ThreadedStepper {
    fn step_cores(
        &self,
        cores: &mut [CoreState],
        prev_spikes: &[bool],
        external: &[f64],
        cfg: &NeuronConfig,
        fired_out: &mut [Vec<usize>],
    ) {
        if self.threads == 1 || cores.len() <= 1 {
            for (core, out) in cores.iter_mut().zip(fired_out) {
                *out = step_core(core, prev_spikes, external, cfg);
            }
            return;
        }
        let group = cores.len().div_ceil(self.threads);
        std::thread::scope(|scope| {
            for (core_group, out_group) in cores.chunks_mut(group).zip(fired_out.chunks_mut(group))
            {
                scope.spawn(move || {
                    for (core, out) in core_group.iter_mut().zip(out_group) {
                        *out = step_core(core, prev_spikes, external, cfg);
                    }
                });
            }
        });
    }
}
