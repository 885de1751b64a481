//! Exponentially decaying spike traces.
//!
//! `x1` tracks pre-synaptic spikes, `y1`/`y2` post-synaptic ones, all with
//! decay-then-impulse updates. `x0`/`y0` are 0/1 indicators of whether the
//! neuron spiked within the current learning epoch; they are cleared after
//! every rule application.

use alloc::vec;
use alloc::vec::Vec;

/// Per-neuron trace values over the plastic (excitatory) population.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceState {
    pub x1: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub x0: Vec<bool>,
    pub y0: Vec<bool>,
}

impl TraceState {
    pub fn new(n: usize) -> Self {
        TraceState {
            x1: vec![0.0; n],
            y1: vec![0.0; n],
            y2: vec![0.0; n],
            x0: vec![false; n],
            y0: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.x1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x1.is_empty()
    }

    /// Zero all traces and epoch flags.
    pub fn reset(&mut self) {
        self.x1.fill(0.0);
        self.y1.fill(0.0);
        self.y2.fill(0.0);
        self.clear_epoch_flags();
    }

    /// Clear the epoch spike indicators.
    pub fn clear_epoch_flags(&mut self) {
        self.x0.fill(false);
        self.y0.fill(false);
    }
}

/// One trace step: `x1 <- x1 * (1 - 1/tauPre) + impulse * [pre spiked]`,
/// `y1`/`y2` analogously with the post tau; epoch flags accumulate.
pub fn update_traces(
    state: &mut TraceState,
    pre_spikes: &[bool],
    post_spikes: &[bool],
    tau_pre: f64,
    tau_post: f64,
    impulse: f64,
) {
    debug_assert_eq!(pre_spikes.len(), state.len());
    debug_assert_eq!(post_spikes.len(), state.len());
    let pre_decay = 1.0 - 1.0 / tau_pre;
    let post_decay = 1.0 - 1.0 / tau_post;
    for (i, &spiked) in pre_spikes.iter().enumerate() {
        state.x1[i] = state.x1[i] * pre_decay + if spiked { impulse } else { 0.0 };
        state.x0[i] |= spiked;
    }
    for (i, &spiked) in post_spikes.iter().enumerate() {
        let kick = if spiked { impulse } else { 0.0 };
        state.y1[i] = state.y1[i] * post_decay + kick;
        state.y2[i] = state.y2[i] * post_decay + kick;
        state.y0[i] |= spiked;
    }
}
