//! A two-neuron motif driven through the full engine (two cores, chunked
//! weights, generators) must match a straight-line scalar reimplementation
//! of the dynamics, traces and rule updates.

use lavanet_core::engine::{GeneratorKind, NeuronConfig, Network, SequentialStepper, SpikeGenerator};
use lavanet_core::partition::{compute_layout, split};
use lavanet_core::plasticity::{PlasticityConfig, PlasticityEngine, RuleAst};
use lavanet_core::sim::Simulation;
use lavanet_core::sparse::SparseMatrix;
use lavanet_core::stimulus::InputPlan;

const RULE: &str = "2^-2*x1*y0 - 2^-2*y1*x0 + 2^-4*x1*y1*y0 - 2^-3*y0*w*w";
const STEPS: usize = 50;
const W0: f64 = 10.0;
const W_MAX: f64 = 20.0;
const DRIVE: f64 = 5000.0;
const TAU_PRE: f64 = 20.0;
const TAU_POST: f64 = 20.0;
const IMPULSE: f64 = 1.0;

/// Deterministic drive windows for the pre (neuron 0) and post (neuron 1)
/// sides; structured so both neurons spike at staggered times.
const PRE_WINDOWS: [(usize, usize); 3] = [(0, 8), (15, 25), (34, 46)];
const POST_WINDOWS: [(usize, usize); 3] = [(2, 6), (18, 30), (40, 44)];

fn engine_weight_trajectory() -> Vec<f64> {
    let w = SparseMatrix::from_triplets(2, 2, vec![(1, 0, W0)]);
    let layout = compute_layout(2, 1).unwrap();
    let grid = split(&w, &layout).unwrap();
    let config = NeuronConfig {
        voltage_tau: 100.0,
        current_tau: 5.0,
        threshold: 1200.0,
        refractory_delay: 2,
    };
    let generators = vec![
        SpikeGenerator::new(
            GeneratorKind::Input,
            1,
            0,
            vec![0],
            PRE_WINDOWS.to_vec(),
            1.0,
            DRIVE,
        ),
        SpikeGenerator::new(
            GeneratorKind::Input,
            1,
            1,
            vec![1],
            POST_WINDOWS.to_vec(),
            1.0,
            DRIVE,
        ),
    ];
    let ast = RuleAst::parse(RULE).unwrap();
    let plasticity = PlasticityEngine::new(
        ast,
        PlasticityConfig {
            tau_pre: TAU_PRE,
            tau_post: TAU_POST,
            impulse: IMPULSE,
            epoch_length: 1,
            weight_max: W_MAX,
        },
        2,
    );
    let mut sim = Simulation {
        network: Network::new(grid, config, generators),
        plasticity: Some(plasticity),
        readout: None,
        input_plan: InputPlan::empty(1),
        ex_size: 2,
    };
    let mut trajectory = Vec::with_capacity(STEPS);
    for _ in 0..STEPS {
        sim.step(&SequentialStepper);
        trajectory.push(sim.weights_snapshot().get(1, 0));
    }
    trajectory
}

/// The same 50 steps with plain scalars: CUBA updates, trace decay,
/// rule evaluation and clamping written out longhand.
fn scalar_oracle_trajectory() -> Vec<f64> {
    let in_window = |windows: &[(usize, usize)], t: usize| {
        windows.iter().any(|&(a, b)| t >= a && t < b)
    };
    let (dv, dc) = (1.0 - 1.0 / 100.0, 1.0 - 1.0 / 5.0);
    let (dpre, dpost) = (1.0 - 1.0 / TAU_PRE, 1.0 - 1.0 / TAU_POST);
    let threshold = 1200.0;

    let (mut v0, mut u0, mut r0) = (0.0f64, 0.0f64, 0usize);
    let (mut v1, mut u1, mut r1) = (0.0f64, 0.0f64, 0usize);
    let (mut s0_prev, mut s1_prev) = (false, false);
    let (mut x1_0, mut y1_1, mut y2_1) = (0.0f64, 0.0f64, 0.0f64);
    // Traces the rule never reads for this synapse still decay, but only
    // pre traces of neuron 0 and post traces of neuron 1 matter.
    let (mut x0_0, mut y0_1) = (false, false);
    let mut w = W0;
    let mut trajectory = Vec::with_capacity(STEPS);

    for t in 0..STEPS {
        let e0 = if in_window(&PRE_WINDOWS, t) { DRIVE } else { 0.0 };
        let e1 = if in_window(&POST_WINDOWS, t) { DRIVE } else { 0.0 };
        let syn1 = if s0_prev { w } else { 0.0 };
        let _ = s1_prev;

        u0 = u0 * dc + e0;
        let s0 = if r0 > 0 {
            r0 -= 1;
            false
        } else {
            v0 = v0 * dv + u0;
            if v0 >= threshold {
                v0 = 0.0;
                r0 = 2;
                true
            } else {
                false
            }
        };
        u1 = u1 * dc + syn1 + e1;
        let s1 = if r1 > 0 {
            r1 -= 1;
            false
        } else {
            v1 = v1 * dv + u1;
            if v1 >= threshold {
                v1 = 0.0;
                r1 = 2;
                true
            } else {
                false
            }
        };

        // Trace update from this step's spikes, then the rule (epoch 1).
        x1_0 = x1_0 * dpre + if s0 { IMPULSE } else { 0.0 };
        y1_1 = y1_1 * dpost + if s1 { IMPULSE } else { 0.0 };
        y2_1 = y2_1 * dpost + if s1 { IMPULSE } else { 0.0 };
        x0_0 |= s0;
        y0_1 |= s1;

        let x0 = if x0_0 { 1.0 } else { 0.0 };
        let y0 = if y0_1 { 1.0 } else { 0.0 };
        let delta = 0.25 * x1_0 * y0 - 0.25 * y1_1 * x0 + 0.0625 * x1_0 * y1_1 * y0
            - 0.125 * y0 * w * w;
        w = (w + delta).clamp(0.0, W_MAX);
        x0_0 = false;
        y0_1 = false;

        s0_prev = s0;
        s1_prev = s1;
        trajectory.push(w);
    }
    trajectory
}

#[test]
fn engine_matches_scalar_reimplementation_per_step() {
    let engine = engine_weight_trajectory();
    let oracle = scalar_oracle_trajectory();
    assert_eq!(engine.len(), oracle.len());
    for (t, (a, b)) in engine.iter().zip(&oracle).enumerate() {
        assert!(
            (a - b).abs() <= 1e-9,
            "step {t}: engine {a} vs oracle {b}"
        );
    }
    // The motif must actually exercise the rule.
    let moved = oracle.iter().any(|&w| (w - W0).abs() > 0.5);
    assert!(moved, "weight never moved; drive pattern too weak");
}
