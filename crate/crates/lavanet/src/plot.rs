//! Spike raster rendering as dependency-free SVG.
//!
//! Spikes are the only `<circle>` elements, trial boundaries the only
//! `class="trial"` lines and input windows the only `class="input"`
//! rects, so emitted plots can be checked by parsing them back.

use std::fmt::Write as _;

use lavanet_core::params::{DerivedParameters, ParameterSet};

use crate::experiment::RunResults;
use crate::formats::split_raster_by_pool;

pub const EX_COLOR: &str = "#d62728";
pub const IN_COLOR: &str = "#1f77b4";
pub const OUT_COLOR: &str = "#9467bd";

/// One horizontal band of the raster.
pub struct PoolSeries {
    pub label: String,
    pub size: usize,
    pub color: &'static str,
    pub class: &'static str,
    /// `(step, pool-local neuron)` pairs.
    pub spikes: Vec<(usize, usize)>,
}

pub struct RasterSpec {
    pub width: usize,
    pub height: usize,
    pub total_steps: usize,
    pub steps_per_trial: usize,
    pub trials: usize,
    /// Within-trial input windows, shaded in every trial.
    pub input_windows: Vec<(usize, usize)>,
    pub pools: Vec<PoolSeries>,
}

pub fn render_svg(spec: &RasterSpec) -> String {
    let (width, height) = (spec.width as f64, spec.height as f64);
    let (left, right, top, bottom) = (52.0, 14.0, 14.0, 34.0);
    let plot_w = (width - left - right).max(1.0);
    let plot_h = (height - top - bottom).max(1.0);
    let total_neurons: usize = spec.pools.iter().map(|p| p.size).sum();
    let steps = spec.total_steps.max(1) as f64;
    let rows = total_neurons.max(1) as f64;
    let sx = |step: f64| left + step / steps * plot_w;
    let sy = |row: f64| top + row / rows * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">",
        w = spec.width,
        h = spec.height
    );
    let _ = writeln!(
        svg,
        "  <rect class=\"bg\" x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>",
        w = spec.width,
        h = spec.height
    );

    // Shaded input windows, one band per trial and window.
    for trial in 0..spec.trials {
        let base = (trial * spec.steps_per_trial) as f64;
        for &(a, b) in &spec.input_windows {
            let x = sx(base + a as f64);
            let w = sx(base + b as f64) - x;
            let _ = writeln!(
                svg,
                "  <rect class=\"input\" x=\"{x:.2}\" y=\"{top}\" width=\"{w:.2}\" height=\"{plot_h:.2}\" fill=\"#f5a623\" opacity=\"0.18\"/>"
            );
        }
    }

    // Trial boundaries at the end of every trial.
    for trial in 1..=spec.trials {
        let x = sx((trial * spec.steps_per_trial) as f64);
        let _ = writeln!(
            svg,
            "  <line class=\"trial\" x1=\"{x:.2}\" y1=\"{top}\" x2=\"{x:.2}\" y2=\"{y2:.2}\" stroke=\"#999\" stroke-width=\"1\" stroke-dasharray=\"4,3\"/>",
            y2 = top + plot_h
        );
    }

    // Spikes, band by band.
    let mut offset = 0usize;
    for pool in &spec.pools {
        for &(step, neuron) in &pool.spikes {
            let cx = sx(step as f64 + 0.5);
            let cy = sy((offset + neuron) as f64 + 0.5);
            let _ = writeln!(
                svg,
                "  <circle class=\"{}\" cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"1.3\" fill=\"{}\"/>",
                pool.class, pool.color
            );
        }
        let label_y = sy(offset as f64 + pool.size as f64 / 2.0);
        let _ = writeln!(
            svg,
            "  <text x=\"6\" y=\"{label_y:.2}\" font-size=\"11\" fill=\"{}\" font-family=\"sans-serif\">{}</text>",
            pool.color, pool.label
        );
        offset += pool.size;
        if offset < total_neurons {
            let y = sy(offset as f64);
            let _ = writeln!(
                svg,
                "  <line class=\"pool-split\" x1=\"{left}\" y1=\"{y:.2}\" x2=\"{x2:.2}\" y2=\"{y:.2}\" stroke=\"#ccc\" stroke-width=\"0.5\"/>",
                x2 = left + plot_w
            );
        }
    }

    // Frame and step labels.
    let _ = writeln!(
        svg,
        "  <rect class=\"frame\" x=\"{left}\" y=\"{top}\" width=\"{plot_w:.2}\" height=\"{plot_h:.2}\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>"
    );
    for step in [0, spec.total_steps / 2, spec.total_steps] {
        let x = sx(step as f64);
        let _ = writeln!(
            svg,
            "  <text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"11\" fill=\"#333\" text-anchor=\"middle\" font-family=\"sans-serif\">{step}</text>",
            y = top + plot_h + 16.0
        );
    }
    let _ = writeln!(
        svg,
        "  <text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"11\" fill=\"#333\" text-anchor=\"middle\" font-family=\"sans-serif\">step</text>",
        x = left + plot_w / 2.0,
        y = top + plot_h + 30.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Raster of a finished run: excitatory and inhibitory bands, plus the
/// output band when pooling ran.
pub fn render_run_raster(
    params: &ParameterSet,
    derived: &DerivedParameters,
    results: &RunResults,
) -> String {
    let (ex_spikes, in_spikes) = split_raster_by_pool(&results.raster, params.reservoir_ex_size);
    let mut pools = vec![
        PoolSeries {
            label: "ex".to_string(),
            size: params.reservoir_ex_size,
            color: EX_COLOR,
            class: "ex",
            spikes: ex_spikes,
        },
        PoolSeries {
            label: "in".to_string(),
            size: params.reservoir_in_size,
            color: IN_COLOR,
            class: "in",
            spikes: in_spikes,
        },
    ];
    if let Some(out_raster) = &results.out_raster {
        pools.push(PoolSeries {
            label: "out".to_string(),
            size: out_raster.neurons,
            color: OUT_COLOR,
            class: "out",
            spikes: out_raster.spikes.clone(),
        });
    }
    render_svg(&RasterSpec {
        width: params.plot_dimensions.0,
        height: params.plot_dimensions.1,
        total_steps: derived.total_steps,
        steps_per_trial: params.steps_per_trial,
        trials: params.trials,
        input_windows: derived.input_windows.clone(),
        pools,
    })
}
