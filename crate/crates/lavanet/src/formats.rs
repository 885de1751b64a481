//! File formats: CSR weight snapshots, spike CSVs and parameter JSON.
//!
//! The CSR text format is `csr <rows> <cols> <nnz>` followed by one line
//! each of row pointers, column indices and values. Values are printed
//! with Rust's shortest round-trip formatting, so a written matrix reads
//! back bit-exactly and a weight snapshot can seed a new run unchanged.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use lavanet_core::params::{DerivedParameters, ParamValue, ParameterSet, KNOWN_KEYS};
use lavanet_core::probes::SpikeRaster;
use lavanet_core::sparse::{SparseError, SparseMatrix};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: {detail}")]
    Malformed { path: String, detail: String },
    #[error(transparent)]
    Structure(#[from] SparseError),
    #[error("config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config key `{key}`: unsupported value {value}")]
    UnsupportedValue { key: String, value: String },
}

fn malformed(path: &Path, detail: impl Into<String>) -> FormatError {
    FormatError::Malformed {
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

/// Render a matrix in the CSR text format.
pub fn format_csr(m: &SparseMatrix) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "csr {} {} {}", m.rows(), m.cols(), m.nnz());
    let mut line = |items: &mut dyn Iterator<Item = String>| {
        let joined = items.collect::<Vec<_>>().join(" ");
        text.push_str(&joined);
        text.push('\n');
    };
    line(&mut m.row_pointers().iter().map(|p| p.to_string()));
    line(&mut m.column_indices().iter().map(|c| c.to_string()));
    line(&mut m.values().iter().map(|v| format!("{v}")));
    text
}

/// Parse the CSR text format.
pub fn parse_csr(text: &str, origin: &Path) -> Result<SparseMatrix, FormatError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| malformed(origin, "empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "csr" {
        return Err(malformed(origin, format!("bad header `{header}`")));
    }
    let parse_usize = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| malformed(origin, format!("bad {what} `{s}`")))
    };
    let rows = parse_usize(fields[1], "row count")?;
    let cols = parse_usize(fields[2], "column count")?;
    let nnz = parse_usize(fields[3], "nnz")?;

    let mut next_line = |what: &str| {
        lines
            .next()
            .ok_or_else(|| malformed(origin, format!("missing {what} line")))
    };
    let row_ptr: Vec<usize> = next_line("row pointer")?
        .split_whitespace()
        .map(|s| parse_usize(s, "row pointer"))
        .collect::<Result<_, _>>()?;
    let col_idx: Vec<usize> = next_line("column index")?
        .split_whitespace()
        .map(|s| parse_usize(s, "column index"))
        .collect::<Result<_, _>>()?;
    let values: Vec<f64> = next_line("value")?
        .split_whitespace()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| malformed(origin, format!("bad value `{s}`")))
        })
        .collect::<Result<_, _>>()?;
    if values.len() != nnz || col_idx.len() != nnz {
        return Err(malformed(
            origin,
            format!("expected {nnz} entries, found {}", values.len()),
        ));
    }
    Ok(SparseMatrix::new(rows, cols, row_ptr, col_idx, values)?)
}

pub fn write_csr_file(path: &Path, m: &SparseMatrix) -> Result<(), FormatError> {
    fs::write(path, format_csr(m))?;
    Ok(())
}

pub fn read_csr_file(path: &Path) -> Result<SparseMatrix, FormatError> {
    let text = fs::read_to_string(path)?;
    parse_csr(&text, path)
}

/// One `step,neuronIndex` line per spike, sorted by step then neuron.
pub fn format_spike_lines(spikes: &[(usize, usize)]) -> String {
    let mut text = String::new();
    for &(step, neuron) in spikes {
        let _ = writeln!(text, "{step},{neuron}");
    }
    text
}

pub fn parse_spike_lines(text: &str, origin: &Path) -> Result<Vec<(usize, usize)>, FormatError> {
    text.lines()
        .enumerate()
        .map(|(number, line)| {
            let (step, neuron) = line
                .split_once(',')
                .ok_or_else(|| malformed(origin, format!("line {}: no comma", number + 1)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| malformed(origin, format!("line {}: bad number `{s}`", number + 1)))
            };
            Ok((parse(step)?, parse(neuron)?))
        })
        .collect()
}

/// `(step, neuron)` spike events, sorted by step then neuron.
pub type SpikeEvents = Vec<(usize, usize)>;

/// Split a reservoir raster into pool-local spike lists (excitatory
/// indices stay as-is, inhibitory are rebased to start at 0).
pub fn split_raster_by_pool(raster: &SpikeRaster, ex_size: usize) -> (SpikeEvents, SpikeEvents) {
    let mut ex = Vec::new();
    let mut inh = Vec::new();
    for &(step, neuron) in &raster.spikes {
        if neuron < ex_size {
            ex.push((step, neuron));
        } else {
            inh.push((step, neuron - ex_size));
        }
    }
    (ex, inh)
}

fn param_value_to_json(value: &ParamValue) -> serde_json::Value {
    match value {
        ParamValue::Bool(b) => serde_json::Value::Bool(*b),
        ParamValue::UInt(u) => serde_json::Value::from(*u),
        ParamValue::Float(f) => serde_json::Value::from(*f),
        ParamValue::Str(s) => serde_json::Value::from(s.clone()),
        ParamValue::Pair(a, b) => serde_json::Value::from(vec![*a, *b]),
    }
}

fn json_to_param_value(key: &str, value: &serde_json::Value) -> Result<ParamValue, FormatError> {
    match value {
        serde_json::Value::Bool(b) => Ok(ParamValue::Bool(*b)),
        serde_json::Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                Ok(ParamValue::UInt(u))
            } else if let Some(f) = n.as_f64() {
                Ok(ParamValue::Float(f))
            } else {
                Err(FormatError::UnsupportedValue {
                    key: key.to_string(),
                    value: n.to_string(),
                })
            }
        }
        serde_json::Value::String(s) => Ok(ParamValue::Str(s.clone())),
        serde_json::Value::Array(items) => {
            let pair: Option<Vec<u64>> = items.iter().map(serde_json::Value::as_u64).collect();
            match pair.as_deref() {
                Some([a, b]) => Ok(ParamValue::Pair(*a, *b)),
                _ => Err(FormatError::UnsupportedValue {
                    key: key.to_string(),
                    value: value.to_string(),
                }),
            }
        }
        other => Err(FormatError::UnsupportedValue {
            key: key.to_string(),
            value: other.to_string(),
        }),
    }
}

/// The resolved parameter set plus its derived values as one JSON
/// document. The `derived` key is informational and skipped on load.
pub fn parameters_to_json(
    params: &ParameterSet,
    derived: &DerivedParameters,
) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for &key in KNOWN_KEYS {
        let value = params.get(key).expect("every known key is readable");
        map.insert(key.to_string(), param_value_to_json(&value));
    }
    let windows: Vec<serde_json::Value> = derived
        .input_windows
        .iter()
        .map(|&(a, b)| serde_json::Value::from(vec![a as u64, b as u64]))
        .collect();
    let mut derived_map = serde_json::Map::new();
    derived_map.insert("reservoirSize".into(), derived.reservoir_size.into());
    derived_map.insert("totalSteps".into(), derived.total_steps.into());
    derived_map.insert("coreCount".into(), derived.core_count.into());
    derived_map.insert("chunkCount".into(), derived.chunk_count.into());
    derived_map.insert("stepsPerInput".into(), derived.steps_per_input.into());
    derived_map.insert("inputWindows".into(), serde_json::Value::Array(windows));
    map.insert("derived".into(), serde_json::Value::Object(derived_map));
    serde_json::Value::Object(map)
}

pub fn write_parameters_json(
    path: &Path,
    params: &ParameterSet,
    derived: &DerivedParameters,
) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(&parameters_to_json(params, derived))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Parse a JSON object of parameter overrides. Keys must match parameter
/// names exactly; the reserved `derived` key is ignored so dumped
/// parameter files can be reloaded as configs.
pub fn parse_overrides(text: &str) -> Result<Vec<(String, ParamValue)>, FormatError> {
    let document: serde_json::Value = serde_json::from_str(text)?;
    let object = document.as_object().ok_or_else(|| {
        FormatError::UnsupportedValue {
            key: "<root>".to_string(),
            value: "expected a JSON object of parameter overrides".to_string(),
        }
    })?;
    let mut overrides = Vec::with_capacity(object.len());
    for (key, value) in object {
        if key == "derived" {
            continue;
        }
        overrides.push((key.clone(), json_to_param_value(key, value)?));
    }
    Ok(overrides)
}

pub fn read_config_file(path: &Path) -> Result<Vec<(String, ParamValue)>, FormatError> {
    let text = fs::read_to_string(path)?;
    parse_overrides(&text)
}
