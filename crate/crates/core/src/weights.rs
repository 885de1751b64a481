//! Reservoir weight initialization.
//!
//! All initializers produce a [`ReservoirWeights`] whose assembled matrix
//! follows Dale's law (excitatory source columns >= 0, inhibitory <= 0)
//! and has a zero diagonal. Each source neuron gets exactly
//! `conn_per_neuron` outgoing connections to distinct targets. Draws from
//! the normal distribution are taken as magnitudes; the sign comes from
//! the source pool.

use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use thiserror::Error;

use crate::math;
use crate::sparse::SparseMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum WeightError {
    #[error("invalid distribution parameters: {0}")]
    InvalidDistributionParams(&'static str),
    #[error("grid {width}x{height} does not cover {n_ex} excitatory neurons")]
    GridMismatch {
        width: usize,
        height: usize,
        n_ex: usize,
    },
    #[error("connections per neuron ({conn}) must be smaller than the reservoir ({available})")]
    TooManyConnections { conn: usize, available: usize },
    #[error("matrix shape {rows}x{cols} does not fit a reservoir of {expected} neurons")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("matrix violates Dale's law at ({row}, {col})")]
    DaleViolation { row: usize, col: usize },
    #[error("matrix has a self-connection at neuron {0}")]
    NonzeroDiagonal(usize),
}

/// Magnitude distribution for one source pool.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightDistribution {
    Constant { value: f64 },
    Normal { mean: f64, sigma: f64 },
    /// Parameters of the underlying normal; the distribution mean is
    /// `exp(mu + sigma^2 / 2)`.
    LogNormal { mu: f64, sigma: f64 },
}

impl WeightDistribution {
    /// Log-normal with the given target mean magnitude.
    pub fn lognormal_with_mean(mean: f64, sigma: f64) -> Self {
        WeightDistribution::LogNormal {
            mu: math::ln(mean) - sigma * sigma / 2.0,
            sigma,
        }
    }

    pub fn validate(&self) -> Result<(), WeightError> {
        match *self {
            WeightDistribution::Constant { value } => {
                if !value.is_finite() {
                    return Err(WeightError::InvalidDistributionParams(
                        "constant value must be finite",
                    ));
                }
            }
            WeightDistribution::Normal { sigma, .. }
            | WeightDistribution::LogNormal { sigma, .. } => {
                if sigma.is_nan() || sigma <= 0.0 {
                    return Err(WeightError::InvalidDistributionParams("sigma must be > 0"));
                }
            }
        }
        Ok(())
    }

    fn sample_magnitude(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            WeightDistribution::Constant { value } => math::abs(value),
            WeightDistribution::Normal { mean, sigma } => {
                let normal = rand_distr::Normal::new(mean, sigma).expect("validated");
                math::abs(normal.sample(rng))
            }
            WeightDistribution::LogNormal { mu, sigma } => {
                let normal = rand_distr::Normal::new(mu, sigma).expect("validated");
                math::exp(normal.sample(rng))
            }
        }
    }
}

/// The four reservoir blocks plus the assembled full matrix.
///
/// Block orientation is target <- source: `ee` = ex <- ex, `ei` = ex <- in,
/// `ie` = in <- ex, `ii` = in <- in.
#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirWeights {
    pub ex_size: usize,
    pub in_size: usize,
    pub ee: SparseMatrix,
    pub ei: SparseMatrix,
    pub ie: SparseMatrix,
    pub ii: SparseMatrix,
    pub assembled: SparseMatrix,
}

impl ReservoirWeights {
    /// Wrap an assembled matrix, checking shape, Dale's law and the zero
    /// diagonal, and extracting the pool blocks.
    pub fn from_matrix(assembled: SparseMatrix, ex_size: usize) -> Result<Self, WeightError> {
        if !assembled.is_square() || assembled.rows() < ex_size {
            return Err(WeightError::ShapeMismatch {
                rows: assembled.rows(),
                cols: assembled.cols(),
                expected: ex_size,
            });
        }
        let n = assembled.rows();
        let in_size = n - ex_size;
        let mut ee = Vec::new();
        let mut ei = Vec::new();
        let mut ie = Vec::new();
        let mut ii = Vec::new();
        for (i, j, v) in assembled.iter() {
            if i == j {
                return Err(WeightError::NonzeroDiagonal(i));
            }
            let excitatory_source = j < ex_size;
            if (excitatory_source && v < 0.0) || (!excitatory_source && v > 0.0) {
                return Err(WeightError::DaleViolation { row: i, col: j });
            }
            match (i < ex_size, excitatory_source) {
                (true, true) => ee.push((i, j, v)),
                (true, false) => ei.push((i, j - ex_size, v)),
                (false, true) => ie.push((i - ex_size, j, v)),
                (false, false) => ii.push((i - ex_size, j - ex_size, v)),
            }
        }
        Ok(ReservoirWeights {
            ex_size,
            in_size,
            ee: SparseMatrix::from_triplets(ex_size, ex_size, ee),
            ei: SparseMatrix::from_triplets(ex_size, in_size, ei),
            ie: SparseMatrix::from_triplets(in_size, ex_size, ie),
            ii: SparseMatrix::from_triplets(in_size, in_size, ii),
            assembled,
        })
    }

    pub fn reservoir_size(&self) -> usize {
        self.ex_size + self.in_size
    }
}

/// Sample `count` distinct targets in `0..n`, excluding `source`.
fn sample_targets(rng: &mut ChaCha8Rng, n: usize, source: usize, count: usize) -> Vec<usize> {
    rand::seq::index::sample(rng, n - 1, count)
        .into_iter()
        .map(|idx| if idx >= source { idx + 1 } else { idx })
        .collect()
}

fn build_reservoir(
    n_ex: usize,
    n_in: usize,
    triplets: Vec<(usize, usize, f64)>,
) -> ReservoirWeights {
    let n = n_ex + n_in;
    let assembled = SparseMatrix::from_triplets(n, n, triplets);
    ReservoirWeights::from_matrix(assembled, n_ex).expect("initializers construct valid matrices")
}

/// Random reservoir wiring: each source connects to `conn_per_neuron`
/// distinct targets anywhere in the reservoir, magnitudes drawn per pool.
pub fn init_random(
    n_ex: usize,
    n_in: usize,
    conn_per_neuron: usize,
    ex_dist: WeightDistribution,
    in_dist: WeightDistribution,
    rng: &mut ChaCha8Rng,
) -> Result<ReservoirWeights, WeightError> {
    ex_dist.validate()?;
    in_dist.validate()?;
    let n = n_ex + n_in;
    if conn_per_neuron >= n {
        return Err(WeightError::TooManyConnections {
            conn: conn_per_neuron,
            available: n,
        });
    }
    let mut triplets = Vec::with_capacity(n * conn_per_neuron);
    for source in 0..n {
        let excitatory = source < n_ex;
        let dist = if excitatory { &ex_dist } else { &in_dist };
        for target in sample_targets(rng, n, source, conn_per_neuron) {
            let magnitude = dist.sample_magnitude(rng);
            let value = if excitatory { magnitude } else { -magnitude };
            triplets.push((target, source, value));
        }
    }
    Ok(build_reservoir(n_ex, n_in, triplets))
}

/// Constant-magnitude wiring; inhibitory values get their Dale sign.
pub fn init_constant(
    n_ex: usize,
    n_in: usize,
    conn_per_neuron: usize,
    value_ex: f64,
    value_in: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ReservoirWeights, WeightError> {
    init_random(
        n_ex,
        n_in,
        conn_per_neuron,
        WeightDistribution::Constant { value: value_ex },
        WeightDistribution::Constant { value: value_in },
        rng,
    )
}

/// Smooth direction field over a 2D torus grid: bilinear interpolation of
/// unit vectors anchored at a coarse lattice of random angles.
pub fn direction_field(grid_w: usize, grid_h: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    const LATTICE: usize = 4;
    let tau = 2.0 * core::f64::consts::PI;
    let anchors: Vec<(f64, f64)> = (0..LATTICE * LATTICE)
        .map(|_| {
            let angle: f64 = rng.random::<f64>() * tau;
            (math::cos(angle), math::sin(angle))
        })
        .collect();
    let mut field = Vec::with_capacity(grid_w * grid_h);
    for y in 0..grid_h {
        for x in 0..grid_w {
            let fx = x as f64 * LATTICE as f64 / grid_w as f64;
            let fy = y as f64 * LATTICE as f64 / grid_h as f64;
            let (ix, tx) = (math::floor(fx) as usize % LATTICE, fx - math::floor(fx));
            let (iy, ty) = (math::floor(fy) as usize % LATTICE, fy - math::floor(fy));
            let (jx, jy) = ((ix + 1) % LATTICE, (iy + 1) % LATTICE);
            let mut vx = 0.0;
            let mut vy = 0.0;
            for &(ax, ay, w) in &[
                (ix, iy, (1.0 - tx) * (1.0 - ty)),
                (jx, iy, tx * (1.0 - ty)),
                (ix, jy, (1.0 - tx) * ty),
                (jx, jy, tx * ty),
            ] {
                let (cx, cy) = anchors[ay * LATTICE + ax];
                vx += w * cx;
                vy += w * cy;
            }
            field.push(math::atan2(vy, vx));
        }
    }
    field
}

/// Wrapped displacement from `from` to `to` on a ring of length `size`,
/// in [-size/2, size/2).
pub fn torus_delta(from: usize, to: usize, size: usize) -> f64 {
    let half = size as f64 / 2.0;
    let mut d = to as f64 - from as f64;
    while d < -half {
        d += size as f64;
    }
    while d >= half {
        d -= size as f64;
    }
    d
}

/// Sample `conn` distinct target cells (excluding the source cell) from an
/// isotropic Gaussian centered `shift` grid units along `theta` from
/// `(x, y)`, with torus wrapping. The profile widens if the neighbourhood
/// is exhausted.
#[allow(clippy::too_many_arguments)]
pub fn sample_displaced_targets(
    x: usize,
    y: usize,
    theta: f64,
    shift: f64,
    profile_sigma: f64,
    conn: usize,
    grid_w: usize,
    grid_h: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n = grid_w * grid_h;
    debug_assert!(conn < n);
    let source = y * grid_w + x;
    let cx = x as f64 + shift * math::cos(theta);
    let cy = y as f64 + shift * math::sin(theta);
    let mut sigma = profile_sigma;
    let mut seen = alloc::vec![false; n];
    let mut targets = Vec::with_capacity(conn);
    let mut attempts = 0usize;
    let normal = rand_distr::StandardNormal;
    while targets.len() < conn {
        let dx: f64 = normal.sample(rng);
        let dy: f64 = normal.sample(rng);
        let tx = (math::round(cx + sigma * dx) as i64).rem_euclid(grid_w as i64) as usize;
        let ty = (math::round(cy + sigma * dy) as i64).rem_euclid(grid_h as i64) as usize;
        let idx = ty * grid_w + tx;
        if idx != source && !seen[idx] {
            seen[idx] = true;
            targets.push(idx);
        }
        attempts += 1;
        if attempts > 50 * conn.max(8) {
            sigma *= 1.5;
            attempts = 0;
        }
    }
    targets
}

/// Anisotropic 2D wiring: every excitatory neuron connects within the
/// excitatory grid along its preferred direction; inhibitory neurons are
/// wired like [`init_random`]. Magnitudes are constant per pool.
#[allow(clippy::too_many_arguments)]
pub fn init_anisotropic(
    grid_w: usize,
    grid_h: usize,
    n_ex: usize,
    n_in: usize,
    conn_per_neuron: usize,
    shift_magnitude: f64,
    profile_sigma: f64,
    value_ex: f64,
    value_in: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ReservoirWeights, WeightError> {
    if grid_w * grid_h != n_ex {
        return Err(WeightError::GridMismatch {
            width: grid_w,
            height: grid_h,
            n_ex,
        });
    }
    if profile_sigma.is_nan() || profile_sigma <= 0.0 {
        return Err(WeightError::InvalidDistributionParams(
            "profile sigma must be > 0",
        ));
    }
    let n = n_ex + n_in;
    if conn_per_neuron >= n_ex || conn_per_neuron >= n {
        return Err(WeightError::TooManyConnections {
            conn: conn_per_neuron,
            available: n_ex.min(n),
        });
    }
    let field = direction_field(grid_w, grid_h, rng);
    let mut triplets = Vec::with_capacity(n * conn_per_neuron);
    for (source, &theta) in field.iter().enumerate() {
        let (x, y) = (source % grid_w, source / grid_w);
        let targets = sample_displaced_targets(
            x,
            y,
            theta,
            shift_magnitude,
            profile_sigma,
            conn_per_neuron,
            grid_w,
            grid_h,
            rng,
        );
        for target in targets {
            triplets.push((target, source, math::abs(value_ex)));
        }
    }
    for source in n_ex..n {
        for target in sample_targets(rng, n, source, conn_per_neuron) {
            triplets.push((target, source, -math::abs(value_in)));
        }
    }
    Ok(build_reservoir(n_ex, n_in, triplets))
}

/// Dale's law over an assembled matrix: excitatory source columns are
/// non-negative, inhibitory non-positive.
pub fn satisfies_dale(assembled: &SparseMatrix, ex_size: usize) -> bool {
    assembled
        .iter()
        .all(|(_, j, v)| if j < ex_size { v >= 0.0 } else { v <= 0.0 })
}

/// No stored diagonal entries.
pub fn zero_diagonal(assembled: &SparseMatrix) -> bool {
    assembled.iter().all(|(i, j, _)| i != j)
}
