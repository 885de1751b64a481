//! Spectral radius of a weight matrix.
//!
//! Small matrices are solved densely: reduction to upper Hessenberg form
//! followed by the Francis double-shift QR iteration (eigenvalues only).
//! Larger matrices use a power scheme that fits the last three Krylov
//! vectors to a quadratic, which stays correct when the dominant
//! eigenvalues are a complex pair.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::math;
use crate::sparse::SparseMatrix;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpectralError {
    #[error("spectral radius needs a square matrix, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
}

/// Matrices up to this size use the dense eigensolver.
const DENSE_CUTOFF: usize = 128;
/// Relative convergence tolerance of the iterative scheme.
const ITER_TOL: f64 = 1e-6;
const MAX_ITERS: usize = 20_000;

/// Largest absolute eigenvalue of a square matrix.
pub fn spectral_radius(m: &SparseMatrix) -> Result<f64, SpectralError> {
    if !m.is_square() {
        return Err(SpectralError::NonSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    if n == 0 || m.nnz() == 0 {
        return Ok(0.0);
    }
    if n <= DENSE_CUTOFF {
        let mut dense = vec![0.0; n * n];
        for (i, j, v) in m.iter() {
            dense[i * n + j] = v;
        }
        if let Some(radius) = dense_spectral_radius(&mut dense, n) {
            return Ok(radius);
        }
    }
    Ok(iterative_spectral_radius(m))
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        math::abs(a)
    } else {
        -math::abs(a)
    }
}

/// Reduce a row-major dense matrix to upper Hessenberg form by stabilized
/// elementary similarity transformations.
fn hessenberg(a: &mut [f64], n: usize) {
    for m in 1..n.saturating_sub(1) {
        let mut x = 0.0;
        let mut pivot = m;
        for i in m..n {
            if math::abs(a[i * n + m - 1]) > math::abs(x) {
                x = a[i * n + m - 1];
                pivot = i;
            }
        }
        if pivot != m {
            for j in (m - 1)..n {
                a.swap(pivot * n + j, m * n + j);
            }
            for i in 0..n {
                a.swap(i * n + pivot, i * n + m);
            }
        }
        if x != 0.0 {
            for i in (m + 1)..n {
                let mut y = a[i * n + m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i * n + m - 1] = 0.0;
                    for j in m..n {
                        a[i * n + j] -= y * a[m * n + j];
                    }
                    for row in 0..n {
                        a[row * n + m] += y * a[row * n + i];
                    }
                }
            }
        }
    }
    for i in 2..n {
        for j in 0..(i - 1) {
            a[i * n + j] = 0.0;
        }
    }
}

/// Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR.
/// Returns None if the iteration fails to converge.
fn hqr_eigenvalues(a: &mut [f64], n: usize) -> Option<Vec<(f64, f64)>> {
    let eps = f64::EPSILON;
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += math::abs(a[i * n + j]);
        }
    }
    if anorm == 0.0 {
        return Some(wr.into_iter().zip(wi).collect());
    }
    let mut nn = n - 1;
    let mut t = 0.0;
    'outer: loop {
        let mut its = 0;
        // Shared across the m-search and the QR sweep.
        let (mut p, mut q, mut r);
        loop {
            // Look for a negligible subdiagonal element.
            let mut l = nn;
            while l >= 1 {
                let mut s = math::abs(a[(l - 1) * n + l - 1]) + math::abs(a[l * n + l]);
                if s == 0.0 {
                    s = anorm;
                }
                if math::abs(a[l * n + l - 1]) <= eps * s {
                    a[l * n + l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nn * n + nn];
            if l == nn {
                // One real eigenvalue deflates.
                wr[nn] = x + t;
                wi[nn] = 0.0;
                if nn == 0 {
                    break 'outer;
                }
                nn -= 1;
                break;
            }
            let mut y = a[(nn - 1) * n + nn - 1];
            let mut w = a[nn * n + nn - 1] * a[(nn - 1) * n + nn];
            if l == nn - 1 {
                // A 2x2 block deflates: real pair or complex conjugates.
                p = 0.5 * (y - x);
                q = p * p + w;
                let mut z = math::sqrt(math::abs(q));
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[nn - 1] = x + z;
                    wr[nn] = wr[nn - 1];
                    if z != 0.0 {
                        wr[nn] = x - w / z;
                    }
                    wi[nn - 1] = 0.0;
                    wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = wr[nn - 1];
                    wi[nn] = z;
                    wi[nn - 1] = -z;
                }
                if nn <= 1 {
                    break 'outer;
                }
                nn -= 2;
                break;
            }
            if its == 30 {
                return None;
            }
            if its == 10 || its == 20 {
                // Exceptional shift.
                t += x;
                for i in 0..=nn {
                    a[i * n + i] -= x;
                }
                let s = math::abs(a[nn * n + nn - 1]) + math::abs(a[(nn - 1) * n + nn - 2]);
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            // Find two consecutive small subdiagonal elements.
            let mut m = nn - 2;
            loop {
                let z = a[m * n + m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[(m + 1) * n + m] + a[m * n + m + 1];
                q = a[(m + 1) * n + m + 1] - z - rr - ss;
                r = a[(m + 2) * n + m + 1];
                let scale = math::abs(p) + math::abs(q) + math::abs(r);
                p /= scale;
                q /= scale;
                r /= scale;
                if m == l {
                    break;
                }
                let u = math::abs(a[m * n + m - 1]) * (math::abs(q) + math::abs(r));
                let v = math::abs(p)
                    * (math::abs(a[(m - 1) * n + m - 1])
                        + math::abs(z)
                        + math::abs(a[(m + 1) * n + m + 1]));
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                a[i * n + i - 2] = 0.0;
                if i != m + 2 {
                    a[i * n + i - 3] = 0.0;
                }
            }
            // Double QR step on rows/columns l..=nn.
            for k in m..nn {
                if k != m {
                    p = a[k * n + k - 1];
                    q = a[(k + 1) * n + k - 1];
                    r = if k != nn - 1 {
                        a[(k + 2) * n + k - 1]
                    } else {
                        0.0
                    };
                    x = math::abs(p) + math::abs(q) + math::abs(r);
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign(math::sqrt(p * p + q * q + r * r), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k * n + k - 1] = -a[k * n + k - 1];
                        }
                    } else {
                        a[k * n + k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut pj = a[k * n + j] + q * a[(k + 1) * n + j];
                        if k != nn - 1 {
                            pj += r * a[(k + 2) * n + j];
                            a[(k + 2) * n + j] -= pj * z;
                        }
                        a[(k + 1) * n + j] -= pj * y;
                        a[k * n + j] -= pj * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        let mut pi = x * a[i * n + k] + y * a[i * n + k + 1];
                        if k != nn - 1 {
                            pi += z * a[i * n + k + 2];
                            a[i * n + k + 2] -= pi * r;
                        }
                        a[i * n + k + 1] -= pi * q;
                        a[i * n + k] -= pi;
                    }
                }
            }
        }
    }
    Some(wr.into_iter().zip(wi).collect())
}

fn dense_spectral_radius(a: &mut [f64], n: usize) -> Option<f64> {
    hessenberg(a, n);
    let eigenvalues = hqr_eigenvalues(a, n)?;
    Some(
        eigenvalues
            .into_iter()
            .map(|(re, im)| math::hypot(re, im))
            .fold(0.0, f64::max),
    )
}

fn matvec(m: &SparseMatrix, x: &[f64], out: &mut [f64]) {
    for (i, slot) in out.iter_mut().enumerate() {
        let (cols, vals) = m.row(i);
        let mut acc = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            acc += v * x[j];
        }
        *slot = acc;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

/// Power scheme over the last three Krylov vectors. Fitting
/// `A²b = p·Ab + q·b` and taking the largest root magnitude of
/// `t² - p t - q` handles a dominant complex pair, where plain power
/// iteration would oscillate.
fn iterative_spectral_radius(m: &SparseMatrix) -> f64 {
    let n = m.rows();
    let mut b = vec![0.0; n];
    // Deterministic, dense start vector.
    let mut state = 0x6A09_E667_F3BC_C908u64;
    for v in b.iter_mut() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        *v = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
    }
    let scale = norm(&b);
    b.iter_mut().for_each(|v| *v /= scale);

    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut estimate = 0.0;
    let mut stable = 0;
    for _ in 0..MAX_ITERS {
        matvec(m, &b, &mut y);
        let y_norm = norm(&y);
        if y_norm == 0.0 {
            return 0.0;
        }
        matvec(m, &y, &mut z);

        let yy = dot(&y, &y);
        let yb = dot(&y, &b);
        let bb = dot(&b, &b);
        let yz = dot(&y, &z);
        let bz = dot(&b, &z);
        let det = yy * bb - yb * yb;
        let radius = if det > 1e-14 * yy * bb {
            let p = (yz * bb - bz * yb) / det;
            let q = (bz * yy - yz * yb) / det;
            let disc = p * p / 4.0 + q;
            if disc >= 0.0 {
                let root = math::sqrt(disc);
                math::abs(p / 2.0 + root).max(math::abs(p / 2.0 - root))
            } else {
                math::sqrt(-q)
            }
        } else {
            // b is already an eigenvector direction.
            y_norm / norm(&b)
        };

        if math::abs(radius - estimate) <= ITER_TOL * radius.max(f64::MIN_POSITIVE) {
            stable += 1;
            if stable >= 2 {
                return radius;
            }
        } else {
            stable = 0;
        }
        estimate = radius;

        core::mem::swap(&mut b, &mut y);
        let scale = norm(&b);
        b.iter_mut().for_each(|v| *v /= scale);
    }
    estimate
}
