//! Color-line geometry in RGB space: total-least-squares line fits,
//! distance from the origin, and the least-squares convergence point of a
//! bundle of lines.

use serde::{Deserialize, Serialize};

use super::regression::MIN_REGION_PIXELS;
use crate::error::{Error, Result};
use crate::image::{LinearImage, RegionMask};
use crate::vec3::{dot, norm, reject, scale, sub, Vec3};

const POWER_ITERATIONS: usize = 200;
const POWER_TOLERANCE: f64 = 1e-12;
/// Covariance trace at or below which a point cloud is a single point.
const MIN_SPREAD: f64 = 1e-24;
/// Smallest eigenvalue of `Σ(I - d dᵀ)` accepted for a convergence solve.
pub const MIN_BUNDLE_EIGENVALUE: f64 = 1e-9;

/// A 3D line through `centroid` along unit `direction`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorLine {
    pub centroid: [f64; 3],
    pub direction: [f64; 3],
    /// Root-mean-square perpendicular distance of the fitted points.
    pub rms_residual: f64,
    pub n: usize,
}

impl ColorLine {
    /// Perpendicular distance from `point` to the line.
    pub fn distance_to(&self, point: [f64; 3]) -> f64 {
        norm(reject(sub(point, self.centroid), self.direction))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub point: [f64; 3],
    pub rms_line_distance: f64,
    pub lines: Vec<ColorLine>,
}

fn covariance(points: &[Vec3], mean: Vec3) -> [[f64; 3]; 3] {
    let mut c = [[0.0; 3]; 3];
    for p in points {
        let d = sub(*p, mean);
        for i in 0..3 {
            for j in i..3 {
                c[i][j] += d[i] * d[j];
            }
        }
    }
    let n = points.len() as f64;
    for i in 0..3 {
        for j in i..3 {
            c[i][j] /= n;
            c[j][i] = c[i][j];
        }
    }
    c
}

fn mat_vec(m: &[[f64; 3]; 3], v: Vec3) -> Vec3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

/// Principal eigenvector of a symmetric PSD matrix by power iteration.
fn principal_direction(c: &[[f64; 3]; 3]) -> Vec3 {
    // start from the largest column: C·e_i, which cannot be orthogonal to
    // the whole range of C
    let start = (0..3)
        .map(|i| [c[0][i], c[1][i], c[2][i]])
        .max_by(|a, b| norm(*a).total_cmp(&norm(*b)))
        .unwrap();
    let mut v = scale(start, 1.0 / norm(start));
    for _ in 0..POWER_ITERATIONS {
        let w = mat_vec(c, v);
        let len = norm(w);
        if len == 0.0 {
            break;
        }
        let next = scale(w, 1.0 / len);
        let change = norm(sub(next, v));
        v = next;
        if change < POWER_TOLERANCE {
            break;
        }
    }
    // sign convention: largest-magnitude component positive
    let big = (0..3).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap();
    if v[big] < 0.0 {
        v = scale(v, -1.0);
    }
    v
}

/// Total-least-squares line through `points` (at least two, not all equal).
pub fn fit_line_to_points(points: &[[f64; 3]]) -> Result<ColorLine> {
    if points.len() < 2 {
        return Err(Error::TooFewPixels {
            count: points.len(),
            min: 2,
        });
    }
    let n = points.len() as f64;
    let mut mean = [0.0; 3];
    for p in points {
        for k in 0..3 {
            mean[k] += p[k];
        }
    }
    let mean = scale(mean, 1.0 / n);
    let cov = covariance(points, mean);
    if !(cov[0][0] + cov[1][1] + cov[2][2] > MIN_SPREAD) {
        return Err(Error::FlatRegion);
    }
    let direction = principal_direction(&cov);
    let sq: f64 = points
        .iter()
        .map(|p| {
            let r = reject(sub(*p, mean), direction);
            dot(r, r)
        })
        .sum();
    Ok(ColorLine {
        centroid: mean,
        direction,
        rms_residual: (sq / n).sqrt(),
        n: points.len(),
    })
}

/// Fits the color line of the masked pixels.
pub fn fit_color_line(img: &LinearImage, mask: &RegionMask) -> Result<ColorLine> {
    let points = img.masked_pixels(mask)?;
    if points.len() < MIN_REGION_PIXELS {
        return Err(Error::TooFewPixels {
            count: points.len(),
            min: MIN_REGION_PIXELS,
        });
    }
    fit_line_to_points(&points)
}

/// Perpendicular distance of the line from the RGB origin.
pub fn line_origin_distance(line: &ColorLine) -> f64 {
    norm(reject(line.centroid, line.direction))
}

/// Eigenvalues of a symmetric 3x3 matrix, descending.
pub(crate) fn symmetric_eigenvalues(a: &[[f64; 3]; 3]) -> [f64; 3] {
    let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
    if p1 == 0.0 {
        let mut d = [a[0][0], a[1][1], a[2][2]];
        d.sort_by(|x, y| y.total_cmp(x));
        return d;
    }
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = *a;
    for (i, row) in b.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (a[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    [e1, 3.0 * q - e1 - e3, e3]
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: Vec3) -> Option<Vec3> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col] == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// Point minimizing the summed squared distance to every line.
///
/// Solves `[Σ (I - d dᵀ)] x = Σ (I - d dᵀ) c`. Bundles whose normal matrix
/// has an eigenvalue at or below [`MIN_BUNDLE_EIGENVALUE`] (parallel lines)
/// are rejected.
pub fn estimate_convergence_point(lines: &[ColorLine]) -> Result<ConvergenceReport> {
    if lines.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "a convergence point needs at least 2 lines, got {}",
            lines.len()
        )));
    }
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for line in lines {
        let d = line.direction;
        let mut proj = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                proj[i][j] = if i == j { 1.0 } else { 0.0 } - d[i] * d[j];
                a[i][j] += proj[i][j];
            }
        }
        let pc = mat_vec(&proj, line.centroid);
        for k in 0..3 {
            b[k] += pc[k];
        }
    }
    if !(symmetric_eigenvalues(&a)[2] > MIN_BUNDLE_EIGENVALUE) {
        return Err(Error::DegenerateBundle);
    }
    let point = solve3(a, b).ok_or(Error::DegenerateBundle)?;
    let sq: f64 = lines.iter().map(|l| l.distance_to(point).powi(2)).sum();
    Ok(ConvergenceReport {
        point,
        rms_line_distance: (sq / lines.len() as f64).sqrt(),
        lines: lines.to_vec(),
    })
}
