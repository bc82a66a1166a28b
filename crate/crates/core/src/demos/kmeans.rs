use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::color::rgb_to_hsv_pixel;
use crate::error::{Error, Result};
use crate::image::{LinearImage, RegionMask};

pub const KMEANS_MAX_ITERATIONS: usize = 100;
/// Largest center displacement that counts as converged.
pub const KMEANS_TOLERANCE: f64 = 1e-6;

/// Per-pixel class index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelImage {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub k: usize,
}

impl LabelImage {
    pub fn mask_of(&self, label: u32) -> RegionMask {
        RegionMask::from_bits(self.width, self.height, self.labels.iter().map(|&l| l == label).collect())
            .expect("labels sized from image")
    }
}

/// `(s·cos 2πh, s·sin 2πh)`: hue-saturation on the unit disc, so hues just
/// either side of red stay neighbours.
pub fn hue_saturation_features(img: &LinearImage) -> Vec<[f64; 2]> {
    img.pixels()
        .map(|p| {
            let [h, s, _] = rgb_to_hsv_pixel(p);
            let a = TAU * h;
            [s * a.cos(), s * a.sin()]
        })
        .collect()
}

#[inline]
fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Nearest center, ties to the lowest index.
#[inline]
fn nearest(f: [f64; 2], centers: &[[f64; 2]]) -> (usize, f64) {
    let mut best = (0, dist2(f, centers[0]));
    for (i, c) in centers.iter().enumerate().skip(1) {
        let d = dist2(f, *c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn count_distinct(features: &[[f64; 2]], cap: usize) -> usize {
    let mut keys: Vec<(u64, u64)> = features
        .iter()
        .map(|f| ((f[0] + 0.0).to_bits(), (f[1] + 0.0).to_bits()))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len().min(cap)
}

/// Farthest-point seeding: the first center is feature `seed mod n`, each
/// next one the feature farthest from all chosen centers (lowest index on
/// ties).
fn seed_centers(features: &[[f64; 2]], k: usize, seed: u64) -> Vec<[f64; 2]> {
    let n = features.len();
    let mut centers = vec![features[(seed % n as u64) as usize]];
    let mut min_d: Vec<f64> = features.iter().map(|f| dist2(*f, centers[0])).collect();
    while centers.len() < k {
        let mut far = 0;
        for i in 1..n {
            if min_d[i] > min_d[far] {
                far = i;
            }
        }
        let c = features[far];
        centers.push(c);
        for (d, f) in min_d.iter_mut().zip(features) {
            *d = d.min(dist2(*f, c));
        }
    }
    centers
}

/// Lloyd's k-means on hue-saturation features.
///
/// Deterministic for a given `(img, k, seed)`: assignment runs in parallel
/// but every reduction is accumulated in row-major order.
pub fn kmeans_segment(img: &LinearImage, k: usize, seed: u64) -> Result<LabelImage> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be >= 2, got {k}")));
    }
    if img.is_empty() {
        return Err(Error::InvalidParameter("empty image".into()));
    }
    let features = hue_saturation_features(img);
    let distinct = count_distinct(&features, k);
    if distinct < k {
        return Err(Error::DegenerateK { k, distinct });
    }

    let mut centers = seed_centers(&features, k, seed);
    for _ in 0..KMEANS_MAX_ITERATIONS {
        let assign: Vec<(usize, f64)> = features.par_iter().map(|f| nearest(*f, &centers)).collect();

        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (f, &(c, _)) in features.iter().zip(&assign) {
            sums[c][0] += f[0];
            sums[c][1] += f[1];
            counts[c] += 1;
        }
        let mut next: Vec<[f64; 2]> = (0..k)
            .map(|c| {
                if counts[c] == 0 {
                    centers[c]
                } else {
                    [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64]
                }
            })
            .collect();
        // reseed empty clusters at the point worst served by its center
        let mut taken = vec![false; features.len()];
        for c in (0..k).filter(|&c| counts[c] == 0) {
            let far = (0..features.len())
                .filter(|&i| !taken[i])
                .fold(None::<usize>, |best, i| match best {
                    Some(b) if assign[b].1 >= assign[i].1 => Some(b),
                    _ => Some(i),
                })
                .expect("more features than clusters");
            taken[far] = true;
            next[c] = features[far];
        }

        let moved = centers
            .iter()
            .zip(&next)
            .map(|(a, b)| dist2(*a, *b).sqrt())
            .fold(0.0, f64::max);
        centers = next;
        if moved < KMEANS_TOLERANCE {
            break;
        }
    }
    let assign: Vec<(usize, f64)> = features.par_iter().map(|f| nearest(*f, &centers)).collect();

    Ok(LabelImage {
        width: img.width(),
        height: img.height(),
        labels: assign.iter().map(|&(c, _)| c as u32).collect(),
        k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_colors(w: usize, h: usize) -> LinearImage {
        LinearImage::from_fn(w, h, |x, y| {
            let shade = 0.3 + 0.6 * y as f64 / h as f64;
            if x < w / 2 {
                [0.8 * shade, 0.2 * shade, 0.1 * shade]
            } else {
                [0.1 * shade, 0.3 * shade, 0.8 * shade]
            }
        })
    }

    #[test]
    fn separates_two_hues_exactly() {
        let img = two_colors(32, 32);
        let seg = kmeans_segment(&img, 2, 0).unwrap();
        let left = seg.labels[0];
        for y in 0..32 {
            for x in 0..32 {
                let l = seg.labels[y * 32 + x];
                assert_eq!(l == left, x < 16);
            }
        }
    }

    #[test]
    fn constant_image_is_degenerate() {
        let img = LinearImage::from_fn(8, 8, |_, _| [0.2, 0.4, 0.6]);
        assert!(matches!(
            kmeans_segment(&img, 2, 3),
            Err(Error::DegenerateK { k: 2, distinct: 1 })
        ));
    }

    #[test]
    fn deterministic_for_seed() {
        let img = two_colors(20, 12);
        assert_eq!(kmeans_segment(&img, 3, 17).unwrap(), kmeans_segment(&img, 3, 17).unwrap());
    }

    #[test]
    fn k_below_two_rejected() {
        assert!(kmeans_segment(&two_colors(4, 4), 1, 0).is_err());
    }

    #[test]
    fn hue_wraps_around_red() {
        // hues 0.99 and 0.01 are near each other on the disc
        let f = hue_saturation_features(
            &LinearImage::from_pixels(2, 1, &[[1.0, 0.0, 0.06], [1.0, 0.06, 0.0]]).unwrap(),
        );
        assert!(dist2(f[0], f[1]) < 0.02);
    }

    #[test]
    fn labels_are_below_k() {
        let img = LinearImage::from_fn(16, 16, |x, y| [x as f64 / 16.0, y as f64 / 16.0, 0.5]);
        let seg = kmeans_segment(&img, 5, 1).unwrap();
        assert!(seg.labels.iter().all(|&l| (l as usize) < seg.k));
    }
}
