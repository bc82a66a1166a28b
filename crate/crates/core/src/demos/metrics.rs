use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::LabelImage;
use crate::color::{rg_chromaticity_pixel, rgb_to_hsv_pixel};
use crate::error::{Error, Result};
use crate::image::{check_same_dims, LinearImage, RegionMask};

/// Pixel-wise scores of a binary prediction against ground truth.
///
/// `g_quality = TP/(TP+FP+FN)` (Jaccard), `dr = TP/(TP+FN)` (recall),
/// `da = TP/(TP+FP)` (precision), `f` their harmonic mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegMetrics {
    pub g_quality: f64,
    pub dr: f64,
    pub da: f64,
    pub f: f64,
}

pub fn segmentation_metrics(pred: &RegionMask, gt: &RegionMask) -> Result<SegMetrics> {
    check_same_dims(gt.dims(), pred.dims())?;
    match (pred.is_empty(), gt.is_empty()) {
        (true, true) => {
            return Ok(SegMetrics {
                g_quality: 1.0,
                dr: 1.0,
                da: 1.0,
                f: 1.0,
            })
        }
        (true, false) | (false, true) => {
            return Ok(SegMetrics {
                g_quality: 0.0,
                dr: 0.0,
                da: 0.0,
                f: 0.0,
            })
        }
        _ => {}
    }
    let tp = pred.bits().iter().zip(gt.bits()).filter(|(p, g)| **p && **g).count() as f64;
    let fp = pred.count() as f64 - tp;
    let fn_ = gt.count() as f64 - tp;
    let dr = tp / (tp + fn_);
    let da = tp / (tp + fp);
    let f = if da + dr > 0.0 { 2.0 * da * dr / (da + dr) } else { 0.0 };
    Ok(SegMetrics {
        g_quality: tp / (tp + fp + fn_),
        dr,
        da,
        f,
    })
}

/// Scores the label whose mask best matches `gt` (highest `g_quality`,
/// lowest label on ties). Returns that label and its metrics.
pub fn best_label_metrics(labels: &LabelImage, gt: &RegionMask) -> Result<(u32, SegMetrics)> {
    let mut best: Option<(u32, SegMetrics)> = None;
    for l in 0..labels.k as u32 {
        let m = segmentation_metrics(&labels.mask_of(l), gt)?;
        if best.is_none_or(|(_, b)| m.g_quality > b.g_quality) {
            best = Some((l, m));
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("label image has no classes".into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChromaSpace {
    /// Channels: hue (circular), saturation, value.
    Hsv,
    /// Channels: r, g chromaticity.
    Rg,
}

fn population_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Population standard deviation of each chromaticity channel over the
/// masked pixels.
///
/// Hue is circular: it is embedded as `(cos 2πh, sin 2πh)` and the reported
/// spread is `sqrt(var_cos + var_sin)`, in unit-circle distance.
pub fn region_color_stddev(img: &LinearImage, mask: &RegionMask, space: ChromaSpace) -> Result<Vec<f64>> {
    let pixels = img.masked_pixels(mask)?;
    if pixels.len() < 2 {
        return Err(Error::TooFewPixels {
            count: pixels.len(),
            min: 2,
        });
    }
    Ok(match space {
        ChromaSpace::Hsv => {
            let hsv: Vec<[f64; 3]> = pixels.iter().map(|p| rgb_to_hsv_pixel(*p)).collect();
            let cos = population_std(hsv.iter().map(|c| (TAU * c[0]).cos()));
            let sin = population_std(hsv.iter().map(|c| (TAU * c[0]).sin()));
            vec![
                (cos * cos + sin * sin).sqrt(),
                population_std(hsv.iter().map(|c| c[1])),
                population_std(hsv.iter().map(|c| c[2])),
            ]
        }
        ChromaSpace::Rg => {
            let rg: Vec<[f64; 2]> = pixels.iter().map(|p| rg_chromaticity_pixel(*p)).collect();
            vec![
                population_std(rg.iter().map(|c| c[0])),
                population_std(rg.iter().map(|c| c[1])),
            ]
        }
    })
}
