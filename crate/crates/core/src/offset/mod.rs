//! Offset estimation and correction.
//!
//! For pixels of one material, `ρ_j` is (approximately) linear in the
//! brightness sum `Σρ`, and the line's intercept estimates the offset
//! component `ε_j`. Correction maps `ρ` to `(ρ - ε) / (1 - ε)` per channel,
//! which moves that material's color line through the origin while keeping
//! white at (1, 1, 1).
//!
//! Because `ρ_1 + ρ_2 + ρ_3 ≡ Σρ`, the three OLS slopes always sum to 1 and
//! the intercepts to 0. The regression therefore recovers the point where
//! the material's line crosses the plane `Σρ = 0`, not the ambient term
//! itself. Any point on the line removes the offset for that material; for
//! a bundle of materials use [`estimate_convergence_point`] and measure how
//! far the lines actually are from sharing a point.

mod geometry;
mod regression;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{check_same_dims, LinearImage, Rect, RegionMask};

pub use geometry::{
    estimate_convergence_point, fit_color_line, fit_line_to_points, line_origin_distance, ColorLine,
    ConvergenceReport, MIN_BUNDLE_EIGENVALUE,
};
pub use regression::{
    fit_channel_line, fit_channel_line_theil_sen, ChannelFit, MIN_REGION_PIXELS, MIN_REGRESSOR_VARIANCE,
    THEIL_SEN_MAX_PAIRS, THEIL_SEN_SEED,
};

/// A validated offset vector: finite, every component `< 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Offset([f64; 3]);

impl Offset {
    pub const ZERO: Offset = Offset([0.0; 3]);

    pub fn new(eps: [f64; 3]) -> Result<Self> {
        for (channel, &value) in eps.iter().enumerate() {
            if !(value.is_finite() && value < 1.0) {
                return Err(Error::InvalidEpsilon { channel, value });
            }
        }
        Ok(Self(eps))
    }

    pub fn get(&self) -> [f64; 3] {
        self.0
    }

    /// Hex digest of the exact bit patterns, for cache keys.
    pub fn digest(&self) -> String {
        self.0.iter().map(|v| format!("{:016x}", v.to_bits())).collect()
    }
}

impl TryFrom<[f64; 3]> for Offset {
    type Error = Error;

    fn try_from(eps: [f64; 3]) -> Result<Self> {
        Offset::new(eps)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Ols,
    TheilSen,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ols" => Ok(Method::Ols),
            "theil-sen" => Ok(Method::TheilSen),
            _ => Err(Error::InvalidParameter(format!(
                "unknown method {s:?}, expected ols or theil-sen"
            ))),
        }
    }
}

/// Where an estimate came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Region {
    Rect(Rect),
    Mask { mask_digest: String, count: usize },
}

impl Region {
    fn of(mask: &RegionMask) -> Self {
        match mask.rect() {
            Some(r) => Region::Rect(r),
            None => Region::Mask {
                mask_digest: mask.digest(),
                count: mask.count(),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
enum Space {
    #[default]
    #[serde(rename = "linear-rgb")]
    LinearRgb,
}

/// Offset estimate with its per-channel fits.
///
/// Serializes to the sidecar format
/// `{"epsilon":[..], "fits":[..], "region":{..}, "space":"linear-rgb", "method":".."}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Epsilon {
    #[serde(rename = "epsilon")]
    pub eps: [f64; 3],
    pub fits: [ChannelFit; 3],
    pub region: Region,
    #[serde(default)]
    space: Space,
    pub method: Method,
}

impl Epsilon {
    pub fn offset(&self) -> Result<Offset> {
        Offset::new(self.eps)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("epsilon serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let e: Epsilon = serde_json::from_str(s)?;
        e.offset()?;
        Ok(e)
    }
}

/// Per-channel regression of `ρ_j` on `Σρ` over the masked pixels (OLS).
pub fn estimate_epsilon(img: &LinearImage, mask: &RegionMask) -> Result<Epsilon> {
    estimate_epsilon_with(img, mask, Method::Ols)
}

pub fn estimate_epsilon_with(img: &LinearImage, mask: &RegionMask, method: Method) -> Result<Epsilon> {
    let pixels = img.masked_pixels(mask)?;
    if pixels.len() < MIN_REGION_PIXELS {
        return Err(Error::TooFewPixels {
            count: pixels.len(),
            min: MIN_REGION_PIXELS,
        });
    }
    let sums: Vec<f64> = pixels.iter().map(|p| p[0] + p[1] + p[2]).collect();
    let pairs = match method {
        Method::Ols => Vec::new(),
        Method::TheilSen => regression::theil_sen_pairs(pixels.len(), THEIL_SEN_SEED),
    };
    let mut fits = Vec::with_capacity(3);
    for j in 0..3 {
        let rho: Vec<f64> = pixels.iter().map(|p| p[j]).collect();
        fits.push(match method {
            Method::Ols => fit_channel_line(&sums, &rho)?,
            Method::TheilSen => regression::fit_channel_line_theil_sen_pairs(&sums, &rho, &pairs)?,
        });
    }
    let fits: [ChannelFit; 3] = fits.try_into().expect("three channels");
    let eps = fits.map(|f| f.intercept);
    Offset::new(eps)?;
    Ok(Epsilon {
        eps,
        fits,
        region: Region::of(mask),
        space: Space::LinearRgb,
        method,
    })
}

/// `(ρ - ε) / (1 - ε)` per channel. Results are not clamped.
pub fn correct(img: &LinearImage, offset: &Offset) -> LinearImage {
    let e = offset.get();
    let denom = e.map(|v| 1.0 - v);
    img.map_pixels(|p| [0, 1, 2].map(|k| (p[k] - e[k]) / denom[k]))
}

/// Inverse of [`correct`]: `ρ̃·(1 - ε) + ε`, evaluated as `ρ̃ - (ρ̃ - 1)·ε`
/// so that 0 maps to exactly `ε` and 1 to exactly 1.
pub fn uncorrect(img: &LinearImage, offset: &Offset) -> LinearImage {
    let e = offset.get();
    img.map_pixels(|p| [0, 1, 2].map(|k| p[k] - (p[k] - 1.0) * e[k]))
}

/// Per-pixel difference `img - ambient`; negatives are kept.
pub fn subtract_ambient(img: &LinearImage, ambient: &LinearImage) -> Result<LinearImage> {
    check_same_dims(img.dims(), ambient.dims())?;
    let data: Vec<f64> = img
        .as_slice()
        .par_iter()
        .zip(ambient.as_slice())
        .map(|(a, b)| a - b)
        .collect();
    LinearImage::from_vec(img.width(), img.height(), data)
}
