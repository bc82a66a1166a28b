//! Bi-illuminant matte scene simulator.
//!
//! A pixel of material `S` receives direct light `L_d` attenuated by its
//! visibility `mu` and incidence angle `theta`, plus unattenuated environment
//! light `L_e`:
//!
//! ```text
//! L(λ)  = mu·cos(theta)·L_d(λ) + L_e(λ)
//! ρ_k   = Σ L(λ) S(λ) Q_k(λ) Δλ
//!       = phi_k + delta_k
//! ```
//!
//! `phi` (direct part) scales with `mu·cos(theta)` and so traces a line
//! through the origin; `delta` (environment part) is a constant per material
//! that shifts the whole line. All spectra share one sampled grid and
//! integrals use the rectangle rule, which keeps every linearity relation
//! exact up to rounding.

use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{make_mask_rect, ChannelImage, LinearImage, Rect, RegionMask};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    /// First wavelength, nm.
    pub start: f64,
    /// Sample spacing, nm.
    pub step: f64,
    pub count: usize,
}

impl Default for SpectralGrid {
    fn default() -> Self {
        Self {
            start: 400.0,
            step: 10.0,
            count: 31,
        }
    }
}

impl SpectralGrid {
    pub fn wavelength(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn wavelengths(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|i| self.wavelength(i))
    }

    fn validate(&self) -> Result<()> {
        if self.count == 0 || !(self.step > 0.0) || !self.start.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid spectral grid {self:?}")));
        }
        Ok(())
    }
}

/// Non-negative spectral samples on a [`SpectralGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: SpectralGrid,
    samples: Vec<f64>,
}

impl Spectrum {
    pub fn new(grid: SpectralGrid, samples: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if samples.len() != grid.count {
            return Err(Error::GridMismatch);
        }
        if let Some(&bad) = samples.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::OutOfRange {
                name: "spectral sample",
                value: bad,
            });
        }
        Ok(Self { grid, samples })
    }

    pub fn constant(grid: SpectralGrid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.count])
    }

    pub fn from_fn(grid: SpectralGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.wavelengths().map(f).collect())
    }

    /// `peak · exp(-(λ - center)² / 2σ²)`.
    pub fn gaussian(grid: SpectralGrid, center: f64, sigma: f64, peak: f64) -> Result<Self> {
        Self::from_fn(grid, |l| peak * (-(l - center).powi(2) / (2.0 * sigma * sigma)).exp())
    }

    pub fn grid(&self) -> SpectralGrid {
        self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        Self::new(self.grid, self.samples.iter().map(|v| v * alpha).collect())
    }

    fn check_grid(&self, other: &Spectrum) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Long / medium / short sensor sensitivities.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorSet {
    pub bands: [Spectrum; 3],
}

impl SensorSet {
    pub fn new(bands: [Spectrum; 3]) -> Result<Self> {
        bands[0].check_grid(&bands[1])?;
        bands[0].check_grid(&bands[2])?;
        Ok(Self { bands })
    }

    /// Gaussian bands at 610 / 550 / 465 nm, σ = 30 nm, each scaled to unit
    /// area on the grid so that a flat unit spectrum responds (1, 1, 1).
    pub fn default_for(grid: SpectralGrid) -> Result<Self> {
        let band = |center: f64| -> Result<Spectrum> {
            let raw = Spectrum::gaussian(grid, center, 30.0, 1.0)?;
            let area: f64 = raw.samples.iter().sum::<f64>() * grid.step;
            raw.scaled(1.0 / area)
        };
        Self::new([band(610.0)?, band(550.0)?, band(465.0)?])
    }

    pub fn grid(&self) -> SpectralGrid {
        self.bands[0].grid
    }
}

/// Rectangle-rule sensor response `ρ_k = Σ c(λ) Q_k(λ) Δλ`.
pub fn sensor_response(c: &Spectrum, sensors: &SensorSet) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (k, q) in sensors.bands.iter().enumerate() {
        c.check_grid(q)?;
        let sum: f64 = c.samples.iter().zip(&q.samples).map(|(a, b)| a * b).sum();
        out[k] = sum * c.grid.step;
    }
    Ok(out)
}

/// Light leaving a matte surface: `C(λ) = L(λ) S(λ)`.
pub fn reflect(light: &Spectrum, reflectance: &Spectrum) -> Result<Spectrum> {
    light.check_grid(reflectance)?;
    if let Some(&bad) = reflectance.samples.iter().find(|&&s| s > 1.0) {
        return Err(Error::OutOfRange {
            name: "reflectance",
            value: bad,
        });
    }
    Ok(Spectrum {
        grid: light.grid,
        samples: light
            .samples
            .iter()
            .zip(&reflectance.samples)
            .map(|(l, s)| l * s)
            .collect(),
    })
}

fn check_mu(mu: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::OutOfRange { name: "mu", value: mu });
    }
    Ok(())
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=FRAC_PI_2).contains(&theta) {
        return Err(Error::OutOfRange {
            name: "theta",
            value: theta,
        });
    }
    Ok(())
}

/// Light arriving at a surface point: `mu·cos(theta)·L_d + L_e`.
pub fn incident_light(direct: &Spectrum, env: &Spectrum, mu: f64, theta: f64) -> Result<Spectrum> {
    direct.check_grid(env)?;
    check_mu(mu)?;
    check_theta(theta)?;
    let w = mu * theta.cos();
    Ok(Spectrum {
        grid: direct.grid,
        samples: direct
            .samples
            .iter()
            .zip(&env.samples)
            .map(|(d, e)| w * d + e)
            .collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelNoise {
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct Patch {
    pub mask: RegionMask,
    pub reflectance: Spectrum,
}

/// Complete description of a synthetic scene.
#[derive(Clone, Debug)]
pub struct SceneSpec {
    width: usize,
    height: usize,
    direct_light: Spectrum,
    env_light: Spectrum,
    sensors: SensorSet,
    patches: Vec<Patch>,
    mu_map: ChannelImage,
    theta_map: ChannelImage,
    noise: Option<PixelNoise>,
}

impl SceneSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        width: usize,
        height: usize,
        direct_light: Spectrum,
        env_light: Spectrum,
        sensors: SensorSet,
        patches: Vec<Patch>,
        mu_map: ChannelImage,
        theta_map: ChannelImage,
        noise: Option<PixelNoise>,
    ) -> Result<Self> {
        direct_light.check_grid(&env_light)?;
        direct_light.check_grid(&sensors.bands[0])?;
        for (name, map) in [("mu map", &mu_map), ("theta map", &theta_map)] {
            if map.dims() != (width, height) {
                return Err(Error::Scene(format!(
                    "{name} is {:?}, scene is {:?}",
                    map.dims(),
                    (width, height)
                )));
            }
        }
        for &mu in mu_map.as_slice() {
            check_mu(mu)?;
        }
        for &theta in theta_map.as_slice() {
            check_theta(theta)?;
        }
        let mut owner = vec![false; width * height];
        for (i, patch) in patches.iter().enumerate() {
            patch.reflectance.check_grid(&direct_light)?;
            if let Some(&bad) = patch.reflectance.samples.iter().find(|&&s| s > 1.0) {
                return Err(Error::OutOfRange {
                    name: "reflectance",
                    value: bad,
                });
            }
            if patch.mask.dims() != (width, height) {
                return Err(Error::Scene(format!("patch {i} mask has wrong dimensions")));
            }
            for p in patch.mask.indices() {
                if owner[p] {
                    return Err(Error::Scene(format!(
                        "patch {i} overlaps another patch at pixel {p}"
                    )));
                }
                owner[p] = true;
            }
        }
        if let Some(n) = noise {
            if !(n.sigma >= 0.0 && n.sigma.is_finite()) {
                return Err(Error::OutOfRange {
                    name: "noise sigma",
                    value: n.sigma,
                });
            }
        }
        Ok(Self {
            width,
            height,
            direct_light,
            env_light,
            sensors,
            patches,
            mu_map,
            theta_map,
            noise,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn direct_light(&self) -> &Spectrum {
        &self.direct_light
    }

    pub fn env_light(&self) -> &Spectrum {
        &self.env_light
    }

    pub fn sensors(&self) -> &SensorSet {
        &self.sensors
    }

    pub fn mu_map(&self) -> &ChannelImage {
        &self.mu_map
    }

    pub fn theta_map(&self) -> &ChannelImage {
        &self.theta_map
    }

    pub fn noise(&self) -> Option<PixelNoise> {
        self.noise
    }

    pub fn with_direct_light(mut self, light: Spectrum) -> Result<Self> {
        light.check_grid(&self.env_light)?;
        self.direct_light = light;
        Ok(self)
    }

    pub fn with_env_light(mut self, light: Spectrum) -> Result<Self> {
        light.check_grid(&self.direct_light)?;
        self.env_light = light;
        Ok(self)
    }

    pub fn with_mu_map(mut self, mu_map: ChannelImage) -> Result<Self> {
        if mu_map.dims() != (self.width, self.height) {
            return Err(Error::Scene("mu map has wrong dimensions".into()));
        }
        for &mu in mu_map.as_slice() {
            check_mu(mu)?;
        }
        self.mu_map = mu_map;
        Ok(self)
    }

    pub fn with_noise(mut self, noise: Option<PixelNoise>) -> Self {
        self.noise = noise;
        self
    }
}

/// Per-patch closed-form responses: `direct` is the full-sun response
/// (mu·cos(theta) = 1, no ambient), `ambient` is the patch's `delta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchResponse {
    pub direct: [f64; 3],
    pub ambient: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct RenderedScene {
    /// `phi + delta`, plus pixel noise when the scene asks for it.
    pub image: LinearImage,
    pub phi: LinearImage,
    pub delta: LinearImage,
    /// Patch index per pixel.
    pub labels: Vec<u32>,
    pub responses: Vec<PatchResponse>,
}

impl RenderedScene {
    /// Mask of the pixels of patch `index`.
    pub fn patch_mask(&self, index: usize) -> RegionMask {
        let (w, h) = self.image.dims();
        RegionMask::from_fn(w, h, |x, y| self.labels[y * w + x] as usize == index)
    }
}

pub fn render(scene: &SceneSpec) -> Result<RenderedScene> {
    let (w, h) = (scene.width, scene.height);
    let responses = scene
        .patches
        .iter()
        .map(|p| {
            Ok(PatchResponse {
                direct: sensor_response(&reflect(&scene.direct_light, &p.reflectance)?, &scene.sensors)?,
                ambient: sensor_response(&reflect(&scene.env_light, &p.reflectance)?, &scene.sensors)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut labels = vec![u32::MAX; w * h];
    for (i, patch) in scene.patches.iter().enumerate() {
        for p in patch.mask.indices() {
            labels[p] = i as u32;
        }
    }
    if let Some(p) = labels.iter().position(|&l| l == u32::MAX) {
        return Err(Error::Scene(format!(
            "pixel ({}, {}) is not covered by any patch",
            p % w,
            p / w
        )));
    }

    let mut phi = Vec::with_capacity(w * h * 3);
    let mut delta = Vec::with_capacity(w * h * 3);
    let mut image = Vec::with_capacity(w * h * 3);
    let mu = scene.mu_map.as_slice();
    let theta = scene.theta_map.as_slice();
    for p in 0..w * h {
        let r = &responses[labels[p] as usize];
        let shade = mu[p] * theta[p].cos();
        for k in 0..3 {
            let f = shade * r.direct[k];
            phi.push(f);
            delta.push(r.ambient[k]);
            image.push(f + r.ambient[k]);
        }
    }
    if let Some(noise) = scene.noise.filter(|n| n.sigma > 0.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let normal = Normal::new(0.0, noise.sigma)
            .map_err(|e| Error::InvalidParameter(format!("noise: {e}")))?;
        for v in image.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }

    Ok(RenderedScene {
        image: LinearImage::from_vec(w, h, image)?,
        phi: LinearImage::from_vec(w, h, phi)?,
        delta: LinearImage::from_vec(w, h, delta)?,
        labels,
        responses,
    })
}

// ---------------------------------------------------------------------------
// Serializable scene documents and the ColorChecker preset.

/// Visibility (`mu`) layout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "kebab-case")]
pub enum MuPattern {
    /// Fully lit, `mu ≡ 1`.
    None,
    /// Umbra everywhere, `mu ≡ 0`.
    Full,
    /// Penumbra band: `mu` is 0 before `start`, ramps linearly to 1 at `end`
    /// and stays 1 after. `start`/`end` are fractions of the image extent
    /// along `axis` measured between the first and last pixel centres.
    HalfGradient { axis: Axis, start: f64, end: f64 },
    Constant { value: f64 },
}

impl MuPattern {
    /// Full-width horizontal ramp from 0 at the left column to 1 at the right.
    pub fn ramp() -> Self {
        MuPattern::HalfGradient {
            axis: Axis::X,
            start: 0.0,
            end: 1.0,
        }
    }

    pub fn to_map(&self, width: usize, height: usize) -> Result<ChannelImage> {
        match *self {
            MuPattern::None => Ok(ChannelImage::constant(width, height, 1.0)),
            MuPattern::Full => Ok(ChannelImage::constant(width, height, 0.0)),
            MuPattern::Constant { value } => {
                check_mu(value)?;
                Ok(ChannelImage::constant(width, height, value))
            }
            MuPattern::HalfGradient { axis, start, end } => {
                if !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&end) || start >= end {
                    return Err(Error::Scene(format!(
                        "penumbra band must satisfy 0 <= start < end <= 1, got [{start}, {end}]"
                    )));
                }
                let extent = match axis {
                    Axis::X => width,
                    Axis::Y => height,
                };
                let span = extent.saturating_sub(1).max(1) as f64;
                Ok(ChannelImage::from_fn(width, height, |x, y| {
                    let pos = match axis {
                        Axis::X => x,
                        Axis::Y => y,
                    } as f64
                        / span;
                    ((pos - start) / (end - start)).clamp(0.0, 1.0)
                }))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchDocument {
    pub rect: Rect,
    pub reflectance: Vec<f64>,
}

/// JSON form of a [`SceneSpec`].
///
/// ```json
/// {
///   "width": 192, "height": 128,
///   "grid": {"start": 400.0, "step": 10.0, "count": 31},
///   "direct_light": [...], "env_light": [...],
///   "sensors": null,
///   "patches": [{"rect": {"x": 0, "y": 0, "w": 32, "h": 32}, "reflectance": [...]}],
///   "mu": {"pattern": "half-gradient", "axis": "x", "start": 0.0, "end": 1.0},
///   "theta": 0.0,
///   "noise": {"sigma": 0.005, "seed": 7}
/// }
/// ```
///
/// `sensors: null` selects [`SensorSet::default_for`]. Patch rectangles must
/// be disjoint and tile the image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneDocument {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub grid: SpectralGrid,
    pub direct_light: Vec<f64>,
    pub env_light: Vec<f64>,
    #[serde(default)]
    pub sensors: Option<[Vec<f64>; 3]>,
    pub patches: Vec<PatchDocument>,
    pub mu: MuPattern,
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub noise: Option<PixelNoise>,
}

impl SceneDocument {
    pub fn build(&self) -> Result<SceneSpec> {
        let (w, h) = (self.width, self.height);
        if w == 0 || h == 0 {
            return Err(Error::Scene("scene must have at least one pixel".into()));
        }
        let sensors = match &self.sensors {
            Some([a, b, c]) => SensorSet::new([
                Spectrum::new(self.grid, a.clone())?,
                Spectrum::new(self.grid, b.clone())?,
                Spectrum::new(self.grid, c.clone())?,
            ])?,
            None => SensorSet::default_for(self.grid)?,
        };
        let patches = self
            .patches
            .iter()
            .map(|p| {
                let clipped = p.rect.clip(w, h);
                if clipped != Some(p.rect) {
                    return Err(Error::Scene(format!("patch rect {:?} leaves the image", p.rect)));
                }
                Ok(Patch {
                    mask: make_mask_rect(p.rect, w, h)?,
                    reflectance: Spectrum::new(self.grid, p.reflectance.clone())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        check_theta(self.theta)?;
        SceneSpec::new(
            w,
            h,
            Spectrum::new(self.grid, self.direct_light.clone())?,
            Spectrum::new(self.grid, self.env_light.clone())?,
            sensors,
            patches,
            self.mu.to_map(w, h)?,
            ChannelImage::constant(w, h, self.theta),
            self.noise,
        )
    }
}

/// One Gaussian bump of a synthetic reflectance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

/// Smooth synthetic reflectance: `base + Σ amplitude·exp(-(λ-c)²/2w²)`,
/// clamped to [0, 1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReflectanceModel {
    pub name: &'static str,
    pub base: f64,
    pub bumps: &'static [Bump],
}

impl ReflectanceModel {
    pub fn spectrum(&self, grid: SpectralGrid) -> Result<Spectrum> {
        Spectrum::from_fn(grid, |l| {
            let bumps: f64 = self
                .bumps
                .iter()
                .map(|b| b.amplitude * (-(l - b.center).powi(2) / (2.0 * b.width * b.width)).exp())
                .sum();
            (self.base + bumps).clamp(0.0, 1.0)
        })
    }
}

const fn bump(center: f64, width: f64, amplitude: f64) -> Bump {
    Bump {
        center,
        width,
        amplitude,
    }
}

const fn patch(name: &'static str, base: f64, bumps: &'static [Bump]) -> ReflectanceModel {
    ReflectanceModel { name, base, bumps }
}

/// Built-in 24-entry reflectance table, row-major in a 4x6 chart. Hues and
/// lightness loosely follow the classic ColorChecker; the spectra are
/// synthetic.
pub const COLORCHECKER: [ReflectanceModel; 24] = [
    patch("dark skin", 0.10, &[bump(620.0, 60.0, 0.25)]),
    patch("light skin", 0.30, &[bump(620.0, 70.0, 0.35)]),
    patch("blue sky", 0.15, &[bump(470.0, 50.0, 0.20)]),
    patch("foliage", 0.06, &[bump(550.0, 35.0, 0.15)]),
    patch("blue flower", 0.20, &[bump(450.0, 40.0, 0.30), bump(680.0, 30.0, 0.15)]),
    patch("bluish green", 0.15, &[bump(510.0, 50.0, 0.50)]),
    patch("orange", 0.05, &[bump(640.0, 50.0, 0.80)]),
    patch("purplish blue", 0.08, &[bump(450.0, 35.0, 0.40)]),
    patch("moderate red", 0.10, &[bump(650.0, 40.0, 0.60)]),
    patch("purple", 0.05, &[bump(420.0, 30.0, 0.25), bump(690.0, 40.0, 0.30)]),
    patch("yellow green", 0.05, &[bump(560.0, 45.0, 0.60)]),
    patch("orange yellow", 0.05, &[bump(610.0, 60.0, 0.80)]),
    patch("blue", 0.04, &[bump(450.0, 30.0, 0.35)]),
    patch("green", 0.05, &[bump(530.0, 35.0, 0.35)]),
    patch("red", 0.04, &[bump(660.0, 35.0, 0.60)]),
    patch("yellow", 0.05, &[bump(600.0, 70.0, 0.85)]),
    patch("magenta", 0.10, &[bump(430.0, 35.0, 0.40), bump(680.0, 45.0, 0.60)]),
    patch("cyan", 0.05, &[bump(490.0, 40.0, 0.45)]),
    patch("white", 0.90, &[]),
    patch("neutral 8", 0.59, &[]),
    patch("neutral 6.5", 0.36, &[]),
    patch("neutral 5", 0.19, &[]),
    patch("neutral 3.5", 0.09, &[]),
    patch("black", 0.03, &[]),
];

/// Chart geometry: `rows x cols` equal tiles covering `width x height`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChartLayout {
    pub width: usize,
    pub height: usize,
    pub rows: usize,
    pub cols: usize,
}

impl ChartLayout {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            rows: 4,
            cols: 6,
        }
    }

    /// Tile rectangles in row-major order. Edges are distributed with
    /// integer division so the tiles exactly cover the image.
    pub fn rects(&self) -> Result<Vec<Rect>> {
        if self.width < self.cols || self.height < self.rows {
            return Err(Error::Scene(format!(
                "{}x{} image cannot hold a {}x{} chart with patches of at least 1 px",
                self.width, self.height, self.cols, self.rows
            )));
        }
        let edge = |i: usize, n: usize, extent: usize| i * extent / n;
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let (x0, x1) = (edge(c, self.cols, self.width), edge(c + 1, self.cols, self.width));
                let (y0, y1) = (edge(r, self.rows, self.height), edge(r + 1, self.rows, self.height));
                out.push(Rect::new(x0, y0, x1 - x0, y1 - y0));
            }
        }
        Ok(out)
    }
}

/// Lighting for the ColorChecker preset.
#[derive(Clone, Debug)]
pub struct ChartLighting {
    pub direct_light: Spectrum,
    pub env_light: Spectrum,
    pub sensors: SensorSet,
    pub occlusion: MuPattern,
    pub theta: f64,
    pub noise: Option<PixelNoise>,
}

impl ChartLighting {
    /// Warm direct sun `0.75·(1 + 0.3·(λ-550)/150)` and a bluish sky
    /// `ambient·(1 - 0.6·(λ-550)/150)`; `ambient = 0` removes environment
    /// light entirely.
    pub fn daylight(ambient: f64, occlusion: MuPattern) -> Result<Self> {
        let grid = SpectralGrid::default();
        Ok(Self {
            direct_light: Spectrum::from_fn(grid, |l| 0.75 * (1.0 + 0.3 * (l - 550.0) / 150.0))?,
            env_light: Spectrum::from_fn(grid, |l| ambient * (1.0 - 0.6 * (l - 550.0) / 150.0))?,
            sensors: SensorSet::default_for(grid)?,
            occlusion,
            theta: 0.0,
            noise: None,
        })
    }
}

pub fn colorchecker_document(lighting: &ChartLighting, layout: ChartLayout) -> Result<SceneDocument> {
    let grid = lighting.direct_light.grid();
    let patches = layout
        .rects()?
        .into_iter()
        .zip(COLORCHECKER.iter())
        .map(|(rect, model)| {
            Ok(PatchDocument {
                rect,
                reflectance: model.spectrum(grid)?.samples,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SceneDocument {
        width: layout.width,
        height: layout.height,
        grid,
        direct_light: lighting.direct_light.samples.clone(),
        env_light: lighting.env_light.samples.clone(),
        sensors: Some(lighting.sensors.bands.clone().map(|b| b.samples)),
        patches,
        mu: lighting.occlusion,
        theta: lighting.theta,
        noise: lighting.noise,
    })
}

/// 24-patch chart scene, 4 rows by 6 columns.
pub fn make_colorchecker_scene(lighting: &ChartLighting, layout: ChartLayout) -> Result<SceneSpec> {
    colorchecker_document(lighting, layout)?.build()
}

/// Non-spectral single-material test image: pixel `i` (row-major) is
/// `s_i·direction + offset` with `s` spaced evenly over `s_range`, plus
/// optional Gaussian noise.
pub fn color_line_image(
    width: usize,
    height: usize,
    direction: [f64; 3],
    offset: [f64; 3],
    s_range: (f64, f64),
    noise: Option<PixelNoise>,
) -> Result<LinearImage> {
    let n = width * height;
    if n == 0 {
        return Err(Error::InvalidParameter("empty image".into()));
    }
    let step = if n > 1 {
        (s_range.1 - s_range.0) / (n - 1) as f64
    } else {
        0.0
    };
    let mut data = Vec::with_capacity(n * 3);
    for i in 0..n {
        let s = s_range.0 + step * i as f64;
        for k in 0..3 {
            data.push(s * direction[k] + offset[k]);
        }
    }
    if let Some(noise) = noise.filter(|n| n.sigma > 0.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let normal = Normal::new(0.0, noise.sigma)
            .map_err(|e| Error::InvalidParameter(format!("noise: {e}")))?;
        for v in data.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    LinearImage::from_vec(width, height, data)
}

/// Road-like two-material scene: a vertical band of `COLORCHECKER[0]`
/// ("dark skin") between verges of `COLORCHECKER[1]` ("light skin"), under
/// daylight with a shadow ramp along y (umbra at the top, fully lit from
/// `shadow_end` of the height on).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoadScene {
    pub width: usize,
    pub height: usize,
    pub ambient: f64,
    pub shadow_end: f64,
}

impl Default for RoadScene {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            ambient: 0.3,
            shadow_end: 0.5,
        }
    }
}

impl RoadScene {
    /// The road band: the middle `3/8` of the width, full height.
    pub fn road_rect(&self) -> Rect {
        let x0 = self.width * 5 / 16;
        Rect::new(x0, 0, self.width * 11 / 16 - x0, self.height)
    }

    pub fn document(&self) -> Result<SceneDocument> {
        let road = self.road_rect();
        if road.w == 0 || road.x == 0 {
            return Err(Error::Scene(format!("{}px is too narrow for a road scene", self.width)));
        }
        let mu = MuPattern::HalfGradient {
            axis: Axis::Y,
            start: 0.0,
            end: self.shadow_end,
        };
        let lighting = ChartLighting::daylight(self.ambient, mu)?;
        let grid = lighting.direct_light.grid();
        let verge = COLORCHECKER[1].spectrum(grid)?.samples;
        let right = road.x + road.w;
        Ok(SceneDocument {
            width: self.width,
            height: self.height,
            grid,
            direct_light: lighting.direct_light.samples,
            env_light: lighting.env_light.samples,
            sensors: Some(lighting.sensors.bands.map(|b| b.samples)),
            patches: vec![
                PatchDocument {
                    rect: Rect::new(0, 0, road.x, self.height),
                    reflectance: verge.clone(),
                },
                PatchDocument {
                    rect: road,
                    reflectance: COLORCHECKER[0].spectrum(grid)?.samples,
                },
                PatchDocument {
                    rect: Rect::new(right, 0, self.width - right, self.height),
                    reflectance: verge,
                },
            ],
            mu,
            theta: 0.0,
            noise: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_3;

    fn grid() -> SpectralGrid {
        SpectralGrid::default()
    }

    fn chart(ambient: f64, occlusion: MuPattern) -> SceneSpec {
        make_colorchecker_scene(
            &ChartLighting::daylight(ambient, occlusion).unwrap(),
            ChartLayout::new(60, 40),
        )
        .unwrap()
    }

    #[test]
    fn zero_spectrum_has_zero_response() {
        let s = SensorSet::default_for(grid()).unwrap();
        let c = Spectrum::constant(grid(), 0.0).unwrap();
        assert_eq!(sensor_response(&c, &s).unwrap(), [0.0; 3]);
    }

    #[test]
    fn boxcar_response_counts_samples() {
        let g = grid();
        // 600..=700 nm contains 11 grid samples
        let boxcar = Spectrum::from_fn(g, |l| if l >= 600.0 { 1.0 } else { 0.0 }).unwrap();
        let zero = Spectrum::constant(g, 0.0).unwrap();
        let sensors = SensorSet::new([boxcar, zero.clone(), zero]).unwrap();
        let ones = Spectrum::constant(g, 1.0).unwrap();
        let rho = sensor_response(&ones, &sensors).unwrap();
        assert_eq!(rho, [110.0, 0.0, 0.0]);
    }

    #[test]
    fn response_is_exactly_linear_in_doubling() {
        let s = SensorSet::default_for(grid()).unwrap();
        let c = Spectrum::from_fn(grid(), |l| 0.3 + (l / 100.0).sin().abs()).unwrap();
        let a = sensor_response(&c, &s).unwrap();
        let b = sensor_response(&c.scaled(2.0).unwrap(), &s).unwrap();
        assert_eq!(b, a.map(|v| 2.0 * v));
    }

    #[test]
    fn default_sensors_have_unit_area() {
        let s = SensorSet::default_for(grid()).unwrap();
        let ones = Spectrum::constant(grid(), 1.0).unwrap();
        for v in sensor_response(&ones, &s).unwrap() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let other = SpectralGrid {
            start: 380.0,
            ..grid()
        };
        let a = Spectrum::constant(grid(), 1.0).unwrap();
        let b = Spectrum::constant(other, 1.0).unwrap();
        assert!(matches!(reflect(&a, &b), Err(Error::GridMismatch)));
        let s = SensorSet::default_for(grid()).unwrap();
        assert!(matches!(sensor_response(&b, &s), Err(Error::GridMismatch)));
    }

    #[test]
    fn reflect_examples() {
        let l = Spectrum::from_fn(grid(), |l| l / 700.0).unwrap();
        let one = Spectrum::constant(grid(), 1.0).unwrap();
        let zero = Spectrum::constant(grid(), 0.0).unwrap();
        let half = Spectrum::constant(grid(), 0.5).unwrap();
        assert_eq!(reflect(&l, &one).unwrap(), l);
        assert!(reflect(&l, &zero).unwrap().samples().iter().all(|&v| v == 0.0));
        let c = reflect(&l, &half).unwrap();
        for (a, b) in c.samples().iter().zip(l.samples()) {
            assert_eq!(*a, b / 2.0);
        }
    }

    #[test]
    fn incident_light_examples() {
        let ld = Spectrum::from_fn(grid(), |l| 1.0 + l / 1000.0).unwrap();
        let le = Spectrum::from_fn(grid(), |l| 0.2 - l / 10000.0).unwrap();
        assert_eq!(incident_light(&ld, &le, 0.0, 0.3).unwrap(), le);
        let lit = incident_light(&ld, &le, 1.0, 0.0).unwrap();
        for i in 0..31 {
            assert_eq!(lit.samples()[i], ld.samples()[i] + le.samples()[i]);
        }
        let pen = incident_light(&ld, &le, 0.5, FRAC_PI_3).unwrap();
        for i in 0..31 {
            let expected = 0.25 * ld.samples()[i] + le.samples()[i];
            assert!((pen.samples()[i] - expected).abs() < 1e-15);
        }
        assert!(matches!(
            incident_light(&ld, &le, 1.5, 0.0),
            Err(Error::OutOfRange { name: "mu", .. })
        ));
    }

    #[test]
    fn no_ambient_means_zero_delta() {
        let r = render(&chart(0.0, MuPattern::ramp())).unwrap();
        assert!(r.delta.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(r.image, r.phi);
    }

    #[test]
    fn umbra_means_zero_phi() {
        let r = render(&chart(0.2, MuPattern::Full)).unwrap();
        assert!(r.phi.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(r.image, r.delta);
    }

    #[test]
    fn image_is_phi_plus_delta() {
        let r = render(&chart(0.2, MuPattern::ramp())).unwrap();
        for ((i, p), d) in r.image.as_slice().iter().zip(r.phi.as_slice()).zip(r.delta.as_slice()) {
            assert_eq!(*i, p + d);
            // image - delta recovers phi to within one rounding of the sum
            assert!((i - d - p).abs() <= f64::EPSILON * i.abs());
        }
    }

    #[test]
    fn delta_is_constant_within_patch() {
        let r = render(&chart(0.2, MuPattern::ramp())).unwrap();
        for m in 0..24 {
            let mask = r.patch_mask(m);
            let px = r.delta.masked_pixels(&mask).unwrap();
            assert!(px.iter().all(|p| *p == px[0]));
            assert_eq!(px[0], r.responses[m].ambient);
        }
    }

    #[test]
    fn scaling_direct_light_scales_phi_only() {
        let base = chart(0.2, MuPattern::ramp());
        let alpha = 1.7;
        let scaled = base
            .clone()
            .with_direct_light(base.direct_light().scaled(alpha).unwrap())
            .unwrap();
        let (a, b) = (render(&base).unwrap(), render(&scaled).unwrap());
        assert_eq!(a.delta, b.delta);
        for (x, y) in a.phi.as_slice().iter().zip(b.phi.as_slice()) {
            assert!((alpha * x - y).abs() <= 1e-12 * y.abs().max(1e-300));
        }
    }

    #[test]
    fn no_ambient_pixels_are_proportional() {
        let r = render(&chart(0.0, MuPattern::ramp())).unwrap();
        for m in [0, 7, 18, 23] {
            let px = r.image.masked_pixels(&r.patch_mask(m)).unwrap();
            let p = px.iter().rev().find(|p| p[0] > 0.0).unwrap();
            for q in px.iter().filter(|q| q[0] > 0.0) {
                for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                    let lhs = p[i] * q[j];
                    let rhs = p[j] * q[i];
                    assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs());
                }
            }
        }
    }

    #[test]
    fn occlusion_patterns() {
        let none = MuPattern::None.to_map(10, 5).unwrap();
        assert!(none.as_slice().iter().all(|&v| v == 1.0));
        let full = MuPattern::Full.to_map(10, 5).unwrap();
        assert!(full.as_slice().iter().all(|&v| v == 0.0));
        let band = MuPattern::HalfGradient {
            axis: Axis::X,
            start: 0.25,
            end: 0.75,
        }
        .to_map(41, 3)
        .unwrap();
        assert_eq!(band.min_max(), Some((0.0, 1.0)));
        assert_eq!(band.get(10, 0), 0.0);
        assert!((band.get(20, 1) - 0.5).abs() < 1e-15);
        assert_eq!(band.get(30, 2), 1.0);
        assert!(MuPattern::HalfGradient {
            axis: Axis::Y,
            start: 0.6,
            end: 0.2
        }
        .to_map(4, 4)
        .is_err());
    }

    #[test]
    fn chart_has_24_distinct_tiling_patches() {
        let scene = chart(0.2, MuPattern::None);
        assert_eq!(scene.patches().len(), 24);
        let total: usize = scene.patches().iter().map(|p| p.mask.count()).sum();
        assert_eq!(total, 60 * 40);
        for i in 0..24 {
            for j in i + 1..24 {
                assert_ne!(scene.patches()[i].reflectance, scene.patches()[j].reflectance);
            }
        }
    }

    #[test]
    fn chart_rejects_sub_pixel_patches() {
        let lighting = ChartLighting::daylight(0.1, MuPattern::None).unwrap();
        assert!(matches!(
            make_colorchecker_scene(&lighting, ChartLayout::new(5, 40)),
            Err(Error::Scene(_))
        ));
    }

    #[test]
    fn uncovered_pixel_fails_render() {
        let mut doc = colorchecker_document(
            &ChartLighting::daylight(0.1, MuPattern::None).unwrap(),
            ChartLayout::new(12, 8),
        )
        .unwrap();
        doc.patches.pop();
        let err = render(&doc.build().unwrap()).unwrap_err();
        assert!(matches!(err, Error::Scene(_)), "{err}");
    }

    #[test]
    fn overlapping_patches_are_rejected() {
        let mut doc = colorchecker_document(
            &ChartLighting::daylight(0.1, MuPattern::None).unwrap(),
            ChartLayout::new(12, 8),
        )
        .unwrap();
        doc.patches[1].rect = doc.patches[0].rect;
        assert!(doc.build().is_err());
    }

    #[test]
    fn scene_document_json_round_trip() {
        let doc = colorchecker_document(
            &ChartLighting::daylight(0.1, MuPattern::ramp()).unwrap(),
            ChartLayout::new(12, 8),
        )
        .unwrap();
        let json = serde_json::to_string(&doc).unwrap();
        assert!(json.contains("\"pattern\":\"half-gradient\""));
        let back: SceneDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn noise_only_touches_image() {
        let clean = chart(0.2, MuPattern::ramp());
        let noisy = clean.clone().with_noise(Some(PixelNoise { sigma: 0.01, seed: 9 }));
        let (a, b) = (render(&clean).unwrap(), render(&noisy).unwrap());
        assert_eq!(a.phi, b.phi);
        assert_eq!(a.delta, b.delta);
        assert_ne!(a.image, b.image);
        assert_eq!(b.image, render(&noisy).unwrap().image);
    }

    #[test]
    fn line_image_matches_construction() {
        let img = color_line_image(10, 10, [0.6, 0.3, 0.1], [0.05, 0.08, 0.12], (0.2, 1.0), None).unwrap();
        let first = img.pixel(0, 0);
        let last = img.pixel(9, 9);
        assert!((first[0] - (0.2 * 0.6 + 0.05)).abs() < 1e-15);
        assert!((last[2] - (1.0 * 0.1 + 0.12)).abs() < 1e-15);
    }

    #[test]
    fn road_scene_tiles_the_image() {
        let road = RoadScene::default();
        assert_eq!(road.road_rect(), Rect::new(20, 0, 24, 64));
        let rendered = render(&road.document().unwrap().build().unwrap()).unwrap();
        assert_eq!(rendered.labels[0], 0);
        assert_eq!(rendered.labels[20], 1);
        assert_eq!(rendered.labels[63], 2);
        // umbra row carries environment light only
        assert!(rendered.phi.pixel(30, 0).iter().all(|&v| v == 0.0));
        assert!(rendered.image.pixel(30, 0).iter().all(|&v| v > 0.0));
        assert!(RoadScene { width: 2, ..road }.document().is_err());
    }
}
