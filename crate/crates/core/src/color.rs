//! Chromaticity / brightness separations: rg chromaticity, HSV, CIELUV.
//!
//! Every conversion here runs on *linear* RGB. In particular HSV is the
//! hexcone model applied to linear values, not to gamma-encoded ones as most
//! libraries do; that keeps hue and saturation invariant to exact brightness
//! scaling, which is what offset correction restores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ChannelImage, LinearImage};

/// Linear sRGB (D65) to CIE XYZ.
pub const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

/// Reference white: XYZ of linear RGB (1,1,1) under [`RGB_TO_XYZ`].
/// Its chromaticity is u'n = 0.1978398, v'n = 0.4683363 (D65).
pub const WHITE_XYZ: [f64; 3] = [
    RGB_TO_XYZ[0][0] + RGB_TO_XYZ[0][1] + RGB_TO_XYZ[0][2],
    RGB_TO_XYZ[1][0] + RGB_TO_XYZ[1][1] + RGB_TO_XYZ[1][2],
    RGB_TO_XYZ[2][0] + RGB_TO_XYZ[2][1] + RGB_TO_XYZ[2][2],
];

const LSTAR_EPSILON: f64 = 216.0 / 24389.0;
const LSTAR_KAPPA: f64 = 24389.0 / 27.0;

/// Sum below which a pixel is treated as black for chromaticity.
const BLACK_SUM: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    Rg,
    Hsv,
    Luv,
}

impl ColorSpace {
    pub fn channel_names(self) -> &'static [&'static str] {
        match self {
            ColorSpace::Rg => &["r", "g"],
            ColorSpace::Hsv => &["h", "s", "v"],
            ColorSpace::Luv => &["L", "u", "v"],
        }
    }
}

impl std::str::FromStr for ColorSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rg" => Ok(ColorSpace::Rg),
            "hsv" => Ok(ColorSpace::Hsv),
            "luv" | "cieluv" => Ok(ColorSpace::Luv),
            _ => Err(Error::InvalidParameter(format!(
                "unknown color space {s:?}, expected rg, hsv or luv"
            ))),
        }
    }
}

/// Channels of one converted image, in the space's canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    space: ColorSpace,
    channels: Vec<ChannelImage>,
}

impl ChannelSet {
    pub fn new(space: ColorSpace, channels: Vec<ChannelImage>) -> Result<Self> {
        let names = space.channel_names();
        if channels.len() != names.len() {
            return Err(Error::InvalidParameter(format!(
                "{space:?} needs {} channels, got {}",
                names.len(),
                channels.len()
            )));
        }
        let dims = channels[0].dims();
        if let Some(bad) = channels.iter().find(|c| c.dims() != dims) {
            return Err(Error::DimensionMismatch {
                expected: dims,
                found: bad.dims(),
            });
        }
        Ok(Self { space, channels })
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn channels(&self) -> &[ChannelImage] {
        &self.channels
    }

    /// Channel by name (`"r"`, `"s"`, `"L"`, ...).
    pub fn channel(&self, name: &str) -> Option<&ChannelImage> {
        self.space
            .channel_names()
            .iter()
            .position(|n| *n == name)
            .map(|i| &self.channels[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &ChannelImage)> {
        self.space.channel_names().iter().copied().zip(&self.channels)
    }
}

fn split_channels<const N: usize>(img: &LinearImage, f: impl Fn([f64; 3]) -> [f64; N]) -> Vec<ChannelImage> {
    let (w, h) = img.dims();
    let mut planes: Vec<Vec<f64>> = (0..N).map(|_| Vec::with_capacity(w * h)).collect();
    for p in img.pixels() {
        for (plane, v) in planes.iter_mut().zip(f(p)) {
            plane.push(v);
        }
    }
    planes
        .into_iter()
        .map(|data| ChannelImage::from_vec(w, h, data).expect("plane sized from image"))
        .collect()
}

#[inline]
pub fn rg_chromaticity_pixel(p: [f64; 3]) -> [f64; 2] {
    let sum = p[0] + p[1] + p[2];
    // g/(3g) is not always exactly 1/3 in floating point
    if sum < BLACK_SUM || (p[0] == p[1] && p[1] == p[2]) {
        return [1.0 / 3.0, 1.0 / 3.0];
    }
    [p[0] / sum, p[1] / sum]
}

pub fn to_rg_chromaticity(img: &LinearImage) -> ChannelSet {
    ChannelSet {
        space: ColorSpace::Rg,
        channels: split_channels(img, rg_chromaticity_pixel),
    }
}

/// Hexcone HSV of a pixel clamped to [0,1]³. `h` is in [0,1).
///
/// Achromatic pixels get `h = 0`; when several channels share the maximum
/// the lowest channel index selects the sector.
#[inline]
pub fn rgb_to_hsv_pixel(p: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = p.map(|c| c.clamp(0.0, 1.0));
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta == 0.0 {
        return [0.0, s, max];
    }
    let sector = if r == max {
        (g - b) / delta
    } else if g == max {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let mut h = sector / 6.0;
    if h < 0.0 {
        h += 1.0;
    }
    if h >= 1.0 {
        h = 0.0;
    }
    [h, s, max]
}

#[inline]
pub fn hsv_to_rgb_pixel(hsv: [f64; 3]) -> [f64; 3] {
    let [h, s, v] = hsv;
    if s <= 0.0 {
        return [v, v, v];
    }
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = (h6.floor() as usize).min(5);
    let f = h6 - sector as f64;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

pub fn to_hsv(img: &LinearImage) -> ChannelSet {
    ChannelSet {
        space: ColorSpace::Hsv,
        channels: split_channels(img, rgb_to_hsv_pixel),
    }
}

pub fn hsv_to_rgb(set: &ChannelSet) -> Result<LinearImage> {
    if set.space != ColorSpace::Hsv {
        return Err(Error::InvalidParameter(format!(
            "expected an HSV channel set, got {:?}",
            set.space
        )));
    }
    let [h, s, v] = [0, 1, 2].map(|i| set.channels[i].as_slice());
    let (w, ht) = set.channels[0].dims();
    let data = (0..w * ht)
        .flat_map(|i| hsv_to_rgb_pixel([h[i], s[i], v[i]]))
        .collect();
    LinearImage::from_vec(w, ht, data)
}

#[inline]
pub fn rgb_to_xyz_pixel(p: [f64; 3]) -> [f64; 3] {
    RGB_TO_XYZ.map(|row| row[0] * p[0] + row[1] * p[1] + row[2] * p[2])
}

/// CIE 1976 u', v' chromaticity; black maps to the white point.
#[inline]
pub fn xyz_to_uv_prime(xyz: [f64; 3]) -> [f64; 2] {
    let [x, y, z] = xyz;
    let d = x + 15.0 * y + 3.0 * z;
    if d <= 0.0 {
        return white_uv_prime();
    }
    [4.0 * x / d, 9.0 * y / d]
}

pub fn white_uv_prime() -> [f64; 2] {
    let [x, y, z] = WHITE_XYZ;
    let d = x + 15.0 * y + 3.0 * z;
    [4.0 * x / d, 9.0 * y / d]
}

#[inline]
pub fn rgb_to_luv_pixel(p: [f64; 3]) -> [f64; 3] {
    let xyz = rgb_to_xyz_pixel(p);
    let yr = xyz[1] / WHITE_XYZ[1];
    let l = if yr > LSTAR_EPSILON {
        116.0 * yr.cbrt() - 16.0
    } else {
        LSTAR_KAPPA * yr
    };
    let [u, v] = xyz_to_uv_prime(xyz);
    let [un, vn] = white_uv_prime();
    [l, 13.0 * l * (u - un), 13.0 * l * (v - vn)]
}

pub fn to_cieluv(img: &LinearImage) -> ChannelSet {
    ChannelSet {
        space: ColorSpace::Luv,
        channels: split_channels(img, rgb_to_luv_pixel),
    }
}

pub fn convert(img: &LinearImage, space: ColorSpace) -> ChannelSet {
    match space {
        ColorSpace::Rg => to_rg_chromaticity(img),
        ColorSpace::Hsv => to_hsv(img),
        ColorSpace::Luv => to_cieluv(img),
    }
}

/// Maps a channel of `space` onto [0,1] for display. rg and HSV channels are
/// already unit range; L* is divided by 100 and u*, v* map [-100, 100] to
/// [0, 1]. Values are clamped.
pub fn display_channel(space: ColorSpace, name: &str, ch: &ChannelImage) -> ChannelImage {
    match (space, name) {
        (ColorSpace::Luv, "L") => ch.map(|v| (v / 100.0).clamp(0.0, 1.0)),
        (ColorSpace::Luv, _) => ch.map(|v| ((v + 100.0) / 200.0).clamp(0.0, 1.0)),
        _ => ch.map(|v| v.clamp(0.0, 1.0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rg_examples() {
        assert_eq!(rg_chromaticity_pixel([0.2, 0.2, 0.2]), [1.0 / 3.0, 1.0 / 3.0]);
        let [r, g] = rg_chromaticity_pixel([0.6, 0.3, 0.1]);
        assert!((r - 0.6).abs() < 1e-15 && (g - 0.3).abs() < 1e-15);
        assert_eq!(rg_chromaticity_pixel([0.0; 3]), [1.0 / 3.0, 1.0 / 3.0]);
    }

    #[test]
    fn hsv_examples() {
        assert_eq!(rgb_to_hsv_pixel([1.0, 0.0, 0.0]), [0.0, 1.0, 1.0]);
        assert_eq!(rgb_to_hsv_pixel([0.5, 0.5, 0.5]), [0.0, 0.0, 0.5]);
        assert_eq!(rgb_to_hsv_pixel([0.0, 0.0, 0.0]), [0.0, 0.0, 0.0]);
        let [h, _, _] = rgb_to_hsv_pixel([0.0, 1.0, 0.0]);
        assert!((h - 1.0 / 3.0).abs() < 1e-15);
        let [h, _, _] = rgb_to_hsv_pixel([0.0, 0.0, 1.0]);
        assert!((h - 2.0 / 3.0).abs() < 1e-15);
        // red/green tie: red (lowest index) wins the sector
        let [h, _, _] = rgb_to_hsv_pixel([1.0, 1.0, 0.0]);
        assert!((h - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn hsv_round_trip_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000);
        for _ in 0..1000 {
            let p: [f64; 3] = [rng.random(), rng.random(), rng.random()];
            let back = hsv_to_rgb_pixel(rgb_to_hsv_pixel(p));
            for c in 0..3 {
                assert!((back[c] - p[c]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn hsv_channel_set_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = LinearImage::from_fn(9, 7, |_, _| [rng.random(), rng.random(), rng.random()]);
        let back = hsv_to_rgb(&to_hsv(&img)).unwrap();
        assert!(back.max_abs_diff(&img).unwrap() <= 1e-6);
        assert!(hsv_to_rgb(&to_rg_chromaticity(&img)).is_err());
    }

    #[test]
    fn luv_white_and_black() {
        let [l, u, v] = rgb_to_luv_pixel([1.0; 3]);
        assert!((l - 100.0).abs() < 1e-3 && u.abs() < 1e-3 && v.abs() < 1e-3);
        assert_eq!(rgb_to_luv_pixel([0.0; 3]), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn luv_18_percent_gray() {
        // 0.18 > 216/24389 so L* = 116 * 0.18^(1/3) - 16
        let expected = 116.0 * 0.18f64.cbrt() - 16.0;
        assert!((expected - 49.496).abs() < 0.001);
        let [l, _, _] = rgb_to_luv_pixel([0.18; 3]);
        assert!((l - 49.496).abs() < 0.01);
    }

    #[test]
    fn white_point_matches_published_d65() {
        let [un, vn] = white_uv_prime();
        assert!((un - 0.1978398).abs() < 5e-8, "{un}");
        assert!((vn - 0.4683363).abs() < 5e-8, "{vn}");
    }

    #[test]
    fn channel_lookup() {
        let img = LinearImage::from_pixels(1, 1, &[[0.6, 0.3, 0.1]]).unwrap();
        let hsv = to_hsv(&img);
        assert!(hsv.channel("s").is_some());
        assert!(hsv.channel("L").is_none());
        assert_eq!(hsv.iter().count(), 3);
        assert_eq!("LUV".parse::<ColorSpace>().unwrap(), ColorSpace::Luv);
    }

    proptest! {
        #[test]
        fn rg_of_any_gray_is_exact(g in 0.0f64..=1.0) {
            prop_assert_eq!(rg_chromaticity_pixel([g; 3]), [1.0 / 3.0, 1.0 / 3.0]);
        }

        #[test]
        fn chromaticity_is_brightness_invariant(
            p in prop::array::uniform3(0.001f64..1.0),
            alpha in 0.001f64..=1.0,
        ) {
            let scaled = p.map(|c| c * alpha);
            let [r0, g0] = rg_chromaticity_pixel(p);
            let [r1, g1] = rg_chromaticity_pixel(scaled);
            prop_assert!((r0 - r1).abs() <= 1e-15 && (g0 - g1).abs() <= 1e-15);
            let [h0, s0, _] = rgb_to_hsv_pixel(p);
            let [h1, s1, _] = rgb_to_hsv_pixel(scaled);
            let dh = (h0 - h1).abs();
            prop_assert!(dh.min(1.0 - dh) <= 1e-9);
            prop_assert!((s0 - s1).abs() <= 1e-9);
        }

        #[test]
        fn gray_has_white_chromaticity(level in 1e-4f64..1.0) {
            let uv = xyz_to_uv_prime(rgb_to_xyz_pixel([level; 3]));
            let wn = white_uv_prime();
            prop_assert!((uv[0] - wn[0]).abs() <= 1e-9);
            prop_assert!((uv[1] - wn[1]).abs() <= 1e-9);
        }

        #[test]
        fn hue_stays_in_unit_interval(p in prop::array::uniform3(-0.2f64..1.2)) {
            let [h, s, v] = rgb_to_hsv_pixel(p);
            prop_assert!((0.0..1.0).contains(&h));
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
