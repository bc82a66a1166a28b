//! sRGB transfer curve (IEC 61966-2-1 piecewise form).

/// Encoded value in [0,1] to linear light.
#[inline]
pub fn decode(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// Linear light to encoded value. Input is clamped to [0,1].
#[inline]
pub fn encode(l: f64) -> f64 {
    let l = l.clamp(0.0, 1.0);
    if l <= 0.0031308 {
        l * 12.92
    } else {
        1.055 * l.powf(1.0 / 2.4) - 0.055
    }
}

/// Clamp, encode, and quantize with round-half-up to `0..=max`.
#[inline]
pub fn quantize(l: f64, max: u32) -> u32 {
    let v = (encode(l) * max as f64 + 0.5).floor();
    (v as u32).min(max)
}
