use super::ChannelImage;
use crate::error::{Error, Result};

pub const DEFAULT_HISTEQ_BINS: usize = 256;

#[inline]
fn bin_of(v: f64, bins: usize) -> usize {
    ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1)
}

/// Replaces each value with the empirical CDF of its histogram bin.
///
/// Values are clamped to [0,1] before binning. Output is in (0,1] and the
/// mapping is monotone non-decreasing in the input.
pub fn histogram_equalize(ch: &ChannelImage, bins: usize) -> Result<ChannelImage> {
    if bins < 2 {
        return Err(Error::InvalidParameter(format!("bins must be >= 2, got {bins}")));
    }
    let n = ch.as_slice().len();
    if n == 0 {
        return Ok(ch.clone());
    }
    let mut hist = vec![0usize; bins];
    for &v in ch.as_slice() {
        hist[bin_of(v, bins)] += 1;
    }
    let mut cdf = Vec::with_capacity(bins);
    let mut acc = 0usize;
    for h in hist {
        acc += h;
        cdf.push(acc as f64 / n as f64);
    }
    Ok(ch.map(|v| cdf[bin_of(v, bins)]))
}

/// `1 - v` on the clamped value.
pub fn invert(ch: &ChannelImage) -> ChannelImage {
    ch.map(|v| 1.0 - v.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_maps_to_one() {
        let ch = ChannelImage::constant(5, 4, 0.3);
        let out = histogram_equalize(&ch, 256).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn two_values_hand_cdf() {
        let ch = ChannelImage::from_fn(4, 4, |x, _| if x < 2 { 0.1 } else { 0.9 });
        let out = histogram_equalize(&ch, 256).unwrap();
        for y in 0..4 {
            assert_eq!(out.get(0, y), 0.5);
            assert_eq!(out.get(3, y), 1.0);
        }
    }

    #[test]
    fn uniform_histogram_is_near_identity() {
        // four samples at the centre of each of 256 bins
        let data: Vec<f64> = (0..1024).map(|i| ((i / 4) as f64 + 0.5) / 256.0).collect();
        let ch = ChannelImage::from_vec(1024, 1, data).unwrap();
        let out = histogram_equalize(&ch, 256).unwrap();
        for (a, b) in ch.as_slice().iter().zip(out.as_slice()) {
            assert!((a - b).abs() <= 1.0 / 256.0);
        }
    }

    #[test]
    fn too_few_bins() {
        let ch = ChannelImage::constant(2, 2, 0.5);
        assert!(histogram_equalize(&ch, 1).is_err());
    }

    #[test]
    fn invert_examples() {
        let ch = ChannelImage::from_vec(3, 1, vec![0.25, 0.0, 1.0]).unwrap();
        assert_eq!(invert(&ch).as_slice(), &[0.75, 1.0, 0.0]);
    }

    proptest! {
        #[test]
        fn histeq_is_monotone(values in prop::collection::vec(-0.5f64..1.5, 1..200), bins in 2usize..300) {
            let n = values.len();
            let ch = ChannelImage::from_vec(n, 1, values.clone()).unwrap();
            let out = histogram_equalize(&ch, bins).unwrap();
            for i in 0..n {
                for j in 0..n {
                    if values[i] <= values[j] {
                        prop_assert!(out.as_slice()[i] <= out.as_slice()[j]);
                    }
                }
            }
        }

        #[test]
        fn invert_is_involution(values in prop::collection::vec(0.0f64..=1.0, 1..100)) {
            let n = values.len();
            let ch = ChannelImage::from_vec(n, 1, values).unwrap();
            let twice = invert(&invert(&ch));
            for (a, b) in twice.as_slice().iter().zip(ch.as_slice()) {
                // exact on [0.5, 1]; below that 1 - v rounds once
                if *b >= 0.5 {
                    prop_assert_eq!(a, b);
                } else {
                    prop_assert!((a - b).abs() <= f64::EPSILON / 2.0);
                }
            }
        }

        #[test]
        fn invert_is_exact_on_16_bit_codes(code in 0u32..=65535) {
            let v = code as f64 / 65536.0;
            let ch = ChannelImage::from_vec(1, 1, vec![v]).unwrap();
            prop_assert_eq!(invert(&invert(&ch)).as_slice()[0], v);
        }
    }
}
