use crate::error::{Error, Result};
use crate::image::ChannelImage;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CannyParams {
    pub sigma: f64,
    /// Weak threshold, as a fraction of the image's largest gradient.
    pub low: f64,
    /// Strong threshold, same units.
    pub high: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            sigma: 1.4,
            low: 0.04,
            high: 0.10,
        }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

#[inline]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Separable blur with replicated borders.
fn blur(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(i, k)| k * src[y * w + clamp_index(x as isize + i as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(i, k)| k * tmp[clamp_index(y as isize + i as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

/// Binary edge map (1.0 = edge) of a single channel, typically saturation.
///
/// Gaussian blur, Sobel gradients, non-maximum suppression along four
/// quantized directions, then hysteresis: weak pixels survive only when
/// 8-connected to a strong pixel. Thresholds apply to the gradient
/// magnitude divided by its maximum over the image.
pub fn canny_edges(ch: &ChannelImage, params: CannyParams) -> Result<ChannelImage> {
    let CannyParams { sigma, low, high } = params;
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    if !(0.0 < low && low < high) {
        return Err(Error::InvalidParameter(format!(
            "thresholds must satisfy 0 < low < high, got low={low} high={high}"
        )));
    }
    let (w, h) = ch.dims();
    if w == 0 || h == 0 {
        return Ok(ch.clone());
    }
    let smooth = blur(ch.as_slice(), w, h, &gaussian_kernel(sigma));
    let at = |x: isize, y: isize| smooth[clamp_index(y, h) * w + clamp_index(x, w)];

    let mut mag = vec![0.0; w * h];
    let mut dir = vec![0u8; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let i = y as usize * w + x as usize;
            mag[i] = gx.hypot(gy);
            // gradient angle folded into [0, 180) and quantized to 0/45/90/135
            let mut angle = gy.atan2(gx).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            dir[i] = (((angle + 22.5) / 45.0) as u8) % 4;
        }
    }
    let max = mag.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Ok(ChannelImage::constant(w, h, 0.0));
    }
    mag.iter_mut().for_each(|m| *m /= max);

    let m_at = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    // 0: E-W, 1: NE-SW (image y down), 2: N-S, 3: NW-SE
    const STEP: [(isize, isize); 4] = [(1, 0), (1, 1), (0, 1), (-1, 1)];
    let mut thin = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            let (dx, dy) = STEP[dir[i] as usize];
            let m = mag[i];
            // asymmetric tie-break keeps exactly one pixel of a plateau pair
            if m >= m_at(x - dx, y - dy) && m > m_at(x + dx, y + dy) {
                thin[i] = m;
            }
        }
    }

    let mut out = vec![0.0; w * h];
    let mut stack: Vec<usize> = (0..w * h).filter(|&i| thin[i] >= high).collect();
    for &i in &stack {
        out[i] = 1.0;
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if out[j] == 0.0 && thin[j] >= low {
                    out[j] = 1.0;
                    stack.push(j);
                }
            }
        }
    }
    ChannelImage::from_vec(w, h, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge_pixels(e: &ChannelImage) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for y in 0..e.height() {
            for x in 0..e.width() {
                if e.get(x, y) == 1.0 {
                    v.push((x, y));
                }
            }
        }
        v
    }

    #[test]
    fn constant_image_has_no_edges() {
        let e = canny_edges(&ChannelImage::constant(20, 20, 0.7), CannyParams::default()).unwrap();
        assert!(e.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_step_gives_one_pixel_line() {
        // the blurred step's gradient is symmetric about x = 15.5, so
        // columns 15 and 16 tie; suppression keeps exactly one
        let img = ChannelImage::from_fn(32, 24, |x, _| if x < 16 { 0.0 } else { 1.0 });
        let e = canny_edges(&img, CannyParams::default()).unwrap();
        let px = edge_pixels(&e);
        assert_eq!(px.len(), 24);
        let col = px[0].0;
        assert!(col == 15 || col == 16);
        assert!(px.iter().all(|&(x, _)| x == col));
    }

    #[test]
    fn output_is_binary_and_hysteresis_closed() {
        let img = ChannelImage::from_fn(40, 40, |x, y| {
            let r = ((x as f64 - 20.0).powi(2) + (y as f64 - 20.0).powi(2)).sqrt();
            let ring = if r < 12.0 { 0.8 } else { 0.1 };
            ring + 0.05 * ((x * 7 + y * 13) % 5) as f64 / 5.0
        });
        let params = CannyParams::default();
        let e = canny_edges(&img, params).unwrap();
        assert!(e.as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(e.as_slice().iter().any(|&v| v == 1.0));

        // every 8-connected component contains a strong pixel: recompute
        // with low == high (strong only) and check each component touches it
        let strong = canny_edges(
            &img,
            CannyParams {
                low: params.high - 1e-12,
                ..params
            },
        )
        .unwrap();
        let (w, h) = e.dims();
        let mut seen = vec![false; w * h];
        for start in 0..w * h {
            if e.as_slice()[start] != 1.0 || seen[start] {
                continue;
            }
            let mut stack = vec![start];
            seen[start] = true;
            let mut has_strong = false;
            while let Some(i) = stack.pop() {
                has_strong |= strong.as_slice()[i] == 1.0;
                let (x, y) = ((i % w) as isize, (i / w) as isize);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize {
                            let j = ny as usize * w + nx as usize;
                            if e.as_slice()[j] == 1.0 && !seen[j] {
                                seen[j] = true;
                                stack.push(j);
                            }
                        }
                    }
                }
            }
            assert!(has_strong);
        }
    }

    #[test]
    fn bad_parameters() {
        let img = ChannelImage::constant(4, 4, 0.0);
        for p in [
            CannyParams { sigma: 0.0, ..Default::default() },
            CannyParams { low: 0.2, high: 0.1, ..Default::default() },
            CannyParams { low: 0.0, ..Default::default() },
        ] {
            assert!(canny_edges(&img, p).is_err());
        }
    }

    #[test]
    fn kernel_is_normalized() {
        let k = gaussian_kernel(1.4);
        assert_eq!(k.len(), 2 * 5 + 1);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
