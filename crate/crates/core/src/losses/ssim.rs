//! Windowed SSIM with an 11×11 Gaussian window (σ = 1.5), reflect padding
//! (edge sample not repeated), `C1 = 0.01²` and `C2 = 0.03²` for images in
//! `[0, 1]`. Per-pixel values are averaged over channels.

use crate::error::LossError;
use crate::image::Image;

pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
pub const C1: f64 = 0.01 * 0.01;
pub const C2: f64 = 0.03 * 0.03;

const HALF: isize = (WINDOW / 2) as isize;

pub fn gaussian_window() -> [f64; WINDOW] {
    let mut w = [0.0; WINDOW];
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - HALF as f64;
        *v = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Mirror an out-of-range index back into `[0, n)` without repeating the
/// edge sample.
pub fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= n as isize {
        j = period - j;
    }
    j as usize
}

struct Blur {
    w: usize,
    h: usize,
    taps: [f64; WINDOW],
    /// Source row of each vertical tap, `WINDOW` entries per output row.
    rows: Vec<usize>,
    /// Source column of each entry of a reflect-padded row.
    cols: Vec<usize>,
}

impl Blur {
    fn new(w: usize, h: usize) -> Self {
        let rows = (0..h)
            .flat_map(|y| (0..WINDOW).map(move |t| reflect(y as isize + t as isize - HALF, h)))
            .collect();
        let cols = (0..w + 2 * HALF as usize).map(|j| reflect(j as isize - HALF, w)).collect();
        Self {
            w,
            h,
            taps: gaussian_window(),
            rows,
            cols,
        }
    }

    fn apply(&self, src: &[f64]) -> Vec<f64> {
        let (w, h) = (self.w, self.h);
        let half = HALF as usize;
        let mut padded = vec![0.0; w + 2 * half];
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            let row = &src[y * w..(y + 1) * w];
            for (p, &j) in padded.iter_mut().zip(&self.cols) {
                *p = row[j];
            }
            let out = &mut tmp[y * w..(y + 1) * w];
            for (o, win) in out.iter_mut().zip(padded.windows(WINDOW)) {
                let mut acc = 0.0;
                for t in 0..WINDOW {
                    acc += win[t] * self.taps[t];
                }
                *o = acc;
            }
        }
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            let o = &mut out[y * w..(y + 1) * w];
            for (t, k) in self.taps.iter().enumerate() {
                let sy = self.rows[y * WINDOW + t];
                for (ov, sv) in o.iter_mut().zip(&tmp[sy * w..(sy + 1) * w]) {
                    *ov += k * sv;
                }
            }
        }
        out
    }

    /// Transpose of [`Blur::apply`].
    fn adjoint(&self, src: &[f64]) -> Vec<f64> {
        let (w, h) = (self.w, self.h);
        let half = HALF as usize;
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            let s = &src[y * w..(y + 1) * w];
            for (t, k) in self.taps.iter().enumerate() {
                let sy = self.rows[y * WINDOW + t];
                for (tv, sv) in tmp[sy * w..(sy + 1) * w].iter_mut().zip(s) {
                    *tv += k * sv;
                }
            }
        }
        let mut padded = vec![0.0; w + 2 * half];
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            padded.iter_mut().for_each(|p| *p = 0.0);
            for (x, g) in tmp[y * w..(y + 1) * w].iter().enumerate() {
                for (p, k) in padded[x..x + WINDOW].iter_mut().zip(&self.taps) {
                    *p += k * g;
                }
            }
            let o = &mut out[y * w..(y + 1) * w];
            for (p, &j) in padded.iter().zip(&self.cols) {
                o[j] += p;
            }
        }
        out
    }
}

fn check_shapes(a: &Image, b: &Image) -> Result<(), LossError> {
    if a.shape() != b.shape() {
        return Err(LossError::ShapeMismatch {
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

/// Local statistics of one channel pair.
struct Moments {
    mx: Vec<f64>,
    my: Vec<f64>,
    mxx: Vec<f64>,
    myy: Vec<f64>,
    mxy: Vec<f64>,
}

fn moments(blur: &Blur, x: &[f64], y: &[f64]) -> Moments {
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    Moments {
        mx: blur.apply(x),
        my: blur.apply(y),
        mxx: blur.apply(&xx),
        myy: blur.apply(&yy),
        mxy: blur.apply(&xy),
    }
}

fn ssim_terms(m: &Moments, i: usize) -> (f64, f64, f64, f64) {
    let (mx, my) = (m.mx[i], m.my[i]);
    let a1 = 2.0 * mx * my + C1;
    let a2 = 2.0 * (m.mxy[i] - mx * my) + C2;
    let b1 = mx * mx + my * my + C1;
    let b2 = (m.mxx[i] - mx * mx) + (m.myy[i] - my * my) + C2;
    (a1, a2, b1, b2)
}

/// Per-pixel SSIM, channel-averaged.
pub fn ssim_map(rendered: &Image, target: &Image) -> Result<Image, LossError> {
    check_shapes(rendered, target)?;
    let (w, h, c) = rendered.shape();
    let blur = Blur::new(w, h);
    let mut map = Image::new(w, h, 1);
    for ch in 0..c {
        let x = rendered.channel(ch).data;
        let y = target.channel(ch).data;
        let m = moments(&blur, &x, &y);
        for (i, v) in map.data.iter_mut().enumerate() {
            let (a1, a2, b1, b2) = ssim_terms(&m, i);
            *v += (a1 * a2) / (b1 * b2) / c as f64;
        }
    }
    Ok(map)
}

/// Gradient of `Σ_u upstream(u) · ssim_map(u)` wrt `rendered`.
pub fn ssim_backward(rendered: &Image, target: &Image, upstream: &[f64]) -> Result<Vec<f64>, LossError> {
    ssim_map_and_backward(rendered, target, upstream).map(|(_, g)| g)
}

/// [`ssim_map`] and [`ssim_backward`] sharing one set of local moments.
pub fn ssim_map_and_backward(rendered: &Image, target: &Image, upstream: &[f64]) -> Result<(Image, Vec<f64>), LossError> {
    check_shapes(rendered, target)?;
    let (w, h, c) = rendered.shape();
    let n = w * h;
    if upstream.len() != n {
        return Err(LossError::ShapeMismatch {
            left: (w, h, 1),
            right: (upstream.len(), 1, 1),
        });
    }
    let blur = Blur::new(w, h);
    let mut map = Image::new(w, h, 1);
    let mut grad = vec![0.0; n * c];
    for ch in 0..c {
        let x = rendered.channel(ch).data;
        let y = target.channel(ch).data;
        let m = moments(&blur, &x, &y);
        let (mut g_mx, mut g_mxx, mut g_mxy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            let (a1, a2, b1, b2) = ssim_terms(&m, i);
            let s = (a1 * a2) / (b1 * b2);
            map.data[i] += s / c as f64;
            let g = upstream[i] / c as f64;
            let (mx, my) = (m.mx[i], m.my[i]);
            g_mx[i] = g * s * (2.0 * my / a1 - 2.0 * my / a2 - 2.0 * mx / b1 + 2.0 * mx / b2);
            g_mxx[i] = -g * s / b2;
            g_mxy[i] = g * s * 2.0 / a2;
        }
        let d_mx = blur.adjoint(&g_mx);
        let d_mxx = blur.adjoint(&g_mxx);
        let d_mxy = blur.adjoint(&g_mxy);
        for i in 0..n {
            grad[i * c + ch] = d_mx[i] + 2.0 * x[i] * d_mxx[i] + y[i] * d_mxy[i];
        }
    }
    Ok((map, grad))
}
