//! Common-line detection between pairs of projection images.
//!
//! The Fourier transforms of two projections of one volume agree along one
//! central ray per image. Rays are sampled on a polar grid over a radial
//! band that skips the CTF-suppressed lowest and noise-dominated highest
//! frequencies, and the best pair is found by exhaustive normalized
//! correlation over all ray pairs.

use crate::error::{Error, Result};
use crate::fft::dft2_complex;
use crate::field::Image;
use crate::geom::Rotation;
use crate::slice::GriddingKernel;
use ndarray::Array2;
use num_complex::Complex64;

/// Radial band of the ray samples, as fractions of Nyquist.
#[derive(Debug, Clone, Copy)]
pub struct RayBand {
    pub low: f64,
    pub high: f64,
}

impl Default for RayBand {
    fn default() -> Self {
        // low frequencies are CTF-suppressed, high ones noise-dominated
        RayBand {
            low: 0.05,
            high: 0.35,
        }
    }
}

/// Central rays of one image's spectrum: `(n_theta, n_r)` complex samples.
#[derive(Debug, Clone)]
pub struct PolarRays {
    pub n_theta: usize,
    pub rays: Array2<Complex64>,
}

/// One detected common line between a pair of images.
#[derive(Debug, Clone, Copy)]
pub struct CommonLine {
    /// Ray angle in the first image, radians in [0, 2pi).
    pub theta_i: f64,
    /// Ray angle in the second image.
    pub theta_j: f64,
    /// Best normalized ray correlation.
    pub score: f64,
    /// Number of ray pairs scoring within 1% of the best; a value on the
    /// order of n_theta flags a degenerate (identical-viewing) pair.
    pub n_near_best: usize,
}

/// Sample an image's spectrum along `n_theta` central rays, radii within
/// the band. Gridding-kernel interpolation on a 2x zero-padded transform;
/// pairs with nearly parallel viewing directions have an almost flat
/// correlation ridge, so the ray fidelity directly bounds the detection
/// accuracy there.
pub fn polar_rays(im: &Image, n_theta: usize, band: &RayBand) -> PolarRays {
    let l = im.grid.side();
    let ll = 2 * l;
    let kernel = GriddingKernel::new(8);
    let c0 = im.grid.center() as f64;
    let corr: Vec<f64> = (0..l)
        .map(|i| 1.0 / kernel.transfer((i as f64 - c0) / ll as f64))
        .collect();
    let mut padded = Array2::<Complex64>::zeros((ll, ll));
    let off = l / 2;
    for ((y, x), &v) in im.data.indexed_iter() {
        padded[(y + off, x + off)] = Complex64::new(v * corr[y] * corr[x], 0.0);
    }
    let spec = dft2_complex(&padded, false);
    let r_lo = (band.low * l as f64 / 2.0).max(1.0);
    let r_hi = band.high * l as f64 / 2.0;
    let n_r = ((2.0 * (r_hi - r_lo)).floor() as usize).max(6);
    let cc = (ll / 2) as f64;
    let w = kernel.width;
    let mut rays = Array2::<Complex64>::zeros((n_theta, n_r));
    for ti in 0..n_theta {
        let theta = std::f64::consts::TAU * ti as f64 / n_theta as f64;
        let (sn, cs) = theta.sin_cos();
        for ri in 0..n_r {
            let r = r_lo + (r_hi - r_lo) * ri as f64 / n_r as f64;
            let (px, py) = (cc + 2.0 * r * cs, cc + 2.0 * r * sn);
            // separable window taps, periodic wrap
            let mut acc = Complex64::default();
            let sy = (py - w as f64 / 2.0).ceil() as isize;
            let sx = (px - w as f64 / 2.0).ceil() as isize;
            for ty in 0..w {
                let gy = sy + ty as isize;
                let wy = kernel.eval(gy as f64 - py);
                if wy == 0.0 {
                    continue;
                }
                let iy = gy.rem_euclid(ll as isize) as usize;
                for tx in 0..w {
                    let gx = sx + tx as isize;
                    let wx = kernel.eval(gx as f64 - px);
                    if wx == 0.0 {
                        continue;
                    }
                    acc += spec[(iy, gx.rem_euclid(ll as isize) as usize)] * (wy * wx);
                }
            }
            rays[(ti, ri)] = acc;
        }
    }
    PolarRays { n_theta, rays }
}

/// Detect the common line between two ray sets by exhaustive normalized
/// correlation. Ties break to the lexicographically smallest angle pair.
pub fn detect_common_line(a: &PolarRays, b: &PolarRays) -> Result<CommonLine> {
    if a.n_theta != b.n_theta || a.n_theta % 2 != 0 {
        return Err(Error::InvalidInput(
            "ray sets must share an even n_theta".into(),
        ));
    }
    let n = a.n_theta;
    let norm = |rays: &Array2<Complex64>, t: usize| -> f64 {
        rays.row(t).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    };
    let na: Vec<f64> = (0..n).map(|t| norm(&a.rays, t)).collect();
    let nb: Vec<f64> = (0..n).map(|t| norm(&b.rays, t)).collect();
    let mut best = (0usize, 0usize, f64::NEG_INFINITY);
    let mut scores = Array2::<f64>::zeros((n, n));
    for ti in 0..n {
        if na[ti] < 1e-14 {
            continue;
        }
        for tj in 0..n {
            if nb[tj] < 1e-14 {
                continue;
            }
            let dot: Complex64 = a
                .rays
                .row(ti)
                .iter()
                .zip(b.rays.row(tj).iter())
                .map(|(x, y)| x * y.conj())
                .sum();
            let s = dot.re / (na[ti] * nb[tj]);
            scores[(ti, tj)] = s;
            if s > best.2 {
                best = (ti, tj, s);
            }
        }
    }
    let near = scores
        .iter()
        .filter(|&&s| s >= best.2 - 0.01 * best.2.abs())
        .count();
    Ok(CommonLine {
        theta_i: std::f64::consts::TAU * best.0 as f64 / n as f64,
        theta_j: std::f64::consts::TAU * best.1 as f64 / n as f64,
        score: best.2,
        n_near_best: near,
    })
}

/// Closed-form common-line angles for known rotations: the plane normals
/// are `n_i = R_i^T z`, the shared direction is their cross product, and
/// each in-image angle is the azimuth of `R d`.
///
/// The result is defined up to adding pi to both angles jointly (the ray
/// and its opposite are the same line).
pub fn common_line_from_rotations(ri: &Rotation, rj: &Rotation) -> Option<(f64, f64)> {
    let ni = ri.viewing_direction();
    let nj = rj.viewing_direction();
    let d = [
        ni[1] * nj[2] - ni[2] * nj[1],
        ni[2] * nj[0] - ni[0] * nj[2],
        ni[0] * nj[1] - ni[1] * nj[0],
    ];
    let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if norm < 1e-9 {
        return None; // identical or opposite viewing directions
    }
    let d = [d[0] / norm, d[1] / norm, d[2] / norm];
    let ci = ri.apply(d);
    let cj = rj.apply(d);
    let ti = ci[1].atan2(ci[0]).rem_euclid(std::f64::consts::TAU);
    let tj = cj[1].atan2(cj[0]).rem_euclid(std::f64::consts::TAU);
    Some((ti, tj))
}

/// Angular difference modulo the joint-pi line ambiguity.
pub fn common_line_error(found: (f64, f64), truth: (f64, f64)) -> f64 {
    let wrap = |x: f64| {
        let mut v = x.rem_euclid(std::f64::consts::TAU);
        if v > std::f64::consts::PI {
            v -= std::f64::consts::TAU;
        }
        v.abs()
    };
    let direct = wrap(found.0 - truth.0).max(wrap(found.1 - truth.1));
    let flipped = wrap(found.0 - truth.0 - std::f64::consts::PI)
        .max(wrap(found.1 - truth.1 - std::f64::consts::PI));
    direct.min(flipped)
}
