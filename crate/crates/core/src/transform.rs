//! In-plane image transforms and volume resampling.

use crate::fft::{dft2, idft2};
use crate::field::{FourierImage, Image, Volume};
use crate::geom::Rotation;
use ndarray::{Array2, Array3};
use num_complex::Complex64;

/// Shift an image by `t = (tx, ty)` pixels via a Fourier phase ramp.
///
/// Sub-pixel exact for bandlimited signals; integer shifts reduce to a
/// circular roll. Intended for `|t| < L/4` (content near the border wraps).
pub fn shift_image(im: &Image, t: [f64; 2]) -> Image {
    let fi = dft2(im);
    idft2(&shift_fourier(&fi, t))
}

/// Apply the shift phase ramp directly to a centered spectrum.
pub fn shift_fourier(fi: &FourierImage, t: [f64; 2]) -> FourierImage {
    let l = fi.grid.side() as f64;
    let mut out = fi.clone();
    for ((y, x), v) in out.data.indexed_iter_mut() {
        let ky = fi.grid.centered(y);
        let kx = fi.grid.centered(x);
        let phase = -std::f64::consts::TAU * (kx * t[0] + ky * t[1]) / l;
        *v *= Complex64::from_polar(1.0, phase);
    }
    out
}

/// Rotate an image counterclockwise by `theta` with bilinear resampling
/// about the grid center. Samples leaving the grid read as zero.
pub fn rotate_image(im: &Image, theta: f64) -> Image {
    let l = im.grid.side();
    let c = im.grid.center() as f64;
    let (s, co) = theta.sin_cos();
    let mut out = Image::zeros(im.grid);
    for ((y, x), o) in out.data.indexed_iter_mut() {
        let xc = x as f64 - c;
        let yc = y as f64 - c;
        // gather at R^T p
        let sx = co * xc + s * yc + c;
        let sy = -s * xc + co * yc + c;
        *o = bilinear(&im.data, sy, sx, l);
    }
    out
}

pub(crate) fn bilinear(data: &Array2<f64>, y: f64, x: f64, l: usize) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let mut acc = 0.0;
    for (dy, wy) in [(0isize, 1.0 - fy), (1, fy)] {
        let yy = y0 as isize + dy;
        if yy < 0 || yy >= l as isize || wy == 0.0 {
            continue;
        }
        for (dx, wx) in [(0isize, 1.0 - fx), (1, fx)] {
            let xx = x0 as isize + dx;
            if xx < 0 || xx >= l as isize || wx == 0.0 {
                continue;
            }
            acc += wy * wx * data[(yy as usize, xx as usize)];
        }
    }
    acc
}

/// Catmull-Rom cubic kernel.
fn cubic_weight(t: f64) -> f64 {
    let a = -0.5;
    let t = t.abs();
    if t < 1.0 {
        (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a
    } else {
        0.0
    }
}

/// Bicubic image sampling (zero outside the grid).
pub(crate) fn bicubic(data: &Array2<f64>, y: f64, x: f64, l: usize) -> f64 {
    let x0 = x.floor() as isize;
    let y0 = y.floor() as isize;
    let mut acc = 0.0;
    for dy in -1..=2isize {
        let yy = y0 + dy;
        if yy < 0 || yy >= l as isize {
            continue;
        }
        let wy = cubic_weight(y - yy as f64);
        if wy == 0.0 {
            continue;
        }
        for dx in -1..=2isize {
            let xx = x0 + dx;
            if xx < 0 || xx >= l as isize {
                continue;
            }
            let wx = cubic_weight(x - xx as f64);
            acc += wy * wx * data[(yy as usize, xx as usize)];
        }
    }
    acc
}

/// Tricubic (Catmull-Rom) volume sampling, zero outside the grid.
pub(crate) fn tricubic(data: &Array3<f64>, z: f64, y: f64, x: f64, l: usize) -> f64 {
    let x0 = x.floor() as isize;
    let y0 = y.floor() as isize;
    let z0 = z.floor() as isize;
    let mut acc = 0.0;
    for dz in -1..=2isize {
        let zz = z0 + dz;
        if zz < 0 || zz >= l as isize {
            continue;
        }
        let wz = cubic_weight(z - zz as f64);
        if wz == 0.0 {
            continue;
        }
        for dy in -1..=2isize {
            let yy = y0 + dy;
            if yy < 0 || yy >= l as isize {
                continue;
            }
            let wzy = wz * cubic_weight(y - yy as f64);
            if wzy == 0.0 {
                continue;
            }
            for dx in -1..=2isize {
                let xx = x0 + dx;
                if xx < 0 || xx >= l as isize {
                    continue;
                }
                acc += wzy
                    * cubic_weight(x - xx as f64)
                    * data[(zz as usize, yy as usize, xx as usize)];
            }
        }
    }
    acc
}

pub(crate) fn trilinear(data: &Array3<f64>, z: f64, y: f64, x: f64, l: usize) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let z0 = z.floor();
    let fx = x - x0;
    let fy = y - y0;
    let fz = z - z0;
    let mut acc = 0.0;
    for (dz, wz) in [(0isize, 1.0 - fz), (1, fz)] {
        let zz = z0 as isize + dz;
        if zz < 0 || zz >= l as isize || wz == 0.0 {
            continue;
        }
        for (dy, wy) in [(0isize, 1.0 - fy), (1, fy)] {
            let yy = y0 as isize + dy;
            if yy < 0 || yy >= l as isize || wy == 0.0 {
                continue;
            }
            for (dx, wx) in [(0isize, 1.0 - fx), (1, fx)] {
                let xx = x0 as isize + dx;
                if xx < 0 || xx >= l as isize || wx == 0.0 {
                    continue;
                }
                acc += wz * wy * wx * data[(zz as usize, yy as usize, xx as usize)];
            }
        }
    }
    acc
}

/// Rotate a volume (trilinear gather at `R^T p`).
pub fn rotate_volume(v: &Volume, r: &Rotation) -> Volume {
    let l = v.grid.side();
    let c = v.grid.center() as f64;
    let m = r.matrix();
    let mut out = Volume::zeros(v.grid);
    for ((z, y, x), o) in out.data.indexed_iter_mut() {
        let p = [x as f64 - c, y as f64 - c, z as f64 - c];
        let sx = m[0][0] * p[0] + m[1][0] * p[1] + m[2][0] * p[2] + c;
        let sy = m[0][1] * p[0] + m[1][1] * p[1] + m[2][1] * p[2] + c;
        let sz = m[0][2] * p[0] + m[1][2] * p[1] + m[2][2] * p[2] + c;
        *o = trilinear(&v.data, sz, sy, sx, l);
    }
    out
}

/// Reflect a volume about the z = 0 plane (chirality flip). The unpaired
/// z = -L/2 layer reads as zero.
pub fn mirror_volume(v: &Volume) -> Volume {
    let l = v.grid.side();
    let c = 2 * v.grid.center();
    let mut out = Volume::zeros(v.grid);
    for ((z, y, x), o) in out.data.indexed_iter_mut() {
        let zm = c as isize - z as isize;
        if zm >= 0 && (zm as usize) < l {
            *o = v.data[(zm as usize, y, x)];
        }
    }
    out
}
