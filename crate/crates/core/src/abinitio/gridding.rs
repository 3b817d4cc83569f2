//! Fourier-domain backprojection by gridding.
//!
//! Slices are spread into an oversampled spectrum with a compact window,
//! CTF-weighted numerator over CTF^2 denominator, and the volume is read
//! off the even sub-grid. Sharing the window between numerator and
//! denominator cancels the kernel's local mass, so no transfer correction
//! is needed on the insertion side.

use crate::ctf::eval_ctf;
use crate::error::{Error, Result};
use crate::fft::idft3;
use crate::field::{FourierImage, FourierVolume, Volume};
use crate::geom::Rotation;
use crate::grid::GridSpec;
use crate::simulate::Dataset;
use crate::slice::{GriddingKernel, OVERSAMPLE};
use crate::transform::shift_fourier;
use ndarray::Array3;
use num_complex::Complex64;

/// Kernel width used for slice insertion.
pub const SCATTER_WIDTH: usize = 2;

/// Accumulates CTF-weighted central slices into an oversampled spectrum.
pub struct FourierAccumulator {
    grid: GridSpec,
    kernel: GriddingKernel,
    num: Array3<Complex64>,
    den: Array3<f64>,
}

impl FourierAccumulator {
    pub fn new(grid: GridSpec) -> Self {
        Self::with_width(grid, SCATTER_WIDTH)
    }

    pub fn with_width(grid: GridSpec, width: usize) -> Self {
        assert!(width >= 2 && width <= 12, "kernel width {width} unsupported");
        let ll = OVERSAMPLE * grid.side();
        FourierAccumulator {
            grid,
            kernel: GriddingKernel::new(width),
            num: Array3::zeros((ll, ll, ll)),
            den: Array3::zeros((ll, ll, ll)),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Scatter a plane of values into the numerator only, scaled to be the
    /// exact adjoint of [`FourierSlicer::slice`](crate::slice::FourierSlicer)
    /// at the same kernel width (pair with [`Self::finish_adjoint`]).
    pub fn insert_numerator(&mut self, spec: &FourierImage, rotation: &Rotation, weight: f64) {
        let l = self.grid.side();
        let ll = OVERSAMPLE * l;
        let cc = (ll / 2) as f64;
        let m = rotation.matrix();
        let os = OVERSAMPLE as f64;
        let s = self.grid.pixel_size() * os.powf(1.5) * (l as f64).sqrt();
        let max_r = l as f64 / 2.0;
        let w = self.kernel.width;
        for ((ky, kx), v) in spec.data.indexed_iter() {
            if v.norm_sqr() == 0.0 {
                continue;
            }
            let a = self.grid.centered(kx);
            let b = self.grid.centered(ky);
            if a * a + b * b > max_r * max_r {
                continue;
            }
            let val = v * (weight * s);
            let (ax, bx) = (a * os, b * os);
            let px = m[0][0] * ax + m[1][0] * bx + cc;
            let py = m[0][1] * ax + m[1][1] * bx + cc;
            let pz = m[0][2] * ax + m[1][2] * bx + cc;
            let mut idx = [[0usize; 12]; 3];
            let mut wts = [[0f64; 12]; 3];
            for (axis, p) in [px, py, pz].into_iter().enumerate() {
                let start = (p - w as f64 / 2.0).ceil() as isize;
                for t in 0..w {
                    let g = start + t as isize;
                    idx[axis][t] = g.rem_euclid(ll as isize) as usize;
                    wts[axis][t] = self.kernel.eval(g as f64 - p);
                }
            }
            for tz in 0..w {
                let wz = wts[2][tz];
                if wz == 0.0 {
                    continue;
                }
                for ty in 0..w {
                    let wzy = wz * wts[1][ty];
                    for tx in 0..w {
                        self.num[(idx[2][tz], idx[1][ty], idx[0][tx])] += val * (wzy * wts[0][tx]);
                    }
                }
            }
        }
    }

    /// Exact adjoint of the slicer's forward chain: inverse-transform the
    /// scattered cube, crop the center, and re-apply the real-space window
    /// correction.
    pub fn finish_adjoint(&self) -> Volume {
        let l = self.grid.side();
        let ll = OVERSAMPLE * l;
        let offset = (ll - l) / 2;
        let field = crate::fft::dft3_complex(&self.num, true);
        let c = self.grid.center() as f64;
        let corr: Vec<f64> = (0..l)
            .map(|i| 1.0 / self.kernel.transfer((i as f64 - c) / ll as f64))
            .collect();
        let mut out = Volume::zeros(self.grid);
        for ((z, y, x), o) in out.data.indexed_iter_mut() {
            *o = field[(z + offset, y + offset, x + offset)].re * corr[z] * corr[y] * corr[x];
        }
        out
    }

    /// Spread one image spectrum (already shift-corrected) into the cube.
    ///
    /// `transfer` holds the CTF values on the image's frequency grid;
    /// `weight` is the responsibility of this (image, orientation) cell;
    /// `cap` limits the inserted shells (L-grid bins).
    pub fn insert_slice(
        &mut self,
        spec: &FourierImage,
        rotation: &Rotation,
        transfer: &crate::field::Image,
        weight: f64,
        cap: Option<f64>,
    ) {
        let l = self.grid.side();
        let ll = OVERSAMPLE * l;
        let cc = (ll / 2) as f64;
        let m = rotation.matrix();
        let os = OVERSAMPLE as f64;
        // inverse of the slice read-out scale
        let inv_s = 1.0
            / (self.grid.pixel_size() * os.powf(1.5) * (l as f64).sqrt());
        let max_r = cap.unwrap_or(l as f64 / 2.0).min(l as f64 / 2.0);
        let w = self.kernel.width;
        for ((ky, kx), v) in spec.data.indexed_iter() {
            let a = self.grid.centered(kx);
            let b = self.grid.centered(ky);
            if a * a + b * b > max_r * max_r {
                continue;
            }
            let c = transfer.data[(ky, kx)];
            // plane samples thin out as 1/radius in 3-D; weighting each
            // sample by its ring radius flattens the local density so the
            // kernel average stays unbiased across its footprint
            let density = (a * a + b * b).sqrt().max(0.5);
            let val = v * (c * weight * inv_s * density);
            let dval = c * c * weight * density;
            let (ax, bx) = (a * os, b * os);
            let px = m[0][0] * ax + m[1][0] * bx + cc;
            let py = m[0][1] * ax + m[1][1] * bx + cc;
            let pz = m[0][2] * ax + m[1][2] * bx + cc;
            // separable window taps, periodic wrap
            let mut idx = [[0usize; 12]; 3];
            let mut wts = [[0f64; 12]; 3];
            for (axis, p) in [px, py, pz].into_iter().enumerate() {
                let start = (p - w as f64 / 2.0).ceil() as isize;
                for t in 0..w {
                    let g = start + t as isize;
                    idx[axis][t] = g.rem_euclid(ll as isize) as usize;
                    wts[axis][t] = self.kernel.eval(g as f64 - p);
                }
            }
            for tz in 0..w {
                let wz = wts[2][tz];
                if wz == 0.0 {
                    continue;
                }
                for ty in 0..w {
                    let wzy = wz * wts[1][ty];
                    for tx in 0..w {
                        let tap = wzy * wts[0][tx];
                        let at = (idx[2][tz], idx[1][ty], idx[0][tx]);
                        self.num[at] += val * tap;
                        self.den[at] += dval * tap;
                    }
                }
            }
        }
    }

    /// Merge another accumulator built on the same grid.
    pub fn merge(&mut self, other: &FourierAccumulator) {
        self.num.zip_mut_with(&other.num, |a, &b| *a += b);
        self.den.zip_mut_with(&other.den, |a, &b| *a += b);
    }

    /// Divide by the accumulated weights plus a radial regularizer and read
    /// the volume spectrum off the even sub-grid.
    ///
    /// `regularizer(shell)` is added to the denominator; shells are L-grid
    /// frequency bins.
    pub fn finish<F: Fn(f64) -> f64>(&self, regularizer: F) -> FourierVolume {
        let l = self.grid.side();
        let c = self.grid.center() as isize;
        let cc = (OVERSAMPLE * l / 2) as isize;
        let mut out = FourierVolume::zeros(self.grid);
        let scale = (OVERSAMPLE as f64).powf(1.5);
        for ((z, y, x), v) in out.data.indexed_iter_mut() {
            let kz = z as isize - c;
            let ky = y as isize - c;
            let kx = x as isize - c;
            let r = ((kx * kx + ky * ky + kz * kz) as f64).sqrt();
            if r > l as f64 / 2.0 {
                continue;
            }
            let at = (
                (cc + 2 * kz) as usize,
                (cc + 2 * ky) as usize,
                (cc + 2 * kx) as usize,
            );
            let lambda = regularizer(r).max(0.0);
            let d = self.den[at] + lambda;
            if d > 1e-14 {
                *v = self.num[at] * (scale / d);
            }
        }
        // the weight-normalized insertion is a kernel-weighted average of
        // the spectrum; in the densely sampled limit that attenuates the
        // volume by the window transfer per real-space axis, divided back
        // out here
        let ll = OVERSAMPLE * l;
        let cen = self.grid.center() as f64;
        let corr: Vec<f64> = (0..l)
            .map(|i| {
                self.kernel.transfer(0.0)
                    / self.kernel.transfer((i as f64 - cen) / ll as f64)
            })
            .collect();
        let mut field = crate::fft::dft3_complex(&out.data, true);
        for ((z, y, x), v) in field.indexed_iter_mut() {
            *v *= corr[z] * corr[y] * corr[x];
        }
        out.data = crate::fft::dft3_complex(&field, false);
        out
    }
}

/// Linear least-squares reconstruction from assigned orientations.
///
/// Accumulates CTF-multiplied slices with trilinear-style spreading and
/// divides by `CTF^2 + lambda` per voxel.
pub fn backproject(
    ds: &Dataset,
    rotations: &[Rotation],
    shifts: &[[f64; 2]],
    lambda: f64,
) -> Result<Volume> {
    if rotations.len() != ds.len() || shifts.len() != ds.len() {
        return Err(Error::InvalidInput(
            "one rotation and shift per image required".into(),
        ));
    }
    let mut acc = FourierAccumulator::new(ds.grid);
    let transfers: Vec<crate::field::Image> = ds
        .ctf_pool
        .iter()
        .map(|p| eval_ctf(p, &ds.grid))
        .collect();
    for i in 0..ds.len() {
        let spec = shift_fourier(
            &crate::fft::dft2(&ds.images[i]),
            [-shifts[i][0], -shifts[i][1]],
        );
        acc.insert_slice(
            &spec,
            &rotations[i],
            &transfers[ds.truth[i].ctf_id],
            1.0,
            None,
        );
    }
    Ok(idft3(&acc.finish(|_| lambda)))
}
