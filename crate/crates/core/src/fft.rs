//! Centered, unitary discrete Fourier transforms.
//!
//! All transforms place DC at index `side/2` on every axis (matching
//! [`GridSpec`](crate::grid::GridSpec)) and are scaled by `1/sqrt(n_samples)`
//! in both directions, so `idft(dft(x)) = x` and norms are preserved.
//! Implemented as half-length index rotations around plain FFTs; the kernel
//! is exactly `exp(-2*pi*i * k'.r' / L)` with `k', r'` centered offsets.

use crate::field::{FourierImage, FourierVolume, Image, Volume};
use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::sync::Arc;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn rustfft::Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Plain unnormalized 1-D DFT (DC at index 0). The inverse is scaled by
/// `1/len` so it inverts the forward exactly.
pub fn dft1(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    plan(x.len(), inverse).process(&mut buf);
    if inverse {
        let s = 1.0 / x.len() as f64;
        for v in &mut buf {
            *v *= s;
        }
    }
    buf
}

/// Swap half-spaces along every axis (DC index 0 <-> centered convention).
/// For even sides this is its own inverse.
fn rotate_half_2(a: &Array2<Complex64>) -> Array2<Complex64> {
    let (ny, nx) = a.dim();
    let (hy, hx) = (ny / 2, nx / 2);
    Array2::from_shape_fn((ny, nx), |(y, x)| a[((y + hy) % ny, (x + hx) % nx)])
}

fn rotate_half_3(a: &Array3<Complex64>) -> Array3<Complex64> {
    let (nz, ny, nx) = a.dim();
    let (hz, hy, hx) = (nz / 2, ny / 2, nx / 2);
    Array3::from_shape_fn((nz, ny, nx), |(z, y, x)| {
        a[((z + hz) % nz, (y + hy) % ny, (x + hx) % nx)]
    })
}

fn transform_axis_2(a: &mut Array2<Complex64>, axis: Axis, inverse: bool) {
    let len = a.len_of(axis);
    let fft = plan(len, inverse);
    let mut buf = vec![Complex64::default(); len];
    for mut lane in a.lanes_mut(axis) {
        for (b, v) in buf.iter_mut().zip(lane.iter()) {
            *b = *v;
        }
        fft.process(&mut buf);
        for (v, b) in lane.iter_mut().zip(buf.iter()) {
            *v = *b;
        }
    }
}

fn transform_axis_3(a: &mut Array3<Complex64>, axis: Axis, inverse: bool) {
    let len = a.len_of(axis);
    let fft = plan(len, inverse);
    let mut buf = vec![Complex64::default(); len];
    for mut lane in a.lanes_mut(axis) {
        for (b, v) in buf.iter_mut().zip(lane.iter()) {
            *b = *v;
        }
        fft.process(&mut buf);
        for (v, b) in lane.iter_mut().zip(buf.iter()) {
            *v = *b;
        }
    }
}

/// Centered unitary 2-D transform of complex data.
pub fn dft2_complex(a: &Array2<Complex64>, inverse: bool) -> Array2<Complex64> {
    let mut w = rotate_half_2(a);
    transform_axis_2(&mut w, Axis(1), inverse);
    transform_axis_2(&mut w, Axis(0), inverse);
    let mut out = rotate_half_2(&w);
    let s = 1.0 / (a.len() as f64).sqrt();
    out.mapv_inplace(|v| v * s);
    out
}

/// Centered unitary 3-D transform of complex data.
pub fn dft3_complex(a: &Array3<Complex64>, inverse: bool) -> Array3<Complex64> {
    let mut w = rotate_half_3(a);
    transform_axis_3(&mut w, Axis(2), inverse);
    transform_axis_3(&mut w, Axis(1), inverse);
    transform_axis_3(&mut w, Axis(0), inverse);
    let mut out = rotate_half_3(&w);
    let s = 1.0 / (a.len() as f64).sqrt();
    out.mapv_inplace(|v| v * s);
    out
}

/// Forward centered unitary 2-D transform of an image.
pub fn dft2(im: &Image) -> FourierImage {
    let complex = im.data.mapv(|v| Complex64::new(v, 0.0));
    FourierImage {
        grid: im.grid,
        data: dft2_complex(&complex, false),
    }
}

/// Inverse of [`dft2`]; returns the real part (imaginary residue of a
/// Hermitian spectrum is float noise).
pub fn idft2(fi: &FourierImage) -> Image {
    let data = dft2_complex(&fi.data, true).mapv(|v| v.re);
    Image {
        grid: fi.grid,
        data,
    }
}

/// Forward centered unitary 3-D transform of a volume.
pub fn dft3(v: &Volume) -> FourierVolume {
    let complex = v.data.mapv(|x| Complex64::new(x, 0.0));
    FourierVolume {
        grid: v.grid,
        data: dft3_complex(&complex, false),
    }
}

/// Inverse of [`dft3`]; returns the real part.
pub fn idft3(fv: &FourierVolume) -> Volume {
    let data = dft3_complex(&fv.data, true).mapv(|v| v.re);
    Volume {
        grid: fv.grid,
        data,
    }
}
