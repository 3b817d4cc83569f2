//! Stochastic gradient descent on the marginalized negative log posterior.
//!
//! Each step picks a minibatch uniformly at random, soft-assigns latent
//! orientation cells from the current volume, and takes a gradient step
//! through the slice operator's exact adjoint. The volume is kept low-pass
//! limited by a rising frequency cap (frequency marching).

use crate::ctf::eval_ctf;
use crate::error::{Error, Result};
use crate::fft::{dft2, dft3, idft3};
use crate::field::{FourierImage, FourierVolume, Image, Volume};
use crate::geom::Rotation;
use crate::simulate::Dataset;
use crate::slice::FourierSlicer;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Kernel width shared by the SGD forward and adjoint operators.
const SGD_KERNEL_WIDTH: usize = 6;

/// Latent grids and optimization schedule for [`sgd_map`].
#[derive(Debug, Clone)]
pub struct SgdConfig {
    pub rotations: Vec<Rotation>,
    pub shifts: Vec<[f64; 2]>,
    /// Noise level of the likelihood.
    pub sigma: f64,
    pub steps: usize,
    pub minibatch: usize,
    /// Learning rate schedule `eta_t = eta0 / (1 + t / tau)`.
    pub eta0: f64,
    pub tau: f64,
    /// Frequency cap (L-grid shells) at the first and last step.
    pub cap_start: f64,
    pub cap_end: f64,
    /// Gaussian prior variance per Fourier coefficient.
    pub prior_tau2: f64,
    pub seed: u64,
}

/// Latent responsibilities for one image: `(rotation idx, shift idx, weight)`.
type Cells = Vec<(usize, usize, f64)>;

/// Soft assignments of a set of images against the current volume.
fn soft_assign(
    slicer: &FourierSlicer,
    specs: &[FourierImage],
    transfers: &[Image],
    ctf_ids: &[usize],
    config: &SgdConfig,
    cap: f64,
) -> Vec<Cells> {
    let grid = *slicer.grid();
    let l = grid.side();
    let slices: Vec<FourierImage> = config
        .rotations
        .par_iter()
        .map(|r| slicer.slice(r))
        .collect();
    let mask: Vec<(usize, usize)> = (0..l * l)
        .map(|i| (i / l, i % l))
        .filter(|&(y, x)| {
            grid.centered(x).powi(2) + grid.centered(y).powi(2) <= cap * cap
        })
        .collect();
    specs
        .par_iter()
        .zip(ctf_ids.par_iter())
        .map(|(spec, &cid)| {
            let c = &transfers[cid];
            let mut logs: Vec<(usize, usize, f64)> = Vec::new();
            for (ri, sl) in slices.iter().enumerate() {
                for (si, t) in config.shifts.iter().enumerate() {
                    let mut res2 = 0.0;
                    for &(y, x) in &mask {
                        let ky = grid.centered(y);
                        let kx = grid.centered(x);
                        let phase = -std::f64::consts::TAU * (kx * t[0] + ky * t[1]) / l as f64;
                        let pred = sl.data[(y, x)]
                            * c.data[(y, x)]
                            * Complex64::from_polar(1.0, phase);
                        res2 += (pred - spec.data[(y, x)]).norm_sqr();
                    }
                    logs.push((ri, si, -res2 / (2.0 * config.sigma * config.sigma)));
                }
            }
            let max_l = logs.iter().map(|v| v.2).fold(f64::MIN, f64::max);
            let z: f64 = logs.iter().map(|v| (v.2 - max_l).exp()).sum();
            logs.into_iter()
                .filter_map(|(ri, si, lw)| {
                    let w = (lw - max_l).exp() / z;
                    (w > 1e-6).then_some((ri, si, w))
                })
                .collect()
        })
        .collect()
}

/// Gradient of the batch's negative log posterior at the volume behind
/// `slicer`, given per-image latent cells. Returns the spectrum of the
/// data-term gradient (prior term excluded), scaled by `batch_scale`.
#[allow(clippy::too_many_arguments)]
pub fn data_gradient(
    slicer: &FourierSlicer,
    specs: &[FourierImage],
    transfers: &[Image],
    ctf_ids: &[usize],
    cells: &[Cells],
    rotations: &[Rotation],
    shifts: &[[f64; 2]],
    sigma: f64,
    cap: f64,
    batch_scale: f64,
) -> FourierVolume {
    let grid = *slicer.grid();
    let l = grid.side();
    let inv_sigma2 = 1.0 / (sigma * sigma);
    // accumulate residual slices, then apply the exact adjoint
    let mut acc = super::gridding::FourierAccumulator::with_width(grid, SGD_KERNEL_WIDTH);
    for ((spec, &cid), image_cells) in specs.iter().zip(ctf_ids.iter()).zip(cells.iter()) {
        let c = &transfers[cid];
        for &(ri, si, w) in image_cells {
            let sl = slicer.slice(&rotations[ri]);
            let t = shifts[si];
            let mut residual = FourierImage::zeros(grid);
            for ((y, x), out) in residual.data.indexed_iter_mut() {
                let ky = grid.centered(y);
                let kx = grid.centered(x);
                if kx * kx + ky * ky > cap * cap {
                    continue;
                }
                let phase = -std::f64::consts::TAU * (kx * t[0] + ky * t[1]) / l as f64;
                let ramp = Complex64::from_polar(1.0, phase);
                let pred = sl.data[(y, x)] * c.data[(y, x)] * ramp;
                // conj(ramp) * ctf * (pred - y)
                *out = (pred - spec.data[(y, x)]) * ramp.conj() * c.data[(y, x)];
            }
            acc.insert_numerator(&residual, &rotations[ri], w * inv_sigma2 * batch_scale);
        }
    }
    dft3(&acc.finish_adjoint())
}

/// MAP estimation by SGD with marginalized orientations.
pub fn sgd_map(ds: &Dataset, config: &SgdConfig) -> Result<Volume> {
    if config.minibatch == 0 || config.minibatch > ds.len() {
        return Err(Error::InvalidInput(format!(
            "minibatch {} out of range for N = {}",
            config.minibatch,
            ds.len()
        )));
    }
    if config.rotations.is_empty() || config.shifts.is_empty() {
        return Err(Error::InvalidInput("empty latent grids".into()));
    }
    let grid = ds.grid;
    let transfers: Vec<Image> = ds.ctf_pool.iter().map(|p| eval_ctf(p, &grid)).collect();
    let specs: Vec<FourierImage> = ds.images.par_iter().map(dft2).collect();
    let ctf_ids: Vec<usize> = ds.truth.iter().map(|f| f.ctf_id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // random small-norm initialization
    let mut volume = Volume::zeros(grid);
    volume
        .data
        .mapv_inplace(|_| 1e-3 * rng.sample::<f64, _>(rand_distr::StandardNormal));
    for step in 0..config.steps {
        let frac = step as f64 / config.steps.max(1) as f64;
        let cap = config.cap_start + (config.cap_end - config.cap_start) * frac;
        let eta = config.eta0 / (1.0 + step as f64 / config.tau);
        let batch: Vec<usize> = (0..config.minibatch)
            .map(|_| rng.gen_range(0..ds.len()))
            .collect();
        let slicer = FourierSlicer::with_width(&volume, SGD_KERNEL_WIDTH);
        let b_specs: Vec<FourierImage> = batch.iter().map(|&i| specs[i].clone()).collect();
        let b_ids: Vec<usize> = batch.iter().map(|&i| ctf_ids[i]).collect();
        let cells = soft_assign(&slicer, &b_specs, &transfers, &b_ids, config, cap);
        let grad_data = data_gradient(
            &slicer,
            &b_specs,
            &transfers,
            &b_ids,
            &cells,
            &config.rotations,
            &config.shifts,
            config.sigma,
            cap,
            ds.len() as f64 / config.minibatch as f64,
        );
        let mut x = dft3(&volume);
        for ((z, y, x_), v) in x.data.indexed_iter_mut() {
            let r = (grid.centered(x_).powi(2)
                + grid.centered(y).powi(2)
                + grid.centered(z).powi(2))
            .sqrt();
            if r > cap {
                *v = Complex64::default();
                continue;
            }
            let g = grad_data.data[(z, y, x_)] + *v / config.prior_tau2;
            *v -= g * eta;
        }
        volume = idft3(&x);
    }
    Ok(volume)
}
