//! Synthetic particles, datasets, micrographs, and movies with retained
//! ground truth.
//!
//! The forward model per particle is rotate, project, shift, convolve with
//! the PSF, add white Gaussian noise. Per-item randomness comes from
//! independent ChaCha streams keyed by `(seed, item index)`, so rendering is
//! reproducible and order-independent.

use crate::ctf::{eval_ctf, CTFParams};
use crate::error::{Error, Result};
use crate::fft::{dft2, dft2_complex, idft2};
use crate::field::{Image, Volume};
use crate::geom::{sample_rotation, Rotation, RotationPrior};
use crate::grid::GridSpec;
use crate::motion::{DriftModel, FrameStack};
use crate::project::project_real;
use crate::transform::shift_fourier;
use ndarray::Array2;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Latent variables of one rendered particle image.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ImageFormation {
    pub rotation: Rotation,
    /// In-plane shift in pixels.
    pub shift: [f64; 2],
    /// Index into the dataset's CTF pool.
    pub ctf_id: usize,
    pub noise_sigma: f64,
    /// Volume index for heterogeneous datasets (0 when homogeneous).
    pub class: usize,
}

/// A particle stack with full ground truth.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub grid: GridSpec,
    pub images: Vec<Image>,
    pub truth: Vec<ImageFormation>,
    pub ctf_pool: Vec<CTFParams>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn ctf_of(&self, i: usize) -> &CTFParams {
        &self.ctf_pool[self.truth[i].ctf_id]
    }

    /// Keep only the listed indices (used for half splits).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            grid: self.grid,
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            truth: indices.iter().map(|&i| self.truth[i]).collect(),
            ctf_pool: self.ctf_pool.clone(),
        }
    }
}

/// Ground-truth particle locations in a micrograph.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OccurrenceMap {
    /// Window centers as (x, y) pixel coordinates.
    pub centers: Vec<[f64; 2]>,
    /// Structure index per center (heterogeneity label).
    pub labels: Vec<usize>,
}

/// A recorded field containing many particle projections.
#[derive(Debug, Clone)]
pub struct Micrograph {
    /// Row-major field, (rows, cols); may be rectangular.
    pub data: Array2<f64>,
    pub pixel_size: f64,
    pub occurrences: OccurrenceMap,
}

/// Independent per-item RNG stream.
pub fn rng_stream(seed: u64, item: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(item);
    rng
}

/// Noiseless forward model: rotate, project, shift, apply CTF.
pub fn render_clean(v: &Volume, rotation: &Rotation, shift: [f64; 2], ctf: &CTFParams) -> Image {
    let proj = project_real(v, rotation);
    let mut spec = shift_fourier(&dft2(&proj), shift);
    let transfer = eval_ctf(ctf, &v.grid);
    for ((y, x), s) in spec.data.indexed_iter_mut() {
        *s *= transfer.data[(y, x)];
    }
    idft2(&spec)
}

/// One noisy particle image under formation `f`.
pub fn render_particle(v: &Volume, f: &ImageFormation, ctf: &CTFParams, seed: u64) -> Image {
    let mut im = render_clean(v, &f.rotation, f.shift, ctf);
    if f.noise_sigma > 0.0 {
        let mut rng = rng_stream(seed, 0);
        im.data
            .mapv_inplace(|v| v + f.noise_sigma * rng.sample::<f64, _>(StandardNormal));
    }
    im
}

/// Simulation parameters for [`render_dataset`].
#[derive(Debug, Clone)]
pub struct SimParams {
    pub prior: RotationPrior,
    /// Std of the isotropic Gaussian shift distribution, pixels.
    pub shift_sigma: f64,
    /// Truncation radius of the shift distribution, pixels.
    pub shift_max: f64,
    pub ctf_pool: Vec<CTFParams>,
    pub noise_sigma: f64,
}

impl SimParams {
    pub fn noiseless(ctf: CTFParams) -> Self {
        SimParams {
            prior: RotationPrior::Uniform,
            shift_sigma: 0.0,
            shift_max: 0.0,
            ctf_pool: vec![ctf],
            noise_sigma: 0.0,
        }
    }
}

fn sample_shift<R: Rng + ?Sized>(sigma: f64, max: f64, rng: &mut R) -> [f64; 2] {
    if sigma == 0.0 {
        return [0.0, 0.0];
    }
    loop {
        let t = [
            sigma * rng.sample::<f64, _>(StandardNormal),
            sigma * rng.sample::<f64, _>(StandardNormal),
        ];
        if (t[0] * t[0] + t[1] * t[1]).sqrt() <= max {
            return t;
        }
    }
}

/// Render `n` particles of one or more volumes with i.i.d. formations.
///
/// Class labels are uniform over the volumes; CTF ids cycle through the
/// pool so every micrograph-level PSF is equally represented.
pub fn render_dataset(volumes: &[Volume], n: usize, params: &SimParams, seed: u64) -> Result<Dataset> {
    if volumes.is_empty() || n == 0 {
        return Err(Error::InvalidInput("need at least one volume and one image".into()));
    }
    if params.ctf_pool.is_empty() {
        return Err(Error::InvalidInput("empty CTF pool".into()));
    }
    let grid = volumes[0].grid;
    if volumes.iter().any(|v| v.grid != grid) {
        return Err(Error::InvalidInput("volumes must share a grid".into()));
    }
    let truth: Vec<ImageFormation> = (0..n)
        .map(|i| {
            let mut rng = rng_stream(seed, i as u64);
            let rotation = sample_rotation(&params.prior, &mut rng);
            let shift = sample_shift(params.shift_sigma, params.shift_max, &mut rng);
            let class = if volumes.len() > 1 {
                rng.gen_range(0..volumes.len())
            } else {
                0
            };
            ImageFormation {
                rotation,
                shift,
                ctf_id: i % params.ctf_pool.len(),
                noise_sigma: params.noise_sigma,
                class,
            }
        })
        .collect();
    let images: Vec<Image> = truth
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let mut im = render_clean(
                &volumes[f.class],
                &f.rotation,
                f.shift,
                &params.ctf_pool[f.ctf_id],
            );
            if f.noise_sigma > 0.0 {
                // continue the same stream the formation was drawn from
                let mut rng = rng_stream(seed, i as u64);
                let _ = sample_rotation(&params.prior, &mut rng);
                let _ = sample_shift(params.shift_sigma, params.shift_max, &mut rng);
                if volumes.len() > 1 {
                    let _ = rng.gen_range(0..volumes.len());
                }
                im.data
                    .mapv_inplace(|v| v + f.noise_sigma * rng.sample::<f64, _>(StandardNormal));
            }
            im
        })
        .collect();
    Ok(Dataset {
        grid,
        images,
        truth,
        ctf_pool: params.ctf_pool.clone(),
    })
}

/// Radius (in pixels) of the particle support mask used for SNR accounting.
pub fn support_radius(grid: &GridSpec) -> f64 {
    0.45 * grid.side() as f64
}

fn masked_mean_power(im: &Image) -> f64 {
    let r = support_radius(&im.grid);
    let mut acc = 0.0;
    let mut n = 0usize;
    for ((y, x), v) in im.data.indexed_iter() {
        if im.grid.centered(x).powi(2) + im.grid.centered(y).powi(2) <= r * r {
            acc += v * v;
            n += 1;
        }
    }
    acc / n as f64
}

/// Measured SNR of a dataset: masked mean image power minus the known noise
/// variance, over the noise variance.
pub fn snr_of(ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    let sigma2 = ds
        .truth
        .iter()
        .map(|f| f.noise_sigma * f.noise_sigma)
        .sum::<f64>()
        / ds.len() as f64;
    if sigma2 == 0.0 {
        return Err(Error::ZeroSignal("dataset has no noise; SNR undefined".into()));
    }
    let mean_power = ds.images.iter().map(masked_mean_power).sum::<f64>() / ds.len() as f64;
    Ok((mean_power - sigma2) / sigma2)
}

/// Noise level that makes projections of `v` hit a target SNR, measured as
/// mean clean power in the support mask over a fixed set of orientations.
pub fn sigma_for_snr(v: &Volume, target_snr: f64) -> Result<f64> {
    if !(target_snr > 0.0) {
        return Err(Error::InvalidInput(format!("target SNR {target_snr}")));
    }
    let rots = crate::geom::sample_rotations(24, &RotationPrior::Uniform, 0x5eed);
    let mean_power = rots
        .par_iter()
        .map(|r| masked_mean_power(&project_real(v, r)))
        .sum::<f64>()
        / rots.len() as f64;
    if mean_power <= 0.0 {
        return Err(Error::ZeroSignal("volume projects to zero power".into()));
    }
    Ok((mean_power / target_snr).sqrt())
}

/// Apply a transfer function over an arbitrary (even-sided) rectangular
/// field.
fn filter_field(data: &Array2<f64>, pixel_size: f64, ctf: &CTFParams) -> Array2<f64> {
    let (rows, cols) = data.dim();
    let complex = data.mapv(|v| Complex64::new(v, 0.0));
    let mut spec = dft2_complex(&complex, false);
    for ((y, x), v) in spec.indexed_iter_mut() {
        let ky = (y as f64 - (rows / 2) as f64) / (rows as f64 * pixel_size);
        let kx = (x as f64 - (cols / 2) as f64) / (cols as f64 * pixel_size);
        *v *= ctf.eval((kx * kx + ky * ky).sqrt(), ky.atan2(kx));
    }
    dft2_complex(&spec, true).mapv(|v| v.re)
}

/// Parameters for [`synth_micrograph`].
#[derive(Debug, Clone)]
pub struct MicrographParams {
    /// Field side length in pixels (square, even).
    pub field: usize,
    /// Expected number of particles per (L x L) patch of area; the target
    /// count is `density * field^2 / L^2`.
    pub density: f64,
    /// Minimum center separation in units of L (1.0 = non-overlapping).
    pub separation: f64,
    pub prior: RotationPrior,
    pub ctf: CTFParams,
    pub noise_sigma: f64,
}

/// Stamp projections at dart-thrown centers, filter the whole field with
/// the micrograph CTF, and add noise. The occurrence map is ground truth.
pub fn synth_micrograph(
    volumes: &[Volume],
    params: &MicrographParams,
    seed: u64,
) -> Result<Micrograph> {
    if volumes.is_empty() {
        return Err(Error::InvalidInput("need at least one volume".into()));
    }
    let grid = volumes[0].grid;
    let l = grid.side();
    let field = params.field;
    if field % 2 != 0 || field < 2 * l {
        return Err(Error::InvalidInput(format!(
            "field {field} must be even and at least twice the box {l}"
        )));
    }
    let target = (params.density * (field * field) as f64 / (l * l) as f64).round() as usize;
    let mut rng = rng_stream(seed, u64::MAX); // placement stream
    let min_dist = params.separation * l as f64;
    let margin = l / 2;
    let mut centers: Vec<[f64; 2]> = Vec::new();
    let mut attempts = 0usize;
    let max_attempts = 200 * target.max(1);
    while centers.len() < target {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::PlacementFailed {
                attempts,
                placed: centers.len(),
            });
        }
        let cx = rng.gen_range(margin..field - margin) as f64;
        let cy = rng.gen_range(margin..field - margin) as f64;
        if centers
            .iter()
            .all(|c| ((c[0] - cx).powi(2) + (c[1] - cy).powi(2)).sqrt() >= min_dist)
        {
            centers.push([cx, cy]);
        }
    }
    // render occurrences in parallel, stamp serially
    let stamps: Vec<(usize, Image)> = centers
        .par_iter()
        .enumerate()
        .map(|(i, _)| {
            let mut r = rng_stream(seed, i as u64);
            let rotation = sample_rotation(&params.prior, &mut r);
            let class = if volumes.len() > 1 {
                r.gen_range(0..volumes.len())
            } else {
                0
            };
            (class, project_real(&volumes[class], &rotation))
        })
        .collect();
    let mut data = Array2::<f64>::zeros((field, field));
    let mut labels = Vec::with_capacity(centers.len());
    for (center, (class, stamp)) in centers.iter().zip(stamps.iter()) {
        labels.push(*class);
        let x0 = center[0] as usize - margin;
        let y0 = center[1] as usize - margin;
        for ((y, x), v) in stamp.data.indexed_iter() {
            data[(y0 + y, x0 + x)] += v;
        }
    }
    let mut data = filter_field(&data, grid.pixel_size(), &params.ctf);
    if params.noise_sigma > 0.0 {
        let mut nrng = rng_stream(seed, u64::MAX - 1);
        data.mapv_inplace(|v| v + params.noise_sigma * nrng.sample::<f64, _>(StandardNormal));
    }
    Ok(Micrograph {
        data,
        pixel_size: grid.pixel_size(),
        occurrences: OccurrenceMap { centers, labels },
    })
}

/// Cut the L x L window centered at `center` out of a micrograph.
pub fn extract_window(m: &Micrograph, center: [f64; 2], l: usize) -> Result<Image> {
    let grid = GridSpec::new(l, m.pixel_size)?;
    let x0 = center[0].round() as isize - (l / 2) as isize;
    let y0 = center[1].round() as isize - (l / 2) as isize;
    let (rows, cols) = m.data.dim();
    if x0 < 0 || y0 < 0 || x0 + l as isize > cols as isize || y0 + l as isize > rows as isize {
        return Err(Error::InvalidInput(format!(
            "window at ({}, {}) leaves the field",
            center[0], center[1]
        )));
    }
    let mut im = Image::zeros(grid);
    for y in 0..l {
        for x in 0..l {
            im.data[(y, x)] = m.data[(y0 as usize + y, x0 as usize + x)];
        }
    }
    Ok(im)
}

/// Render a drifting movie of a clean field.
///
/// Frame `t` is the field displaced by the drift model evaluated at `t`
/// plus fresh per-frame noise; summing motion-corrected noiseless frames
/// reproduces `n_frames` times the clean field.
pub fn synth_movie(
    clean: &Array2<f64>,
    pixel_size: f64,
    n_frames: usize,
    drift: &DriftModel,
    per_frame_sigma: f64,
    seed: u64,
) -> Result<FrameStack> {
    if n_frames < 2 {
        return Err(Error::InvalidInput(format!(
            "a movie needs at least 2 frames, got {n_frames}"
        )));
    }
    let frames: Vec<Array2<f64>> = (0..n_frames)
        .into_par_iter()
        .map(|t| {
            let mut frame = drift.displace(clean, t, n_frames);
            if per_frame_sigma > 0.0 {
                let mut rng = rng_stream(seed, t as u64);
                frame.mapv_inplace(|v| v + per_frame_sigma * rng.sample::<f64, _>(StandardNormal));
            }
            frame
        })
        .collect();
    FrameStack::new(frames, pixel_size)
}
