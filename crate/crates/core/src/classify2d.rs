//! Rotation-aware 2-D classification.
//!
//! Images are expanded in a steerable basis (polar resampling crossed with
//! an angular Fourier basis) so that in-plane rotation acts as a per-block
//! phase. On top of that sit block-diagonal PCA, bispectrum invariants,
//! an EM class-averaging loop, and invariant-feature nearest-neighbor
//! averaging.

use crate::ctf::eval_ctf;
use crate::error::{Error, Result};
use crate::fft::{dft2, idft2};
use crate::field::{FourierImage, Image};
use crate::simulate::Dataset;
use crate::transform::{bicubic, rotate_image, shift_fourier};
use nalgebra::{Complex as NaComplex, DMatrix, DVector};
use ndarray::Array2;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Polar sampling geometry shared by a set of expansions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarGrid {
    pub n_rays: usize,
    pub n_radii: usize,
    /// Radial step, pixels.
    pub dr: f64,
}

impl PolarGrid {
    /// Default sampling for an L x L image: rays oversample the rim, radii
    /// cover the inscribed Nyquist disk at half-pixel steps.
    pub fn for_side(side: usize) -> Self {
        PolarGrid {
            n_rays: (4 * side).next_power_of_two(),
            n_radii: side,
            dr: 0.5 * side as f64 / 2.0 / side as f64 * 2.0,
        }
    }

    pub fn m_max(&self) -> usize {
        self.n_rays / 2 - 1
    }

    pub fn radius(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dr
    }
}

/// An image resampled on (radius, angle).
#[derive(Debug, Clone)]
pub struct PolarImage {
    pub grid: PolarGrid,
    /// (n_radii, n_rays) samples.
    pub values: Array2<f64>,
}

/// Angular Fourier coefficients per radius: block `m` holds
/// `a_m(r_0..r_n)`; negative orders follow by conjugation for real images.
#[derive(Debug, Clone)]
pub struct SteerableCoeffs {
    pub grid: PolarGrid,
    /// blocks[m][r], m = 0..=m_max.
    pub blocks: Vec<Vec<Complex64>>,
}

/// Resample an image onto the polar grid (bilinear, zero outside).
pub fn to_polar(im: &Image, grid: &PolarGrid) -> PolarImage {
    let l = im.grid.side();
    let c = im.grid.center() as f64;
    let mut values = Array2::zeros((grid.n_radii, grid.n_rays));
    for ri in 0..grid.n_radii {
        let r = grid.radius(ri);
        for ti in 0..grid.n_rays {
            let theta = std::f64::consts::TAU * ti as f64 / grid.n_rays as f64;
            let x = c + r * theta.cos();
            let y = c + r * theta.sin();
            values[(ri, ti)] = bicubic(&im.data, y, x, l);
        }
    }
    PolarImage { grid: *grid, values }
}

/// Ring-area weight: makes coefficient norms track image norms, so white
/// pixel noise has comparable variance at every radius.
fn ring_weight(grid: &PolarGrid, ri: usize) -> f64 {
    (std::f64::consts::TAU * grid.radius(ri) * grid.dr).sqrt()
}

/// Expand an image into steerable coefficients.
pub fn steerable_expand(im: &Image, grid: &PolarGrid) -> SteerableCoeffs {
    let polar = to_polar(im, grid);
    let m_max = grid.m_max();
    let mut blocks = vec![vec![Complex64::default(); grid.n_radii]; m_max + 1];
    let mut ray = vec![Complex64::default(); grid.n_rays];
    for ri in 0..grid.n_radii {
        for ti in 0..grid.n_rays {
            ray[ti] = Complex64::new(polar.values[(ri, ti)], 0.0);
        }
        let spec = crate::fft::dft1(&ray, false);
        let w = ring_weight(grid, ri);
        for (m, block) in blocks.iter_mut().enumerate() {
            // a_m = (1/n) sum P e^{-im theta}, area-weighted
            block[ri] = spec[m] * (w / grid.n_rays as f64);
        }
    }
    SteerableCoeffs { grid: *grid, blocks }
}

/// Invert [`steerable_expand`] onto an L x L image grid.
pub fn steerable_reconstruct(c: &SteerableCoeffs, img_grid: &crate::grid::GridSpec) -> Image {
    let grid = c.grid;
    let n_rays = grid.n_rays;
    // rebuild the polar samples: real part of the truncated Fourier series
    let mut polar = Array2::<f64>::zeros((grid.n_radii, n_rays));
    let mut spec = vec![Complex64::default(); n_rays];
    for ri in 0..grid.n_radii {
        for s in spec.iter_mut() {
            *s = Complex64::default();
        }
        let w = ring_weight(&grid, ri);
        for (m, block) in c.blocks.iter().enumerate() {
            spec[m] = block[ri] * (n_rays as f64 / w);
            if m > 0 {
                spec[n_rays - m] = block[ri].conj() * (n_rays as f64 / w);
            }
        }
        let ray = crate::fft::dft1(&spec, true);
        for ti in 0..n_rays {
            polar[(ri, ti)] = ray[ti].re;
        }
    }
    // polar -> cartesian by bilinear interpolation in (r, theta)
    let cen = img_grid.center() as f64;
    let mut out = Image::zeros(*img_grid);
    let max_r = grid.radius(grid.n_radii - 1);
    for ((y, x), o) in out.data.indexed_iter_mut() {
        let dx = x as f64 - cen;
        let dy = y as f64 - cen;
        let r = (dx * dx + dy * dy).sqrt();
        if r > max_r {
            continue;
        }
        let theta = dy.atan2(dx).rem_euclid(std::f64::consts::TAU);
        let rf = (r / grid.dr - 0.5).max(0.0);
        let tf = theta / std::f64::consts::TAU * n_rays as f64;
        *o = bicubic_polar(&polar, rf, tf, grid.n_radii, n_rays);
    }
    out
}

/// Cubic interpolation on the polar grid: radius clamped, angle periodic.
fn bicubic_polar(polar: &Array2<f64>, rf: f64, tf: f64, n_radii: usize, n_rays: usize) -> f64 {
    let cubic = |t: f64| -> f64 {
        let a = -0.5;
        let t = t.abs();
        if t < 1.0 {
            (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0
        } else if t < 2.0 {
            a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a
        } else {
            0.0
        }
    };
    let r0 = rf.floor() as isize;
    let t0 = tf.floor() as isize;
    let mut acc = 0.0;
    for dr in -1..=2isize {
        let rr = r0 + dr;
        if rr < 0 || rr >= n_radii as isize {
            continue;
        }
        let wr = cubic(rf - rr as f64);
        if wr == 0.0 {
            continue;
        }
        for dt in -1..=2isize {
            let tt = (t0 + dt).rem_euclid(n_rays as isize) as usize;
            let wt = cubic(tf - (t0 + dt) as f64);
            acc += wr * wt * polar[(rr as usize, tt)];
        }
    }
    acc
}

/// Per-block eigendecomposition of the rotation-augmented second moment.
pub struct SteerablePca {
    pub grid: PolarGrid,
    /// Per angular order m: eigenvalues (descending) and matching
    /// eigenvectors (columns).
    pub blocks: Vec<(Vec<f64>, DMatrix<NaComplex<f64>>)>,
}

/// Block-diagonal PCA over a set of expansions.
///
/// Averaging an image over all of its in-plane rotations multiplies block m
/// by `e^{im phi}` and integrates the phase out, so the rotation-augmented
/// covariance is exactly the per-block second moment; cross-block terms
/// vanish analytically and are never formed.
pub fn steerable_pca(coeffs: &[SteerableCoeffs]) -> Result<SteerablePca> {
    if coeffs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "steerable PCA needs at least 2 images, got {}",
            coeffs.len()
        )));
    }
    let grid = coeffs[0].grid;
    if coeffs.iter().any(|c| c.grid != grid) {
        return Err(Error::InvalidInput("mismatched polar grids".into()));
    }
    let n_r = grid.n_radii;
    let blocks: Vec<(Vec<f64>, DMatrix<NaComplex<f64>>)> = (0..=grid.m_max())
        .into_par_iter()
        .map(|m| {
            let mut cov = DMatrix::<NaComplex<f64>>::zeros(n_r, n_r);
            for c in coeffs {
                let b = &c.blocks[m];
                for i in 0..n_r {
                    let bi = b[i];
                    for j in 0..n_r {
                        let v = bi * b[j].conj() / coeffs.len() as f64;
                        cov[(i, j)] += NaComplex::new(v.re, v.im);
                    }
                }
            }
            let eig = cov.symmetric_eigen();
            let mut order: Vec<usize> = (0..n_r).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let eigvals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
            let mut vecs = DMatrix::<NaComplex<f64>>::zeros(n_r, n_r);
            for (dst, &src) in order.iter().enumerate() {
                vecs.set_column(dst, &eig.eigenvectors.column(src));
            }
            (eigvals, vecs)
        })
        .collect();
    Ok(SteerablePca { grid, blocks })
}

/// Project an image's blocks onto each block's `cutoff` leading
/// eigenvectors and reconstruct.
pub fn denoise_spca(
    im: &Image,
    pca: &SteerablePca,
    cutoff: usize,
) -> Image {
    let coeffs = steerable_expand(im, &pca.grid);
    let mut filtered = coeffs.clone();
    for (m, block) in filtered.blocks.iter_mut().enumerate() {
        let (_, vecs) = &pca.blocks[m];
        let n_r = block.len();
        let v = DVector::from_iterator(n_r, block.iter().map(|c| NaComplex::new(c.re, c.im)));
        let mut out = DVector::<NaComplex<f64>>::zeros(n_r);
        for k in 0..cutoff.min(n_r) {
            let u = vecs.column(k);
            let proj: NaComplex<f64> = u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
            out += DVector::from_column_slice(u.as_slice()) * proj;
        }
        for (dst, src) in block.iter_mut().zip(out.iter()) {
            *dst = Complex64::new(src.re, src.im);
        }
    }
    steerable_reconstruct(&filtered, &im.grid)
}

/// Rotation-invariant bispectrum features over a seeded subsample of index
/// triples `(m1, r1, m2, r2, r3)`.
pub fn bispectrum_features(c: &SteerableCoeffs, band: usize, max_features: usize) -> Vec<Complex64> {
    let m_max = c.grid.m_max().min(band);
    let n_r = c.grid.n_radii;
    // deterministic index subsample
    let mut rng = ChaCha8Rng::seed_from_u64(0xb155);
    let mut idx = Vec::with_capacity(max_features);
    let mut guard = 0;
    while idx.len() < max_features && guard < 50 * max_features {
        guard += 1;
        let m1 = rng.gen_range(1..=m_max);
        let m2 = rng.gen_range(1..=m_max);
        if m1 + m2 > m_max {
            continue;
        }
        let r1 = rng.gen_range(0..n_r);
        let r2 = rng.gen_range(0..n_r);
        let r3 = rng.gen_range(0..n_r);
        idx.push((m1, r1, m2, r2, r3));
    }
    idx.iter()
        .map(|&(m1, r1, m2, r2, r3)| {
            c.blocks[m1][r1] * c.blocks[m2][r2] * c.blocks[m1 + m2][r3].conj()
        })
        .collect()
}

/// Best in-plane rotation (radians) aligning `other` onto `base`, from the
/// steerable cross-correlation evaluated on an angle grid.
pub fn best_rotation(base: &SteerableCoeffs, other: &SteerableCoeffs, n_angles: usize) -> f64 {
    let m_max = base.grid.m_max();
    // s_m = <a^base_m, a^other_m>
    let s: Vec<Complex64> = (0..=m_max)
        .map(|m| {
            base.blocks[m]
                .iter()
                .zip(other.blocks[m].iter())
                .map(|(a, b)| a * b.conj())
                .sum()
        })
        .collect();
    let mut best = (0.0f64, f64::NEG_INFINITY);
    for ai in 0..n_angles {
        let phi = std::f64::consts::TAU * ai as f64 / n_angles as f64;
        // rotating `other` by phi multiplies its block m by e^{-im phi}
        let mut corr = s[0].re;
        for (m, sm) in s.iter().enumerate().skip(1) {
            corr += 2.0 * (sm * Complex64::from_polar(1.0, m as f64 * phi)).re;
        }
        if corr > best.1 {
            best = (phi, corr);
        }
    }
    best.0
}

/// 2-D class model: averages, mixing weights, and the log-likelihood trace.
#[derive(Debug, Clone)]
pub struct ClassModel {
    pub averages: Vec<Image>,
    pub weights: Vec<f64>,
    pub log_likelihood: Vec<f64>,
    /// argmax-responsibility class per image from the final E-step.
    pub labels: Vec<usize>,
    /// occupancy of the smallest class (winner-takes-all diagnostic).
    pub min_occupancy: f64,
}

/// EM class-averaging configuration.
#[derive(Debug, Clone)]
pub struct ClassifyConfig {
    pub n_classes: usize,
    pub n_theta: usize,
    /// maximum |shift| per axis of the integer shift grid.
    pub shift_max: isize,
    pub iters: usize,
    /// Gaussian noise level of the likelihood; from simulation truth.
    pub sigma: f64,
    /// Initial class averages; phase-flipped noisy means when absent.
    pub init: Option<Vec<Image>>,
    pub seed: u64,
}

/// Rotation-and-shift-marginalized EM over K class averages.
pub fn em_classify(ds: &Dataset, config: &ClassifyConfig) -> Result<ClassModel> {
    let k = config.n_classes;
    if k == 0 || ds.is_empty() {
        return Err(Error::InvalidInput("need K >= 1 and a nonempty dataset".into()));
    }
    let grid = ds.grid;
    let l = grid.side();
    let n = ds.len();
    let sigma2 = config.sigma * config.sigma;
    let shifts: Vec<[f64; 2]> = (-config.shift_max..=config.shift_max)
        .flat_map(|dy| {
            (-config.shift_max..=config.shift_max).map(move |dx| [dx as f64, dy as f64])
        })
        .collect();
    // per-image CTF transfer and spectrum
    let transfers: Vec<Image> = ds.ctf_pool.iter().map(|p| eval_ctf(p, &grid)).collect();
    let specs: Vec<FourierImage> = ds.images.par_iter().map(dft2).collect();
    let image_norm2: Vec<f64> = specs.iter().map(|s| s.data.iter().map(|v| v.norm_sqr()).sum()).collect();

    let mut averages: Vec<Image> = match &config.init {
        Some(init) => {
            if init.len() != k {
                return Err(Error::InvalidInput("init count != K".into()));
            }
            init.clone()
        }
        None => {
            // phase-flipped global mean plus seeded perturbations
            let mut mean = Image::zeros(grid);
            for (i, spec) in specs.iter().enumerate() {
                let flipped = crate::ctf::phase_flip(spec, ds.ctf_of(i));
                mean.data += &idft2(&flipped).data;
            }
            mean.data /= n as f64;
            (0..k)
                .map(|j| {
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (j as u64 + 1));
                    let mut im = mean.clone();
                    let scale = im.norm() / (l as f64);
                    im.data
                        .mapv_inplace(|v| v + 0.05 * scale * rng.sample::<f64, _>(rand_distr::StandardNormal));
                    im
                })
                .collect()
        }
    };
    let mut weights = vec![1.0 / k as f64; k];
    let mut ll_trace = Vec::new();
    let mut labels = vec![0usize; n];
    let mut min_occupancy = 0.0;

    for _iter in 0..config.iters {
        // rotated reference spectra, one per (class, theta)
        let refs: Vec<FourierImage> = (0..k * config.n_theta)
            .into_par_iter()
            .map(|idx| {
                let (kc, ti) = (idx / config.n_theta, idx % config.n_theta);
                let theta = std::f64::consts::TAU * ti as f64 / config.n_theta as f64;
                dft2(&rotate_image(&averages[kc], theta))
            })
            .collect();
        let ref_norm2_per_ctf: Vec<Vec<f64>> = transfers
            .iter()
            .map(|c| {
                refs.iter()
                    .map(|r| {
                        r.data
                            .indexed_iter()
                            .map(|((y, x), v)| (c.data[(y, x)] * c.data[(y, x)]) * v.norm_sqr())
                            .sum()
                    })
                    .collect()
            })
            .collect();

        struct EStepOut {
            log_z: f64,
            label: usize,
            // (class, theta index, shift index, weight)
            cells: Vec<(usize, usize, usize, f64)>,
        }
        let estep: Vec<EStepOut> = (0..n)
            .into_par_iter()
            .map(|i| {
                let ctf_id = ds.truth[i].ctf_id;
                let c = &transfers[ctf_id];
                // y~(x) = conj(Y) * ctf, folded once per image
                let yc: Vec<Complex64> = specs[i]
                    .data
                    .indexed_iter()
                    .map(|((y, x), v)| v.conj() * c.data[(y, x)])
                    .collect();
                let log_prior = (1.0
                    / (k as f64 * config.n_theta as f64 * shifts.len() as f64))
                    .ln();
                // score every (class, theta) at zero shift, expand the best
                let mut zero_scores: Vec<(f64, usize)> = refs
                    .iter()
                    .enumerate()
                    .map(|(ridx, r)| {
                        let dot: f64 = r
                            .data
                            .iter()
                            .zip(yc.iter())
                            .map(|(a, b)| (a * b).re)
                            .sum();
                        let res2 = image_norm2[i] - 2.0 * dot
                            + ref_norm2_per_ctf[ctf_id][ridx];
                        (-res2 / (2.0 * sigma2), ridx)
                    })
                    .collect();
                zero_scores.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                let keep = zero_scores[..zero_scores.len().min(8)].to_vec();
                // exact evaluation with shifts for the kept candidates
                let mut cells: Vec<(usize, usize, usize, f64)> = Vec::new();
                let mut logs: Vec<f64> = Vec::new();
                for &(_, ridx) in &keep {
                    let r = &refs[ridx];
                    for (si, t) in shifts.iter().enumerate() {
                        // <T_t-shifted ref, y> via the phase ramp on the ref
                        let mut dot = 0.0;
                        for ((y, x), v) in r.data.indexed_iter() {
                            let ky = grid.centered(y);
                            let kx = grid.centered(x);
                            let phase = -std::f64::consts::TAU
                                * (kx * t[0] + ky * t[1])
                                / l as f64;
                            dot += (v * Complex64::from_polar(1.0, phase) * yc[y * l + x]).re;
                        }
                        let res2 =
                            image_norm2[i] - 2.0 * dot + ref_norm2_per_ctf[ctf_id][ridx];
                        let lw = -res2 / (2.0 * sigma2)
                            + log_prior
                            + weights[ridx / config.n_theta].ln();
                        cells.push((ridx / config.n_theta, ridx % config.n_theta, si, lw));
                        logs.push(lw);
                    }
                }
                let max_l = logs.iter().cloned().fold(f64::MIN, f64::max);
                let z: f64 = logs.iter().map(|v| (v - max_l).exp()).sum();
                let log_z = max_l + z.ln();
                let mut out_cells = Vec::new();
                let mut best = (0usize, f64::MIN);
                for (cell, lw) in cells.iter().zip(logs.iter()) {
                    let w = (lw - log_z).exp();
                    if w > best.1 {
                        best = (cell.0, w);
                    }
                    if w > 1e-8 {
                        out_cells.push((cell.0, cell.1, cell.2, w));
                    }
                }
                EStepOut {
                    log_z,
                    label: best.0,
                    cells: out_cells,
                }
            })
            .collect();
        let ll: f64 = estep.iter().map(|e| e.log_z).sum();
        ll_trace.push(ll);
        for (i, e) in estep.iter().enumerate() {
            labels[i] = e.label;
        }

        // M-step: CTF-weighted, responsibility-weighted least squares
        let mut numerators = vec![Image::zeros(grid); k];
        let mut denominators = vec![Image::zeros(grid); k];
        let mut occupancy = vec![0.0f64; k];
        // per-image corrected contributions computed in parallel, reduced
        // in index order
        let contributions: Vec<Vec<(usize, f64, Image, usize)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let ctf_id = ds.truth[i].ctf_id;
                let c = &transfers[ctf_id];
                let mut out = Vec::new();
                for &(kc, ti, si, w) in &estep[i].cells {
                    let theta = std::f64::consts::TAU * ti as f64 / config.n_theta as f64;
                    let t = shifts[si];
                    // undo shift, weight by CTF, undo rotation
                    let mut spec = shift_fourier(&specs[i], [-t[0], -t[1]]);
                    for ((y, x), v) in spec.data.indexed_iter_mut() {
                        *v *= c.data[(y, x)];
                    }
                    let back = rotate_image(&idft2(&spec), -theta);
                    out.push((kc, w, back, i));
                }
                out
            })
            .collect();
        for per_image in &contributions {
            for (kc, w, back, i) in per_image {
                let c = &transfers[ds.truth[*i].ctf_id];
                occupancy[*kc] += w;
                numerators[*kc]
                    .data
                    .zip_mut_with(&back.data, |a, &b| *a += w * b);
                denominators[*kc]
                    .data
                    .zip_mut_with(&c.data, |a, &b| *a += w * b * b);
            }
        }
        for kc in 0..k {
            let lambda = 1e-3 * denominators[kc].data.iter().cloned().fold(0.0f64, f64::max)
                + 1e-12;
            let num_spec = dft2(&numerators[kc]);
            let mut out = num_spec.clone();
            for ((y, x), v) in out.data.indexed_iter_mut() {
                *v /= Complex64::new(denominators[kc].data[(y, x)] + lambda, 0.0);
            }
            averages[kc] = idft2(&out);
            weights[kc] = (occupancy[kc] / n as f64).max(1e-12);
        }
        let wsum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= wsum;
        }
        min_occupancy = weights.iter().cloned().fold(f64::MAX, f64::min);
    }
    Ok(ClassModel {
        averages,
        weights,
        log_likelihood: ll_trace,
        labels,
        min_occupancy,
    })
}

/// Average每 each image with its nearest neighbors in invariant-feature
/// space after in-plane alignment.
pub fn nn_average(ds: &Dataset, features: &[Vec<Complex64>], k_nn: usize) -> Result<Vec<Image>> {
    let n = ds.len();
    if features.len() != n {
        return Err(Error::InvalidInput("one feature vector per image".into()));
    }
    if k_nn >= n {
        return Err(Error::InvalidInput(format!("k_nn {k_nn} >= N {n}")));
    }
    if k_nn == 0 {
        return Ok(ds.images.clone());
    }
    let polar = PolarGrid::for_side(ds.grid.side());
    let coeffs: Vec<SteerableCoeffs> = ds
        .images
        .par_iter()
        .map(|im| steerable_expand(im, &polar))
        .collect();
    // symmetrized neighbor lists: distance ties and (i, j) orientation are
    // broken by index order
    let dist = |a: &[Complex64], b: &[Complex64]| -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum()
    };
    let mut neighbor_sets: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let mut order: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (dist(&features[i], &features[j]), j))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in order.iter().take(k_nn) {
            if !neighbor_sets[i].contains(&j) {
                neighbor_sets[i].push(j);
            }
            if !neighbor_sets[j].contains(&i) {
                neighbor_sets[j].push(i);
            }
        }
    }
    for set in &mut neighbor_sets {
        set.sort_unstable();
    }
    let out: Vec<Image> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = ds.images[i].clone();
            for &j in &neighbor_sets[i] {
                let phi = best_rotation(&coeffs[i], &coeffs[j], 256);
                let rotated = rotate_image(&ds.images[j], phi);
                acc.data += &rotated.data;
            }
            acc.data /= (neighbor_sets[i].len() + 1) as f64;
            acc
        })
        .collect();
    Ok(out)
}
