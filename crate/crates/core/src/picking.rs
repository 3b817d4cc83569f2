//! Particle picking and the Einstein-from-noise model-bias experiment.
//!
//! Two pickers: normalized cross-correlation against templates, and a
//! template-free reference-window method that scores windows by local
//! statistics, correlates against automatically selected references, and
//! thresholds a Fisher linear discriminant trained on the correlation
//! extremes.

use crate::error::{Error, Result};
use crate::fft::{dft2, dft2_complex};
use crate::field::Image;
use crate::grid::GridSpec;
use crate::simulate::{Micrograph, OccurrenceMap};
use ndarray::Array2;
use num_complex::Complex64;
use rand::prelude::*;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Detected particle centers with scores, sorted by descending score.
#[derive(Debug, Clone)]
pub struct PickSet {
    pub centers: Vec<[f64; 2]>,
    pub scores: Vec<f64>,
    pub method: &'static str,
    pub exclusion_radius: f64,
}

/// Precision/recall of a pick set against ground truth.
#[derive(Debug, Clone, Copy)]
pub struct PickMetrics {
    pub precision: f64,
    pub recall: f64,
    pub matched: usize,
    pub match_radius: f64,
}

/// Greedy nearest-pair one-to-one matching within a radius. Symmetric in
/// its two arguments: swapping picks and truth swaps precision and recall.
pub fn pick_metrics(picks: &PickSet, truth: &OccurrenceMap, radius: f64) -> PickMetrics {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in picks.centers.iter().enumerate() {
        for (j, t) in truth.centers.iter().enumerate() {
            let d = ((p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2)).sqrt();
            if d <= radius {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_pick = vec![false; picks.centers.len()];
    let mut used_truth = vec![false; truth.centers.len()];
    let mut matched = 0;
    for (_, i, j) in pairs {
        if !used_pick[i] && !used_truth[j] {
            used_pick[i] = true;
            used_truth[j] = true;
            matched += 1;
        }
    }
    PickMetrics {
        precision: if picks.centers.is_empty() {
            0.0
        } else {
            matched as f64 / picks.centers.len() as f64
        },
        recall: if truth.centers.is_empty() {
            0.0
        } else {
            matched as f64 / truth.centers.len() as f64
        },
        matched,
        match_radius: radius,
    }
}

/// Normalized cross-correlation of one template against every window
/// center; entries outside the valid margin are -inf.
///
/// The template is zero-meaned and unit-normalized over its square
/// footprint, and each window is normalized by its own local standard
/// deviation, so the map is invariant to affine intensity changes of the
/// micrograph.
pub fn ncc_map(m: &Micrograph, template: &Image) -> Array2<f64> {
    let (rows, cols) = m.data.dim();
    let l = template.grid.side();
    let tm = template.data.sum() / (l * l) as f64;
    let mut tnorm = 0.0;
    for v in template.data.iter() {
        tnorm += (v - tm) * (v - tm);
    }
    let tnorm = tnorm.sqrt();
    // cross-correlation via FFT: embed the zero-meaned template centered
    let mut tpad = Array2::<Complex64>::zeros((rows, cols));
    for ((y, x), &v) in template.data.indexed_iter() {
        tpad[(y + rows / 2 - l / 2, x + cols / 2 - l / 2)] = Complex64::new(v - tm, 0.0);
    }
    let fm = dft2_complex(&m.data.mapv(|v| Complex64::new(v, 0.0)), false);
    let ft = dft2_complex(&tpad, false);
    let cross = ndarray::Zip::from(&fm).and(&ft).map_collect(|a, b| a * b.conj());
    let corr = dft2_complex(&cross, true).mapv(|v| v.re * (rows as f64 * cols as f64).sqrt());
    // local window sums via integral images
    let mut s1 = Array2::<f64>::zeros((rows + 1, cols + 1));
    let mut s2 = Array2::<f64>::zeros((rows + 1, cols + 1));
    for y in 0..rows {
        for x in 0..cols {
            let v = m.data[(y, x)];
            s1[(y + 1, x + 1)] = v + s1[(y, x + 1)] + s1[(y + 1, x)] - s1[(y, x)];
            s2[(y + 1, x + 1)] = v * v + s2[(y, x + 1)] + s2[(y + 1, x)] - s2[(y, x)];
        }
    }
    let area = (l * l) as f64;
    let margin = l / 2;
    Array2::from_shape_fn((rows, cols), |(cy, cx)| {
        if cy < margin || cx < margin || cy + margin > rows || cx + margin > cols {
            return f64::NEG_INFINITY;
        }
        let (y0, x0) = (cy - margin, cx - margin);
        let (y1, x1) = (y0 + l, x0 + l);
        let sum = s1[(y1, x1)] - s1[(y0, x1)] - s1[(y1, x0)] + s1[(y0, x0)];
        let sq = s2[(y1, x1)] - s2[(y0, x1)] - s2[(y1, x0)] + s2[(y0, x0)];
        let var = (sq - sum * sum / area).max(0.0);
        let denom = var.sqrt() * tnorm;
        if denom < 1e-12 {
            return f64::NEG_INFINITY;
        }
        corr[(cy, cx)] / denom
    })
}

/// Greedy non-maximum suppression: highest score first, ties broken by
/// raster order (row, then column), discarding candidates within the
/// exclusion radius of an accepted center.
fn non_maximum_suppression(
    scores: &Array2<f64>,
    threshold: f64,
    exclusion: f64,
) -> (Vec<[f64; 2]>, Vec<f64>) {
    let mut candidates: Vec<(f64, usize, usize)> = scores
        .indexed_iter()
        .filter(|(_, &s)| s.is_finite() && s >= threshold)
        .map(|((y, x), &s)| (s, y, x))
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut centers: Vec<[f64; 2]> = Vec::new();
    let mut out_scores = Vec::new();
    let r2 = exclusion * exclusion;
    for (s, y, x) in candidates {
        let p = [x as f64, y as f64];
        if centers
            .iter()
            .all(|c| (c[0] - p[0]).powi(2) + (c[1] - p[1]).powi(2) > r2)
        {
            centers.push(p);
            out_scores.push(s);
        }
    }
    (centers, out_scores)
}

/// Template-matching picker: max over templates of normalized
/// cross-correlation, then greedy suppression.
pub fn pick_template(
    m: &Micrograph,
    templates: &[Image],
    threshold: f64,
    exclusion: f64,
) -> Result<PickSet> {
    if templates.is_empty() {
        return Err(Error::InvalidInput("no templates given".into()));
    }
    let l = templates[0].grid.side();
    if templates.iter().any(|t| t.grid.side() != l) {
        return Err(Error::InvalidInput("templates must share a size".into()));
    }
    let maps: Vec<Array2<f64>> = templates.par_iter().map(|t| ncc_map(m, t)).collect();
    let mut best = maps[0].clone();
    for map in &maps[1..] {
        best.zip_mut_with(map, |b, &v| *b = b.max(v));
    }
    let (centers, scores) = non_maximum_suppression(&best, threshold, exclusion);
    Ok(PickSet {
        centers,
        scores,
        method: "template",
        exclusion_radius: exclusion,
    })
}

/// Reference-window picker configuration.
#[derive(Debug, Clone, Copy)]
pub struct RefWinParams {
    /// Number of reference windows (half particle-like, half noise-like),
    /// clamped to an eighth of the available windows.
    pub n_refs: usize,
    /// Quantile (0..0.5) of the correlation score used to label training
    /// windows for the discriminant.
    pub train_quantile: f64,
    /// Final decision threshold on the discriminant score, in units of the
    /// midpoint between class means (0 = midpoint).
    pub threshold: f64,
    /// Absolute floor on the normalized correlation to the particle-like
    /// references. Pure-noise windows stay well below it (their pairwise
    /// correlations scale as 1/window), so this gate suppresses picks on
    /// structureless fields.
    pub min_response: f64,
}

impl Default for RefWinParams {
    fn default() -> Self {
        RefWinParams {
            n_refs: 64,
            train_quantile: 0.1,
            threshold: 0.0,
            min_response: 0.15,
        }
    }
}

/// Template-free picking from window statistics.
///
/// Windows on a half-window stride grid are ranked by (low mean, high
/// variance) to select particle-like and noise-like references; every
/// window's correlation profile against the references trains a Fisher
/// discriminant whose thresholded score drives suppression.
pub fn pick_refwin(m: &Micrograph, window: usize, params: &RefWinParams) -> Result<PickSet> {
    let (rows, cols) = m.data.dim();
    if window == 0 || window % 2 != 0 || window * 2 > rows.min(cols) {
        return Err(Error::InvalidInput(format!(
            "window {window} unusable for {rows}x{cols} field"
        )));
    }
    let stride = (window / 4).max(1);
    let mut centers: Vec<[usize; 2]> = Vec::new();
    let mut cy = window / 2;
    while cy + window / 2 <= rows {
        let mut cx = window / 2;
        while cx + window / 2 <= cols {
            centers.push([cy, cx]);
            cx += stride;
        }
        cy += stride;
    }
    let n = centers.len();
    let n_refs = params.n_refs.min(n / 8) & !1;
    if n_refs < 2 {
        return Err(Error::InvalidInput(format!(
            "only {n} windows; too few to pick references"
        )));
    }
    // flatten windows as zero-mean unit vectors
    let dim = window * window;
    let mut wins: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut means = Vec::with_capacity(n);
    let mut vars = Vec::with_capacity(n);
    for &[wy, wx] in &centers {
        let mut v = Vec::with_capacity(dim);
        for y in 0..window {
            for x in 0..window {
                v.push(m.data[(wy - window / 2 + y, wx - window / 2 + x)]);
            }
        }
        let mean = v.iter().sum::<f64>() / dim as f64;
        let var = v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / dim as f64;
        let norm = (var * dim as f64).sqrt().max(1e-12);
        means.push(mean);
        vars.push(var);
        wins.push(v.iter().map(|a| (a - mean) / norm).collect());
    }
    // rank-based extremeness: particle windows stand out by variance and by
    // a mean displaced from the background level (the displacement sign
    // depends on the contrast convention, so use its magnitude)
    let rank_of = |vals: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..vals.len()).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let mut r = vec![0.0; vals.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = pos as f64;
        }
        r
    };
    let mut sorted_means = means.clone();
    sorted_means.sort_by(f64::total_cmp);
    let median_mean = sorted_means[n / 2];
    let mean_dev: Vec<f64> = means.iter().map(|m| (m - median_mean).abs()).collect();
    let mean_rank = rank_of(&mean_dev);
    let var_rank = rank_of(&vars);
    let extremeness: Vec<f64> = (0..n).map(|i| var_rank[i] + mean_rank[i]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| extremeness[b].total_cmp(&extremeness[a]).then(a.cmp(&b)));
    let half = n_refs / 2;
    let refs: Vec<usize> = order[..half]
        .iter()
        .chain(order[n - half..].iter())
        .copied()
        .collect();
    // correlation profile of every window against the references; a
    // window's trivial correlation with itself is excluded
    let profiles: Vec<Vec<f64>> = wins
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            refs.iter()
                .map(|&r| {
                    if r == i {
                        0.0
                    } else {
                        wins[r].iter().zip(w.iter()).map(|(a, b)| a * b).sum()
                    }
                })
                .collect()
        })
        .collect();
    // training labels from the extremes of the particle-reference response
    let response: Vec<f64> = profiles
        .iter()
        .map(|p| p[..half].iter().cloned().fold(f64::MIN, f64::max))
        .collect();
    let mut resp_order: Vec<usize> = (0..n).collect();
    resp_order.sort_by(|&a, &b| response[a].total_cmp(&response[b]));
    let q = ((n as f64 * params.train_quantile) as usize).max(2);
    let neg: Vec<usize> = resp_order[..q].to_vec();
    let pos: Vec<usize> = resp_order[n - q..].to_vec();
    let w = fisher_discriminant(&profiles, &pos, &neg);
    let project = |p: &Vec<f64>| -> f64 { w.iter().zip(p.iter()).map(|(a, b)| a * b).sum() };
    let mu_pos = pos.iter().map(|&i| project(&profiles[i])).sum::<f64>() / pos.len() as f64;
    let mu_neg = neg.iter().map(|&i| project(&profiles[i])).sum::<f64>() / neg.len() as f64;
    let midpoint = 0.5 * (mu_pos + mu_neg);
    let scale = (mu_pos - mu_neg).abs().max(1e-12);
    // candidates pass both the discriminant and the absolute response
    // gate; suppression then ranks by response
    let mut grid_scores = Array2::<f64>::from_elem((rows, cols), f64::NEG_INFINITY);
    for (i, &[wy, wx]) in centers.iter().enumerate() {
        if response[i] < params.min_response {
            continue;
        }
        if (project(&profiles[i]) - midpoint) / scale < params.threshold {
            continue;
        }
        grid_scores[(wy, wx)] = response[i];
    }
    let exclusion = window as f64 * 0.75;
    let (picked, scores) = non_maximum_suppression(&grid_scores, f64::NEG_INFINITY, exclusion);
    // re-center each pick on the most extreme window nearby (window
    // variance peaks when the particle sits centered), then dedupe
    let centers_f: Vec<[f64; 2]> = centers.iter().map(|&[y, x]| [x as f64, y as f64]).collect();
    let mut final_centers: Vec<[f64; 2]> = Vec::new();
    let mut final_scores: Vec<f64> = Vec::new();
    for (p, s) in picked.iter().zip(scores.iter()) {
        let mut best = *p;
        let mut best_ext = f64::NEG_INFINITY;
        for (i, c) in centers_f.iter().enumerate() {
            let d = ((c[0] - p[0]).powi(2) + (c[1] - p[1]).powi(2)).sqrt();
            if d <= exclusion && extremeness[i] > best_ext {
                best_ext = extremeness[i];
                best = *c;
            }
        }
        if final_centers
            .iter()
            .all(|c| (c[0] - best[0]).powi(2) + (c[1] - best[1]).powi(2) > exclusion * exclusion)
        {
            final_centers.push(best);
            final_scores.push(*s);
        }
    }
    Ok(PickSet {
        centers: final_centers,
        scores: final_scores,
        method: "refwin",
        exclusion_radius: exclusion,
    })
}

/// Fisher linear discriminant with a ridge-regularized pooled scatter.
fn fisher_discriminant(profiles: &[Vec<f64>], pos: &[usize], neg: &[usize]) -> Vec<f64> {
    let d = profiles[0].len();
    let mean_of = |idx: &[usize]| -> Vec<f64> {
        let mut m = vec![0.0; d];
        for &i in idx {
            for (a, b) in m.iter_mut().zip(profiles[i].iter()) {
                *a += b / idx.len() as f64;
            }
        }
        m
    };
    let mp = mean_of(pos);
    let mn = mean_of(neg);
    let mut scatter = nalgebra::DMatrix::<f64>::zeros(d, d);
    for (idx, mu) in [(pos, &mp), (neg, &mn)] {
        for &i in idx {
            for a in 0..d {
                let da = profiles[i][a] - mu[a];
                for b in 0..d {
                    scatter[(a, b)] += da * (profiles[i][b] - mu[b]);
                }
            }
        }
    }
    let trace = scatter.trace().max(1e-12);
    for a in 0..d {
        scatter[(a, a)] += 1e-3 * trace / d as f64;
    }
    let diff = nalgebra::DVector::from_iterator(d, mp.iter().zip(mn.iter()).map(|(a, b)| a - b));
    let w = scatter
        .lu()
        .solve(&diff)
        .unwrap_or_else(|| diff.clone());
    w.iter().copied().collect()
}

/// Align pure-noise images to a reference and average them.
///
/// Each of `n` white-noise images is circularly shifted to the integer
/// offset maximizing its cross-correlation with the reference, then all are
/// averaged. Returns the final average and the correlation of the running
/// average with the reference after each power-of-two count, demonstrating
/// alignment-induced model bias.
pub fn einstein_from_noise(
    reference: &Image,
    n: usize,
    sigma: f64,
    seed: u64,
) -> Result<(Image, Vec<(usize, f64)>)> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one image".into()));
    }
    let grid = reference.grid;
    let l = grid.side();
    let fr = dft2(reference);
    let mut sum = Array2::<f64>::zeros((l, l));
    let mut curve = Vec::new();
    let mut next_record = 1usize;
    for i in 0..n {
        let mut rng = crate::simulate::rng_stream(seed, i as u64);
        let mut noise = Image::zeros(grid);
        noise
            .data
            .mapv_inplace(|_| sigma * rng.sample::<f64, _>(StandardNormal));
        let fn_ = dft2(&noise);
        let cross =
            ndarray::Zip::from(&fn_.data).and(&fr.data).map_collect(|a, b| a * b.conj());
        let corr = dft2_complex(&cross, true).mapv(|v| v.re);
        let mut best = (0usize, 0usize, f64::NEG_INFINITY);
        for ((y, x), &v) in corr.indexed_iter() {
            if v > best.2 {
                best = (y, x, v);
            }
        }
        // displacement of the noise image content relative to the reference
        let dy = best.0 as isize - (l / 2) as isize;
        let dx = best.1 as isize - (l / 2) as isize;
        for ((y, x), &v) in noise.data.indexed_iter() {
            // roll by -d so the matched feature lands on the reference
            let ty = (y as isize - dy).rem_euclid(l as isize) as usize;
            let tx = (x as isize - dx).rem_euclid(l as isize) as usize;
            sum[(ty, tx)] += v;
        }
        if i + 1 == next_record || i + 1 == n {
            let avg = Image {
                grid,
                data: sum.mapv(|v| v / (i + 1) as f64),
            };
            curve.push((i + 1, avg.correlation(reference)));
            if i + 1 == next_record {
                next_record *= 2;
            }
        }
    }
    let avg = Image {
        grid,
        data: sum.mapv(|v| v / n as f64),
    };
    Ok((avg, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctf::CTFParams;
    use crate::geom::RotationPrior;
    use crate::phantom::{make_phantom, PhantomSpec};
    use crate::project::project_real;
    use crate::simulate::{
        sigma_for_snr, synth_micrograph, MicrographParams,
    };
    use crate::Volume;
    use rand_chacha::ChaCha8Rng;

    fn test_volume(l: usize) -> Volume {
        let grid = GridSpec::new(l, 1.0).unwrap();
        make_phantom(&PhantomSpec::demo_8(&grid), &grid).unwrap()
    }

    fn planted_micrograph(sigma: f64, seed: u64) -> (Micrograph, Volume) {
        let v = test_volume(32);
        let params = MicrographParams {
            field: 512,
            density: 0.25,
            separation: 1.2,
            prior: RotationPrior::Uniform,
            ctf: CTFParams::trivial(),
            noise_sigma: sigma,
        };
        (synth_micrograph(std::slice::from_ref(&v), &params, seed).unwrap(), v)
    }

    #[test]
    fn noiseless_matched_templates_pick_perfectly() {
        let (m, v) = planted_micrograph(0.0, 3);
        // a small template bank of projections
        let templates: Vec<Image> = crate::geom::sample_rotations(8, &RotationPrior::Uniform, 5)
            .iter()
            .map(|r| project_real(&v, r))
            .collect();
        let picks = pick_template(&m, &templates, 0.3, 24.0).unwrap();
        let metrics = pick_metrics(&picks, &m.occurrences, 2.0);
        assert!(
            metrics.recall > 0.999 && metrics.precision > 0.999,
            "precision {} recall {}",
            metrics.precision,
            metrics.recall
        );
    }

    #[test]
    fn infinite_threshold_picks_nothing() {
        let (m, v) = planted_micrograph(0.1, 4);
        let t = project_real(&v, &crate::geom::Rotation::identity());
        let picks = pick_template(&m, &[t], f64::INFINITY, 16.0).unwrap();
        assert!(picks.centers.is_empty());
    }

    #[test]
    fn template_picking_is_intensity_affine_invariant() {
        let (m, v) = planted_micrograph(0.5, 5);
        let t = project_real(&v, &crate::geom::Rotation::identity());
        let picks = pick_template(&m, std::slice::from_ref(&t), 0.2, 24.0).unwrap();
        let mut m2 = m.clone();
        m2.data.mapv_inplace(|x| 3.5 * x + 11.0);
        let picks2 = pick_template(&m2, &[t], 0.2, 24.0).unwrap();
        assert_eq!(picks.centers, picks2.centers);
    }

    #[test]
    fn mismatched_template_at_low_snr_is_no_better_than_random() {
        let v = test_volume(32);
        let sigma = sigma_for_snr(&v, 0.05).unwrap();
        let params = MicrographParams {
            field: 512,
            density: 0.25,
            separation: 1.2,
            prior: RotationPrior::Uniform,
            ctf: CTFParams::trivial(),
            noise_sigma: sigma,
        };
        let m = synth_micrograph(std::slice::from_ref(&v), &params, 6).unwrap();
        // mismatched template: alternating-sign blobs, orthogonal to the
        // all-positive particle family
        let grid = GridSpec::new(32, 1.0).unwrap();
        let mut t = Image::zeros(grid);
        for ((y, x), o) in t.data.indexed_iter_mut() {
            let dx = grid.centered(x);
            let dy = grid.centered(y);
            let r2 = dx * dx + dy * dy;
            *o = (-r2 / 50.0).exp() * (0.8 * dx).sin() * (0.6 * dy).cos();
        }
        let picks = pick_template(&m, &[t], f64::NEG_INFINITY, 38.4).unwrap();
        let n_picks = m.occurrences.centers.len().min(picks.centers.len());
        let truncated = PickSet {
            centers: picks.centers[..n_picks].to_vec(),
            scores: picks.scores[..n_picks].to_vec(),
            method: "template",
            exclusion_radius: picks.exclusion_radius,
        };
        let recall = pick_metrics(&truncated, &m.occurrences, 16.0).recall;
        // Monte-Carlo null: random pick sets with the same count and margin
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut null = Vec::new();
        for _ in 0..200 {
            let centers: Vec<[f64; 2]> = (0..n_picks)
                .map(|_| {
                    [
                        rng.gen_range(16..496) as f64,
                        rng.gen_range(16..496) as f64,
                    ]
                })
                .collect();
            let rand_picks = PickSet {
                scores: vec![0.0; centers.len()],
                centers,
                method: "random",
                exclusion_radius: 0.0,
            };
            null.push(pick_metrics(&rand_picks, &m.occurrences, 16.0).recall);
        }
        null.sort_by(f64::total_cmp);
        let hi = null[(0.975 * null.len() as f64) as usize];
        assert!(
            recall <= hi + 1e-12,
            "recall {recall} exceeds the null 97.5th percentile {hi}"
        );
    }

    #[test]
    fn refwin_rejects_pure_noise() {
        let grid = GridSpec::new(32, 1.0).unwrap();
        let zero = Volume::zeros(grid);
        let params = MicrographParams {
            field: 512,
            density: 0.0,
            separation: 1.0,
            prior: RotationPrior::Uniform,
            ctf: CTFParams::trivial(),
            noise_sigma: 1.0,
        };
        let m = synth_micrograph(std::slice::from_ref(&zero), &params, 8).unwrap();
        let picks = pick_refwin(&m, 32, &RefWinParams::default()).unwrap();
        // no structure: the discriminant threshold should keep picks rare
        let n_windows = (512.0f64 / 16.0 - 1.0).powi(2);
        assert!(
            (picks.centers.len() as f64) < 0.02 * n_windows,
            "{} picks from pure noise",
            picks.centers.len()
        );
    }

    #[test]
    fn refwin_finds_planted_particles_at_snr_one() {
        let v = test_volume(32);
        let sigma = sigma_for_snr(&v, 1.0).unwrap();
        let params = MicrographParams {
            field: 512,
            density: 0.25,
            separation: 1.2,
            prior: RotationPrior::Uniform,
            ctf: CTFParams::trivial(),
            noise_sigma: sigma,
        };
        let m = synth_micrograph(std::slice::from_ref(&v), &params, 9).unwrap();
        let picks = pick_refwin(&m, 32, &RefWinParams::default()).unwrap();
        let metrics = pick_metrics(&picks, &m.occurrences, 16.0);
        assert!(metrics.recall >= 0.8, "recall {}", metrics.recall);
    }

    #[test]
    fn single_clean_particle_ranks_first() {
        let v = test_volume(32);
        let params = MicrographParams {
            field: 256,
            density: 0.016,
            separation: 1.0,
            prior: RotationPrior::Uniform,
            ctf: CTFParams::trivial(),
            noise_sigma: 0.0,
        };
        let m = synth_micrograph(std::slice::from_ref(&v), &params, 10).unwrap();
        assert_eq!(m.occurrences.centers.len(), 1);
        let picks = pick_refwin(&m, 32, &RefWinParams::default()).unwrap();
        assert!(!picks.centers.is_empty());
        let c = m.occurrences.centers[0];
        let d = ((picks.centers[0][0] - c[0]).powi(2) + (picks.centers[0][1] - c[1]).powi(2))
            .sqrt();
        assert!(d <= 16.0, "top pick {d} px from the particle");
    }

    #[test]
    fn metrics_matching_is_symmetric() {
        let a = PickSet {
            centers: vec![[10.0, 10.0], [50.0, 50.0], [90.0, 10.0]],
            scores: vec![1.0, 0.9, 0.8],
            method: "template",
            exclusion_radius: 5.0,
        };
        let b = OccurrenceMap {
            centers: vec![[12.0, 9.0], [52.0, 49.0]],
            labels: vec![0, 0],
        };
        let m1 = pick_metrics(&a, &b, 5.0);
        // swap roles
        let a2 = PickSet {
            centers: b.centers.clone(),
            scores: vec![0.0; 2],
            method: "template",
            exclusion_radius: 5.0,
        };
        let b2 = OccurrenceMap {
            centers: a.centers.clone(),
            labels: vec![0; 3],
        };
        let m2 = pick_metrics(&a2, &b2, 5.0);
        assert_eq!(m1.matched, m2.matched);
        assert!((m1.precision - m2.recall).abs() < 1e-12);
        assert!((m1.recall - m2.precision).abs() < 1e-12);
    }

    #[test]
    fn single_noise_image_has_negligible_correlation() {
        let grid = GridSpec::new(48, 1.0).unwrap();
        let v = test_volume(48);
        let reference = project_real(&v, &crate::geom::Rotation::identity());
        let _ = grid;
        let (avg, curve) = einstein_from_noise(&reference, 1, 1.0, 42).unwrap();
        assert_eq!(curve.len(), 1);
        assert!(avg.correlation(&reference).abs() < 0.2);
    }

    #[test]
    fn correlation_curve_rises_with_count() {
        let v = test_volume(48);
        let reference = project_real(&v, &crate::geom::Rotation::identity());
        let (_, curve) = einstein_from_noise(&reference, 512, 1.0, 7).unwrap();
        // Spearman rank correlation between log2(n) and correlation
        let vals: Vec<f64> = curve.iter().map(|&(_, c)| c).collect();
        let mut rank: Vec<usize> = (0..vals.len()).collect();
        rank.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let mut rho_num = 0.0;
        let n = vals.len() as f64;
        let mut rank_of = vec![0.0; vals.len()];
        for (pos, &i) in rank.iter().enumerate() {
            rank_of[i] = pos as f64;
        }
        for (i, &r) in rank_of.iter().enumerate() {
            let d = i as f64 - r;
            rho_num += d * d;
        }
        let rho = 1.0 - 6.0 * rho_num / (n * (n * n - 1.0));
        assert!(rho > 0.9, "Spearman rho {rho}");
        assert!(
            vals.last().unwrap() > &0.4,
            "final correlation {}",
            vals.last().unwrap()
        );
    }

    #[test]
    fn constant_reference_averages_toward_zero() {
        let grid = GridSpec::new(32, 1.0).unwrap();
        let mut reference = Image::zeros(grid);
        reference.data.mapv_inplace(|_| 1.0);
        let sigma = 1.0;
        let (avg64, _) = einstein_from_noise(&reference, 64, sigma, 3).unwrap();
        let (avg1024, _) = einstein_from_noise(&reference, 1024, sigma, 3).unwrap();
        // degenerate alignment: the average decays like sigma/sqrt(n)
        let rms64 = (avg64.data.mapv(|v| v * v).sum() / 1024.0).sqrt();
        let rms1024 = (avg1024.data.mapv(|v| v * v).sum() / 1024.0).sqrt();
        let expect64 = sigma / 8.0;
        let expect1024 = sigma / 32.0;
        assert!((rms64 / expect64 - 1.0).abs() < 0.25, "rms64 {rms64}");
        assert!((rms1024 / expect1024 - 1.0).abs() < 0.25, "rms1024 {rms1024}");
    }

    #[test]
    fn ncc_map_peaks_at_planted_center() {
        // direct alignment check of the correlation map indexing
        let grid = GridSpec::new(16, 1.0).unwrap();
        let mut t = Image::zeros(grid);
        t.data[(8, 8)] = 1.0;
        t.data[(7, 9)] = 0.5;
        let mut field = Array2::<f64>::zeros((64, 64));
        field[(37, 22)] = 1.0;
        field[(36, 23)] = 0.5;
        let m = Micrograph {
            data: field,
            pixel_size: 1.0,
            occurrences: Default::default(),
        };
        let map = ncc_map(&m, &t);
        let mut best = (0usize, 0usize, f64::NEG_INFINITY);
        for ((y, x), &v) in map.indexed_iter() {
            if v > best.2 {
                best = (y, x, v);
            }
        }
        assert_eq!((best.0, best.1), (37, 22));
    }
}
