//! Contrast transfer function: evaluation, Thon-ring estimation, and
//! correction.
//!
//! The weak-phase CTF is
//! `-sin(pi lambda |k|^2 df - pi lambda^3 |k|^4 Cs / 2 + alpha) * E(|k|)`
//! with envelope `E(|k|) = exp(-b |k|^2 / 4)`. Frequencies are in 1/Å,
//! defocus in Å (positive = underfocus), Cs in mm.

use crate::error::{Error, Result};
use crate::fft::dft2;
use crate::field::{FourierImage, Image};
use crate::grid::GridSpec;
use crate::simulate::Micrograph;
use serde::{Deserialize, Serialize};

/// Optional astigmatism: defocus varying with ring azimuth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Astigmatism {
    pub defocus_major: f64,
    pub defocus_minor: f64,
    /// Azimuth of the major axis, radians.
    pub angle: f64,
}

/// Microscope parameters of one micrograph's transfer function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CTFParams {
    /// Electron wavelength, Å.
    pub wavelength: f64,
    /// Defocus, Å.
    pub defocus: f64,
    /// Spherical aberration, mm.
    pub cs: f64,
    /// Constant phase shift, radians.
    pub phase_shift: f64,
    /// Envelope B-factor, Å^2.
    pub b_factor: f64,
    pub astigmatism: Option<Astigmatism>,
}

/// Relativistic electron wavelength in Å for an accelerating voltage in kV.
pub fn wavelength_from_kv(kv: f64) -> f64 {
    let v = kv * 1e3;
    12.2639 / (v + 0.97845e-6 * v * v).sqrt()
}

impl CTFParams {
    /// Typical 300 kV setup with a given defocus in Å.
    pub fn with_defocus(defocus: f64) -> Self {
        CTFParams {
            wavelength: wavelength_from_kv(300.0),
            defocus,
            cs: 2.7,
            phase_shift: 0.07,
            b_factor: 0.0,
            astigmatism: None,
        }
    }

    /// An all-pass transfer function (identity optics) for tests and
    /// CTF-free simulation.
    pub fn trivial() -> Self {
        CTFParams {
            wavelength: wavelength_from_kv(300.0),
            defocus: 0.0,
            cs: 0.0,
            // sin(-pi/2) = -1 and the leading minus makes the transfer +1
            phase_shift: -std::f64::consts::FRAC_PI_2,
            b_factor: 0.0,
            astigmatism: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) {
            return Err(Error::InvalidInput(format!(
                "wavelength must be positive, got {}",
                self.wavelength
            )));
        }
        if self.b_factor < 0.0 {
            return Err(Error::InvalidInput(format!(
                "b_factor must be nonnegative, got {}",
                self.b_factor
            )));
        }
        if let Some(a) = &self.astigmatism {
            if a.defocus_major < a.defocus_minor {
                return Err(Error::InvalidInput(
                    "astigmatism must have defocus_major >= defocus_minor".into(),
                ));
            }
        }
        Ok(())
    }

    /// Defocus seen at frequency azimuth `theta_k`.
    fn defocus_at(&self, theta_k: f64) -> f64 {
        match &self.astigmatism {
            None => self.defocus,
            Some(a) => {
                0.5 * (a.defocus_major + a.defocus_minor)
                    + 0.5
                        * (a.defocus_major - a.defocus_minor)
                        * (2.0 * (theta_k - a.angle)).cos()
            }
        }
    }

    /// Transfer value at radial frequency `k` (1/Å) and azimuth `theta_k`.
    pub fn eval(&self, k: f64, theta_k: f64) -> f64 {
        let k2 = k * k;
        let df = self.defocus_at(theta_k);
        let arg = std::f64::consts::PI * self.wavelength * k2 * df
            - 0.5 * std::f64::consts::PI * self.wavelength.powi(3) * k2 * k2 * (self.cs * 1e7)
            + self.phase_shift;
        let envelope = (-self.b_factor * k2 / 4.0).exp();
        -arg.sin() * envelope
    }

    /// Radial transfer profile (no astigmatism applied) at given radii.
    pub fn eval_radial(&self, freqs: &[f64]) -> Vec<f64> {
        freqs.iter().map(|&k| self.eval(k, 0.0)).collect()
    }

    /// Zero crossings `|k| = sqrt(m / (lambda df))` of the pure-defocus CTF
    /// (alpha = 0, Cs = 0), for analytic cross-checks.
    pub fn defocus_zeros(&self, count: usize) -> Vec<f64> {
        (1..=count)
            .map(|m| (m as f64 / (self.wavelength * self.defocus)).sqrt())
            .collect()
    }
}

/// Evaluate the CTF on a centered frequency grid as a real-valued image.
pub fn eval_ctf(p: &CTFParams, grid: &GridSpec) -> Image {
    let mut out = Image::zeros(*grid);
    for ((y, x), o) in out.data.indexed_iter_mut() {
        let kx = grid.freq(x);
        let ky = grid.freq(y);
        let k = (kx * kx + ky * ky).sqrt();
        let theta = ky.atan2(kx);
        *o = p.eval(k, theta);
    }
    out
}

/// A rotationally averaged power spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialSpectrum {
    /// Ring frequencies, 1/Å, strictly increasing, <= Nyquist.
    pub freqs: Vec<f64>,
    /// Mean power per ring, >= 0.
    pub power: Vec<f64>,
}

impl RadialSpectrum {
    pub fn validate(&self) -> Result<()> {
        if self.freqs.len() != self.power.len() {
            return Err(Error::InvalidInput("freqs/power length mismatch".into()));
        }
        if self.freqs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "ring frequencies must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    /// Linear interpolation with flat extrapolation.
    pub fn at(&self, k: f64) -> f64 {
        if self.freqs.is_empty() {
            return 0.0;
        }
        if k <= self.freqs[0] {
            return self.power[0];
        }
        if k >= *self.freqs.last().unwrap() {
            return *self.power.last().unwrap();
        }
        let idx = self.freqs.partition_point(|&f| f < k);
        let (f0, f1) = (self.freqs[idx - 1], self.freqs[idx]);
        let t = (k - f0) / (f1 - f0);
        self.power[idx - 1] * (1.0 - t) + self.power[idx] * t
    }
}

/// Average windowed periodograms of a micrograph and bin them radially.
pub fn radial_power_spectrum(m: &Micrograph, window: usize) -> Result<RadialSpectrum> {
    let (rows, cols) = m.data.dim();
    if window == 0 || window % 2 != 0 || window > rows || window > cols {
        return Err(Error::InvalidInput(format!(
            "window {window} invalid for {rows}x{cols} micrograph"
        )));
    }
    let grid = GridSpec::new(window, m.pixel_size)?;
    let n_bins = window / 2;
    let mut acc = vec![0.0f64; n_bins];
    let mut cnt = vec![0usize; n_bins];
    let mut tiles = 0;
    let mut ty = 0;
    while ty + window <= rows {
        let mut tx = 0;
        while tx + window <= cols {
            let mut tile = Image::zeros(grid);
            let mut mean = 0.0;
            for y in 0..window {
                for x in 0..window {
                    let v = m.data[(ty + y, tx + x)];
                    tile.data[(y, x)] = v;
                    mean += v;
                }
            }
            mean /= (window * window) as f64;
            tile.data.mapv_inplace(|v| v - mean);
            let spec = dft2(&tile);
            for ((y, x), v) in spec.data.indexed_iter() {
                let r = (grid.centered(x).powi(2) + grid.centered(y).powi(2)).sqrt();
                let bin = r.round() as usize;
                if bin >= 1 && bin < n_bins + 1 {
                    acc[bin - 1] += v.norm_sqr();
                    cnt[bin - 1] += 1;
                }
            }
            tiles += 1;
            tx += window;
        }
        ty += window;
    }
    if tiles == 0 {
        return Err(Error::InvalidInput("micrograph smaller than window".into()));
    }
    let freqs = (1..=n_bins).map(|b| b as f64 * grid.freq_step()).collect();
    let power = acc
        .iter()
        .zip(cnt.iter())
        .map(|(a, &c)| if c > 0 { a / c as f64 } else { 0.0 })
        .collect();
    Ok(RadialSpectrum { freqs, power })
}

/// Nonincreasing isotonic fit (pool adjacent violators): the smooth
/// monotone background under the Thon rings.
fn isotonic_decreasing(y: &[f64]) -> Vec<f64> {
    // PAVA on the reversed sequence gives a nondecreasing fit; reverse back.
    let rev: Vec<f64> = y.iter().rev().copied().collect();
    let mut level: Vec<f64> = Vec::with_capacity(rev.len());
    let mut weight: Vec<f64> = Vec::with_capacity(rev.len());
    for &v in &rev {
        level.push(v);
        weight.push(1.0);
        while level.len() > 1 && level[level.len() - 2] > level[level.len() - 1] {
            let (l1, w1) = (level.pop().unwrap(), weight.pop().unwrap());
            let (l0, w0) = (level.pop().unwrap(), weight.pop().unwrap());
            level.push((l0 * w0 + l1 * w1) / (w0 + w1));
            weight.push(w0 + w1);
        }
    }
    let mut out = Vec::with_capacity(rev.len());
    for (l, w) in level.iter().zip(weight.iter()) {
        for _ in 0..(*w as usize) {
            out.push(*l);
        }
    }
    out.reverse();
    out
}

/// Defocus search configuration for [`estimate_ctf`].
#[derive(Debug, Clone, Copy)]
pub struct DefocusSearch {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

/// Result of a CTF fit.
#[derive(Debug, Clone)]
pub struct CTFFit {
    pub params: CTFParams,
    pub score: f64,
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        num += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        0.0
    } else {
        num / (va * vb).sqrt()
    }
}

const FIT_SCORE_FLOOR: f64 = 0.2;

/// Fit defocus (and a coarse B-factor) to a measured radial spectrum.
///
/// Correlates `|CTF|^2` templates against the background-subtracted
/// spectrum over a defocus grid, refines the winner by golden-section
/// search, and fails with [`Error::FitFailed`] when no template correlates
/// above 0.2 (no detectable rings). Ties break toward smaller defocus.
pub fn estimate_ctf(
    spec: &RadialSpectrum,
    search: &DefocusSearch,
    fixed: &CTFParams,
) -> Result<CTFFit> {
    spec.validate()?;
    if !(search.min > 0.0) || search.max <= search.min || !(search.step > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bad defocus search range {:?}",
            search
        )));
    }
    // fit band: skip the lowest rings (beam/background dominated)
    let lo = spec.freqs.len() / 16;
    let band: Vec<usize> = (lo..spec.freqs.len()).collect();
    let background = isotonic_decreasing(&spec.power);
    let residual: Vec<f64> = band
        .iter()
        .map(|&i| spec.power[i] - background[i])
        .collect();
    let freqs: Vec<f64> = band.iter().map(|&i| spec.freqs[i]).collect();

    let template_for = |defocus: f64, b_factor: f64| -> Vec<f64> {
        let p = CTFParams {
            defocus,
            b_factor,
            ..*fixed
        };
        let t: Vec<f64> = freqs.iter().map(|&k| p.eval(k, 0.0).powi(2)).collect();
        // same background treatment as the data
        let full: Vec<f64> = spec
            .freqs
            .iter()
            .map(|&k| p.eval(k, 0.0).powi(2))
            .collect();
        let bg = isotonic_decreasing(&full);
        t.iter()
            .zip(band.iter())
            .map(|(v, &i)| v - bg[i])
            .collect()
    };

    let score_of = |defocus: f64, b_factor: f64| -> f64 {
        pearson(&template_for(defocus, b_factor), &residual)
    };

    let b_grid = [0.0, 50.0, 150.0, 400.0];
    let mut best = (search.min, 0.0, f64::NEG_INFINITY);
    let mut df = search.min;
    while df <= search.max + 1e-9 {
        for &b in &b_grid {
            let s = score_of(df, b);
            // strictly-greater keeps the smaller defocus on ties
            if s > best.2 + 1e-12 {
                best = (df, b, s);
            }
        }
        df += search.step;
    }

    // golden-section refinement of defocus around the winner
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (
        (best.0 - search.step).max(search.min),
        (best.0 + search.step).min(search.max),
    );
    let bf = best.1;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = score_of(c, bf);
    let mut fd = score_of(d, bf);
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = score_of(c, bf);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = score_of(d, bf);
        }
        if (b - a) < 1e-3 {
            break;
        }
    }
    let refined = 0.5 * (a + b);
    let final_score = score_of(refined, bf);
    let (df_best, score) = if final_score >= best.2 {
        (refined, final_score)
    } else {
        (best.0, best.2)
    };
    if score < FIT_SCORE_FLOOR {
        return Err(Error::FitFailed {
            score,
            threshold: FIT_SCORE_FLOOR,
        });
    }
    Ok(CTFFit {
        params: CTFParams {
            defocus: df_best,
            b_factor: bf,
            ..*fixed
        },
        score,
    })
}

/// Multiply every coefficient by the sign of the CTF there. Spectrum
/// magnitudes are unchanged; applying twice is the identity.
pub fn phase_flip(fi: &FourierImage, p: &CTFParams) -> FourierImage {
    let mut out = fi.clone();
    for ((y, x), v) in out.data.indexed_iter_mut() {
        let kx = fi.grid.freq(x);
        let ky = fi.grid.freq(y);
        let c = p.eval((kx * kx + ky * ky).sqrt(), ky.atan2(kx));
        if c < 0.0 {
            *v = -*v;
        }
    }
    out
}

/// Wiener filter `CTF / (CTF^2 + 1/ssnr(|k|))`; zero where both the CTF and
/// the SSNR vanish.
pub fn wiener_correct(fi: &FourierImage, p: &CTFParams, ssnr: &RadialSpectrum) -> FourierImage {
    let mut out = fi.clone();
    for ((y, x), v) in out.data.indexed_iter_mut() {
        let kx = fi.grid.freq(x);
        let ky = fi.grid.freq(y);
        let k = (kx * kx + ky * ky).sqrt();
        let c = p.eval(k, ky.atan2(kx));
        let s = ssnr.at(k).max(0.0);
        let gain = if s == 0.0 { 0.0 } else { c / (c * c + 1.0 / s) };
        *v *= gain;
    }
    out
}
