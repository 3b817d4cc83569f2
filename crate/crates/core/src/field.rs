//! Real and complex scalar fields on centered grids.
//!
//! `Volume`/`Image` hold real-space samples; `FourierVolume`/`FourierImage`
//! hold centered spectra (DC at index `side/2` on every axis). All four pair
//! the data with the [`GridSpec`] that gives indices physical meaning.
//! Array axes are ordered `(z, y, x)` / `(y, x)`, x fastest.

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use ndarray::{Array2, Array3};
use num_complex::Complex64;

/// A real-valued 3-D field on a centered cubic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub grid: GridSpec,
    pub data: Array3<f64>,
}

/// A real-valued 2-D field on a centered square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub grid: GridSpec,
    pub data: Array2<f64>,
}

/// Centered 3-D spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierVolume {
    pub grid: GridSpec,
    pub data: Array3<Complex64>,
}

/// Centered 2-D spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierImage {
    pub grid: GridSpec,
    pub data: Array2<Complex64>,
}

impl Volume {
    pub fn zeros(grid: GridSpec) -> Self {
        let l = grid.side();
        Volume {
            grid,
            data: Array3::zeros((l, l, l)),
        }
    }

    pub fn from_data(grid: GridSpec, data: Array3<f64>) -> Result<Self> {
        let l = grid.side();
        if data.dim() != (l, l, l) {
            return Err(Error::InvalidInput(format!(
                "volume data {:?} does not match grid side {l}",
                data.dim()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("volume contains non-finite entries".into()));
        }
        Ok(Volume { grid, data })
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Volume) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .sum()
    }
}

impl Image {
    pub fn zeros(grid: GridSpec) -> Self {
        let l = grid.side();
        Image {
            grid,
            data: Array2::zeros((l, l)),
        }
    }

    pub fn from_data(grid: GridSpec, data: Array2<f64>) -> Result<Self> {
        let l = grid.side();
        if data.dim() != (l, l) {
            return Err(Error::InvalidInput(format!(
                "image data {:?} does not match grid side {l}",
                data.dim()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("image contains non-finite entries".into()));
        }
        Ok(Image { grid, data })
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Image) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Pearson correlation between two images.
    pub fn correlation(&self, other: &Image) -> f64 {
        let n = self.data.len() as f64;
        let ma = self.data.sum() / n;
        let mb = other.data.sum() / n;
        let mut num = 0.0;
        let mut va = 0.0;
        let mut vb = 0.0;
        for (a, b) in self.data.iter().zip(other.data.iter()) {
            let da = a - ma;
            let db = b - mb;
            num += da * db;
            va += da * da;
            vb += db * db;
        }
        if va <= 0.0 || vb <= 0.0 {
            0.0
        } else {
            num / (va * vb).sqrt()
        }
    }
}

impl FourierVolume {
    pub fn zeros(grid: GridSpec) -> Self {
        let l = grid.side();
        FourierVolume {
            grid,
            data: Array3::zeros((l, l, l)),
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest relative deviation from Hermitian symmetry `X(-k) = conj X(k)`.
    pub fn hermitian_error(&self) -> f64 {
        let l = self.grid.side();
        let c = self.grid.center() as isize;
        let scale = self.data.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        let wrap = |k: isize| -> usize { (((2 * c - k) % l as isize + l as isize) % l as isize) as usize };
        for z in 0..l {
            for y in 0..l {
                for x in 0..l {
                    let v = self.data[(z, y, x)];
                    let m = self.data[(wrap(z as isize), wrap(y as isize), wrap(x as isize))];
                    worst = worst.max((v - m.conj()).norm() / scale);
                }
            }
        }
        worst
    }
}

impl FourierImage {
    pub fn zeros(grid: GridSpec) -> Self {
        let l = grid.side();
        FourierImage {
            grid,
            data: Array2::zeros((l, l)),
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn hermitian_error(&self) -> f64 {
        let l = self.grid.side();
        let c = self.grid.center() as isize;
        let scale = self.data.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let wrap = |k: isize| -> usize { (((2 * c - k) % l as isize + l as isize) % l as isize) as usize };
        let mut worst = 0.0f64;
        for y in 0..l {
            for x in 0..l {
                let v = self.data[(y, x)];
                let m = self.data[(wrap(y as isize), wrap(x as isize))];
                worst = worst.max((v - m.conj()).norm() / scale);
            }
        }
        worst
    }
}
