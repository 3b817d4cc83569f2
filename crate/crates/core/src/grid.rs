//! Sampling grids for real-space and frequency-space fields.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A centered cubic/square sampling grid.
///
/// The grid has `side` samples per axis (always even) spaced `pixel_size`
/// angstroms apart. Index `side / 2` is the origin in both real space and
/// frequency space, so a field and its centered DFT share one indexing
/// convention. Frequencies span `[-1/(2 px), +1/(2 px))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    side: usize,
    pixel_size: f64,
}

impl GridSpec {
    pub fn new(side: usize, pixel_size: f64) -> Result<Self> {
        if side == 0 || side % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "grid side must be positive and even, got {side}"
            )));
        }
        if !(pixel_size > 0.0) || !pixel_size.is_finite() {
            return Err(Error::InvalidInput(format!(
                "pixel size must be positive and finite, got {pixel_size}"
            )));
        }
        Ok(GridSpec { side, pixel_size })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    /// Index of the origin (DC bin / real-space center) on each axis.
    pub fn center(&self) -> usize {
        self.side / 2
    }

    /// Signed sample offset of `index` from the grid center, in samples.
    pub fn centered(&self, index: usize) -> f64 {
        index as f64 - self.center() as f64
    }

    /// Frequency step between adjacent bins, 1/Å.
    pub fn freq_step(&self) -> f64 {
        1.0 / (self.side as f64 * self.pixel_size)
    }

    /// Physical frequency of bin `index`, 1/Å.
    pub fn freq(&self, index: usize) -> f64 {
        self.centered(index) * self.freq_step()
    }

    /// The Nyquist frequency, 1/Å.
    pub fn nyquist(&self) -> f64 {
        0.5 / self.pixel_size
    }

    /// Radial shell index (in bins) of a frequency-space point.
    pub fn shell_of(&self, radius_bins: f64) -> usize {
        radius_bins.round().max(0.0) as usize
    }

    /// Number of radial shells up to and including Nyquist.
    pub fn n_shells(&self) -> usize {
        self.side / 2 + 1
    }

    /// Physical frequency of shell `s`, 1/Å.
    pub fn shell_freq(&self, shell: usize) -> f64 {
        shell as f64 * self.freq_step()
    }

    /// Physical edge length of the grid, Å.
    pub fn extent(&self) -> f64 {
        self.side as f64 * self.pixel_size
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_and_degenerate_grids() {
        assert!(GridSpec::new(63, 1.0).is_err());
        assert!(GridSpec::new(0, 1.0).is_err());
        assert!(GridSpec::new(64, 0.0).is_err());
        assert!(GridSpec::new(64, -2.0).is_err());
    }

    #[test]
    fn frequency_axis_spans_minus_to_plus_nyquist() {
        let g = GridSpec::new(8, 2.0).unwrap();
        assert_eq!(g.center(), 4);
        assert_eq!(g.freq(4), 0.0);
        // lowest bin sits at -Nyquist, highest one step below +Nyquist
        assert!((g.freq(0) + g.nyquist()).abs() < 1e-15);
        assert!((g.freq(7) - (g.nyquist() - g.freq_step())).abs() < 1e-15);
    }
}
