//! Gaussian-blob phantom volumes with known ground truth.

use crate::error::{Error, Result};
use crate::field::Volume;
use crate::grid::GridSpec;
use serde::{Deserialize, Serialize};

/// One isotropic Gaussian blob.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Blob {
    /// Center in angstroms, relative to the volume center.
    pub center: [f64; 3],
    pub amplitude: f64,
    /// Standard deviation in angstroms.
    pub sigma: f64,
}

/// A sum-of-Gaussians phantom description.
///
/// Blob centers must stay inside a ball of radius `0.4 * L * pixel_size` so
/// the structure can be rotated without wrapping out of the grid.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct PhantomSpec {
    pub blobs: Vec<Blob>,
}

impl PhantomSpec {
    /// The default asymmetric 8-blob phantom, scaled to a grid extent.
    ///
    /// Deliberately has no symmetry and no mirror symmetry, so orientation
    /// and handedness recovery can be tested against it.
    pub fn demo_8(grid: &GridSpec) -> Self {
        let e = grid.extent();
        let blob = |c: [f64; 3], a: f64, s: f64| Blob {
            center: [c[0] * e, c[1] * e, c[2] * e],
            amplitude: a,
            sigma: s * e,
        };
        PhantomSpec {
            blobs: vec![
                blob([0.0, 0.0, 0.0], 1.0, 0.10),
                blob([0.22, 0.05, 0.03], 0.9, 0.055),
                blob([-0.17, 0.16, -0.06], 0.8, 0.050),
                blob([0.05, -0.21, 0.10], 0.85, 0.048),
                blob([-0.08, -0.10, -0.20], 0.7, 0.045),
                blob([0.16, 0.18, 0.17], 0.65, 0.040),
                blob([-0.23, -0.02, 0.12], 0.6, 0.038),
                blob([0.02, 0.24, -0.16], 0.55, 0.035),
            ],
        }
    }

    /// A second, clearly distinct phantom for heterogeneity experiments.
    pub fn demo_variant(grid: &GridSpec) -> Self {
        let e = grid.extent();
        let blob = |c: [f64; 3], a: f64, s: f64| Blob {
            center: [c[0] * e, c[1] * e, c[2] * e],
            amplitude: a,
            sigma: s * e,
        };
        PhantomSpec {
            blobs: vec![
                blob([0.0, 0.0, 0.0], 1.0, 0.12),
                blob([-0.24, -0.08, -0.04], 0.9, 0.050),
                blob([0.20, -0.15, 0.08], 0.85, 0.055),
                blob([-0.04, 0.22, -0.12], 0.8, 0.045),
                blob([0.10, 0.08, 0.22], 0.7, 0.042),
            ],
        }
    }
}

/// Render a phantom onto a grid.
///
/// Rejects blobs whose centers leave the support ball of radius
/// `0.4 * extent`.
pub fn make_phantom(spec: &PhantomSpec, grid: &GridSpec) -> Result<Volume> {
    let margin = 0.4 * grid.extent();
    for (i, b) in spec.blobs.iter().enumerate() {
        let r = (b.center[0] * b.center[0]
            + b.center[1] * b.center[1]
            + b.center[2] * b.center[2])
            .sqrt();
        if r > margin {
            return Err(Error::InvalidInput(format!(
                "blob {i} center at radius {r:.1} A exceeds support margin {margin:.1} A"
            )));
        }
        if !(b.sigma > 0.0) {
            return Err(Error::InvalidInput(format!("blob {i} has sigma {}", b.sigma)));
        }
    }
    let mut v = Volume::zeros(*grid);
    let ps = grid.pixel_size();
    let l = grid.side();
    for b in &spec.blobs {
        let inv2s2 = 1.0 / (2.0 * b.sigma * b.sigma);
        // Only touch voxels within 5 sigma of the center.
        let reach = (5.0 * b.sigma / ps).ceil() as isize;
        let cz = (b.center[2] / ps + grid.center() as f64).round() as isize;
        let cy = (b.center[1] / ps + grid.center() as f64).round() as isize;
        let cx = (b.center[0] / ps + grid.center() as f64).round() as isize;
        for z in (cz - reach).max(0)..=(cz + reach).min(l as isize - 1) {
            let dz = grid.centered(z as usize) * ps - b.center[2];
            for y in (cy - reach).max(0)..=(cy + reach).min(l as isize - 1) {
                let dy = grid.centered(y as usize) * ps - b.center[1];
                for x in (cx - reach).max(0)..=(cx + reach).min(l as isize - 1) {
                    let dx = grid.centered(x as usize) * ps - b.center[0];
                    let r2 = dx * dx + dy * dy + dz * dz;
                    v.data[(z as usize, y as usize, x as usize)] +=
                        b.amplitude * (-r2 * inv2s2).exp();
                }
            }
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_unit_blob_peaks_at_amplitude() {
        let grid = GridSpec::new(32, 1.0).unwrap();
        let spec = PhantomSpec {
            blobs: vec![Blob {
                center: [0.0, 0.0, 0.0],
                amplitude: 2.5,
                sigma: 3.0,
            }],
        };
        let v = make_phantom(&spec, &grid).unwrap();
        let c = grid.center();
        assert!((v.data[(c, c, c)] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn empty_spec_gives_zero_volume() {
        let grid = GridSpec::new(16, 1.0).unwrap();
        let v = make_phantom(&PhantomSpec::default(), &grid).unwrap();
        assert_eq!(v.norm(), 0.0);
    }

    #[test]
    fn two_blobs_superpose_voxelwise() {
        let grid = GridSpec::new(24, 2.0).unwrap();
        let b1 = Blob {
            center: [4.0, -6.0, 2.0],
            amplitude: 1.0,
            sigma: 4.0,
        };
        let b2 = Blob {
            center: [-8.0, 3.0, -5.0],
            amplitude: 0.5,
            sigma: 6.0,
        };
        let both = make_phantom(
            &PhantomSpec {
                blobs: vec![b1, b2],
            },
            &grid,
        )
        .unwrap();
        // Direct evaluation of the two Gaussians at every voxel. The
        // renderer truncates blobs at 5 sigma, so tails below
        // exp(-12.5) ~ 3.7e-6 may be dropped; the tolerance covers that.
        let ps = grid.pixel_size();
        for ((z, y, x), &v) in both.data.indexed_iter() {
            let p = [
                grid.centered(x) * ps,
                grid.centered(y) * ps,
                grid.centered(z) * ps,
            ];
            let mut want = 0.0;
            for b in [&b1, &b2] {
                let r2 = (p[0] - b.center[0]).powi(2)
                    + (p[1] - b.center[1]).powi(2)
                    + (p[2] - b.center[2]).powi(2);
                want += b.amplitude * (-r2 / (2.0 * b.sigma * b.sigma)).exp();
            }
            assert!((v - want).abs() < 5e-6);
        }
    }

    #[test]
    fn rejects_blob_outside_support_margin() {
        let grid = GridSpec::new(32, 1.0).unwrap();
        let spec = PhantomSpec {
            blobs: vec![Blob {
                center: [20.0, 0.0, 0.0],
                amplitude: 1.0,
                sigma: 1.0,
            }],
        };
        assert!(make_phantom(&spec, &grid).is_err());
    }

    #[test]
    fn demo_phantoms_fit_their_grid() {
        let grid = GridSpec::new(64, 3.0).unwrap();
        assert!(make_phantom(&PhantomSpec::demo_8(&grid), &grid).is_ok());
        assert!(make_phantom(&PhantomSpec::demo_variant(&grid), &grid).is_ok());
    }
}
