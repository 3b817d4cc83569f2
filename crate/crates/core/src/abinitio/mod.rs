//! Initialization-free 3-D modeling.
//!
//! Two routes to a first volume: common lines (detect pairwise common rays,
//! synchronize all rotations spectrally, backproject) and stochastic
//! gradient descent on the marginalized posterior. Both assume reasonably
//! high-SNR inputs; class averages are the intended input for common lines.

mod common_lines;
mod gridding;
mod reconstitution;
mod sgd;
mod sync;

pub use common_lines::{
    common_line_error, common_line_from_rotations, detect_common_line, polar_rays, CommonLine,
    PolarRays, RayBand,
};
pub use gridding::{backproject, FourierAccumulator};
pub use reconstitution::{angular_reconstitution, TripletLines};
pub use sgd::{data_gradient, sgd_map, SgdConfig};
pub use sync::{aligned_rotation_error, sync_rotations, CommonLineTable, SyncResult};

use crate::ctf::CTFParams;
use crate::error::{Error, Result};
use crate::field::{Image, Volume};
use crate::simulate::{Dataset, ImageFormation};
use rayon::prelude::*;

/// Configuration of the common-lines pipeline.
#[derive(Debug, Clone)]
pub struct CommonLinesConfig {
    pub n_theta: usize,
    pub band: RayBand,
    /// Backprojection regularizer.
    pub lambda: f64,
}

impl Default for CommonLinesConfig {
    fn default() -> Self {
        CommonLinesConfig {
            n_theta: 120,
            band: RayBand::default(),
            lambda: 1e-3,
        }
    }
}

/// Common-lines ab initio model from centered, CTF-free images (class
/// averages). Returns the volume and the synchronization report.
pub fn abinitio_commonlines(
    images: &[Image],
    config: &CommonLinesConfig,
) -> Result<(Volume, SyncResult)> {
    if images.len() < 10 {
        return Err(Error::InvalidInput(format!(
            "common lines needs at least 10 images, got {}",
            images.len()
        )));
    }
    let grid = images[0].grid;
    let rays: Vec<PolarRays> = images
        .par_iter()
        .map(|im| polar_rays(im, config.n_theta, &config.band))
        .collect();
    let n = images.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let detected: Vec<(usize, usize, CommonLine)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let line = detect_common_line(&rays[i], &rays[j]).expect("matching ray grids");
            (i, j, line)
        })
        .collect();
    let mut table = CommonLineTable::new(n);
    for (i, j, line) in detected {
        table.push(i, j, line.theta_i, line.theta_j, line.score);
    }
    let sync = sync_rotations(&table)?;
    // class averages are centered by construction: zero shifts
    let ds = Dataset {
        grid,
        images: images.to_vec(),
        truth: images
            .iter()
            .map(|_| ImageFormation {
                rotation: crate::geom::Rotation::identity(),
                shift: [0.0, 0.0],
                ctf_id: 0,
                noise_sigma: 0.0,
                class: 0,
            })
            .collect(),
        ctf_pool: vec![CTFParams::trivial()],
    };
    let shifts = vec![[0.0, 0.0]; n];
    let volume = backproject(&ds, &sync.rotations, &shifts, config.lambda)?;
    Ok((volume, sync))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{sample_rotations, RotationPrior};
    use crate::grid::GridSpec;
    use crate::phantom::{make_phantom, PhantomSpec};
    use crate::project::project_real;

    #[test]
    fn detected_lines_synchronize_planted_rotations() {
        let grid = GridSpec::new(48, 1.0).unwrap();
        let v = make_phantom(&PhantomSpec::demo_8(&grid), &grid).unwrap();
        let rots = sample_rotations(16, &RotationPrior::Uniform, 21);
        let images: Vec<Image> = rots.iter().map(|r| project_real(&v, r)).collect();
        let (volume, sync) = abinitio_commonlines(&images, &CommonLinesConfig::default()).unwrap();
        assert!(volume.norm() > 0.0);
        let err = aligned_rotation_error(&sync.rotations, &rots);
        assert!(err < 8.0, "rotation error {err} degrees");
    }

    #[test]
    fn too_few_images_is_rejected() {
        let grid = GridSpec::new(16, 1.0).unwrap();
        let images = vec![Image::zeros(grid); 4];
        assert!(abinitio_commonlines(&images, &CommonLinesConfig::default()).is_err());
    }
}
