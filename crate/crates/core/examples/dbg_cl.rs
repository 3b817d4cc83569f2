use cryoem::abinitio::*;
use cryoem::geom::{sample_rotations, RotationPrior};
use cryoem::phantom::{make_phantom, PhantomSpec};
use cryoem::project::project_real;
use cryoem::GridSpec;

fn main() {
    let grid = GridSpec::new(48, 1.0).unwrap();
    let v = make_phantom(&PhantomSpec::demo_8(&grid), &grid).unwrap();
    let n_theta = 180;
    let rots = sample_rotations(24, &RotationPrior::Uniform, 77);
    let slicer = cryoem::slice::FourierSlicer::from_volume(&v);
    let rays: Vec<PolarRays> = rots
        .iter()
        .map(|r| polar_rays(&cryoem::fft::idft2(&slicer.slice(r)), n_theta, &RayBand::default()))
        .collect();
    let bin = std::f64::consts::TAU / n_theta as f64;
    for i in 0..rots.len() {
        for j in (i + 1)..rots.len() {
            let Some(truth) = common_line_from_rotations(&rots[i], &rots[j]) else { continue };
            let found = detect_common_line(&rays[i], &rays[j]).unwrap();
            let err = common_line_error((found.theta_i, found.theta_j), truth);
            let ni = rots[i].viewing_direction();
            let nj = rots[j].viewing_direction();
            let cr = [ni[1]*nj[2]-ni[2]*nj[1], ni[2]*nj[0]-ni[0]*nj[2], ni[0]*nj[1]-ni[1]*nj[0]];
            let cond = (cr[0]*cr[0]+cr[1]*cr[1]+cr[2]*cr[2]).sqrt();
            println!("BINS {:.3} CROSS {:.3}", err / bin, cond);
            let _ = found.score;
        }
    }
}
