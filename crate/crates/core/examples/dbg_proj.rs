use cryoem::fft::dft2;
use cryoem::geom::{sample_rotations, RotationPrior};
use cryoem::phantom::{make_phantom, PhantomSpec};
use cryoem::project::project_real;
use cryoem::slice::FourierSlicer;
use cryoem::GridSpec;

fn main() {
    let grid = GridSpec::new(48, 1.0).unwrap();
    let v = make_phantom(&PhantomSpec::demo_8(&grid), &grid).unwrap();
    let slicer = FourierSlicer::from_volume(&v);
    let rots = sample_rotations(20, &RotationPrior::Uniform, 3);
    let mut pow_p = vec![0.0f64; 25];
    let mut pow_s = vec![0.0f64; 25];
    let mut cross = vec![0.0f64; 25];
    for r in &rots {
        let p = dft2(&project_real(&v, r));
        let s = slicer.slice(r);
        for ((y, x), a) in p.data.indexed_iter() {
            let rad = (grid.centered(x).powi(2) + grid.centered(y).powi(2)).sqrt();
            let sh = rad.round() as usize;
            if sh < 25 {
                let b = s.data[(y, x)];
                pow_p[sh] += a.norm_sqr();
                pow_s[sh] += b.norm_sqr();
                cross[sh] += (a * b.conj()).re;
            }
        }
    }
    for sh in (1..25).step_by(2) {
        println!(
            "shell {sh:2}: proj/slice amp {:.4} corr {:.5}",
            (pow_p[sh] / pow_s[sh]).sqrt(),
            cross[sh] / (pow_p[sh] * pow_s[sh]).sqrt()
        );
    }
}
