use cryoem::abinitio::backproject;
use cryoem::ctf::CTFParams;
use cryoem::fft::dft3;
use cryoem::geom::Rotation;
use cryoem::phantom::{make_phantom, PhantomSpec};
use cryoem::simulate::{render_dataset, SimParams};
use cryoem::GridSpec;

fn main() {
    let grid = GridSpec::new(48, 1.0).unwrap();
    let v = make_phantom(&PhantomSpec::demo_8(&grid), &grid).unwrap();
    let mut ds = render_dataset(std::slice::from_ref(&v), 2000, &SimParams::noiseless(CTFParams::trivial()), 5).unwrap();
    if std::env::args().any(|a| a == "slicer") {
        let slicer = cryoem::slice::FourierSlicer::from_volume(&v);
        for (im, f) in ds.images.iter_mut().zip(ds.truth.iter()) {
            *im = cryoem::fft::idft2(&slicer.slice(&f.rotation));
        }
    }
    let rotations: Vec<Rotation> = ds.truth.iter().map(|f| f.rotation).collect();
    let shifts = vec![[0.0, 0.0]; ds.len()];
    let recon = backproject(&ds, &rotations, &shifts, 1e-3).unwrap();
    let fr = dft3(&recon);
    let ft = dft3(&v);
    let mut pow_r = vec![0.0f64; 25];
    let mut pow_t = vec![0.0f64; 25];
    let mut cross = vec![0.0f64; 25];
    let mut errsq = vec![0.0f64; 25];
    for ((z, y, x), a) in fr.data.indexed_iter() {
        let r = ((grid.centered(x)).powi(2) + (grid.centered(y)).powi(2) + (grid.centered(z)).powi(2)).sqrt();
        let s = r.round() as usize;
        if s < 25 {
            let t = ft.data[(z, y, x)];
            pow_r[s] += a.norm_sqr();
            pow_t[s] += t.norm_sqr();
            cross[s] += (a * t.conj()).re;
            errsq[s] += (a - t).norm_sqr();
        }
    }
    let mut tot_e = 0.0;
    let mut tot_p = 0.0;
    for s in 1..25 {
        let amp_ratio = (pow_r[s] / pow_t[s]).sqrt();
        let corr = cross[s] / (pow_r[s] * pow_t[s]).sqrt();
        let rel = (errsq[s] / pow_t[s]).sqrt();
        if s <= 16 {
            tot_e += errsq[s];
            tot_p += pow_t[s];
        }
        println!("shell {s:2}: amp_ratio {amp_ratio:.4} corr {corr:.5} rel_err {rel:.4} powfrac {:.4}", pow_t[s] / pow_t[1]);
    }
    println!("aggregate (<=16): {:.4}", (tot_e / tot_p).sqrt());
}
