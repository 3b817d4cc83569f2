use cryoem::abinitio::*;
use cryoem::geom::{sample_rotations, Rotation, RotationPrior};

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1]*b[2]-a[2]*b[1], a[2]*b[0]-a[0]*b[2], a[0]*b[1]-a[1]*b[0]]
}
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 { a[0]*b[0]+a[1]*b[1]+a[2]*b[2] }
fn norm3(v: [f64;3]) -> [f64;3] { let n = dot(v,v).sqrt(); [v[0]/n, v[1]/n, v[2]/n] }

fn main() {
    let rots = sample_rotations(3, &RotationPrior::Uniform, 400);
    let truth: Vec<Rotation> = rots.clone();
    let n: Vec<[f64;3]> = truth.iter().map(|r| r.viewing_direction()).collect();
    // true sides
    println!("true cos sides 01 02 12: {:.4} {:.4} {:.4}", dot(n[0],n[1]), dot(n[0],n[2]), dot(n[1],n[2]));
    // true directions
    let d01 = norm3(cross(n[0], n[1]));
    let d02 = norm3(cross(n[0], n[2]));
    let d12 = norm3(cross(n[1], n[2]));
    // vertex angle at n0 between great circles (0,1),(0,2): angle between d01, d02
    println!("true vertex cos at n0: {:.4}", dot(d01, d02));
    println!("true vertex cos at n1: {:.4}", dot(d01, d12));
    println!("true vertex cos at n2: {:.4}", dot(d02, d12));
    // lines
    let p01 = common_line_from_rotations(&truth[0], &truth[1]).unwrap();
    let p02 = common_line_from_rotations(&truth[0], &truth[2]).unwrap();
    let p12 = common_line_from_rotations(&truth[1], &truth[2]).unwrap();
    let a0 = p02.0 - p01.0;
    let a1 = p12.0 - p01.1;
    let a2 = p12.1 - p02.1;
    println!("measured vertex cos: a0 {:.4} a1 {:.4} a2 {:.4}", a0.cos(), a1.cos(), a2.cos());
    // dual law check with measured angles
    let (s0, c0) = (a0.sin().abs(), a0.cos());
    let (s1, c1) = (a1.sin().abs(), a1.cos());
    let (s2, c2) = (a2.sin().abs(), a2.cos());
    println!("dual law cos01 {:.4} (true {:.4})", (c2 + c0*c1)/(s0*s1), dot(n[0],n[1]));
    println!("dual law cos02 {:.4} (true {:.4})", (c1 + c0*c2)/(s0*s2), dot(n[0],n[2]));
    println!("dual law cos12 {:.4} (true {:.4})", (c0 + c1*c2)/(s1*s2), dot(n[1],n[2]));
}
