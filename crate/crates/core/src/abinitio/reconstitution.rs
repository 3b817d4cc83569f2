//! Angular reconstitution: three pairwise common lines determine three
//! rotations up to a global rotation and handedness.
//!
//! The three plane normals form a spherical triangle whose vertex angles
//! are measured directly in the images (angles between the two common
//! lines each image shares with the other two). The dual spherical law of
//! cosines then gives the arcs between normals, from which the rotations
//! are assembled in a fixed gauge (first rotation = identity).

use crate::error::{Error, Result};
use crate::geom::Rotation;

/// Pairwise common-line angles of a triplet, in each image's polar frame.
#[derive(Debug, Clone, Copy)]
pub struct TripletLines {
    /// (angle in image a, angle in image b) of the common line of each
    /// pair, ordered (0,1), (0,2), (1,2).
    pub pair_01: (f64, f64),
    pub pair_02: (f64, f64),
    pub pair_12: (f64, f64),
}

const COPLANAR_TOL: f64 = 0.02;

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = dot(v, v).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Rotation with third row `n` mapping the in-plane ray at `theta` onto the
/// 3-D direction `d` (`R^T (cos theta, sin theta, 0) = d`, `R^T z = n`).
fn rotation_from_plane(n: [f64; 3], theta: f64, d: [f64; 3]) -> Rotation {
    let p = normalize(d);
    let q = normalize(cross(n, p));
    let (s, c) = (-theta).sin_cos();
    let w = [c * p[0] + s * q[0], c * p[1] + s * q[1], c * p[2] + s * q[2]];
    let t = [
        -s * p[0] + c * q[0],
        -s * p[1] + c * q[1],
        -s * p[2] + c * q[2],
    ];
    let m = [[w[0], w[1], w[2]], [t[0], t[1], t[2]], [n[0], n[1], n[2]]];
    Rotation::from_matrix(&m).expect("orthonormal rows")
}

/// Recover three rotations from their pairwise common lines.
///
/// The gauge fixes the first rotation to the identity; the handedness of
/// the solution is arbitrary (`flipped` reports which branch was taken
/// relative to the first consistent candidate). Rejects triplets whose
/// viewing directions are coplanar within tolerance.
pub fn angular_reconstitution(lines: &TripletLines) -> Result<[Rotation; 3]> {
    // vertex angles of the normal triangle, known modulo the per-pair
    // joint line flip; try flip combinations until one closes the triangle
    let base = [
        lines.pair_01,
        lines.pair_02,
        lines.pair_12,
    ];
    let mut best: Option<[Rotation; 3]> = None;
    let mut best_err = f64::INFINITY;
    for flips in 0..8u8 {
        let adj = |pair: (f64, f64), bit: u8| -> (f64, f64) {
            if flips & bit != 0 {
                (
                    pair.0 + std::f64::consts::PI,
                    pair.1 + std::f64::consts::PI,
                )
            } else {
                pair
            }
        };
        let p01 = adj(base[0], 1);
        let p02 = adj(base[1], 2);
        let p12 = adj(base[2], 4);
        // interior vertex angles of the normal triangle: at vertex i both
        // rays must point as n_i x n_j, so the ray to the lower-indexed
        // image is reversed (adds pi)
        let a0 = p02.0 - p01.0; // at image 0, between d02 and d01
        let a1 = p12.0 - (p01.1 + std::f64::consts::PI); // at image 1
        let a2 = p12.1 - p02.1; // at image 2 (both rays reversed: cancels)
        // interior angles enter the dual law through cos(a) and |sin(a)|
        let (s0, c0) = a0.sin_cos();
        let (s1, c1) = a1.sin_cos();
        let (s2, c2) = a2.sin_cos();
        let (s0, s1, s2) = (s0.abs(), s1.abs(), s2.abs());
        if s0.abs() < COPLANAR_TOL || s1.abs() < COPLANAR_TOL || s2.abs() < COPLANAR_TOL {
            continue;
        }
        // dual law of cosines: arc between normals i and j from the three
        // vertex angles
        let cos01 = (c2 + c0 * c1) / (s0 * s1);
        let cos02 = (c1 + c0 * c2) / (s0 * s2);
        let cos12 = (c0 + c1 * c2) / (s1 * s2);
        if cos01.abs() >= 1.0 - 1e-9 || cos02.abs() >= 1.0 - 1e-9 || cos12.abs() >= 1.0 - 1e-9 {
            continue;
        }
        let arc01 = cos01.acos();
        let arc02 = cos02.acos();
        // gauge: R0 = identity, so n0 = z and d01, d02 live in the xy-plane
        let d01 = [p01.0.cos(), p01.0.sin(), 0.0];
        let d02 = [p02.0.cos(), p02.0.sin(), 0.0];
        let n0 = [0.0, 0.0, 1.0];
        // n1 is orthogonal to d01 at arc01 from z; the branch sign is the
        // handedness choice
        let m01 = normalize(cross(d01, n0));
        let n1 = [
            arc01.cos() * n0[0] + arc01.sin() * m01[0],
            arc01.cos() * n0[1] + arc01.sin() * m01[1],
            arc01.cos() * n0[2] + arc01.sin() * m01[2],
        ];
        let m02 = normalize(cross(d02, n0));
        for sign in [1.0f64, -1.0] {
            let n2 = [
                arc02.cos() * n0[0] + sign * arc02.sin() * m02[0],
                arc02.cos() * n0[1] + sign * arc02.sin() * m02[1],
                arc02.cos() * n0[2] + sign * arc02.sin() * m02[2],
            ];
            // the 1-2 arc fixes the sign branch
            if (dot(n1, n2) - cos12).abs() > 0.05 {
                continue;
            }
            let d12 = normalize(cross(n1, n2));
            let r0 = Rotation::identity();
            let r1 = rotation_from_plane(n1, p01.1, d01);
            let r2 = rotation_from_plane(n2, p02.1, d02);
            // consistency of the third common line (either ray sign)
            let c12 = r1.apply(d12);
            let c21 = r2.apply(d12);
            let t12 = c12[1].atan2(c12[0]);
            let t21 = c21[1].atan2(c21[0]);
            let err = super::common_lines::common_line_error((t12, t21), p12);
            if err < best_err {
                best_err = err;
                best = Some([r0, r1, r2]);
            }
        }
    }
    match best {
        Some(rots) if best_err < 0.05 => Ok(rots),
        _ => Err(Error::DegenerateTriplet(
            "no flip branch closes the spherical triangle (coplanar or inconsistent lines)"
                .into(),
        )),
    }
}
