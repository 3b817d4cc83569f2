//! Rotations and orientation sampling.
//!
//! Rotations are unit quaternions acting as *active* right-handed rotations:
//! a rotated field satisfies `(R f)(r) = f(R^T r)`. `q` and `-q` describe the
//! same rotation; equality-sensitive code should compare matrices or use
//! [`Rotation::angle_to`].

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// A 3-D rotation stored as a unit quaternion `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    q: [f64; 4],
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation {
            q: [1.0, 0.0, 0.0, 0.0],
        }
    }

    /// Build from quaternion components, normalizing to unit length.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::InvalidInput(format!(
                "cannot normalize quaternion with norm {n}"
            )));
        }
        Ok(Rotation {
            q: [w / n, x / n, y / n, z / n],
        })
    }

    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n < 1e-15 {
            return Rotation::identity();
        }
        let (s, c) = (angle / 2.0).sin_cos();
        Rotation {
            q: [c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n],
        }
    }

    /// In-plane rotation about the z axis.
    pub fn about_z(angle: f64) -> Self {
        Rotation::from_axis_angle([0.0, 0.0, 1.0], angle)
    }

    pub fn quaternion(&self) -> [f64; 4] {
        self.q
    }

    /// The 3x3 rotation matrix (row-major).
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let [w, x, y, z] = self.q;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    /// Recover a rotation from an orthogonal matrix (Shepperd's method).
    pub fn from_matrix(m: &[[f64; 3]; 3]) -> Result<Self> {
        let trace = m[0][0] + m[1][1] + m[2][2];
        let (w, x, y, z);
        if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            w = 0.25 * s;
            x = (m[2][1] - m[1][2]) / s;
            y = (m[0][2] - m[2][0]) / s;
            z = (m[1][0] - m[0][1]) / s;
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            w = (m[2][1] - m[1][2]) / s;
            x = 0.25 * s;
            y = (m[0][1] + m[1][0]) / s;
            z = (m[0][2] + m[2][0]) / s;
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            w = (m[0][2] - m[2][0]) / s;
            x = (m[0][1] + m[1][0]) / s;
            y = 0.25 * s;
            z = (m[1][2] + m[2][1]) / s;
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            w = (m[1][0] - m[0][1]) / s;
            x = (m[0][2] + m[2][0]) / s;
            y = (m[1][2] + m[2][1]) / s;
            z = 0.25 * s;
        }
        Rotation::from_quaternion(w, x, y, z)
    }

    /// Hamilton product; `matrix(a.compose(b)) = matrix(a) * matrix(b)`.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        let [aw, ax, ay, az] = self.q;
        let [bw, bx, by, bz] = other.q;
        let q = [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ];
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        Rotation {
            q: [q[0] / n, q[1] / n, q[2] / n, q[3] / n],
        }
    }

    pub fn inverse(&self) -> Rotation {
        let [w, x, y, z] = self.q;
        Rotation { q: [w, -x, -y, -z] }
    }

    /// Apply the rotation to a vector: `matrix * v`.
    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = self.matrix();
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    /// Apply the inverse rotation: `matrix^T * v`.
    pub fn apply_inverse(&self, v: [f64; 3]) -> [f64; 3] {
        let m = self.matrix();
        [
            m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
            m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
            m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
        ]
    }

    /// Geodesic distance in radians, insensitive to the q/-q double cover.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        let dot: f64 = self.q.iter().zip(other.q.iter()).map(|(a, b)| a * b).sum();
        2.0 * dot.abs().min(1.0).acos()
    }

    /// The viewing direction this rotation assigns to the z axis: `R^T z`.
    pub fn viewing_direction(&self) -> [f64; 3] {
        self.apply_inverse([0.0, 0.0, 1.0])
    }
}

/// Mirror conjugation `J R J^{-1}` with `J = diag(1, 1, -1)`: the rotation a
/// reflected structure would need to produce the same projection.
pub fn handedness_flip(r: &Rotation) -> Rotation {
    let [w, x, y, z] = r.quaternion();
    // J R J negates the x and y components of the rotation axis.
    Rotation { q: [w, -x, -y, z] }
}

/// A spherical cap of viewing directions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cap {
    /// Unit vector at the cap center.
    pub center: [f64; 3],
    /// Angular radius of the cap, radians.
    pub radius: f64,
    /// Unnormalized mixture weight.
    pub weight: f64,
}

/// Prior over orientations: Haar-uniform, or viewing directions drawn from a
/// mixture of uniform spherical caps with a uniform in-plane angle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum RotationPrior {
    Uniform,
    CapMixture(Vec<Cap>),
}

/// Draw one rotation from the prior.
pub fn sample_rotation<R: Rng + ?Sized>(prior: &RotationPrior, rng: &mut R) -> Rotation {
    match prior {
        RotationPrior::Uniform => {
            // Four standard normals normalized: exactly Haar on SO(3).
            loop {
                let q: [f64; 4] = [
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                ];
                let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n > 1e-6 {
                    return Rotation {
                        q: [q[0] / n, q[1] / n, q[2] / n, q[3] / n],
                    };
                }
            }
        }
        RotationPrior::CapMixture(caps) => {
            let total: f64 = caps.iter().map(|c| c.weight).sum();
            let mut pick = rng.gen::<f64>() * total;
            let mut chosen = &caps[caps.len() - 1];
            for c in caps {
                if pick < c.weight {
                    chosen = c;
                    break;
                }
                pick -= c.weight;
            }
            // Area-uniform direction inside the cap around +z, then rotate
            // the cap onto its center; in-plane angle uniform.
            let cos_min = chosen.radius.cos();
            let cos_t = 1.0 - rng.gen::<f64>() * (1.0 - cos_min);
            let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
            let phi = rng.gen::<f64>() * std::f64::consts::TAU;
            let dir = [sin_t * phi.cos(), sin_t * phi.sin(), cos_t];
            let align = rotation_taking_z_to(chosen.center);
            let v = align.apply(dir);
            let psi = rng.gen::<f64>() * std::f64::consts::TAU;
            // Want R^T z = v, i.e. third row of R equals v.
            Rotation::about_z(psi).compose(&rotation_taking_z_to(v).inverse())
        }
    }
}

/// Draw `n` rotations from the prior, reproducibly under `seed`.
pub fn sample_rotations(n: usize, prior: &RotationPrior, seed: u64) -> Vec<Rotation> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_rotation(prior, &mut rng)).collect()
}

/// The rotation of smallest angle mapping +z onto `v`.
fn rotation_taking_z_to(v: [f64; 3]) -> Rotation {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let v = [v[0] / n, v[1] / n, v[2] / n];
    let c = v[2];
    if c > 1.0 - 1e-12 {
        return Rotation::identity();
    }
    if c < -1.0 + 1e-12 {
        return Rotation::from_axis_angle([1.0, 0.0, 0.0], std::f64::consts::PI);
    }
    let axis = [-v[1], v[0], 0.0];
    Rotation::from_axis_angle(axis, c.acos())
}
