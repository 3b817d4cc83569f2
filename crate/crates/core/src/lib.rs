//! Synthetic single-particle reconstruction toolkit.
//!
//! Everything operates on simulated data with known ground truth, so each
//! stage of the pipeline can be validated against planted answers: phantom
//! volumes are projected into noisy particle images (with CTF, shifts, and
//! drift), and the estimation stages (motion correction, CTF fitting,
//! particle picking, 2-D classification, ab initio modeling, ML-EM
//! refinement, FSC resolution) recover them back.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`geom`], [`grid`], [`field`], [`fft`], [`phantom`], [`transform`],
//!   [`project`], [`slice`]: geometry, sampled fields, centered unitary
//!   Fourier transforms, tomographic projection and central-slice extraction.
//! - [`ctf`]: contrast transfer function evaluation, Thon-ring fitting,
//!   phase flipping and Wiener correction.
//! - [`simulate`]: particle/dataset/micrograph/movie synthesis.
//! - [`motion`]: movie-frame alignment (global and patch-polynomial).
//! - [`picking`]: template matching, reference-window picking, and the
//!   Einstein-from-noise model-bias experiment.
//! - [`classify2d`]: steerable expansion, block PCA, bispectrum invariants,
//!   EM class averaging, nearest-neighbor averaging.
//! - [`abinitio`]: common lines, angular reconstitution, rotation
//!   synchronization, gridding backprojection, and SGD-MAP.
//! - [`refine`]: ML-EM refinement with frequency marching, discrete
//!   heterogeneity, FSC and volume alignment.
//! - [`sandbox`]: 1-D multi-reference alignment and multi-target detection
//!   laboratories with invariant-based method-of-moments estimators.
//! - [`io`]: MRC volumes/stacks, JSON metadata and run configuration,
//!   CSV and PGM emitters.

pub mod abinitio;
pub mod classify2d;
pub mod ctf;
pub mod error;
pub mod fft;
pub mod field;
pub mod geom;
pub mod grid;
pub mod io;
pub mod motion;
pub mod phantom;
pub mod picking;
pub mod project;
pub mod refine;
pub mod sandbox;
pub mod simulate;
pub mod slice;
pub mod transform;

pub use error::{Error, Result};
pub use field::{FourierImage, FourierVolume, Image, Volume};
pub use geom::{Rotation, RotationPrior};
pub use grid::GridSpec;
pub use phantom::PhantomSpec;
