//! Reconstruction and generation of watertight surface meshes from raw point
//! clouds.
//!
//! The pipeline has two stages. A hypernetwork autoencoder ([`hypermodel`])
//! learns to map points of a spherical prior onto the surface of an object.
//! A locally conditioned atlas ([`atlas`]) then learns a single patch network
//! that, given any surface point, produces a small parametric patch covering
//! that point's neighborhood. Patches can be stitched into a closed mesh.
//!
//! Evaluation lives in [`metrics`] (Chamfer, EMD, JSD, MMD, COV) and
//! [`watertight`] (ray parity based watertightness).

pub mod atlas;
pub mod error;
pub mod geom;
pub mod hypermodel;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod synth;
pub mod watertight;

pub use error::{Error, Result};
pub use geom::{Point3, PointCloud, TriMesh};
