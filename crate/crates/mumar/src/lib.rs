//! Registration of multi-view point-cloud sequences through planar markers.
//!
//! A turntable scan produces one cloud per step. Instead of registering the
//! (possibly featureless) object directly, the views are aligned through a set
//! of polyhedral markers placed around the object: each visible marker face is
//! detected as a plane, planes are tracked across neighbouring views, and a
//! sliding window of views is registered jointly by aligning plane normals and
//! centroids. The object clouds are then carried along by the per-view
//! transforms and merged.
//!
//! The crate is organised around that pipeline:
//!
//! * [`geometry`] — points, planes, rigid transforms, plane fitting and the
//!   rotation solver used everywhere else.
//! * [`synth`] — a synthetic turntable scanner used for testing and
//!   benchmarking: triangle-mesh markers/objects, visibility, sensor noise.
//! * [`detection`] — per-view marker face detection (clustering plus a
//!   constraint-checked region-growing RANSAC).
//! * [`correspondence`] — plane tracking across views; builds the table that
//!   drives registration.
//! * [`registration`] — the sliding-window multi-view solver, transform
//!   propagation and the persistent scene structure.
//! * [`icp`] — a point-to-plane ICP used both as the comparison baseline and
//!   as a fallback inside the multi-view solver.
//! * [`evaluation`] — cloud-to-reference distance statistics and benchmark
//!   tables.
//! * [`io`] — PLY clouds, transform files and dataset manifests.
//! * [`pipeline`] — end-to-end runs wired together from a [`config::RunConfig`];
//!   this is what the command-line binary calls.
//!
//! The `examples/` directory walks through each stage on synthetic data.
//! Everything is deterministic for a fixed seed: no threading, no unseeded
//! randomness.

pub mod config;
pub mod correspondence;
pub mod detection;
mod error;
pub mod evaluation;
pub mod geometry;
pub mod icp;
pub mod io;
pub mod pipeline;
pub mod registration;
pub mod spatial;
pub mod synth;

pub use error::{Error, Result};
