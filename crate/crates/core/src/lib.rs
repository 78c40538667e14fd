//! Numerical laboratory for the H^{2|2} supersymmetric hyperbolic sigma model
//! in horospherical coordinates.
//!
//! After the Grassmann variables are integrated out, the model is a probability
//! measure on real fields `(u, s)` over a finite pinned graph. This crate provides
//!
//! * [`graph`]: pinned weighted graphs (long-range boxes with wired boundary,
//!   hierarchical lattices, inhomogeneous chains) and their edge incidence,
//! * [`model`]: the explicit density, the edge variables `B_e`, the weighted
//!   Laplacian `D(u)`, the edge matrix `Γ` and exact Gaussian sampling of `s`,
//! * [`detbounds`]: executable forms of the determinant lemmas built around
//!   `det(Id - MΓ)`, effective resistances and vertex splitting,
//! * [`oracle`]: deterministic tensor-product quadrature for graphs with one or
//!   two vertices,
//! * [`sampler`]: Metropolis MCMC with batch-means error bars,
//! * [`regime`]: the explicit constants and admissibility conditions,
//! * [`verify`]: randomized verification suites producing JSON reports.
//!
//! Data-parallel loops go through [`exec`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.

pub mod detbounds;
pub mod error;
pub mod exec;
pub mod graph;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod regime;
pub mod sampler;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Execution;
pub use graph::{OrientedEdge, PinnedGraph, Vertex};
pub use model::FieldConfig;
