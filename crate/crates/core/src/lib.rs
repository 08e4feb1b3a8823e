//! Comparison geometry and first-order calculus on desk-scale metric spaces:
//! model planes, metric trees and graphs, Euclidean cones, tangent cones,
//! barycenters, derivations on metric graphs and their embedding into the
//! geometric tangent bundle.

pub mod barycenter;
pub mod comparison;
pub mod cone;
pub mod counterexample;
pub mod curves;
pub mod embedding;
pub mod error;
pub mod graph;
pub mod instances;
pub mod limits;
pub mod model;
pub mod par;
pub mod report;
pub mod space;
pub mod suites;
pub mod tangent;
pub mod transport;

pub use cone::{ConePoint, EuclideanCone};
pub use error::{Error, Result};
pub use graph::{GraphPoint, MetricGraph, MetricTree};
pub use model::{Kappa, ModelPoint, ModelSpace};
pub use space::GeodesicSpace;
