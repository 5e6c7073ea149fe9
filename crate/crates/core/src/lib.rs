//! Numerical toolkit for tangent-cone estimation, differentiability
//! classification, and first-order optimality certificates, all driven by
//! distance oracles over subsets of Euclidean space.

pub mod geom;
pub mod probe;
pub mod setmodel;
pub mod cones;
pub mod diff;
pub mod regula;
pub mod corpus;
