//! Eigen-frame extension and flux systems: assembly, verification,
//! classification and potential reconstruction.

pub mod exprlang;
pub mod geometry;
pub mod classify;
pub mod systems;
pub mod potential;
pub mod corpus;
pub mod cli;
