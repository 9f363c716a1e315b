//! Pseudo-spectral laboratory for the convex-integration iteration of the
//! fractional Navier-Stokes-Reynolds system on the periodic 3-torus.

pub mod error;
pub mod gluing;
pub mod ledger;
pub mod mikado;
pub mod operators;
pub mod perturbation;
pub mod pipeline;
pub mod schedule;
pub mod solver;
pub mod spectral;
pub mod state;
pub mod weak_form;
