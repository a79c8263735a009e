//! Off-policy evaluation of head-factorized dialogue decision policies
//! from logged sessions, plus a hidden-archetype user simulator.
//!
//! The pipeline: parse a turn log ([`model`]), derive typed rewards
//! ([`rewards`]), reconstruct logging propensities per decision head
//! ([`behavior`]), score target policies ([`policies`]) and estimate their
//! value with SNIPS and AIPW ([`ope`]). The [`sim`] module runs policies
//! against simulated users with a latent archetype and generates synthetic
//! logs with exact ground truth.

pub mod behavior;
pub mod features;
pub mod linear;
pub mod model;
pub mod par;
pub mod rewards;
pub mod rng;
pub mod ope;
pub mod policies;
pub mod sim;
