//! Desk-scale simulator and learning stack for user association in a
//! heterogeneous mmWave network.
//!
//! A set of user equipments (UEs) must each attach to exactly one base
//! station: either the macro cell or one of the beam-limited mmWave small
//! cells. The crate provides the radio environment (path loss, Nakagami
//! fading, directional interference, Shannon rates), an alpha-fair utility
//! with an exact brute-force oracle for tiny instances, two centralized
//! baselines (Max-SNR and a greedy utility heuristic), and a shared
//! attention-based policy trained with hysteretic clipped proximal policy
//! optimization. The policy's size does not depend on the number of UEs,
//! so one trained checkpoint evaluates unchanged on deployments of any
//! size (zero-shot transfer).

pub mod baselines;
pub mod channel;
pub mod config;
pub mod env;
pub mod geometry;
pub mod harness;
pub mod learner;
pub mod nn;
pub mod policy;
pub mod utility;

mod error;

pub use error::{Error, Result};
