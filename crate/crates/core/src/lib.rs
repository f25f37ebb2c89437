//! Core engine for studying Chord-style ring maintenance under churn.
//!
//! Two halves live here:
//!
//! * [`analytics`] — closed-form steady-state predictions for the fraction of
//!   wrong/dead successor pointers, dead finger pointers, lookup consistency
//!   and lookup cost, all as functions of the churn/stabilization ratio.
//! * [`sim`] — a deterministic discrete-event simulator of the same protocol
//!   (joins, ungraceful failures, successor and finger stabilization, iterative
//!   lookups) used to verify the predictions.
//!
//! Identifier-space arithmetic shared by both sides is in [`ring`]. The crate
//! is `no_std` (alloc only); all I/O, experiment orchestration and file
//! formats live in the companion CLI crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analytics;
pub mod ring;
pub mod rng;
pub mod sim;

pub use ring::{KeyInterval, Openness, Ring, RingKey};
