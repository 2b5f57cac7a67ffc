//! Sybil-resilient neighborhood discovery over radio layouts.
//!
//! Nodes on a plane identify each other by coordinates alone and verify
//! claims against received signal strength. This crate provides:
//!
//! - the free-space RSS arithmetic ([`geometry`]),
//! - layout analysis for deception fields and snares ([`deception`]),
//! - the announce/confirm/conflict protocol with its message dependency
//!   graph and universe derivation ([`protocol`]),
//! - pluggable universe detectors with trace auditing ([`detector`]),
//! - a library of scripted faulty-node strategies ([`adversary`]),
//! - a deterministic discrete-event scheduler and the neighborhood
//!   discovery problem checkers ([`sim`]).

pub mod adversary;
pub mod deception;
pub mod detector;
pub mod geometry;
pub mod layout_gen;
pub mod protocol;
pub mod sim;

pub use geometry::{LayoutSpec, Point, RadioParams, Role};
