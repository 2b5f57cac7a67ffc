//! Points, distances, and the free-space radio model.
//!
//! This module is the single source of truth for signal-strength arithmetic.
//! Received signal strength follows the inverse-square law `R = c*T/r^2`
//! where `T` is the transmitted signal strength (TSS) and `r` the
//! sender-receiver distance. A message is received when its RSS reaches
//! `R_min`; the boundary is inclusive, so `range_of` is a tight bound.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Relative tolerance for RSS-match comparisons.
///
/// Measurements in the model are exact; this absorbs floating-point rounding
/// only, never physical noise.
pub const RSS_REL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate distance {dist} (minimum separation {min_sep})")]
    DegenerateDistance { dist: f64, min_sep: f64 },
    #[error("transmission strength must be positive, got {0}")]
    NonPositiveTss(f64),
    #[error("invalid radio parameters: {0}")]
    BadParams(String),
    #[error("invalid layout: {0}")]
    BadLayout(String),
}

/// A location on the plane. Coordinates double as node identity: no two
/// nodes ever share a point, and nodes carry no other identifier.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(from = "RawPoint")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

/// Deserialization proxy so `-0.0` normalizes to `0.0` on the way in,
/// keeping `Eq`/`Hash` (bit-based) consistent with `==`.
#[derive(Deserialize)]
struct RawPoint {
    x: f64,
    y: f64,
}

impl From<RawPoint> for Point {
    fn from(r: RawPoint) -> Self {
        Point::new(r.x, r.y)
    }
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        // +0.0 folds -0.0 into 0.0; coordinates are otherwise unchanged.
        Point { x: x + 0.0, y: y + 0.0 }
    }

    pub fn distance_sq(&self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(&self, other: Point) -> f64 {
        self.distance_sq(other).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl PartialEq for Point {
    fn eq(&self, other: &Self) -> bool {
        self.x.to_bits() == other.x.to_bits() && self.y.to_bits() == other.y.to_bits()
    }
}

impl Eq for Point {}

impl std::hash::Hash for Point {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        state.write_u64(self.x.to_bits());
        state.write_u64(self.y.to_bits());
    }
}

impl PartialOrd for Point {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Point {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.x
            .total_cmp(&other.x)
            .then_with(|| self.y.total_cmp(&other.y))
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Radio parameters shared by every correct node in a run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RadioParams {
    /// Propagation constant in `R = c*T/r^2`.
    pub c: f64,
    /// TSS every correct node broadcasts with.
    pub t_r: f64,
    /// Minimum signal strength at which a message can still be received.
    pub r_min: f64,
    /// Neighborhood distance: nodes track identities within this radius.
    pub d_n: f64,
    /// Smallest admissible sender-receiver separation; keeps RSS finite.
    pub r_min_sep: f64,
}

impl RadioParams {
    /// Conventional test parameters: `c = 1`, `R_min = 1`, `T_r = r_t^2`,
    /// so the correct-node range comes out exactly `r_t`.
    pub fn for_range(r_t: f64, d_n: f64) -> Self {
        RadioParams {
            c: 1.0,
            t_r: r_t * r_t,
            r_min: 1.0,
            d_n,
            r_min_sep: 1e-6 * d_n,
        }
    }

    /// Range of a correct-node broadcast: `r_t = sqrt(c*T_r/R_min)`.
    pub fn range(&self) -> f64 {
        (self.c * self.t_r / self.r_min).sqrt()
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let fields = [
            ("c", self.c),
            ("t_r", self.t_r),
            ("r_min", self.r_min),
            ("d_n", self.d_n),
            ("r_min_sep", self.r_min_sep),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(GeometryError::BadParams(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        if !self.range().is_finite() {
            return Err(GeometryError::BadParams("derived range is not finite".into()));
        }
        Ok(())
    }
}

/// Correct nodes run the protocol; faulty nodes may transmit anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Correct,
    Faulty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub position: Point,
    pub role: Role,
}

/// A fixed set of node positions with correct/faulty designations.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LayoutSpec {
    pub nodes: Vec<NodeSpec>,
    pub params: RadioParams,
}

impl LayoutSpec {
    pub fn new(nodes: Vec<NodeSpec>, params: RadioParams) -> Result<Self, GeometryError> {
        let layout = LayoutSpec { nodes, params };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        self.params.validate()?;
        for (i, n) in self.nodes.iter().enumerate() {
            if !n.position.is_finite() {
                return Err(GeometryError::BadLayout(format!(
                    "node {i} has non-finite coordinates"
                )));
            }
        }
        for i in 0..self.nodes.len() {
            for j in (i + 1)..self.nodes.len() {
                let d = self.nodes[i].position.distance(self.nodes[j].position);
                if d < self.params.r_min_sep {
                    return Err(GeometryError::BadLayout(format!(
                        "nodes {i} and {j} are {d} apart, below the minimum separation {}",
                        self.params.r_min_sep
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn positions(&self) -> impl Iterator<Item = Point> + '_ {
        self.nodes.iter().map(|n| n.position)
    }

    pub fn correct_positions(&self) -> Vec<Point> {
        self.nodes
            .iter()
            .filter(|n| n.role == Role::Correct)
            .map(|n| n.position)
            .collect()
    }

    pub fn faulty_positions(&self) -> Vec<Point> {
        self.nodes
            .iter()
            .filter(|n| n.role == Role::Faulty)
            .map(|n| n.position)
            .collect()
    }

    pub fn role_of(&self, p: Point) -> Option<Role> {
        self.nodes.iter().find(|n| n.position == p).map(|n| n.role)
    }

    pub fn is_node_position(&self, p: Point) -> bool {
        self.nodes.iter().any(|n| n.position == p)
    }

    /// Correct neighbors of `p` (identities within `d_n`, excluding `p`).
    pub fn correct_neighbors(&self, p: Point) -> Vec<Point> {
        let mut v: Vec<Point> = self
            .nodes
            .iter()
            .filter(|n| n.role == Role::Correct && n.position != p)
            .map(|n| n.position)
            .filter(|q| q.distance(p) <= self.params.d_n)
            .collect();
        v.sort();
        v
    }
}

/// RSS of a transmission at `tss` from `sender` measured at `receiver`.
pub fn rss_at(
    params: &RadioParams,
    tss: f64,
    sender: Point,
    receiver: Point,
) -> Result<f64, GeometryError> {
    if !(tss.is_finite() && tss > 0.0) {
        return Err(GeometryError::NonPositiveTss(tss));
    }
    let d_sq = sender.distance_sq(receiver);
    let min_sq = params.r_min_sep * params.r_min_sep;
    if d_sq < min_sq {
        return Err(GeometryError::DegenerateDistance {
            dist: d_sq.sqrt(),
            min_sep: params.r_min_sep,
        });
    }
    Ok(params.c * tss / d_sq)
}

/// Distance at which a transmission at `tss` fades to exactly `R_min`.
pub fn range_of(params: &RadioParams, tss: f64) -> Result<f64, GeometryError> {
    if !(tss.is_finite() && tss > 0.0) {
        return Err(GeometryError::NonPositiveTss(tss));
    }
    Ok((params.c * tss / params.r_min).sqrt())
}

/// Receipt predicate: RSS at least `R_min`, boundary inclusive.
///
/// The comparison allows `RSS_REL_TOL` of slack so that a receiver placed
/// exactly at the range boundary is judged consistently regardless of
/// rounding in the coordinate arithmetic.
pub fn receives(
    params: &RadioParams,
    tss: f64,
    sender: Point,
    receiver: Point,
) -> Result<bool, GeometryError> {
    let rss = rss_at(params, tss, sender, receiver)?;
    Ok(rss >= params.r_min * (1.0 - RSS_REL_TOL))
}

/// RSS the receiver would measure had the message really been broadcast
/// from `claimed_origin` with the correct-node strength `T_r`.
pub fn expected_rss_from_claim(
    params: &RadioParams,
    claimed_origin: Point,
    receiver: Point,
) -> Result<f64, GeometryError> {
    rss_at(params, params.t_r, claimed_origin, receiver)
}

/// True when `measured` matches `expected` within `RSS_REL_TOL`.
pub fn rss_matches(measured: f64, expected: f64) -> bool {
    (measured - expected).abs() <= RSS_REL_TOL * expected
}
