//! Deterministic layout generators: square grids and seeded random scatters.

use crate::geometry::{GeometryError, LayoutSpec, NodeSpec, Point, RadioParams, Role};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Square grid of `rows x cols` nodes with the given spacing, row-major:
/// node `i` sits at `(s*(i % cols), s*(i / cols))`. All nodes start correct.
pub fn grid_layout(
    rows: usize,
    cols: usize,
    spacing: f64,
    params: RadioParams,
) -> Result<LayoutSpec, GeometryError> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(GeometryError::BadLayout(format!("bad grid spacing {spacing}")));
    }
    let mut nodes = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            nodes.push(NodeSpec {
                position: Point::new(spacing * c as f64, spacing * r as f64),
                role: Role::Correct,
            });
        }
    }
    LayoutSpec::new(nodes, params)
}

/// `n` nodes scattered uniformly over `width x height`, rejecting points
/// closer than `min_sep` to an earlier one. Identical seeds give identical
/// layouts byte for byte.
pub fn random_layout(
    n: usize,
    width: f64,
    height: f64,
    min_sep: f64,
    seed: u64,
    params: RadioParams,
) -> Result<LayoutSpec, GeometryError> {
    if !(width.is_finite() && width > 0.0 && height.is_finite() && height > 0.0) {
        return Err(GeometryError::BadLayout(format!("bad area {width}x{height}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes: Vec<NodeSpec> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while nodes.len() < n {
        attempts += 1;
        if attempts > 1000 * (n + 1) {
            return Err(GeometryError::BadLayout(format!(
                "could not place {n} nodes at separation {min_sep} in {width}x{height}"
            )));
        }
        let p = Point::new(rng.gen_range(0.0..width), rng.gen_range(0.0..height));
        if nodes.iter().all(|q| q.position.distance(p) >= min_sep) {
            nodes.push(NodeSpec { position: p, role: Role::Correct });
        }
    }
    LayoutSpec::new(nodes, params)
}

/// Flip the listed node indices to faulty.
pub fn mark_faulty(layout: &mut LayoutSpec, indices: &[usize]) -> Result<(), GeometryError> {
    for &i in indices {
        let n = layout
            .nodes
            .get_mut(i)
            .ok_or_else(|| GeometryError::BadLayout(format!("faulty index {i} out of range")))?;
        n.role = Role::Faulty;
    }
    Ok(())
}
