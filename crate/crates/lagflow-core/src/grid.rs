//! Uniform Cartesian discretisation of a convex domain.
//!
//! Nodes live on a lattice `(x0 + i*h, y0 + j*h)` anchored at the domain
//! center so that refinement keeps the center as an exact node.  A node is
//! *interior* when it and all eight of its lattice neighbours lie strictly
//! inside the domain (defining function positive); it is *boundary* when it
//! lies inside but at least one neighbour does not.  Every boundary node
//! carries its projection onto the continuous boundary, which the flow uses
//! to transport the oblique boundary condition from the lattice to the true
//! boundary curve.

use crate::domains::{BoundaryPoint, ConvexDomain, DomainError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
    #[error("grid too coarse: only {interior_count} interior nodes (need at least 9)")]
    TooCoarse { interior_count: usize },
    #[error("boundary layer is not a single connected band ({found} of {total} nodes reachable)")]
    DisconnectedBoundary { found: usize, total: usize },
    #[error("grid would need {nodes} nodes; refusing to allocate")]
    TooLarge { nodes: usize },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Exterior,
    Boundary,
    Interior,
}

/// A lattice node inside the domain with an outside neighbour.
#[derive(Debug, Clone)]
pub struct BoundaryNode {
    pub flat: u32,
    pub i: u32,
    pub j: u32,
    /// Closest point on the continuous boundary, with inward normal and
    /// arc parameter (used to order Gauss-Seidel sweeps deterministically).
    pub proj: BoundaryPoint,
}

#[derive(Debug, Clone)]
pub struct FlowGrid {
    omega: ConvexDomain,
    spacing: f64,
    nx: usize,
    ny: usize,
    x0: f64,
    y0: f64,
    class: Vec<NodeClass>,
    /// Flat indices of interior nodes in row-major scan order.
    interior: Vec<u32>,
    /// flat index -> rank in `interior`, `u32::MAX` for non-interior nodes.
    packed: Vec<u32>,
    /// Boundary nodes sorted by arc parameter of their projection.
    boundary: Vec<BoundaryNode>,
}

const MAX_NODES: usize = 64_000_000;

pub fn build_grid(omega: ConvexDomain, spacing: f64) -> Result<FlowGrid, GridError> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(GridError::InvalidSpacing(spacing));
    }
    let c = omega.center();
    let s = omega.semi_axes();
    // Two extra rings of exterior nodes so every inside node has in-range
    // neighbours and one-sided second differences never leave the lattice.
    let hx = (s[0] / spacing).ceil() as usize + 2;
    let hy = (s[1] / spacing).ceil() as usize + 2;
    let nx = 2 * hx + 1;
    let ny = 2 * hy + 1;
    if nx.saturating_mul(ny) > MAX_NODES {
        return Err(GridError::TooLarge { nodes: nx * ny });
    }
    let x0 = c[0] - hx as f64 * spacing;
    let y0 = c[1] - hy as f64 * spacing;

    let mut inside = vec![false; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let p = [x0 + i as f64 * spacing, y0 + j as f64 * spacing];
            inside[j * nx + i] = omega.contains(p);
        }
    }

    // Demote sliver nodes: an inside node whose two axis neighbours are both
    // outside along some axis (the lattice grazing the boundary within
    // rounding) admits no one-sided difference and is treated as exterior.
    // Demotion can cascade along a grazing row, so iterate to a fixed point.
    loop {
        let mut changed = false;
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let k = j * nx + i;
                if inside[k]
                    && ((!inside[k - 1] && !inside[k + 1])
                        || (!inside[k - nx] && !inside[k + nx]))
                {
                    inside[k] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut class = vec![NodeClass::Exterior; nx * ny];
    let mut interior = Vec::new();
    let mut boundary_flats = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if !inside[k] {
                continue;
            }
            // Inside nodes are never on the lattice border thanks to the
            // two-ring margin, so the neighbour indices are in range.
            debug_assert!(i >= 1 && i + 1 < nx && j >= 1 && j + 1 < ny);
            let mut all_in = true;
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let kk = (j as i64 + dj) as usize * nx + (i as i64 + di) as usize;
                    all_in &= inside[kk];
                }
            }
            if all_in {
                class[k] = NodeClass::Interior;
                interior.push(k as u32);
            } else {
                class[k] = NodeClass::Boundary;
                boundary_flats.push(k);
            }
        }
    }

    if interior.len() < 9 {
        return Err(GridError::TooCoarse {
            interior_count: interior.len(),
        });
    }

    // The boundary layer of a convex domain must form one 8-connected band.
    if !boundary_flats.is_empty() {
        let mut seen = vec![false; nx * ny];
        let mut stack = vec![boundary_flats[0]];
        seen[boundary_flats[0]] = true;
        let mut found = 0usize;
        while let Some(k) = stack.pop() {
            found += 1;
            let (i, j) = (k % nx, k / nx);
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let kk = (j as i64 + dj) as usize * nx + (i as i64 + di) as usize;
                    if class[kk] == NodeClass::Boundary && !seen[kk] {
                        seen[kk] = true;
                        stack.push(kk);
                    }
                }
            }
        }
        if found != boundary_flats.len() {
            return Err(GridError::DisconnectedBoundary {
                found,
                total: boundary_flats.len(),
            });
        }
    }

    let mut boundary = Vec::with_capacity(boundary_flats.len());
    for &k in &boundary_flats {
        let (i, j) = (k % nx, k / nx);
        let p = [x0 + i as f64 * spacing, y0 + j as f64 * spacing];
        let proj = omega.project_to_boundary(p)?;
        boundary.push(BoundaryNode {
            flat: k as u32,
            i: i as u32,
            j: j as u32,
            proj,
        });
    }
    boundary.sort_by(|a, b| {
        a.proj
            .arc_parameter
            .total_cmp(&b.proj.arc_parameter)
            .then(a.flat.cmp(&b.flat))
    });

    let mut packed = vec![u32::MAX; nx * ny];
    for (m, &k) in interior.iter().enumerate() {
        packed[k as usize] = m as u32;
    }

    Ok(FlowGrid {
        omega,
        spacing,
        nx,
        ny,
        x0,
        y0,
        class,
        interior,
        packed,
        boundary,
    })
}

impl FlowGrid {
    pub fn omega(&self) -> &ConvexDomain {
        &self.omega
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }
    pub fn node_pos(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.x0 + i as f64 * self.spacing,
            self.y0 + j as f64 * self.spacing,
        ]
    }
    pub fn flat(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    pub fn coords(&self, flat: usize) -> (usize, usize) {
        (flat % self.nx, flat / self.nx)
    }
    pub fn class(&self, flat: usize) -> NodeClass {
        self.class[flat]
    }
    pub fn classes(&self) -> &[NodeClass] {
        &self.class
    }
    /// Flat indices of interior nodes, row-major.
    pub fn interior(&self) -> &[u32] {
        &self.interior
    }
    pub fn interior_count(&self) -> usize {
        self.interior.len()
    }
    /// Rank of a flat index in the packed interior ordering.
    pub fn packed_index(&self, flat: usize) -> Option<usize> {
        let m = self.packed[flat];
        (m != u32::MAX).then_some(m as usize)
    }
    /// Boundary nodes in ascending arc-parameter order.
    pub fn boundary(&self) -> &[BoundaryNode] {
        &self.boundary
    }
    /// Nearest lattice node to a point, clamped to the lattice.
    pub fn nearest_node(&self, p: [f64; 2]) -> (usize, usize) {
        let i = ((p[0] - self.x0) / self.spacing).round();
        let j = ((p[1] - self.y0) / self.spacing).round();
        let i = i.clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = j.clamp(0.0, (self.ny - 1) as f64) as usize;
        (i, j)
    }
}
