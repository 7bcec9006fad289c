//! Uniform triangulations of the unit square.
//!
//! Refinement level `l` slices the square into an `N x N` grid of cells,
//! `N = 2^l`, and each cell into two triangles along the SW-NE diagonal.
//! Vertices are numbered row-major, `i + j (N + 1)`; triangles are listed
//! counter-clockwise. Edges are stored once, as vertex pairs `(lo, hi)`
//! with `lo < hi`, and each triangle records which global edge sits
//! opposite each of its vertices together with an orientation sign: `+1`
//! when the triangle traverses the edge from `lo` to `hi`, `-1` otherwise.
//! Consistent counter-clockwise orientation makes the two signs on any
//! interior edge cancel.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::vec2::{norm, sub, Vec2};

/// Largest supported refinement level (2^10 x 2^10 cells).
pub const MAX_LEVEL: u32 = 10;

#[derive(Debug, Clone)]
pub struct Mesh {
    pub level: u32,
    /// Cells per side, `2^level`.
    pub cells_per_side: usize,
    /// Mesh size `h = 1 / cells_per_side`.
    pub h: f64,
    pub vertices: Vec<Vec2>,
    /// Triangle vertex indices, counter-clockwise.
    pub triangles: Vec<[usize; 3]>,
    /// Edge vertex pairs `(lo, hi)` with `lo < hi`.
    pub edges: Vec<[usize; 2]>,
    /// `triangle_edges[t][k]` is the global edge opposite local vertex `k`.
    pub triangle_edges: Vec<[usize; 3]>,
    /// `+1` if the triangle walks edge `k` from `lo` to `hi`, else `-1`.
    pub triangle_edge_signs: Vec<[i8; 3]>,
    /// Incident triangles per edge; boundary edges have exactly one.
    pub edge_triangles: Vec<(usize, Option<usize>)>,
    pub boundary_edge: Vec<bool>,
    pub boundary_vertex: Vec<bool>,
}

impl Mesh {
    /// Build the level-`level` uniform triangulation.
    pub fn uniform(level: u32) -> Result<Mesh> {
        if level > MAX_LEVEL {
            return Err(Error::UnsupportedDegree {
                what: "mesh refinement level",
                requested: level as usize,
                min: 0,
                max: MAX_LEVEL as usize,
            });
        }
        let n = 1usize << level;
        let h = 1.0 / n as f64;
        let stride = n + 1;

        let mut vertices = Vec::with_capacity(stride * stride);
        for j in 0..stride {
            for i in 0..stride {
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }

        // Canonical edges, enumerated per vertex: horizontal, vertical,
        // then diagonal, so the global edge order is deterministic.
        let mut edges = Vec::with_capacity(3 * n * n + 2 * n);
        let mut edge_of = HashMap::with_capacity(3 * n * n + 2 * n);
        for j in 0..stride {
            for i in 0..stride {
                let v = i + j * stride;
                if i < n {
                    edge_of.insert([v, v + 1], edges.len());
                    edges.push([v, v + 1]);
                }
                if j < n {
                    edge_of.insert([v, v + stride], edges.len());
                    edges.push([v, v + stride]);
                }
                if i < n && j < n {
                    edge_of.insert([v, v + stride + 1], edges.len());
                    edges.push([v, v + stride + 1]);
                }
            }
        }

        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let sw = i + j * stride;
                let se = sw + 1;
                let nw = sw + stride;
                let ne = nw + 1;
                triangles.push([sw, se, ne]);
                triangles.push([sw, ne, nw]);
            }
        }

        let mut triangle_edges = Vec::with_capacity(triangles.len());
        let mut triangle_edge_signs = Vec::with_capacity(triangles.len());
        let mut edge_triangles: Vec<(usize, Option<usize>)> = vec![(usize::MAX, None); edges.len()];
        let mut edge_seen = vec![false; edges.len()];
        for (t, tri) in triangles.iter().enumerate() {
            let mut glob = [0usize; 3];
            let mut signs = [0i8; 3];
            for k in 0..3 {
                // Local edge k runs between the two vertices other than k.
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                let key = [a.min(b), a.max(b)];
                let e = *edge_of.get(&key).expect("edge of triangle must exist");
                glob[k] = e;
                signs[k] = if a < b { 1 } else { -1 };
                if edge_seen[e] {
                    edge_triangles[e].1 = Some(t);
                } else {
                    edge_triangles[e].0 = t;
                    edge_seen[e] = true;
                }
            }
            triangle_edges.push(glob);
            triangle_edge_signs.push(signs);
        }

        let boundary_edge: Vec<bool> = edge_triangles
            .iter()
            .map(|&(_, snd)| snd.is_none())
            .collect();
        let mut boundary_vertex = vec![false; vertices.len()];
        for j in 0..stride {
            for i in 0..stride {
                if i == 0 || i == n || j == 0 || j == n {
                    boundary_vertex[i + j * stride] = true;
                }
            }
        }

        Ok(Mesh {
            level,
            cells_per_side: n,
            h,
            vertices,
            triangles,
            edges,
            triangle_edges,
            triangle_edge_signs,
            edge_triangles,
            boundary_edge,
            boundary_vertex,
        })
    }

    /// Unit normal of edge `e` obtained by rotating the canonical unit
    /// tangent (from `lo` to `hi`) clockwise by 90 degrees.
    ///
    /// Horizontal edges get `(0, -1)`, vertical `(1, 0)`, diagonal
    /// `(1, -1) / sqrt(2)`.
    pub fn edge_unit_normal(&self, e: usize) -> Vec2 {
        let [lo, hi] = self.edges[e];
        let t = sub(self.vertices[hi], self.vertices[lo]);
        let len = norm(t);
        [t[1] / len, -t[0] / len]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [lo, hi] = self.edges[e];
        norm(sub(self.vertices[hi], self.vertices[lo]))
    }

    /// Signed area of triangle `t` (positive for counter-clockwise).
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let ab = sub(self.vertices[b], self.vertices[a]);
        let ac = sub(self.vertices[c], self.vertices[a]);
        0.5 * (ab[0] * ac[1] - ab[1] * ac[0])
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }
}
