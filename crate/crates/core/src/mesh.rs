//! Triangulations of the unit square and L-shaped domain, uniform red
//! refinement, and the nested mesh hierarchy.
//!
//! Every edge carries a fixed global unit normal (from the lower vertex index
//! to the higher, rotated by +90 degrees) so that normal traces and jump
//! terms are assembled orientation-independently.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::io::Write;

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainTag {
    UnitSquare,
    LShape,
}

impl DomainTag {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "square" | "unit_square" => Ok(DomainTag::UnitSquare),
            "lshape" | "l_shape" => Ok(DomainTag::LShape),
            other => Err(Error::Config(format!("unknown domain tag '{other}'"))),
        }
    }
}

/// Adjacency of one edge. For interior edges `from` is the triangle whose
/// outward normal coincides with the stored global normal and `from_sign` is
/// +1; for boundary edges `from` is the unique triangle and `from_sign` says
/// whether the global normal points out of it.
#[derive(Debug, Clone, Copy)]
pub struct EdgeAdjacency {
    pub from: usize,
    pub to: Option<usize>,
    pub from_sign: f64,
}

#[derive(Debug, Clone)]
pub struct TriangleMesh {
    pub vertices: Vec<Point>,
    /// Vertex index triples, positively oriented.
    pub triangles: Vec<[usize; 3]>,
    /// Vertex index pairs with lower index first.
    pub edges: Vec<[usize; 2]>,
    /// Per triangle, per local edge (opposite the local vertex):
    /// (global edge index, sign of the global normal relative to the
    /// triangle's outward normal).
    pub edge_of_triangle: Vec<[(usize, f64); 3]>,
    pub boundary_edge_flags: Vec<bool>,
    pub edge_adjacency: Vec<EdgeAdjacency>,
    /// Grid spacing 2^-level.
    pub h_grid: f64,
    pub level: usize,
}

#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    /// Coarse (level 0) to fine.
    pub levels: Vec<TriangleMesh>,
    /// `child_map[k-1][t]` lists the 4 level-k children of level-(k-1)
    /// triangle t.
    pub child_map: Vec<Vec<[usize; 4]>>,
    pub domain_tag: DomainTag,
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

impl TriangleMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn triangle_vertices(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(t);
        0.5 * cross(sub(b, a), sub(c, a))
    }

    pub fn edge_endpoints(&self, e: usize) -> [Point; 2] {
        let [a, b] = self.edges[e];
        [self.vertices[a], self.vertices[b]]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [p, q] = self.edge_endpoints(e);
        let d = sub(q, p);
        (d[0] * d[0] + d[1] * d[1]).sqrt()
    }

    /// Global unit normal: edge direction (lower to higher vertex index)
    /// rotated by +90 degrees.
    pub fn edge_normal(&self, e: usize) -> Point {
        let [p, q] = self.edge_endpoints(e);
        let d = sub(q, p);
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        [-d[1] / len, d[0] / len]
    }

    /// Point on edge e at parameter t in [0,1] (measured from the lower
    /// vertex index).
    pub fn edge_point(&self, e: usize, t: f64) -> Point {
        let [p, q] = self.edge_endpoints(e);
        [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
    }

    /// Fills edges, adjacency, boundary flags and the per-triangle edge table
    /// from `vertices`/`triangles`.
    fn finish(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, level: usize) -> Self {
        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut adjacency: Vec<(Option<usize>, Option<usize>)> = Vec::new();
        let mut edge_of_triangle = Vec::with_capacity(triangles.len());

        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [(0usize, 0.0f64); 3];
            for le in 0..3 {
                let a = tri[(le + 1) % 3];
                let b = tri[(le + 2) % 3];
                let key = if a < b { [a, b] } else { [b, a] };
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    adjacency.push((None, None));
                    edges.len() - 1
                });
                // Outward normal of the triangle at local edge le is the edge
                // direction (a -> b in traversal order) rotated by -90 deg;
                // the global normal uses the sorted direction rotated +90.
                // Sign is +1 when the global normal points out of this triangle.
                let pa = vertices[a];
                let pb = vertices[b];
                let traversal = sub(pb, pa);
                let sorted_dir = if a < b { traversal } else { [-traversal[0], -traversal[1]] };
                let global_n = [-sorted_dir[1], sorted_dir[0]];
                let outward = [traversal[1], -traversal[0]];
                let sign = if global_n[0] * outward[0] + global_n[1] * outward[1] > 0.0 {
                    1.0
                } else {
                    -1.0
                };
                local[le] = (e, sign);
                if sign > 0.0 {
                    debug_assert!(adjacency[e].0.is_none());
                    adjacency[e].0 = Some(t);
                } else {
                    debug_assert!(adjacency[e].1.is_none());
                    adjacency[e].1 = Some(t);
                }
            }
            edge_of_triangle.push(local);
        }

        let mut boundary_edge_flags = vec![false; edges.len()];
        let mut edge_adjacency = Vec::with_capacity(edges.len());
        for (e, adj) in adjacency.iter().enumerate() {
            match *adj {
                (Some(from), to) => {
                    boundary_edge_flags[e] = to.is_none();
                    edge_adjacency.push(EdgeAdjacency {
                        from,
                        to,
                        from_sign: 1.0,
                    });
                }
                // Boundary edge whose global normal points into the domain.
                (None, Some(t)) => {
                    boundary_edge_flags[e] = true;
                    edge_adjacency.push(EdgeAdjacency {
                        from: t,
                        to: None,
                        from_sign: -1.0,
                    });
                }
                (None, None) => unreachable!("edge without adjacent triangle"),
            }
        }

        TriangleMesh {
            vertices,
            triangles,
            edges,
            edge_of_triangle,
            boundary_edge_flags,
            edge_adjacency,
            h_grid: 0.5f64.powi(level as i32),
            level,
        }
    }

    /// Plain-text dump: one line per vertex "v x y", triangle "t i j k",
    /// edge "e i j b".
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        for v in &self.vertices {
            writeln!(w, "v {} {}", v[0], v[1])?;
        }
        for t in &self.triangles {
            writeln!(w, "t {} {} {}", t[0], t[1], t[2])?;
        }
        for (e, b) in self.edges.iter().zip(&self.boundary_edge_flags) {
            writeln!(w, "e {} {} {}", e[0], e[1], u8::from(*b))?;
        }
        Ok(())
    }
}

/// Initial triangulation: unit cells split along the diagonal from the lower
/// left to the upper right corner.
pub fn build_initial_mesh(domain_tag: DomainTag) -> TriangleMesh {
    let cells: &[[f64; 2]] = match domain_tag {
        DomainTag::UnitSquare => &[[0.0, 0.0]],
        // (-1,1)^2 minus [0,1]x[-1,0]: third, second and first quadrant cells.
        DomainTag::LShape => &[[-1.0, -1.0], [-1.0, 0.0], [0.0, 0.0]],
    };

    let mut vertex_index: HashMap<[i64; 2], usize> = HashMap::new();
    let mut vertices: Vec<Point> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut vid = |vertices: &mut Vec<Point>, x: f64, y: f64| -> usize {
        let key = [x as i64, y as i64];
        *vertex_index.entry(key).or_insert_with(|| {
            vertices.push([x, y]);
            vertices.len() - 1
        })
    };

    for c in cells {
        let ll = vid(&mut vertices, c[0], c[1]);
        let lr = vid(&mut vertices, c[0] + 1.0, c[1]);
        let ul = vid(&mut vertices, c[0], c[1] + 1.0);
        let ur = vid(&mut vertices, c[0] + 1.0, c[1] + 1.0);
        triangles.push([ll, lr, ur]);
        triangles.push([ll, ur, ul]);
    }

    TriangleMesh::finish(vertices, triangles, 0)
}

/// Uniform red refinement: each triangle is split into 4 congruent children
/// through its edge midpoints. Returns the fine mesh and the child map.
pub fn refine_uniform_with_children(mesh: &TriangleMesh) -> (TriangleMesh, Vec<[usize; 4]>) {
    let nv = mesh.num_vertices();
    let mut vertices = mesh.vertices.clone();
    vertices.extend(mesh.edges.iter().map(|&[a, b]| {
        let p = mesh.vertices[a];
        let q = mesh.vertices[b];
        [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
    }));

    // Midpoints were appended in edge order: midpoint of edge e has index nv + e.
    let mut edge_index: HashMap<[usize; 2], usize> = HashMap::with_capacity(mesh.num_edges());
    for (e, k) in mesh.edges.iter().enumerate() {
        edge_index.insert(*k, e);
    }
    let midpoint = |a: usize, b: usize| -> usize {
        let key = if a < b { [a, b] } else { [b, a] };
        nv + edge_index[&key]
    };

    let mut triangles = Vec::with_capacity(4 * mesh.num_triangles());
    let mut child_map = Vec::with_capacity(mesh.num_triangles());
    for &[a, b, c] in &mesh.triangles {
        let mab = midpoint(a, b);
        let mbc = midpoint(b, c);
        let mca = midpoint(c, a);
        let base = triangles.len();
        triangles.push([a, mab, mca]);
        triangles.push([mab, b, mbc]);
        triangles.push([mca, mbc, c]);
        triangles.push([mab, mbc, mca]);
        child_map.push([base, base + 1, base + 2, base + 3]);
    }

    (
        TriangleMesh::finish(vertices, triangles, mesh.level + 1),
        child_map,
    )
}

pub fn refine_uniform(mesh: &TriangleMesh) -> TriangleMesh {
    refine_uniform_with_children(mesh).0
}

/// Nested hierarchy of uniformly refined meshes, levels 0..=max_level.
pub fn build_hierarchy(domain_tag: DomainTag, max_level: i64) -> Result<MeshHierarchy> {
    if max_level < 0 {
        return Err(Error::Config(format!(
            "max_level must be nonnegative, got {max_level}"
        )));
    }
    let mut levels = vec![build_initial_mesh(domain_tag)];
    let mut child_map = Vec::new();
    for _ in 0..max_level {
        let (fine, children) = refine_uniform_with_children(levels.last().unwrap());
        levels.push(fine);
        child_map.push(children);
    }
    Ok(MeshHierarchy {
        levels,
        child_map,
        domain_tag,
    })
}
