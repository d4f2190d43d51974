//! Tetrahedral mesh data model shared by the flow and mechanics grids.

mod boxgen;
mod fv;
mod io;

pub use boxgen::{box_tet_mesh, box_tet_mesh_with, HexSplit};
pub use fv::{build_fv_grid, BoundaryConnection, Connection, FvGrid};
pub use io::{load_mesh, write_mesh};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::Point3;
use thiserror::Error;

use crate::geometry::Tet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{what} {index} references node {node}, but the mesh has {n_nodes} nodes")]
    Index {
        what: &'static str,
        index: usize,
        node: usize,
        n_nodes: usize,
    },
    #[error("boundary face {index} ({nodes:?}) is not a face of any tetrahedron")]
    DanglingFace { index: usize, nodes: [usize; 3] },
    #[error("boundary face {index} ({nodes:?}) is shared by two tetrahedra")]
    InteriorFace { index: usize, nodes: [usize; 3] },
    #[error("face {nodes:?} is shared by more than two tetrahedra")]
    NonManifold { nodes: [usize; 3] },
    #[error("tetrahedron {index} is degenerate (volume {volume:e})")]
    DegenerateTet { index: usize, volume: f64 },
    #[error("degenerate face {nodes:?} on element {elem}")]
    DegenerateFace { elem: usize, nodes: [usize; 3] },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Local vertex indices of the four faces of a tet, face `k` opposite vertex `k`.
pub const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFace {
    pub nodes: [usize; 3],
    pub tag: String,
}

/// Nodes, positively oriented tetrahedra and tagged boundary triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct TetMesh {
    nodes: Vec<Point3<f64>>,
    tets: Vec<[usize; 4]>,
    boundary: Vec<BoundaryFace>,
}

pub(crate) fn face_key(nodes: [usize; 3]) -> [usize; 3] {
    let mut k = nodes;
    k.sort_unstable();
    k
}

impl TetMesh {
    /// Validates the connectivity and repairs negatively oriented tets by
    /// swapping their last two vertices. Returns the mesh and the number of
    /// repaired tets.
    pub fn new(
        nodes: Vec<Point3<f64>>,
        mut tets: Vec<[usize; 4]>,
        boundary: Vec<BoundaryFace>,
    ) -> Result<(Self, usize), MeshError> {
        let n_nodes = nodes.len();
        for (index, t) in tets.iter().enumerate() {
            if let Some(&node) = t.iter().find(|&&n| n >= n_nodes) {
                return Err(MeshError::Index {
                    what: "tet",
                    index,
                    node,
                    n_nodes,
                });
            }
        }
        for (index, f) in boundary.iter().enumerate() {
            if let Some(&node) = f.nodes.iter().find(|&&n| n >= n_nodes) {
                return Err(MeshError::Index {
                    what: "boundary face",
                    index,
                    node,
                    n_nodes,
                });
            }
        }

        let mut repaired = 0;
        for (index, t) in tets.iter_mut().enumerate() {
            let tet = Tet::new(nodes[t[0]], nodes[t[1]], nodes[t[2]], nodes[t[3]]);
            if tet.is_degenerate() {
                return Err(MeshError::DegenerateTet {
                    index,
                    volume: tet.signed_volume(),
                });
            }
            if tet.signed_volume() < 0.0 {
                t.swap(2, 3);
                repaired += 1;
            }
        }

        let mesh = Self {
            nodes,
            tets,
            boundary,
        };
        let counts = mesh.face_counts()?;
        for (index, f) in mesh.boundary.iter().enumerate() {
            match counts.get(&face_key(f.nodes)) {
                None => {
                    return Err(MeshError::DanglingFace {
                        index,
                        nodes: f.nodes,
                    })
                }
                Some(&c) if c > 1 => {
                    return Err(MeshError::InteriorFace {
                        index,
                        nodes: f.nodes,
                    })
                }
                Some(_) => {}
            }
        }
        Ok((mesh, repaired))
    }

    fn face_counts(&self) -> Result<HashMap<[usize; 3], usize>, MeshError> {
        let mut counts: HashMap<[usize; 3], usize> = HashMap::with_capacity(self.tets.len() * 2);
        for t in &self.tets {
            for lf in TET_FACES {
                let key = face_key(lf.map(|k| t[k]));
                let c = counts.entry(key).or_insert(0);
                *c += 1;
                if *c > 2 {
                    return Err(MeshError::NonManifold { nodes: key });
                }
            }
        }
        Ok(counts)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn nodes(&self) -> &[Point3<f64>] {
        &self.nodes
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn boundary(&self) -> &[BoundaryFace] {
        &self.boundary
    }

    pub fn tet(&self, e: usize) -> Tet {
        let t = self.tets[e];
        Tet::new(
            self.nodes[t[0]],
            self.nodes[t[1]],
            self.nodes[t[2]],
            self.nodes[t[3]],
        )
    }

    pub fn volume(&self, e: usize) -> f64 {
        self.tet(e).signed_volume()
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.num_tets()).map(|e| self.volume(e)).sum()
    }

    /// Sorted, deduplicated boundary tags.
    pub fn tags(&self) -> BTreeSet<&str> {
        self.boundary.iter().map(|f| f.tag.as_str()).collect()
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.boundary.iter().any(|f| f.tag == tag)
    }

    /// Sorted node ids touched by faces carrying `tag`.
    pub fn tag_nodes(&self, tag: &str) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .boundary
            .iter()
            .filter(|f| f.tag == tag)
            .flat_map(|f| f.nodes)
            .collect();
        set.into_iter().collect()
    }

    /// Faces of exactly one tet, keyed by sorted node triple, as
    /// `(elem, local face)`.
    pub(crate) fn exterior_faces(&self) -> BTreeMap<[usize; 3], (usize, usize)> {
        let mut seen: HashMap<[usize; 3], Option<(usize, usize)>> = HashMap::new();
        for (e, t) in self.tets.iter().enumerate() {
            for (lf, local) in TET_FACES.iter().enumerate() {
                let key = face_key(local.map(|k| t[k]));
                seen.entry(key)
                    .and_modify(|slot| *slot = None)
                    .or_insert(Some((e, lf)));
            }
        }
        seen.into_iter()
            .filter_map(|(k, v)| v.map(|v| (k, v)))
            .collect()
    }

    /// Applies `f` to every node coordinate.
    pub fn map_nodes(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Self {
        Self {
            nodes: self.nodes.iter().map(f).collect(),
            tets: self.tets.clone(),
            boundary: self.boundary.clone(),
        }
    }

    /// Index of the first element containing `pt`, if any.
    pub fn locate(&self, pt: &Point3<f64>, tol: f64) -> Option<usize> {
        (0..self.num_tets())
            .find(|&e| crate::geometry::point_in_tet(&self.tet(e), pt, tol).unwrap_or(false))
    }
}
