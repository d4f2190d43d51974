use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::{face_key, MeshError, TetMesh, TET_FACES};

/// Interior face between `elem_i` and `elem_j`; `normal` points from i to j.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub elem_i: usize,
    pub elem_j: usize,
    /// Two-point transmissibility k·A/d (viscosity not included).
    pub trans: f64,
    pub area: f64,
    pub normal: Vector3<f64>,
    pub face_centroid: Point3<f64>,
}

/// Exterior face of `elem`. Untagged faces carry `tag: None`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConnection {
    pub elem: usize,
    pub tag: Option<String>,
    /// Half transmissibility from the element centroid to the face centroid.
    pub trans: f64,
    pub area: f64,
    pub face_centroid: Point3<f64>,
}

/// Finite-volume view of a tet mesh: cell centroids, bulk volumes and
/// two-point face transmissibilities.
#[derive(Debug, Clone, PartialEq)]
pub struct FvGrid {
    pub centroids: Vec<Point3<f64>>,
    pub volumes: Vec<f64>,
    pub connections: Vec<Connection>,
    pub boundary: Vec<BoundaryConnection>,
}

impl FvGrid {
    pub fn num_cells(&self) -> usize {
        self.volumes.len()
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.boundary.iter().any(|b| b.tag.as_deref() == Some(tag))
    }
}

struct FaceGeom {
    area: f64,
    normal: Vector3<f64>,
    centroid: Point3<f64>,
}

fn face_geometry(a: Point3<f64>, b: Point3<f64>, c: Point3<f64>, inside: Point3<f64>) -> FaceGeom {
    let cross = (b - a).cross(&(c - a));
    let area = 0.5 * cross.norm();
    let centroid = Point3::from((a.coords + b.coords + c.coords) / 3.0);
    let mut normal = if area > 0.0 {
        cross / (2.0 * area)
    } else {
        cross
    };
    if normal.dot(&(centroid - inside)) < 0.0 {
        normal = -normal;
    }
    FaceGeom {
        area,
        normal,
        centroid,
    }
}

fn half_trans(
    k: f64,
    geom: &FaceGeom,
    centroid: Point3<f64>,
    elem: usize,
    nodes: [usize; 3],
    scale: f64,
) -> Result<f64, MeshError> {
    let d = geom.centroid - centroid;
    let dn = d.dot(&geom.normal);
    if geom.area <= 1e-14 * scale * scale || dn <= 1e-14 * scale {
        return Err(MeshError::DegenerateFace { elem, nodes });
    }
    Ok(k * geom.area * dn / d.norm_squared())
}

/// Two-point flux geometry with isotropic permeability `k`.
///
/// Half transmissibilities are `k·A·(d·n̂)/|d|²`, with `d` running from the
/// cell centroid to the face centroid; interior faces combine both halves
/// harmonically. Connection order follows the first appearance of each
/// face while scanning tets in index order.
pub fn build_fv_grid(mesh: &TetMesh, k: f64) -> Result<FvGrid, MeshError> {
    if !(k > 0.0) {
        return Err(MeshError::InvalidParameter(format!(
            "permeability must be positive, got {k}"
        )));
    }
    let n = mesh.num_tets();
    let mut centroids = Vec::with_capacity(n);
    let mut volumes = Vec::with_capacity(n);
    let mut scales = Vec::with_capacity(n);
    for e in 0..n {
        let tet = mesh.tet(e);
        centroids.push(tet.centroid());
        volumes.push(tet.signed_volume());
        scales.push(tet.diameter());
    }

    let tags: HashMap<[usize; 3], &str> = mesh
        .boundary()
        .iter()
        .map(|f| (face_key(f.nodes), f.tag.as_str()))
        .collect();

    let mut open: HashMap<[usize; 3], (usize, usize)> = HashMap::with_capacity(2 * n);
    let mut connections = Vec::with_capacity(2 * n);
    for (e, t) in mesh.tets().iter().enumerate() {
        for (lf, local) in TET_FACES.iter().enumerate() {
            let face = local.map(|k| t[k]);
            let key = face_key(face);
            match open.remove(&key) {
                None => {
                    open.insert(key, (e, lf));
                }
                Some((first, _)) => {
                    let p = face.map(|n| mesh.nodes()[n]);
                    let geom = face_geometry(p[0], p[1], p[2], centroids[first]);
                    let ti = half_trans(k, &geom, centroids[first], first, face, scales[first])?;
                    let flipped = FaceGeom {
                        normal: -geom.normal,
                        ..geom
                    };
                    let tj = half_trans(k, &flipped, centroids[e], e, face, scales[e])?;
                    connections.push(Connection {
                        elem_i: first,
                        elem_j: e,
                        trans: 1.0 / (1.0 / ti + 1.0 / tj),
                        area: flipped.area,
                        normal: -flipped.normal,
                        face_centroid: flipped.centroid,
                    });
                }
            }
        }
    }

    let mut exterior: Vec<(usize, usize, [usize; 3])> = open
        .into_iter()
        .map(|(key, (e, lf))| (e, lf, key))
        .collect();
    exterior.sort_unstable();
    let mut boundary = Vec::with_capacity(exterior.len());
    for (e, lf, key) in exterior {
        let t = mesh.tets()[e];
        let face = TET_FACES[lf].map(|k| t[k]);
        let p = face.map(|n| mesh.nodes()[n]);
        let geom = face_geometry(p[0], p[1], p[2], centroids[e]);
        let trans = half_trans(k, &geom, centroids[e], e, face, scales[e])?;
        boundary.push(BoundaryConnection {
            elem: e,
            tag: tags.get(&key).map(|s| s.to_string()),
            trans,
            area: geom.area,
            face_centroid: geom.centroid,
        });
    }

    Ok(FvGrid {
        centroids,
        volumes,
        connections,
        boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{box_tet_mesh, load_mesh};

    #[test]
    fn single_tet_has_only_boundary_connections() {
        let text = "tetmesh v1\nnodes 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\ntets 1\n0 1 2 3\nboundary 0\n";
        let (m, _) = load_mesh(text).unwrap();
        let g = build_fv_grid(&m, 1.0).unwrap();
        assert!(g.connections.is_empty());
        assert_eq!(g.boundary.len(), 4);
        assert!(g.boundary.iter().all(|b| b.tag.is_none() && b.trans > 0.0));
    }

    #[test]
    fn uniform_scaling_scales_transmissibility() {
        let m = box_tet_mesh(2, 2, 1, 1.0, 1.0, 1.0);
        let s = 3.0;
        let big = m.map_nodes(|p| Point3::from(p.coords * s));
        let g = build_fv_grid(&m, 2.0).unwrap();
        let gb = build_fv_grid(&big, 2.0).unwrap();
        for (a, b) in g.connections.iter().zip(&gb.connections) {
            assert!((b.trans - s * a.trans).abs() <= 1e-12 * b.trans);
        }
        for (a, b) in g.boundary.iter().zip(&gb.boundary) {
            assert!((b.trans - s * a.trans).abs() <= 1e-12 * b.trans);
        }
    }

    #[test]
    fn every_face_is_accounted_for_once() {
        let m = box_tet_mesh(3, 2, 2, 3.0, 2.0, 1.0);
        let g = build_fv_grid(&m, 1.0).unwrap();
        assert_eq!(2 * g.connections.len() + g.boundary.len(), 4 * m.num_tets());
        assert_eq!(g.boundary.len(), m.boundary().len());
        assert!(g.boundary.iter().all(|b| b.tag.is_some()));
        assert!(g.connections.iter().all(|c| c.trans > 0.0));
        assert!(((g.total_volume() - 6.0) / 6.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_permeability() {
        let m = box_tet_mesh(1, 1, 1, 1.0, 1.0, 1.0);
        assert!(build_fv_grid(&m, 0.0).is_err());
    }
}
