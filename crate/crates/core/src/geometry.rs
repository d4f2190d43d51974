//! Tetrahedron predicates and the flow/mechanics transfer operators.
//!
//! Two elements are paired when at least one vertex of either lies inside
//! the other (barycentric containment test, both directions). Each pair
//! contributes the source element volume as an unnormalized weight; rows are
//! then normalized so every transfer is a volume average over the partners
//! of the target element.
//!
//! Vertex containment misses intersections where an edge of one element
//! pierces a face of the other with no vertex of either inside the other.
//! Those pairs are dropped; [`overlap_volume_mc`] exists to quantify that in
//! tests.

use std::fmt;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::mesh::TetMesh;

/// Default containment tolerance on barycentric coordinates.
pub const DEFAULT_CONTAINMENT_TOL: f64 = 1e-9;

/// Relative degeneracy threshold: |signed volume| ≤ VOL_EPS · diameter³.
pub const VOL_EPS: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate tetrahedron (signed volume {volume:e})")]
    DegenerateTet { volume: f64 },
    #[error("{which} mesh has no elements")]
    EmptyMesh { which: &'static str },
    #[error("field has length {got}, operator expects {expected}")]
    SizeMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tet {
    pub v: [Point3<f64>; 4],
}

impl Tet {
    pub fn new(v0: Point3<f64>, v1: Point3<f64>, v2: Point3<f64>, v3: Point3<f64>) -> Self {
        Self {
            v: [v0, v1, v2, v3],
        }
    }

    pub fn from_coords(c: [[f64; 3]; 4]) -> Self {
        Self {
            v: c.map(Point3::from),
        }
    }

    /// det([v1−v0, v2−v0, v3−v0]) / 6.
    pub fn signed_volume(&self) -> f64 {
        let [a, b, c, d] = self.v;
        (b - a).cross(&(c - a)).dot(&(d - a)) / 6.0
    }

    /// Longest edge length.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..4 {
            for j in (i + 1)..4 {
                best = best.max((self.v[i] - self.v[j]).norm());
            }
        }
        best
    }

    pub fn centroid(&self) -> Point3<f64> {
        let s = self.v[0].coords + self.v[1].coords + self.v[2].coords + self.v[3].coords;
        Point3::from(s / 4.0)
    }

    pub fn is_degenerate(&self) -> bool {
        let d = self.diameter();
        self.signed_volume().abs() <= VOL_EPS * d * d * d
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = self.v[0];
        let mut hi = self.v[0];
        for p in &self.v[1..] {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Affine image of barycentric weights.
    pub fn point_at(&self, bary: &Bary) -> Point3<f64> {
        let mut s = Vector3::zeros();
        for (w, v) in bary.0.iter().zip(&self.v) {
            s += *w * v.coords;
        }
        Point3::from(s)
    }
}

/// Barycentric coordinates `(λ0, λ1, λ2, λ3)` with respect to a [`Tet`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bary(pub [f64; 4]);

impl Bary {
    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn tet_volume(tet: &Tet) -> f64 {
    tet.signed_volume().abs()
}

/// λ1..λ3 by Cramer's rule on the edge vectors from v0; λ0 closes the sum.
pub fn barycentric_coords(tet: &Tet, pt: &Point3<f64>) -> Result<Bary, GeometryError> {
    if tet.is_degenerate() {
        return Err(GeometryError::DegenerateTet {
            volume: tet.signed_volume(),
        });
    }
    let [a, b, c, d] = tet.v;
    let e1 = b - a;
    let e2 = c - a;
    let e3 = d - a;
    let r = pt - a;
    let det = e1.cross(&e2).dot(&e3);
    let l1 = r.cross(&e2).dot(&e3) / det;
    let l2 = e1.cross(&r).dot(&e3) / det;
    let l3 = e1.cross(&e2).dot(&r) / det;
    Ok(Bary([1.0 - l1 - l2 - l3, l1, l2, l3]))
}

/// True iff every barycentric coordinate is ≥ −tol; boundary points are inside.
pub fn point_in_tet(tet: &Tet, pt: &Point3<f64>, tol: f64) -> Result<bool, GeometryError> {
    Ok(barycentric_coords(tet, pt)?.0.iter().all(|&l| l >= -tol))
}

/// One detected flow/mechanics element pair with its raw volume weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementPair {
    pub flow_elem: usize,
    pub mech_elem: usize,
    /// Meas(E^f), used by the flow→mechanics operator.
    pub w_f2m: f64,
    /// Meas(E^p), used by the mechanics→flow operator.
    pub w_m2f: f64,
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Point3<f64>,
    hi: Point3<f64>,
}

impl Aabb {
    // λ ≥ −tol can put a point up to 4·tol·width outside the hull along an axis.
    fn of(tet: &Tet, tol: f64) -> Self {
        let (mut lo, mut hi) = tet.bounds();
        for k in 0..3 {
            let pad = 4.0 * tol.max(0.0) * (hi[k] - lo[k]) + 1e-300;
            lo[k] -= pad;
            hi[k] += pad;
        }
        Self { lo, hi }
    }

    fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.lo[k] <= other.hi[k] && other.lo[k] <= self.hi[k])
    }
}

fn any_vertex_inside(src: &Tet, dst: &Tet, tol: f64) -> Result<bool, GeometryError> {
    for v in &src.v {
        if point_in_tet(dst, v, tol)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Pairs elements of the two meshes by vertex containment in both
/// directions. The result is deduplicated and sorted by `(flow, mech)`; it
/// does not depend on the number of rayon workers.
pub fn detect_pairs(
    flow_mesh: &TetMesh,
    mech_mesh: &TetMesh,
    tol: f64,
) -> Result<Vec<ElementPair>, GeometryError> {
    if flow_mesh.num_tets() == 0 {
        return Err(GeometryError::EmptyMesh { which: "flow" });
    }
    if mech_mesh.num_tets() == 0 {
        return Err(GeometryError::EmptyMesh { which: "mechanics" });
    }
    let flow_tets: Vec<Tet> = (0..flow_mesh.num_tets())
        .map(|e| flow_mesh.tet(e))
        .collect();
    let mech_tets: Vec<Tet> = (0..mech_mesh.num_tets())
        .map(|e| mech_mesh.tet(e))
        .collect();
    let flow_boxes: Vec<Aabb> = flow_tets.iter().map(|t| Aabb::of(t, tol)).collect();
    let flow_vols: Vec<f64> = flow_tets.iter().map(tet_volume).collect();

    let per_mech: Vec<Vec<ElementPair>> = mech_tets
        .par_iter()
        .enumerate()
        .map(|(g, mech)| {
            let mbox = Aabb::of(mech, tol);
            let mvol = tet_volume(mech);
            let mut found = Vec::new();
            for (f, flow) in flow_tets.iter().enumerate() {
                if !mbox.overlaps(&flow_boxes[f]) {
                    continue;
                }
                // assignment semantics: a pair found by both loops is kept once
                if any_vertex_inside(flow, mech, tol)? || any_vertex_inside(mech, flow, tol)? {
                    found.push(ElementPair {
                        flow_elem: f,
                        mech_elem: g,
                        w_f2m: flow_vols[f],
                        w_m2f: mvol,
                    });
                }
            }
            Ok(found)
        })
        .collect::<Result<_, GeometryError>>()?;

    let mut pairs: Vec<ElementPair> = per_mech.into_iter().flatten().collect();
    pairs.sort_by_key(|p| (p.flow_elem, p.mech_elem));
    pairs.dedup_by_key(|p| (p.flow_elem, p.mech_elem));
    Ok(pairs)
}

/// One-to-one pairing when both meshes have the same elements (same vertex
/// coordinates, element by element). Vertex containment would also pair
/// every element with its vertex-sharing neighbors, so matching grids are
/// recognized up front and yield identity operators.
pub fn matching_pairs(flow_mesh: &TetMesh, mech_mesh: &TetMesh) -> Option<Vec<ElementPair>> {
    if flow_mesh.num_tets() != mech_mesh.num_tets() || flow_mesh.num_tets() == 0 {
        return None;
    }
    let same = (0..flow_mesh.num_tets()).all(|e| {
        let mut a = flow_mesh.tet(e).v.map(|p| [p.x, p.y, p.z]);
        let mut b = mech_mesh.tet(e).v.map(|p| [p.x, p.y, p.z]);
        a.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        b.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        a == b
    });
    same.then(|| {
        (0..flow_mesh.num_tets())
            .map(|e| {
                let v = flow_mesh.volume(e);
                ElementPair {
                    flow_elem: e,
                    mech_elem: e,
                    w_f2m: v,
                    w_m2f: v,
                }
            })
            .collect()
    })
}

/// [`matching_pairs`] when the meshes coincide, [`detect_pairs`] otherwise.
pub fn pair_elements(
    flow_mesh: &TetMesh,
    mech_mesh: &TetMesh,
    tol: f64,
) -> Result<Vec<ElementPair>, GeometryError> {
    match matching_pairs(flow_mesh, mech_mesh) {
        Some(p) => Ok(p),
        None => detect_pairs(flow_mesh, mech_mesh, tol),
    }
}

/// Row-normalized sparse transfer map from a source element field to a
/// target element field.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOperator {
    n_source: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl ProjectionOperator {
    /// Normalizes raw `(target, source, weight)` triples per target row.
    /// Entries of a row keep ascending source order.
    fn from_raw(
        n_source: usize,
        n_target: usize,
        raw: impl Iterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_target];
        for (t, s, w) in raw {
            rows[t].push((s, w));
        }
        for row in &mut rows {
            row.sort_by_key(|&(s, _)| s);
            let total: f64 = row.iter().map(|&(_, w)| w).sum();
            for entry in row.iter_mut() {
                entry.1 /= total;
            }
        }
        Self { n_source, rows }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_source: n,
            rows: (0..n).map(|i| vec![(i, 1.0)]).collect(),
        }
    }

    pub fn n_source(&self) -> usize {
        self.n_source
    }

    pub fn n_target(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, target: usize) -> &[(usize, f64)] {
        &self.rows[target]
    }

    /// Target elements without any source partner.
    pub fn uncovered(&self) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&i| self.rows[i].is_empty())
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.n_source == self.rows.len()
            && self
                .rows
                .iter()
                .enumerate()
                .all(|(i, r)| r.len() == 1 && r[0].0 == i && r[0].1 == 1.0)
    }

    /// Worst deviation of a nonempty row sum from one.
    pub fn max_row_sum_error(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| !r.is_empty())
            .map(|r| (r.iter().map(|&(_, w)| w).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn weight_range(&self) -> Option<(f64, f64)> {
        self.rows
            .iter()
            .flatten()
            .fold(None, |acc, &(_, w)| match acc {
                None => Some((w, w)),
                Some((lo, hi)) => Some((lo.min(w), hi.max(w))),
            })
    }

    /// Volume-weighted transfer. Targets with an empty row keep their value
    /// from `fallback` (the previous target field).
    pub fn apply(&self, source: &[f64], fallback: &[f64]) -> Result<Vec<f64>, GeometryError> {
        if source.len() != self.n_source {
            return Err(GeometryError::SizeMismatch {
                expected: self.n_source,
                got: source.len(),
            });
        }
        if fallback.len() != self.rows.len() {
            return Err(GeometryError::SizeMismatch {
                expected: self.rows.len(),
                got: fallback.len(),
            });
        }
        Ok(self
            .rows
            .iter()
            .zip(fallback)
            .map(|(row, &prev)| {
                if row.is_empty() {
                    prev
                } else {
                    row.iter().map(|&(s, w)| w * source[s]).sum()
                }
            })
            .collect())
    }
}

/// Builds `(flow_to_mech, mech_to_flow)` from a deduplicated pair list.
pub fn build_projection(
    pairs: &[ElementPair],
    n_flow: usize,
    n_mech: usize,
) -> (ProjectionOperator, ProjectionOperator) {
    let f2m = ProjectionOperator::from_raw(
        n_flow,
        n_mech,
        pairs.iter().map(|p| (p.mech_elem, p.flow_elem, p.w_f2m)),
    );
    let m2f = ProjectionOperator::from_raw(
        n_mech,
        n_flow,
        pairs.iter().map(|p| (p.flow_elem, p.mech_elem, p.w_m2f)),
    );
    (f2m, m2f)
}

/// Summary of a pair of transfer operators, printed as `key = value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionDiagnostics {
    pub pair_count: usize,
    pub n_flow: usize,
    pub n_mech: usize,
    pub uncovered_flow: usize,
    pub uncovered_mech: usize,
    pub min_weight: f64,
    pub max_weight: f64,
    pub max_row_sum_error: f64,
    pub identity: bool,
}

impl ProjectionDiagnostics {
    pub fn new(pairs: &[ElementPair], f2m: &ProjectionOperator, m2f: &ProjectionOperator) -> Self {
        let (lo1, hi1) = f2m.weight_range().unwrap_or((0.0, 0.0));
        let (lo2, hi2) = m2f.weight_range().unwrap_or((0.0, 0.0));
        Self {
            pair_count: pairs.len(),
            n_flow: m2f.n_target(),
            n_mech: f2m.n_target(),
            uncovered_flow: m2f.uncovered().len(),
            uncovered_mech: f2m.uncovered().len(),
            min_weight: lo1.min(lo2),
            max_weight: hi1.max(hi2),
            max_row_sum_error: f2m.max_row_sum_error().max(m2f.max_row_sum_error()),
            identity: f2m.is_identity() && m2f.is_identity(),
        }
    }
}

impl fmt::Display for ProjectionDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "pairs = {}", self.pair_count)?;
        writeln!(f, "flow_elements = {}", self.n_flow)?;
        writeln!(f, "mech_elements = {}", self.n_mech)?;
        writeln!(f, "uncovered_flow = {}", self.uncovered_flow)?;
        writeln!(f, "uncovered_mech = {}", self.uncovered_mech)?;
        writeln!(f, "min_row_weight = {:.17e}", self.min_weight)?;
        writeln!(f, "max_row_weight = {:.17e}", self.max_weight)?;
        writeln!(f, "max_row_sum_error = {:.17e}", self.max_row_sum_error)?;
        writeln!(f, "identity = {}", self.identity)
    }
}

/// Monte Carlo estimate of Meas(a ∩ b): uniform samples in `a` drawn as
/// Dirichlet(1,1,1,1) barycentric weights, scored by strict containment in `b`.
pub fn overlap_volume_mc(a: &Tet, b: &Tet, n_samples: usize, seed: u64) -> f64 {
    let n_samples = n_samples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..n_samples {
        let mut w = [0.0f64; 4];
        for wi in &mut w {
            *wi = -(1.0 - rng.gen::<f64>()).ln();
        }
        let s: f64 = w.iter().sum();
        let bary = Bary(w.map(|x| x / s));
        let pt = a.point_at(&bary);
        if let Ok(true) = point_in_tet(b, &pt, 0.0) {
            hits += 1;
        }
    }
    tet_volume(a) * hits as f64 / n_samples as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Tet {
        Tet::from_coords([[0., 0., 0.], [1., 0., 0.], [0., 1., 0.], [0., 0., 1.]])
    }

    #[test]
    fn bary_vertex_centroid_and_linear_cases() {
        let t = unit();
        assert_eq!(
            barycentric_coords(&t, &Point3::origin()).unwrap().0,
            [1.0, 0.0, 0.0, 0.0]
        );
        let c = barycentric_coords(&t, &t.centroid()).unwrap().0;
        for l in c {
            assert!((l - 0.25).abs() < 1e-15);
        }
        let l = barycentric_coords(&t, &Point3::new(0.1, 0.2, 0.3))
            .unwrap()
            .0;
        let want = [0.4, 0.1, 0.2, 0.3];
        for k in 0..4 {
            assert!((l[k] - want[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_tet_is_rejected() {
        let flat = Tet::from_coords([[0., 0., 0.], [1., 0., 0.], [0., 1., 0.], [1., 1., 0.]]);
        assert!(matches!(
            barycentric_coords(&flat, &Point3::origin()),
            Err(GeometryError::DegenerateTet { .. })
        ));
        assert_eq!(tet_volume(&flat), 0.0);
    }

    #[test]
    fn containment_examples() {
        let t = unit();
        assert!(point_in_tet(&t, &Point3::new(0.25, 0.25, 0.25), 1e-10).unwrap());
        assert!(!point_in_tet(&t, &Point3::new(1., 1., 1.), 1e-10).unwrap());
        assert!(point_in_tet(&t, &Point3::origin(), 1e-10).unwrap());
    }

    #[test]
    fn volume_examples() {
        assert!((tet_volume(&unit()) - 1.0 / 6.0).abs() < 1e-16);
        let big = Tet::from_coords([[0., 0., 0.], [2., 0., 0.], [0., 2., 0.], [0., 0., 2.]]);
        assert!((tet_volume(&big) - 8.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn normalization_of_two_partners() {
        let pairs = [
            ElementPair {
                flow_elem: 0,
                mech_elem: 0,
                w_f2m: 2.0,
                w_m2f: 5.0,
            },
            ElementPair {
                flow_elem: 1,
                mech_elem: 0,
                w_f2m: 1.0,
                w_m2f: 5.0,
            },
        ];
        let (f2m, m2f) = build_projection(&pairs, 2, 1);
        let row = f2m.row(0);
        assert!((row[0].1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((row[1].1 - 1.0 / 3.0).abs() < 1e-15);
        let out = f2m.apply(&[3.0, 6.0], &[0.0]).unwrap();
        assert!((out[0] - 4.0).abs() < 1e-14);
        assert_eq!(m2f.row(0), &[(0, 1.0)]);
        assert_eq!(m2f.row(1), &[(0, 1.0)]);
    }

    #[test]
    fn empty_rows_fall_back_and_sizes_are_checked() {
        let pairs = [ElementPair {
            flow_elem: 0,
            mech_elem: 1,
            w_f2m: 1.0,
            w_m2f: 1.0,
        }];
        let (f2m, _) = build_projection(&pairs, 1, 2);
        assert_eq!(f2m.uncovered(), vec![0]);
        assert_eq!(f2m.apply(&[7.0], &[-1.0, 0.0]).unwrap(), vec![-1.0, 7.0]);
        assert!(matches!(
            f2m.apply(&[1.0, 2.0], &[0.0, 0.0]),
            Err(GeometryError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn monte_carlo_full_and_disjoint() {
        let a = unit();
        let v = overlap_volume_mc(&a, &a, 100_000, 1);
        assert!((v - 1.0 / 6.0).abs() < 1e-12, "{v}");
        let far = Tet::from_coords([[10., 0., 0.], [11., 0., 0.], [10., 1., 0.], [10., 0., 1.]]);
        assert_eq!(overlap_volume_mc(&a, &far, 1000, 1), 0.0);
    }
}
