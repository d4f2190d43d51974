//! Quasi-static linear elasticity on linear tetrahedra with a Biot
//! effective-stress pressure load.
//!
//! Displacements live at nodes (three DOFs per node, interleaved `x, y, z`).
//! Pressure, volumetric strain and volumetric stress are element constants.
//! Constraints are applied by condensation: fixed DOFs are lifted to the
//! right-hand side and every DOF tied to a rigid plate is replaced by a
//! single master unknown that receives the total plate force.

use std::collections::BTreeMap;

use nalgebra::{Matrix6, SymmetricEigen, Vector3, Vector6};
use thiserror::Error;

use crate::geometry::Tet;
use crate::material::PoroelasticMaterial;
use crate::mesh::TetMesh;
use crate::sparse::{cg_solve, CgSettings, CsrMatrix, SolveError, TripletBuilder};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanicsError {
    #[error("element {0} has zero volume")]
    DegenerateElement(usize),
    #[error("{what} has length {got}, expected {expected}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("mechanics boundary tag `{0}` does not exist in the mesh")]
    UnknownTag(String),
    #[error("constraints leave {0} rigid-body mode(s) free")]
    InsufficientConstraints(usize),
    #[error("node {node} component {axis} is both fixed and tied to a rigid plate")]
    ConflictingConstraints { node: usize, axis: usize },
    #[error("mechanics solve did not converge: {0}")]
    SolverDiverged(SolveError),
}

impl From<SolveError> for MechanicsError {
    fn from(e: SolveError) -> Self {
        match e {
            // a zero-energy search direction means a rigid mode survived
            SolveError::Indefinite { .. } | SolveError::BadDiagonal { .. } => {
                MechanicsError::InsufficientConstraints(1)
            }
            other => MechanicsError::SolverDiverged(other),
        }
    }
}

/// Cartesian component index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Axis::X),
            1 => Some(Axis::Y),
            2 => Some(Axis::Z),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MechBoundary {
    /// Prescribed displacement component; a roller when `value` is zero.
    Fixed { axis: Axis, value: f64 },
    /// Uniform traction vector (Pa) on the tagged faces.
    Traction(Vector3<f64>),
    /// All tagged nodes share one displacement along `axis`, loaded by the
    /// signed total force (N) along that axis.
    RigidPlate { axis: Axis, force: f64 },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MechBcSpec {
    pub tags: BTreeMap<String, Vec<MechBoundary>>,
}

impl MechBcSpec {
    pub fn with(mut self, tag: &str, bc: MechBoundary) -> Self {
        self.tags.entry(tag.to_string()).or_default().push(bc);
        self
    }

    pub fn validate(&self, mesh: &TetMesh) -> Result<(), MechanicsError> {
        for tag in self.tags.keys() {
            if !mesh.has_tag(tag) {
                return Err(MechanicsError::UnknownTag(tag.clone()));
            }
        }
        Ok(())
    }
}

/// Mechanics-grid fields. `u` is measured from the initial equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct MechState {
    pub u: Vec<f64>,
    pub eps_v: Vec<f64>,
    pub sigma_v: Vec<f64>,
    pub p_mech: Vec<f64>,
    pub p0: Vec<f64>,
    pub sigma_v0: Vec<f64>,
}

impl MechState {
    pub fn displacement(&self, node: usize) -> Vector3<f64> {
        Vector3::new(self.u[3 * node], self.u[3 * node + 1], self.u[3 * node + 2])
    }
}

/// Gradients of the four linear shape functions, constant over the element.
pub fn shape_gradients(tet: &Tet) -> [Vector3<f64>; 4] {
    let [a, b, c, d] = tet.v;
    let e1 = b - a;
    let e2 = c - a;
    let e3 = d - a;
    let det = e1.cross(&e2).dot(&e3);
    let g1 = e2.cross(&e3) / det;
    let g2 = e3.cross(&e1) / det;
    let g3 = e1.cross(&e2) / det;
    [-(g1 + g2 + g3), g1, g2, g3]
}

fn element_geometry(mesh: &TetMesh, e: usize) -> Result<(f64, [Vector3<f64>; 4]), MechanicsError> {
    let tet = mesh.tet(e);
    let vol = tet.signed_volume();
    if tet.is_degenerate() || vol <= 0.0 {
        return Err(MechanicsError::DegenerateElement(e));
    }
    Ok((vol, shape_gradients(&tet)))
}

/// Global P1 stiffness, `3·n_nodes` square, with drained isotropic moduli.
///
/// Block `(a, b)` entry `(i, j)` is
/// `V (λ ∂_i N_a ∂_j N_b + G ∂_j N_a ∂_i N_b + G δ_ij ∇N_a·∇N_b)`,
/// which is exactly symmetric under `(a,i) ↔ (b,j)`.
pub fn assemble_stiffness(
    mesh: &TetMesh,
    mat: &PoroelasticMaterial,
) -> Result<CsrMatrix, MechanicsError> {
    let lam = mat.lame_lambda();
    let g = mat.shear_modulus();
    let ndof = 3 * mesh.num_nodes();
    let mut t = TripletBuilder::with_capacity(ndof, 144 * mesh.num_tets());
    for (e, nodes) in mesh.tets().iter().enumerate() {
        let (vol, grads) = element_geometry(mesh, e)?;
        for a in 0..4 {
            for b in 0..4 {
                let ga = grads[a];
                let gb = grads[b];
                let dot = ga.dot(&gb);
                for i in 0..3 {
                    for j in 0..3 {
                        let mut v = lam * ga[i] * gb[j] + g * ga[j] * gb[i];
                        if i == j {
                            v += g * dot;
                        }
                        t.add(3 * nodes[a] + i, 3 * nodes[b] + j, vol * v);
                    }
                }
            }
        }
    }
    Ok(t.build())
}

fn check_len(what: &'static str, v: &[f64], expected: usize) -> Result<(), MechanicsError> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(MechanicsError::SizeMismatch {
            what,
            expected,
            got: v.len(),
        })
    }
}

/// Nodal forces `∫ b (p − p0) ∇N_a dV` for element-constant pressure.
pub fn assemble_pressure_load(
    mesh: &TetMesh,
    mat: &PoroelasticMaterial,
    p_mech: &[f64],
    p0: &[f64],
) -> Result<Vec<f64>, MechanicsError> {
    let n = mesh.num_tets();
    check_len("p_mech", p_mech, n)?;
    check_len("p0", p0, n)?;
    let b = mat.biot_coefficient;
    let mut f = vec![0.0; 3 * mesh.num_nodes()];
    if b == 0.0 {
        return Ok(f);
    }
    for (e, nodes) in mesh.tets().iter().enumerate() {
        let dp = p_mech[e] - p0[e];
        if dp == 0.0 {
            continue;
        }
        let (vol, grads) = element_geometry(mesh, e)?;
        for a in 0..4 {
            for i in 0..3 {
                f[3 * nodes[a] + i] += b * dp * vol * grads[a][i];
            }
        }
    }
    Ok(f)
}

/// Lumped body force ρ_b g V/4 per node, ρ_b = φ0 ρ_f0 + (1 − φ0) ρ_s.
pub fn assemble_body_force(mesh: &TetMesh, mat: &PoroelasticMaterial) -> Vec<f64> {
    let mut f = vec![0.0; 3 * mesh.num_nodes()];
    if mat.gravity.norm_squared() == 0.0 {
        return f;
    }
    let w = mat.bulk_density() * mat.gravity;
    for (e, nodes) in mesh.tets().iter().enumerate() {
        let quarter = mesh.volume(e) / 4.0;
        for &n in nodes {
            for i in 0..3 {
                f[3 * n + i] += w[i] * quarter;
            }
        }
    }
    f
}

/// Consistent nodal forces of the uniform tractions in `bc` (A/3 per node).
pub fn assemble_traction_load(mesh: &TetMesh, bc: &MechBcSpec) -> Vec<f64> {
    let mut f = vec![0.0; 3 * mesh.num_nodes()];
    for face in mesh.boundary() {
        let Some(list) = bc.tags.get(&face.tag) else {
            continue;
        };
        let [a, b, c] = face.nodes.map(|n| mesh.nodes()[n]);
        let third = 0.5 * (b - a).cross(&(c - a)).norm() / 3.0;
        for item in list {
            if let MechBoundary::Traction(t) = item {
                for &n in &face.nodes {
                    for i in 0..3 {
                        f[3 * n + i] += t[i] * third;
                    }
                }
            }
        }
    }
    f
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Dof {
    Free(usize),
    Fixed(f64),
}

/// Stiffness with constraints condensed out, reusable for many right-hand
/// sides.
#[derive(Debug, Clone)]
pub struct ConstrainedSystem {
    full: CsrMatrix,
    dofs: Vec<Dof>,
    reduced: CsrMatrix,
    /// `(reduced index, total force)` per rigid plate.
    plate_loads: Vec<(usize, f64)>,
}

fn rigid_modes(mesh: &TetMesh) -> Vec<[f64; 6]> {
    let n = mesh.num_nodes().max(1) as f64;
    let centre = mesh
        .nodes()
        .iter()
        .fold(Vector3::zeros(), |s, p| s + p.coords)
        / n;
    let scale = mesh
        .nodes()
        .iter()
        .map(|p| (p.coords - centre).norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut modes = Vec::with_capacity(3 * mesh.num_nodes());
    for p in mesh.nodes() {
        let r = (p.coords - centre) / scale;
        // translations then infinitesimal rotations ω × r
        modes.push([1.0, 0.0, 0.0, 0.0, r.z, -r.y]);
        modes.push([0.0, 1.0, 0.0, -r.z, 0.0, r.x]);
        modes.push([0.0, 0.0, 1.0, r.y, -r.x, 0.0]);
    }
    modes
}

impl ConstrainedSystem {
    pub fn new(
        mesh: &TetMesh,
        stiffness: CsrMatrix,
        bc: &MechBcSpec,
    ) -> Result<Self, MechanicsError> {
        bc.validate(mesh)?;
        let ndof = 3 * mesh.num_nodes();
        if stiffness.nrows() != ndof {
            return Err(MechanicsError::SizeMismatch {
                what: "stiffness",
                expected: ndof,
                got: stiffness.nrows(),
            });
        }

        let mut fixed: Vec<Option<f64>> = vec![None; ndof];
        let mut plate_of: Vec<Option<usize>> = vec![None; ndof];
        let mut plates: Vec<f64> = Vec::new();
        for (tag, list) in &bc.tags {
            let nodes = mesh.tag_nodes(tag);
            for item in list {
                match *item {
                    MechBoundary::Fixed { axis, value } => {
                        for &n in &nodes {
                            fixed[3 * n + axis.index()] = Some(value);
                        }
                    }
                    MechBoundary::RigidPlate { axis, force } => {
                        let id = plates.len();
                        plates.push(force);
                        for &n in &nodes {
                            plate_of[3 * n + axis.index()] = Some(id);
                        }
                    }
                    MechBoundary::Traction(_) => {}
                }
            }
        }

        let mut dofs = Vec::with_capacity(ndof);
        let mut plate_index: Vec<Option<usize>> = vec![None; plates.len()];
        let mut next = 0;
        for d in 0..ndof {
            let dof = match (fixed[d], plate_of[d]) {
                (Some(_), Some(_)) => {
                    return Err(MechanicsError::ConflictingConstraints {
                        node: d / 3,
                        axis: d % 3,
                    })
                }
                (Some(v), None) => Dof::Fixed(v),
                (None, Some(id)) => Dof::Free(*plate_index[id].get_or_insert_with(|| {
                    next += 1;
                    next - 1
                })),
                (None, None) => {
                    next += 1;
                    Dof::Free(next - 1)
                }
            };
            dofs.push(dof);
        }
        let plate_loads = plates
            .iter()
            .zip(&plate_index)
            .filter_map(|(&f, idx)| idx.map(|i| (i, f)))
            .collect();

        Self::check_rigid_modes(mesh, &dofs)?;

        let mut t = TripletBuilder::with_capacity(next, stiffness.nnz());
        for a in 0..ndof {
            let Dof::Free(ra) = dofs[a] else { continue };
            for (b, v) in stiffness.row(a) {
                if let Dof::Free(rb) = dofs[b] {
                    t.add(ra, rb, v);
                }
            }
        }
        Ok(Self {
            full: stiffness,
            dofs,
            reduced: t.build(),
            plate_loads,
        })
    }

    fn check_rigid_modes(mesh: &TetMesh, dofs: &[Dof]) -> Result<(), MechanicsError> {
        let modes = rigid_modes(mesh);
        let mut gram = Matrix6::<f64>::zeros();
        let mut master: BTreeMap<usize, usize> = BTreeMap::new();
        for (d, dof) in dofs.iter().enumerate() {
            let row = match *dof {
                Dof::Fixed(_) => Vector6::from(modes[d]),
                Dof::Free(r) => {
                    let m = *master.entry(r).or_insert(d);
                    if m == d {
                        continue;
                    }
                    Vector6::from(modes[d]) - Vector6::from(modes[m])
                }
            };
            gram += row * row.transpose();
        }
        let eig = SymmetricEigen::new(gram).eigenvalues;
        let top = eig.max().max(1.0);
        let free = eig.iter().filter(|&&l| l <= 1e-12 * top).count();
        if free > 0 {
            return Err(MechanicsError::InsufficientConstraints(free));
        }
        Ok(())
    }

    pub fn num_unknowns(&self) -> usize {
        self.reduced.nrows()
    }

    pub fn full_stiffness(&self) -> &CsrMatrix {
        &self.full
    }

    /// Solves for the full displacement vector. With `homogeneous` set, all
    /// prescribed values and plate forces are treated as zero. `guess` is a
    /// full-length displacement used to warm-start CG.
    pub fn solve(
        &self,
        loads: &[f64],
        guess: Option<&[f64]>,
        homogeneous: bool,
    ) -> Result<Vec<f64>, MechanicsError> {
        let ndof = self.dofs.len();
        check_len("loads", loads, ndof)?;
        let nred = self.reduced.nrows();
        let mut rhs = vec![0.0; nred];
        for a in 0..ndof {
            let Dof::Free(ra) = self.dofs[a] else {
                continue;
            };
            rhs[ra] += loads[a];
            if homogeneous {
                continue;
            }
            for (b, v) in self.full.row(a) {
                if let Dof::Fixed(value) = self.dofs[b] {
                    rhs[ra] -= v * value;
                }
            }
        }
        if !homogeneous {
            for &(r, f) in &self.plate_loads {
                rhs[r] += f;
            }
        }

        let x0 = match guess {
            Some(g) => {
                check_len("guess", g, ndof)?;
                let mut x0 = vec![0.0; nred];
                for (a, dof) in self.dofs.iter().enumerate() {
                    if let Dof::Free(r) = *dof {
                        x0[r] = g[a];
                    }
                }
                Some(x0)
            }
            None => None,
        };
        let out = cg_solve(&self.reduced, &rhs, x0.as_deref(), CgSettings::default())?;
        Ok(self
            .dofs
            .iter()
            .map(|dof| match *dof {
                Dof::Free(r) => out.x[r],
                Dof::Fixed(v) if !homogeneous => v,
                Dof::Fixed(_) => 0.0,
            })
            .collect())
    }
}

/// One-shot constrained solve.
pub fn solve_mechanics(
    mesh: &TetMesh,
    stiffness: CsrMatrix,
    loads: &[f64],
    bc: &MechBcSpec,
) -> Result<Vec<f64>, MechanicsError> {
    ConstrainedSystem::new(mesh, stiffness, bc)?.solve(loads, None, false)
}

/// Per-element volumetric strain `tr ε` and volumetric total stress
/// `σ_v0 + K_dr ε_v − b (p − p0)`.
pub fn element_strain_stress(
    mesh: &TetMesh,
    mat: &PoroelasticMaterial,
    u: &[f64],
    p_mech: &[f64],
    p0: &[f64],
    sigma_v0: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), MechanicsError> {
    let n = mesh.num_tets();
    check_len("displacement", u, 3 * mesh.num_nodes())?;
    check_len("p_mech", p_mech, n)?;
    check_len("p0", p0, n)?;
    check_len("sigma_v0", sigma_v0, n)?;
    let kdr = mat.drained_bulk_modulus();
    let b = mat.biot_coefficient;
    let mut eps = Vec::with_capacity(n);
    let mut sig = Vec::with_capacity(n);
    for (e, nodes) in mesh.tets().iter().enumerate() {
        let (_, grads) = element_geometry(mesh, e)?;
        let mut ev = 0.0;
        for a in 0..4 {
            for i in 0..3 {
                ev += grads[a][i] * u[3 * nodes[a] + i];
            }
        }
        eps.push(ev);
        sig.push(sigma_v0[e] + kdr * ev - b * (p_mech[e] - p0[e]));
    }
    Ok((eps, sig))
}
