//! Cell-centered finite-volume pressure equation in fixed-stress form.
//!
//! Per cell `i` with bulk volume `V_i`, backward Euler gives
//!
//! ```text
//! V_i (b²/K_dr + 1/M) (p_i − p_i^n)/Δt + V_i (b/K_dr) (σ_v,i − σ_v,i^n)/Δt
//!     + Σ_j (T_ij/μ) (Φ_i − Φ_j) = V_i f_i,        Φ = p − ρ_f g·x
//! ```
//!
//! with `σ_v` frozen at the latest mechanics iterate. Dirichlet faces enter
//! through their half transmissibility against a ghost value, so the matrix
//! stays symmetric.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::material::PoroelasticMaterial;
use crate::mesh::FvGrid;
use crate::sparse::{cg_solve, CgSettings, CsrMatrix, SolveError, TripletBuilder};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("flow system is singular: no fixed-pressure boundary and zero storage")]
    SingularSystem,
    #[error("{what} has length {got}, expected {expected}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("flow boundary tag `{0}` does not exist in the mesh")]
    UnknownTag(String),
    #[error("flow solve failed: {0}")]
    Solve(#[from] SolveError),
}

/// Per-tag flow boundary condition. Untagged and unlisted faces are no-flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowBoundary {
    NoFlow,
    FixedPressure(f64),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowBcSpec {
    pub tags: BTreeMap<String, FlowBoundary>,
    /// Volumetric source rate per unit bulk volume (1/s), per cell.
    pub source: Option<Vec<f64>>,
}

impl FlowBcSpec {
    pub fn with(mut self, tag: &str, bc: FlowBoundary) -> Self {
        self.tags.insert(tag.to_string(), bc);
        self
    }

    pub fn validate(&self, grid: &FvGrid) -> Result<(), FlowError> {
        for tag in self.tags.keys() {
            if !grid.has_tag(tag) {
                return Err(FlowError::UnknownTag(tag.clone()));
            }
        }
        if let Some(src) = &self.source {
            check_len("source", src, grid.num_cells())?;
        }
        Ok(())
    }

    fn lookup(&self, tag: Option<&str>) -> FlowBoundary {
        tag.and_then(|t| self.tags.get(t))
            .copied()
            .unwrap_or(FlowBoundary::NoFlow)
    }
}

/// Flow-grid fields at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub p: Vec<f64>,
    /// Volumetric strain transferred from the mechanics grid.
    pub eps_v: Vec<f64>,
    /// Volumetric total stress transferred from the mechanics grid.
    pub sigma_v: Vec<f64>,
    pub p0: Vec<f64>,
    pub sigma_v0: Vec<f64>,
}

impl FlowState {
    /// Reference state: `p = p0` everywhere, no strain, `σ_v = σ_v0`.
    pub fn at_reference(p0: Vec<f64>, sigma_v0: Vec<f64>) -> Self {
        let n = p0.len();
        Self {
            p: p0.clone(),
            eps_v: vec![0.0; n],
            sigma_v: sigma_v0.clone(),
            p0,
            sigma_v0,
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

fn check_len(what: &'static str, v: &[f64], expected: usize) -> Result<(), FlowError> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(FlowError::SizeMismatch {
            what,
            expected,
            got: v.len(),
        })
    }
}

/// Assembled SPD pressure system `A p = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Initial guess for the iterative solve (the previous time level).
    pub guess: Vec<f64>,
}

fn gravity_head_density(mat: &PoroelasticMaterial, dp_i: f64, dp_j: f64) -> f64 {
    0.5 * (mat.fluid_density_at(dp_i) + mat.fluid_density_at(dp_j))
}

pub fn assemble_flow_step(
    grid: &FvGrid,
    mat: &PoroelasticMaterial,
    state: &FlowState,
    sigma_v_new: &[f64],
    dt: f64,
    bc: &FlowBcSpec,
) -> Result<FlowSystem, FlowError> {
    if !(dt > 0.0) {
        return Err(FlowError::NonPositiveDt(dt));
    }
    let n = grid.num_cells();
    check_len("pressure", &state.p, n)?;
    check_len("sigma_v", &state.sigma_v, n)?;
    check_len("p0", &state.p0, n)?;
    check_len("sigma_v_new", sigma_v_new, n)?;
    if let Some(src) = &bc.source {
        check_len("source", src, n)?;
    }

    let storage = mat.fixed_stress_storage();
    let coupling = mat.biot_coefficient / mat.drained_bulk_modulus();
    let mobility = mat.mobility();
    let has_dirichlet = grid
        .boundary
        .iter()
        .any(|b| matches!(bc.lookup(b.tag.as_deref()), FlowBoundary::FixedPressure(_)));
    if !(storage > 0.0) && !has_dirichlet {
        return Err(FlowError::SingularSystem);
    }
    let gravity = mat.gravity;
    let use_gravity = gravity.norm_squared() > 0.0;

    let mut t = TripletBuilder::with_capacity(n, n + 4 * grid.connections.len());
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let acc = grid.volumes[i] * storage / dt;
        t.add(i, i, acc);
        rhs[i] = acc * state.p[i]
            - grid.volumes[i] * coupling * (sigma_v_new[i] - state.sigma_v[i]) / dt;
        if let Some(src) = &bc.source {
            rhs[i] += grid.volumes[i] * src[i];
        }
    }
    for c in &grid.connections {
        let (i, j) = (c.elem_i, c.elem_j);
        let w = c.trans * mobility;
        t.add(i, i, w);
        t.add(j, j, w);
        t.add(i, j, -w);
        t.add(j, i, -w);
        if use_gravity {
            let rho = gravity_head_density(mat, state.p[i] - state.p0[i], state.p[j] - state.p0[j]);
            let g = w * rho * gravity.dot(&(grid.centroids[i] - grid.centroids[j]));
            rhs[i] += g;
            rhs[j] -= g;
        }
    }
    for b in &grid.boundary {
        if let FlowBoundary::FixedPressure(pd) = bc.lookup(b.tag.as_deref()) {
            let i = b.elem;
            let w = b.trans * mobility;
            t.add(i, i, w);
            rhs[i] += w * pd;
            if use_gravity {
                let rho = mat.fluid_density_at(state.p[i] - state.p0[i]);
                rhs[i] += w * rho * gravity.dot(&(grid.centroids[i] - b.face_centroid));
            }
        }
    }

    Ok(FlowSystem {
        matrix: t.build(),
        rhs,
        guess: state.p.clone(),
    })
}

/// Jacobi-preconditioned CG to a relative residual of 1e-10, at most `10·N`
/// iterations.
pub fn solve_flow_step(system: &FlowSystem) -> Result<Vec<f64>, FlowError> {
    let out = cg_solve(
        &system.matrix,
        &system.rhs,
        Some(&system.guess),
        CgSettings::default(),
    )?;
    Ok(out.x)
}

/// Darcy volume fluxes `q_ij = (T_ij/μ)(Φ_i − Φ_j)` on interior connections,
/// positive from `elem_i` to `elem_j`.
pub fn darcy_fluxes(
    grid: &FvGrid,
    mat: &PoroelasticMaterial,
    p: &[f64],
    p0: &[f64],
) -> Result<Vec<f64>, FlowError> {
    let n = grid.num_cells();
    check_len("pressure", p, n)?;
    check_len("p0", p0, n)?;
    let mobility = mat.mobility();
    let use_gravity = mat.gravity.norm_squared() > 0.0;
    Ok(grid
        .connections
        .iter()
        .map(|c| {
            let (i, j) = (c.elem_i, c.elem_j);
            let mut dphi = p[i] - p[j];
            if use_gravity {
                let rho = gravity_head_density(mat, p[i] - p0[i], p[j] - p0[j]);
                dphi -= rho * mat.gravity.dot(&(grid.centroids[i] - grid.centroids[j]));
            }
            c.trans * mobility * dphi
        })
        .collect())
}

/// Outflow through each boundary connection (zero on no-flow faces).
pub fn boundary_fluxes(
    grid: &FvGrid,
    mat: &PoroelasticMaterial,
    p: &[f64],
    p0: &[f64],
    bc: &FlowBcSpec,
) -> Result<Vec<f64>, FlowError> {
    let n = grid.num_cells();
    check_len("pressure", p, n)?;
    check_len("p0", p0, n)?;
    let mobility = mat.mobility();
    let use_gravity = mat.gravity.norm_squared() > 0.0;
    Ok(grid
        .boundary
        .iter()
        .map(|b| match bc.lookup(b.tag.as_deref()) {
            FlowBoundary::NoFlow => 0.0,
            FlowBoundary::FixedPressure(pd) => {
                let i = b.elem;
                let mut dphi = p[i] - pd;
                if use_gravity {
                    let rho = mat.fluid_density_at(p[i] - p0[i]);
                    dphi -= rho * mat.gravity.dot(&(grid.centroids[i] - b.face_centroid));
                }
                b.trans * mobility * dphi
            }
        })
        .collect())
}

/// Fluid content variation ζ = b ε_v + (p − p0)/M and porosity φ from
/// (ρ_f/ρ_f0) φ − φ0 = (b/K_dr)(σ_v − σ_v0) + (b²/K_dr + 1/M)(p − p0).
pub fn fluid_content_and_porosity(
    mat: &PoroelasticMaterial,
    state: &FlowState,
    p: &[f64],
    sigma_v: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), FlowError> {
    let n = state.len();
    check_len("pressure", p, n)?;
    check_len("sigma_v", sigma_v, n)?;
    let b = mat.biot_coefficient;
    let kdr = mat.drained_bulk_modulus();
    let inv_m = 1.0 / mat.biot_modulus();
    let storage = mat.fixed_stress_storage();
    let mut zeta = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    for i in 0..n {
        let dp = p[i] - state.p0[i];
        zeta.push(b * state.eps_v[i] + inv_m * dp);
        let rhs = (b / kdr) * (sigma_v[i] - state.sigma_v0[i]) + storage * dp;
        let density_ratio = 1.0 + mat.fluid_compressibility * dp;
        phi.push((mat.porosity + rhs) / density_ratio);
    }
    Ok((zeta, phi))
}

/// Steady pressure with `p = 1` on faces tagged `inlet`, `p = 0` on faces
/// tagged `outlet` and no flow elsewhere, using the geometric
/// transmissibilities as they are (unit mobility). Returns the cell
/// pressures and the total flux leaving through `outlet`.
///
/// On a box this measures how well two-point fluxes reproduce the exact
/// column flux `T·A/L` of the underlying mesh.
pub fn steady_unit_drop(
    grid: &FvGrid,
    inlet: &str,
    outlet: &str,
) -> Result<(Vec<f64>, f64), FlowError> {
    for tag in [inlet, outlet] {
        if !grid.has_tag(tag) {
            return Err(FlowError::UnknownTag(tag.to_string()));
        }
    }
    let n = grid.num_cells();
    let mut t = TripletBuilder::with_capacity(n, n + 4 * grid.connections.len());
    let mut rhs = vec![0.0; n];
    for c in &grid.connections {
        t.add(c.elem_i, c.elem_i, c.trans);
        t.add(c.elem_j, c.elem_j, c.trans);
        t.add(c.elem_i, c.elem_j, -c.trans);
        t.add(c.elem_j, c.elem_i, -c.trans);
    }
    for b in &grid.boundary {
        match b.tag.as_deref() {
            Some(tag) if tag == inlet => {
                t.add(b.elem, b.elem, b.trans);
                rhs[b.elem] += b.trans;
            }
            Some(tag) if tag == outlet => t.add(b.elem, b.elem, b.trans),
            _ => {}
        }
    }
    let p = cg_solve(&t.build(), &rhs, None, CgSettings::default())?.x;
    let outflow = grid
        .boundary
        .iter()
        .filter(|b| b.tag.as_deref() == Some(outlet))
        .map(|b| b.trans * p[b.elem])
        .sum();
    Ok((p, outflow))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::BiotModulus;
    use crate::mesh::{box_tet_mesh, build_fv_grid, BoundaryConnection, Connection};
    use nalgebra::{Point3, Vector3};

    fn two_cells() -> FvGrid {
        FvGrid {
            centroids: vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)],
            volumes: vec![1.0, 1.0],
            connections: vec![Connection {
                elem_i: 0,
                elem_j: 1,
                trans: 1.0,
                area: 1.0,
                normal: Vector3::x(),
                face_centroid: Point3::new(0.5, 0.0, 0.0),
            }],
            boundary: vec![],
        }
    }

    // b = 0 and M = 1 make V (1/M + b²/K)/Δt = 1 with Δt = 1.
    fn unit_material() -> PoroelasticMaterial {
        PoroelasticMaterial {
            biot_coefficient: 0.0,
            biot_modulus: BiotModulus::Direct(1.0),
            viscosity: 1.0,
            ..Default::default()
        }
    }

    #[test]
    fn two_cell_hand_solution() {
        let grid = two_cells();
        let state = FlowState::at_reference(vec![0.0; 2], vec![0.0; 2]);
        let state = FlowState {
            p: vec![1.0, 0.0],
            ..state
        };
        let sys = assemble_flow_step(
            &grid,
            &unit_material(),
            &state,
            &[0.0, 0.0],
            1.0,
            &FlowBcSpec::default(),
        )
        .unwrap();
        assert_eq!(
            sys.matrix.to_dense(),
            vec![vec![2.0, -1.0], vec![-1.0, 2.0]]
        );
        let p = solve_flow_step(&sys).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-10);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn decoupled_uniform_state_is_steady() {
        let grid = build_fv_grid(&box_tet_mesh(2, 2, 2, 1.0, 1.0, 1.0), 1e-12).unwrap();
        let n = grid.num_cells();
        let state = FlowState::at_reference(vec![3.0e5; n], vec![0.0; n]);
        let sys = assemble_flow_step(
            &grid,
            &unit_material(),
            &state,
            &vec![0.0; n],
            10.0,
            &FlowBcSpec::default(),
        )
        .unwrap();
        assert_eq!(solve_flow_step(&sys).unwrap(), vec![3.0e5; n]);
    }

    #[test]
    fn skempton_loading_response_single_cell() {
        let grid = FvGrid {
            centroids: vec![Point3::origin()],
            volumes: vec![2.0],
            connections: vec![],
            boundary: vec![BoundaryConnection {
                elem: 0,
                tag: Some("side".into()),
                trans: 1.0,
                area: 1.0,
                face_centroid: Point3::new(1.0, 0.0, 0.0),
            }],
        };
        let mat = PoroelasticMaterial {
            youngs_modulus: 1.5,
            poisson_ratio: 0.25,
            biot_coefficient: 0.5,
            biot_modulus: BiotModulus::Direct(2.0),
            ..Default::default()
        };
        let state = FlowState::at_reference(vec![0.0], vec![0.0]);
        let dsigma = -3.0;
        let sys = assemble_flow_step(&grid, &mat, &state, &[dsigma], 0.1, &FlowBcSpec::default())
            .unwrap();
        let p = solve_flow_step(&sys).unwrap();
        let expect = -(0.5 / 1.0) * dsigma / (0.25 + 0.5);
        assert!((p[0] - expect).abs() < 1e-12, "{} vs {}", p[0], expect);
    }

    #[test]
    fn error_paths() {
        let grid = two_cells();
        let state = FlowState::at_reference(vec![0.0; 2], vec![0.0; 2]);
        let mat = unit_material();
        assert!(matches!(
            assemble_flow_step(
                &grid,
                &mat,
                &state,
                &[0.0, 0.0],
                0.0,
                &FlowBcSpec::default()
            ),
            Err(FlowError::NonPositiveDt(_))
        ));
        assert!(matches!(
            assemble_flow_step(&grid, &mat, &state, &[0.0], 1.0, &FlowBcSpec::default()),
            Err(FlowError::SizeMismatch { .. })
        ));
        let bc = FlowBcSpec::default().with("nowhere", FlowBoundary::NoFlow);
        assert!(matches!(bc.validate(&grid), Err(FlowError::UnknownTag(_))));
    }

    #[test]
    fn fluxes_are_antisymmetric_and_vanish_for_uniform_pressure() {
        let grid = two_cells();
        let mat = unit_material();
        assert_eq!(
            darcy_fluxes(&grid, &mat, &[4.0, 4.0], &[0.0, 0.0]).unwrap(),
            vec![0.0]
        );
        let q = darcy_fluxes(&grid, &mat, &[4.0, 1.0], &[0.0, 0.0]).unwrap()[0];
        let mut flipped = grid.clone();
        let c = &mut flipped.connections[0];
        std::mem::swap(&mut c.elem_i, &mut c.elem_j);
        c.normal = -c.normal;
        let q_rev = darcy_fluxes(&flipped, &mat, &[4.0, 1.0], &[0.0, 0.0]).unwrap()[0];
        assert_eq!(q, 3.0);
        assert_eq!(q + q_rev, 0.0);
    }

    #[test]
    fn porosity_examples() {
        let mat = PoroelasticMaterial {
            youngs_modulus: 1.5,
            poisson_ratio: 0.25,
            biot_coefficient: 0.5,
            biot_modulus: BiotModulus::Direct(2.0),
            porosity: 0.3,
            fluid_compressibility: 0.0,
            ..Default::default()
        };
        let state = FlowState::at_reference(vec![1.0], vec![2.0]);
        let (zeta, phi) = fluid_content_and_porosity(&mat, &state, &[1.0], &[2.0]).unwrap();
        assert_eq!(zeta, vec![0.0]);
        assert_eq!(phi, vec![0.3]);
        let (_, phi) = fluid_content_and_porosity(&mat, &state, &[2.0], &[3.0]).unwrap();
        assert!((phi[0] - 0.3 - 1.25).abs() < 1e-15);

        let decoupled = PoroelasticMaterial {
            biot_coefficient: 0.0,
            ..mat
        };
        let strained = FlowState {
            eps_v: vec![0.7],
            ..state
        };
        let (zeta, _) = fluid_content_and_porosity(&decoupled, &strained, &[5.0], &[2.0]).unwrap();
        assert!((zeta[0] - 4.0 / 2.0).abs() < 1e-15);
    }
}
