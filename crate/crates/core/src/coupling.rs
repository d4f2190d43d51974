//! Fixed-stress staggered driver for the two-grid problem.
//!
//! Each time step iterates
//!
//! 1. flow solve with the volumetric stress frozen at the latest iterate,
//! 2. pressure transfer flow → mechanics,
//! 3. mechanics solve,
//! 4. volumetric strain and stress transfer mechanics → flow,
//!
//! until the volume-weighted RMS of the pressure increment drops below
//! `fs_tol · max(RMS(p), p_scale)`. The first iterate of every step uses the
//! converged stress of the previous step, so at least two sweeps are taken.

use nalgebra::Point3;
use thiserror::Error;

use crate::flow::{assemble_flow_step, solve_flow_step, FlowBcSpec, FlowError, FlowState};
use crate::geometry::{
    build_projection, pair_elements, GeometryError, ProjectionDiagnostics, ProjectionOperator,
    DEFAULT_CONTAINMENT_TOL,
};
use crate::material::{MaterialError, PoroelasticMaterial};
use crate::mechanics::{
    assemble_body_force, assemble_pressure_load, assemble_stiffness, assemble_traction_load,
    element_strain_stress, ConstrainedSystem, MechBcSpec, MechState, MechanicsError,
};
use crate::mesh::{build_fv_grid, FvGrid, MeshError, TetMesh};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Mechanics(#[from] MechanicsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error("fixed-stress iteration did not converge at step {step} after {iterations} iterations (last increment {increment:e})")]
    NotConverged {
        step: usize,
        iterations: usize,
        increment: f64,
    },
    #[error("probe `{name}` at {point:?} lies outside the flow mesh")]
    ProbeOutsideMesh { name: String, point: [f64; 3] },
    #[error("invalid coupling configuration: {0}")]
    InvalidConfig(String),
}

impl CouplingError {
    /// True for failures of the numerical method rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            CouplingError::NotConverged { .. }
                | CouplingError::Flow(FlowError::Solve(_))
                | CouplingError::Mechanics(MechanicsError::SolverDiverged(_))
        )
    }
}

/// Sequence of time-step sizes.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeSchedule {
    Uniform {
        dt: f64,
        n_steps: usize,
    },
    /// `dt_k = min(dt_first · ratio^k, dt_max)` for `k = 0..n_steps`.
    Geometric {
        dt_first: f64,
        dt_max: f64,
        ratio: f64,
        n_steps: usize,
    },
    Explicit(Vec<f64>),
}

impl TimeSchedule {
    pub fn steps(&self) -> Vec<f64> {
        match self {
            TimeSchedule::Uniform { dt, n_steps } => vec![*dt; *n_steps],
            TimeSchedule::Geometric {
                dt_first,
                dt_max,
                ratio,
                n_steps,
            } => {
                let mut dt = *dt_first;
                (0..*n_steps)
                    .map(|_| {
                        let out = dt.min(*dt_max);
                        dt *= ratio;
                        out
                    })
                    .collect()
            }
            TimeSchedule::Explicit(v) => v.clone(),
        }
    }

    pub fn n_steps(&self) -> usize {
        match self {
            TimeSchedule::Uniform { n_steps, .. } | TimeSchedule::Geometric { n_steps, .. } => {
                *n_steps
            }
            TimeSchedule::Explicit(v) => v.len(),
        }
    }

    /// Geometric ramp from `dt_first` capped at `dt_max`, with just enough
    /// steps to reach `t_end`.
    pub fn ramp_to(dt_first: f64, dt_max: f64, ratio: f64, t_end: f64) -> Self {
        let mut t = 0.0;
        let mut dt = dt_first;
        let mut n_steps = 0;
        while t < t_end * (1.0 - 1e-12) {
            t += dt.min(dt_max);
            dt *= ratio;
            n_steps += 1;
        }
        TimeSchedule::Geometric {
            dt_first,
            dt_max,
            ratio,
            n_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingConfig {
    pub schedule: TimeSchedule,
    pub fs_tol: f64,
    pub fs_maxiter: usize,
    /// Absolute pressure floor (Pa) in the relative increment test.
    pub p_scale: f64,
    /// Accept the last iterate instead of aborting when a step fails to converge.
    pub continue_on_nonconvergence: bool,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            schedule: TimeSchedule::Uniform {
                dt: 1.0,
                n_steps: 1,
            },
            fs_tol: 1e-6,
            fs_maxiter: 50,
            p_scale: 1.0,
            continue_on_nonconvergence: false,
        }
    }
}

impl CouplingConfig {
    pub fn validate(&self) -> Result<(), CouplingError> {
        if !(self.fs_tol > 0.0) {
            return Err(CouplingError::InvalidConfig("fs_tol must be > 0".into()));
        }
        if self.fs_maxiter < 1 {
            return Err(CouplingError::InvalidConfig(
                "fs_maxiter must be >= 1".into(),
            ));
        }
        if !(self.p_scale > 0.0) {
            return Err(CouplingError::InvalidConfig("p_scale must be > 0".into()));
        }
        if self.schedule.steps().iter().any(|&dt| !(dt > 0.0)) {
            return Err(CouplingError::InvalidConfig(
                "every time step must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Fields and iteration diagnostics after a time step (or the initial state).
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub time: f64,
    pub step: usize,
    pub flow: FlowState,
    pub mech: MechState,
    /// Fixed-stress sweeps performed in this step, including the one that
    /// confirmed convergence.
    pub iterations: usize,
    /// Relative pressure increment of every sweep.
    pub increments: Vec<f64>,
    pub converged: bool,
}

impl CoupledState {
    pub fn increment_norm(&self) -> f64 {
        self.increments.last().copied().unwrap_or(0.0)
    }
}

/// Named point at which flow pressure is recorded every step.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub name: String,
    pub point: Point3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSeries {
    pub name: String,
    pub point: Point3<f64>,
    pub flow_elem: usize,
    pub times: Vec<f64>,
    pub pressure: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub states: Vec<CoupledState>,
    pub probes: Vec<ProbeSeries>,
}

/// Everything that stays fixed over a run: meshes, discretizations,
/// boundary conditions and transfer operators.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub flow_mesh: TetMesh,
    pub mech_mesh: TetMesh,
    pub grid: FvGrid,
    pub material: PoroelasticMaterial,
    pub flow_bc: FlowBcSpec,
    pub mech_bc: MechBcSpec,
    pub flow_to_mech: ProjectionOperator,
    pub mech_to_flow: ProjectionOperator,
    pub diagnostics: Option<ProjectionDiagnostics>,
    mech_system: ConstrainedSystem,
    /// Body force plus boundary tractions.
    static_loads: Vec<f64>,
    body_loads: Vec<f64>,
    /// Displacement of the initial equilibrium (body force only).
    u_initial: Vec<f64>,
}

fn rms(volumes: &[f64], v: &[f64]) -> f64 {
    let total: f64 = volumes.iter().sum();
    let s: f64 = volumes.iter().zip(v).map(|(w, x)| w * x * x).sum();
    (s / total).sqrt()
}

impl Simulation {
    /// Builds operators with vertex-containment pairing at `containment_tol`,
    /// or identity operators when both meshes have the same elements.
    pub fn new(
        flow_mesh: TetMesh,
        mech_mesh: TetMesh,
        material: PoroelasticMaterial,
        flow_bc: FlowBcSpec,
        mech_bc: MechBcSpec,
        containment_tol: f64,
    ) -> Result<Self, CouplingError> {
        let pairs = pair_elements(&flow_mesh, &mech_mesh, containment_tol)?;
        let (f2m, m2f) = build_projection(&pairs, flow_mesh.num_tets(), mech_mesh.num_tets());
        let diag = ProjectionDiagnostics::new(&pairs, &f2m, &m2f);
        let mut sim =
            Self::with_operators(flow_mesh, mech_mesh, material, flow_bc, mech_bc, f2m, m2f)?;
        sim.diagnostics = Some(diag);
        Ok(sim)
    }

    /// Same mesh for both physics with identity transfer operators.
    pub fn single_grid(
        mesh: TetMesh,
        material: PoroelasticMaterial,
        flow_bc: FlowBcSpec,
        mech_bc: MechBcSpec,
    ) -> Result<Self, CouplingError> {
        let n = mesh.num_tets();
        Self::with_operators(
            mesh.clone(),
            mesh,
            material,
            flow_bc,
            mech_bc,
            ProjectionOperator::identity(n),
            ProjectionOperator::identity(n),
        )
    }

    pub fn with_operators(
        flow_mesh: TetMesh,
        mech_mesh: TetMesh,
        material: PoroelasticMaterial,
        flow_bc: FlowBcSpec,
        mech_bc: MechBcSpec,
        flow_to_mech: ProjectionOperator,
        mech_to_flow: ProjectionOperator,
    ) -> Result<Self, CouplingError> {
        material.validate()?;
        if flow_to_mech.n_source() != flow_mesh.num_tets()
            || flow_to_mech.n_target() != mech_mesh.num_tets()
            || mech_to_flow.n_source() != mech_mesh.num_tets()
            || mech_to_flow.n_target() != flow_mesh.num_tets()
        {
            return Err(CouplingError::InvalidConfig(
                "transfer operator sizes do not match the meshes".into(),
            ));
        }
        let grid = build_fv_grid(&flow_mesh, material.permeability)?;
        flow_bc.validate(&grid)?;
        mech_bc.validate(&mech_mesh)?;
        let stiffness = assemble_stiffness(&mech_mesh, &material)?;
        let mech_system = ConstrainedSystem::new(&mech_mesh, stiffness, &mech_bc)?;
        let body_loads = assemble_body_force(&mech_mesh, &material);
        let traction = assemble_traction_load(&mech_mesh, &mech_bc);
        let static_loads = body_loads
            .iter()
            .zip(&traction)
            .map(|(a, b)| a + b)
            .collect();
        let u_initial = mech_system.solve(&body_loads, None, true)?;
        Ok(Self {
            flow_mesh,
            mech_mesh,
            grid,
            material,
            flow_bc,
            mech_bc,
            flow_to_mech,
            mech_to_flow,
            diagnostics: None,
            mech_system,
            static_loads,
            body_loads,
            u_initial,
        })
    }

    pub fn body_loads(&self) -> &[f64] {
        &self.body_loads
    }

    /// Initial equilibrium at uniform reference pressure `p0`: body force
    /// only, boundary loads off. Establishes σ_v0 on both grids.
    pub fn initial_state(&self, p0: f64) -> Result<CoupledState, CouplingError> {
        let nf = self.flow_mesh.num_tets();
        let nm = self.mech_mesh.num_tets();
        let p0_flow = vec![p0; nf];
        let p0_mech = self.flow_to_mech.apply(&p0_flow, &vec![p0; nm])?;
        let zeros_m = vec![0.0; nm];
        let (_, sigma_v0_mech) = element_strain_stress(
            &self.mech_mesh,
            &self.material,
            &self.u_initial,
            &p0_mech,
            &p0_mech,
            &zeros_m,
        )?;
        let sigma_v0_flow = self.mech_to_flow.apply(&sigma_v0_mech, &vec![0.0; nf])?;
        Ok(CoupledState {
            time: 0.0,
            step: 0,
            flow: FlowState::at_reference(p0_flow, sigma_v0_flow),
            mech: MechState {
                u: vec![0.0; 3 * self.mech_mesh.num_nodes()],
                eps_v: zeros_m,
                sigma_v: sigma_v0_mech.clone(),
                p_mech: p0_mech.clone(),
                p0: p0_mech,
                sigma_v0: sigma_v0_mech,
            },
            iterations: 0,
            increments: Vec::new(),
            converged: true,
        })
    }

    /// One backward-Euler step of size `dt` iterated to fixed-stress
    /// convergence.
    pub fn fixed_stress_step(
        &self,
        prev: &CoupledState,
        dt: f64,
        cfg: &CouplingConfig,
    ) -> Result<CoupledState, CouplingError> {
        let vols = &self.grid.volumes;
        let mut sigma_iter = prev.flow.sigma_v.clone();
        let mut eps_flow = prev.flow.eps_v.clone();
        let mut p_last = prev.flow.p.clone();
        let mut mech = prev.mech.clone();
        let mut u_total: Vec<f64> = prev
            .mech
            .u
            .iter()
            .zip(&self.u_initial)
            .map(|(a, b)| a + b)
            .collect();
        let mut increments = Vec::new();

        for k in 1..=cfg.fs_maxiter {
            let system = assemble_flow_step(
                &self.grid,
                &self.material,
                &prev.flow,
                &sigma_iter,
                dt,
                &self.flow_bc,
            )?;
            let p = solve_flow_step(&system)?;

            mech.p_mech = self.flow_to_mech.apply(&p, &mech.p_mech)?;
            let mut loads =
                assemble_pressure_load(&self.mech_mesh, &self.material, &mech.p_mech, &mech.p0)?;
            for (l, s) in loads.iter_mut().zip(&self.static_loads) {
                *l += s;
            }
            u_total = self.mech_system.solve(&loads, Some(&u_total), false)?;
            mech.u = u_total
                .iter()
                .zip(&self.u_initial)
                .map(|(a, b)| a - b)
                .collect();
            let (eps_m, sig_m) = element_strain_stress(
                &self.mech_mesh,
                &self.material,
                &mech.u,
                &mech.p_mech,
                &mech.p0,
                &mech.sigma_v0,
            )?;
            eps_flow = self.mech_to_flow.apply(&eps_m, &eps_flow)?;
            sigma_iter = self.mech_to_flow.apply(&sig_m, &sigma_iter)?;
            mech.eps_v = eps_m;
            mech.sigma_v = sig_m;

            let diff: Vec<f64> = p.iter().zip(&p_last).map(|(a, b)| a - b).collect();
            let inc = rms(vols, &diff) / rms(vols, &p).max(cfg.p_scale);
            increments.push(inc);
            p_last = p;

            // The first sweep only sees the stress of the previous step, so a
            // small increment there says nothing about the new load.
            let converged = k >= 2 && inc <= cfg.fs_tol;
            if converged || k == cfg.fs_maxiter {
                if !converged && !cfg.continue_on_nonconvergence {
                    return Err(CouplingError::NotConverged {
                        step: prev.step + 1,
                        iterations: k,
                        increment: inc,
                    });
                }
                return Ok(CoupledState {
                    time: prev.time + dt,
                    step: prev.step + 1,
                    flow: FlowState {
                        p: p_last,
                        eps_v: eps_flow,
                        sigma_v: sigma_iter,
                        p0: prev.flow.p0.clone(),
                        sigma_v0: prev.flow.sigma_v0.clone(),
                    },
                    mech,
                    iterations: k,
                    increments,
                    converged,
                });
            }
        }
        unreachable!("fs_maxiter >= 1 is validated")
    }

    /// Locates each probe in the flow mesh.
    pub fn locate_probes(&self, probes: &[Probe]) -> Result<Vec<usize>, CouplingError> {
        probes
            .iter()
            .map(|pr| {
                self.flow_mesh
                    .locate(&pr.point, DEFAULT_CONTAINMENT_TOL)
                    .ok_or_else(|| CouplingError::ProbeOutsideMesh {
                        name: pr.name.clone(),
                        point: [pr.point.x, pr.point.y, pr.point.z],
                    })
            })
            .collect()
    }

    /// Initial equilibrium followed by every step of the schedule. `observer`
    /// sees each state (initial one included) as soon as it is available.
    pub fn run_with<F>(
        &self,
        cfg: &CouplingConfig,
        p0: f64,
        probes: &[Probe],
        mut observer: F,
    ) -> Result<RunOutput, CouplingError>
    where
        F: FnMut(&CoupledState) -> Result<(), CouplingError>,
    {
        cfg.validate()?;
        let elems = self.locate_probes(probes)?;
        let mut series: Vec<ProbeSeries> = probes
            .iter()
            .zip(&elems)
            .map(|(pr, &e)| ProbeSeries {
                name: pr.name.clone(),
                point: pr.point,
                flow_elem: e,
                times: Vec::new(),
                pressure: Vec::new(),
            })
            .collect();
        let record = |series: &mut [ProbeSeries], s: &CoupledState| {
            for ps in series.iter_mut() {
                ps.times.push(s.time);
                ps.pressure.push(s.flow.p[ps.flow_elem]);
            }
        };

        let mut state = self.initial_state(p0)?;
        observer(&state)?;
        record(&mut series, &state);
        let mut states = vec![state.clone()];
        for dt in cfg.schedule.steps() {
            state = self.fixed_stress_step(&state, dt, cfg)?;
            observer(&state)?;
            record(&mut series, &state);
            states.push(state.clone());
        }
        Ok(RunOutput {
            states,
            probes: series,
        })
    }

    pub fn run(
        &self,
        cfg: &CouplingConfig,
        p0: f64,
        probes: &[Probe],
    ) -> Result<RunOutput, CouplingError> {
        self.run_with(cfg, p0, probes, |_| Ok(()))
    }
}
