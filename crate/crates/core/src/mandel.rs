//! Mandel's problem: analytic pore-pressure series and the two-grid
//! benchmark driver.
//!
//! Geometry of the benchmark: the quarter domain `[0, a_x]×[0, b_y]×[0, t_z]`
//! is squeezed in −x by a rigid impermeable plate on `x = a_x`. Rollers hold
//! `x = 0`, `y = 0` and both z-faces (plane strain). The only drained face is
//! `y = b_y`, so the analytic solution is evaluated with drainage coordinate
//! `ξ = y` and half-width `a = b_y`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use nalgebra::Point3;
use thiserror::Error;

use crate::coupling::{CouplingConfig, CouplingError, Probe, RunOutput, Simulation, TimeSchedule};
use crate::flow::{steady_unit_drop, FlowBcSpec, FlowBoundary};
use crate::geometry::DEFAULT_CONTAINMENT_TOL;
use crate::material::PoroelasticMaterial;
use crate::mechanics::{Axis, MechBcSpec, MechBoundary};
use crate::mesh::{box_tet_mesh, build_fv_grid, MeshError, TetMesh};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MandelError {
    #[error("root bracket {n} does not change sign")]
    BracketFailure { n: usize },
    #[error("invalid Mandel parameters: {0}")]
    InvalidParameters(String),
}

/// Skempton coefficient B, undrained Poisson ratio ν_u and consolidation
/// coefficient c of a material.
pub fn derive_constants(mat: &PoroelasticMaterial) -> (f64, f64, f64) {
    let b = mat.biot_coefficient;
    let m = mat.biot_modulus();
    let k = mat.drained_bulk_modulus();
    let nu = mat.poisson_ratio;
    let skempton = b * m / (k + b * b * m);
    let bb = b * skempton * (1.0 - 2.0 * nu);
    // ν_u − ν written so that b = 0 gives ν exactly.
    let nu_u = nu + bb * (1.0 + nu) / (3.0 - bb);
    let kc = mat.constrained_modulus();
    let c = mat.permeability / mat.viscosity * m * kc / (kc + b * b * m);
    (skempton, nu_u, c)
}

/// Slope of the characteristic equation `tan α = coef·α`.
pub fn root_coefficient(nu: f64, nu_u: f64) -> f64 {
    (1.0 - nu) / (nu_u - nu)
}

/// `sin α − coef·α·cos α`: the characteristic residual multiplied through
/// by `cos α`, finite across the poles of `tan`.
pub fn characteristic_residual(alpha: f64, coef: f64) -> f64 {
    alpha.sin() - coef * alpha * alpha.cos()
}

/// Bracket of the `n`-th root (1-based).
pub fn root_bracket(n: usize) -> (f64, f64) {
    if n <= 1 {
        (0.0, FRAC_PI_2)
    } else {
        let lo = (n - 1) as f64 * PI;
        (lo, lo + FRAC_PI_2)
    }
}

/// First `n_terms` positive roots of `tan α = ((1−ν)/(ν_u−ν))·α`, by
/// bisection to machine precision inside each bracket.
pub fn mandel_roots(nu: f64, nu_u: f64, n_terms: usize) -> Result<Vec<f64>, MandelError> {
    if !(nu < nu_u && nu_u <= 0.5) {
        return Err(MandelError::InvalidParameters(format!(
            "need nu < nu_u <= 0.5, got nu = {nu}, nu_u = {nu_u}"
        )));
    }
    let coef = root_coefficient(nu, nu_u);
    (1..=n_terms)
        .map(|n| {
            let (mut lo, mut hi) = root_bracket(n);
            // The n = 1 residual vanishes at 0 itself; start just inside.
            if n == 1 {
                lo = f64::MIN_POSITIVE.sqrt();
            }
            let mut flo = characteristic_residual(lo, coef);
            let fhi = characteristic_residual(hi, coef);
            if flo.signum() == fhi.signum() {
                return Err(MandelError::BracketFailure { n });
            }
            loop {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = characteristic_residual(mid, coef);
                if fm == 0.0 {
                    return Ok(mid);
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            let pick = if characteristic_residual(lo, coef).abs()
                <= characteristic_residual(hi, coef).abs()
            {
                lo
            } else {
                hi
            };
            Ok(pick)
        })
        .collect()
}

/// Constants of one Mandel configuration plus the series roots.
#[derive(Debug, Clone, PartialEq)]
pub struct MandelParams {
    /// Drainage half-width (m).
    pub a: f64,
    /// Plate force per unit out-of-plane thickness (N/m).
    pub force: f64,
    pub skempton: f64,
    pub nu: f64,
    pub nu_u: f64,
    /// Consolidation coefficient (m²/s).
    pub c: f64,
    pub roots: Vec<f64>,
}

impl MandelParams {
    pub fn new(
        mat: &PoroelasticMaterial,
        a: f64,
        force: f64,
        n_terms: usize,
    ) -> Result<Self, MandelError> {
        let (skempton, nu_u, c) = derive_constants(mat);
        let nu = mat.poisson_ratio;
        if !(skempton > 0.0 && skempton <= 1.0) {
            return Err(MandelError::InvalidParameters(format!(
                "Skempton coefficient {skempton} outside (0, 1]"
            )));
        }
        if !(c > 0.0 && a > 0.0) {
            return Err(MandelError::InvalidParameters(
                "c and a must be positive".into(),
            ));
        }
        let roots = mandel_roots(nu, nu_u, n_terms)?;
        Ok(Self {
            a,
            force,
            skempton,
            nu,
            nu_u,
            c,
            roots,
        })
    }

    pub fn n_terms(&self) -> usize {
        self.roots.len()
    }

    /// Mean plate stress F/a.
    pub fn mean_stress(&self) -> f64 {
        self.force / self.a
    }

    /// Uniform pressure right after loading, B(1+ν_u)σ0/3.
    pub fn undrained_pressure(&self) -> f64 {
        self.skempton * (1.0 + self.nu_u) * self.mean_stress() / 3.0
    }

    /// Time for a given dimensionless time c·t/a².
    pub fn time_at(&self, dimensionless: f64) -> f64 {
        dimensionless * self.a * self.a / self.c
    }

    pub fn pressure(&self, xi: f64, t: f64) -> f64 {
        mandel_pressure(self, xi, t)
    }
}

/// Truncated series for p(ξ, t).
pub fn mandel_pressure(params: &MandelParams, xi: f64, t: f64) -> f64 {
    let a = params.a;
    let amp = 2.0 * params.force * params.skempton * (1.0 + params.nu_u) / (3.0 * a);
    let tau = params.c * t / (a * a);
    let r = xi / a;
    let sum: f64 = params
        .roots
        .iter()
        .map(|&al| {
            let (s, c) = al.sin_cos();
            s / (al - s * c) * ((al * r).cos() - c) * (-al * al * tau).exp()
        })
        .sum();
    amp * sum
}

/// Relative L2-in-time mismatch `‖num − reference‖ / ‖reference‖` with
/// trapezoidal quadrature on the (possibly non-uniform) sample times.
pub fn rel_l2_in_time(times: &[f64], num: &[f64], reference: &[f64]) -> f64 {
    let n = times.len().min(num.len()).min(reference.len());
    let mut e2 = 0.0;
    let mut r2 = 0.0;
    for i in 1..n {
        let h = times[i] - times[i - 1];
        let d0 = num[i - 1] - reference[i - 1];
        let d1 = num[i] - reference[i];
        e2 += 0.5 * h * (d0 * d0 + d1 * d1);
        r2 += 0.5 * h * (reference[i - 1].powi(2) + reference[i].powi(2));
    }
    (e2 / r2).sqrt()
}

/// Steady flux along y through a box-shaped mesh under a unit pressure drop,
/// relative to the exact `A/L`. One for a flux-consistent mesh.
pub fn drainage_flux_ratio(mesh: &TetMesh) -> Result<f64, MeshError> {
    let grid = build_fv_grid(mesh, 1.0)?;
    let (lo, hi) = mesh_bounds(mesh);
    let (_, outflow) = steady_unit_drop(&grid, "ymin", "ymax")
        .map_err(|e| MeshError::InvalidParameter(e.to_string()))?;
    let exact = (hi.x - lo.x) * (hi.z - lo.z) / (hi.y - lo.y);
    Ok(outflow / exact)
}

fn mesh_bounds(mesh: &TetMesh) -> (Point3<f64>, Point3<f64>) {
    let mut lo = Point3::from([f64::INFINITY; 3]);
    let mut hi = Point3::from([f64::NEG_INFINITY; 3]);
    for p in mesh.nodes() {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

/// Which physics gets the finer mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FineGrid {
    Flow,
    Mech,
}

impl fmt::Display for FineGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FineGrid::Flow => "flow",
            FineGrid::Mech => "mech",
        })
    }
}

impl std::str::FromStr for FineGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flow" => Ok(FineGrid::Flow),
            "mech" => Ok(FineGrid::Mech),
            other => Err(format!("expected `flow` or `mech`, got `{other}`")),
        }
    }
}

/// Benchmark setup. Box meshes are generated unless explicit meshes are
/// supplied, in which case they must cover the same domain.
#[derive(Debug, Clone, PartialEq)]
pub struct MandelConfig {
    pub a_x: f64,
    pub b_y: f64,
    pub t_z: f64,
    /// Cells per direction (x, y) of the fine and coarse box meshes; both are
    /// one element thick.
    pub fine_cells: (usize, usize),
    pub coarse_cells: (usize, usize),
    pub fine_mesh: Option<TetMesh>,
    pub coarse_mesh: Option<TetMesh>,
    pub material: PoroelasticMaterial,
    /// Mean compressive plate stress σ0 = F/b_y (Pa).
    pub mean_stress: f64,
    /// Explicit time steps; `None` selects the default ramp.
    pub schedule: Option<TimeSchedule>,
    pub fs_tol: f64,
    pub fs_maxiter: usize,
    pub p_scale: f64,
    pub n_terms: usize,
    /// Uniform reference and initial pressure.
    pub initial_pressure: f64,
    /// Default schedule in dimensionless time c·t/b_y²: first step, cap,
    /// growth ratio and end time.
    pub dt_first: f64,
    pub dt_max: f64,
    pub dt_ratio: f64,
    pub end_time: f64,
}

impl Default for MandelConfig {
    fn default() -> Self {
        Self {
            a_x: 50.0,
            b_y: 50.0,
            t_z: 0.25,
            fine_cells: (24, 20),
            coarse_cells: (18, 15),
            fine_mesh: None,
            coarse_mesh: None,
            material: PoroelasticMaterial::default(),
            mean_stress: 1.0e6,
            schedule: None,
            fs_tol: 1e-6,
            fs_maxiter: 50,
            p_scale: 1.0,
            n_terms: 200,
            initial_pressure: 0.0,
            dt_first: 1e-4,
            dt_max: 0.05,
            dt_ratio: 1.25,
            end_time: 2.0,
        }
    }
}

impl MandelConfig {
    /// Plate force per unit thickness F = σ0·b_y.
    pub fn force(&self) -> f64 {
        self.mean_stress * self.b_y
    }

    pub fn params(&self) -> Result<MandelParams, MandelError> {
        MandelParams::new(&self.material, self.b_y, self.force(), self.n_terms)
    }

    /// Geometric ramp from `dt_first` to `dt_max`, continued at the cap
    /// until `end_time`.
    pub fn default_schedule(&self) -> TimeSchedule {
        let (_, _, c) = derive_constants(&self.material);
        let tc = self.b_y * self.b_y / c;
        TimeSchedule::ramp_to(
            tc * self.dt_first,
            tc * self.dt_max,
            self.dt_ratio,
            tc * self.end_time,
        )
    }

    pub fn schedule(&self) -> TimeSchedule {
        self.schedule
            .clone()
            .unwrap_or_else(|| self.default_schedule())
    }

    pub fn coupling(&self) -> CouplingConfig {
        CouplingConfig {
            schedule: self.schedule(),
            fs_tol: self.fs_tol,
            fs_maxiter: self.fs_maxiter,
            p_scale: self.p_scale,
            continue_on_nonconvergence: false,
        }
    }

    pub fn probe(&self) -> Probe {
        Probe {
            name: "corner".into(),
            point: Point3::new(self.a_x, 0.0, 0.5 * self.t_z),
        }
    }

    fn mesh(&self, explicit: &Option<TetMesh>, cells: (usize, usize)) -> TetMesh {
        explicit
            .clone()
            .unwrap_or_else(|| box_tet_mesh(cells.0, cells.1, 1, self.a_x, self.b_y, self.t_z))
    }

    /// (flow mesh, mechanics mesh) for the requested configuration.
    pub fn meshes(&self, fine: FineGrid) -> (TetMesh, TetMesh) {
        let f = self.mesh(&self.fine_mesh, self.fine_cells);
        let c = self.mesh(&self.coarse_mesh, self.coarse_cells);
        match fine {
            FineGrid::Flow => (f, c),
            FineGrid::Mech => (c, f),
        }
    }

    pub fn flow_bc(&self) -> FlowBcSpec {
        FlowBcSpec::default().with("ymax", FlowBoundary::FixedPressure(self.initial_pressure))
    }

    pub fn mech_bc(&self) -> MechBcSpec {
        MechBcSpec::default()
            .with(
                "xmin",
                MechBoundary::Fixed {
                    axis: Axis::X,
                    value: 0.0,
                },
            )
            .with(
                "ymin",
                MechBoundary::Fixed {
                    axis: Axis::Y,
                    value: 0.0,
                },
            )
            .with(
                "zmin",
                MechBoundary::Fixed {
                    axis: Axis::Z,
                    value: 0.0,
                },
            )
            .with(
                "zmax",
                MechBoundary::Fixed {
                    axis: Axis::Z,
                    value: 0.0,
                },
            )
            .with(
                "xmax",
                MechBoundary::RigidPlate {
                    axis: Axis::X,
                    force: -self.force() * self.t_z,
                },
            )
    }

    pub fn simulation(&self, fine: FineGrid) -> Result<Simulation, CouplingError> {
        let (flow, mech) = self.meshes(fine);
        Simulation::new(
            flow,
            mech,
            self.material.clone(),
            self.flow_bc(),
            self.mech_bc(),
            DEFAULT_CONTAINMENT_TOL,
        )
    }
}

/// Outcome of one benchmark run. Series exclude the t = 0 equilibrium.
#[derive(Debug, Clone)]
pub struct MandelReport {
    pub fine: FineGrid,
    pub flow_elements: usize,
    pub mech_elements: usize,
    pub params: MandelParams,
    pub probe_point: Point3<f64>,
    pub times: Vec<f64>,
    pub p_numeric: Vec<f64>,
    pub p_analytic: Vec<f64>,
    pub rel_l2_error: f64,
    /// max p / p(first step).
    pub peak_ratio: f64,
    /// p(final) / max p.
    pub final_ratio: f64,
    pub nonmonotonic: bool,
    pub undrained_numeric: f64,
    pub undrained_analytic: f64,
    pub iterations: Vec<usize>,
    pub all_converged: bool,
    /// Steady two-point flux along y on the flow mesh over the exact value.
    pub drainage_flux_ratio: f64,
}

impl MandelReport {
    pub fn undrained_rel_error(&self) -> f64 {
        (self.undrained_numeric - self.undrained_analytic).abs() / self.undrained_analytic.abs()
    }

    pub fn max_iterations(&self) -> usize {
        self.iterations.iter().copied().max().unwrap_or(0)
    }

    pub fn mean_iterations(&self) -> f64 {
        if self.iterations.is_empty() {
            return 0.0;
        }
        self.iterations.iter().sum::<usize>() as f64 / self.iterations.len() as f64
    }
}

impl fmt::Display for MandelReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "fine: {}", self.fine)?;
        writeln!(f, "flow_elements: {}", self.flow_elements)?;
        writeln!(f, "mech_elements: {}", self.mech_elements)?;
        writeln!(
            f,
            "probe: ({}, {}, {})",
            self.probe_point.x, self.probe_point.y, self.probe_point.z
        )?;
        writeln!(f, "skempton_B: {:.6}", self.params.skempton)?;
        writeln!(f, "undrained_poisson: {:.6}", self.params.nu_u)?;
        writeln!(f, "consolidation_c: {:.6e}", self.params.c)?;
        writeln!(f, "drainage_flux_ratio: {:.6}", self.drainage_flux_ratio)?;
        writeln!(f, "steps: {}", self.times.len())?;
        writeln!(f, "rel_l2_error: {:.6e}", self.rel_l2_error)?;
        writeln!(f, "undrained_numeric: {:.6e}", self.undrained_numeric)?;
        writeln!(f, "undrained_analytic: {:.6e}", self.undrained_analytic)?;
        writeln!(f, "undrained_rel_error: {:.6e}", self.undrained_rel_error())?;
        writeln!(f, "peak_ratio: {:.6}", self.peak_ratio)?;
        writeln!(f, "final_ratio: {:.6e}", self.final_ratio)?;
        writeln!(f, "nonmonotonic: {}", self.nonmonotonic)?;
        writeln!(f, "max_iterations: {}", self.max_iterations())?;
        writeln!(f, "mean_iterations: {:.3}", self.mean_iterations())?;
        write!(f, "all_converged: {}", self.all_converged)
    }
}

/// True when the series rises strictly above both its first and its last
/// sample.
pub fn is_nonmonotonic(p: &[f64]) -> bool {
    match (p.first(), p.last()) {
        (Some(&first), Some(&last)) => {
            let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            max > first && max > last
        }
        _ => false,
    }
}

/// Builds a report from a finished run.
pub fn summarize(
    cfg: &MandelConfig,
    fine: FineGrid,
    sim: &Simulation,
    out: &RunOutput,
) -> Result<MandelReport, MandelError> {
    let params = cfg.params()?;
    let series = &out.probes[0];
    let times: Vec<f64> = series.times[1..].to_vec();
    let p_numeric: Vec<f64> = series.pressure[1..]
        .iter()
        .map(|p| p - cfg.initial_pressure)
        .collect();
    let xi = series.point.y;
    let p_analytic: Vec<f64> = times.iter().map(|&t| params.pressure(xi, t)).collect();
    let max = p_numeric.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first = p_numeric.first().copied().unwrap_or(0.0);
    let last = p_numeric.last().copied().unwrap_or(0.0);
    Ok(MandelReport {
        fine,
        flow_elements: sim.flow_mesh.num_tets(),
        mech_elements: sim.mech_mesh.num_tets(),
        probe_point: series.point,
        rel_l2_error: rel_l2_in_time(&times, &p_numeric, &p_analytic),
        peak_ratio: max / first,
        final_ratio: last / max,
        nonmonotonic: is_nonmonotonic(&p_numeric),
        undrained_numeric: first,
        undrained_analytic: params.undrained_pressure(),
        iterations: out.states[1..].iter().map(|s| s.iterations).collect(),
        all_converged: out.states.iter().all(|s| s.converged),
        drainage_flux_ratio: drainage_flux_ratio(&sim.flow_mesh)
            .map_err(|e| MandelError::InvalidParameters(e.to_string()))?,
        params,
        times,
        p_numeric,
        p_analytic,
    })
}

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Mandel(#[from] MandelError),
}

/// Runs the coupled simulation for one mesh-pair role and compares the
/// corner probe with the analytic series.
pub fn mandel_benchmark(
    cfg: &MandelConfig,
    fine: FineGrid,
) -> Result<(MandelReport, RunOutput), BenchmarkError> {
    cfg.params()?;
    let sim = cfg.simulation(fine)?;
    let out = sim.run(&cfg.coupling(), cfg.initial_pressure, &[cfg.probe()])?;
    let report = summarize(cfg, fine, &sim, &out)?;
    Ok((report, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::BiotModulus;

    #[test]
    fn first_root_for_coefficient_two() {
        let r = mandel_roots(0.0, 0.5, 1).unwrap();
        assert!((r[0] - 1.165_561_185_207_211_3).abs() < 1e-12);
    }

    #[test]
    fn roots_sit_in_their_brackets() {
        let r = mandel_roots(0.1, 0.4, 50).unwrap();
        assert_eq!(r.len(), 50);
        for (i, &al) in r.iter().enumerate() {
            let (lo, hi) = root_bracket(i + 1);
            assert!(al > lo && al < hi);
            assert!(
                characteristic_residual(al, root_coefficient(0.1, 0.4)).abs() <= 1e-10 * (1.0 + al)
            );
        }
        assert!(r.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn invalid_poisson_pair_is_rejected() {
        assert!(mandel_roots(0.3, 0.2, 3).is_err());
    }

    #[test]
    fn limits_of_derived_constants() {
        let stiff = PoroelasticMaterial {
            biot_modulus: BiotModulus::Direct(1e30),
            ..Default::default()
        };
        let (b, nu_u, _) = derive_constants(&stiff);
        assert!((b - 1.0).abs() < 1e-12 && (nu_u - 0.5).abs() < 1e-12);
        let loose = PoroelasticMaterial {
            biot_coefficient: 0.0,
            ..Default::default()
        };
        let (b, nu_u, _) = derive_constants(&loose);
        assert_eq!(b, 0.0);
        assert_eq!(nu_u, loose.poisson_ratio);
    }

    #[test]
    fn series_limits() {
        let p = MandelParams::new(&PoroelasticMaterial::default(), 50.0, 5e7, 200).unwrap();
        let tiny = p.time_at(1e-9);
        assert!(
            ((p.pressure(0.0, tiny) - p.undrained_pressure()) / p.undrained_pressure()).abs()
                < 5e-3
        );
        assert_eq!(p.pressure(50.0, p.time_at(0.3)), 0.0);
        for xi in [0.0, 10.0, 25.0, 49.0] {
            assert!(p.pressure(xi, p.time_at(10.0)).abs() < 1e-6 * p.undrained_pressure());
        }
    }

    #[test]
    fn mandel_cryer_rise_in_the_series() {
        let p = MandelParams::new(&PoroelasticMaterial::default(), 50.0, 5e7, 200).unwrap();
        let peak = (1..200)
            .map(|i| p.pressure(0.0, p.time_at(i as f64 * 0.005)))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(peak > p.undrained_pressure() * 1.05);
    }

    #[test]
    fn l2_in_time_of_identical_series_is_zero() {
        let t = [0.0, 1.0, 3.0];
        let a = [1.0, 2.0, 0.5];
        assert_eq!(rel_l2_in_time(&t, &a, &a), 0.0);
        let b = [1.1, 2.2, 0.55];
        assert!((rel_l2_in_time(&t, &b, &a) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn nonmonotonic_detection() {
        assert!(is_nonmonotonic(&[1.0, 1.2, 0.3]));
        assert!(!is_nonmonotonic(&[1.0, 0.8, 0.3]));
        assert!(!is_nonmonotonic(&[]));
    }

    #[test]
    fn default_meshes_are_flux_consistent_along_y() {
        let cfg = MandelConfig::default();
        let (fine, coarse) = cfg.meshes(FineGrid::Flow);
        for m in [fine, coarse] {
            let r = drainage_flux_ratio(&m).unwrap();
            assert!((r - 1.0).abs() < 0.01, "flux ratio {r}");
        }
    }

    #[test]
    fn default_schedule_reaches_the_end_time() {
        let cfg = MandelConfig::default();
        let params = cfg.params().unwrap();
        let steps = cfg.default_schedule().steps();
        let total: f64 = steps.iter().sum();
        assert!(total >= params.time_at(cfg.end_time) * (1.0 - 1e-12));
        assert!((steps[0] - params.time_at(1e-4)).abs() <= 1e-9 * steps[0]);
    }
}
