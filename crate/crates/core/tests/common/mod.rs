#![allow(dead_code)]

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twogrid::flow::{assemble_flow_step, solve_flow_step};
use twogrid::geometry::{point_in_tet, ElementPair};
use twogrid::mechanics::{
    assemble_body_force, assemble_pressure_load, assemble_stiffness, assemble_traction_load,
    element_strain_stress, ConstrainedSystem,
};
use twogrid::mesh::box_tet_mesh;
use twogrid::{
    Axis, FlowBcSpec, FlowBoundary, MechBcSpec, MechBoundary, PoroelasticMaterial, TetMesh,
};

/// Box mesh whose interior nodes are moved randomly by up to `frac` of the
/// local cell size. Boundary nodes stay on their faces.
pub fn jittered_box(cells: [usize; 3], len: [f64; 3], frac: f64, seed: u64) -> TetMesh {
    let m = box_tet_mesh(cells[0], cells[1], cells[2], len[0], len[1], len[2]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h: Vec<f64> = (0..3).map(|k| len[k] / cells[k] as f64).collect();
    let shifts: Vec<Vector3<f64>> = m
        .nodes()
        .iter()
        .map(|p| {
            let mut d = Vector3::zeros();
            for k in 0..3 {
                let on_face = p[k].abs() < 1e-12 || (p[k] - len[k]).abs() < 1e-12;
                if !on_face {
                    d[k] = frac * h[k] * rng.gen_range(-1.0..1.0);
                }
            }
            d
        })
        .collect();
    let nodes: Vec<Point3<f64>> = m.nodes().iter().zip(&shifts).map(|(p, d)| p + d).collect();
    TetMesh::new(nodes, m.tets().to_vec(), m.boundary().to_vec())
        .expect("jittered mesh stays valid")
        .0
}

/// All (flow, mech) pairs by exhaustive vertex tests, no prefilter.
pub fn brute_force_pairs(flow: &TetMesh, mech: &TetMesh, tol: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for f in 0..flow.num_tets() {
        let tf = flow.tet(f);
        for g in 0..mech.num_tets() {
            let tg = mech.tet(g);
            let hit = tf.v.iter().any(|v| point_in_tet(&tg, v, tol).unwrap())
                || tg.v.iter().any(|v| point_in_tet(&tf, v, tol).unwrap());
            if hit {
                out.push((f, g));
            }
        }
    }
    out
}

/// Dense row-normalized transfer matrix built from a pair list;
/// `to_mech` selects the flow→mechanics direction.
pub fn dense_operator(
    pairs: &[ElementPair],
    n_flow: usize,
    n_mech: usize,
    to_mech: bool,
) -> Vec<Vec<f64>> {
    let (rows, cols) = if to_mech {
        (n_mech, n_flow)
    } else {
        (n_flow, n_mech)
    };
    let mut w = vec![vec![0.0; cols]; rows];
    for p in pairs {
        if to_mech {
            w[p.mech_elem][p.flow_elem] = p.w_f2m;
        } else {
            w[p.flow_elem][p.mech_elem] = p.w_m2f;
        }
    }
    for row in &mut w {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            for x in row.iter_mut() {
                *x /= s;
            }
        }
    }
    w
}

pub fn dense_apply(w: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    w.iter()
        .map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// Column loaded on top, drained on top, rollers on the sides and bottom.
pub fn column_bcs(load: f64) -> (FlowBcSpec, MechBcSpec) {
    let flow = FlowBcSpec::default().with("zmax", FlowBoundary::FixedPressure(0.0));
    let mech = MechBcSpec::default()
        .with(
            "xmin",
            MechBoundary::Fixed {
                axis: Axis::X,
                value: 0.0,
            },
        )
        .with(
            "xmax",
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
            "ymax",
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
            MechBoundary::Traction(Vector3::new(0.0, 0.0, -load)),
        );
    (flow, mech)
}

/// Fields of one single-grid reference step.
#[derive(Debug, Clone)]
pub struct RefState {
    pub p: Vec<f64>,
    pub eps_v: Vec<f64>,
    pub sigma_v: Vec<f64>,
    pub u: Vec<f64>,
    pub iterations: usize,
}

/// Fixed-stress staggered loop on a single mesh written without transfer
/// operators: the reference for the two-grid driver on matching grids.
pub fn single_grid_reference(
    mesh: &TetMesh,
    mat: &PoroelasticMaterial,
    flow_bc: &FlowBcSpec,
    mech_bc: &MechBcSpec,
    steps: &[f64],
    fs_tol: f64,
    p_scale: f64,
) -> Vec<RefState> {
    let n = mesh.num_tets();
    let grid = twogrid::mesh::build_fv_grid(mesh, mat.permeability).unwrap();
    let system =
        ConstrainedSystem::new(mesh, assemble_stiffness(mesh, mat).unwrap(), mech_bc).unwrap();
    let body = assemble_body_force(mesh, mat);
    let traction = assemble_traction_load(mesh, mech_bc);
    let static_loads: Vec<f64> = body.iter().zip(&traction).map(|(a, b)| a + b).collect();
    let u_init = system.solve(&body, None, true).unwrap();
    let zeros = vec![0.0; n];
    let (_, sigma0) = element_strain_stress(mesh, mat, &u_init, &zeros, &zeros, &zeros).unwrap();

    let mut flow_state = twogrid::FlowState::at_reference(zeros.clone(), sigma0.clone());
    let mut u_prev = vec![0.0; u_init.len()];
    let mut out = Vec::new();
    let vols = &grid.volumes;
    let total: f64 = vols.iter().sum();
    let rms = |v: &[f64]| (vols.iter().zip(v).map(|(w, x)| w * x * x).sum::<f64>() / total).sqrt();

    for &dt in steps {
        let mut sigma = flow_state.sigma_v.clone();
        let mut p_last = flow_state.p.clone();
        let mut u_total: Vec<f64> = u_prev.iter().zip(&u_init).map(|(a, b)| a + b).collect();
        let mut k = 0;
        let (p, eps, u_rel) = loop {
            k += 1;
            let sys = assemble_flow_step(&grid, mat, &flow_state, &sigma, dt, flow_bc).unwrap();
            let p = solve_flow_step(&sys).unwrap();
            let mut loads = assemble_pressure_load(mesh, mat, &p, &zeros).unwrap();
            for (l, s) in loads.iter_mut().zip(&static_loads) {
                *l += s;
            }
            u_total = system.solve(&loads, Some(&u_total), false).unwrap();
            let u_rel: Vec<f64> = u_total.iter().zip(&u_init).map(|(a, b)| a - b).collect();
            let (eps, sig) = element_strain_stress(mesh, mat, &u_rel, &p, &zeros, &sigma0).unwrap();
            sigma = sig;
            let d: Vec<f64> = p.iter().zip(&p_last).map(|(a, b)| a - b).collect();
            let inc = rms(&d) / rms(&p).max(p_scale);
            p_last = p.clone();
            if k >= 2 && inc <= fs_tol {
                break (p, eps, u_rel);
            }
            assert!(k < 200, "reference did not converge");
        };
        flow_state.p = p.clone();
        flow_state.sigma_v = sigma.clone();
        flow_state.eps_v = eps.clone();
        u_prev = u_rel.clone();
        out.push(RefState {
            p,
            eps_v: eps,
            sigma_v: sigma,
            u: u_rel,
            iterations: k,
        });
    }
    out
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = a
        .iter()
        .chain(b)
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}

/// `‖a − b‖ / max(‖b‖, 1)` in the volume-weighted RMS norm of the
/// fixed-stress increment.
pub fn weighted_rel_diff(volumes: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let total: f64 = volumes.iter().sum();
    let rms = |f: &dyn Fn(usize) -> f64| {
        (volumes
            .iter()
            .enumerate()
            .map(|(i, w)| w * f(i) * f(i))
            .sum::<f64>()
            / total)
            .sqrt()
    };
    rms(&|i| a[i] - b[i]) / rms(&|i| b[i]).max(1.0)
}
