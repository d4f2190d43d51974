mod common;

use nalgebra::{Point3, Vector3};
use twogrid::coupling::Probe;
use twogrid::flow::{assemble_flow_step, solve_flow_step};
use twogrid::geometry::DEFAULT_CONTAINMENT_TOL;
use twogrid::mandel::{FineGrid, MandelConfig};
use twogrid::mesh::box_tet_mesh;
use twogrid::{
    CouplingConfig, CouplingError, FlowBcSpec, FlowBoundary, MechBcSpec, PoroelasticMaterial,
    Simulation, TimeSchedule,
};

const LOAD: f64 = 1e6;

fn material() -> PoroelasticMaterial {
    PoroelasticMaterial {
        gravity: Vector3::new(0.0, 0.0, -9.81),
        ..Default::default()
    }
}

fn column(cells: [usize; 3]) -> twogrid::TetMesh {
    box_tet_mesh(cells[0], cells[1], cells[2], 1.0, 1.0, 4.0)
}

/// Consolidation time of the 4 m column for the default material.
fn tc(mat: &PoroelasticMaterial) -> f64 {
    let m = mat.biot_modulus();
    let b = mat.biot_coefficient;
    let mc = mat.constrained_modulus();
    let c = mat.permeability * mat.mobility() * m * mc / (mc + b * b * m);
    16.0 / c
}

fn config(schedule: TimeSchedule, fs_tol: f64) -> CouplingConfig {
    CouplingConfig {
        schedule,
        fs_tol,
        ..Default::default()
    }
}

#[test]
fn identical_meshes_match_single_grid_reference() {
    let mat = material();
    let mesh = common::jittered_box([2, 2, 6], [1.0, 1.0, 4.0], 0.15, 31);
    let (fbc, mbc) = common::column_bcs(LOAD);
    let steps = TimeSchedule::Geometric {
        dt_first: 1e-3 * tc(&mat),
        dt_max: 0.1 * tc(&mat),
        ratio: 2.0,
        n_steps: 10,
    };
    let cfg = config(steps.clone(), 1e-8);
    let reference = common::single_grid_reference(
        &mesh,
        &mat,
        &fbc,
        &mbc,
        &steps.steps(),
        cfg.fs_tol,
        cfg.p_scale,
    );

    let two_grid = Simulation::new(
        mesh.clone(),
        mesh.clone(),
        mat.clone(),
        fbc.clone(),
        mbc.clone(),
        DEFAULT_CONTAINMENT_TOL,
    )
    .unwrap();
    assert!(two_grid.flow_to_mech.is_identity() && two_grid.mech_to_flow.is_identity());
    let single = Simulation::single_grid(mesh, mat, fbc, mbc).unwrap();

    for sim in [&two_grid, &single] {
        let out = sim.run(&cfg, 0.0, &[]).unwrap();
        assert_eq!(out.states.len(), reference.len() + 1);
        for (s, r) in out.states[1..].iter().zip(&reference) {
            assert_eq!(s.iterations, r.iterations);
            for (a, b) in [
                (&s.flow.p, &r.p),
                (&s.mech.p_mech, &r.p),
                (&s.flow.eps_v, &r.eps_v),
                (&s.mech.eps_v, &r.eps_v),
                (&s.flow.sigma_v, &r.sigma_v),
                (&s.mech.sigma_v, &r.sigma_v),
                (&s.mech.u, &r.u),
            ] {
                assert!(common::max_rel_diff(a, b) <= 1e-10);
            }
        }
    }
}

#[test]
fn decoupled_run_is_pure_diffusion() {
    let mat = PoroelasticMaterial {
        biot_coefficient: 0.0,
        ..Default::default()
    };
    let fine = column([2, 2, 10]);
    let coarse = column([1, 1, 6]);
    let (fbc, mbc) = common::column_bcs(LOAD);
    let sim = Simulation::new(
        fine,
        coarse,
        mat.clone(),
        fbc.clone(),
        mbc,
        DEFAULT_CONTAINMENT_TOL,
    )
    .unwrap();
    let cfg = config(
        TimeSchedule::ramp_to(1e-3 * tc(&mat), 0.1 * tc(&mat), 1.5, tc(&mat)),
        1e-6,
    );

    let mut state = sim.initial_state(0.0).unwrap();
    let p_init = 2e5;
    state.flow.p = vec![p_init; state.flow.p.len()];
    let mut diffusion = state.flow.clone();
    let probe = sim
        .flow_mesh
        .locate(&Point3::new(0.5, 0.5, 0.05), DEFAULT_CONTAINMENT_TOL)
        .unwrap();
    let mut curve = vec![p_init];
    for dt in cfg.schedule.steps() {
        state = sim.fixed_stress_step(&state, dt, &cfg).unwrap();
        assert_eq!(state.iterations, 2);
        assert_eq!(state.increments[1], 0.0);
        let sys =
            assemble_flow_step(&sim.grid, &mat, &diffusion, &diffusion.sigma_v, dt, &fbc).unwrap();
        diffusion.p = solve_flow_step(&sys).unwrap();
        assert!(
            state
                .flow
                .p
                .iter()
                .zip(&diffusion.p)
                .all(|(a, b)| a.to_bits() == b.to_bits()),
            "trajectories differ at t = {}",
            state.time
        );
        curve.push(state.flow.p[probe]);
    }
    assert!(curve.windows(2).all(|w| w[1] <= w[0]), "{curve:?}");
    assert!(*curve.last().unwrap() < 0.5 * p_init, "{curve:?}");
}

#[test]
fn reference_state_is_steady() {
    let mat = PoroelasticMaterial::default();
    let p0 = 3e5;
    let fbc = FlowBcSpec::default().with("zmax", FlowBoundary::FixedPressure(p0));
    let (_, mbc_loaded) = common::column_bcs(0.0);
    let mut mbc = MechBcSpec::default();
    for (tag, list) in &mbc_loaded.tags {
        if tag != "zmax" {
            mbc.tags.insert(tag.clone(), list.clone());
        }
    }
    let sim = Simulation::new(
        column([2, 2, 6]),
        column([1, 1, 4]),
        mat,
        fbc,
        mbc,
        DEFAULT_CONTAINMENT_TOL,
    )
    .unwrap();
    let cfg = CouplingConfig {
        schedule: TimeSchedule::Uniform {
            dt: 1e4,
            n_steps: 5,
        },
        ..Default::default()
    };
    let out = sim.run(&cfg, p0, &[]).unwrap();
    let first = &out.states[0];
    for s in &out.states {
        assert!(s.flow.p.iter().all(|&p| (p - p0).abs() <= 1e-9 * p0));
        assert!(s.mech.u.iter().all(|&u| u.abs() <= 1e-15));
        assert!(common::max_rel_diff(&s.flow.sigma_v, &first.flow.sigma_v) <= 1e-12);
    }
}

#[test]
fn outer_increments_contract_near_the_fixed_point() {
    let mat = material();
    let (fbc, mbc) = common::column_bcs(LOAD);
    let sim = Simulation::new(
        column([2, 2, 12]),
        column([2, 2, 7]),
        mat.clone(),
        fbc,
        mbc,
        DEFAULT_CONTAINMENT_TOL,
    )
    .unwrap();
    let cfg = config(
        TimeSchedule::ramp_to(1e-3 * tc(&mat), 0.1 * tc(&mat), 2.0, 0.5 * tc(&mat)),
        1e-9,
    );
    let out = sim.run(&cfg, 0.0, &[]).unwrap();
    for s in &out.states[1..] {
        assert!(s.converged);
        let inc = &s.increments;
        let tail = &inc[inc.len().saturating_sub(3)..];
        for w in tail.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "step {}: {inc:?}", s.step);
        }
    }
}

#[test]
fn tighter_tolerance_moves_pressure_by_less_than_twice_the_tolerance() {
    let mat = material();
    let (fbc, mbc) = common::column_bcs(LOAD);
    let sim = Simulation::new(
        column([2, 2, 12]),
        column([2, 2, 7]),
        mat.clone(),
        fbc,
        mbc,
        DEFAULT_CONTAINMENT_TOL,
    )
    .unwrap();
    let schedule = TimeSchedule::ramp_to(1e-3 * tc(&mat), 0.1 * tc(&mat), 2.0, 0.5 * tc(&mat));
    let tight_cfg = config(schedule.clone(), 1e-8);
    let loose_cfg = config(schedule.clone(), 1e-6);
    let tight = sim.run(&tight_cfg, 0.0, &[]).unwrap();
    // Each step restarted from the same converged state.
    for (prev, next) in tight.states.iter().zip(&tight.states[1..]) {
        let dt = next.time - prev.time;
        let loose = sim.fixed_stress_step(prev, dt, &loose_cfg).unwrap();
        let d = common::weighted_rel_diff(&sim.grid.volumes, &loose.flow.p, &next.flow.p);
        assert!(d <= 2.0 * loose_cfg.fs_tol, "step {}: {d:e}", next.step);
    }
}

#[test]
fn pressure_error_shrinks_with_the_time_step() {
    let mut cfg = MandelConfig {
        fine_cells: (12, 10),
        coarse_cells: (9, 8),
        ..Default::default()
    };
    let sim = cfg.simulation(FineGrid::Flow).unwrap();
    let params = cfg.params().unwrap();
    let t_end = params.time_at(0.05);
    let run = |n: usize, cfg: &mut MandelConfig| {
        cfg.schedule = Some(TimeSchedule::Uniform {
            dt: t_end / n as f64,
            n_steps: n,
        });
        sim.run(&cfg.coupling(), cfg.initial_pressure, &[])
            .unwrap()
            .states
            .pop()
            .unwrap()
            .flow
            .p
    };
    let reference = run(64, &mut cfg);
    let errors: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| common::max_rel_diff(&run(n, &mut cfg), &reference))
        .collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn worker_count_does_not_change_the_run() {
    let mat = material();
    let (fbc, mbc) = common::column_bcs(LOAD);
    let fine = common::jittered_box([3, 3, 8], [1.0, 1.0, 4.0], 0.1, 3);
    let sim_in = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let sim = Simulation::new(
                    fine.clone(),
                    column([2, 2, 5]),
                    mat.clone(),
                    fbc.clone(),
                    mbc.clone(),
                    DEFAULT_CONTAINMENT_TOL,
                )
                .unwrap();
                let cfg = config(
                    TimeSchedule::Uniform {
                        dt: 0.01 * tc(&mat),
                        n_steps: 4,
                    },
                    1e-6,
                );
                sim.run(&cfg, 0.0, &[]).unwrap()
            })
    };
    let a = sim_in(1);
    let b = sim_in(4);
    for (x, y) in a.states.iter().zip(&b.states) {
        assert!(common::max_rel_diff(&x.flow.p, &y.flow.p) <= 1e-12);
        assert!(common::max_rel_diff(&x.mech.u, &y.mech.u) <= 1e-12);
    }
}

#[test]
fn probe_series_follow_the_states() {
    let mat = material();
    let (fbc, mbc) = common::column_bcs(LOAD);
    let sim = Simulation::new(
        column([2, 2, 8]),
        column([1, 1, 5]),
        mat.clone(),
        fbc,
        mbc,
        DEFAULT_CONTAINMENT_TOL,
    )
    .unwrap();
    let probes = [
        Probe {
            name: "base".into(),
            point: Point3::new(0.5, 0.5, 0.1),
        },
        Probe {
            name: "top".into(),
            point: Point3::new(0.5, 0.5, 3.9),
        },
    ];
    let cfg = config(
        TimeSchedule::Uniform {
            dt: 0.02 * tc(&mat),
            n_steps: 6,
        },
        1e-6,
    );
    let mut seen = 0;
    let out = sim
        .run_with(&cfg, 0.0, &probes, |_| {
            seen += 1;
            Ok(())
        })
        .unwrap();
    assert_eq!(seen, 7);
    for ps in &out.probes {
        assert_eq!(ps.times.len(), 7);
        for (k, s) in out.states.iter().enumerate() {
            assert_eq!(ps.times[k], s.time);
            assert_eq!(ps.pressure[k], s.flow.p[ps.flow_elem]);
        }
    }
    // Drained top stays below the base during consolidation.
    assert!(out.probes[1].pressure[3] < out.probes[0].pressure[3]);

    let stop = sim.run_with(&cfg, 0.0, &probes, |s| {
        if s.step == 2 {
            Err(CouplingError::InvalidConfig("stop".into()))
        } else {
            Ok(())
        }
    });
    assert!(matches!(stop, Err(CouplingError::InvalidConfig(_))));
}
