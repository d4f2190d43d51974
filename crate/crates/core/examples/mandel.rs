//! Runs both Mandel mesh-pair configurations and prints their reports.
//! Pass `--series` to also print `c·t/a², p_numeric, p_analytic` per step.

use std::time::Instant;

use twogrid::mandel::{mandel_benchmark, FineGrid, MandelConfig};

fn main() {
    let cfg = MandelConfig::default();
    let series = std::env::args().any(|a| a == "--series");
    for fine in [FineGrid::Flow, FineGrid::Mech] {
        let start = Instant::now();
        let (report, _) = mandel_benchmark(&cfg, fine).expect("benchmark run");
        println!("{report}");
        println!("elapsed_s: {:.2}\n", start.elapsed().as_secs_f64());
        if series {
            let tc = report.params.a.powi(2) / report.params.c;
            for ((t, p), q) in report
                .times
                .iter()
                .zip(&report.p_numeric)
                .zip(&report.p_analytic)
            {
                println!("{:.4e} {:.6e} {:.6e}", t / tc, p, q);
            }
        }
    }
}
