use std::time::Instant;

use pce_core::benchmarks::Benchmark;
use pce_core::{fit_degree_adaptive, ExperimentalDesign, FitConfig, FitMethod};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn smoke_sobol() {
    let bench = Benchmark::SobolG;
    let model = bench.input_model();
    let n = 200;
    let t0 = Instant::now();
    let mut ev_lar = vec![];
    let mut ev_hlar = vec![];
    let mut loo_lar = vec![];
    let mut loo_hlar = vec![];
    for seed in 1..=10u64 {
        let x = model.lhs_sample(n, seed);
        let y = bench.eval_batch(&x).unwrap();
        let ed = ExperimentalDesign::new(x, y, seed).unwrap();

        let xv = model.mc_sample(20_000, seed + 1000);
        let yv = bench.eval_batch(&xv).unwrap();

        for method in [FitMethod::Lar, FitMethod::Hlar] {
            let t = Instant::now();
            let mut config = FitConfig::new(method, 0.5, Some(2));
            config.lar.corrected_loo = true;
            config.child_mode = pce_core::ChildTruncation::QNorm;
            let fit = fit_degree_adaptive(&ed, &model, &config, 1..=9).unwrap();
            let pred = fit.predict_batch(&xv).unwrap();
            let ev = pce_core::benchmarks::validation_error(&yv, &pred).unwrap();
            println!(
                "seed {seed} {method}: p*={} n_r={} loo={:.3e} eps_v={:.3e} ({:.1?})",
                fit.best_degree,
                fit.n_retained(),
                fit.diagnostics.loo_error,
                ev,
                t.elapsed()
            );
            match method {
                FitMethod::Lar => {
                    ev_lar.push(ev);
                    loo_lar.push(fit.diagnostics.loo_error);
                }
                FitMethod::Hlar => {
                    ev_hlar.push(ev);
                    loo_hlar.push(fit.diagnostics.loo_error);
                }
            }
        }
    }
    println!(
        "medians: LAR eps_v={:.3e} loo={:.3e} | hLAR eps_v={:.3e} loo={:.3e}  total {:.1?}",
        median(ev_lar),
        median(loo_lar),
        median(ev_hlar),
        median(loo_hlar),
        t0.elapsed()
    );
}
