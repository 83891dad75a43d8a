//! Acceptance criteria 1-10, one PASS/FAIL line each. Runs as a plain
//! binary (`harness = false`) and exits nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use csmt::medtests::{
    cauchy_combine, choose_k, csmt, generate_weights, make_partition, sobel_statistic, subsampling_t_test,
};
use csmt::regress::fit_pair;
use csmt::simulate::calibration::{calibrate_sobel, calibrate_studentized};
use csmt::simulate::{
    run_power_experiment, run_size_experiment, ExperimentReport, ExperimentSettings, NullMixture, PowerScenario,
    SimulationParams,
};
use csmt::{Method, RandomSource};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn crit1_and_3_and_4() -> (Outcome, Outcome, Outcome) {
    let cal = calibrate_sobel(&SimulationParams::new(0.0, 0.0, 600), 2000, 0.05, &RandomSource::new(101)).unwrap();
    let c1 = outcome(
        (cal.empirical_sd - 0.5).abs() <= 0.03 && cal.ks.p_value > 0.01,
        format!(
            "H00 Sobel sd {:.4} (target 0.5 +/- 0.03), KS vs N(0, 1/4) D = {:.4}, p = {:.4} (> 0.01)",
            cal.empirical_sd, cal.ks.statistic, cal.ks.p_value
        ),
    );
    let c3 = outcome(
        cal.sobel_size <= 0.005,
        format!("Sobel size under H00 {:.4} over 2000 replications (<= 0.005)", cal.sobel_size),
    );
    let c4 = outcome(
        cal.maxp_size <= 0.01,
        format!("MaxP size under H00 {:.4} over 2000 replications (<= 0.01)", cal.maxp_size),
    );
    (c1, c3, c4)
}

fn crit2() -> Outcome {
    let cal = calibrate_sobel(&SimulationParams::new(0.0, 0.5, 600), 2000, 0.05, &RandomSource::new(102)).unwrap();
    outcome(
        (cal.empirical_sd - 1.0).abs() <= 0.05 && cal.ks.p_value > 0.01,
        format!(
            "H01 Sobel sd {:.4} (target 1 +/- 0.05), KS vs N(0, 1) D = {:.4}, p = {:.4} (> 0.01)",
            cal.empirical_sd, cal.ks.statistic, cal.ks.p_value
        ),
    )
}

fn crit5() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, tau) in [0.25, 1.0].into_iter().enumerate() {
        let cal = calibrate_studentized(12, tau, 100_000, &RandomSource::with_key(105, &[i as u64])).unwrap();
        pass &= cal.ks.p_value > 0.01;
        parts.push(format!("tau {tau}: D = {:.5}, p = {:.4}", cal.ks.statistic, cal.ks.p_value));
    }
    outcome(pass, format!("K = 12, 1e5 draws vs t_11: {} (each p > 0.01)", parts.join("; ")))
}

fn paper_settings(n: usize) -> ExperimentSettings {
    ExperimentSettings::new(n, 500)
}

fn size_band(report: &ExperimentReport) -> (bool, String) {
    let p = &report.points[0];
    let c = p.rate(Method::Csmt).unwrap();
    let s = p.rate(Method::Sobel).unwrap();
    let m = p.rate(Method::MaxP).unwrap();
    let pass = (0.02..=0.08).contains(&c) && s < c && m < c;
    (pass, format!("csmt {c:.3} in [0.02, 0.08], sobel {s:.3} < csmt, maxp {m:.3} < csmt"))
}

fn crit6() -> Outcome {
    let mut settings = paper_settings(600);
    settings.k = Some(12);
    let report = run_size_experiment(&NullMixture::sparse(0.1), &settings, &RandomSource::new(106)).unwrap();
    let (pass, detail) = size_band(&report);
    outcome(pass, format!("sparse null, r = 0.1, n = 600, K = 12, M = 500, 500 tests: {detail}"))
}

fn crit7() -> Outcome {
    let mut settings = paper_settings(600);
    settings.k = Some(12);
    let cases = [
        ("dense r = 0.1", NullMixture::dense(0.1)),
        ("sparse r = 0.5", NullMixture::sparse(0.5)),
        ("dense r = 0.5", NullMixture::dense(0.5)),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (label, mix)) in cases.iter().enumerate() {
        let report = run_size_experiment(mix, &settings, &RandomSource::with_key(107, &[i as u64])).unwrap();
        let (ok, detail) = size_band(&report);
        pass &= ok;
        parts.push(format!("{label}: {detail}"));
    }
    outcome(pass, parts.join(" | "))
}

fn crit8() -> Outcome {
    let settings = paper_settings(300);
    let scenario = PowerScenario::FixedEqual { values: vec![0.5] };
    let report = run_power_experiment(&scenario, &settings, &RandomSource::new(108)).unwrap();
    let p = &report.points[0];
    let n = 500.0;
    let c = p.rate(Method::Csmt).unwrap();
    let mut pass = true;
    let mut parts = vec![format!("alpha = beta = 0.5, n = 300, K = {}, 500 reps: csmt {c:.3}", p.k)];
    for method in [Method::Sobel, Method::MaxP] {
        let o = p.rate(method).unwrap();
        let se = (c * (1.0 - c) / n + o * (1.0 - o) / n).sqrt();
        let gap = c - o;
        // The gap may fall short of zero by at most twice its binomial SE.
        let ok = gap + 2.0 * se >= 0.0;
        pass &= ok;
        parts.push(format!(
            "{method} {o:.3} (gap {gap:+.3}, 2 SE {:.3}, gap - 2 SE {:+.3})",
            2.0 * se,
            gap - 2.0 * se
        ));
    }
    outcome(pass, parts.join(", "))
}

fn crit9() -> Outcome {
    let reps = 10_000u64;
    let m = 500;
    let root = RandomSource::new(109);
    let rejections = (0..reps)
        .filter(|&r| {
            let src = root.child(r);
            let mut st = src.child(0).stream();
            let p: Vec<f64> = (0..m).map(|_| st.uniform()).collect();
            let w = generate_weights(m, &src.child(1)).unwrap();
            cauchy_combine(&p, &w).unwrap().1 <= 0.05
        })
        .count();
    let rate = rejections as f64 / reps as f64;
    outcome(
        (0.035..=0.065).contains(&rate),
        format!("independent uniforms, random weights, M = 500, 1e4 reps: rejection rate {rate:.4} in [0.035, 0.065]"),
    )
}

fn crit10() -> Outcome {
    let mut failures = Vec::new();

    // Partition invariants.
    for seed in 0..200 {
        let part = make_partition(200, 7, &RandomSource::new(seed)).unwrap();
        let mut sizes = part.sizes();
        sizes.sort_unstable();
        let mut all: Vec<usize> = part.groups().iter().flatten().copied().collect();
        all.sort_unstable();
        if sizes != [28, 28, 28, 29, 29, 29, 29] || all != (0..200).collect::<Vec<_>>() {
            failures.push(format!("partition seed {seed}"));
            break;
        }
    }
    for (n, k) in [(17, 2), (100, 3), (601, 12), (1000, 31)] {
        let part = make_partition(n, k, &RandomSource::new(n as u64)).unwrap();
        let sizes = part.sizes();
        let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
        if spread > 1 || part.validate().is_err() {
            failures.push(format!("partition n = {n}, K = {k}"));
        }
    }

    // Sobel bound.
    let mut st = RandomSource::new(110).stream();
    for _ in 0..100_000 {
        let ta = 10.0 * st.normal();
        let tb = 10.0 * st.normal();
        let s = sobel_statistic(ta, tb);
        if s.abs() > ta.abs().min(tb.abs()) * (1.0 + 1e-15) {
            failures.push(format!("Sobel bound at ({ta}, {tb})"));
            break;
        }
    }

    // OLS against the exact rational oracle.
    let mut worst = 0.0f64;
    for seed in 0..60u64 {
        let n = 8 + (seed as usize % 13);
        let q = seed as usize % 3;
        let ds = common::random_dataset(n, q, seed);
        let (a, b) = fit_pair(&ds, None).unwrap();
        let ((ea, sa), (eb, sb)) = common::exact_pair(&ds).unwrap();
        for (got, want) in [(a.estimate, ea), (a.std_error, sa), (b.estimate, eb), (b.std_error, sb)] {
            worst = worst.max((got - want).abs() / want.abs().max(1.0));
        }
    }
    if worst > 1e-8 {
        failures.push(format!("OLS oracle deviation {worst:e}"));
    }

    // Single-split CSMT equals the subsampling test on the same substream.
    for seed in 0..20 {
        let ds = common::random_dataset(120, 1, 1000 + seed);
        let k = choose_k(ds.n()).unwrap();
        let src = RandomSource::new(seed);
        let a = csmt(&ds, k, 1, &src).unwrap();
        let b = subsampling_t_test(&ds, k, &src.child(1)).unwrap();
        if a.p_value.to_bits() != b.p_value.to_bits() {
            failures.push(format!("M = 1 mismatch at seed {seed}"));
        }
    }

    // Report bit-determinism.
    let mut settings = ExperimentSettings::new(100, 20);
    settings.m = 20;
    settings.methods = Method::ALL.to_vec();
    let run = || {
        serde_json::to_vec(&run_size_experiment(&NullMixture::dense(0.3), &settings, &RandomSource::new(7)).unwrap())
            .unwrap()
    };
    if run() != run() {
        failures.push("size report not bit-identical".into());
    }

    let pass = failures.is_empty();
    let detail = if pass {
        format!(
            "partitions (n = 200, K = 7 -> 29x4 + 28x3), Sobel bound over 1e5 pairs, OLS oracle max rel. dev {worst:.1e}, M = 1 identity, report determinism"
        )
    } else {
        failures.join("; ")
    };
    outcome(pass, detail)
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut results: Vec<(u32, Outcome)> = Vec::new();
    let (c1, c3, c4) = crit1_and_3_and_4();
    results.push((1, c1));
    results.push((2, crit2()));
    results.push((3, c3));
    results.push((4, c4));
    results.push((5, crit5()));
    results.push((6, crit6()));
    results.push((7, crit7()));
    results.push((8, crit8()));
    results.push((9, crit9()));
    results.push((10, crit10()));

    let mut failed = 0;
    for (id, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2}: {tag}  {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1?}",
        results.len() - failed,
        results.len(),
        started.elapsed()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
