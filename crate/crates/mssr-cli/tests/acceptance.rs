//! Release gate: one test per acceptance criterion. Every test prints a
//! single `criterion N (...): PASS/FAIL` line on real stderr (bypassing the
//! harness capture) before asserting, so a plain `cargo test` run shows the
//! verdicts. Tolerances are pinned here, next to the checks they guard.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use serde_json::Value;
use statrs::distribution::{Discrete, Poisson};

use mssr_core::analysis::{
    convergence_sweep, exit_probability_check, intensity_gap_check, jump_moment_check,
    EventSet, ExitConfig, IntensityGapConfig, JumpMomentConfig, SweepConfig,
};
use mssr_core::bundled;
use mssr_core::cme::{
    build_generator, enumerate_states, stationary_solve, transient_solve, Truncation,
    DEFAULT_SERIES_TOL, DEFAULT_STATIONARY_TOL,
};
use mssr_core::dist::{total_variation, DistributionVector};
use mssr_core::network::{parse_network, ReactionNetwork};
use mssr_core::projection::build_projected_system;
use mssr_core::scaling::ScaledSystem;
use mssr_core::ssa::{simulate_original, SimConfig};

/// Emits the verdict line on the real stderr so it survives output capture.
fn verdict(num: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "criterion {num} ({name}): {} {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = writeln!(std::io::stderr(), "{line}");
}

fn network_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../networks").join(file)
}

/// Runs the installed binary and parses its JSON report from stdout.
fn run_mssr(args: &[&str]) -> Value {
    let out = Command::new(env!("CARGO_BIN_EXE_mssr"))
        .args(args)
        .output()
        .expect("failed to spawn mssr");
    assert!(
        out.status.success(),
        "mssr {:?} exited with {}: {}",
        args,
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("report must be valid JSON")
}

fn reduced_network(text: &str) -> ReactionNetwork {
    let net = parse_network(text).unwrap();
    build_projected_system(&net).unwrap().network
}

fn integer_init(net: &ReactionNetwork) -> Vec<i64> {
    net.initial_counts(1.0).iter().map(|&v| v as i64).collect()
}

/// Reduced reactions as (source, target, exact constant) triples.
fn projected_triples(report: &Value) -> Vec<(String, String, String)> {
    report["projection"]["reactions"]
        .as_array()
        .expect("projection.reactions array")
        .iter()
        .map(|r| {
            (
                r["source"].as_str().unwrap().to_string(),
                r["target"].as_str().unwrap().to_string(),
                r["kappa_bar_exact"].as_str().unwrap_or("<float>").to_string(),
            )
        })
        .collect()
}

#[test]
fn criterion_1_abc_projection_is_exact() {
    // Three-species model with kappa = (1, 1, 0.25, 0.25, 1.5, 2): the
    // reduction must merge r3/r5 into A -> 0 at 3*0.25 + 1.5 = 9/4, map r4
    // to 0 -> A at 27*0.25 = 27/4, keep r6 as B -> 0 at 2, and report the
    // frozen high-side limits s = (3, 27, 1, 1) for r3, r4, r5, r6.
    let path = network_path("abc.net");
    let start = Instant::now();
    let report = run_mssr(&["reduce", path.to_str().unwrap(), "--N", "1000"]);
    let elapsed = start.elapsed();

    let triples = projected_triples(&report);
    let expected = [("A", "0", "9/4"), ("0", "A", "27/4"), ("B", "0", "2")];
    let constants_ok = triples.len() == expected.len()
        && triples
            .iter()
            .zip(expected.iter())
            .all(|(got, want)| got.0 == want.0 && got.1 == want.1 && got.2 == want.2);

    let mut s_values: Vec<(String, String)> = Vec::new();
    for r in report["projection"]["reactions"].as_array().unwrap() {
        for c in r["contributions"].as_array().unwrap() {
            s_values.push((
                c["from"].as_str().unwrap().to_string(),
                c["s_exact"].as_str().unwrap_or("<float>").to_string(),
            ));
        }
    }
    s_values.sort();
    let s_ok = s_values
        == [
            ("r3".to_string(), "3".to_string()),
            ("r4".to_string(), "27".to_string()),
            ("r5".to_string(), "1".to_string()),
            ("r6".to_string(), "1".to_string()),
        ];
    let fast = elapsed < Duration::from_secs(1);

    let pass = constants_ok && s_ok && fast;
    let detail = format!(
        "reduced constants {:?}, s-values {:?}, took {:?} (< 1 s)",
        triples.iter().map(|t| t.2.as_str()).collect::<Vec<_>>(),
        s_values.iter().map(|s| s.1.as_str()).collect::<Vec<_>>(),
        elapsed
    );
    verdict(1, "three-species projection exact", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_2_futile_classification_and_reduction() {
    // Futile cycle: intensity order theta0 = 1, exactly r7 and r8 negligible,
    // and the reduction collapses to S1 <-> 0 <-> S4 with constants
    // (1, 11/5, 1, 11/10); the catalyst loop r9/r10 projects to self-loops
    // and is dropped.
    let path = network_path("futile.net");
    let start = Instant::now();
    let report = run_mssr(&["reduce", path.to_str().unwrap(), "--N", "10000"]);
    let elapsed = start.elapsed();

    let theta0_ok = report["theta0"] == "1";
    let negligible: Vec<&str> = report["reactions"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["class"] == "negligible")
        .map(|r| r["id"].as_str().unwrap())
        .collect();
    let class_ok = negligible == ["r7", "r8"]
        && report["reactions"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|r| r["class"] == "dominant")
            .count()
            == 8;

    let triples = projected_triples(&report);
    let expected =
        [("S1", "0", "1"), ("0", "S1", "11/5"), ("S4", "0", "1"), ("0", "S4", "11/10")];
    let constants_ok = triples.len() == expected.len()
        && triples
            .iter()
            .zip(expected.iter())
            .all(|(got, want)| got.0 == want.0 && got.1 == want.1 && got.2 == want.2);
    let dropped_ok = report["projection"]["dropped"] == serde_json::json!(["r9", "r10"]);
    let fast = elapsed < Duration::from_secs(1);

    let pass = theta0_ok && class_ok && constants_ok && dropped_ok && fast;
    let detail = format!(
        "theta0 {}, negligible {:?}, reduced constants {:?}, dropped {}, took {:?} (< 1 s)",
        report["theta0"],
        negligible,
        triples.iter().map(|t| t.2.as_str()).collect::<Vec<_>>(),
        report["projection"]["dropped"],
        elapsed
    );
    verdict(2, "futile cycle classification", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_3_futile_distribution_agreement() {
    // Original futile cycle at N = 1e4, horizon 100, 1e5 trajectories: the
    // S1 marginal must sit within TV 0.02 of the reduced birth-death law
    // (birth 11/5, unit per-copy death, started at 2).
    let net = parse_network(bundled::FUTILE).unwrap();
    let sys = ScaledSystem::new(&net, 1.0e4).unwrap();
    let cfg = SimConfig::new(100.0, 100_000, 7);
    let ens = simulate_original(&sys, &cfg).unwrap();
    let dims = ens.dims(&["S1"]).unwrap();
    let empirical = ens.distribution(&dims);

    let reference = mssr_core::cme::birth_death_reference(2.2, 1.0, 2, 100.0).unwrap();
    let tv = total_variation(&empirical, &reference);

    let pass = tv <= 0.02 && ens.capped_count() == 0;
    let detail = format!(
        "tv(S1) = {tv:.4} (<= 0.02) at N = 1e4, t = 100, {} samples, seed {}",
        cfg.samples, cfg.seed
    );
    verdict(3, "futile distribution agreement", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_4_yeast_distribution_agreement() {
    // Original G protein cycle at N = 1e3, horizon 10, 1e5 trajectories: the
    // Gbg marginal must sit within TV 0.03 of the reduced master equation
    // solved exactly on its eleven-state conserved slice.
    let rnet = reduced_network(bundled::YEAST);
    let init = integer_init(&rnet);
    let space = enumerate_states(&rnet, &init, Truncation::Auto).unwrap();
    assert_eq!(space.len(), 11, "G + Gbg = 10 with L pinned");
    let gen = build_generator(&rnet, &space);
    let p0 = space.point_mass(&init).unwrap();
    let sol = transient_solve(&gen, &p0, 10.0, DEFAULT_SERIES_TOL).unwrap();
    let gdim = space.species.iter().position(|s| s == "Gbg").unwrap();
    let reference = space.distribution(&sol.p).marginal(&[gdim]);

    let net = parse_network(bundled::YEAST).unwrap();
    let sys = ScaledSystem::new(&net, 1.0e3).unwrap();
    let cfg = SimConfig::new(10.0, 100_000, 7);
    let ens = simulate_original(&sys, &cfg).unwrap();
    let dims = ens.dims(&["Gbg"]).unwrap();
    let tv = total_variation(&ens.distribution(&dims), &reference);

    let pass = tv <= 0.03 && ens.capped_count() == 0;
    let detail = format!(
        "tv(Gbg) = {tv:.4} (<= 0.03) at N = 1e3, t = 10, {} samples, seed {}",
        cfg.samples, cfg.seed
    );
    verdict(4, "yeast distribution agreement", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_5_convergence_trend() {
    // Futile sweep at N in {1e2, 1e3, 1e4}, event {S1 in {3,4}}, t = 100,
    // 1e5 samples per point: d(N) must decrease with every step exceeding
    // twice the combined standard error, and the fitted decay exponent must
    // land in (0, 1). Distances below their own standard error are excluded
    // from the fit; fewer than three survivors leave no fit and fail here.
    let net = parse_network(bundled::FUTILE).unwrap();
    let cfg = SweepConfig {
        event: EventSet::parse("S1 in {3,4}").unwrap(),
        t: 100.0,
        grid: vec![1.0e2, 1.0e3, 1.0e4],
        samples: 100_000,
        base_seed: 7,
        self_check: false,
    };
    let report = convergence_sweep(&net, &cfg).unwrap();

    let distances: Vec<String> =
        report.points.iter().map(|p| format!("{:.3e}", p.distance)).collect();
    let errors: Vec<String> =
        report.points.iter().map(|p| format!("{:.3e}", p.stderr)).collect();
    let fit_ok = report.fit.as_ref().is_some_and(|f| f.exponent > 0.0 && f.exponent < 1.0);
    let fit_text = match &report.fit {
        Some(f) => format!("nu-hat = {:.3} (r^2 = {:.3})", f.exponent, f.r_squared),
        None => format!("no fit ({})", report.fit_note.as_deref().unwrap_or("")),
    };

    let pass = report.decreasing_beyond_2se && fit_ok;
    let detail = format!(
        "d = [{}], stderr = [{}], p_ref = {:.4}; decreasing beyond 2*stderr = {}, {}",
        distances.join(", "),
        errors.join(", "),
        report.p_ref,
        report.decreasing_beyond_2se,
        fit_text
    );
    verdict(5, "convergence trend", pass, &detail);
    assert!(
        pass,
        "each d(N) step must clear 2x its combined standard error and the fitted \
         exponent must lie in (0, 1); got {detail}"
    );
}

#[test]
fn criterion_6_master_equation_cross_validation() {
    // Two solver cross-checks on reduced networks. (a) The uniformization
    // series must match a dense matrix exponential within TV 1e-8 on the
    // eleven-state yeast slice at t in {1, 10}. (b) The stationary solve for
    // the reduced futile cycle on box 40 must match the detailed-balance
    // product Poisson(11/5) x Poisson(11/10) within TV 1e-6.
    let rnet = reduced_network(bundled::YEAST);
    let init = integer_init(&rnet);
    let space = enumerate_states(&rnet, &init, Truncation::Auto).unwrap();
    let gen = build_generator(&rnet, &space);
    let p0 = space.point_mass(&init).unwrap();
    let dense = gen.dense();
    let q = DMatrix::from_fn(space.len(), space.len(), |i, j| dense[i][j]);

    let mut transient_tv = Vec::new();
    for t in [1.0, 10.0] {
        let sol = transient_solve(&gen, &p0, t, DEFAULT_SERIES_TOL).unwrap();
        let expm = (q.clone() * t).exp() * DVector::from_column_slice(&p0);
        transient_tv.push(total_variation(
            &space.distribution(&sol.p),
            &space.distribution(expm.as_slice()),
        ));
    }
    let transient_ok = transient_tv.iter().all(|&tv| tv <= 1e-8);

    let rfutile = reduced_network(bundled::FUTILE);
    let finit = integer_init(&rfutile);
    let fspace = enumerate_states(&rfutile, &finit, Truncation::Box(40)).unwrap();
    let fgen = build_generator(&rfutile, &fspace);
    let sol = stationary_solve(&fgen, DEFAULT_STATIONARY_TOL).unwrap();
    let s1 = fspace.species.iter().position(|s| s == "S1").unwrap();
    let s4 = fspace.species.iter().position(|s| s == "S4").unwrap();
    let poi_s1 = Poisson::new(2.2).unwrap();
    let poi_s4 = Poisson::new(1.1).unwrap();
    let product = DistributionVector::from_weighted(fspace.states.iter().map(|s| {
        (s.clone(), poi_s1.pmf(s[s1] as u64) * poi_s4.pmf(s[s4] as u64))
    }));
    let stationary_tv = total_variation(&fspace.distribution(&sol.pi), &product);
    let stationary_ok = stationary_tv <= 1e-6;

    let pass = transient_ok && stationary_ok;
    let detail = format!(
        "transient tv = [{:.2e}, {:.2e}] (<= 1e-8), stationary tv = {:.2e} (<= 1e-6)",
        transient_tv[0], transient_tv[1], stationary_tv
    );
    verdict(6, "master equation cross-validation", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_7_coupling_bound_harness() {
    // Property harness on the futile and predator-prey networks: the
    // intensity-gap bounds on 1e4 random compact-set states at N in
    // {1e3, 1e4} with rho = 0.3, the jump second-moment bound
    // E[J^2] <= c * max(1, t^2) at t in {1, 10, 100} with c fitted at t = 1
    // under a safety factor of 2, and exit probability nonincreasing in N
    // over {1e2, 1e3, 1e4}.
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, text) in [("futile", bundled::FUTILE), ("lotka", bundled::LOTKA)] {
        let net = parse_network(text).unwrap();

        let gap = intensity_gap_check(&net, &IntensityGapConfig::default()).unwrap();
        let moments = jump_moment_check(&net, &JumpMomentConfig::default()).unwrap();
        let exit = exit_probability_check(&net, &ExitConfig::default()).unwrap();

        pass &= gap.all_hold && moments.all_hold && exit.nonincreasing;
        let spread: Vec<String> =
            exit.points.iter().map(|p| format!("{:.3}", p.p_hat)).collect();
        parts.push(format!(
            "{name}: gap {} (c_total {:.2}), moments {} (c_fit {:.2}), exit {} [{}]",
            if gap.all_hold { "ok" } else { "violated" },
            gap.c_total,
            if moments.all_hold { "ok" } else { "violated" },
            moments.c_fit,
            if exit.nonincreasing { "ok" } else { "violated" },
            spread.join(", ")
        ));
    }

    let detail = parts.join("; ");
    verdict(7, "coupling bound harness", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_8_p53_stationary_reference() {
    // Reduced p53 module: the stationary P marginal must have mean within
    // 2% of 2.4 and sit within TV 0.01 of a Poisson law with the measured
    // mean, evaluated on the box-40 truncation.
    let rnet = reduced_network(bundled::P53);
    let init = integer_init(&rnet);
    let space = enumerate_states(&rnet, &init, Truncation::Box(40)).unwrap();
    let gen = build_generator(&rnet, &space);
    let sol = stationary_solve(&gen, DEFAULT_STATIONARY_TOL).unwrap();

    let pdim = space.species.iter().position(|s| s == "P").unwrap();
    let marginal = space.distribution(&sol.pi).marginal(&[pdim]);
    let mean = marginal.mean(0);
    let rel_err = (mean - 2.4f64).abs() / 2.4;

    let poi = Poisson::new(mean).unwrap();
    let reference = DistributionVector::from_weighted(
        (0..=40i64).map(|k| (vec![k], poi.pmf(k as u64))),
    );
    let tv = total_variation(&marginal, &reference);

    let pass = rel_err <= 0.02 && tv <= 0.01;
    let detail = format!(
        "stationary mean(P) = {mean:.4} ({:.2}% from 2.4, <= 2%), tv to Poisson(mean) = \
         {tv:.2e} (<= 0.01)",
        rel_err * 100.0
    );
    verdict(8, "p53 stationary reference", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_9_deterministic_reports() {
    // Identical seeds must reproduce byte-identical JSON, including every
    // Monte Carlo estimate. Exercised end to end on the two report paths
    // with the most internal state: a convergence sweep and a reduction.
    let dir = tempfile::tempdir().unwrap();
    let futile = network_path("futile.net");
    let sweep_args = |out: &str| {
        vec![
            "converge".to_string(),
            futile.to_str().unwrap().to_string(),
            "--event".to_string(),
            "S1 in {3,4}".to_string(),
            "--t".to_string(),
            "10".to_string(),
            "--grid".to_string(),
            "100,1000".to_string(),
            "--samples".to_string(),
            "2000".to_string(),
            "--seed".to_string(),
            "7".to_string(),
            "--out".to_string(),
            out.to_string(),
        ]
    };

    let mut blobs = Vec::new();
    for name in ["a.json", "b.json"] {
        let out = dir.path().join(name);
        let args = sweep_args(out.to_str().unwrap());
        let arg_refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let status = Command::new(env!("CARGO_BIN_EXE_mssr"))
            .args(&arg_refs)
            .status()
            .expect("failed to spawn mssr");
        assert!(status.success());
        blobs.push(std::fs::read(&out).unwrap());
    }
    let sweep_identical = blobs[0] == blobs[1];

    let abc = network_path("abc.net");
    let reduce_raw = || {
        let out = Command::new(env!("CARGO_BIN_EXE_mssr"))
            .args(["reduce", abc.to_str().unwrap(), "--N", "1000"])
            .output()
            .expect("failed to spawn mssr");
        assert!(out.status.success());
        out.stdout
    };
    let reduce_identical = reduce_raw() == reduce_raw();

    let pass = sweep_identical && reduce_identical;
    let detail = format!(
        "sweep reports byte-identical = {sweep_identical} ({} bytes), reduce reports \
         identical = {reduce_identical}",
        blobs[0].len()
    );
    verdict(9, "deterministic reports", pass, &detail);
    assert!(pass, "{detail}");
}
