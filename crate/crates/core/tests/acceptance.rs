//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary so
//! the lines always show up in the test log.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;

use dmlms::anc::{run_anc, AncNetwork};
use dmlms::config::{ExperimentConfig, Mode};
use dmlms::dmlms::{combine, run_estimation, Cadence, Estimator, EstimationConfig, NetworkState, StepSizes, Strategy};
use dmlms::harness;
use dmlms::metrics::{smooth, steady_state, to_db, DEFAULT_DB_FLOOR};
use dmlms::multirate::RateSchedule;
use dmlms::plant::{filtered_reference_low, fir_filter, plant_output, AcousticPaths, TwoRatePlant};
use dmlms::seeding::substream;
use dmlms::topology::{metropolis_weights, random_connected_topology, validate_combination, CombinationMatrix, Topology};

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn db(v: f64) -> f64 {
    10.0 * v.max(DEFAULT_DB_FLOOR).log10()
}

fn gauss(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn brute_fir(h: &[f64], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for n in 0..x.len() {
        for i in 0..h.len() {
            if n >= i {
                y[n] += h[i] * x[n - i];
            }
        }
    }
    y
}

fn lms_degeneracy() -> Outcome {
    let mut rng = substream(101, &[]);
    let steps = 1000;
    let taps = 5;
    let mu = 0.05;
    let x = gauss(&mut rng, steps);
    let d: Vec<f64> = brute_fir(&[0.7, -0.4, 0.2, 0.1, -0.05], &x)
        .iter()
        .map(|v| v + 0.01 * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let mut w = vec![0.0; taps];
    let mut net = NetworkState::new(
        Topology::single(),
        CombinationMatrix::identity(1),
        RateSchedule::new(1, 0).unwrap(),
        StepSizes::new(mu, 0.0).unwrap(),
        (taps, 4),
        Cadence::Sample,
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for n in 0..steps {
        let reg: Vec<f64> = (0..taps).map(|i| if n >= i { x[n - i] } else { 0.0 }).collect();
        let e = d[n] - reg.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..taps {
            w[i] += mu * e * reg[i];
        }
        net.advance(n, &[x[n]], &[0.0]);
        net.dmlms_iterate(&[d[n]]);
        for (a, b) in net.nodes[0].w_hat.iter().zip(&w) {
            worst = worst.max((a - b).abs());
        }
        worst = net.nodes[0].h_hat.iter().fold(worst, |m, h| m.max(h.abs()));
    }
    outcome(worst <= 1e-12, format!("max deviation from textbook LMS over {steps} steps = {worst:e} (limit 1e-12)"))
}

fn noiseless_identification() -> Outcome {
    let mut cfg = ExperimentConfig::defaults(Mode::Estimate);
    cfg.trials = 10;
    cfg.iterations = 10_000;
    cfg.observation_noise = false;
    let setup = cfg.network_setup().unwrap();
    let series = run_estimation(&cfg.estimation_config().unwrap(), &setup, Strategy::Diffusion).unwrap();
    let curve = series.to_db(DEFAULT_DB_FLOOR);
    let below = curve.iter().position(|&v| v < -60.0);
    let final_db = db(series.steady_state());
    outcome(
        final_db <= -50.0 && below.is_some(),
        format!(
            "steady-state EMSE {final_db:.1} dB (target -60 dB, tolerance 10 dB), first below -60 dB at n = {}",
            below.map_or("never".to_string(), |n| n.to_string())
        ),
    )
}

fn centralized_diffusion_noncooperative() -> Outcome {
    let cfg = ExperimentConfig::defaults(Mode::Estimate);
    let setup = cfg.network_setup().unwrap();
    let est = cfg.estimation_config().unwrap();
    let ss = |s: Strategy| db(run_estimation(&est, &setup, s).unwrap().steady_state());
    let (c, d, n) = (ss(Strategy::Centralized), ss(Strategy::Diffusion), ss(Strategy::NonCooperative));
    outcome(
        c <= d - 0.5 && d <= n - 0.5,
        format!("steady-state EMSE over {} trials: centralized {c:.2} dB, dmlms {d:.2} dB, non-cooperative {n:.2} dB (margin 0.5 dB)", cfg.trials),
    )
}

fn step_size_sweep() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::defaults(Mode::Sweep);
    cfg.out_dir = dir.path().to_path_buf();
    cfg.plot = false;
    let out = harness::run(&cfg).unwrap();
    let points = &out.sweep;
    let at = |mu1: f64, mu2: f64| points.iter().find(|p| p.mu1 == mu1 && p.mu2 == mu2).unwrap();

    let mut monotone = true;
    let mut pairs = 0;
    for &mu2 in &cfg.mu2_grid {
        let row: Vec<_> = cfg.mu1_grid.iter().map(|&mu1| at(mu1, mu2)).filter(|p| p.stable).collect();
        for w in row.windows(2) {
            pairs += 1;
            if w[1].convergence_iteration > w[0].convergence_iteration {
                monotone = false;
            }
        }
    }
    let mut growth = None;
    for (i, &mu1) in cfg.mu1_grid.iter().enumerate() {
        for (j, &mu2) in cfg.mu2_grid.iter().enumerate() {
            let p = at(mu1, mu2);
            let smaller = [
                (i > 0).then(|| at(cfg.mu1_grid[i - 1], mu2)),
                (j > 0).then(|| at(mu1, cfg.mu2_grid[j - 1])),
            ];
            for q in smaller.into_iter().flatten() {
                if growth.is_none() && p.steady_state_db.is_finite() && p.steady_state_db > q.steady_state_db {
                    growth = Some(format!(
                        "({},{}) {:.1} dB > ({},{}) {:.1} dB",
                        p.mu1, p.mu2, p.steady_state_db, q.mu1, q.mu2, q.steady_state_db
                    ));
                }
            }
        }
    }
    let stable: Vec<String> = points.iter().filter(|p| p.stable).map(|p| format!("({},{})", p.mu1, p.mu2)).collect();
    outcome(
        monotone && pairs > 0 && growth.is_some(),
        format!(
            "convergence monotone in mu1 over {pairs} stable neighbor pairs: {monotone}; misadjustment growth: {}; stable points {}",
            growth.unwrap_or_else(|| "none".into()),
            stable.join(" ")
        ),
    )
}

fn filtered_x_reduction() -> Outcome {
    let schedule = RateSchedule::new(2, 0).unwrap();
    let steps = StepSizes::new(0.05, 0.05).unwrap();
    let t = random_connected_topology(&mut substream(55, &[]), 8, 3.0).unwrap();
    let c = metropolis_weights(&t);
    let mut anc = AncNetwork::new(t.clone(), c.clone(), schedule, steps, (6, 3), &[1.0], Cadence::Sample).unwrap();
    let mut est = NetworkState::new(t, c, schedule, steps, (6, 3), Cadence::Sample).unwrap();
    let mut rng = substream(56, &[]);
    let mut worst: f64 = 0.0;
    for n in 0..2000 {
        let x = gauss(&mut rng, 8);
        anc.step(n, &x, &x);
        est.advance(n, &x, &x);
        est.dmlms_iterate(&x);
        for (a, b) in anc.nodes.iter().zip(&est.nodes) {
            for (p, q) in a.base.w_hat.iter().zip(&b.w_hat).chain(a.base.h_hat.iter().zip(&b.h_hat)) {
                worst = worst.max((p - q).abs());
            }
        }
    }

    // Whole runs: unit paths against identifying w = [1, 0, ...], h = 0.
    let mut cfg = ExperimentConfig::defaults(Mode::Anc);
    cfg.trials = 4;
    cfg.iterations = 1000;
    cfg.m1 = 6;
    cfg.m2 = 3;
    let setup = cfg.network_setup().unwrap();
    let mut anc_cfg = cfg.anc_config().unwrap();
    anc_cfg.fixed_paths = Some(AcousticPaths::unit_impulses());
    let mut w = vec![0.0; 6];
    w[0] = 1.0;
    let est_cfg = EstimationConfig {
        observation_noise: false,
        fixed_plant: Some(TwoRatePlant::new(w, vec![0.0; 3]).unwrap()),
        ..cfg.estimation_config().unwrap()
    };
    let nr = run_anc(&anc_cfg, &setup).unwrap().nr;
    let emse = run_estimation(&est_cfg, &setup, Strategy::Diffusion).unwrap();
    let curve_gap = nr.values.iter().zip(&emse.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    outcome(
        worst <= 1e-12 && curve_gap <= 1e-12,
        format!("max weight gap {worst:e}, max NR vs EMSE curve gap {curve_gap:e} (limit 1e-12)"),
    )
}

fn anc_learning_curve() -> Outcome {
    let cfg = ExperimentConfig::defaults(Mode::Anc);
    let setup = cfg.network_setup().unwrap();
    let out = run_anc(&cfg.anc_config().unwrap(), &setup).unwrap();
    let smoothed = to_db(&smooth(&out.nr.values, 200).unwrap(), DEFAULT_DB_FLOOR);
    let mut running_min = f64::INFINITY;
    let mut rise: f64 = 0.0;
    let mut step_rise: f64 = 0.0;
    for (i, &v) in smoothed.iter().enumerate().skip(500) {
        running_min = running_min.min(v);
        rise = rise.max(v - running_min);
        if i > 500 {
            step_rise = step_rise.max(v - smoothed[i - 1]);
        }
    }
    let uncontrolled = db(out.disturbance.values.iter().sum::<f64>() / out.disturbance.len() as f64);
    let final_nr = db(steady_state(&out.nr.values));
    let reduction = uncontrolled - final_nr;
    outcome(
        rise <= 0.5 && reduction >= 5.0,
        format!(
            "uncontrolled {uncontrolled:.2} dB, final NR {final_nr:.2} dB, reduction {reduction:.2} dB (target 10 dB, tolerance 5 dB); \
             smoothed curve after n=500 rises at most {rise:.3} dB above its running minimum (limit 0.5 dB), largest single-step rise {step_rise:.4} dB"
        ),
    )
}

fn combination_weights() -> Outcome {
    let mut rng = substream(77, &[]);
    let mut failures = Vec::new();
    let mut worst_sum: f64 = 0.0;
    for case in 0..1000 {
        let n = rng.random_range(1..=30usize);
        let lo = if n == 1 { 0.0 } else { 2.0 * (n - 1) as f64 / n as f64 };
        let hi = (n - 1) as f64;
        let degree = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let t = random_connected_topology(&mut rng, n, degree).unwrap();
        let c = metropolis_weights(&t);
        if let Err(v) = validate_combination(&c, &t) {
            failures.push(format!("case {case}: {}", v[0]));
            continue;
        }
        for k in 0..n {
            worst_sum = worst_sum.max((c.row_sum(k) - 1.0).abs()).max((c.column_sum(k) - 1.0).abs());
            for l in 0..n {
                if c.get(l, k) != c.get(k, l) {
                    failures.push(format!("case {case}: asymmetric at ({l},{k})"));
                }
            }
        }
        let value: Vec<f64> = gauss(&mut rng, 3);
        let same = vec![value.clone(); n];
        for k in 0..n {
            let (w, h) = combine(&same, &same, &c, &t, k);
            if w != value || h != value {
                failures.push(format!("case {case}: consensus moved at node {k}"));
            }
        }
    }
    outcome(
        failures.is_empty() && worst_sum <= 1e-12,
        format!(
            "1000 graphs: max |row or column sum - 1| = {worst_sum:e} (limit 1e-12), failures {}",
            if failures.is_empty() { "none".to_string() } else { failures[..failures.len().min(3)].join("; ") }
        ),
    )
}

fn cli_run(dir: &Path, extra: &[&str]) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_dmlms"))
        .args(["estimate", "--seed", "7", "--no-plot"])
        .args(extra)
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    std::fs::read(dir.join(harness::CURVE_FILE)).unwrap()
}

fn determinism() -> Outcome {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let a = cli_run(dirs[0].path(), &[]);
    let b = cli_run(dirs[1].path(), &[]);
    let serial = cli_run(dirs[2].path(), &["--serial"]);
    outcome(
        a == b && a == serial && !a.is_empty(),
        format!("repeat run identical: {}, serial equals parallel: {} ({} bytes)", a == b, a == serial, a.len()),
    )
}

fn oracles() -> Outcome {
    let mut rng = substream(99, &[]);
    let (mut fir_gap, mut plant_gap, mut low_gap): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..100 {
        let h = { let len = rng.random_range(1..12); gauss(&mut rng, len) };
        let x = { let len = rng.random_range(0..80); gauss(&mut rng, len) };
        let fast = fir_filter(&h, &x).unwrap();
        for (a, b) in fast.iter().zip(brute_fir(&h, &x)) {
            fir_gap = fir_gap.max((a - b).abs());
        }
    }
    for _ in 0..100 {
        let (m1, m2) = (rng.random_range(1..10), rng.random_range(1..10));
        let plant = TwoRatePlant::new(gauss(&mut rng, m1), gauss(&mut rng, m2)).unwrap();
        let (xv, uv) = (gauss(&mut rng, m1), gauss(&mut rng, m2));
        let mut z = 0.0;
        for i in 0..m1 {
            z += plant.w_true()[i] * xv[i];
        }
        for i in 0..m2 {
            z += plant.h_true()[i] * uv[i];
        }
        plant_gap = plant_gap.max((plant_output(&plant, &xv, &uv).unwrap() - z).abs());
    }
    for _ in 0..100 {
        let delta = rng.random_range(1..5usize);
        let offset = rng.random_range(0..delta);
        let schedule = RateSchedule::new(delta, offset).unwrap();
        let s = { let len = rng.random_range(1..10); gauss(&mut rng, len) };
        let u = { let len = rng.random_range(1..40); gauss(&mut rng, len) };
        let paths = AcousticPaths::new(vec![1.0], s.clone()).unwrap();
        let fast = filtered_reference_low(&u, &paths, schedule).unwrap();
        // u'(m) = sum_i s_i * held(delta*m + offset - i), held(n) = u(floor((n - offset) / delta)).
        for m in 0..u.len() {
            let n = delta * m + offset;
            let mut acc = 0.0;
            for (i, si) in s.iter().enumerate() {
                if n >= i && n - i >= offset {
                    acc += si * u[(n - i - offset) / delta];
                }
            }
            low_gap = low_gap.max((fast[m] - acc).abs());
        }
    }
    outcome(
        fir_gap <= 1e-12 && plant_gap <= 1e-12 && low_gap <= 1e-12,
        format!("100 cases each: fir_filter {fir_gap:e}, plant_output {plant_gap:e}, filtered_reference_low {low_gap:e} (limit 1e-12)"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1 lms degeneracy", lms_degeneracy, Duration::from_secs(1)),
        ("2 noiseless identification", noiseless_identification, Duration::from_secs(10)),
        ("3 centralized <= dmlms <= non-cooperative", centralized_diffusion_noncooperative, Duration::from_secs(120)),
        ("4 step-size sweep", step_size_sweep, Duration::from_secs(300)),
        ("5 filtered-x reduction to dmlms", filtered_x_reduction, Duration::from_secs(5)),
        ("6 anc learning curve", anc_learning_curve, Duration::from_secs(120)),
        ("7 combination weights", combination_weights, Duration::from_secs(60)),
        ("8 determinism", determinism, Duration::from_secs(120)),
        ("9 convolution and plant oracles", oracles, Duration::from_secs(10)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let pass = result.pass && elapsed <= budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} [{:.2} s, budget {} s]",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
