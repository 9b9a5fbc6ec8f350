//! Acceptance suite: one line per criterion, `PASS` or `FAIL`; the process
//! exits nonzero if any criterion fails. Criteria run sequentially so the
//! runtime limits are measured without contention.

use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use bias_lab_core::certify::{kkt_residual_bridge, l1_fourier_max_margin, l2_kkt_check, l2_max_margin};
use bias_lab_core::experiment::{self, CellSummary, ExperimentConfig, Summary};
use bias_lab_core::models::{self, ArchKind, Architecture, NetworkParams};
use bias_lab_core::rng::SplitMix64;
use bias_lab_core::spectral::cosine;
use bias_lab_core::training::{self, exp_loss, loss_grad_w};
use bias_lab_core::{datagen, Dataset, GenKind, GenSpec, Predictor};
use serde_json::json;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

// ---------------------------------------------------------------- oracles

/// Naive unitary DFT on (re, im) pairs.
fn dft_oracle(x: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let d = x.len();
    let s = 1.0 / (d as f64).sqrt();
    (0..d)
        .map(|k| {
            x.iter().enumerate().fold((0.0, 0.0), |(re, im), (p, &(a, b))| {
                let angle = -2.0 * PI * (p * k % d) as f64 / d as f64;
                let (sin, cos) = angle.sin_cos();
                (re + s * (a * cos - b * sin), im + s * (a * sin + b * cos))
            })
        })
        .collect()
}

fn real(x: &[f64]) -> Vec<(f64, f64)> {
    x.iter().map(|&v| (v, 0.0)).collect()
}

fn central_difference(params: &NetworkParams, data: &Dataset) -> Vec<f64> {
    let flat = params.flatten();
    let loss = |v: &[f64]| exp_loss(&models::predictor(&params.with_flat(v)).unwrap(), data).unwrap();
    let mut probe = flat.clone();
    (0..flat.len())
        .map(|i| {
            let h = 1e-5 * flat[i].abs().max(1.0);
            probe[i] = flat[i] + h;
            let plus = loss(&probe);
            probe[i] = flat[i] - h;
            let minus = loss(&probe);
            probe[i] = flat[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Smallest `penalty(v) / min_margin(v)^q` over `angles` unit directions in
/// the plane: the value of `min penalty(w)` subject to unit margins when the
/// penalty is `q`-homogeneous.
fn grid_oracle(data: &Dataset, angles: usize, q: i32, penalty: impl Fn(&[f64]) -> f64) -> f64 {
    (0..angles)
        .filter_map(|k| {
            let t = 2.0 * PI * k as f64 / angles as f64;
            let v = [t.cos(), t.sin()];
            let m = data.min_margin(&v).unwrap();
            (m > 0.0).then(|| penalty(&v) / m.powi(q))
        })
        .fold(f64::INFINITY, f64::min)
}

// ------------------------------------------------------------- experiments

fn run_experiment(config: serde_json::Value, out: &Path) -> (Summary, Duration) {
    let mut config = config;
    config["output_dir"] = json!(out);
    let config = ExperimentConfig::from_json(config).expect("valid config");
    let start = Instant::now();
    let summary = experiment::run(&config).expect("experiment runs");
    (summary, start.elapsed())
}

fn train_config(max_iters: usize, stride: usize) -> serde_json::Value {
    json!({
        "step_policy": { "kind": "loss-adaptive", "eta": 0.01 },
        "init_scale": 0.1, "seed": 1, "max_iters": max_iters,
        "direction_tol": 0.0, "trace_stride": stride
    })
}

fn gaussian_gen() -> serde_json::Value {
    json!({ "dim": 6, "n": 12, "seed": 3, "kind": { "type": "gaussian-separable", "margin_gap": 0.3 } })
}

fn fourier_gen() -> serde_json::Value {
    json!({ "dim": 8, "n": 16, "seed": 7, "kind": { "type": "fourier-sparse", "k_active": 2, "margin_gap": 0.3 } })
}

/// Runs shared between criteria.
struct Runs {
    fcn: Vec<(CellSummary, Duration)>,
    diag: Summary,
    conv2: (Summary, Duration),
    conv3: (Summary, Duration),
}

fn shared_runs(root: &Path) -> Runs {
    let fcn = [1usize, 2, 3]
        .iter()
        .map(|&depth| {
            let (s, t) = run_experiment(
                json!({
                    "experiment": "fcn-depth-invariance", "gen": gaussian_gen(),
                    "train": train_config(1_000_000, 10_000), "depths": [depth]
                }),
                &root.join(format!("fcn{depth}")),
            );
            (s.cells[0].clone(), t)
        })
        .collect();
    let (diag, _) = run_experiment(
        json!({
            "experiment": "diag-depth-bias", "gen": gaussian_gen(),
            "train": train_config(1_000_000, 10_000), "depths": [2, 3]
        }),
        &root.join("diag"),
    );
    let conv = |experiment: &str, depth: usize, dir: &str| {
        run_experiment(
            json!({
                "experiment": experiment, "gen": fourier_gen(),
                "train": train_config(100_000, 1000), "depths": [depth],
                "thresholds": { "min_cosine": 0.98, "max_solution_cosine": 0.97 }
            }),
            &root.join(dir),
        )
    };
    Runs { fcn, diag, conv2: conv("conv-depth-bias", 2, "conv2"), conv3: conv("kkt-trace", 3, "conv3") }
}

fn fourier_dataset() -> Dataset {
    let spec: GenSpec = serde_json::from_value(fourier_gen()).unwrap();
    datagen::find_distinct_seed(&spec, 0.97, 100).unwrap().1
}

// --------------------------------------------------------------- criteria

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for dim in [1usize, 2, 4, 8, 16] {
        for depth in 1..=4 {
            for seed in 0..50u64 {
                let mut rng = SplitMix64::stream(seed, 1000 + dim as u64 * 10 + depth as u64);
                let layers: Vec<Vec<f64>> = (0..depth).map(|_| rng.normal_vec(dim, 1.0)).collect();
                let w = models::predictor(&NetworkParams::Convolutional(layers.clone())).unwrap().w;
                let lhs = dft_oracle(&real(&w));
                let mut rhs = vec![(1.0, 0.0); dim];
                for layer in &layers {
                    for (r, &(a, b)) in rhs.iter_mut().zip(&dft_oracle(&real(layer))) {
                        *r = (r.0 * a - r.1 * b, r.0 * b + r.1 * a);
                    }
                }
                for (l, r) in lhs.iter().zip(&rhs) {
                    worst = worst.max((l.0 - r.0).abs()).max((l.1 - r.1).abs());
                }
            }
        }
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-10 && within(t, 5.0),
        format!("max defect {worst:.2e} <= 1e-10, {:.2} s < 5 s", t.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let data =
        datagen::generate(&GenSpec { dim: 8, n: 16, seed: 2, kind: GenKind::GaussianSeparable { margin_gap: 0.3 } })
            .unwrap();
    let mut worst: f64 = 0.0;
    for depth in [2, 3] {
        for seed in 0..10 {
            worst = worst.max(experiment::checks::fft_gd_defect(&data, depth, 0.01, 100, seed).unwrap());
        }
    }
    let t = start.elapsed();
    outcome(worst <= 1e-8 && within(t, 5.0), format!("max gap {worst:.2e} <= 1e-8, {:.2} s < 5 s", t.as_secs_f64()))
}

fn criterion_3() -> Outcome {
    let data =
        datagen::generate(&GenSpec { dim: 4, n: 8, seed: 5, kind: GenKind::GaussianSeparable { margin_gap: 0.2 } })
            .unwrap();
    let mut worst: f64 = 0.0;
    for kind in [ArchKind::FullyConnected, ArchKind::Diagonal, ArchKind::Convolutional] {
        let arch = Architecture::new(kind, 4, 3);
        for seed in 0..20 {
            let params = models::init_params(&arch, 0.8, seed).unwrap();
            let g = loss_grad_w(&models::predictor(&params).unwrap(), &data).unwrap();
            let analytic = models::grad_params(&params, &g).unwrap().flatten();
            let numeric = central_difference(&params, &data);
            let err: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale: f64 = numeric.iter().map(|v| v * v).sum::<f64>().sqrt();
            worst = worst.max(err / scale);
        }
    }
    outcome(worst <= 1e-6, format!("max relative error {worst:.2e} <= 1e-6"))
}

fn criterion_4(runs: &Runs) -> Outcome {
    let spec: GenSpec = serde_json::from_value(gaussian_gen()).unwrap();
    let data = datagen::generate(&spec).unwrap();
    let l2 = l2_max_margin(&data, 1e-10);
    let mut passed = l2.is_optimal();
    let mut parts = Vec::new();
    for (cell, t) in &runs.fcn {
        let c = cosine(&cell.direction, &l2.solution.w);
        passed &= c >= 0.99 && within(*t, 60.0);
        parts.push(format!("L{} cos {c:.5} in {:.1} s", cell.depth, t.as_secs_f64()));
    }
    let mut min_pair: f64 = 1.0;
    for (i, (a, _)) in runs.fcn.iter().enumerate() {
        for (b, _) in &runs.fcn[i + 1..] {
            min_pair = min_pair.min(cosine(&a.direction, &b.direction));
        }
    }
    passed &= min_pair >= 0.99;
    outcome(passed, format!("{}; min pairwise cos {min_pair:.5} (>= 0.99, < 60 s per depth)", parts.join(", ")))
}

fn criterion_5(runs: &Runs) -> Outcome {
    let data = fourier_dataset();
    let l2 = l2_max_margin(&data, 1e-10);
    let l1 = l1_fourier_max_margin(&data, 1e-8, 1.0);
    let (summary, t) = &runs.conv2;
    let cell = &summary.cells[0];
    let solutions_cos = cosine(&l2.solution.w, &l1.solution.w);
    let cos_l1 = cosine(&cell.direction, &l1.solution.w);
    let cos_l2 = cosine(&cell.direction, &l2.solution.w);
    let unit = training::normalize_to_unit_margin(&Predictor::new(cell.direction.clone()), &data).unwrap();
    let gap = (unit.fourier_l1() / l1.objective - 1.0).abs();
    let passed = l1.is_optimal()
        && solutions_cos <= 0.97
        && cos_l1 >= 0.98
        && gap <= 0.05
        && cos_l1 > cos_l2
        && within(*t, 120.0);
    outcome(
        passed,
        format!(
            "seed {} (l2/l1f cos {solutions_cos:.4}); cos to l1f {cos_l1:.5} >= 0.98, |w^|_1 gap {:.2}% <= 5%, \
             cos to l2 {cos_l2:.5} < cos to l1f; {:.1} s < 120 s",
            summary.references.distinct_seed.as_ref().map_or(0, |d| d.seed),
            100.0 * gap,
            t.as_secs_f64()
        ),
    )
}

fn criterion_6(runs: &Runs) -> Outcome {
    let (summary, _) = &runs.conv3;
    let cell = &summary.cells[0];
    let (Some(last), Some(early)) = (cell.kkt.last(), cell.kkt.iter().find(|k| k.t >= cell.iterations / 10)) else {
        return outcome(false, "no KKT checkpoints");
    };
    let r_final = last.certificate.equality_residual;
    let r_early = early.certificate.equality_residual;
    let sweep: Vec<f64> = last.sensitivity.iter().map(|(z, _)| *z).collect();
    let has_sweep = [1e-4, 1e-6, 1e-8].iter().all(|z| sweep.contains(z));
    let report: Vec<String> = last.sensitivity.iter().map(|(z, r)| format!("{z:e}: {r:.2e}")).collect();
    outcome(
        r_final <= 0.05 && r_final <= 0.5 * r_early && has_sweep && (last.p - 2.0 / 3.0).abs() < 1e-15,
        format!(
            "final residual {r_final:.2e} <= 0.05 and <= 0.5 x {r_early:.3} (t={}); zero_tol sensitivity [{}]",
            early.t,
            report.join(", ")
        ),
    )
}

fn criterion_7(runs: &Runs) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    let cells = runs.fcn.iter().map(|(c, _)| c).filter(|c| c.depth >= 2).chain(&runs.diag.cells);
    for cell in cells {
        let r = cell.stationarity_residual.unwrap_or(f64::NAN);
        passed &= r <= 0.05;
        parts.push(format!("{}-L{} {r:.4}", cell.architecture.name(), cell.depth));
    }
    outcome(passed && parts.len() == 4, format!("{} (<= 0.05)", parts.join(", ")))
}

fn criterion_8(root: &Path) -> Outcome {
    let (summary, t) = run_experiment(
        json!({
            "experiment": "rp-forms", "gen": { "dim": 8, "n": 12, "seed": 11 }, "depths": [2, 3],
            "rp": { "samples": 20, "perturbations": 100, "oracle_rel_tol": 1e-3, "balanced_tol": 1e-10 }
        }),
        &root.join("rp"),
    );
    let parts: Vec<String> = summary.checks.iter().map(|c| format!("{} {:.1e}", c.name, c.worst)).collect();
    let expected_cases = summary.checks.iter().all(|c| c.cases >= 40);
    outcome(summary.passed && expected_cases, format!("{} ({:.0} s)", parts.join(", "), t.as_secs_f64()))
}

fn criterion_9() -> Outcome {
    let mut worst_l2: f64 = 0.0;
    let mut solved = 0;
    for k in 0..50u64 {
        let dim = 2 + (k % 7) as usize;
        let spec = GenSpec {
            dim,
            n: 2 * dim + (k % 5) as usize,
            seed: 100 + k,
            kind: GenKind::GaussianSeparable { margin_gap: 0.2 },
        };
        let data = datagen::generate(&spec).unwrap();
        let r = l2_max_margin(&data, 1e-10);
        if let Ok(check) = l2_kkt_check(&r.solution.w, &r.multipliers, &data) {
            if r.is_optimal() && check.dual_feasible {
                solved += 1;
                worst_l2 = worst_l2.max(check.stationarity).max(check.primal_violation).max(check.complementary_gap);
            }
        }
    }

    let mut worst_l1: f64 = 0.0;
    let mut l1_ok = true;
    let mut datasets = vec![fourier_dataset()];
    for seed in [1u64, 2, 3] {
        let spec = GenSpec {
            dim: 8,
            n: 16,
            seed,
            kind: GenKind::FourierSparse { k_active: 2, margin_gap: 0.3, frequencies: None },
        };
        datasets.push(datagen::generate(&spec).unwrap());
    }
    for data in &datasets {
        let r = l1_fourier_max_margin(data, 1e-8, 1.0);
        let unit = training::normalize_to_unit_margin(&r.solution, data);
        match unit.and_then(|u| kkt_residual_bridge(&u, data, 1.0, 1e-6, 1e-6)) {
            Ok(c) if r.is_optimal() => {
                worst_l1 = worst_l1.max(c.equality_residual).max(c.inequality_violation);
            }
            _ => l1_ok = false,
        }
    }

    let mut worst_grid: f64 = 0.0;
    for seed in 0..10u64 {
        let spec = GenSpec { dim: 2, n: 6, seed: 40 + seed, kind: GenKind::GaussianSeparable { margin_gap: 0.3 } };
        let data = datagen::generate(&spec).unwrap();
        let l2 = l2_max_margin(&data, 1e-10);
        let l1 = l1_fourier_max_margin(&data, 1e-8, 1.0);
        // |ŵ|_1 = (|w0 + w1| + |w0 − w1|) / √2 in dimension 2
        let g2 = grid_oracle(&data, 200_000, 2, |_| 1.0);
        let g1 = grid_oracle(&data, 200_000, 1, |v| ((v[0] + v[1]).abs() + (v[0] - v[1]).abs()) / 2f64.sqrt());
        worst_grid = worst_grid.max((l2.objective - g2).abs() / g2).max((l1.objective - g1).abs() / g1);
    }
    outcome(
        solved == 50 && worst_l2 <= 1e-8 && l1_ok && worst_l1 <= 1e-6 && worst_grid <= 1e-3,
        format!(
            "l2 KKT gap {worst_l2:.1e} <= 1e-8 on {solved}/50; l1f self-KKT {worst_l1:.1e} <= 1e-6; \
             D=2 grid objective gap {worst_grid:.1e} <= 1e-3"
        ),
    )
}

fn criterion_10(runs: &Runs) -> Outcome {
    let cells = runs.fcn.iter().map(|(c, _)| c).chain(&runs.conv2.0.cells).chain(&runs.conv3.0.cells);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for cell in cells {
        count += 1;
        worst = worst.max(cell.support_residual.unwrap_or(f64::INFINITY));
    }
    outcome(worst <= 0.05 && count == 5, format!("max NNLS residual {worst:.2e} <= 0.05 over {count} runs"))
}

fn report(n: usize, name: &str, o: Outcome, failed: &mut Vec<usize>) {
    println!("{} criterion {n:>2} ({name}): {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    if !o.passed {
        failed.push(n);
    }
}

fn main() -> ExitCode {
    let root = tempfile::tempdir().unwrap();
    let mut failed = Vec::new();
    report(1, "Fourier factorization", criterion_1(), &mut failed);
    report(2, "Fourier-domain gradient descent", criterion_2(), &mut failed);
    report(3, "gradients vs finite differences", criterion_3(), &mut failed);
    let runs = shared_runs(root.path());
    report(4, "fully connected depth invariance", criterion_4(&runs), &mut failed);
    report(5, "depth-2 conv ℓ1-Fourier bias", criterion_5(&runs), &mut failed);
    report(6, "depth-3 conv bridge KKT", criterion_6(&runs), &mut failed);
    report(7, "parameter-space stationarity", criterion_7(&runs), &mut failed);
    report(8, "R_P closed forms", criterion_8(root.path()), &mut failed);
    report(9, "solver cross-certification", criterion_9(), &mut failed);
    report(10, "gradient in support-vector cone", criterion_10(&runs), &mut failed);

    if failed.is_empty() {
        println!("acceptance: all 10 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
