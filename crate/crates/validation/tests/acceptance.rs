//! Acceptance criteria. Runs every criterion, prints one
//! `criterion N PASS|FAIL` line each and exits nonzero if any fails.

use std::fs;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vtr_core::bandit::VarianceProfile;
use vtr_core::hf_ucrl::plan_with;
use vtr_core::mdp::{check_assumptions, make_hard_instance, make_random_tabular};
use vtr_core::regression::{direct_solve, Observation, RegressorState};
use vtr_core::RegretTrace;
use vtr_lab::config::LearnerParams;
use vtr_lab::{load_experiment, run_experiment, run_to_dir, Experiment, ExperimentConfig, Outcome};

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn experiment(json: &str) -> Experiment {
    ExperimentConfig::from_json(json, Path::new("acceptance.json"))
        .unwrap()
        .prepare(Path::new("."))
        .unwrap()
}

fn seeds(n: u64) -> String {
    let v: Vec<String> = (0..n).map(|s| s.to_string()).collect();
    format!("[{}]", v.join(", "))
}

fn mean_final(traces: &[RegretTrace], algorithm: &str) -> f64 {
    let group: Vec<&RegretTrace> = traces.iter().filter(|t| t.algorithm == algorithm).collect();
    group.iter().map(|t| t.total()).sum::<f64>() / group.len() as f64
}

fn mean_at(traces: &[RegretTrace], algorithm: &str, k: usize) -> f64 {
    let group: Vec<&RegretTrace> = traces.iter().filter(|t| t.algorithm == algorithm).collect();
    group.iter().map(|t| t.cumulative_at(k)).sum::<f64>() / group.len() as f64
}

fn criterion_01_regression_oracle() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.gen_range(1..=16);
        let n = rng.gen_range(1..=10_000);
        let lambda = rng.gen_range(0.1..10.0);
        let mut reg = RegressorState::new(d, lambda).unwrap();
        let mut history = Vec::with_capacity(n);
        for _ in 0..n {
            let x = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0)) / (d as f64).sqrt();
            let y = rng.gen_range(-1.0..1.0);
            let w = rng.gen_range(0.01..10.0);
            reg.update(&x, y, w).unwrap();
            history.push(Observation::new(x, y, w));
        }
        let direct = direct_solve(&history, d, lambda).unwrap();
        let err = (reg.estimate() - &direct).norm() / direct.norm().max(f64::MIN_POSITIVE);
        worst = worst.max(err);
    }
    let pass = worst <= 1e-8;
    (
        pass,
        format!("max relative error {worst:.3e} (threshold 1e-8) over 100 histories"),
    )
}

fn criterion_02_planning_oracle() -> (bool, String) {
    let mdp = make_random_tabular(3, 3, 5, 17).unwrap();
    let reg = RegressorState::new(mdp.dim(), 1.0).unwrap();
    let plan = plan_with(&mdp, mdp.theta_star(), &reg, 0.0).unwrap();
    let (_, q) = mdp.value_iteration();
    let worst = plan
        .q
        .iter()
        .flatten()
        .flatten()
        .zip(q.iter().flatten().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let pass = worst <= 1e-10;
    (
        pass,
        format!("max |Q - Q*| = {worst:.3e} (threshold 1e-10)"),
    )
}

fn criterion_03_confidence_coverage() -> (bool, String) {
    let exp = experiment(&format!(
        r#"{{"setting": "bandit",
            "environment": {{"generator": "sphere", "d": 4, "variance": {{"kind": "decaying"}}}},
            "algorithms": ["weighted-oful-plus"], "K": 2000, "seeds": {},
            "overrides": {{"delta": 0.05}}, "diagnostics": true}}"#,
        seeds(200)
    ));
    let out = run_experiment(&exp, jobs()).unwrap();
    let (mut inside, mut total) = (0usize, 0usize);
    for t in &out.traces {
        let norm = t.diagnostic("ellipsoid_norm").unwrap();
        let beta = t.diagnostic("beta").unwrap();
        inside += norm.iter().zip(beta).filter(|(n, b)| n <= b).count();
        total += norm.len();
    }
    let frac = inside as f64 / total as f64;
    let pass = frac >= 0.95;
    (
        pass,
        format!("coverage {frac:.4} over {total} (run, k) pairs (threshold 0.95)"),
    )
}

fn criterion_04_variance_awareness() -> (bool, String) {
    let k = 16384u64;
    let profile = VarianceProfile::bursty();
    let total_var = profile.total_variance(k);
    let exp = experiment(&format!(
        r#"{{"setting": "bandit",
            "environment": {{"generator": "sphere", "d": 8, "variance": {{"kind": "bursty"}}}},
            "algorithms": ["weighted-oful-plus", "oful"], "K": {k}, "seeds": {}}}"#,
        seeds(20)
    ));
    let out = run_experiment(&exp, jobs()).unwrap();
    let plus = mean_final(&out.traces, "weighted-oful-plus");
    let oful = mean_final(&out.traces, "oful");
    let ratio = plus / oful;
    let pass = total_var <= 0.05 * k as f64 && ratio <= 0.6;
    (pass, format!(
            "regret WeightedOFUL+ {plus:.2} / OFUL {oful:.2} = {ratio:.3} (threshold 0.6), sum sigma^2 = {total_var:.1}"
        ))
}

fn criterion_05_sublinear_scaling() -> (bool, String) {
    let exp = experiment(&format!(
        r#"{{"setting": "bandit",
            "environment": {{"generator": "sphere", "d": 8, "variance": {{"kind": "constant", "sigma": 0.5}}}},
            "algorithms": ["weighted-oful-plus"], "K": 16384, "seeds": {}}}"#,
        seeds(20)
    ));
    let out = run_experiment(&exp, jobs()).unwrap();
    let early = mean_at(&out.traces, "weighted-oful-plus", 4096);
    let late = mean_at(&out.traces, "weighted-oful-plus", 16384);
    let ratio = late / early;
    let pass = ratio <= 2.6;
    (
        pass,
        format!("regret(16384) {late:.2} / regret(4096) {early:.2} = {ratio:.3} (threshold 2.6)"),
    )
}

fn hard_instance_runs() -> &'static (Outcome, usize) {
    static RUNS: OnceLock<(Outcome, usize)> = OnceLock::new();
    RUNS.get_or_init(|| {
        let exp = experiment(&format!(
            r#"{{"setting": "mdp", "environment": {{"generator": "hard_instance", "d": 5, "B": 2.0}},
                "algorithms": ["hf-ucrl-vtr-plus"], "K": 500, "H": 10, "seeds": {},
                "overrides": {{"delta": 0.05}}, "diagnostics": true}}"#,
            seeds(20)
        ));
        let LearnerParams::Mdp(cfg) = exp.params else { unreachable!() };
        (run_experiment(&exp, jobs()).unwrap(), cfg.levels)
    })
}

fn criterion_06_optimism() -> (bool, String) {
    let (out, _) = hard_instance_runs();
    let per_run: Vec<f64> = out
        .traces
        .iter()
        .map(|t| {
            let o = t.diagnostic("optimistic").unwrap();
            o.iter().sum::<f64>() / o.len() as f64
        })
        .collect();
    let avg = per_run.iter().sum::<f64>() / per_run.len() as f64;
    let pass = avg >= 0.9;
    (
        pass,
        format!("mean optimistic-episode fraction {avg:.4} over 20 runs (threshold 0.9)"),
    )
}

fn criterion_07_variance_sandwich() -> (bool, String) {
    let (out, levels) = hard_instance_runs();
    let checks: f64 = out
        .traces
        .iter()
        .flat_map(|t| t.diagnostic("sandwich_checks").unwrap())
        .sum();
    let violations: f64 = out
        .traces
        .iter()
        .flat_map(|t| t.diagnostic("sandwich_violations").unwrap())
        .sum();
    let frac = violations / checks;
    let bound = (2 * levels + 1) as f64 * 0.05;
    let pass = checks > 0.0 && frac <= bound;
    (pass, format!("violation fraction {frac:.4} over {checks} (k, h, m) triples (threshold (2M+1)delta = {bound:.2}, M = {levels})"))
}

fn criterion_08_hard_instance_learning() -> (bool, String) {
    let exp = experiment(&format!(
        r#"{{"setting": "mdp", "environment": {{"generator": "hard_instance", "d": 5, "B": 2.0}},
            "algorithms": ["hf-ucrl-vtr-plus", "uniform-random"], "K": 2000, "H": 10, "seeds": {}}}"#,
        seeds(20)
    ));
    let out = run_experiment(&exp, jobs()).unwrap();
    let learner = mean_final(&out.traces, "hf-ucrl-vtr-plus");
    let uniform = mean_final(&out.traces, "uniform-random");
    let ratio = learner / uniform;
    let pass = ratio <= 0.5;
    (
        pass,
        format!(
            "regret HF-UCRL-VTR+ {learner:.3} / uniform {uniform:.3} = {ratio:.3} (threshold 0.5)"
        ),
    )
}

fn criterion_09_environment_invariants() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = Vec::new();
    let mut count = 0;
    for (d, k, h, b) in [
        (2usize, 12u64, 3usize, 1.5),
        (5, 500, 10, 2.0),
        (5, 2000, 10, 2.0),
        (8, 192, 6, 4.0),
        (13, 507, 4, 2.0),
    ] {
        for seed in 0..3 {
            let hi = make_hard_instance(d, k, h, b, seed).unwrap();
            let rep = check_assumptions(&hi.mdp, 100, 1000, &mut rng);
            count += 1;
            if !rep.holds(b, 1e-10) || hi.mdp.parameter_norm() > b {
                failures.push(format!("hard d={d} seed={seed}: {rep:?}"));
            }
        }
    }
    for (s, a, h) in [(2usize, 2usize, 3usize), (3, 3, 5), (4, 2, 6), (5, 3, 4)] {
        for seed in 0..3 {
            let m = make_random_tabular(s, a, h, seed).unwrap();
            let rep = check_assumptions(&m, 100, 1000, &mut rng);
            count += 1;
            if !rep.holds(s as f64 * (a as f64).sqrt(), 1e-10) {
                failures.push(format!("tabular {s}x{a} seed={seed}: {rep:?}"));
            }
        }
    }
    let pass = failures.is_empty();
    let first = failures
        .first()
        .map(|f| format!("; first: {f}"))
        .unwrap_or_default();
    (
        pass,
        format!(
            "{count} instances checked, {} failing{first}",
            failures.len()
        ),
    )
}

fn criterion_10_determinism() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        format!(
            r#"{{"setting": "bandit", "environment": {{"generator": "sphere", "d": 4, "variance": {{"kind": "bursty"}}}},
                "algorithms": ["weighted-oful-plus", "weighted-oful", "oful"], "K": 1500, "seeds": {}, "diagnostics": true}}"#,
            seeds(4)
        ),
        format!(
            r#"{{"setting": "mdp", "environment": {{"generator": "random_tabular", "num_states": 2, "num_actions": 2}},
                "algorithms": ["hf-ucrl-vtr-plus", "hf-ucrl-vtr-plus-committed", "uniform-random"], "K": 60, "H": 3,
                "seeds": {}, "diagnostics": true}}"#,
            seeds(3)
        ),
    ];
    let mut identical = true;
    for (i, text) in configs.iter().enumerate() {
        let path = dir.path().join(format!("c{i}.json"));
        fs::write(&path, text).unwrap();
        let mut outputs = Vec::new();
        for (run, threads) in [("a", 1), ("b", jobs())] {
            let exp = load_experiment(&path).unwrap();
            let (written, _) =
                run_to_dir(&exp, &dir.path().join(format!("{run}{i}")), threads, true).unwrap();
            outputs.push(
                written
                    .iter()
                    .map(|p| fs::read(p).unwrap())
                    .collect::<Vec<_>>(),
            );
        }
        identical &= outputs[0] == outputs[1];
    }
    (identical, "two invocations per config (1 and N threads) produce byte-identical CSV, summary and plot files".to_string())
}

fn main() {
    let criteria: [(u32, fn() -> (bool, String)); 10] = [
        (1, criterion_01_regression_oracle),
        (2, criterion_02_planning_oracle),
        (3, criterion_03_confidence_coverage),
        (4, criterion_04_variance_awareness),
        (5, criterion_05_sublinear_scaling),
        (6, criterion_06_optimism),
        (7, criterion_07_variance_sandwich),
        (8, criterion_08_hard_instance_learning),
        (9, criterion_09_environment_invariants),
        (10, criterion_10_determinism),
    ];
    let mut failed = Vec::new();
    for (id, check) in criteria {
        let start = Instant::now();
        let (pass, detail) =
            std::panic::catch_unwind(check).unwrap_or_else(|_| (false, "panicked".to_string()));
        println!(
            "criterion {id:>2} {}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 10 criteria passed");
    } else {
        println!(
            "acceptance: {} of 10 criteria failed: {failed:?}",
            failed.len()
        );
        std::process::exit(1);
    }
}
