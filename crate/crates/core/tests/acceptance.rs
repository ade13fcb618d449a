//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::cell::OnceCell;
use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use frontlab::config::{ExperimentConfig, RawConfig};
use frontlab::dynamics::{Species, Trajectory};
use frontlab::format::fmt_f64;
use frontlab::harness::{run_experiment, RunSummary};
use frontlab::kernels::Kernel;
use frontlab::observers::{decay_sup, estimate_speed, LevelSetSeries, Verdict};
use frontlab::speeds::SpeedProblem;
use frontlab::subsolution::{
    a_m_inf, b_inf, beta_star, construct, m_star, verify_subsolution, SampleGrid,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rc_mgf(l: f64) -> f64 {
    PI * PI * l.sinh() / (l * (l * l + PI * PI))
}

fn unit_kernel() -> Kernel {
    Kernel::raised_cosine(1.0).unwrap()
}

struct Timed {
    summary: RunSummary,
    elapsed: Duration,
    _dir: tempfile::TempDir,
}

fn timed_run(text: &str) -> Timed {
    let raw = RawConfig::parse(text).expect("config parses");
    let config = ExperimentConfig::resolve(&raw, Path::new(".")).expect("config resolves");
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let summary = run_experiment(&config, dir.path()).expect("run succeeds");
    Timed { summary, elapsed: start.elapsed(), _dir: dir }
}

const SCALAR_RUN: &str = "\
model.d1 = 1
model.r1 = 1
model.d2 = 1
model.r2 = 0.4
model.a = 0.5
model.b = 1.5
model.s = 0
habitat.family = constant_one
grid.x_min = -40
grid.x_max = 560
grid.dx = 0.0625
grid.left_wall = ignore
initial_u.center = 0
initial_u.half_width = 5
initial_u.height = 1
initial_v.profile = zero
solver.t_end = 400
solver.snapshot_stride = 45
output.csv_stride = 50
run.label = scalar_kpp
";

/// Background parameters of the two-species persistence scenario.
fn persistence_params() -> (f64, f64) {
    let k = unit_kernel();
    let s_star = SpeedProblem::new(1.0, 0.5, 1.0, k.clone()).unwrap().min_speed().unwrap().c_bar;
    let s_lower = SpeedProblem::new(1.0, 0.4, 0.5, k).unwrap().min_speed().unwrap().c_bar;
    let s_underline = s_star.min(s_lower);
    (0.5 * s_underline, s_underline)
}

fn persistence_run_text() -> String {
    let (s, _) = persistence_params();
    format!(
        "\
model.d1 = 1
model.d2 = 1
model.r1 = 0.5
model.r2 = 0.4
model.a = 0.5
model.b = 1.5
model.s = {}
habitat.family = logistic
habitat.A = 0.5
habitat.L = 2
grid.x_min = -40
grid.x_max = 680
grid.dx = 0.125
grid.left_wall = ignore
initial_u.center = 10
initial_v.center = 10
solver.t_end = 1500
solver.snapshot_stride = 80
output.csv_stride = 20
observer.eta_fraction = 0.1
observer.epsilon = 0.01
observer.t_window = 0.5
run.label = persistence
",
        fmt_f64(s)
    )
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let k = unit_kernel();
    let mut worst: f64 = 0.0;
    for l in [0.1, 0.5, 1.0, 2.0, 4.0] {
        let rel = (k.mgf(l).map_err(|e| e.to_string())? - rc_mgf(l)).abs() / rc_mgf(l);
        worst = worst.max(rel);
    }
    let t = start.elapsed();
    check(
        worst <= 1e-8 && t < Duration::from_secs(1),
        format!("worst relative error {worst:.3e} (≤ 1e-8), {t:.2?} (< 1 s)"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (d, r, k) = (
            rng.gen_range(0.1..=5.0),
            rng.gen_range(0.1..=5.0),
            rng.gen_range(0.1..=5.0),
        );
        let got = SpeedProblem::new(d, r, k, unit_kernel())
            .and_then(|p| p.min_speed())
            .map_err(|e| e.to_string())?
            .c_bar;
        let scan = (1..=10_000)
            .map(|i| {
                let l = i as f64 * 1e-3;
                (d * (rc_mgf(l) - 1.0) + r * k) / l
            })
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((got - scan).abs());
    }
    let t = start.elapsed();
    check(
        worst <= 1e-4 && t < Duration::from_secs(10),
        format!("worst |min_speed - scan| {worst:.3e} (≤ 1e-4) over 50 draws, {t:.2?} (< 10 s)"),
    )
}

fn front_series(traj: &Trajectory) -> LevelSetSeries {
    LevelSetSeries::from_trajectory(traj, Species::Prey, 0.1).unwrap()
}

fn criterion_3(run: &Timed) -> Outcome {
    let s_star = SpeedProblem::new(1.0, 1.0, 1.0, unit_kernel())
        .and_then(|p| p.min_speed())
        .map_err(|e| e.to_string())?
        .c_bar;
    let est = estimate_speed(&front_series(&run.summary.trajectory), 0.5).map_err(|e| e.to_string())?;
    let rel = (est.speed - s_star).abs() / s_star;
    check(
        rel <= 0.03 && run.elapsed < Duration::from_secs(60),
        format!(
            "front speed {:.5} vs s* = {s_star:.5} (rel {rel:.2e} ≤ 3e-2), {:.1?} (< 60 s)",
            est.speed, run.elapsed
        ),
    )
}

fn criterion_4(run: &Timed) -> Outcome {
    let s_star = run.summary.speeds.s_star.c_bar;
    let sups = decay_sup(&run.summary.trajectory, 1.2 * s_star, Species::Prey);
    let (t, sup) = *sups.last().unwrap();
    check(
        sup < 1e-3,
        format!("sup over |x| ≥ 1.2 s* t at t = {t} is {sup:.3e} (< 1e-3)"),
    )
}

fn h_excess(traj: &Trajectory) -> f64 {
    let cap = traj.params.v_cap();
    traj.snapshots
        .iter()
        .flat_map(|s| {
            let u = s.u.iter().map(|&x| (x - 1.0).max(-x));
            let v = s.v.iter().map(move |&x| (x - cap).max(-x));
            u.chain(v)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn criterion_5(runs: &[&Timed]) -> Outcome {
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_negative: f64 = 0.0;
    for run in runs {
        let traj = &run.summary.trajectory;
        worst_excess = worst_excess.max(h_excess(traj));
        let min = traj
            .snapshots
            .iter()
            .flat_map(|s| s.u.iter().chain(&s.v))
            .copied()
            .fold(f64::INFINITY, f64::min);
        worst_negative = worst_negative.min(min);
    }
    check(
        worst_excess <= 1e-8 && worst_negative >= 0.0,
        format!(
            "{} runs: largest excursion past the box {worst_excess:.3e} (≤ 1e-8), smallest value {worst_negative:.3e} (≥ 0)",
            runs.len()
        ),
    )
}

fn criterion_6(run: &Timed) -> Outcome {
    let s = &run.summary;
    let (_, s_underline) = persistence_params();
    let margins_ok = (s.hypotheses.d1_margin - 0.225).abs() < 1e-12
        && (s.hypotheses.d2_margin - 0.525).abs() < 1e-12
        && s.hypotheses.all_ok();
    let eta_ok = (s.band.eta - 0.1 * (s_underline - 0.5 * s_underline)).abs() < 1e-15;
    let ok = margins_ok
        && eta_ok
        && s.prey.band_min >= 1e-2
        && s.predator.band_min >= 1e-2
        && s.prey.verdict == Verdict::Persists
        && s.predator.verdict == Verdict::Persists
        && run.elapsed < Duration::from_secs(300);
    check(
        ok,
        format!(
            "band [{:.4}t, {:.4}t]: min u {:.4}, min v {:.4} (≥ 1e-2), margins {:.3}/{:.3}, {} snapshots, {:.1?} (< 300 s)",
            s.band.c_lo,
            s.band.c_hi,
            s.prey.band_min,
            s.predator.band_min,
            s.hypotheses.d1_margin,
            s.hypotheses.d2_margin,
            s.prey.snapshots_used,
            run.elapsed
        ),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let (s, s_underline) = persistence_params();
    let params = frontlab::dynamics::Params { d1: 1.0, d2: 1.0, r1: 0.5, r2: 0.4, a: 0.5, b: 1.5, s };
    let c = 0.5 * (s + s_underline);
    let m = m_star(&params, 0.05, 0.05) - 0.01;
    let j1 = unit_kernel();
    let wave = construct(&params, &j1, c, 0.05, 0.05, m).map_err(|e| e.to_string())?;
    let rep = verify_subsolution(&wave, &params, &j1, SampleGrid::default()).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    let residual = (rep.b - c).abs();
    check(
        rep.a_m - c > 0.0
            && residual <= 1e-8
            && rep.min_l > 0.0
            && rep.min_q > 0.0
            && rep.passed()
            && t < Duration::from_secs(10),
        format!(
            "R = {}, β = {:.6}: 𝓐_m - c = {:.4e}, |𝓑 - c| = {residual:.1e}, min L = {:.3e}, min Q = {:.3e}, {t:.2?} (< 10 s)",
            wave.r_window, wave.beta, rep.a_m - c, rep.min_l, rep.min_q
        ),
    )
}

fn criterion_8() -> Outcome {
    let (s, _) = persistence_params();
    let params = frontlab::dynamics::Params { d1: 1.0, d2: 1.0, r1: 0.5, r2: 0.4, a: 0.5, b: 1.5, s };
    let m = m_star(&params, 0.05, 0.05) - 0.01;
    let j1 = unit_kernel();
    let a = |b: f64| a_m_inf(&params, &j1, m, 0.05, b).unwrap();
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(89);
    for _ in 0..20 {
        let beta: f64 = rng.gen_range(0.1..5.0);
        let h = 1e-4;
        let fd = (a(beta + h) - a(beta - h)) / (2.0 * h);
        let identity = (b_inf(&params, &j1, beta).unwrap() - a(beta)) / beta;
        worst = worst.max((fd - identity).abs());
    }
    let (bs, cs) = beta_star(&params, &j1, m, 0.05).map_err(|e| e.to_string())?;
    let gap = (cs - b_inf(&params, &j1, bs).unwrap()).abs();
    check(
        worst <= 1e-5 && gap <= 1e-6,
        format!("worst |A'_m - (B - A_m)/β| {worst:.2e} (≤ 1e-5); |A_m(β*) - B(β*)| {gap:.2e} (≤ 1e-6) at β* = {bs:.6}"),
    )
}

fn criterion_9(first: &Timed, second: &Timed) -> Outcome {
    let mut names: Vec<_> = std::fs::read_dir(&first.summary.out_dir)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut differing = Vec::new();
    for name in &names {
        let a = std::fs::read(first.summary.out_dir.join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(second.summary.out_dir.join(name)).map_err(|e| e.to_string())?;
        if a != b {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    check(
        differing.is_empty() && names.len() >= 6,
        format!("{} files compared, differing: {differing:?}", names.len()),
    )
}

fn main() {
    let scalar = OnceCell::new();
    let persistence = OnceCell::new();
    let repeat = OnceCell::new();
    let scalar = || scalar.get_or_init(|| timed_run(SCALAR_RUN));
    let persistence = || persistence.get_or_init(|| timed_run(&persistence_run_text()));
    let repeat = || repeat.get_or_init(|| timed_run(&persistence_run_text()));

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("1 mgf oracle", Box::new(criterion_1)),
        ("2 speed minimizer vs scan", Box::new(criterion_2)),
        ("3 scalar front speed", Box::new(|| criterion_3(scalar()))),
        ("4 decay ahead of front", Box::new(|| criterion_4(scalar()))),
        ("5 invariant box", Box::new(|| criterion_5(&[scalar(), persistence(), repeat()]))),
        ("6 persistence band", Box::new(|| criterion_6(persistence()))),
        ("7 sub-solution", Box::new(criterion_7)),
        ("8 derivative identities", Box::new(criterion_8)),
        ("9 determinism", Box::new(|| criterion_9(persistence(), repeat()))),
    ];

    let mut failed = 0;
    for (name, run) in &criteria {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(format!("panicked: {msg}"))
            });
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
