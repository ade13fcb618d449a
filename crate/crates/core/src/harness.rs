//! Experiment orchestration: single runs, sweeps and their CSV artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{ExperimentConfig, RawConfig};
use crate::dynamics::{simulate, Species, Trajectory};
use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::hypotheses::{check_hypotheses, HypothesisReport};
use crate::observers::{
    estimate_speed, frame_band_min, write_reports_csv, FrameBandSpec, LevelSetSeries,
    PersistenceReport, SpeedEstimate,
};
use crate::speeds::{SpeedProblem, SpeedResult};
use crate::subsolution::{construct, m_star, verify_subsolution, SampleGrid, SubsolutionParams, VerificationReport};

pub const OUTPUT_ENV: &str = "FRONTLAB_OUT";
pub const DEFAULT_OUTPUT: &str = "frontlab_out";

/// `FRONTLAB_OUT` if set, otherwise `./frontlab_out`.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
}

/// Prey and predator speeds. Without `b > 1` the predator speed is the
/// degenerate zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedsRow {
    pub s_star: SpeedResult,
    pub s_lower_star: SpeedResult,
    pub s_underline: f64,
}

impl SpeedsRow {
    pub fn compute(config: &ExperimentConfig) -> Result<Self> {
        let (j1, j2) = config.kernels()?;
        let p = &config.params;
        let s_star = SpeedProblem::new(p.d1, p.r1, 1.0, j1)?.min_speed()?;
        let s_lower_star = SpeedProblem::new(p.d2, p.r2, p.v_cap(), j2)?.min_speed()?;
        Ok(SpeedsRow {
            s_star,
            s_lower_star,
            s_underline: s_star.c_bar.min(s_lower_star.c_bar),
        })
    }

    pub fn to_csv(&self) -> String {
        let lam = |r: &SpeedResult| r.lambda_star.map(fmt_f64).unwrap_or_else(|| "NaN".into());
        format!(
            "s_star,lambda1,s_lower_star,lambda2,s_underline\n{},{},{},{},{}\n",
            fmt_f64(self.s_star.c_bar),
            lam(&self.s_star),
            fmt_f64(self.s_lower_star.c_bar),
            lam(&self.s_lower_star),
            fmt_f64(self.s_underline)
        )
    }
}

/// The moving band used for persistence: `[(s + η)t, (s̲ - η)t]` when it is
/// nonempty, otherwise `[(s + η)t, (s + 2η)t]` just ahead of the habitat edge.
pub fn persistence_band(config: &ExperimentConfig, speeds: &SpeedsRow) -> Result<FrameBandSpec> {
    let s = config.params.s;
    let gap = speeds.s_underline - s;
    let scale = if gap > 0.0 { gap } else { speeds.s_star.c_bar };
    let eta = config.observer.eta.unwrap_or(config.observer.eta_fraction * scale);
    let o = &config.observer;
    if gap > 2.0 * eta {
        FrameBandSpec::between(s, speeds.s_underline, eta, o.epsilon, o.t_window)
    } else {
        FrameBandSpec::custom(s + eta, s + 2.0 * eta, eta, o.epsilon, o.t_window)
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub speeds: SpeedsRow,
    pub hypotheses: HypothesisReport,
    pub band: FrameBandSpec,
    pub prey: PersistenceReport,
    pub predator: PersistenceReport,
    /// Right θ-level-set speed of the prey, when enough fronts were found.
    pub prey_front_speed: Option<SpeedEstimate>,
    pub trajectory: Trajectory,
}

impl RunSummary {
    /// False when some standing assumption fails; results are then outside
    /// the scope of the persistence theory.
    pub fn in_scope(&self) -> bool {
        self.hypotheses.all_ok()
    }
}

/// Runs one experiment and writes its bundle into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let write = |name: &str, text: String| {
        let path = out_dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    };
    write("config.txt", config.echo())?;

    let (j1, j2) = config.kernels()?;
    let hypotheses = check_hypotheses(&config.params, &config.habitat.build()?, &j1, &j2)?;
    hypotheses.write_csv(&out_dir.join("hypotheses.csv"))?;
    let speeds = SpeedsRow::compute(config)?;
    write("speeds.csv", speeds.to_csv())?;

    let model = config.model()?;
    let trajectory = simulate(&model, config.initial_state()?, &config.settings())?;
    trajectory.write_csv(&out_dir.join("snapshots.csv"), config.csv_stride)?;

    let theta = config.observer.theta;
    let prey_fronts = LevelSetSeries::from_trajectory(&trajectory, Species::Prey, theta)?;
    prey_fronts.write_csv(&out_dir.join("levelset_u.csv"))?;
    LevelSetSeries::from_trajectory(&trajectory, Species::Predator, theta)?
        .write_csv(&out_dir.join("levelset_v.csv"))?;
    let prey_front_speed = estimate_speed(&prey_fronts, config.observer.speed_window).ok();

    let band = persistence_band(config, &speeds)?;
    let prey = frame_band_min(&trajectory, &band, Species::Prey)?;
    let predator = frame_band_min(&trajectory, &band, Species::Predator)?;
    write_reports_csv(&out_dir.join("persistence.csv"), &[prey, predator])?;

    let d = &trajectory.diagnostics;
    write(
        "diagnostics.csv",
        format!(
            "steps,dt,h_violations,max_u,max_v,min_value,worst_boundary_ratio,suspect_undershoots,one_sided,in_scope\n\
             {},{},{},{},{},{},{},{},{},{}\n",
            d.steps,
            fmt_f64(d.dt),
            d.h_violations,
            fmt_f64(d.max_u),
            fmt_f64(d.max_v),
            fmt_f64(d.min_value),
            fmt_f64(d.worst_boundary_ratio),
            d.suspect_undershoots,
            d.one_sided,
            hypotheses.all_ok()
        ),
    )?;

    Ok(RunSummary {
        out_dir: out_dir.to_path_buf(),
        speeds,
        hypotheses,
        band,
        prey,
        predator,
        prey_front_speed,
        trajectory,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    S,
    A,
    B,
    D1,
    D2,
    Eta,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "s" => Ok(SweepAxis::S),
            "a" => Ok(SweepAxis::A),
            "b" => Ok(SweepAxis::B),
            "d1" => Ok(SweepAxis::D1),
            "d2" => Ok(SweepAxis::D2),
            "eta" => Ok(SweepAxis::Eta),
            other => Err(Error::Config(format!(
                "`{other}` is not sweepable; choose one of s, a, b, d1, d2, eta"
            ))),
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::S => "model.s",
            SweepAxis::A => "model.a",
            SweepAxis::B => "model.b",
            SweepAxis::D1 => "model.d1",
            SweepAxis::D2 => "model.d2",
            SweepAxis::Eta => "observer.eta",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: std::result::Result<(SpeedsRow, PersistenceReport, PersistenceReport), String>,
}

impl SweepRow {
    fn record(&self) -> Vec<String> {
        let mut rec = vec![fmt_f64(self.value)];
        match &self.outcome {
            Ok((sp, u, v)) => rec.extend([
                fmt_f64(sp.s_star.c_bar),
                fmt_f64(sp.s_lower_star.c_bar),
                fmt_f64(sp.s_underline),
                fmt_f64(u.band_min),
                fmt_f64(v.band_min),
                u.verdict.name().to_string(),
                v.verdict.name().to_string(),
            ]),
            Err(msg) => {
                rec.extend(std::iter::repeat("NaN".to_string()).take(5));
                rec.extend([format!("error: {msg}"), format!("error: {msg}")]);
            }
        }
        rec
    }
}

pub const SWEEP_HEADER: [&str; 8] = [
    "value",
    "s_star",
    "s_lower_star",
    "s_underline",
    "u_band_min",
    "v_band_min",
    "u_verdict",
    "v_verdict",
];

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Runs one experiment per value, each in `out_root/run_NNN`. With
/// `relative`, values are multiples of the base configuration's `s̲`.
/// Rows come back in input order whatever the worker count.
pub fn sweep(
    raw: &RawConfig,
    base: &Path,
    axis: SweepAxis,
    values: &[f64],
    relative: bool,
    workers: usize,
    out_root: &Path,
) -> Result<Vec<SweepRow>> {
    let values: Vec<f64> = if relative {
        let s0 = SpeedsRow::compute(&ExperimentConfig::resolve(raw, base)?)?.s_underline;
        values.iter().map(|v| v * s0).collect()
    } else {
        values.to_vec()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let rows = pool.install(|| {
        values
            .par_iter()
            .enumerate()
            .map(|(i, &value)| {
                let outcome = (|| {
                    let mut raw = raw.clone();
                    raw.set(axis.key(), fmt_f64(value))?;
                    let config = ExperimentConfig::resolve(&raw, base)?;
                    let run = run_experiment(&config, &out_root.join(format!("run_{i:03}")))?;
                    Ok((run.speeds, run.prey, run.predator))
                })();
                SweepRow {
                    value,
                    outcome: outcome.map_err(|e: Error| e.to_string()),
                }
            })
            .collect::<Vec<_>>()
    });
    fs::create_dir_all(out_root).map_err(|e| Error::io(out_root, e))?;
    let path = out_root.join("sweep.csv");
    fs::write(&path, sweep_csv(&rows)?).map_err(|e| Error::io(&path, e))?;
    Ok(rows)
}

/// Builds the sub-solution for the configured frame speed and verifies it.
pub fn check_subsolution(config: &ExperimentConfig) -> Result<(SubsolutionParams, VerificationReport)> {
    let speeds = SpeedsRow::compute(config)?;
    let p = &config.params;
    let sub = &config.subsolution;
    let c = sub.c.unwrap_or(0.5 * (p.s + speeds.s_underline));
    if !(c > p.s && c < speeds.s_underline) {
        return Err(Error::InvalidParams(format!(
            "frame speed c = {c} must lie in (s, s̲) = ({}, {})",
            p.s, speeds.s_underline
        )));
    }
    let m = m_star(p, sub.delta1, sub.delta2) - sub.m_offset;
    let j1 = config.kernel1.build()?;
    let wave = construct(p, &j1, c, sub.delta1, sub.delta2, m)?;
    let report = verify_subsolution(&wave, p, &j1, SampleGrid::default())?;
    Ok((wave, report))
}
