//! Front positions, speed estimates and moving-frame persistence checks.
//!
//! Asymptotic statements (`liminf`/`limsup` as `t → ∞`) are estimated by the
//! min/max over the trailing part of a finite trajectory. They are
//! measurements, not proofs.

use crate::dynamics::{Grid, Species, State, Trajectory};
use crate::error::{Error, Result};

pub const DEFAULT_THETA: f64 = 0.1;
pub const DEFAULT_WINDOW: f64 = 0.5;
pub const MIN_SPEED_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Outermost point where `field` crosses `theta`, linearly interpolated.
pub fn level_set_position(grid: &Grid, field: &[f64], theta: f64, side: Side) -> Result<f64> {
    let n = field.len();
    let dx = grid.dx();
    match side {
        Side::Right => {
            let i = field
                .iter()
                .rposition(|&f| f >= theta)
                .ok_or_else(|| Error::NoFront(format!("field stays below θ = {theta}")))?;
            if i == n - 1 {
                return Err(Error::NoFront(format!(
                    "field is above θ = {theta} at the right edge"
                )));
            }
            let (a, b) = (field[i], field[i + 1]);
            Ok(grid.x(i) + (a - theta) / (a - b) * dx)
        }
        Side::Left => {
            let i = field
                .iter()
                .position(|&f| f >= theta)
                .ok_or_else(|| Error::NoFront(format!("field stays below θ = {theta}")))?;
            if i == 0 {
                return Err(Error::NoFront(format!(
                    "field is above θ = {theta} at the left edge"
                )));
            }
            let (a, b) = (field[i - 1], field[i]);
            Ok(grid.x(i) - (b - theta) / (b - a) * dx)
        }
    }
}

/// Level-set positions over time; `None` where no front was found.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetSeries {
    pub theta: f64,
    pub times: Vec<f64>,
    pub left: Vec<Option<f64>>,
    pub right: Vec<Option<f64>>,
}

impl LevelSetSeries {
    pub fn from_trajectory(traj: &Trajectory, species: Species, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidParams(format!("θ must lie in (0, 1), got {theta}")));
        }
        let mut series = LevelSetSeries {
            theta,
            times: Vec::with_capacity(traj.snapshots.len()),
            left: Vec::new(),
            right: Vec::new(),
        };
        for snap in &traj.snapshots {
            let f = snap.field(species);
            series.times.push(snap.t);
            series.left.push(level_set_position(&traj.grid, f, theta, Side::Left).ok());
            series.right.push(level_set_position(&traj.grid, f, theta, Side::Right).ok());
        }
        Ok(series)
    }

    /// Series with only right positions, for synthetic data.
    pub fn from_positions(theta: f64, times: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        if times.len() != right.len() {
            return Err(Error::InvalidParams("times and positions differ in length".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParams("times must be strictly increasing".into()));
        }
        let left = vec![None; times.len()];
        Ok(LevelSetSeries {
            theta,
            times,
            left,
            right: right.into_iter().map(Some).collect(),
        })
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "theta", "x_left", "x_right"])?;
        let opt = |x: Option<f64>| x.map(crate::format::fmt_f64).unwrap_or_else(|| "NaN".into());
        for i in 0..self.times.len() {
            w.write_record([
                crate::format::fmt_f64(self.times[i]),
                crate::format::fmt_f64(self.theta),
                opt(self.left[i]),
                opt(self.right[i]),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedEstimate {
    pub speed: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Least-squares slope of the right front over the trailing
/// `window_fraction` of the samples.
pub fn estimate_speed(series: &LevelSetSeries, window_fraction: f64) -> Result<SpeedEstimate> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "window fraction must lie in (0, 1], got {window_fraction}"
        )));
    }
    let n = series.times.len();
    let start = n - ((n as f64 * window_fraction).round() as usize).min(n);
    let pts: Vec<(f64, f64)> = (start..n)
        .filter_map(|i| series.right[i].map(|x| (series.times[i], x)))
        .collect();
    if pts.len() < MIN_SPEED_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} front samples in the window, need {MIN_SPEED_SAMPLES}",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    // Center times at the window start so that shifting all times is exact.
    let t0 = pts[0].0;
    let mean_t = pts.iter().map(|p| p.0 - t0).sum::<f64>() / m;
    let mean_x = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - t0 - mean_t).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - t0 - mean_t) * (p.1 - mean_x)).sum();
    let speed = sxy / sxx;
    let ssr: f64 = pts
        .iter()
        .map(|p| (p.1 - mean_x - speed * (p.0 - t0 - mean_t)).powi(2))
        .sum();
    let stderr = (ssr / (m - 2.0) / sxx).sqrt();
    Ok(SpeedEstimate {
        speed,
        stderr,
        samples: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameBandSpec {
    pub c_lo: f64,
    pub c_hi: f64,
    pub eta: f64,
    pub epsilon: f64,
    /// Trailing fraction of the horizon that is inspected.
    pub t_window: f64,
    /// Also inspect the mirrored band `[-c_hi t, -c_lo t]`.
    pub symmetric: bool,
}

impl FrameBandSpec {
    /// The band `[(s + η) t, (s̲ - η) t]` with `0 < η < (s̲ - s)/2`.
    pub fn between(s: f64, s_underline: f64, eta: f64, epsilon: f64, t_window: f64) -> Result<Self> {
        let gap = s_underline - s;
        if !(eta > 0.0 && eta < 0.5 * gap) {
            return Err(Error::InvalidParams(format!(
                "η = {eta} must lie in (0, (s̲ - s)/2 = {})",
                0.5 * gap
            )));
        }
        Self::custom(s + eta, s_underline - eta, eta, epsilon, t_window)
    }

    /// Any band `[c_lo t, c_hi t]`, e.g. ahead of the fronts.
    pub fn custom(c_lo: f64, c_hi: f64, eta: f64, epsilon: f64, t_window: f64) -> Result<Self> {
        if !(c_lo >= 0.0 && c_hi > c_lo) {
            return Err(Error::InvalidParams(format!(
                "band speeds must satisfy 0 ≤ c_lo < c_hi, got [{c_lo}, {c_hi}]"
            )));
        }
        if !(epsilon > 0.0) {
            return Err(Error::InvalidParams(format!("ε must be positive, got {epsilon}")));
        }
        if !(t_window > 0.0 && t_window <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "late-time window must lie in (0, 1], got {t_window}"
            )));
        }
        Ok(FrameBandSpec {
            c_lo,
            c_hi,
            eta,
            epsilon,
            t_window,
            symmetric: false,
        })
    }

    pub fn with_symmetric(mut self, symmetric: bool) -> Self {
        self.symmetric = symmetric;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Persists,
    Extinct,
    Inconclusive,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Persists => "persists",
            Verdict::Extinct => "extinct",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceReport {
    pub species: Species,
    pub eta: f64,
    pub epsilon: f64,
    /// Min over the band and the late-time window.
    pub band_min: f64,
    /// Max over the band at the last inspected snapshot.
    pub final_band_max: f64,
    pub verdict: Verdict,
    /// Measured lower bound (equal to `band_min`).
    pub epsilon_hat: f64,
    pub snapshots_used: usize,
    pub one_sided: bool,
}

/// Persists iff `band_min ≥ ε`; extinct if the band has fallen below `ε`
/// everywhere at the end; inconclusive otherwise.
pub fn frame_band_min(traj: &Trajectory, spec: &FrameBandSpec, species: Species) -> Result<PersistenceReport> {
    let t_end = traj.t_end();
    let t_from = (1.0 - spec.t_window) * t_end;
    let grid = &traj.grid;
    let mut band_min = f64::INFINITY;
    let mut final_band_max = 0.0;
    let mut used = 0;
    for snap in traj.snapshots.iter().filter(|s| s.t >= t_from - 1e-12 * t_end.max(1.0)) {
        let (lo, hi) = (spec.c_lo * snap.t, spec.c_hi * snap.t);
        if lo > grid.x_max() || (spec.symmetric && -lo < grid.x_min()) {
            return Err(Error::Config(format!(
                "band [{lo}, {hi}] at t = {} leaves the grid [{}, {}]",
                snap.t,
                grid.x_min(),
                grid.x_max()
            )));
        }
        let mut ranges = vec![(lo, hi)];
        if spec.symmetric {
            ranges.push((-hi, -lo));
        }
        let values = band_values(grid, snap, species, &ranges);
        if values.is_empty() {
            continue;
        }
        used += 1;
        band_min = values.iter().copied().fold(band_min, f64::min);
        final_band_max = values.iter().copied().fold(0.0, f64::max);
    }
    if used == 0 {
        return Err(Error::Config(
            "band contains no grid point in the late-time window".into(),
        ));
    }
    let verdict = if band_min >= spec.epsilon {
        Verdict::Persists
    } else if final_band_max < spec.epsilon {
        Verdict::Extinct
    } else {
        Verdict::Inconclusive
    };
    Ok(PersistenceReport {
        species,
        eta: spec.eta,
        epsilon: spec.epsilon,
        band_min,
        final_band_max,
        verdict,
        epsilon_hat: band_min,
        snapshots_used: used,
        one_sided: !spec.symmetric,
    })
}

fn band_values(grid: &Grid, snap: &State, species: Species, ranges: &[(f64, f64)]) -> Vec<f64> {
    let f = snap.field(species);
    let mut out = Vec::new();
    for &(lo, hi) in ranges {
        let first = ((lo - grid.x_min()) / grid.dx()).ceil().max(0.0) as usize;
        let last = ((hi - grid.x_min()) / grid.dx()).floor();
        if last < 0.0 {
            continue;
        }
        let last = (last as usize).min(grid.len() - 1);
        if first <= last {
            out.extend_from_slice(&f[first..=last]);
        }
    }
    out
}

/// Per-snapshot `(t, sup_{|x| ≥ c t} w)` restricted to the grid.
pub fn decay_sup(traj: &Trajectory, c: f64, species: Species) -> Vec<(f64, f64)> {
    traj.snapshots
        .iter()
        .map(|snap| {
            let cut = c * snap.t;
            let sup = traj
                .grid
                .points()
                .zip(snap.field(species))
                .filter(|(x, _)| x.abs() >= cut)
                .map(|(_, &w)| w)
                .fold(0.0, f64::max);
            (snap.t, sup)
        })
        .collect()
}

pub fn write_reports_csv(path: &std::path::Path, reports: &[PersistenceReport]) -> Result<()> {
    use crate::format::fmt_f64;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["species", "eta", "epsilon", "band_min", "verdict"])?;
    for r in reports {
        w.write_record([
            r.species.label().to_string(),
            fmt_f64(r.eta),
            fmt_f64(r.epsilon),
            fmt_f64(r.band_min),
            r.verdict.name().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Diagnostics, Params};
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::with_spacing(-10.0, 10.0, 0.1).unwrap()
    }

    fn traj_from(fields: Vec<(f64, Vec<f64>)>) -> Trajectory {
        let g = grid();
        let n = g.len();
        Trajectory {
            grid: g,
            params: Params { d1: 1.0, d2: 1.0, r1: 1.0, r2: 1.0, a: 1.0, b: 2.0, s: 0.0 },
            snapshots: fields
                .into_iter()
                .map(|(t, u)| State { t, u, v: vec![0.0; n] })
                .collect(),
            diagnostics: Diagnostics::default(),
        }
    }

    #[test]
    fn step_profile_front() {
        let g = grid();
        let f: Vec<f64> = g.points().map(|x| if x < 0.0 { 1.0 } else { 0.0 }).collect();
        let x = level_set_position(&g, &f, 0.5, Side::Right).unwrap();
        assert!(x.abs() <= g.dx());
        let zero = vec![0.0; g.len()];
        assert!(matches!(level_set_position(&g, &zero, 0.1, Side::Right), Err(Error::NoFront(_))));
        let full = vec![1.0; g.len()];
        assert!(matches!(level_set_position(&g, &full, 0.1, Side::Left), Err(Error::NoFront(_))));
    }

    #[test]
    fn left_front_of_bump() {
        let g = grid();
        let f: Vec<f64> = g.points().map(|x| (1.0 - (x / 3.0).powi(2)).max(0.0)).collect();
        let l = level_set_position(&g, &f, 0.75, Side::Left).unwrap();
        let r = level_set_position(&g, &f, 0.75, Side::Right).unwrap();
        assert!((l + 1.5).abs() < 1e-2 && (r - 1.5).abs() < 1e-2);
    }

    #[test]
    fn speed_of_noisy_line() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.5).collect();
        let xs: Vec<f64> = times.iter().map(|t| 2.0 * t + 1e-3 * (rng.gen::<f64>() - 0.5) * 3.46).collect();
        let est = estimate_speed(&LevelSetSeries::from_positions(0.1, times, xs).unwrap(), 0.5).unwrap();
        assert!((est.speed - 2.0).abs() < 1e-3);
        assert!(est.stderr < 1e-3);
    }

    #[test]
    fn constant_positions_zero_speed() {
        let times: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let est = estimate_speed(&LevelSetSeries::from_positions(0.1, times, vec![4.0; 20]).unwrap(), 1.0).unwrap();
        assert_eq!(est.speed, 0.0);
    }

    #[test]
    fn too_few_samples() {
        let times: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let s = LevelSetSeries::from_positions(0.1, times.clone(), times).unwrap();
        assert!(matches!(estimate_speed(&s, 0.5), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn band_invariants_on_zero_run() {
        let n = grid().len();
        let traj = traj_from((0..=10).map(|k| (k as f64, vec![0.0; n])).collect());
        let spec = FrameBandSpec::between(0.1, 0.5, 0.05, 1e-2, 0.5).unwrap();
        let r = frame_band_min(&traj, &spec, Species::Prey).unwrap();
        assert_eq!(r.band_min, 0.0);
        assert_eq!(r.verdict, Verdict::Extinct);
        assert!(r.one_sided);
    }

    #[test]
    fn band_spec_validation() {
        assert!(FrameBandSpec::between(0.1, 0.5, 0.2, 1e-2, 0.5).is_err());
        assert!(FrameBandSpec::between(0.1, 0.5, 0.0, 1e-2, 0.5).is_err());
        assert!(FrameBandSpec::between(0.1, 0.5, 0.1, 0.0, 0.5).is_err());
    }

    #[test]
    fn band_outside_grid_is_config_error() {
        let n = grid().len();
        let traj = traj_from((0..=10).map(|k| (k as f64 * 10.0, vec![0.5; n])).collect());
        let spec = FrameBandSpec::custom(0.5, 0.6, 0.0, 1e-2, 0.5).unwrap();
        assert!(matches!(frame_band_min(&traj, &spec, Species::Prey), Err(Error::Config(_))));
    }

    #[test]
    fn decay_sup_zero_field() {
        let n = grid().len();
        let traj = traj_from(vec![(0.0, vec![0.0; n]), (1.0, vec![0.0; n])]);
        assert!(decay_sup(&traj, 1.0, Species::Prey).iter().all(|p| p.1 == 0.0));
    }

    fn ramp_traj() -> Trajectory {
        let g = grid();
        traj_from(
            (0..=10)
                .map(|k| {
                    let t = k as f64;
                    (t, g.points().map(|x| (1.0 - (x - 0.3 * t).abs() / 8.0).clamp(0.0, 1.0) * 0.6).collect())
                })
                .collect(),
        )
    }

    proptest! {
        #[test]
        fn translation_equivariance(shift in 0usize..30) {
            let g = grid();
            let base: Vec<f64> = g.points().map(|x| (-(x + 3.0) * (x + 3.0)).exp()).collect();
            let mut moved = vec![0.0; g.len()];
            moved[shift..].copy_from_slice(&base[..g.len() - shift]);
            let a = level_set_position(&g, &base, 0.3, Side::Right).unwrap();
            let b = level_set_position(&g, &moved, 0.3, Side::Right).unwrap();
            prop_assert!((b - a - shift as f64 * g.dx()).abs() < 1e-12);
        }

        #[test]
        fn verdict_monotone_in_epsilon(eps in 1e-4f64..0.9, frac in 0.0f64..1.0) {
            let traj = ramp_traj();
            let spec = FrameBandSpec::custom(0.0, 0.5, 0.1, eps, 0.5).unwrap();
            let r = frame_band_min(&traj, &spec, Species::Prey).unwrap();
            let smaller = FrameBandSpec::custom(0.0, 0.5, 0.1, eps * frac.max(1e-3), 0.5).unwrap();
            let r2 = frame_band_min(&traj, &smaller, Species::Prey).unwrap();
            prop_assert_eq!(r.verdict == Verdict::Persists, r.band_min >= eps);
            if r.verdict == Verdict::Persists {
                prop_assert_eq!(r2.verdict, Verdict::Persists);
            }
        }

        #[test]
        fn band_min_nonincreasing_as_band_widens(eta in 0.01f64..0.2, extra in 0.0f64..0.1) {
            let traj = ramp_traj();
            let narrow = FrameBandSpec::between(0.0, 1.0, eta + extra, 1e-2, 0.5).unwrap();
            let wide = FrameBandSpec::between(0.0, 1.0, eta, 1e-2, 0.5).unwrap();
            let a = frame_band_min(&traj, &narrow, Species::Prey).unwrap().band_min;
            let b = frame_band_min(&traj, &wide, Species::Prey).unwrap().band_min;
            prop_assert!(b <= a);
        }

        #[test]
        fn speed_invariant_under_time_shift(shift in -50.0f64..50.0) {
            let times: Vec<f64> = (0..40).map(|i| i as f64 * 0.7).collect();
            let xs: Vec<f64> = times.iter().map(|t| 0.4 * t + (t * 3.1).sin() * 0.05).collect();
            let a = estimate_speed(&LevelSetSeries::from_positions(0.1, times.clone(), xs.clone()).unwrap(), 0.5).unwrap();
            let shifted: Vec<f64> = times.iter().map(|t| t + shift).collect();
            let b = estimate_speed(&LevelSetSeries::from_positions(0.1, shifted, xs).unwrap(), 0.5).unwrap();
            prop_assert!((a.speed - b.speed).abs() < 1e-12);
        }
    }
}
