//! Method-of-lines integration of the nonlocal predator–prey system
//!
//! ```text
//! u_t = d1 (J1 ∗ u - u) + r1 u (α(x - s t) - u - a v)
//! v_t = d2 (J2 ∗ v - v) + r2 v (-1 + b u - v)
//! ```
//!
//! on a fixed uniform grid. Fields are extended by zero outside the grid and
//! advanced with classical RK4 at a fixed step.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::habitat::HabitatProfile;
use crate::kernels::{Kernel, Stencil};

/// Negative values down to this are roundoff and are clamped silently.
pub const ROUNDOFF_UNDERSHOOT: f64 = 1e-12;
/// Negative values below this abort the run.
pub const UNSTABLE_UNDERSHOOT: f64 = 1e-10;
/// Tolerance on the invariant box `0 ≤ u ≤ 1`, `0 ≤ v ≤ b - 1`.
pub const H_TOL: f64 = 1e-8;
/// Boundary-to-peak ratio that triggers a domain-too-small warning.
pub const BOUNDARY_WARN: f64 = 1e-6;
/// Boundary-to-peak ratio that aborts the run.
pub const BOUNDARY_FAIL: f64 = 1e-3;
/// Safety factor in the step bound.
pub const DT_SAFETY: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub d1: f64,
    pub d2: f64,
    pub r1: f64,
    pub r2: f64,
    pub a: f64,
    pub b: f64,
    pub s: f64,
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d1", self.d1),
            ("d2", self.d2),
            ("r1", self.r1),
            ("r2", self.r2),
            ("a", self.a),
            ("b", self.b),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.s >= 0.0 && self.s.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "shift speed s must be nonnegative, got {}",
                self.s
            )));
        }
        Ok(())
    }

    /// Upper bound of the predator box, `b - 1` (zero when `b ≤ 1`).
    pub fn v_cap(&self) -> f64 {
        (self.b - 1.0).max(0.0)
    }

    /// `0.2 / (max{d1, d2} + r1 (ᾱ + 1 + a (b - 1)) + 2 r2 b)`.
    pub fn dt_max(&self, alpha_bar: f64) -> f64 {
        DT_SAFETY
            / (self.d1.max(self.d2)
                + self.r1 * (alpha_bar + 1.0 + self.a * self.v_cap())
                + 2.0 * self.r2 * self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    n: usize,
    dx: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams(format!("grid needs n ≥ 2, got {n}")));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidParams(format!(
                "grid bounds must satisfy x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        Ok(Grid {
            x_min,
            n,
            dx: (x_max - x_min) / (n - 1) as f64,
        })
    }

    /// Grid starting at `x_min` with spacing `dx` that reaches at least `x_max`.
    pub fn with_spacing(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidParams(format!("dx must be positive, got {dx}")));
        }
        if !(x_max > x_min) {
            return Err(Error::InvalidParams(format!(
                "grid bounds must satisfy x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        let cells = ((x_max - x_min) / dx - 1e-9).ceil() as usize;
        Ok(Grid {
            x_min,
            n: cells + 1,
            dx,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.n - 1)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Species {
    Prey,
    Predator,
}

impl Species {
    pub fn label(self) -> &'static str {
        match self {
            Species::Prey => "u",
            Species::Predator => "v",
        }
    }
}

impl State {
    pub fn field(&self, species: Species) -> &[f64] {
        match species {
            Species::Prey => &self.u,
            Species::Predator => &self.v,
        }
    }
}

/// One component of the initial data.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Zero,
    /// `height · ½ (1 + cos(π (x - center) / half_width))` on
    /// `|x - center| < half_width`.
    Bump {
        center: f64,
        half_width: f64,
        height: f64,
    },
    /// Values at the grid points.
    Tabulated(Vec<f64>),
}

impl Profile {
    fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        match self {
            Profile::Zero => Ok(vec![0.0; grid.len()]),
            Profile::Bump {
                center,
                half_width,
                height,
            } => {
                if !(*half_width > 0.0) {
                    return Err(Error::InvalidParams(format!(
                        "bump half-width must be positive, got {half_width}"
                    )));
                }
                Ok(grid
                    .points()
                    .map(|x| {
                        let z = (x - center) / half_width;
                        if z.abs() < 1.0 {
                            height * 0.5 * (1.0 + (std::f64::consts::PI * z).cos())
                        } else {
                            0.0
                        }
                    })
                    .collect())
            }
            Profile::Tabulated(values) => {
                if values.len() != grid.len() {
                    return Err(Error::InvalidParams(format!(
                        "tabulated initial data has {} values for {} grid points",
                        values.len(),
                        grid.len()
                    )));
                }
                Ok(values.clone())
            }
        }
    }

    /// Peak value of the profile.
    pub fn height(&self) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Bump { height, .. } => *height,
            Profile::Tabulated(v) => v.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Closed interval containing the support, if the profile is not zero.
    pub fn support(&self, grid: &Grid) -> Option<(f64, f64)> {
        match self {
            Profile::Zero => None,
            Profile::Bump {
                center, half_width, ..
            } => Some((center - half_width, center + half_width)),
            Profile::Tabulated(v) => {
                let first = v.iter().position(|&x| x != 0.0)?;
                let last = v.iter().rposition(|&x| x != 0.0)?;
                Some((grid.x(first), grid.x(last)))
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Profile::Zero => true,
            Profile::Bump { height, .. } => *height == 0.0,
            Profile::Tabulated(v) => v.iter().all(|&x| x == 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub u: Profile,
    pub v: Profile,
}

impl InitialData {
    /// Union of both supports.
    pub fn support(&self, grid: &Grid) -> Option<(f64, f64)> {
        match (self.u.support(grid), self.v.support(grid)) {
            (Some(a), Some(b)) => Some((a.0.min(b.0), a.1.max(b.1))),
            (a, b) => a.or(b),
        }
    }
}

/// Samples the initial data on the grid and checks it lies in `H`.
pub fn make_initial(spec: &InitialData, grid: &Grid, params: &Params) -> Result<State> {
    let u = spec.u.sample(grid)?;
    let v = spec.v.sample(grid)?;
    let v_cap = params.v_cap();
    for (name, field, cap) in [("u", &u, 1.0), ("v", &v, v_cap)] {
        if let Some(bad) = field.iter().find(|&&x| !(x >= 0.0) || x > cap) {
            return Err(Error::HViolation(format!(
                "initial {name} takes value {bad} outside [0, {cap}]"
            )));
        }
    }
    for (name, profile, field) in [("u", &spec.u, &u), ("v", &spec.v, &v)] {
        if !profile.is_zero() && !field.iter().any(|&x| x > 0.0) {
            return Err(Error::Resolution(format!(
                "initial {name} has no positive sample on the grid (dx = {})",
                grid.dx()
            )));
        }
    }
    Ok(State { t: 0.0, u, v })
}

/// `Σ_j w_j f[i + j] dx - f[i]`, with `f` extended by zero.
pub fn nonlocal_op(stencil: &Stencil, field: &[f64], index: usize) -> f64 {
    let h = stencil.halfwidth() as isize;
    let n = field.len() as isize;
    let i = index as isize;
    let mut acc = 0.0;
    for (k, &w) in stencil.weights().iter().enumerate() {
        let j = i + k as isize - h;
        if j >= 0 && j < n {
            acc += w * field[j as usize];
        }
    }
    acc * stencil.dx() - field[index]
}

/// `out = J ∗ f` on the whole grid (zero extension). Only the window reachable
/// from the nonzero span of `f` is computed. Accumulation order is fixed.
fn convolve_into(stencil: &Stencil, field: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let n = field.len();
    let Some(first) = field.iter().position(|&x| x != 0.0) else {
        return;
    };
    let last = field.iter().rposition(|&x| x != 0.0).unwrap_or(first);
    let h = stencil.halfwidth();
    let dx = stencil.dx();
    let lo = first.saturating_sub(h);
    let hi = (last + h).min(n - 1);
    for (k, &w) in stencil.weights().iter().enumerate() {
        let wd = w * dx;
        if wd == 0.0 {
            continue;
        }
        // out[i] += wd * field[i + k - h] for all i with a valid source index.
        let i_start = lo.max(h.saturating_sub(k));
        let i_end = (hi + 1).min((n + h).saturating_sub(k));
        if i_start >= i_end {
            continue;
        }
        let src = &field[i_start + k - h..i_end + k - h];
        for (o, &f) in out[i_start..i_end].iter_mut().zip(src) {
            *o += wd * f;
        }
    }
}

/// The discretized right-hand side with its frozen coefficients.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: Params,
    pub habitat: HabitatProfile,
    pub grid: Grid,
    stencil1: Stencil,
    stencil2: Stencil,
    xs: Vec<f64>,
}

impl Model {
    pub fn new(
        params: Params,
        habitat: HabitatProfile,
        j1: &Kernel,
        j2: &Kernel,
        grid: Grid,
    ) -> Result<Self> {
        params.validate()?;
        let stencil1 = j1.discretize(grid.dx())?;
        let stencil2 = j2.discretize(grid.dx())?;
        let xs = grid.points().collect();
        Ok(Model {
            params,
            habitat,
            grid,
            stencil1,
            stencil2,
            xs,
        })
    }

    pub fn stencil(&self, species: Species) -> &Stencil {
        match species {
            Species::Prey => &self.stencil1,
            Species::Predator => &self.stencil2,
        }
    }

    pub fn dt_max(&self) -> f64 {
        self.params.dt_max(self.habitat.alpha_bar())
    }

    /// Pointwise `(du/dt, dv/dt)` at `state`.
    pub fn rhs(&self, state: &State) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.grid.len();
        let mut du = vec![0.0; n];
        let mut dv = vec![0.0; n];
        let mut conv = vec![0.0; n];
        self.rhs_into(state.t, &state.u, &state.v, &mut du, &mut dv, &mut conv)?;
        Ok((du, dv))
    }

    fn rhs_into(
        &self,
        t: f64,
        u: &[f64],
        v: &[f64],
        du: &mut [f64],
        dv: &mut [f64],
        conv: &mut [f64],
    ) -> Result<()> {
        if let Some(i) = u.iter().chain(v).position(|x| x.is_nan()) {
            return Err(Error::NumericFailure {
                what: format!("NaN in state at t = {t}, flat index {i}"),
                residual: f64::NAN,
            });
        }
        let p = &self.params;
        let shift = p.s * t;

        convolve_into(&self.stencil1, u, conv);
        for i in 0..u.len() {
            let alpha = self.habitat.alpha(self.xs[i] - shift);
            du[i] = p.d1 * (conv[i] - u[i]) + p.r1 * u[i] * (alpha - u[i] - p.a * v[i]);
        }
        convolve_into(&self.stencil2, v, conv);
        for i in 0..v.len() {
            dv[i] = p.d2 * (conv[i] - v[i]) + p.r2 * v[i] * (-1.0 + p.b * u[i] - v[i]);
        }
        Ok(())
    }

    /// One RK4 step from `state`, returning the advanced state.
    pub fn step(&self, state: &State, dt: f64) -> Result<State> {
        let mut next = state.clone();
        let mut work = Workspace::new(self.grid.len());
        self.step_in_place(&mut next, dt, &mut work)?;
        Ok(next)
    }

    /// Advances `state` by `dt` in place; returns the number of clamped
    /// undershoots beyond roundoff.
    pub fn step_in_place(&self, state: &mut State, dt: f64, w: &mut Workspace) -> Result<usize> {
        let dt_max = self.dt_max();
        if !(dt > 0.0) || dt > dt_max * (1.0 + 1e-12) {
            return Err(Error::InvalidParams(format!(
                "dt = {dt} outside (0, dt_max = {dt_max}]"
            )));
        }
        let t = state.t;
        let half = 0.5 * dt;

        self.rhs_into(t, &state.u, &state.v, &mut w.ku[0], &mut w.kv[0], &mut w.conv)?;
        for stage in 1..4 {
            let c = if stage == 3 { dt } else { half };
            let (prev_u, prev_v) = (&w.ku[stage - 1], &w.kv[stage - 1]);
            for i in 0..state.u.len() {
                w.tu[i] = state.u[i] + c * prev_u[i];
                w.tv[i] = state.v[i] + c * prev_v[i];
            }
            let (ku, kv) = (&mut w.ku[stage], &mut w.kv[stage]);
            self.rhs_into(t + c, &w.tu, &w.tv, ku, kv, &mut w.conv)?;
        }
        let sixth = dt / 6.0;
        for i in 0..state.u.len() {
            state.u[i] += sixth * (w.ku[0][i] + 2.0 * w.ku[1][i] + 2.0 * w.ku[2][i] + w.ku[3][i]);
            state.v[i] += sixth * (w.kv[0][i] + 2.0 * w.kv[1][i] + 2.0 * w.kv[2][i] + w.kv[3][i]);
        }
        state.t = t + dt;

        let mut suspect = 0;
        for x in state.u.iter_mut().chain(state.v.iter_mut()) {
            if *x < 0.0 {
                if *x < -UNSTABLE_UNDERSHOOT {
                    return Err(Error::Instability {
                        t: state.t,
                        value: *x,
                    });
                }
                if *x < -ROUNDOFF_UNDERSHOOT {
                    suspect += 1;
                }
                *x = 0.0;
            }
        }
        Ok(suspect)
    }
}

/// Scratch buffers reused across RK4 steps.
#[derive(Debug, Clone)]
pub struct Workspace {
    ku: [Vec<f64>; 4],
    kv: [Vec<f64>; 4],
    tu: Vec<f64>,
    tv: Vec<f64>,
    conv: Vec<f64>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        let z = || vec![0.0; n];
        Workspace {
            ku: [z(), z(), z(), z()],
            kv: [z(), z(), z(), z()],
            tu: z(),
            tv: z(),
            conv: z(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallPolicy {
    /// Contamination at this wall is monitored and can abort the run.
    Monitor,
    /// The wall is outside the region of interest (one-sided runs).
    Ignore,
}

impl WallPolicy {
    pub fn name(self) -> &'static str {
        match self {
            WallPolicy::Monitor => "monitor",
            WallPolicy::Ignore => "ignore",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "monitor" => Ok(WallPolicy::Monitor),
            "ignore" => Ok(WallPolicy::Ignore),
            other => Err(Error::Config(format!("unknown wall policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSettings {
    pub dt: f64,
    pub t_end: f64,
    /// Steps between stored snapshots.
    pub snapshot_stride: usize,
    pub left_wall: WallPolicy,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub steps: usize,
    pub dt: f64,
    /// Snapshots where some value left `H` by more than [`H_TOL`].
    pub h_violations: usize,
    pub max_u: f64,
    pub max_v: f64,
    pub min_value: f64,
    /// Largest boundary-to-peak ratio seen at a monitored wall.
    pub worst_boundary_ratio: f64,
    /// Undershoots in `[-1e-10, -1e-12)` that were clamped.
    pub suspect_undershoots: usize,
    pub one_sided: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    pub params: Params,
    pub snapshots: Vec<State>,
    pub diagnostics: Diagnostics,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.snapshots.last().expect("trajectory holds at least the initial state")
    }

    pub fn t_end(&self) -> f64 {
        self.final_state().t
    }

    /// Writes `t,x,u,v` rows for every `stride`-th snapshot (the final one is
    /// always included).
    pub fn write_csv(&self, path: &Path, stride: usize) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(out, "t,x,u,v").map_err(io)?;
        let last = self.snapshots.len() - 1;
        for (k, snap) in self.snapshots.iter().enumerate() {
            if k % stride.max(1) != 0 && k != last {
                continue;
            }
            let t = fmt_f64(snap.t);
            for (i, x) in self.grid.points().enumerate() {
                writeln!(
                    out,
                    "{t},{},{},{}",
                    fmt_f64(x),
                    fmt_f64(snap.u[i]),
                    fmt_f64(snap.v[i])
                )
                .map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }
}

/// Integrates from `initial` to `settings.t_end`. The step is shrunk so that
/// a whole number of steps lands exactly on `t_end`.
pub fn simulate(model: &Model, initial: State, settings: &SimulationSettings) -> Result<Trajectory> {
    if !(settings.t_end > 0.0) {
        return Err(Error::InvalidParams(format!(
            "horizon must be positive, got {}",
            settings.t_end
        )));
    }
    let steps = (settings.t_end / settings.dt - 1e-9).ceil().max(1.0) as usize;
    let dt = settings.t_end / steps as f64;
    let stride = settings.snapshot_stride.max(1);
    let v_cap = model.params.v_cap();

    let mut diag = Diagnostics {
        dt,
        min_value: f64::INFINITY,
        one_sided: settings.left_wall == WallPolicy::Ignore,
        ..Diagnostics::default()
    };
    let mut state = initial;
    let t0 = state.t;
    record_bounds(&state, v_cap, &mut diag);
    let mut snapshots = vec![state.clone()];
    let mut work = Workspace::new(model.grid.len());
    let mut warned = false;

    for k in 1..=steps {
        diag.suspect_undershoots += model.step_in_place(&mut state, dt, &mut work)?;
        // Pin the clock to avoid drift from repeated addition.
        state.t = t0 + k as f64 * dt;
        for species in [Species::Prey, Species::Predator] {
            let h = model.stencil(species).halfwidth();
            check_walls(&state, species, h, settings.left_wall, &mut diag, &mut warned)?;
        }
        if k % stride == 0 || k == steps {
            record_bounds(&state, v_cap, &mut diag);
            snapshots.push(state.clone());
        }
    }
    diag.steps = steps;

    Ok(Trajectory {
        grid: model.grid,
        params: model.params,
        snapshots,
        diagnostics: diag,
    })
}

fn record_bounds(state: &State, v_cap: f64, diag: &mut Diagnostics) {
    let max_u = state.u.iter().copied().fold(0.0, f64::max);
    let max_v = state.v.iter().copied().fold(0.0, f64::max);
    let min = state
        .u
        .iter()
        .chain(&state.v)
        .copied()
        .fold(f64::INFINITY, f64::min);
    diag.max_u = diag.max_u.max(max_u);
    diag.max_v = diag.max_v.max(max_v);
    diag.min_value = diag.min_value.min(min);
    if max_u > 1.0 + H_TOL || max_v > v_cap + H_TOL || min < 0.0 {
        diag.h_violations += 1;
    }
}

fn check_walls(
    state: &State,
    species: Species,
    halo: usize,
    left: WallPolicy,
    diag: &mut Diagnostics,
    warned: &mut bool,
) -> Result<()> {
    let field = state.field(species);
    let peak = field.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Ok(());
    }
    let n = field.len();
    let halo = halo.clamp(1, n / 2);
    let mut sides = vec![("right", &field[n - halo..])];
    if left == WallPolicy::Monitor {
        sides.push(("left", &field[..halo]));
    }
    for (side, cells) in sides {
        let ratio = cells.iter().copied().fold(0.0, f64::max) / peak;
        diag.worst_boundary_ratio = diag.worst_boundary_ratio.max(ratio);
        if ratio > BOUNDARY_FAIL {
            return Err(Error::BoundaryContamination {
                t: state.t,
                species: species.label(),
                side,
                ratio,
            });
        }
        if ratio > BOUNDARY_WARN && !*warned {
            *warned = true;
            diag.warnings.push(format!(
                "domain too small: {} reaches {ratio:e} of peak at the {side} wall at t = {}",
                species.label(),
                state.t
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> Params {
        Params { d1: 1.0, d2: 1.0, r1: 1.0, r2: 1.0, a: 0.5, b: 2.0, s: 0.0 }
    }

    fn model(p: Params, grid: Grid) -> Model {
        let k = Kernel::raised_cosine(1.0).unwrap();
        Model::new(p, HabitatProfile::constant_one(), &k, &k, grid).unwrap()
    }

    #[test]
    fn grid_spacing() {
        let g = Grid::with_spacing(-1.0, 1.0, 0.1).unwrap();
        assert_eq!(g.len(), 21);
        assert!((g.x_max() - 1.0).abs() < 1e-12);
        let g = Grid::new(0.0, 4.0, 5).unwrap();
        assert_eq!(g.dx(), 1.0);
        assert!(Grid::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn nonlocal_op_cases() {
        let k = Kernel::raised_cosine(1.0).unwrap();
        let st = k.discretize(0.125).unwrap();
        let zero = vec![0.0; 50];
        assert_eq!(nonlocal_op(&st, &zero, 25), 0.0);
        let ones = vec![3.0; 50];
        assert!(nonlocal_op(&st, &ones, 25).abs() < 1e-12);

        // indicator on [20, 29]; oracle: direct summation of J(x_i - x_j) dx
        let field: Vec<f64> = (0..50).map(|i| if (20..30).contains(&i) { 1.0 } else { 0.0 }).collect();
        let dx = 0.125;
        let mass: f64 = (-8..=8).map(|j| k.evaluate(j as f64 * dx)).sum::<f64>() * dx;
        for idx in [24usize, 31, 35] {
            let direct: f64 = (0..50)
                .map(|j| k.evaluate((idx as f64 - j as f64) * dx) * field[j] * dx)
                .sum::<f64>()
                / mass
                - field[idx];
            let got = nonlocal_op(&st, &field, idx);
            assert!((got - direct).abs() < 1e-14, "{idx}: {got} vs {direct}");
        }
        assert!(nonlocal_op(&st, &field, 24) < 0.0);
        assert!(nonlocal_op(&st, &field, 31) > 0.0);
        assert!(nonlocal_op(&st, &field, 35) > 0.0);
    }

    #[test]
    fn convolution_matches_pointwise_operator() {
        let k = Kernel::raised_cosine(1.0).unwrap();
        let st = k.discretize(0.1).unwrap();
        let field: Vec<f64> = (0..80).map(|i| if (5..40).contains(&i) { (i as f64 * 0.3).sin().abs() } else { 0.0 }).collect();
        let mut out = vec![0.0; 80];
        convolve_into(&st, &field, &mut out);
        for i in 0..80 {
            let expect = nonlocal_op(&st, &field, i) + field[i];
            assert!((out[i] - expect).abs() < 1e-13, "{i}");
        }
    }

    #[test]
    fn rhs_fixed_points() {
        let p = params();
        let grid = Grid::with_spacing(-10.0, 10.0, 0.125).unwrap();
        let m = model(p, grid);
        let n = grid.len();
        let zero = State { t: 0.0, u: vec![0.0; n], v: vec![0.0; n] };
        let (du, dv) = m.rhs(&zero).unwrap();
        assert!(du.iter().chain(&dv).all(|&x| x == 0.0));

        let sat = State { t: 0.0, u: vec![1.0; n], v: vec![0.0; n] };
        let (du, _) = m.rhs(&sat).unwrap();
        assert!(du[n / 2].abs() < 1e-12);

        let coex = State { t: 0.0, u: vec![1.0; n], v: vec![p.b - 1.0; n] };
        let (du, dv) = m.rhs(&coex).unwrap();
        assert!((du[n / 2] + p.r1 * p.a * (p.b - 1.0)).abs() < 1e-12);
        assert!(dv[n / 2].abs() < 1e-12);
    }

    #[test]
    fn rhs_rejects_nan() {
        let grid = Grid::with_spacing(0.0, 5.0, 0.125).unwrap();
        let m = model(params(), grid);
        let mut s = State { t: 0.0, u: vec![0.1; grid.len()], v: vec![0.0; grid.len()] };
        s.u[3] = f64::NAN;
        assert!(matches!(m.rhs(&s), Err(Error::NumericFailure { .. })));
    }

    #[test]
    fn zero_state_stays_zero() {
        let grid = Grid::with_spacing(0.0, 5.0, 0.125).unwrap();
        let m = model(params(), grid);
        let s = State { t: 0.0, u: vec![0.0; grid.len()], v: vec![0.0; grid.len()] };
        let dt = m.dt_max();
        let next = m.step(&s, dt).unwrap();
        assert_eq!(next.u, s.u);
        assert_eq!(next.v, s.v);
        assert!(m.step(&s, 2.0 * dt).is_err());
    }

    #[test]
    fn uniform_prey_follows_logistic() {
        // Interior cells stay spatially uniform: boundary effects of the zero
        // extension decay like (d1 t)^m / m! over m stencil widths.
        let p = Params { d1: 0.05, d2: 0.05, r1: 1.0, r2: 0.1, a: 0.1, b: 1.5, s: 0.0 };
        let grid = Grid::with_spacing(-40.0, 40.0, 0.125).unwrap();
        let m = model(p, grid);
        let u0 = 0.1;
        let n = grid.len();
        let mut s = State { t: 0.0, u: vec![u0; n], v: vec![0.0; n] };
        let dt = m.dt_max();
        let mut w = Workspace::new(n);
        for _ in 0..100 {
            m.step_in_place(&mut s, dt, &mut w).unwrap();
        }
        let t = 100.0 * dt;
        let exact = u0 * t.exp() / (1.0 - u0 + u0 * t.exp());
        assert!((s.u[n / 2] - exact).abs() < 1e-6, "{} vs {exact}", s.u[n / 2]);
    }

    #[test]
    fn rk4_richardson_ratio() {
        let p = Params { d1: 0.1, d2: 0.1, r1: 1.0, r2: 0.1, a: 0.1, b: 1.5, s: 0.0 };
        let grid = Grid::with_spacing(-30.0, 30.0, 0.125).unwrap();
        let m = model(p, grid);
        let n = grid.len();
        let u0 = 0.05;
        let s = State { t: 0.0, u: vec![u0; n], v: vec![0.0; n] };
        let dt = m.dt_max();
        let one = m.step(&s, dt).unwrap();
        let two = m.step(&m.step(&s, dt / 2.0).unwrap(), dt / 2.0).unwrap();
        let exact = u0 * dt.exp() / (1.0 - u0 + u0 * dt.exp());
        let e1 = one.u[n / 2] - exact;
        let e2 = two.u[n / 2] - exact;
        let ratio = e1 / e2;
        assert!((ratio - 16.0).abs() < 3.0, "ratio {ratio}");
    }

    #[test]
    fn initial_data_geometry_and_bounds() {
        let p = params();
        let grid = Grid::with_spacing(-5.0, 5.0, 0.1).unwrap();
        let spec = InitialData {
            u: Profile::Bump { center: 0.0, half_width: 2.0, height: 0.5 },
            v: Profile::Zero,
        };
        let st = make_initial(&spec, &grid, &p).unwrap();
        let positive = st.u.iter().filter(|&&x| x > 0.0).count();
        assert!((39..=41).contains(&positive), "{positive}");

        let edge = InitialData { u: Profile::Bump { center: 0.0, half_width: 2.0, height: 1.0 }, v: Profile::Zero };
        assert!(make_initial(&edge, &grid, &p).is_ok());
        let over = InitialData { u: Profile::Bump { center: 0.0, half_width: 2.0, height: 1.5 }, v: Profile::Zero };
        assert!(matches!(make_initial(&over, &grid, &p), Err(Error::HViolation(_))));
        let v_over = InitialData { u: Profile::Zero, v: Profile::Bump { center: 0.0, half_width: 2.0, height: 1.01 } };
        assert!(matches!(make_initial(&v_over, &grid, &p), Err(Error::HViolation(_))));
        let thin = InitialData { u: Profile::Bump { center: 0.05, half_width: 0.04, height: 0.5 }, v: Profile::Zero };
        assert!(matches!(make_initial(&thin, &grid, &p), Err(Error::Resolution(_))));
    }

    #[test]
    fn predator_alone_decays() {
        let p = params();
        let grid = Grid::with_spacing(-30.0, 30.0, 0.125).unwrap();
        let m = model(p, grid);
        let init = make_initial(
            &InitialData { u: Profile::Zero, v: Profile::Bump { center: 0.0, half_width: 3.0, height: 0.8 } },
            &grid,
            &p,
        )
        .unwrap();
        let settings = SimulationSettings { dt: m.dt_max(), t_end: 10.0, snapshot_stride: 10, left_wall: WallPolicy::Monitor };
        let traj = simulate(&m, init, &settings).unwrap();
        let sup: Vec<f64> = traj.snapshots.iter().map(|s| s.v.iter().copied().fold(0.0, f64::max)).collect();
        assert!(sup.windows(2).all(|w| w[1] <= w[0]));
        assert!(traj.snapshots.iter().all(|s| s.u.iter().all(|&x| x == 0.0)));
        assert!(*sup.last().unwrap() < 0.8 * (-10.0f64).exp());
        assert_eq!(traj.diagnostics.h_violations, 0);
    }

    #[test]
    fn wall_contamination_is_fatal() {
        let p = params();
        let grid = Grid::with_spacing(-6.0, 6.0, 0.125).unwrap();
        let m = model(p, grid);
        let init = make_initial(
            &InitialData { u: Profile::Bump { center: 0.0, half_width: 2.0, height: 0.5 }, v: Profile::Zero },
            &grid,
            &p,
        )
        .unwrap();
        let settings = SimulationSettings { dt: m.dt_max(), t_end: 40.0, snapshot_stride: 10, left_wall: WallPolicy::Monitor };
        let err = simulate(&m, init, &settings).unwrap_err();
        assert!(matches!(err, Error::BoundaryContamination { .. }), "{err}");
    }
}
