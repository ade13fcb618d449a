//! Line-oriented `section.key = value` experiment configuration.
//!
//! Every default is filled in at resolution time, and [`ExperimentConfig::echo`]
//! writes the fully resolved configuration back in the same format.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::dynamics::{
    make_initial, Grid, InitialData, Model, Params, Profile, SimulationSettings, State, WallPolicy,
};
use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::habitat::{HabitatFamily, HabitatProfile};
use crate::kernels::{Kernel, KernelFamily};
use crate::speeds::SpeedProblem;

/// Default grid spacing is the smallest kernel radius over this.
pub const DEFAULT_CELLS_PER_RADIUS: f64 = 16.0;

/// Fronts are assumed to move no faster than this multiple of the fastest
/// computed speed when sizing the grid.
pub const FRONT_SPEED_MARGIN: f64 = 1.1;

/// Extra kernel radii kept between the furthest front and the wall.
pub const WALL_RADII: f64 = 8.0;

const KEYS: &[&str] = &[
    "model.d1",
    "model.d2",
    "model.r1",
    "model.r2",
    "model.a",
    "model.b",
    "model.s",
    "kernel1.family",
    "kernel1.radius",
    "kernel1.table",
    "kernel2.family",
    "kernel2.radius",
    "kernel2.table",
    "habitat.family",
    "habitat.A",
    "habitat.L",
    "habitat.table",
    "grid.x_min",
    "grid.x_max",
    "grid.dx",
    "grid.left_wall",
    "initial_u.profile",
    "initial_u.center",
    "initial_u.half_width",
    "initial_u.height",
    "initial_v.profile",
    "initial_v.center",
    "initial_v.half_width",
    "initial_v.height",
    "solver.dt",
    "solver.t_end",
    "solver.snapshot_stride",
    "observer.theta",
    "observer.t_window",
    "observer.epsilon",
    "observer.eta_fraction",
    "observer.eta",
    "observer.speed_window",
    "subsolution.delta1",
    "subsolution.delta2",
    "subsolution.m_offset",
    "subsolution.c",
    "output.csv_stride",
    "run.label",
];

/// Raw values keyed by `section.key`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `section.key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::UnknownKey(key.to_string()));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        Ok(RawConfig { entries })
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::UnknownKey(key.to_string()));
        }
        self.entries.insert(key.to_string(), value.into());
        Ok(())
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.str(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}` as a number")))
            })
            .transpose()
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn required(&self, key: &str) -> Result<f64> {
        self.f64(key)?
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub radius: f64,
    pub table: Option<PathBuf>,
}

impl KernelSpec {
    pub fn build(&self) -> Result<Kernel> {
        match self.family {
            KernelFamily::RaisedCosine => Kernel::raised_cosine(self.radius),
            KernelFamily::SmoothBump => Kernel::smooth_bump(self.radius),
            KernelFamily::Tabulated => {
                let path = self.table.as_ref().ok_or_else(|| {
                    Error::Config("tabulated kernel needs a `table` path".into())
                })?;
                Kernel::from_table_file(path)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HabitatSpec {
    pub family: HabitatFamily,
    pub depth: f64,
    pub length: f64,
    pub table: Option<PathBuf>,
}

impl HabitatSpec {
    pub fn build(&self) -> Result<HabitatProfile> {
        match self.family {
            HabitatFamily::Logistic => HabitatProfile::logistic(self.depth, self.length),
            HabitatFamily::PiecewiseLinear => HabitatProfile::piecewise_linear(self.depth, self.length),
            HabitatFamily::ConstantOne => Ok(HabitatProfile::constant_one()),
            HabitatFamily::Tabulated => {
                let path = self.table.as_ref().ok_or_else(|| {
                    Error::Config("tabulated habitat needs a `table` path".into())
                })?;
                HabitatProfile::from_table_file(path)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    pub left_wall: WallPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSpec {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverSpec {
    pub theta: f64,
    pub t_window: f64,
    pub epsilon: f64,
    pub eta_fraction: f64,
    /// Overrides `eta_fraction` when set.
    pub eta: Option<f64>,
    /// Trailing fraction of snapshots used for the speed fit.
    pub speed_window: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsolutionSpec {
    pub delta1: f64,
    pub delta2: f64,
    /// `m = m* - m_offset`.
    pub m_offset: f64,
    /// Frame speed; `(s + s̲)/2` when unset.
    pub c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: Params,
    pub kernel1: KernelSpec,
    pub kernel2: KernelSpec,
    pub habitat: HabitatSpec,
    pub grid: GridSpec,
    pub initial: InitialData,
    pub solver: SolverSpec,
    pub observer: ObserverSpec,
    pub subsolution: SubsolutionSpec,
    /// Every `csv_stride`-th snapshot goes to the snapshots CSV.
    pub csv_stride: usize,
    pub label: String,
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    ExperimentConfig::resolve(&RawConfig::parse(&text)?, base)
}

fn profile_from(raw: &RawConfig, section: &str, default_height: f64) -> Result<Profile> {
    let key = |k: &str| format!("{section}.{k}");
    match raw.str(&key("profile")).unwrap_or("bump") {
        "zero" => {
            for k in ["center", "half_width", "height"] {
                if raw.str(&key(k)).is_some() {
                    return Err(Error::Config(format!("`{}` given for a zero profile", key(k))));
                }
            }
            Ok(Profile::Zero)
        }
        "bump" => Ok(Profile::Bump {
            center: raw.f64_or(&key("center"), 0.0)?,
            half_width: raw.f64_or(&key("half_width"), 5.0)?,
            height: raw.f64_or(&key("height"), default_height)?,
        }),
        other => Err(Error::Config(format!("`{}`: unknown profile `{other}`", key("profile")))),
    }
}

fn path_from(raw: &RawConfig, key: &str, base: &Path) -> Option<PathBuf> {
    raw.str(key).map(|p| {
        let p = PathBuf::from(p);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    })
}

/// Lowest and highest point carrying initial mass, if any.
fn initial_extent(init: &InitialData) -> Option<(f64, f64)> {
    [&init.u, &init.v]
        .into_iter()
        .filter_map(|p| match p {
            Profile::Bump { center, half_width, height } if *height > 0.0 => {
                Some((center - half_width, center + half_width))
            }
            _ => None,
        })
        .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
}

impl ExperimentConfig {
    /// Fills defaults and checks cross-field consistency. Relative table
    /// paths are taken relative to `base`.
    pub fn resolve(raw: &RawConfig, base: &Path) -> Result<Self> {
        let params = Params {
            d1: raw.required("model.d1")?,
            d2: raw.required("model.d2")?,
            r1: raw.required("model.r1")?,
            r2: raw.required("model.r2")?,
            a: raw.required("model.a")?,
            b: raw.required("model.b")?,
            s: raw.f64_or("model.s", 0.0)?,
        };
        params.validate()?;

        let kernel_spec = |n: &str| -> Result<KernelSpec> {
            let family = KernelFamily::parse(raw.str(&format!("{n}.family")).unwrap_or("raised_cosine"))?;
            let table = path_from(raw, &format!("{n}.table"), base);
            if table.is_some() != (family == KernelFamily::Tabulated) {
                return Err(Error::Config(format!(
                    "`{n}.table` is required for, and only for, the tabulated family"
                )));
            }
            let radius = match family {
                KernelFamily::Tabulated => {
                    let k = KernelSpec { family, radius: 0.0, table: table.clone() }.build()?;
                    k.support_radius()
                }
                _ => raw.f64_or(&format!("{n}.radius"), 1.0)?,
            };
            Ok(KernelSpec { family, radius, table })
        };
        let kernel1 = kernel_spec("kernel1")?;
        let kernel2 = kernel_spec("kernel2")?;
        let (j1, j2) = (kernel1.build()?, kernel2.build()?);

        let habitat = HabitatSpec {
            family: HabitatFamily::parse(raw.str("habitat.family").unwrap_or("logistic"))?,
            depth: raw.f64_or("habitat.A", 0.5)?,
            length: raw.f64_or("habitat.L", 1.0)?,
            table: path_from(raw, "habitat.table", base),
        };
        if habitat.table.is_some() != (habitat.family == HabitatFamily::Tabulated) {
            return Err(Error::Config(
                "`habitat.table` is required for, and only for, the tabulated family".into(),
            ));
        }
        let profile = habitat.build()?;

        let initial = InitialData {
            u: profile_from(raw, "initial_u", 0.5)?,
            v: profile_from(raw, "initial_v", 0.5 * params.v_cap())?,
        };

        let dt_max = params.dt_max(profile.alpha_bar());
        let dt = raw.f64_or("solver.dt", dt_max)?;
        if !(dt > 0.0) || dt > dt_max {
            return Err(Error::Config(format!(
                "`solver.dt` = {dt} must lie in (0, dt_max = {dt_max}]"
            )));
        }
        let t_end = raw.f64_or("solver.t_end", 100.0)?;
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::Config(format!("`solver.t_end` must be positive, got {t_end}")));
        }
        let steps = (t_end / dt - 1e-9).ceil().max(1.0);
        let dt_eff = t_end / steps;
        let snapshot_stride = match raw.str("solver.snapshot_stride") {
            Some(v) => v.parse::<usize>().map_err(|_| {
                Error::Config(format!("`solver.snapshot_stride`: cannot parse `{v}` as a count"))
            })?,
            None => (1.0 / dt_eff).ceil() as usize,
        };
        if snapshot_stride == 0 {
            return Err(Error::Config("`solver.snapshot_stride` must be at least 1".into()));
        }

        // Grid sizing uses the faster of the two fronts.
        let s_star = SpeedProblem::new(params.d1, params.r1, 1.0, j1.clone())?.min_speed()?.c_bar;
        let s_lower = if params.b > 1.0 {
            SpeedProblem::new(params.d2, params.r2, params.b - 1.0, j2.clone())?
                .min_speed()?
                .c_bar
        } else {
            0.0
        };
        let reach = FRONT_SPEED_MARGIN * s_star.max(s_lower) * t_end
            + WALL_RADII * j1.support_radius().max(j2.support_radius());
        let (lo, hi) = initial_extent(&initial).unwrap_or((0.0, 0.0));
        let (need_min, need_max) = (lo - reach, hi + reach);
        let left_wall = WallPolicy::parse(raw.str("grid.left_wall").unwrap_or("monitor"))?;
        let grid = GridSpec {
            x_min: raw.f64_or("grid.x_min", need_min)?,
            x_max: raw.f64_or("grid.x_max", need_max)?,
            dx: raw.f64_or(
                "grid.dx",
                j1.support_radius().min(j2.support_radius()) / DEFAULT_CELLS_PER_RADIUS,
            )?,
            left_wall,
        };
        if grid.x_max < need_max {
            return Err(Error::Config(format!(
                "grid too small for the horizon: x_max = {} but at least {need_max} is required",
                grid.x_max
            )));
        }
        if left_wall == WallPolicy::Monitor && grid.x_min > need_min {
            return Err(Error::Config(format!(
                "grid too small for the horizon: x_min = {} but at most {need_min} is required \
                 (or set grid.left_wall = ignore)",
                grid.x_min
            )));
        }

        let observer = ObserverSpec {
            theta: raw.f64_or("observer.theta", 0.1)?,
            t_window: raw.f64_or("observer.t_window", 0.5)?,
            epsilon: raw.f64_or("observer.epsilon", 1e-2)?,
            eta_fraction: raw.f64_or("observer.eta_fraction", 0.1)?,
            eta: raw.f64("observer.eta")?,
            speed_window: raw.f64_or("observer.speed_window", 0.5)?,
        };
        if !(observer.theta > 0.0 && observer.theta < 1.0) {
            return Err(Error::Config(format!("`observer.theta` must lie in (0, 1), got {}", observer.theta)));
        }
        for (key, v) in [("observer.t_window", observer.t_window), ("observer.speed_window", observer.speed_window)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("`{key}` must lie in (0, 1], got {v}")));
            }
        }
        if !(observer.epsilon > 0.0) || !(observer.eta_fraction > 0.0 && observer.eta_fraction < 0.5) {
            return Err(Error::Config(
                "`observer.epsilon` must be positive and `observer.eta_fraction` in (0, 1/2)".into(),
            ));
        }

        let subsolution = SubsolutionSpec {
            delta1: raw.f64_or("subsolution.delta1", 0.05)?,
            delta2: raw.f64_or("subsolution.delta2", 0.05)?,
            m_offset: raw.f64_or("subsolution.m_offset", 0.01)?,
            c: raw.f64("subsolution.c")?,
        };
        if !(subsolution.m_offset > 0.0) {
            return Err(Error::Config("`subsolution.m_offset` must be positive".into()));
        }

        let csv_stride = match raw.str("output.csv_stride") {
            Some(v) => v.parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
                Error::Config(format!("`output.csv_stride`: expected a positive count, got `{v}`"))
            })?,
            None => 1,
        };

        let config = ExperimentConfig {
            params,
            kernel1,
            kernel2,
            habitat,
            grid,
            initial,
            solver: SolverSpec { dt, t_end, snapshot_stride },
            observer,
            subsolution,
            csv_stride,
            label: raw.str("run.label").unwrap_or("default").to_string(),
        };
        // Surface grid and initial-data errors now rather than mid-run.
        config.initial_state()?;
        Ok(config)
    }

    pub fn kernels(&self) -> Result<(Kernel, Kernel)> {
        Ok((self.kernel1.build()?, self.kernel2.build()?))
    }

    pub fn build_grid(&self) -> Result<Grid> {
        Grid::with_spacing(self.grid.x_min, self.grid.x_max, self.grid.dx)
    }

    pub fn model(&self) -> Result<Model> {
        let (j1, j2) = self.kernels()?;
        Model::new(self.params, self.habitat.build()?, &j1, &j2, self.build_grid()?)
    }

    pub fn initial_state(&self) -> Result<State> {
        make_initial(&self.initial, &self.build_grid()?, &self.params)
    }

    pub fn settings(&self) -> SimulationSettings {
        SimulationSettings {
            dt: self.solver.dt,
            t_end: self.solver.t_end,
            snapshot_stride: self.solver.snapshot_stride,
            left_wall: self.grid.left_wall,
        }
    }

    /// The resolved configuration in the input format.
    pub fn echo(&self) -> String {
        let mut lines: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| lines.push((k.to_string(), v));
        let p = &self.params;
        for (k, v) in [("d1", p.d1), ("d2", p.d2), ("r1", p.r1), ("r2", p.r2), ("a", p.a), ("b", p.b), ("s", p.s)] {
            put(&format!("model.{k}"), fmt_f64(v));
        }
        for (n, k) in [("kernel1", &self.kernel1), ("kernel2", &self.kernel2)] {
            put(&format!("{n}.family"), k.family.name().to_string());
            match &k.table {
                Some(t) => put(&format!("{n}.table"), t.display().to_string()),
                None => put(&format!("{n}.radius"), fmt_f64(k.radius)),
            }
        }
        let h = &self.habitat;
        put("habitat.family", h.family.name().to_string());
        put("habitat.A", fmt_f64(h.depth));
        put("habitat.L", fmt_f64(h.length));
        if let Some(t) = &h.table {
            put("habitat.table", t.display().to_string());
        }
        put("grid.x_min", fmt_f64(self.grid.x_min));
        put("grid.x_max", fmt_f64(self.grid.x_max));
        put("grid.dx", fmt_f64(self.grid.dx));
        put("grid.left_wall", self.grid.left_wall.name().to_string());
        for (n, prof) in [("initial_u", &self.initial.u), ("initial_v", &self.initial.v)] {
            match prof {
                Profile::Bump { center, half_width, height } => {
                    put(&format!("{n}.profile"), "bump".into());
                    put(&format!("{n}.center"), fmt_f64(*center));
                    put(&format!("{n}.half_width"), fmt_f64(*half_width));
                    put(&format!("{n}.height"), fmt_f64(*height));
                }
                _ => put(&format!("{n}.profile"), "zero".into()),
            }
        }
        put("solver.dt", fmt_f64(self.solver.dt));
        put("solver.t_end", fmt_f64(self.solver.t_end));
        put("solver.snapshot_stride", self.solver.snapshot_stride.to_string());
        let o = &self.observer;
        put("observer.theta", fmt_f64(o.theta));
        put("observer.t_window", fmt_f64(o.t_window));
        put("observer.epsilon", fmt_f64(o.epsilon));
        put("observer.eta_fraction", fmt_f64(o.eta_fraction));
        if let Some(eta) = o.eta {
            put("observer.eta", fmt_f64(eta));
        }
        put("observer.speed_window", fmt_f64(o.speed_window));
        let s = &self.subsolution;
        put("subsolution.delta1", fmt_f64(s.delta1));
        put("subsolution.delta2", fmt_f64(s.delta2));
        put("subsolution.m_offset", fmt_f64(s.m_offset));
        if let Some(c) = s.c {
            put("subsolution.c", fmt_f64(c));
        }
        put("output.csv_stride", self.csv_stride.to_string());
        put("run.label", self.label.clone());
        lines.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
