//! Shifting-habitat growth profiles `α(ξ)`, evaluated at `ξ = x - s t`.
//!
//! Profiles are nondecreasing, tend to `-A < 0` as `ξ → -∞` and to `1` as
//! `ξ → +∞`, and have bounded slope.

use crate::error::{Error, Result};

/// Tolerance for the limits `α(±∞)` on the reported tails.
pub const LIMIT_TOL: f64 = 1e-6;

/// Allowed decrease between consecutive validation samples.
pub const MONOTONE_TOL: f64 = 1e-12;

const VALIDATION_POINTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HabitatFamily {
    Logistic,
    PiecewiseLinear,
    ConstantOne,
    Tabulated,
}

impl HabitatFamily {
    pub fn name(self) -> &'static str {
        match self {
            HabitatFamily::Logistic => "logistic",
            HabitatFamily::PiecewiseLinear => "piecewise_linear",
            HabitatFamily::ConstantOne => "constant_one",
            HabitatFamily::Tabulated => "tabulated",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(HabitatFamily::Logistic),
            "piecewise_linear" => Ok(HabitatFamily::PiecewiseLinear),
            "constant_one" => Ok(HabitatFamily::ConstantOne),
            "tabulated" => Ok(HabitatFamily::Tabulated),
            other => Err(Error::Config(format!("unknown habitat family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Logistic,
    PiecewiseLinear,
    ConstantOne,
    /// Linear interpolation, constant beyond the first and last sample.
    Tabulated { xs: Vec<f64>, ys: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HabitatProfile {
    shape: Shape,
    depth: f64,
    length: f64,
}

impl HabitatProfile {
    /// `α(ξ) = -A + (1 + A) / (1 + e^{-ξ/L})`.
    pub fn logistic(depth: f64, length: f64) -> Result<Self> {
        check_shape(depth, length)?;
        Ok(HabitatProfile {
            shape: Shape::Logistic,
            depth,
            length,
        })
    }

    /// Linear ramp from `-A` at `ξ = -L` to `1` at `ξ = L`.
    pub fn piecewise_linear(depth: f64, length: f64) -> Result<Self> {
        check_shape(depth, length)?;
        Ok(HabitatProfile {
            shape: Shape::PiecewiseLinear,
            depth,
            length,
        })
    }

    /// `α ≡ 1`, the homogeneous favorable environment.
    pub fn constant_one() -> Self {
        HabitatProfile {
            shape: Shape::ConstantOne,
            depth: -1.0,
            length: 1.0,
        }
    }

    /// Sampled profile; the depth is read off the first sample.
    pub fn tabulated(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::InvalidParams(
                "tabulated habitat needs matching abscissae and values (at least 2)".into(),
            ));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParams(
                "tabulated habitat abscissae must be strictly increasing".into(),
            ));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite habitat sample".into()));
        }
        let depth = -ys[0];
        let length = 0.5 * (xs[xs.len() - 1] - xs[0]);
        Ok(HabitatProfile {
            shape: Shape::Tabulated { xs, ys },
            depth,
            length,
        })
    }

    /// Reads a two-column `ξ α` table (whitespace separated, `#` comments).
    pub fn from_table_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let (xs, ys) = crate::kernels::parse_table(&text).map_err(|e| match e {
            Error::InvalidKernel(msg) => Error::InvalidParams(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        Self::tabulated(xs, ys)
    }

    pub fn family(&self) -> HabitatFamily {
        match self.shape {
            Shape::Logistic => HabitatFamily::Logistic,
            Shape::PiecewiseLinear => HabitatFamily::PiecewiseLinear,
            Shape::ConstantOne => HabitatFamily::ConstantOne,
            Shape::Tabulated { .. } => HabitatFamily::Tabulated,
        }
    }

    /// `A = -α(-∞)`.
    pub fn depth(&self) -> f64 {
        self.depth
    }

    /// Transition length `L`.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// `ᾱ = max{-α(-∞), 1}`, the sup-norm bound of the profile.
    pub fn alpha_bar(&self) -> f64 {
        self.depth.max(1.0)
    }

    /// Slope bound `M_α` in closed form for the parametric families.
    pub fn derivative_bound(&self) -> f64 {
        let (a, l) = (self.depth, self.length);
        match &self.shape {
            Shape::Logistic => (1.0 + a) / (4.0 * l),
            Shape::PiecewiseLinear => (1.0 + a) / (2.0 * l),
            Shape::ConstantOne => 0.0,
            Shape::Tabulated { xs, ys } => xs
                .windows(2)
                .zip(ys.windows(2))
                .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
                .fold(0.0, f64::max),
        }
    }

    pub fn alpha(&self, xi: f64) -> f64 {
        let (a, l) = (self.depth, self.length);
        match &self.shape {
            Shape::Logistic => -a + (1.0 + a) / (1.0 + (-xi / l).exp()),
            Shape::PiecewiseLinear => {
                if xi <= -l {
                    -a
                } else if xi >= l {
                    1.0
                } else {
                    -a + (1.0 + a) * (xi + l) / (2.0 * l)
                }
            }
            Shape::ConstantOne => 1.0,
            Shape::Tabulated { xs, ys } => {
                let n = xs.len();
                if xi <= xs[0] {
                    return ys[0];
                }
                if xi >= xs[n - 1] {
                    return ys[n - 1];
                }
                let i = xs.partition_point(|&v| v <= xi);
                let t = (xi - xs[i - 1]) / (xs[i] - xs[i - 1]);
                ys[i - 1] + t * (ys[i] - ys[i - 1])
            }
        }
    }

    /// `α(x - s t)`.
    pub fn alpha_shifted(&self, x: f64, t: f64, s: f64) -> f64 {
        self.alpha(x - s * t)
    }

    /// Tail thresholds `(ξ_lo, ξ_hi)` beyond which the limits hold to
    /// [`LIMIT_TOL`].
    pub fn tail_thresholds(&self) -> (f64, f64) {
        let l = self.length;
        match &self.shape {
            Shape::Logistic => {
                let hi = l * ((1.0 + self.depth) / LIMIT_TOL - 1.0).ln();
                (-hi, hi)
            }
            Shape::PiecewiseLinear => (-l, l),
            Shape::ConstantOne => (0.0, 0.0),
            Shape::Tabulated { xs, .. } => (xs[0], xs[xs.len() - 1]),
        }
    }

    /// Numerically checks (α1)–(α3) on 4096 points over `[-20L, 20L]`, the
    /// tails, and optionally an extra window (the simulation domain in the
    /// moving coordinate).
    pub fn validate(&self, extra: Option<(f64, f64)>) -> HabitatReport {
        let (xi_lo, xi_hi) = self.tail_thresholds();
        let span = 20.0 * self.length;
        let mut grid = linspace(-span, span, VALIDATION_POINTS);
        grid.extend(linspace(xi_lo - span, xi_lo, 256));
        grid.extend(linspace(xi_hi, xi_hi + span, 256));
        if let Some((a, b)) = extra {
            grid.extend(linspace(a, b, VALIDATION_POINTS));
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();

        let values: Vec<f64> = grid.iter().map(|&x| self.alpha(x)).collect();
        let mut failures = Vec::new();

        let (worst_drop, drop_at) = grid
            .windows(2)
            .zip(values.windows(2))
            .map(|(x, v)| (v[0] - v[1], x[1]))
            .fold((f64::NEG_INFINITY, f64::NAN), |acc, d| if d.0 > acc.0 { d } else { acc });
        let monotone = worst_drop <= MONOTONE_TOL;
        if !monotone {
            failures.push(format!(
                "(α1) profile decreases by {worst_drop:e} at ξ = {drop_at}"
            ));
        }

        let lower_err = grid
            .iter()
            .zip(&values)
            .filter(|(&x, _)| x <= xi_lo)
            .map(|(_, &v)| (v + self.depth).abs())
            .fold(0.0, f64::max);
        let upper_err = grid
            .iter()
            .zip(&values)
            .filter(|(&x, _)| x >= xi_hi)
            .map(|(_, &v)| (v - 1.0).abs())
            .fold(0.0, f64::max);
        let lower_limit = -self.depth;
        let limits_ok = lower_err <= LIMIT_TOL && upper_err <= LIMIT_TOL;
        if upper_err > LIMIT_TOL {
            failures.push(format!("(α2) α(+∞) ≠ 1 (error {upper_err:e})"));
        }
        if lower_err > LIMIT_TOL {
            failures.push(format!("(α2) α(-∞) ≠ -A (error {lower_err:e})"));
        }
        let sign_ok = lower_limit < 0.0;
        if !sign_ok {
            failures.push(format!("(α2) α(-∞) = {lower_limit} is not negative"));
        }

        let measured_slope = grid
            .windows(2)
            .zip(values.windows(2))
            .map(|(x, v)| ((v[1] - v[0]) / (x[1] - x[0])).abs())
            .fold(0.0, f64::max);
        let derivative_bound = self.derivative_bound();
        let slope_ok = measured_slope <= derivative_bound * (1.0 + 1e-9) + 1e-12;
        if !slope_ok {
            failures.push(format!(
                "(α3) measured slope {measured_slope} exceeds bound {derivative_bound}"
            ));
        }

        HabitatReport {
            monotone,
            worst_drop: worst_drop.max(0.0),
            lower_limit,
            upper_limit: 1.0,
            xi_lo,
            xi_hi,
            lower_limit_error: lower_err,
            upper_limit_error: upper_err,
            limits_ok: limits_ok && sign_ok,
            derivative_bound,
            measured_slope,
            slope_ok,
            alpha_bar: self.alpha_bar(),
            failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HabitatReport {
    pub monotone: bool,
    pub worst_drop: f64,
    pub lower_limit: f64,
    pub upper_limit: f64,
    pub xi_lo: f64,
    pub xi_hi: f64,
    pub lower_limit_error: f64,
    pub upper_limit_error: f64,
    pub limits_ok: bool,
    /// `M_α`.
    pub derivative_bound: f64,
    pub measured_slope: f64,
    pub slope_ok: bool,
    pub alpha_bar: f64,
    pub failures: Vec<String>,
}

impl HabitatReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Smallest slack over the validated clauses; negative iff some clause failed.
    pub fn margin(&self) -> f64 {
        [
            MONOTONE_TOL - self.worst_drop,
            LIMIT_TOL - self.lower_limit_error,
            LIMIT_TOL - self.upper_limit_error,
            -self.lower_limit,
            if self.slope_ok { self.derivative_bound - self.measured_slope + 1e-12 } else { -1.0 },
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }
}

fn check_shape(depth: f64, length: f64) -> Result<()> {
    if !(depth > 0.0 && depth.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "habitat depth A must be positive, got {depth}"
        )));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "habitat length L must be positive, got {length}"
        )));
    }
    Ok(())
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}
