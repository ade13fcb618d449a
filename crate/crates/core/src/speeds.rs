//! Variational spreading speeds
//! `c̄ = inf_{λ>0} (d [M(λ) - 1] + r k) / λ`
//! for a scalar nonlocal KPP equation, and the prey / predator speeds of the
//! coupled system built from it.

use crate::dynamics::Params;
use crate::error::{Error, Result};
use crate::kernels::Kernel;

/// Starting rate of the doubling search.
pub const LAMBDA_START: f64 = 1e-3;

/// Golden-section stops once the bracket is narrower than this.
pub const LAMBDA_TOL: f64 = 1e-8;

/// Bracket ceiling is `BRACKET_CEILING / R_J`.
pub const BRACKET_CEILING: f64 = 50.0;

/// Accuracy attributed to a minimized speed when comparing against other
/// speeds.
pub const SPEED_TOL: f64 = 1e-4;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone)]
pub struct SpeedProblem {
    pub d: f64,
    pub r: f64,
    pub k: f64,
    pub kernel: Kernel,
}

impl SpeedProblem {
    pub fn new(d: f64, r: f64, k: f64, kernel: Kernel) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidParams(format!("d must be positive, got {d}")));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParams(format!("r must be positive, got {r}")));
        }
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::InvalidParams(format!("k must be nonnegative, got {k}")));
        }
        Ok(SpeedProblem { d, r, k, kernel })
    }

    /// `φ(λ) = (d [M(λ) - 1] + r k) / λ`.
    pub fn phi(&self, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("φ needs λ > 0, got {lambda}")));
        }
        let m = self.kernel.mgf(lambda)?;
        Ok((self.d * (m - 1.0) + self.r * self.k) / lambda)
    }

    pub fn min_speed(&self) -> Result<SpeedResult> {
        if self.k == 0.0 {
            return Ok(SpeedResult {
                c_bar: 0.0,
                lambda_star: None,
                bracket: (0.0, LAMBDA_START),
                iterations: 0,
            });
        }
        let ceiling = BRACKET_CEILING / self.kernel.support_radius();
        let m = minimize_unimodal(|l| self.phi(l), LAMBDA_START, ceiling, LAMBDA_TOL)?;
        Ok(SpeedResult {
            c_bar: m.value,
            lambda_star: Some(m.argmin),
            bracket: m.bracket,
            iterations: m.iterations,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedResult {
    pub c_bar: f64,
    /// `None` when the infimum is not attained (`k = 0`).
    pub lambda_star: Option<f64>,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

impl SpeedResult {
    pub fn is_degenerate(&self) -> bool {
        self.lambda_star.is_none()
    }
}

/// `φ(λ)` for a bare `(d, r, k, J)` tuple.
pub fn phi(problem: &SpeedProblem, lambda: f64) -> Result<f64> {
    problem.phi(lambda)
}

pub fn min_speed(problem: &SpeedProblem) -> Result<SpeedResult> {
    problem.min_speed()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemSpeeds {
    /// Prey speed with `α ≡ 1`, `v ≡ 0`.
    pub s_star: SpeedResult,
    /// Predator speed with the prey saturated at 1.
    pub s_lower_star: SpeedResult,
    /// `min{s*, s_*}`.
    pub s_underline: f64,
}

impl SystemSpeeds {
    /// The faster of the two fronts.
    pub fn fastest(&self) -> f64 {
        self.s_star.c_bar.max(self.s_lower_star.c_bar)
    }
}

pub fn system_speeds(params: &Params, j1: &Kernel, j2: &Kernel) -> Result<SystemSpeeds> {
    if !(params.b > 1.0) {
        return Err(Error::HypothesisViolation(format!(
            "(H1) requires b > 1, got b = {}",
            params.b
        )));
    }
    let s_star = SpeedProblem::new(params.d1, params.r1, 1.0, j1.clone())?.min_speed()?;
    let s_lower_star =
        SpeedProblem::new(params.d2, params.r2, params.b - 1.0, j2.clone())?.min_speed()?;
    Ok(SystemSpeeds {
        s_star,
        s_lower_star,
        s_underline: s_star.c_bar.min(s_lower_star.c_bar),
    })
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Minimum {
    pub argmin: f64,
    pub value: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

/// Brackets the minimum of a unimodal function on `(0, ceiling]` by doubling
/// from `start`, then narrows it by golden section to width `tol`.
pub(crate) fn minimize_unimodal<F>(f: F, start: f64, ceiling: f64, tol: f64) -> Result<Minimum>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut iterations = 0;
    let mut lo = 0.0;
    let mut mid = start;
    let mut f_mid = f(mid)?;
    let mut hi = 2.0 * start;
    let mut f_hi = f(hi)?;
    while f_hi < f_mid {
        if hi >= ceiling {
            return Err(Error::BracketFailure(format!(
                "objective still decreasing at λ = {hi} (ceiling {ceiling})"
            )));
        }
        lo = mid;
        mid = hi;
        f_mid = f_hi;
        hi = (2.0 * hi).min(ceiling);
        f_hi = f(hi)?;
        iterations += 1;
    }
    let bracket = (lo, hi);

    let (mut a, mut b) = bracket;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tol {
        iterations += 1;
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
    }
    let (mut argmin, mut value) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
    // The interior start point can beat both golden points on a flat floor.
    if f_mid < value && mid > a && mid < b {
        argmin = mid;
        value = f_mid;
    }
    Ok(Minimum {
        argmin,
        value,
        bracket,
        iterations,
    })
}
