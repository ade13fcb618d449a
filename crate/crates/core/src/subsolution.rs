//! Moving-window sub-solution for the prey equation.
//!
//! In the frame `ξ = x - ct` the wave is
//! `φ = η e^{r₁aδ₁t} e^{-βξ} cos(πξ/(2R))` on `|ξ| < R` and zero outside. It
//! is a strict sub-solution when `c < 𝓐_m(β, R)` and `𝓑(β, R) = c`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::dynamics::Params;
use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::kernels::{Kernel, QUAD_REL_TOL};
use crate::quadrature::{integrate_with_breaks, Tolerance};
use crate::speeds::minimize_unimodal;

/// Required accuracy of `𝓑(β(R), R) = c`.
pub const BETA_RESIDUAL_TOL: f64 = 1e-8;

pub const SAMPLE_X: usize = 512;
pub const SAMPLE_T: usize = 64;
pub const T_CHECK: f64 = 10.0;

/// `η` is chosen so that `φ ≤ AMPLITUDE_FRACTION · δ₂` up to `T_CHECK`.
pub const AMPLITUDE_FRACTION: f64 = 0.5;

/// Cap on the window doubling in [`construct`].
pub const MAX_WINDOW_DOUBLINGS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsolutionParams {
    pub r_window: f64,
    pub beta: f64,
    pub eta_amp: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub m: f64,
    pub c: f64,
}

/// `m* = r₁ - r₁δ₂ - r₁aδ₁ - d₁`.
pub fn m_star(params: &Params, delta1: f64, delta2: f64) -> f64 {
    params.r1 - params.r1 * delta2 - params.r1 * params.a * delta1 - params.d1
}

impl SubsolutionParams {
    pub fn validate(&self, params: &Params, j1: &Kernel) -> Result<()> {
        let named = [
            ("R", self.r_window),
            ("β", self.beta),
            ("η", self.eta_amp),
            ("δ₁", self.delta1),
            ("δ₂", self.delta2),
            ("c", self.c),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        let slack = params.r1 - params.r1 * self.delta2 - 2.0 * params.r1 * params.a * self.delta1;
        if !(slack > 0.0) {
            return Err(Error::InvalidParams(format!(
                "δ₁, δ₂ too large: r₁ - r₁δ₂ - 2r₁aδ₁ = {slack}"
            )));
        }
        let ms = m_star(params, self.delta1, self.delta2);
        if !(self.m < ms) {
            return Err(Error::InvalidParams(format!("m = {} must be below m* = {ms}", self.m)));
        }
        let rj = j1.support_radius();
        if !(self.r_window > 0.5 * rj) {
            return Err(Error::InvalidParams(format!(
                "window half-width R = {} must exceed R_J/2 = {}",
                self.r_window,
                0.5 * rj
            )));
        }
        Ok(())
    }

    /// Amplitude growth rate `r₁aδ₁`.
    fn growth(&self, params: &Params) -> f64 {
        params.r1 * params.a * self.delta1
    }
}

fn window_shape(beta: f64, r: f64, xi: f64) -> f64 {
    if xi.abs() >= r {
        0.0
    } else {
        (-beta * xi).exp() * (PI * xi / (2.0 * r)).cos()
    }
}

pub fn phi_wave(p: &SubsolutionParams, params: &Params, x: f64, t: f64) -> f64 {
    let xi = x - p.c * t;
    p.eta_amp * (p.growth(params) * t).exp() * window_shape(p.beta, p.r_window, xi)
}

/// `∂_t φ` from the closed form.
pub fn phi_wave_dt(p: &SubsolutionParams, params: &Params, x: f64, t: f64) -> f64 {
    let xi = x - p.c * t;
    let r = p.r_window;
    if xi.abs() >= r {
        return 0.0;
    }
    let g = p.eta_amp * (p.growth(params) * t).exp() * (-p.beta * xi).exp();
    let w = PI * xi / (2.0 * r);
    g * ((p.growth(params) + p.c * p.beta) * w.cos() + p.c * PI / (2.0 * r) * w.sin())
}

/// `𝓐_m(β, R) = (1/β)[m - r₁aδ₁ + d₁ ∫ e^{βy} J₁(y) cos(πy/(2R)) dy]`.
pub fn a_m_window(params: &Params, j1: &Kernel, m: f64, delta1: f64, beta: f64, r: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("𝓐_m needs β > 0, got {beta}")));
    }
    let integral = j1.integrate_against(|y| (beta * y).exp() * (PI * y / (2.0 * r)).cos())?;
    Ok((m - params.r1 * params.a * delta1 + params.d1 * integral) / beta)
}

/// `𝓑(β, R) = (2R d₁/π) ∫ e^{βy} J₁(y) sin(πy/(2R)) dy`.
pub fn b_window(params: &Params, j1: &Kernel, beta: f64, r: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(Error::Domain(format!("𝓑 needs β ≥ 0, got {beta}")));
    }
    if beta == 0.0 {
        return Ok(0.0);
    }
    let integral = j1.integrate_against(|y| (beta * y).exp() * (PI * y / (2.0 * r)).sin())?;
    Ok(2.0 * r * params.d1 / PI * integral)
}

/// `A_m(β) = (m - r₁aδ₁ + d₁M(β))/β`, the `R → ∞` limit of `𝓐_m`.
pub fn a_m_inf(params: &Params, j1: &Kernel, m: f64, delta1: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("A_m needs β > 0, got {beta}")));
    }
    Ok((m - params.r1 * params.a * delta1 + params.d1 * j1.mgf(beta)?) / beta)
}

/// `B(β) = d₁M'(β)`, the `R → ∞` limit of `𝓑`.
pub fn b_inf(params: &Params, j1: &Kernel, beta: f64) -> Result<f64> {
    Ok(params.d1 * j1.mgf_derivative(beta)?)
}

pub fn a_m_finite(p: &SubsolutionParams, params: &Params, j1: &Kernel) -> Result<f64> {
    a_m_window(params, j1, p.m, p.delta1, p.beta, p.r_window)
}

pub fn b_finite(p: &SubsolutionParams, params: &Params, j1: &Kernel) -> Result<f64> {
    b_window(params, j1, p.beta, p.r_window)
}

/// Minimizer `β*` of `A_m` and `c* = A_m(β*)`.
pub fn beta_star(params: &Params, j1: &Kernel, m: f64, delta1: f64) -> Result<(f64, f64)> {
    let ceiling = crate::speeds::BRACKET_CEILING / j1.support_radius();
    let min = minimize_unimodal(
        |b| a_m_inf(params, j1, m, delta1, b),
        crate::speeds::LAMBDA_START,
        ceiling,
        crate::speeds::LAMBDA_TOL,
    )?;
    Ok((min.argmin, min.value))
}

pub fn c_star(params: &Params, j1: &Kernel, m: f64, delta1: f64) -> Result<f64> {
    beta_star(params, j1, m, delta1).map(|b| b.1)
}

/// Solves `𝓑(β, R) = c` by bisection.
pub fn solve_beta(c: f64, r: f64, params: &Params, j1: &Kernel) -> Result<f64> {
    if c == 0.0 {
        return Ok(0.0);
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!("frame speed must be positive, got {c}")));
    }
    // e^{βR_J} must stay finite.
    let overflow = 600.0 / j1.support_radius();
    let mut hi = 1.0 / j1.support_radius();
    while b_window(params, j1, hi, r)? < c {
        hi *= 2.0;
        if hi > overflow {
            return Err(Error::NoRoot(format!(
                "𝓑(·, R = {r}) does not reach c = {c}; try a larger R"
            )));
        }
    }
    let mut lo = 0.0;
    let mut beta = 0.5 * hi;
    for _ in 0..200 {
        beta = 0.5 * (lo + hi);
        let f = b_window(params, j1, beta, r)? - c;
        if f.abs() <= 0.01 * BETA_RESIDUAL_TOL {
            break;
        }
        if f < 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let residual = (b_window(params, j1, beta, r)? - c).abs();
    if residual > BETA_RESIDUAL_TOL {
        return Err(Error::NumericFailure {
            what: format!("𝓑(β, {r}) = {c}"),
            residual,
        });
    }
    Ok(beta)
}

/// Largest `e^{-βξ} cos(πξ/(2R))` over the window, at `ξ = -(2R/π) atan(2Rβ/π)`.
pub fn window_peak(beta: f64, r: f64) -> f64 {
    let xi = -(2.0 * r / PI) * (2.0 * r * beta / PI).atan();
    window_shape(beta, r, xi)
}

/// Builds a sub-solution for frame speed `c`: `R` doubles from `R_J` until
/// `𝓐_m(β(R), R) > c`, and `η` keeps `φ ≤ δ₂/2` for `t ≤ T_CHECK`.
pub fn construct(
    params: &Params,
    j1: &Kernel,
    c: f64,
    delta1: f64,
    delta2: f64,
    m: f64,
) -> Result<SubsolutionParams> {
    let mut r = j1.support_radius();
    for _ in 0..MAX_WINDOW_DOUBLINGS {
        let beta = solve_beta(c, r, params, j1)?;
        if beta > 0.0 && a_m_window(params, j1, m, delta1, beta, r)? > c {
            let growth = (params.r1 * params.a * delta1 * T_CHECK).exp();
            let eta_amp = AMPLITUDE_FRACTION * delta2 / (growth * window_peak(beta, r));
            let p = SubsolutionParams { r_window: r, beta, eta_amp, delta1, delta2, m, c };
            p.validate(params, j1)?;
            return Ok(p);
        }
        r *= 2.0;
    }
    Err(Error::NoRoot(format!(
        "no window with 𝓐_m(β(R), R) > c = {c} up to R = {r}; c is at or above c*"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleGrid {
    pub nx: usize,
    pub nt: usize,
    pub t_check: f64,
}

impl Default for SampleGrid {
    fn default() -> Self {
        SampleGrid { nx: SAMPLE_X, nt: SAMPLE_T, t_check: T_CHECK }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClauseResult {
    pub name: &'static str,
    pub margin: f64,
    pub ok: bool,
    /// Worst `(x, t)` for pointwise clauses.
    pub at: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub params: SubsolutionParams,
    pub a_m: f64,
    pub b: f64,
    pub min_l: f64,
    pub min_l_at: (f64, f64),
    pub min_q: f64,
    pub min_q_at: (f64, f64),
    pub max_phi: f64,
    pub clauses: Vec<ClauseResult>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.ok)
    }

    pub fn worst_margin(&self) -> f64 {
        self.clauses.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min)
    }

    pub fn failed(&self) -> Vec<&ClauseResult> {
        self.clauses.iter().filter(|c| !c.ok).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("clause,margin,ok,x,t\n");
        for c in &self.clauses {
            let (x, t) = c
                .at
                .map(|(x, t)| (fmt_f64(x), fmt_f64(t)))
                .unwrap_or_else(|| (String::new(), String::new()));
            out.push_str(&format!("{},{},{},{x},{t}\n", c.name, fmt_f64(c.margin), c.ok));
        }
        out
    }
}

/// `(J₁ ∗ w)(ξ)` for the time-free window shape `w`.
fn window_convolution(j1: &Kernel, beta: f64, r: f64, xi: f64) -> Result<f64> {
    let rj = j1.support_radius();
    // y ranges where ξ - y stays in the window.
    let lo = (-rj).max(xi - r);
    let hi = rj.min(xi + r);
    if lo >= hi {
        return Ok(0.0);
    }
    let breaks: Vec<f64> = j1.breakpoints().into_iter().filter(|&b| b > lo && b < hi).collect();
    integrate_with_breaks(
        |y| j1.evaluate(y) * window_shape(beta, r, xi - y),
        lo,
        hi,
        &breaks,
        Tolerance::new(QUAD_REL_TOL, 1e-300),
    )
    .map(|q| q.value)
}

/// Checks `c < 𝓐_m`, `𝓑 = c`, `φ ≤ δ₂` and pointwise `L[φ] > 0`, `Q[φ] > 0`
/// on `ξ ∈ [-R + dx, R - dx]`, `t ∈ [0, t_check]`.
pub fn verify_subsolution(
    p: &SubsolutionParams,
    params: &Params,
    j1: &Kernel,
    grid: SampleGrid,
) -> Result<VerificationReport> {
    p.validate(params, j1)?;
    if grid.nx < 2 || grid.nt < 2 || !(grid.t_check > 0.0) {
        return Err(Error::InvalidParams(format!("sample grid too small: {grid:?}")));
    }
    let a_m = a_m_finite(p, params, j1)?;
    let b = b_finite(p, params, j1)?;
    let r = p.r_window;
    let dx = 2.0 * r / (grid.nx - 1) as f64;
    let (xi_lo, xi_hi) = (-r + dx, r - dx);
    let xis: Vec<f64> = (0..grid.nx)
        .map(|i| xi_lo + (xi_hi - xi_lo) * i as f64 / (grid.nx - 1) as f64)
        .collect();
    let convs: Vec<f64> = xis
        .par_iter()
        .map(|&xi| window_convolution(j1, p.beta, r, xi))
        .collect::<Result<_>>()?;

    let growth = p.growth(params);
    let mut min_l = (f64::INFINITY, (0.0, 0.0));
    let mut min_q = (f64::INFINITY, (0.0, 0.0));
    let mut max_phi: f64 = 0.0;
    for k in 0..grid.nt {
        let t = grid.t_check * k as f64 / (grid.nt - 1) as f64;
        let g = p.eta_amp * (growth * t).exp();
        for (&xi, &conv) in xis.iter().zip(&convs) {
            let x = xi + p.c * t;
            let phi = phi_wave(p, params, x, t);
            let dt = phi_wave_dt(p, params, x, t);
            let jphi = g * conv;
            let l = params.d1 * jphi + p.m * phi - dt;
            let q = params.d1 * jphi - params.d1 * phi
                + params.r1 * phi * (1.0 - phi - params.a * p.delta1)
                - dt;
            max_phi = max_phi.max(phi);
            if l < min_l.0 {
                min_l = (l, (x, t));
            }
            if q < min_q.0 {
                min_q = (q, (x, t));
            }
        }
    }

    let residual = (b - p.c).abs();
    let clauses = vec![
        ClauseResult { name: "a_m_exceeds_c", margin: a_m - p.c, ok: a_m > p.c, at: None },
        ClauseResult {
            name: "b_equals_c",
            margin: BETA_RESIDUAL_TOL - residual,
            ok: residual <= BETA_RESIDUAL_TOL,
            at: None,
        },
        ClauseResult {
            name: "phi_below_delta2",
            margin: p.delta2 - max_phi,
            ok: max_phi <= p.delta2,
            at: None,
        },
        ClauseResult { name: "l_positive", margin: min_l.0, ok: min_l.0 > 0.0, at: Some(min_l.1) },
        ClauseResult { name: "q_positive", margin: min_q.0, ok: min_q.0 > 0.0, at: Some(min_q.1) },
    ];
    Ok(VerificationReport {
        params: *p,
        a_m,
        b,
        min_l: min_l.0,
        min_l_at: min_l.1,
        min_q: min_q.0,
        min_q_at: min_q.1,
        max_phi,
        clauses,
    })
}
