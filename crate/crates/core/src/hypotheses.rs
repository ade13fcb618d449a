//! Standing assumptions of the persistence results and the constants
//! `k₁, k₂, k` that come with them.

use std::path::Path;

use crate::dynamics::Params;
use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::habitat::HabitatProfile;
use crate::kernels::Kernel;
use crate::speeds::{system_speeds, SPEED_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub name: &'static str,
    pub margin: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub h1_ok: bool,
    pub h1_margin: f64,
    pub d1_ok: bool,
    pub d1_margin: f64,
    pub d2_ok: bool,
    pub d2_margin: f64,
    pub k1: f64,
    pub k2: f64,
    pub k: f64,
    pub s_ok: bool,
    /// `s̲ - s - SPEED_TOL`.
    pub s_margin: f64,
    pub s_underline: f64,
    pub alpha_ok: bool,
    pub alpha_margin: f64,
    pub alpha_failures: Vec<String>,
}

impl HypothesisReport {
    pub fn all_ok(&self) -> bool {
        self.h1_ok && self.d1_ok && self.d2_ok && self.s_ok && self.alpha_ok
    }

    pub fn clauses(&self) -> Vec<Clause> {
        let c = |name, margin: f64, ok| Clause { name, margin, ok };
        vec![
            c("h1", self.h1_margin, self.h1_ok),
            c("d1", self.d1_margin, self.d1_ok),
            c("d2", self.d2_margin, self.d2_ok),
            c("s", self.s_margin, self.s_ok),
            c("alpha", self.alpha_margin, self.alpha_ok),
            c("k1", self.k1, self.k1 > 0.0),
            c("k2", self.k2, self.k2 > 0.0),
            c("k", self.k, self.k > 0.0),
        ]
    }

    /// Names of the failed clauses.
    pub fn failures(&self) -> Vec<&'static str> {
        self.clauses()
            .into_iter()
            .filter(|c| !c.ok)
            .map(|c| c.name)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("clause,margin,ok\n");
        for c in self.clauses() {
            out.push_str(&format!("{},{},{}\n", c.name, fmt_f64(c.margin), c.ok));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// `k₁ = d₁ - r₁ᾱ - r₁a/2 - r₂b(b-1)/2`.
pub fn k1(p: &Params, alpha_bar: f64) -> f64 {
    p.d1 - p.r1 * alpha_bar - 0.5 * p.r1 * p.a - 0.5 * p.r2 * p.b * (p.b - 1.0)
}

/// `k₂ = d₂ + r₂ - r₂b - r₂b(b-1)/2 - a r₁/2`.
pub fn k2(p: &Params) -> f64 {
    p.d2 + p.r2 - p.r2 * p.b - 0.5 * p.r2 * p.b * (p.b - 1.0) - 0.5 * p.a * p.r1
}

/// Never fails on a violated assumption; it reports it.
pub fn check_hypotheses(
    params: &Params,
    profile: &HabitatProfile,
    j1: &Kernel,
    j2: &Kernel,
) -> Result<HypothesisReport> {
    let habitat = profile.validate(None);
    let alpha_bar = habitat.alpha_bar;
    let h1_margin = params.b - 1.0;

    let d1_margin = params.d1
        - (params.r1 * alpha_bar
            + 0.5 * params.r1 * params.a
            + 0.5 * params.r2 * params.b * (params.b - 1.0));
    let d2_margin = params.d2
        - (params.r2 * (params.b - 1.0)
            + 0.5 * params.r2 * params.b * (params.b - 1.0)
            + 0.5 * params.a * params.r1);
    let (k1, k2) = (k1(params, alpha_bar), k2(params));

    // Without (H1) the predator cannot invade: s_* = 0.
    let s_underline = if h1_margin > 0.0 {
        system_speeds(params, j1, j2)?.s_underline
    } else {
        0.0
    };
    let s_margin = s_underline - params.s - SPEED_TOL;

    Ok(HypothesisReport {
        h1_ok: h1_margin > 0.0,
        h1_margin,
        d1_ok: d1_margin > 0.0,
        d1_margin,
        d2_ok: d2_margin > 0.0,
        d2_margin,
        k1,
        k2,
        k: k1.min(k2),
        s_ok: s_margin > 0.0,
        s_margin,
        s_underline,
        alpha_ok: habitat.passed(),
        alpha_margin: habitat.margin(),
        alpha_failures: habitat.failures,
    })
}
