//! Dispersal kernels: symmetric, nonnegative, unit-mass, compactly supported
//! densities `J` with their moment generating functions `M(λ) = ∫ J(y) e^{λy} dy`
//! and the discrete stencils used by the convolution `J ∗ w`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_with_breaks, Tolerance};

/// Relative accuracy of every kernel quadrature.
pub const QUAD_REL_TOL: f64 = 1e-10;

/// Tables whose raw mass is farther than this from 1 are rejected.
pub const MAX_TABLE_MASS_DRIFT: f64 = 0.01;

/// Tables whose asymmetry exceeds this fraction of the peak are rejected.
pub const MAX_TABLE_ASYMMETRY: f64 = 0.01;

/// Stencils need at least this many cells per support radius.
pub const MIN_CELLS_PER_RADIUS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    RaisedCosine,
    SmoothBump,
    Tabulated,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::RaisedCosine => "raised_cosine",
            KernelFamily::SmoothBump => "smooth_bump",
            KernelFamily::Tabulated => "tabulated",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "raised_cosine" => Ok(KernelFamily::RaisedCosine),
            "smooth_bump" => Ok(KernelFamily::SmoothBump),
            "tabulated" => Ok(KernelFamily::Tabulated),
            other => Err(Error::Config(format!("unknown kernel family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// `(1/(2R)) (1 + cos(π y / R))` on `[-R, R]`.
    RaisedCosine,
    /// `exp(-1/(1 - (y/R)^2)) / Z` on `(-R, R)`.
    SmoothBump { norm: f64 },
    /// Piecewise-linear table, symmetrized and renormalized on load.
    Tabulated {
        xs: Vec<f64>,
        ys: Vec<f64>,
        source: Option<PathBuf>,
    },
}

/// A validated dispersal kernel. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    shape: Shape,
    radius: f64,
}

impl Kernel {
    pub fn raised_cosine(radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(Kernel {
            shape: Shape::RaisedCosine,
            radius,
        })
    }

    pub fn smooth_bump(radius: f64) -> Result<Self> {
        check_radius(radius)?;
        let raw = |y: f64| bump_profile(y / radius);
        let mass = integrate(raw, -radius, radius, Tolerance::relative(1e-14))?.value;
        Ok(Kernel {
            shape: Shape::SmoothBump { norm: 1.0 / mass },
            radius,
        })
    }

    /// Builds a kernel from samples `(x_i, J(x_i))`. The table is linearly
    /// interpolated, zero outside `[x_0, x_n]`, symmetrized and renormalized.
    pub fn tabulated(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        Self::tabulated_from(xs, ys, None)
    }

    fn tabulated_from(xs: Vec<f64>, ys: Vec<f64>, source: Option<PathBuf>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidKernel(format!(
                "{} abscissae but {} densities",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 3 {
            return Err(Error::InvalidKernel(
                "tabulated kernel needs at least 3 samples".into(),
            ));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel("non-finite table entry".into()));
        }
        if let Some(w) = xs.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidKernel(format!(
                "abscissae must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if let Some(y) = ys.iter().find(|&&y| y < 0.0) {
            return Err(Error::InvalidKernel(format!("negative density {y}")));
        }
        let radius = xs[0].abs().max(xs[xs.len() - 1].abs());
        check_radius(radius)?;

        let peak = ys.iter().copied().fold(0.0, f64::max);
        if peak <= 0.0 {
            return Err(Error::InvalidKernel("table is identically zero".into()));
        }
        let asym = xs
            .iter()
            .zip(&ys)
            .map(|(&x, &y)| (y - interp(&xs, &ys, -x)).abs())
            .fold(0.0, f64::max);
        if asym > MAX_TABLE_ASYMMETRY * peak {
            return Err(Error::InvalidKernel(format!(
                "table asymmetry {asym:e} exceeds {MAX_TABLE_ASYMMETRY} of the peak"
            )));
        }

        let mut kernel = Kernel {
            shape: Shape::Tabulated {
                xs,
                ys,
                source,
            },
            radius,
        };
        let mass = kernel.raw_mass()?;
        if (mass - 1.0).abs() > MAX_TABLE_MASS_DRIFT {
            return Err(Error::InvalidKernel(format!(
                "table mass {mass} drifts more than {MAX_TABLE_MASS_DRIFT} from 1"
            )));
        }
        if let Shape::Tabulated { ys, .. } = &mut kernel.shape {
            ys.iter_mut().for_each(|y| *y /= mass);
        }
        Ok(kernel)
    }

    /// Reads a two-column `x density` table (whitespace separated, sorted
    /// ascending, `#` starts a comment).
    pub fn from_table_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let (xs, ys) = parse_table(&text)?;
        Self::tabulated_from(xs, ys, Some(path.to_path_buf()))
    }

    pub fn family(&self) -> KernelFamily {
        match self.shape {
            Shape::RaisedCosine => KernelFamily::RaisedCosine,
            Shape::SmoothBump { .. } => KernelFamily::SmoothBump,
            Shape::Tabulated { .. } => KernelFamily::Tabulated,
        }
    }

    /// Support radius `R_J`: `J(x) = 0` for `|x| > R_J`.
    pub fn support_radius(&self) -> f64 {
        self.radius
    }

    pub fn source(&self) -> Option<&Path> {
        match &self.shape {
            Shape::Tabulated { source, .. } => source.as_deref(),
            _ => None,
        }
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let r = self.radius;
        if x.abs() > r {
            return 0.0;
        }
        match &self.shape {
            Shape::RaisedCosine => (1.0 + (PI * x / r).cos()) / (2.0 * r),
            Shape::SmoothBump { norm } => norm * bump_profile(x / r),
            Shape::Tabulated { xs, ys, .. } => 0.5 * (interp(xs, ys, x) + interp(xs, ys, -x)),
        }
    }

    /// Points in `(-R_J, R_J)` where `J` has derivative jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Tabulated { xs, .. } => {
                let mut b: Vec<f64> = xs.iter().flat_map(|&x| [x, -x]).collect();
                b.sort_by(f64::total_cmp);
                b.dedup();
                b
            }
            _ => vec![0.0],
        }
    }

    fn raw_mass(&self) -> Result<f64> {
        let r = self.radius;
        let q = integrate_with_breaks(
            |y| self.evaluate(y),
            -r,
            r,
            &self.breakpoints(),
            Tolerance::relative(1e-13),
        )?;
        Ok(q.value)
    }

    /// `∫ J(y) g(y) dy` over the support, split at the kernel's breakpoints.
    pub fn integrate_against<G: Fn(f64) -> f64>(&self, g: G) -> Result<f64> {
        let r = self.radius;
        integrate_with_breaks(
            |y| self.evaluate(y) * g(y),
            -r,
            r,
            &self.breakpoints(),
            Tolerance::new(QUAD_REL_TOL, 1e-300),
        )
        .map(|q| q.value)
    }

    /// Moment generating function `M(λ) = ∫ J(y) e^{λy} dy`.
    pub fn mgf(&self, lambda: f64) -> Result<f64> {
        if !lambda.is_finite() {
            return Err(Error::Domain(format!("mgf needs a finite rate, got {lambda}")));
        }
        if lambda == 0.0 {
            return Ok(1.0);
        }
        self.integrate_against(|y| (lambda * y).exp())
    }

    /// `M'(λ) = ∫ y J(y) e^{λy} dy`.
    pub fn mgf_derivative(&self, lambda: f64) -> Result<f64> {
        if !lambda.is_finite() {
            return Err(Error::Domain(format!("mgf needs a finite rate, got {lambda}")));
        }
        self.integrate_against(|y| y * (lambda * y).exp())
    }

    /// Samples `J` on the lattice `j·dx`, `|j| ≤ ceil(R_J/dx)`, and rescales so
    /// that `Σ w_j dx = 1`.
    pub fn discretize(&self, dx: f64) -> Result<Stencil> {
        let floor = self.radius / MIN_CELLS_PER_RADIUS;
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::Resolution(format!("dx must be positive, got {dx}")));
        }
        if dx > floor * (1.0 + 1e-12) {
            return Err(Error::Resolution(format!(
                "dx = {dx} is coarser than the floor R_J/{MIN_CELLS_PER_RADIUS} = {floor}"
            )));
        }
        let half = (self.radius / dx - 1e-9).ceil() as usize;
        let mut weights: Vec<f64> = (0..=2 * half)
            .map(|k| {
                let j = k as f64 - half as f64;
                // Average both sides so that w_j = w_{-j} bitwise.
                0.5 * (self.evaluate(j * dx) + self.evaluate(-j * dx))
            })
            .collect();
        let mass: f64 = weights.iter().sum::<f64>() * dx;
        if mass <= 0.0 {
            return Err(Error::Resolution(format!(
                "stencil at dx = {dx} samples no mass"
            )));
        }
        weights.iter_mut().for_each(|w| *w /= mass);
        Ok(Stencil { dx, half, weights })
    }

    /// Checks symmetry, nonnegativity, unit mass, compact support and (for the
    /// analytic families) a C¹ proxy at the support edges.
    pub fn validate(&self) -> Result<KernelReport> {
        let r = self.radius;
        let n = 4001;
        let mut max_asym: f64 = 0.0;
        let mut min_value = f64::INFINITY;
        for i in 0..n {
            let x = -1.5 * r + 3.0 * r * i as f64 / (n - 1) as f64;
            let a = self.evaluate(x);
            let b = self.evaluate(-x);
            max_asym = max_asym.max((a - b).abs());
            min_value = min_value.min(a);
            if x.abs() > r && a != 0.0 {
                return Err(Error::InvalidKernel(format!(
                    "nonzero value {a} outside the support at x = {x}"
                )));
            }
        }
        if max_asym > 1e-12 {
            return Err(Error::InvalidKernel(format!("asymmetry {max_asym:e}")));
        }
        if min_value < 0.0 {
            return Err(Error::InvalidKernel(format!("negative value {min_value}")));
        }
        let mass = self.raw_mass()?;
        let mass_tol = match self.family() {
            KernelFamily::Tabulated => 1e-8,
            _ => 1e-10,
        };
        if (mass - 1.0).abs() > mass_tol {
            return Err(Error::InvalidKernel(format!("mass {mass} differs from 1")));
        }
        let edge_slope_jump = match self.family() {
            KernelFamily::Tabulated => None,
            _ => {
                let h = 1e-7 * r;
                let inside = (self.evaluate(r - h) - self.evaluate(r - 2.0 * h)) / h;
                let outside = (self.evaluate(r + 2.0 * h) - self.evaluate(r + h)) / h;
                let jump = (inside - outside).abs();
                if jump > 1e-6 {
                    return Err(Error::InvalidKernel(format!(
                        "derivative jumps by {jump:e} at the support edge"
                    )));
                }
                Some(jump)
            }
        };
        Ok(KernelReport {
            mass,
            max_asymmetry: max_asym,
            edge_slope_jump,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KernelReport {
    pub mass: f64,
    pub max_asymmetry: f64,
    pub edge_slope_jump: Option<f64>,
}

/// Discrete convolution weights `w_{-h..=h}` with `Σ w_j dx = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    dx: f64,
    half: usize,
    weights: Vec<f64>,
}

impl Stencil {
    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Halfwidth `h` in cells.
    pub fn halfwidth(&self) -> usize {
        self.half
    }

    /// Weights indexed `0..=2h`, entry `k` belonging to offset `k - h`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, offset: isize) -> f64 {
        let k = offset + self.half as isize;
        if k < 0 || k as usize >= self.weights.len() {
            0.0
        } else {
            self.weights[k as usize]
        }
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if radius > 0.0 && radius.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidKernel(format!(
            "support radius must be positive and finite, got {radius}"
        )))
    }
}

fn bump_profile(z: f64) -> f64 {
    let q = 1.0 - z * z;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x < xs[0] || x > xs[n - 1] {
        return 0.0;
    }
    let i = xs.partition_point(|&v| v <= x);
    if i == 0 {
        return ys[0];
    }
    if i >= n {
        return ys[n - 1];
    }
    let (x0, x1) = (xs[i - 1], xs[i]);
    let t = (x - x0) / (x1 - x0);
    ys[i - 1] + t * (ys[i] - ys[i - 1])
}

pub(crate) fn parse_table(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let cols: Vec<&str> = body.split_whitespace().collect();
        if cols.len() != 2 {
            return Err(Error::InvalidKernel(format!(
                "line {}: expected two columns, found {}",
                lineno + 1,
                cols.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| {
                Error::InvalidKernel(format!("line {}: cannot parse `{s}`", lineno + 1))
            })
        };
        xs.push(parse(cols[0])?);
        ys.push(parse(cols[1])?);
    }
    Ok((xs, ys))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rc_mgf_closed_form(l: f64) -> f64 {
        PI * PI * l.sinh() / (l * (l * l + PI * PI))
    }

    #[test]
    fn raised_cosine_values() {
        let k = Kernel::raised_cosine(1.0).unwrap();
        assert_eq!(k.evaluate(0.0), 1.0);
        assert_eq!(k.evaluate(2.0), 0.0);
        assert!((k.evaluate(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(k.evaluate(-1.0000001), 0.0);
    }

    #[test]
    fn all_families_validate() {
        let table_x: Vec<f64> = (0..=40).map(|i| -2.0 + 0.1 * i as f64).collect();
        let table_y: Vec<f64> = table_x.iter().map(|&x| (2.0 - x.abs()) / 4.0).collect();
        for k in [
            Kernel::raised_cosine(1.0).unwrap(),
            Kernel::raised_cosine(2.5).unwrap(),
            Kernel::smooth_bump(1.0).unwrap(),
            Kernel::tabulated(table_x, table_y).unwrap(),
        ] {
            let report = k.validate().unwrap();
            assert!(report.max_asymmetry <= 1e-12, "{:?}", k.family());
            assert_eq!(k.mgf(0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn mgf_matches_closed_form() {
        let k = Kernel::raised_cosine(1.0).unwrap();
        for l in [0.1, 0.5, 1.0, 2.0, 4.0, -3.0] {
            let q = k.mgf(l).unwrap();
            let exact = rc_mgf_closed_form(l);
            assert!(((q - exact) / exact).abs() < 1e-10, "λ={l}: {q} vs {exact}");
        }
        assert!((k.mgf(1.0).unwrap() - 1.0671).abs() < 1e-4);
    }

    #[test]
    fn mgf_is_even() {
        let k = Kernel::smooth_bump(1.3).unwrap();
        for l in [0.3, 1.7, 4.2] {
            let a = k.mgf(l).unwrap();
            let b = k.mgf(-l).unwrap();
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn mgf_rejects_infinite_rate() {
        let k = Kernel::raised_cosine(1.0).unwrap();
        assert!(matches!(k.mgf(f64::INFINITY), Err(Error::Domain(_))));
    }

    #[test]
    fn stencil_shape() {
        let k = Kernel::raised_cosine(1.0).unwrap();
        let s = k.discretize(0.1).unwrap();
        assert_eq!(s.halfwidth(), 10);
        assert_eq!(s.weights().len(), 21);
        let mass: f64 = s.weights().iter().sum::<f64>() * s.dx();
        assert!((mass - 1.0).abs() < 1e-14);
        for j in 0..=10isize {
            assert_eq!(s.weight(j), s.weight(-j));
        }
        assert!(s.weights().iter().all(|&w| w >= 0.0));
        assert!(matches!(k.discretize(0.25), Err(Error::Resolution(_))));
        // exactly at the floor is accepted
        assert_eq!(k.discretize(0.125).unwrap().halfwidth(), 8);
    }

    #[test]
    fn unsorted_table_rejected() {
        let err = Kernel::tabulated(vec![-1.0, 0.5, 0.0, 1.0], vec![0.0, 1.0, 1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidKernel(_)));
    }

    #[test]
    fn table_mass_drift_policy() {
        let xs = vec![-1.0, 0.0, 1.0];
        // triangle of mass 1.005: renormalized
        let k = Kernel::tabulated(xs.clone(), vec![0.0, 1.005, 0.0]).unwrap();
        assert!((k.evaluate(0.0) - 1.0).abs() < 1e-12);
        // mass 1.2: rejected
        assert!(Kernel::tabulated(xs, vec![0.0, 1.2, 0.0]).is_err());
    }

    #[test]
    fn asymmetric_table_rejected() {
        let xs = vec![-1.0, -0.5, 0.0, 0.5, 1.0];
        let ys = vec![0.0, 0.2, 1.0, 0.8, 0.0];
        assert!(Kernel::tabulated(xs, ys).is_err());
    }

    #[test]
    fn table_file_with_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.txt");
        std::fs::write(
            &path,
            "# triangle kernel\n-1 0\n\n0   1.0  # peak\n1\t0\n",
        )
        .unwrap();
        let k = Kernel::from_table_file(&path).unwrap();
        assert_eq!(k.family(), KernelFamily::Tabulated);
        assert_eq!(k.support_radius(), 1.0);
        assert_eq!(k.source(), Some(path.as_path()));
        assert!((k.evaluate(0.5) - 0.5).abs() < 1e-12);
    }
}
