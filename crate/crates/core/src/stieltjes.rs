//! Stieltjes curves, their inversion to distribution tables, and the
//! distances used to compare distributions.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::field::format_real;

/// Mass left unaccounted by a table above which callers should warn.
pub const TAIL_MASS_WARNING: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveSource {
    Solver,
    Empirical,
    ClosedForm,
}

impl fmt::Display for CurveSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveSource::Solver => "solver",
            CurveSource::Empirical => "empirical",
            CurveSource::ClosedForm => "closed-form",
        })
    }
}

impl FromStr for CurveSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "solver" => Ok(CurveSource::Solver),
            "empirical" => Ok(CurveSource::Empirical),
            "closed-form" => Ok(CurveSource::ClosedForm),
            other => Err(invalid(format!("unknown curve source {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub z: Complex64,
    pub s: Complex64,
    pub iterations: usize,
    pub residual: f64,
}

impl CurvePoint {
    pub fn exact(z: Complex64, s: Complex64) -> Self {
        Self {
            z,
            s,
            iterations: 0,
            residual: 0.0,
        }
    }
}

/// Values of a Stieltjes transform at points of the upper half-plane.
#[derive(Debug, Clone, PartialEq)]
pub struct StieltjesCurve {
    points: Vec<CurvePoint>,
    source: CurveSource,
}

impl StieltjesCurve {
    /// Checks `Im z > 0`, `Im S > 0` and `|S| <= 1 / Im z` at every point.
    pub fn new(points: Vec<CurvePoint>, source: CurveSource) -> Result<Self> {
        for (k, p) in points.iter().enumerate() {
            if !(p.z.im > 0.0) {
                return Err(invalid(format!("point {k}: Im z = {} is not positive", p.z.im)));
            }
            if !(p.s.im > 0.0) {
                return Err(invalid(format!(
                    "point {k}: Im S = {} is not positive at z = {}",
                    p.s.im, p.z
                )));
            }
            if p.s.norm() > (1.0 + 1e-12) / p.z.im {
                return Err(invalid(format!(
                    "point {k}: |S| = {} exceeds 1/Im z",
                    p.s.norm()
                )));
            }
        }
        Ok(Self { points, source })
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn source(&self) -> CurveSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The common imaginary part if every point lies on one horizontal line.
    pub fn horizontal_height(&self) -> Option<f64> {
        let first = self.points.first()?.z.im;
        self.points
            .iter()
            .all(|p| (p.z.im - first).abs() <= 1e-12 * first)
            .then_some(first)
    }

    /// `max |S_a - S_b|` over two curves sampled at the same points.
    pub fn sup_gap(&self, other: &StieltjesCurve) -> Result<f64> {
        if self.len() != other.len() {
            return Err(invalid("curves have different lengths"));
        }
        let mut gap = 0.0f64;
        for (a, b) in self.points.iter().zip(&other.points) {
            if (a.z - b.z).norm() > 1e-12 * a.z.norm().max(1.0) {
                return Err(invalid(format!(
                    "curves sampled at different points: {} vs {}",
                    a.z, b.z
                )));
            }
            gap = gap.max((a.s - b.s).norm());
        }
        Ok(gap)
    }

    /// CSV with a `# source=` comment, the header
    /// `re_z,im_z,re_S,im_S,iterations,residual`, and one row per point.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# source={}", self.source);
        out.push_str("re_z,im_z,re_S,im_S,iterations,residual\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                format_real(p.z.re),
                format_real(p.z.im),
                format_real(p.s.re),
                format_real(p.s.im),
                p.iterations,
                format_real(p.residual)
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut source = CurveSource::Solver;
        let mut points = Vec::new();
        let mut header_seen = false;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(tag) = comment.trim().strip_prefix("source=") {
                    source = tag.trim().parse()?;
                }
                continue;
            }
            if !header_seen {
                if line != "re_z,im_z,re_S,im_S,iterations,residual" {
                    return Err(parse_err(ln + 1, "missing Stieltjes curve header"));
                }
                header_seen = true;
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 6 {
                return Err(parse_err(ln + 1, "expected 6 columns"));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| parse_err(ln + 1, format!("bad number {s:?}")))
            };
            points.push(CurvePoint {
                z: Complex64::new(num(cells[0])?, num(cells[1])?),
                s: Complex64::new(num(cells[2])?, num(cells[3])?),
                iterations: cells[4]
                    .parse()
                    .map_err(|_| parse_err(ln + 1, "bad iteration count"))?,
                residual: num(cells[5])?,
            });
        }
        if !header_seen {
            return Err(parse_err(0, "missing Stieltjes curve header"));
        }
        Self::new(points, source)
    }
}

/// A distribution on a sorted grid: density values, a nondecreasing CDF,
/// and the mass the grid does not capture.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionTable {
    xs: Vec<f64>,
    density: Vec<f64>,
    cdf: Vec<f64>,
    uncaptured_mass: f64,
}

impl DistributionTable {
    /// Validates the table: sorted nodes, `density >= 0`, nondecreasing
    /// `cdf <= 1 + 1e-6`, and trapezoid increments matching the CDF within `1e-8`.
    pub fn new(xs: Vec<f64>, density: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || density.len() != xs.len() || cdf.len() != xs.len() {
            return Err(invalid("table needs at least two nodes and matching columns"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().any(|x| !x.is_finite()) {
            return Err(invalid("table nodes must be finite and strictly increasing"));
        }
        if density.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(invalid("density must be nonnegative"));
        }
        if cdf[0] < -1e-12 || cdf.iter().any(|c| !c.is_finite()) {
            return Err(invalid("cdf must be finite and nonnegative"));
        }
        for k in 1..xs.len() {
            let inc = cdf[k] - cdf[k - 1];
            if inc < -1e-12 {
                return Err(invalid(format!("cdf decreases at node {k}")));
            }
            let trap = 0.5 * (density[k] + density[k - 1]) * (xs[k] - xs[k - 1]);
            if (inc - trap).abs() > 1e-8 {
                return Err(invalid(format!(
                    "cdf increment at node {k} does not match the trapezoid integral of the density"
                )));
            }
        }
        let last = cdf[cdf.len() - 1];
        if last > 1.0 + 1e-6 {
            return Err(invalid(format!("cdf exceeds one: {last}")));
        }
        let captured = last - cdf[0];
        Ok(Self {
            xs,
            density,
            cdf,
            uncaptured_mass: (1.0 - captured).max(0.0),
        })
    }

    /// Integrates `density` by the trapezoid rule starting from `left_mass`.
    pub fn from_density(xs: Vec<f64>, density: Vec<f64>, left_mass: f64) -> Result<Self> {
        if density.len() != xs.len() {
            return Err(invalid("density and grid lengths differ"));
        }
        let mut cdf = Vec::with_capacity(xs.len());
        let mut acc = left_mass;
        for k in 0..xs.len() {
            if k > 0 {
                acc += 0.5 * (density[k] + density[k - 1]) * (xs[k] - xs[k - 1]);
            }
            cdf.push(acc);
        }
        Self::new(xs, density, cdf)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// One minus the mass integrated over the grid.
    pub fn uncaptured_mass(&self) -> f64 {
        self.uncaptured_mass
    }

    /// Piecewise-linear CDF, extended as a constant beyond the grid.
    pub fn cdf_at(&self, x: f64) -> f64 {
        interpolate(&self.xs, &self.cdf, x)
    }

    /// CSV with header `x,density,cdf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,density,cdf\n");
        for k in 0..self.xs.len() {
            let _ = writeln!(
                out,
                "{},{},{}",
                format_real(self.xs[k]),
                format_real(self.density[k]),
                format_real(self.cdf[k])
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        match rows.next() {
            Some((_, h)) if h.trim() == "x,density,cdf" => {}
            Some((ln, _)) => return Err(parse_err(ln + 1, "missing distribution table header")),
            None => return Err(parse_err(0, "empty distribution table")),
        }
        let (mut xs, mut density, mut cdf) = (Vec::new(), Vec::new(), Vec::new());
        for (ln, line) in rows {
            let cells: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(ln + 1, "bad number"))?;
            if cells.len() != 3 {
                return Err(parse_err(ln + 1, "expected 3 columns"));
            }
            xs.push(cells[0]);
            density.push(cells[1]);
            cdf.push(cells[2]);
        }
        Self::new(xs, density, cdf)
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let w = (x - x0) / (x1 - x0);
    ys[k - 1] + w * (ys[k] - ys[k - 1])
}

/// Mollified inversion `density(x) = Im S(x + i eps) / pi` on the nodes `xs`.
///
/// The curve must lie on one horizontal line `Im z = eps` with increasing
/// real parts covering `[min xs - 5 eps, max xs + 5 eps]`. Curve values are
/// linearly interpolated between sample points. The mass missing from the
/// grid is split evenly between the two tails; if the quadrature captures
/// more than one unit of mass the table is scaled down to one.
pub fn invert_to_distribution(curve: &StieltjesCurve, xs: &[f64]) -> Result<DistributionTable> {
    let eps = curve
        .horizontal_height()
        .ok_or_else(|| invalid("curve is not a horizontal line"))?;
    let re: Vec<f64> = curve.points().iter().map(|p| p.z.re).collect();
    if re.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("curve real parts must be strictly increasing"));
    }
    if xs.len() < 2 {
        return Err(invalid("inversion grid needs at least two nodes"));
    }
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let slack = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
    if re.len() < 2 || re[0] > lo - 5.0 * eps + slack || re[re.len() - 1] < hi + 5.0 * eps - slack
    {
        return Err(invalid(format!(
            "curve covers [{}, {}] but inversion on [{lo}, {hi}] needs [{}, {}]",
            re.first().copied().unwrap_or(f64::NAN),
            re.last().copied().unwrap_or(f64::NAN),
            lo - 5.0 * eps,
            hi + 5.0 * eps
        )));
    }
    let ims: Vec<f64> = curve.points().iter().map(|p| p.s.im).collect();
    let mut density: Vec<f64> = xs
        .iter()
        .map(|&x| (interpolate(&re, &ims, x) / PI).max(0.0))
        .collect();
    let captured: f64 = xs
        .windows(2)
        .zip(density.windows(2))
        .map(|(x, d)| 0.5 * (d[0] + d[1]) * (x[1] - x[0]))
        .sum();
    if captured > 1.0 {
        density.iter_mut().for_each(|d| *d /= captured);
    }
    let left = 0.5 * (1.0 - captured).max(0.0);
    DistributionTable::from_density(xs.to_vec(), density, left)
}

/// Empirical transform `(1/n) sum 1 / (lambda_k - z)`.
pub fn empirical_stieltjes(eigs: &[f64], z: Complex64) -> Complex64 {
    let sum: Complex64 = eigs.iter().map(|&l| 1.0 / (Complex64::new(l, 0.0) - z)).sum();
    sum / eigs.len() as f64
}

/// Empirical transform of `eigs` at every contour point.
pub fn empirical_curve(eigs: &[f64], contour: &[Complex64]) -> Result<StieltjesCurve> {
    if eigs.is_empty() {
        return Err(invalid("empirical curve needs at least one eigenvalue"));
    }
    let points = contour
        .iter()
        .map(|&z| CurvePoint::exact(z, empirical_stieltjes(eigs, z)))
        .collect();
    StieltjesCurve::new(points, CurveSource::Empirical)
}

/// `sup |F - G|` over the union of both grids, with linear interpolation.
pub fn kolmogorov_distance(f: &DistributionTable, g: &DistributionTable) -> f64 {
    f.xs()
        .iter()
        .chain(g.xs())
        .map(|&x| (f.cdf_at(x) - g.cdf_at(x)).abs())
        .fold(0.0, f64::max)
}

/// Lévy distance `inf { e > 0 : F(x - e) - e <= G(x) <= F(x + e) + e for all x }`.
///
/// Both CDFs are piecewise linear, so the defining inequalities only need
/// checking at the breakpoints of `G` and of `F` shifted by `±e`. The
/// infimum is located by bisection.
pub fn levy_distance(f: &DistributionTable, g: &DistributionTable) -> f64 {
    const SLACK: f64 = 1e-12;
    let holds = |e: f64| {
        let check = |x: f64| {
            let gx = g.cdf_at(x);
            f.cdf_at(x - e) - e <= gx + SLACK && gx <= f.cdf_at(x + e) + e + SLACK
        };
        g.xs().iter().all(|&x| check(x))
            && f.xs().iter().all(|&x| check(x + e) && check(x - e))
    };
    if holds(0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}
