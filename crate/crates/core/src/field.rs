//! Stationary field models and their scaled spectral densities.
//!
//! A field is described either by a finite linear filter of i.i.d.
//! innovations, by a second-order Volterra expansion, or by a separable
//! (product-form) 1-D filter. Every model yields a covariance table and a
//! scaled spectral density `b(x, y)` sampled on the midpoint grid
//! `((i + 1/2) / N, (j + 1/2) / N)` of the unit square. The first grid
//! index pairs with the first lag index of the field.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Relative tolerance below which a negative trigonometric sum counts as round-off.
pub const NEGATIVE_DENSITY_TOLERANCE: f64 = 1e-8;

/// Default absolute tolerance (relative to `max(1, max b)`) for grid symmetry.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Midpoint node `(i + 1/2) / n` of the uniform grid on `[0, 1]`.
pub fn grid_node(i: usize, n: usize) -> f64 {
    (i as f64 + 0.5) / n as f64
}

/// Dense table of moving-average coefficients `a[u][v]`, `u, v` in `[-m, m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCoefficients {
    radius: usize,
    coeffs: Vec<f64>,
    sum_sq: f64,
}

impl FilterCoefficients {
    /// Builds a filter from sparse `(u, v, a)` entries. Repeated entries add up.
    pub fn from_entries(entries: &[(i64, i64, f64)]) -> Result<Self> {
        let mut radius = 0usize;
        for &(u, v, a) in entries {
            if !a.is_finite() {
                return Err(invalid(format!("non-finite coefficient at ({u}, {v})")));
            }
            radius = radius.max(u.unsigned_abs() as usize).max(v.unsigned_abs() as usize);
        }
        let side = 2 * radius + 1;
        let mut coeffs = vec![0.0; side * side];
        let r = radius as i64;
        for &(u, v, a) in entries {
            coeffs[((u + r) as usize) * side + (v + r) as usize] += a;
        }
        Ok(Self::from_dense(radius, coeffs))
    }

    fn from_dense(radius: usize, coeffs: Vec<f64>) -> Self {
        let sum_sq = coeffs.iter().map(|a| a * a).sum();
        Self {
            radius,
            coeffs,
            sum_sq,
        }
    }

    /// The single-tap filter `a[0][0] = sigma`, i.e. an i.i.d. field of variance `sigma^2`.
    pub fn delta(sigma: f64) -> Self {
        Self::from_dense(0, vec![sigma])
    }

    /// Separable filter `a[u][v] = c[u] c[v]` from 1-D `(k, c)` entries.
    pub fn product(coeffs: &[(i64, f64)]) -> Result<Self> {
        let mut entries = Vec::with_capacity(coeffs.len() * coeffs.len());
        for &(u, cu) in coeffs {
            for &(v, cv) in coeffs {
                entries.push((u, v, cu * cv));
            }
        }
        Self::from_entries(&entries)
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    fn side(&self) -> usize {
        2 * self.radius + 1
    }

    /// Coefficient at `(u, v)`; zero outside the support.
    pub fn get(&self, u: i64, v: i64) -> f64 {
        let r = self.radius as i64;
        if u.abs() > r || v.abs() > r {
            return 0.0;
        }
        self.coeffs[((u + r) as usize) * self.side() + (v + r) as usize]
    }

    /// Nonzero `(u, v, a)` entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        let r = self.radius as i64;
        let side = self.side();
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(move |(idx, &a)| ((idx / side) as i64 - r, (idx % side) as i64 - r, a))
    }

    /// Stored sum of squared coefficients, the variance of the field for unit innovations.
    pub fn sum_of_squares(&self) -> f64 {
        self.sum_sq
    }

    /// Whether `a[u][v] = a[v][u]` for all lags.
    pub fn is_symmetric(&self) -> bool {
        let r = self.radius as i64;
        (-r..=r).all(|u| (-r..=r).all(|v| self.get(u, v) == self.get(v, u)))
    }
}

/// Sparse off-diagonal coefficients of a second-order Volterra field
/// `X_k = sum b[u, v] xi[k - u] xi[k - v]`.
type Lag2 = (i64, i64);
pub type VolterraEntry = (Lag2, Lag2, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct VolterraCoefficients {
    entries: BTreeMap<(Lag2, Lag2), f64>,
    innovation_variance: f64,
}

impl VolterraCoefficients {
    pub fn new(entries: &[VolterraEntry], innovation_variance: f64) -> Result<Self> {
        if !(innovation_variance > 0.0 && innovation_variance.is_finite()) {
            return Err(invalid("innovation variance must be positive"));
        }
        let mut map = BTreeMap::new();
        for &(u, v, b) in entries {
            if u == v {
                return Err(invalid(format!(
                    "diagonal Volterra coefficient at u = v = {u:?}"
                )));
            }
            if !b.is_finite() {
                return Err(invalid(format!("non-finite coefficient at {u:?}, {v:?}")));
            }
            *map.entry((u, v)).or_insert(0.0) += b;
        }
        map.retain(|_, b| *b != 0.0);
        Ok(Self {
            entries: map,
            innovation_variance,
        })
    }

    pub fn innovation_variance(&self) -> f64 {
        self.innovation_variance
    }

    pub fn entries(&self) -> impl Iterator<Item = ((i64, i64), (i64, i64), f64)> + '_ {
        self.entries.iter().map(|(&(u, v), &b)| (u, v, b))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn get(&self, u: (i64, i64), v: (i64, i64)) -> f64 {
        self.entries.get(&(u, v)).copied().unwrap_or(0.0)
    }

    /// Largest absolute lag component over all entries.
    pub fn support_radius(&self) -> usize {
        self.entries
            .keys()
            .flat_map(|&(u, v)| [u.0, u.1, v.0, v.1])
            .map(|c| c.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }
}

/// Covariances `gamma[k][l] = cov(X_{0,0}, X_{k,l})` for `|k|, |l| <= R`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceTable {
    radius: usize,
    gamma: Vec<f64>,
}

impl CovarianceTable {
    /// Wraps a dense `(2R + 1)^2` row-major table after checking the
    /// stationarity symmetry and the Cauchy-Schwarz bound.
    pub fn new(radius: usize, gamma: Vec<f64>) -> Result<Self> {
        let side = 2 * radius + 1;
        if gamma.len() != side * side {
            return Err(invalid(format!(
                "covariance table of radius {radius} needs {} entries, got {}",
                side * side,
                gamma.len()
            )));
        }
        let table = Self { radius, gamma };
        let var = table.variance();
        if var < 0.0 || var.is_nan() {
            return Err(invalid("negative variance"));
        }
        let r = radius as i64;
        let tol = 1e-12 * var.max(f64::MIN_POSITIVE);
        for k in -r..=r {
            for l in -r..=r {
                let g = table.get(k, l);
                if !g.is_finite() {
                    return Err(invalid(format!("non-finite covariance at ({k}, {l})")));
                }
                if (g - table.get(-k, -l)).abs() > tol {
                    return Err(invalid(format!(
                        "gamma[{k}][{l}] != gamma[{}][{}]",
                        -k, -l
                    )));
                }
                if g.abs() > var + tol {
                    return Err(invalid(format!(
                        "|gamma[{k}][{l}]| exceeds the variance"
                    )));
                }
            }
        }
        Ok(table)
    }

    /// Builds a table from a function of the lag.
    fn tabulate(radius: usize, mut f: impl FnMut(i64, i64) -> f64) -> Self {
        let r = radius as i64;
        let mut gamma = Vec::with_capacity((2 * radius + 1).pow(2));
        for k in -r..=r {
            for l in -r..=r {
                gamma.push(f(k, l));
            }
        }
        Self { radius, gamma }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn get(&self, k: i64, l: i64) -> f64 {
        let r = self.radius as i64;
        if k.abs() > r || l.abs() > r {
            return 0.0;
        }
        self.gamma[((k + r) as usize) * (2 * self.radius + 1) + (l + r) as usize]
    }

    pub fn variance(&self) -> f64 {
        self.get(0, 0)
    }

    /// Whether `gamma[k][l] = gamma[l][k]` within `tol` relative to the variance.
    pub fn is_transpose_symmetric(&self, tol: f64) -> bool {
        let r = self.radius as i64;
        let scale = tol * self.variance().max(1.0);
        (-r..=r).all(|k| (-r..=r).all(|l| (self.get(k, l) - self.get(l, k)).abs() <= scale))
    }
}

/// Scaled spectral density `b` sampled at the midpoints of an `N x N` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    n: usize,
    values: Vec<f64>,
    mass: f64,
}

impl DensityGrid {
    /// Row-major values `b[i][j]`, `i` along `x` and `j` along `y`.
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("density grid must have N >= 1"));
        }
        if values.len() != n * n {
            return Err(invalid(format!(
                "grid of size {n} needs {} values, got {}",
                n * n,
                values.len()
            )));
        }
        if let Some(idx) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid(format!(
                "density value b[{}][{}] = {} is not a nonnegative number",
                idx / n,
                idx % n,
                values[idx]
            )));
        }
        let mass = values.iter().sum::<f64>() / (n * n) as f64;
        Ok(Self { n, values, mass })
    }

    /// The constant density `b = value`.
    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::new(n, vec![value; n * n])
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Grid mean of `b`, the midpoint-rule integral over the unit square.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = tol * self.max_value().max(1.0);
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= scale))
    }

    /// Midpoint-rule `L1([0,1]^2)` distance; grids must share `N`.
    pub fn l1_distance(&self, other: &DensityGrid) -> Result<f64> {
        if self.n != other.n {
            return Err(invalid(format!(
                "grid sizes differ: {} vs {}",
                self.n, other.n
            )));
        }
        let total: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(total / (self.n * self.n) as f64)
    }

    /// CSV: a header line holding `N`, then `N` rows of `N` comma-separated values.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.n * self.n * 24 + 16);
        let _ = writeln!(out, "{}", self.n);
        for i in 0..self.n {
            let row: Vec<String> = self.row(i).iter().map(|v| format_real(*v)).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "empty density file"))?;
        let n: usize = header
            .trim()
            .parse()
            .map_err(|_| parse_err(hl + 1, "expected grid size N on the first line"))?;
        let mut values = Vec::with_capacity(n * n);
        let mut rows = 0;
        for (ln, line) in lines {
            let before = values.len();
            for cell in line.split(',') {
                let v: f64 = cell
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(ln + 1, format!("bad number {:?}", cell.trim())))?;
                values.push(v);
            }
            if values.len() - before != n {
                return Err(parse_err(ln + 1, format!("expected {n} columns")));
            }
            rows += 1;
        }
        if rows != n {
            return Err(parse_err(0, format!("expected {n} rows, found {rows}")));
        }
        Self::new(n, values)
    }
}

/// One-dimensional profile `t(x)` of a rank-one density `b(x, y) = t(x) t(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileFunction {
    values: Vec<f64>,
}

impl ProfileFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("profile must have at least one node"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("profile values must be nonnegative"));
        }
        Ok(Self { values })
    }

    /// Profile `t(x) = |sum c[k] exp(-2 pi i x k)|^2` of a separable filter `a[u][v] = c[u] c[v]`.
    pub fn from_coefficients(coeffs: &[(i64, f64)], n: usize) -> Result<Self> {
        let values = (0..n)
            .map(|i| {
                let x = grid_node(i, n);
                coeffs
                    .iter()
                    .map(|&(k, c)| c * Complex64::from_polar(1.0, -2.0 * PI * x * k as f64))
                    .sum::<Complex64>()
                    .norm_sqr()
            })
            .collect();
        Self::new(values)
    }

    /// Recovers `t` from a grid that factors as `t(x) t(y)` within `tol`
    /// (relative to `max(1, max b)`).
    pub fn from_rank_one(grid: &DensityGrid, tol: f64) -> Result<Self> {
        let n = grid.size();
        let t: Vec<f64> = (0..n).map(|i| grid.get(i, i).sqrt()).collect();
        let scale = tol * grid.max_value().max(1.0);
        for i in 0..n {
            for j in 0..n {
                if (grid.get(i, j) - t[i] * t[j]).abs() > scale {
                    return Err(invalid(format!(
                        "density is not of product form at node ({i}, {j})"
                    )));
                }
            }
        }
        Self::new(t)
    }

    pub fn size(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// The rank-one grid `b[i][j] = t[i] t[j]`.
    pub fn to_grid(&self) -> DensityGrid {
        let n = self.size();
        let values = (0..n * n)
            .map(|idx| self.values[idx / n] * self.values[idx % n])
            .collect();
        DensityGrid::new(n, values).expect("products of nonnegative values")
    }
}

/// A constructive recipe for a stationary field.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldModel {
    /// Moving average of i.i.d. unit-variance innovations.
    Linear(FilterCoefficients),
    /// Second-order Volterra expansion.
    Volterra(VolterraCoefficients),
    /// Separable filter `a[u][v] = c[u] c[v]` given by the 1-D coefficients.
    ProductForm(Vec<(i64, f64)>),
}

impl FieldModel {
    /// i.i.d. entries of variance `sigma^2`.
    pub fn iid(sigma: f64) -> Self {
        FieldModel::Linear(FilterCoefficients::delta(sigma))
    }

    /// The linear filter behind linear and product-form models.
    pub fn filter(&self) -> Option<FilterCoefficients> {
        match self {
            FieldModel::Linear(a) => Some(a.clone()),
            FieldModel::ProductForm(c) => FilterCoefficients::product(c).ok(),
            FieldModel::Volterra(_) => None,
        }
    }

    /// Largest lag with a possibly nonzero covariance.
    pub fn covariance_radius(&self) -> usize {
        match self {
            FieldModel::Volterra(bv) => 2 * bv.support_radius(),
            _ => 2 * self.filter().map_or(0, |a| a.radius()),
        }
    }

    pub fn covariance(&self, radius: usize) -> CovarianceTable {
        match self {
            FieldModel::Volterra(bv) => covariance_from_volterra(bv, radius),
            _ => covariance_from_filter(&self.filter().expect("linear model"), radius),
        }
    }

    pub fn variance(&self) -> f64 {
        self.covariance(0).variance()
    }

    /// Whether `gamma[k][l] = gamma[l][k]`, the hypothesis of the unsymmetrized model.
    pub fn has_symmetric_covariance(&self) -> bool {
        self.covariance(self.covariance_radius())
            .is_transpose_symmetric(1e-12)
    }

    /// Scaled spectral density on an `n x n` grid. Linear models use the
    /// exact modulus-square; Volterra models invert the covariance table
    /// truncated at `volterra_radius` (defaults to the exact covariance radius).
    pub fn density(&self, n: usize, volterra_radius: Option<usize>) -> Result<DensityGrid> {
        match self {
            FieldModel::Volterra(bv) => {
                let r = volterra_radius.unwrap_or(2 * bv.support_radius());
                density_from_covariance(&covariance_from_volterra(bv, r), n)
            }
            FieldModel::ProductForm(c) => {
                Ok(ProfileFunction::from_coefficients(c, n)?.to_grid())
            }
            FieldModel::Linear(a) => Ok(density_from_filter(a, n)),
        }
    }
}

/// Discrete autocorrelation `gamma[k][l] = sum a[u][v] a[u + k][v + l]`.
pub fn covariance_from_filter(a: &FilterCoefficients, radius: usize) -> CovarianceTable {
    let entries: Vec<_> = a.entries().collect();
    CovarianceTable::tabulate(radius, |k, l| {
        entries
            .iter()
            .map(|&(u, v, c)| c * a.get(u + k, v + l))
            .sum()
    })
}

/// Phase table `exp(-2 pi i x_i k)` for `k` in `[-r, r]`, indexed `[i][k + r]`.
fn phases(n: usize, r: usize) -> Vec<Complex64> {
    let side = 2 * r + 1;
    let mut out = Vec::with_capacity(n * side);
    for i in 0..n {
        let x = grid_node(i, n);
        for k in -(r as i64)..=(r as i64) {
            out.push(Complex64::from_polar(1.0, -2.0 * PI * x * k as f64));
        }
    }
    out
}

/// Separable evaluation of `sum_{u,v} c[u][v] exp(-2 pi i (x_i u + y_j v))`.
fn trig_sum(n: usize, r: usize, coeff: impl Fn(i64, i64) -> f64) -> Vec<Complex64> {
    let side = 2 * r + 1;
    let ph = phases(n, r);
    let ri = r as i64;
    // partial[u][j] = sum_v c[u][v] e_j(v)
    let mut partial = vec![Complex64::new(0.0, 0.0); side * n];
    for u in 0..side {
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for v in 0..side {
                let c = coeff(u as i64 - ri, v as i64 - ri);
                if c != 0.0 {
                    acc += c * ph[j * side + v];
                }
            }
            partial[u * n + j] = acc;
        }
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for u in 0..side {
            let e = ph[i * side + u];
            let prow = &partial[u * n..(u + 1) * n];
            for (o, p) in out[i * n..(i + 1) * n].iter_mut().zip(prow) {
                *o += e * p;
            }
        }
    }
    out
}

/// `b[i][j] = |sum a[u][v] exp(-2 pi i (x_i u + y_j v))|^2`.
pub fn density_from_filter(a: &FilterCoefficients, n: usize) -> DensityGrid {
    let values = trig_sum(n, a.radius(), |u, v| a.get(u, v))
        .into_iter()
        .map(|c| c.norm_sqr())
        .collect();
    DensityGrid::new(n, values).expect("modulus squares are nonnegative")
}

/// `gamma_k = var^2 sum_{u,v} b[u,v] (b[u+k, v+k] + b[v+k, u+k])`.
pub fn covariance_from_volterra(bv: &VolterraCoefficients, radius: usize) -> CovarianceTable {
    let scale = bv.innovation_variance().powi(2);
    CovarianceTable::tabulate(radius, |k, l| {
        let s: f64 = bv
            .entries()
            .map(|(u, v, b)| {
                let (uk, vk) = ((u.0 + k, u.1 + l), (v.0 + k, v.1 + l));
                b * (bv.get(uk, vk) + bv.get(vk, uk))
            })
            .sum();
        scale * s
    })
}

/// Fourier inversion `b[i][j] = sum gamma[k][l] exp(-2 pi i (x_i k + y_j l))`.
///
/// Values within `1e-8 * gamma[0][0]` below zero are clamped to zero;
/// anything lower is reported as [`Error::NotADensity`].
pub fn density_from_covariance(c: &CovarianceTable, n: usize) -> Result<DensityGrid> {
    let threshold = NEGATIVE_DENSITY_TOLERANCE * c.variance();
    let raw = trig_sum(n, c.radius(), |k, l| c.get(k, l));
    let min_value = raw.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    if min_value < -threshold {
        return Err(Error::NotADensity {
            min_value,
            threshold,
        });
    }
    DensityGrid::new(n, raw.into_iter().map(|v| v.re.max(0.0)).collect())
}

/// Transpose-add `b(x, y) + b(y, x)`, the density of the additive model.
pub fn symmetrize_density(g: &DensityGrid) -> DensityGrid {
    let n = g.size();
    let values = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            g.get(i, j) + g.get(j, i)
        })
        .collect();
    DensityGrid::new(n, values).expect("sums of nonnegative values")
}

/// Drops every coefficient outside `[-m, m]^2`.
pub fn truncate_filter(a: &FilterCoefficients, m: usize) -> FilterCoefficients {
    if m >= a.radius() {
        return a.clone();
    }
    let mi = m as i64;
    let side = 2 * m + 1;
    let mut coeffs = Vec::with_capacity(side * side);
    for u in -mi..=mi {
        for v in -mi..=mi {
            coeffs.push(a.get(u, v));
        }
    }
    FilterCoefficients::from_dense(m, coeffs)
}

/// Cauchy-Schwarz bound on `||b_m - b||_{L1}` for the truncation at `m`:
/// `sqrt(2 (sum a^2 + sum_kept a^2) sum_dropped a^2)`.
pub fn truncation_l1_bound(a: &FilterCoefficients, m: usize) -> f64 {
    let kept = truncate_filter(a, m).sum_of_squares();
    let total = a.sum_of_squares();
    let dropped = (total - kept).max(0.0);
    (2.0 * (total + kept) * dropped).sqrt()
}

/// Parses the plain-text coefficient format.
///
/// One entry per line: `u v a` for a linear filter, `u1 u2 v1 v2 b` for a
/// Volterra field, or `k c` for a separable filter. Lines starting with `#`
/// are comments. All entries of a file must use the same column count.
pub fn parse_model(text: &str) -> Result<FieldModel> {
    let mut columns: Option<usize> = None;
    let mut rows: Vec<(usize, Vec<i64>, f64)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match columns {
            None => columns = Some(fields.len()),
            Some(c) if c != fields.len() => {
                return Err(parse_err(
                    ln + 1,
                    format!("expected {c} columns, found {}", fields.len()),
                ))
            }
            _ => {}
        }
        let (ints, real) = fields.split_at(fields.len().saturating_sub(1));
        let idx = ints
            .iter()
            .map(|s| {
                s.parse::<i64>()
                    .map_err(|_| parse_err(ln + 1, format!("bad integer index {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let value: f64 = real
            .first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(ln + 1, "bad coefficient value"))?;
        rows.push((ln + 1, idx, value));
    }
    match columns {
        None => Err(parse_err(0, "no coefficient entries")),
        Some(2) => Ok(FieldModel::ProductForm(
            rows.into_iter().map(|(_, i, v)| (i[0], v)).collect(),
        )),
        Some(3) => {
            let entries: Vec<_> = rows.into_iter().map(|(_, i, v)| (i[0], i[1], v)).collect();
            Ok(FieldModel::Linear(FilterCoefficients::from_entries(&entries)?))
        }
        Some(5) => {
            let mut entries = Vec::with_capacity(rows.len());
            for (ln, i, v) in rows {
                if (i[0], i[1]) == (i[2], i[3]) {
                    return Err(parse_err(ln, "Volterra coefficients with u = v must be absent"));
                }
                entries.push(((i[0], i[1]), (i[2], i[3]), v));
            }
            Ok(FieldModel::Volterra(VolterraCoefficients::new(&entries, 1.0)?))
        }
        Some(c) => Err(parse_err(0, format!("unsupported column count {c}"))),
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Fixed 17-significant-digit formatting used by every CSV writer.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_tap() -> FilterCoefficients {
        FilterCoefficients::from_entries(&[(0, 0, 1.0), (1, 0, 1.0)]).unwrap()
    }

    #[test]
    fn filter_sum_of_squares_matches_recomputed() {
        let a = FilterCoefficients::from_entries(&[(0, 0, 0.3), (-2, 1, 1.5), (1, 1, -0.7)])
            .unwrap();
        let recomputed: f64 = a.entries().map(|(_, _, c)| c * c).sum();
        assert!((a.sum_of_squares() - recomputed).abs() <= 1e-12 * recomputed);
        assert_eq!(a.radius(), 2);
        assert_eq!(a.get(-2, 1), 1.5);
        assert_eq!(a.get(5, 5), 0.0);
    }

    #[test]
    fn delta_filter_covariance() {
        let c = covariance_from_filter(&FilterCoefficients::delta(1.0), 1);
        for k in -1..=1 {
            for l in -1..=1 {
                let expected = if (k, l) == (0, 0) { 1.0 } else { 0.0 };
                assert_eq!(c.get(k, l), expected);
            }
        }
    }

    #[test]
    fn two_tap_covariance_by_hand() {
        let c = covariance_from_filter(&two_tap(), 1);
        assert_eq!(c.get(0, 0), 2.0);
        assert_eq!(c.get(1, 0), 1.0);
        assert_eq!(c.get(-1, 0), 1.0);
        for (k, l) in [(0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)] {
            assert_eq!(c.get(k, l), 0.0);
        }
    }

    #[test]
    fn filter_covariance_vanishes_beyond_twice_the_support() {
        let a = FilterCoefficients::from_entries(&[(0, 0, 1.0), (1, -1, 0.5), (-1, 1, 0.2)])
            .unwrap();
        let c = covariance_from_filter(&a, 4);
        for k in -4i64..=4 {
            for l in -4i64..=4 {
                if k.abs() > 2 || l.abs() > 2 {
                    assert_eq!(c.get(k, l), 0.0);
                }
                assert_eq!(c.get(k, l), c.get(-k, -l));
            }
        }
    }

    #[test]
    fn white_noise_density_is_flat() {
        let g = density_from_filter(&FilterCoefficients::delta(1.7), 8);
        for v in g.values() {
            assert_abs_diff_eq!(*v, 1.7 * 1.7, epsilon = 1e-14);
        }
    }

    #[test]
    fn two_tap_density_on_four_nodes() {
        // |1 + e^{-2 pi i x}|^2 = 2 + 2 cos(2 pi x) at x = 1/8, 3/8, 5/8, 7/8
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [2.0 + 2.0 * c, 2.0 - 2.0 * c, 2.0 - 2.0 * c, 2.0 + 2.0 * c];
        let g = density_from_filter(&two_tap(), 4);
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(g.get(i, j), expected[i], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn density_mass_matches_parseval() {
        let a = FilterCoefficients::from_entries(&[
            (0, 0, 1.0),
            (1, 0, -0.4),
            (0, 2, 0.25),
            (-1, -1, 0.6),
        ])
        .unwrap();
        let g = density_from_filter(&a, 16);
        assert_abs_diff_eq!(g.mass(), a.sum_of_squares(), epsilon = 1e-10);
    }

    #[test]
    fn single_entry_volterra_variance() {
        let bv = VolterraCoefficients::new(&[((0, 0), (1, 0), 1.0)], 1.0).unwrap();
        let c = covariance_from_volterra(&bv, 2);
        assert_eq!(c.variance(), 1.0);
        for k in -2..=2 {
            for l in -2..=2 {
                if (k, l) != (0, 0) {
                    assert_eq!(c.get(k, l), 0.0);
                }
            }
        }
    }

    #[test]
    fn empty_volterra_is_zero_field() {
        let bv = VolterraCoefficients::new(&[], 1.0).unwrap();
        let c = covariance_from_volterra(&bv, 3);
        assert!((-3..=3).all(|k| (-3..=3).all(|l| c.get(k, l) == 0.0)));
    }

    #[test]
    fn volterra_rejects_diagonal_entries() {
        assert!(VolterraCoefficients::new(&[((1, 0), (1, 0), 1.0)], 1.0).is_err());
    }

    #[test]
    fn volterra_covariance_symmetry_and_variance_scaling() {
        let entries = [
            ((0, 0), (1, 0), 0.8),
            ((0, 1), (0, 0), -0.5),
            ((1, 1), (0, -1), 0.3),
        ];
        let bv1 = VolterraCoefficients::new(&entries, 1.0).unwrap();
        let bv2 = VolterraCoefficients::new(&entries, 2.0).unwrap();
        let c1 = covariance_from_volterra(&bv1, 3);
        let c2 = covariance_from_volterra(&bv2, 3);
        for k in -3..=3 {
            for l in -3..=3 {
                assert_abs_diff_eq!(c1.get(k, l), c1.get(-k, -l), epsilon = 1e-15);
                assert_abs_diff_eq!(c2.get(k, l), 4.0 * c1.get(k, l), epsilon = 1e-14);
            }
        }
        // gamma_0 = sum b_{u,v}^2 when no (u, v) has its transpose among the entries
        assert_abs_diff_eq!(c1.variance(), 0.64 + 0.25 + 0.09, epsilon = 1e-15);
    }

    #[test]
    fn white_noise_covariance_inverts_to_flat_density() {
        let c = CovarianceTable::new(0, vec![2.5]).unwrap();
        let g = density_from_covariance(&c, 6).unwrap();
        assert!(g.values().iter().all(|v| (*v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn two_routes_agree_for_two_tap_filter() {
        let a = two_tap();
        let direct = density_from_filter(&a, 16);
        let via_cov = density_from_covariance(&covariance_from_filter(&a, 2), 16).unwrap();
        for (x, y) in direct.values().iter().zip(via_cov.values()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn invalid_covariance_is_not_a_density() {
        let mut gamma = vec![0.0; 9];
        gamma[4] = 1.0; // (0, 0)
        gamma[1] = 1.0; // (-1, 0)
        gamma[7] = 1.0; // (1, 0)
        let c = CovarianceTable::new(1, gamma).unwrap();
        match density_from_covariance(&c, 8) {
            Err(Error::NotADensity { min_value, .. }) => assert!(min_value < -0.5),
            other => panic!("expected NotADensity, got {other:?}"),
        }
    }

    #[test]
    fn covariance_table_validates_symmetry() {
        let mut gamma = vec![0.0; 9];
        gamma[4] = 1.0;
        gamma[7] = 0.5;
        assert!(CovarianceTable::new(1, gamma).is_err());
    }

    #[test]
    fn symmetrize_doubles_symmetric_input() {
        let g = density_from_filter(&FilterCoefficients::delta(1.0), 4);
        let s = symmetrize_density(&g);
        for (a, b) in g.values().iter().zip(s.values()) {
            assert_eq!(2.0 * a, *b);
        }
        assert_abs_diff_eq!(s.mass(), 2.0 * g.mass(), epsilon = 1e-15);
    }

    #[test]
    fn symmetrize_transpose_adds_off_diagonal() {
        let g = DensityGrid::new(2, vec![0.0, 3.0, 0.0, 0.0]).unwrap();
        let s = symmetrize_density(&g);
        assert_eq!(s.values(), &[0.0, 3.0, 3.0, 0.0]);
        assert!(s.is_symmetric(0.0));
        assert_abs_diff_eq!(s.mass(), 2.0 * g.mass(), epsilon = 1e-15);
    }

    #[test]
    fn truncation_edges() {
        let a = FilterCoefficients::from_entries(&[(0, 0, 1.0), (2, -1, 0.5), (1, 1, 0.25)])
            .unwrap();
        assert_eq!(truncate_filter(&a, 2), a);
        assert_eq!(truncate_filter(&a, 7), a);
        let t0 = truncate_filter(&a, 0);
        assert_eq!(t0.radius(), 0);
        assert_eq!(t0.get(0, 0), 1.0);
        assert_eq!(truncation_l1_bound(&a, 2), 0.0);
    }

    #[test]
    fn truncation_respects_cauchy_schwarz_bound() {
        let mut entries = Vec::new();
        for u in -4i64..=4 {
            for v in -4i64..=4 {
                let sign = if (u * 7 + v * 3) % 2 == 0 { 1.0 } else { -1.0 };
                entries.push((u, v, sign * 0.6f64.powi((u.abs() + v.abs()) as i32)));
            }
        }
        let a = FilterCoefficients::from_entries(&entries).unwrap();
        let n = 32;
        let full = density_from_filter(&a, n);
        let mut prev = f64::INFINITY;
        for m in 0..=4 {
            let bm = density_from_filter(&truncate_filter(&a, m), n);
            let dist = bm.l1_distance(&full).unwrap();
            assert!(dist <= truncation_l1_bound(&a, m) + 1e-12, "m = {m}");
            assert!(dist <= prev + 1e-12);
            prev = dist;
        }
        assert!(prev < 1e-12);
    }

    #[test]
    fn density_csv_round_trip_is_exact() {
        let a = FilterCoefficients::from_entries(&[(0, 0, 1.0), (1, 1, 0.3)]).unwrap();
        let g = density_from_filter(&a, 5);
        let back = DensityGrid::from_csv(&g.to_csv()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn density_csv_rejects_ragged_rows() {
        let err = DensityGrid::from_csv("2\n1.0,2.0\n3.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn parse_linear_volterra_and_product_models() {
        let lin = parse_model("# two taps\n0 0 1.0\n1 0 1.0\n").unwrap();
        assert_eq!(lin, FieldModel::Linear(two_tap()));

        let volt = parse_model("0 0 1 0 1.0\n").unwrap();
        match volt {
            FieldModel::Volterra(bv) => assert_eq!(bv.len(), 1),
            other => panic!("{other:?}"),
        }

        let prod = parse_model("0 1.0\n1 0.5\n").unwrap();
        assert_eq!(prod, FieldModel::ProductForm(vec![(0, 1.0), (1, 0.5)]));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert!(matches!(
            parse_model("0 0 1.0\n0 1 2 3 1.0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_model("0 x 1.0\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_model("1 1 1 1 0.5\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(parse_model("# nothing\n").is_err());
    }

    #[test]
    fn rank_one_profile_round_trip() {
        let t = ProfileFunction::new(vec![1.0, 2.0, 0.5, 0.0]).unwrap();
        let back = ProfileFunction::from_rank_one(&t.to_grid(), 1e-12).unwrap();
        for (a, b) in t.values().iter().zip(back.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let not_rank_one = density_from_filter(&two_tap(), 4);
        let sym = symmetrize_density(&not_rank_one);
        assert!(ProfileFunction::from_rank_one(&sym, 1e-10).is_err());
    }

    #[test]
    fn product_model_density_matches_filter_density() {
        let c = vec![(0, 1.0), (1, 0.5), (-2, 0.25)];
        let model = FieldModel::ProductForm(c.clone());
        let via_profile = model.density(12, None).unwrap();
        let via_filter = density_from_filter(&FilterCoefficients::product(&c).unwrap(), 12);
        for (a, b) in via_profile.values().iter().zip(via_filter.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn symmetric_filter_has_symmetric_covariance() {
        let sym = FilterCoefficients::from_entries(&[(0, 0, 1.0), (1, 0, 1.0), (0, 1, 1.0)])
            .unwrap();
        assert!(sym.is_symmetric());
        assert!(FieldModel::Linear(sym).has_symmetric_covariance());
        assert!(!FieldModel::Linear(two_tap()).has_symmetric_covariance());
    }
}
