//! Fixed-point solver for the resolvent profile `g(x, z)` and the
//! Stieltjes transform `S(z)` of the limiting spectral distribution.
//!
//! The discretized equation on the midpoint grid reads
//! `g[i] = -1 / (z + pi[i])` with `pi[i] = (1/N) sum_j b[i][j] g[j]`, and
//! `S = (1/N) sum_i g[i]`. The iteration runs on the self-energy `pi`:
//! every iterate keeps `Im pi >= 0`, hence `|z + pi| >= Im z` and the
//! node-wise Herglotz bounds hold automatically.
//!
//! Above the height `sqrt(B)` (where the a-priori Lipschitz factor
//! `B / (Im z)^2` is below one) the plain iteration is used. Below it the
//! solve starts at a safe height and walks down geometrically, warm-starting
//! each stage and damping the update.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::field::{DensityGrid, ProfileFunction, SYMMETRY_TOLERANCE};
use crate::stieltjes::{CurvePoint, CurveSource, StieltjesCurve};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Residual target at the requested point.
    pub tolerance: f64,
    /// Iteration cap per continuation stage.
    pub max_iterations: usize,
    /// Damping used below the certified region.
    pub damping: f64,
    /// Geometric factor for lowering `Im z` between stages.
    pub continuation_factor: f64,
    /// Multiplier on the starting height `max(Im z, 2 sqrt(B + 1))`.
    pub safe_height_multiplier: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 10_000,
            damping: 0.5,
            continuation_factor: 0.7,
            safe_height_multiplier: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(invalid("tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(invalid("damping must lie in (0, 1]"));
        }
        if !(self.continuation_factor > 0.0 && self.continuation_factor < 1.0) {
            return Err(invalid("continuation_factor must lie in (0, 1)"));
        }
        if !(self.safe_height_multiplier >= 1.0 && self.safe_height_multiplier.is_finite()) {
            return Err(invalid("safe_height_multiplier must be at least 1"));
        }
        Ok(())
    }

    /// Residual target for intermediate continuation stages, which only
    /// provide warm starts.
    fn stage_tolerance(&self) -> f64 {
        self.tolerance.max(1e-6)
    }
}

/// Solution of the discretized equation at one point `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventProfile {
    pub z: Complex64,
    /// `g(x_i, z)` per grid node.
    pub g: Vec<Complex64>,
    /// Self-energy `pi[i] = (1/N) sum_j b[i][j] g[j]`.
    pub pi: Vec<Complex64>,
    pub s: Complex64,
    /// Iterations summed over all stages.
    pub iterations: usize,
    /// `max_i |g[i] + 1 / (z + pi[i])|`.
    pub residual: f64,
    pub stages: usize,
    /// Per-iteration residuals of the final stage.
    pub residual_history: Vec<f64>,
}

impl ResolventProfile {
    /// A starting profile with the given self-energy, e.g. to seed a solve
    /// from a non-default initialization.
    pub fn from_self_energy(z: Complex64, pi: Vec<Complex64>) -> Self {
        let g: Vec<Complex64> = pi.iter().map(|p| -1.0 / (z + p)).collect();
        let s = mean(&g);
        Self {
            z,
            g,
            pi,
            s,
            iterations: 0,
            residual: f64::INFINITY,
            stages: 0,
            residual_history: Vec::new(),
        }
    }

    /// Node-wise bounds that every converged profile satisfies:
    /// `Im g > 0`, `|g| <= 1 / Im z`, `Im pi >= 0`, `|z + pi| >= Im z`, `Im S > 0`.
    pub fn invariant_violations(&self) -> Vec<String> {
        let h = self.z.im;
        let slack = 1e-12;
        let mut out = Vec::new();
        for (i, (g, p)) in self.g.iter().zip(&self.pi).enumerate() {
            if !(g.im > 0.0) {
                out.push(format!("Im g[{i}] = {} <= 0", g.im));
            }
            if g.norm() > (1.0 + slack) / h {
                out.push(format!("|g[{i}]| = {} > 1/Im z", g.norm()));
            }
            if p.im < 0.0 {
                out.push(format!("Im pi[{i}] = {} < 0", p.im));
            }
            if (self.z + p).norm() < h * (1.0 - slack) {
                out.push(format!("|z + pi[{i}]| < Im z"));
            }
        }
        if !(self.s.im > 0.0) || self.s.norm() > (1.0 + slack) / h {
            out.push(format!("S = {} violates the Herglotz bounds", self.s));
        }
        out
    }

    /// Ratios of successive residuals over the last `window` iterations of
    /// the final stage, worst case.
    pub fn decay_ratio(&self, window: usize) -> Option<f64> {
        let h = &self.residual_history;
        if h.len() < 2 {
            return None;
        }
        let start = h.len().saturating_sub(window + 1);
        h[start..]
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .reduce(f64::max)
    }
}

/// Solution of the scalar product-form equation
/// `v = -(1/N) sum t_i / (z + t_i v)`, with `S = -(1 + v^2) / z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarSolution {
    pub z: Complex64,
    pub v: Complex64,
    pub s: Complex64,
    pub iterations: usize,
    pub residual: f64,
}

fn mean(values: &[Complex64]) -> Complex64 {
    match values.first() {
        Some(first) if values.iter().all(|v| v == first) => *first,
        _ => values.iter().sum::<Complex64>() / values.len() as f64,
    }
}

/// `B / (Im z)^2`, the a-priori Lipschitz factor of the self-energy map.
pub fn contraction_certificate(b: &DensityGrid, z: Complex64) -> f64 {
    b.mass() / (z.im * z.im)
}

/// Upper bound on `|S_1(z) - S_2(z)|` for two densities:
/// `||b1 - b2||_{L1} * Im z / ((Im z)^2 - B_max) / (Im z)^2`.
pub fn continuity_bound(b1: &DensityGrid, b2: &DensityGrid, z: Complex64) -> Result<f64> {
    let h = z.im;
    let b_max = b1.mass().max(b2.mass());
    if !(h > 0.0 && h * h > b_max) {
        return Err(invalid(format!(
            "continuity bound needs (Im z)^2 > max(B1, B2) = {b_max}, got Im z = {h}"
        )));
    }
    let l1 = b1.l1_distance(b2)?;
    let pi_gap = h / (h * h - b_max) * l1;
    Ok(pi_gap / (h * h))
}

/// Stieltjes transform of the semicircle law of variance `sigma2`:
/// `-(z - w) / (2 sigma2)` with `w = sqrt(z^2 - 4 sigma2)` taken with
/// positive imaginary part, evaluated in the equivalent form `-2 / (z + w)`.
pub fn semicircle_transform(sigma2: f64, z: Complex64) -> Complex64 {
    let mut w = (z * z - 4.0 * sigma2).sqrt();
    if w.im < 0.0 {
        w = -w;
    }
    -2.0 / (z + w)
}

/// Semicircle density `sqrt(4 sigma2 - x^2) / (2 pi sigma2)`.
pub fn semicircle_density(sigma2: f64, x: f64) -> f64 {
    let r2 = 4.0 * sigma2 - x * x;
    if r2 <= 0.0 {
        0.0
    } else {
        r2.sqrt() / (2.0 * std::f64::consts::PI * sigma2)
    }
}

/// Closed-form semicircle curve on a contour.
pub fn semicircle_curve(sigma2: f64, contour: &[Complex64]) -> Result<StieltjesCurve> {
    let points = contour
        .iter()
        .map(|&z| CurvePoint::exact(z, semicircle_transform(sigma2, z)))
        .collect();
    StieltjesCurve::new(points, CurveSource::ClosedForm)
}

/// A self-energy map `state -> F(state)` with its residual.
trait SelfEnergyMap {
    fn len(&self) -> usize;
    /// Writes `F(state)` into `out` and returns the residual at `state`.
    fn apply(&self, z: Complex64, state: &[Complex64], out: &mut [Complex64]) -> f64;
}

/// `pi -> (1/N) sum_j b[i][j] (-1 / (z + pi[j]))`.
struct GridMap<'a> {
    b: &'a DensityGrid,
    scratch_re: std::cell::RefCell<Vec<f64>>,
    scratch_im: std::cell::RefCell<Vec<f64>>,
}

impl<'a> GridMap<'a> {
    fn new(b: &'a DensityGrid) -> Self {
        let n = b.size();
        Self {
            b,
            scratch_re: vec![0.0; n].into(),
            scratch_im: vec![0.0; n].into(),
        }
    }
}

fn dot4(row: &[f64], x: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = row.chunks_exact(4).zip(x.chunks_exact(4));
    for (r, v) in chunks {
        acc[0] += r[0] * v[0];
        acc[1] += r[1] * v[1];
        acc[2] += r[2] * v[2];
        acc[3] += r[3] * v[3];
    }
    let tail = row.len() - row.len() % 4;
    let rest: f64 = row[tail..].iter().zip(&x[tail..]).map(|(r, v)| r * v).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + rest
}

impl SelfEnergyMap for GridMap<'_> {
    fn len(&self) -> usize {
        self.b.size()
    }

    fn apply(&self, z: Complex64, state: &[Complex64], out: &mut [Complex64]) -> f64 {
        let n = self.b.size();
        let inv_n = 1.0 / n as f64;
        let mut gr = self.scratch_re.borrow_mut();
        let mut gi = self.scratch_im.borrow_mut();
        for (j, p) in state.iter().enumerate() {
            let g = -1.0 / (z + p);
            gr[j] = g.re;
            gi[j] = g.im;
        }
        let mut residual = 0.0f64;
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.b.row(i);
            *o = Complex64::new(dot4(row, &gr) * inv_n, dot4(row, &gi) * inv_n);
            let g = Complex64::new(gr[i], gi[i]);
            residual = residual.max((g + 1.0 / (z + *o)).norm());
        }
        residual
    }
}

/// `v -> -(1/N) sum_i t_i / (z + t_i v)`, a one-element state.
struct ProductMap<'a> {
    t: &'a [f64],
}

impl SelfEnergyMap for ProductMap<'_> {
    fn len(&self) -> usize {
        1
    }

    fn apply(&self, z: Complex64, state: &[Complex64], out: &mut [Complex64]) -> f64 {
        let v = state[0];
        let sum: Complex64 = self.t.iter().map(|&t| t / (z + t * v)).sum();
        out[0] = -sum / self.t.len() as f64;
        (out[0] - v).norm()
    }
}

struct StageOutcome {
    iterations: usize,
    residual: f64,
    history: Vec<f64>,
}

/// Iterates `state <- (1 - d) state + d F(state)` until the residual drops
/// to `tol`. On success `state` holds the converged iterate and `image`
/// holds `F(state)`.
#[allow(clippy::too_many_arguments)]
fn run_stage<M: SelfEnergyMap>(
    map: &M,
    z: Complex64,
    state: &mut [Complex64],
    image: &mut [Complex64],
    damping: f64,
    tol: f64,
    max_iterations: usize,
    stage: usize,
) -> Result<StageOutcome> {
    let mut history = Vec::new();
    let mut residual = f64::INFINITY;
    for it in 0..max_iterations {
        residual = map.apply(z, state, image);
        history.push(residual);
        if !residual.is_finite() {
            break;
        }
        if residual <= tol {
            return Ok(StageOutcome {
                iterations: it + 1,
                residual,
                history,
            });
        }
        for (s, f) in state.iter_mut().zip(image.iter()) {
            *s = (1.0 - damping) * *s + damping * f;
        }
    }
    Err(Error::NoConvergence {
        z,
        stage,
        residual,
        iterations: max_iterations,
    })
}

/// Heights of the continuation stages ending at `target`.
fn stage_heights(target: f64, start: Option<f64>, mass: f64, cfg: &SolverConfig) -> Vec<f64> {
    if target * target > mass && start.is_none() {
        return vec![target];
    }
    let h0 = start
        .unwrap_or_else(|| cfg.safe_height_multiplier * target.max(2.0 * (mass + 1.0).sqrt()));
    if target * target > mass || h0 <= target {
        return vec![target];
    }
    let mut heights = vec![h0];
    let mut h = h0 * cfg.continuation_factor;
    while h > target {
        heights.push(h);
        h *= cfg.continuation_factor;
    }
    heights.push(target);
    heights
}

struct Continued {
    state: Vec<Complex64>,
    image: Vec<Complex64>,
    iterations: usize,
    residual: f64,
    stages: usize,
    history: Vec<f64>,
}

fn continue_to<M: SelfEnergyMap>(
    map: &M,
    z: Complex64,
    mass: f64,
    mut state: Vec<Complex64>,
    start_height: Option<f64>,
    cfg: &SolverConfig,
) -> Result<Continued> {
    let heights = stage_heights(z.im, start_height, mass, cfg);
    let mut image = vec![Complex64::new(0.0, 0.0); map.len()];
    let mut iterations = 0;
    let last = heights.len() - 1;
    for (stage, &h) in heights.iter().enumerate() {
        let zs = Complex64::new(z.re, h);
        let damping = if h * h > mass { 1.0 } else { cfg.damping };
        let tol = if stage == last {
            cfg.tolerance
        } else {
            cfg.stage_tolerance()
        };
        let outcome = run_stage(
            map,
            zs,
            &mut state,
            &mut image,
            damping,
            tol,
            cfg.max_iterations,
            stage,
        )?;
        iterations += outcome.iterations;
        if stage == last {
            return Ok(Continued {
                state,
                image,
                iterations,
                residual: outcome.residual,
                stages: heights.len(),
                history: outcome.history,
            });
        }
        // warm start for the next stage
        state.copy_from_slice(&image);
    }
    unreachable!("stage list is never empty")
}

fn check_point(z: Complex64) -> Result<()> {
    if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return Err(invalid(format!("z = {z} is not in the upper half-plane")));
    }
    Ok(())
}

/// Solves the discretized self-consistent equation at `z`.
///
/// The density must be symmetric (`b[i][j] = b[j][i]`); nonsymmetric
/// densities should go through [`crate::field::symmetrize_density`] first.
/// A `warm_start` profile seeds the iteration with its self-energy; when it
/// sits above `z` the continuation descends from its height.
pub fn solve_profile(
    b: &DensityGrid,
    z: Complex64,
    cfg: &SolverConfig,
    warm_start: Option<&ResolventProfile>,
) -> Result<ResolventProfile> {
    check_point(z)?;
    cfg.validate()?;
    if !b.is_symmetric(SYMMETRY_TOLERANCE) {
        return Err(invalid(
            "density grid is not symmetric; symmetrize it or use the additive model",
        ));
    }
    let n = b.size();
    let (state, start) = match warm_start {
        Some(w) => {
            if w.pi.len() != n {
                return Err(invalid("warm start has a different grid size"));
            }
            (w.pi.clone(), (w.z.im > z.im).then_some(w.z.im))
        }
        None => (vec![Complex64::new(0.0, 0.0); n], None),
    };
    let map = GridMap::new(b);
    let done = continue_to(&map, z, b.mass(), state, start, cfg)?;
    let g: Vec<Complex64> = done.state.iter().map(|p| -1.0 / (z + p)).collect();
    let s = mean(&g);
    Ok(ResolventProfile {
        z,
        g,
        pi: done.image,
        s,
        iterations: done.iterations,
        residual: done.residual,
        stages: done.stages,
        residual_history: done.history,
    })
}

/// Solves the scalar equation of a rank-one density `b(x, y) = t(x) t(y)`.
pub fn solve_product_form(
    t: &ProfileFunction,
    z: Complex64,
    cfg: &SolverConfig,
) -> Result<ScalarSolution> {
    check_point(z)?;
    cfg.validate()?;
    let map = ProductMap { t: t.values() };
    let mass = t.mean().powi(2);
    let done = continue_to(&map, z, mass, vec![Complex64::new(0.0, 0.0)], None, cfg)?;
    let v = done.image[0];
    Ok(ScalarSolution {
        z,
        v,
        s: -(1.0 + v * v) / z,
        iterations: done.iterations,
        residual: done.residual,
    })
}

fn check_contour_order(contour: &[Complex64]) -> Result<()> {
    for (k, w) in contour.windows(2).enumerate() {
        let ordered = w[0].im > w[1].im || (w[0].im == w[1].im && w[0].re < w[1].re);
        if !ordered {
            return Err(invalid(format!(
                "contour must be sorted by descending Im z then ascending Re z (points {k} and {})",
                k + 1
            )));
        }
    }
    Ok(())
}

/// Solves every contour point, warm-starting down each vertical chain.
pub fn solve_curve(
    b: &DensityGrid,
    contour: &[Complex64],
    cfg: &SolverConfig,
) -> Result<StieltjesCurve> {
    solve_curve_with(b, contour, cfg, true)
}

/// Like [`solve_curve`]; with `warm_start = false` every point is solved
/// from the cold start.
///
/// Points sharing a real part form a chain ordered by descending height.
/// Chains are independent and solved in parallel.
pub fn solve_curve_with(
    b: &DensityGrid,
    contour: &[Complex64],
    cfg: &SolverConfig,
    warm_start: bool,
) -> Result<StieltjesCurve> {
    contour.iter().try_for_each(|&z| check_point(z))?;
    check_contour_order(contour)?;

    let mut chains: Vec<(u64, Vec<usize>)> = Vec::new();
    for (k, z) in contour.iter().enumerate() {
        let key = z.re.to_bits();
        match chains.iter_mut().find(|(re, _)| *re == key) {
            Some((_, members)) => members.push(k),
            None => chains.push((key, vec![k])),
        }
    }

    let solved: Vec<Vec<(usize, CurvePoint)>> = chains
        .par_iter()
        .map(|(_, members)| {
            let mut prev: Option<ResolventProfile> = None;
            let mut out = Vec::with_capacity(members.len());
            for &k in members {
                let warm = if warm_start { prev.as_ref() } else { None };
                let profile = solve_profile(b, contour[k], cfg, warm)?;
                out.push((
                    k,
                    CurvePoint {
                        z: profile.z,
                        s: profile.s,
                        iterations: profile.iterations,
                        residual: profile.residual,
                    },
                ));
                prev = Some(profile);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut points = vec![None; contour.len()];
    for (k, p) in solved.into_iter().flatten() {
        points[k] = Some(p);
    }
    StieltjesCurve::new(
        points.into_iter().map(|p| p.expect("every point solved")).collect(),
        CurveSource::Solver,
    )
}
