//! Monte Carlo synthesis of field patches, the two symmetric matrix
//! models built from them, and pooled empirical spectra.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricTridiagonal};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::field::{FieldModel, FilterCoefficients, VolterraCoefficients};
use crate::stieltjes::{empirical_curve, invert_to_distribution, DistributionTable, StieltjesCurve};

/// Odd multiplier of the replicate index in the seed-splitting rule.
pub const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Height of the default comparison contour.
pub const DEFAULT_CONTOUR_HEIGHT: f64 = 0.05;
/// Number of points on the default comparison contour.
pub const DEFAULT_CONTOUR_POINTS: usize = 121;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetrization {
    /// Lower triangle of the patch mirrored to the upper triangle.
    Wigner,
    /// Patch plus its transpose.
    Additive,
}

impl fmt::Display for Symmetrization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symmetrization::Wigner => "wigner",
            Symmetrization::Additive => "additive",
        })
    }
}

impl FromStr for Symmetrization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wigner" => Ok(Symmetrization::Wigner),
            "additive" => Ok(Symmetrization::Additive),
            other => Err(invalid(format!("unknown symmetrization {other:?}"))),
        }
    }
}

/// Centered, unit-variance innovation laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Innovation {
    Gaussian,
    Rademacher,
    /// Uniform on `[-sqrt 3, sqrt 3]`.
    Uniform,
}

impl fmt::Display for Innovation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Innovation::Gaussian => "gaussian",
            Innovation::Rademacher => "rademacher",
            Innovation::Uniform => "uniform",
        })
    }
}

impl FromStr for Innovation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Innovation::Gaussian),
            "rademacher" => Ok(Innovation::Rademacher),
            "uniform" => Ok(Innovation::Uniform),
            other => Err(invalid(format!("unknown innovation {other:?}"))),
        }
    }
}

fn draw_innovations(count: usize, seed: u64, innovation: Innovation, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match innovation {
        Innovation::Gaussian => (0..count)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                scale * g
            })
            .collect(),
        Innovation::Rademacher => (0..count)
            .map(|_| if rng.random::<bool>() { scale } else { -scale })
            .collect(),
        Innovation::Uniform => {
            let h = 3f64.sqrt();
            let dist = Uniform::new(-h, h).expect("finite bounds");
            (0..count).map(|_| scale * dist.sample(&mut rng)).collect()
        }
    }
}

/// Seed of replicate `r`: `seed XOR (r * SEED_STRIDE)`.
pub fn replicate_seed(seed: u64, replicate: usize) -> u64 {
    seed ^ (replicate as u64).wrapping_mul(SEED_STRIDE)
}

/// One realization of the field on the index square `0 <= k, l < n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPatch {
    n: usize,
    values: Vec<f64>,
}

impl FieldPatch {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(invalid("patch size mismatch"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("patch values must be finite"));
        }
        Ok(Self { n, values })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.values[k * self.n + l]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Sample covariance at lag `(dk, dl)` (nonnegative lags) using the
    /// known zero mean.
    pub fn lag_covariance(&self, dk: usize, dl: usize) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for k in 0..n - dk {
            for l in 0..n - dl {
                acc += self.get(k, l) * self.get(k + dk, l + dl);
            }
        }
        acc / ((n - dk) * (n - dl)) as f64
    }
}

/// Moving average `x[k][l] = sum a[u][v] xi[k - u][l - v]` over an
/// `(n + 2m)^2` innovation array drawn row-major from `seed`.
pub fn generate_linear_patch(
    a: &FilterCoefficients,
    n: usize,
    seed: u64,
    innovation: Innovation,
) -> FieldPatch {
    let m = a.radius();
    let side = n + 2 * m;
    let xi = draw_innovations(side * side, seed, innovation, 1.0);
    let mut x = vec![0.0; n * n];
    for (u, v, c) in a.entries() {
        let col0 = (m as i64 - v) as usize;
        for k in 0..n {
            let src_row = (k as i64 + m as i64 - u) as usize;
            let src = &xi[src_row * side + col0..src_row * side + col0 + n];
            for (o, s) in x[k * n..(k + 1) * n].iter_mut().zip(src) {
                *o += c * s;
            }
        }
    }
    FieldPatch { n, values: x }
}

fn volterra_patch(
    bv: &VolterraCoefficients,
    n: usize,
    seed: u64,
    innovation: Innovation,
) -> FieldPatch {
    let r = bv.support_radius() as i64;
    let side = n + 2 * r as usize;
    let xi = draw_innovations(
        side * side,
        seed,
        innovation,
        bv.innovation_variance().sqrt(),
    );
    let at = |row: i64, col: i64| ((row + r) as usize) * side + (col + r) as usize;
    let mut x = vec![0.0; n * n];
    for (u, v, b) in bv.entries() {
        for k in 0..n as i64 {
            let pu = at(k - u.0, -u.1);
            let pv = at(k - v.0, -v.1);
            let out = &mut x[k as usize * n..(k as usize + 1) * n];
            for (l, o) in out.iter_mut().enumerate() {
                *o += b * xi[pu + l] * xi[pv + l];
            }
        }
    }
    FieldPatch { n, values: x }
}

/// Volterra field `x[k] = sum b[u, v] xi[k - u] xi[k - v]` with Gaussian
/// innovations of the configured variance.
pub fn generate_volterra_patch(bv: &VolterraCoefficients, n: usize, seed: u64) -> FieldPatch {
    volterra_patch(bv, n, seed, Innovation::Gaussian)
}

/// Synthesizes a patch of any model, Volterra included, with the given
/// innovation law.
pub fn generate_patch(model: &FieldModel, n: usize, seed: u64, innovation: Innovation) -> FieldPatch {
    match model {
        FieldModel::Volterra(bv) => volterra_patch(bv, n, seed, innovation),
        _ => generate_linear_patch(&model.filter().expect("linear model"), n, seed, innovation),
    }
}

/// Symmetric matrix of order `n` built from the patch, scaled by `n^{-1/2}`.
pub fn assemble_matrix(patch: &FieldPatch, symmetrization: Symmetrization) -> DMatrix<f64> {
    let n = patch.size();
    let scale = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, n, |i, j| {
        let v = match symmetrization {
            Symmetrization::Wigner => patch.get(i.max(j), i.min(j)),
            Symmetrization::Additive => patch.get(i, j) + patch.get(j, i),
        };
        v * scale
    })
}

/// Sorted eigenvalues of one matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSpectrum {
    pub eigenvalues: Vec<f64>,
    pub fingerprint: String,
}

impl EmpiricalSpectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Fraction of eigenvalues `<= x`.
    pub fn cdf_at(&self, x: f64) -> f64 {
        self.eigenvalues.partition_point(|&l| l <= x) as f64 / self.len() as f64
    }
}

const QL_MAX_SWEEPS: usize = 60;

/// Implicit-shift QL on a symmetric tridiagonal matrix. `off[i]` couples
/// `i` and `i + 1`; `off` has the same length as `diag` with a trailing zero.
fn tridiagonal_eigenvalues(diag: &mut [f64], off: &mut [f64]) -> Result<()> {
    let n = diag.len();
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > QL_MAX_SWEEPS {
                return Err(Error::NoConvergenceEig { index: l });
            }
            // Wilkinson-type shift from the leading 2x2 block
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}

/// All eigenvalues of a symmetric matrix in ascending order: Householder
/// tridiagonalization followed by implicit-shift QL. Only the lower
/// triangle is read.
pub fn spectrum(matrix: &DMatrix<f64>) -> Result<EmpiricalSpectrum> {
    let n = matrix.nrows();
    if n == 0 || matrix.ncols() != n {
        return Err(invalid("spectrum needs a nonempty square matrix"));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(invalid("matrix has non-finite entries"));
    }
    let (mut diag, mut off) = if n == 1 {
        (vec![matrix[(0, 0)]], vec![0.0])
    } else {
        let tri = SymmetricTridiagonal::new(matrix.clone());
        let (d, e) = tri.unpack_tridiagonal();
        let mut off: Vec<f64> = e.iter().copied().collect();
        off.push(0.0);
        (d.iter().copied().collect::<Vec<f64>>(), off)
    };
    tridiagonal_eigenvalues(&mut diag, &mut off)?;
    diag.sort_by(f64::total_cmp);
    Ok(EmpiricalSpectrum {
        eigenvalues: diag,
        fingerprint: format!("n={n}"),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub model: FieldModel,
    pub symmetrization: Symmetrization,
    pub innovation: Innovation,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid("matrix order n must be at least 2"));
        }
        if self.replicates == 0 {
            return Err(invalid("replicates must be at least 1"));
        }
        Ok(())
    }

    /// Whether the limit is covered by the theory: the additive model
    /// always is, the Wigner model needs `gamma[k][l] = gamma[l][k]`.
    pub fn within_hypotheses(&self) -> bool {
        match self.symmetrization {
            Symmetrization::Additive => true,
            Symmetrization::Wigner => self.model.has_symmetric_covariance(),
        }
    }

    /// Mass `B` of the limiting density.
    pub fn limit_mass(&self) -> f64 {
        let var = self.model.variance();
        match self.symmetrization {
            Symmetrization::Wigner => var,
            Symmetrization::Additive => 2.0 * var,
        }
    }
}

/// Default comparison contour: `Im z = 0.05` and 121 equispaced real parts
/// over `[-5 sqrt(B), 5 sqrt(B)]`.
pub fn default_contour(mass: f64) -> Vec<Complex64> {
    line_contour(
        DEFAULT_CONTOUR_HEIGHT,
        -5.0 * support_scale(mass),
        5.0 * support_scale(mass),
        DEFAULT_CONTOUR_POINTS,
    )
}

fn support_scale(mass: f64) -> f64 {
    if mass > 0.0 {
        mass.sqrt()
    } else {
        1.0
    }
}

/// `count` equispaced points `re + i im` from `lo` to `hi`.
pub fn line_contour(im: f64, lo: f64, hi: f64, count: usize) -> Vec<Complex64> {
    match count {
        0 => Vec::new(),
        1 => vec![Complex64::new(lo, im)],
        _ => (0..count)
            .map(|k| Complex64::new(lo + (hi - lo) * k as f64 / (count - 1) as f64, im))
            .collect(),
    }
}

/// Real parts of a horizontal contour at least `5 eps` inside its ends,
/// the nodes on which the contour supports inversion.
pub fn inversion_nodes(contour: &[Complex64]) -> Vec<f64> {
    let (Some(first), Some(last)) = (contour.first(), contour.last()) else {
        return Vec::new();
    };
    let eps = first.im;
    let slack = 1e-9 * (1.0 + first.re.abs().max(last.re.abs()));
    contour
        .iter()
        .map(|z| z.re)
        .filter(|&x| x >= first.re + 5.0 * eps - slack && x <= last.re - 5.0 * eps + slack)
        .collect()
}

/// Per-replicate run record.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub seed: u64,
    pub n: usize,
    pub wall_time_s: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub spectra: Vec<EmpiricalSpectrum>,
    /// Sorted eigenvalues of all replicates.
    pub pooled: Vec<f64>,
    /// Replicate-averaged empirical Stieltjes transform.
    pub curve: StieltjesCurve,
    /// Mollified pooled ESD on the inversion nodes of the contour.
    pub table: Option<DistributionTable>,
    pub records: Vec<ReplicateRecord>,
}

/// Simulates one replicate.
pub fn simulate_replicate(cfg: &EnsembleConfig, replicate: usize) -> Result<EmpiricalSpectrum> {
    let seed = replicate_seed(cfg.seed, replicate);
    let patch = generate_patch(&cfg.model, cfg.n, seed, cfg.innovation);
    let matrix = assemble_matrix(&patch, cfg.symmetrization);
    let mut spec = spectrum(&matrix)?;
    spec.fingerprint = format!(
        "n={} seed={} replicate={} symmetrization={} innovation={}",
        cfg.n, seed, replicate, cfg.symmetrization, cfg.innovation
    );
    Ok(spec)
}

/// Runs all replicates (in parallel), pools their eigenvalues and evaluates
/// the averaged empirical Stieltjes transform on `contour`. When the contour
/// is a horizontal line wide enough for inversion, the mollified ESD table
/// is included.
pub fn ensemble_esd(cfg: &EnsembleConfig, contour: &[Complex64]) -> Result<EnsembleResult> {
    cfg.validate()?;
    let runs: Vec<(EmpiricalSpectrum, ReplicateRecord)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let start = Instant::now();
            let spec = simulate_replicate(cfg, r).map_err(|e| Error::Replicate {
                replicate: r,
                source: Box::new(e),
            })?;
            let record = ReplicateRecord {
                replicate: r,
                seed: replicate_seed(cfg.seed, r),
                n: cfg.n,
                wall_time_s: start.elapsed().as_secs_f64(),
                min_eigenvalue: spec.eigenvalues[0],
                max_eigenvalue: spec.eigenvalues[spec.len() - 1],
            };
            Ok((spec, record))
        })
        .collect::<Result<_>>()?;
    let (spectra, records): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let mut pooled: Vec<f64> = spectra.iter().flat_map(|s| s.eigenvalues.iter().copied()).collect();
    pooled.sort_by(f64::total_cmp);
    let curve = empirical_curve(&pooled, contour)?;
    let nodes = inversion_nodes(contour);
    let table = if curve.horizontal_height().is_some() && nodes.len() >= 2 {
        Some(invert_to_distribution(&curve, &nodes)?)
    } else {
        None
    };
    Ok(EnsembleResult {
        spectra,
        pooled,
        curve,
        table,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn delta_filter_patch_is_the_innovation_array() {
        let a = FilterCoefficients::delta(1.0);
        let patch = generate_linear_patch(&a, 6, 11, Innovation::Gaussian);
        let xi = draw_innovations(36, 11, Innovation::Gaussian, 1.0);
        assert_eq!(patch.values(), &xi[..]);
    }

    #[test]
    fn patches_are_deterministic() {
        let a = FilterCoefficients::from_entries(&[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        for innov in [Innovation::Gaussian, Innovation::Rademacher, Innovation::Uniform] {
            let p1 = generate_linear_patch(&a, 20, 5, innov);
            let p2 = generate_linear_patch(&a, 20, 5, innov);
            assert_eq!(p1, p2);
            assert_ne!(p1, generate_linear_patch(&a, 20, 6, innov));
        }
    }

    #[test]
    fn linear_patch_uses_shifted_innovations() {
        // x[k][l] = xi[k][l] + xi[k - 1][l] in field coordinates
        let a = FilterCoefficients::from_entries(&[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        let n = 5;
        let patch = generate_linear_patch(&a, n, 3, Innovation::Rademacher);
        let side = n + 2;
        let xi = draw_innovations(side * side, 3, Innovation::Rademacher, 1.0);
        for k in 0..n {
            for l in 0..n {
                let here = xi[(k + 1) * side + l + 1];
                let above = xi[k * side + l + 1];
                assert_eq!(patch.get(k, l), here + above);
            }
        }
    }

    #[test]
    fn volterra_single_entry_is_a_product_of_neighbours() {
        let bv = VolterraCoefficients::new(&[((0, 0), (1, 0), 1.0)], 1.0).unwrap();
        let n = 4;
        let patch = generate_volterra_patch(&bv, n, 9);
        let side = n + 2;
        let xi = draw_innovations(side * side, 9, Innovation::Gaussian, 1.0);
        for k in 0..n {
            for l in 0..n {
                let expected = xi[(k + 1) * side + l + 1] * xi[k * side + l + 1];
                assert_abs_diff_eq!(patch.get(k, l), expected, epsilon = 1e-15);
            }
        }
        let empty = VolterraCoefficients::new(&[], 1.0).unwrap();
        assert!(generate_volterra_patch(&empty, 8, 1).values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn assemble_two_by_two() {
        let p = FieldPatch::new(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let w = assemble_matrix(&p, Symmetrization::Wigner);
        assert_eq!(w, DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 4.0]) * s);
        let a = assemble_matrix(&p, Symmetrization::Additive);
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[2.0, 5.0, 5.0, 8.0]) * s);
        assert_eq!(&w - w.transpose(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn small_spectra() {
        let zero = spectrum(&DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(zero.eigenvalues, vec![0.0; 3]);
        let diag = spectrum(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0])))
            .unwrap();
        assert_eq!(diag.eigenvalues, vec![1.0, 2.0, 3.0]);
        let swap = spectrum(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(swap.eigenvalues[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(swap.eigenvalues[1], 1.0, epsilon = 1e-15);
        let one = spectrum(&DMatrix::from_element(1, 1, 2.5)).unwrap();
        assert_eq!(one.eigenvalues, vec![2.5]);
    }

    #[test]
    fn spectrum_matches_reference_eigensolver() {
        let a = FilterCoefficients::from_entries(&[(0, 0, 1.0), (0, 1, 0.5)]).unwrap();
        let patch = generate_linear_patch(&a, 60, 2, Innovation::Gaussian);
        let m = assemble_matrix(&patch, Symmetrization::Additive);
        let ours = spectrum(&m).unwrap();
        let mut reference: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        reference.sort_by(f64::total_cmp);
        for (x, y) in ours.eigenvalues.iter().zip(&reference) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn two_by_two_end_to_end() {
        let cfg = EnsembleConfig {
            n: 2,
            replicates: 1,
            seed: 17,
            model: FieldModel::iid(1.0),
            symmetrization: Symmetrization::Wigner,
            innovation: Innovation::Gaussian,
        };
        let result = ensemble_esd(&cfg, &line_contour(0.5, -1.0, 1.0, 3)).unwrap();
        let xi = draw_innovations(4, 17, Innovation::Gaussian, 1.0);
        let (a, c, d) = (xi[0] / 2f64.sqrt(), xi[2] / 2f64.sqrt(), xi[3] / 2f64.sqrt());
        let mid = (a + d) / 2.0;
        let rad = (((a - d) / 2.0).powi(2) + c * c).sqrt();
        assert_abs_diff_eq!(result.pooled[0], mid - rad, epsilon = 1e-12);
        assert_abs_diff_eq!(result.pooled[1], mid + rad, epsilon = 1e-12);
        assert_eq!(result.records[0].seed, 17);
    }

    #[test]
    fn seed_splitting_rule() {
        assert_eq!(replicate_seed(42, 0), 42);
        assert_eq!(replicate_seed(42, 1), 42 ^ SEED_STRIDE);
        assert_eq!(replicate_seed(7, 3), 7 ^ SEED_STRIDE.wrapping_mul(3));
    }

    #[test]
    fn hypotheses_tagging() {
        let asym = FieldModel::Linear(
            FilterCoefficients::from_entries(&[(0, 0, 1.0), (1, 0, 1.0)]).unwrap(),
        );
        let mut cfg = EnsembleConfig {
            n: 4,
            replicates: 1,
            seed: 0,
            model: asym,
            symmetrization: Symmetrization::Wigner,
            innovation: Innovation::Gaussian,
        };
        assert!(!cfg.within_hypotheses());
        cfg.symmetrization = Symmetrization::Additive;
        assert!(cfg.within_hypotheses());
        assert_eq!(cfg.limit_mass(), 4.0);
    }

    #[test]
    fn inversion_nodes_trim_five_heights() {
        let c = line_contour(0.1, -2.0, 2.0, 41);
        let nodes = inversion_nodes(&c);
        assert_abs_diff_eq!(nodes[0], -1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(*nodes.last().unwrap(), 1.5, epsilon = 1e-12);
        assert_eq!(nodes.len(), 31);
    }
}
