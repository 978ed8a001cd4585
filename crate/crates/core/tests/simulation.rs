use lsd_lab::field::*;
use lsd_lab::sim::*;
use lsd_lab::solver::{semicircle_curve, solve_curve, SolverConfig};
use lsd_lab::stieltjes::*;
use nalgebra::{DMatrix, DVector};

fn two_tap() -> FilterCoefficients {
    FilterCoefficients::from_entries(&[(0, 0, 1.0), (1, 0, 1.0)]).unwrap()
}

fn symmetric_three_tap() -> FilterCoefficients {
    FilterCoefficients::from_entries(&[(0, 0, 1.0), (1, 0, 1.0), (0, 1, 1.0)]).unwrap()
}

fn config(model: FieldModel, n: usize, replicates: usize, seed: u64) -> EnsembleConfig {
    EnsembleConfig {
        n,
        replicates,
        seed,
        model,
        symmetrization: Symmetrization::Wigner,
        innovation: Innovation::Gaussian,
    }
}

#[test]
fn lag_one_sample_covariance_matches_the_filter() {
    let a = two_tap();
    let gamma = covariance_from_filter(&a, 2);
    let patch = generate_linear_patch(&a, 512, 2024, Innovation::Gaussian);
    let estimate = patch.lag_covariance(1, 0);
    // Isserlis: the lag products are 1-dependent along k with
    // variance gamma00^2 + gamma10^2 = 5 and neighbour covariance 1
    let long_run = 5.0 + 2.0 * 1.0;
    let se = (long_run / (511.0 * 512.0_f64)).sqrt();
    assert!((estimate - gamma.get(1, 0)).abs() <= 3.0 * se, "{estimate}");
    assert!((patch.lag_covariance(0, 1) - gamma.get(0, 1)).abs() <= 3.0 * (5.0 / (512.0 * 511.0_f64)).sqrt());
}

#[test]
fn volterra_sample_moments() {
    let bv = VolterraCoefficients::new(&[((0, 0), (1, 0), 1.0)], 1.0).unwrap();
    let gamma = covariance_from_volterra(&bv, 0);
    let n = 512;
    let patch = generate_volterra_patch(&bv, n, 77);
    let count = (n * n) as f64;
    let var = patch.values().iter().map(|v| v * v).sum::<f64>() / count;
    // Var(x^2) = E xi^4 E xi'^4 - 1 = 8, neighbours along k share one factor: 3 - 1 = 2
    let se_var = ((8.0 + 2.0 * 2.0) / count).sqrt();
    assert!((var - gamma.variance()).abs() <= 3.0 * se_var, "{var}");
    assert!(patch.mean().abs() <= 3.0 * (1.0 / count).sqrt());
}

fn inverse_iteration_residual(m: &DMatrix<f64>, lambda: f64) -> f64 {
    let n = m.nrows();
    let norm = m.norm();
    let shifted = m - DMatrix::identity(n, n) * (lambda + 1e-10 * norm);
    let lu = shifted.lu();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.37).sin());
    for _ in 0..3 {
        v = lu.solve(&v).expect("shifted matrix is invertible");
        v /= v.norm();
    }
    (m * &v - &v * lambda).norm() / norm
}

#[test]
fn eigenvalues_have_small_backward_error() {
    let patch = generate_linear_patch(&two_tap(), 200, 3, Innovation::Rademacher);
    for sym in [Symmetrization::Wigner, Symmetrization::Additive] {
        let m = assemble_matrix(&patch, sym);
        let spec = spectrum(&m).unwrap();
        assert_eq!(spec.len(), 200);
        for k in [0, 57, 100, 199] {
            assert!(inverse_iteration_residual(&m, spec.eigenvalues[k]) <= 1e-8);
        }
        let max_abs = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let sum: f64 = spec.eigenvalues.iter().sum();
        assert!((sum - m.trace()).abs() <= 1e-8 * 200.0 * max_abs);
        let second = spec.eigenvalues.iter().map(|l| l * l).sum::<f64>() / 200.0;
        let frob = m.iter().map(|v| v * v).sum::<f64>() / 200.0;
        assert!((second - frob).abs() <= 1e-8 * frob);
    }
}

#[test]
fn ensemble_is_deterministic() {
    let cfg = config(FieldModel::Linear(two_tap()), 40, 3, 9);
    let contour = default_contour(cfg.limit_mass());
    let r1 = ensemble_esd(&cfg, &contour).unwrap();
    let r2 = ensemble_esd(&cfg, &contour).unwrap();
    assert_eq!(r1.pooled, r2.pooled);
    assert_eq!(r1.curve, r2.curve);
    assert_eq!(r1.table, r2.table);
    assert_eq!(r1.pooled.len(), 120);
    let seeds: Vec<u64> = r1.records.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, vec![9, replicate_seed(9, 1), replicate_seed(9, 2)]);
}

#[test]
fn wigner_baseline_against_semicircle() {
    let cfg = config(FieldModel::iid(1.0), 1000, 5, 1);
    let contour = default_contour(1.0);
    let result = ensemble_esd(&cfg, &contour).unwrap();
    let esd = result.table.unwrap();
    let predicted = invert_to_distribution(&semicircle_curve(1.0, &contour).unwrap(), esd.xs()).unwrap();
    assert!(kolmogorov_distance(&esd, &predicted) <= 0.05);

    // raw step ESD against the exact semicircle CDF
    let cdf = |x: f64| {
        let x = x.clamp(-2.0, 2.0);
        0.5 + x * (4.0 - x * x).sqrt() / (4.0 * std::f64::consts::PI) + (x / 2.0).asin() / std::f64::consts::PI
    };
    let n = result.pooled.len() as f64;
    let ks = result
        .pooled
        .iter()
        .enumerate()
        .map(|(k, &l)| (cdf(l) - k as f64 / n).abs().max((cdf(l) - (k + 1) as f64 / n).abs()))
        .fold(0.0, f64::max);
    assert!(ks <= 0.05, "{ks}");
}

#[test]
fn doubling_n_does_not_worsen_the_fit() {
    let a = symmetric_three_tap();
    let b = density_from_filter(&a, 128);
    let contour = default_contour(b.mass());
    let predicted_curve = solve_curve(&b, &contour, &SolverConfig::default()).unwrap();
    let predicted = invert_to_distribution(&predicted_curve, &inversion_nodes(&contour)).unwrap();
    let mean_distance = |n: usize| {
        let total: f64 = [11, 12, 13]
            .iter()
            .map(|&seed| {
                let cfg = config(FieldModel::Linear(a.clone()), n, 1, seed);
                let table = ensemble_esd(&cfg, &contour).unwrap().table.unwrap();
                kolmogorov_distance(&table, &predicted)
            })
            .sum();
        total / 3.0
    };
    let (small, large) = (mean_distance(500), mean_distance(1000));
    assert!(large <= 1.2 * small, "{small} -> {large}");
}

#[test]
fn innovation_law_does_not_change_the_limit() {
    let base = config(FieldModel::Linear(two_tap()), 1000, 1, 5);
    let contour = default_contour(base.limit_mass());
    let gaussian = ensemble_esd(&base, &contour).unwrap().table.unwrap();
    for innovation in [Innovation::Rademacher, Innovation::Uniform] {
        let cfg = EnsembleConfig { innovation, ..base.clone() };
        let other = ensemble_esd(&cfg, &contour).unwrap().table.unwrap();
        assert!(kolmogorov_distance(&gaussian, &other) <= 0.05);
    }
}

#[test]
fn additive_model_matches_symmetrized_density() {
    let a = two_tap();
    let cfg = EnsembleConfig {
        symmetrization: Symmetrization::Additive,
        ..config(FieldModel::Linear(a.clone()), 600, 2, 8)
    };
    assert!(cfg.within_hypotheses());
    let b = symmetrize_density(&density_from_filter(&a, 128));
    assert!((b.mass() - cfg.limit_mass()).abs() < 1e-9);
    let contour = default_contour(b.mass());
    let esd = ensemble_esd(&cfg, &contour).unwrap().table.unwrap();
    let predicted = invert_to_distribution(
        &solve_curve(&b, &contour, &SolverConfig::default()).unwrap(),
        esd.xs(),
    )
    .unwrap();
    assert!(kolmogorov_distance(&esd, &predicted) <= 0.06);
    assert!(levy_distance(&esd, &predicted) <= kolmogorov_distance(&esd, &predicted) + 1e-12);
}

#[test]
fn truncation_gaps_of_a_two_sided_filter_are_not_monotone() {
    // the continuity bound holds, but second-order terms of the peaked
    // density cancel the mass change between the last two truncations
    let mut entries = Vec::new();
    for u in -6i64..=6 {
        for v in -6i64..=6 {
            entries.push((u, v, 0.5f64.powi((u.abs() + v.abs()) as i32)));
        }
    }
    let a = FilterCoefficients::from_entries(&entries).unwrap();
    let b = density_from_filter(&a, 64);
    let z = num_complex::Complex64::new(0.0, 4.0 * (1.0 + b.mass().sqrt()));
    let cfg = SolverConfig {
        tolerance: 1e-14,
        ..SolverConfig::default()
    };
    let s = lsd_lab::solver::solve_profile(&b, z, &cfg, None).unwrap().s;
    let gap = |m: usize| {
        let bm = density_from_filter(&truncate_filter(&a, m), 64);
        let gap = (lsd_lab::solver::solve_profile(&bm, z, &cfg, None).unwrap().s - s).norm();
        assert!(gap <= lsd_lab::solver::continuity_bound(&bm, &b, z).unwrap());
        gap
    };
    assert!(gap(5) > gap(4));
}
