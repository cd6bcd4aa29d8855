use rht_core::distance::quantile;
use rht_core::lab::{
    basis_max_experiment, default_t_grid, ecdf_deviation, gaussian_baseline_max, lipschitz_deviation, test_vector_suite,
};
use rht_core::rng::{fill_standard_normal, keyed_rng, StreamKind};
use rht_core::{RhtEnsemble, ScalarFunctional};

fn unit(seed: u64, d: usize) -> Vec<f64> {
    let mut rng = keyed_rng(seed, StreamKind::Experiment, 77);
    let mut v = vec![0.0; d];
    fill_standard_normal(&mut rng, &mut v);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

#[test]
fn lipschitz_suite_within_tolerance() {
    let ensemble = RhtEnsemble::new(256, 1024, 11).unwrap();
    let suite = test_vector_suite(256, 16, 11).unwrap();
    let psi = ScalarFunctional::psi(2.0 * 10f64.ln().sqrt()).unwrap();
    for f in [ScalarFunctional::cos(), ScalarFunctional::abs(), psi] {
        let report = lipschitz_deviation(&ensemble, &f, &suite).unwrap();
        assert_eq!(report.per_case.len(), suite.len());
        assert!(
            report.max_deviation <= 0.05,
            "{}: {}",
            report.label,
            report.max_deviation
        );
    }
}

/// Averaged over fresh maps, the empirical mean of `f(h̃(z))` matches `E f(‖z‖·G)`.
#[test]
fn empirical_mean_is_unbiased_with_padding() {
    let (d, m, maps) = (100usize, 2usize, 200u64);
    let z: Vec<f64> = unit(5, d).iter().map(|x| 1.3 * x).collect();
    let sigma = 1.3f64;
    let targets = [
        (ScalarFunctional::cos(), (-sigma * sigma / 2.0).exp()),
        (ScalarFunctional::abs(), sigma * (2.0 / std::f64::consts::PI).sqrt()),
    ];
    for (f, target) in targets {
        let means: Vec<f64> = (0..maps)
            .map(|s| {
                let y = RhtEnsemble::new(d, m, 1000 + s).unwrap().embed(&z).unwrap();
                y.values().iter().map(|&v| f.eval(v)).sum::<f64>() / y.len() as f64
            })
            .collect();
        let mean = means.iter().sum::<f64>() / maps as f64;
        let var = means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (maps - 1) as f64;
        let se = (var / maps as f64).sqrt();
        assert!(
            (mean - target).abs() <= 4.0 * se,
            "{}: {mean} vs {target} (se {se})",
            f.label()
        );
    }
}

#[test]
fn basis_max_shrinks_with_more_blocks() {
    let medians: Vec<f64> = [4usize, 16, 64]
        .iter()
        .map(|&m| basis_max_experiment(64, m, 500, 3).unwrap().median)
        .collect();
    assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
}

#[test]
fn basis_max_reuses_leading_coordinates() {
    let small = basis_max_experiment(8, 4, 20, 9).unwrap();
    let large = basis_max_experiment(64, 4, 20, 9).unwrap();
    for (s, l) in small.per_trial.iter().zip(&large.per_trial) {
        assert!(l >= s);
    }
}

#[test]
fn ecdf_examples() {
    let grid = default_t_grid();
    let ensemble = RhtEnsemble::new(256, 1024, 21).unwrap();
    let flat = vec![1.0 / 16.0; 256];
    assert!(ecdf_deviation(&ensemble, &flat, &grid).unwrap() <= 0.01);

    // For e_1 every block is a constant vector, so the ECDF has m atoms.
    let ensemble = RhtEnsemble::new(16, 4096, 22).unwrap();
    let mut e1 = vec![0.0; 16];
    e1[0] = 1.0;
    let y = ensemble.embed(&e1).unwrap();
    for j in 0..4096 {
        let block = y.block(j);
        assert!(block.iter().all(|&v| v == block[0]));
    }
    assert!(ecdf_deviation(&ensemble, &e1, &grid).unwrap() <= 0.03);
}

#[test]
fn dense_gaussian_baseline_shrinks_with_rows() {
    let stats = gaussian_baseline_max(1_000_000, 4, 5, 8).unwrap();
    for v in &stats.per_trial {
        assert!(*v < 0.01, "{v}");
    }
    assert_eq!(stats.fraction_at_least(0.25), 0.0);
}

/// The `Φ(3)` quantile of the embedding of a flat vector sits near 3.
#[test]
fn upper_quantile_of_flat_embedding() {
    let (d, m) = (256usize, 256usize);
    let ensemble = RhtEnsemble::new(d, m, 31).unwrap();
    let y = ensemble.embed(&vec![1.0 / 16.0; d]).unwrap();
    let alpha = rht_core::std_normal_cdf(3.0);
    let q = quantile(y.values(), alpha).unwrap();
    assert!((2.8..=3.2).contains(&q), "{q}");
}

#[test]
fn diagonals_are_standard_normal() {
    let ensemble = RhtEnsemble::new(64, 512, 41).unwrap();
    let all: Vec<f64> = ensemble.diagonals().flatten().copied().collect();
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 4.0 / n.sqrt());
    assert!((var - 1.0).abs() < 4.0 * (2.0 / n).sqrt());
}
