//! Monte Carlo checks of channel and link statistics.

use gam_core::corrchan::{build_correlation_matrix, reduce_to_equivalent, sample_channel, AttenuationSpec, RisGrid};
use gam_core::echelon::{cp_decompose, gram_schmidt_decompose, random_rotation_decompose, EchelonDecomposition, DecompositionStats, Method};
use gam_core::rng::seeded;
use gam_core::xcvr::{modulate, plan_subchannels, transmit_and_receive, Noise};
use gam_core::{CMatrix, C64};
use rand::Rng;

fn atten(mu_rr_db: f64) -> AttenuationSpec {
    AttenuationSpec { mu_los_db: -20.0, mu_rr_db, mu_tr_db: 0.0 }
}

#[test]
fn channel_covariance_matches_correlation() {
    let grid = RisGrid::new(2, 2, 0.125).unwrap();
    let corr = build_correlation_matrix(&grid).unwrap();
    let mu_rr_db = -3.0;
    let mu2 = 10f64.powf(mu_rr_db / 10.0);
    let samples = 100_000;
    let n = grid.len();
    let mut cov = vec![C64::default(); n * n];
    for s in 0..samples {
        let ch = sample_channel(&grid, &atten(mu_rr_db), 1, &corr, s).unwrap();
        let h = ch.h.row(0);
        for i in 0..n {
            for j in 0..n {
                cov[i * n + j] += h[i] * h[j].conj();
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            let est = cov[i * n + j] / samples as f64;
            let target = mu2 * corr.r[(i, j)];
            if i == j {
                assert!((est.re / target - 1.0).abs() < 0.05, "diag {i}: {est} vs {target}");
            }
            // correlation coefficient within 0.02 absolute
            let coef = est.re / mu2;
            assert!((coef - corr.r[(i, j)]).abs() < 0.02, "r[{i},{j}] = {coef} vs {}", corr.r[(i, j)]);
            assert!(est.im.abs() / mu2 < 0.02);
        }
    }
}

#[test]
fn correlation_coefficients_on_eight_elements() {
    let grid = RisGrid::new(4, 2, 0.25).unwrap();
    let corr = build_correlation_matrix(&grid).unwrap();
    let n = grid.len();
    let samples = 100_000;
    let mut acc = vec![0.0; n * n];
    let mut pow = vec![0.0; n];
    for s in 0..samples {
        let g = sample_channel(&grid, &atten(0.0), 1, &corr, 1_000_000 + s).unwrap().g;
        for i in 0..n {
            pow[i] += g[i].norm_sqr();
            for j in 0..n {
                acc[i * n + j] += (g[i] * g[j].conj()).re;
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            let coef = acc[i * n + j] / (pow[i] * pow[j]).sqrt();
            assert!((coef - corr.r[(i, j)]).abs() < 0.02, "r[{i},{j}]");
        }
    }
}

#[test]
fn receiver_noise_has_unit_variance() {
    let z = C64::default();
    let one = C64::new(1.0, 0.0);
    let coefficients = CMatrix::from_row_slice(2, 3, &[one, C64::new(0.5, 0.5), C64::new(0.2, 0.0), z, z, one]);
    let dec = EchelonDecomposition {
        method: Method::Cp,
        rotation: gam_core::linalg::haar_unitary(2, &mut seeded(1)),
        permutation: vec![0, 1, 2],
        coefficients,
        pivots: vec![0, 2],
        rre: 0.0,
        stats: DecompositionStats::default(),
    };
    let plan = plan_subchannels(&dec, 10.0, 1.0).unwrap();
    let frame = modulate(&plan, &[0]).unwrap();
    let clean = transmit_and_receive(&plan, &frame, 10.0, 0, Noise::Off).y_rotated;
    let trials = 100_000;
    let mut var = [0.0; 2];
    for seed in 0..trials {
        let y = transmit_and_receive(&plan, &frame, 10.0, seed, Noise::On).y_rotated;
        for r in 0..2 {
            var[r] += (y[r] - clean[r]).norm_sqr();
        }
    }
    for v in var {
        let v = v / trials as f64;
        assert!((v - 1.0).abs() < 0.02, "variance {v}");
    }
}

#[test]
fn cp_dominates_baselines_on_correlated_channels() {
    let grid = RisGrid::new(16, 16, 0.125).unwrap();
    let corr = build_correlation_matrix(&grid).unwrap();
    let att = AttenuationSpec { mu_los_db: -60.0, mu_rr_db: -5.0, mu_tr_db: -5.0 };
    let runs = 100;
    let mut rng = seeded(2024);
    let (mut beats_gs, mut beats_rr) = (0, 0);
    for _ in 0..runs {
        let seed: u64 = rng.random();
        let eq = reduce_to_equivalent(&sample_channel(&grid, &att, 4, &corr, seed).unwrap(), 1e-10).unwrap();
        let cp = cp_decompose(&eq).unwrap().rre;
        beats_gs += usize::from(cp <= gram_schmidt_decompose(&eq).unwrap().rre);
        beats_rr += usize::from(cp <= random_rotation_decompose(&eq, 10_000, seed).unwrap().rre);
    }
    assert!(beats_gs * 100 >= 95 * runs, "CP <= GS on {beats_gs}/{runs}");
    assert!(beats_rr * 100 >= 95 * runs, "CP <= RR on {beats_rr}/{runs}");
}
