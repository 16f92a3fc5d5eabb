use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use woplab::autodiff::{ParameterStore, Tape};
use woplab::data::{generate_split, DataConfig, SolverPolicy, Split};
use woplab::operators::{
    init_deeponet, init_fno, AnyModel, Batch, DeepOnetConfig, FnoConfig, ModelConfig, OperatorModel,
};
use woplab::solver::Grid;

fn batch(n: usize, count: usize, seed: i64) -> Batch {
    let grid = Grid::new(n).unwrap();
    let mut m = DataConfig::default().manifest(Split::Train);
    m.count = count;
    m.base_seed = seed;
    m.ic_spec.k_max = m.ic_spec.k_max.min(((n - 1) / 2) as u32);
    let ds = generate_split(&m, &grid, &SolverPolicy::default(), 1).unwrap();
    Batch::from_samples(&ds.samples, n).unwrap()
}

fn perturb(params: &mut ParameterStore, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in params.tensors_mut() {
        for v in t.data_mut() {
            *v += rng.random_range(-0.5..0.5);
        }
    }
}

/// Singular values of a small dense matrix via Jacobi rotations on `A^T A`.
fn numerical_rank(rows: &[Vec<f64>], rel_tol: f64) -> usize {
    let cols = rows[0].len();
    let mut g = vec![vec![0.0; cols]; cols];
    for r in rows {
        for i in 0..cols {
            for j in 0..cols {
                g[i][j] += r[i] * r[j];
            }
        }
    }
    for _ in 0..100 {
        let mut off = 0.0;
        for p in 0..cols {
            for q in p + 1..cols {
                off += g[p][q] * g[p][q];
                if g[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (g[q][q] - g[p][p]) / (2.0 * g[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let (c, s) = (1.0 / (t * t + 1.0).sqrt(), t / (t * t + 1.0).sqrt());
                for k in 0..cols {
                    let (gkp, gkq) = (g[k][p], g[k][q]);
                    g[k][p] = c * gkp - s * gkq;
                    g[k][q] = s * gkp + c * gkq;
                }
                for k in 0..cols {
                    let (gpk, gqk) = (g[p][k], g[q][k]);
                    g[p][k] = c * gpk - s * gqk;
                    g[q][k] = s * gpk + c * gqk;
                }
            }
        }
        if off < 1e-30 {
            break;
        }
    }
    let eig: Vec<f64> = (0..cols).map(|i| g[i][i].max(0.0).sqrt()).collect();
    let top = eig.iter().cloned().fold(0.0, f64::max);
    eig.iter().filter(|&&s| s > rel_tol * top).count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn outputs_vanish_at_the_boundary(seed in any::<u64>(), data_seed in 0i64..1000, padding in 0usize..4) {
        let n = 20;
        let b = batch(n, 3, data_seed);
        let mut fno = init_fno(&FnoConfig { padding, ..FnoConfig::toy(n) }, seed).unwrap();
        perturb(fno.params_mut(), seed);
        let mut don = init_deeponet(&DeepOnetConfig::toy(n), seed).unwrap();
        perturb(don.params_mut(), seed.wrapping_add(1));
        for pred in [fno.predict(&b).unwrap(), don.predict(&b).unwrap()] {
            for row in pred.chunks_exact(n) {
                prop_assert_eq!(row[0], 0.0);
                prop_assert_eq!(row[n - 1], 0.0);
            }
        }
    }

    #[test]
    fn predictions_are_deterministic(seed in any::<u64>()) {
        let n = 16;
        let b = batch(n, 2, 7);
        let cfg = ModelConfig::Fno(FnoConfig::toy(n));
        let (m1, m2) = (AnyModel::init(&cfg, seed).unwrap(), AnyModel::init(&cfg, seed).unwrap());
        prop_assert_eq!(m1.params(), m2.params());
        prop_assert_eq!(m1.predict(&b).unwrap(), m2.predict(&b).unwrap());
    }
}

#[test]
fn deeponet_output_rank_is_at_most_latent() {
    let n = 24;
    let cfg = DeepOnetConfig::toy(n);
    let mut model = init_deeponet(&cfg, 3).unwrap();
    perturb(model.params_mut(), 9);
    // Without the output bias the prediction is the envelope times the
    // branch-trunk product; dividing the envelope out is exact off the ends.
    if let Ok(b0) = model.params_mut().get_mut("b0") {
        b0.data_mut().fill(0.0);
    }
    let b = batch(n, 3 * cfg.latent, 11);
    let pred = model.predict(&b).unwrap();
    let xs = Grid::new(n).unwrap().xs().to_vec();
    let rows: Vec<Vec<f64>> = pred
        .chunks_exact(n)
        .map(|r| {
            (1..n - 1)
                .map(|i| r[i] / (std::f64::consts::PI * xs[i]).sin())
                .collect()
        })
        .collect();
    // Squaring into the Gram matrix costs half the digits, hence 1e-6.
    let rank = numerical_rank(&rows, 1e-6);
    assert!(rank <= cfg.latent, "rank {rank} > latent {}", cfg.latent);
    assert!(rank > 1);
}

#[test]
fn scaled_loss_scales_gradients() {
    let n = 16;
    let b = batch(n, 2, 3);
    let model = init_fno(&FnoConfig::toy(n), 5).unwrap();
    let grads = |alpha: f64| {
        let mut tape = Tape::new(model.params());
        let pred = model.forward(&mut tape, &b).unwrap();
        let loss = tape.relative_l2_loss(pred, &b.target_tensor()).unwrap();
        let loss = tape.scale(loss, alpha).unwrap();
        tape.backward(loss).unwrap()
    };
    let (g1, g4, again) = (grads(1.0), grads(4.0), grads(1.0));
    for ((a, b), c) in g1.iter().zip(g4.iter()).zip(again.iter()) {
        assert_eq!(a, c);
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(4.0 * x, *y);
        }
    }
}

#[test]
fn parameter_counts_follow_the_config() {
    let fno = FnoConfig::default();
    assert_eq!(
        init_fno(&fno, 0).unwrap().params().scalar_count(),
        fno.parameter_count()
    );
    let don = DeepOnetConfig::default();
    assert_eq!(
        init_deeponet(&don, 0).unwrap().params().scalar_count(),
        don.parameter_count()
    );
    assert!(init_fno(
        &FnoConfig {
            modes: 66,
            ..FnoConfig::default()
        },
        0
    )
    .is_err());
    assert!(init_fno(
        &FnoConfig {
            modes: 65,
            ..FnoConfig::default()
        },
        0
    )
    .is_ok());
}
