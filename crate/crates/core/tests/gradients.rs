use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use woplab::autodiff::{gradient_check, ParameterStore, Result, Tape, Tensor, Var};
use woplab::data::{generate_split, DataConfig, SolverPolicy, Split};
use woplab::operators::{
    check_model_gradients, init_deeponet, init_fno, Batch, DeepOnetConfig, FnoConfig, OperatorModel,
};
use woplab::solver::Grid;

const PRIMITIVE_TOL: f64 = 1e-6;
const MODEL_TOL: f64 = 1e-4;

struct Fixture {
    rng: ChaCha8Rng,
    params: ParameterStore,
}

impl Fixture {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            params: ParameterStore::new(),
        }
    }

    fn values(&mut self, len: usize) -> Vec<f64> {
        // Kept away from zero so no entry straddles the relu kink.
        (0..len)
            .map(|_| {
                let v: f64 = self.rng.random_range(0.2..1.0);
                if self.rng.random_bool(0.5) {
                    v
                } else {
                    -v
                }
            })
            .collect()
    }

    fn real(mut self, name: &str, shape: &[usize]) -> Self {
        let v = self.values(shape.iter().product());
        self.params
            .insert(name, Tensor::new(shape.to_vec(), v).unwrap())
            .unwrap();
        self
    }

    fn complex(mut self, name: &str, shape: &[usize]) -> Self {
        let v = self.values(2 * shape.iter().product::<usize>());
        self.params
            .insert(name, Tensor::complex(shape.to_vec(), v).unwrap())
            .unwrap();
        self
    }

    fn check(&self, what: &str, f: impl Fn(&mut Tape<'_>) -> Result<Var>) {
        let report = gradient_check(f, &self.params, 1e-6, PRIMITIVE_TOL).unwrap();
        assert!(
            report.passed,
            "{what}: discrepancy {:.2e} at {:?}",
            report.max_rel_discrepancy, report.worst
        );
    }
}

#[test]
fn affine_and_matmul() {
    let f = Fixture::new(1)
        .real("x", &[3, 5])
        .real("w", &[5, 4])
        .real("b", &[4])
        .real("m", &[4, 5]);
    f.check("affine", |t| {
        let (x, w, b) = (t.param("x")?, t.param("w")?, t.param("b")?);
        let y = t.affine(x, w, Some(b))?;
        t.sum_squares(y)
    });
    f.check("matmul_nt", |t| {
        let (x, m) = (t.param("x")?, t.param("m")?);
        let y = t.matmul_nt(x, m)?;
        t.sum_squares(y)
    });
}

#[test]
fn channel_affine_and_activations() {
    let f = Fixture::new(2).real("x", &[2, 3, 7]).real("w", &[3, 4]).real("b", &[4]);
    f.check("channel_affine + gelu", |t| {
        let (x, w, b) = (t.param("x")?, t.param("w")?, t.param("b")?);
        let y = t.channel_affine(x, w, Some(b))?;
        let y = t.gelu(y)?;
        t.sum_squares(y)
    });
    f.check("relu + scale + add", |t| {
        let x = t.param("x")?;
        let r = t.relu(x)?;
        let s = t.scale(x, -0.7)?;
        let y = t.add(r, s)?;
        t.sum_squares(y)
    });
}

#[test]
fn spectral_chain() {
    let (n, c, modes) = (12, 3, 5);
    let f = Fixture::new(3).real("x", &[2, c, n]).complex("r", &[modes, c, 2]);
    f.check("pad + rdft + mode_mix + irdft + crop", |t| {
        let (x, r) = (t.param("x")?, t.param("r")?);
        let p = t.pad_right(x, 4)?;
        let s = t.rdft_truncated(p, modes)?;
        let m = t.mode_mix(s, r)?;
        let y = t.irdft(m, n + 4)?;
        let y = t.crop_right(y, n)?;
        t.sum_squares(y)
    });
}

#[test]
fn mask_reshape_and_scalar_bias() {
    let f = Fixture::new(4).real("x", &[3, 6]).real("s", &[1]);
    let mask = [0.0, 0.5, 1.0, 1.0, 0.5, 0.0];
    f.check("mask + add_scalar + reshape", |t| {
        let (x, s) = (t.param("x")?, t.param("s")?);
        let m = t.mask(x, &mask)?;
        let a = t.add_scalar(m, s)?;
        let r = t.reshape(a, vec![2, 9])?;
        t.sum_squares(r)
    });
}

#[test]
fn relative_l2_loss() {
    let mut f = Fixture::new(5).real("p", &[4, 9]);
    let target = Tensor::new(vec![4, 9], f.values(36)).unwrap();
    f.check("relative_l2_loss", |t| {
        let p = t.param("p")?;
        t.relative_l2_loss(p, &target)
    });
}

/// Tensors above 64 entries are subsampled to 64.
fn expected_entries(params: &ParameterStore) -> usize {
    params.iter().map(|(_, t)| t.data().len().min(64)).sum()
}

fn batch(n: usize) -> Batch {
    let grid = Grid::new(n).unwrap();
    let mut m = DataConfig::default().manifest(Split::Train);
    m.count = 3;
    m.ic_spec.k_max = 4;
    let ds = generate_split(&m, &grid, &SolverPolicy::default(), 1).unwrap();
    Batch::from_samples(&ds.samples, n).unwrap()
}

#[test]
fn toy_fno() {
    let n = 24;
    for padding in [0, 5] {
        let cfg = FnoConfig {
            padding,
            ..FnoConfig::toy(n)
        };
        let model = init_fno(&cfg, 3).unwrap();
        let report = check_model_gradients(&model, &batch(n), 1e-6, MODEL_TOL).unwrap();
        assert!(
            report.passed,
            "padding {padding}: {:.2e} at {:?}",
            report.max_rel_discrepancy, report.worst
        );
        assert_eq!(report.entries_checked, expected_entries(model.params()));
    }
}

#[test]
fn toy_deeponet() {
    let n = 24;
    let cfg = DeepOnetConfig::toy(n);
    let model = init_deeponet(&cfg, 4).unwrap();
    let report = check_model_gradients(&model, &batch(n), 1e-6, MODEL_TOL).unwrap();
    assert!(
        report.passed,
        "{:.2e} at {:?}",
        report.max_rel_discrepancy, report.worst
    );
    assert_eq!(report.entries_checked, expected_entries(model.params()));
}

#[test]
fn mismatched_batch_is_rejected() {
    let model = init_fno(&FnoConfig::toy(24), 1).unwrap();
    assert!(check_model_gradients(&model, &batch(32), 1e-6, MODEL_TOL).is_err());
}
