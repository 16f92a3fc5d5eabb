//! Central finite-difference check of tape gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ParameterStore, Result, Tape, Var};

/// Entries per tensor beyond which a random subsample is checked.
const MAX_ENTRIES_PER_TENSOR: usize = 64;

/// Gradients smaller than this are compared on an absolute scale.
const ABS_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_discrepancy: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub entries_checked: usize,
    pub tol: f64,
    pub passed: bool,
}

fn scalar(tape: &Tape<'_>, v: Var) -> f64 {
    tape.value(v).data()[0]
}

/// Compares the tape gradient of the scalar built by `f` with
/// `(f(theta + h) - f(theta - h)) / 2h`, entry by entry. The discrepancy of
/// an entry is `|a - n| / max(|a|, |n|, 1e-4)`.
pub fn gradient_check<F>(f: F, params: &ParameterStore, h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'_>) -> Result<Var>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let analytic = {
        let mut tape = Tape::new(params);
        let loss = f(&mut tape)?;
        tape.backward(loss)?
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut work = params.clone();
    let mut max_rel: f64 = 0.0;
    let mut worst = None;
    let mut checked = 0;
    for p in 0..params.len() {
        let len = params.by_index(p).data().len();
        let picks: Vec<usize> = if len <= MAX_ENTRIES_PER_TENSOR {
            (0..len).collect()
        } else {
            let mut v = sample(&mut rng, len, MAX_ENTRIES_PER_TENSOR).into_vec();
            v.sort_unstable();
            v
        };
        for j in picks {
            let orig = params.by_index(p).data()[j];
            let eval = |theta: f64, work: &mut ParameterStore| -> Result<f64> {
                work.by_index_mut(p).data_mut()[j] = theta;
                let mut tape = Tape::new(work);
                let v = f(&mut tape)?;
                Ok(scalar(&tape, v))
            };
            let plus = eval(orig + h, &mut work)?;
            let minus = eval(orig - h, &mut work)?;
            work.by_index_mut(p).data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.get(p).data()[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(ABS_FLOOR);
            checked += 1;
            if rel > max_rel || worst.is_none() {
                max_rel = max_rel.max(rel);
                worst = Some((params.name(p).to_string(), j));
            }
        }
    }
    Ok(GradCheckReport {
        max_rel_discrepancy: max_rel,
        worst,
        entries_checked: checked,
        tol,
        passed: max_rel <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    #[test]
    fn quadratic_is_exact() {
        let mut store = ParameterStore::new();
        store
            .insert("w", Tensor::new(vec![4], vec![0.3, -1.2, 2.5, 0.01]).unwrap())
            .unwrap();
        let report = gradient_check(
            |t| {
                let w = t.param("w")?;
                t.sum_squares(w)
            },
            &store,
            1e-5,
            1e-9,
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.entries_checked, 4);
    }
}
