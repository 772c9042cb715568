//! Minimal reverse-mode automatic differentiation over dense 2D f64 tensors,
//! with an Adam optimizer and JSON checkpoints.

mod params;
mod tape;
mod tensor;

pub use params::{Adam, ParamId, ParamStore};
pub use tape::{Backward, Gradients, Tape, Var};
pub use tensor::Tensor;

pub(crate) use tape::sigmoid;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op}: index {index} out of range for length {len}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        len: usize,
    },
    #[error("backward needs a 1x1 output, got {0:?}")]
    NotScalar((usize, usize)),
    #[error("tensor of shape {shape:?} cannot hold {len} values")]
    BadData { shape: (usize, usize), len: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Central-difference check of `f` w.r.t. every parameter entry using a
/// five-point stencil. Returns the worst relative error
/// `|a - n| / max(|a|, |n|)`, skipping entries where both gradients are below
/// `floor` in magnitude.
pub fn gradient_check<F>(store: &mut ParamStore, h: f64, floor: f64, f: F) -> Result<f64, AutodiffError>
where
    F: Fn(&mut Tape) -> Result<Var, AutodiffError>,
{
    let analytic = {
        let mut tape = Tape::new(store);
        let out = f(&mut tape)?;
        tape.backward(out)?.into_params()
    };
    let ids: Vec<ParamId> = store.ids().collect();
    let mut worst: f64 = 0.0;
    for id in ids {
        let grad = analytic.dense(store, id);
        for i in 0..store.value(id).len() {
            let orig = store.value(id).as_slice()[i];
            let mut at = |x: f64| -> Result<f64, AutodiffError> {
                store.value_mut(id).as_mut_slice()[i] = x;
                eval(store, &f)
            };
            // Five-point stencil, fourth order in h.
            let (up, down) = (at(orig + h)?, at(orig - h)?);
            let (up2, down2) = (at(orig + 2.0 * h)?, at(orig - 2.0 * h)?);
            store.value_mut(id).as_mut_slice()[i] = orig;
            let numeric = (8.0 * (up - down) - (up2 - down2)) / (12.0 * h);
            let a = grad.as_slice()[i];
            if a.abs() < floor && numeric.abs() < floor {
                continue;
            }
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()));
        }
    }
    Ok(worst)
}

fn eval<F>(store: &ParamStore, f: &F) -> Result<f64, AutodiffError>
where
    F: Fn(&mut Tape) -> Result<Var, AutodiffError>,
{
    let mut tape = Tape::new(store);
    let out = f(&mut tape)?;
    Ok(tape.value(out).item())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softmax_uniform() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.leaf(Tensor::row(vec![0.0, 0.0, 0.0]));
        let p = tape.softmax_with_temperature(x, 1.0);
        for &v in tape.value(p).as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn logsumexp_of_zero() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.leaf(Tensor::row(vec![0.0]));
        let l = tape.logsumexp(x);
        assert_eq!(tape.value(l).item(), 0.0);
    }

    #[test]
    fn square_derivative() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.leaf(Tensor::scalar(3.0));
        let y = tape.square(x);
        let bw = tape.backward(y).unwrap();
        assert_eq!(bw.wrt(x).item(), 6.0);
    }

    #[test]
    fn sum_gradient_is_ones() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.leaf(Tensor::new(2, 3, vec![1.0; 6]).unwrap());
        let s = tape.sum(x);
        assert_eq!(tape.backward(s).unwrap().wrt(x).as_slice(), &[1.0; 6]);
    }

    #[test]
    fn detached_constant_has_zero_gradient() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.leaf(Tensor::scalar(2.0));
        let unused = tape.leaf(Tensor::scalar(1.0));
        let c = tape.detach(x);
        let y = tape.mul(x, c).unwrap();
        let bw = tape.backward(y).unwrap();
        assert_eq!(bw.wrt(x).item(), 2.0);
        assert_eq!(bw.wrt(unused).item(), 0.0);
    }

    #[test]
    fn non_scalar_backward_rejected() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.leaf(Tensor::row(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(AutodiffError::NotScalar((1, 2)))));
    }

    #[test]
    fn shape_mismatch_named() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let a = tape.leaf(Tensor::zeros(2, 3));
        let b = tape.leaf(Tensor::zeros(2, 3));
        let err = tape.matmul(a, b).unwrap_err();
        assert_eq!(
            err,
            AutodiffError::ShapeMismatch {
                op: "matmul",
                left: (2, 3),
                right: (2, 3)
            }
        );
    }

    #[test]
    fn adam_zero_gradient_keeps_values() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::row(vec![1.0, -2.0]));
        let grads = Gradients::zeros(&store);
        store.adam_step(&grads, &Adam::default()).unwrap();
        assert_eq!(store.value(id).as_slice(), &[1.0, -2.0]);
        assert_eq!(store.step(), 1);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::scalar(1.0));
        let mut grads = Gradients::zeros(&store);
        grads.set(id, Tensor::scalar(1.0));
        store.adam_step(&grads, &Adam::default()).unwrap();
        // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
        let moved = 1.0 - store.value(id).item();
        assert!((moved - 5e-4 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn adam_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a = ParamStore::new();
        a.add_uniform("w", 3, 3, 3, &mut rng);
        let mut b = a.clone();
        let mut g = Gradients::zeros(&a);
        g.set(ParamId(0), Tensor::filled(3, 3, 0.3));
        a.adam_step(&g, &Adam::default()).unwrap();
        b.adam_step(&g, &Adam::default()).unwrap();
        assert_eq!(a.value(ParamId(0)), b.value(ParamId(0)));
    }

    #[test]
    fn checkpoint_round_trip_and_shape_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut a = ParamStore::new();
        a.add_uniform("w", 2, 3, 3, &mut rng);
        let text = a.to_json();
        let mut b = ParamStore::new();
        b.add_zeros("w", 2, 3);
        b.load_json(&text).unwrap();
        assert_eq!(a.value(ParamId(0)), b.value(ParamId(0)));
        let mut c = ParamStore::new();
        c.add_zeros("w", 3, 2);
        assert!(c.load_json(&text).is_err());
    }

    #[test]
    fn clip_global_norm() {
        let mut store = ParamStore::new();
        let id = store.add_zeros("w", 1, 2);
        let mut g = Gradients::zeros(&store);
        g.set(id, Tensor::row(vec![30.0, 40.0]));
        assert!(g.clip_global_norm(10.0));
        assert!((g.global_norm() - 10.0).abs() < 1e-12);
    }
}
