//! Shared optimisation step: per-example graphs, ordered gradient
//! reduction, clipping, then Adam with decoupled decay.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::optim::{adam_step, clip_gradients, OptimizerState};
use crate::tensor::{Bound, Graph, ParamStore, Tensor, Var};

/// Examples evaluated concurrently before their gradients are folded into
/// the running sum. Fixed so results do not depend on the thread count.
const CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Mean example loss before the update.
    pub loss: f64,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
}

/// Where in training a step happens, for divergence diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct StepPosition {
    pub epoch: usize,
    pub step: usize,
}

/// Mean loss and averaged gradients over `items`, without updating. The
/// loss closure receives the graph, the bound parameters, the store, the
/// example index and the example.
pub fn mean_loss_and_grads<T, F>(store: &ParamStore, items: &[T], loss_fn: F) -> Result<(f64, Vec<Tensor>)>
where
    T: Sync,
    F: Fn(&mut Graph, &Bound, &ParamStore, usize, &T) -> Result<Var> + Sync,
{
    if items.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    let scale = 1.0 / items.len() as f64;
    let mut total: Vec<Tensor> = store.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
    let mut loss_sum = 0.0;
    for (c, chunk) in items.chunks(CHUNK).enumerate() {
        let parts: Vec<(f64, Vec<Tensor>)> = chunk
            .par_iter()
            .enumerate()
            .map(|(k, item)| {
                let mut g = Graph::new();
                let p = store.bind(&mut g, true);
                let loss = loss_fn(&mut g, &p, store, c * CHUNK + k, item)?;
                let value = g.value(loss).item()?;
                g.backward(loss)?;
                Ok((value, p.grads(&g)))
            })
            .collect::<Result<_>>()?;
        for (value, grads) in parts {
            loss_sum += value;
            for (acc, gr) in total.iter_mut().zip(grads) {
                for (a, v) in acc.data_mut().iter_mut().zip(gr.data()) {
                    *a += v * scale;
                }
            }
        }
    }
    Ok((loss_sum * scale, total))
}

/// One update on `items`. A non-finite loss or gradient aborts before any
/// parameter changes.
pub fn gradient_step<T, F>(
    store: &mut ParamStore,
    opt: &mut OptimizerState,
    clip: f64,
    at: StepPosition,
    items: &[T],
    loss_fn: F,
) -> Result<StepOutcome>
where
    T: Sync,
    F: Fn(&mut Graph, &Bound, &ParamStore, usize, &T) -> Result<Var> + Sync,
{
    let (loss, mut grads) = mean_loss_and_grads(store, items, loss_fn)?;
    if !loss.is_finite() {
        return Err(Error::Divergence {
            epoch: at.epoch,
            step: at.step,
            detail: format!("loss is {loss}"),
        });
    }
    let grad_norm = clip_gradients(&mut grads, clip).map_err(|e| Error::Divergence {
        epoch: at.epoch,
        step: at.step,
        detail: e.to_string(),
    })?;
    adam_step(store, &grads, opt)?;
    Ok(StepOutcome { loss, grad_norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::optim::AdamConfig;
    use crate::tensor::Precision;

    #[test]
    fn batch_gradient_is_the_mean_of_example_gradients() {
        let mut store = ParamStore::new(Precision::Binary64);
        let w = store.add("w", Tensor::vector(vec![1.0, -2.0])).unwrap();
        let xs = [vec![1.0, 0.5], vec![-3.0, 2.0], vec![0.25, 4.0]];
        let loss = |g: &mut Graph, p: &Bound, _: &ParamStore, _: usize, x: &Vec<f64>| {
            let c = g.constant(Tensor::vector(x.clone()));
            let m = g.mul(p.get(w), c)?;
            let s = g.sum(m);
            Ok(g.square(s))
        };
        let (l, grads) = mean_loss_and_grads(&store, &xs, loss).unwrap();
        // d/dw (w·x)² = 2 (w·x) x
        let mut want = [0.0; 2];
        let mut want_loss = 0.0;
        for x in &xs {
            let dot = x[0] - 2.0 * x[1];
            want_loss += dot * dot / 3.0;
            want[0] += 2.0 * dot * x[0] / 3.0;
            want[1] += 2.0 * dot * x[1] / 3.0;
        }
        assert!((l - want_loss).abs() < 1e-12);
        for (g, w) in grads[0].data().iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn nan_loss_leaves_parameters_untouched() {
        let mut store = ParamStore::new(Precision::Binary64);
        let w = store.add("w", Tensor::vector(vec![1.0])).unwrap();
        let before = store.clone();
        let mut opt = OptimizerState::new(&store, AdamConfig::default());
        let r = gradient_step(
            &mut store,
            &mut opt,
            0.5,
            StepPosition { epoch: 3, step: 7 },
            &[f64::NAN],
            |g, p, _, _, x| {
                let c = g.constant(Tensor::vector(vec![*x]));
                let m = g.mul(p.get(w), c)?;
                Ok(g.sum(m))
            },
        );
        assert!(matches!(r, Err(Error::Divergence { epoch: 3, step: 7, .. })));
        assert_eq!(store.tensors(), before.tensors());
    }
}
