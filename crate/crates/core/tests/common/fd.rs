//! Central finite-difference gradient checks on the tape.

use ms2embed::tensor::{rng, Graph, Tensor, Var};
use ms2embed::Result;
use rand::Rng as _;

pub const H: f64 = 1e-5;
pub const MAX_REL_ERR: f64 = 1e-4;
pub const POINTS: usize = 100;

/// Relative error with a floor of 1e-6 on the denominator, so that two
/// gradients that are both ~0 compare by absolute error.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// How input values are drawn.
#[derive(Clone, Copy, Debug)]
pub enum Domain {
    /// U(-2, 2).
    Any,
    /// U(-2, 2) with |x| >= 0.05, clear of kinks at 0.
    AwayFromZero,
    /// U(0.5, 2).
    Positive,
}

impl Domain {
    fn draw(self, r: &mut rng::Rng) -> f64 {
        match self {
            Domain::Any => r.gen_range(-2.0..2.0),
            Domain::AwayFromZero => {
                let x: f64 = r.gen_range(0.05..2.0);
                if r.gen_bool(0.5) {
                    x
                } else {
                    -x
                }
            }
            Domain::Positive => r.gen_range(0.5..2.0),
        }
    }
}

pub struct Input {
    pub shape: Vec<usize>,
    pub domain: Domain,
}

pub fn input(shape: &[usize], domain: Domain) -> Input {
    Input {
        shape: shape.to_vec(),
        domain,
    }
}

/// Checks `op` at `POINTS` random points. The op output is reduced to a
/// scalar with fixed random weights, so every output element contributes.
/// Returns the worst relative error seen.
pub fn check<F>(inputs: &[Input], seed: u64, op: F) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut r = rng::seeded(seed);
    let mut worst = 0.0f64;
    for _ in 0..POINTS {
        let values: Vec<Vec<f64>> = inputs
            .iter()
            .map(|i| (0..i.shape.iter().product()).map(|_| i.domain.draw(&mut r)).collect())
            .collect();
        let probe = {
            let mut g = Graph::new();
            let vars = leaves(&mut g, inputs, &values, false)?;
            let out = op(&mut g, &vars)?;
            g.value(out).numel()
        };
        let weights: Vec<f64> = (0..probe).map(|_| r.gen_range(-1.0..1.0)).collect();
        let objective = |values: &[Vec<f64>], grads: bool| -> Result<(f64, Vec<Tensor>)> {
            let mut g = Graph::new();
            let vars = leaves(&mut g, inputs, values, grads)?;
            let out = op(&mut g, &vars)?;
            let shape = g.shape(out).to_vec();
            let w = g.constant(Tensor::new(&shape, weights.clone())?);
            let prod = g.mul(out, w)?;
            let loss = g.sum(prod);
            let value = g.value(loss).item()?;
            if !grads {
                return Ok((value, Vec::new()));
            }
            g.backward(loss)?;
            let gs = vars
                .iter()
                .map(|v| g.grad(*v).unwrap_or_else(|| Tensor::zeros(g.shape(*v))))
                .collect();
            Ok((value, gs))
        };
        let (_, analytic) = objective(&values, true)?;
        for (k, grad) in analytic.iter().enumerate() {
            for e in 0..values[k].len() {
                let mut plus = values.clone();
                plus[k][e] += H;
                let mut minus = values.clone();
                minus[k][e] -= H;
                let numeric = (objective(&plus, false)?.0 - objective(&minus, false)?.0) / (2.0 * H);
                worst = worst.max(rel_err(grad.data()[e], numeric));
            }
        }
    }
    Ok(worst)
}

fn leaves(g: &mut Graph, inputs: &[Input], values: &[Vec<f64>], grads: bool) -> Result<Vec<Var>> {
    inputs
        .iter()
        .zip(values)
        .map(|(i, v)| Ok(g.leaf(Tensor::new(&i.shape, v.clone())?, grads)))
        .collect()
}
