//! The tape autodiff engine on a two-layer network.

use ms2embed::tensor::{Graph, Tensor};

fn main() -> ms2embed::Result<()> {
    let mut g = Graph::new();
    let x = g.constant(Tensor::matrix(2, 3, vec![0.5, -1.0, 2.0, 1.5, 0.0, -0.5])?);
    let w1 = g.leaf(Tensor::matrix(3, 4, (0..12).map(|k| 0.1 * k as f64 - 0.5).collect())?, true);
    let w2 = g.leaf(Tensor::matrix(4, 1, vec![0.3, -0.2, 0.5, 0.1])?, true);

    let h = g.matmul(x, w1)?;
    let h = g.relu(h);
    let y = g.matmul(h, w2)?;
    let sq = g.square(y);
    let loss = g.mean(sq);
    g.backward(loss)?;

    println!("loss = {}", g.value(loss).item()?);
    println!("dL/dw2 = {:?}", g.grad(w2).unwrap().data());
    println!("dL/dw1 = {:?}", g.grad(w1).unwrap().data());
    Ok(())
}
