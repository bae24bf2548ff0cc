//! Builds a small graph on the tape, checks its gradients against central
//! differences, then fits a linear map with Adam.
//!
//! cargo run --release --example autodiff_gradcheck

use ardvae::nn::{Adam, AdamConfig};
use ardvae::tensor::{gradient_check, Tape, GRAD_CHECK_FLOOR};
use ardvae::Tensor;

fn main() -> ardvae::Result<()> {
    let x = Tensor::from_rows(&[vec![0.3, -1.2, 0.5], vec![1.1, 0.4, -0.7]])?;
    let w = Tensor::from_rows(&[vec![0.2, -0.4], vec![0.9, 0.1], vec![-0.3, 0.6]])?;

    // mean(softplus(tanh(x·w))²)
    let report = gradient_check(
        |tape, v| {
            let h = tape.matmul(v[0], v[1])?;
            let h = tape.tanh(h)?;
            let h = tape.softplus(h)?;
            let h = tape.square(h)?;
            tape.mean(h)
        },
        &[x.clone(), w.clone()],
        1e-6,
        1e-6,
    )?;
    for leaf in &report.leaves {
        println!("leaf {}: max relative error {:.2e}", leaf.leaf, leaf.max_rel_error);
    }
    println!("gradient check passed: {} (floor {GRAD_CHECK_FLOOR})", report.passed());

    // recover target = x·w_true by least squares
    let w_true = Tensor::from_rows(&[vec![1.0, -2.0], vec![0.5, 0.0], vec![-1.5, 3.0]])?;
    let target = x.matmul(&w_true)?;
    let mut weight = Tensor::zeros(&[3, 2]);
    let mut adam = Adam::new(
        AdamConfig {
            lr: 0.05,
            ..AdamConfig::default()
        },
        &[&weight],
        vec!["weight".into()],
    );
    for step in 0..=2000 {
        let mut tape = Tape::new();
        let wv = tape.leaf(weight.clone());
        let xv = tape.constant(x.clone());
        let tv = tape.constant(target.clone());
        let pred = tape.matmul(xv, wv)?;
        let diff = tape.sub(pred, tv)?;
        let sq = tape.square(diff)?;
        let loss = tape.mean(sq)?;
        if step % 500 == 0 {
            println!("step {step:>4}  loss {:.3e}", tape.value(loss).item());
        }
        let mut grads = tape.backward(loss)?;
        let g = grads.take(wv).expect("weight is a leaf");
        adam.step(&mut [&mut weight], &[g])?;
    }
    Ok(())
}
