use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Denominator floor for the relative error, so entries whose true gradient
/// is ~0 are judged on absolute error instead.
pub const GRAD_CHECK_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct LeafCheck {
    pub leaf: usize,
    pub max_rel_error: f64,
    pub worst_element: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub leaves: Vec<LeafCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.leaves.iter().all(|l| l.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.leaves.iter().map(|l| l.max_rel_error).fold(0.0, f64::max)
    }
}

/// Compares reverse-mode gradients of `graph` against central differences
/// `(f(x+h) − f(x−h)) / 2h`, element by element.
///
/// `graph` receives the tape and one leaf [`Var`] per entry of `leaves` and
/// must return a scalar.
pub fn gradient_check<F>(graph: F, leaves: &[Tensor], step: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    if leaves.is_empty() {
        return Ok(GradCheckReport::default());
    }

    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = graph(&mut tape, &vars)?;
        Ok(tape.value(out).item())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = leaves.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = graph(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut report = GradCheckReport::default();
    let mut probe: Vec<Tensor> = leaves.to_vec();
    for (li, leaf) in leaves.iter().enumerate() {
        let analytic = grads
            .get(vars[li])
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(leaf.shape()));
        let mut worst = (0.0f64, 0usize);
        for e in 0..leaf.len() {
            let x = leaf.data()[e];
            probe[li].data_mut()[e] = x + step;
            let up = eval(&probe)?;
            probe[li].data_mut()[e] = x - step;
            let down = eval(&probe)?;
            probe[li].data_mut()[e] = x;

            let numeric = (up - down) / (2.0 * step);
            let a = analytic.data()[e];
            let denom = a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
            let rel = (a - numeric).abs() / denom;
            if rel > worst.0 {
                worst = (rel, e);
            }
        }
        report.leaves.push(LeafCheck {
            leaf: li,
            max_rel_error: worst.0,
            worst_element: worst.1,
            passed: worst.0 <= tol,
        });
    }
    Ok(report)
}
