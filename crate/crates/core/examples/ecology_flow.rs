//! Integrates the support-vector ecosystem on a tiny problem and prints the
//! trajectory of abundances and the dual objective.

use ecosvm::dynamics::{dual_objective, integrate_to_steady_with, kkt_residual, EcoState, IntegratorOptions};
use ecosvm::kernels::{gram_matrix, KernelSpec};

fn main() -> ecosvm::error::Result<()> {
    let points = vec![vec![0.0, 0.0], vec![0.2, 0.9], vec![1.0, 1.0], vec![0.9, 0.1]];
    let labels = [-1.0, -1.0, 1.0, 1.0];
    let gram = gram_matrix(&KernelSpec::Linear, &points)?;

    let start = EcoState::initial(points.len(), None);
    let opts = IntegratorOptions::default();
    let mut every = 0;
    let steady = integrate_to_steady_with(&start, &labels, &gram, &opts, &mut |step, a, lambda| {
        if step >= every {
            println!("step {step:>6}  L = {:.8}  λ = {lambda:+.4}  a = {a:.4?}", dual_objective(a, &labels, &gram));
            every = (every * 2).max(1);
        }
    })?;

    let s = &steady.state;
    println!("steady: a = {:.6?}", s.abundances);
    println!("dual objective {:.10}", dual_objective(&s.abundances, &labels, &gram));
    println!("kkt residual {:.2e}", kkt_residual(s, &labels, &gram));
    Ok(())
}
