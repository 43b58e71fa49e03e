//! Kernel evaluation and Gram matrices.

use ecosvm::kernels::{gram_matrix, kernel_eval, KernelSpec};

fn main() -> ecosvm::error::Result<()> {
    let x = [0.0, 1.0];
    let y = [1.0, 1.0];
    for k in [
        KernelSpec::Linear,
        KernelSpec::rbf(0.5),
        KernelSpec::Polynomial { degree: 2, offset: 1.0 },
    ] {
        println!("{k:?}: K(x, y) = {:.6}", kernel_eval(&k, &x, &y)?);
    }

    let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]];
    let g = gram_matrix(&KernelSpec::rbf(1.0), &pts)?;
    for i in 0..g.len() {
        println!("{:?}", g.row(i).iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>());
    }
    Ok(())
}
