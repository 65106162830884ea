//! The three regularizer kernels: mirror map, Bregman divergence and the
//! Fenchel coupling identity `F(p, y) = D(p, Q(y))`.

use sgd_lab::regularization::Kernel;

fn main() -> sgd_lab::error::Result<()> {
    let y = [1.5, -0.5, 0.25];
    let p = [0.2, 0.3, 0.5];
    for kernel in [Kernel::Entropic, Kernel::LogBarrier, Kernel::tsallis(0.5)?] {
        let x = kernel.mirror(&y)?;
        let sol = kernel.mirror_root_finding(&y)?;
        println!("{kernel:?}");
        println!(
            "  Q(y)            = {x:.6?} ({} bisection steps)",
            sol.iterations
        );
        println!("  D(p, Q(y))      = {:.12}", kernel.bregman(&p, &x)?);
        println!("  F(p, y)         = {:.12}", kernel.fenchel(&p, &y)?);
        println!(
            "  tr JQ(y)        = {:.6}",
            kernel.trace_jacobian_mirror(&y)?
        );
        println!("  bounded at edge = {}", kernel.is_bounded());
    }
    Ok(())
}
