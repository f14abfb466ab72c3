//! Synaptic Intelligence on a two-parameter quadratic: only the parameter the
//! loss depends on strongly gets a large importance, and the resulting
//! penalty resists moving it.
//!
//! cargo run --release --example synaptic_importance

use progress_crl::continual::{compute_si, si_accumulate, SiAccumulator};
use progress_crl::policy::si_loss_grad_flat;

fn main() -> progress_crl::Result<()> {
    // f(a, b) = 2 a^2 + 0.05 b^2, descended from (1, 1).
    let curv = [4.0, 0.1];
    let mut theta = vec![1.0, 1.0];
    let mut acc = SiAccumulator::new(&theta);
    let lr = 0.02;
    for _ in 0..300 {
        let g: Vec<f64> = theta.iter().zip(curv).map(|(x, c)| c * x).collect();
        let next: Vec<f64> = theta.iter().zip(&g).map(|(x, g)| x - lr * g).collect();
        acc = si_accumulate(&acc, &g, &next)?;
        theta = next;
    }
    let drop: Vec<f64> = curv.iter().zip(&theta).map(|(c, x)| 0.5 * c * (1.0 - x * x)).collect();
    println!("theta after descent: ({:.4}, {:.4})", theta[0], theta[1]);
    println!("path integral omega: ({:.4}, {:.4})  loss drop per coordinate ({:.4}, {:.4})", acc.omega[0], acc.omega[1], drop[0], drop[1]);

    let reg = compute_si(&acc, &theta, 0.1)?;
    println!("importance Omega: ({:.4}, {:.4})", reg.omega_cap[0], reg.omega_cap[1]);
    let regs = [reg];
    for d in [0.1, 0.2, 0.4] {
        let a = si_loss_grad_flat(&[theta[0] + d, theta[1]], &regs)?.0;
        let b = si_loss_grad_flat(&[theta[0], theta[1] + d], &regs)?.0;
        println!("move by {d:.1}: penalty on a {a:.5}, on b {b:.5}");
    }
    Ok(())
}
