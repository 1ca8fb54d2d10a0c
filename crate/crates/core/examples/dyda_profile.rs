//! The normalized operator of `−(1−t²)₊ˢ` is the constant `Γ(2s+1)` on (−1, 1).

use fracenv::geometry::LineSample;
use fracenv::kernel::{build_quadrature, frac_lap_1d, FractionalOrder, Normalization, TailModel};

fn main() -> fracenv::Result<()> {
    let h = 1.0 / 256.0;
    for s in [0.25, 0.5, 0.75] {
        let order = FractionalOrder::new(s)?;
        let quad = build_quadrature(order, h, 2.0, Normalization::Normalized)?;
        let n = 512;
        let line = LineSample::from_profile(h, -2.0, 2 * n + 1, |t| -(1.0 - t * t).max(0.0).powf(s));
        print!("s = {s}: Γ(2s+1) = {:.5}, values", order.gamma2s1());
        for t in [-0.8, -0.4, 0.0, 0.4, 0.8] {
            let j = (n as isize + (t / h).round() as isize) as usize;
            print!(" {:.5}", frac_lap_1d(&line, j, &quad, &TailModel::Zero)?);
        }
        println!();
    }
    Ok(())
}
