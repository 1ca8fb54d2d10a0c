//! Segment problem on (0, 1) with datum 0 on the left and 1 on the right.
//! The exact solution is the regularized incomplete beta function `I_t(s, s)`;
//! for s = 1/2 it is `(2/π) arcsin √t`.

use std::f64::consts::PI;
use std::sync::Arc;

use fracenv::dirichlet1d::{solve_segment, SegmentProblem};
use fracenv::geometry::Point;
use fracenv::kernel::FractionalOrder;

fn main() -> fracenv::Result<()> {
    let order = FractionalOrder::new(0.5)?;
    let (x, y) = (Point::new(0.0, 0.0), Point::new(1.0, 0.0));
    let step = SegmentProblem::on_line(x, y, order, 255, Arc::new(|t: f64| if t < 0.5 { 0.0 } else { 1.0 }))?;
    let v = solve_segment(&step)?;
    println!("{:>6} {:>8} {:>8}", "t", "v", "exact");
    for (t, vk) in step.nodes().iter().zip(&v).step_by(32) {
        println!("{t:>6.3} {vk:>8.4} {:>8.4}", 2.0 / PI * t.sqrt().asin());
    }
    Ok(())
}
