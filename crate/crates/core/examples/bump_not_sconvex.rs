//! `u = 1` on [−1, 1] is convex there, but its exterior values dip to 0 near
//! t = 3, so the segment solution falls below 1 and `u` is not s-convex.

use std::sync::Arc;

use fracenv::data::bump_2_4;
use fracenv::dirichlet1d::{is_s_convex_on_segment, solve_segment, CheckOptions, Field, SegmentProblem};
use fracenv::geometry::Point;
use fracenv::kernel::FractionalOrder;

fn main() -> fracenv::Result<()> {
    let order = FractionalOrder::new(0.25)?;
    let (x, y) = (Point::new(-1.0, 0.0), Point::new(1.0, 0.0));
    let problem = SegmentProblem::on_line(x, y, order, 255, Arc::new(|t| bump_2_4(-1.0 + 2.0 * t)))?;
    let v = solve_segment(&problem)?;
    println!("v(0) = {:.6}  (u(0) = 1)", v[127]);
    let u: Field = Arc::new(|p: Point| bump_2_4(p.x));
    let report = is_s_convex_on_segment(&u, x, y, order, &CheckOptions::default())?;
    println!(
        "checker: holds = {}, worst violation {:.4} at x = {:.3}, tolerance {:.4}",
        report.holds, report.worst_violation, report.location[0], report.tolerance
    );
    Ok(())
}
