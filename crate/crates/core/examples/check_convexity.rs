//! Random-segment s-convexity checks: a convex quadratic passes, a concave one
//! fails.

use std::sync::Arc;

use fracenv::dirichlet1d::{check_s_convexity, CheckOptions, Field, SamplingPlan};
use fracenv::geometry::{Domain, Point};
use fracenv::kernel::FractionalOrder;

fn main() -> fracenv::Result<()> {
    let domain = Domain::unit_disk();
    let order = FractionalOrder::new(0.75)?;
    let plan = SamplingPlan::Random { count: 50, seed: 42, min_length: 0.1 };
    let opts = CheckOptions::default();
    let fields: [(&str, Field); 2] = [
        ("x² + y²", Arc::new(|p: Point| p.x * p.x + p.y * p.y)),
        ("−(x² + y²)", Arc::new(|p: Point| -(p.x * p.x + p.y * p.y))),
    ];
    for (name, u) in fields {
        let r = check_s_convexity(&u, &domain, order, &plan, &opts)?;
        println!("{name:>12}: {}/{} segments hold, worst violation {:.3e}", r.passed, r.segments, r.worst_violation);
    }
    Ok(())
}
