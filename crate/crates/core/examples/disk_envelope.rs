//! s-convex and s-concave envelopes on the unit disk of `x₁` extended
//! radially outside.

use std::sync::Arc;

use fracenv::envelope::{s_concave_envelope, solve_envelope, SolverConfig};
use fracenv::geometry::{Domain, Point};
use fracenv::kernel::FractionalOrder;
use fracenv::operator::ExteriorData;

fn main() -> fracenv::Result<()> {
    let domain = Domain::unit_disk();
    let g = ExteriorData::new(Arc::new(|p: Point| p.x / p.coords.norm().max(1.0)), 1.0)?;
    let cfg = SolverConfig { dx: 1.0 / 32.0, ..SolverConfig::default() };
    let order = FractionalOrder::new(0.5)?;
    let lower = solve_envelope(&domain, &g, order, &cfg)?;
    let upper = s_concave_envelope(&domain, &g, order, &cfg)?;
    println!(
        "convex: {} policies, residual {:.2e}; concave: {} policies, residual {:.2e}",
        lower.policy_iterations, lower.residual, upper.policy_iterations, upper.residual
    );
    for x in [-0.75, -0.5, 0.0, 0.5, 0.75] {
        let p = Point::new(x, 0.0);
        println!(
            "x = ({x:5.2}, 0): lower {:8.4}  upper {:8.4}",
            lower.u.evaluate(&p, &g),
            upper.u.evaluate(&p, &g)
        );
    }
    Ok(())
}
