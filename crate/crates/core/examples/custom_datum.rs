//! Exterior data from an expression, the way the command line builds them.

use fracenv::data::Datum;
use fracenv::envelope::{solve_envelope, SolverConfig};
use fracenv::geometry::{Domain, Point};
use fracenv::kernel::FractionalOrder;

fn main() -> fracenv::Result<()> {
    let domain = Domain::ellipse(Point::origin(), 1.2, 0.8)?;
    let order = FractionalOrder::new(0.6)?;
    let datum = Datum::parse("expr:math::sin(2.0 * x) * math::cos(y)")?;
    let g = datum.exterior(order, &domain)?;
    let cfg = SolverConfig { dx: 1.0 / 24.0, ..SolverConfig::default() };
    let r = solve_envelope(&domain, &g, order, &cfg)?;
    let (lo, hi) = r.u.inside_range();
    println!("datum {datum}: envelope range [{lo:.4}, {hi:.4}], residual {:.2e}", r.residual);
    Ok(())
}
