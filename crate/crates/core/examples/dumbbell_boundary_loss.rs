//! On the dumbbell, a datum peaking at a point of the flat neck boundary is
//! not attained: horizontal lines near it never leave the domain close by.

use fracenv::data::Datum;
use fracenv::envelope::{solve_envelope, SolverConfig};
use fracenv::geometry::{Domain, Point};
use fracenv::kernel::FractionalOrder;

fn main() -> fracenv::Result<()> {
    let domain = Domain::canonical_dumbbell();
    let order = FractionalOrder::new(0.5)?;
    let g = Datum::parse("boundary_peak:0,0.2,1")?.exterior(order, &domain)?;
    let cfg = SolverConfig { dx: 1.0 / 32.0, ..SolverConfig::default() };
    let r = solve_envelope(&domain, &g, order, &cfg)?;
    println!("g(0, 0.2) = {}", g.eval(&Point::new(0.0, 0.2)));
    for y in [0.1875, 0.125, 0.0] {
        let p = Point::new(0.0, y);
        println!("u(0, {y}) = {:.3e}", r.u.evaluate(&p, &g));
    }
    let (_, hi) = r.u.inside_range();
    println!("max u over the dumbbell = {hi:.4}");
    Ok(())
}
