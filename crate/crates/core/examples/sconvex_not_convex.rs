//! The 1-D envelope on (0, 1) of a datum that is ≥ 1 and peaks at 1.5 rises
//! above 1 inside, while the classical convex envelope stays at 1.

use fracenv::data::ge_one_bump;
use fracenv::envelope::{classical_convex_envelope_1d, exterior_1d, solve_envelope, SolverConfig};
use fracenv::geometry::Domain;
use fracenv::kernel::FractionalOrder;

fn main() -> fracenv::Result<()> {
    let domain = Domain::interval(0.0, 1.0)?;
    let g = exterior_1d(|t| ge_one_bump(t, 1.5, 0.4), 2.0)?;
    let cfg = SolverConfig { dx: 1.0 / 128.0, ..SolverConfig::default() };
    let r = solve_envelope(&domain, &g, FractionalOrder::new(0.5)?, &cfg)?;
    let mut xs = vec![0.0, 1.0];
    let mut us = vec![1.0, 1.0];
    for idx in r.u.inside_nodes() {
        xs.push(r.u.lattice().node_at(idx).x);
        us.push(r.u.values()[idx]);
    }
    let hull = classical_convex_envelope_1d(&xs, &us)?;
    println!("converged {} residual {:.2e}", r.converged, r.residual);
    println!("{:>6} {:>10} {:>10}", "x", "u", "hull");
    for (x, u) in xs.iter().zip(&us).skip(2).step_by(16) {
        println!("{x:>6.3} {u:>10.6} {:>10.6}", hull.eval(*x));
    }
    Ok(())
}
