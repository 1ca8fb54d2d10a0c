//! Λ₁ˢ and the anisotropic Monge-Ampère residual of a saddle-like function.

use std::sync::Arc;

use fracenv::geometry::{DirectionSet, Domain, Point};
use fracenv::kernel::{build_quadrature, FractionalOrder, Normalization};
use fracenv::operator::{lambda_1s, monge_ampere_residual, AnisotropyGrid, ExteriorData, GridFunction, OperatorMode};

fn main() -> fracenv::Result<()> {
    let domain = Domain::unit_disk();
    let order = FractionalOrder::new(0.5)?;
    let dx = 1.0 / 32.0;
    let f = |p: Point| (1.3 * p.x).cos() * 0.2 + p.x * p.x - 0.2 * p.y * p.y;
    let g = ExteriorData::new(Arc::new(move |p: Point| f(p / p.coords.norm().max(1.0))), 2.0)?;
    let u = GridFunction::from_fn(&domain, dx, f, &g)?;
    let quad = build_quadrature(order, dx, 2.0, Normalization::Normalized)?;
    let dirs = DirectionSet::half_circle(32)?;
    for a_max in [1.0, 10.0, 100.0] {
        let grid = AnisotropyGrid::new(a_max, 8)?;
        let x = Point::new(0.1, -0.2);
        let lam = lambda_1s(&u, &g, &x, &dirs, OperatorMode::Full, &quad)?;
        let ma = monge_ampere_residual(&u, &g, &x, &grid, &dirs, &quad)?;
        println!(
            "a_max {a_max:>5}: Λ = {:8.4} along {:?}, Monge-Ampère = {:10.4} (a = {:.3}, θ = {:.3})",
            lam.value, lam.direction, ma.value, ma.a, ma.theta
        );
    }
    Ok(())
}
