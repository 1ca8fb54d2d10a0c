//! The three operator modes at a point near the boundary: the full operator
//! sees the exterior datum, the localized ones only the domain.

use std::sync::Arc;

use fracenv::geometry::{DirectionSet, Domain, Point};
use fracenv::kernel::{build_quadrature, FractionalOrder, Normalization};
use fracenv::operator::{lambda_1s, ExteriorData, GridFunction, OperatorMode};

fn main() -> fracenv::Result<()> {
    let domain = Domain::canonical_dumbbell();
    let order = FractionalOrder::new(0.5)?;
    let dx = 1.0 / 32.0;
    let g = ExteriorData::new(Arc::new(|p: Point| (p.y * 3.0).sin()), 1.0)?;
    let u = GridFunction::from_fn(&domain, dx, |p| 0.3 * p.x * p.x - 0.5, &g)?;
    let quad = build_quadrature(order, dx, domain.diameter(), Normalization::Unnormalized)?;
    let dirs = DirectionSet::half_circle(32)?;
    let x = Point::new(-1.5, 0.5);
    for mode in [OperatorMode::Full, OperatorMode::LocalizedUnion, OperatorMode::LocalizedComponent] {
        let v = lambda_1s(&u, &g, &x, &dirs, mode, &quad)?;
        println!("{mode:?}: Λ = {:.5}, argmin direction {:?}", v.value, v.direction);
    }
    Ok(())
}
