//! Built-in exterior data and user expressions.
//!
//! Every datum is a bounded function on the plane. One-dimensional data read
//! only the first coordinate.

use std::fmt;
use std::sync::Arc;

use evalexpr::{ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};
use serde::{Deserialize, Serialize};

use crate::dirichlet1d::{Field, Profile};
use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::kernel::FractionalOrder;
use crate::operator::ExteriorData;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Datum {
    Constant { value: f64 },
    /// `−(1 − x²)₊ˢ`.
    DydaProfile,
    /// `(x − 3)²` on `[2, 4]`, 1 elsewhere.
    Bump24,
    /// `1 + exp(1 − 1/(1 − ((x − c)/w)²))` on `|x − c| < w`, 1 elsewhere.
    GeOneBump { center: f64, width: f64 },
    /// Tent of height 1 at `center`, vanishing outside `B(center, radius)`.
    BoundaryPeak { center: [f64; 2], radius: f64 },
    /// `x₁` in the unit ball, constant along rays outside it.
    FirstCoordinate,
    /// evalexpr formula in `x`, `y`, `s` and `pi`.
    Expression { expr: String, bound: Option<f64> },
}

impl Datum {
    pub fn names() -> &'static [&'static str] {
        &["constant", "dyda_profile", "bump_2_4", "ge_one_bump", "boundary_peak", "first_coordinate", "expr"]
    }

    /// Parses `name[:args]`, e.g. `constant:0.7`, `boundary_peak:0,0.2,0.5`
    /// or `expr:x^2 + y^2`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (name, args) = match spec.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (spec, None),
        };
        let nums = |a: Option<&str>| -> Result<Vec<f64>> {
            a.map(|a| a.split(',').map(|x| parse_f64(x.trim())).collect::<Result<Vec<_>>>())
                .unwrap_or_else(|| Ok(Vec::new()))
        };
        let datum = match name {
            "constant" => match nums(args)?.as_slice() {
                [v] => Datum::Constant { value: *v },
                [] => Datum::Constant { value: 0.0 },
                _ => return Err(Error::Config("constant takes one value".into())),
            },
            "dyda_profile" => no_args(name, args, Datum::DydaProfile)?,
            "bump_2_4" => no_args(name, args, Datum::Bump24)?,
            "first_coordinate" => no_args(name, args, Datum::FirstCoordinate)?,
            "ge_one_bump" => match nums(args)?.as_slice() {
                [] => Datum::GeOneBump { center: 1.5, width: 0.4 },
                [c, w] if *w > 0.0 => Datum::GeOneBump { center: *c, width: *w },
                _ => return Err(Error::Config("ge_one_bump takes center,width with width > 0".into())),
            },
            "boundary_peak" => match nums(args)?.as_slice() {
                [] => Datum::BoundaryPeak { center: [0.0, 0.2], radius: 1.0 },
                [x, y, r] if *r > 0.0 => Datum::BoundaryPeak { center: [*x, *y], radius: *r },
                _ => return Err(Error::Config("boundary_peak takes x,y,radius with radius > 0".into())),
            },
            "expr" => {
                let expr = args.unwrap_or("").to_string();
                compile(&expr)?;
                Datum::Expression { expr, bound: None }
            }
            other => return Err(Error::Config(format!("unknown datum `{other}`"))),
        };
        Ok(datum)
    }

    /// Sup of `|g|`; expressions without a declared bound are sampled.
    pub fn bound(&self, order: FractionalOrder, domain: &Domain) -> Result<f64> {
        Ok(match self {
            Datum::Constant { value } => value.abs(),
            Datum::DydaProfile | Datum::Bump24 | Datum::BoundaryPeak { .. } | Datum::FirstCoordinate => 1.0,
            Datum::GeOneBump { .. } => 2.0,
            Datum::Expression { bound: Some(b), .. } => *b,
            Datum::Expression { bound: None, .. } => {
                let f = self.field(order)?;
                let (lo, hi) = domain.bounding_box();
                let pad = 2.0 * domain.diameter();
                let steps = 200;
                let mut m: f64 = 0.0;
                for i in 0..=steps {
                    for j in 0..=steps {
                        let x = lo.x - pad + (hi.x - lo.x + 2.0 * pad) * i as f64 / steps as f64;
                        let y = lo.y - pad + (hi.y - lo.y + 2.0 * pad) * j as f64 / steps as f64;
                        m = m.max(f(Point::new(x, y)).abs());
                    }
                }
                // sampled sup is only a guard against runaway formulas
                2.0 * m + 1.0
            }
        })
    }

    pub fn field(&self, order: FractionalOrder) -> Result<Field> {
        let s = order.s();
        Ok(match self.clone() {
            Datum::Constant { value } => Arc::new(move |_| value),
            Datum::DydaProfile => Arc::new(move |p: Point| -(1.0 - p.x * p.x).max(0.0).powf(s)),
            Datum::Bump24 => Arc::new(|p: Point| bump_2_4(p.x)),
            Datum::GeOneBump { center, width } => Arc::new(move |p: Point| ge_one_bump(p.x, center, width)),
            Datum::BoundaryPeak { center, radius } => {
                let c = Point::new(center[0], center[1]);
                Arc::new(move |p: Point| (1.0 - (p - c).norm() / radius).max(0.0))
            }
            Datum::FirstCoordinate => Arc::new(|p: Point| p.x / p.coords.norm().max(1.0)),
            Datum::Expression { expr, .. } => {
                let node = Arc::new(compile(&expr)?);
                Arc::new(move |p: Point| eval(&node, p, s))
            }
        })
    }

    /// Restriction to the first axis.
    pub fn profile(&self, order: FractionalOrder) -> Result<Profile> {
        let f = self.field(order)?;
        Ok(Arc::new(move |t| f(Point::new(t, 0.0))))
    }

    pub fn exterior(&self, order: FractionalOrder, domain: &Domain) -> Result<ExteriorData> {
        ExteriorData::new(self.field(order)?, self.bound(order, domain)?)
    }
}

impl fmt::Display for Datum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Datum::Constant { value } => write!(f, "constant:{value:?}"),
            Datum::DydaProfile => write!(f, "dyda_profile"),
            Datum::Bump24 => write!(f, "bump_2_4"),
            Datum::GeOneBump { center, width } => write!(f, "ge_one_bump:{center:?},{width:?}"),
            Datum::BoundaryPeak { center, radius } => {
                write!(f, "boundary_peak:{:?},{:?},{radius:?}", center[0], center[1])
            }
            Datum::FirstCoordinate => write!(f, "first_coordinate"),
            Datum::Expression { expr, .. } => write!(f, "expr:{expr}"),
        }
    }
}

pub fn bump_2_4(t: f64) -> f64 {
    if (2.0..=4.0).contains(&t) {
        (t - 3.0).powi(2)
    } else {
        1.0
    }
}

pub fn ge_one_bump(t: f64, center: f64, width: f64) -> f64 {
    let r = (t - center) / width;
    if r.abs() < 1.0 {
        1.0 + (1.0 - 1.0 / (1.0 - r * r)).exp()
    } else {
        1.0
    }
}

fn no_args(name: &str, args: Option<&str>, d: Datum) -> Result<Datum> {
    match args {
        None | Some("") => Ok(d),
        Some(_) => Err(Error::Config(format!("{name} takes no arguments"))),
    }
}

pub(crate) fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Config(format!("`{s}` is not a number")))
}

fn compile(expr: &str) -> Result<Node<DefaultNumericTypes>> {
    let node = evalexpr::build_operator_tree::<DefaultNumericTypes>(expr)
        .map_err(|e| Error::Config(format!("bad expression `{expr}`: {e}")))?;
    let probe = eval_checked(&node, Point::new(0.1234, -0.4321), 0.5);
    probe.map_err(|e| Error::Config(format!("expression `{expr}` does not evaluate: {e}")))?;
    Ok(node)
}

fn eval_checked(node: &Node<DefaultNumericTypes>, p: Point, s: f64) -> std::result::Result<f64, String> {
    let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
    for (k, v) in [("x", p.x), ("y", p.y), ("s", s), ("pi", std::f64::consts::PI)] {
        ctx.set_value(k.into(), Value::Float(v)).map_err(|e| e.to_string())?;
    }
    node.eval_number_with_context(&ctx).map_err(|e| e.to_string())
}

fn eval(node: &Node<DefaultNumericTypes>, p: Point, s: f64) -> f64 {
    eval_checked(node, p, s).unwrap_or(f64::NAN)
}
