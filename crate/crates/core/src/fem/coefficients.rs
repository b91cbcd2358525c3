use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Point};

type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(Point, f64) -> [f64; 2] + Send + Sync>;

/// Space-dependent scalar coefficient.
#[derive(Clone)]
pub enum ScalarField {
    Constant(f64),
    Custom(ScalarFn),
}

impl ScalarField {
    pub fn custom(f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField::Custom(Arc::new(f))
    }

    pub fn eval(&self, p: Point) -> f64 {
        match self {
            ScalarField::Constant(v) => *v,
            ScalarField::Custom(f) => f(p),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ScalarField::Constant(v) if *v == 0.0)
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Constant(v) => write!(f, "constant:{v}"),
            ScalarField::Custom(_) => f.write_str("custom"),
        }
    }
}

/// Accepts `constant:VALUE` or a bare number.
impl FromStr for ScalarField {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let value = s.strip_prefix("constant:").unwrap_or(s);
        value
            .trim()
            .parse::<f64>()
            .map(ScalarField::Constant)
            .map_err(|_| Error::Config(format!("unknown scalar field `{s}` (expected constant:VALUE)")))
    }
}

/// Velocity field `v(x, t)`.
#[derive(Clone)]
pub enum VectorField {
    Zero,
    /// `amplitude * curl(q^2)` with `q = x y (1 - x^2 - y^2)`; vanishes with its
    /// gradient on the whole quarter-disk boundary and is divergence free.
    BubbleRotation { amplitude: f64 },
    /// Velocity and its divergence.
    Custom { velocity: VectorFn, divergence: ScalarFn },
}

impl VectorField {
    pub fn custom(
        velocity: impl Fn(Point, f64) -> [f64; 2] + Send + Sync + 'static,
        divergence: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        VectorField::Custom {
            velocity: Arc::new(velocity),
            divergence: Arc::new(divergence),
        }
    }

    pub fn eval(&self, p: Point, t: f64) -> [f64; 2] {
        match self {
            VectorField::Zero => [0.0, 0.0],
            VectorField::BubbleRotation { amplitude } => {
                let v = bubble_velocity(p);
                [amplitude * v[0], amplitude * v[1]]
            }
            VectorField::Custom { velocity, .. } => velocity(p, t),
        }
    }

    pub fn divergence(&self, p: Point) -> f64 {
        match self {
            VectorField::Zero | VectorField::BubbleRotation { .. } => 0.0,
            VectorField::Custom { divergence, .. } => divergence(p),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, VectorField::Zero) || matches!(self, VectorField::BubbleRotation { amplitude } if *amplitude == 0.0)
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorField::Zero => f.write_str("zero"),
            VectorField::BubbleRotation { amplitude } => write!(f, "bubble_rotation:{amplitude}"),
            VectorField::Custom { .. } => f.write_str("custom"),
        }
    }
}

/// Accepts `zero`, `bubble_rotation` or `bubble_rotation:AMPLITUDE`.
impl FromStr for VectorField {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "zero" || s == "none" {
            return Ok(VectorField::Zero);
        }
        if s == "bubble_rotation" {
            return Ok(VectorField::BubbleRotation { amplitude: 1.0 });
        }
        if let Some(a) = s.strip_prefix("bubble_rotation:") {
            let amplitude = a
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad bubble_rotation amplitude `{a}`")))?;
            return Ok(VectorField::BubbleRotation { amplitude });
        }
        Err(Error::Config(format!("unknown velocity field `{s}`")))
    }
}

/// `q(x)^2` with `q = x y (1 - x^2 - y^2)`.
pub fn bubble_stream(p: Point) -> f64 {
    let [x, y] = p;
    let q = x * y * (1.0 - x * x - y * y);
    q * q
}

/// Unit-amplitude `(d/dy, -d/dx)` of [`bubble_stream`].
pub fn bubble_velocity(p: Point) -> [f64; 2] {
    let [x, y] = p;
    let q = x * y * (1.0 - x * x - y * y);
    [2.0 * q * x * (1.0 - x * x - 3.0 * y * y), -2.0 * q * y * (1.0 - 3.0 * x * x - y * y)]
}

/// Coefficients of `-div(k grad u) + c u` with `k du/dn + mu u = 0` on each
/// boundary part, plus an optional convection velocity.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub k: ScalarField,
    pub c: ScalarField,
    /// Indexed by [`BoundaryTag::index`].
    pub mu: [ScalarField; 3],
    pub velocity: VectorField,
}

impl Coefficients {
    /// `k = 1`, `c = 0`, zero flux on the straight edges and `mu` on the arc.
    pub fn robin_arc(mu: f64) -> Self {
        Coefficients {
            k: ScalarField::Constant(1.0),
            c: ScalarField::Constant(0.0),
            mu: [
                ScalarField::Constant(0.0),
                ScalarField::Constant(0.0),
                ScalarField::Constant(mu),
            ],
            velocity: VectorField::Zero,
        }
    }

    pub fn with_velocity(mut self, velocity: VectorField) -> Self {
        self.velocity = velocity;
        self
    }

    pub fn mu_on(&self, tag: BoundaryTag) -> &ScalarField {
        &self.mu[tag.index()]
    }
}
