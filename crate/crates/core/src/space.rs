//! The geodesic-space interface shared by every construction in the crate.

use std::fmt::Debug;

use rand::{Rng, RngExt};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::model::{Kappa, ModelPoint, ModelSpace};

/// Stand-in for an infinite CAT radius on globally CAT(0) instances.
pub const DEFAULT_RADIUS_CAP: f64 = 1e6;

pub trait GeodesicSpace: Sync {
    type Point: Clone + Debug + Send + Sync;

    fn name(&self) -> String;
    fn dist(&self, p: &Self::Point, q: &Self::Point) -> f64;
    /// Constant-speed geodesic from p (t = 0) to q (t = 1).
    fn geodesic(&self, p: &Self::Point, q: &Self::Point, t: f64) -> Result<Self::Point>;
    fn cat_radius(&self, p: &Self::Point) -> f64;
    fn curvature_bound(&self) -> Kappa;

    fn is_nonbranching_from(&self, _p: &Self::Point) -> Option<bool> {
        None
    }

    /// Radius around p that contains no singular point other than p itself.
    fn regular_radius(&self, _p: &Self::Point) -> f64 {
        f64::INFINITY
    }

    /// Closed-form Alexandrov angle at x between the geodesics toward y and z.
    fn angle_at(&self, _x: &Self::Point, _y: &Self::Point, _z: &Self::Point) -> Option<f64> {
        None
    }

    /// Closed-form barycenter of a finitely supported measure, where one is known.
    fn exact_barycenter(&self, _atoms: &[(Self::Point, f64)]) -> Option<Result<Self::Point>> {
        None
    }

    fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Point;

    /// Base points for tangent-level checks; spaces may bias toward singular points.
    fn sample_base_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Point {
        self.sample_point(rng)
    }

    /// A random point within `radius` of x.
    fn sample_near<R: Rng + ?Sized>(&self, x: &Self::Point, radius: f64, rng: &mut R) -> Self::Point {
        for _ in 0..64 {
            let p = self.sample_point(rng);
            let d = self.dist(x, &p);
            if d == 0.0 {
                continue;
            }
            let r = radius * rng.random::<f64>().sqrt();
            if let Ok(q) = self.geodesic(x, &p, (r / d).min(1.0)) {
                return q;
            }
        }
        x.clone()
    }

    fn point_to_json(&self, p: &Self::Point) -> Value;
    fn point_from_json(&self, v: &Value) -> Result<Self::Point>;

    fn midpoint(&self, p: &Self::Point, q: &Self::Point) -> Result<Self::Point> {
        self.geodesic(p, q, 0.5)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MidpointCertificate {
    pub bound: f64,
    pub constant: f64,
}

/// Bound on the distance between an ε-approximate midpoint and the true midpoint.
pub fn certify_midpoint<S: GeodesicSpace>(
    space: &S,
    x: &S::Point,
    y: &S::Point,
    m_candidate: &S::Point,
    eps: f64,
) -> Result<MidpointCertificate> {
    let dxy = space.dist(x, y);
    let lim = dxy * dxy / 4.0 + eps * eps;
    let (dx, dy) = (space.dist(x, m_candidate), space.dist(y, m_candidate));
    let slack = 1e-12 * (1.0 + dxy * dxy);
    if dx * dx > lim + slack || dy * dy > lim + slack {
        return Err(Error::PreconditionFailed(format!(
            "candidate is not an {eps}-approximate midpoint"
        )));
    }
    let k = space.curvature_bound().value();
    let constant = if k <= 0.0 {
        1.0
    } else {
        let arg = k.sqrt() * dxy / 2.0;
        if arg >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::PreconditionFailed("points too far apart for the curvature bound".into()));
        }
        1.0 / arg.cos().sqrt()
    };
    Ok(MidpointCertificate { bound: constant * eps, constant })
}

/// d((G_x^y)_ε, (G_x^z)_ε) / (ε d(y,z)).
pub fn contraction_ratio<S: GeodesicSpace>(space: &S, x: &S::Point, y: &S::Point, z: &S::Point, eps: f64) -> Result<f64> {
    let dyz = space.dist(y, z);
    if dyz == 0.0 {
        return Err(Error::PreconditionFailed("y and z coincide".into()));
    }
    let ye = space.geodesic(x, y, eps)?;
    let ze = space.geodesic(x, z, eps)?;
    Ok(space.dist(&ye, &ze) / (eps * dyz))
}

pub(crate) fn f64_field(v: &Value, key: &str) -> Result<f64> {
    v.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::Invalid(format!("missing numeric field '{key}'")))
}

impl ModelSpace {
    fn sample_radius(&self) -> f64 {
        let k = self.kappa.value();
        if k == 0.0 {
            2.0
        } else if k < 0.0 {
            2.0 / (-k).sqrt()
        } else {
            self.kappa.diam() / 3.2
        }
    }
}

impl GeodesicSpace for ModelSpace {
    type Point = ModelPoint;

    fn name(&self) -> String {
        format!("model(kappa={})", self.kappa.value())
    }

    fn dist(&self, p: &ModelPoint, q: &ModelPoint) -> f64 {
        self.distance(p, q)
    }

    fn geodesic(&self, p: &ModelPoint, q: &ModelPoint, t: f64) -> Result<ModelPoint> {
        ModelSpace::geodesic(self, p, q, t)
    }

    fn cat_radius(&self, _p: &ModelPoint) -> f64 {
        (self.kappa.diam() / 2.0).min(DEFAULT_RADIUS_CAP)
    }

    fn curvature_bound(&self) -> Kappa {
        self.kappa
    }

    fn is_nonbranching_from(&self, _p: &ModelPoint) -> Option<bool> {
        Some(true)
    }

    fn angle_at(&self, x: &ModelPoint, y: &ModelPoint, z: &ModelPoint) -> Option<f64> {
        ModelSpace::angle_at(self, x, y, z).ok()
    }

    fn exact_barycenter(&self, atoms: &[(ModelPoint, f64)]) -> Option<Result<ModelPoint>> {
        let k = self.kappa.value();
        if k > 0.0 {
            return Some(Err(Error::NotCat0 { kappa: k }));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let mut b = atoms[0].0;
        if k == 0.0 {
            let mut v = nalgebra::Vector2::zeros();
            for (p, w) in atoms {
                if let ModelPoint::Plane(c) = p {
                    v += c * (*w / total);
                }
            }
            return Some(Ok(ModelPoint::Plane(v)));
        }
        // Karcher iteration; contracts linearly on the hyperbolic plane.
        for _ in 0..10_000 {
            let mut step = nalgebra::Vector3::zeros();
            for (p, w) in atoms {
                match self.log(&b, p) {
                    Ok(l) => step += l * (*w / total),
                    Err(e) => return Some(Err(e)),
                }
            }
            let len = self.inner(&b, &step, &step).max(0.0).sqrt();
            b = self.exp(&b, &step);
            if len < 1e-15 {
                return Some(Ok(b));
            }
        }
        Some(Err(Error::NonConvergence { gap: f64::NAN }))
    }

    fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelPoint {
        let k = self.kappa.value();
        let rho = self.sample_radius();
        let u: f64 = rng.random();
        let phi = rng.random::<f64>() * std::f64::consts::TAU;
        // area-uniform radius in the geodesic disk of radius rho
        let r = if k == 0.0 {
            rho * u.sqrt()
        } else if k < 0.0 {
            let s = (-k).sqrt();
            (1.0 + u * ((s * rho).cosh() - 1.0)).acosh() / s
        } else {
            let s = k.sqrt();
            (1.0 - u * (1.0 - (s * rho).cos())).acos() / s
        };
        self.polar(r, phi)
    }

    fn point_to_json(&self, p: &ModelPoint) -> Value {
        json!({ "coords": p.coords() })
    }

    fn point_from_json(&self, v: &Value) -> Result<ModelPoint> {
        let coords: Vec<f64> = v
            .get("coords")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Invalid("model point needs 'coords'".into()))?
            .iter()
            .map(|c| c.as_f64().ok_or_else(|| Error::Invalid("non-numeric coordinate".into())))
            .collect::<Result<_>>()?;
        self.point(&coords)
    }
}
