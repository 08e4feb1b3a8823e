//! Constant-curvature model planes M_κ: modified trigonometry, distances,
//! geodesics and comparison triangles.

use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SERIES_CUTOFF: f64 = 1e-8;
const CLAMP_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Kappa(pub f64);

impl Kappa {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Diameter of M_κ.
    pub fn diam(self) -> f64 {
        if self.0 <= 0.0 {
            f64::INFINITY
        } else {
            PI / self.0.sqrt()
        }
    }

    pub fn sn(self, x: f64) -> f64 {
        let k = self.0;
        if k == 0.0 {
            x
        } else if (k * x * x).abs() < SERIES_CUTOFF {
            let x2 = x * x;
            x * (1.0 - k * x2 / 6.0 + k * k * x2 * x2 / 120.0)
        } else if k > 0.0 {
            let s = k.sqrt();
            (s * x).sin() / s
        } else {
            let s = (-k).sqrt();
            (s * x).sinh() / s
        }
    }

    pub fn cn(self, x: f64) -> f64 {
        let k = self.0;
        if k == 0.0 {
            1.0
        } else if (k * x * x).abs() < SERIES_CUTOFF {
            let kx2 = k * x * x;
            1.0 - kx2 / 2.0 + kx2 * kx2 / 24.0
        } else if k > 0.0 {
            (k.sqrt() * x).cos()
        } else {
            ((-k).sqrt() * x).cosh()
        }
    }

    /// (1 − cn(x)) / κ, continuous through κ = 0.
    pub fn vn(self, x: f64) -> f64 {
        let h = self.sn(x / 2.0);
        2.0 * h * h
    }
}

pub fn d_kappa_diam(kappa: Kappa) -> f64 {
    kappa.diam()
}

/// Angle at x of the comparison triangle with sides d(x,y0), d(x,y1), d(y0,y1).
pub fn comparison_angle(kappa: Kappa, d_xy0: f64, d_xy1: f64, d_y0y1: f64) -> Result<f64> {
    let (b, c, a) = (d_xy0, d_xy1, d_y0y1);
    if b <= 0.0 || c <= 0.0 {
        return Err(Error::DegenerateVertex);
    }
    let perimeter = a + b + c;
    let bound = 2.0 * kappa.diam();
    if perimeter >= bound {
        return Err(Error::PerimeterTooLarge { perimeter, bound });
    }
    // half-angle form: exact at straight and degenerate configurations, where the
    // cosine form loses half its digits
    let s = perimeter / 2.0;
    let excess = (s - a).min(s - b).min(s - c);
    if !excess.is_finite() || excess < -CLAMP_SLACK * s {
        return Err(Error::TriangleInequality { cosine: comparison_cosine(kappa, b, c, a)? });
    }
    // differences at rounding level are degenerate triangles, not tiny angles
    let snap = 1e-14 * s;
    let f = |x: f64| if x <= snap { 0.0 } else { kappa.sn(x) };
    let num = f(s - b) * f(s - c);
    let den = f(s) * f(s - a);
    Ok(2.0 * num.max(0.0).sqrt().atan2(den.max(0.0).sqrt()))
}

/// Cosine of the comparison angle, unclamped. Smooth in the side lengths, so it is the
/// better quantity to extrapolate when the angle itself is near 0 or π.
pub fn comparison_cosine(kappa: Kappa, d_xy0: f64, d_xy1: f64, d_y0y1: f64) -> Result<f64> {
    let (b, c, a) = (d_xy0, d_xy1, d_y0y1);
    if b <= 0.0 || c <= 0.0 {
        return Err(Error::DegenerateVertex);
    }
    if kappa.0 == 0.0 {
        return Ok((b * b + c * c - a * a) / (2.0 * b * c));
    }
    let (va, vb, vc) = (kappa.vn(a), kappa.vn(b), kappa.vn(c));
    Ok((vb + vc - va - kappa.0 * vb * vc) / (kappa.sn(b) * kappa.sn(c)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelPoint {
    Plane(Vector2<f64>),
    Sphere(Vector3<f64>),
    Hyperboloid(Vector3<f64>),
}

impl ModelPoint {
    pub fn coords(&self) -> Vec<f64> {
        match self {
            ModelPoint::Plane(v) => vec![v.x, v.y],
            ModelPoint::Sphere(v) | ModelPoint::Hyperboloid(v) => vec![v.x, v.y, v.z],
        }
    }
}

fn minkowski(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.x * b.x + a.y * b.y - a.z * b.z
}

/// The model plane of curvature κ. The sphere is embedded with radius 1/√κ and the
/// hyperbolic plane is the upper sheet of ⟨p,p⟩ = 1/κ in Minkowski space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelSpace {
    pub kappa: Kappa,
}

impl ModelSpace {
    pub fn new(kappa: f64) -> Self {
        ModelSpace { kappa: Kappa(kappa) }
    }

    fn radius(&self) -> f64 {
        1.0 / self.kappa.0.abs().sqrt()
    }

    pub fn origin(&self) -> ModelPoint {
        self.polar(0.0, 0.0)
    }

    /// Geodesic polar coordinates about the origin.
    pub fn polar(&self, r: f64, phi: f64) -> ModelPoint {
        let k = self.kappa.0;
        let (c, s) = (phi.cos(), phi.sin());
        if k == 0.0 {
            ModelPoint::Plane(Vector2::new(r * c, r * s))
        } else if k > 0.0 {
            let rad = self.radius();
            let (a, z) = ((r / rad).sin() * rad, (r / rad).cos() * rad);
            ModelPoint::Sphere(Vector3::new(a * c, a * s, z))
        } else {
            let rad = self.radius();
            let (a, z) = ((r / rad).sinh() * rad, (r / rad).cosh() * rad);
            ModelPoint::Hyperboloid(Vector3::new(a * c, a * s, z))
        }
    }

    /// Polar coordinates (r, φ) of a point about the origin.
    pub fn to_polar(&self, p: &ModelPoint) -> (f64, f64) {
        let r = self.distance(&self.origin(), p);
        let (x, y) = match p {
            ModelPoint::Plane(v) => (v.x, v.y),
            ModelPoint::Sphere(v) | ModelPoint::Hyperboloid(v) => (v.x, v.y),
        };
        (r, y.atan2(x))
    }

    pub fn point(&self, coords: &[f64]) -> Result<ModelPoint> {
        let k = self.kappa.0;
        let bad = |m: &str| Err(Error::Invalid(m.to_string()));
        if coords.iter().any(|c| !c.is_finite()) {
            return bad("non-finite coordinate");
        }
        if k == 0.0 {
            if coords.len() != 2 {
                return bad("plane points need 2 coordinates");
            }
            return Ok(ModelPoint::Plane(Vector2::new(coords[0], coords[1])));
        }
        if coords.len() != 3 {
            return bad("curved model points need 3 coordinates");
        }
        let v = Vector3::new(coords[0], coords[1], coords[2]);
        if k > 0.0 {
            if (v.norm_squared() - 1.0 / k).abs() > 1e-12 * (1.0 + 1.0 / k) {
                return bad("point is off the sphere");
            }
            Ok(ModelPoint::Sphere(v))
        } else {
            if (minkowski(&v, &v) - 1.0 / k).abs() > 1e-12 * (1.0 + v.norm_squared()) || v.z <= 0.0 {
                return bad("point is off the hyperboloid sheet");
            }
            Ok(ModelPoint::Hyperboloid(v))
        }
    }

    pub fn distance(&self, p: &ModelPoint, q: &ModelPoint) -> f64 {
        match (p, q) {
            (ModelPoint::Plane(a), ModelPoint::Plane(b)) => (a - b).norm(),
            (ModelPoint::Sphere(a), ModelPoint::Sphere(b)) => {
                self.radius() * a.cross(b).norm().atan2(a.dot(b))
            }
            (ModelPoint::Hyperboloid(a), ModelPoint::Hyperboloid(b)) => {
                let d = a - b;
                let chord = minkowski(&d, &d).max(0.0).sqrt();
                let rad = self.radius();
                2.0 * rad * (chord / (2.0 * rad)).asinh()
            }
            _ => panic!("model points of different curvature"),
        }
    }

    pub fn geodesic(&self, p: &ModelPoint, q: &ModelPoint, t: f64) -> Result<ModelPoint> {
        let d = self.distance(p, q);
        match (p, q) {
            (ModelPoint::Plane(a), ModelPoint::Plane(b)) => Ok(ModelPoint::Plane(a + (b - a) * t)),
            (ModelPoint::Sphere(a), ModelPoint::Sphere(b)) => {
                if d >= self.kappa.diam() - 1e-12 {
                    return Err(Error::AntipodalPoints { dist: d });
                }
                if d == 0.0 {
                    return Ok(*p);
                }
                let th = d / self.radius();
                let v = (a * ((1.0 - t) * th).sin() + b * (t * th).sin()) / th.sin();
                Ok(ModelPoint::Sphere(v * (self.radius() / v.norm())))
            }
            (ModelPoint::Hyperboloid(a), ModelPoint::Hyperboloid(b)) => {
                if d == 0.0 {
                    return Ok(*p);
                }
                let th = d / self.radius();
                let v = (a * ((1.0 - t) * th).sinh() + b * (t * th).sinh()) / th.sinh();
                Ok(ModelPoint::Hyperboloid(self.renormalize_h(v)))
            }
            _ => Err(Error::SpaceMismatch),
        }
    }

    fn renormalize_h(&self, v: Vector3<f64>) -> Vector3<f64> {
        let n = (-minkowski(&v, &v)).sqrt();
        v * (self.radius() / n)
    }

    /// Inverse exponential map at p, as an ambient vector tangent at p.
    pub fn log(&self, p: &ModelPoint, q: &ModelPoint) -> Result<Vector3<f64>> {
        let d = self.distance(p, q);
        match (p, q) {
            (ModelPoint::Plane(a), ModelPoint::Plane(b)) => {
                let v = b - a;
                Ok(Vector3::new(v.x, v.y, 0.0))
            }
            (ModelPoint::Sphere(a), ModelPoint::Sphere(b)) => {
                if d >= self.kappa.diam() - 1e-12 {
                    return Err(Error::AntipodalPoints { dist: d });
                }
                let u = b - a * (a.dot(b) / a.norm_squared());
                let n = u.norm();
                Ok(if n == 0.0 { Vector3::zeros() } else { u * (d / n) })
            }
            (ModelPoint::Hyperboloid(a), ModelPoint::Hyperboloid(b)) => {
                let u = b - a * (minkowski(a, b) / minkowski(a, a));
                let n = minkowski(&u, &u).max(0.0).sqrt();
                Ok(if n == 0.0 { Vector3::zeros() } else { u * (d / n) })
            }
            _ => Err(Error::SpaceMismatch),
        }
    }

    pub fn exp(&self, p: &ModelPoint, v: &Vector3<f64>) -> ModelPoint {
        match p {
            ModelPoint::Plane(a) => ModelPoint::Plane(a + Vector2::new(v.x, v.y)),
            ModelPoint::Sphere(a) => {
                let n = v.norm();
                if n == 0.0 {
                    return *p;
                }
                let rad = self.radius();
                let w = a * (n / rad).cos() + v * (rad * (n / rad).sin() / n);
                ModelPoint::Sphere(w * (rad / w.norm()))
            }
            ModelPoint::Hyperboloid(a) => {
                let n = minkowski(v, v).max(0.0).sqrt();
                if n == 0.0 {
                    return *p;
                }
                let rad = self.radius();
                let w = a * (n / rad).cosh() + v * (rad * (n / rad).sinh() / n);
                ModelPoint::Hyperboloid(self.renormalize_h(w))
            }
        }
    }

    /// Riemannian inner product of two tangent vectors at p.
    pub fn inner(&self, p: &ModelPoint, u: &Vector3<f64>, w: &Vector3<f64>) -> f64 {
        match p {
            ModelPoint::Hyperboloid(_) => minkowski(u, w),
            _ => u.dot(w),
        }
    }

    /// Riemannian angle at x between the geodesics toward y and z.
    pub fn angle_at(&self, x: &ModelPoint, y: &ModelPoint, z: &ModelPoint) -> Result<f64> {
        let u = self.log(x, y)?;
        let w = self.log(x, z)?;
        let nu = self.inner(x, &u, &u).max(0.0).sqrt();
        let nw = self.inner(x, &w, &w).max(0.0).sqrt();
        if nu == 0.0 || nw == 0.0 {
            return Err(Error::DegenerateVertex);
        }
        let (u, w) = (u / nu, w / nw);
        let (du, su) = (u - w, u + w);
        let dm = self.inner(x, &du, &du).max(0.0).sqrt();
        let sm = self.inner(x, &su, &su).max(0.0).sqrt();
        Ok(if dm <= sm {
            2.0 * (dm / 2.0).min(1.0).asin()
        } else {
            PI - 2.0 * (sm / 2.0).min(1.0).asin()
        })
    }
}

/// A comparison triangle in M_κ with ā at the origin and b̄ on the ray φ = 0.
#[derive(Clone, Copy, Debug)]
pub struct ComparisonTriangle {
    pub model: ModelSpace,
    pub a: ModelPoint,
    pub b: ModelPoint,
    pub c: ModelPoint,
    pub d_ab: f64,
    pub d_bc: f64,
    pub d_ca: f64,
}

pub fn build_comparison_triangle(kappa: Kappa, d_ab: f64, d_bc: f64, d_ca: f64) -> Result<ComparisonTriangle> {
    let perimeter = d_ab + d_bc + d_ca;
    let bound = 2.0 * kappa.diam();
    if perimeter >= bound {
        return Err(Error::PerimeterTooLarge { perimeter, bound });
    }
    if d_ab < 0.0 || d_bc < 0.0 || d_ca < 0.0 {
        return Err(Error::Invalid("negative side length".into()));
    }
    let model = ModelSpace { kappa };
    let alpha = if d_ab == 0.0 || d_ca == 0.0 {
        0.0
    } else {
        comparison_angle(kappa, d_ab, d_ca, d_bc)?
    };
    Ok(ComparisonTriangle {
        model,
        a: model.origin(),
        b: model.polar(d_ab, 0.0),
        c: model.polar(d_ca, alpha),
        d_ab,
        d_bc,
        d_ca,
    })
}

impl ComparisonTriangle {
    /// The point on b̄c̄ at distances d_bd from b̄ and d_dc from c̄.
    pub fn comparison_point(&self, d_bd: f64, d_dc: f64) -> Result<ModelPoint> {
        if (d_bd + d_dc - self.d_bc).abs() > 1e-10 * self.d_bc.max(1.0) || d_bd < 0.0 || d_dc < 0.0 {
            return Err(Error::NotIntermediate { d_bd, d_dc, d_bc: self.d_bc });
        }
        if self.d_bc == 0.0 {
            return Ok(self.b);
        }
        self.model.geodesic(&self.b, &self.c, d_bd / self.d_bc)
    }
}

pub fn comparison_point(tri: &ComparisonTriangle, d_bd: f64, d_dc: f64) -> Result<ModelPoint> {
    tri.comparison_point(d_bd, d_dc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn diameters() {
        assert!(Kappa(0.0).diam().is_infinite());
        assert!(Kappa(-2.0).diam().is_infinite());
        assert_abs_diff_eq!(Kappa(1.0).diam(), PI);
        assert_abs_diff_eq!(Kappa(4.0).diam(), PI / 2.0);
    }

    #[test]
    fn trig_values() {
        assert_eq!(Kappa(0.0).sn(3.7), 3.7);
        assert_abs_diff_eq!(Kappa(1.0).sn(PI / 2.0), 1.0, epsilon = 1e-15);
        // cosh 1 summed as a power series
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 0..30 {
            sum += term;
            term /= ((2 * k + 1) * (2 * k + 2)) as f64;
        }
        assert_abs_diff_eq!(Kappa(-1.0).cn(1.0), sum, epsilon = 1e-15);
        assert_abs_diff_eq!(sum, 1.5430806348, epsilon = 1e-10);
    }

    #[test]
    fn series_branch_is_continuous() {
        for &x in &[1e-3, 0.5, 2.0] {
            let k = 1e-9 / (x * x);
            let big = Kappa(k * (1.0 + 1e-7));
            let small = Kappa(k * (1.0 - 1e-7));
            assert_abs_diff_eq!(big.sn(x), small.sn(x), epsilon = 1e-14 * (1.0 + x));
            assert_abs_diff_eq!(big.cn(x), small.cn(x), epsilon = 1e-14);
        }
    }

    #[test]
    fn angle_examples() {
        assert_abs_diff_eq!(comparison_angle(Kappa(0.0), 1.0, 1.0, 1.0).unwrap(), PI / 3.0, epsilon = 1e-14);
        let h = PI / 2.0;
        assert_abs_diff_eq!(comparison_angle(Kappa(1.0), h, h, h).unwrap(), PI / 2.0, epsilon = 1e-14);
        let c = 1f64.cosh();
        let s = 1f64.sinh();
        let want = (c * (c - 1.0) / (s * s)).acos();
        assert_abs_diff_eq!(comparison_angle(Kappa(-1.0), 1.0, 1.0, 1.0).unwrap(), want, epsilon = 1e-14);
        assert_abs_diff_eq!(want, 0.9188, epsilon = 1e-4);
    }

    #[test]
    fn angle_errors() {
        assert_eq!(comparison_angle(Kappa(0.0), 0.0, 1.0, 1.0), Err(Error::DegenerateVertex));
        assert!(matches!(comparison_angle(Kappa(1.0), 3.0, 3.0, 0.5), Err(Error::PerimeterTooLarge { .. })));
        assert!(matches!(comparison_angle(Kappa(0.0), 1.0, 1.0, 3.0), Err(Error::TriangleInequality { .. })));
    }

    #[test]
    fn distance_examples() {
        let e = ModelSpace::new(0.0);
        let p = e.point(&[0.0, 0.0]).unwrap();
        let q = e.point(&[3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(e.distance(&p, &q), 5.0);

        let s = ModelSpace::new(1.0);
        let n = s.point(&[0.0, 0.0, 1.0]).unwrap();
        let eq = s.point(&[1.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(s.distance(&n, &eq), PI / 2.0, epsilon = 1e-15);
        let m = s.geodesic(&n, &eq, 0.5).unwrap();
        assert_abs_diff_eq!(s.to_polar(&m).0, PI / 4.0, epsilon = 1e-14);

        let h = ModelSpace::new(-1.0);
        let o = h.point(&[0.0, 0.0, 1.0]).unwrap();
        let q = h.point(&[1f64.sinh(), 0.0, 1f64.cosh()]).unwrap();
        assert_abs_diff_eq!(minkowski(&Vector3::new(0.0, 0.0, 1.0), &Vector3::new(1f64.sinh(), 0.0, 1f64.cosh())), -1f64.cosh());
        assert_abs_diff_eq!(h.distance(&o, &q), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn antipodal_error() {
        let s = ModelSpace::new(1.0);
        let n = s.polar(0.0, 0.0);
        let south = s.polar(PI, 0.0);
        assert!(matches!(s.geodesic(&n, &south, 0.3), Err(Error::AntipodalPoints { .. })));
    }

    #[test]
    fn triangle_examples() {
        let t = build_comparison_triangle(Kappa(0.0), 3.0, 5.0, 4.0).unwrap();
        let d = t.comparison_point(2.5, 2.5).unwrap();
        assert_abs_diff_eq!(t.model.distance(&d, &t.b), 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(t.model.distance(&d, &t.c), 2.5, epsilon = 1e-12);

        let h = PI / 2.0;
        let t = build_comparison_triangle(Kappa(1.0), h, h, h).unwrap();
        let d = t.comparison_point(h / 2.0, h / 2.0).unwrap();
        assert_abs_diff_eq!(t.model.distance(&d, &t.b), PI / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.model.distance(&d, &t.c), PI / 4.0, epsilon = 1e-12);

        let t = build_comparison_triangle(Kappa(-1.0), 1.0, 1.0, 1.0).unwrap();
        let d = t.comparison_point(0.25, 0.75).unwrap();
        assert_abs_diff_eq!(t.model.distance(&d, &t.b), 0.25, epsilon = 1e-10);
        assert_abs_diff_eq!(t.model.distance(&d, &t.c), 0.75, epsilon = 1e-10);
        assert!(matches!(t.comparison_point(0.3, 0.3), Err(Error::NotIntermediate { .. })));
    }
}
