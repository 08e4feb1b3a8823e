//! Sampling harness for triangle comparison, angle monotonicity and the
//! κ-independence of comparison angles.

use rand::RngExt;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{build_comparison_triangle, comparison_angle, Kappa};
use crate::par::{map_indices, sample_rng};
use crate::space::GeodesicSpace;

const MAX_ATTEMPTS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub space: String,
    pub samples: usize,
    pub violations: usize,
    pub worst_slack: f64,
    pub tolerance: f64,
}

impl ComparisonReport {
    pub fn new(space: String, tolerance: f64) -> Self {
        ComparisonReport { space, samples: 0, violations: 0, worst_slack: f64::NEG_INFINITY, tolerance }
    }

    pub fn record(&mut self, slack: f64) {
        self.samples += 1;
        if slack > self.tolerance || slack.is_nan() {
            self.violations += 1;
        }
        if slack > self.worst_slack || slack.is_nan() {
            self.worst_slack = slack;
        }
    }

    pub fn merge(mut self, other: &ComparisonReport) -> Self {
        self.samples += other.samples;
        self.violations += other.violations;
        if other.worst_slack > self.worst_slack {
            self.worst_slack = other.worst_slack;
        }
        self
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// One sample of the four-point comparison: d(a,d) − d_κ(ā,d̄), positive when violated.
fn cat_slack<S: GeodesicSpace>(space: &S, kappa: Kappa, seed: u64, index: usize) -> Result<f64> {
    let mut rng = sample_rng(seed, index as u64);
    let bound = 2.0 * kappa.diam().min(space.curvature_bound().diam());
    for _ in 0..MAX_ATTEMPTS {
        let a = space.sample_point(&mut rng);
        let b = space.sample_point(&mut rng);
        let c = space.sample_point(&mut rng);
        let (ab, bc, ca) = (space.dist(&a, &b), space.dist(&b, &c), space.dist(&c, &a));
        if ab + bc + ca >= bound {
            continue;
        }
        let t: f64 = rng.random();
        let Ok(d) = space.geodesic(&b, &c, t) else { continue };
        let tri = build_comparison_triangle(kappa, ab, bc, ca)?;
        let d_bd = t * bc;
        let dbar = tri.comparison_point(d_bd, bc - d_bd)?;
        return Ok(space.dist(&a, &d) - tri.model.distance(&tri.a, &dbar));
    }
    Err(Error::SamplingFailed { attempts: MAX_ATTEMPTS })
}

pub fn verify_cat<S: GeodesicSpace>(space: &S, kappa: Kappa, n_samples: usize, seed: u64, tol: f64) -> Result<ComparisonReport> {
    let slacks = map_indices(n_samples, |i| cat_slack(space, kappa, seed, i));
    let mut report = ComparisonReport::new(space.name(), tol);
    for s in slacks {
        report.record(s?);
    }
    Ok(report)
}

/// d²(γ_t,y) − (1−t)d²(x₀,y) − t d²(x₁,y) + t(1−t)d²(x₀,x₁) over random tuples; the
/// CAT(0) inequality asks for this to be ≤ 0.
pub fn verify_cat0_inequality<S: GeodesicSpace>(space: &S, n_samples: usize, seed: u64, tol: f64) -> Result<ComparisonReport> {
    let slacks = map_indices(n_samples, |i| -> Result<f64> {
        let mut rng = sample_rng(seed, i as u64);
        for _ in 0..MAX_ATTEMPTS {
            let (x0, x1, y) = (space.sample_point(&mut rng), space.sample_point(&mut rng), space.sample_point(&mut rng));
            let t: f64 = rng.random();
            let Ok(g) = space.geodesic(&x0, &x1, t) else { continue };
            let d2 = |p: &S::Point, q: &S::Point| space.dist(p, q).powi(2);
            return Ok(d2(&g, &y) - (1.0 - t) * d2(&x0, &y) - t * d2(&x1, &y) + t * (1.0 - t) * d2(&x0, &x1));
        }
        Err(Error::SamplingFailed { attempts: MAX_ATTEMPTS })
    });
    let mut report = ComparisonReport::new(space.name(), tol);
    for s in slacks {
        report.record(s?);
    }
    Ok(report)
}

/// Grid of comparison angles ∠̄^κ_x(γ_t, η_s), checked to be non-decreasing in t and s.
pub fn verify_angle_monotonicity<S: GeodesicSpace>(
    space: &S,
    x: &S::Point,
    gamma_target: &S::Point,
    eta_target: &S::Point,
    t_grid: &[f64],
    s_grid: &[f64],
    kappa: Kappa,
    tol: f64,
) -> Result<ComparisonReport> {
    let gs: Vec<S::Point> = t_grid.iter().map(|&t| space.geodesic(x, gamma_target, t)).collect::<Result<_>>()?;
    let es: Vec<S::Point> = s_grid.iter().map(|&s| space.geodesic(x, eta_target, s)).collect::<Result<_>>()?;
    let mut grid = vec![vec![0.0; es.len()]; gs.len()];
    for (i, g) in gs.iter().enumerate() {
        for (j, e) in es.iter().enumerate() {
            grid[i][j] = comparison_angle(kappa, space.dist(x, g), space.dist(x, e), space.dist(g, e))?;
        }
    }
    let mut report = ComparisonReport::new(space.name(), tol);
    for i in 0..gs.len() {
        for j in 0..es.len() {
            if i + 1 < gs.len() {
                report.record(grid[i][j] - grid[i + 1][j]);
            }
            if j + 1 < es.len() {
                report.record(grid[i][j] - grid[i][j + 1]);
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct KappaIndependence {
    pub report: ComparisonReport,
    /// max |∠̄^κ₁ − ∠̄^κ₂| / (d(x,y₁) d(x,y₂)) over the pairs as given
    pub fitted_c: f64,
    /// the same ratio after each halving of the pairs toward x
    pub ratio_by_level: Vec<f64>,
}

/// Fits C on the given pairs, then halves them toward x and counts pairs whose
/// difference exceeds 2C·d(x,y₁)d(x,y₂) + tol.
pub fn verify_kappa_independence<S: GeodesicSpace>(
    space: &S,
    x: &S::Point,
    pairs: &[(S::Point, S::Point)],
    kappa1: Kappa,
    kappa2: Kappa,
    levels: usize,
    tol: f64,
) -> Result<KappaIndependence> {
    if kappa1.value() < kappa2.value() {
        return Err(Error::PreconditionFailed("kappa1 must be at least kappa2".into()));
    }
    let mut diffs = vec![Vec::new(); levels + 1];
    for (y1, y2) in pairs {
        for (lvl, row) in diffs.iter_mut().enumerate() {
            let f = 0.5f64.powi(lvl as i32);
            let a = space.geodesic(x, y1, f)?;
            let b = space.geodesic(x, y2, f)?;
            let (d1, d2, d12) = (space.dist(x, &a), space.dist(x, &b), space.dist(&a, &b));
            if d1 == 0.0 || d2 == 0.0 {
                row.push((0.0, 0.0));
                continue;
            }
            let diff = (comparison_angle(kappa1, d1, d2, d12)? - comparison_angle(kappa2, d1, d2, d12)?).abs();
            row.push((diff, d1 * d2));
        }
    }
    let ratio = |row: &Vec<(f64, f64)>| row.iter().filter(|r| r.1 > 0.0).map(|r| r.0 / r.1).fold(0.0, f64::max);
    let ratio_by_level: Vec<f64> = diffs.iter().map(ratio).collect();
    let fitted_c = ratio_by_level[0];
    let mut report = ComparisonReport::new(space.name(), tol);
    for row in &diffs[1..] {
        for &(diff, prod) in row {
            report.record(diff - 2.0 * fitted_c * prod);
        }
    }
    Ok(KappaIndependence { report, fitted_c, ratio_by_level })
}

/// ∠̄(y0,y2) − ∠̄(y0,y1) − ∠̄(y1,y2) over random quadruples with y0, y1, y2 at a
/// common distance from x.
pub fn verify_angle_triangle<S: GeodesicSpace>(space: &S, kappa: Kappa, n: usize, seed: u64, tol: f64) -> Result<ComparisonReport> {
    angle_triangle(space, kappa, n, seed, tol, true)
}

/// Same with y0, y1, y2 at independent distances. Fails in general, e.g. on a
/// tree with y1 between x and y0; kept as a diagnostic.
pub fn verify_angle_triangle_general<S: GeodesicSpace>(space: &S, kappa: Kappa, n: usize, seed: u64, tol: f64) -> Result<ComparisonReport> {
    angle_triangle(space, kappa, n, seed, tol, false)
}

fn angle_triangle<S: GeodesicSpace>(space: &S, kappa: Kappa, n: usize, seed: u64, tol: f64, equidistant: bool) -> Result<ComparisonReport> {
    let radius = (kappa.diam() / 4.0).min(space.curvature_bound().diam() / 4.0).min(1e3);
    let slacks = map_indices(n, |i| -> Result<f64> {
        let mut rng = sample_rng(seed, i as u64);
        for _ in 0..MAX_ATTEMPTS {
            let x = space.sample_point(&mut rng);
            let mut ys: Vec<S::Point> = (0..3).map(|_| space.sample_near(&x, radius, &mut rng)).collect();
            let ds: Vec<f64> = ys.iter().map(|y| space.dist(&x, y)).collect();
            let dmin = ds.iter().cloned().fold(f64::INFINITY, f64::min);
            if dmin == 0.0 {
                continue;
            }
            if equidistant {
                let r = dmin * (1.0 - rng.random::<f64>());
                for (y, d) in ys.iter_mut().zip(&ds) {
                    *y = space.geodesic(&x, y, r / d)?;
                }
            }
            let ang = |p: &S::Point, q: &S::Point| comparison_angle(kappa, space.dist(&x, p), space.dist(&x, q), space.dist(p, q));
            return Ok(ang(&ys[0], &ys[2])? - ang(&ys[0], &ys[1])? - ang(&ys[1], &ys[2])?);
        }
        Err(Error::SamplingFailed { attempts: MAX_ATTEMPTS })
    });
    let mut report = ComparisonReport::new(space.name(), tol);
    for s in slacks {
        report.record(s?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::EuclideanCone;
    use crate::graph::{GraphPoint, MetricGraph};
    use crate::model::ModelSpace;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn flat_and_tree_have_no_violations() {
        let r = verify_cat(&ModelSpace::new(0.0), Kappa(0.0), 500, 1, 1e-9).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.worst_slack.abs() < 1e-12);
        let r = verify_cat(&MetricGraph::tripod(), Kappa(0.0), 500, 1, 1e-9).unwrap();
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn sphere_against_hyperbolic_comparison_fails() {
        let r = verify_cat(&ModelSpace::new(1.0), Kappa(-1.0), 200, 3, 1e-9).unwrap();
        assert!(r.violations > 0);
    }

    #[test]
    fn report_is_seed_deterministic() {
        let s = ModelSpace::new(-1.0);
        assert_eq!(verify_cat(&s, Kappa(-1.0), 100, 7, 1e-9).unwrap(), verify_cat(&s, Kappa(-1.0), 100, 7, 1e-9).unwrap());
    }

    #[test]
    fn tripod_angles_are_straight() {
        let g = MetricGraph::tripod();
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let r = verify_angle_monotonicity(&g, &GraphPoint::Node(0), &GraphPoint::Node(1), &GraphPoint::Node(2), &grid, &grid, Kappa(0.0), 1e-9)
            .unwrap();
        assert_eq!(r.violations, 0);
        assert_abs_diff_eq!(r.worst_slack, 0.0, epsilon = 1e-12);
        let a = comparison_angle(Kappa(0.0), 0.3, 0.6, 0.9).unwrap();
        assert_abs_diff_eq!(a, PI, epsilon = 1e-7);
    }

    #[test]
    fn hyperbolic_grid_is_monotone() {
        let h = ModelSpace::new(-1.0);
        let x = h.polar(0.3, 0.2);
        let grid: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
        let r = verify_angle_monotonicity(&h, &x, &h.polar(1.5, 1.0), &h.polar(1.2, 2.5), &grid, &grid, Kappa(-1.0), 1e-9).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.samples, 2 * 20 * 19);
    }

    #[test]
    fn kappa_independence_on_sphere() {
        let s = ModelSpace::new(1.0);
        let x = s.origin();
        let pairs: Vec<_> = (0..12).map(|i| (s.polar(0.1, 0.3 * i as f64), s.polar(0.1, 0.3 * i as f64 + 1.0))).collect();
        let k = verify_kappa_independence(&s, &x, &pairs, Kappa(1.0), Kappa(0.0), 5, 1e-12).unwrap();
        assert_eq!(k.report.violations, 0);
        assert!(k.fitted_c > 0.0 && k.fitted_c < 1.0);
        let degenerate = vec![(s.polar(0.1, 0.0), s.polar(0.1, 0.0))];
        let k = verify_kappa_independence(&s, &x, &degenerate, Kappa(1.0), Kappa(0.0), 2, 1e-12).unwrap();
        assert_eq!(k.fitted_c, 0.0);
        let e = ModelSpace::new(0.0);
        let k = verify_kappa_independence(&e, &e.origin(), &pairs_flat(&e), Kappa(0.0), Kappa(0.0), 2, 1e-12).unwrap();
        assert_eq!(k.fitted_c, 0.0);
    }

    fn pairs_flat(e: &ModelSpace) -> Vec<(crate::model::ModelPoint, crate::model::ModelPoint)> {
        vec![(e.polar(1.0, 0.0), e.polar(2.0, 1.0))]
    }

    #[test]
    fn angle_triangle_inequality_everywhere() {
        let cone = EuclideanCone::new(vec![vec![0.0, 2.2, 2.2], vec![2.2, 0.0, 2.2], vec![2.2, 2.2, 0.0]]).unwrap();
        assert_eq!(verify_angle_triangle(&cone, Kappa(0.0), 300, 5, 1e-9).unwrap().violations, 0);
        assert_eq!(verify_angle_triangle(&ModelSpace::new(1.0), Kappa(1.0), 300, 5, 1e-9).unwrap().violations, 0);
        assert_eq!(verify_angle_triangle(&ModelSpace::new(-1.0), Kappa(-1.0), 300, 5, 1e-9).unwrap().violations, 0);
        assert_eq!(verify_angle_triangle(&MetricGraph::tripod(), Kappa(0.0), 300, 5, 1e-9).unwrap().violations, 0);
        assert!(verify_angle_triangle_general(&MetricGraph::tripod(), Kappa(0.0), 300, 5, 1e-9).unwrap().violations > 0);
    }
}
