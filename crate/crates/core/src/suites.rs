//! Check suites shared by the command-line tool and the acceptance tests.

use rand::RngExt;

use crate::barycenter::{jensen_check, rigidity_check, solve_barycenter, variance_certificate, DiscreteMeasure, SolverOptions};
use crate::cone::{ConePoint, EuclideanCone};
use crate::curves::SampledCurve;
use crate::graph::{GraphPoint, MetricGraph};
use crate::transport::{
    apply, current_from_derivation, EdgeFn, derivation_norm, derivation_norm_via_landmarks, superpose, EdgeFlow, FlowPath, PathDecomposition,
    PlFunction, Product, TieBreak, WeightedGraph,
};
use crate::comparison::{
    verify_angle_monotonicity, verify_angle_triangle, verify_angle_triangle_general, verify_kappa_independence, verify_cat, verify_cat0_inequality, ComparisonReport};
use crate::error::{Error, Result};
use crate::embedding::{
    build_embedding, fibre, hilbertianity_report, tie_break_gap, verify_linearity, verify_section, EmbeddingOptions, BACKWARD, FORWARD,
};
use crate::instances::{bundled_random_tree, Instance, SpaceVisitor};
use crate::model::{Kappa, ModelSpace};
use crate::par::{map_indices, sample_rng};
use crate::report::{Check, Report, Worst};
use crate::space::GeodesicSpace;
use crate::tangent::{
    angle, cone_metric, exact_angle, exact_cone_metric, exact_oplus_norm, first_variation, norm, oplus, random_tangent,
    scalar_product, tangent_distance, tangent_norm, tangent_product, Tangent, TangentVector,
};

fn comparison_check(label: &str, r: &ComparisonReport) -> Check {
    let slack = if r.samples == 0 { 0.0 } else { r.worst_slack };
    Check { name: format!("{label} [{} samples, {} violations]", r.samples, r.violations), slack, tol: r.tolerance, pass: r.passed() }
}

/// CAT(κ) four-point comparison against the instance's own curvature bound, plus the
/// CAT(0) inequality where κ ≤ 0 and the equidistant angle triangle inequality.
pub struct CatSuite {
    pub n: usize,
    pub seed: u64,
    pub tol: f64,
    pub kappa: Option<f64>,
}

impl SpaceVisitor for CatSuite {
    type Output = Result<Report>;
    fn visit<S: GeodesicSpace>(self, space: &S) -> Result<Report> {
        let kappa = self.kappa.map(Kappa).unwrap_or(space.curvature_bound());
        let mut report = Report::new();
        let name = space.name();
        let r = verify_cat(space, kappa, self.n, self.seed, self.tol)?;
        report.push(comparison_check(&format!("cat comparison {name} vs kappa={}", kappa.value()), &r));
        if self.kappa.is_none() && kappa.value() <= 0.0 {
            let r = verify_cat0_inequality(space, self.n, self.seed ^ 0x5eed, self.tol)?;
            report.push(comparison_check(&format!("cat(0) inequality {name}"), &r));
        }
        let r = verify_angle_triangle(space, kappa, self.n.min(1000), self.seed ^ 0xa9, self.tol)?;
        report.push(comparison_check(&format!("angle triangle inequality {name}"), &r));
        Ok(report)
    }
}

pub fn cat_suite(n: usize, seed: u64, tol: f64, negative_control: bool) -> Result<Report> {
    let mut report = Report::new();
    for inst in Instance::ALL {
        report.extend(inst.build().visit(CatSuite { n, seed, tol, kappa: None })?);
    }
    if negative_control {
        report.extend(negative_control_cat(n, seed, tol)?);
    }
    Ok(report)
}

/// Sphere samples compared against the hyperbolic plane must produce violations.
pub fn negative_control_cat(n: usize, seed: u64, tol: f64) -> Result<Report> {
    let r = Instance::Sphere.build().visit(CatSuite { n, seed, tol, kappa: Some(-1.0) })?;
    let violations = r.checks[0].clone();
    let mut report = Report::new();
    report.push(Check::flag(format!("negative control: sphere vs kappa=-1 reports violations ({})", violations.name), !violations.pass));
    Ok(report)
}

/// Monotonicity of comparison angles along pairs of geodesics, κ-independence of the
/// angle at small scales, and the equidistant angle triangle inequality.
pub struct AnglesSuite {
    pub n: usize,
    pub seed: u64,
    pub tol: f64,
}

impl SpaceVisitor for AnglesSuite {
    type Output = Result<Report>;
    fn visit<S: GeodesicSpace>(self, space: &S) -> Result<Report> {
        let kappa = space.curvature_bound();
        let name = space.name();
        let grid: Vec<f64> = (1..=8).map(|k| k as f64 / 8.0).collect();
        let rows = map_indices(self.n, |i| -> Result<(ComparisonReport, ComparisonReport)> {
            let mut rng = sample_rng(self.seed ^ 0xa11, i as u64);
            let x = space.sample_base_point(&mut rng);
            let r = 0.5 * space.cat_radius(&x).min(1.0);
            let (g, e) = (space.sample_near(&x, r, &mut rng), space.sample_near(&x, r, &mut rng));
            let r = r.min(0.5 * space.regular_radius(&x));
            let mono = verify_angle_monotonicity(space, &x, &g, &e, &grid, &grid, kappa, self.tol)?;
            let pairs: Vec<_> = (0..8).map(|_| (space.sample_near(&x, r, &mut rng), space.sample_near(&x, r, &mut rng))).collect();
            let k1 = Kappa(kappa.value().max(0.0));
            let ind = verify_kappa_independence(space, &x, &pairs, k1, Kappa(k1.value() - 1.0), 4, self.tol)?;
            Ok((mono, ind.report))
        });
        let mut mono = ComparisonReport::new(name.clone(), self.tol);
        let mut ind = ComparisonReport::new(name.clone(), self.tol);
        for row in rows {
            let (m, k) = row?;
            mono = mono.merge(&m);
            ind = ind.merge(&k);
        }
        let mut report = Report::new();
        report.push(comparison_check(&format!("comparison angle monotonicity {name}"), &mono));
        report.push(comparison_check(&format!("kappa-independence of small comparison angles {name}"), &ind));
        let tri = verify_angle_triangle(space, kappa, self.n, self.seed ^ 0xa9, self.tol)?;
        report.push(comparison_check(&format!("angle triangle inequality {name}"), &tri));
        Ok(report)
    }
}

pub fn angles_suite(n: usize, seed: u64, tol: f64) -> Result<Report> {
    let mut report = Report::new();
    for inst in Instance::ALL {
        report.extend(inst.build().visit(AnglesSuite { n, seed, tol })?);
    }
    Ok(report)
}

#[derive(Default)]
struct CalculusSample {
    homogeneity: f64,
    cosine_law_exact: Option<f64>,
    angle_formula: Option<f64>,
    product_homogeneity: f64,
    cauchy_schwarz: f64,
    equality_case: Option<f64>,
    parallelogram: f64,
    oplus_exact: Option<f64>,
    metric_exact: Option<f64>,
    tangent_cat0: f64,
}

fn calculus_sample<S: GeodesicSpace>(space: &S, seed: u64, i: usize) -> Result<CalculusSample> {
    let mut rng = sample_rng(seed, i as u64);
    let x = space.sample_base_point(&mut rng);
    let v = random_tangent(space, &x, &mut rng);
    let w = if i % 4 == 3 && norm(space, &v) > 0.0 {
        // aligned pair, exercising the equality case of Cauchy–Schwarz
        let y = space.geodesic(&x, &v.target, rng.random_range(0.1..1.0))?;
        TangentVector { base: x.clone(), target: y, scale: rng.random_range(0.2..2.0) }
    } else {
        random_tangent(space, &x, &mut rng)
    };
    let u = random_tangent(space, &x, &mut rng);
    let lambda: f64 = rng.random_range(0.0..3.0);
    let (nv, nw) = (norm(space, &v), norm(space, &w));
    let zero = TangentVector::zero(x.clone());
    let mut s = CalculusSample {
        homogeneity: (cone_metric(space, &v.scaled(lambda), &zero)?.value - lambda * nv).abs(),
        ..Default::default()
    };
    let d = cone_metric(space, &v, &w)?.value;
    let p = scalar_product(space, &v, &w)?;
    if let Some(th) = exact_angle(space, &v, &w) {
        s.cosine_law_exact = Some((d * d - (nv * nv + nw * nw - 2.0 * nv * nw * th.cos())).abs());
    }
    if nv > 0.0 && nw > 0.0 {
        let th = angle(space, &v, &w)?.value;
        s.angle_formula = Some((p - nv * nw * th.cos()).abs());
    }
    s.product_homogeneity = (scalar_product(space, &v.scaled(lambda), &w)? - lambda * p).abs();
    s.cauchy_schwarz = p.abs() - nv * nw;
    // |⟨v,w⟩ − |v||w|| ≤ δ only forces d(|w|v, |v|w) ≤ √(2|v||w|δ), so that part is
    // discounted before comparing with the tolerance
    let delta = 1e-8;
    if (p - nv * nw).abs() <= delta {
        let d_eq = cone_metric(space, &v.scaled(nw), &w.scaled(nv))?.value;
        s.equality_case = Some(d_eq - (2.0 * nv * nw * delta).sqrt());
    }
    let sum = oplus(&v, &w);
    let ns = tangent_norm(space, &sum)?;
    s.parallelogram = d * d + ns * ns - 2.0 * (nv * nv + nw * nw);
    s.oplus_exact = exact_oplus_norm(space, &v, &w).map(|e| (e - ns).abs());
    s.metric_exact = exact_cone_metric(space, &v, &w).map(|e| (e - d).abs());
    // four-point CAT(0) inequality in the tangent cone with m = ½(v ⊕ w), the midpoint of v and w
    let m = sum.scaled(0.5);
    let uu: Tangent<S::Point> = u.clone().into();
    let dum = tangent_distance(space, &uu, &m)?;
    let duv = cone_metric(space, &u, &v)?.value;
    let duw = cone_metric(space, &u, &w)?.value;
    s.tangent_cat0 = dum * dum - (0.5 * duv * duv + 0.5 * duw * duw - 0.25 * d * d);
    Ok(s)
}

/// Cone calculus identities and inequalities on random tangent pairs.
pub struct CalculusSuite {
    pub n: usize,
    pub seed: u64,
    pub tol: f64,
}

impl SpaceVisitor for CalculusSuite {
    type Output = Result<Report>;
    fn visit<S: GeodesicSpace>(self, space: &S) -> Result<Report> {
        let samples = map_indices(self.n, |i| calculus_sample(space, self.seed, i));
        let name = space.name();
        let tol = self.tol;
        let mut w: Vec<Worst> = [
            ("|lambda v| = lambda |v|", tol),
            ("cosine law against closed-form angle", tol),
            ("<v,w> = |v||w| cos angle", tol),
            ("<lambda v,w> = lambda <v,w>", tol),
            ("|<v,w>| <= |v||w|", tol),
            ("equality case: d(|w|v, |v|w)", 1e-6),
            ("d^2(v,w) + |v+w|^2 <= 2|v|^2 + 2|w|^2", tol),
            ("oplus norm against closed form", tol),
            ("cone metric against closed form", tol),
            ("tangent cone four-point cat(0)", 1e-7),
        ]
        .into_iter()
        .map(|(n, t)| Worst::new(format!("{n} {name}"), t))
        .collect();
        for s in samples {
            let s = s?;
            w[0].see(s.homogeneity);
            if let Some(v) = s.cosine_law_exact {
                w[1].see(v);
            }
            if let Some(v) = s.angle_formula {
                w[2].see(v);
            }
            w[3].see(s.product_homogeneity);
            w[4].see(s.cauchy_schwarz);
            if let Some(v) = s.equality_case {
                w[5].see(v);
            }
            w[6].see(s.parallelogram);
            if let Some(v) = s.oplus_exact {
                w[7].see(v);
            }
            if let Some(v) = s.metric_exact {
                w[8].see(v);
            }
            w[9].see(s.tangent_cat0);
        }
        let mut report = Report::new();
        for x in &w {
            report.push(x.check());
        }
        Ok(report)
    }
}

/// First variation against scalar products and against finite differences of distances.
pub struct FirstVariationSuite {
    pub n: usize,
    pub seed: u64,
    pub tol: f64,
}

fn first_variation_sample<S: GeodesicSpace>(space: &S, seed: u64, i: usize) -> Result<(f64, f64)> {
    let mut rng = sample_rng(seed, i as u64);
    let x = space.sample_base_point(&mut rng);
    let mut v = random_tangent(space, &x, &mut rng);
    if norm(space, &v) == 0.0 {
        v = random_tangent(space, &x, &mut rng);
    }
    let mut y = random_tangent(space, &x, &mut rng).target;
    while space.dist(&x, &y) == 0.0 {
        y = random_tangent(space, &x, &mut rng).target;
    }
    let fv = first_variation(space, &v, &y)?;
    let eta = TangentVector { base: x.clone(), target: y.clone(), scale: 1.0 };
    let sp = scalar_product(space, &v, &eta)?;
    // second-order one-sided difference of t ↦ d(γ_t, y)
    let len = space.dist(&x, &y);
    let nv = norm(space, &v);
    if nv == 0.0 {
        return Ok(((fv - sp).abs(), fv.abs()));
    }
    let h = 1e-5 * (1.0 / v.scale).min(len / nv).min(space.cat_radius(&x) / nv);
    let f = |t: f64| -> Result<f64> { Ok(space.dist(&space.geodesic(&x, &v.target, v.scale * t)?, &y)) };
    let fd = (-3.0 * len + 4.0 * f(h)? - f(2.0 * h)?) / (2.0 * h);
    Ok(((fv - sp).abs(), (fv + len * fd).abs()))
}

impl SpaceVisitor for FirstVariationSuite {
    type Output = Result<Report>;
    fn visit<S: GeodesicSpace>(self, space: &S) -> Result<Report> {
        let name = space.name();
        let mut a = Worst::new(format!("first variation = <v, eta'> {name}"), self.tol);
        let mut b = Worst::new(format!("first variation = finite difference {name}"), self.tol);
        for s in map_indices(self.n, |i| first_variation_sample(space, self.seed, i)) {
            let (x, y) = s?;
            a.see(x);
            b.see(y);
        }
        let mut report = Report::new();
        report.push(a.check());
        report.push(b.check());
        Ok(report)
    }
}

pub fn cone_calculus_suite(n: usize, seed: u64, tol: f64) -> Result<Report> {
    let mut report = Report::new();
    for inst in Instance::ALL {
        report.extend(inst.build().visit(CalculusSuite { n, seed, tol })?);
    }
    Ok(report)
}

pub fn first_variation_suite(n: usize, seed: u64, tol: f64) -> Result<Report> {
    let mut report = Report::new();
    for inst in Instance::ALL {
        report.extend(inst.build().visit(FirstVariationSuite { n, seed, tol })?);
    }
    Ok(report)
}

/// A random piecewise-geodesic curve: a short random walk with jittered knot times.
fn random_curve<S: GeodesicSpace>(space: &S, seed: u64, i: usize, pieces: usize) -> Result<SampledCurve<S::Point>> {
    let mut rng = sample_rng(seed, i as u64);
    let mut p = space.sample_point(&mut rng);
    let mut points = vec![p.clone()];
    while points.len() <= pieces {
        let r = (space.cat_radius(&p) / 2.0).min(0.8);
        let q = space.sample_near(&p, r, &mut rng);
        if space.dist(&p, &q) > 1e-3 {
            points.push(q.clone());
            p = q;
        }
    }
    let mut times: Vec<f64> = (0..=pieces).map(|k| (k as f64 + rng.random_range(-0.3..0.3)) / pieces as f64).collect();
    times[0] = 0.0;
    times[pieces] = 1.0;
    SampledCurve::new(times, points)
}

/// A time of c away from its knots.
fn off_knot<P: Clone>(c: &SampledCurve<P>, u: f64) -> f64 {
    let ts = c.times();
    let n = ts.len() - 1;
    let i = ((u * n as f64) as usize).min(n - 1);
    ts[i] + (ts[i + 1] - ts[i]) * (0.1 + 0.8 * u.fract())
}

/// Antipodality, speed and reparametrization invariants, the angle condition and, on
/// CAT(0) instances, the chain rule for a distance function.
pub struct CurvesSuite {
    pub n: usize,
    pub seed: u64,
    pub tol: f64,
}

#[derive(Default)]
struct CurveSample {
    antipodality: f64,
    length_invariance: f64,
    constant_speed: f64,
    angle_condition: f64,
    chain_rule: Option<f64>,
}

fn curve_sample<S: GeodesicSpace>(space: &S, seed: u64, i: usize) -> Result<CurveSample> {
    let c = random_curve(space, seed, i, 6)?;
    let mut rng = sample_rng(seed ^ 0xc0, i as u64);
    let t = off_knot(&c, rng.random::<f64>());
    let len = c.length(space);
    let r = c.const_speed_reparam(space)?;
    let speeds = r.speed_profile(space).speeds;
    let mut s = CurveSample {
        antipodality: c.check_antipodality(space, t)?.defect,
        length_invariance: (r.length(space) - len).abs(),
        constant_speed: speeds.iter().map(|v| (v - len).abs()).fold(0.0, f64::max),
        angle_condition: c.angle_condition(space, t, 12)?,
        ..Default::default()
    };
    if space.curvature_bound().value() <= 0.0 {
        let y = space.sample_point(&mut rng);
        let x = c.eval(space, t)?;
        if space.dist(&x, &y) > 1e-3 {
            s.chain_rule = Some(c.chain_rule_defect(space, t, |p| space.dist(p, &y), 0.0)?);
        }
    }
    Ok(s)
}

impl SpaceVisitor for CurvesSuite {
    type Output = Result<Report>;
    fn visit<S: GeodesicSpace>(self, space: &S) -> Result<Report> {
        let name = space.name();
        let mut w = [
            Worst::new(format!("antipodality defect off knots {name}"), 1e-6),
            Worst::new(format!("length invariant under reparametrization {name}"), self.tol),
            Worst::new(format!("constant speed after reparametrization {name}"), 1e-10),
            Worst::new(format!("angle condition off knots {name}"), 1e-4),
            Worst::new(format!("chain rule for distance functions {name}"), 1e-7),
        ];
        for s in map_indices(self.n, |i| curve_sample(space, self.seed, i)) {
            let s = s?;
            w[0].see(s.antipodality);
            w[1].see(s.length_invariance);
            w[2].see(s.constant_speed);
            w[3].see(s.angle_condition);
            if let Some(v) = s.chain_rule {
                w[4].see(v);
            }
        }
        let mut report = Report::new();
        for x in &w {
            if x.count() > 0 {
                report.push(x.check());
            }
        }
        Ok(report)
    }
}

/// Smooth circle sampled finely, and the corner of an L-shaped polyline, which must
/// be reported as far from antipodal.
pub fn circle_and_corner(n: usize, seed: u64) -> Result<Report> {
    let e = ModelSpace::new(0.0);
    let pt = |x: f64, y: f64| e.point(&[x, y]);
    let circle = SampledCurve::from_fn(2000, |t| {
        let a = std::f64::consts::TAU * t;
        pt(a.cos(), a.sin()).expect("planar point")
    })?;
    let mut rng = sample_rng(seed, u64::MAX);
    let mut smooth = Worst::new("antipodality on a finely sampled circle".to_string(), 1e-6);
    for _ in 0..n {
        let t = off_knot(&circle, rng.random::<f64>());
        smooth.see(circle.check_antipodality(&e, t)?.defect);
    }
    let corner = SampledCurve::uniform(vec![pt(0.0, 0.0)?, pt(1.0, 0.0)?, pt(1.0, 1.0)?])?;
    let k = corner.check_antipodality(&e, 0.5)?;
    let mut report = Report::new();
    report.push(smooth.check());
    report.push(Check {
        name: format!("negative control: polyline corner defect {:.6} flagged at knot", k.defect),
        slack: 0.1 - k.defect,
        tol: 0.0,
        pass: k.at_knot && k.defect > 0.1,
    });
    Ok(report)
}

pub fn curves_suite(n: usize, seed: u64, tol: f64) -> Result<Report> {
    let mut report = Report::new();
    for inst in Instance::ALL {
        report.extend(inst.build().visit(CurvesSuite { n, seed, tol })?);
    }
    report.extend(circle_and_corner(n, seed)?);
    Ok(report)
}

fn random_measure<S: GeodesicSpace>(space: &S, seed: u64, i: usize) -> Result<DiscreteMeasure<S::Point>> {
    let mut rng = sample_rng(seed, i as u64);
    let n = rng.random_range(2..9);
    DiscreteMeasure::new((0..n).map(|_| (space.sample_point(&mut rng), rng.random_range(0.1..3.0))).collect())
}

struct BarycenterSample {
    certificate: f64,
    gap: f64,
    jensen: f64,
    inductive: f64,
}

fn barycenter_sample<S: GeodesicSpace>(space: &S, seed: u64, i: usize, probes: usize) -> Result<BarycenterSample> {
    let mu = random_measure(space, seed, i)?;
    let r = solve_barycenter(space, &mu, &SolverOptions { seed: seed ^ i as u64, ..Default::default() })?;
    let mut rng = sample_rng(seed ^ 0xba, i as u64);
    let ps: Vec<S::Point> = (0..probes)
        .map(|k| if k % 2 == 0 { space.sample_point(&mut rng) } else { space.sample_near(&r.point, 0.1, &mut rng) })
        .collect();
    let q = space.sample_point(&mut rng);
    Ok(BarycenterSample {
        certificate: variance_certificate(space, &mu, &r.point, &ps),
        gap: r.gap_bound,
        jensen: jensen_check(space, &mu, |x| space.dist(x, &q), &r.point)?,
        inductive: r.inductive_distance,
    })
}

/// Random measures: variance certificate over probes, descent gap, Jensen for a distance
/// function, and agreement of inductive means with the closed form.
pub struct BarycenterSuite {
    pub n: usize,
    pub seed: u64,
    pub probes: usize,
}

impl SpaceVisitor for BarycenterSuite {
    type Output = Result<Report>;
    fn visit<S: GeodesicSpace>(self, space: &S) -> Result<Report> {
        let name = space.name();
        let mut w = [
            Worst::new(format!("variance certificate, {} probes per solve {name}", self.probes), 1e-9),
            Worst::new(format!("descent gap at returned barycenter {name}"), 1e-12),
            Worst::new(format!("jensen for a distance function {name}"), 1e-9),
            Worst::new(format!("inductive means vs closed form {name}"), 5e-2),
        ];
        for s in map_indices(self.n, |i| barycenter_sample(space, self.seed, i, self.probes)) {
            let s = s?;
            w[0].see(-s.certificate);
            w[1].see(s.gap);
            w[2].see(-s.jensen);
            w[3].see(s.inductive);
        }
        let mut report = Report::new();
        for x in &w {
            report.push(x.check());
        }
        Ok(report)
    }
}

/// Closed-form oracles: the tripod hub, weighted means in the plane and on a line,
/// ray scaling in a cone, and refusal on the sphere.
pub fn barycenter_oracles(n: usize, seed: u64) -> Result<Report> {
    let opts = SolverOptions::default();
    let mut report = Report::new();
    let g = MetricGraph::tripod();
    let mu = DiscreteMeasure::uniform((1..4).map(GraphPoint::Node).collect())?;
    let hub = solve_barycenter(&g, &mu, &opts)?.point;
    report.push(Check::new("tripod uniform leg ends: barycenter is the hub", g.dist(&hub, &GraphPoint::Node(0)), 1e-8));

    let e = ModelSpace::new(0.0);
    let mut mean = Worst::new("euclidean barycenter vs weighted mean", 1e-10);
    let mut line = Worst::new("barycenter on a segment vs quadratic minimizer", 1e-8);
    let mut scaling = Worst::new("cone barycenter commutes with ray scaling", 1e-8);
    let cone = EuclideanCone::spider(3);
    for i in 0..n {
        let mut rng = sample_rng(seed ^ 0x1d, i as u64);
        let k = rng.random_range(1..10);
        let atoms: Vec<([f64; 2], f64)> =
            (0..k).map(|_| ([rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)], rng.random_range(0.1..2.0))).collect();
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let want = [0, 1].map(|j| atoms.iter().map(|(c, w)| c[j] * w).sum::<f64>() / total);
        let mu = DiscreteMeasure::new(atoms.iter().map(|(c, w)| Ok((e.point(c)?, *w))).collect::<Result<Vec<_>>>()?)?;
        let got = solve_barycenter(&e, &mu, &opts)?.point.coords();
        mean.see((got[0] - want[0]).hypot(got[1] - want[1]));

        // atoms on a single edge of length L: minimizer of Σ w (s − x)² is the weighted mean
        let len = rng.random_range(0.5..4.0);
        let seg = MetricGraph::from_named(&["u", "v"], &[("u", "v", len)])?;
        let xs: Vec<(f64, f64)> = (0..k).map(|_| (rng.random_range(0.0..len), rng.random_range(0.1..2.0))).collect();
        let s_star = xs.iter().map(|(x, w)| x * w).sum::<f64>() / xs.iter().map(|a| a.1).sum::<f64>();
        let mu = DiscreteMeasure::new(xs.iter().map(|&(x, w)| (seg.on_edge(0, x), w)).collect())?;
        let b = solve_barycenter(&seg, &mu, &opts)?.point;
        line.see((seg.dist(&GraphPoint::Node(0), &b) - s_star).abs());

        let leg = rng.random_range(0..3);
        let mu = DiscreteMeasure::new((0..k).map(|_| (cone.point(rng.random_range(0.0..3.0), leg), rng.random_range(0.1..2.0))).collect())?;
        let lambda = rng.random_range(0.1..5.0);
        let b = solve_barycenter(&cone, &mu, &opts)?.point;
        let bs = solve_barycenter(&cone, &mu.map(|p| cone.scale(lambda, p)), &opts)?.point;
        scaling.see(cone.dist(&bs, &cone.scale(lambda, &b)));
    }
    report.push(mean.check());
    let seg = MetricGraph::from_named(&["u", "v"], &[("u", "v", 1.0)])?;
    let mu = DiscreteMeasure::new(vec![(GraphPoint::Node(0), 0.7), (GraphPoint::Node(1), 0.3)])?;
    let b = solve_barycenter(&seg, &mu, &opts)?.point;
    report.push(Check::new("weights 0.7/0.3 on a unit edge: 0.3 from the heavy atom", (seg.dist(&GraphPoint::Node(0), &b) - 0.3).abs(), 1e-8));
    report.push(line.check());
    report.push(scaling.check());

    let a = GraphPoint::Node(1);
    let mu = DiscreteMeasure::uniform((1..4).map(GraphPoint::Node).collect())?;
    let cert = variance_certificate(&g, &mu, &hub, &[a]);
    report.push(Check::new("tripod certificate at a leg end equals 2/3", (cert - 2.0 / 3.0).abs(), 1e-12));
    let rig = rigidity_check(&g, &mu, &hub, &a, 1e-9);
    report.push(Check::flag("tripod rigidity not triggered from a leg end", !rig.triggered));
    let mu = DiscreteMeasure::new(vec![(cone.point(1.0, 0), 1.0), (cone.point(3.0, 0), 2.0)])?;
    let b = solve_barycenter(&cone, &mu, &opts)?.point;
    let rig = rigidity_check(&cone, &mu, &b, &ConePoint::apex(), 1e-9);
    report.push(Check::new("rigidity on one ray from the apex", if rig.triggered { rig.halfline_defect } else { f64::INFINITY }, 1e-9));

    let s = ModelSpace::new(1.0);
    let mu = DiscreteMeasure::uniform(vec![s.polar(0.3, 0.0), s.polar(0.3, 2.0)])?;
    report.push(Check::flag("sphere refused as not cat(0)", matches!(solve_barycenter(&s, &mu, &opts), Err(Error::NotCat0 { .. }))));
    Ok(report)
}

pub fn barycenter_suite(n: usize, seed: u64) -> Result<Report> {
    let mut report = barycenter_oracles(n, seed)?;
    for inst in Instance::ALL {
        if inst == Instance::Sphere {
            continue;
        }
        report.extend(inst.build().visit(BarycenterSuite { n, seed, probes: 100 })?);
    }
    Ok(report)
}

fn random_weighted_graph<R: rand::Rng + ?Sized>(rng: &mut R) -> WeightedGraph {
    let n = rng.random_range(4..12);
    let extra = rng.random_range(0..4);
    let g = MetricGraph::random_connected(n, extra, rng);
    let density = (0..g.edges().len()).map(|_| rng.random_range(0.5..2.0)).collect();
    WeightedGraph::new(g, density).expect("random densities are positive")
}

#[derive(Default)]
struct TransportSample {
    mass: f64,
    boundary: f64,
    eval: f64,
    total_mass: f64,
    leibniz: f64,
    landmark_gap: f64,
    landmark_excess: f64,
}

fn transport_sample(seed: u64, i: usize, pairs: usize) -> Result<TransportSample> {
    let mut rng = sample_rng(seed, i as u64);
    let wg = random_weighted_graph(&mut rng);
    let g = &wg.graph;
    let b = EdgeFlow::random(g, &mut rng);
    let tie = if i % 2 == 0 { TieBreak::Lexicographic } else { TieBreak::Reverse };
    let d = superpose(g, &b, tie)?;
    let t = current_from_derivation(&wg, &b);
    let mut s = TransportSample::default();
    for (m, f) in d.edge_mass(g).iter().zip(&b.flow) {
        s.mass = s.mass.max((m - f.abs()).abs());
    }
    for (x, y) in d.endpoint_balance(g.n_nodes()).iter().zip(t.boundary()) {
        s.boundary = s.boundary.max((x - y).abs());
    }
    let path_mass: f64 = d.paths.iter().chain(&d.cycles).map(|p| p.weight * p.length(g)).sum();
    s.total_mass = (path_mass - t.mass()).abs() / (1.0 + t.mass());
    for _ in 0..pairs {
        let (gf, ff) = (PlFunction::random(g, &mut rng), PlFunction::random(g, &mut rng));
        let lhs = t.eval(&gf, &ff)?;
        s.eval = s.eval.max((lhs - d.eval(g, &gf, &ff)?).abs());
    }
    let (f, h) = (PlFunction::random(g, &mut rng), PlFunction::random(g, &mut rng));
    // well spread: random points plus a grid at tenths of every edge
    let mut landmarks: Vec<GraphPoint> = (0..30).map(|_| g.sample_point(&mut rng)).collect();
    for (k, e) in g.edges().iter().enumerate() {
        landmarks.extend((0..=10).map(|j| g.on_edge(k, e.len * j as f64 / 10.0)));
    }
    for _ in 0..100 {
        let e = rng.random_range(0..g.edges().len());
        let x = g.on_edge(e, g.edges()[e].len * rng.random_range(0.01..0.99));
        let lhs = apply(&wg, &b, &Product(&f, &h), &x)?;
        let rhs = f.at(g, &x) * apply(&wg, &b, &h, &x)? + h.at(g, &x) * apply(&wg, &b, &f, &x)?;
        s.leibniz = s.leibniz.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
        let exact = derivation_norm(&wg, &b, &x)?;
        let lm = derivation_norm_via_landmarks(&wg, &b, &x, &landmarks)?;
        s.landmark_gap = s.landmark_gap.max(exact - lm);
        s.landmark_excess = s.landmark_excess.max(lm - exact);
    }
    Ok(s)
}

/// Superposition of random flows on random graphs: per-edge mass, boundary, total mass
/// and current evaluations; plus the Leibniz rule and landmark norms.
pub fn transport_suite(n: usize, seed: u64, pairs: usize) -> Result<Report> {
    let mut w = [
        Worst::new("superposition per-edge mass equals |flow|", 1e-12),
        Worst::new("superposition endpoints match the boundary", 1e-12),
        Worst::new("current evaluation: sum of path currents vs T_b", 1e-9),
        Worst::new("total mass of the decomposition equals M(T_b), relative", 1e-12),
        Worst::new("leibniz rule at interior points, relative", 1e-12),
        Worst::new("landmark norm within 5e-2 below |b|", 5e-2),
        Worst::new("landmark norm never exceeds |b|", 1e-12),
    ];
    for s in map_indices(n, |i| transport_sample(seed, i, pairs)) {
        let s = s?;
        for (k, v) in [s.mass, s.boundary, s.eval, s.total_mass, s.leibniz, s.landmark_gap, s.landmark_excess].into_iter().enumerate() {
            w[k].see(v);
        }
    }
    let mut report = Report::new();
    for x in &w {
        report.push(x.check());
    }
    // a decomposition that ignores orientation has cancellation, so the mass identity must fail
    let g = MetricGraph::from_named(&["u", "v"], &[("u", "v", 1.0)])?;
    let forth_and_back = PathDecomposition {
        paths: vec![
            FlowPath { nodes: vec![0, 1], steps: vec![(0, true)], weight: 1.0 },
            FlowPath { nodes: vec![1, 0], steps: vec![(0, false)], weight: 0.5 },
        ],
        cycles: vec![],
    };
    let excess = forth_and_back.edge_mass(&g)[0] - 0.5;
    report.push(Check::flag(format!("negative control: cancelling decomposition overshoots mass by {excess}"), excess > 0.1));
    Ok(report)
}

/// The bundled 15-edge tree with unit density, plus a random graph with cycles and
/// random densities.
fn embedding_carriers(seed: u64) -> Vec<WeightedGraph> {
    let mut rng = sample_rng(seed, 0xe5);
    vec![WeightedGraph::unit(bundled_random_tree()), random_weighted_graph(&mut rng)]
}

/// Sections of random flows: differential and norm identities, rigidity, tie-break
/// independence; and a cancelling fibre measure that rigidity must reject.
pub fn embedding_suite(n_flows: usize, seed: u64, landmarks: usize) -> Result<Report> {
    let mut report = Report::new();
    for wg in embedding_carriers(seed) {
        let g = &wg.graph;
        let name = g.name();
        let mut worst: Vec<Worst> = Vec::new();
        let mut tie = Worst::new(format!("tie-break independence {name}"), 1e-7);
        for i in 0..n_flows {
            let mut rng = sample_rng(seed ^ 0xf1, i as u64);
            let b = EdgeFlow::random(g, &mut rng);
            let lm: Vec<GraphPoint> = (0..landmarks).map(|_| g.sample_point(&mut rng)).collect();
            let s = build_embedding(&wg, &b, &EmbeddingOptions::default())?;
            let r = verify_section(&wg, &b, &s, &lm)?;
            if worst.is_empty() {
                worst = r.checks.iter().map(|c| Worst::new(format!("{} {name}", c.name), c.tol)).collect();
            }
            for (w, c) in worst.iter_mut().zip(&r.checks) {
                w.see(c.slack);
            }
            tie.see(tie_break_gap(&wg, &b, 9)?);
        }
        for w in &worst {
            report.push(w.check());
        }
        report.push(tie.check());
    }
    let cone = fibre();
    let cancelling = DiscreteMeasure::new(vec![(cone.point(1.0, FORWARD), 1.0), (cone.point(1.0, BACKWARD), 0.5)])?;
    let bar = solve_barycenter(&cone, &cancelling, &SolverOptions::default())?.point;
    let rig = rigidity_check(&cone, &cancelling, &bar, &ConePoint::apex(), 1e-9);
    report.push(Check::flag("negative control: opposite atoms fail the half-line condition", !rig.triggered || rig.halfline_defect > 1e-3));
    Ok(report)
}

/// Parallelogram law for random flow pairs on the 15-edge tree, and the pointwise
/// linearity identities for the same pairs.
pub fn hilbert_suite(n_pairs: usize, seed: u64) -> Result<(Report, Vec<(String, usize)>)> {
    let wg = WeightedGraph::unit(bundled_random_tree());
    hilbert_suite_on(&wg, n_pairs, seed)
}

pub fn hilbert_suite_on(wg: &WeightedGraph, n_pairs: usize, seed: u64) -> Result<(Report, Vec<(String, usize)>)> {
    let g = &wg.graph;
    let pairs: Vec<(EdgeFlow, EdgeFlow)> = (0..n_pairs)
        .map(|i| {
            let mut rng = sample_rng(seed ^ 0x41, i as u64);
            (EdgeFlow::random(g, &mut rng), EdgeFlow::random(g, &mut rng))
        })
        .collect();
    hilbert_pairs(wg, &pairs)
}

pub fn hilbert_pairs(wg: &WeightedGraph, pairs: &[(EdgeFlow, EdgeFlow)]) -> Result<(Report, Vec<(String, usize)>)> {
    let opts = EmbeddingOptions::default();
    let h = hilbertianity_report(wg, pairs, &opts)?;
    let mut report = h.report;
    let mut worst: Vec<Worst> = Vec::new();
    for (a, b) in pairs {
        let r = verify_linearity(wg, a, b, &opts)?;
        if worst.is_empty() {
            worst = r.checks.iter().map(|c| Worst::new(c.name.clone(), c.tol)).collect();
        }
        for (w, c) in worst.iter_mut().zip(&r.checks) {
            w.see(c.slack);
        }
    }
    for w in &worst {
        report.push(w.check());
    }
    Ok((report, h.histogram))
}

pub const SUITES: [&str; 9] = ["cat", "angles", "cone-calc", "curves", "barycenter", "superpose", "embed", "hilbert", "counterexample"];

/// A deliberately broken configuration for each suite. The returned report is expected
/// to fail; a harness that cannot fail detects nothing.
pub fn negative_control(suite: &str, n: usize, seed: u64, tol: f64) -> Result<Report> {
    let mut report = Report::new();
    match suite {
        "cat" => {
            report = Instance::Sphere.build().visit(CatSuite { n, seed, tol, kappa: Some(-1.0) })?;
        }
        "angles" => {
            let r = verify_angle_triangle_general(&MetricGraph::tripod(), Kappa(0.0), n, seed, tol)?;
            report.push(comparison_check("angle triangle inequality for general quadruples on the tripod", &r));
        }
        "cone-calc" => {
            // opposite legs of the tripod: v (+) w is the apex, so the product is not additive
            let g = MetricGraph::tripod();
            let hub = GraphPoint::Node(0);
            let leg = |i: usize| TangentVector::new(hub, GraphPoint::Node(i), 1.0);
            let (u, v, w) = (leg(3)?, leg(1)?, leg(2)?);
            let lhs = tangent_product(&g, &Tangent::Vector(u.clone()), &oplus(&v, &w))?;
            let rhs = scalar_product(&g, &u, &v)? + scalar_product(&g, &u, &w)?;
            report.push(Check::new("<u, v (+) w> = <u, v> + <u, w> on the tripod tangent cone", (lhs - rhs).abs(), tol));
        }
        "curves" => {
            let e = ModelSpace::new(0.0);
            let pt = |x: f64, y: f64| e.point(&[x, y]);
            let corner = SampledCurve::uniform(vec![pt(0.0, 0.0)?, pt(1.0, 0.0)?, pt(1.0, 1.0)?])?;
            let k = corner.check_antipodality(&e, 0.5)?;
            report.push(Check::new("antipodality at a polyline corner", k.defect, tol));
        }
        "barycenter" => {
            // a leaf offered as barycenter of the uniform measure on the leaves
            let g = MetricGraph::tripod();
            let mu = DiscreteMeasure::uniform((1..4).map(GraphPoint::Node).collect())?;
            let mut rng = sample_rng(seed, 0);
            let probes: Vec<GraphPoint> = (0..n.max(1)).map(|_| g.sample_point(&mut rng)).collect();
            let slack = variance_certificate(&g, &mu, &GraphPoint::Node(1), &probes);
            report.push(Check::new("variance certificate for a leaf of the tripod", (-slack).max(0.0), tol));
        }
        "superpose" => {
            let g = MetricGraph::from_named(&["u", "v"], &[("u", "v", 1.0)])?;
            let forth_and_back = PathDecomposition {
                paths: vec![
                    FlowPath { nodes: vec![0, 1], steps: vec![(0, true)], weight: 1.0 },
                    FlowPath { nodes: vec![1, 0], steps: vec![(0, false)], weight: 0.5 },
                ],
                cycles: vec![],
            };
            report.push(Check::new("cancelling decomposition per-edge mass equals |flow|", (forth_and_back.edge_mass(&g)[0] - 0.5).abs(), tol));
        }
        "embed" => {
            let cone = fibre();
            let mu = DiscreteMeasure::new(vec![(cone.point(1.0, FORWARD), 1.0), (cone.point(1.0, BACKWARD), 0.5)])?;
            let bar = solve_barycenter(&cone, &mu, &SolverOptions::default())?.point;
            let rig = rigidity_check(&cone, &mu, &bar, &ConePoint::apex(), tol);
            let defect = if rig.triggered { rig.halfline_defect } else { 1.0 };
            report.push(Check::new("half-line rigidity of opposite fibre atoms", defect, tol));
        }
        "hilbert" | "counterexample" => {
            let c = crate::counterexample::lip_counterexample();
            report.push(Check::new("parallelogram law for the lip-based form on (R, delta_0)", (c.left - c.right).abs(), tol));
        }
        other => return crate::error::invalid(format!("unknown suite {other}")),
    }
    Ok(report)
}
