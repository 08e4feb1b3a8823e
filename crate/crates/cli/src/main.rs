//! `catcalc`: runs the verification suites and writes JSON/CSV reports.
//! Exit status is 0 when every check passes, 1 when one fails, 2 on bad input.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use catcalc::barycenter::{second_moment, solve_barycenter, variance_certificate, DiscreteMeasure, SolverOptions};
use catcalc::counterexample::{counterexample_report, lip_counterexample};
use catcalc::embedding::{build_embedding, verify_section, EmbeddingOptions};
use catcalc::instances::{AnySpace, Instance, SpaceSpec, SpaceVisitor};
use catcalc::par::sample_rng;
use catcalc::report::{Check, Report};
use catcalc::suites::{self, AnglesSuite, CalculusSuite, CatSuite, CurvesSuite, FirstVariationSuite};
use catcalc::transport::{derivation_norm, superpose, EdgeFlow, TieBreak, WeightedGraph};
use catcalc::{Error, GeodesicSpace, MetricGraph};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "catcalc", version, about = "Numerical checks of comparison geometry and first-order calculus on metric spaces")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Tolerance; each suite has its own default.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Sample count; each suite has its own default.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Write the JSON report here, plus a CSV mirror next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print CSV instead of JSON.
    #[arg(long, global = true)]
    csv: bool,
    /// Run the suite's negative control, which is expected to fail.
    #[arg(long, global = true)]
    negative_control: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Property suites over one space or over every bundled instance.
    Verify {
        suite: VerifySuite,
        /// Space descriptor file or bundled instance label.
        #[arg(long)]
        space: Option<String>,
        /// Curvature to compare against (cat suite only).
        #[arg(long)]
        kappa: Option<f64>,
    },
    /// Barycenter of a finitely supported measure, with certificates.
    Barycenter {
        #[arg(long)]
        space: String,
        #[arg(long)]
        measure: PathBuf,
    },
    /// Decompose an edge flow into weighted paths and cycles.
    Superpose {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        flow: PathBuf,
        #[arg(long, value_enum, default_value_t = Tie::Lexicographic)]
        tie: Tie,
    },
    /// Tangent section of a flow on a grid of interior points.
    Embed {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        flow: PathBuf,
        #[arg(long, default_value_t = 9)]
        grid: usize,
        #[arg(long, default_value_t = 20)]
        landmarks: usize,
    },
    /// Parallelogram law and linearity identities for pairs of flows.
    Hilbert {
        /// Defaults to the bundled 15-edge tree.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Directory of flow files, paired in name order; random pairs otherwise.
        #[arg(long)]
        flows: Option<PathBuf>,
    },
    /// The lip-based parallelogram failure on (R, |.|, delta_0).
    Counterexample,
    /// Print the descriptor of a bundled instance.
    Instance { label: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifySuite {
    Cat,
    Angles,
    ConeCalc,
    Curves,
}

#[derive(Clone, Copy, ValueEnum)]
enum Tie {
    Lexicographic,
    Reverse,
}

enum Failure {
    Config(String),
    Suite(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Invalid(_) | Error::SpaceMismatch => Failure::Config(e.to_string()),
            e => Failure::Suite(e),
        }
    }
}

type Run<T> = std::result::Result<T, Failure>;

struct Output {
    report: Report,
    extra: Value,
}

impl Output {
    fn plain(report: Report) -> Self {
        Output { report, extra: json!({}) }
    }

    fn json(&self) -> String {
        let mut v = serde_json::to_value(&self.report).expect("report serializes");
        if let (Some(obj), Value::Object(extra)) = (v.as_object_mut(), &self.extra) {
            for (k, x) in extra {
                obj.insert(k.clone(), x.clone());
            }
        }
        serde_json::to_string_pretty(&v).expect("report serializes")
    }
}

fn read_json(path: &Path) -> Run<Value> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn load_space(arg: &str) -> Run<AnySpace> {
    if let Some(inst) = Instance::from_label(arg) {
        return Ok(inst.build());
    }
    let text = fs::read_to_string(arg).map_err(|e| Failure::Config(format!("{arg}: {e}")))?;
    Ok(SpaceSpec::from_json(&text)?.build()?)
}

/// A graph file with an optional `density` list; a flow file's own `density` wins.
fn load_weighted(graph: &Path, flow: Option<&Value>) -> Run<(WeightedGraph, Option<EdgeFlow>)> {
    let gv = read_json(graph)?;
    let g = MetricGraph::from_json(&gv)?;
    let mut density: Option<Vec<f64>> = match gv.get("density") {
        Some(d) => Some(serde_json::from_value(d.clone()).map_err(|e| Failure::Config(format!("density: {e}")))?),
        None => None,
    };
    let mut b = None;
    if let Some(fv) = flow {
        let (f, d) = EdgeFlow::from_json(&g, fv)?;
        density = d.or(density);
        b = Some(f);
    }
    let wg = match density {
        Some(d) => WeightedGraph::new(g, d)?,
        None => WeightedGraph::unit(g),
    };
    Ok((wg, b))
}

fn tie_of(t: Tie) -> TieBreak {
    match t {
        Tie::Lexicographic => TieBreak::Lexicographic,
        Tie::Reverse => TieBreak::Reverse,
    }
}

struct BarycenterJob<'a> {
    measure: &'a Value,
    tol: f64,
    seed: u64,
    probes: usize,
}

impl SpaceVisitor for BarycenterJob<'_> {
    type Output = Run<Output>;
    fn visit<S: GeodesicSpace>(self, space: &S) -> Run<Output> {
        let mu = DiscreteMeasure::from_json(space, self.measure)?;
        let opts = SolverOptions { tol: self.tol, seed: self.seed, ..SolverOptions::default() };
        let res = solve_barycenter(space, &mu, &opts)?;
        let mut rng = sample_rng(self.seed, 0xba);
        let probes: Vec<S::Point> = (0..self.probes).map(|_| space.sample_point(&mut rng)).collect();
        let slack = variance_certificate(space, &mu, &res.point, &probes);
        let mut report = Report::new();
        report.push(Check::new(format!("variance certificate over {} probes", self.probes), (-slack).max(0.0), 1e-9));
        report.push(Check::new("optimality gap bound", res.gap_bound, self.tol * self.tol));
        let mut result = serde_json::to_value(&res).expect("result serializes");
        result["point"] = space.point_to_json(&res.point);
        result["variance"] = json!(second_moment(space, &mu.normalized(), &res.point));
        result["variance_certificate_slack"] = json!(slack);
        Ok(Output { report, extra: json!({ "space": space.name(), "result": result }) })
    }
}

fn verify(cli: &Cli, suite: VerifySuite, space: Option<&str>, kappa: Option<f64>) -> Run<Output> {
    let seed = cli.seed;
    let one = space.map(load_space).transpose()?;
    let report = match suite {
        VerifySuite::Cat => {
            let (n, tol) = (cli.n.unwrap_or(1000), cli.tol.unwrap_or(1e-9));
            match one {
                Some(s) => s.visit(CatSuite { n, seed, tol, kappa })?,
                None if kappa.is_some() => {
                    return Err(Failure::Config("--kappa needs --space".into()));
                }
                None => suites::cat_suite(n, seed, tol, true)?,
            }
        }
        VerifySuite::Angles => {
            let (n, tol) = (cli.n.unwrap_or(300), cli.tol.unwrap_or(1e-9));
            match one {
                Some(s) => s.visit(AnglesSuite { n, seed, tol })?,
                None => suites::angles_suite(n, seed, tol)?,
            }
        }
        VerifySuite::ConeCalc => {
            let (n, tol) = (cli.n.unwrap_or(200), cli.tol.unwrap_or(1e-8));
            match one {
                Some(s) => {
                    let mut r = s.visit(CalculusSuite { n, seed, tol })?;
                    r.extend(s.visit(FirstVariationSuite { n: n.min(100), seed, tol: tol.max(1e-7) })?);
                    r
                }
                None => {
                    let mut r = suites::cone_calculus_suite(n, seed, tol)?;
                    r.extend(suites::first_variation_suite(n.min(100), seed, tol.max(1e-7))?);
                    r
                }
            }
        }
        VerifySuite::Curves => {
            let (n, tol) = (cli.n.unwrap_or(50), cli.tol.unwrap_or(1e-6));
            match one {
                Some(s) => s.visit(CurvesSuite { n, seed, tol })?,
                None => suites::curves_suite(n, seed, tol)?,
            }
        }
    };
    Ok(Output::plain(report))
}

fn embed(cli: &Cli, graph: &Path, flow: &Path, grid: usize, landmarks: usize) -> Run<Output> {
    let fv = read_json(flow)?;
    let (wg, b) = load_weighted(graph, Some(&fv))?;
    let b = b.expect("flow was given");
    let opts = EmbeddingOptions { per_edge: grid, ..EmbeddingOptions::default() };
    let section = build_embedding(&wg, &b, &opts)?;
    let mut rng = sample_rng(cli.seed, 0x1a);
    let lm: Vec<_> = (0..landmarks).map(|_| wg.graph.sample_point(&mut rng)).collect();
    let report = verify_section(&wg, &b, &section, &lm)?;
    let mut points = Vec::with_capacity(section.values.len());
    for (i, fv) in section.values.iter().enumerate() {
        let expected = derivation_norm(&wg, &b, &fv.x)?;
        points.push(json!({
            "point": wg.graph.point_json(&fv.x),
            "value": section.signed(i),
            "norm": fv.v.r,
            "flow_norm": expected,
            "norm_slack": (fv.v.r - expected).abs(),
            "density_ratio": fv.density_ratio,
            "atoms": fv.atoms,
            "rigidity_defect": fv.rigidity_defect,
        }));
    }
    Ok(Output { report, extra: json!({ "points": points }) })
}

fn hilbert(cli: &Cli, graph: Option<&Path>, flows: Option<&Path>) -> Run<Output> {
    let n = cli.n.unwrap_or(20);
    let (wg, _) = match graph {
        Some(p) => load_weighted(p, None)?,
        None => (WeightedGraph::unit(catcalc::instances::bundled_random_tree()), None),
    };
    let (mut report, histogram) = match flows {
        None => suites::hilbert_suite_on(&wg, n, cli.seed)?,
        Some(dir) => {
            let mut files: Vec<PathBuf> = fs::read_dir(dir)
                .map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            files.sort();
            if files.len() < 2 {
                return Err(Failure::Config(format!("{} holds fewer than two flow files", dir.display())));
            }
            let mut bs = Vec::new();
            for f in files.iter().take(2 * n) {
                bs.push(EdgeFlow::from_json(&wg.graph, &read_json(f)?)?.0);
            }
            let pairs: Vec<_> = bs.chunks_exact(2).map(|c| (c[0].clone(), c[1].clone())).collect();
            suites::hilbert_pairs(&wg, &pairs)?
        }
    };
    if let Some(tol) = cli.tol {
        for c in &mut report.checks {
            c.tol = tol;
            c.pass = c.slack <= tol;
        }
    }
    let max_slack = report.checks.iter().map(|c| c.slack).fold(0.0, f64::max);
    Ok(Output { report, extra: json!({ "max_slack": max_slack, "histogram": histogram }) })
}

fn run(cli: &Cli) -> Run<Output> {
    if cli.tol.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
        return Err(Failure::Config("--tol must be positive".into()));
    }
    if cli.negative_control {
        let name = match &cli.command {
            Command::Verify { suite: VerifySuite::Cat, .. } => "cat",
            Command::Verify { suite: VerifySuite::Angles, .. } => "angles",
            Command::Verify { suite: VerifySuite::ConeCalc, .. } => "cone-calc",
            Command::Verify { suite: VerifySuite::Curves, .. } => "curves",
            Command::Barycenter { .. } => "barycenter",
            Command::Superpose { .. } => "superpose",
            Command::Embed { .. } => "embed",
            Command::Hilbert { .. } => "hilbert",
            Command::Counterexample => "counterexample",
            Command::Instance { .. } => return Err(Failure::Config("instance has no negative control".into())),
        };
        let report = suites::negative_control(name, cli.n.unwrap_or(200), cli.seed, cli.tol.unwrap_or(1e-9))?;
        return Ok(Output { report, extra: json!({ "negative_control": name }) });
    }
    match &cli.command {
        Command::Verify { suite, space, kappa } => verify(cli, *suite, space.as_deref(), *kappa),
        Command::Barycenter { space, measure } => {
            let s = load_space(space)?;
            let m = read_json(measure)?;
            s.visit(BarycenterJob { measure: &m, tol: cli.tol.unwrap_or(1e-8), seed: cli.seed, probes: cli.n.unwrap_or(100) })
        }
        Command::Superpose { graph, flow, tie } => {
            let fv = read_json(flow)?;
            let (wg, b) = load_weighted(graph, Some(&fv))?;
            let b = b.expect("flow was given");
            let g = &wg.graph;
            let d = superpose(g, &b, tie_of(*tie))?;
            let tol = cli.tol.unwrap_or(1e-12);
            let mass = d.edge_mass(g).iter().zip(&b.flow).map(|(m, f)| (m - f.abs()).abs()).fold(0.0, f64::max);
            let boundary =
                d.endpoint_balance(g.n_nodes()).iter().zip(b.divergence(g)).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
            let mut report = Report::new();
            report.push(Check::new("per-edge mass equals |flow|", mass, tol));
            report.push(Check::new("path endpoints match the boundary", boundary, tol));
            Ok(Output { report, extra: json!({ "decomposition": d.to_json(g) }) })
        }
        Command::Embed { graph, flow, grid, landmarks } => embed(cli, graph, flow, *grid, *landmarks),
        Command::Hilbert { graph, flows } => hilbert(cli, graph.as_deref(), flows.as_deref()),
        Command::Counterexample => {
            let c = lip_counterexample();
            Ok(Output { report: counterexample_report(), extra: json!({ "result": c }) })
        }
        Command::Instance { label } => {
            let inst = Instance::from_label(label).ok_or_else(|| {
                let known: Vec<&str> = Instance::ALL.iter().map(|i| i.label()).collect();
                Failure::Config(format!("unknown instance {label}; known: {}", known.join(", ")))
            })?;
            println!("{}", serde_json::to_string_pretty(&inst.spec()).expect("descriptor serializes"));
            Ok(Output::plain(Report::new()))
        }
    }
}

fn init_workers() -> Result<(), String> {
    let Ok(v) = std::env::var("CATCALC_WORKERS") else { return Ok(()) };
    let n: usize = v.parse().map_err(|_| format!("CATCALC_WORKERS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("CATCALC_WORKERS must be a positive integer".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_workers() {
        eprintln!("config error: {e}");
        return ExitCode::from(2);
    }
    let out = match run(&cli) {
        Ok(o) => o,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            return ExitCode::from(2);
        }
        Err(Failure::Suite(e)) => {
            eprintln!("suite failed: {e}");
            return ExitCode::from(1);
        }
    };
    if matches!(cli.command, Command::Instance { .. }) && !cli.negative_control {
        return ExitCode::SUCCESS;
    }
    let text = if cli.csv { out.report.to_csv() } else { out.json() };
    match &cli.out {
        Some(path) => {
            let written = fs::write(path, out.json()).and_then(|_| fs::write(path.with_extension("csv"), out.report.to_csv()));
            if let Err(e) = written {
                eprintln!("config error: {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => println!("{text}"),
    }
    for c in out.report.failures() {
        eprintln!("FAIL {} (slack {:e}, tol {:e})", c.name, c.slack, c.tol);
    }
    if out.report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
