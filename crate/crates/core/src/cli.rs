//! Command-line front end: one subcommand per computation, CSV or JSON on
//! stdout or `--out`, a short summary, and machine-readable exit codes.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{default_spec, ParamsFamily, RunConfig};
use crate::elliptic::EllipticContext;
use crate::error::Error;
use crate::exponential::ExponentialEvaluator;
use crate::format::{fmt_f64, CsvTable};
use crate::graph::{GraphSpec, IsoradialGraph, Lift};
use crate::green::{
    boundary_map, decay_rate, green_asymptotic, green_contour, martin_limit_audit, martin_ray_audit,
    RADII,
};
use crate::laplacian::{dirichlet_radius, MassiveOperator};
use crate::series::{certify, s_by_recurrence, t_by_newton};
use crate::spectral::{
    amoeba_sample, invert_square_params, ney_spitzer_bridge, oval, oval_radius, triangular_blowup_slope,
    triangular_relations, xi, FourierSymbol,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

const GREEN_TOL: f64 = 1e-8;
const MARTIN_TOL: f64 = 5e-3;
const MARTIN_MONOTONE_FROM: f64 = 20.0;
const OSCILLATION_TOL: f64 = 0.02;
const BOUNDARY_TOL: f64 = 1e-6;
const AMOEBA_TOL: f64 = 1e-6;
const PARAMS_TOL: f64 = 1e-10;
const BLOWUP_TOL: f64 = 0.02;
const AUDIT_TOL: f64 = 1e-9;
const DECAY_SAMPLES: usize = 64;

#[derive(Parser, Debug)]
#[command(
    name = "isomartin",
    version,
    about = "Massive Laplacian on isoradial graphs: Green function, Martin boundary, amoebas and series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a graph, audit its embedding and write its spec as JSON.
    Graph(GraphArgs),
    /// Compare oracle, contour, Fourier and asymptotic Green values.
    Green(GreenArgs),
    /// Audit Martin ratios along rays against their predicted limits.
    Martin(MartinArgs),
    /// Sweep directions and record their boundary points.
    Boundary(BoundaryArgs),
    /// Sweep the modulus and record the amoeba oval.
    Amoeba(AmoebaArgs),
    /// Convert between walk parameters and elliptic parameters.
    Params(ParamsArgs),
    /// Certify the exact power series.
    Series(SeriesArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Graph-spec JSON file.
    #[arg(long)]
    graph_spec: Option<PathBuf>,
    /// Graph preset: square, triangular, alternating or waves.
    #[arg(long)]
    builder: Option<String>,
    #[arg(long)]
    theta_bar: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    extent: Option<i32>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Elliptic modulus.
    #[arg(short, long)]
    k: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Write the resolved configuration to this file.
    #[arg(long)]
    dump_config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GraphArgs {
    #[command(flatten)]
    common: Common,
    /// Also write a CSV of all vertices.
    #[arg(long)]
    vertices: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GreenArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    max_distance: Option<f64>,
    #[arg(long)]
    oracle_radius: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<i32>>,
}

#[derive(Args, Debug)]
struct MartinArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<i32>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x1: Option<Vec<i32>>,
    /// Lift-space direction as comma-separated components; repeatable.
    #[arg(long, allow_hyphen_values = true)]
    direction: Vec<String>,
    /// Embedded ray angles.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    ray_angle: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct BoundaryArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug)]
struct AmoebaArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',')]
    moduli: Option<Vec<f64>>,
    /// Oval samples per modulus.
    #[arg(long)]
    samples: Option<usize>,
    /// Grid size of the exported amoeba points.
    #[arg(long)]
    resolution: Option<usize>,
    /// Write amoeba points at the configured modulus to this file.
    #[arg(long)]
    points: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ParamsArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    family: Option<ParamsFamily>,
    #[arg(long, value_delimiter = ',')]
    q1: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    t: Option<Vec<f64>>,
    /// Random (q1, t) pairs drawn when no grid is given.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    moduli: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct SeriesArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    order: Option<usize>,
}

/// A run that did not pass, with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn context(self, what: &str) -> Self {
        Self {
            code: self.code,
            message: format!("{what}: {}", self.message),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Pole { .. }
            | Error::Quadrature(_)
            | Error::Saddle(_)
            | Error::Solver(_)
            | Error::RootFinding(_)
            | Error::Certification { .. } => EXIT_FAIL,
            _ => EXIT_INPUT,
        };
        let prefix = if code == EXIT_FAIL {
            "numerical failure"
        } else {
            "input error"
        };
        Self {
            code,
            message: format!("{prefix}: {e}"),
        }
    }
}

type Outcome = std::result::Result<bool, Failure>;

fn ctx_err<T>(r: crate::error::Result<T>, what: &str) -> std::result::Result<T, Failure> {
    r.map_err(|e| Failure::from(e).context(what))
}

/// Destination of the main artifact and the summary. With `--out` the
/// summary goes to stdout, otherwise to stderr.
struct Sink<'a> {
    out: Option<PathBuf>,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Sink<'_> {
    fn artifact(&mut self, text: &str) -> std::result::Result<(), Failure> {
        match &self.out {
            Some(path) => write_file(path, text),
            None => self
                .stdout
                .write_all(text.as_bytes())
                .map_err(|e| Failure::input(format!("cannot write output: {e}"))),
        }
    }

    fn line(&mut self, text: &str) {
        let w: &mut dyn Write = if self.out.is_some() {
            &mut *self.stdout
        } else {
            &mut *self.stderr
        };
        let _ = writeln!(w, "{text}");
    }
}

fn write_file(path: &Path, text: &str) -> std::result::Result<(), Failure> {
    std::fs::write(path, text)
        .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

fn read_file(path: &Path) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

/// Parse `args` (including the program name), run the subcommand and
/// return the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_PASS,
                _ => EXIT_INPUT,
            };
            let text = e.render().to_string();
            let w: &mut dyn Write = if code == EXIT_PASS { stdout } else { stderr };
            let _ = w.write_all(text.as_bytes());
            return code;
        }
    };
    let (common, name) = match &cli.command {
        Command::Graph(a) => (&a.common, "graph"),
        Command::Green(a) => (&a.common, "green"),
        Command::Martin(a) => (&a.common, "martin"),
        Command::Boundary(a) => (&a.common, "boundary"),
        Command::Amoeba(a) => (&a.common, "amoeba"),
        Command::Params(a) => (&a.common, "params"),
        Command::Series(a) => (&a.common, "series"),
    };
    let mut sink = Sink {
        out: common.out.clone(),
        stdout,
        stderr,
    };
    let result = resolve(&cli.command, common).and_then(|config| {
        if let Some(path) = &common.dump_config {
            write_file(path, &config.to_json())?;
        }
        match &cli.command {
            Command::Graph(a) => cmd_graph(&config, a.vertices.as_deref(), &mut sink),
            Command::Green(_) => cmd_green(&config, &mut sink),
            Command::Martin(_) => cmd_martin(&config, &mut sink),
            Command::Boundary(_) => cmd_boundary(&config, &mut sink),
            Command::Amoeba(a) => cmd_amoeba(&config, a.points.as_deref(), &mut sink),
            Command::Params(_) => cmd_params(&config, &mut sink),
            Command::Series(_) => cmd_series(&config, &mut sink),
        }
    });
    match result {
        Ok(true) => EXIT_PASS,
        Ok(false) => {
            let _ = writeln!(sink.stderr, "isomartin {name}: assertion failed");
            EXIT_FAIL
        }
        Err(f) => {
            let _ = writeln!(sink.stderr, "isomartin {name}: {}", f.message);
            f.code
        }
    }
}

fn resolve(command: &Command, common: &Common) -> std::result::Result<RunConfig, Failure> {
    let mut c = match &common.config {
        Some(path) => ctx_err(RunConfig::from_json(&read_file(path)?), "reading --config")?,
        None => RunConfig::default(),
    };
    if let Some(path) = &common.graph_spec {
        c.graph = ctx_err(GraphSpec::from_json(&read_file(path)?), "reading --graph-spec")?;
    }
    if let Some(b) = &common.builder {
        c.graph = ctx_err(default_spec(b, common.extent), "--builder")?;
    }
    apply_graph_flags(&mut c.graph, common)?;
    if let Some(k) = common.k {
        c.k = k;
    }
    if let Some(t) = common.tolerance {
        c.tolerance = Some(t);
    }
    if let Some(s) = common.seed {
        c.seed = s;
    }
    match command {
        Command::Graph(_) | Command::Series(_) | Command::Boundary(_) => {}
        Command::Green(a) => {
            if let Some(d) = a.max_distance {
                c.max_distance = d;
            }
            if a.oracle_radius.is_some() {
                c.oracle_radius = a.oracle_radius;
            }
            if a.x0.is_some() {
                c.x0 = a.x0.clone();
            }
        }
        Command::Martin(a) => {
            if a.x0.is_some() {
                c.x0 = a.x0.clone();
            }
            if a.x1.is_some() {
                c.x1 = a.x1.clone();
            }
            if !a.direction.is_empty() {
                c.directions = a
                    .direction
                    .iter()
                    .map(|s| parse_floats(s))
                    .collect::<std::result::Result<_, _>>()?;
            }
            if let Some(r) = &a.ray_angle {
                c.ray_angles = r.clone();
            }
            if let Some(r) = &a.radii {
                c.radii = r.clone();
            }
        }
        Command::Amoeba(a) => {
            if let Some(m) = &a.moduli {
                c.moduli = m.clone();
            }
            if let Some(r) = a.resolution {
                c.resolution = r;
            }
        }
        Command::Params(a) => {
            if let Some(f) = a.family {
                c.family = f;
            }
            if let Some(q) = &a.q1 {
                c.q1 = q.clone();
            }
            if let Some(t) = &a.t {
                c.t = t.clone();
            }
            if let Some(m) = &a.moduli {
                c.moduli = m.clone();
            }
        }
    }
    let samples = match command {
        Command::Boundary(a) => a.samples,
        Command::Amoeba(a) => a.samples,
        Command::Params(a) => a.samples,
        _ => None,
    };
    if let Some(s) = samples {
        c.samples = s;
    }
    if let Command::Series(a) = command {
        if let Some(o) = a.order {
            c.order = o;
        }
    }
    fill_defaults(command, &mut c);
    Ok(c)
}

fn parse_floats(s: &str) -> std::result::Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Failure::input(format!("bad number {p:?} in {s:?}: {e}")))
        })
        .collect()
}

fn apply_graph_flags(spec: &mut GraphSpec, common: &Common) -> std::result::Result<(), Failure> {
    let tracks = matches!(spec, GraphSpec::Tracks { .. });
    let (ext, eps) = match spec {
        GraphSpec::Square {
            theta_bar,
            extent,
            epsilon,
            ..
        } => {
            if let Some(t) = common.theta_bar {
                *theta_bar = t;
            }
            (extent, epsilon)
        }
        GraphSpec::Alternating {
            delta,
            extent,
            epsilon,
            ..
        } => {
            if let Some(d) = common.delta {
                *delta = d;
            }
            (extent, epsilon)
        }
        GraphSpec::Triangular { extent, epsilon, .. } | GraphSpec::Tracks { extent, epsilon, .. } => {
            (extent, epsilon)
        }
    };
    if let Some(e) = common.epsilon {
        *eps = e;
    }
    if let Some(e) = common.extent {
        if tracks && common.builder.is_none() {
            return Err(Failure::input(
                "--extent cannot resize a track-family spec; regenerate it with --builder",
            ));
        }
        *ext = e;
    }
    if common.theta_bar.is_some() && !matches!(spec, GraphSpec::Square { .. }) {
        return Err(Failure::input("--theta-bar applies to the square builder only"));
    }
    if common.delta.is_some() && !matches!(spec, GraphSpec::Alternating { .. }) {
        return Err(Failure::input("--delta applies to the alternating builder only"));
    }
    Ok(())
}

fn fill_defaults(command: &Command, c: &mut RunConfig) {
    let tol = match command {
        Command::Graph(_) => AUDIT_TOL,
        Command::Green(_) => GREEN_TOL,
        Command::Martin(_) => MARTIN_TOL,
        Command::Boundary(_) => BOUNDARY_TOL,
        Command::Amoeba(_) => AMOEBA_TOL,
        Command::Params(_) | Command::Series(_) => PARAMS_TOL,
    };
    c.tolerance.get_or_insert(tol);
    match command {
        Command::Martin(_) => {
            if c.ray_angles.is_empty() && c.directions.is_empty() {
                c.ray_angles = vec![0.3];
            }
            if c.radii.is_empty() {
                c.radii = if matches!(c.graph, GraphSpec::Tracks { .. }) {
                    (0..10).map(|i| 12.0 + 4.0 * i as f64).collect()
                } else {
                    RADII.to_vec()
                };
            }
        }
        Command::Boundary(_) if c.samples == 0 => c.samples = 360,
        Command::Amoeba(_) => {
            if c.samples == 0 {
                c.samples = 256;
            }
            if c.moduli.is_empty() {
                c.moduli = default_moduli();
            }
        }
        Command::Params(_) => {
            if c.samples == 0 {
                c.samples = 50;
            }
            if c.family == ParamsFamily::Triangular && c.moduli.is_empty() {
                c.moduli = default_moduli();
            }
        }
        _ => {}
    }
}

fn default_moduli() -> Vec<f64> {
    std::iter::once(0.05)
        .chain((1..10).map(|i| i as f64 / 10.0))
        .collect()
}

fn tolerance(c: &RunConfig) -> f64 {
    c.tolerance.expect("defaults are filled")
}

fn build_graph(c: &RunConfig) -> std::result::Result<IsoradialGraph, Failure> {
    ctx_err(c.graph.build(), "building graph")
}

fn context(k: f64) -> std::result::Result<EllipticContext, Failure> {
    ctx_err(EllipticContext::new(k), "modulus")
}

fn require_massive(k: f64) -> std::result::Result<(), Failure> {
    if k == 0.0 {
        return Err(Failure::input(
            "k = 0 is the massless Laplacian, which is out of scope; choose 0 < k < 1",
        ));
    }
    Ok(())
}

fn join_lift(p: &[i32]) -> String {
    p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn join_floats(p: &[f64]) -> String {
    p.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ")
}

fn render(table: &CsvTable, c: &RunConfig, command: &str, passed: bool) -> String {
    table.render(
        &c.to_json(),
        &[
            ("command", command.to_string()),
            ("status", if passed { "pass" } else { "fail" }.to_string()),
        ],
    )
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

fn base_vertex(g: &IsoradialGraph, x0: &Option<Lift>) -> std::result::Result<usize, Failure> {
    match x0 {
        Some(p) => g
            .index_of(p)
            .filter(|&i| g.is_primal(i))
            .ok_or_else(|| Failure::input(format!("x0 = {p:?} is not a primal vertex of the window"))),
        None => g
            .nearest_primal(Complex64::new(0.0, 0.0))
            .ok_or_else(|| Failure::input("graph has no primal vertex")),
    }
}

fn cmd_graph(c: &RunConfig, vertices: Option<&Path>, sink: &mut Sink) -> Outcome {
    let g = build_graph(c)?;
    let audit = g.audit();
    let passed = audit.passes(tolerance(c));
    sink.artifact(&c.graph.to_json())?;
    if let Some(path) = vertices {
        let mut table = CsvTable::new(&["lift", "x", "y", "primal", "complete"]);
        for i in 0..g.num_points() {
            let z = g.position(i);
            table.push(vec![
                join_lift(g.point(i)).into(),
                z.re.into(),
                z.im.into(),
                g.is_primal(i).into(),
                g.is_complete(i).into(),
            ]);
        }
        write_file(path, &render(&table, c, "graph", passed))?;
    }
    sink.line(&format!(
        "points={} primal={} faces={} periodic={}",
        g.num_points(),
        g.primal_vertices().len(),
        g.faces().len(),
        g.periodicity().is_some()
    ));
    sink.line(&format!(
        "audit edge_length={} closure={} min_area={} angle_sum={} half_angle={} {}",
        fmt_f64(audit.max_edge_length_error),
        fmt_f64(audit.max_closure_residual),
        fmt_f64(audit.min_face_area),
        fmt_f64(audit.max_angle_sum_error),
        fmt_f64(audit.max_half_angle_error),
        verdict(passed)
    ));
    Ok(passed)
}

struct GreenRow {
    y: Lift,
    distance: f64,
    oracle: f64,
    contour: f64,
    fourier: f64,
    asymptotic: f64,
}

fn rel_gap(a: f64, oracle: f64) -> f64 {
    ((a - oracle) / oracle).abs()
}

fn cmd_green(c: &RunConfig, sink: &mut Sink) -> Outcome {
    require_massive(c.k)?;
    let g = build_graph(c)?;
    let ctx = context(c.k)?;
    let ev = ExponentialEvaluator::new(&g, &ctx);
    let xi = base_vertex(&g, &c.x0)?;
    let x = g.point(xi).clone();
    let radius = match c.oracle_radius {
        Some(r) => r,
        None => {
            let rate = decay_rate(&ev, DECAY_SAMPLES).map_err(|e| {
                Failure::from(e).context("oracle radius (pass --oracle-radius for non-periodic graphs)")
            })?;
            dirichlet_radius(rate, c.max_distance, 0.1 * tolerance(c))
        }
    };
    let op = ctx_err(MassiveOperator::assemble(&g, &ctx), "assembling operator")?;
    let xl = op
        .local_index(xi)
        .ok_or_else(|| Failure::input("x0 is not a primal vertex"))?;
    let oracle = ctx_err(op.truncated_green(xl, radius), "oracle")
        .map_err(|f| f.context(&format!("oracle ball of radius {radius:.1}; enlarge --extent")))?;
    let symbol = match g.periodicity() {
        Some(_) => Some(ctx_err(FourierSymbol::new(&g, &ctx), "Fourier symbol")?),
        None => None,
    };
    let origin = g.position(xi);
    let mut targets: Vec<(f64, usize)> = (0..op.len())
        .map(|l| ((g.position(op.point(l)) - origin).norm(), l))
        .filter(|&(d, _)| d <= c.max_distance + 1e-9)
        .collect();
    targets.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| g.point(op.point(a.1)).cmp(g.point(op.point(b.1))))
    });
    let fourier: Vec<f64> = match &symbol {
        Some(s) => {
            let sites: std::result::Result<Vec<_>, Failure> = std::iter::once(&x)
                .chain(targets.iter().map(|&(_, l)| g.point(op.point(l))))
                .map(|p| ctx_err(s.locate(p), "Fourier inversion"))
                .collect();
            let sites = sites?;
            ctx_err(s.green_many(sites[0], &sites[1..]), "Fourier inversion")?
                .into_iter()
                .map(|e| e.value)
                .collect()
        }
        None => vec![f64::NAN; targets.len()],
    };
    let rows: std::result::Result<Vec<GreenRow>, Failure> = targets
        .par_iter()
        .zip(fourier.par_iter())
        .map(|(&(distance, l), &fourier)| {
            let y = g.point(op.point(l)).clone();
            let contour = ctx_err(green_contour(&ev, &x, &y), "contour")?.value;
            let asymptotic = if l == xl {
                f64::NAN
            } else {
                ctx_err(green_asymptotic(&ev, &x, &y), "asymptotics")?.value
            };
            Ok(GreenRow {
                y,
                distance,
                oracle: oracle.values[l],
                contour,
                fourier,
                asymptotic,
            })
        })
        .collect();
    let rows = rows?;
    let tol = tolerance(c);
    let mut table = CsvTable::new(&[
        "y",
        "distance",
        "oracle",
        "contour",
        "fourier",
        "asymptotic",
        "gap_contour",
        "gap_fourier",
        "gap_asymptotic",
    ]);
    let (mut worst_contour, mut worst_fourier, mut worst_asym) = (0.0f64, 0.0f64, 0.0f64);
    for r in &rows {
        let gc = rel_gap(r.contour, r.oracle);
        let gf = rel_gap(r.fourier, r.oracle);
        let ga = rel_gap(r.asymptotic, r.oracle);
        worst_contour = worst_contour.max(gc);
        if symbol.is_some() {
            worst_fourier = worst_fourier.max(gf);
        }
        if ga.is_finite() {
            worst_asym = worst_asym.max(ga);
        }
        table.push(vec![
            join_lift(&r.y).into(),
            r.distance.into(),
            r.oracle.into(),
            r.contour.into(),
            r.fourier.into(),
            r.asymptotic.into(),
            gc.into(),
            gf.into(),
            ga.into(),
        ]);
    }
    let passed = worst_contour <= tol && worst_fourier <= tol;
    sink.artifact(&render(&table, c, "green", passed))?;
    sink.line(&format!(
        "pairs={} oracle_radius={} solver={:?}",
        rows.len(),
        fmt_f64(radius),
        oracle.solver
    ));
    sink.line(&format!(
        "max_gap contour={} fourier={} asymptotic={} tolerance={} {}",
        fmt_f64(worst_contour),
        if symbol.is_some() {
            fmt_f64(worst_fourier)
        } else {
            "n/a".into()
        },
        fmt_f64(worst_asym),
        fmt_f64(tol),
        verdict(passed)
    ));
    Ok(passed)
}

fn second_vertex(g: &IsoradialGraph, xi: usize, x1: &Option<Lift>) -> std::result::Result<Lift, Failure> {
    match x1 {
        Some(p) => {
            if g.index_of(p).is_some_and(|i| g.is_primal(i)) {
                Ok(p.clone())
            } else {
                Err(Failure::input(format!("x1 = {p:?} is not a primal vertex of the window")))
            }
        }
        None => g
            .neighbors(xi)
            .first()
            .map(|&(n, _)| g.point(n).clone())
            .ok_or_else(|| Failure::input("x0 has no neighbor")),
    }
}

fn cmd_martin(c: &RunConfig, sink: &mut Sink) -> Outcome {
    require_massive(c.k)?;
    let g = build_graph(c)?;
    let ctx = context(c.k)?;
    let ev = ExponentialEvaluator::new(&g, &ctx);
    let xi = base_vertex(&g, &c.x0)?;
    let x0 = g.point(xi).clone();
    let x1 = second_vertex(&g, xi, &c.x1)?;
    let tol = tolerance(c);
    match g.periodicity() {
        Some(per) => {
            let mut dirs = c.directions.clone();
            for &phi in &c.ray_angles {
                dirs.push(per.flat_direction(phi, g.angles()));
            }
            let mut table = CsvTable::new(&["direction", "lift_direction", "radius", "y", "ratio", "target", "error"]);
            let mut passed = true;
            for (i, dir) in dirs.iter().enumerate() {
                let audit = ctx_err(
                    martin_limit_audit(&ev, &x0, &x1, dir, &c.radii),
                    &format!("direction {i}"),
                )?;
                for r in &audit.rows {
                    table.push(vec![
                        i.into(),
                        join_floats(dir).into(),
                        r.radius.into(),
                        join_lift(&r.y).into(),
                        r.ratio.into(),
                        r.target.into(),
                        r.error.into(),
                    ]);
                }
                let ok = audit.final_error() <= tol && audit.monotone_from(MARTIN_MONOTONE_FROM);
                passed &= ok;
                sink.line(&format!(
                    "direction {i} [{}]: final_error={} monotone_from_{}={} {}",
                    join_floats(dir),
                    fmt_f64(audit.final_error()),
                    MARTIN_MONOTONE_FROM,
                    audit.monotone_from(MARTIN_MONOTONE_FROM),
                    verdict(ok)
                ));
            }
            sink.artifact(&render(&table, c, "martin", passed))?;
            Ok(passed)
        }
        None => {
            let angles = if c.ray_angles.is_empty() {
                vec![0.3]
            } else {
                c.ray_angles.clone()
            };
            let mut table = CsvTable::new(&["ray_angle", "radius", "y", "reduced", "ratio", "target"]);
            let mut passed = true;
            for &phi in &angles {
                let audit = ctx_err(
                    martin_ray_audit(&ev, &x0, &x1, phi, &c.radii),
                    &format!("ray {phi}"),
                )?;
                for r in &audit.rows {
                    table.push(vec![
                        phi.into(),
                        r.radius.into(),
                        join_lift(&r.y).into(),
                        join_floats(r.direction.components()).into(),
                        r.ratio.into(),
                        r.target.into(),
                    ]);
                }
                let status = if audit.oscillates(OSCILLATION_TOL) {
                    "no-limit (expected)"
                } else {
                    let last = audit.rows.last().expect("radii are nonempty");
                    if (last.ratio - last.target).abs() <= tol {
                        "converged"
                    } else {
                        passed = false;
                        "FAIL"
                    }
                };
                sink.line(&format!(
                    "ray {}: direction_spread={} ratio_spread={} {status}",
                    fmt_f64(phi),
                    fmt_f64(audit.direction_spread),
                    fmt_f64(audit.ratio_spread)
                ));
            }
            sink.artifact(&render(&table, c, "martin", passed))?;
            Ok(passed)
        }
    }
}

fn cmd_boundary(c: &RunConfig, sink: &mut Sink) -> Outcome {
    require_massive(c.k)?;
    let g = build_graph(c)?;
    let ctx = context(c.k)?;
    let ev = ExponentialEvaluator::new(&g, &ctx);
    let map = ctx_err(boundary_map(&ev, c.samples), "boundary map")?;
    let slopes = map.slopes();
    let winding_err = (map.winding() - 4.0 * ctx.big_k()).abs();
    let positive = slopes.iter().all(|&s| s > 0.0);
    let passed = map.strictly_increasing() && winding_err <= tolerance(c) && positive;
    let mut table = CsvTable::new(&["index", "angle", "v0", "lifted", "chi", "chi2", "slope"]);
    for (i, s) in map.saddles.iter().enumerate() {
        table.push(vec![
            i.into(),
            map.angles[i].into(),
            s.v0.into(),
            map.lifted[i].into(),
            s.chi.into(),
            s.chi2.into(),
            slopes[i].into(),
        ]);
    }
    sink.artifact(&render(&table, c, "boundary", passed))?;
    sink.line(&format!(
        "samples={} winding_error={} min_slope={} strictly_increasing={} {}",
        c.samples,
        fmt_f64(winding_err),
        fmt_f64(slopes.iter().copied().fold(f64::INFINITY, f64::min)),
        map.strictly_increasing(),
        verdict(passed)
    ));
    Ok(passed)
}

fn cmd_amoeba(c: &RunConfig, points: Option<&Path>, sink: &mut Sink) -> Outcome {
    let g = build_graph(c)?;
    if g.periodicity().is_none() {
        return Err(Failure::input("amoeba needs a periodic graph"));
    }
    let mut moduli = c.moduli.clone();
    moduli.sort_by(f64::total_cmp);
    moduli.dedup();
    for &k in &moduli {
        require_massive(k)?;
    }
    let tol = tolerance(c);
    let mut table = CsvTable::new(&["k", "diameter", "max_radius", "convex", "xi_deviation"]);
    let mut diameters = Vec::new();
    let mut passed = true;
    for &k in &moduli {
        let ctx = context(k)?;
        let ev = ExponentialEvaluator::new(&g, &ctx);
        let symbol = ctx_err(FourierSymbol::new(&g, &ctx), "Fourier symbol")?;
        let ov = ctx_err(oval(&symbol, c.samples), &format!("oval at k = {k}"))?;
        let period = 4.0 * ctx.big_k();
        let gaps: std::result::Result<Vec<f64>, Failure> = (0..c.samples)
            .into_par_iter()
            .map(|i| {
                let (a, b) = ctx_err(xi(&ev, period * i as f64 / c.samples as f64), "xi")?;
                let r = ctx_err(oval_radius(&symbol, b.atan2(a)), "oval radius")?;
                Ok((r - a.hypot(b)).abs())
            })
            .collect();
        let dev = gaps?.into_iter().fold(0.0, f64::max);
        let convex = ov.is_convex();
        passed &= convex && dev <= tol;
        diameters.push(ov.diameter());
        table.push(vec![
            k.into(),
            ov.diameter().into(),
            ov.max_radius().into(),
            convex.into(),
            dev.into(),
        ]);
    }
    let monotone = diameters.windows(2).all(|w| w[1] > w[0]);
    passed &= monotone;
    if let Some(path) = points {
        require_massive(c.k)?;
        let ctx = context(c.k)?;
        let ev = ExponentialEvaluator::new(&g, &ctx);
        let symbol = ctx_err(FourierSymbol::new(&g, &ctx), "Fourier symbol")?;
        let sample = ctx_err(amoeba_sample(&symbol, &ev, c.resolution), "amoeba sample")?;
        let mut pts = CsvTable::new(&["kind", "a", "b"]);
        for &(a, b) in &sample.points {
            pts.push(vec!["amoeba".into(), a.into(), b.into()]);
        }
        for &(a, b) in &sample.oval.points {
            pts.push(vec!["oval".into(), a.into(), b.into()]);
        }
        for &(a, b) in &sample.xi_samples {
            pts.push(vec!["xi".into(), a.into(), b.into()]);
        }
        write_file(path, &render(&pts, c, "amoeba", passed))?;
    }
    sink.artifact(&render(&table, c, "amoeba", passed))?;
    sink.line(&format!(
        "moduli={} diameter_monotone={} {}",
        moduli.len(),
        monotone,
        verdict(passed)
    ));
    Ok(passed)
}

fn cmd_params(c: &RunConfig, sink: &mut Sink) -> Outcome {
    match c.family {
        ParamsFamily::Square => params_square(c, sink),
        ParamsFamily::Triangular => params_triangular(c, sink),
    }
}

fn params_square(c: &RunConfig, sink: &mut Sink) -> Outcome {
    let pairs: Vec<(f64, f64)> = match (c.q1.is_empty(), c.t.is_empty()) {
        (false, false) => c
            .q1
            .iter()
            .flat_map(|&q| c.t.iter().map(move |&t| (q, t)))
            .collect(),
        (true, true) => {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            (0..c.samples)
                .map(|_| (rng.gen_range(0.01..0.49), rng.gen_range(1.001..5.0)))
                .collect()
        }
        _ => return Err(Failure::input("give both --q1 and --t, or neither")),
    };
    let tol = tolerance(c);
    let mut table = CsvTable::new(&[
        "q1",
        "t",
        "k",
        "k_prime",
        "theta",
        "closed_form_modulus",
        "closed_form_theta",
        "theta_error",
        "q1_error",
        "t_error",
    ]);
    let mut worst = 0.0f64;
    for &(q1, t) in &pairs {
        let inv = ctx_err(invert_square_params(q1, t), &format!("inverting (q1, t) = ({q1}, {t})"))?;
        let b = ctx_err(ney_spitzer_bridge(q1, inv.k), "round trip")?;
        let theta_err = (b.theta - inv.theta).abs();
        let q1_err = (b.c1 / (2.0 * (b.c1 + b.c2)) - q1).abs();
        let t_err = ((b.t_mass - t) / t).abs();
        worst = worst.max(theta_err).max(q1_err).max(t_err);
        table.push(vec![
            q1.into(),
            t.into(),
            inv.k.into(),
            inv.k_prime.into(),
            inv.theta.into(),
            inv.closed_form_modulus.into(),
            inv.closed_form_theta.into(),
            theta_err.into(),
            q1_err.into(),
            t_err.into(),
        ]);
    }
    let passed = worst <= tol;
    sink.artifact(&render(&table, c, "params", passed))?;
    sink.line(&format!(
        "pairs={} max_round_trip_error={} {}",
        pairs.len(),
        fmt_f64(worst),
        verdict(passed)
    ));
    Ok(passed)
}

fn params_triangular(c: &RunConfig, sink: &mut Sink) -> Outcome {
    let tol = tolerance(c);
    let mut table = CsvTable::new(&[
        "k",
        "s_elliptic",
        "s_algebraic",
        "t_elliptic",
        "t_algebraic",
        "s_gap",
        "t_gap",
        "s_residual",
        "t_residual",
    ]);
    let mut worst = 0.0f64;
    for &k in &c.moduli {
        let r = ctx_err(triangular_relations(k), &format!("triangular relations at k = {k}"))?;
        let s_gap = (r.s_elliptic - r.s_algebraic).abs();
        let t_gap = (r.t_elliptic - r.t_algebraic).abs();
        worst = worst.max(s_gap).max(t_gap).max(r.s_residual).max(r.t_residual);
        table.push(vec![
            k.into(),
            r.s_elliptic.into(),
            r.s_algebraic.into(),
            r.t_elliptic.into(),
            r.t_algebraic.into(),
            s_gap.into(),
            t_gap.into(),
            r.s_residual.into(),
            r.t_residual.into(),
        ]);
    }
    let slope = ctx_err(triangular_blowup_slope(&[5, 6, 7, 8, 9]), "blow-up fit")?;
    let passed = worst <= tol && (slope + 1.0 / 3.0).abs() <= BLOWUP_TOL;
    sink.artifact(&render(&table, c, "params", passed))?;
    sink.line(&format!(
        "moduli={} max_error={} blowup_slope={} {}",
        c.moduli.len(),
        fmt_f64(worst),
        fmt_f64(slope),
        verdict(passed)
    ));
    Ok(passed)
}

fn cmd_series(c: &RunConfig, sink: &mut Sink) -> Outcome {
    if c.order < 10 {
        return Err(Failure::input("series order must be at least 10"));
    }
    let report = ctx_err(certify(c.order), "certification")?;
    let s = s_by_recurrence(c.order);
    let t = ctx_err(t_by_newton(c.order), "t series")?;
    let mut table = CsvTable::new(&["n", "s_n", "t_n"]);
    for (n, (a, b)) in s.to_strings().into_iter().zip(t.to_strings()).enumerate() {
        table.push(vec![n.into(), a.into(), b.into()]);
    }
    let passed = report.passed();
    sink.artifact(&render(&table, c, "series", passed))?;
    for line in report.render().lines() {
        sink.line(line);
    }
    match report.into_result() {
        Ok(_) => sink.line("ALL CHECKS PASS"),
        Err(e) => sink.line(&format!("CERTIFICATION FAILED: {e}")),
    }
    Ok(passed)
}
