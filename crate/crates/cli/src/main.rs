mod output;
mod selftest;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use multisos::bounds::{self, Constants};
use multisos::cones::{self, SearchConfig, SosConfig};
use multisos::harmonics::{dim_h_alpha, kernel_poly, pi_decompose, zonal};
use multisos::measures::{gram, InnerProduct};
use multisos::transform::{apply_t_direct, apply_t_spectral, det_t, spectrum};
use multisos::volumetrics::{self, EstimateRun, VolumeConfig};
use multisos::{monomial_basis, parse_polynomial, Polynomial, Rational, Shape};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "multisos", version, about = "Multihomogeneous forms, cone membership and volume estimates")]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
struct RunArgs {
    /// Shape literal such as "N=3,2 K=2,3".
    #[arg(long, global = true, value_parser = parse_shape)]
    #[serde(serialize_with = "shape_literal")]
    shape: Option<Shape>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Worker threads; 0 uses every core, 1 runs serially.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Multistarts for sphere searches, or the iteration cap for `cone sos`.
    #[arg(long, global = true)]
    budget: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write per-sample rows to this CSV file.
    #[arg(long, global = true)]
    dump: Option<PathBuf>,
    /// Overrides such as c1=0.5,c2=2.
    #[arg(long, global = true, value_parser = parse_constants)]
    constants: Option<Constants>,
    #[arg(long, global = true)]
    poly: Option<String>,
    #[arg(long = "poly-file", global = true)]
    poly_file: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dimensions of P, the section, and each harmonic component.
    Dims,
    /// Exact Gram matrix of the monomial basis.
    Gram {
        #[arg(long, value_enum, default_value_t = Ip::Usual)]
        ip: Ip,
    },
    /// Harmonic components of a form.
    Decompose,
    /// Zonal harmonic at a rational point, or the full reproducing kernel.
    Zonal {
        /// Comma-separated rational coordinates, e.g. 3/5,4/5.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        /// Blockwise degrees of the harmonic component.
        #[arg(long)]
        alpha: Option<String>,
    },
    /// Averaging operator.
    T {
        #[command(subcommand)]
        op: TOp,
    },
    /// Cone membership.
    Cone {
        #[command(subcommand)]
        op: ConeOp,
    },
    /// Monte Carlo volume estimates.
    Volume {
        #[command(subcommand)]
        op: VolumeOp,
    },
    /// Evaluated bounds.
    Bounds {
        #[command(subcommand)]
        op: Option<BoundsOp>,
    },
    /// Exact-identity suite.
    Selftest,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Ip {
    Usual,
    Differential,
}

#[derive(Subcommand, Debug)]
enum TOp {
    Spectrum,
    Apply,
    Det,
}

#[derive(Subcommand, Debug)]
enum ConeOp {
    /// Minimum over the product of spheres.
    Pos,
    /// Sum-of-squares feasibility.
    Sos,
    /// Power-of-linear-forms kernel at a rational point.
    Lin {
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
}

#[derive(Subcommand, Debug)]
enum VolumeOp {
    /// Volume ratio of the nonnegative section.
    Pos {
        /// Restrict to a coordinate plane of the section, e.g. 0,1.
        #[arg(long)]
        plane: Option<String>,
    },
    /// Squared half mean width of the sum-of-squares section.
    SqWidth,
    /// Isotropy of the zonal pushforward measure.
    Isotropy,
}

#[derive(Subcommand, Debug)]
enum BoundsOp {
    /// Sweep shapes and emit one row per bound.
    Grid {
        #[arg(long, default_value_t = 3)]
        max_blocks: usize,
        #[arg(long, default_value_t = 6)]
        max_n: usize,
        #[arg(long, default_value_t = 4)]
        max_k: u32,
    },
    /// Two-block corollary bounds for (n, k).
    Corollary {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        variant: u8,
    },
    /// Classical single-block bounds for (n, k).
    Homogeneous {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
    },
}

fn parse_shape(s: &str) -> Result<Shape, String> {
    s.parse().map_err(|e: multisos::Error| e.to_string())
}

fn parse_constants(s: &str) -> Result<Constants, String> {
    s.parse().map_err(|e: multisos::Error| e.to_string())
}

fn shape_literal<S: serde::Serializer>(shape: &Option<Shape>, s: S) -> Result<S::Ok, S::Error> {
    match shape {
        Some(sh) => s.serialize_str(&sh.to_string()),
        None => s.serialize_none(),
    }
}

enum Failure {
    Usage(String),
    Domain(String),
}

impl From<multisos::Error> for Failure {
    fn from(e: multisos::Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

type Out<T> = Result<T, Failure>;

struct Ctx {
    run: RunArgs,
    command: &'static str,
}

/// Command result plus optional per-sample table.
struct Report {
    result: Value,
    table: Option<(Vec<String>, Vec<Vec<String>>)>,
    ok: bool,
}

impl Report {
    fn new(result: Value) -> Self {
        Report { result, table: None, ok: true }
    }
}

fn rat(r: &Rational) -> String {
    r.to_string()
}

fn csv_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty())
}

fn parse_point(s: &str) -> Out<Vec<Rational>> {
    csv_list(s).map(|t| t.parse::<Rational>().map_err(|_| Failure::Usage(format!("`{t}` is not a rational")))).collect()
}

fn parse_u32_list(s: &str) -> Out<Vec<u32>> {
    csv_list(s).map(|t| t.parse::<u32>().map_err(|_| Failure::Usage(format!("`{t}` is not a degree")))).collect()
}

fn alpha_key(alpha: &[u32]) -> String {
    alpha.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}

impl Ctx {
    fn shape(&self) -> Out<&Shape> {
        self.run.shape.as_ref().ok_or_else(|| Failure::Usage(format!("`{}` needs --shape", self.command)))
    }

    fn poly(&self) -> Out<Polynomial> {
        let shape = self.shape()?;
        let text = match (&self.run.poly, &self.run.poly_file) {
            (Some(t), None) => t.clone(),
            (None, Some(path)) => std::fs::read_to_string(path)?,
            (Some(_), Some(_)) => return Err(Failure::Usage("give either --poly or --poly-file".into())),
            (None, None) => return Err(Failure::Usage(format!("`{}` needs --poly or --poly-file", self.command))),
        };
        Ok(parse_polynomial(shape, text.trim())?)
    }

    fn search(&self) -> SearchConfig {
        SearchConfig::with_starts(self.run.budget.unwrap_or(64), self.run.seed)
    }

    fn volume(&self) -> VolumeConfig {
        let mut cfg = VolumeConfig::new(self.run.samples.unwrap_or(1000), self.run.seed);
        cfg.workers = self.run.workers;
        if let Some(b) = self.run.budget {
            cfg.search.starts = b;
        }
        cfg
    }

    fn constants(&self) -> Constants {
        self.run.constants.clone().unwrap_or_default()
    }
}

fn dims(ctx: &Ctx) -> Out<Report> {
    let shape = ctx.shape()?;
    let mut dims_h = BTreeMap::new();
    for alpha in shape.harmonic_indices() {
        dims_h.insert(alpha_key(&alpha), dim_h_alpha(shape, &alpha));
    }
    Ok(Report::new(json!({ "dim_P": shape.dim(), "M": shape.section_dim(), "dims_H": dims_h })))
}

fn gram_cmd(ctx: &Ctx, ip: Ip) -> Out<Report> {
    let shape = ctx.shape()?;
    shape.require_exact_size()?;
    let which = match ip {
        Ip::Usual => InnerProduct::Usual,
        Ip::Differential => InnerProduct::Differential,
    };
    let basis: Vec<Polynomial> =
        monomial_basis(shape).into_iter().map(|m| Polynomial::monomial(shape, m)).collect::<Result<_, _>>()?;
    let g = gram(&basis, which)?;
    let entries: Vec<Vec<String>> = g.entries.iter().map(|row| row.iter().map(rat).collect()).collect();
    let names: Vec<String> = basis.iter().map(|p| p.to_string()).collect();
    Ok(Report::new(json!({ "inner_product": which, "basis": names, "entries": entries })))
}

fn decompose(ctx: &Ctx) -> Out<Report> {
    let p = ctx.poly()?;
    let split = pi_decompose(&p)?;
    let components: BTreeMap<String, String> =
        split.components.iter().map(|(a, f)| (alpha_key(&a.0), f.to_string())).collect();
    Ok(Report::new(json!({
        "input": p.to_string(),
        "components": components,
        "reconstructs": split.reconstruct()? == p,
    })))
}

fn zonal_cmd(ctx: &Ctx, point: &str, alpha: Option<&str>) -> Out<Report> {
    let shape = ctx.shape()?;
    let v = parse_point(point)?;
    let v_text: Vec<String> = v.iter().map(rat).collect();
    Ok(Report::new(match alpha {
        Some(a) => {
            let alpha = parse_u32_list(a)?;
            let q = zonal(&v, shape, &alpha)?;
            json!({ "point": v_text, "alpha": alpha, "zonal": q.to_string(), "value_at_point": rat(&q.evaluate(&v)?) })
        }
        None => {
            let p = kernel_poly(&v, shape)?;
            json!({ "point": v_text, "kernel": p.to_string(), "value_at_point": rat(&p.evaluate(&v)?) })
        }
    }))
}

fn t_cmd(ctx: &Ctx, op: &TOp) -> Out<Report> {
    match op {
        TOp::Spectrum => {
            let spec = spectrum(ctx.shape()?)?;
            let eigen: Vec<Value> = spec
                .eigen
                .iter()
                .map(|(a, (val, mult))| json!({ "alpha": alpha_key(&a.0), "eigenvalue": rat(val), "multiplicity": mult }))
                .collect();
            Ok(Report::new(json!({
                "eigenvalues": eigen,
                "A": rat(&spec.max()),
                "B": rat(&spec.min()),
                "det": rat(&spec.determinant()),
            })))
        }
        TOp::Apply => {
            let p = ctx.poly()?;
            let spectral = apply_t_spectral(&p)?;
            let direct = apply_t_direct(&p)?;
            Ok(Report::new(json!({
                "input": p.to_string(),
                "image": spectral.to_string(),
                "direct_agrees": spectral == direct,
            })))
        }
        TOp::Det => {
            let d = det_t(ctx.shape()?)?;
            Ok(Report::new(json!({
                "det": rat(&d.closed_form),
                "root": d.root,
                "direct": d.direct.as_ref().map(rat),
            })))
        }
    }
}

fn cone_cmd(ctx: &Ctx, op: &ConeOp) -> Out<Report> {
    match op {
        ConeOp::Pos => {
            let p = ctx.poly()?;
            let cfg = ctx.search();
            let m = cones::pos_min(&p, &cfg)?;
            Ok(Report::new(json!({
                "min": m.value,
                "argmin": m.argmin,
                "nonnegative": m.value >= -1e-9,
                "starts": cfg.starts,
            })))
        }
        ConeOp::Sos => {
            let p = ctx.poly()?;
            let mut cfg = SosConfig::default();
            if let Some(b) = ctx.run.budget {
                cfg.max_iters = b;
            }
            let st = cones::sos_feasibility(&p, &cfg)?;
            let mut check = serde_json::Map::new();
            if let Some(w) = &st.witness {
                let (err, lam) = cones::verify_witness(&p, w);
                check.insert("witness_residual".into(), json!(err));
                check.insert("witness_min_eigenvalue".into(), json!(lam));
            }
            if let Some(c) = &st.certificate {
                let (lam, pairing) = cones::verify_certificate(&p, c)?;
                check.insert("certificate_min_eigenvalue".into(), json!(lam));
                check.insert("certificate_pairing".into(), json!(pairing));
            }
            let mut result = serde_json::to_value(&st).map_err(|e| Failure::Domain(e.to_string()))?;
            result["verification"] = Value::Object(check);
            result["input"] = json!(p.to_string());
            Ok(Report::new(result))
        }
        ConeOp::Lin { point } => {
            let shape = ctx.shape()?;
            let v = parse_point(point)?;
            let k = cones::linpow_kernel(&v, shape)?;
            let dev = cones::l_extreme_check(&v, shape)?;
            Ok(Report::new(json!({
                "point": v.iter().map(rat).collect::<Vec<_>>(),
                "kernel": k.to_string(),
                "t_identity_deviation": rat(&dev),
            })))
        }
    }
}

fn estimate_report(run: EstimateRun) -> Out<Report> {
    let result = serde_json::to_value(&run.report).map_err(|e| Failure::Domain(e.to_string()))?;
    let rows = run.rows.iter().map(|r| r.iter().map(|&x| output::sig17(x)).collect()).collect();
    Ok(Report { result, table: Some((run.columns, rows)), ok: true })
}

fn volume_cmd(ctx: &Ctx, op: &VolumeOp) -> Out<Report> {
    let shape = ctx.shape()?;
    let cfg = ctx.volume();
    if cfg.samples == 0 {
        return Err(Failure::Usage("--samples must be positive".into()));
    }
    let run = match op {
        VolumeOp::Pos { plane: None } => volumetrics::estimate_mu_pos(shape, &cfg)?,
        VolumeOp::Pos { plane: Some(p) } => {
            let idx: Vec<usize> = csv_list(p)
                .map(|t| t.parse().map_err(|_| Failure::Usage(format!("`{t}` is not an index"))))
                .collect::<Out<_>>()?;
            let [i, j] = idx[..] else {
                return Err(Failure::Usage("--plane takes two indices".into()));
            };
            volumetrics::estimate_mu_pos_slice(shape, (i, j), &cfg)?
        }
        VolumeOp::SqWidth => volumetrics::mean_width_sq(shape, &cfg)?,
        VolumeOp::Isotropy => volumetrics::isotropy_check(shape, &cfg)?,
    };
    estimate_report(run)
}

fn bound_rows(report: &bounds::BoundReport, rows: &mut Vec<Vec<String>>) {
    let f = |x: Option<f64>| x.map(output::sig17).unwrap_or_default();
    for (name, b) in &report.records {
        rows.push(vec![
            report.title.clone(),
            report.shape.clone().unwrap_or_default(),
            name.clone(),
            f(b.lower),
            f(b.upper),
            b.unresolved.join(" "),
        ]);
    }
    if let Some(c) = &report.comparison {
        bound_rows(c, rows);
    }
}

fn bounds_table(reports: &[bounds::BoundReport]) -> (Vec<String>, Vec<Vec<String>>) {
    let columns = ["report", "shape", "record", "lower", "upper", "unresolved"].map(String::from).to_vec();
    let mut rows = Vec::new();
    for r in reports {
        bound_rows(r, &mut rows);
    }
    (columns, rows)
}

fn grid_shapes(max_blocks: usize, max_n: usize, max_k: u32) -> Vec<Shape> {
    let mut out = Vec::new();
    let mut stack: Vec<Vec<(usize, u32)>> = vec![vec![]];
    while let Some(blocks) = stack.pop() {
        if !blocks.is_empty() {
            let (ns, ks): (Vec<usize>, Vec<u32>) = blocks.iter().copied().unzip();
            if let Ok(s) = Shape::from_lists(&ns, &ks) {
                out.push(s);
            }
        }
        if blocks.len() < max_blocks {
            let last = blocks.last().copied().unwrap_or((2, 2));
            for n in 2..=max_n {
                for k in (2..=max_k).step_by(2) {
                    if (n, k) >= last || blocks.is_empty() {
                        let mut next = blocks.clone();
                        next.push((n, k));
                        stack.push(next);
                    }
                }
            }
        }
    }
    out.sort();
    out
}

fn bounds_cmd(ctx: &Ctx, op: Option<&BoundsOp>) -> Out<Report> {
    let c = ctx.constants();
    let reports = match op {
        None => {
            let shape = ctx.shape()?;
            vec![bounds::thm_main_bounds(shape, &c)?, bounds::section_bounds(shape, &c)?]
        }
        Some(BoundsOp::Grid { max_blocks, max_n, max_k }) => {
            let mut out = Vec::new();
            for s in grid_shapes(*max_blocks, *max_n, *max_k) {
                out.push(bounds::thm_main_bounds(&s, &c)?);
            }
            let (columns, rows) = bounds_table(&out);
            let result = json!({ "shapes": out.len(), "rows": rows.len() });
            return Ok(Report { result, table: Some((columns, rows)), ok: true });
        }
        Some(BoundsOp::Corollary { n, k, variant }) => vec![bounds::corollary_bounds(*n, *k, *variant, &c)?],
        Some(BoundsOp::Homogeneous { n, k }) => vec![bounds::blekherman_bounds(*n, *k, &c)?],
    };
    let table = bounds_table(&reports);
    let result = serde_json::to_value(&reports).map_err(|e| Failure::Domain(e.to_string()))?;
    Ok(Report { result: json!({ "reports": result }), table: Some(table), ok: true })
}

fn selftest_cmd() -> Out<Report> {
    let checks = selftest::run()?;
    let ok = checks.iter().all(|c| c.pass);
    let result = json!({ "passed": ok, "checks": checks });
    Ok(Report { result, table: None, ok })
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Dims => "dims",
        Command::Gram { .. } => "gram",
        Command::Decompose => "decompose",
        Command::Zonal { .. } => "zonal",
        Command::T { op: TOp::Spectrum } => "t spectrum",
        Command::T { op: TOp::Apply } => "t apply",
        Command::T { op: TOp::Det } => "t det",
        Command::Cone { op: ConeOp::Pos } => "cone pos",
        Command::Cone { op: ConeOp::Sos } => "cone sos",
        Command::Cone { op: ConeOp::Lin { .. } } => "cone lin",
        Command::Volume { op: VolumeOp::Pos { .. } } => "volume pos",
        Command::Volume { op: VolumeOp::SqWidth } => "volume sq-width",
        Command::Volume { op: VolumeOp::Isotropy } => "volume isotropy",
        Command::Bounds { op: None } => "bounds",
        Command::Bounds { op: Some(BoundsOp::Grid { .. }) } => "bounds grid",
        Command::Bounds { op: Some(BoundsOp::Corollary { .. }) } => "bounds corollary",
        Command::Bounds { op: Some(BoundsOp::Homogeneous { .. }) } => "bounds homogeneous",
        Command::Selftest => "selftest",
    }
}

fn dispatch(cmd: &Command, ctx: &Ctx) -> Out<Report> {
    match cmd {
        Command::Dims => dims(ctx),
        Command::Gram { ip } => gram_cmd(ctx, *ip),
        Command::Decompose => decompose(ctx),
        Command::Zonal { point, alpha } => zonal_cmd(ctx, point, alpha.as_deref()),
        Command::T { op } => t_cmd(ctx, op),
        Command::Cone { op } => cone_cmd(ctx, op),
        Command::Volume { op } => volume_cmd(ctx, op),
        Command::Bounds { op } => bounds_cmd(ctx, op.as_ref()),
        Command::Selftest => selftest_cmd(),
    }
}

fn emit(ctx: &Ctx, report: &Report) -> Out<String> {
    if let (Some(path), Some((columns, rows))) = (&ctx.run.dump, &report.table) {
        std::fs::write(path, output::to_table_csv(columns, rows)?)?;
    }
    let doc = json!({ "command": ctx.command, "config": ctx.run, "result": report.result });
    Ok(match ctx.run.format {
        Format::Json => output::to_json(&doc)?,
        Format::Csv => match &report.table {
            Some((columns, rows)) if ctx.run.dump.is_none() => output::to_table_csv(columns, rows)?,
            _ => output::to_key_value_csv(&doc)?,
        },
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx { command: command_name(&cli.command), run: cli.run };
    if ctx.run.workers > 0 {
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(ctx.run.workers).build_global();
    }
    let start = Instant::now();
    let outcome = dispatch(&cli.command, &ctx).and_then(|r| emit(&ctx, &r).map(|s| (s, r.ok)));
    eprintln!("wall time: {:.3} s", start.elapsed().as_secs_f64());
    match outcome {
        Ok((text, ok)) => {
            // A closed pipe downstream is not an error of ours.
            let _ = std::io::stdout().write_all(text.as_bytes());
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
