use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use ttgreeks::mc::{self, McConfig, McEstimate};
use ttgreeks::model::ModelSpec;
use ttgreeks::pipeline::{Builder, Greek, Method, ParamTensor};
use ttgreeks::{Error, Execution};

use crate::artifact::{self, Artifact, BuildSummary};
use crate::config::RunConfig;
use crate::error::CliError;

pub type Node = Vec<(usize, usize)>;

/// Price or one Greek.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum)]
pub enum Target {
    Price,
    Vega,
    Delta,
    Gamma,
}

impl Target {
    pub const ALL: [Target; 4] = [Target::Price, Target::Vega, Target::Delta, Target::Gamma];

    pub fn greek(self) -> Option<Greek> {
        match self {
            Target::Price => None,
            Target::Vega => Some(Greek::Vega),
            Target::Delta => Some(Greek::Delta),
            Target::Gamma => Some(Greek::Gamma),
        }
    }

    pub fn name(self) -> &'static str {
        self.greek().map_or("price", Greek::name)
    }

    pub fn unit(self) -> &'static str {
        match self {
            Target::Price => "currency",
            Target::Vega => "currency per unit volatility",
            Target::Delta => "currency per unit spot",
            Target::Gamma => "currency per unit spot squared",
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Target::Price => "V",
            Target::Vega => "nu",
            Target::Delta => "Delta",
            Target::Gamma => "gamma",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum MethodArg {
    Nd,
    An,
    Both,
}

impl MethodArg {
    fn methods(self) -> &'static [Method] {
        match self {
            MethodArg::Nd => &[Method::Nd],
            MethodArg::An => &[Method::An],
            MethodArg::Both => &[Method::Nd, Method::An],
        }
    }
}

fn method_tag(m: Method) -> &'static str {
    match m {
        Method::Nd => "tt-nd",
        Method::An => "tt-an",
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum McMethod {
    /// Fixed-seed central differences.
    Fd,
    /// Central differences with a fresh seed per bumped run.
    FdIndependent,
    /// Malliavin weights.
    Mv,
    /// Fixed-seed differences for vega and delta, Malliavin for gamma.
    Mix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Axis {
    Sigma,
    S0,
}

pub fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn csv_writer(path: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>, CliError> {
    Ok(csv::Writer::from_writer(output(path)?))
}

fn param_header(d: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=d).map(|m| format!("sigma_{m}")).collect();
    h.extend((1..=d).map(|m| format!("s0_{m}")));
    h
}

fn node_values(t: &ParamTensor, node: &Node) -> (Vec<f64>, Vec<f64>) {
    let g = &t.grids;
    node.iter()
        .enumerate()
        .map(|(m, &(k, l))| (g.sigma[m].nodes[k], g.spot[m].nodes[l]))
        .unzip()
}

/// Targets in the order given, defaulting to price and every Greek.
fn targets(requested: &[Target]) -> Vec<Target> {
    if requested.is_empty() {
        Target::ALL.to_vec()
    } else {
        let mut t = requested.to_vec();
        t.sort();
        t.dedup();
        t
    }
}

/// 0-based asset indices from 1-based `--kappa` values.
fn assets(kappa: Option<usize>, d: usize) -> Result<Vec<usize>, CliError> {
    match kappa {
        None => Ok((0..d).collect()),
        Some(k) if k >= 1 && k <= d => Ok(vec![k - 1]),
        Some(k) => Err(CliError::Config(format!("--kappa must be between 1 and {d}, got {k}"))),
    }
}

pub fn random_nodes(d: usize, n_p: usize, count: usize, seed: u64) -> Vec<Node> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..d).map(|_| (rng.random_range(0..n_p), rng.random_range(0..n_p))).collect())
        .collect()
}

// ---------------------------------------------------------------- build

pub struct BuildArgs {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub analytic: Option<bool>,
}

pub fn build(args: &BuildArgs) -> Result<(), CliError> {
    let config = RunConfig::load(&args.config)?;
    let dir = args
        .out
        .clone()
        .or_else(|| config.outputs.dir.clone())
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set outputs.dir".into()))?;
    let spec = config.model_spec()?;
    let t0 = Instant::now();
    let builder = Builder::new(&spec, &config.grid_spec()?, &config.tolerances()?, &config.build_options())?;
    let price = builder.price()?;
    let mut analytic = Vec::new();
    let mut skipped = Vec::new();
    if args.analytic.unwrap_or(config.build.an_greeks) {
        for greek in Greek::ALL {
            for kappa in 0..spec.d {
                match builder.greek_an(greek, kappa) {
                    Ok(g) => analytic.push(g),
                    Err(e @ Error::MemoryLimit { .. }) => {
                        log::warn!("analytic {} for asset {} skipped: {e}", greek.name(), kappa + 1);
                        skipped.push(format!("{} {}: {e}", greek.name(), kappa + 1));
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    let summary = BuildSummary {
        assets: spec.d,
        pre_merge_cores: 3 * spec.d,
        price_bonds: price.tensor.bond_dims(),
        price: price.report.clone(),
        analytic: analytic.iter().map(|g| g.report.clone()).collect(),
        analytic_skipped: skipped,
    };
    artifact::write(&dir, &config, &price, &analytic, &summary)?;
    let r = &price.report;
    eprintln!("wrote {} ({:.1}s)", dir.display(), t0.elapsed().as_secs_f64());
    eprintln!("  assets {}  asset order {:?}  pre-merge cores {}", spec.d, r.ordering, summary.pre_merge_cores);
    eprintln!(
        "  characteristic fn: TCI bonds {:?} -> SVD {:?} ({} samples, {} sweeps)",
        r.phi_bonds_tci, r.phi_bonds, r.phi_tci.evaluations, r.phi_tci.sweeps
    );
    eprintln!(
        "  payoff: TCI bonds {:?} -> SVD {:?} ({} samples, {} sweeps)",
        r.payoff_bonds_tci, r.payoff_bonds, r.payoff_tci.evaluations, r.payoff_tci.sweeps
    );
    eprintln!("  price bonds {:?}", summary.price_bonds);
    for g in &summary.analytic {
        eprintln!(
            "  analytic {} asset {}: bonds {:?} (factor bonds {:?})",
            g.greek.map_or("?", Greek::name),
            g.kappa + 1,
            g.bonds,
            g.psi_bonds
        );
    }
    Ok(())
}

// ---------------------------------------------------------------- eval

pub struct EvalArgs {
    pub artifact: PathBuf,
    pub points: Option<PathBuf>,
    pub random: Option<usize>,
    pub seed: u64,
    pub targets: Vec<Target>,
    pub kappa: Option<usize>,
    pub method: MethodArg,
    pub out: Option<PathBuf>,
}

/// Reads node indices from a CSV with either `k_m, l_m` index columns or
/// `sigma_m, s0_m` value columns (values must be grid nodes).
fn read_points(path: &Path, art: &Artifact) -> Result<Vec<Node>, CliError> {
    let d = art.d();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header = rdr.headers()?.clone();
    let col = |name: String| header.iter().position(|h| h == name);
    let by_index: Option<Vec<(usize, usize)>> =
        (1..=d).map(|m| Some((col(format!("k_{m}"))?, col(format!("l_{m}"))?))).collect();
    let by_value: Option<Vec<(usize, usize)>> =
        (1..=d).map(|m| Some((col(format!("sigma_{m}"))?, col(format!("s0_{m}"))?))).collect();
    let mut nodes = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |c: usize| -> Result<&str, CliError> {
            rec.get(c).ok_or_else(|| CliError::Config(format!("{}: row {} is short", path.display(), row + 1)))
        };
        let bad = |e: String| CliError::Config(format!("{}: row {}: {e}", path.display(), row + 1));
        let node: Node = if let Some(cols) = &by_index {
            let n_p = art.n_p();
            cols.iter()
                .map(|&(a, b)| {
                    let k: usize = field(a)?.parse().map_err(|e| bad(format!("{e}")))?;
                    let l: usize = field(b)?.parse().map_err(|e| bad(format!("{e}")))?;
                    if k >= n_p || l >= n_p {
                        return Err(bad(format!("node index out of range 0..{n_p}")));
                    }
                    Ok((k, l))
                })
                .collect::<Result<_, _>>()?
        } else if let Some(cols) = &by_value {
            let mut sigma = Vec::with_capacity(d);
            let mut s0 = Vec::with_capacity(d);
            for &(a, b) in cols {
                sigma.push(field(a)?.parse::<f64>().map_err(|e| bad(format!("{e}")))?);
                s0.push(field(b)?.parse::<f64>().map_err(|e| bad(format!("{e}")))?);
            }
            art.price.tensor.locate(&sigma, &s0).map_err(|e| bad(e.to_string()))?
        } else {
            return Err(CliError::Config(format!(
                "{}: expected columns k_1..k_{d}, l_1..l_{d} or sigma_1..sigma_{d}, s0_1..s0_{d}",
                path.display()
            )));
        };
        nodes.push(node);
    }
    Ok(nodes)
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let art = Artifact::open(&args.artifact)?;
    let d = art.d();
    let nodes = match (&args.points, args.random) {
        (Some(p), None) => read_points(p, &art)?,
        (None, Some(n)) => random_nodes(d, art.n_p(), n, args.seed),
        _ => return Err(CliError::Config("pass exactly one of --points and --random".into())),
    };
    let kappas = assets(args.kappa, d)?;
    let mut tensors: Vec<(Target, Option<Method>, Option<usize>, ParamTensor)> = Vec::new();
    for t in targets(&args.targets) {
        match t.greek() {
            None => tensors.push((t, None, None, art.price.tensor.clone())),
            Some(g) => {
                for &kappa in &kappas {
                    for &m in args.method.methods() {
                        match art.greek(g, m, kappa)? {
                            Some(tensor) => tensors.push((t, Some(m), Some(kappa), tensor)),
                            None if args.method == MethodArg::Both => {
                                log::warn!("no analytic {} tensor for asset {} in the artifact", g.name(), kappa + 1)
                            }
                            None => {
                                return Err(CliError::Config(format!(
                                    "artifact has no analytic {} tensor for asset {}; rebuild with --an",
                                    g.name(),
                                    kappa + 1
                                )))
                            }
                        }
                    }
                }
            }
        }
    }
    let mut w = csv_writer(args.out.as_deref())?;
    let mut header = vec!["point".to_string()];
    header.extend(param_header(d));
    header.extend((1..=d).flat_map(|m| [format!("k_{m}"), format!("l_{m}")]));
    header.extend(["quantity", "method", "kappa", "value", "imag", "unit", "flops"].map(String::from));
    w.write_record(&header)?;
    for (tensor_i, (t, m, kappa, tensor)) in tensors.iter().enumerate() {
        let evals = Execution::Parallel.map_collect(nodes.len(), |i| tensor.evaluate_indices(&nodes[i]));
        for (i, e) in evals.into_iter().enumerate() {
            let e = e?;
            let (sigma, s0) = node_values(&art.price.tensor, &nodes[i]);
            let mut rec: Vec<String> = vec![i.to_string()];
            rec.extend(sigma.iter().chain(&s0).map(|v| v.to_string()));
            rec.extend(nodes[i].iter().flat_map(|&(k, l)| [k.to_string(), l.to_string()]));
            rec.push(t.name().into());
            rec.push(m.map_or("tt", method_tag).into());
            rec.push(kappa.map_or(String::new(), |k| (k + 1).to_string()));
            rec.push(e.value.to_string());
            rec.push(e.imag.to_string());
            rec.push(t.unit().into());
            rec.push(e.flops.to_string());
            w.write_record(&rec)?;
        }
        log::debug!("evaluated tensor {tensor_i}");
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- MC helpers

/// One Monte Carlo estimate of `target` with the given estimator.
pub fn mc_estimate(
    spec: &ModelSpec,
    sigma: &[f64],
    s0: &[f64],
    cfg: &McConfig,
    target: Target,
    kappa: usize,
    method: McMethod,
) -> Result<(McEstimate, &'static str), CliError> {
    let Some(g) = target.greek() else {
        return Ok((mc::mc_price(spec, sigma, s0, cfg)?, "mc"));
    };
    let method = match (method, g) {
        (McMethod::Mix, Greek::Gamma) => McMethod::Mv,
        (McMethod::Mix, _) => McMethod::Fd,
        (m, _) => m,
    };
    Ok(match method {
        McMethod::Fd => (mc::mc_greek_fd(spec, sigma, s0, cfg, g, kappa)?, "mc-fd"),
        McMethod::FdIndependent => (mc::mc_greek_fd_independent(spec, sigma, s0, cfg, g, kappa)?, "mc-fd-independent"),
        McMethod::Mv | McMethod::Mix => (mc::mv_greek(spec, sigma, s0, cfg, g, kappa)?, "mc-mv"),
    })
}

// ---------------------------------------------------------------- compare

pub struct CompareArgs {
    pub artifact: PathBuf,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub reference_paths: Option<usize>,
    pub kappa: usize,
    pub out: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ComparisonRow {
    pub quantity: &'static str,
    pub e_tt_nd: f64,
    pub e_tt_an: Option<f64>,
    pub e_mc: f64,
    /// Root-mean-square standard error of the reference run.
    pub e_reference: f64,
    pub c_tt_nd: f64,
    pub c_tt_an: Option<f64>,
    pub c_mc: u64,
    pub t_tt_nd: f64,
    pub t_tt_an: Option<f64>,
    pub t_mc: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub assets: usize,
    pub kappa: usize,
    pub samples: usize,
    pub sample_seed: u64,
    pub mc_paths: usize,
    pub mc_seed: u64,
    pub reference_paths: usize,
    pub reference_seed: u64,
    pub nodes: Vec<Node>,
    pub rows: Vec<ComparisonRow>,
}

fn rms(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    (s / n.max(1) as f64).sqrt()
}

/// Mean wall time of one evaluation, repeated enough to be measurable.
fn time_eval(t: &ParamTensor, nodes: &[Node]) -> Result<(f64, f64), CliError> {
    let reps = (2000 / nodes.len()).max(1);
    let mut flops = 0u64;
    let t0 = Instant::now();
    for _ in 0..reps {
        for n in nodes {
            flops += std::hint::black_box(t.evaluate_indices(n)?).flops;
        }
    }
    let count = (reps * nodes.len()) as f64;
    Ok((flops as f64 / count, t0.elapsed().as_secs_f64() / count))
}

pub fn compare(args: &CompareArgs) -> Result<ComparisonReport, CliError> {
    let art = Artifact::open(&args.artifact)?;
    let cfg = &art.config;
    let d = art.d();
    let kappa = assets(Some(args.kappa), d)?[0];
    let samples = args.samples.unwrap_or(cfg.compare.samples);
    let sample_seed = args.seed.unwrap_or(cfg.compare.seed);
    let paths = args.paths.unwrap_or(cfg.mc.n_paths);
    let reference_paths = args.reference_paths.unwrap_or(cfg.mc.reference_paths);
    if samples == 0 || paths == 0 || reference_paths == 0 {
        return Err(CliError::Config("sample and path counts must be positive".into()));
    }
    // distinct seeds for the benchmark and the reference runs
    let mc_seed = cfg.mc.seed;
    let reference_seed = cfg.mc.seed ^ 0x5245_4645_5245_4e43;
    let nodes = random_nodes(d, art.n_p(), samples, sample_seed);

    let mut rows = Vec::new();
    let mut reference = Vec::with_capacity(samples);
    for node in &nodes {
        let (sigma, s0) = node_values(&art.price.tensor, node);
        reference.push(mc::mv_all(&art.spec, &sigma, &s0, &McConfig { seed: reference_seed, ..cfg.mc_config(reference_paths) })?);
    }
    for t in Target::ALL {
        let refs: Vec<McEstimate> = reference
            .iter()
            .map(|r| match t.greek() {
                None => r.price,
                Some(g) => r.get(g, kappa),
            })
            .collect();
        let tt = |m: Method| -> Result<Option<(f64, f64, f64)>, CliError> {
            let tensor = match t.greek() {
                None => Some(art.price.tensor.clone()),
                Some(g) => art.greek(g, m, kappa)?,
            };
            let Some(tensor) = tensor else { return Ok(None) };
            let values: Vec<f64> =
                nodes.iter().map(|n| tensor.evaluate_indices(n).map(|e| e.value)).collect::<Result<_, _>>()?;
            let err = rms(values.iter().zip(&refs).map(|(v, r)| v - r.value));
            let (flops, secs) = time_eval(&tensor, &nodes)?;
            Ok(Some((err, flops, secs)))
        };
        let nd = tt(Method::Nd)?.expect("ND tensors always exist");
        let an = if t == Target::Price { Some(nd) } else { tt(Method::An)? };
        let mut bench = Vec::with_capacity(samples);
        let t0 = Instant::now();
        for node in &nodes {
            let (sigma, s0) = node_values(&art.price.tensor, node);
            let mc_cfg = McConfig { seed: mc_seed, ..cfg.mc_config(paths) };
            bench.push(mc_estimate(&art.spec, &sigma, &s0, &mc_cfg, t, kappa, McMethod::Mix)?.0);
        }
        let t_mc = t0.elapsed().as_secs_f64() / samples as f64;
        rows.push(ComparisonRow {
            quantity: t.symbol(),
            e_tt_nd: nd.0,
            e_tt_an: an.map(|a| a.0),
            e_mc: rms(bench.iter().map(|b| b.std_error)),
            e_reference: rms(refs.iter().map(|r| r.std_error)),
            c_tt_nd: nd.1,
            c_tt_an: an.map(|a| a.1),
            c_mc: mc::mc_cost(d, paths),
            t_tt_nd: nd.2,
            t_tt_an: an.map(|a| a.2),
            t_mc,
        });
    }
    let report = ComparisonReport {
        assets: d,
        kappa: kappa + 1,
        samples,
        sample_seed,
        mc_paths: paths,
        mc_seed,
        reference_paths,
        reference_seed,
        nodes,
        rows,
    };
    if let Some(p) = &args.json {
        std::fs::write(p, serde_json::to_string_pretty(&report)?)?;
    }
    match &args.out {
        Some(p) => write_comparison_csv(&report, Some(p))?,
        None => {
            print_table(&report, &mut std::io::stdout().lock())?;
        }
    }
    Ok(report)
}

fn opt(v: Option<f64>, fmt: impl Fn(f64) -> String) -> String {
    v.map_or("-".into(), fmt)
}

pub fn print_table(r: &ComparisonReport, w: &mut dyn Write) -> Result<(), CliError> {
    writeln!(
        w,
        "d = {}, Greeks w.r.t. asset {}, {} random nodes (seed {}), MC {} paths (seed {}), reference MV {} paths (seed {})",
        r.assets, r.kappa, r.samples, r.sample_seed, r.mc_paths, r.mc_seed, r.reference_paths, r.reference_seed
    )?;
    writeln!(
        w,
        "{:<6} {:>10} {:>10} {:>10} {:>10} {:>9} {:>9} {:>10} {:>11} {:>11} {:>10}",
        "", "e_TT,ND", "e_TT,AN", "e_MC", "e_ref", "c_TT,ND", "c_TT,AN", "c_MC", "t_TT,ND[s]", "t_TT,AN[s]", "t_MC[s]"
    )?;
    for row in &r.rows {
        writeln!(
            w,
            "{:<6} {:>10.3e} {:>10} {:>10.3e} {:>10.3e} {:>9.0} {:>9} {:>10.2e} {:>11.2e} {:>11} {:>10.3e}",
            row.quantity,
            row.e_tt_nd,
            opt(row.e_tt_an, |v| format!("{v:.3e}")),
            row.e_mc,
            row.e_reference,
            row.c_tt_nd,
            opt(row.c_tt_an, |v| format!("{v:.0}")),
            row.c_mc as f64,
            row.t_tt_nd,
            opt(row.t_tt_an, |v| format!("{v:.2e}")),
            row.t_mc
        )?;
    }
    Ok(())
}

fn write_comparison_csv(r: &ComparisonReport, path: Option<&Path>) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "quantity", "e_tt_nd", "e_tt_an", "e_mc", "e_reference", "c_tt_nd", "c_tt_an", "c_mc", "t_tt_nd_s",
        "t_tt_an_s", "t_mc_s", "samples", "sample_seed", "mc_paths", "reference_paths",
    ])?;
    let o = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for row in &r.rows {
        w.write_record([
            row.quantity.to_string(),
            row.e_tt_nd.to_string(),
            o(row.e_tt_an),
            row.e_mc.to_string(),
            row.e_reference.to_string(),
            row.c_tt_nd.to_string(),
            o(row.c_tt_an),
            row.c_mc.to_string(),
            row.t_tt_nd.to_string(),
            o(row.t_tt_an),
            row.t_mc.to_string(),
            r.samples.to_string(),
            r.sample_seed.to_string(),
            r.mc_paths.to_string(),
            r.reference_paths.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- slice

pub struct SliceArgs {
    pub artifact: PathBuf,
    pub axis: Axis,
    pub kappa: usize,
    pub target: Target,
    /// Node indices `k_1, l_1, k_2, l_2, ...` of the fixed parameters.
    pub at: Option<Vec<usize>>,
    pub paths: usize,
    pub out: Option<PathBuf>,
}

pub fn slice(args: &SliceArgs) -> Result<(), CliError> {
    let art = Artifact::open(&args.artifact)?;
    let d = art.d();
    let n_p = art.n_p();
    let kappa = assets(Some(args.kappa), d)?[0];
    let base: Node = match &args.at {
        None => vec![(n_p / 2, n_p / 2); d],
        Some(v) if v.len() == 2 * d && v.iter().all(|&i| i < n_p) => v.chunks(2).map(|c| (c[0], c[1])).collect(),
        Some(v) => {
            return Err(CliError::Config(format!(
                "--at needs {} node indices below {n_p} (k_1,l_1,...), got {v:?}",
                2 * d
            )))
        }
    };
    let (nd, an) = match args.target.greek() {
        None => (Some(art.price.tensor.clone()), Some(art.price.tensor.clone())),
        Some(g) => (art.greek(g, Method::Nd, kappa)?, art.greek(g, Method::An, kappa)?),
    };
    let nd = nd.expect("ND tensors always exist");
    let mut w = csv_writer(args.out.as_deref())?;
    let mut header = vec!["node".to_string()];
    header.extend(param_header(d));
    header.extend(
        ["quantity", "kappa", "unit", "tt_nd", "tt_an", "mc", "mc_std_error", "mc_method", "mc_paths"]
            .map(String::from),
    );
    w.write_record(&header)?;
    for i in 0..n_p {
        let mut node = base.clone();
        match args.axis {
            Axis::Sigma => node[kappa].0 = i,
            Axis::S0 => node[kappa].1 = i,
        }
        let (sigma, s0) = node_values(&nd, &node);
        let v_nd = nd.evaluate_indices(&node)?.value;
        let v_an = an.as_ref().map(|t| t.evaluate_indices(&node).map(|e| e.value)).transpose()?;
        let mc = if args.paths > 0 {
            let mc_cfg = art.config.mc_config(args.paths);
            Some(mc_estimate(&art.spec, &sigma, &s0, &mc_cfg, args.target, kappa, McMethod::Mix)?)
        } else {
            None
        };
        let mut rec = vec![i.to_string()];
        rec.extend(sigma.iter().chain(&s0).map(|v| v.to_string()));
        rec.push(args.target.name().into());
        rec.push((kappa + 1).to_string());
        rec.push(args.target.unit().into());
        rec.push(v_nd.to_string());
        rec.push(v_an.map_or(String::new(), |v| v.to_string()));
        match mc {
            Some((e, tag)) => rec.extend([e.value.to_string(), e.std_error.to_string(), tag.into(), e.n_paths.to_string()]),
            None => rec.extend([String::new(), String::new(), String::new(), "0".into()]),
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- bench-mc

pub struct BenchMcArgs {
    pub config: PathBuf,
    pub sigma: Vec<f64>,
    pub s0: Vec<f64>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub targets: Vec<Target>,
    pub kappa: Option<usize>,
    pub method: McMethod,
    pub execution: Option<Execution>,
    pub out: Option<PathBuf>,
}

pub fn bench_mc(args: &BenchMcArgs) -> Result<(), CliError> {
    let config = RunConfig::load(&args.config)?;
    let spec = config.model_spec()?;
    let d = spec.d;
    if args.sigma.len() != d || args.s0.len() != d {
        return Err(CliError::Config(format!(
            "--sigma and --s0 need {d} values each, got {} and {}",
            args.sigma.len(),
            args.s0.len()
        )));
    }
    let mut mc_cfg = config.mc_config(args.paths.unwrap_or(config.mc.n_paths));
    if let Some(s) = args.seed {
        mc_cfg.seed = s;
    }
    if let Some(e) = args.execution {
        mc_cfg.execution = e;
    }
    let kappas = assets(args.kappa, d)?;
    let mut w = csv_writer(args.out.as_deref())?;
    let mut header = param_header(d);
    header.extend(
        ["quantity", "kappa", "method", "value", "std_error", "unit", "n_paths", "seed", "seconds"].map(String::from),
    );
    w.write_record(&header)?;
    for t in targets(&args.targets) {
        let ks: Vec<Option<usize>> =
            if t == Target::Price { vec![None] } else { kappas.iter().map(|&k| Some(k)).collect() };
        for kappa in ks {
            let t0 = Instant::now();
            let (e, tag) = mc_estimate(&spec, &args.sigma, &args.s0, &mc_cfg, t, kappa.unwrap_or(0), args.method)?;
            let mut rec: Vec<String> = args.sigma.iter().chain(&args.s0).map(|v| v.to_string()).collect();
            rec.push(t.name().into());
            rec.push(kappa.map_or(String::new(), |k| (k + 1).to_string()));
            rec.push(tag.into());
            rec.push(e.value.to_string());
            rec.push(e.std_error.to_string());
            rec.push(t.unit().into());
            rec.push(e.n_paths.to_string());
            rec.push(mc_cfg.seed.to_string());
            rec.push(format!("{:.6}", t0.elapsed().as_secs_f64()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
