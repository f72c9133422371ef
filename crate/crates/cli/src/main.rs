mod manifest;
mod simulate;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use bbcode::circuit::{build_sm_circuit, enumerate_depth7_schedules_for_code, verify_sm_circuit, OpKind};
use bbcode::code::{known_code, CodeSpec, ThicknessReport, ToricLayout};
use bbcode::decode::{distance_upper_bound, exact_distance_small, DistanceConfig, DEFAULT_DISTANCE_BUDGET};
use bbcode::experiment::{
    code_search, fit_curve, pseudo_threshold, published_fit, FitResult, SearchCandidate, SearchConfig,
};
use bbcode::logical::{
    build_ancilla_system, find_basis_polynomials, plan_duality_swaps, zx_duality_check, BasisExport, BasisSearch,
    LogicalBasis, MeasuredLogical, SwapPlan,
};
use bbcode::{BBCode, Error};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "bbcode", version, about = "Bivariate bicycle codes: parameters, circuits, simulation")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print the report as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Directory for output files and the run manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Limit for exhaustive enumerations.
    #[arg(long, global = true)]
    budget: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Code parameters and structure.
    Params(ParamsArgs),
    /// Syndrome measurement circuit.
    Circuit(CircuitArgs),
    /// Monte Carlo memory sweep from a JSON config.
    Simulate(SimulateArgs),
    /// Fit the logical error curve to simulation results.
    Fit(FitArgs),
    /// Pseudo-threshold of a fitted curve.
    Threshold(ThresholdArgs),
    /// Search for codes from a JSON config.
    Search(SearchArgs),
    /// Logical basis, ZX-duality plan and measurement ancillas.
    Logical(LogicalArgs),
}

/// A code-spec JSON file, or the length of a catalogued code (72, 90, 108,
/// 144, 288, 360, 756).
#[derive(Args)]
struct CodeArg {
    code: String,
}

#[derive(Args)]
struct ParamsArgs {
    #[command(flatten)]
    code: CodeArg,
    /// Trials for the BP-OSD distance bound.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Certify the distance by enumeration (bounded by --budget).
    #[arg(long)]
    exact: bool,
}

#[derive(Args)]
struct CircuitArgs {
    #[command(flatten)]
    code: CodeArg,
    /// Syndrome cycles.
    #[arg(long, short = 'n', default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    cycles: u64,
    /// Replay the circuit and compare with the expected syndrome action.
    #[arg(long)]
    verify: bool,
    /// Count the valid depth-7 schedules for this code.
    #[arg(long)]
    enumerate_schedules: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Sweep config JSON.
    config: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// CSV with columns `p` and `p_L` (as written by `simulate`).
    results: PathBuf,
    /// Circuit distance used as the leading exponent.
    #[arg(long)]
    d: usize,
    /// Also report the pseudo-threshold for this many logical qubits.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct ThresholdArgs {
    /// Use the published fit of the code with this length.
    #[arg(long, conflicts_with = "coeffs")]
    published: Option<usize>,
    /// Fit coefficients `c0,c1,c2`.
    #[arg(long, value_delimiter = ',', num_args = 3, requires_all = ["d", "k"])]
    coeffs: Option<Vec<f64>>,
    /// Circuit distance for --coeffs.
    #[arg(long)]
    d: Option<usize>,
    /// Logical qubits for --coeffs.
    #[arg(long)]
    k: Option<usize>,
    /// Evaluate the fit at these error rates.
    #[arg(long, value_delimiter = ',')]
    at: Vec<f64>,
}

#[derive(Args)]
struct SearchArgs {
    /// Search config JSON.
    config: PathBuf,
    /// Candidates to print.
    #[arg(long, default_value_t = 20)]
    top: usize,
}

#[derive(Args)]
struct LogicalArgs {
    #[command(flatten)]
    code: CodeArg,
    /// Dual layers of each ancilla system.
    #[arg(long, default_value_t = 12)]
    r: usize,
    /// Information-set trials of the basis search.
    #[arg(long, default_value_t = 300)]
    trials: usize,
}

/// The run completed but a verification or assertion failed.
#[derive(Debug)]
struct Failed(String);

impl fmt::Display for Failed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Failed {}

/// Bad arguments or configuration.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<Failed>() {
        return 1;
    }
    if err.is::<Usage>() || err.is::<std::io::Error>() || err.is::<serde_json::Error>() || err.is::<csv::Error>() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(
            Error::Parse { .. }
            | Error::InvalidCode(_)
            | Error::InvalidArgument(_)
            | Error::Dimension(_)
            | Error::Json(_)
            | Error::Io(_),
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.global.threads {
        if t == 0 {
            return Err(Usage("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("starting worker pool")?;
    }
    let g = &cli.global;
    match &cli.command {
        Command::Params(a) => params(g, a),
        Command::Circuit(a) => circuit(g, a),
        Command::Simulate(a) => simulate::run(g, &a.config),
        Command::Fit(a) => fit(g, a),
        Command::Threshold(a) => threshold(g, a),
        Command::Search(a) => search(g, a),
        Command::Logical(a) => logical(g, a),
    }
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Resolves a code argument to its spec and built code.
fn load_code(arg: &CodeArg) -> Result<(CodeSpec, BBCode)> {
    let path = Path::new(&arg.code);
    let spec = if path.exists() {
        CodeSpec::from_json(&read_file(path)?).with_context(|| format!("parsing {}", path.display()))?
    } else if let Some(k) = arg.code.parse().ok().and_then(known_code) {
        k.spec
    } else {
        return Err(Usage(format!("'{}' is neither a spec file nor a catalogued code length", arg.code)).into());
    };
    let code = spec.build().with_context(|| format!("building {}", arg.code))?;
    Ok((spec, code))
}

fn code_name(spec: &CodeSpec, code: &BBCode) -> String {
    spec.name.clone().unwrap_or_else(|| format!("[[{},{}]]", code.n(), code.k))
}

fn emit<T: Serialize>(g: &Global, report: &T, text: impl FnOnce() -> String) -> Result<()> {
    if g.json {
        println!("{}", serde_json::to_string_pretty(report)?);
    } else {
        print!("{}", text());
    }
    Ok(())
}

/// Writes `report` as `<command>.json` plus the manifest when `--out` is set.
fn save_report<T: Serialize>(g: &Global, mut manifest: RunManifest, report: &T) -> Result<()> {
    if let Some(dir) = &g.out {
        #[derive(Serialize)]
        struct WithManifest<'a, T> {
            manifest: String,
            #[serde(flatten)]
            report: &'a T,
        }
        let body = serde_json::to_string_pretty(&WithManifest {
            manifest: manifest.file_name(),
            report,
        })?;
        let name = format!("{}.json", manifest.command);
        manifest.write_output(dir, &name, &body)?;
        manifest.finish(dir)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ParamsReport {
    code: String,
    spec: CodeSpec,
    n: usize,
    k: usize,
    d_bp: usize,
    trials: usize,
    d_exact: Option<usize>,
    exact_note: Option<String>,
    components: usize,
    toric_layout: Option<ToricLayout>,
    thickness: ThicknessReport,
    thickness_valid: bool,
}

fn params(g: &Global, a: &ParamsArgs) -> Result<()> {
    let (spec, code) = load_code(&a.code)?;
    let manifest = RunManifest::start("params", &(&spec, a.trials, a.exact), g.seed);
    let cfg = DistanceConfig {
        trials: a.trials,
        seed: g.seed,
        ..DistanceConfig::default()
    };
    let d_bp = distance_upper_bound(&code, &cfg)?;
    let (mut d_exact, mut exact_note) = (None, None);
    if a.exact {
        match exact_distance_small(&code, d_bp, g.budget.map_or(DEFAULT_DISTANCE_BUDGET, u128::from)) {
            Ok(d) => d_exact = d,
            Err(Error::BudgetExceeded(msg)) => exact_note = Some(msg),
            Err(e) => return Err(e.into()),
        }
    }
    let thickness = code.thickness_decomposition();
    let report = ParamsReport {
        code: code_name(&spec, &code),
        n: code.n(),
        k: code.k,
        d_bp,
        trials: a.trials,
        d_exact,
        exact_note,
        components: code.components_by_formula(),
        toric_layout: code.toric_layout(),
        thickness_valid: thickness.is_valid(),
        thickness,
        spec,
    };
    emit(g, &report, || {
        let mut s = format!(
            "code        {}\nl, m        {}, {}\nA           {}\nB           {}\nn           {}\nk           {}\nd_bp        <= {} ({} trials)\n",
            report.code, report.spec.l, report.spec.m, code.a, code.b, report.n, report.k, report.d_bp, report.trials
        );
        if let Some(d) = report.d_exact {
            s += &format!("d           {d} (exact)\n");
        }
        if let Some(note) = &report.exact_note {
            s += &format!("d           not certified: {note}\n");
        }
        s += &format!(
            "components  {}{}\n",
            report.components,
            if report.components == 1 { " (connected)" } else { "" }
        );
        match &report.toric_layout {
            Some(t) => {
                s += &format!(
                    "toric       A{}/A{}, B{}/B{}, torus {} x {}\n",
                    t.i,
                    t.j,
                    t.g,
                    t.h,
                    2 * t.mu,
                    2 * t.lambda
                )
            }
            None => s += "toric       none\n",
        }
        s += &format!(
            "thickness   {} (G_A: {} wheels, G_B: {} wheels)\n",
            if report.thickness_valid { "2" } else { "decomposition failed" },
            report.thickness.g_a.components,
            report.thickness.g_b.components
        );
        s
    })?;
    save_report(g, manifest, &report)
}

#[derive(Serialize)]
struct CircuitReport {
    code: String,
    n_cycles: usize,
    depth: usize,
    cycle_depth: usize,
    op_counts: Vec<(String, usize)>,
    verification: Option<bbcode::circuit::VerificationReport>,
    structure_problems: Vec<String>,
    depth7_schedules: Option<usize>,
    circuit_file: Option<PathBuf>,
}

fn circuit(g: &Global, a: &CircuitArgs) -> Result<()> {
    let (spec, code) = load_code(&a.code)?;
    let mut manifest = RunManifest::start("circuit", &(&spec, a.cycles, a.verify, a.enumerate_schedules), g.seed);
    let c = build_sm_circuit(&code, a.cycles as usize)?;
    let mut structure_problems = Vec::new();
    let verification = a.verify.then(|| {
        for check in [c.check_disjoint(), c.check_tanner_edges(&code)] {
            if let Err(msg) = check {
                structure_problems.push(msg);
            }
        }
        verify_sm_circuit(&c, &code)
    });
    let depth7_schedules = a.enumerate_schedules.then(|| enumerate_depth7_schedules_for_code(&code).len());
    let circuit_file = match &g.out {
        Some(dir) => {
            let text = format!("# {}\n{}", manifest.reference(), c.to_text());
            Some(manifest.write_output(dir, "circuit.txt", &text)?)
        }
        None => None,
    };
    let kinds = [OpKind::Cnot, OpKind::InitX, OpKind::InitZ, OpKind::MeasX, OpKind::MeasZ, OpKind::Idle];
    let report = CircuitReport {
        code: code_name(&spec, &code),
        n_cycles: c.n_cycles,
        depth: c.depth(),
        cycle_depth: c.cycle_len(),
        op_counts: kinds.iter().map(|&k| (k.name().to_string(), c.count(k))).collect(),
        verification,
        structure_problems,
        depth7_schedules,
        circuit_file,
    };
    emit(g, &report, || {
        let mut s = format!(
            "code        {}\ncycles      {}\ndepth       {} ({} per cycle)\n",
            report.code, report.n_cycles, report.depth, report.cycle_depth
        );
        for (k, n) in &report.op_counts {
            s += &format!("{k:<12}{n}\n");
        }
        if let Some(v) = &report.verification {
            let ok = v.passed && report.structure_problems.is_empty();
            s += &format!("verify      {}\n", if ok { "pass" } else { "FAIL" });
            for f in v.failures.iter().chain(&report.structure_problems) {
                s += &format!("  {f}\n");
            }
        }
        if let Some(n) = report.depth7_schedules {
            s += &format!("depth-7     {n} valid schedules\n");
        }
        if let Some(p) = &report.circuit_file {
            s += &format!("written     {}\n", p.display());
        }
        s
    })?;
    let failed = report
        .verification
        .as_ref()
        .is_some_and(|v| !v.passed || !report.structure_problems.is_empty());
    save_report(g, manifest, &report)?;
    if failed {
        return Err(Failed("circuit verification failed".into()).into());
    }
    Ok(())
}

#[derive(Serialize)]
struct FitReport {
    points: usize,
    fit: FitResult,
    pseudo_threshold: Option<f64>,
}

/// Reads `(p, p_L)` pairs from a results CSV; `#` lines are comments.
fn read_points(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Usage(format!("{} has no '{name}' column", path.display())))
    };
    let (ip, il) = (col("p")?, col("p_L")?);
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let num = |j: usize| -> Result<f64> {
            row.get(j)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Usage(format!("{}: bad number on data row {}", path.display(), i + 1)).into())
        };
        out.push((num(ip)?, num(il)?));
    }
    Ok(out)
}

fn fit(g: &Global, a: &FitArgs) -> Result<()> {
    let points = read_points(&a.results)?;
    let manifest = RunManifest::start("fit", &(&points, a.d, a.k), g.seed);
    let fit = fit_curve(&points, a.d)?;
    let report = FitReport {
        points: points.len(),
        pseudo_threshold: a.k.and_then(|k| pseudo_threshold(&fit, k)),
        fit,
    };
    emit(g, &report, || {
        let f = &report.fit;
        let mut s = format!(
            "points      {}\nd_circ      {}\nc0          {}\nc1          {}\nc2          {}\n",
            report.points, f.d_circ, f.c0, f.c1, f.c2
        );
        if let Some(p0) = report.pseudo_threshold {
            s += &format!("p0          {p0}\n");
        }
        s
    })?;
    save_report(g, manifest, &report)
}

#[derive(Serialize)]
struct ThresholdReport {
    fit: FitResult,
    k: usize,
    pseudo_threshold: Option<f64>,
    evaluations: Vec<(f64, f64)>,
}

fn threshold(g: &Global, a: &ThresholdArgs) -> Result<()> {
    let (fit, k) = match (a.published, &a.coeffs) {
        (Some(n), _) => {
            let p = published_fit(n).ok_or_else(|| Usage(format!("no published fit for n = {n}")))?;
            (p.fit, a.k.unwrap_or(p.k))
        }
        (None, Some(c)) => (
            FitResult::new(c[0], c[1], c[2], a.d.unwrap_or_default()),
            a.k.unwrap_or_default(),
        ),
        (None, None) => return Err(Usage("give --published N or --coeffs c0,c1,c2 --d D --k K".into()).into()),
    };
    let manifest = RunManifest::start("threshold", &(&fit, k, &a.at), g.seed);
    let report = ThresholdReport {
        pseudo_threshold: pseudo_threshold(&fit, k),
        evaluations: a.at.iter().map(|&p| (p, fit.eval(p))).collect(),
        fit,
        k,
    };
    emit(g, &report, || {
        let mut s = match report.pseudo_threshold {
            Some(p0) => format!("p0          {p0}\n"),
            None => "p0          none in [1e-5, 0.1]\n".to_string(),
        };
        for (p, pl) in &report.evaluations {
            s += &format!("p_L({p})    {pl:e}\n");
        }
        s
    })?;
    save_report(g, manifest, &report)
}

fn search(g: &Global, a: &SearchArgs) -> Result<()> {
    let text = read_file(&a.config)?;
    let mut cfg: SearchConfig =
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    if g.seed != 0 {
        cfg.seed = g.seed;
    }
    if let Some(b) = g.budget {
        cfg.budget = Some(b as usize);
    }
    let manifest = RunManifest::start("search", &cfg, cfg.seed);
    let mut found = code_search(&cfg)?;
    found.truncate(a.top);
    emit(g, &found, || {
        let mut s = format!("{:<4}{:<8}{:<14}{:<14}{:>5}{:>4}{:>6}{:>8}\n", "#", "l x m", "A", "B", "n", "k", "d_bp", "kd^2/n");
        for (i, c) in found.iter().enumerate() {
            s += &format!(
                "{:<4}{:<8}{:<14}{:<14}{:>5}{:>4}{:>6}{:>8.2}\n",
                i + 1,
                format!("{}x{}", c.spec.l, c.spec.m),
                c.spec.a_poly,
                c.spec.b_poly,
                c.n,
                c.k,
                c.d_bp,
                c.score
            );
        }
        s
    })?;
    save_report::<Vec<SearchCandidate>>(g, manifest, &found)
}

#[derive(Serialize)]
struct AncillaSummary {
    target: MeasuredLogical,
    qubits_per_layer: usize,
    layers: usize,
    inter_layer_edges: usize,
    added_qubits: usize,
    plane_a_max_component: usize,
    plane_a_pairs_only: bool,
    plane_b_max_component: usize,
    planes_at_most_one_cycle: bool,
}

#[derive(Serialize)]
struct LogicalReport {
    code: String,
    basis: BasisExport,
    verified: bool,
    zx_duality: bool,
    swap_plan: Option<SwapPlan>,
    swap_note: Option<String>,
    ancillas: Vec<AncillaSummary>,
    total_added_qubits: usize,
    r: usize,
}

fn logical(g: &Global, a: &LogicalArgs) -> Result<()> {
    let (spec, code) = load_code(&a.code)?;
    let manifest = RunManifest::start("logical", &(&spec, a.r, a.trials), g.seed);
    if a.r == 0 {
        return Err(Usage("--r must be at least 1".into()).into());
    }
    let search = BasisSearch {
        trials: a.trials,
        seed: g.seed,
        ..BasisSearch::default()
    };
    let triple = find_basis_polynomials(&code, &search)?
        .into_iter()
        .next()
        .ok_or_else(|| Failed("no basis triple found".into()))?;
    let basis = LogicalBasis::new(&code, triple)?;
    let verified = basis.verify(&code).is_ok();
    let (swap_plan, swap_note) = match plan_duality_swaps(&code, 4) {
        Ok(p) => (Some(p), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let mut ancillas = Vec::new();
    for target in [MeasuredLogical::XBar, MeasuredLogical::ZBar] {
        let s = build_ancilla_system(&code, &basis.triple, target, a.r)?;
        ancillas.push(AncillaSummary {
            target,
            qubits_per_layer: s.qubits_per_layer(),
            layers: s.layers.len(),
            inter_layer_edges: s.inter_layer_edges,
            added_qubits: s.added_qubits,
            plane_a_max_component: s.plane_a.max_vertices(),
            plane_a_pairs_only: s.plane_a.only_pairs(),
            plane_b_max_component: s.plane_b.max_vertices(),
            planes_at_most_one_cycle: s.plane_a.at_most_one_cycle() && s.plane_b.at_most_one_cycle(),
        });
    }
    let report = LogicalReport {
        code: code_name(&spec, &code),
        basis: basis.export(),
        verified,
        zx_duality: zx_duality_check(&code),
        swap_plan,
        swap_note,
        total_added_qubits: ancillas.iter().map(|s| s.added_qubits).sum(),
        ancillas,
        r: a.r,
    };
    emit(g, &report, || {
        let join = |v: &[bbcode::Monomial]| v.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(" + ");
        let b = &report.basis;
        let mut s = format!(
            "code        {}\nf           {}\ng           {}\nh           {}\nweight      {}\nn labels    {}\nm labels    {}\nverified    {}\nzx duality  {}\n",
            report.code,
            join(&b.f),
            join(&b.g),
            join(&b.h),
            b.weight,
            b.n_labels.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(", "),
            b.m_labels.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(", "),
            report.verified,
            report.zx_duality
        );
        match (&report.swap_plan, &report.swap_note) {
            (Some(p), _) => {
                s += &format!(
                    "group       {}\nswap chain  {} links, CNOT depth {}\n",
                    p.decomposition.orders(),
                    p.chain_length,
                    p.cnot_depth
                );
                for gp in &p.generators {
                    let names: Vec<&str> = gp.ratios.iter().map(|r| r.name.as_str()).collect();
                    if names.is_empty() {
                        s += &format!("  {} (order {}): no links\n", gp.factor, gp.order);
                    } else {
                        s += &format!("  {} (order {}): {} links via {}\n", gp.factor, gp.order, gp.links, names.join(", "));
                    }
                }
            }
            (None, Some(note)) => s += &format!("swap chain  unavailable: {note}\n"),
            _ => {}
        }
        for an in &report.ancillas {
            s += &format!(
                "ancilla {:?}  {} qubits/layer, {} layers, {} added, {} inter-layer edges\n",
                an.target, an.qubits_per_layer, an.layers, an.added_qubits, an.inter_layer_edges
            );
        }
        s += &format!("added total {} at r = {}\n", report.total_added_qubits, report.r);
        s
    })?;
    save_report(g, manifest, &report)?;
    if !verified {
        return Err(Failed("logical basis failed verification".into()).into());
    }
    Ok(())
}
