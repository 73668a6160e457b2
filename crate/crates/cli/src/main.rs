mod config;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use sha2::{Digest, Sha256};

use modlab::{
    balanced_random_partition, decoy, distance, exact_gibbs, grid_max_g, greedy_run,
    interpolated_partition, load_graph, load_partition, max_g_closed_form, mcmc_run, modularity,
    ogp_certificate, signature, standard_probes, ChainConfig, ChainTrace, Graph, OgpParams,
    Partition, Region, SignaturePolytopeSpec,
};

use config::{ExperimentConfig, ExperimentKind, StartSpec, ARTIFACT_VERSION};

/// Experiments on the modularity landscape of the stochastic block model.
#[derive(Parser)]
#[command(name = "ogp-modlab", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Score a configured partition on each seeded instance.
    Score(RunArgs),
    /// Sweep the empirical modularity curve over a distance grid.
    Landscape(RunArgs),
    /// Compare the enumeration oracle with the closed-form maximum.
    Oracle(RunArgs),
    /// Run deterministic best-improvement ascent.
    Greedy(RunArgs),
    /// Run the finite-temperature chain.
    Mcmc(RunArgs),
    /// Tabulate the exact Gibbs distribution of a small instance.
    GibbsOracle(RunArgs),
    /// Produce an overlap-gap certificate over the standard probes.
    OgpCert(RunArgs),
    /// Run the built-in acceptance checks.
    Verify {
        #[arg(value_enum, default_value = "quick")]
        level: Level,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Run only this seed instead of the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Quick,
    Full,
}

#[derive(Debug)]
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<modlab::Error> for CliError {
    fn from(err: modlab::Error) -> Self {
        let code = match &err {
            modlab::Error::Io(_) => 3,
            modlab::Error::Invariant(_) | modlab::Error::DegenerateInstance => 2,
            _ => 1,
        };
        Self { code, message: err.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        Self { code: 3, message: err.to_string() }
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not usage errors.
            let is_usage_error = err.use_stderr();
            let _ = err.print();
            return if is_usage_error { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(err) = init_workers() {
        eprintln!("error: {}", err.message);
        return ExitCode::from(err.code);
    }
    let result = match cli.cmd {
        Cmd::Verify { level } => run_verify(level),
        Cmd::Score(args) => run_experiment("score", args),
        Cmd::Landscape(args) => run_experiment("landscape", args),
        Cmd::Oracle(args) => run_experiment("oracle", args),
        Cmd::Greedy(args) => run_experiment("greedy", args),
        Cmd::Mcmc(args) => run_experiment("mcmc", args),
        Cmd::GibbsOracle(args) => run_experiment("gibbs-oracle", args),
        Cmd::OgpCert(args) => run_experiment("ogp-cert", args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn init_workers() -> CliResult<()> {
    if let Ok(raw) = std::env::var("OGP_MODLAB_WORKERS") {
        let workers: usize = raw
            .parse()
            .map_err(|_| CliError::usage(format!("OGP_MODLAB_WORKERS must be a positive integer, got {raw:?}")))?;
        if workers == 0 {
            return Err(CliError::usage("OGP_MODLAB_WORKERS must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::usage(e.to_string()))?;
    }
    Ok(())
}

fn run_verify(level: Level) -> CliResult<()> {
    let level = match level {
        Level::Quick => modlab::VerifyLevel::Quick,
        Level::Full => modlab::VerifyLevel::Full,
    };
    let reports = modlab::verify_suite(level)?;
    let mut all_ok = true;
    for report in &reports {
        println!("{}", report.summary_line());
        all_ok &= report.passed;
    }
    if all_ok {
        println!("verify: all {} criteria passed", reports.len());
        Ok(())
    } else {
        Err(CliError { code: 2, message: "verification failed".into() })
    }
}

struct RunContext {
    config: ExperimentConfig,
    config_hash: String,
    out: PathBuf,
    seeds: Vec<u64>,
}

fn run_experiment(verb: &str, args: RunArgs) -> CliResult<()> {
    let raw = fs::read(&args.config)?;
    let config_hash = {
        let digest = Sha256::digest(&raw);
        let mut hex = String::new();
        for byte in &digest[..8] {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    };
    let config: ExperimentConfig = serde_json::from_slice(&raw)
        .map_err(|e| CliError::usage(format!("invalid config: {e}")))?;
    config.validate()?;
    if config.kind.verb() != verb {
        return Err(CliError::usage(format!(
            "config kind is {:?} but the {verb} command was invoked",
            config.kind.verb()
        )));
    }
    let out = args.out.unwrap_or_else(|| config.out.clone());
    fs::create_dir_all(&out)?;
    let seeds = match args.seed {
        Some(s) => vec![s],
        None => config.seeds.clone(),
    };
    let ctx = RunContext { config, config_hash, out, seeds };
    match ctx.config.kind.clone() {
        ExperimentKind::Score { start, nu } => run_score(&ctx, &start, nu),
        ExperimentKind::Landscape { d_grid, band, search_budget } => {
            run_landscape(&ctx, &d_grid, band, search_budget)
        }
        ExperimentKind::Oracle { t, resolution, balanced } => {
            run_oracle(&ctx, t, resolution, balanced)
        }
        ExperimentKind::Greedy { start, max_steps, sample_every, nu } => {
            run_chain(&ctx, &start, 0.0, None, max_steps, sample_every, nu, true)
        }
        ExperimentKind::Mcmc { start, beta, kernel, max_steps, sample_every, nu } => {
            run_chain(&ctx, &start, beta, Some(kernel), max_steps, sample_every, nu, false)
        }
        ExperimentKind::GibbsOracle { beta } => run_gibbs_oracle(&ctx, beta),
        ExperimentKind::OgpCert { nu, grid_points, greedy_steps } => {
            run_ogp_cert(&ctx, nu, grid_points, greedy_steps)
        }
    }
}

impl RunContext {
    fn instance(&self, seed: u64) -> CliResult<(Graph, Partition)> {
        let planted = self.config.model.planted_partition();
        match &self.config.graph {
            Some(path) => {
                let graph = load_graph(path)?;
                if graph.n() != self.config.model.n {
                    return Err(CliError::usage(format!(
                        "graph file has n={} but the model says n={}",
                        graph.n(),
                        self.config.model.n
                    )));
                }
                Ok((graph, planted))
            }
            None => {
                let (graph, planted) = modlab::generate_sbm(&self.config.model, seed)?;
                Ok((graph, planted))
            }
        }
    }

    fn start_partition(&self, spec: &StartSpec, planted: &Partition, seed: u64) -> CliResult<Partition> {
        let part = match spec {
            StartSpec::Planted => planted.clone(),
            StartSpec::Decoy { i, j } => decoy(planted, *i, *j)?,
            StartSpec::Interpolated { i, j, t } => {
                interpolated_partition(planted, *i, *j, *t, None)?
            }
            StartSpec::BalancedRandom => balanced_random_partition(planted.n(), planted.k(), seed)?,
            StartSpec::File { path } => load_partition(path, planted.k())?,
        };
        Ok(part)
    }

    fn stamp(&self, seed: Option<u64>) -> String {
        match seed {
            Some(s) => format!(
                "# config_hash={} seed={} artifact_version={}\n",
                self.config_hash, s, ARTIFACT_VERSION
            ),
            None => format!(
                "# config_hash={} seeds={:?} artifact_version={}\n",
                self.config_hash, self.seeds, ARTIFACT_VERSION
            ),
        }
    }

    fn write(&self, name: &str, content: &str) -> CliResult<()> {
        let path = self.out.join(name);
        fs::write(&path, content)?;
        println!("wrote {}", path.display());
        Ok(())
    }

    fn metadata(&self, seed: u64, beta: f64, nu1: f64, nu2: f64, tau: Option<u64>) -> serde_json::Value {
        json!({
            "params": self.config.model,
            "seed": seed,
            "beta": beta,
            "nu1": nu1,
            "nu2": nu2,
            "tau": tau,
            "kind": self.config.kind.verb(),
            "config_hash": self.config_hash,
            "artifact_version": ARTIFACT_VERSION,
        })
    }

    fn write_json(&self, name: &str, value: &serde_json::Value) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError { code: 3, message: e.to_string() })?;
        text.push('\n');
        self.write(name, &text)
    }
}

/// Region bounds (nu1, nu2) for trace classification. The certificate
/// construction pins them down when nu sits in its admissible window;
/// otherwise (e.g. k=2, where the window is empty) fall back to the plain
/// band [nu/2, nu].
fn region_bounds(ctx: &RunContext, nu: f64) -> CliResult<(f64, f64)> {
    if !(0.0 < nu && nu < 1.0) {
        return Err(CliError::usage(format!("nu must lie in (0, 1), got {nu}")));
    }
    match OgpParams::from_model(&ctx.config.model, nu) {
        Ok(params) => Ok((params.nu1, params.nu2)),
        Err(_) => Ok((nu / 2.0, nu)),
    }
}

fn ogp_for(ctx: &RunContext, nu: f64) -> CliResult<OgpParams> {
    Ok(OgpParams::from_model(&ctx.config.model, nu)?)
}

fn run_score(ctx: &RunContext, start: &StartSpec, nu: f64) -> CliResult<()> {
    let (nu1, nu2) = region_bounds(ctx, nu)?;
    let mut csv = ctx.stamp(None);
    csv.push_str("seed,modularity,coverage,degree_tax,distance,region\n");
    for &seed in &ctx.seeds {
        let (graph, planted) = ctx.instance(seed)?;
        let part = ctx.start_partition(start, &planted, seed)?;
        let breakdown = modularity(&graph, &part)?;
        let report = distance(&part, &planted)?;
        let region = Region::classify(report.distance, nu1, nu2);
        csv.push_str(&format!(
            "{seed},{},{},{},{},{}\n",
            breakdown.score,
            breakdown.coverage,
            breakdown.degree_tax,
            report.distance,
            region.as_str()
        ));
        let mut meta = ctx.metadata(seed, 0.0, nu1, nu2, None);
        meta["score"] = json!(breakdown);
        meta["distance"] = json!(report.distance);
        meta["signature"] = json!(signature(&part, &planted)?.entries());
        ctx.write_json(&format!("score_seed{seed}.json"), &meta)?;
    }
    ctx.write("score.csv", &csv)
}

fn run_landscape(
    ctx: &RunContext,
    d_grid: &[f64],
    band: Option<f64>,
    search_budget: usize,
) -> CliResult<()> {
    let params = &ctx.config.model;
    let band = band.unwrap_or(1.0 / (params.n as f64).sqrt());
    let mut csv = ctx.stamp(None);
    csv.push_str("d,t,h,modularity_theory,H_empirical,seed\n");
    for &seed in &ctx.seeds {
        let (graph, planted) = ctx.instance(seed)?;
        let points = modlab::empirical_h_sweep(
            &graph,
            &planted,
            params.prefactor(),
            d_grid,
            band,
            search_budget,
        )?;
        for p in &points {
            csv.push_str(&format!(
                "{},{},{},{},{},{seed}\n",
                p.d,
                p.t,
                p.h_value,
                p.modularity_theory,
                p.h_empirical.unwrap_or(f64::NAN)
            ));
        }
        let mut meta = ctx.metadata(seed, 0.0, f64::NAN, f64::NAN, None);
        meta["band"] = json!(band);
        meta["search_budget"] = json!(search_budget);
        ctx.write_json(&format!("landscape_seed{seed}.json"), &meta)?;
    }
    ctx.write("landscape.csv", &csv)
}

fn run_oracle(ctx: &RunContext, t: f64, resolution: usize, balanced: bool) -> CliResult<()> {
    let k = ctx.config.model.k;
    let spec = SignaturePolytopeSpec::new(k, t, balanced)?;
    let (grid_max, maximizer) = grid_max_g(&spec, resolution)?;
    let closed_form = if t <= 1.0 { Some(max_g_closed_form(k, t)?.0) } else { None };
    let seed = ctx.seeds[0];
    let mut meta = ctx.metadata(seed, 0.0, f64::NAN, f64::NAN, None);
    meta["t"] = json!(t);
    meta["resolution"] = json!(resolution);
    meta["balanced"] = json!(balanced);
    meta["grid_max"] = json!(grid_max);
    meta["closed_form"] = json!(closed_form);
    meta["gap"] = json!(closed_form.map(|c| c - grid_max));
    meta["maximizer"] = json!(maximizer.entries());
    ctx.write_json("oracle.json", &meta)
}

#[allow(clippy::too_many_arguments)]
fn run_chain(
    ctx: &RunContext,
    start: &StartSpec,
    beta: f64,
    kernel: Option<modlab::Kernel>,
    max_steps: u64,
    sample_every: u64,
    nu: f64,
    greedy: bool,
) -> CliResult<()> {
    let (nu1, nu2) = region_bounds(ctx, nu)?;
    let verb = ctx.config.kind.verb();
    for &seed in &ctx.seeds {
        let (graph, planted) = ctx.instance(seed)?;
        let start_part = ctx.start_partition(start, &planted, seed)?;
        let cfg = ChainConfig {
            beta,
            max_steps,
            sample_every,
            seed,
            nu1,
            nu2,
            kernel: kernel.unwrap_or_default(),
        };
        let trace = if greedy {
            greedy_run(&graph, &planted, start_part, &cfg)?
        } else {
            mcmc_run(&graph, &planted, start_part, &cfg)?
        };
        write_trace(ctx, verb, seed, &trace)?;
        let mut meta = ctx.metadata(seed, beta, nu1, nu2, trace.tau);
        meta["steps_taken"] = json!(trace.steps_taken);
        meta["terminal_modularity"] = json!(trace.terminal_breakdown.score);
        meta["terminal_distance"] = json!(trace.terminal_distance);
        meta["max_distance"] = json!(trace.max_distance);
        if let Some(kernel) = kernel {
            meta["kernel"] = json!(kernel);
        }
        ctx.write_json(&format!("{verb}_seed{seed}.json"), &meta)?;
        modlab::save_partition(
            &Partition::new(trace.terminal.clone(), planted.k())?,
            ctx.out.join(format!("{verb}_seed{seed}_terminal.labels")),
        )?;
    }
    Ok(())
}

fn write_trace(ctx: &RunContext, verb: &str, seed: u64, trace: &ChainTrace) -> CliResult<()> {
    let mut csv = ctx.stamp(Some(seed));
    csv.push_str("step,modularity,distance,region\n");
    for s in &trace.samples {
        csv.push_str(&format!("{},{},{},{}\n", s.step, s.modularity, s.distance, s.region.as_str()));
    }
    ctx.write(&format!("{verb}_seed{seed}_trace.csv"), &csv)
}

fn run_gibbs_oracle(ctx: &RunContext, beta: f64) -> CliResult<()> {
    let seed = ctx.seeds[0];
    let (graph, planted) = ctx.instance(seed)?;
    let table = exact_gibbs(&graph, ctx.config.model.k, beta)?;
    let mut csv = ctx.stamp(Some(seed));
    csv.push_str("state,probability\n");
    for (index, &p) in table.probs.iter().enumerate() {
        csv.push_str(&format!("{index},{p}\n"));
    }
    ctx.write("gibbs_oracle.csv", &csv)?;
    let mut meta = ctx.metadata(seed, beta, f64::NAN, f64::NAN, None);
    meta["log_z"] = json!(table.log_z);
    meta["states"] = json!(table.probs.len());
    meta["mass_within_quarter"] = json!(table.mass_within(&planted, 0.25)?);
    ctx.write_json("gibbs_oracle.json", &meta)
}

fn run_ogp_cert(ctx: &RunContext, nu: f64, grid_points: usize, greedy_steps: u64) -> CliResult<()> {
    let ogp = ogp_for(ctx, nu)?;
    let mut csv = ctx.stamp(None);
    csv.push_str("seed,probe,modularity,distance,region,above_threshold\n");
    let mut any_violation = false;
    for &seed in &ctx.seeds {
        let (graph, planted) = ctx.instance(seed)?;
        let cfg = ChainConfig {
            beta: 0.0,
            max_steps: greedy_steps,
            sample_every: greedy_steps.max(1),
            seed,
            nu1: ogp.nu1,
            nu2: ogp.nu2,
            kernel: Default::default(),
        };
        let probes = standard_probes(&graph, &planted, &cfg, grid_points)?;
        let report = ogp_certificate(&graph, &planted, &ogp, &probes)?;
        any_violation |= !report.band_violations.is_empty();
        for p in &report.probes {
            csv.push_str(&format!(
                "{seed},{},{},{},{},{}\n",
                p.label,
                p.modularity,
                p.distance,
                p.region.as_str(),
                p.above_threshold
            ));
        }
        let mut meta = ctx.metadata(seed, 0.0, ogp.nu1, ogp.nu2, None);
        meta["ogp"] = json!(report.params);
        meta["threshold"] = json!(report.threshold);
        meta["band_violations"] = json!(report.band_violations);
        meta["far_witness"] = json!(report.far_witness);
        meta["q_star"] = json!(report.q_star);
        meta["c1"] = json!(report.c1);
        meta["c2"] = json!(report.c2);
        ctx.write_json(&format!("ogp_cert_seed{seed}.json"), &meta)?;
    }
    ctx.write("ogp_cert.csv", &csv)?;
    if any_violation {
        return Err(CliError { code: 2, message: "certificate found probes inside the band".into() });
    }
    Ok(())
}
