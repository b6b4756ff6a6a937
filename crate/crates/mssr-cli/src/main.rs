//! `mssr`: mechanical reduction of multiscale reaction networks to their
//! short-timescale low-copy projections, with simulation, master-equation
//! solving, and empirical convergence checks on top.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mssr_core::analysis::{
    convergence_sweep, exit_probability_check, intensity_gap_check, jump_moment_check, EventSet,
    ExitConfig, IntensityGapConfig, JumpMomentConfig, LemmaSuiteReport, SweepConfig,
};
use mssr_core::cme::{
    build_generator, enumerate_states, stationarity_probe, stationary_solve, transient_solve,
    StateSpace, StationarityProbe, Truncation, DEFAULT_SERIES_TOL, DEFAULT_STATIONARY_TOL,
};
use mssr_core::network::{parse_network, serialize_network, Complex, ReactionNetwork};
use mssr_core::projection::build_projected_system;
use mssr_core::scaling::{validate_conditions, ConditionReport, ScaledSystem};
use mssr_core::ssa::{simulate_original, simulate_reduced, Ensemble, SimConfig};

#[derive(Parser)]
#[command(name = "mssr", version, about = "Multiscale reaction network reduction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify reaction timescales and emit the short-timescale projection.
    Reduce(ReduceArgs),
    /// Simulate terminal laws of the original or the reduced system.
    Simulate(SimulateArgs),
    /// Solve the master equation of a reduced network on a finite state set.
    Cme(CmeArgs),
    /// Measure the distance between original and reduced laws over a grid
    /// of scaling parameters.
    Converge(ConvergeArgs),
    /// Run the empirical property harnesses behind the reduction.
    Lemmas(LemmasArgs),
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Reduce(args) => cmd_reduce(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Cme(args) => cmd_cme(&args),
        Command::Converge(args) => cmd_converge(&args),
        Command::Lemmas(args) => cmd_lemmas(&args),
    }
}

fn load_network(path: &Path) -> Result<ReactionNetwork> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read network file {}", path.display()))?;
    parse_network(&text).with_context(|| format!("cannot parse {}", path.display()))
}

/// Serializes `value` as pretty JSON, to `out` when given, else to stdout.
/// Field order follows struct declaration order, so byte-identical inputs
/// produce byte-identical reports.
fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn write_csv(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn complex_label(net: &ReactionNetwork, c: &Complex) -> String {
    if c.is_empty() {
        return "0".into();
    }
    c.terms()
        .iter()
        .map(|&(i, k)| {
            let name = &net.species()[i].name;
            if k == 1 {
                name.clone()
            } else {
                format!("{k} {name}")
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

// ---------------------------------------------------------------------------
// reduce
// ---------------------------------------------------------------------------

#[derive(Args)]
struct ReduceArgs {
    /// Network file in the `.net` grammar.
    net: PathBuf,
    /// Scaling parameter.
    #[arg(long = "N")]
    n: u64,
    /// Compact-set radius exponent; the reported radius is M = N^rho.
    #[arg(long, default_value_t = 0.3)]
    rho: f64,
    /// Also write the reduced network grammar to this file.
    #[arg(long)]
    emit_reduced: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ReduceReport {
    file: String,
    n: f64,
    /// Largest finite intensity order; the clock is sped up by N^theta0.
    theta0: String,
    gamma: String,
    compact_set: CompactSet,
    reactions: Vec<ReactionClass>,
    conditions: ConditionReport,
    projection: ProjectionReport,
    /// The projected system in the network grammar, ready for re-ingestion.
    reduced_network: String,
}

#[derive(Serialize)]
struct CompactSet {
    rho: f64,
    m: f64,
}

#[derive(Serialize)]
struct ReactionClass {
    id: String,
    order: Option<String>,
    class: &'static str,
}

#[derive(Serialize)]
struct ProjectionReport {
    reactions: Vec<ProjectedInfo>,
    /// Dominant reactions whose projection changes no low-copy species.
    dropped: Vec<String>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct ProjectedInfo {
    id: String,
    source: String,
    target: String,
    kappa_bar: f64,
    kappa_bar_exact: Option<String>,
    contributions: Vec<ContributionInfo>,
}

#[derive(Serialize)]
struct ContributionInfo {
    from: String,
    kappa: f64,
    s: f64,
    s_exact: Option<String>,
}

fn cmd_reduce(args: &ReduceArgs) -> Result<ExitCode> {
    let net = load_network(&args.net)?;
    let n = args.n as f64;
    let sys = ScaledSystem::new(&net, n)?;
    let projected = build_projected_system(&net)?;
    let conditions = validate_conditions(&net, &sys.scaling);

    let class_of = |k: usize| -> &'static str {
        if sys.scaling.dominant.contains(&k) {
            "dominant"
        } else if sys.scaling.negligible.contains(&k) {
            "negligible"
        } else {
            "degenerate"
        }
    };
    let reactions = net
        .reactions()
        .iter()
        .enumerate()
        .map(|(k, r)| ReactionClass {
            id: r.id.clone(),
            order: sys.scaling.orders[k].map(|o| o.to_string()),
            class: class_of(k),
        })
        .collect();

    let rnet = &projected.network;
    let projection = ProjectionReport {
        reactions: projected
            .reactions
            .iter()
            .zip(rnet.reactions())
            .map(|(p, r)| ProjectedInfo {
                id: r.id.clone(),
                source: complex_label(rnet, &p.source),
                target: complex_label(rnet, &p.target),
                kappa_bar: p.kappa_bar,
                kappa_bar_exact: p.kappa_bar_exact.map(|e| e.to_string()),
                contributions: p
                    .contributions
                    .iter()
                    .map(|c| ContributionInfo {
                        from: c.id.clone(),
                        kappa: c.kappa,
                        s: c.s,
                        s_exact: c.s_exact.map(|e| e.to_string()),
                    })
                    .collect(),
            })
            .collect(),
        dropped: projected.dropped.iter().map(|d| d.id.clone()).collect(),
        warnings: projected.warnings.clone(),
    };

    let reduced_text = serialize_network(rnet);
    if let Some(path) = &args.emit_reduced {
        fs::write(path, &reduced_text)
            .with_context(|| format!("cannot write {}", path.display()))?;
    }

    let report = ReduceReport {
        file: args.net.display().to_string(),
        n,
        theta0: sys.scaling.theta0.to_string(),
        gamma: sys.gamma.to_string(),
        compact_set: CompactSet { rho: args.rho, m: n.powf(args.rho) },
        reactions,
        conditions,
        projection,
        reduced_network: reduced_text,
    };
    emit_json(&report, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SimulateArgs {
    /// Network file in the `.net` grammar.
    net: PathBuf,
    /// Scaling parameter (original system only).
    #[arg(long = "N", conflicts_with = "reduced")]
    n: Option<u64>,
    /// Horizon in reduced time units.
    #[arg(long = "T")]
    t: f64,
    /// Number of independent trajectories.
    #[arg(long)]
    samples: usize,
    /// Base seed; trajectory i uses counter-mode stream i.
    #[arg(long)]
    seed: u64,
    /// Simulate the short-timescale projection instead of the original
    /// system.
    #[arg(long)]
    reduced: bool,
    /// Comma-separated species to record (default: all low-copy species).
    #[arg(long, value_delimiter = ',')]
    record: Vec<String>,
    /// Monitor first exit from the compact set of radius M = N^rho.
    #[arg(long, conflicts_with = "reduced")]
    exit_rho: Option<f64>,
    /// Run trajectories sequentially even when the parallel feature is on.
    #[arg(long)]
    sequential: bool,
    /// Write the JSON summary here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the recorded marginal histogram as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Serialize)]
struct SimulateReport {
    file: String,
    mode: &'static str,
    n: Option<f64>,
    horizon: f64,
    samples: usize,
    seed: u64,
    recorded: Vec<String>,
    exit: Option<ExitSummary>,
    /// Trajectories that hit the jump cap before the horizon; they are
    /// excluded from the histogram.
    capped: u64,
    jump_mean: f64,
    jump_second_moment: f64,
    histogram: Vec<HistogramRow>,
}

#[derive(Serialize)]
struct ExitSummary {
    rho: f64,
    m: f64,
    exited: u64,
    fraction: f64,
}

#[derive(Serialize)]
struct HistogramRow {
    state: Vec<i64>,
    probability: f64,
}

fn histogram_rows(ens: &Ensemble, names: &[String]) -> Result<(Vec<HistogramRow>, String)> {
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let dims = ens.dims(&name_refs)?;
    let dist = ens.distribution(&dims);
    let rows: Vec<HistogramRow> = dist
        .iter()
        .map(|(state, p)| HistogramRow { state: state.clone(), probability: p })
        .collect();
    let mut csv = String::new();
    csv.push_str(&names.join(","));
    csv.push_str(",probability\n");
    for row in &rows {
        for v in &row.state {
            csv.push_str(&v.to_string());
            csv.push(',');
        }
        csv.push_str(&format!("{}\n", row.probability));
    }
    Ok((rows, csv))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<ExitCode> {
    let net = load_network(&args.net)?;
    let mut cfg = SimConfig::new(args.t, args.samples, args.seed);
    cfg.parallel = !args.sequential;

    let (mode, n, ensemble) = if args.reduced {
        let projected = build_projected_system(&net)?;
        let ens = simulate_reduced(&projected.network, &cfg)?;
        ("reduced", None, ens)
    } else {
        let Some(n) = args.n else {
            bail!("--N is required to simulate the original system");
        };
        let n = n as f64;
        let sys = ScaledSystem::new(&net, n)?;
        if let Some(rho) = args.exit_rho {
            cfg.exit_m = Some(n.powf(rho));
        }
        let ens = simulate_original(&sys, &cfg)?;
        ("original", Some(n), ens)
    };

    let recorded: Vec<String> = if args.record.is_empty() {
        match mode {
            "reduced" => ensemble.species.clone(),
            _ => net.species().iter().filter(|s| s.is_low()).map(|s| s.name.clone()).collect(),
        }
    } else {
        args.record.clone()
    };

    let exit = args.exit_rho.map(|rho| {
        let exited = ensemble.exited_count();
        ExitSummary {
            rho,
            m: n.unwrap().powf(rho),
            exited,
            fraction: exited as f64 / args.samples as f64,
        }
    });

    let (m1, m2) = ensemble.jump_moments();
    let (histogram, csv) = histogram_rows(&ensemble, &recorded)?;
    if let Some(path) = &args.csv {
        write_csv(path, &csv)?;
    }

    let report = SimulateReport {
        file: args.net.display().to_string(),
        mode,
        n,
        horizon: args.t,
        samples: args.samples,
        seed: args.seed,
        recorded,
        exit,
        capped: ensemble.capped_count(),
        jump_mean: m1,
        jump_second_moment: m2,
        histogram,
    };
    emit_json(&report, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// cme
// ---------------------------------------------------------------------------

#[derive(Args)]
struct CmeArgs {
    /// Reduced network file; species are taken at unit scale.
    net: PathBuf,
    /// Horizon for the transient solve.
    #[arg(long = "T", required_unless_present = "stationary", conflicts_with = "stationary")]
    t: Option<f64>,
    /// Cap every species at this copy number.
    #[arg(long = "box", value_name = "M")]
    box_bound: Option<i64>,
    /// Bound the state set through detected conservation constraints
    /// (the default when no box is given).
    #[arg(long, conflicts_with = "box_bound")]
    auto_slice: bool,
    /// Override initial copy numbers, e.g. "S1=2,S4=1"; unlisted species
    /// keep the file's values.
    #[arg(long)]
    init: Option<String>,
    /// Solve for the stationary law instead of a transient horizon.
    #[arg(long)]
    stationary: bool,
    /// Write the JSON certificate here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the solved pmf as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Serialize)]
struct CmeReport {
    file: String,
    species: Vec<String>,
    init: Vec<i64>,
    mode: &'static str,
    horizon: Option<f64>,
    truncation: TruncationInfo,
    /// Probability mass lost through the truncation boundary (transient) or
    /// flowing across it in equilibrium (stationary).
    leaked_mass: f64,
    /// Series tail bound (transient) or power-iteration residual
    /// (stationary).
    residual: f64,
    solver: SolverInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    probe: Option<StationarityProbe>,
}

#[derive(Serialize)]
struct TruncationInfo {
    mode: &'static str,
    bounds: Vec<i64>,
    states: usize,
    closed: bool,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SolverInfo {
    Uniformization { rate: f64, terms: usize },
    PowerIteration { iterations: usize },
}

fn parse_init(net: &ReactionNetwork, spec: Option<&str>) -> Result<Vec<i64>> {
    let mut init: Vec<i64> =
        net.initial_counts(1.0).iter().map(|&v| v.round() as i64).collect();
    let Some(spec) = spec else {
        return Ok(init);
    };
    for part in spec.split(',') {
        let part = part.trim();
        let Some((name, value)) = part.split_once('=') else {
            bail!("bad --init entry '{part}', expected NAME=COUNT");
        };
        let idx = net
            .species_index(name.trim())
            .with_context(|| format!("unknown species '{}' in --init", name.trim()))?;
        init[idx] = value
            .trim()
            .parse()
            .with_context(|| format!("bad count '{}' in --init", value.trim()))?;
    }
    Ok(init)
}

fn pmf_csv(space: &StateSpace, p: &[f64]) -> String {
    let mut csv = String::new();
    csv.push_str(&space.species.join(","));
    csv.push_str(",probability\n");
    for (state, &prob) in space.states.iter().zip(p) {
        for v in state {
            csv.push_str(&v.to_string());
            csv.push(',');
        }
        csv.push_str(&format!("{prob}\n"));
    }
    csv
}

fn cmd_cme(args: &CmeArgs) -> Result<ExitCode> {
    let net = load_network(&args.net)?;
    let init = parse_init(&net, args.init.as_deref())?;
    let truncation = match args.box_bound {
        Some(m) => Truncation::Box(m),
        None => Truncation::Auto,
    };
    let space = enumerate_states(&net, &init, truncation)?;
    let gen = build_generator(&net, &space);

    let truncation_info = TruncationInfo {
        mode: if args.box_bound.is_some() { "box" } else { "auto" },
        bounds: space.bounds.clone(),
        states: space.len(),
        closed: space.closed,
    };

    let (mode, horizon, p, leaked_mass, residual, solver, probe) = if args.stationary {
        let sol = stationary_solve(&gen, DEFAULT_STATIONARY_TOL)?;
        let probe = stationarity_probe(&space, &gen, &sol);
        (
            "stationary",
            None,
            sol.pi.clone(),
            sol.stationary_leak,
            sol.residual,
            SolverInfo::PowerIteration { iterations: sol.iterations },
            Some(probe),
        )
    } else {
        let t = args.t.expect("clap guarantees -T in transient mode");
        let p0 = space.point_mass(&init)?;
        let sol = transient_solve(&gen, &p0, t, DEFAULT_SERIES_TOL)?;
        (
            "transient",
            Some(t),
            sol.p.clone(),
            sol.deficit,
            sol.series_tail,
            SolverInfo::Uniformization { rate: sol.uniformization_rate, terms: sol.terms },
            None,
        )
    };

    if let Some(path) = &args.csv {
        write_csv(path, &pmf_csv(&space, &p))?;
    }

    let report = CmeReport {
        file: args.net.display().to_string(),
        species: space.species.clone(),
        init,
        mode,
        horizon,
        truncation: truncation_info,
        leaked_mass,
        residual,
        solver,
        probe,
    };
    emit_json(&report, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// converge
// ---------------------------------------------------------------------------

#[derive(Args)]
struct ConvergeArgs {
    /// Network file in the `.net` grammar.
    net: PathBuf,
    /// Event over low-copy species, e.g. "S1 in {3,4}".
    #[arg(long)]
    event: String,
    /// Horizon in reduced time units.
    #[arg(long)]
    t: f64,
    /// Comma-separated scaling parameters, ascending.
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
    /// Trajectories per grid point.
    #[arg(long)]
    samples: usize,
    /// Base seed; each grid point derives its own stream deterministically.
    #[arg(long)]
    seed: u64,
    /// Replace the original system with the reduced chain at every grid
    /// point; distances then probe the Monte Carlo noise floor.
    #[arg(long)]
    self_check: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the per-point table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn cmd_converge(args: &ConvergeArgs) -> Result<ExitCode> {
    let net = load_network(&args.net)?;
    let cfg = SweepConfig {
        event: EventSet::parse(&args.event)?,
        t: args.t,
        grid: args.grid.clone(),
        samples: args.samples,
        base_seed: args.seed,
        self_check: args.self_check,
    };
    let report = convergence_sweep(&net, &cfg)?;
    if let Some(path) = &args.csv {
        write_csv(path, &report.to_csv())?;
    }
    emit_json(&report, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// lemmas
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LemmaSelection {
    /// Intensity gaps, jump moments, and exit probabilities.
    All,
    /// Dominant/negligible/total intensity bounds on compact-set states.
    Intensity,
    /// Second moment of the reduced chain's jump count.
    Moments,
    /// Exit probability from the compact set, decreasing in N.
    Exit,
}

#[derive(Args)]
struct LemmasArgs {
    /// Network file in the `.net` grammar.
    net: PathBuf,
    /// Which harness to run.
    #[arg(long, value_enum, default_value_t = LemmaSelection::All)]
    which: LemmaSelection,
    /// Compact-set radius exponent: M = N^rho.
    #[arg(long, default_value_t = 0.3)]
    rho: f64,
    /// Comma-separated scaling parameters for the intensity and exit
    /// checks (defaults: 1e3,1e4 and 1e2,1e3,1e4).
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Random states or trajectories per check point.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_lemmas(args: &LemmasArgs) -> Result<ExitCode> {
    let net = load_network(&args.net)?;
    let want = |sel: LemmaSelection| args.which == LemmaSelection::All || args.which == sel;

    let intensity_gap = if want(LemmaSelection::Intensity) {
        let cfg = IntensityGapConfig {
            grid: args.grid.clone().unwrap_or_else(|| vec![1e3, 1e4]),
            rho: args.rho,
            samples: args.samples,
            seed: args.seed,
            ..IntensityGapConfig::default()
        };
        Some(intensity_gap_check(&net, &cfg)?)
    } else {
        None
    };
    let jump_moment = if want(LemmaSelection::Moments) {
        let cfg = JumpMomentConfig {
            samples: args.samples,
            seed: args.seed,
            ..JumpMomentConfig::default()
        };
        Some(jump_moment_check(&net, &cfg)?)
    } else {
        None
    };
    let exit_probability = if want(LemmaSelection::Exit) {
        let cfg = ExitConfig {
            grid: args.grid.clone().unwrap_or_else(|| vec![1e2, 1e3, 1e4]),
            rho: args.rho,
            samples: args.samples,
            seed: args.seed,
            ..ExitConfig::default()
        };
        Some(exit_probability_check(&net, &cfg)?)
    } else {
        None
    };

    let report = LemmaSuiteReport { intensity_gap, jump_moment, exit_probability };
    let all_hold = report.all_hold();
    emit_json(&report, args.out.as_deref())?;
    Ok(if all_hold { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
