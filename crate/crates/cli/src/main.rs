use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mtqa_core::embedding::{chain_stats, parallel_embedding_search, plan_to_string, validate_plan, EmbedConfig};
use mtqa_core::graphs::{gen_erdos_renyi, load_graph, save_graph, ProblemGraph};
use mtqa_core::harness::{
    build_problem, capacity_sweep, run_experiment, write_capacity_csv, write_csvs, ExperimentConfig, MetricsReport,
    Mode, QuboSettings, TopologySpec,
};
use mtqa_core::parameterize::ProblemKind;
use mtqa_core::spectrum::{
    combine_different, combine_identical, default_schedule, eigencurves, transition_probabilities, uniform_grid,
    AnnealSchedule, SpectrumResult, DEFAULT_ANNEAL_TIME, DEFAULT_GRID_POINTS, DEFAULT_TEMPERATURE,
};

#[derive(Parser)]
#[command(name = "mtqa", version, about = "Multi-tasking quantum annealing emulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate seeded Erdős–Rényi problem graphs.
    Gen(GenArgs),
    /// Pack embeddings of graphs onto a topology, or run a capacity sweep.
    Embed(EmbedArgs),
    /// Run an experiment from a config file.
    Run(RunArgs),
    /// Eigenspectrum and transition probabilities of a small logical problem.
    Spectrum(SpectrumArgs),
    /// Regenerate CSV plot data from a report and print its summary.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.9)]
    p: f64,
    /// Seed of the first graph; later graphs use consecutive seeds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Also write the QUBO of this kind next to each graph.
    #[arg(long)]
    kind: Option<ProblemKind>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    /// Graph files to pack together.
    graphs: Vec<PathBuf>,
    /// Experiment config supplying topology and embedding settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `chimera:R,C,S` or a hardware file.
    #[arg(long)]
    topology: Option<TopologySpec>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep a buffer of unused qubits around every embedding.
    #[arg(long)]
    isolated: bool,
    /// Capacity sweep over these sizes (comma separated) instead of packing files.
    #[arg(long, value_delimiter = ',')]
    sweep: Vec<usize>,
    /// Graph seeds `seed..seed+seeds` per size in a sweep.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 0.9)]
    p: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Restrict to these modes (repeatable).
    #[arg(long)]
    mode: Vec<Mode>,
    #[arg(long)]
    topology: Option<TopologySpec>,
}

#[derive(Args)]
struct SpectrumArgs {
    graph: PathBuf,
    #[arg(long)]
    kind: ProblemKind,
    /// Second problem annealed alongside, as `KIND:PATH`.
    #[arg(long)]
    with: Option<String>,
    /// Identical copies of the first problem (ignored with `--with`).
    #[arg(long, default_value_t = 1)]
    copies: usize,
    /// Schedule CSV with columns `s,A_GHz,B_GHz`; the built-in one otherwise.
    #[arg(long)]
    schedule: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    points: usize,
    #[arg(long, default_value_t = DEFAULT_ANNEAL_TIME)]
    anneal_time: f64,
    /// Kelvin.
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    temperature: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    report: PathBuf,
    /// Where to write the CSVs; next to the report by default.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(a) => gen(a),
        Command::Embed(a) => embed(a),
        Command::Run(a) => run(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Report(a) => report(a),
    }
}

fn gen(a: GenArgs) -> Result<()> {
    fs::create_dir_all(&a.out_dir)?;
    for seed in a.seed..a.seed + a.count {
        let g = gen_erdos_renyi(a.n, a.p, seed)?;
        let stem = format!("er-n{}-s{seed}", a.n);
        let path = a.out_dir.join(format!("{stem}.txt"));
        save_graph(&g, &path)?;
        println!("{} ({} edges)", path.display(), g.edge_count());
        if let Some(kind) = a.kind {
            let p = build_problem(kind, g, &QuboSettings::default())?;
            fs::write(a.out_dir.join(format!("{stem}-{kind}.qubo.json")), p.qubo.to_json())?;
        }
    }
    Ok(())
}

fn embed(a: EmbedArgs) -> Result<()> {
    let (mut topology, cfg) = match &a.config {
        Some(path) => {
            let c = ExperimentConfig::load(path)?;
            (c.topology, c.embedding)
        }
        None => (TopologySpec::default(), EmbedConfig::default()),
    };
    if let Some(t) = a.topology {
        topology = t;
    }
    let h = topology.build()?;
    fs::create_dir_all(&a.out_dir)?;
    if !a.sweep.is_empty() {
        if !a.graphs.is_empty() {
            bail!("give either graph files or --sweep, not both");
        }
        let seeds: Vec<u64> = (a.seed..a.seed + a.seeds).collect();
        let runs = capacity_sweep(&a.sweep, &seeds, a.p, &h, &cfg)?;
        let path = a.out_dir.join("capacity.csv");
        write_capacity_csv(&runs, fs::File::create(&path)?)?;
        for n in &a.sweep {
            for isolation in [false, true] {
                let mut c: Vec<usize> = runs.iter().filter(|r| r.n == *n && r.isolation == isolation).map(|r| r.copies()).collect();
                c.sort_unstable();
                println!("n={n:<3} {:<12} median copies {}", if isolation { "isolated" } else { "non-isolated" }, c[c.len() / 2]);
            }
        }
        println!("{}", path.display());
        return Ok(());
    }
    if a.graphs.is_empty() {
        bail!("no graph files given");
    }
    let graphs: Vec<ProblemGraph> = a
        .graphs
        .iter()
        .map(|p| load_graph(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<_>>()?;
    let plan = parallel_embedding_search(&graphs, &h, a.isolated, a.seed, &cfg)?;
    validate_plan(&plan, &graphs, &h)?;
    let path = a.out_dir.join(if a.isolated { "plan-isolated.txt" } else { "plan.txt" });
    fs::write(&path, plan_to_string(&plan))?;
    for (id, count) in plan.counts() {
        println!("{}: {count} copies", a.graphs[id].display());
    }
    if let Ok(s) = chain_stats(&plan) {
        println!("chain length mean {:.2} sd {:.2} max {}", s.aggregate.mean, s.aggregate.sd, s.aggregate.max);
    }
    println!("{}", path.display());
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    if let Some(t) = a.topology {
        cfg.topology = t;
    }
    if !a.mode.is_empty() {
        cfg.modes = a.mode;
    }
    if a.out_dir.is_some() {
        cfg.output_dir = a.out_dir;
    }
    if cfg.output_dir.is_none() {
        cfg.output_dir = Some(PathBuf::from("."));
    }
    let report = run_experiment(&cfg)?;
    print_summary(&report, &mut std::io::stdout().lock())?;
    Ok(())
}

fn load_problem(kind: ProblemKind, path: &Path) -> Result<mtqa_core::parameterize::LogicalProblem> {
    let g = load_graph(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(build_problem(kind, g, &QuboSettings::default())?)
}

fn spectrum(a: SpectrumArgs) -> Result<()> {
    let sched = match &a.schedule {
        Some(p) => AnnealSchedule::load(p, a.anneal_time)?,
        None => default_schedule().with_anneal_time(a.anneal_time)?,
    };
    let grid = uniform_grid(a.points);
    let first = load_problem(a.kind, &a.graph)?;
    let mut spec = eigencurves(&first.ising, &sched, &grid)?;
    if let Some(other) = &a.with {
        let (kind, path) = other.split_once(':').context("--with expects KIND:PATH")?;
        let kind: ProblemKind = kind.parse()?;
        let second = load_problem(kind, Path::new(path))?;
        spec = combine_different(&spec, &eigencurves(&second.ising, &sched, &grid)?)?;
    } else if a.copies > 1 {
        spec = combine_identical(&spec);
    }
    let spec = transition_probabilities(&spec, &sched, a.temperature)?;
    fs::create_dir_all(&a.out_dir)?;
    let path = a.out_dir.join("spectrum.csv");
    spec.write_csv(fs::File::create(&path)?)?;
    print_spectrum(&spec);
    println!("{}", path.display());
    Ok(())
}

fn print_spectrum(spec: &SpectrumResult) {
    let (s, gap) = spec.min_gap;
    println!("minimum gap {gap:.6} GHz at s = {s:.4}");
    if let Some((s, p)) = spec.max_p_total {
        println!("peak transition probability {p:.3e} at s = {s:.4}");
    }
}

fn report(a: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&a.report).with_context(|| format!("reading {}", a.report.display()))?;
    let report = MetricsReport::from_json(&text)?;
    let dir = match a.out_dir {
        Some(d) => d,
        None => a.report.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    fs::create_dir_all(&dir)?;
    write_csvs(&report, &dir)?;
    print_summary(&report, &mut std::io::stdout().lock())?;
    Ok(())
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |x| format!("{x:.3e}"))
}

fn print_summary(r: &MetricsReport, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{:<17} {:<5} {:>3} {:>7} {:>8} {:>11} {:>11}", "mode", "kind", "n", "packed", "gsp", "t_run [s]", "tts [s]")?;
    for (m, t) in r.modes.iter().zip(&r.timing) {
        for (g, gt) in m.groups.iter().zip(&t.groups) {
            let packed = m.packed.map_or("-".into(), |p| p.to_string());
            writeln!(
                out,
                "{:<17} {:<5} {:>3} {:>7} {:>8.4} {:>11} {:>11}",
                m.mode.name(),
                g.kind.to_string(),
                g.n,
                packed,
                g.gsp,
                cell(gt.t_run_seconds),
                cell(gt.tts_seconds)
            )?;
        }
    }
    Ok(())
}
