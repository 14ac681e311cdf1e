//! Experiment configuration, end-to-end runs over the five solver modes,
//! metrics and report artifacts.

mod config;
pub mod metrics;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{
    chain_stats, find_embedding, parallel_embedding_search, plan_to_string, validate_plan, ChainStats, EmbedConfig,
    ParallelPlan, PlanEntry,
};
use crate::error::{Error, Result};
use crate::graphs::{gen_erdos_renyi, ProblemGraph};
use crate::parameterize::{compose_mtqa, compose_pqa, ComposedProgram, LogicalProblem, ParamMode, ProblemKind};
use crate::qubo::{brute_force_min, build_gpp_qubo, build_mvcp_qubo, cut_edges, spins_to_bits, EXHAUSTIVE_LIMIT};
use crate::sampling::{sa_sample_over, unembed_majority_vote, BetaSchedule, SampleSet};
use crate::seed;
use crate::topology::HardwareGraph;

pub use config::{ExperimentConfig, Mode, ProblemSpec, QuboSettings, TopologySpec, SCHEMA_VERSION};
pub use metrics::{gsp, t_run, tts, Quartiles, DEFAULT_P_SUCCESS};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "MTQA_THREADS";

/// Relative slack when comparing a sampled energy to the optimum.
const HIT_TOLERANCE: f64 = 1e-9;

/// Thread pool honoring `MTQA_THREADS` (all cores when unset).
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// One generated logical instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub id: usize,
    pub label: String,
    pub seed: u64,
    pub p: f64,
    pub problem: LogicalProblem,
}

pub fn build_problem(kind: ProblemKind, g: ProblemGraph, q: &QuboSettings) -> Result<LogicalProblem> {
    let qubo = match kind {
        ProblemKind::Mvcp => build_mvcp_qubo(&g, q.mvcp_a, q.mvcp_b)?,
        ProblemKind::Gpp => build_gpp_qubo(&g, q.gpp_b, q.gpp_penalty)?,
    };
    Ok(LogicalProblem::new(kind, g, qubo))
}

/// Instances in config order: every seed of the first spec, then the next.
pub fn build_instances(cfg: &ExperimentConfig) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for spec in &cfg.problems {
        for &s in &spec.seeds {
            let label = format!("{}-n{}-s{}", spec.kind, spec.n, s);
            let problem = gen_erdos_renyi(spec.n, spec.p, s)
                .and_then(|g| build_problem(spec.kind, g, &cfg.qubo))
                .map_err(|e| e.at_stage("generate", label.clone(), s))?;
            out.push(Instance {
                id: out.len(),
                label,
                seed: s,
                p: spec.p,
                problem,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimumSource {
    /// Exhaustive search of the logical QUBO.
    Exact,
    /// Lowest energy seen in any mode of this run.
    BestKnown,
    /// Too large for exhaustive search and never sampled.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceInfo {
    pub id: usize,
    pub label: String,
    pub kind: ProblemKind,
    pub n: usize,
    pub p: f64,
    pub seed: u64,
    pub edges: usize,
    pub optimum: Option<f64>,
    pub optimum_source: OptimumSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutSummary {
    pub best: usize,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub id: usize,
    /// Copies packed onto the device (1 for per-instance modes, 0 when the
    /// instance could not be embedded).
    pub copies: usize,
    /// Logical reads over all copies.
    pub reads: usize,
    pub hits: usize,
    /// Fraction of reads at the optimum.
    pub p_opt: f64,
    pub best_energy: Option<f64>,
    pub energies: Option<Quartiles>,
    pub cut_edges: Option<CutSummary>,
    pub chain_break_fraction: Option<f64>,
    pub chain_strength: Option<f64>,
    /// Mean over copies.
    pub scale_factor: Option<f64>,
    pub embed_seed: Option<u64>,
    pub sample_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupResult {
    pub kind: ProblemKind,
    pub n: usize,
    pub instances: usize,
    pub gsp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub mode: Mode,
    pub parameterization: Option<ParamMode>,
    /// File name of the packing plan inside the output directory.
    pub plan_file: Option<String>,
    pub plan_seed: Option<u64>,
    pub packed: Option<usize>,
    pub chain_stats: Option<ChainStats>,
    /// Instance id of each plan entry, in plan order.
    pub entry_instances: Vec<usize>,
    pub chain_break_fraction: Option<f64>,
    pub instances: Vec<InstanceResult>,
    pub groups: Vec<GroupResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTiming {
    pub kind: ProblemKind,
    pub n: usize,
    pub p_avg: f64,
    pub t_run_seconds: Option<f64>,
    /// `None` when no instance of the group ever reached its optimum.
    pub tts_seconds: Option<f64>,
}

/// Everything that depends on wall-clock time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTiming {
    pub mode: Mode,
    /// Sampler wall time, standing in for device access time.
    pub sampler_seconds: f64,
    pub embed_seconds: f64,
    /// Majority vote plus logical energy evaluation, per instance.
    pub unembed_seconds: Vec<f64>,
    pub groups: Vec<GroupTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub master_seed: u64,
    pub topology: String,
    pub reads: usize,
    pub sweeps: usize,
    pub beta_schedule: BetaSchedule,
    pub p_success: f64,
    pub instances: Vec<InstanceInfo>,
    pub modes: Vec<ModeReport>,
    pub timing: Vec<ModeTiming>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// The report without its timing section, for reproducibility checks.
    pub fn deterministic_json(&self) -> String {
        let mut r = self.clone();
        r.timing.clear();
        r.to_json()
    }
}

/// Per-instance outcome of one mode before optimality is known.
#[derive(Default)]
struct Raw {
    copies: usize,
    energies: Vec<f64>,
    cuts: Vec<usize>,
    broken: Vec<f64>,
    chain_strength: Option<f64>,
    scale_factors: Vec<f64>,
    embed_seed: Option<u64>,
    sample_seed: u64,
    sampler_seconds: f64,
    unembed_seconds: f64,
}

struct ModeRun {
    mode: Mode,
    parameterization: Option<ParamMode>,
    plan: Option<(String, u64, ParallelPlan)>,
    raw: Vec<Raw>,
    sampler_seconds: f64,
    embed_seconds: f64,
}

fn record(raw: &mut Raw, inst: &Instance, bits: &[u8], energy: f64) -> Result<()> {
    raw.energies.push(energy);
    if inst.problem.kind == ProblemKind::Gpp {
        raw.cuts.push(cut_edges(&inst.problem.graph, bits)?);
    }
    Ok(())
}

fn plan_name(isolation: bool) -> &'static str {
    if isolation {
        "plan-mtqa-isolated.txt"
    } else {
        "plan-mtqa-nonisolated.txt"
    }
}

fn sample_program(
    program: &ComposedProgram,
    plan: &ParallelPlan,
    instances: &[Instance],
    cfg: &ExperimentConfig,
    sample_seed: u64,
    raw: &mut [Raw],
) -> Result<f64> {
    let problems: Vec<LogicalProblem> = instances.iter().map(|i| i.problem.clone()).collect();
    let mut vars: Vec<usize> = plan.entries.iter().flat_map(|e| e.embedding.qubits()).collect();
    vars.sort_unstable();
    let samples: SampleSet = sa_sample_over(&program.combined, &vars, &cfg.sampler, sample_seed)
        .map_err(|e| e.at_stage("sample", "program", sample_seed))?;
    let sols = unembed_majority_vote(&samples, program, &problems).map_err(|e| e.at_stage("unembed", "program", sample_seed))?;
    for (sol, inst) in sols.instances.iter().zip(&program.instances) {
        let r = &mut raw[sol.problem_id];
        let logical = &instances[sol.problem_id];
        r.copies += 1;
        r.sample_seed = sample_seed;
        r.chain_strength = Some(inst.chain_strength);
        r.scale_factors.push(inst.scale_factor);
        r.broken.push(sol.chain_break_fraction);
        r.unembed_seconds += sol.unembed_seconds;
        for lr in &sol.reads {
            record(r, logical, &lr.bits, lr.energy)?;
        }
    }
    Ok(samples.wall_time_seconds)
}

fn run_packed(
    mode: Mode,
    plan: &ParallelPlan,
    plan_seed: u64,
    instances: &[Instance],
    h: &HardwareGraph,
    cfg: &ExperimentConfig,
) -> Result<ModeRun> {
    let sample_seed = seed::derive(seed::derive(cfg.master_seed, mode.stream()), 1);
    let problems: Vec<LogicalProblem> = instances.iter().map(|i| i.problem.clone()).collect();
    let (param, program) = if mode == Mode::Pqa {
        (ParamMode::Pqa, compose_pqa(plan, &problems, h, &cfg.parameters))
    } else {
        (ParamMode::Mtqa, compose_mtqa(plan, &problems, h, &cfg.parameters))
    };
    let program = program.map_err(|e| e.at_stage("parameterize", mode.name(), sample_seed))?;
    let mut raw: Vec<Raw> = instances
        .iter()
        .map(|_| Raw {
            embed_seed: Some(plan_seed),
            sample_seed,
            ..Raw::default()
        })
        .collect();
    let sampler_seconds = if plan.is_empty() {
        0.0
    } else {
        sample_program(&program, plan, instances, cfg, sample_seed, &mut raw)?
    };
    Ok(ModeRun {
        mode,
        parameterization: Some(param),
        plan: Some((plan_name(plan.isolation).to_string(), plan_seed, plan.clone())),
        raw,
        sampler_seconds,
        embed_seconds: 0.0,
    })
}

fn run_single(instances: &[Instance], h: &HardwareGraph, cfg: &ExperimentConfig) -> Result<ModeRun> {
    let base = seed::derive(cfg.master_seed, Mode::QaSingle.stream());
    let mut raw = Vec::with_capacity(instances.len());
    let (mut sampler_seconds, mut embed_seconds) = (0.0, 0.0);
    for inst in instances {
        let embed_seed = seed::derive(base, 2 * inst.id as u64);
        let sample_seed = seed::derive(base, 2 * inst.id as u64 + 1);
        let mut r = Raw {
            embed_seed: Some(embed_seed),
            sample_seed,
            ..Raw::default()
        };
        let start = Instant::now();
        let source = inst.problem.qubo.interaction_graph()?;
        let found = find_embedding(&source, h, embed_seed, &cfg.embedding)
            .map_err(|e| e.at_stage("embed", inst.label.clone(), embed_seed))?;
        embed_seconds += start.elapsed().as_secs_f64();
        if let Some(embedding) = found {
            let plan = ParallelPlan {
                entries: vec![PlanEntry {
                    problem_id: 0,
                    embedding,
                }],
                isolation: false,
                hardware_ref: h.family().to_string(),
            };
            let program = compose_mtqa(&plan, std::slice::from_ref(&inst.problem), h, &cfg.parameters)
                .map_err(|e| e.at_stage("parameterize", inst.label.clone(), sample_seed))?;
            let mut one = [r];
            let t = sample_program(&program, &plan, std::slice::from_ref(inst), cfg, sample_seed, &mut one)
                .map_err(|e| e.at_stage("qa-single", inst.label.clone(), sample_seed))?;
            [r] = one;
            r.sampler_seconds = t;
            sampler_seconds += t;
        }
        raw.push(r);
    }
    Ok(ModeRun {
        mode: Mode::QaSingle,
        parameterization: Some(ParamMode::Mtqa),
        plan: None,
        raw,
        sampler_seconds,
        embed_seconds,
    })
}

fn run_sa(instances: &[Instance], cfg: &ExperimentConfig) -> Result<ModeRun> {
    let base = seed::derive(cfg.master_seed, Mode::SaLogical.stream());
    let mut raw = Vec::with_capacity(instances.len());
    let mut sampler_seconds = 0.0;
    for inst in instances {
        let sample_seed = seed::derive(base, inst.id as u64);
        let vars: Vec<usize> = (0..inst.problem.qubo.size()).collect();
        let samples = sa_sample_over(&inst.problem.ising, &vars, &cfg.sampler, sample_seed)
            .map_err(|e| e.at_stage("sample", inst.label.clone(), sample_seed))?;
        let mut r = Raw {
            copies: 1,
            sample_seed,
            sampler_seconds: samples.wall_time_seconds,
            ..Raw::default()
        };
        for read in &samples.reads {
            let bits = spins_to_bits(&read.spins);
            let e = inst.problem.qubo.energy(&bits)?;
            record(&mut r, inst, &bits, e)?;
        }
        sampler_seconds += samples.wall_time_seconds;
        raw.push(r);
    }
    Ok(ModeRun {
        mode: Mode::SaLogical,
        parameterization: None,
        plan: None,
        raw,
        sampler_seconds,
        embed_seconds: 0.0,
    })
}

fn is_hit(e: f64, opt: f64) -> bool {
    e <= opt + HIT_TOLERANCE * opt.abs().max(1.0)
}

fn median_usize(v: &[usize]) -> f64 {
    let f: Vec<f64> = v.iter().map(|&x| x as f64).collect();
    Quartiles::of(&f).map_or(f64::NAN, |q| q.median)
}

/// Groups `(kind, n)` in first-seen order of the instance list.
fn groups(instances: &[Instance]) -> Vec<((ProblemKind, usize), Vec<usize>)> {
    let mut out: Vec<((ProblemKind, usize), Vec<usize>)> = Vec::new();
    for inst in instances {
        let key = (inst.problem.kind, inst.problem.graph.node_count());
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, ids)) => ids.push(inst.id),
            None => out.push((key, vec![inst.id])),
        }
    }
    out
}

fn mode_report(run: &ModeRun, instances: &[Instance], optimum: &[Option<f64>]) -> Result<ModeReport> {
    let mut results = Vec::with_capacity(instances.len());
    for (inst, r) in instances.iter().zip(&run.raw) {
        let hits = match optimum[inst.id] {
            Some(opt) => r.energies.iter().filter(|&&e| is_hit(e, opt)).count(),
            None => 0,
        };
        let reads = r.energies.len();
        results.push(InstanceResult {
            id: inst.id,
            copies: r.copies,
            reads,
            hits,
            p_opt: if reads == 0 { 0.0 } else { hits as f64 / reads as f64 },
            best_energy: r.energies.iter().copied().min_by(f64::total_cmp),
            energies: Quartiles::of(&r.energies),
            cut_edges: r.cuts.iter().min().map(|&best| CutSummary {
                best,
                median: median_usize(&r.cuts),
            }),
            chain_break_fraction: (!r.broken.is_empty()).then(|| r.broken.iter().sum::<f64>() / r.broken.len() as f64),
            chain_strength: r.chain_strength,
            scale_factor: (!r.scale_factors.is_empty())
                .then(|| r.scale_factors.iter().sum::<f64>() / r.scale_factors.len() as f64),
            embed_seed: r.embed_seed,
            sample_seed: r.sample_seed,
        });
    }
    let mut group_results = Vec::new();
    for ((kind, n), ids) in groups(instances) {
        let p: Vec<f64> = ids.iter().map(|&i| results[i].p_opt).collect();
        group_results.push(GroupResult {
            kind,
            n,
            instances: ids.len(),
            gsp: gsp(&p)?,
        });
    }
    let (plan_file, plan_seed, packed, stats, entry_instances, broken) = match &run.plan {
        Some((name, s, plan)) => {
            let broken: Vec<f64> = run.raw.iter().flat_map(|r| r.broken.iter().copied()).collect();
            (
                Some(name.clone()),
                Some(*s),
                Some(plan.len()),
                chain_stats(plan).ok(),
                plan.entries.iter().map(|e| e.problem_id).collect(),
                (!broken.is_empty()).then(|| broken.iter().sum::<f64>() / broken.len() as f64),
            )
        }
        None => (None, None, None, None, Vec::new(), None),
    };
    Ok(ModeReport {
        mode: run.mode,
        parameterization: run.parameterization,
        plan_file,
        plan_seed,
        packed,
        chain_stats: stats,
        entry_instances,
        chain_break_fraction: broken,
        instances: results,
        groups: group_results,
    })
}

fn mode_timing(run: &ModeRun, report: &ModeReport, instances: &[Instance], cfg: &ExperimentConfig) -> Result<ModeTiming> {
    let reads = cfg.sampler.reads;
    let mut timing = Vec::new();
    let kinds_in_plan = |k: ProblemKind| {
        run.plan
            .as_ref()
            .map_or(0, |(_, _, p)| p.entries.iter().filter(|e| instances[e.problem_id].problem.kind == k).count())
    };
    for ((kind, n), ids) in groups(instances) {
        let p_avg = report.groups.iter().find(|g| g.kind == kind && g.n == n).map_or(0.0, |g| g.gsp);
        let t = if run.plan.is_some() {
            let u: Vec<f64> = ids.iter().map(|&i| run.raw[i].unembed_seconds).collect();
            let (nm, ng) = (kinds_in_plan(ProblemKind::Mvcp), kinds_in_plan(ProblemKind::Gpp));
            if nm + ng == 0 || run.sampler_seconds <= 0.0 {
                None
            } else {
                Some(t_run(reads, run.sampler_seconds, nm, ng, &u)?)
            }
        } else {
            let mut per = Vec::new();
            for &i in &ids {
                let r = &run.raw[i];
                if r.copies > 0 && r.sampler_seconds > 0.0 {
                    let (nm, ng) = if kind == ProblemKind::Mvcp { (1, 0) } else { (0, 1) };
                    per.push(t_run(reads, r.sampler_seconds, nm, ng, &[r.unembed_seconds])?);
                }
            }
            (!per.is_empty()).then(|| per.iter().sum::<f64>() / per.len() as f64)
        };
        let tts_seconds = match t {
            Some(t) if t > 0.0 => tts(t, p_avg, cfg.p_success)?,
            _ => None,
        };
        timing.push(GroupTiming {
            kind,
            n,
            p_avg,
            t_run_seconds: t,
            tts_seconds,
        });
    }
    Ok(ModeTiming {
        mode: run.mode,
        sampler_seconds: run.sampler_seconds,
        embed_seconds: run.embed_seconds,
        unembed_seconds: run.raw.iter().map(|r| r.unembed_seconds).collect(),
        groups: timing,
    })
}

/// Run every configured mode and, when the config names an output
/// directory, write the report and plot data there.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    let (report, plans) = thread_pool()?.install(|| run_modes(cfg))?;
    if let Some(dir) = &cfg.output_dir {
        write_artifacts(&report, &plans, dir)?;
    }
    Ok(report)
}

/// Plans built during a run, keyed by file name.
pub type Plans = BTreeMap<String, ParallelPlan>;

fn run_modes(cfg: &ExperimentConfig) -> Result<(MetricsReport, Plans)> {
    let instances = build_instances(cfg)?;
    let h = cfg.topology.build().map_err(|e| e.at_stage("topology", cfg.topology.label(), cfg.master_seed))?;
    let mut optimum: Vec<Option<f64>> = instances
        .par_iter()
        .map(|inst| {
            if inst.problem.qubo.size() <= EXHAUSTIVE_LIMIT {
                brute_force_min(&inst.problem.qubo)
                    .map(|(_, e)| Some(e))
                    .map_err(|e| e.at_stage("oracle", inst.label.clone(), inst.seed))
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;
    let exact: Vec<bool> = optimum.iter().map(Option::is_some).collect();

    // Embed what the sampler sees: the balance penalty of a GPP QUBO
    // couples every pair of variables.
    let graphs: Vec<ProblemGraph> = instances
        .iter()
        .map(|i| i.problem.qubo.interaction_graph())
        .collect::<Result<_>>()?;
    let mut plans: BTreeMap<bool, (ParallelPlan, u64, f64)> = BTreeMap::new();
    let mut runs = Vec::new();
    for &mode in &cfg.modes {
        let run = match mode {
            Mode::MtqaIsolated | Mode::MtqaNonisolated | Mode::Pqa => {
                let isolation = mode == Mode::MtqaIsolated;
                // PQA reuses the non-isolated plan so both see identical
                // embeddings.
                let owner = if isolation { Mode::MtqaIsolated } else { Mode::MtqaNonisolated };
                if !plans.contains_key(&isolation) {
                    let plan_seed = seed::derive(seed::derive(cfg.master_seed, owner.stream()), 0);
                    let start = Instant::now();
                    let plan = parallel_embedding_search(&graphs, &h, isolation, plan_seed, &cfg.embedding)
                        .map_err(|e| e.at_stage("embed", owner.name(), plan_seed))?;
                    validate_plan(&plan, &graphs, &h)
                        .map_err(|v| Error::Validation(v.to_string()).at_stage("embed", owner.name(), plan_seed))?;
                    plans.insert(isolation, (plan, plan_seed, start.elapsed().as_secs_f64()));
                }
                let (plan, plan_seed, secs) = &plans[&isolation];
                let mut run = run_packed(mode, plan, *plan_seed, &instances, &h, cfg)?;
                if mode == owner {
                    run.embed_seconds = *secs;
                }
                run
            }
            Mode::QaSingle => run_single(&instances, &h, cfg)?,
            Mode::SaLogical => run_sa(&instances, cfg)?,
        };
        runs.push(run);
    }

    for (i, opt) in optimum.iter_mut().enumerate() {
        if opt.is_none() {
            *opt = runs
                .iter()
                .flat_map(|r| r.raw[i].energies.iter().copied())
                .min_by(f64::total_cmp);
        }
    }
    let infos = instances
        .iter()
        .map(|inst| InstanceInfo {
            id: inst.id,
            label: inst.label.clone(),
            kind: inst.problem.kind,
            n: inst.problem.graph.node_count(),
            p: inst.p,
            seed: inst.seed,
            edges: inst.problem.graph.edge_count(),
            optimum: optimum[inst.id],
            optimum_source: match (exact[inst.id], optimum[inst.id]) {
                (true, _) => OptimumSource::Exact,
                (false, Some(_)) => OptimumSource::BestKnown,
                (false, None) => OptimumSource::Unknown,
            },
        })
        .collect();
    let mut modes = Vec::with_capacity(runs.len());
    let mut timing = Vec::with_capacity(runs.len());
    for run in &runs {
        let report = mode_report(run, &instances, &optimum)?;
        timing.push(mode_timing(run, &report, &instances, cfg)?);
        modes.push(report);
    }
    let report = MetricsReport {
        schema_version: SCHEMA_VERSION,
        master_seed: cfg.master_seed,
        topology: cfg.topology.label(),
        reads: cfg.sampler.reads,
        sweeps: cfg.sampler.sweeps,
        beta_schedule: cfg.sampler.schedule,
        p_success: cfg.p_success,
        instances: infos,
        modes,
        timing,
    };
    let files = plans.into_values().map(|(p, _, _)| (plan_name(p.isolation).to_string(), p)).collect();
    Ok((report, files))
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_path(dir.join(name))?)
}

fn opt_cell(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// `report.json`, the plans, and the CSV plot data.
pub fn write_artifacts(report: &MetricsReport, plans: &Plans, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), report.to_json())?;
    for (name, plan) in plans {
        std::fs::write(dir.join(name), plan_to_string(plan))?;
    }
    write_csvs(report, dir)
}

/// Regenerate the CSV plot data from a report.
pub fn write_csvs(report: &MetricsReport, dir: &Path) -> Result<()> {
    let info = |id: usize| &report.instances[id];

    let mut w = csv_writer(dir, "capacity.csv")?;
    w.write_record(["mode", "instance", "kind", "n", "copies"])?;
    for m in &report.modes {
        for r in &m.instances {
            let i = info(r.id);
            w.write_record([m.mode.name(), &i.label, &i.kind.to_string(), &i.n.to_string(), &r.copies.to_string()])?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(dir, "chain_stats.csv")?;
    w.write_record(["mode", "entry", "instance", "mean", "sd", "max"])?;
    for m in &report.modes {
        if let Some(stats) = &m.chain_stats {
            for (entry, (s, &id)) in stats.per_entry.iter().zip(&m.entry_instances).enumerate() {
                w.write_record([
                    m.mode.name(),
                    &entry.to_string(),
                    &info(id).label,
                    &s.mean.to_string(),
                    &s.sd.to_string(),
                    &s.max.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;

    let mut w = csv_writer(dir, "gsp.csv")?;
    w.write_record(["mode", "kind", "n", "instances", "gsp"])?;
    for m in &report.modes {
        for g in &m.groups {
            w.write_record([m.mode.name(), &g.kind.to_string(), &g.n.to_string(), &g.instances.to_string(), &g.gsp.to_string()])?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(dir, "tts.csv")?;
    w.write_record(["mode", "kind", "n", "p_avg", "t_run_seconds", "tts_seconds"])?;
    for t in &report.timing {
        for g in &t.groups {
            w.write_record([
                t.mode.name(),
                &g.kind.to_string(),
                &g.n.to_string(),
                &g.p_avg.to_string(),
                &opt_cell(g.t_run_seconds),
                &opt_cell(g.tts_seconds),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(dir, "energies.csv")?;
    w.write_record(["mode", "instance", "kind", "n", "optimum", "min", "q1", "median", "q3", "max", "p_opt"])?;
    for m in &report.modes {
        for r in &m.instances {
            let i = info(r.id);
            let q = r.energies;
            w.write_record([
                m.mode.name(),
                &i.label,
                &i.kind.to_string(),
                &i.n.to_string(),
                &opt_cell(i.optimum),
                &opt_cell(q.map(|q| q.min)),
                &opt_cell(q.map(|q| q.q1)),
                &opt_cell(q.map(|q| q.median)),
                &opt_cell(q.map(|q| q.q3)),
                &opt_cell(q.map(|q| q.max)),
                &r.p_opt.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(dir, "gpp_cuts.csv")?;
    w.write_record(["mode", "instance", "n", "best_cut", "median_cut"])?;
    for m in &report.modes {
        for r in &m.instances {
            if let Some(c) = r.cut_edges {
                let i = info(r.id);
                w.write_record([m.mode.name(), &i.label, &i.n.to_string(), &c.best.to_string(), &c.median.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One packing run of a capacity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityRun {
    pub n: usize,
    pub graph_seed: u64,
    pub isolation: bool,
    pub graph: ProblemGraph,
    pub plan: ParallelPlan,
}

impl CapacityRun {
    pub fn copies(&self) -> usize {
        self.plan.len()
    }
}

/// Pack as many copies as fit of one random graph per `(n, seed)`, with and
/// without isolation. Runs in the `MTQA_THREADS` pool; results come back in
/// `(n, seed, isolation)` order.
pub fn capacity_sweep(sizes: &[usize], seeds: &[u64], p: f64, h: &HardwareGraph, cfg: &EmbedConfig) -> Result<Vec<CapacityRun>> {
    let jobs: Vec<(usize, u64, bool)> = sizes
        .iter()
        .flat_map(|&n| seeds.iter().flat_map(move |&s| [(n, s, false), (n, s, true)]))
        .collect();
    thread_pool()?.install(|| {
        jobs.par_iter()
            .map(|&(n, s, isolation)| {
                let label = format!("n{n}-s{s}");
                let graph = gen_erdos_renyi(n, p, s).map_err(|e| e.at_stage("generate", label.clone(), s))?;
                let embed_seed = seed::derive(s, u64::from(isolation));
                let plan = parallel_embedding_search(std::slice::from_ref(&graph), h, isolation, embed_seed, cfg)
                    .map_err(|e| e.at_stage("embed", label, embed_seed))?;
                Ok(CapacityRun {
                    n,
                    graph_seed: s,
                    isolation,
                    graph,
                    plan,
                })
            })
            .collect()
    })
}

/// `n,seed,isolation,copies,mean_chain,max_chain`.
pub fn write_capacity_csv<W: std::io::Write>(runs: &[CapacityRun], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n", "seed", "isolation", "copies", "mean_chain", "max_chain"])?;
    for r in runs {
        let stats = chain_stats(&r.plan).ok();
        out.write_record([
            r.n.to_string(),
            r.graph_seed.to_string(),
            r.isolation.to_string(),
            r.copies().to_string(),
            opt_cell(stats.as_ref().map(|s| s.aggregate.mean)),
            stats.map_or(String::new(), |s| s.aggregate.max.to_string()),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::SaParams;

    fn desk(modes: Vec<Mode>, problems: Vec<ProblemSpec>) -> ExperimentConfig {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            master_seed: 17,
            problems,
            topology: TopologySpec::Chimera { rows: 4, cols: 4, shore: 4 },
            modes,
            sampler: SaParams {
                reads: 60,
                sweeps: 100,
                schedule: BetaSchedule::Auto,
            },
            embedding: EmbedConfig {
                timeout_ms: 0,
                ..EmbedConfig::default()
            },
            parameters: Default::default(),
            qubo: Default::default(),
            p_success: 0.99,
            output_dir: None,
        }
    }

    fn spec(kind: ProblemKind, n: usize, seeds: Vec<u64>) -> ProblemSpec {
        ProblemSpec { kind, n, p: 0.9, seeds }
    }

    #[test]
    fn easy_instances_reach_the_optimum() {
        let mut cfg = desk(vec![Mode::QaSingle, Mode::SaLogical], vec![spec(ProblemKind::Mvcp, 4, vec![1, 2])]);
        // Chains strong enough that they never break.
        cfg.parameters.rules.insert(ProblemKind::Mvcp, crate::parameterize::ChainRule::Scaled { prefactor: 3.0 });
        let r = run_experiment(&cfg).unwrap();
        for m in &r.modes {
            assert!(m.groups[0].gsp > 0.8, "{} {}", m.mode, m.groups[0].gsp);
            assert!(m.instances.iter().all(|i| i.reads == 60 && i.hits > 0));
        }
        assert_eq!(r.modes[0].chain_break_fraction, None);
        assert!(r.modes[0].instances.iter().all(|i| i.chain_break_fraction == Some(0.0)));
        assert!(r.instances.iter().all(|i| i.optimum_source == OptimumSource::Exact));
    }

    #[test]
    fn packed_modes_share_a_plan() {
        let cfg = desk(
            vec![Mode::MtqaNonisolated, Mode::Pqa, Mode::MtqaIsolated],
            vec![spec(ProblemKind::Mvcp, 5, vec![3]), spec(ProblemKind::Gpp, 4, vec![4])],
        );
        let r = run_experiment(&cfg).unwrap();
        let (non, pqa, iso) = (&r.modes[0], &r.modes[1], &r.modes[2]);
        assert_eq!(non.plan_file, pqa.plan_file);
        assert_eq!(non.entry_instances, pqa.entry_instances);
        assert_ne!(non.plan_file, iso.plan_file);
        assert_eq!(pqa.parameterization, Some(ParamMode::Pqa));
        assert!(non.packed.unwrap() >= iso.packed.unwrap());
        let copies: usize = non.instances.iter().map(|i| i.copies).sum();
        assert_eq!(copies, non.packed.unwrap());
        for m in &r.modes {
            for i in &m.instances {
                assert_eq!(i.reads, i.copies * 60);
            }
        }
        assert!(r.modes[0].instances[1].cut_edges.is_some());
        assert!(r.modes[0].instances[0].cut_edges.is_none());
    }

    #[test]
    fn sparse_gpp_embeds_its_dense_qubo() {
        let mut cfg = desk(
            vec![Mode::MtqaNonisolated, Mode::QaSingle],
            vec![ProblemSpec {
                kind: ProblemKind::Gpp,
                n: 6,
                p: 0.3,
                seeds: vec![2],
            }],
        );
        cfg.sampler.reads = 20;
        let r = run_experiment(&cfg).unwrap();
        assert!(r.instances[0].edges < 15);
        assert!(r.modes.iter().all(|m| m.instances[0].copies > 0));
    }

    #[test]
    fn reruns_match_except_timing() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = desk(
            vec![Mode::MtqaIsolated, Mode::QaSingle, Mode::SaLogical],
            vec![spec(ProblemKind::Gpp, 4, vec![0]), spec(ProblemKind::Mvcp, 5, vec![1])],
        );
        cfg.output_dir = Some(dir.path().join("a"));
        let a = run_experiment(&cfg).unwrap();
        cfg.output_dir = Some(dir.path().join("b"));
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.deterministic_json(), b.deterministic_json());
        for f in ["capacity.csv", "chain_stats.csv", "gsp.csv", "energies.csv", "gpp_cuts.csv", "plan-mtqa-isolated.txt"] {
            let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
            assert_eq!(x, std::fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
        }
        let text = std::fs::read_to_string(dir.path().join("a/report.json")).unwrap();
        assert_eq!(MetricsReport::from_json(&text).unwrap(), a);
    }

    #[test]
    fn oversized_instance_is_not_embedded() {
        let mut cfg = desk(vec![Mode::QaSingle], vec![spec(ProblemKind::Mvcp, 20, vec![1])]);
        cfg.topology = TopologySpec::Chimera { rows: 1, cols: 1, shore: 4 };
        let r = run_experiment(&cfg).unwrap();
        let i = &r.modes[0].instances[0];
        assert_eq!((i.copies, i.reads, i.p_opt), (0, 0, 0.0));
        assert_eq!(r.timing[0].groups[0].tts_seconds, None);
    }

    #[test]
    fn stage_is_reported_on_failure() {
        let mut cfg = desk(vec![Mode::SaLogical], vec![spec(ProblemKind::Mvcp, 4, vec![1])]);
        cfg.topology = TopologySpec::File {
            path: "/nonexistent/hardware.txt".into(),
        };
        match run_experiment(&cfg) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, "topology"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn thread_env_is_validated() {
        // Only checks parsing; the variable is not touched by other tests.
        let parse = |v: &str| v.trim().parse::<usize>().ok().filter(|&n| n > 0);
        assert_eq!(parse("2"), Some(2));
        assert_eq!(parse("0"), None);
    }

    #[test]
    fn capacity_sweep_orders_and_validates() {
        let h = crate::topology::gen_chimera(4, 4, 4).unwrap();
        let cfg = EmbedConfig {
            timeout_ms: 0,
            ..EmbedConfig::default()
        };
        let runs = capacity_sweep(&[3, 5], &[0, 1], 0.9, &h, &cfg).unwrap();
        assert_eq!(runs.len(), 8);
        assert_eq!((runs[0].n, runs[0].graph_seed, runs[0].isolation), (3, 0, false));
        assert_eq!((runs[7].n, runs[7].graph_seed, runs[7].isolation), (5, 1, true));
        for r in &runs {
            validate_plan(&r.plan, std::slice::from_ref(&r.graph), &h).unwrap();
            assert!(r.copies() > 0);
        }
        let mut buf = Vec::new();
        write_capacity_csv(&runs, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 9);
    }
}
