//! Command-line harness: instance generation, heat-map pipeline execution,
//! solving, and benchmarking against built-in baselines.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use tspmap::heatmap::{
    load_heatmap, prune_unpromising, write_heatmap, HeatMapProvider, SurrogateProvider,
    UniformProvider,
    DEFAULT_KAPPA,
};
use tspmap::instance::{
    brute_force_optimum, generate_instance, greedy_nearest_neighbor, seeded_rng, tour_length,
    Instance,
};
use tspmap::io::{read_instance, read_tour, write_instance, write_tour};
use tspmap::mcts::{default_time_ms, solve, Budget, Params};
use tspmap::sampling::{
    default_m, merge_raw, run_pipeline, AccumulatedMap, CoverageCounters, SampleRecord,
    SubGraphSample, PRUNE_EPSILON,
};
use tspmap::HeatMap;

/// CSV header shared by solve and bench output.
const CSV_HEADER: &str = "id,n,provider,length,reference,gap_pct,hm_ms,mcts_ms,restarts,actions";

#[derive(Parser)]
#[command(name = "tspmap", about = "Heat-map guided TSP solver", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write uniformly random unit-square instances to files.
    Generate(GenerateArgs),
    /// Build a heat map for one instance and search for a short tour.
    Solve(SolveArgs),
    /// Solve a batch of instances in parallel and emit a CSV report.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of vertices per instance.
    #[arg(long)]
    n: usize,
    /// Number of instances; seeds are derived as seed + index.
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; defaults to $TSPMAP_OUT or the current directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SolverOpts {
    /// Heat-map source: "surrogate", "uniform", or "file:<path>".
    #[arg(long, default_value = "surrogate")]
    provider: String,
    /// Sub-graph size; defaults to 20 for n <= 100, else 50.
    #[arg(long)]
    m: Option<usize>,
    /// Minimum sub-graph coverage per vertex before merging.
    #[arg(long, default_value_t = 5)]
    omega: u32,
    /// Neighborhood size of the surrogate and uniform providers.
    #[arg(long, default_value_t = DEFAULT_KAPPA)]
    kappa: usize,
    /// Pruning threshold on merged probabilities.
    #[arg(long, default_value_t = PRUNE_EPSILON)]
    epsilon: f64,
    /// Exploration strength.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Weight-boost strength on improving actions.
    #[arg(long, default_value_t = 10.0)]
    beta: f64,
    /// Sampling-pool bound per restart, as a multiple of n.
    #[arg(long, default_value_t = 10.0)]
    h_factor: f64,
    /// Wall-clock budget in milliseconds per vertex (ignored with --rounds).
    #[arg(long, default_value_t = 10)]
    t_factor: u64,
    /// Hard cap on sub-decisions per sampled action.
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Deterministic budget: run exactly this many restarts instead of a
    /// wall-clock budget.
    #[arg(long)]
    rounds: Option<u64>,
    /// Tour file whose length serves as the gap reference.
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file (plain or TSPLIB EUC_2D).
    instance: PathBuf,
    #[command(flatten)]
    opts: SolverOpts,
    /// Write every extracted sub-map to this directory.
    #[arg(long)]
    dump_submaps: Option<PathBuf>,
    /// Merge a previously dumped sub-map directory instead of running the
    /// extraction pipeline.
    #[arg(long)]
    merge_from: Option<PathBuf>,
    /// Output directory for the tour file; defaults to $TSPMAP_OUT or ".".
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Instance files; omit to generate --count instances of size --n.
    instances: Vec<PathBuf>,
    #[command(flatten)]
    opts: SolverOpts,
    /// Size of generated instances when no files are given.
    #[arg(long)]
    n: Option<usize>,
    /// Number of generated instances when no files are given.
    #[arg(long, default_value_t = 0)]
    count: usize,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Directory for the CSV report; defaults to $TSPMAP_OUT or ".".
    #[arg(long)]
    out: Option<PathBuf>,
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("TSPMAP_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(args) => cmd_generate(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    if args.count == 0 {
        bail!("--count must be at least 1");
    }
    let dir = out_dir(args.out);
    fs::create_dir_all(&dir)?;
    for i in 0..args.count {
        let seed = args.seed + i as u64;
        let inst = generate_instance(args.n, &mut seeded_rng(seed))?;
        let path = dir.join(format!("instance_{seed}.txt"));
        write_instance(&inst, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}

enum Provider {
    Surrogate(SurrogateProvider),
    Uniform(UniformProvider),
    File(PathBuf),
}

impl Provider {
    fn parse(spec: &str, kappa: usize) -> Result<Self> {
        if spec == "surrogate" {
            Ok(Self::Surrogate(SurrogateProvider { kappa }))
        } else if spec == "uniform" {
            Ok(Self::Uniform(UniformProvider { kappa }))
        } else if let Some(path) = spec.strip_prefix("file:") {
            Ok(Self::File(PathBuf::from(path)))
        } else {
            bail!("unknown provider {spec:?}; expected surrogate, uniform, or file:<path>")
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Surrogate(_) => "surrogate",
            Self::Uniform(_) => "uniform",
            Self::File(_) => "file",
        }
    }

    fn as_dyn(&self) -> Option<&dyn HeatMapProvider> {
        match self {
            Self::Surrogate(p) => Some(p),
            Self::Uniform(p) => Some(p),
            Self::File(_) => None,
        }
    }
}

struct SolveReport {
    length: f64,
    order: Vec<u32>,
    reference: f64,
    hm_ms: u64,
    mcts_ms: u64,
    restarts: u64,
    actions: u64,
}

impl SolveReport {
    fn gap_pct(&self) -> f64 {
        let gap = (self.length - self.reference) / self.reference * 100.0;
        // Rounding noise from differing summation orders would otherwise
        // print as -0.0000.
        if gap.abs() < 5e-5 {
            0.0
        } else {
            gap
        }
    }

    fn csv_row(&self, id: &str, n: usize, provider: &str) -> String {
        format!(
            "{id},{n},{provider},{:.6},{:.6},{:.4},{},{},{},{}",
            self.length,
            self.reference,
            self.gap_pct(),
            self.hm_ms,
            self.mcts_ms,
            self.restarts,
            self.actions
        )
    }
}

/// Builds the heat map and runs the search for one instance. All randomness
/// comes from `seed`.
fn run_solver(
    inst: &Instance,
    provider: &Provider,
    opts: &SolverOpts,
    seed: u64,
    dump_submaps: Option<&Path>,
    merge_from: Option<&Path>,
) -> Result<SolveReport> {
    let n = inst.n();
    let hm_start = Instant::now();
    let hm = match (provider, merge_from) {
        (_, Some(dir)) => merge_dumped(inst, dir, opts.epsilon)?,
        (Provider::File(path), None) => {
            let raw = load_heatmap(path, n)
                .with_context(|| format!("loading heat map {}", path.display()))?;
            prune_unpromising(inst, &raw, opts.epsilon)
        }
        (p, None) => {
            let dyn_provider = p.as_dyn().expect("non-file provider");
            let m = opts.m.unwrap_or_else(|| default_m(n));
            let out = run_pipeline(
                inst,
                dyn_provider,
                m,
                opts.omega,
                &mut seeded_rng(seed ^ 0x9e3779b97f4a7c15),
                dump_submaps.is_some(),
            )?;
            if let (Some(dir), Some(records)) = (dump_submaps, &out.records) {
                dump_records(dir, records)?;
            }
            if opts.epsilon == PRUNE_EPSILON {
                out.heatmap
            } else {
                prune_unpromising(inst, &out.raw, opts.epsilon)
            }
        }
    };
    let hm_ms = hm_start.elapsed().as_millis() as u64;

    let params = Params {
        alpha: opts.alpha,
        beta: opts.beta,
        h_factor: opts.h_factor,
        k_max: opts.k_max,
        ..Params::default()
    };
    let budget = match opts.rounds {
        Some(r) => Budget::Restarts(r),
        None => {
            let ms = opts.t_factor.saturating_mul(n as u64);
            if ms == 0 {
                bail!("time budget must be positive; raise --t-factor or use --rounds");
            }
            Budget::TimeMs(ms.max(default_time_ms(0)))
        }
    };
    let mcts_start = Instant::now();
    let outcome = solve(inst, &hm, &params, budget, &mut seeded_rng(seed));
    let mcts_ms = mcts_start.elapsed().as_millis() as u64;

    let reference = match &opts.reference {
        Some(path) => {
            let (tour, _) = read_tour(path)?;
            tour_length(inst, tour.order())?
        }
        None if n <= 12 => brute_force_optimum(inst)?.1,
        None => {
            let greedy = greedy_nearest_neighbor(inst, 0)?;
            tour_length(inst, greedy.order())?
        }
    };

    Ok(SolveReport {
        length: outcome.length,
        order: outcome.tour.order().to_vec(),
        reference,
        hm_ms,
        mcts_ms,
        restarts: outcome.stats.restarts,
        actions: outcome.stats.examined,
    })
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let inst = read_instance(&args.instance)
        .with_context(|| format!("reading {}", args.instance.display()))?;
    let provider = Provider::parse(&args.opts.provider, args.opts.kappa)?;
    let report = run_solver(
        &inst,
        &provider,
        &args.opts,
        args.opts.seed,
        args.dump_submaps.as_deref(),
        args.merge_from.as_deref(),
    )?;

    let id = args
        .instance
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into());
    let dir = out_dir(args.out);
    fs::create_dir_all(&dir)?;
    let tour_path = dir.join(format!("{id}.tour"));
    let tour = tspmap::Tour::new(report.order.clone(), inst.n())?;
    write_tour(&tour, report.length, &tour_path)?;

    println!("{CSV_HEADER}");
    println!("{}", report.csv_row(&id, inst.n(), provider.name()));
    eprintln!("tour written to {}", tour_path.display());
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let mut inputs: Vec<(String, Instance)> = Vec::new();
    if args.instances.is_empty() {
        let n = args
            .n
            .context("either instance files or --n with --count is required")?;
        if args.count == 0 {
            bail!("--count must be at least 1 when generating instances");
        }
        for i in 0..args.count {
            let seed = args.opts.seed + i as u64;
            inputs.push((
                format!("gen_{seed}"),
                generate_instance(n, &mut seeded_rng(seed))?,
            ));
        }
    } else {
        for path in &args.instances {
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            let inst =
                read_instance(path).with_context(|| format!("reading {}", path.display()))?;
            inputs.push((id, inst));
        }
    }
    let provider = Provider::parse(&args.opts.provider, args.opts.kappa)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()?;
    let wall_start = Instant::now();
    let results: Vec<(String, usize, std::result::Result<SolveReport, String>)> =
        pool.install(|| {
            inputs
                .par_iter()
                .enumerate()
                .map(|(i, (id, inst))| {
                    let seed = args.opts.seed + i as u64;
                    let report = run_solver(inst, &provider, &args.opts, seed, None, None)
                        .map_err(|e| format!("{e:#}"));
                    (id.clone(), inst.n(), report)
                })
                .collect()
        });
    let wall_ms = wall_start.elapsed().as_millis();

    let dir = out_dir(args.out);
    fs::create_dir_all(&dir)?;
    let csv_path = dir.join("bench.csv");
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    let mut failed = 0usize;
    let mut lengths = Vec::new();
    let mut gaps = Vec::new();
    for (id, n, result) in &results {
        match result {
            Ok(report) => {
                csv.push_str(&report.csv_row(id, *n, provider.name()));
                csv.push('\n');
                lengths.push(report.length);
                gaps.push(report.gap_pct());
            }
            Err(msg) => {
                failed += 1;
                csv.push_str(&format!("{id},{n},{},failed,,,,,,\n", provider.name()));
                eprintln!("{id}: {msg}");
            }
        }
    }
    fs::write(&csv_path, &csv)?;
    print!("{csv}");

    let solved = lengths.len();
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len().max(1) as f64;
    println!(
        "summary: {solved}/{} solved, mean_length {:.6}, mean_gap {:.4}%, wall {} ms",
        results.len(),
        mean(&lengths),
        mean(&gaps),
        wall_ms
    );
    eprintln!("report written to {}", csv_path.display());
    if failed > 0 {
        bail!("{failed} instance(s) failed");
    }
    Ok(())
}

/// Writes three files per extracted sample: the converted sub-instance and
/// the sub heat map in the standard file formats (so an external provider
/// can recompute the maps out of process), plus a `.members` sidecar with
/// the original vertex indices and the conversion.
fn dump_records(dir: &Path, records: &[SampleRecord]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, rec) in records.iter().enumerate() {
        let stem = format!("sample_{i:06}");
        let sub_inst = Instance::from_coords(rec.converted.clone())?;
        write_instance(&sub_inst, &dir.join(format!("{stem}.instance")))?;
        write_heatmap(&rec.submap, &dir.join(format!("{stem}.heatmap")))?;

        let mut meta = String::new();
        meta.push_str(&format!("center {}\n", rec.sample.center));
        meta.push_str("members");
        for &v in &rec.sample.members {
            meta.push_str(&format!(" {v}"));
        }
        meta.push('\n');
        let c = rec.sample.conversion;
        meta.push_str(&format!(
            "conversion {:.16e} {:.16e} {:.16e}\n",
            c.s, c.x_min, c.y_min
        ));
        let mut f = fs::File::create(dir.join(format!("{stem}.members")))?;
        f.write_all(meta.as_bytes())?;
    }
    Ok(())
}

/// Rebuilds coverage counters and the accumulated sums from a dump directory
/// and merges them into a global heat map.
fn merge_dumped(inst: &Instance, dir: &Path, epsilon: f64) -> Result<HeatMap> {
    let mut stems: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "members"))
        .collect();
    stems.sort();
    if stems.is_empty() {
        bail!("no .members sample files in {}", dir.display());
    }
    let mut counters = CoverageCounters::new(inst.n());
    let mut acc = AccumulatedMap::new();
    for meta_path in &stems {
        let sample = parse_members(&fs::read_to_string(meta_path)?, inst.n())
            .with_context(|| format!("parsing {}", meta_path.display()))?;
        let submap = load_heatmap(&meta_path.with_extension("heatmap"), sample.members.len())
            .with_context(|| format!("loading sub map for {}", meta_path.display()))?;
        counters.record(&sample.members);
        acc.accumulate(&sample, &submap);
    }
    let raw = merge_raw(inst.n(), &acc, &counters);
    Ok(prune_unpromising(inst, &raw, epsilon))
}

fn parse_members(text: &str, n: usize) -> Result<SubGraphSample> {
    let mut lines = text.lines();
    let center: u32 = lines
        .next()
        .and_then(|l| l.strip_prefix("center "))
        .context("missing center line")?
        .trim()
        .parse()?;
    let members: Vec<u32> = lines
        .next()
        .and_then(|l| l.strip_prefix("members"))
        .context("missing members line")?
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()?;
    if members.iter().any(|&v| v as usize >= n) {
        bail!("member index out of range for n = {n}");
    }
    let conv: Vec<f64> = lines
        .next()
        .and_then(|l| l.strip_prefix("conversion "))
        .context("missing conversion line")?
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()?;
    if conv.len() != 3 {
        bail!("conversion line needs 3 numbers");
    }
    Ok(SubGraphSample {
        center,
        members,
        conversion: tspmap::sampling::Conversion {
            s: conv[0],
            x_min: conv[1],
            y_min: conv[2],
        },
    })
}
