//! `skybatch` command-line driver.

mod config;

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, CommandFactory, Parser, Subcommand};
use skybatch::gen::{generate_catalog, generate_trace, GenConfig};
use skybatch::sched::select_alpha;
use skybatch::sim::{self, SweepSpec, METRICS_COLUMNS, SCHEDULE_COLUMNS};
use skybatch::store::{partition_catalog, read_manifest, write_buckets, BucketDir};
use skybatch::workload::{read_trace, write_trace};
use skybatch::{CostConstants, Error, Policy, SimConfig, TradeoffCurve};

#[derive(Parser, Debug)]
#[command(name = "skybatch", version, about = "Batch cross-match scheduling over bucketed sky catalogs")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a uniform catalog and write it as a bucket directory.
    Build(BuildArgs),
    /// Generate a skewed query trace against a bucket directory.
    Gen(GenArgs),
    /// Simulate one policy over a trace and print a metrics row.
    Run(RunArgs),
    /// Sweep the bias over arrival rates and pick one per rate.
    Sweep(SweepArgs),
    /// Pick a bias from curve files written by `sweep`.
    SelectAlpha(SelectArgs),
}

#[derive(Args, Debug)]
struct BuildArgs {
    /// key=value file of flag defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output bucket directory.
    #[arg(long)]
    out: PathBuf,
    /// Number of catalog objects.
    #[arg(long, default_value_t = 256_000)]
    n: usize,
    /// Objects per bucket.
    #[arg(long, default_value_t = 1_000)]
    capacity: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bucket directory written by `build`.
    #[arg(long)]
    buckets: PathBuf,
    /// Output trace file.
    #[arg(long)]
    out: PathBuf,
    /// Skew report path [default: <out>.genreport].
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2_000)]
    queries: usize,
    #[arg(long, default_value_t = 20)]
    objects_min: usize,
    #[arg(long, default_value_t = 500)]
    objects_max: usize,
    /// Bounded Pareto shape of objects per query.
    #[arg(long, default_value_t = 1.0)]
    objects_shape: f64,
    #[arg(long, default_value_t = 256)]
    hotspots: usize,
    /// Fixed Zipf exponent; tuned against --target-top2-mass when absent.
    #[arg(long)]
    zipf_exponent: Option<f64>,
    /// Mean arrival rate, queries/s.
    #[arg(long, default_value_t = 2.0)]
    rate: f64,
    #[arg(long, default_value_t = 1.0)]
    radius_min_arcsec: f64,
    #[arg(long, default_value_t = 30.0)]
    radius_max_arcsec: f64,
    /// Probability of reusing the previous query's hotspot.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Query-center jitter around a hotspot, radians.
    #[arg(long, default_value_t = 0.05)]
    hotspot_spread: f64,
    /// Probe scatter around the query center, radians.
    #[arg(long, default_value_t = 0.012)]
    probe_spread: f64,
    /// Fraction of probes placed anywhere on the sky.
    #[arg(long, default_value_t = 0.01)]
    outlier_frac: f64,
    /// Share of work items wanted in the busiest 2% of buckets.
    #[arg(long, default_value_t = 0.5)]
    target_top2_mass: f64,
}

#[derive(Args, Debug, Clone)]
struct SimArgs {
    /// Bucket directory written by `build`.
    #[arg(long)]
    buckets: PathBuf,
    /// Trace file written by `gen`.
    #[arg(long)]
    trace: PathBuf,
    /// Buckets held in the LRU cache.
    #[arg(long, default_value_t = 20)]
    cache_buckets: usize,
    /// Batch share of bucket capacity at which a scan replaces index probes.
    #[arg(long, default_value_t = 0.03)]
    threshold: f64,
    /// Bucket read cost, ms.
    #[arg(long, default_value_t = 1200.0)]
    tb_ms: f64,
    /// Per-object match cost, ms.
    #[arg(long, default_value_t = 0.13)]
    tm_ms: f64,
    /// Normalize throughput and age before blending them.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    normalize_eq2: bool,
    /// Fail once queued plus in-flight items exceed this.
    #[arg(long, default_value_t = 50_000_000)]
    item_ceiling: usize,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, default_value = "liferaft", value_parser = ["liferaft", "rr", "noshare"])]
    policy: String,
    /// Bias between throughput (0) and age (1).
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Re-draw arrivals at this rate, queries/s, using --seed.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Metrics CSV path [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the per-decision schedule to <out>.schedule.csv (or stdout).
    #[arg(long)]
    explain: bool,
    /// Cross-match each batch against the bucket files.
    #[arg(long)]
    joins: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    sim: SimArgs,
    /// Comma-separated bias grid.
    #[arg(long, default_value = "0,0.25,0.5,0.75,1", value_delimiter = ',')]
    alphas: Vec<f64>,
    /// Comma-separated arrival rates, queries/s.
    #[arg(long, value_delimiter = ',', required = true)]
    rates: Vec<f64>,
    /// Comma-separated arrival seeds averaged per cell.
    #[arg(long, default_value = "1,2,3,4,5", value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Throughput fraction that may be given up for lower response time.
    #[arg(long, default_value_t = 0.2)]
    tolerance: f64,
    /// Output directory for curves and cells.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Curve CSV files.
    #[arg(long, required = true, num_args = 1..)]
    curve: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    tolerance: f64,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match config::inject(argv, &Cli::command()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.chain().any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_config));
            ExitCode::from(if config { 2 } else { 3 })
        }
    }
}

fn dispatch(cmd: Cmd) -> anyhow::Result<()> {
    match cmd {
        Cmd::Build(a) => build(a),
        Cmd::Gen(a) => gen(a),
        Cmd::Run(a) => run(a),
        Cmd::Sweep(a) => sweep(a),
        Cmd::SelectAlpha(a) => select(a),
    }
}

fn create(path: &Path) -> anyhow::Result<io::BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(io::BufWriter::new(f))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn build(a: BuildArgs) -> anyhow::Result<()> {
    let cfg = GenConfig { seed: a.seed, n_catalog: a.n, capacity: a.capacity, ..GenConfig::default() };
    if a.capacity == 0 {
        return Err(Error::Config("capacity must be at least 1".into()).into());
    }
    let catalog = generate_catalog(&cfg)?;
    let buckets = partition_catalog(catalog, a.capacity)?;
    let header = vec![
        "command=build".to_string(),
        format!("n={}", a.n),
        format!("capacity={}", a.capacity),
        format!("seed={}", a.seed),
    ];
    let layout = write_buckets(&buckets, a.capacity, &a.out, &header)?;
    println!("buckets={}", layout.len());
    println!("layout_hash={:08x}", layout.layout_hash());
    Ok(())
}

fn gen(a: GenArgs) -> anyhow::Result<()> {
    let layout = read_manifest(&a.buckets)?;
    let cfg = GenConfig {
        seed: a.seed,
        n_catalog: layout.counts.iter().sum(),
        capacity: layout.capacity,
        n_queries: a.queries,
        objects_min: a.objects_min,
        objects_max: a.objects_max,
        objects_shape: a.objects_shape,
        hotspots: a.hotspots,
        zipf_exponent: a.zipf_exponent,
        rate_qps: a.rate,
        radius_min_arcsec: a.radius_min_arcsec,
        radius_max_arcsec: a.radius_max_arcsec,
        rho: a.rho,
        hotspot_spread_rad: a.hotspot_spread,
        probe_spread_rad: a.probe_spread,
        outlier_frac: a.outlier_frac,
        target_top2_mass: a.target_top2_mass,
    };
    let (queries, report) = generate_trace(&cfg, &layout)?;
    let mut header = vec![
        "command=gen".to_string(),
        format!("seed={}", a.seed),
        format!("queries={}", a.queries),
        format!("objects-min={}", a.objects_min),
        format!("objects-max={}", a.objects_max),
        format!("objects-shape={}", a.objects_shape),
        format!("hotspots={}", a.hotspots),
        format!("zipf-exponent={}", a.zipf_exponent.map(|s| s.to_string()).unwrap_or_else(|| "tuned".into())),
        format!("rate={}", a.rate),
        format!("radius-min-arcsec={}", a.radius_min_arcsec),
        format!("radius-max-arcsec={}", a.radius_max_arcsec),
        format!("rho={}", a.rho),
        format!("hotspot-spread={}", a.hotspot_spread),
        format!("probe-spread={}", a.probe_spread),
        format!("outlier-frac={}", a.outlier_frac),
        format!("target-top2-mass={}", a.target_top2_mass),
    ];
    let mut w = create(&a.out)?;
    let mut trace_header = header.clone();
    trace_header.push(format!("layout_hash={:08x}", layout.layout_hash()));
    write_trace(&mut w, &queries, &trace_header)?;
    w.flush()?;

    let report_path = a.report.unwrap_or_else(|| with_suffix(&a.out, ".genreport"));
    header.push(format!("layout_hash={:08x}", layout.layout_hash()));
    let mut r = create(&report_path)?;
    report.write(&mut r, &header)?;
    r.flush()?;

    println!("queries={}", report.n_queries);
    println!("zipf_exponent={:.6}", report.zipf_exponent);
    println!("top2pct_mass={:.4}", report.skew.top2pct_mass);
    println!("top10_query_coverage={:.4}", report.skew.top10_query_coverage);
    println!("realized_rate_qps={:.6}", report.realized_rate_qps);
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    Ok(())
}

struct Loaded {
    layout: skybatch::BucketLayout,
    queries: Vec<skybatch::Query>,
}

/// Reads the manifest and the trace, refusing a trace generated against a
/// different layout.
fn load(s: &SimArgs) -> anyhow::Result<Loaded> {
    let layout = read_manifest(&s.buckets)?;
    let f = fs::File::open(&s.trace)
        .map_err(|e| Error::Config(format!("cannot open trace {}: {e}", s.trace.display())))?;
    let trace = read_trace(BufReader::new(f))?;
    if let Some(h) = trace.header_value("layout_hash") {
        let want = format!("{:08x}", layout.layout_hash());
        if !h.eq_ignore_ascii_case(&want) {
            return Err(Error::Config(format!(
                "trace {} was generated for layout {h}, but {} has layout {want}",
                s.trace.display(),
                s.buckets.display()
            ))
            .into());
        }
    }
    Ok(Loaded { layout, queries: trace.queries })
}

fn sim_config(s: &SimArgs, policy: Policy, explain: bool) -> anyhow::Result<SimConfig> {
    if !(s.threshold > 0.0 && s.threshold.is_finite()) {
        return Err(Error::Config(format!("threshold {} must be positive", s.threshold)).into());
    }
    Ok(SimConfig {
        policy,
        costs: CostConstants::new(s.tb_ms, s.tm_ms)?,
        cache_buckets: s.cache_buckets,
        threshold: s.threshold,
        item_ceiling: s.item_ceiling,
        explain,
    })
}

fn sim_header(s: &SimArgs) -> Vec<String> {
    vec![
        format!("buckets={}", s.buckets.display()),
        format!("trace={}", s.trace.display()),
        format!("cache-buckets={}", s.cache_buckets),
        format!("threshold={}", s.threshold),
        format!("tb-ms={}", s.tb_ms),
        format!("tm-ms={}", s.tm_ms),
        format!("normalize-eq2={}", s.normalize_eq2),
        format!("item-ceiling={}", s.item_ceiling),
    ]
}

fn write_header(w: &mut dyn Write, header: &[String]) -> io::Result<()> {
    for h in header {
        writeln!(w, "# {h}")?;
    }
    Ok(())
}

fn run(a: RunArgs) -> anyhow::Result<()> {
    let policy = Policy::parse(&a.policy, a.alpha, a.sim.normalize_eq2)?;
    let cfg = sim_config(&a.sim, policy, a.explain)?;
    let loaded = load(&a.sim)?;
    let trace = match a.rate {
        Some(r) => sim::retime(&loaded.queries, r, a.seed)?,
        None => loaded.queries,
    };
    let mut report = if a.joins {
        let dir = BucketDir::open(&a.sim.buckets)?;
        sim::run_with_joins(&trace, &dir, &cfg)?
    } else {
        sim::run(&trace, &loaded.layout, &cfg)?
    };
    report.metrics.rate_qps = a.rate;
    report.metrics.seed = a.rate.map(|_| a.seed);

    let mut header = vec!["command=run".to_string()];
    header.extend(sim_header(&a.sim));
    header.push(format!("policy={}", a.policy));
    header.push(format!("alpha={}", a.alpha));
    if let Some(r) = a.rate {
        header.push(format!("rate={r}"));
    }
    header.push(format!("seed={}", a.seed));
    header.push(format!("joins={}", a.joins));

    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    write_header(&mut out, &header)?;
    writeln!(out, "{METRICS_COLUMNS}")?;
    writeln!(out, "{}", report.metrics.csv_row())?;
    out.flush()?;

    if a.explain {
        let mut log: Box<dyn Write> = match &a.out {
            Some(p) => Box::new(create(&with_suffix(p, ".schedule.csv"))?),
            None => Box::new(io::stdout().lock()),
        };
        write_header(&mut log, &header)?;
        writeln!(log, "{SCHEDULE_COLUMNS}")?;
        for e in &report.log {
            writeln!(log, "{}", e.csv_row())?;
        }
        log.flush()?;
    }
    if a.joins {
        let matches: u64 = report.outcomes.iter().map(|o| o.matches).sum();
        eprintln!("matches={matches}");
    }
    Ok(())
}

fn curve_file_name(rate: f64) -> String {
    format!("curve_rate_{rate}.csv")
}

fn sweep(a: SweepArgs) -> anyhow::Result<()> {
    if !(0.0..1.0).contains(&a.tolerance) {
        return Err(Error::Config(format!("tolerance {} outside [0, 1)", a.tolerance)).into());
    }
    let base = sim_config(&a.sim, Policy::data_driven(0.0, a.sim.normalize_eq2)?, false)?;
    let loaded = load(&a.sim)?;
    let spec = SweepSpec { alphas: a.alphas.clone(), rates: a.rates.clone(), seeds: a.seeds.clone() };
    let result = sim::sweep(&loaded.queries, &loaded.layout, &base, &spec)?;

    let list = |v: &[String]| v.join(",");
    let mut header = vec!["command=sweep".to_string()];
    header.extend(sim_header(&a.sim));
    header.push(format!("alphas={}", list(&a.alphas.iter().map(f64::to_string).collect::<Vec<_>>())));
    header.push(format!("rates={}", list(&a.rates.iter().map(f64::to_string).collect::<Vec<_>>())));
    header.push(format!("seeds={}", list(&a.seeds.iter().map(u64::to_string).collect::<Vec<_>>())));
    header.push(format!("tolerance={}", a.tolerance));

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut cells = create(&a.out.join("cells.csv"))?;
    write_header(&mut cells, &header)?;
    writeln!(cells, "{METRICS_COLUMNS}")?;
    for m in &result.cells {
        writeln!(cells, "{}", m.csv_row())?;
    }
    cells.flush()?;

    let mut sel = create(&a.out.join("selection.csv"))?;
    write_header(&mut sel, &header)?;
    writeln!(sel, "rate_qps,alpha,throughput_qps,mean_response_ms,max_throughput_qps,sacrificed")?;
    for curve in &result.curves {
        let mut w = create(&a.out.join(curve_file_name(curve.rate_qps)))?;
        curve.write_csv(&mut w, &header)?;
        w.flush()?;
        let p = select_alpha(curve, a.tolerance)?;
        let max = curve.max_throughput();
        let sacrificed = if max > 0.0 { 1.0 - p.throughput_qps / max } else { 0.0 };
        writeln!(
            sel,
            "{},{},{:.6},{:.3},{:.6},{:.6}",
            curve.rate_qps, p.alpha, p.throughput_qps, p.mean_response_ms, max, sacrificed
        )?;
        println!(
            "rate={} alpha={} throughput_qps={:.6} mean_response_ms={:.3} sacrificed={:.2}%",
            curve.rate_qps,
            p.alpha,
            p.throughput_qps,
            p.mean_response_ms,
            100.0 * sacrificed
        );
    }
    sel.flush()?;
    Ok(())
}

fn select(a: SelectArgs) -> anyhow::Result<()> {
    println!("file,rate_qps,alpha,throughput_qps,mean_response_ms,sacrificed");
    for path in &a.curve {
        let f = fs::File::open(path).map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
        let curve = TradeoffCurve::read_csv(BufReader::new(f))?;
        let p = select_alpha(&curve, a.tolerance)?;
        let max = curve.max_throughput();
        let sacrificed = if max > 0.0 { 1.0 - p.throughput_qps / max } else { 0.0 };
        println!(
            "{},{},{},{:.6},{:.3},{:.6}",
            path.display(),
            curve.rate_qps,
            p.alpha,
            p.throughput_qps,
            p.mean_response_ms,
            sacrificed
        );
    }
    Ok(())
}
