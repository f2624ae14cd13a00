//! Command-line driver: sampling, moment estimation, separated-set
//! verification, chaining functionals, parameter sweeps, config validation,
//! and the acceptance suite. Every run derives its randomness from the
//! master seed, echoes its resolved configuration to the output directory,
//! and writes plot-ready CSV/JSON.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use suprema_core::acceptance::{run_suite, DEFAULT_MASTER_SEED};
use suprema_core::alloc::xt_moment_alloc;
use suprema_core::chaining::{
    build_distance_family, check_regularity, gamma_functional, two_sided_compare, DistanceSource,
};
use suprema_core::families::family_by_name;
use suprema_core::measure::{MeasureSpec, ProductMeasure};
use suprema_core::minoration::{generate_cube_set, minoration_ratio, CubeConstants};
use suprema_core::moments::{mc_form_moments, mc_tail_unstable};
use suprema_core::report::{write_csv_path, write_json_path, ResultRow};
use suprema_core::rng::RngStream;
use suprema_core::sampling::MeasureSampler;
use suprema_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "suprema",
    version,
    about = "Sampling, moments, minoration and chaining experiments for product measures"
)]
struct Cli {
    /// Master seed; every task derives its own stream from it.
    #[arg(long, global = true, default_value_t = DEFAULT_MASTER_SEED)]
    seed: u64,

    /// Worker threads (0 uses all available cores). Metric values do not
    /// depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Directory for CSV/JSON outputs.
    #[arg(long, global = true, default_value = "results")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

/// How a subcommand names its measure: a built-in family at some dimension,
/// or a JSON spec on disk.
#[derive(Args, Clone)]
struct MeasureArgs {
    /// Built-in block family (gaussian | exponential | p15 | mixed | p32).
    #[arg(long, conflicts_with = "measure")]
    family: Option<String>,

    /// Ambient dimension for --family.
    #[arg(long, requires = "family")]
    dim: Option<usize>,

    /// Path to a measure spec in JSON.
    #[arg(long)]
    measure: Option<PathBuf>,
}

impl MeasureArgs {
    fn load(&self) -> Result<ProductMeasure> {
        match (&self.family, &self.measure) {
            (Some(name), None) => {
                let dim = self
                    .dim
                    .ok_or_else(|| Error::Config("--family requires --dim".into()))?;
                family_by_name(name, dim)
            }
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)?;
                ProductMeasure::from_json(&text)
            }
            _ => Err(Error::Config(
                "choose exactly one measure source: --family with --dim, or --measure".into(),
            )),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw from a product measure and write the samples as CSV.
    Sample {
        #[command(flatten)]
        measure: MeasureArgs,
        /// Number of draws.
        #[arg(short = 'n', long, default_value_t = 1000)]
        count: u64,
        /// Draw from the coordinate-iid comparison law instead of the exact
        /// one.
        #[arg(long)]
        iid: bool,
    },
    /// Estimate moments of a linear form, with the deterministic surrogate
    /// alongside where its budget is feasible.
    Moments {
        #[command(flatten)]
        measure: MeasureArgs,
        /// Comma-separated coefficients of the form.
        #[arg(long, value_delimiter = ',', required = true)]
        form: Vec<f64>,
        /// Comma-separated moment orders.
        #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
        orders: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
    },
    /// Generate separated cube-like sets and measure the ratio of separation
    /// to empirical supremum.
    Verify {
        #[command(flatten)]
        measure: MeasureArgs,
        /// Moment level p of the separation (2 to 8).
        #[arg(long)]
        level: f64,
        /// Target minimum pairwise distance (defaults to the level).
        #[arg(long)]
        target_a: Option<f64>,
        #[arg(long, default_value_t = 20)]
        instances: usize,
        /// Monte Carlo samples per supremum estimate.
        #[arg(long, default_value_t = 4000)]
        samples: u64,
        /// Support-size fraction of the constant record (defaults to 0.25).
        #[arg(long)]
        delta_prime: Option<f64>,
    },
    /// Build the dyadic distance family over a point set and compute the
    /// chaining functional, its partition tree, and the supremum comparison.
    Chain {
        #[command(flatten)]
        measure: MeasureArgs,
        /// JSON file holding an array of points (arrays of coordinates).
        #[arg(long)]
        points: PathBuf,
        /// Deepest dyadic level (distances use orders 1 .. 2^levels).
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// Monte Carlo samples for the supremum estimate.
        #[arg(long, default_value_t = 20_000)]
        samples: u64,
    },
    /// Minoration/chaining sweep over levels, dimensions, and families.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        levels: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "gaussian,exponential,p15,mixed")]
        families: Vec<String>,
        /// Instances per (level, dimension, family) cell.
        #[arg(long, default_value_t = 20)]
        instances: usize,
        /// Monte Carlo samples per supremum estimate.
        #[arg(long, default_value_t = 4000)]
        samples: u64,
        /// Support-size fraction of the constant record.
        #[arg(long, default_value_t = 0.5)]
        delta_prime: f64,
    },
    /// Check an experiment config for schema and feasibility problems
    /// without running it.
    Validate {
        /// Path to an experiment config JSON.
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the full acceptance suite and write its report.
    Acceptance,
}

/// Resolved, fully serializable record of one run. Together with the code
/// version it determines every output byte except timestamps.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExperimentConfig {
    experiment: String,
    family: Option<String>,
    dim: Option<usize>,
    measure: Option<MeasureSpec>,
    levels: Vec<f64>,
    dims: Vec<usize>,
    families: Vec<String>,
    instances: usize,
    samples: u64,
    orders: Vec<f64>,
    form: Vec<f64>,
    count: u64,
    iid: bool,
    target_a: Option<f64>,
    delta_prime: Option<f64>,
    points_file: Option<PathBuf>,
    chain_levels: Option<usize>,
    constants: Option<CubeConstants>,
    seed: u64,
}

impl ExperimentConfig {
    fn new(experiment: &str, seed: u64) -> Self {
        ExperimentConfig {
            experiment: experiment.to_string(),
            seed,
            ..ExperimentConfig::default()
        }
    }

    fn with_measure(mut self, measure: &ProductMeasure) -> Self {
        self.measure = Some(measure.to_spec());
        self
    }

    fn write(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join(format!("{}-config.json", self.experiment));
        write_json_path(self, &path)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Error::Config(format!("failed to configure the thread pool: {e}")))?;
    std::fs::create_dir_all(&cli.out_dir)?;
    let seed = cli.seed;
    let out_dir = cli.out_dir;
    match cli.command {
        Command::Sample {
            measure,
            count,
            iid,
        } => cmd_sample(seed, &out_dir, &measure, count, iid),
        Command::Moments {
            measure,
            form,
            orders,
            samples,
        } => cmd_moments(seed, &out_dir, &measure, &form, &orders, samples),
        Command::Verify {
            measure,
            level,
            target_a,
            instances,
            samples,
            delta_prime,
        } => cmd_verify(
            seed, &out_dir, &measure, level, target_a, instances, samples, delta_prime,
        ),
        Command::Chain {
            measure,
            points,
            levels,
            samples,
        } => cmd_chain(seed, &out_dir, &measure, &points, levels, samples),
        Command::Sweep {
            levels,
            dims,
            families,
            instances,
            samples,
            delta_prime,
        } => cmd_sweep(
            seed, &out_dir, &levels, &dims, &families, instances, samples, delta_prime,
        ),
        Command::Validate { config } => cmd_validate(&config),
        Command::Acceptance => cmd_acceptance(seed, &out_dir),
    }
}

fn cmd_sample(
    seed: u64,
    out_dir: &Path,
    args: &MeasureArgs,
    count: u64,
    iid: bool,
) -> Result<()> {
    let measure = args.load()?;
    let sampler = MeasureSampler::new(&measure);
    let mut rng = RngStream::new(seed, 0).rng();
    let mut x = vec![0.0; sampler.dim()];
    let mut body = String::new();
    for _ in 0..count {
        if iid {
            sampler.sample_iid_into(&mut rng, &mut x);
        } else {
            sampler.sample_into(&mut rng, &mut x);
        }
        for (i, v) in x.iter().enumerate() {
            if i > 0 {
                body.push(',');
            }
            let _ = write!(body, "{v}");
        }
        body.push('\n');
    }
    let path = out_dir.join("samples.csv");
    std::fs::write(&path, body)?;

    let mut config = ExperimentConfig::new("sample", seed).with_measure(&measure);
    config.count = count;
    config.iid = iid;
    config.write(out_dir)?;
    println!(
        "wrote {count} draws of dimension {} to {}",
        sampler.dim(),
        path.display()
    );
    Ok(())
}

fn cmd_moments(
    seed: u64,
    out_dir: &Path,
    args: &MeasureArgs,
    form: &[f64],
    orders: &[f64],
    samples: u64,
) -> Result<()> {
    let measure = args.load()?;
    if orders.is_empty() {
        return Err(Error::Config("at least one moment order is required".into()));
    }
    let top = orders.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if mc_tail_unstable(top, samples) {
        println!(
            "warning: order {top} with {samples} samples is tail-dominated; \
             estimates may be unstable"
        );
    }
    let stream = RngStream::new(seed, 0);
    let estimates = mc_form_moments(&measure, form, orders, samples, stream)?;

    let mut rows = Vec::new();
    for (est, &order) in estimates.iter().zip(orders) {
        println!(
            "order {order:>6}: monte carlo {:.6} +- {:.6}",
            est.value, est.stderr
        );
        rows.push(ResultRow::new(
            "moments",
            format!("order-{order}"),
            "mc_moment",
            est.value,
            est.stderr,
            est.n_samples,
            est.seed,
        ));
        match xt_moment_alloc(&measure, form, order) {
            Ok(alloc) => {
                println!("              surrogate   {:.6}", alloc.value);
                rows.push(ResultRow::new(
                    "moments",
                    format!("order-{order}"),
                    "surrogate",
                    alloc.value,
                    0.0,
                    0,
                    stream.label(),
                ));
            }
            Err(Error::SupportBudget { support, .. }) => {
                println!(
                    "              surrogate   skipped (needs order >= {support} for this support)"
                );
            }
            Err(err) => return Err(err),
        }
    }
    write_csv_path(&rows, &out_dir.join("moments.csv"))?;

    let mut config = ExperimentConfig::new("moments", seed).with_measure(&measure);
    config.form = form.to_vec();
    config.orders = orders.to_vec();
    config.samples = samples;
    config.write(out_dir)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    seed: u64,
    out_dir: &Path,
    args: &MeasureArgs,
    level: f64,
    target_a: Option<f64>,
    instances: usize,
    samples: u64,
    delta_prime: Option<f64>,
) -> Result<()> {
    let measure = args.load()?;
    let target = target_a.unwrap_or(level);
    let mut constants = CubeConstants::default();
    if let Some(fraction) = delta_prime {
        constants.delta_prime = fraction;
    }
    let stream = RngStream::new(seed, 0);
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut max_k = 0.0f64;
    for i in 0..instances {
        let sub = stream.substream(i as u64);
        let cube = generate_cube_set(&measure, level, target, constants, sub.substream(0))?;
        let report = minoration_ratio(&cube, samples, sub.substream(1))?;
        println!(
            "instance {i:02}: {} points, separation {:.4}, esup {:.4} +- {:.4}, constant {:.3}",
            report.n_points, report.a_min, report.esup.value, report.esup.stderr, report.k_hat
        );
        let instance = format!("i{i:02}");
        let rel = report.esup.stderr / report.esup.value;
        rows.push(ResultRow::new(
            "verify",
            instance.clone(),
            "k_hat",
            report.k_hat,
            report.k_hat * rel,
            samples,
            sub.label(),
        ));
        rows.push(ResultRow::new(
            "verify",
            instance.clone(),
            "a_min",
            report.a_min,
            0.0,
            0,
            sub.label(),
        ));
        rows.push(ResultRow::new(
            "verify",
            instance,
            "esup",
            report.esup.value,
            report.esup.stderr,
            report.esup.n_samples,
            report.esup.seed,
        ));
        max_k = max_k.max(report.k_hat);
        reports.push(report);
    }
    rows.push(ResultRow::new(
        "verify",
        "summary",
        "max_k_hat",
        max_k,
        0.0,
        instances as u64,
        stream.label(),
    ));
    write_csv_path(&rows, &out_dir.join("verify.csv"))?;
    write_json_path(&reports, &out_dir.join("verify-report.json"))?;

    let mut config = ExperimentConfig::new("verify", seed).with_measure(&measure);
    config.levels = vec![level];
    config.target_a = Some(target);
    config.instances = instances;
    config.samples = samples;
    config.delta_prime = delta_prime;
    config.constants = Some(constants);
    config.write(out_dir)?;
    println!("max constant over {instances} instances: {max_k:.3}");
    Ok(())
}

fn cmd_chain(
    seed: u64,
    out_dir: &Path,
    args: &MeasureArgs,
    points_path: &Path,
    levels: usize,
    samples: u64,
) -> Result<()> {
    let measure = args.load()?;
    let text = std::fs::read_to_string(points_path)?;
    let points: Vec<Vec<f64>> = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("points file {}: {e}", points_path.display())))?;
    let family = build_distance_family(&measure, &points, levels, DistanceSource::Surrogate)?;
    let (gamma, tree) = gamma_functional(&family);
    let regularity = check_regularity(&family);
    let stream = RngStream::new(seed, 0);
    let comparison = two_sided_compare(&family, samples, stream)?;

    println!(
        "{} points, {} levels: gamma {:.6}, esup {:.6} +- {:.6}, ratio {:.4}",
        points.len(),
        family.levels(),
        gamma,
        comparison.esup.value,
        comparison.esup.stderr,
        comparison.ratio
    );
    println!(
        "per-level growth margin {:.4}, doubling bound {}",
        regularity.epsilon,
        if regularity.doubling_ok { "holds" } else { "VIOLATED" }
    );

    let label = stream.label();
    let rows = vec![
        ResultRow::new("chain", "points", "gamma", gamma, 0.0, 0, label),
        ResultRow::new(
            "chain",
            "points",
            "esup",
            comparison.esup.value,
            comparison.esup.stderr,
            comparison.esup.n_samples,
            comparison.esup.seed,
        ),
        ResultRow::new("chain", "points", "esup_gamma_ratio", comparison.ratio, 0.0, samples, label),
        ResultRow::new("chain", "points", "growth_margin", regularity.epsilon, 0.0, 0, label),
    ];
    write_csv_path(&rows, &out_dir.join("chain.csv"))?;
    write_json_path(&tree, &out_dir.join("partition-tree.json"))?;

    let mut config = ExperimentConfig::new("chain", seed).with_measure(&measure);
    config.points_file = Some(points_path.to_path_buf());
    config.chain_levels = Some(levels);
    config.samples = samples;
    config.write(out_dir)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    seed: u64,
    out_dir: &Path,
    levels: &[f64],
    dims: &[usize],
    families: &[String],
    instances: usize,
    samples: u64,
    delta_prime: f64,
) -> Result<()> {
    if levels.is_empty() || dims.is_empty() || families.is_empty() || instances == 0 {
        println!("warning: empty sweep grid; nothing to do");
        return Ok(());
    }
    let constants = CubeConstants {
        delta_prime,
        ..CubeConstants::default()
    };
    let stream = RngStream::new(seed, 0);
    let mut rows = Vec::new();
    let mut max_k = 0.0f64;
    for (pi, &p) in levels.iter().enumerate() {
        for (di, &d) in dims.iter().enumerate() {
            for (fi, family) in families.iter().enumerate() {
                let measure = family_by_name(family, d)?;
                let mut cell_mean = 0.0;
                for i in 0..instances {
                    let idx = ((pi * dims.len() + di) * families.len() + fi) * instances + i;
                    let sub = stream.substream(idx as u64);
                    let cube = generate_cube_set(&measure, p, p, constants, sub.substream(0))?;
                    let report = minoration_ratio(&cube, samples, sub.substream(1))?;
                    let instance = format!("p{p}-d{d}-{family}-i{i:02}");
                    let rel = report.esup.stderr / report.esup.value;
                    rows.push(ResultRow::new(
                        "sweep",
                        instance.clone(),
                        "k_hat",
                        report.k_hat,
                        report.k_hat * rel,
                        samples,
                        sub.label(),
                    ));
                    rows.push(ResultRow::new(
                        "sweep",
                        instance,
                        "esup",
                        report.esup.value,
                        report.esup.stderr,
                        report.esup.n_samples,
                        report.esup.seed,
                    ));
                    cell_mean += report.k_hat / instances as f64;
                    max_k = max_k.max(report.k_hat);
                }
                println!("level {p}, dim {d:>4}, {family:<12} mean constant {cell_mean:.3}");
            }
        }
    }
    rows.push(ResultRow::new(
        "sweep",
        "summary",
        "max_k_hat",
        max_k,
        0.0,
        rows.len() as u64 / 2,
        stream.label(),
    ));
    write_csv_path(&rows, &out_dir.join("sweep.csv"))?;

    let mut config = ExperimentConfig::new("sweep", seed);
    config.levels = levels.to_vec();
    config.dims = dims.to_vec();
    config.families = families.to_vec();
    config.instances = instances;
    config.samples = samples;
    config.delta_prime = Some(delta_prime);
    config.constants = Some(constants);
    config.write(out_dir)?;
    println!("max constant over the sweep: {max_k:.3}");
    Ok(())
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut out: u128 = 1;
    for j in 0..k.min(n - k) {
        out = out.saturating_mul((n - j) as u128) / (j + 1) as u128;
    }
    out
}

fn cmd_validate(config_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config_path)?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("config schema: {e}")))?;
    let mut warnings = Vec::new();

    match (&config.family, &config.measure) {
        (Some(name), None) => {
            let dim = config
                .dim
                .ok_or_else(|| Error::Config("field dim: required with family".into()))?;
            family_by_name(name, dim)?;
        }
        (None, Some(spec)) => {
            ProductMeasure::from_spec(spec)?;
        }
        (None, None) => {}
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "fields family/measure: choose at most one".into(),
            ));
        }
    }

    let constants = match config.constants {
        Some(c) => c,
        None => {
            let mut c = CubeConstants::default();
            if let Some(fraction) = config.delta_prime {
                c.delta_prime = fraction;
            }
            c
        }
    };
    let dims: Vec<usize> = if config.dims.is_empty() {
        config.dim.into_iter().collect()
    } else {
        config.dims.clone()
    };
    for &p in &config.levels {
        if !(p.is_finite() && p >= 2.0) {
            return Err(Error::Config(format!(
                "field levels: separation level {p} must be at least 2"
            )));
        }
        let n_points = p.exp().ceil() as usize;
        let cap = constants.support_cap(p);
        for &d in &dims {
            let reachable: u128 = (1..=cap).map(|j| binomial(d, j)).sum();
            if reachable < (n_points - 1) as u128 {
                return Err(Error::Capacity(format!(
                    "level {p} needs {} distinct supports of size <= {cap} \
                     but dimension {d} only offers {reachable}",
                    n_points - 1
                )));
            }
        }
        if 2.0 * cap as f64 > p {
            return Err(Error::Config(format!(
                "field levels: support cap {cap} is infeasible at level {p}"
            )));
        }
        if p > 8.0 {
            return Err(Error::Config(format!(
                "field levels: separation level {p} exceeds the supported maximum 8"
            )));
        }
    }

    let top_order = config.orders.iter().cloned().fold(0.0f64, f64::max);
    if top_order > 0.0 && config.samples > 0 && mc_tail_unstable(top_order, config.samples) {
        warnings.push(format!(
            "order {top_order} with {} samples is tail-dominated; \
             estimates may be unstable",
            config.samples
        ));
    }

    if warnings.is_empty() {
        println!("config ok: no issues found");
    } else {
        for w in &warnings {
            println!("warning: {w}");
        }
    }
    Ok(())
}

fn cmd_acceptance(seed: u64, out_dir: &Path) -> Result<()> {
    let output = run_suite(seed)?;
    for c in &output.criteria {
        println!(
            "criterion {:>2} [{}] {} -- {} ({:.1}s)",
            c.id,
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail,
            c.seconds,
        );
    }
    write_csv_path(&output.rows, &out_dir.join("acceptance-rows.csv"))?;
    write_json_path(&output.criteria, &out_dir.join("acceptance-report.json"))?;
    let config = ExperimentConfig::new("acceptance", seed);
    config.write(out_dir)?;
    if output.all_pass() {
        println!("all criteria passed");
        Ok(())
    } else {
        Err(Error::Invariant(
            "one or more acceptance criteria failed".into(),
        ))
    }
}
