//! Command line front end: renders basin grids, estimates boundary
//! dimension, builds coarse partitions with their switch kernels, runs the
//! inference loop and its perception and walker applications, and
//! recomputes statistics from stored logs.

mod meta;
mod runcfg;

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use basin_bayes::bib::{run_bayes_only, run_bib};
use basin_bayes::fractal::{box_counting_dimension, default_box_sizes, extract_boundary};
use basin_bayes::newton::{label_grid, DEFAULT_CONVERGENCE_RADIUS, DEFAULT_MAX_ITERS};
use basin_bayes::partition::{build_partition, switch_kernel, DEFAULT_DILATION_RADIUS};
use basin_bayes::perception::{dwell_statistics, run_perception};
use basin_bayes::pixmap::{colorize, labels_from_pixmap, read_p6, write_p6, Pixmap};
use basin_bayes::walker::{diffusion_statistics, run_walker};
use basin_bayes::{ComplexGrid, Event, PolynomialMap, SwitchKernel, TrajectoryLog, WalkLog};

use meta::GridMeta;
use runcfg::Mode;

#[derive(Parser)]
#[command(
    name = "basin-bayes",
    version,
    about = "Newton-basin geometry and Bayesian / inverse-Bayesian inference runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a Newton basin grid to a pixmap with a metadata sidecar
    Basins(BasinsArgs),
    /// Estimate the box-counting dimension of a rendered grid's boundary
    Dimension(DimensionArgs),
    /// Build inner/outer masks for one basin plus the full switch kernel
    Partition(PartitionArgs),
    /// Run the inference loop from a config file and log its trajectory
    Infer(InferArgs),
    /// Simulate percept switching driven by a switch kernel
    Perceive(PerceiveArgs),
    /// Run the inference-driven walker with diffusion diagnostics
    Walk(WalkArgs),
    /// Recompute dwell or diffusion statistics from a stored log
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct BasinsArgs {
    /// Polynomial coefficients in ascending powers, e.g. -1,0,0,1
    #[arg(long, allow_hyphen_values = true, default_value = "-1,0,0,1")]
    poly: String,
    /// Complex window as xmin,xmax,ymin,ymax
    #[arg(long, allow_hyphen_values = true, default_value = "-2,2,-2,2")]
    window: String,
    /// Grid resolution
    #[arg(long, num_args = 2, value_names = ["NX", "NY"], default_values = ["512", "512"])]
    res: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    /// Output prefix; writes <out>.ppm and <out>.meta
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DimensionArgs {
    /// Prefix of a basins output pair (<in>.ppm and <in>.meta)
    #[arg(long = "in")]
    input: PathBuf,
    /// Box sizes in cells, e.g. 2,4,8,16; defaults to powers of two
    #[arg(long)]
    sizes: Option<String>,
    /// Output CSV of box_size,count; the fit summary goes to stdout
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PartitionArgs {
    /// Prefix of a basins output pair (<in>.ppm and <in>.meta)
    #[arg(long = "in")]
    input: PathBuf,
    /// Basin index whose masks are written
    #[arg(long)]
    basin: usize,
    /// Chebyshev dilation radius in cells
    #[arg(long, default_value_t = DEFAULT_DILATION_RADIUS)]
    radius: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte-Carlo samples per kernel row
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Output prefix; writes <out>.{inner,outer,shell}.ppm and <out>.jsonl
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    /// key = value config: seed, steps, tables, true_hypothesis or stream,
    /// and for bib runs gamma, theta_source, policy, window
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's steps
    #[arg(long)]
    steps: Option<u64>,
    /// Overrides the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Trajectory CSV (t,percept,event)
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON-lines summary (event counts, posterior, relation)
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true))]
struct PerceiveArgs {
    /// JSON file holding a row-stochastic kernel {"probs": [[..], ..]}
    #[arg(long, group = "source")]
    kernel: Option<PathBuf>,
    /// JSON-lines file from `partition`; the kernel field is used
    #[arg(long, group = "source")]
    from_partition: Option<PathBuf>,
    #[arg(long)]
    steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Uniform mixing weight applied to each kernel row
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Trajectory CSV (t,percept,event)
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON-lines dwell statistics
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct WalkArgs {
    /// Same schema as `infer` bib configs
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's steps
    #[arg(long)]
    steps: Option<u64>,
    /// Overrides the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Walk CSV (t,x,y,event)
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON-lines diffusion statistics
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// A trajectory or walk CSV; the header decides which statistics run
    #[arg(long)]
    log: PathBuf,
    /// JSON-lines output; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn parse_list<T: std::str::FromStr>(value: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|e| anyhow::anyhow!("bad {what} {:?}: {e}", p.trim()))
        })
        .collect()
}

fn load_grid(prefix: &Path) -> Result<(GridMeta, ComplexGrid)> {
    let meta = meta::read_meta(&prefix.with_extension("meta"))?;
    let ppm = prefix.with_extension("ppm");
    let pix = read_p6(&mut open(&ppm)?).with_context(|| format!("reading {}", ppm.display()))?;
    if (pix.width, pix.height) != (meta.nx, meta.ny) {
        bail!(
            "pixmap is {}x{} but the sidecar says {}x{}",
            pix.width,
            pix.height,
            meta.nx,
            meta.ny
        );
    }
    let labels = labels_from_pixmap(&pix, meta.num_basins)?;
    let iters = vec![0; labels.len()];
    Ok((meta.clone(), ComplexGrid { spec: meta.spec(), num_basins: meta.num_basins, labels, iters }))
}

/// White cells mark membership; rows are flipped so +imaginary points up,
/// matching the basin rendering.
fn mask_pixmap(cells: &[bool], nx: usize, ny: usize) -> Pixmap {
    let mut pixels = vec![[0u8; 3]; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            if cells[j * nx + i] {
                pixels[(ny - 1 - j) * nx + i] = [255, 255, 255];
            }
        }
    }
    Pixmap { width: nx, height: ny, pixels }
}

fn event_counts(count: impl Fn(Event) -> usize) -> serde_json::Value {
    json!({
        "b": count(Event::B),
        "ib": count(Event::Ib),
        "explore": count(Event::Explore),
        "switch": count(Event::Switch),
    })
}

fn cmd_basins(args: BasinsArgs) -> Result<()> {
    let poly = args
        .poly
        .split(',')
        .map(meta::parse_complex)
        .collect::<Result<Vec<_>>>()?;
    let window: Vec<f64> = parse_list(&args.window, "window bound")?;
    if window.len() != 4 {
        bail!("--window needs xmin,xmax,ymin,ymax");
    }
    let [xmin, xmax, ymin, ymax] = [window[0], window[1], window[2], window[3]];
    if xmax <= xmin || ymax <= ymin {
        bail!("--window must have positive area");
    }
    let (nx, ny) = (args.res[0], args.res[1]);
    if nx < 2 || ny < 2 {
        bail!("--res must be at least 2x2");
    }
    let map = PolynomialMap::new(poly.clone())?;
    let grid_meta = GridMeta {
        poly,
        window: [xmin, xmax, ymin, ymax],
        nx,
        ny,
        num_basins: map.degree(),
        max_iters: args.max_iters,
    };
    log::info!("labeling {nx}x{ny} cells for a degree-{} map", map.degree());
    let grid = label_grid(&map, &grid_meta.spec(), args.max_iters, DEFAULT_CONVERGENCE_RADIUS);
    let mut out = create(&args.out.with_extension("ppm"))?;
    write_p6(&mut out, &colorize(&grid))?;
    out.flush()?;
    meta::write_meta(&args.out.with_extension("meta"), &grid_meta)
}

fn cmd_dimension(args: DimensionArgs) -> Result<()> {
    let (_, grid) = load_grid(&args.input)?;
    let mask = extract_boundary(&grid)?;
    let sizes = match &args.sizes {
        Some(list) => parse_list(list, "box size")?,
        None => default_box_sizes(grid.spec.nx.min(grid.spec.ny)),
    };
    let estimate = box_counting_dimension(&mask, &sizes)?;
    let mut out = create(&args.out)?;
    writeln!(out, "box_size,count")?;
    for (size, count) in estimate.box_sizes.iter().zip(&estimate.counts) {
        writeln!(out, "{size},{count}")?;
    }
    out.flush()?;
    println!("{}", serde_json::to_string(&estimate)?);
    Ok(())
}

fn cmd_partition(args: PartitionArgs) -> Result<()> {
    let (grid_meta, grid) = load_grid(&args.input)?;
    if args.basin >= grid.num_basins {
        bail!("--basin {} out of range (grid has {} basins)", args.basin, grid.num_basins);
    }
    let map = PolynomialMap::new(grid_meta.poly.clone())?;
    let mask = extract_boundary(&grid)?;
    let partitions = (0..grid.num_basins)
        .map(|k| build_partition(&grid, &mask, k, args.radius))
        .collect::<Result<Vec<_>, _>>()?;
    let chosen = &partitions[args.basin];
    let (nx, ny) = (grid.spec.nx, grid.spec.ny);
    for (tag, cells) in [
        ("inner", &chosen.inner),
        ("outer", &chosen.outer),
        ("shell", &chosen.shell),
    ] {
        let path = args.out.with_extension(format!("{tag}.ppm"));
        let mut out = create(&path)?;
        write_p6(&mut out, &mask_pixmap(cells, nx, ny))?;
        out.flush()?;
    }
    log::info!("sampling the switch kernel at {} samples per row", args.samples);
    let kernel = switch_kernel(&map, &grid, &partitions, args.samples, args.seed)?;
    let mut out = create(&args.out.with_extension("jsonl"))?;
    let record = json!({
        "theta": chosen.theta,
        "kernel": kernel,
        "samples": args.samples,
        "seed": args.seed,
    });
    writeln!(out, "{record}")?;
    out.flush()?;
    Ok(())
}

fn resolve_run(config: &runcfg::RunConfig, steps: Option<u64>, seed: Option<u64>) -> Result<(u64, u64)> {
    let steps = steps
        .or(config.steps)
        .context("steps given neither on the command line nor in the config")?;
    if steps == 0 {
        bail!("steps must be at least 1");
    }
    let seed = seed
        .or(config.seed)
        .context("seed given neither on the command line nor in the config")?;
    Ok((steps, seed))
}

fn cmd_infer(args: InferArgs) -> Result<()> {
    let config = runcfg::load_config(&args.config)?;
    let (steps, seed) = resolve_run(&config, args.steps, args.seed)?;
    let scenario = config.scenario(args.mode)?;
    let (log, state) = match args.mode {
        Mode::Bayes => (run_bayes_only(&scenario, steps, seed)?, None),
        Mode::Bib => {
            let (log, state) = run_bib(&scenario, steps, seed);
            (log, Some(state))
        }
    };
    let mut out = create(&args.out)?;
    log.write_csv(&mut out)?;
    out.flush()?;
    if let Some(path) = &args.stats {
        let mut out = create(path)?;
        writeln!(out, "{}", event_counts(|e| log.count(e)))?;
        if let Some(state) = state {
            writeln!(out, "{}", json!({ "posterior": state.posterior }))?;
            writeln!(out, "{}", json!({ "relation": state.relation }))?;
        }
        out.flush()?;
    }
    Ok(())
}

fn load_kernel(args: &PerceiveArgs) -> Result<SwitchKernel> {
    let kernel: SwitchKernel = if let Some(path) = &args.kernel {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing kernel {}", path.display()))?
    } else {
        let path = args.from_partition.as_ref().expect("clap enforces the group");
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let line = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .with_context(|| format!("{} is empty", path.display()))?;
        let record: serde_json::Value = serde_json::from_str(line)?;
        serde_json::from_value(
            record
                .get("kernel")
                .with_context(|| format!("{} has no kernel field", path.display()))?
                .clone(),
        )?
    };
    kernel.validate()?;
    Ok(kernel)
}

fn cmd_perceive(args: PerceiveArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.noise) {
        bail!("--noise must lie in [0, 1]");
    }
    if args.steps == 0 {
        bail!("--steps must be at least 1");
    }
    let kernel = load_kernel(&args)?;
    let log = run_perception(&kernel, args.noise, args.steps, args.seed);
    let mut out = create(&args.out)?;
    log.write_csv(&mut out)?;
    out.flush()?;
    if let Some(path) = &args.stats {
        let dwell = dwell_statistics(&log)?;
        let mut out = create(path)?;
        writeln!(out, "{}", serde_json::to_string(&dwell)?)?;
        out.flush()?;
    }
    Ok(())
}

fn cmd_walk(args: WalkArgs) -> Result<()> {
    let config = runcfg::load_config(&args.config)?;
    let (steps, seed) = resolve_run(&config, args.steps, args.seed)?;
    let scenario = config.scenario(Mode::Bib)?;
    let (walk, stats) = run_walker(&scenario, steps, seed)?;
    let mut out = create(&args.out)?;
    walk.write_csv(&mut out)?;
    out.flush()?;
    if let Some(path) = &args.stats {
        let mut out = create(path)?;
        writeln!(out, "{}", serde_json::to_string(&stats)?)?;
        out.flush()?;
    }
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let mut reader = open(&args.log)?;
    let mut header = String::new();
    reader.read_line(&mut header)?;
    drop(reader);
    let record = match header.trim_end() {
        "t,percept,event" => {
            let log = TrajectoryLog::read_csv(&mut open(&args.log)?)?;
            serde_json::to_string(&dwell_statistics(&log)?)?
        }
        "t,x,y,event" => {
            let walk = WalkLog::read_csv(&mut open(&args.log)?)?;
            serde_json::to_string(&diffusion_statistics(&walk)?)?
        }
        other => bail!("unrecognized log header {other:?}"),
    };
    match &args.out {
        Some(path) => {
            let mut out = create(path)?;
            writeln!(out, "{record}")?;
            out.flush()?;
        }
        None => println!("{record}"),
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::init();
    match Cli::parse().command {
        Command::Basins(args) => cmd_basins(args),
        Command::Dimension(args) => cmd_dimension(args),
        Command::Partition(args) => cmd_partition(args),
        Command::Infer(args) => cmd_infer(args),
        Command::Perceive(args) => cmd_perceive(args),
        Command::Walk(args) => cmd_walk(args),
        Command::Analyze(args) => cmd_analyze(args),
    }
}
