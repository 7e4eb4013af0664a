//! Run configuration for `infer` and `walk`: key=value lines naming the
//! model tables, the data stream, and the loop parameters. The tables file
//! is JSON-lines with one {labels, probs} prior record and one {h_labels,
//! d_labels, rows} likelihood record, in either order.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use basin_bayes::bib::DEFAULT_WINDOW;
use basin_bayes::{
    Distribution, ExplorationPolicy, GenerativeModel, IbConfig, LikelihoodTable, Scenario,
    StreamSpec, ThetaSource,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    /// Posterior updates only.
    Bayes,
    /// The full loop with likelihood re-estimation and exploration.
    Bib,
}

#[derive(Debug, Clone)]
enum StreamKey {
    Hypothesis(String),
    Constant(String),
    Uniform,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub steps: Option<u64>,
    tables: PathBuf,
    stream: StreamKey,
    gamma: Option<f64>,
    theta_source: Option<ThetaSource>,
    policy: ExplorationPolicy,
    window: usize,
}

fn parse_theta_source(value: &str) -> Result<ThetaSource> {
    let (kind, number) = value.split_once(':').unwrap_or(("fixed", value));
    let theta: f64 = number
        .trim()
        .parse()
        .with_context(|| format!("bad theta value {number:?}"))?;
    if !(0.0..1.0).contains(&theta) {
        bail!("theta must lie in [0, 1), got {theta}");
    }
    match kind.trim() {
        "fixed" => Ok(ThetaSource::Fixed(theta)),
        "from_partition" => Ok(ThetaSource::FromPartition(theta)),
        other => bail!("unknown theta source {other:?} (expected fixed or from_partition)"),
    }
}

fn parse_policy(value: &str) -> Result<ExplorationPolicy> {
    match value {
        "replace_weakest" => Ok(ExplorationPolicy::ReplaceWeakest),
        "add_hypothesis" => Ok(ExplorationPolicy::AddHypothesis),
        other => bail!("unknown policy {other:?} (expected replace_weakest or add_hypothesis)"),
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let dir = path.parent().unwrap_or(Path::new(""));
    let mut seed = None;
    let mut steps = None;
    let mut tables = None;
    let mut stream = None;
    let mut gamma = None;
    let mut theta_source = None;
    let mut policy = ExplorationPolicy::ReplaceWeakest;
    let mut window = DEFAULT_WINDOW;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = || format!("{}:{}", path.display(), i + 1);
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("{}: expected key = value", at()))?;
        let value = value.trim();
        match key.trim() {
            "seed" => seed = Some(value.parse().with_context(|| format!("{}: bad seed", at()))?),
            "steps" => steps = Some(value.parse().with_context(|| format!("{}: bad steps", at()))?),
            "tables" => {
                let p = PathBuf::from(value);
                tables = Some(if p.is_relative() { dir.join(p) } else { p });
            }
            "true_hypothesis" => stream = Some(StreamKey::Hypothesis(value.to_string())),
            "stream" => {
                stream = Some(match value.split_once(':') {
                    Some(("constant", d)) => StreamKey::Constant(d.trim().to_string()),
                    None if value == "uniform" => StreamKey::Uniform,
                    _ => bail!("{}: unknown stream {value:?} (expected uniform or constant:<d>)", at()),
                });
            }
            "gamma" => {
                let g: f64 = value.parse().with_context(|| format!("{}: bad gamma", at()))?;
                if !(0.0..=1.0).contains(&g) {
                    bail!("{}: gamma must lie in [0, 1], got {g}", at());
                }
                gamma = Some(g);
            }
            "theta_source" => theta_source = Some(parse_theta_source(value).with_context(at)?),
            "policy" => policy = parse_policy(value).with_context(at)?,
            "window" => {
                window = value.parse().with_context(|| format!("{}: bad window", at()))?;
                if window == 0 {
                    bail!("{}: window must be at least 1", at());
                }
            }
            other => bail!("{}: unknown key {other:?}", at()),
        }
    }
    Ok(RunConfig {
        seed,
        steps,
        tables: tables.context("config is missing tables")?,
        stream: stream.context("config is missing true_hypothesis or stream")?,
        gamma,
        theta_source,
        policy,
        window,
    })
}

pub fn load_tables(path: &Path) -> Result<(Distribution, LikelihoodTable)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut prior = None;
    let mut likelihood = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Ok(table) = serde_json::from_str::<LikelihoodTable>(line) {
            if likelihood.replace(table).is_some() {
                bail!("{}:{}: second likelihood record", path.display(), i + 1);
            }
        } else {
            let dist: Distribution = serde_json::from_str(line).with_context(|| {
                format!("{}:{}: neither a valid likelihood nor a valid prior", path.display(), i + 1)
            })?;
            if prior.replace(dist).is_some() {
                bail!("{}:{}: second prior record", path.display(), i + 1);
            }
        }
    }
    Ok((
        prior.context("tables file has no {labels, probs} prior record")?,
        likelihood.context("tables file has no {h_labels, d_labels, rows} likelihood record")?,
    ))
}

impl RunConfig {
    pub fn scenario(&self, mode: Mode) -> Result<Scenario> {
        let (prior, likelihood) = load_tables(&self.tables)?;
        let stream = match &self.stream {
            StreamKey::Hypothesis(h) => {
                if likelihood.h_index(h).is_none() {
                    bail!("true_hypothesis {h:?} is not a hypothesis label");
                }
                StreamSpec::FromHypothesis(h.clone())
            }
            StreamKey::Constant(d) => {
                if likelihood.d_index(d).is_none() {
                    bail!("constant datum {d:?} is not a data label");
                }
                StreamSpec::Constant(d.clone())
            }
            StreamKey::Uniform => {
                StreamSpec::Iid(Distribution::uniform(likelihood.d_labels().to_vec())?)
            }
        };
        let config = match mode {
            Mode::Bayes => {
                IbConfig::new(0.0, ExplorationPolicy::ReplaceWeakest, ThetaSource::Fixed(0.0))
            }
            Mode::Bib => IbConfig::new(
                self.gamma.context("config is missing gamma (required for bib runs)")?,
                self.policy,
                self.theta_source
                    .context("config is missing theta_source (required for bib runs)")?,
            ),
        };
        Ok(Scenario {
            model: GenerativeModel::new("cli", prior, likelihood)?,
            config,
            stream,
            window: self.window,
        })
    }
}
