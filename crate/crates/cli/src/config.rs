//! Settings resolution: command-line flags override the TOML config file,
//! which overrides built-in defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;

use mmsbm::baselines::{MfConfig, DEFAULT_NEIGHBORS};
use mmsbm::io::ratings::RatingFormat;
use mmsbm::{FitConfig, RatingScale};

pub const WORKERS_ENV: &str = "MMSBM_WORKERS";

/// Group counts given as `K,L` (or a single `K` for both).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Groups(pub usize, pub usize);

impl FromStr for Groups {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("bad group count {x:?}: {e}"));
        match s.split_once(',') {
            Some((k, l)) => Ok(Groups(parse(k)?, parse(l)?)),
            None => {
                let k = parse(s)?;
                Ok(Groups(k, k))
            }
        }
    }
}

#[derive(Debug, Clone, Args, Default)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Ratings file.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Ratings format: ml100k, ml10m, csv, tsv or `delim=X,cols=U:I:R,header=BOOL`.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Rating scale, e.g. `1..5`, `0.5..5:0.5` or `a=1,b=2`.
    #[arg(long, global = true)]
    pub scale: Option<String>,
    /// Numbers of user and item groups, `K,L`.
    #[arg(long, global = true)]
    pub groups: Option<Groups>,
    /// Number of independent EM runs in the ensemble.
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    /// Base random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cross-validation folds.
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    /// Comma-separated methods: mmsbm, naive, item-item, mf.
    #[arg(long, global = true, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Worker threads.
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// EM iteration cap.
    #[arg(long, global = true)]
    pub max_iterations: Option<usize>,
    /// Relative log-likelihood change that ends a fit.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: Option<PathBuf>,
    pub format: Option<String>,
    pub scale: Option<String>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub mf: MfSection,
    #[serde(default)]
    pub synthesize: SynthesizeSection,
    #[serde(default)]
    pub benchmark: BenchmarkSection,
    #[serde(default)]
    pub analyze: AnalyzeSection,
    #[serde(default)]
    pub predict: PredictSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub user_groups: Option<usize>,
    pub item_groups: Option<usize>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub max_iterations: Option<usize>,
    pub prob_floor: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub folds: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub neighbors: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MfSection {
    pub factors: Option<usize>,
    pub learning_rate: Option<f64>,
    pub lambda: Option<f64>,
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeSection {
    pub users: Option<usize>,
    pub items: Option<usize>,
    pub ratings_per_user: Option<usize>,
    pub peak: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSection {
    pub fractions: Option<Vec<f64>>,
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    pub metadata: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub age_bin_start: Option<i64>,
    pub age_bin_width: Option<i64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictSection {
    pub model: Option<PathBuf>,
    pub queries: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Fully resolved settings shared by all commands.
#[derive(Debug, Clone)]
pub struct Settings {
    pub dataset: Option<PathBuf>,
    pub format: RatingFormat,
    pub format_name: String,
    pub scale: RatingScale,
    pub fit: FitConfig,
    pub runs: usize,
    pub folds: usize,
    pub methods: Vec<String>,
    pub neighbors: usize,
    pub mf: MfConfig,
    pub workers: usize,
    pub out: PathBuf,
    pub synth_users: usize,
    pub synth_items: usize,
    pub synth_ratings_per_user: usize,
    pub synth_peak: f64,
    pub fractions: Vec<f64>,
    pub bench_iterations: usize,
    pub metadata: Option<PathBuf>,
    pub analyze_model: Option<PathBuf>,
    pub age_bin_start: i64,
    pub age_bin_width: i64,
    pub predict_model: Option<PathBuf>,
    pub queries: Option<PathBuf>,
}

pub const KNOWN_METHODS: [&str; 4] = ["mmsbm", "naive", "item-item", "mf"];

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl Settings {
    /// Layers flags over the file over defaults and validates the result.
    pub fn resolve(args: &CommonArgs, file: &FileConfig) -> Result<Self> {
        let defaults = FitConfig::default();
        let groups = args.groups.map(|g| (g.0, g.1));
        let fit = FitConfig {
            user_groups: groups.map(|g| g.0).or(file.model.user_groups).unwrap_or(defaults.user_groups),
            item_groups: groups.map(|g| g.1).or(file.model.item_groups).unwrap_or(defaults.item_groups),
            max_iterations: args.max_iterations.or(file.model.max_iterations).unwrap_or(defaults.max_iterations),
            tol: args.tol.or(file.model.tol).unwrap_or(defaults.tol),
            seed: args.seed.or(file.model.seed).unwrap_or(defaults.seed),
            prob_floor: file.model.prob_floor.unwrap_or(defaults.prob_floor),
        };
        let format_name = args.format.clone().or_else(|| file.format.clone()).unwrap_or_else(|| "ml100k".into());
        let format: RatingFormat = format_name.parse().context("--format")?;
        let scale_spec = args.scale.clone().or_else(|| file.scale.clone()).unwrap_or_else(|| "1..5".into());
        let scale = RatingScale::parse(&scale_spec).context("--scale")?;
        fit.validate(scale.len()).context("model configuration")?;

        let mf_defaults = MfConfig::default();
        let mf = MfConfig {
            k_factors: file.mf.factors.unwrap_or(mf_defaults.k_factors),
            learning_rate: file.mf.learning_rate.unwrap_or(mf_defaults.learning_rate),
            lambda: file.mf.lambda.unwrap_or(mf_defaults.lambda),
            epochs: file.mf.epochs.unwrap_or(mf_defaults.epochs),
            seed: fit.seed,
            init_scale: mf_defaults.init_scale,
        };

        let methods: Vec<String> = args
            .methods
            .clone()
            .or_else(|| file.evaluate.methods.clone())
            .unwrap_or_else(|| KNOWN_METHODS.iter().map(|m| m.to_string()).collect());
        for m in &methods {
            if !KNOWN_METHODS.contains(&m.as_str()) {
                bail!("unknown method {m:?} (expected one of {})", KNOWN_METHODS.join(", "));
            }
        }
        if methods.is_empty() {
            bail!("no methods selected");
        }

        let settings = Settings {
            dataset: args.dataset.clone().or_else(|| file.dataset.clone()),
            format,
            format_name,
            scale,
            fit,
            runs: args.runs.or(file.model.runs).unwrap_or(500),
            folds: args.folds.or(file.evaluate.folds).unwrap_or(5),
            methods,
            neighbors: file.evaluate.neighbors.unwrap_or(DEFAULT_NEIGHBORS),
            mf,
            workers: args.workers.or(file.workers).unwrap_or_else(default_workers),
            out: args.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from("mmsbm-out")),
            synth_users: file.synthesize.users.unwrap_or(1000),
            synth_items: file.synthesize.items.unwrap_or(1000),
            synth_ratings_per_user: file.synthesize.ratings_per_user.unwrap_or(50),
            synth_peak: file.synthesize.peak.unwrap_or(0.9),
            fractions: file.benchmark.fractions.clone().unwrap_or_else(|| vec![0.25, 0.5, 1.0]),
            bench_iterations: file.benchmark.iterations.unwrap_or(5),
            metadata: file.analyze.metadata.clone(),
            analyze_model: file.analyze.model.clone(),
            age_bin_start: file.analyze.age_bin_start.unwrap_or(10),
            age_bin_width: file.analyze.age_bin_width.unwrap_or(10),
            predict_model: file.predict.model.clone(),
            queries: file.predict.queries.clone(),
        };
        settings.check_numbers()?;
        Ok(settings)
    }

    fn check_numbers(&self) -> Result<()> {
        if self.runs == 0 {
            bail!("--runs must be at least 1");
        }
        if self.folds < 2 {
            bail!("--folds must be at least 2");
        }
        if self.workers == 0 {
            bail!("--workers must be at least 1");
        }
        if self.neighbors == 0 {
            bail!("evaluate.neighbors must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.synth_peak) {
            bail!("synthesize.peak must lie in [0, 1]");
        }
        if self.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            bail!("benchmark.fractions must lie in (0, 1]");
        }
        if self.age_bin_width <= 0 {
            bail!("analyze.age_bin_width must be positive");
        }
        Ok(())
    }

    /// The dataset path, which must exist.
    pub fn require_dataset(&self) -> Result<&Path> {
        let path = self.dataset.as_deref().context("no dataset given (use --dataset or `dataset` in the config)")?;
        require_file(path)?;
        Ok(path)
    }

    /// One-line provenance header listing the effective settings.
    pub fn header(&self) -> String {
        format!(
            "# K={} L={} runs={} seed={} tol={} max_iterations={} prob_floor={} folds={} item_item_k={} \
             mf_k={} mf_learning_rate={} mf_lambda={} mf_epochs={} scale={} format={}",
            self.fit.user_groups,
            self.fit.item_groups,
            self.runs,
            self.fit.seed,
            self.fit.tol,
            self.fit.max_iterations,
            self.fit.prob_floor,
            self.folds,
            self.neighbors,
            self.mf.k_factors,
            self.mf.learning_rate,
            self.mf.lambda,
            self.mf.epochs,
            self.scale,
            self.format_name,
        )
    }
}

pub fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("{} does not exist or is not a file", path.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_parse() {
        assert_eq!("3,4".parse::<Groups>().unwrap(), Groups(3, 4));
        assert_eq!("5".parse::<Groups>().unwrap(), Groups(5, 5));
        assert!("a,b".parse::<Groups>().is_err());
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file: FileConfig = toml::from_str(
            r#"
            [model]
            user_groups = 4
            item_groups = 6
            runs = 20
            [evaluate]
            folds = 3
            "#,
        )
        .unwrap();
        let args = CommonArgs {
            runs: Some(7),
            ..Default::default()
        };
        let s = Settings::resolve(&args, &file).unwrap();
        assert_eq!(s.runs, 7);
        assert_eq!((s.fit.user_groups, s.fit.item_groups), (4, 6));
        assert_eq!(s.folds, 3);
        assert_eq!(s.fit.max_iterations, 400);

        let args = CommonArgs {
            groups: Some(Groups(2, 2)),
            ..Default::default()
        };
        let s = Settings::resolve(&args, &file).unwrap();
        assert_eq!((s.fit.user_groups, s.fit.item_groups, s.runs), (2, 2, 20));
    }

    #[test]
    fn defaults_follow_the_model_description() {
        let s = Settings::resolve(&CommonArgs { workers: Some(1), ..Default::default() }, &FileConfig::default()).unwrap();
        assert_eq!((s.fit.user_groups, s.fit.item_groups, s.runs, s.folds), (10, 10, 500, 5));
        assert_eq!(s.neighbors, 50);
        assert_eq!(s.mf.learning_rate, 0.002);
    }

    #[test]
    fn bad_values_rejected() {
        let file = FileConfig::default();
        let bad = |args: CommonArgs| Settings::resolve(&args, &file).is_err();
        assert!(bad(CommonArgs { groups: Some(Groups(0, 3)), ..Default::default() }));
        assert!(bad(CommonArgs { methods: Some(vec!["svd".into()]), ..Default::default() }));
        assert!(bad(CommonArgs { folds: Some(1), ..Default::default() }));
        assert!(bad(CommonArgs { scale: Some("5..1".into()), ..Default::default() }));
        assert!(toml::from_str::<FileConfig>("unknown = 1").is_err());
    }
}
