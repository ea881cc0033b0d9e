use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gaitscat::features::{
    read_features_csv, read_pca, read_standardizer, write_features_csv, write_pca,
    write_standardizer, Postprocessor,
};
use gaitscat::harness::{
    enroll_walkers, extract_descriptors, fit_ubm, job_seed, partition, score_trials, sweep,
    FeatureType, HarnessConfig, Partition, Recording, ResultsTable, SweepSpec, TrainedModels,
};
use gaitscat::openset::{compute_eer, read_gmm, read_scores_csv, write_gmm, write_scores_csv};
use gaitscat::scattering::{
    normalize_scattering, write_scattering, write_scattering_csv, ScatterPlan,
};
use gaitscat::signal_io::{segment_signal, Modality};
use gaitscat::synthgait::{read_corpus, write_corpus, Corpus};
use serde::{Deserialize, Serialize};

/// Gait identification from footstep audio and geophone recordings.
#[derive(Debug, Parser)]
#[command(name = "gaitscat", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML file overriding any default setting.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for corpus generation, partitions and EM.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Feature type: audio, geo or fused.
    #[arg(long, global = true)]
    modality: Option<FeatureType>,
    /// Averaging scale in seconds.
    #[arg(long = "T", global = true)]
    t: Option<f64>,
    /// Reduced dimension.
    #[arg(long = "N", global = true)]
    n: Option<usize>,
    /// Random partitions per cell.
    #[arg(long, global = true)]
    repeats: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus (WAV files and manifest.toml).
    Synth,
    /// Compute log-spectrum descriptors of a corpus into features.csv.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        /// Also write the normalized scattering of each walk's first segment.
        #[arg(long)]
        scattering: bool,
    },
    /// Fit the postprocessor and UBM for one partition.
    TrainUbm {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 0)]
        repeat: usize,
    },
    /// MAP-adapt the UBM to every enrolled walker.
    Enroll {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        models: PathBuf,
    },
    /// Score test-day trials against enrolled models into scores.csv.
    Score {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        models: PathBuf,
    },
    /// EER of a scores file, or of one (modality, T, N) cell over repeats.
    Evaluate {
        #[arg(long, conflicts_with = "manifest")]
        scores: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Run the full grid and write results.csv, boxstats.csv and table.md.
    Sweep {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

const DEFAULT_T: f64 = 0.186;
const DEFAULT_N: usize = 50;
const MODEL_FILE: &str = "model.toml";

/// What `train-ubm` decided, read back by `enroll` and `score`.
#[derive(Debug, Serialize, Deserialize)]
struct ModelInfo {
    feature: FeatureType,
    t: f64,
    n: usize,
    repeat: usize,
    seed: u64,
    test_day: u32,
    ubm: Vec<u32>,
    enroll: Vec<u32>,
    unknown: Vec<u32>,
    pca: bool,
}

impl ModelInfo {
    fn partition(&self) -> Partition {
        Partition {
            ubm: self.ubm.clone(),
            enroll: self.enroll.clone(),
            unknown: self.unknown.clone(),
            test_day: self.test_day,
        }
    }

    fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MODEL_FILE);
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

struct Run {
    cfg: HarnessConfig,
    g: Global,
}

impl Run {
    fn new(g: Global) -> Result<Self> {
        let mut cfg = match &g.config {
            Some(p) => HarnessConfig::load(p)?,
            None => HarnessConfig::default(),
        };
        if let Some(s) = g.seed {
            cfg.set_seed(s);
        }
        if let Some(r) = g.repeats {
            cfg.partition.repeats = r;
        }
        Ok(Run { cfg, g })
    }

    fn out(&self, default: &str) -> Result<PathBuf> {
        let dir = self.g.out.clone().unwrap_or_else(|| PathBuf::from(default));
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }

    fn feature(&self) -> FeatureType {
        self.g.modality.unwrap_or(FeatureType::Fused)
    }

    fn t(&self) -> f64 {
        self.g.t.unwrap_or(DEFAULT_T)
    }

    fn n(&self) -> usize {
        self.g.n.unwrap_or(DEFAULT_N)
    }

    fn corpus(&self, manifest: Option<&Path>) -> Result<Corpus<f64>> {
        match manifest {
            Some(m) => read_corpus(m).with_context(|| format!("loading {}", m.display())),
            None => {
                log::info!(
                    "generating synthetic corpus with seed {}",
                    self.cfg.synth.seed
                );
                Ok(self.cfg.synth.corpus()?)
            }
        }
    }

    fn synth(&self) -> Result<()> {
        let dir = self.out("corpus")?;
        let corpus = self.corpus(None)?;
        let manifest = write_corpus(&dir, &corpus)?;
        println!("wrote {} walks to {}", corpus.len(), manifest.display());
        Ok(())
    }

    fn extract(&self, manifest: &Path, scattering: bool) -> Result<()> {
        let dir = self.out(".")?;
        let corpus = self.corpus(Some(manifest))?;
        let feature = self.feature();
        let desc = extract_descriptors(&corpus, self.t(), &[feature], &self.cfg.extract)?
            .pop()
            .context("no descriptors")?;
        let path = dir.join("features.csv");
        write_features_csv(&path, &desc)?;
        println!(
            "wrote {} rows of dimension {} to {}",
            desc.len(),
            desc.dim(),
            path.display()
        );
        if scattering {
            self.dump_scattering(&corpus, feature, &dir.join("scattering"))?;
        }
        Ok(())
    }

    fn dump_scattering(
        &self,
        corpus: &Corpus<f64>,
        feature: FeatureType,
        dir: &Path,
    ) -> Result<()> {
        let modality = match feature {
            FeatureType::Audio => Modality::Audio,
            FeatureType::Geophone => Modality::Geophone,
            FeatureType::Fused => bail!("--scattering needs --modality audio or geo"),
        };
        std::fs::create_dir_all(dir)?;
        let scfg = self.cfg.extract.scattering(self.t(), feature);
        let seg = &self.cfg.extract.segment;
        let first = corpus
            .walks
            .first()
            .context("empty corpus")?
            .signal(modality);
        let rate = first.sample_rate();
        let plan = ScatterPlan::<f64>::new(&scfg, rate, seg.segment_len(rate), modality)?;
        for w in &corpus.walks {
            let segs = segment_signal(w.signal(modality), seg)?;
            let Some(s) = segs.first() else { continue };
            let m = normalize_scattering(&plan.transform(&s.samples)?, &s.samples, &scfg)?;
            let stem = dir.join(format!("walk_{:04}", w.id));
            write_scattering(stem.with_extension("scat"), &m)?;
            write_scattering_csv(stem.with_extension("csv"), &m)?;
        }
        println!("wrote scattering matrices to {}", dir.display());
        Ok(())
    }

    fn train_ubm(&self, features: &Path, repeat: usize) -> Result<()> {
        let dir = self.out("models")?;
        let desc = read_features_csv::<f64>(features)?;
        let part = partition(
            &Recording::from_features(&desc),
            &self.cfg.partition,
            repeat,
        )?;
        let (feature, t, n) = (self.feature(), self.t(), self.n());
        let seed = job_seed(self.cfg.partition.base_seed, feature, t, n, repeat);
        let (post, ubm) = fit_ubm(&desc, n, &part, &self.cfg.model, seed)?;
        write_standardizer(dir.join("standardizer.bin"), &post.standardizer)?;
        if let Some(p) = &post.pca {
            write_pca(dir.join("pca.bin"), p)?;
        }
        write_gmm(dir.join("ubm.gmm"), &ubm)?;
        let info = ModelInfo {
            feature,
            t,
            n: post.n(),
            repeat,
            seed,
            test_day: part.test_day,
            ubm: part.ubm,
            enroll: part.enroll,
            unknown: part.unknown,
            pca: post.pca.is_some(),
        };
        std::fs::write(dir.join(MODEL_FILE), toml::to_string(&info)?)?;
        println!(
            "UBM walkers {:?}, enrolled {:?}, unknown {:?}",
            info.ubm, info.enroll, info.unknown
        );
        Ok(())
    }

    fn load_post(models: &Path, info: &ModelInfo) -> Result<Postprocessor<f64>> {
        let std = read_standardizer(models.join("standardizer.bin"))?;
        let pca = if info.pca {
            Some(read_pca(models.join("pca.bin"))?)
        } else {
            None
        };
        Ok(Postprocessor::from_parts(std, pca, info.n)?)
    }

    fn enroll(&self, features: &Path, models: &Path) -> Result<()> {
        let info = ModelInfo::load(models)?;
        let desc = read_features_csv::<f64>(features)?;
        let post = Self::load_post(models, &info)?;
        let ubm = read_gmm(models.join("ubm.gmm"))?;
        let dir = self.g.out.clone().unwrap_or_else(|| models.to_path_buf());
        std::fs::create_dir_all(&dir)?;
        for (w, m) in enroll_walkers(
            &desc,
            &post,
            &ubm,
            &info.partition(),
            self.cfg.model.relevance,
        )? {
            write_gmm(dir.join(format!("walker_{w}.gmm")), &m)?;
        }
        println!("enrolled walkers {:?}", info.enroll);
        Ok(())
    }

    fn score(&self, features: &Path, models: &Path) -> Result<()> {
        let dir = self.out(".")?;
        let info = ModelInfo::load(models)?;
        let desc = read_features_csv::<f64>(features)?;
        let enrolled = info
            .enroll
            .iter()
            .map(|&w| Ok((w, read_gmm(models.join(format!("walker_{w}.gmm")))?)))
            .collect::<Result<Vec<_>>>()?;
        let trained = TrainedModels {
            post: Self::load_post(models, &info)?,
            ubm: read_gmm(models.join("ubm.gmm"))?,
            enrolled,
            training_recordings: Vec::new(),
        };
        let scores = score_trials(&desc, &trained, &info.partition())?;
        let path = dir.join("scores.csv");
        write_scores_csv(&path, &scores)?;
        println!("wrote {} trials to {}", scores.trials.len(), path.display());
        if let Ok(eer) = compute_eer(&scores) {
            println!("EER {eer:.4}");
        }
        Ok(())
    }

    fn evaluate(&self, scores: Option<&Path>, manifest: Option<&Path>) -> Result<()> {
        if let Some(s) = scores {
            let eer = compute_eer(&read_scores_csv(s)?)?;
            println!("EER {eer:.6}");
            return Ok(());
        }
        let spec = SweepSpec {
            t_values: vec![self.t()],
            n_values: vec![self.n()],
            features: vec![self.feature()],
        };
        let table = self.run_sweep(manifest, &spec)?;
        let cell = &table.cells[0];
        match cell.median() {
            Some(m) => println!(
                "{} T={} N={}: median EER {m:.4} over {} repeats",
                cell.key.feature,
                cell.key.t,
                cell.key.n,
                cell.eers().len()
            ),
            None => bail!("every repeat failed; see results.csv"),
        }
        Ok(())
    }

    fn sweep(&self, manifest: Option<&Path>) -> Result<()> {
        let mut spec = self.cfg.sweep.clone();
        if let Some(t) = self.g.t {
            spec.t_values = vec![t];
        }
        if let Some(n) = self.g.n {
            spec.n_values = vec![n];
        }
        if let Some(f) = self.g.modality {
            spec.features = vec![f];
        }
        let table = self.run_sweep(manifest, &spec)?;
        print!("{}", table.table_md());
        Ok(())
    }

    fn run_sweep(&self, manifest: Option<&Path>, spec: &SweepSpec) -> Result<ResultsTable> {
        let dir = self.out("results")?;
        let corpus = self.corpus(manifest)?;
        let table = sweep(
            &corpus,
            spec,
            &self.cfg.partition,
            &self.cfg.extract,
            &self.cfg.model,
        )?;
        table.write_all(&dir)?;
        log::info!("wrote results to {}", dir.display());
        Ok(table)
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let run = Run::new(cli.global)?;
    match &cli.command {
        Command::Synth => run.synth(),
        Command::Extract {
            manifest,
            scattering,
        } => run.extract(manifest, *scattering),
        Command::TrainUbm { features, repeat } => run.train_ubm(features, *repeat),
        Command::Enroll { features, models } => run.enroll(features, models),
        Command::Score { features, models } => run.score(features, models),
        Command::Evaluate { scores, manifest } => {
            run.evaluate(scores.as_deref(), manifest.as_deref())
        }
        Command::Sweep { manifest } => run.sweep(manifest.as_deref()),
    }
}
