//! End-to-end run: preprocess, split, train, evaluate, ensemble, report.
//!
//! All outputs live under `RunConfig::output_dir`:
//!
//! ```text
//! config.toml                  resolved configuration of the last run
//! split.json                   train/test patient ids
//! preprocessed/                baseline-corrected records (preprocess stage)
//! base/checkpoint.json         base network, with optimizer state
//! base/loss.csv                epoch,mean_loss
//! base/metrics_{test,train}.csv
//! base/patients.csv            patient_id,split,f
//! ensemble/manifest.json
//! ensemble/member_NN.json
//! ensemble/stage_history.{csv,svg}
//! ensemble/metrics_{test,train}.csv
//! ensemble/probe.csv
//! report/scattergram.{csv,svg}
//! report/summary.csv
//! ```
//!
//! Every stage reuses finished outputs of earlier stages, so an interrupted
//! run continues where it stopped.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    load_dataset, split_dataset, subset, write_dataset, DatasetSplit, EcgRecord, Lead, DATASET_SIZE,
    MANIFEST_FILE,
};
use crate::delineate::{DelineationConfig, Segmenter};
use crate::ensemble::{
    distillation_report, generalization_probe, Ensemble, EnsembleBuilder, EnsembleConfig, EnsembleManifest,
    NetworkTrainer, Split, StopReason,
};
use crate::error::{Error, Result};
use crate::evaluate::{compute_metrics, pool, MetricsReport, PatientScore, Scorer};
use crate::nnet::{Architecture, Checkpoint, Model, RmsPropConfig};
use crate::preprocess::{preprocess_record, FilterSpec};
use crate::report;
use crate::train::{train_base, write_loss_log, TrainConfig, TrainOutcome};

/// Training constants shared by the base network and every ensemble member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub window_seconds: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub init_scale: f64,
    pub optimizer: RmsPropConfig,
    pub architecture: Architecture,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSettings {
            window_seconds: t.window_seconds,
            batch_size: t.batch_size,
            epochs: t.epochs,
            steps_per_epoch: t.steps_per_epoch,
            init_scale: t.init_scale,
            optimizer: t.optimizer,
            architecture: t.architecture,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory written by `import`: one file per patient plus a manifest.
    pub dataset_dir: PathBuf,
    pub output_dir: PathBuf,
    pub lead: Lead,
    /// Governs the split, initialization, window sampling and member reseeds.
    pub seed: u64,
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
    /// Reduce batch gradients in a fixed order.
    pub deterministic: bool,
    pub filter: FilterSpec,
    pub train: TrainSettings,
    pub ensemble: EnsembleConfig,
    pub delineation: DelineationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            lead: Lead::DEFAULT,
            seed: 0,
            threads: None,
            deterministic: false,
            filter: FilterSpec::default(),
            train: TrainSettings::default(),
            ensemble: EnsembleConfig::default(),
            delineation: DelineationConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            lead: self.lead,
            window_seconds: t.window_seconds,
            batch_size: t.batch_size,
            epochs: t.epochs,
            steps_per_epoch: t.steps_per_epoch,
            seed: self.seed,
            optimizer: t.optimizer,
            architecture: t.architecture.clone(),
            init_scale: t.init_scale,
            deterministic: self.deterministic,
            checkpoint: None,
        }
    }

    pub fn scorer(&self) -> Scorer {
        Scorer::new(self.lead, self.delineation)
    }

    /// Checks value ranges and that the dataset directory exists.
    pub fn validate(&self) -> Result<()> {
        if !self.dataset_dir.join(MANIFEST_FILE).is_file() {
            return Err(Error::Config(format!(
                "no dataset manifest in {}; run `import` first",
                self.dataset_dir.display()
            )));
        }
        self.filter.window_samples(crate::dataset::SAMPLING_RATE)?;
        self.train_config().validate(crate::dataset::RECORD_LEN)?;
        let e = &self.ensemble;
        for (name, v) in [
            ("threshold", e.threshold),
            ("outlier_threshold", e.outlier_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!(
                    "ensemble.{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        if e.iteration_cap == 0 {
            return Err(Error::Config("ensemble.iteration_cap must be at least 1".into()));
        }
        if self.delineation.min_run == 0 {
            return Err(Error::Config("delineation.min_run must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Preprocess,
    Split,
    Train,
    Evaluate,
    Ensemble,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Preprocess,
        Stage::Split,
        Stage::Train,
        Stage::Evaluate,
        Stage::Ensemble,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Preprocess => "preprocess",
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Ensemble => "ensemble",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

/// Per-split evaluation of one model.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitEvaluation {
    pub split: Split,
    pub metrics: MetricsReport,
    pub patients: Vec<PatientScore>,
    /// F over counts pooled across the split.
    pub overall_f: f64,
}

pub fn evaluate_split(
    model: &dyn Segmenter,
    records: &[&EcgRecord],
    scorer: &Scorer,
    split: Split,
) -> Result<SplitEvaluation> {
    let matches = scorer.match_records(model, records)?;
    let pooled = pool(&matches);
    Ok(SplitEvaluation {
        split,
        metrics: compute_metrics(&pooled),
        patients: matches
            .iter()
            .zip(records)
            .map(|(m, r)| crate::evaluate::patient_f_score(&r.patient_id, m))
            .collect(),
        overall_f: pooled.f_score(),
    })
}

const PREPROCESS_STAMP: &str = "filter.json";

/// A dataset opened for one run, with records preprocessed and split.
pub struct Pipeline {
    config: RunConfig,
    records: Vec<EcgRecord>,
    split: DatasetSplit,
}

impl Pipeline {
    /// Loads the dataset, preprocesses it (reusing `preprocessed/` when its
    /// filter matches) and loads or creates the split.
    pub fn open(config: RunConfig) -> Result<Self> {
        config.validate()?;
        fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
        let records = stage(Stage::Preprocess, || load_preprocessed(&config))?;
        let split = stage(Stage::Split, || load_or_split(&config, &records))?;
        Ok(Pipeline {
            config,
            records,
            split,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn records(&self) -> &[EcgRecord] {
        &self.records
    }

    pub fn split(&self) -> &DatasetSplit {
        &self.split
    }

    pub fn train_records(&self) -> Vec<&EcgRecord> {
        subset(&self.records, &self.split.train_ids)
    }

    pub fn test_records(&self) -> Vec<&EcgRecord> {
        subset(&self.records, &self.split.test_ids)
    }

    pub fn path(&self, relative: &str) -> PathBuf {
        self.config.output_dir.join(relative)
    }

    /// Runs `stages` in canonical order inside a pool of `config.threads` workers.
    pub fn run(&self, stages: &[Stage]) -> Result<()> {
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.config.threads {
            pool = pool.num_threads(n);
        }
        let pool = pool
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        pool.install(|| {
            let text = self.config.to_toml()?;
            let path = self.path("config.toml");
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            for s in Stage::ALL.into_iter().filter(|s| stages.contains(s)) {
                info!("stage {s}");
                stage(s, || self.run_stage(s))?;
            }
            Ok(())
        })
    }

    fn run_stage(&self, s: Stage) -> Result<()> {
        match s {
            Stage::Preprocess => self.write_preprocessed(),
            Stage::Split => self.split.save(self.path("split.json")),
            Stage::Train => self.train_base().map(|_| ()),
            Stage::Evaluate => self.evaluate_base().map(|_| ()),
            Stage::Ensemble => self.build_ensemble().map(|_| ()),
            Stage::Report => self.report().map(|_| ()),
        }
    }

    fn write_preprocessed(&self) -> Result<()> {
        let dir = self.path("preprocessed");
        write_dataset(&dir, &self.records, self.config.seed)?;
        let stamp = serde_json::to_string(&self.config.filter).expect("filter spec serializes");
        let path = dir.join(PREPROCESS_STAMP);
        fs::write(&path, stamp).map_err(|e| Error::io(&path, e))
    }

    /// Trains the base network, continuing from `base/checkpoint.json` when present.
    pub fn train_base(&self) -> Result<TrainOutcome> {
        let mut config = self.config.train_config();
        config.checkpoint = Some(self.path("base/checkpoint.json"));
        let outcome = train_base(&self.train_records(), &config)?;
        write_loss_log(self.path("base/loss.csv"), &outcome.epoch_losses)?;
        if let (Some(first), Some(last)) = (outcome.step_losses.first(), outcome.step_losses.last()) {
            info!("base network: loss {first:.4} -> {last:.4}");
        }
        Ok(outcome)
    }

    pub fn load_base(&self) -> Result<Model> {
        let path = self.path("base/checkpoint.json");
        if !path.exists() {
            return Err(Error::Config(format!(
                "{} is missing; run the train stage",
                path.display()
            )));
        }
        let ckpt = Checkpoint::load(&path)?;
        let total = self.config.train.epochs * self.config.train.steps_per_epoch;
        if ckpt.steps < total {
            return Err(Error::Config(format!(
                "{} holds an unfinished run ({} of {total} steps); rerun the train stage",
                path.display(),
                ckpt.steps
            )));
        }
        ckpt.model()
    }

    fn evaluate_into(&self, model: &dyn Segmenter, dir: &str) -> Result<[SplitEvaluation; 2]> {
        let scorer = self.config.scorer();
        let train = evaluate_split(model, &self.train_records(), &scorer, Split::Train)?;
        let test = evaluate_split(model, &self.test_records(), &scorer, Split::Test)?;
        report::write_metrics(self.path(&format!("{dir}/metrics_train.csv")), &train.metrics)?;
        report::write_metrics(self.path(&format!("{dir}/metrics_test.csv")), &test.metrics)?;
        let mut rows = report::patient_rows(Split::Train, &train.patients);
        rows.extend(report::patient_rows(Split::Test, &test.patients));
        report::write_patients(self.path(&format!("{dir}/patients.csv")), &rows)?;
        info!(
            "{dir}: overall F train {:.4}, test {:.4}",
            train.overall_f, test.overall_f
        );
        Ok([train, test])
    }

    /// Scores the base network on both splits and writes its metrics.
    pub fn evaluate_base(&self) -> Result<[SplitEvaluation; 2]> {
        let model = self.load_base()?;
        self.evaluate_into(&model, "base")
    }

    /// Builds the ensemble, continuing a partial `ensemble/manifest.json`.
    /// The base network is offered as the first member.
    pub fn build_ensemble(&self) -> Result<(EnsembleManifest, Vec<Model>)> {
        let dir = self.path("ensemble");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let manifest_path = dir.join("manifest.json");
        let train = self.train_records();

        let (manifest, members) = match self.load_manifest()? {
            Some((manifest, members)) if manifest.stop_reason != StopReason::InProgress => {
                (manifest, members)
            }
            existing => {
                let builder = match existing {
                    Some((manifest, members)) => {
                        info!("continuing ensemble after {} members", members.len());
                        EnsembleBuilder::resume(&train, manifest, members)?
                    }
                    None => {
                        let mut builder = EnsembleBuilder::new(
                            &train,
                            self.config.ensemble,
                            self.config.scorer(),
                            crate::derive_seed(self.config.seed, "ensemble"),
                        );
                        let base = self.load_base()?;
                        if builder.offer(base.clone(), self.config.seed, 0)? {
                            let mut manifest = builder.manifest().clone();
                            save_member(&dir, &mut manifest, &base)?;
                            builder.set_checkpoint(1, manifest.members[0].checkpoint.clone());
                        } else {
                            warn!(
                                "base network solved no training patient; training the first member afresh"
                            );
                        }
                        builder
                    }
                };
                let mut trainer = NetworkTrainer {
                    config: self.config.train_config(),
                };
                let build = builder.run(&mut trainer, |manifest, member| {
                    save_member(&dir, manifest, member)
                })?;
                (build.manifest, build.members)
            }
        };
        fs::write(&manifest_path, manifest.to_json()?).map_err(|e| Error::io(&manifest_path, e))?;
        let rows = report::stage_rows(&manifest);
        report::write_stage_history(dir.join("stage_history.csv"), &manifest)?;
        let svg = dir.join("stage_history.svg");
        fs::write(&svg, report::stage_history_svg(&rows)).map_err(|e| Error::io(&svg, e))?;
        info!(
            "ensemble: {} members, history {:?}, stop {:?}",
            members.len(),
            manifest.history,
            manifest.stop_reason
        );
        let fallback;
        let scored: &[Model] = if members.is_empty() {
            warn!("no member was accepted; the ensemble is scored as the base network alone");
            fallback = [self.load_base()?];
            &fallback
        } else {
            &members
        };
        self.evaluate_into(&Ensemble::new(scored.iter().collect())?, "ensemble")?;
        Ok((manifest, members))
    }

    fn load_manifest(&self) -> Result<Option<(EnsembleManifest, Vec<Model>)>> {
        let dir = self.path("ensemble");
        let path = dir.join("manifest.json");
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest = EnsembleManifest::from_json(&text)?;
        if manifest.lead != self.config.lead || manifest.delineation != self.config.delineation {
            return Err(Error::Config(format!(
                "{} was built with a different lead or delineation; remove it to rebuild",
                path.display()
            )));
        }
        let members = manifest
            .members
            .iter()
            .map(|m| {
                let file = m
                    .checkpoint
                    .as_ref()
                    .ok_or_else(|| Error::Config(format!("member {} has no checkpoint", m.iteration)))?;
                Checkpoint::load(dir.join(file))?.model()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Some((manifest, members)))
    }

    pub fn load_ensemble(&self) -> Result<(EnsembleManifest, Vec<Model>)> {
        self.load_manifest()?
            .ok_or_else(|| Error::Config("no ensemble manifest; run the ensemble stage".into()))
    }

    /// Distillation scattergram, split summary and generalization probe.
    pub fn report(&self) -> Result<crate::ensemble::DistillationReport> {
        let base = self.load_base()?;
        let (manifest, members) = self.load_ensemble()?;
        let ensemble = if members.is_empty() {
            warn!("no member was accepted; reporting the base network as the ensemble");
            Ensemble::new(vec![&base])?
        } else {
            Ensemble::new(members.iter().collect())?
        };
        let train = self.train_records();
        let dist = distillation_report(
            &base,
            &ensemble,
            &train,
            &self.test_records(),
            &self.config.scorer(),
            self.config.ensemble.outlier_threshold,
        )?;
        report::write_distillation(self.path("report"), &dist)?;
        let probe = generalization_probe(&manifest, &members, &train)?;
        report::write_probe(self.path("ensemble/probe.csv"), &probe)?;
        for s in &dist.summary {
            info!(
                "{}: overall F base {:.4}, ensemble {:.4}; outliers {} -> {}",
                s.split.name(),
                s.overall_f_base,
                s.overall_f_ensemble,
                s.outliers_base,
                s.outliers_ensemble
            );
        }
        Ok(dist)
    }
}

fn stage<T>(s: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|source| Error::Stage {
        stage: s.name().to_string(),
        source: Box::new(source),
    })
}

fn save_member(dir: &Path, manifest: &mut EnsembleManifest, member: &Model) -> Result<()> {
    let info = manifest.members.last_mut().expect("a member was just accepted");
    let file = format!("member_{:02}.json", info.iteration);
    Checkpoint::new(member, None, info.seed, 0).save(dir.join(&file))?;
    info.checkpoint = Some(file);
    let path = dir.join("manifest.json");
    fs::write(&path, manifest.to_json()?).map_err(|e| Error::io(&path, e))
}

fn load_preprocessed(config: &RunConfig) -> Result<Vec<EcgRecord>> {
    let cache = config.output_dir.join("preprocessed");
    let stamp = serde_json::to_string(&config.filter).expect("filter spec serializes");
    if fs::read_to_string(cache.join(PREPROCESS_STAMP)).ok().as_deref() == Some(stamp.as_str()) {
        info!("using preprocessed records in {}", cache.display());
        return Ok(load_dataset(&cache)?.1);
    }
    let (_, raw) = load_dataset(&config.dataset_dir)?;
    raw.par_iter()
        .map(|r| preprocess_record(r, &config.filter))
        .collect()
}

fn load_or_split(config: &RunConfig, records: &[EcgRecord]) -> Result<DatasetSplit> {
    let ids: Vec<String> = records.iter().map(|r| r.patient_id.clone()).collect();
    let path = config.output_dir.join("split.json");
    if path.exists() {
        let split = DatasetSplit::load(&path)?;
        let mut known: Vec<&String> = split.train_ids.iter().chain(&split.test_ids).collect();
        let mut have: Vec<&String> = ids.iter().collect();
        known.sort();
        have.sort();
        if split.seed != config.seed || known != have {
            return Err(Error::Config(format!(
                "{} belongs to another seed or dataset; remove the output directory to start over",
                path.display()
            )));
        }
        return Ok(split);
    }
    if ids.len() != DATASET_SIZE {
        warn!(
            "dataset has {} patients, the split needs {DATASET_SIZE}",
            ids.len()
        );
    }
    let split = split_dataset(&ids, config.seed)?;
    split.save(&path)?;
    Ok(split)
}
