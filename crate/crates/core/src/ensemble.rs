//! Iteratively built error-correcting ensemble.
//!
//! Each new member is trained only on the patients every earlier member
//! failed to delineate well (per-patient F below the screening threshold).
//! Patients the new member handles well leave the subset; if none do, the
//! member is retrained with a fresh seed. Building stops once the subset is
//! empty, after too many fruitless retrains, or at the iteration cap.
//! Inference averages the members' probability maps.

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::dataset::{EcgRecord, Lead};
use crate::delineate::{average_probabilities, DelineationConfig, Segmenter};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::evaluate::{pool, Scorer};
use crate::nnet::{Model, Tensor1d};
use crate::train::{train_base, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    /// Patients at or above this F leave the training subset.
    pub threshold: f64,
    /// Fruitless retrains allowed for one iteration before giving up.
    pub retry_limit: usize,
    /// Maximum number of members.
    pub iteration_cap: usize,
    /// Patients below this F are reported as outliers.
    pub outlier_threshold: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            threshold: 0.99,
            retry_limit: 5,
            iteration_cap: 50,
            outlier_threshold: 0.9,
        }
    }
}

/// Averages member probabilities.
pub struct Ensemble<M> {
    members: Vec<M>,
}

impl<M: Segmenter> Ensemble<M> {
    pub fn new(members: Vec<M>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        Ok(Ensemble { members })
    }

    pub fn members(&self) -> &[M] {
        &self.members
    }
}

impl<M: Segmenter> Segmenter for Ensemble<M> {
    fn probabilities(&self, signal: &Tensor1d) -> Result<Tensor1d> {
        let outputs = self
            .members
            .iter()
            .map(|m| m.probabilities(signal))
            .collect::<Result<Vec<_>>>()?;
        average_probabilities(&outputs)
    }
}

/// Produces a member network for a training subset.
pub trait MemberTrainer {
    type Model: Segmenter;

    fn train(&mut self, records: &[&EcgRecord], seed: u64) -> Result<Self::Model>;
}

/// Trains real networks with [`train_base`], overriding only the seed.
pub struct NetworkTrainer {
    pub config: TrainConfig,
}

impl MemberTrainer for NetworkTrainer {
    type Model = Model;

    fn train(&mut self, records: &[&EcgRecord], seed: u64) -> Result<Model> {
        let config = TrainConfig {
            seed,
            checkpoint: None,
            ..self.config.clone()
        };
        Ok(train_base(records, &config)?.model)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberInfo {
    /// 1-based position in the ensemble.
    pub iteration: usize,
    /// Patients this member was trained on.
    pub subset: Vec<String>,
    /// Patients of `subset` it delineated at or above the threshold.
    pub solved: Vec<String>,
    /// Fruitless attempts discarded before this member was accepted.
    pub retrains: usize,
    pub seed: u64,
    /// Checkpoint path, relative to the manifest, once saved.
    pub checkpoint: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Every patient was solved by some member.
    Exhausted,
    /// The retry limit was exceeded without shrinking the subset.
    Stagnation,
    IterationCap,
    /// Building has not finished (a partial manifest).
    InProgress,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub config: EnsembleConfig,
    pub lead: Lead,
    pub delineation: DelineationConfig,
    pub seed: u64,
    pub members: Vec<MemberInfo>,
    /// Subset size before the first member, then after each accepted member.
    pub history: Vec<usize>,
    /// Patients no member solved.
    pub remaining: Vec<String>,
    /// Fruitless attempts on `remaining` after the last accepted member.
    #[serde(default)]
    pub pending_retrains: usize,
    pub stop_reason: StopReason,
}

impl EnsembleManifest {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            context: "serializing ensemble manifest".into(),
            source,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json {
            context: "parsing ensemble manifest".into(),
            source,
        })
    }

    /// Fruitless retrains spent on the subset of each history stage.
    pub fn stage_retrains(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.members.iter().map(|m| m.retrains).collect();
        out.push(self.pending_retrains);
        out
    }
}

pub struct EnsembleBuild<M> {
    pub manifest: EnsembleManifest,
    pub members: Vec<M>,
}

impl<M: Segmenter> EnsembleBuild<M> {
    pub fn ensemble(&self) -> Result<Ensemble<&M>> {
        Ensemble::new(self.members.iter().collect())
    }
}

impl<M: Segmenter> Segmenter for &M {
    fn probabilities(&self, signal: &Tensor1d) -> Result<Tensor1d> {
        (**self).probabilities(signal)
    }
}

pub struct EnsembleBuilder<'a, M> {
    records: &'a [&'a EcgRecord],
    scorer: Scorer,
    manifest: EnsembleManifest,
    members: Vec<M>,
}

impl<'a, M: Segmenter> EnsembleBuilder<'a, M> {
    pub fn new(records: &'a [&'a EcgRecord], config: EnsembleConfig, scorer: Scorer, seed: u64) -> Self {
        let ids: Vec<String> = records.iter().map(|r| r.patient_id.clone()).collect();
        EnsembleBuilder {
            records,
            scorer,
            manifest: EnsembleManifest {
                config,
                lead: scorer.lead,
                delineation: scorer.delineation,
                seed,
                members: Vec::new(),
                history: vec![ids.len()],
                remaining: ids,
                pending_retrains: 0,
                stop_reason: StopReason::InProgress,
            },
            members: Vec::new(),
        }
    }

    /// Continues from a partial build whose member models were reloaded.
    pub fn resume(records: &'a [&'a EcgRecord], manifest: EnsembleManifest, members: Vec<M>) -> Result<Self> {
        if manifest.members.len() != members.len() {
            return Err(Error::Config(format!(
                "manifest lists {} members but {} were loaded",
                manifest.members.len(),
                members.len()
            )));
        }
        let scorer = Scorer::new(manifest.lead, manifest.delineation);
        Ok(EnsembleBuilder {
            records,
            scorer,
            manifest,
            members,
        })
    }

    pub fn manifest(&self) -> &EnsembleManifest {
        &self.manifest
    }

    /// Records where member `iteration` (1-based) was saved.
    pub fn set_checkpoint(&mut self, iteration: usize, checkpoint: Option<String>) {
        if let Some(info) = self.manifest.members.get_mut(iteration - 1) {
            info.checkpoint = checkpoint;
        }
    }

    fn current_subset(&self) -> Vec<&'a EcgRecord> {
        crate::dataset::subset(self.records, &self.manifest.remaining)
    }

    /// Screens `model` on the current subset and accepts it as the next member
    /// if it solves at least one patient. Returns whether it was accepted.
    pub fn offer(&mut self, model: M, seed: u64, retrains: usize) -> Result<bool> {
        let subset = self.current_subset();
        let scores = self.scorer.f_scores(&model, &subset)?;
        let (solved, unsolved): (Vec<_>, Vec<_>) = scores
            .into_iter()
            .partition(|s| s.f >= self.manifest.config.threshold);
        if solved.is_empty() {
            return Ok(false);
        }
        let iteration = self.members.len() + 1;
        info!(
            "member {iteration}: solved {} of {} patients ({} retrains)",
            solved.len(),
            subset.len(),
            retrains
        );
        self.manifest.members.push(MemberInfo {
            iteration,
            subset: self.manifest.remaining.clone(),
            solved: solved.into_iter().map(|s| s.patient_id).collect(),
            retrains,
            seed,
            checkpoint: None,
        });
        self.manifest.remaining = unsolved.into_iter().map(|s| s.patient_id).collect();
        self.manifest.history.push(self.manifest.remaining.len());
        self.manifest.pending_retrains = 0;
        self.members.push(model);
        Ok(true)
    }

    /// Seed for attempt `attempt` of member `iteration`.
    pub fn member_seed(&self, iteration: usize, attempt: usize) -> u64 {
        derive_seed(
            self.manifest.seed,
            &format!("member-{iteration}-attempt-{attempt}"),
        )
    }

    /// Trains members until a stop condition holds. `on_accept` sees the
    /// manifest and the new member right after each acceptance.
    pub fn run<T, F>(mut self, trainer: &mut T, mut on_accept: F) -> Result<EnsembleBuild<M>>
    where
        T: MemberTrainer<Model = M>,
        F: FnMut(&mut EnsembleManifest, &M) -> Result<()>,
    {
        self.manifest.stop_reason = StopReason::InProgress;
        'outer: while !self.manifest.remaining.is_empty() {
            if self.members.len() >= self.manifest.config.iteration_cap {
                self.manifest.stop_reason = StopReason::IterationCap;
                break;
            }
            let iteration = self.members.len() + 1;
            let subset = self.current_subset();
            for attempt in 0..=self.manifest.config.retry_limit {
                let seed = self.member_seed(iteration, attempt);
                let model = trainer.train(&subset, seed)?;
                if self.offer(model, seed, attempt)? {
                    let member = self.members.last().expect("just accepted");
                    on_accept(&mut self.manifest, member)?;
                    continue 'outer;
                }
                info!("member {iteration} attempt {attempt} solved nobody; retraining");
            }
            warn!(
                "stopping: {} patients unsolved after {} retrains",
                self.manifest.remaining.len(),
                self.manifest.config.retry_limit
            );
            self.manifest.pending_retrains = self.manifest.config.retry_limit + 1;
            self.manifest.stop_reason = StopReason::Stagnation;
            break;
        }
        if self.manifest.remaining.is_empty() {
            self.manifest.stop_reason = StopReason::Exhausted;
        }
        Ok(EnsembleBuild {
            manifest: self.manifest,
            members: self.members,
        })
    }
}

/// Builds an ensemble from scratch on `records`.
pub fn build_ensemble<T: MemberTrainer>(
    records: &[&EcgRecord],
    trainer: &mut T,
    config: EnsembleConfig,
    scorer: Scorer,
    seed: u64,
) -> Result<EnsembleBuild<T::Model>> {
    EnsembleBuilder::new(records, config, scorer, seed).run(trainer, |_, _| Ok(()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub member: usize,
    pub subset_size: usize,
    /// Own-subset patients at or above the threshold.
    pub own_good: usize,
    pub unseen_size: usize,
    /// Training-set patients outside the member's subset at or above the threshold;
    /// `None` when the member saw the whole training set.
    pub unseen_good: Option<usize>,
}

/// For every member, how many of its own patients and how many never-seen
/// training patients it delineates at or above the threshold.
pub fn generalization_probe<M: Segmenter>(
    manifest: &EnsembleManifest,
    members: &[M],
    train_records: &[&EcgRecord],
) -> Result<Vec<ProbeRow>> {
    if members.len() < 2 {
        warn!("generalization probe needs at least two members");
        return Ok(Vec::new());
    }
    let scorer = Scorer::new(manifest.lead, manifest.delineation);
    let threshold = manifest.config.threshold;
    members
        .iter()
        .zip(&manifest.members)
        .map(|(model, info)| {
            let scores = scorer.f_scores(model, train_records)?;
            let in_subset = |id: &str| info.subset.iter().any(|s| s == id);
            let (own, unseen): (Vec<_>, Vec<_>) = scores.iter().partition(|s| in_subset(&s.patient_id));
            let good =
                |list: &[&crate::evaluate::PatientScore]| list.iter().filter(|s| s.f >= threshold).count();
            let probed = info.iteration > 1 && !unseen.is_empty();
            Ok(ProbeRow {
                member: info.iteration,
                subset_size: own.len(),
                own_good: good(&own),
                unseen_size: unseen.len(),
                unseen_good: probed.then(|| good(&unseen)),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub patient_id: String,
    pub split: Split,
    pub f_base: f64,
    pub f_ensemble: f64,
    pub outlier_base: bool,
    pub outlier_ensemble: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub split: Split,
    pub patients: usize,
    /// F over counts pooled across every patient of the split.
    pub overall_f_base: f64,
    pub overall_f_ensemble: f64,
    pub outliers_base: usize,
    pub outliers_ensemble: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistillationReport {
    pub outlier_threshold: f64,
    pub rows: Vec<ScatterRow>,
    pub summary: Vec<SplitSummary>,
}

/// Per-patient F of the base network and of the ensemble on both splits.
pub fn distillation_report(
    base: &dyn Segmenter,
    ensemble: &dyn Segmenter,
    train: &[&EcgRecord],
    test: &[&EcgRecord],
    scorer: &Scorer,
    outlier_threshold: f64,
) -> Result<DistillationReport> {
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (split, records) in [(Split::Train, train), (Split::Test, test)] {
        let base_matches = scorer.match_records(base, records)?;
        let ens_matches = scorer.match_records(ensemble, records)?;
        let mut outliers = (0, 0);
        for ((record, b), e) in records.iter().zip(&base_matches).zip(&ens_matches) {
            let (f_base, f_ensemble) = (b.f_score(), e.f_score());
            let row = ScatterRow {
                patient_id: record.patient_id.clone(),
                split,
                f_base,
                f_ensemble,
                outlier_base: f_base < outlier_threshold,
                outlier_ensemble: f_ensemble < outlier_threshold,
            };
            outliers.0 += usize::from(row.outlier_base);
            outliers.1 += usize::from(row.outlier_ensemble);
            rows.push(row);
        }
        summary.push(SplitSummary {
            split,
            patients: records.len(),
            overall_f_base: pool(&base_matches).f_score(),
            overall_f_ensemble: pool(&ens_matches).f_score(),
            outliers_base: outliers.0,
            outliers_ensemble: outliers.1,
        });
    }
    Ok(DistillationReport {
        outlier_threshold,
        rows,
        summary,
    })
}
