//! The pool-based active-learning loop and the comparison against random
//! selection.

use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::metrics::{accuracy, weighted_f1};
use super::report::occurrence_report;
use super::result::{
    BaselineCurve, Checkpoint, RunResult, SelectedItem, SignificanceReport, TrainingSummary, RESULT_VERSION,
};
use super::train::{train_frames, train_sequences, LabeledSequence, TrainConfig, TrainOutcome};
use super::wilcoxon::wilcoxon_signed_rank;
use crate::acquisition::{acquire, rank_pool, AcquisitionKind, ScoredItem};
use crate::bayes::{mc_forward, mc_forward_sequences, posterior_mean};
use crate::data::{
    generate_multilabel, generate_phases, load_dataset, Dataset, FrameLabel, MultiLabelTaskSpec, OracleReplay,
    PhaseTaskSpec, TaskKind, Video,
};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, Head, NetworkSpec, ParameterStore};
use crate::pool::{score_group, ItemId, Pool};
use crate::rng::{self, domain};

/// Loads `config.dataset`, or generates the default synthetic task for
/// `config.task` from `config.data_seed`.
pub fn load_or_generate(config: &ExperimentConfig) -> Result<Dataset> {
    let dataset = match &config.dataset {
        Some(path) => load_dataset(path)?,
        None => match config.task {
            TaskKind::MultiLabel => generate_multilabel(&MultiLabelTaskSpec::desk_scale(), config.data_seed)?,
            TaskKind::Phase => generate_phases(&PhaseTaskSpec::desk_scale(), config.data_seed)?,
        },
    };
    if dataset.task != config.task {
        return Err(Error::Config(format!(
            "config task is {} but the dataset holds a {} task",
            config.task, dataset.task
        )));
    }
    Ok(dataset)
}

/// Network used for `task`: a frame classifier with a sigmoid head for
/// multilabel data, a recurrent classifier with a softmax head for phases.
pub fn network_for(config: &ExperimentConfig, dataset: &Dataset) -> Result<NetworkSpec> {
    match config.task {
        TaskKind::MultiLabel => {
            NetworkSpec::frame_classifier(dataset.features, dataset.classes, config.dropout, Head::Sigmoid)
        }
        TaskKind::Phase => {
            NetworkSpec::sequence_classifier(dataset.features, dataset.classes, config.dropout, Head::Softmax)
        }
    }
}

pub fn run_active_learning(config: &ExperimentConfig) -> Result<RunResult> {
    let dataset = load_or_generate(config)?;
    run_on_dataset(config, &dataset)
}

fn stack_frames<'a>(rows: impl Iterator<Item = ArrayView2<'a, f64>>, features: usize) -> Result<Array2<f64>> {
    let views: Vec<ArrayView2<'a, f64>> = rows.collect();
    if views.is_empty() {
        return Ok(Array2::zeros((0, features)));
    }
    ndarray::concatenate(Axis(0), &views).map_err(|e| Error::Data(format!("stacking frames: {e}")))
}

fn multi_target(labels: &[&FrameLabel], classes: usize) -> Array2<f64> {
    let mut y = Array2::zeros((labels.len(), classes));
    for (i, l) in labels.iter().enumerate() {
        for c in 0..classes {
            if l.has_class(c) {
                y[[i, c]] = 1.0;
            }
        }
    }
    y
}

fn phase_index(label: &FrameLabel) -> Result<usize> {
    match label {
        FrameLabel::Phase(p) => Ok(*p),
        FrameLabel::Multi(_) => Err(Error::Data("phase task holds a multilabel frame".into())),
    }
}

/// Turns the mean posterior of a frame into a hard label.
fn decide(head: Head, mean: ndarray::ArrayView1<f64>) -> FrameLabel {
    match head {
        Head::Sigmoid => FrameLabel::Multi(mean.iter().map(|&p| u8::from(p >= 0.5)).collect()),
        Head::Softmax => {
            let mut best = 0;
            for (i, &p) in mean.iter().enumerate() {
                if p > mean[best] {
                    best = i;
                }
            }
            FrameLabel::Phase(best)
        }
    }
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    dataset: &'a Dataset,
    train: &'a [Video],
    test: &'a [Video],
    spec: NetworkSpec,
    train_cfg: TrainConfig,
}

impl Context<'_> {
    fn train(&self, pool: &Pool) -> Result<TrainOutcome> {
        match self.config.task {
            TaskKind::MultiLabel => {
                let mut rows = Vec::new();
                let mut labels = Vec::new();
                for (v, video) in self.train.iter().enumerate() {
                    for (f, label) in pool.revealed(v).iter().enumerate() {
                        if let Some(l) = label {
                            rows.push(video.features.slice(ndarray::s![f..f + 1, ..]));
                            labels.push(l);
                        }
                    }
                }
                let x = stack_frames(rows.into_iter(), self.dataset.features)?;
                let y = multi_target(&labels, self.dataset.classes);
                train_frames(&self.spec, &x, &y, &self.train_cfg)
            }
            TaskKind::Phase => {
                let mut data = Vec::new();
                for (v, video) in self.train.iter().enumerate() {
                    let labels = pool
                        .revealed(v)
                        .iter()
                        .map(|l| l.as_ref().map(phase_index).transpose())
                        .collect::<Result<Vec<_>>>()?;
                    data.push(LabeledSequence {
                        features: video.features.view(),
                        labels,
                    });
                }
                train_sequences(&self.spec, &data, &self.train_cfg)
            }
        }
    }

    fn evaluate(&self, params: &ParameterStore, round: usize) -> Result<(Vec<FrameLabel>, Vec<FrameLabel>)> {
        let seed = rng::hash_key(&[domain::EVAL_DROPOUT, self.config.init_seed, round as u64]);
        let passes = self.config.mc_passes;
        let truth: Vec<FrameLabel> = self.test.iter().flat_map(|v| v.labels.iter().cloned()).collect();
        let pred = if self.spec.is_recurrent() {
            let views: Vec<ArrayView2<'_, f64>> = self.test.iter().map(|v| v.features.view()).collect();
            let post = mc_forward_sequences(&self.spec, params, &views, passes, seed)?;
            let mut pred = Vec::with_capacity(truth.len());
            for p in &post {
                let mean = p.mean();
                pred.extend(mean.rows().into_iter().map(|r| decide(self.spec.head, r)));
            }
            pred
        } else {
            let x = stack_frames(self.test.iter().map(|v| v.features.view()), self.dataset.features)?;
            mc_forward(&self.spec, params, &x, passes, seed)?
                .iter()
                .map(|s| decide(self.spec.head, posterior_mean(s).view()))
                .collect()
        };
        Ok((pred, truth))
    }

    /// Per-item acquisition scores from T stochastic passes of `params`.
    fn score(&self, pool: &Pool, params: &ParameterStore, round: usize) -> Result<Vec<ScoredItem>> {
        let unlabeled: Vec<ItemId> = pool.unlabeled().collect();
        let kind = self.config.acquisition;
        if kind == AcquisitionKind::Random {
            return Ok(unlabeled
                .into_iter()
                .map(|id| ScoredItem {
                    id,
                    score: 0.0,
                    per_class: None,
                })
                .collect());
        }
        let seed = rng::hash_key(&[domain::DROPOUT, self.config.mc_seed, round as u64]);
        let passes = self.config.mc_passes;
        let agg = self.config.aggregation;

        // frame scores for every video that still holds unlabeled items
        let mut videos: Vec<usize> = unlabeled
            .iter()
            .map(|&id| pool.item(id).map(|it| it.segment.video))
            .collect::<Result<_>>()?;
        videos.dedup();
        let mut frame_scores: Vec<Vec<f64>> = vec![Vec::new(); self.train.len()];
        if self.spec.is_recurrent() {
            let views: Vec<ArrayView2<'_, f64>> = videos.iter().map(|&v| self.train[v].features.view()).collect();
            let post = mc_forward_sequences(&self.spec, params, &views, passes, seed)?;
            for (&v, p) in videos.iter().zip(&post) {
                frame_scores[v] = (0..p.len())
                    .map(|t| acquire(&p.frame(t), kind).reduce(agg))
                    .collect::<Result<_>>()?;
            }
        } else {
            // only unlabeled frames need a forward pass
            let mut rows = Vec::new();
            let mut owners = Vec::new();
            for &id in &unlabeled {
                let seg = pool.item(id)?.segment;
                rows.push(
                    self.train[seg.video]
                        .features
                        .slice(ndarray::s![seg.start..seg.end, ..]),
                );
                owners.push(seg);
            }
            let x = stack_frames(rows.into_iter(), self.dataset.features)?;
            let post = mc_forward(&self.spec, params, &x, passes, seed)?;
            let scores: Vec<f64> = post
                .iter()
                .map(|s| acquire(s, kind).reduce(agg))
                .collect::<Result<_>>()?;
            for v in &videos {
                frame_scores[*v] = vec![f64::NAN; self.train[*v].len()];
            }
            let mut k = 0;
            for seg in owners {
                let len = seg.end - seg.start;
                frame_scores[seg.video][seg.start..seg.end].copy_from_slice(&scores[k..k + len]);
                k += len;
            }
        }
        unlabeled
            .into_iter()
            .map(|id| {
                let seg = pool.item(id)?.segment;
                let score = score_group(&frame_scores[seg.video][seg.start..seg.end], agg)?;
                if !score.is_finite() {
                    return Err(Error::NonFinite(format!("acquisition score of item {id} is {score}")));
                }
                Ok(ScoredItem {
                    id,
                    score,
                    per_class: None,
                })
            })
            .collect()
    }
}

fn reveal(pool: &mut Pool, oracle: &OracleReplay, train: &[Video], items: &[ItemId]) -> Result<Vec<SelectedItem>> {
    let mut labels = Vec::with_capacity(items.len());
    let mut selected = Vec::with_capacity(items.len());
    for &id in items {
        let seg = pool.item(id)?.segment;
        let video = train[seg.video].id;
        labels.push(oracle.label_range(video, seg.start, seg.end)?);
        selected.push(SelectedItem {
            item: id.0,
            video,
            start: seg.start,
            end: seg.end,
        });
    }
    pool.apply_annotations(items, labels)?;
    Ok(selected)
}

/// Runs the full loop on `dataset`: label the initial videos, then alternate
/// retraining from scratch, evaluation and acquisition until the final
/// fraction is reached or the pool is exhausted.
pub fn run_on_dataset(config: &ExperimentConfig, dataset: &Dataset) -> Result<RunResult> {
    let started = Instant::now();
    config.validate()?;
    dataset.validate()?;
    if dataset.task != config.task {
        return Err(Error::Config(format!(
            "config task is {} but the dataset holds a {} task",
            config.task, dataset.task
        )));
    }
    let (train, test) = dataset.split();
    if train.is_empty() || test.is_empty() {
        return Err(Error::Data("need at least one training and one test video".into()));
    }
    let ctx = Context {
        config,
        dataset,
        train,
        test,
        spec: network_for(config, dataset)?,
        train_cfg: TrainConfig {
            epochs: config.epochs,
            cost_threshold: config.cost_threshold,
            batch_size: config.batch_size,
            adam: AdamConfig {
                lr: config.learning_rate,
                weight_decay: config.weight_decay,
                ..AdamConfig::default()
            },
            init_seed: config.init_seed,
            class_weighting: config.class_weighting,
        },
    };
    let lengths: Vec<usize> = train.iter().map(Video::len).collect();
    let mut pool = Pool::new(&lengths, config.granularity, config.segment_length)?;
    let oracle = OracleReplay::new(dataset);
    let total = pool.total_frames();
    let step_frames = ((config.step_fraction * total as f64).ceil() as usize).max(1);

    // initial set: whole videos in id order until the initial fraction is met
    let target = (config.initial_fraction * total as f64).ceil() as usize;
    let mut initial_videos = Vec::new();
    let mut covered = 0;
    for (v, &len) in lengths.iter().enumerate() {
        if covered >= target {
            break;
        }
        initial_videos.push(v);
        covered += len;
    }

    let mut checkpoints = Vec::new();
    let mut exhausted = false;
    let mut model: Option<ParameterStore> = None;
    for (round, &nominal) in config.schedule().iter().enumerate() {
        let selected = if round == 0 {
            let items = pool.items_in_videos(&initial_videos);
            reveal(&mut pool, &oracle, train, &items)?
        } else {
            if pool.unlabeled_count() == 0 {
                exhausted = true;
                break;
            }
            let params = model.as_ref().expect("a model is trained every round");
            let scored = ctx.score(&pool, params, round)?;
            let seed = rng::hash_key(&[config.mc_seed, round as u64]);
            let ranked = rank_pool(&scored, config.acquisition, seed);
            let selection = pool.select_next(&ranked, step_frames)?;
            exhausted |= selection.exhausted;
            reveal(&mut pool, &oracle, train, &selection.items)?
        };

        let outcome = ctx.train(&pool)?;
        let (pred, truth) = ctx.evaluate(&outcome.params, round)?;
        let f1 = weighted_f1(&pred, &truth, dataset.classes)?;
        checkpoints.push(Checkpoint {
            round,
            nominal_fraction: nominal,
            annotated_fraction: pool.annotated_fraction(),
            annotated_frames: pool.annotated_frames(),
            weighted_f1: f1.weighted,
            accuracy: accuracy(&pred, &truth)?,
            per_class_f1: f1.per_class,
            selected,
            occurrence: occurrence_report(&pool, train, dataset.classes),
            training: TrainingSummary {
                epochs: outcome.epochs,
                final_cost: outcome.final_cost.is_finite().then_some(outcome.final_cost),
                stop: outcome.stop,
            },
        });
        model = Some(outcome.params);
        if exhausted {
            break;
        }
    }
    Ok(RunResult {
        version: RESULT_VERSION,
        method: config.method_label(),
        config: config.clone(),
        checkpoints,
        exhausted,
        significance: None,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Selection seed of random-baseline repetition `rep`.
pub fn baseline_seed(config: &ExperimentConfig, rep: usize) -> u64 {
    rng::hash_key(&[domain::RANDOM_ACQUISITION, config.mc_seed, rep as u64 + 1])
}

/// Config of random-baseline repetition `rep`: same data, init and budget
/// schedule, random acquisition with its own seed.
pub fn baseline_config(config: &ExperimentConfig, rep: usize) -> ExperimentConfig {
    ExperimentConfig {
        acquisition: AcquisitionKind::Random,
        mc_seed: baseline_seed(config, rep),
        ..config.clone()
    }
}

/// Pairs the method curve with the per-checkpoint mean of the baseline
/// curves and runs the signed-rank test on weighted F1.
pub fn compare_runs(method: &RunResult, baselines: &[RunResult]) -> Result<SignificanceReport> {
    if baselines.is_empty() {
        return Err(Error::InvalidArgument("need at least one baseline run".into()));
    }
    let n = baselines
        .iter()
        .map(|b| b.checkpoints.len())
        .chain(std::iter::once(method.checkpoints.len()))
        .min()
        .unwrap_or(0);
    let fractions: Vec<f64> = method.checkpoints[..n].iter().map(|c| c.nominal_fraction).collect();
    for b in baselines {
        for (c, &f) in b.checkpoints[..n].iter().zip(&fractions) {
            if c.nominal_fraction != f {
                return Err(Error::InvalidArgument(format!(
                    "checkpoint fractions differ: {} vs {f}",
                    c.nominal_fraction
                )));
            }
        }
    }
    let mean_curve = |curve: fn(&RunResult) -> Vec<f64>| -> Vec<f64> {
        let mut acc = vec![0.0; n];
        for b in baselines {
            for (a, v) in acc.iter_mut().zip(curve(b)) {
                *a += v;
            }
        }
        acc.iter().map(|a| a / baselines.len() as f64).collect()
    };
    let baseline_f1 = mean_curve(RunResult::f1_curve);
    let baseline_accuracy = mean_curve(RunResult::accuracy_curve);
    let method_f1: Vec<f64> = method.f1_curve()[..n].to_vec();
    let test = wilcoxon_signed_rank(&method_f1, &baseline_f1)?;
    Ok(SignificanceReport {
        method: method.method.clone(),
        pairing: "checkpoint (weighted F1)".into(),
        nominal_fractions: fractions,
        method_f1,
        baseline_f1,
        baseline_accuracy,
        baseline_runs: baselines
            .iter()
            .map(|b| BaselineCurve {
                mc_seed: b.config.mc_seed,
                weighted_f1: b.f1_curve()[..n].to_vec(),
                accuracy: b.accuracy_curve()[..n].to_vec(),
            })
            .collect(),
        test,
    })
}

/// Method run with its significance report filled in, plus the baseline runs.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub method: RunResult,
    pub baselines: Vec<RunResult>,
}

/// Runs the configured method once and the random baseline
/// `baseline_repetitions` times, concurrently, then compares them.
pub fn compare_to_random(config: &ExperimentConfig) -> Result<Comparison> {
    let dataset = load_or_generate(config)?;
    compare_on_dataset(config, &dataset)
}

pub fn compare_on_dataset(config: &ExperimentConfig, dataset: &Dataset) -> Result<Comparison> {
    if config.baseline_repetitions == 0 {
        return Err(Error::Config("baseline_repetitions must be >= 1".into()));
    }
    let mut configs = vec![config.clone()];
    configs.extend((0..config.baseline_repetitions).map(|r| baseline_config(config, r)));
    let mut runs: Vec<RunResult> = configs
        .par_iter()
        .map(|c| run_on_dataset(c, dataset))
        .collect::<Result<_>>()?;
    let baselines = runs.split_off(1);
    let mut method = runs.pop().expect("method run");
    method.significance = Some(compare_runs(&method, &baselines)?);
    Ok(Comparison { method, baselines })
}
