//! Mini-batch training loop shared by the three objectives: seeded shuffling,
//! Adam updates, plateau-driven learning-rate decay, per-epoch validation
//! retrieval, and best-epoch checkpoint selection.

use super::loss::{cae_segment_loss, cse_batch_loss, pge_segment_loss, register_model, CsePair};
use super::{embed_set, DistanceConvention, EncoderError, EncoderModel, Objective, Vocab};
use crate::corpus::{pair_same_type, Corpus, SegmentRecord, Split};
use crate::eval::{map_same_different, EvalSet, RelevanceMode};
use crate::features::FeatureSequence;
use crate::nncore::{reduce_lr_on_plateau, Adam, AdamConfig, NodeId, Rng, Tape, Tensor};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Training hyperparameters. Defaults are the desk-scale profile; the sizes
/// used in the source experiments are available via `paper_scale`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub seed: u64,
    pub hidden: usize,
    pub layers: usize,
    pub margin: f64,
    pub distance: DistanceConvention,
    /// Divide each segment's loss by its decoder step count before batch
    /// averaging (off: per-segment sums are averaged as-is).
    pub per_step_mean: bool,
    /// Prefer a different-speaker rendition when drawing positives.
    pub different_speaker_pairs: bool,
    /// Relevance regime for the per-epoch validation retrieval.
    pub relevance_mode: RelevanceMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            learning_rate: 1e-3,
            plateau_factor: 0.5,
            plateau_patience: 10,
            seed: 0,
            hidden: 64,
            layers: 2,
            margin: 0.25,
            distance: DistanceConvention::HalfOneMinusCos,
            per_step_mean: false,
            different_speaker_pairs: true,
            relevance_mode: RelevanceMode::SameWordDifferentSpeaker,
        }
    }
}

impl TrainConfig {
    /// The full-size profile from the source experiments: 100 epochs, batch
    /// 256, hidden size 512 (1024-dimensional embeddings).
    pub fn paper_scale() -> Self {
        Self {
            epochs: 100,
            batch_size: 256,
            hidden: 512,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |msg: &str| Err(EncoderError::BadConfig(msg.into()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive and finite");
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad("plateau factor must lie in (0, 1)");
        }
        if self.plateau_patience == 0 {
            return bad("plateau patience must be at least 1");
        }
        if self.hidden == 0 || self.layers == 0 {
            return bad("hidden size and layer count must be at least 1");
        }
        if !(self.margin >= 0.0) {
            return bad("margin must be non-negative");
        }
        Ok(())
    }
}

/// One epoch's record: mean per-item training loss, validation retrieval
/// score, and the learning rate the epoch ran at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_map: f64,
    pub learning_rate: f64,
}

fn numeric(epoch: usize, batch: usize, err: impl std::fmt::Display) -> EncoderError {
    EncoderError::NumericFailure {
        epoch,
        batch,
        message: err.to_string(),
    }
}

/// Trains an encoder under `objective` on the corpus's train split,
/// evaluating retrieval on the validation split after every epoch. Returns
/// the model from the epoch with the best validation score (earlier epoch on
/// ties) together with the full epoch history.
pub fn train(
    objective: Objective,
    corpus: &Corpus,
    features: &BTreeMap<String, FeatureSequence>,
    config: &TrainConfig,
) -> Result<(EncoderModel, Vec<EpochStats>), EncoderError> {
    config.validate()?;
    let train: Vec<SegmentRecord> = corpus
        .split_records(Split::Train)
        .into_iter()
        .cloned()
        .collect();
    let val: Vec<SegmentRecord> = corpus
        .split_records(Split::Validation)
        .into_iter()
        .cloned()
        .collect();
    if train.is_empty() {
        return Err(EncoderError::EmptySplit("train"));
    }
    if val.is_empty() {
        return Err(EncoderError::EmptySplit("validation"));
    }

    let feat = |id: &str| -> Result<&FeatureSequence, EncoderError> {
        features
            .get(id)
            .ok_or_else(|| EncoderError::MissingFeatures(id.to_string()))
    };
    let mut input_dim = 0usize;
    for record in train.iter().chain(val.iter()) {
        let f = feat(&record.id)?;
        if input_dim == 0 {
            input_dim = f.dim();
        } else if f.dim() != input_dim {
            return Err(EncoderError::Dim {
                what: "feature sequence",
                expected: input_dim,
                got: f.dim(),
            });
        }
    }

    let vocab = match objective {
        Objective::Pge => Some(Vocab::from_phones(
            corpus
                .segments
                .iter()
                .flat_map(|r| r.phones.iter().copied()),
        )),
        _ => None,
    };
    let rng = Rng::new(config.seed);
    let mut model = EncoderModel::init(
        objective,
        corpus.language(),
        input_dim,
        config.hidden,
        config.layers,
        vocab,
        config.margin,
        config.distance,
        &mut rng.derive("init"),
    )?;
    let specs = model.param_specs();
    let mut adam = Adam::new(
        AdamConfig {
            lr: config.learning_rate,
            ..AdamConfig::default()
        },
        &specs,
    );

    let by_id: BTreeMap<&str, &SegmentRecord> =
        train.iter().map(|r| (r.id.as_str(), r)).collect();
    let val_stimuli: Vec<(String, FeatureSequence)> = val
        .iter()
        .map(|r| Ok((r.id.clone(), feat(&r.id)?.clone())))
        .collect::<Result<_, EncoderError>>()?;
    let val_words: Vec<String> = val.iter().map(|r| r.word.clone()).collect();
    let val_speakers: Vec<String> = val.iter().map(|r| r.speaker.clone()).collect();

    let mut stats: Vec<EpochStats> = Vec::with_capacity(config.epochs);
    let mut val_history: Vec<f64> = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, EncoderModel)> = None;

    for epoch in 0..config.epochs {
        if !val_history.is_empty() {
            let lr = reduce_lr_on_plateau(
                &val_history,
                config.learning_rate,
                config.plateau_factor,
                config.plateau_patience,
            )?;
            adam.set_learning_rate(lr);
        }
        let epoch_lr = adam.learning_rate();

        let mut loss_sum = 0.0;
        let mut items = 0usize;
        let run_batch = |model: &mut EncoderModel,
                         adam: &mut Adam,
                         batch_index: usize,
                         build: &dyn Fn(
            &mut Tape,
            &super::loss::TapedModel,
            &EncoderModel,
        ) -> Result<(NodeId, usize), EncoderError>|
         -> Result<(f64, usize), EncoderError> {
            let mut tape = Tape::new();
            let taped = register_model(&mut tape, model);
            let (node, count) = build(&mut tape, &taped, model).map_err(|e| match e {
                EncoderError::Nn(inner) => numeric(epoch, batch_index, inner),
                other => other,
            })?;
            let value = tape.value(node).data()[0];
            if !value.is_finite() {
                return Err(numeric(epoch, batch_index, "loss is not finite"));
            }
            let mut grads = tape
                .backward(node)
                .map_err(|e| numeric(epoch, batch_index, e))?;
            let grad_tensors: Vec<Tensor> = taped
                .params
                .iter()
                .zip(&specs)
                .map(|(&id, (_, shape))| {
                    grads
                        .take(id)
                        .unwrap_or_else(|| Tensor::zeros(shape.clone()))
                })
                .collect();
            let grad_refs: Vec<&Tensor> = grad_tensors.iter().collect();
            let mut param_refs = model.params_mut();
            adam.step(&mut param_refs, &grad_refs)
                .map_err(|e| numeric(epoch, batch_index, e))?;
            Ok((value, count))
        };

        match objective {
            Objective::Pge => {
                let mut order: Vec<usize> = (0..train.len()).collect();
                rng.derive_indexed("epoch-order", epoch as u64)
                    .shuffle(&mut order);
                for (batch_index, chunk) in order.chunks(config.batch_size).enumerate() {
                    let records: Vec<&SegmentRecord> = chunk.iter().map(|&i| &train[i]).collect();
                    let seqs: Vec<&FeatureSequence> = records
                        .iter()
                        .map(|r| feat(&r.id))
                        .collect::<Result<_, _>>()?;
                    let (value, count) =
                        run_batch(&mut model, &mut adam, batch_index, &|tape, taped, model| {
                            let mut terms = Vec::with_capacity(records.len());
                            for (record, seq) in records.iter().zip(&seqs) {
                                let (node, steps) =
                                    pge_segment_loss(tape, taped, model, seq, &record.phones)?;
                                terms.push(if config.per_step_mean {
                                    tape.affine(node, 1.0 / steps as f64, 0.0)?
                                } else {
                                    node
                                });
                            }
                            let total = tape.add_n(&terms)?;
                            let mean = tape.affine(total, 1.0 / terms.len() as f64, 0.0)?;
                            Ok((mean, terms.len()))
                        })?;
                    loss_sum += value * count as f64;
                    items += count;
                }
            }
            Objective::Cae | Objective::Cse => {
                let mut pair_rng = rng.derive_indexed("pairs", epoch as u64);
                let mut pairs = pair_same_type(&train, config.different_speaker_pairs, &mut pair_rng);
                pair_rng.shuffle(&mut pairs);
                if pairs.is_empty() {
                    return Err(EncoderError::BadConfig(
                        "training split has no same-word pairs".into(),
                    ));
                }
                for (batch_index, chunk) in pairs.chunks(config.batch_size).enumerate() {
                    let resolved: Vec<(&SegmentRecord, &FeatureSequence, &FeatureSequence)> =
                        chunk
                            .iter()
                            .map(|(a, b)| {
                                let record = by_id.get(a.as_str()).ok_or_else(|| {
                                    EncoderError::MissingFeatures(a.clone())
                                })?;
                                Ok((*record, feat(a)?, feat(b)?))
                            })
                            .collect::<Result<_, EncoderError>>()?;
                    if objective == Objective::Cse {
                        let cse_pairs: Vec<CsePair<'_>> = resolved
                            .iter()
                            .map(|(record, anchor, positive)| CsePair {
                                word: record.word.as_str(),
                                anchor,
                                positive,
                            })
                            .collect();
                        if cse_pairs.len() < 2 {
                            continue;
                        }
                        let first = cse_pairs[0].word;
                        if cse_pairs.iter().all(|p| p.word == first) {
                            continue;
                        }
                        let (value, count) = run_batch(
                            &mut model,
                            &mut adam,
                            batch_index,
                            &|tape, taped, model| {
                                let node = cse_batch_loss(tape, taped, model, &cse_pairs)?;
                                Ok((node, cse_pairs.len()))
                            },
                        )?;
                        loss_sum += value * count as f64;
                        items += count;
                    } else {
                        let (value, count) = run_batch(
                            &mut model,
                            &mut adam,
                            batch_index,
                            &|tape, taped, model| {
                                let mut terms = Vec::with_capacity(resolved.len());
                                for (_, anchor, positive) in &resolved {
                                    let (node, steps) =
                                        cae_segment_loss(tape, taped, model, anchor, positive)?;
                                    terms.push(if config.per_step_mean {
                                        tape.affine(node, 1.0 / steps as f64, 0.0)?
                                    } else {
                                        node
                                    });
                                }
                                let total = tape.add_n(&terms)?;
                                let mean =
                                    tape.affine(total, 1.0 / terms.len() as f64, 0.0)?;
                                Ok((mean, terms.len()))
                            },
                        )?;
                        loss_sum += value * count as f64;
                        items += count;
                    }
                }
            }
        }
        if items == 0 {
            return Err(EncoderError::BadConfig(
                "every batch this epoch was degenerate (single word type)".into(),
            ));
        }

        let matrix = embed_set(&model, &val_stimuli, corpus.language())?;
        let val_set = EvalSet::new(matrix, val_words.clone(), val_speakers.clone())
            .map_err(|e| EncoderError::Eval(e.to_string()))?;
        let score = map_same_different(&val_set, config.relevance_mode)
            .map_err(|e| EncoderError::Eval(e.to_string()))?;
        val_history.push(score.map);
        stats.push(EpochStats {
            epoch,
            train_loss: loss_sum / items as f64,
            val_map: score.map,
            learning_rate: epoch_lr,
        });
        let improved = best.as_ref().map_or(true, |(b, _)| score.map > *b);
        if improved {
            best = Some((score.map, model.clone()));
        }
    }

    let (_, best_model) = best.expect("at least one epoch ran");
    Ok((best_model, stats))
}
