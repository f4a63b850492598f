//! Training objectives as differentiable graphs, plus value-level entry
//! points that score a model without computing gradients.

use super::{DistanceConvention, EncoderError, EncoderModel, Head};
use crate::features::FeatureSequence;
use crate::nncore::{gru_cell_step, GruCellNodes, NodeId, Tape, Tensor};
use crate::synthlang::PhoneId;

/// One contrastive training pair: two renditions of the same word type,
/// tagged with the word so mined negatives can exclude it.
#[derive(Debug, Clone, Copy)]
pub struct CsePair<'a> {
    pub word: &'a str,
    pub anchor: &'a FeatureSequence,
    pub positive: &'a FeatureSequence,
}

/// Model parameters registered on a tape. `params` lists every node in the
/// same order `EncoderModel::param_specs` reports, so gradients line up with
/// the optimizer state.
pub(crate) struct TapedModel {
    layers: Vec<(GruCellNodes, GruCellNodes)>,
    head_cell: Option<GruCellNodes>,
    proj: Option<(NodeId, NodeId)>,
    pub(crate) params: Vec<NodeId>,
}

fn push_cell_params(nodes: &GruCellNodes, out: &mut Vec<NodeId>) {
    for g in 0..3 {
        out.push(nodes.w[g]);
        out.push(nodes.u[g]);
        out.push(nodes.b[g]);
    }
}

pub(crate) fn register_model(tape: &mut Tape, model: &EncoderModel) -> TapedModel {
    let mut params = Vec::new();
    let layers: Vec<(GruCellNodes, GruCellNodes)> = model
        .layers
        .iter()
        .map(|layer| {
            let fwd = layer.fwd.register(tape);
            let bwd = layer.bwd.register(tape);
            push_cell_params(&fwd, &mut params);
            push_cell_params(&bwd, &mut params);
            (fwd, bwd)
        })
        .collect();
    let (head_cell, proj) = match &model.head {
        Head::Phone {
            cell, proj_w, proj_b, ..
        }
        | Head::Spectral {
            cell, proj_w, proj_b,
        } => {
            let cell_nodes = cell.register(tape);
            push_cell_params(&cell_nodes, &mut params);
            let w = tape.param(proj_w.clone());
            let b = tape.param(proj_b.clone());
            params.push(w);
            params.push(b);
            (Some(cell_nodes), Some((w, b)))
        }
        Head::None => (None, None),
    };
    TapedModel {
        layers,
        head_cell,
        proj,
        params,
    }
}

/// Runs the bidirectional encoder on the tape and returns the embedding node.
pub(crate) fn encode_on_tape(
    tape: &mut Tape,
    taped: &TapedModel,
    model: &EncoderModel,
    seq: &FeatureSequence,
) -> Result<NodeId, EncoderError> {
    if seq.dim() != model.input_dim {
        return Err(EncoderError::Dim {
            what: "feature sequence",
            expected: model.input_dim,
            got: seq.dim(),
        });
    }
    let h = model.hidden;
    let mut inputs: Vec<NodeId> = seq
        .frames()
        .map(|frame| tape.input(Tensor::vector(frame.to_vec())))
        .collect();
    let mut last_fwd = inputs[0];
    let mut first_bwd = inputs[0];
    for (fwd, bwd) in &taped.layers {
        let mut fwd_states = Vec::with_capacity(inputs.len());
        let mut state = tape.input(Tensor::zeros(vec![h]));
        for &x in &inputs {
            state = gru_cell_step(tape, fwd, x, state)?;
            fwd_states.push(state);
        }
        let mut bwd_states = Vec::with_capacity(inputs.len());
        state = tape.input(Tensor::zeros(vec![h]));
        for &x in inputs.iter().rev() {
            state = gru_cell_step(tape, bwd, x, state)?;
            bwd_states.push(state);
        }
        bwd_states.reverse();
        last_fwd = *fwd_states.last().expect("non-empty sequence");
        first_bwd = bwd_states[0];
        inputs = fwd_states
            .iter()
            .zip(&bwd_states)
            .map(|(&f, &b)| tape.concat(f, b))
            .collect::<Result<_, _>>()?;
    }
    Ok(tape.concat(last_fwd, first_bwd)?)
}

fn head_nodes(taped: &TapedModel) -> Result<(&GruCellNodes, NodeId, NodeId), EncoderError> {
    match (&taped.head_cell, &taped.proj) {
        (Some(cell), Some((w, b))) => Ok((cell, *w, *b)),
        _ => Err(EncoderError::BadConfig(
            "objective requires a decoder head but the model has none".into(),
        )),
    }
}

/// Teacher-forced phone-decoder loss for one segment: the decoder starts from
/// the embedding, consumes [BOS, phones...] one-hot with the embedding
/// concatenated at every step, and pays summed cross-entropy against
/// [phones..., EOS]. Returns the loss node and the step count.
pub(crate) fn pge_segment_loss(
    tape: &mut Tape,
    taped: &TapedModel,
    model: &EncoderModel,
    seq: &FeatureSequence,
    phones: &[PhoneId],
) -> Result<(NodeId, usize), EncoderError> {
    let vocab = match &model.head {
        Head::Phone { vocab, .. } => vocab,
        _ => {
            return Err(EncoderError::BadConfig(
                "phone loss needs a phone-decoder head".into(),
            ))
        }
    };
    if phones.is_empty() {
        return Err(EncoderError::BadConfig(
            "cannot decode an empty phone sequence".into(),
        ));
    }
    let v = vocab.size();
    let mut symbols = Vec::with_capacity(phones.len() + 2);
    symbols.push(vocab.bos());
    for phone in phones {
        symbols.push(
            vocab
                .index(*phone)
                .ok_or(EncoderError::UnknownPhone(*phone))?,
        );
    }
    symbols.push(vocab.eos());

    let (cell, proj_w, proj_b) = head_nodes(taped)?;
    let x = encode_on_tape(tape, taped, model, seq)?;
    let mut state = x;
    let mut terms = Vec::with_capacity(symbols.len() - 1);
    for step in 0..symbols.len() - 1 {
        let mut onehot = vec![0.0; v];
        onehot[symbols[step]] = 1.0;
        let prev = tape.input(Tensor::vector(onehot));
        let input = tape.concat(prev, x)?;
        state = gru_cell_step(tape, cell, input, state)?;
        let affine = tape.matvec(proj_w, state)?;
        let logits = tape.add(affine, proj_b)?;
        let logp = tape.log_softmax(logits)?;
        let picked = tape.pick(logp, symbols[step + 1])?;
        terms.push(tape.affine(picked, -1.0, 0.0)?);
    }
    let steps = terms.len();
    let loss = tape.add_n(&terms)?;
    Ok((loss, steps))
}

/// Teacher-forced spectral reconstruction loss for one pair: encode the
/// anchor, then predict every frame of the positive from the previous
/// ground-truth frame (zeros at the first step) with the embedding
/// concatenated at every step. Summed squared error; returns the loss node
/// and the step count.
pub(crate) fn cae_segment_loss(
    tape: &mut Tape,
    taped: &TapedModel,
    model: &EncoderModel,
    anchor: &FeatureSequence,
    positive: &FeatureSequence,
) -> Result<(NodeId, usize), EncoderError> {
    if !matches!(model.head, Head::Spectral { .. }) {
        return Err(EncoderError::BadConfig(
            "spectral loss needs a spectral-decoder head".into(),
        ));
    }
    if positive.dim() != model.input_dim {
        return Err(EncoderError::Dim {
            what: "reconstruction target",
            expected: model.input_dim,
            got: positive.dim(),
        });
    }
    let (cell, proj_w, proj_b) = head_nodes(taped)?;
    let x = encode_on_tape(tape, taped, model, anchor)?;
    let mut state = x;
    let k = model.input_dim;
    let mut prev = tape.input(Tensor::zeros(vec![k]));
    let mut terms = Vec::with_capacity(positive.num_frames());
    for frame in positive.frames() {
        let input = tape.concat(prev, x)?;
        state = gru_cell_step(tape, cell, input, state)?;
        let affine = tape.matvec(proj_w, state)?;
        let pred = tape.add(affine, proj_b)?;
        let target = tape.input(Tensor::vector(frame.to_vec()));
        let diff = tape.sub(pred, target)?;
        terms.push(tape.dot(diff, diff)?);
        prev = target;
    }
    let steps = terms.len();
    let loss = tape.add_n(&terms)?;
    Ok((loss, steps))
}

fn taped_distance(
    tape: &mut Tape,
    a: NodeId,
    b: NodeId,
    convention: DistanceConvention,
) -> Result<NodeId, crate::nncore::NnError> {
    let ab = tape.dot(a, b)?;
    let aa = tape.dot(a, a)?;
    let bb = tape.dot(b, b)?;
    let na = tape.sqrt(aa)?;
    let nb = tape.sqrt(bb)?;
    let denom = tape.mul(na, nb)?;
    let cos = tape.div(ab, denom)?;
    let (mul, add) = convention.affine();
    tape.affine(cos, mul, add)
}

/// The margin hinge on published distances: `max(0, margin + d_pos − d_neg)`.
pub fn triplet_hinge(margin: f64, d_pos: f64, d_neg: f64) -> f64 {
    (margin + d_pos - d_neg).max(0.0)
}

/// Hardest in-batch negative for each anchor. Candidates are every anchor
/// followed by every positive (so candidate index `B + i` is positive `i`);
/// for anchor `i` the winner is the candidate with a different word type at
/// minimal distance, ties broken by the smaller candidate index.
pub fn cse_mined_negatives(
    words: &[&str],
    anchors: &[Vec<f64>],
    positives: &[Vec<f64>],
    convention: DistanceConvention,
) -> Result<Vec<usize>, EncoderError> {
    let b = words.len();
    if anchors.len() != b || positives.len() != b {
        return Err(EncoderError::BadConfig(
            "words, anchors, and positives must have equal length".into(),
        ));
    }
    if b < 2 {
        return Err(EncoderError::BatchTooSmall(b));
    }
    let candidate = |j: usize| -> &Vec<f64> {
        if j < b {
            &anchors[j]
        } else {
            &positives[j - b]
        }
    };
    let mut picks = Vec::with_capacity(b);
    for i in 0..b {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..2 * b {
            if words[j % b] == words[i] {
                continue;
            }
            let d = convention.distance(&anchors[i], candidate(j))?;
            let better = match best {
                None => true,
                Some((bd, bj)) => d < bd || (d == bd && j < bj),
            };
            if better {
                best = Some((d, j));
            }
        }
        match best {
            Some((_, j)) => picks.push(j),
            None => return Err(EncoderError::SingleWordType),
        }
    }
    Ok(picks)
}

/// Contrastive batch loss: embed every anchor and positive, mine the hardest
/// in-batch negative per anchor on the current embedding values, and average
/// the margin hinge over anchors.
pub(crate) fn cse_batch_loss(
    tape: &mut Tape,
    taped: &TapedModel,
    model: &EncoderModel,
    pairs: &[CsePair<'_>],
) -> Result<NodeId, EncoderError> {
    let b = pairs.len();
    if b < 2 {
        return Err(EncoderError::BatchTooSmall(b));
    }
    let anchor_nodes = pairs
        .iter()
        .map(|p| encode_on_tape(tape, taped, model, p.anchor))
        .collect::<Result<Vec<_>, _>>()?;
    let positive_nodes = pairs
        .iter()
        .map(|p| encode_on_tape(tape, taped, model, p.positive))
        .collect::<Result<Vec<_>, _>>()?;
    let words: Vec<&str> = pairs.iter().map(|p| p.word).collect();
    let anchor_values: Vec<Vec<f64>> = anchor_nodes
        .iter()
        .map(|&id| tape.value(id).data().to_vec())
        .collect();
    let positive_values: Vec<Vec<f64>> = positive_nodes
        .iter()
        .map(|&id| tape.value(id).data().to_vec())
        .collect();
    let negatives = cse_mined_negatives(&words, &anchor_values, &positive_values, model.distance)?;

    let mut terms = Vec::with_capacity(b);
    for i in 0..b {
        let neg = if negatives[i] < b {
            anchor_nodes[negatives[i]]
        } else {
            positive_nodes[negatives[i] - b]
        };
        let d_ap = taped_distance(tape, anchor_nodes[i], positive_nodes[i], model.distance)?;
        let d_an = taped_distance(tape, anchor_nodes[i], neg, model.distance)?;
        let gap = tape.sub(d_ap, d_an)?;
        let shifted = tape.affine(gap, 1.0, model.margin)?;
        terms.push(tape.relu(shifted)?);
    }
    let total = tape.add_n(&terms)?;
    Ok(tape.affine(total, 1.0 / b as f64, 0.0)?)
}

fn scalar_value(tape: &Tape, id: NodeId) -> f64 {
    tape.value(id).data()[0]
}

fn value_and_gradient(
    model: &EncoderModel,
    tape: Tape,
    taped: &TapedModel,
    loss: NodeId,
) -> Result<(f64, Vec<f64>), EncoderError> {
    let value = scalar_value(&tape, loss);
    let mut grads = tape.backward(loss)?;
    let mut flat = Vec::new();
    let mut idx = 0usize;
    model.visit(&mut |_, tensor| {
        match grads.take(taped.params[idx]) {
            Some(g) => flat.extend_from_slice(g.data()),
            None => flat.extend(std::iter::repeat(0.0).take(tensor.len())),
        }
        idx += 1;
    });
    Ok((value, flat))
}

/// Phone-decoder loss of one segment, summed over decoder steps.
pub fn pge_loss(
    model: &EncoderModel,
    seq: &FeatureSequence,
    phones: &[PhoneId],
) -> Result<f64, EncoderError> {
    let mut tape = Tape::new();
    let taped = register_model(&mut tape, model);
    let (loss, _) = pge_segment_loss(&mut tape, &taped, model, seq, phones)?;
    Ok(scalar_value(&tape, loss))
}

/// Spectral reconstruction loss of one pair, summed over target frames.
pub fn cae_loss(
    model: &EncoderModel,
    anchor: &FeatureSequence,
    positive: &FeatureSequence,
) -> Result<f64, EncoderError> {
    let mut tape = Tape::new();
    let taped = register_model(&mut tape, model);
    let (loss, _) = cae_segment_loss(&mut tape, &taped, model, anchor, positive)?;
    Ok(scalar_value(&tape, loss))
}

/// Contrastive loss of one batch of same-word pairs, averaged over anchors.
pub fn cse_loss(model: &EncoderModel, pairs: &[CsePair<'_>]) -> Result<f64, EncoderError> {
    let mut tape = Tape::new();
    let taped = register_model(&mut tape, model);
    let loss = cse_batch_loss(&mut tape, &taped, model, pairs)?;
    Ok(scalar_value(&tape, loss))
}

/// Phone-decoder loss plus its gradient with respect to every parameter,
/// flattened in `param_specs` order: exactly what one optimizer step
/// differentiates.
pub fn pge_loss_with_gradient(
    model: &EncoderModel,
    seq: &FeatureSequence,
    phones: &[PhoneId],
) -> Result<(f64, Vec<f64>), EncoderError> {
    let mut tape = Tape::new();
    let taped = register_model(&mut tape, model);
    let (loss, _) = pge_segment_loss(&mut tape, &taped, model, seq, phones)?;
    value_and_gradient(model, tape, &taped, loss)
}

/// Spectral reconstruction loss plus its flat parameter gradient.
pub fn cae_loss_with_gradient(
    model: &EncoderModel,
    anchor: &FeatureSequence,
    positive: &FeatureSequence,
) -> Result<(f64, Vec<f64>), EncoderError> {
    let mut tape = Tape::new();
    let taped = register_model(&mut tape, model);
    let (loss, _) = cae_segment_loss(&mut tape, &taped, model, anchor, positive)?;
    value_and_gradient(model, tape, &taped, loss)
}

/// Contrastive batch loss plus its flat parameter gradient. Negatives are
/// mined on the current embeddings, so the gradient treats the selection as
/// fixed.
pub fn cse_loss_with_gradient(
    model: &EncoderModel,
    pairs: &[CsePair<'_>],
) -> Result<(f64, Vec<f64>), EncoderError> {
    let mut tape = Tape::new();
    let taped = register_model(&mut tape, model);
    let loss = cse_batch_loss(&mut tape, &taped, model, pairs)?;
    value_and_gradient(model, tape, &taped, loss)
}
