//! Encoder objectives against independent oracles: every loss is recomputed
//! with scalar reference loops (no tape, no shared kernels), negative mining
//! is checked against exhaustive search, and every analytic gradient is
//! checked against central finite differences.

use awe_core::encoders::{
    cae_loss, cae_loss_with_gradient, cse_loss, cse_loss_with_gradient, cse_mined_negatives,
    pge_loss, pge_loss_with_gradient, CsePair, DistanceConvention, EncoderModel, Head, Objective,
    Vocab,
};
use awe_core::features::FeatureSequence;
use awe_core::nncore::{GruCellParams, Rng};
use awe_core::synthlang::PhoneId;
use awe_testkit::fd::{central_diff_gradient, max_rel_error};
use awe_testkit::gru_ref::{gru_step_reference, GateRef};
use awe_testkit::map_ref::cosine_distance_ref;

fn ref_cell_step(params: &GruCellParams, x: &[f64], h: &[f64]) -> Vec<f64> {
    let gate = |g: usize| GateRef {
        w: params.w[g].data(),
        u: params.u[g].data(),
        b: params.b[g].data(),
    };
    gru_step_reference(
        params.input_dim,
        params.hidden_dim,
        &gate(0),
        &gate(1),
        &gate(2),
        x,
        h,
    )
}

/// Bidirectional encoder recomputed with scalar loops only.
fn ref_encode(model: &EncoderModel, seq: &FeatureSequence) -> Vec<f64> {
    let h = model.hidden;
    let mut inputs: Vec<Vec<f64>> = seq.frames().map(<[f64]>::to_vec).collect();
    let mut embedding = Vec::new();
    for layer in &model.layers {
        let t = inputs.len();
        let mut fwd = Vec::with_capacity(t);
        let mut state = vec![0.0; h];
        for x in &inputs {
            state = ref_cell_step(&layer.fwd, x, &state);
            fwd.push(state.clone());
        }
        let mut bwd = vec![Vec::new(); t];
        state = vec![0.0; h];
        for i in (0..t).rev() {
            state = ref_cell_step(&layer.bwd, &inputs[i], &state);
            bwd[i] = state.clone();
        }
        embedding = [fwd[t - 1].clone(), bwd[0].clone()].concat();
        inputs = (0..t).map(|i| [fwd[i].clone(), bwd[i].clone()].concat()).collect();
    }
    embedding
}

fn ref_affine(w: &[f64], rows: usize, cols: usize, x: &[f64], b: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|r| {
            let mut s = b[r];
            for c in 0..cols {
                s += w[r * cols + c] * x[c];
            }
            s
        })
        .collect()
}

fn ref_log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_z = logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|v| v - log_z).collect()
}

fn ref_pge_loss(model: &EncoderModel, seq: &FeatureSequence, phones: &[PhoneId]) -> f64 {
    let (vocab, cell, proj_w, proj_b) = match &model.head {
        Head::Phone {
            vocab,
            cell,
            proj_w,
            proj_b,
        } => (vocab, cell, proj_w, proj_b),
        _ => panic!("phone head expected"),
    };
    let v = vocab.size();
    let d = model.embedding_dim();
    let x = ref_encode(model, seq);
    let mut symbols = vec![vocab.bos()];
    symbols.extend(phones.iter().map(|p| vocab.index(*p).unwrap()));
    symbols.push(vocab.eos());

    let mut state = x.clone();
    let mut loss = 0.0;
    for step in 0..symbols.len() - 1 {
        let mut input = vec![0.0; v + d];
        input[symbols[step]] = 1.0;
        input[v..].copy_from_slice(&x);
        state = ref_cell_step(cell, &input, &state);
        let logits = ref_affine(proj_w.data(), v, d, &state, proj_b.data());
        loss -= ref_log_softmax(&logits)[symbols[step + 1]];
    }
    loss
}

fn ref_cae_loss(model: &EncoderModel, anchor: &FeatureSequence, positive: &FeatureSequence) -> f64 {
    let (cell, proj_w, proj_b) = match &model.head {
        Head::Spectral {
            cell,
            proj_w,
            proj_b,
        } => (cell, proj_w, proj_b),
        _ => panic!("spectral head expected"),
    };
    let k = model.input_dim;
    let d = model.embedding_dim();
    let x = ref_encode(model, anchor);
    let mut state = x.clone();
    let mut prev = vec![0.0; k];
    let mut loss = 0.0;
    for frame in positive.frames() {
        let mut input = vec![0.0; k + d];
        input[..k].copy_from_slice(&prev);
        input[k..].copy_from_slice(&x);
        state = ref_cell_step(cell, &input, &state);
        let pred = ref_affine(proj_w.data(), k, d, &state, proj_b.data());
        loss += pred
            .iter()
            .zip(frame)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>();
        prev = frame.to_vec();
    }
    loss
}

/// Exhaustive-search mining plus plain hinge arithmetic. Returns the mean
/// loss and, for stability screening, the smallest decision margin seen: the
/// gap between the chosen negative and the runner-up, and the distance of
/// every hinge argument from its kink.
fn ref_cse_loss(
    model: &EncoderModel,
    pairs: &[(&str, &FeatureSequence, &FeatureSequence)],
) -> (f64, f64) {
    let b = pairs.len();
    let anchors: Vec<Vec<f64>> = pairs.iter().map(|p| ref_encode(model, p.1)).collect();
    let positives: Vec<Vec<f64>> = pairs.iter().map(|p| ref_encode(model, p.2)).collect();
    let candidate = |j: usize| -> &[f64] {
        if j < b {
            &anchors[j]
        } else {
            &positives[j - b]
        }
    };
    let mut total = 0.0;
    let mut min_margin = f64::INFINITY;
    for i in 0..b {
        let mut scored: Vec<(f64, usize)> = (0..2 * b)
            .filter(|&j| pairs[j % b].0 != pairs[i].0)
            .map(|j| (cosine_distance_ref(&anchors[i], candidate(j)), j))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let (d_an, _) = scored[0];
        if scored.len() > 1 {
            min_margin = min_margin.min(scored[1].0 - scored[0].0);
        }
        let d_ap = cosine_distance_ref(&anchors[i], &positives[i]);
        let arg = model.margin + d_ap - d_an;
        min_margin = min_margin.min(arg.abs());
        total += arg.max(0.0);
    }
    (total / b as f64, min_margin)
}

fn random_sequence(rng: &mut Rng, k: usize, frames: usize) -> FeatureSequence {
    let data = (0..k * frames).map(|_| rng.uniform(-1.5, 1.5)).collect();
    FeatureSequence::new(k, data).unwrap()
}

fn random_phones(rng: &mut Rng, n_phones: u32, len: usize) -> Vec<PhoneId> {
    (0..len)
        .map(|_| PhoneId(rng.below(n_phones as usize) as u32))
        .collect()
}

#[test]
fn phone_loss_matches_the_scalar_reference() {
    for seed in 0..10 {
        let mut rng = Rng::new(1000 + seed);
        let vocab = Vocab::from_phones((0..5).map(PhoneId));
        let model = EncoderModel::init(
            Objective::Pge,
            "L",
            3,
            4,
            2,
            Some(vocab),
            0.25,
            DistanceConvention::HalfOneMinusCos,
            &mut rng,
        )
        .unwrap();
        let seq = random_sequence(&mut rng, 3, 3 + (seed as usize % 3));
        let phones = random_phones(&mut rng, 5, 2 + (seed as usize % 3));
        let got = pge_loss(&model, &seq, &phones).unwrap();
        let want = ref_pge_loss(&model, &seq, &phones);
        assert!(
            (got - want).abs() <= 1e-10,
            "seed {seed}: {got} vs reference {want}"
        );
    }
}

#[test]
fn spectral_loss_matches_the_scalar_reference() {
    for seed in 0..10 {
        let mut rng = Rng::new(2000 + seed);
        let model = EncoderModel::init(
            Objective::Cae,
            "L",
            4,
            5,
            2,
            None,
            0.25,
            DistanceConvention::HalfOneMinusCos,
            &mut rng,
        )
        .unwrap();
        let anchor = random_sequence(&mut rng, 4, 4);
        let positive = random_sequence(&mut rng, 4, 3 + (seed as usize % 3));
        let got = cae_loss(&model, &anchor, &positive).unwrap();
        let want = ref_cae_loss(&model, &anchor, &positive);
        assert!(
            (got - want).abs() <= 1e-10,
            "seed {seed}: {got} vs reference {want}"
        );
    }
}

#[test]
fn contrastive_loss_and_mining_match_exhaustive_search() {
    let mut checked = 0;
    for seed in 0..40 {
        let mut rng = Rng::new(3000 + seed);
        let model = EncoderModel::init(
            Objective::Cse,
            "L",
            3,
            5,
            2,
            None,
            0.25,
            DistanceConvention::HalfOneMinusCos,
            &mut rng,
        )
        .unwrap();
        let words = ["wa", "wb", "wc"];
        let seqs: Vec<(FeatureSequence, FeatureSequence)> = (0..3)
            .map(|_| {
                (
                    random_sequence(&mut rng, 3, 4),
                    random_sequence(&mut rng, 3, 5),
                )
            })
            .collect();
        let triples: Vec<(&str, &FeatureSequence, &FeatureSequence)> = words
            .iter()
            .zip(&seqs)
            .map(|(w, (a, p))| (*w, a, p))
            .collect();
        let (want, margin) = ref_cse_loss(&model, &triples);
        if margin < 1e-6 {
            continue;
        }
        checked += 1;

        let pairs: Vec<CsePair> = triples
            .iter()
            .map(|(w, a, p)| CsePair {
                word: w,
                anchor: a,
                positive: p,
            })
            .collect();
        let got = cse_loss(&model, &pairs).unwrap();
        assert!(
            (got - want).abs() <= 1e-10,
            "seed {seed}: {got} vs reference {want}"
        );

        // Mining agreement on the same embeddings, via the public miner.
        let anchors: Vec<Vec<f64>> = triples.iter().map(|t| model.encode(t.1).unwrap()).collect();
        let positives: Vec<Vec<f64>> = triples.iter().map(|t| model.encode(t.2).unwrap()).collect();
        let picks = cse_mined_negatives(
            &words,
            &anchors,
            &positives,
            DistanceConvention::HalfOneMinusCos,
        )
        .unwrap();
        for (i, &pick) in picks.iter().enumerate() {
            let chosen: &[f64] = if pick < 3 {
                &anchors[pick]
            } else {
                &positives[pick - 3]
            };
            let chosen_d = cosine_distance_ref(&anchors[i], chosen);
            for j in 0..6 {
                if words[j % 3] == words[i] {
                    continue;
                }
                let other: &[f64] = if j < 3 { &anchors[j] } else { &positives[j - 3] };
                let d = cosine_distance_ref(&anchors[i], other);
                assert!(
                    chosen_d <= d + 1e-12,
                    "seed {seed}: anchor {i} picked {pick} at {chosen_d} but {j} sits at {d}"
                );
            }
        }
    }
    assert!(checked >= 30, "only {checked} stable instances checked");
}

fn flatten_params(model: &EncoderModel) -> Vec<f64> {
    let mut flat = Vec::new();
    model.visit(&mut |_, t| flat.extend_from_slice(t.data()));
    flat
}

fn load_params(model: &mut EncoderModel, flat: &[f64]) {
    let mut offset = 0usize;
    model.visit_mut(&mut |_, t| {
        let n = t.len();
        t.data_mut().copy_from_slice(&flat[offset..offset + n]);
        offset += n;
    });
}

/// Central-difference gradient check at the toy dimensions k=5, h=8, V=12
/// (10 phones plus the two boundary symbols), 20 seeds per objective.
#[test]
fn gradients_match_finite_differences_for_all_objectives() {
    let (k, hidden, n_phones) = (5usize, 8usize, 10u32);
    // Step chosen where truncation and rounding error cross over for losses
    // of this scale; 1e-5 already sits in rounding-dominated territory.
    let step = 1e-4;
    let tolerance = 1e-4;

    for seed in 0..20u64 {
        let mut rng = Rng::new(7000 + seed);
        let vocab = Vocab::from_phones((0..n_phones).map(PhoneId));
        let model = EncoderModel::init(
            Objective::Pge,
            "L",
            k,
            hidden,
            2,
            Some(vocab),
            0.25,
            DistanceConvention::HalfOneMinusCos,
            &mut rng,
        )
        .unwrap();
        assert_eq!(model.vocab().unwrap().size(), 12);
        let seq = random_sequence(&mut rng, k, 4);
        let phones = random_phones(&mut rng, n_phones, 3);

        let (_, analytic) = pge_loss_with_gradient(&model, &seq, &phones).unwrap();
        let at = flatten_params(&model);
        let mut probe = model.clone();
        let mut f = |flat: &[f64]| {
            load_params(&mut probe, flat);
            pge_loss(&probe, &seq, &phones).unwrap()
        };
        let numeric = central_diff_gradient(&mut f, &at, step);
        let err = max_rel_error(&analytic, &numeric);
        assert!(
            err <= tolerance,
            "phone objective, seed {seed}: rel error {err}"
        );
    }

    for seed in 0..20u64 {
        let mut rng = Rng::new(8000 + seed);
        let model = EncoderModel::init(
            Objective::Cae,
            "L",
            k,
            hidden,
            2,
            None,
            0.25,
            DistanceConvention::HalfOneMinusCos,
            &mut rng,
        )
        .unwrap();
        let anchor = random_sequence(&mut rng, k, 4);
        let positive = random_sequence(&mut rng, k, 3);

        let (_, analytic) = cae_loss_with_gradient(&model, &anchor, &positive).unwrap();
        let at = flatten_params(&model);
        let mut probe = model.clone();
        let mut f = |flat: &[f64]| {
            load_params(&mut probe, flat);
            cae_loss(&probe, &anchor, &positive).unwrap()
        };
        let numeric = central_diff_gradient(&mut f, &at, step);
        assert!(
            max_rel_error(&analytic, &numeric) <= tolerance,
            "spectral objective, seed {seed}: rel error {}",
            max_rel_error(&analytic, &numeric)
        );
    }

    let mut used = 0u32;
    let mut candidate_seed = 0u64;
    while used < 20 {
        assert!(
            candidate_seed < 200,
            "could not find 20 stable contrastive instances"
        );
        let mut rng = Rng::new(9000 + candidate_seed);
        candidate_seed += 1;
        let model = EncoderModel::init(
            Objective::Cse,
            "L",
            k,
            hidden,
            2,
            None,
            0.25,
            DistanceConvention::HalfOneMinusCos,
            &mut rng,
        )
        .unwrap();
        let words = ["wa", "wb", "wc"];
        let seqs: Vec<(FeatureSequence, FeatureSequence)> = (0..3)
            .map(|_| {
                (
                    random_sequence(&mut rng, k, 4),
                    random_sequence(&mut rng, k, 4),
                )
            })
            .collect();
        let triples: Vec<(&str, &FeatureSequence, &FeatureSequence)> = words
            .iter()
            .zip(&seqs)
            .map(|(w, (a, p))| (*w, a, p))
            .collect();
        // Skip instances where the mined negative or a hinge sits within
        // 1e-3 of a decision boundary: the loss is non-differentiable there
        // and finite differences would measure the kink, not the gradient.
        let (_, margin) = ref_cse_loss(&model, &triples);
        if margin < 1e-3 {
            continue;
        }
        used += 1;

        let pairs: Vec<CsePair> = triples
            .iter()
            .map(|(w, a, p)| CsePair {
                word: w,
                anchor: a,
                positive: p,
            })
            .collect();
        let (_, analytic) = cse_loss_with_gradient(&model, &pairs).unwrap();
        let at = flatten_params(&model);
        let mut probe = model.clone();
        let mut f = |flat: &[f64]| {
            load_params(&mut probe, flat);
            cse_loss(&probe, &pairs).unwrap()
        };
        let numeric = central_diff_gradient(&mut f, &at, step);
        assert!(
            max_rel_error(&analytic, &numeric) <= tolerance,
            "contrastive objective, candidate seed {}: rel error {}",
            candidate_seed - 1,
            max_rel_error(&analytic, &numeric)
        );
    }
}
