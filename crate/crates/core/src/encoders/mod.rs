//! Acoustic word embedding encoders: a stacked bidirectional recurrent
//! encoder shared by three training objectives, plus embedding extraction and
//! model persistence.
//!
//! The encoder reads a feature sequence with both a forward and a backward
//! recurrent pass per layer and represents the word by the concatenation of
//! the top layer's two final states, so the embedding dimension is twice the
//! hidden size. The objectives differ only in the head attached during
//! training: a phone-sequence decoder (cross-entropy), a spectral decoder
//! reconstructing a paired segment (summed squared error), or no head at all
//! (triplet margin loss with in-batch hard negatives).

mod loss;
mod train;

pub use loss::{
    cae_loss, cae_loss_with_gradient, cse_loss, cse_loss_with_gradient, cse_mined_negatives,
    pge_loss, pge_loss_with_gradient, triplet_hinge, CsePair,
};
pub use train::{train, EpochStats, TrainConfig};

use crate::features::FeatureSequence;
use crate::nncore::{gru_step_values, GruCellParams, GruScratch, NnError, Rng, Tensor};
use crate::synthlang::PhoneId;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use std::io::{Cursor, Read};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Pge,
    Cae,
    Cse,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Objective::Pge, Objective::Cae, Objective::Cse];

    pub fn name(self) -> &'static str {
        match self {
            Objective::Pge => "pge",
            Objective::Cae => "cae",
            Objective::Cse => "cse",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "pge" => Some(Objective::Pge),
            "cae" => Some(Objective::Cae),
            "cse" => Some(Objective::Cse),
            _ => None,
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which cosine-based distance the contrastive loss and retrieval use.
/// `HalfOneMinusCos` is `(1 − cos)/2` with range [0,1] (default margin 0.25);
/// `OneMinusCos` is `1 − cos` with range [0,2] (margin 0.5).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceConvention {
    HalfOneMinusCos,
    OneMinusCos,
}

impl DistanceConvention {
    /// (multiplier, offset) turning a cosine similarity into the distance.
    pub(crate) fn affine(self) -> (f64, f64) {
        match self {
            DistanceConvention::HalfOneMinusCos => (-0.5, 0.5),
            DistanceConvention::OneMinusCos => (-1.0, 1.0),
        }
    }

    pub fn distance(self, a: &[f64], b: &[f64]) -> Result<f64, EncoderError> {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return Err(EncoderError::ZeroNorm);
        }
        let (mul, add) = self.affine();
        Ok(mul * (dot / (na * nb)) + add)
    }
}

/// Phone vocabulary of one training language, plus beginning-of-sequence and
/// end-of-sequence symbols. Phone ids map to indices `0..P`, BOS to `P`, EOS
/// to `P+1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    phones: Vec<PhoneId>,
}

impl Vocab {
    pub fn from_phones(ids: impl IntoIterator<Item = PhoneId>) -> Self {
        let mut phones: Vec<PhoneId> = ids.into_iter().collect();
        phones.sort_unstable();
        phones.dedup();
        Self { phones }
    }

    pub fn size(&self) -> usize {
        self.phones.len() + 2
    }

    pub fn index(&self, id: PhoneId) -> Option<usize> {
        self.phones.binary_search(&id).ok()
    }

    pub fn bos(&self) -> usize {
        self.phones.len()
    }

    pub fn eos(&self) -> usize {
        self.phones.len() + 1
    }
}

/// One bidirectional recurrent layer.
#[derive(Debug, Clone)]
pub struct BiGruLayer {
    pub fwd: GruCellParams,
    pub bwd: GruCellParams,
}

/// Objective-specific decoder attached during training.
#[derive(Debug, Clone)]
pub enum Head {
    /// Teacher-forced phone decoder: recurrent cell over (one-hot previous
    /// symbol ++ embedding), hidden state initialized to the embedding,
    /// projected to logits over the vocabulary.
    Phone {
        vocab: Vocab,
        cell: GruCellParams,
        proj_w: Tensor,
        proj_b: Tensor,
    },
    /// Teacher-forced spectral decoder emitting the paired segment's frames.
    Spectral {
        cell: GruCellParams,
        proj_w: Tensor,
        proj_b: Tensor,
    },
    /// The contrastive objective needs no decoder.
    None,
}

/// A trained (or training) acoustic word embedding model.
#[derive(Debug, Clone)]
pub struct EncoderModel {
    pub objective: Objective,
    /// Language the model was (or is being) trained on.
    pub language: String,
    pub input_dim: usize,
    pub hidden: usize,
    pub margin: f64,
    pub distance: DistanceConvention,
    pub layers: Vec<BiGruLayer>,
    pub head: Head,
}

impl EncoderModel {
    /// Fresh model with uniform fan-in initialization. The vocabulary is
    /// required for the phone objective and ignored otherwise.
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        objective: Objective,
        language: &str,
        input_dim: usize,
        hidden: usize,
        n_layers: usize,
        vocab: Option<Vocab>,
        margin: f64,
        distance: DistanceConvention,
        rng: &mut Rng,
    ) -> Result<Self, EncoderError> {
        if input_dim == 0 || hidden == 0 || n_layers == 0 {
            return Err(EncoderError::BadConfig(
                "input dim, hidden size, and layer count must be positive".into(),
            ));
        }
        if !(margin >= 0.0) {
            return Err(EncoderError::BadConfig("margin must be non-negative".into()));
        }
        let d = 2 * hidden;
        let layers = (0..n_layers)
            .map(|l| {
                let layer_in = if l == 0 { input_dim } else { d };
                BiGruLayer {
                    fwd: GruCellParams::init(layer_in, hidden, rng),
                    bwd: GruCellParams::init(layer_in, hidden, rng),
                }
            })
            .collect();
        let head = match objective {
            Objective::Pge => {
                let vocab = vocab.ok_or_else(|| {
                    EncoderError::BadConfig("phone objective needs a vocabulary".into())
                })?;
                if vocab.phones.is_empty() {
                    return Err(EncoderError::BadConfig("vocabulary has no phones".into()));
                }
                let v = vocab.size();
                Head::Phone {
                    vocab,
                    cell: GruCellParams::init(v + d, d, rng),
                    proj_w: uniform_matrix(v, d, rng),
                    proj_b: Tensor::zeros(vec![v]),
                }
            }
            Objective::Cae => Head::Spectral {
                cell: GruCellParams::init(input_dim + d, d, rng),
                proj_w: uniform_matrix(input_dim, d, rng),
                proj_b: Tensor::zeros(vec![input_dim]),
            },
            Objective::Cse => Head::None,
        };
        Ok(Self {
            objective,
            language: language.to_string(),
            input_dim,
            hidden,
            margin,
            distance,
            layers,
            head,
        })
    }

    /// All-zero weights, for tests that pin degenerate behavior.
    pub fn zeros(
        objective: Objective,
        language: &str,
        input_dim: usize,
        hidden: usize,
        n_layers: usize,
        vocab: Option<Vocab>,
    ) -> Result<Self, EncoderError> {
        let mut model = Self::init(
            objective,
            language,
            input_dim,
            hidden,
            n_layers,
            vocab,
            0.25,
            DistanceConvention::HalfOneMinusCos,
            &mut Rng::new(0),
        )?;
        model.visit_mut(&mut |_, tensor| {
            for v in tensor.data_mut() {
                *v = 0.0;
            }
        });
        Ok(model)
    }

    pub fn embedding_dim(&self) -> usize {
        2 * self.hidden
    }

    pub fn vocab(&self) -> Option<&Vocab> {
        match &self.head {
            Head::Phone { vocab, .. } => Some(vocab),
            _ => None,
        }
    }

    /// Visits every parameter tensor with a stable name, encoder first, head
    /// second.
    pub fn visit(&self, f: &mut impl FnMut(String, &Tensor)) {
        for (l, layer) in self.layers.iter().enumerate() {
            layer.fwd.visit(&format!("enc.l{l}.fwd"), f);
            layer.bwd.visit(&format!("enc.l{l}.bwd"), f);
        }
        match &self.head {
            Head::Phone {
                cell, proj_w, proj_b, ..
            }
            | Head::Spectral {
                cell, proj_w, proj_b,
            } => {
                cell.visit("dec.cell", f);
                f("dec.proj.w".into(), proj_w);
                f("dec.proj.b".into(), proj_b);
            }
            Head::None => {}
        }
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(String, &mut Tensor)) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            layer.fwd.visit_mut(&format!("enc.l{l}.fwd"), f);
            layer.bwd.visit_mut(&format!("enc.l{l}.bwd"), f);
        }
        match &mut self.head {
            Head::Phone {
                cell, proj_w, proj_b, ..
            }
            | Head::Spectral {
                cell, proj_w, proj_b,
            } => {
                cell.visit_mut("dec.cell", f);
                f("dec.proj.w".into(), proj_w);
                f("dec.proj.b".into(), proj_b);
            }
            Head::None => {}
        }
    }

    /// (name, shape) of every parameter, in visit order; the layout the
    /// optimizer is constructed over.
    pub fn param_specs(&self) -> Vec<(String, Vec<usize>)> {
        let mut specs = Vec::new();
        self.visit(&mut |name, tensor| specs.push((name, tensor.shape().to_vec())));
        specs
    }

    /// Mutable references to every parameter tensor, aligned with
    /// `param_specs` order.
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        fn cell<'a>(c: &'a mut GruCellParams, out: &mut Vec<&'a mut Tensor>) {
            let (w, u, b) = (&mut c.w, &mut c.u, &mut c.b);
            for ((w, u), b) in w.iter_mut().zip(u.iter_mut()).zip(b.iter_mut()) {
                out.push(w);
                out.push(u);
                out.push(b);
            }
        }
        let mut out = Vec::new();
        for layer in &mut self.layers {
            cell(&mut layer.fwd, &mut out);
            cell(&mut layer.bwd, &mut out);
        }
        match &mut self.head {
            Head::Phone {
                cell: c,
                proj_w,
                proj_b,
                ..
            }
            | Head::Spectral {
                cell: c,
                proj_w,
                proj_b,
            } => {
                cell(c, &mut out);
                out.push(proj_w);
                out.push(proj_b);
            }
            Head::None => {}
        }
        out
    }

    /// Embeds one segment: both recurrent directions through all layers, then
    /// the concatenated final forward and final backward states of the top
    /// layer.
    pub fn encode(&self, seq: &FeatureSequence) -> Result<Vec<f64>, EncoderError> {
        if seq.dim() != self.input_dim {
            return Err(EncoderError::Dim {
                what: "feature sequence",
                expected: self.input_dim,
                got: seq.dim(),
            });
        }
        let t = seq.num_frames();
        let h = self.hidden;
        let mut scratch = GruScratch::default();
        let mut inputs: Vec<Vec<f64>> = seq.frames().map(<[f64]>::to_vec).collect();
        let mut fwd_states: Vec<Vec<f64>> = Vec::new();
        let mut bwd_states: Vec<Vec<f64>> = Vec::new();
        for layer in &self.layers {
            fwd_states.clear();
            fwd_states.resize(t, vec![0.0; h]);
            bwd_states.clear();
            bwd_states.resize(t, vec![0.0; h]);
            let mut state = vec![0.0; h];
            for (i, input) in inputs.iter().enumerate() {
                gru_step_values(&layer.fwd, input, &state, &mut fwd_states[i], &mut scratch)?;
                state.copy_from_slice(&fwd_states[i]);
            }
            state.iter_mut().for_each(|v| *v = 0.0);
            for (i, input) in inputs.iter().enumerate().rev() {
                gru_step_values(&layer.bwd, input, &state, &mut bwd_states[i], &mut scratch)?;
                state.copy_from_slice(&bwd_states[i]);
            }
            inputs = fwd_states
                .iter()
                .zip(&bwd_states)
                .map(|(f, b)| {
                    let mut row = Vec::with_capacity(2 * h);
                    row.extend_from_slice(f);
                    row.extend_from_slice(b);
                    row
                })
                .collect();
        }
        let mut embedding = Vec::with_capacity(2 * h);
        embedding.extend_from_slice(&fwd_states[t - 1]);
        embedding.extend_from_slice(&bwd_states[0]);
        Ok(embedding)
    }
}

fn uniform_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Tensor {
    let bound = 1.0 / (cols as f64).sqrt();
    Tensor::matrix(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.uniform(-bound, bound)).collect(),
    )
    .expect("finite uniform draws")
}

/// Embeddings of an ordered stimulus set, with the language pairing recorded
/// so native and non-native views are machine-checkable.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub dim: usize,
    pub ids: Vec<String>,
    pub stimuli_language: String,
    pub encoder_language: String,
    pub objective: Objective,
    /// Column-major: column `i` at `data[i*dim..(i+1)*dim]`.
    pub data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Embeds every stimulus in order. The stimuli language is recorded alongside
/// the model's training language.
pub fn embed_set(
    model: &EncoderModel,
    stimuli: &[(String, FeatureSequence)],
    stimuli_language: &str,
) -> Result<EmbeddingMatrix, EncoderError> {
    if stimuli.is_empty() {
        return Err(EncoderError::EmptyStimuli);
    }
    let d = model.embedding_dim();
    let mut data = Vec::with_capacity(d * stimuli.len());
    for (id, seq) in stimuli {
        let embedding = model.encode(seq).map_err(|source| EncoderError::Stimulus {
            id: id.clone(),
            source: Box::new(source),
        })?;
        data.extend_from_slice(&embedding);
    }
    Ok(EmbeddingMatrix {
        dim: d,
        ids: stimuli.iter().map(|(id, _)| id.clone()).collect(),
        stimuli_language: stimuli_language.to_string(),
        encoder_language: model.language.clone(),
        objective: model.objective,
        data,
    })
}

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("invalid encoder configuration: {0}")]
    BadConfig(String),
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dim {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("phone {0:?} is not in the model vocabulary")]
    UnknownPhone(PhoneId),
    #[error("embedding has zero norm; cosine distance undefined")]
    ZeroNorm,
    #[error("contrastive batch needs at least 2 pairs, got {0}")]
    BatchTooSmall(usize),
    #[error("contrastive batch contains a single word type; no negative exists")]
    SingleWordType,
    #[error("cannot embed an empty stimulus set")]
    EmptyStimuli,
    #[error("failed to embed stimulus {id}")]
    Stimulus {
        id: String,
        #[source]
        source: Box<EncoderError>,
    },
    #[error("split {0} is empty")]
    EmptySplit(&'static str),
    #[error("segment {0} has no features in the provided feature set")]
    MissingFeatures(String),
    #[error("training aborted at epoch {epoch}, batch {batch}: {message}")]
    NumericFailure {
        epoch: usize,
        batch: usize,
        message: String,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("evaluation during training failed: {0}")]
    Eval(String),
    #[error("model file corrupt: {0}")]
    BadFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("checkpoint metadata is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

const AWEX_MAGIC: &[u8; 4] = b"AWEX";
const AWEX_VERSION: u32 = 1;
const AWEC_MAGIC: &[u8; 4] = b"AWEC";
const AWEC_VERSION: u32 = 1;

fn write_string(out: &mut Vec<u8>, text: &str) {
    out.write_u32::<LittleEndian>(text.len() as u32).expect("vec write");
    out.extend_from_slice(text.as_bytes());
}

fn read_string(cursor: &mut Cursor<&[u8]>) -> Result<String, EncoderError> {
    let len = cursor.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    cursor.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| EncoderError::BadFile("non-UTF-8 string".into()))
}

/// Writes an embedding matrix: magic "AWEX", version, D, N, the language
/// pair, objective, column ids, then the column-major float64 payload.
pub fn write_embedding_matrix(path: &Path, matrix: &EmbeddingMatrix) -> Result<(), EncoderError> {
    let mut out = Vec::new();
    out.extend_from_slice(AWEX_MAGIC);
    out.write_u32::<LittleEndian>(AWEX_VERSION)?;
    out.write_u32::<LittleEndian>(matrix.dim as u32)?;
    out.write_u64::<LittleEndian>(matrix.len() as u64)?;
    write_string(&mut out, &matrix.stimuli_language);
    write_string(&mut out, &matrix.encoder_language);
    write_string(&mut out, matrix.objective.name());
    for id in &matrix.ids {
        write_string(&mut out, id);
    }
    for v in &matrix.data {
        out.write_f64::<LittleEndian>(*v)?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_embedding_matrix(path: &Path) -> Result<EmbeddingMatrix, EncoderError> {
    let bytes = std::fs::read(path)?;
    let mut cursor = Cursor::new(bytes.as_slice());
    let mut magic = [0u8; 4];
    cursor.read_exact(&mut magic)?;
    if &magic != AWEX_MAGIC {
        return Err(EncoderError::BadFile("bad embedding-matrix magic".into()));
    }
    let version = cursor.read_u32::<LittleEndian>()?;
    if version != AWEX_VERSION {
        return Err(EncoderError::BadFile(format!(
            "unsupported embedding-matrix version {version}"
        )));
    }
    let dim = cursor.read_u32::<LittleEndian>()? as usize;
    let n = cursor.read_u64::<LittleEndian>()? as usize;
    let stimuli_language = read_string(&mut cursor)?;
    let encoder_language = read_string(&mut cursor)?;
    let objective_name = read_string(&mut cursor)?;
    let objective = Objective::parse(&objective_name)
        .ok_or_else(|| EncoderError::BadFile(format!("unknown objective {objective_name}")))?;
    let ids = (0..n)
        .map(|_| read_string(&mut cursor))
        .collect::<Result<Vec<_>, _>>()?;
    let mut data = vec![0.0f64; dim * n];
    cursor.read_f64_into::<LittleEndian>(&mut data).map_err(|_| {
        EncoderError::BadFile("embedding payload truncated".into())
    })?;
    if data.iter().any(|v| !v.is_finite()) {
        return Err(EncoderError::BadFile("non-finite embedding entries".into()));
    }
    Ok(EmbeddingMatrix {
        dim,
        ids,
        stimuli_language,
        encoder_language,
        objective,
        data,
    })
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    objective: Objective,
    language: String,
    input_dim: usize,
    hidden: usize,
    layers: usize,
    margin: f64,
    distance: DistanceConvention,
    vocab: Option<Vec<u32>>,
    config: serde_json::Value,
}

/// Writes a model checkpoint: magic "AWEC", version, a JSON metadata block
/// (model shape plus an echo of the training configuration), then every
/// parameter tensor by name, shape, and float64 data.
pub fn write_checkpoint(
    path: &Path,
    model: &EncoderModel,
    config_echo: &serde_json::Value,
) -> Result<(), EncoderError> {
    let meta = CheckpointMeta {
        objective: model.objective,
        language: model.language.clone(),
        input_dim: model.input_dim,
        hidden: model.hidden,
        layers: model.layers.len(),
        margin: model.margin,
        distance: model.distance,
        vocab: model
            .vocab()
            .map(|v| v.phones.iter().map(|p| p.0).collect()),
        config: config_echo.clone(),
    };
    let meta_bytes = serde_json::to_vec(&meta)?;

    let mut out = Vec::new();
    out.extend_from_slice(AWEC_MAGIC);
    out.write_u32::<LittleEndian>(AWEC_VERSION)?;
    out.write_u64::<LittleEndian>(meta_bytes.len() as u64)?;
    out.extend_from_slice(&meta_bytes);

    let mut params: Vec<(String, Tensor)> = Vec::new();
    model.visit(&mut |name, tensor| params.push((name, tensor.clone())));
    out.write_u32::<LittleEndian>(params.len() as u32)?;
    for (name, tensor) in &params {
        write_string(&mut out, name);
        out.write_u32::<LittleEndian>(tensor.shape().len() as u32)?;
        for d in tensor.shape() {
            out.write_u64::<LittleEndian>(*d as u64)?;
        }
        for v in tensor.data() {
            out.write_f64::<LittleEndian>(*v)?;
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a checkpoint back into a model plus the training-config echo stored
/// with it.
pub fn read_checkpoint(path: &Path) -> Result<(EncoderModel, serde_json::Value), EncoderError> {
    let bytes = std::fs::read(path)?;
    let mut cursor = Cursor::new(bytes.as_slice());
    let mut magic = [0u8; 4];
    cursor.read_exact(&mut magic)?;
    if &magic != AWEC_MAGIC {
        return Err(EncoderError::BadFile("bad checkpoint magic".into()));
    }
    let version = cursor.read_u32::<LittleEndian>()?;
    if version != AWEC_VERSION {
        return Err(EncoderError::BadFile(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let meta_len = cursor.read_u64::<LittleEndian>()? as usize;
    let mut meta_bytes = vec![0u8; meta_len];
    cursor.read_exact(&mut meta_bytes)?;
    let meta: CheckpointMeta = serde_json::from_slice(&meta_bytes)?;

    let vocab = meta
        .vocab
        .as_ref()
        .map(|ids| Vocab::from_phones(ids.iter().map(|id| PhoneId(*id))));
    let mut model = EncoderModel::init(
        meta.objective,
        &meta.language,
        meta.input_dim,
        meta.hidden,
        meta.layers,
        vocab,
        meta.margin,
        meta.distance,
        &mut Rng::new(0),
    )?;

    let count = cursor.read_u32::<LittleEndian>()? as usize;
    let mut stored: std::collections::BTreeMap<String, Tensor> = std::collections::BTreeMap::new();
    for _ in 0..count {
        let name = read_string(&mut cursor)?;
        let ndim = cursor.read_u32::<LittleEndian>()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(cursor.read_u64::<LittleEndian>()? as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = vec![0.0f64; len];
        cursor
            .read_f64_into::<LittleEndian>(&mut data)
            .map_err(|_| EncoderError::BadFile(format!("parameter {name} truncated")))?;
        let tensor = Tensor::new(shape, data)
            .map_err(|e| EncoderError::BadFile(format!("parameter {name}: {e}")))?;
        if stored.insert(name.clone(), tensor).is_some() {
            return Err(EncoderError::BadFile(format!("duplicate parameter {name}")));
        }
    }

    let mut missing = Vec::new();
    model.visit_mut(&mut |name, tensor| match stored.remove(&name) {
        Some(loaded) if loaded.shape() == tensor.shape() => *tensor = loaded,
        Some(loaded) => missing.push(format!(
            "{name}: shape {:?} in file, {:?} expected",
            loaded.shape(),
            tensor.shape()
        )),
        None => missing.push(format!("{name}: absent from file")),
    });
    if !missing.is_empty() {
        return Err(EncoderError::BadFile(missing.join("; ")));
    }
    if !stored.is_empty() {
        let extra: Vec<String> = stored.keys().cloned().collect();
        return Err(EncoderError::BadFile(format!(
            "unexpected parameters in file: {}",
            extra.join(", ")
        )));
    }
    Ok((model, meta.config))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_sequence(k: usize, t: usize) -> FeatureSequence {
        let data = (0..k * t).map(|i| (i as f64 * 0.37).sin()).collect();
        FeatureSequence::new(k, data).unwrap()
    }

    #[test]
    fn zero_model_encodes_to_the_zero_vector() {
        let model = EncoderModel::zeros(Objective::Cse, "L", 5, 4, 2, None).unwrap();
        let out = model.encode(&ramp_sequence(5, 9)).unwrap();
        assert_eq!(out, vec![0.0; 8]);
    }

    #[test]
    fn hidden_512_gives_1024_dimensional_embeddings() {
        let mut rng = Rng::new(1);
        let model = EncoderModel::init(
            Objective::Cse,
            "L",
            39,
            512,
            2,
            None,
            0.25,
            DistanceConvention::HalfOneMinusCos,
            &mut rng,
        )
        .unwrap();
        assert_eq!(model.embedding_dim(), 1024);
        let out = model.encode(&ramp_sequence(39, 2)).unwrap();
        assert_eq!(out.len(), 1024);
    }

    #[test]
    fn tied_directions_swap_halves_under_input_reversal() {
        let mut rng = Rng::new(3);
        let mut model = EncoderModel::init(
            Objective::Cse,
            "L",
            4,
            6,
            1,
            None,
            0.25,
            DistanceConvention::HalfOneMinusCos,
            &mut rng,
        )
        .unwrap();
        model.layers[0].bwd = model.layers[0].fwd.clone();

        let seq = ramp_sequence(4, 7);
        let mut frames: Vec<&[f64]> = seq.frames().collect();
        frames.reverse();
        let reversed = FeatureSequence::new(4, frames.concat()).unwrap();
        let forward = model.encode(&seq).unwrap();
        let backward = model.encode(&reversed).unwrap();
        let h = 6;
        for i in 0..h {
            assert!((forward[i] - backward[h + i]).abs() < 1e-14);
            assert!((forward[h + i] - backward[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn encode_rejects_wrong_feature_dimension() {
        let model = EncoderModel::zeros(Objective::Cse, "L", 5, 4, 2, None).unwrap();
        assert!(matches!(
            model.encode(&ramp_sequence(6, 4)),
            Err(EncoderError::Dim { .. })
        ));
    }

    #[test]
    fn frame_order_matters_for_a_nontrivial_model() {
        let mut rng = Rng::new(9);
        let model = EncoderModel::init(
            Objective::Cse,
            "L",
            5,
            8,
            2,
            None,
            0.25,
            DistanceConvention::HalfOneMinusCos,
            &mut rng,
        )
        .unwrap();
        let seq = ramp_sequence(5, 10);
        let mut frames: Vec<Vec<f64>> = seq.frames().map(<[f64]>::to_vec).collect();
        frames.swap(1, 7);
        frames.swap(2, 5);
        let shuffled =
            FeatureSequence::new(5, frames.into_iter().flatten().collect()).unwrap();
        let a = model.encode(&seq).unwrap();
        let b = model.encode(&shuffled).unwrap();
        let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        assert!(diff > 1e-6, "shuffling frames left the embedding unchanged");
    }

    #[test]
    fn embed_set_orders_columns_and_records_languages() {
        let mut rng = Rng::new(5);
        let model = EncoderModel::init(
            Objective::Cse,
            "alpha",
            3,
            64,
            2,
            None,
            0.25,
            DistanceConvention::HalfOneMinusCos,
            &mut rng,
        )
        .unwrap();
        let stimuli: Vec<(String, FeatureSequence)> = (0..500)
            .map(|i| (format!("seg{i:03}"), ramp_sequence(3, 2 + i % 5)))
            .collect();
        let matrix = embed_set(&model, &stimuli, "lambda").unwrap();
        assert_eq!(matrix.dim, 128);
        assert_eq!(matrix.len(), 500);
        assert_eq!(matrix.stimuli_language, "lambda");
        assert_eq!(matrix.encoder_language, "alpha");
        assert_eq!(matrix.ids[0], "seg000");
        assert_eq!(matrix.ids[499], "seg499");

        let again = embed_set(&model, &stimuli, "lambda").unwrap();
        assert_eq!(matrix, again);

        assert!(matches!(
            embed_set(&model, &[], "lambda"),
            Err(EncoderError::EmptyStimuli)
        ));
    }

    #[test]
    fn embedding_matrix_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.awex");
        let matrix = EmbeddingMatrix {
            dim: 3,
            ids: vec!["a".into(), "b".into()],
            stimuli_language: "lam".into(),
            encoder_language: "alp".into(),
            objective: Objective::Pge,
            data: vec![1.0, -2.5, 0.125, 3.0, 4.0, -0.75],
        };
        write_embedding_matrix(&path, &matrix).unwrap();
        let back = read_embedding_matrix(&path).unwrap();
        assert_eq!(matrix, back);

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'Z';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_embedding_matrix(&path),
            Err(EncoderError::BadFile(_))
        ));
    }

    #[test]
    fn checkpoint_round_trips_and_preserves_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.awec");
        let mut rng = Rng::new(17);
        let vocab = Vocab::from_phones((0..6).map(PhoneId));
        let model = EncoderModel::init(
            Objective::Pge,
            "L",
            5,
            8,
            2,
            Some(vocab),
            0.25,
            DistanceConvention::HalfOneMinusCos,
            &mut rng,
        )
        .unwrap();
        let echo = serde_json::json!({"epochs": 3, "note": "test"});
        write_checkpoint(&path, &model, &echo).unwrap();
        let (loaded, config) = read_checkpoint(&path).unwrap();
        assert_eq!(config, echo);
        assert_eq!(loaded.language, "L");
        assert_eq!(loaded.vocab().unwrap().size(), 8);

        let seq = ramp_sequence(5, 6);
        assert_eq!(model.encode(&seq).unwrap(), loaded.encode(&seq).unwrap());

        let mut names = Vec::new();
        loaded.visit(&mut |name, _| names.push(name));
        assert!(names.iter().any(|n| n == "enc.l0.fwd.w.update"));
        assert!(names.iter().any(|n| n == "dec.proj.w"));
    }

    #[test]
    fn checkpoint_rejects_missing_parameters() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.awec");
        let model = EncoderModel::zeros(Objective::Cse, "L", 4, 3, 1, None).unwrap();
        write_checkpoint(&path, &model, &serde_json::Value::Null).unwrap();

        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 16);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_checkpoint(&path),
            Err(EncoderError::BadFile(_))
        ));
    }

    #[test]
    fn params_mut_walks_tensors_in_spec_order() {
        let mut rng = Rng::new(2);
        let vocab = Vocab::from_phones((0..3).map(PhoneId));
        let mut model = EncoderModel::init(
            Objective::Pge,
            "L",
            5,
            4,
            2,
            Some(vocab),
            0.25,
            DistanceConvention::HalfOneMinusCos,
            &mut rng,
        )
        .unwrap();
        let specs = model.param_specs();
        let mut tensors = model.params_mut();
        assert_eq!(specs.len(), tensors.len());
        for ((_, shape), tensor) in specs.iter().zip(&tensors) {
            assert_eq!(shape, tensor.shape());
        }
        for (i, tensor) in tensors.iter_mut().enumerate() {
            tensor.data_mut()[0] = i as f64;
        }
        let mut position = 0usize;
        model.visit(&mut |name, tensor| {
            assert_eq!(tensor.data()[0], position as f64, "misaligned at {name}");
            position += 1;
        });
    }

    #[test]
    fn distance_conventions_map_cosine_correctly() {
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        let half = DistanceConvention::HalfOneMinusCos;
        let full = DistanceConvention::OneMinusCos;
        assert!((half.distance(&a, &b).unwrap() - 0.5).abs() < 1e-15);
        assert!((full.distance(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert!((half.distance(&a, &a).unwrap()).abs() < 1e-15);
        let opposite = [-1.0, 0.0];
        assert!((half.distance(&a, &opposite).unwrap() - 1.0).abs() < 1e-15);
        assert!(half.distance(&a, &[0.0, 0.0]).is_err());
    }
}
