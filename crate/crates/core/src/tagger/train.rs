use ndarray::{s, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lstm::{backward_sequence, forward_sequence};
use super::model::{ModelDims, TaggerModel, Vocabulary};
use super::{lexicon_features, Tag};
use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;

/// Training hyperparameters. Defaults: embeddings 200 + 100, 300 hidden
/// units per direction, batch 100, Adam with learning rate 0.005, 10 epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dims: ModelDims,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global gradient norm limit; off by default.
    pub clip_norm: Option<f64>,
    pub init_range: f64,
    /// Words rarer than this in the training data map to `<unk>`.
    pub min_word_count: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dims: ModelDims::default(),
            batch_size: 100,
            learning_rate: 0.005,
            epochs: 10,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: None,
            init_range: 0.1,
            min_word_count: 2,
            seed: 0,
        }
    }
}

/// One tokenized sentence with lexicon features and gold tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub words: Vec<String>,
    /// Lexicon category index per token (0 none, then defect, location, frequency).
    pub categories: Vec<usize>,
    pub tags: Vec<Tag>,
}

impl TrainingExample {
    pub fn from_sentence(sentence: &Sentence, tags: &[Tag], lexicon: &Lexicon) -> Result<Self> {
        if tags.len() != sentence.tokens.len() {
            return Err(Error::AlignmentError {
                left: tags.len(),
                right: sentence.tokens.len(),
            });
        }
        Ok(TrainingExample {
            words: sentence.tokens.iter().map(|t| t.normalized.clone()).collect(),
            categories: lexicon_features(sentence, lexicon),
            tags: tags.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub model: TaggerModel,
    /// Mean per-token cross-entropy of each epoch, measured on each batch
    /// before its update.
    pub epoch_losses: Vec<f64>,
}

/// Trains a Bi-LSTM tagger on `(sentence, gold tags)` pairs.
pub fn train(corpus: &[(Sentence, Vec<Tag>)], lexicon: &Lexicon, config: &TrainConfig) -> Result<TrainingOutcome> {
    let examples = corpus
        .iter()
        .map(|(s, tags)| TrainingExample::from_sentence(s, tags, lexicon))
        .collect::<Result<Vec<_>>>()?;
    train_examples(&examples, config)
}

pub fn train_examples(examples: &[TrainingExample], config: &TrainConfig) -> Result<TrainingOutcome> {
    for ex in examples {
        if ex.tags.len() != ex.words.len() || ex.categories.len() != ex.words.len() {
            return Err(Error::AlignmentError {
                left: ex.tags.len(),
                right: ex.words.len(),
            });
        }
    }
    let examples: Vec<&TrainingExample> = examples.iter().filter(|e| !e.is_empty()).collect();
    if examples.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }

    let vocab = Vocabulary::from_counts(
        examples.iter().flat_map(|e| e.words.iter().map(String::as_str)),
        config.min_word_count,
    );
    let mut model = TaggerModel::init(vocab, config.dims, config.init_range, config.seed);
    let mut grad = TaggerModel::zeros(model.vocab.clone(), config.dims);
    let mut adam = Adam::new(&model, config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    let total_tokens: usize = examples.iter().map(|e| e.len()).sum();

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut rng);
        // Group similar lengths to limit padding, then shuffle the batches.
        order.sort_by_key(|&i| examples[i].len());
        let mut batches: Vec<&[usize]> = order.chunks(config.batch_size).collect();
        batches.shuffle(&mut rng);

        let mut weighted = 0.0;
        for batch in batches {
            let batch: Vec<&TrainingExample> = batch.iter().map(|&i| examples[i]).collect();
            grad.parameters_mut().iter_mut().for_each(|p| p.fill(0.0));
            let loss = batch_loss(&model, &batch, Some(&mut grad));
            if !loss.is_finite() {
                return Err(Error::NumericalError("training loss"));
            }
            weighted += loss * batch.iter().map(|e| e.len()).sum::<usize>() as f64;
            if let Some(limit) = config.clip_norm {
                clip(&mut grad, limit);
            }
            adam.step(&mut model, &grad);
        }
        let epoch_loss = weighted / total_tokens as f64;
        log::info!("epoch {}: loss {epoch_loss:.6}", epoch + 1);
        epoch_losses.push(epoch_loss);
    }
    if !model.is_finite() {
        return Err(Error::NumericalError("trained parameters"));
    }
    Ok(TrainingOutcome { model, epoch_losses })
}

fn clip(grad: &mut TaggerModel, limit: f64) {
    let norm = grad
        .parameters()
        .iter()
        .flat_map(|p| p.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > limit {
        let scale = limit / norm;
        for p in grad.parameters_mut() {
            p.iter_mut().for_each(|g| *g *= scale);
        }
    }
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    fn new(model: &TaggerModel, config: &TrainConfig) -> Self {
        let zeros: Vec<Vec<f64>> = model.parameters().iter().map(|p| vec![0.0; p.len()]).collect();
        Adam {
            lr: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    fn step(&mut self, model: &mut TaggerModel, grad: &TaggerModel) {
        self.step += 1;
        let bias1 = 1.0 - self.beta1.powi(self.step);
        let bias2 = 1.0 - self.beta2.powi(self.step);
        let grads = grad.parameters();
        for (k, params) in model.parameters_mut().into_iter().enumerate() {
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], grads[k]);
            for j in 0..params.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let m_hat = m[j] / bias1;
                let v_hat = v[j] / bias2;
                params[j] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

/// Mean token cross-entropy over a padded batch. When `grad` is given, the
/// loss gradient is added into it.
pub(crate) fn batch_loss(model: &TaggerModel, batch: &[&TrainingExample], grad: Option<&mut TaggerModel>) -> f64 {
    let dims = model.dims;
    let (wd, input, hidden) = (dims.word, dims.input(), dims.hidden);
    let rows = batch.len();
    let steps = batch.iter().map(|e| e.len()).max().unwrap_or(0);
    let ids: Vec<Vec<usize>> = batch
        .iter()
        .map(|e| e.words.iter().map(|w| model.vocab.id(w)).collect())
        .collect();

    // Backward-direction inputs are each sequence reversed within its own
    // length, so both directions run left-aligned.
    let mut fwd_in = vec![Array2::<f64>::zeros((rows, input)); steps];
    let mut bwd_in = vec![Array2::<f64>::zeros((rows, input)); steps];
    for (b, ex) in batch.iter().enumerate() {
        let len = ex.len();
        for pos in 0..len {
            let word = model.word_embeddings.row(ids[b][pos]);
            let dict = model.dict_embeddings.row(ex.categories[pos]);
            for target in [fwd_in[pos].row_mut(b), bwd_in[len - 1 - pos].row_mut(b)] {
                let mut target = target;
                target.slice_mut(s![..wd]).assign(&word);
                target.slice_mut(s![wd..]).assign(&dict);
            }
        }
    }
    let fwd = forward_sequence(&model.forward, &fwd_in);
    let bwd = forward_sequence(&model.backward, &bwd_in);

    let positions: Vec<(usize, usize)> = batch
        .iter()
        .enumerate()
        .flat_map(|(b, e)| (0..e.len()).map(move |t| (b, t)))
        .collect();
    let n = positions.len();
    let mut states = Array2::<f64>::zeros((n, 2 * hidden));
    for (row, &(b, t)) in positions.iter().enumerate() {
        let len = batch[b].len();
        states.slice_mut(s![row, ..hidden]).assign(&fwd.h[t].row(b));
        states.slice_mut(s![row, hidden..]).assign(&bwd.h[len - 1 - t].row(b));
    }
    let mut probs = states.dot(&model.output_w.t());
    probs += &model.output_b;
    let mut loss = 0.0;
    for (mut row, &(b, t)) in probs.axis_iter_mut(Axis(0)).zip(&positions) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row /= total;
        loss -= row[batch[b].tags[t].index()].ln();
    }
    loss /= n as f64;

    let Some(grad) = grad else {
        return loss;
    };

    let mut dlogits = probs;
    for (mut row, &(b, t)) in dlogits.axis_iter_mut(Axis(0)).zip(&positions) {
        row[batch[b].tags[t].index()] -= 1.0;
        row /= n as f64;
    }
    grad.output_w += &dlogits.t().dot(&states);
    grad.output_b += &dlogits.sum_axis(Axis(0));
    let dstates = dlogits.dot(&model.output_w);

    let mut dh_fwd = vec![Array2::<f64>::zeros((rows, hidden)); steps];
    let mut dh_bwd = vec![Array2::<f64>::zeros((rows, hidden)); steps];
    for (row, &(b, t)) in positions.iter().enumerate() {
        let len = batch[b].len();
        dh_fwd[t].row_mut(b).assign(&dstates.slice(s![row, ..hidden]));
        dh_bwd[len - 1 - t].row_mut(b).assign(&dstates.slice(s![row, hidden..]));
    }
    let dx_fwd = backward_sequence(&model.forward, &fwd, &dh_fwd, &mut grad.forward);
    let dx_bwd = backward_sequence(&model.backward, &bwd, &dh_bwd, &mut grad.backward);

    for &(b, t) in &positions {
        let len = batch[b].len();
        let (word, cat) = (ids[b][t], batch[b].categories[t]);
        for dx in [dx_fwd[t].row(b), dx_bwd[len - 1 - t].row(b)] {
            let mut w = grad.word_embeddings.row_mut(word);
            w += &dx.slice(s![..wd]);
            let mut d = grad.dict_embeddings.row_mut(cat);
            d += &dx.slice(s![wd..]);
        }
    }
    loss
}

/// Mean token cross-entropy of `model` over `examples` as one batch.
pub fn loss(model: &TaggerModel, examples: &[TrainingExample]) -> f64 {
    let batch: Vec<&TrainingExample> = examples.iter().collect();
    batch_loss(model, &batch, None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    /// Index into [`TaggerModel::parameters`].
    pub tensor: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

/// Compares backpropagated gradients of the batch loss with central finite
/// differences `(L(p + step) - L(p - step)) / 2 step` at the chosen
/// `(tensor, index)` coordinates.
pub fn gradient_check(
    model: &TaggerModel,
    examples: &[TrainingExample],
    picks: &[(usize, usize)],
    step: f64,
) -> Vec<GradientCheck> {
    let batch: Vec<&TrainingExample> = examples.iter().collect();
    let mut grad = TaggerModel::zeros(model.vocab.clone(), model.dims);
    batch_loss(model, &batch, Some(&mut grad));
    let analytic = grad.parameters();

    let mut probe = model.clone();
    picks
        .iter()
        .map(|&(tensor, index)| {
            let original = model.parameters()[tensor][index];
            probe.parameters_mut()[tensor][index] = original + step;
            let plus = batch_loss(&probe, &batch, None);
            probe.parameters_mut()[tensor][index] = original - step;
            let minus = batch_loss(&probe, &batch, None);
            probe.parameters_mut()[tensor][index] = original;
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic[tensor][index];
            let scale = a.abs().max(numeric.abs());
            GradientCheck {
                tensor,
                index,
                analytic: a,
                numeric,
                relative_error: if scale == 0.0 { 0.0 } else { (a - numeric).abs() / scale },
            }
        })
        .collect()
}
