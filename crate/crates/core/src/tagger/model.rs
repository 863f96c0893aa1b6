use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{concatenate, s, Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lstm::{forward_sequence, LstmParams};
use super::{lexicon_features, Tag};
use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;

/// Embedding and hidden sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub word: usize,
    pub dict: usize,
    /// Hidden units per direction.
    pub hidden: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            word: 200,
            dict: 100,
            hidden: 300,
        }
    }
}

impl ModelDims {
    pub fn input(&self) -> usize {
        self.word + self.dict
    }
}

pub const UNK: &str = "<unk>";

/// Word index. Row 0 is reserved for unknown words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// `UNK` followed by `words` in the given order, duplicates dropped.
    pub fn new<I: IntoIterator<Item = String>>(words: I) -> Self {
        let mut vocab = Vocabulary {
            words: vec![UNK.to_string()],
            index: HashMap::from([(UNK.to_string(), 0)]),
        };
        for w in words {
            if !vocab.index.contains_key(&w) {
                vocab.index.insert(w.clone(), vocab.words.len());
                vocab.words.push(w);
            }
        }
        vocab
    }

    /// Sorted words seen at least `min_count` times.
    pub fn from_counts<'a, I: IntoIterator<Item = &'a str>>(tokens: I, min_count: usize) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t).or_default() += 1;
        }
        Vocabulary::new(
            counts
                .into_iter()
                .filter(|(_, c)| *c >= min_count)
                .map(|(w, _)| w.to_string()),
        )
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(0)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Bi-LSTM sequence labeler over word and lexicon-category embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    pub dims: ModelDims,
    pub vocab: Vocabulary,
    /// `|V| × word`.
    pub word_embeddings: Array2<f64>,
    /// `4 × dict`, one row per lexicon category (none, defect, location, frequency).
    pub dict_embeddings: Array2<f64>,
    pub forward: LstmParams,
    pub backward: LstmParams,
    /// `4 × 2H`.
    pub output_w: Array2<f64>,
    pub output_b: Array1<f64>,
    pub rng_seed: u64,
}

impl TaggerModel {
    pub fn zeros(vocab: Vocabulary, dims: ModelDims) -> Self {
        TaggerModel {
            word_embeddings: Array2::zeros((vocab.len(), dims.word)),
            dict_embeddings: Array2::zeros((Tag::COUNT, dims.dict)),
            forward: LstmParams::zeros(dims.input(), dims.hidden),
            backward: LstmParams::zeros(dims.input(), dims.hidden),
            output_w: Array2::zeros((Tag::COUNT, 2 * dims.hidden)),
            output_b: Array1::zeros(Tag::COUNT),
            dims,
            vocab,
            rng_seed: 0,
        }
    }

    /// Every weight uniform in `[-range, range]` from `seed`; biases zero.
    pub fn init(vocab: Vocabulary, dims: ModelDims, range: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = TaggerModel::zeros(vocab, dims);
        let mut fill = |a: &mut Array2<f64>| a.mapv_inplace(|_| rng.gen_range(-range..=range));
        fill(&mut model.word_embeddings);
        fill(&mut model.dict_embeddings);
        fill(&mut model.forward.w);
        fill(&mut model.backward.w);
        fill(&mut model.output_w);
        model.rng_seed = seed;
        model
    }

    /// Parameter tensors in a fixed order, flattened.
    pub fn parameters(&self) -> [&[f64]; 8] {
        [
            self.word_embeddings.as_slice().expect("standard layout"),
            self.dict_embeddings.as_slice().expect("standard layout"),
            self.forward.w.as_slice().expect("standard layout"),
            self.forward.b.as_slice().expect("standard layout"),
            self.backward.w.as_slice().expect("standard layout"),
            self.backward.b.as_slice().expect("standard layout"),
            self.output_w.as_slice().expect("standard layout"),
            self.output_b.as_slice().expect("standard layout"),
        ]
    }

    pub fn parameters_mut(&mut self) -> [&mut [f64]; 8] {
        [
            self.word_embeddings.as_slice_mut().expect("standard layout"),
            self.dict_embeddings.as_slice_mut().expect("standard layout"),
            self.forward.w.as_slice_mut().expect("standard layout"),
            self.forward.b.as_slice_mut().expect("standard layout"),
            self.backward.w.as_slice_mut().expect("standard layout"),
            self.backward.b.as_slice_mut().expect("standard layout"),
            self.output_w.as_slice_mut().expect("standard layout"),
            self.output_b.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.parameters().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// Word row concatenated with the lexicon-category row.
    pub fn embed(&self, word: &str, category: usize) -> Array1<f64> {
        concatenate(
            Axis(0),
            &[
                self.word_embeddings.row(self.vocab.id(word)),
                self.dict_embeddings.row(category),
            ],
        )
        .expect("1-d rows concatenate")
    }

    pub fn embed_sentence(&self, sentence: &Sentence, lexicon: &Lexicon) -> Vec<Array1<f64>> {
        let categories = lexicon_features(sentence, lexicon);
        sentence
            .tokens
            .iter()
            .zip(categories)
            .map(|(t, c)| self.embed(&t.normalized, c))
            .collect()
    }

    /// Per-position concatenation `[h_forward; h_backward]`.
    pub fn bilstm_forward(&self, inputs: &[Array1<f64>]) -> Result<Vec<Array1<f64>>> {
        if inputs.is_empty() {
            return Err(Error::EmptySequence);
        }
        if !self.forward.is_finite() || !self.backward.is_finite() {
            return Err(Error::NumericalError("LSTM parameters"));
        }
        let as_batch = |x: &Array1<f64>| x.view().insert_axis(Axis(0)).to_owned();
        let fwd_in: Vec<Array2<f64>> = inputs.iter().map(as_batch).collect();
        let bwd_in: Vec<Array2<f64>> = inputs.iter().rev().map(as_batch).collect();
        let fwd = forward_sequence(&self.forward, &fwd_in);
        let bwd = forward_sequence(&self.backward, &bwd_in);
        let n = inputs.len();
        let out: Vec<Array1<f64>> = (0..n)
            .map(|t| concatenate(Axis(0), &[fwd.h[t].row(0), bwd.h[n - 1 - t].row(0)]).expect("1-d rows concatenate"))
            .collect();
        if out.iter().any(|h| h.iter().any(|v| !v.is_finite())) {
            return Err(Error::NumericalError("Bi-LSTM state"));
        }
        Ok(out)
    }

    /// Softmax over the output projection of one Bi-LSTM state.
    pub fn tag_probabilities(&self, state: ArrayView1<f64>) -> Array1<f64> {
        let logits = self.output_w.dot(&state) + &self.output_b;
        let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let exp = logits.mapv(|v| (v - max).exp());
        let total = exp.sum();
        exp / total
    }

    /// Most probable tag per token; ties go to the lowest tag index.
    pub fn predict_tags(&self, sentence: &Sentence, lexicon: &Lexicon) -> Result<Vec<Tag>> {
        if sentence.tokens.is_empty() {
            return Ok(Vec::new());
        }
        let states = self.bilstm_forward(&self.embed_sentence(sentence, lexicon))?;
        Ok(states
            .iter()
            .map(|h| {
                let p = self.tag_probabilities(h.view());
                let mut best = 0;
                for k in 1..Tag::COUNT {
                    if p[k] > p[best] {
                        best = k;
                    }
                }
                Tag::from_index(best).expect("index below Tag::COUNT")
            })
            .collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        for d in [self.dims.word, self.dims.dict, self.dims.hidden] {
            w.write_u64::<LittleEndian>(d as u64)?;
        }
        w.write_u64::<LittleEndian>(self.rng_seed)?;
        w.write_u64::<LittleEndian>(self.vocab.len() as u64)?;
        for word in self.vocab.words() {
            w.write_u32::<LittleEndian>(word.len() as u32)?;
            w.write_all(word.as_bytes())?;
        }
        for (name, rows, cols, data) in self.tensor_table() {
            w.write_u32::<LittleEndian>(name.len() as u32)?;
            w.write_all(name.as_bytes())?;
            w.write_u64::<LittleEndian>(rows as u64)?;
            w.write_u64::<LittleEndian>(cols as u64)?;
            for v in data {
                w.write_f64::<LittleEndian>(*v)?;
            }
        }
        Ok(())
    }

    fn tensor_table(&self) -> [(&'static str, usize, usize, &[f64]); 8] {
        let p = self.parameters();
        let shape2 = |a: &Array2<f64>| (a.nrows(), a.ncols());
        let (we, de, fw, bw, ow) = (
            shape2(&self.word_embeddings),
            shape2(&self.dict_embeddings),
            shape2(&self.forward.w),
            shape2(&self.backward.w),
            shape2(&self.output_w),
        );
        [
            ("word_embeddings", we.0, we.1, p[0]),
            ("dict_embeddings", de.0, de.1, p[1]),
            ("forward.w", fw.0, fw.1, p[2]),
            ("forward.b", 1, self.forward.b.len(), p[3]),
            ("backward.w", bw.0, bw.1, p[4]),
            ("backward.b", 1, self.backward.b.len(), p[5]),
            ("output.w", ow.0, ow.1, p[6]),
            ("output.b", 1, self.output_b.len(), p[7]),
        ]
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |what: &str| Error::ModelFormat(what.to_string());
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MAGIC {
            return Err(bad("not a tagger model file"));
        }
        let version = r.read_u32::<LittleEndian>().map_err(|_| bad("truncated header"))?;
        if version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let read_u64 = |r: &mut Cursor<&[u8]>| {
            r.read_u64::<LittleEndian>()
                .map(|v| v as usize)
                .map_err(|_| bad("truncated header"))
        };
        let dims = ModelDims {
            word: read_u64(&mut r)?,
            dict: read_u64(&mut r)?,
            hidden: read_u64(&mut r)?,
        };
        let rng_seed = read_u64(&mut r)? as u64;
        let vocab_len = read_u64(&mut r)?;
        if vocab_len == 0 || vocab_len > bytes.len() {
            return Err(bad("bad vocabulary size"));
        }
        let mut words = Vec::with_capacity(vocab_len);
        for _ in 0..vocab_len {
            let len = r.read_u32::<LittleEndian>().map_err(|_| bad("truncated vocabulary"))? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf).map_err(|_| bad("truncated vocabulary"))?;
            words.push(String::from_utf8(buf).map_err(|_| bad("vocabulary is not UTF-8"))?);
        }
        if words[0] != UNK {
            return Err(bad("vocabulary must start with <unk>"));
        }
        let vocab = Vocabulary::new(words.into_iter().skip(1));
        if vocab.len() != vocab_len {
            return Err(bad("duplicate vocabulary entries"));
        }

        let mut model = TaggerModel::zeros(vocab, dims);
        model.rng_seed = rng_seed;
        let expected: Vec<(&str, usize, usize)> = model
            .tensor_table()
            .iter()
            .map(|(n, rows, cols, _)| (*n, *rows, *cols))
            .collect();
        for (slot, (name, rows, cols)) in expected.into_iter().enumerate() {
            let len = r.read_u32::<LittleEndian>().map_err(|_| bad("truncated tensor"))? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf).map_err(|_| bad("truncated tensor"))?;
            let got_rows = read_u64(&mut r)?;
            let got_cols = read_u64(&mut r)?;
            if buf != name.as_bytes() || got_rows != rows || got_cols != cols {
                return Err(Error::ModelFormat(format!(
                    "tensor {slot}: expected {name} {rows}x{cols}, found {} {got_rows}x{got_cols}",
                    String::from_utf8_lossy(&buf)
                )));
            }
            let params = model.parameters_mut();
            for v in params[slot].iter_mut() {
                *v = r.read_f64::<LittleEndian>().map_err(|_| bad("truncated tensor data"))?;
            }
        }
        if (r.position() as usize) != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Forward state halves of one position, for tests and inspection.
    pub fn split_state(&self, state: &Array1<f64>) -> (Array1<f64>, Array1<f64>) {
        let h = self.dims.hidden;
        (state.slice(s![..h]).to_owned(), state.slice(s![h..]).to_owned())
    }
}

const MAGIC: &[u8; 4] = b"PSTM";
const FORMAT_VERSION: u32 = 1;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagger::lstm::lstm_step;

    fn small_dims() -> ModelDims {
        ModelDims {
            word: 4,
            dict: 2,
            hidden: 3,
        }
    }

    fn vocab() -> Vocabulary {
        Vocabulary::new(["leaks", "pipe"].map(String::from))
    }

    fn random_inputs(n: usize, dim: usize, seed: u64) -> Vec<Array1<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Array1::from_shape_fn(dim, |_| rng.gen_range(-2.0..2.0)))
            .collect()
    }

    #[test]
    fn embed_unknown_and_known() {
        let m = TaggerModel::init(vocab(), small_dims(), 0.1, 5);
        let unk = m.embed("nonsense", 0);
        let expected = concatenate(Axis(0), &[m.word_embeddings.row(0), m.dict_embeddings.row(0)]).unwrap();
        assert_eq!(unk, expected);
        assert_eq!(m.embed("leaks", 1), m.embed("leaks", 1));
        let known = m.embed("leaks", 0);
        let word_norm = known.slice(s![..4]).mapv(|v| v * v).sum().sqrt();
        assert!(word_norm > 0.0);
    }

    #[test]
    fn length_one_sequence() {
        let m = TaggerModel::init(vocab(), small_dims(), 0.5, 1);
        let x = random_inputs(1, 6, 2);
        let out = m.bilstm_forward(&x).unwrap();
        let zeros = Array1::zeros(3);
        let (hf, _) = lstm_step(x[0].view(), zeros.view(), zeros.view(), &m.forward).unwrap();
        let (hb, _) = lstm_step(x[0].view(), zeros.view(), zeros.view(), &m.backward).unwrap();
        let (f, b) = m.split_state(&out[0]);
        assert!((&f - &hf).iter().all(|d| d.abs() < 1e-12));
        assert!((&b - &hb).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn reversal_swaps_halves() {
        let m = TaggerModel::init(vocab(), small_dims(), 0.5, 1);
        let mut mirrored = m.clone();
        std::mem::swap(&mut mirrored.forward, &mut mirrored.backward);
        let x = random_inputs(4, 6, 9);
        let rev: Vec<_> = x.iter().rev().cloned().collect();
        let out = m.bilstm_forward(&x).unwrap();
        let out_rev = mirrored.bilstm_forward(&rev).unwrap();
        for t in 0..4 {
            let (f, b) = m.split_state(&out[t]);
            let (rf, rb) = mirrored.split_state(&out_rev[3 - t]);
            assert_eq!(f, rb);
            assert_eq!(b, rf);
        }
    }

    #[test]
    fn length_three_matches_unrolled_steps() {
        let m = TaggerModel::init(vocab(), small_dims(), 0.5, 4);
        let x = random_inputs(3, 6, 10);
        let out = m.bilstm_forward(&x).unwrap();

        let zeros = Array1::<f64>::zeros(3);
        let (f1, c1) = lstm_step(x[0].view(), zeros.view(), zeros.view(), &m.forward).unwrap();
        let (f2, c2) = lstm_step(x[1].view(), f1.view(), c1.view(), &m.forward).unwrap();
        let (f3, _) = lstm_step(x[2].view(), f2.view(), c2.view(), &m.forward).unwrap();
        let (b3, d3) = lstm_step(x[2].view(), zeros.view(), zeros.view(), &m.backward).unwrap();
        let (b2, d2) = lstm_step(x[1].view(), b3.view(), d3.view(), &m.backward).unwrap();
        let (b1, _) = lstm_step(x[0].view(), b2.view(), d2.view(), &m.backward).unwrap();

        for (t, (f, b)) in [(f1, b1), (f2, b2), (f3, b3)].into_iter().enumerate() {
            let (of, ob) = m.split_state(&out[t]);
            for k in 0..3 {
                assert!((of[k] - f[k]).abs() < 1e-12);
                assert!((ob[k] - b[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_sequence_errors() {
        let m = TaggerModel::zeros(vocab(), small_dims());
        assert!(matches!(m.bilstm_forward(&[]), Err(Error::EmptySequence)));
    }

    #[test]
    fn file_round_trip_is_exact() {
        let m = TaggerModel::init(vocab(), small_dims(), 0.1, 77);
        let bytes = m.to_bytes();
        let back = TaggerModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes(), bytes);
        assert!(TaggerModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(TaggerModel::from_bytes(b"nope").is_err());
    }
}
