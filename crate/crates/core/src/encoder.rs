//! Token embeddings, the optional self-attention stack, the stacked BiLSTM
//! and span vectors built from them.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{Graph, NumericsError, Parameters, Tensor, Var};

pub const UNK: &str = "<unk>";

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("empty sentence")]
    EmptySentence,
    #[error("span ({b}, {e}) out of range for sentence of length {n}")]
    IndexOutOfRange { b: usize, e: usize, n: usize },
    #[error("invalid encoder config: {0}")]
    Config(String),
    #[error("{path} line {line}: {reason}")]
    Pretrained {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub embed_dim: usize,
    pub pretrained_vectors: Option<PathBuf>,
    pub freeze_pretrained: bool,
    pub bilstm_layers: usize,
    pub bilstm_hidden: usize,
    pub attn_layers: usize,
    pub attn_heads: usize,
    pub dropout: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            embed_dim: 100,
            pretrained_vectors: None,
            freeze_pretrained: false,
            bilstm_layers: 3,
            bilstm_hidden: 256,
            attn_layers: 0,
            attn_heads: 1,
            dropout: 0.5,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), EncoderError> {
        if self.embed_dim == 0 || self.bilstm_hidden == 0 || self.bilstm_layers == 0 {
            return Err(EncoderError::Config("dimensions and layer count must be positive".into()));
        }
        if self.attn_layers > 0 && (self.attn_heads == 0 || !self.embed_dim.is_multiple_of(self.attn_heads)) {
            return Err(EncoderError::Config(format!(
                "embed_dim {} is not divisible by attn_heads {}",
                self.embed_dim, self.attn_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(EncoderError::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// Width of the token representations `c`.
    pub fn token_dim(&self) -> usize {
        self.embed_dim
    }

    /// Width of the BiLSTM outputs `u`.
    pub fn context_dim(&self) -> usize {
        2 * self.bilstm_hidden
    }

    /// Width of a span vector `[z^c; u_b; u_e]`.
    pub fn span_dim(&self) -> usize {
        self.token_dim() + 2 * self.context_dim()
    }
}

/// Token to row mapping; row 0 is the unknown token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Default for Vocab {
    fn default() -> Self {
        Vocab::new()
    }
}

impl Vocab {
    pub fn new() -> Self {
        let mut v = Vocab {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        v.insert(UNK);
        v
    }

    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut v = Vocab::new();
        for t in tokens {
            v.insert(t);
        }
        v
    }

    pub fn insert(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), self.tokens.len() - 1);
        self.tokens.len() - 1
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Reads whitespace-separated text vectors: a token followed by `dim` floats
/// per line. A leading `count dim` header line is skipped.
pub fn load_pretrained(path: &Path, dim: usize) -> Result<Vec<(String, Vec<f64>)>, EncoderError> {
    let content = fs::read_to_string(path).map_err(|e| EncoderError::Pretrained {
        path: path.to_path_buf(),
        line: 0,
        reason: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else { continue };
        let values: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
        let err = |reason: String| EncoderError::Pretrained {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let values = values.map_err(|e| err(e.to_string()))?;
        if i == 0 && values.len() == 1 && token.parse::<usize>().is_ok() {
            continue;
        }
        if values.len() != dim {
            return Err(err(format!("expected {dim} values, found {}", values.len())));
        }
        out.push((token.to_string(), values));
    }
    Ok(out)
}

/// Per-sentence encoder output living on a graph.
pub struct EncodedSentence {
    pub c: Var,
    pub u: Var,
    /// `attn_layers * attn_heads` row-stochastic `n x n` maps, layer-major.
    pub attention_maps: Vec<Tensor>,
    scores: Var,
    n: usize,
}

impl EncodedSentence {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub vocab: Vocab,
}

const EMBED: &str = "enc.embed";
const W_ATTN: &str = "enc.w_attn";

fn p(g: &mut Graph, params: &Parameters, name: &str) -> Result<Var, NumericsError> {
    g.param(name, params.value(name)?)
}

impl Encoder {
    pub fn new(config: EncoderConfig, vocab: Vocab) -> Result<Self, EncoderError> {
        config.validate()?;
        Ok(Encoder { config, vocab })
    }

    /// Adds every encoder parameter to `params`. Pretrained rows, when given,
    /// overwrite the random initialization of matching vocabulary entries.
    pub fn init_params(
        &self,
        params: &mut Parameters,
        pretrained: Option<&[(String, Vec<f64>)]>,
        rng: &mut impl Rng,
    ) {
        let cfg = &self.config;
        let d = cfg.embed_dim;
        params.insert_embedding(EMBED, self.vocab.len(), d, rng);
        if let Some(vectors) = pretrained {
            let table = params.get_mut(EMBED).expect("just inserted");
            for (token, values) in vectors {
                if let Some(&row) = self.vocab.index.get(token) {
                    for (j, v) in values.iter().enumerate() {
                        table.set(row, j, *v);
                    }
                }
            }
            if cfg.freeze_pretrained {
                params.freeze(EMBED);
            }
        }
        for l in 0..cfg.attn_layers {
            for m in ["wq", "wk", "wv", "wo"] {
                params.insert_weight(format!("enc.attn{l}.{m}"), d, d, rng);
            }
        }
        let h = cfg.bilstm_hidden;
        for l in 0..cfg.bilstm_layers {
            let input = if l == 0 { d } else { 2 * h };
            for dir in ["fw", "bw"] {
                params.insert_weight(format!("enc.lstm{l}.{dir}.wx"), input, 4 * h, rng);
                params.insert_weight(format!("enc.lstm{l}.{dir}.wh"), h, 4 * h, rng);
                let mut bias = Tensor::zeros(1, 4 * h);
                for j in h..2 * h {
                    bias.set(0, j, 1.0);
                }
                params.insert(format!("enc.lstm{l}.{dir}.b"), bias);
            }
        }
        params.insert(W_ATTN, Tensor::zeros(d, 1));
    }

    /// Embedding rows for `tokens`, out-of-vocabulary tokens mapping to the
    /// unknown row; dropout applies on training graphs.
    pub fn embed_tokens(&self, g: &mut Graph, params: &Parameters, tokens: &[String]) -> Result<Var, EncoderError> {
        if tokens.is_empty() {
            return Err(EncoderError::EmptySentence);
        }
        let table = p(g, params, EMBED)?;
        let c = g.embedding_lookup(table, &self.vocab.ids(tokens))?;
        Ok(g.dropout(c, self.config.dropout)?)
    }

    fn attention_layer(
        &self,
        g: &mut Graph,
        params: &Parameters,
        l: usize,
        x: Var,
        maps: &mut Vec<Tensor>,
    ) -> Result<Var, EncoderError> {
        let d = self.config.embed_dim;
        let heads = self.config.attn_heads;
        let dh = d / heads;
        let wq = p(g, params, &format!("enc.attn{l}.wq"))?;
        let wk = p(g, params, &format!("enc.attn{l}.wk"))?;
        let wv = p(g, params, &format!("enc.attn{l}.wv"))?;
        let wo = p(g, params, &format!("enc.attn{l}.wo"))?;
        let q = g.matmul(x, wq)?;
        let k = g.matmul(x, wk)?;
        let v = g.matmul(x, wv)?;
        let mut outs = Vec::with_capacity(heads);
        for hd in 0..heads {
            let (a, b) = (hd * dh, (hd + 1) * dh);
            let qh = g.slice_cols(q, a, b)?;
            let kh = g.slice_cols(k, a, b)?;
            let vh = g.slice_cols(v, a, b)?;
            let kt = g.transpose(kh)?;
            let s = g.matmul(qh, kt)?;
            let s = g.scale(s, 1.0 / (dh as f64).sqrt())?;
            let att = g.softmax(s, 1)?;
            maps.push(g.value(att).clone());
            outs.push(g.matmul(att, vh)?);
        }
        let cat = g.concat_cols(&outs)?;
        let proj = g.matmul(cat, wo)?;
        let proj = g.dropout(proj, self.config.dropout)?;
        Ok(g.add(x, proj)?)
    }

    fn lstm_direction(&self, g: &mut Graph, params: &Parameters, prefix: &str, x: Var, reverse: bool) -> Result<Var, EncoderError> {
        let h = self.config.bilstm_hidden;
        let n = g.value(x).rows();
        let wx = p(g, params, &format!("{prefix}.wx"))?;
        let wh = p(g, params, &format!("{prefix}.wh"))?;
        let b = p(g, params, &format!("{prefix}.b"))?;
        let xw = g.matmul(x, wx)?;
        let xw = g.add_row(xw, b)?;
        let mut hid = g.constant(Tensor::zeros(1, h))?;
        let mut cell = g.constant(Tensor::zeros(1, h))?;
        let mut outs = vec![hid; n];
        let order: Vec<usize> = if reverse { (0..n).rev().collect() } else { (0..n).collect() };
        for t in order {
            let xt = g.slice_rows(xw, t, t + 1)?;
            let hw = g.matmul(hid, wh)?;
            let gates = g.add(xt, hw)?;
            let i = g.slice_cols(gates, 0, h)?;
            let i = g.sigmoid(i)?;
            let f = g.slice_cols(gates, h, 2 * h)?;
            let f = g.sigmoid(f)?;
            let gg = g.slice_cols(gates, 2 * h, 3 * h)?;
            let gg = g.tanh(gg)?;
            let o = g.slice_cols(gates, 3 * h, 4 * h)?;
            let o = g.sigmoid(o)?;
            let keep = g.mul(f, cell)?;
            let write = g.mul(i, gg)?;
            cell = g.add(keep, write)?;
            let tc = g.tanh(cell)?;
            hid = g.mul(o, tc)?;
            outs[t] = hid;
        }
        Ok(g.concat_rows(&outs)?)
    }

    /// Self-attention layers (when configured) with residual connections,
    /// then the stacked BiLSTM. Returns the post-attention token
    /// representations, the BiLSTM outputs and every attention map.
    pub fn contextualize(&self, g: &mut Graph, params: &Parameters, c: Var) -> Result<(Var, Var, Vec<Tensor>), EncoderError> {
        let mut maps = Vec::new();
        let mut x = c;
        for l in 0..self.config.attn_layers {
            x = self.attention_layer(g, params, l, x, &mut maps)?;
        }
        let c = x;
        for l in 0..self.config.bilstm_layers {
            let fw = self.lstm_direction(g, params, &format!("enc.lstm{l}.fw"), x, false)?;
            let bw = self.lstm_direction(g, params, &format!("enc.lstm{l}.bw"), x, true)?;
            x = g.concat_cols(&[fw, bw])?;
            x = g.dropout(x, self.config.dropout)?;
        }
        Ok((c, x, maps))
    }

    pub fn encode(&self, g: &mut Graph, params: &Parameters, tokens: &[String]) -> Result<EncodedSentence, EncoderError> {
        let c = self.embed_tokens(g, params, tokens)?;
        let (c, u, attention_maps) = self.contextualize(g, params, c)?;
        let w = p(g, params, W_ATTN)?;
        let scores = g.matmul(c, w)?;
        Ok(EncodedSentence {
            c,
            u,
            attention_maps,
            scores,
            n: tokens.len(),
        })
    }

    /// `[z^c; u_b; u_e]` for the inclusive span `b..=e`, as a `1 x span_dim`
    /// row.
    pub fn span_representation(&self, g: &mut Graph, enc: &EncodedSentence, b: usize, e: usize) -> Result<Var, EncoderError> {
        if b > e || e >= enc.n {
            return Err(EncoderError::IndexOutOfRange { b, e, n: enc.n });
        }
        let s = g.slice_rows(enc.scores, b, e + 1)?;
        let alpha = g.softmax(s, 0)?;
        let alpha_t = g.transpose(alpha)?;
        let cs = g.slice_rows(enc.c, b, e + 1)?;
        let zc = g.matmul(alpha_t, cs)?;
        let ub = g.slice_rows(enc.u, b, b + 1)?;
        let ue = g.slice_rows(enc.u, e, e + 1)?;
        Ok(g.concat_cols(&[zc, ub, ue])?)
    }

    /// Span vectors for every `(b, e)`, stacked as rows.
    pub fn span_representations(&self, g: &mut Graph, enc: &EncodedSentence, spans: &[(usize, usize)]) -> Result<Var, EncoderError> {
        let rows = spans
            .iter()
            .map(|&(b, e)| self.span_representation(g, enc, b, e))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(g.concat_rows(&rows)?)
    }

    /// Attention weights over the tokens of span `b..=e` (for inspection).
    pub fn span_attention(&self, g: &Graph, enc: &EncodedSentence, b: usize, e: usize) -> Result<Vec<f64>, EncoderError> {
        if b > e || e >= enc.n {
            return Err(EncoderError::IndexOutOfRange { b, e, n: enc.n });
        }
        let s = g.value(enc.scores);
        let vals: Vec<f64> = (b..=e).map(|t| s.get(t, 0)).collect();
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = vals.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exp.iter().sum();
        Ok(exp.into_iter().map(|v| v / total).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn setup(cfg: EncoderConfig) -> (Encoder, Parameters) {
        let vocab = Vocab::from_tokens(["a", "b", "c", "d", "e"]);
        let enc = Encoder::new(cfg, vocab).unwrap();
        let mut params = Parameters::new();
        enc.init_params(&mut params, None, &mut ChaCha8Rng::seed_from_u64(1));
        (enc, params)
    }

    fn small() -> EncoderConfig {
        EncoderConfig {
            embed_dim: 8,
            bilstm_layers: 2,
            bilstm_hidden: 5,
            attn_layers: 2,
            attn_heads: 4,
            dropout: 0.0,
            ..EncoderConfig::default()
        }
    }

    #[test]
    fn shapes() {
        let (enc, params) = setup(small());
        let mut g = Graph::new(0);
        let s = enc.encode(&mut g, &params, &toks("a b c d e a z")).unwrap();
        assert_eq!(g.value(s.c).shape(), [7, 8]);
        assert_eq!(g.value(s.u).shape(), [7, 10]);
        assert_eq!(s.attention_maps.len(), 8);
        for m in &s.attention_maps {
            assert_eq!(m.shape(), [7, 7]);
            for r in 0..7 {
                assert!((m.row_slice(r).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        let z = enc.span_representation(&mut g, &s, 1, 3).unwrap();
        assert_eq!(g.value(z).cols(), enc.config.span_dim());
    }

    #[test]
    fn default_dims() {
        let cfg = EncoderConfig::default();
        assert_eq!(cfg.context_dim(), 512);
        assert_eq!(cfg.span_dim(), 100 + 2 * 512);
    }

    #[test]
    fn unknown_token_uses_unk_row() {
        let (enc, params) = setup(small());
        let mut g = Graph::new(0);
        let c = enc.embed_tokens(&mut g, &params, &toks("zzz")).unwrap();
        let table = params.value(EMBED).unwrap();
        assert_eq!(g.value(c).row_slice(0), table.row_slice(0));
    }

    #[test]
    fn empty_sentence() {
        let (enc, params) = setup(small());
        let mut g = Graph::new(0);
        assert!(matches!(enc.embed_tokens(&mut g, &params, &[]), Err(EncoderError::EmptySentence)));
    }

    #[test]
    fn zero_lstm_gives_zero_output() {
        let (enc, mut params) = setup(EncoderConfig {
            attn_layers: 0,
            ..small()
        });
        let names: Vec<String> = params.names().filter(|n| n.contains("lstm")).map(String::from).collect();
        for n in names {
            params.get_mut(&n).unwrap().data_mut().fill(0.0);
        }
        let mut g = Graph::new(0);
        let s = enc.encode(&mut g, &params, &toks("a b c")).unwrap();
        assert!(g.value(s.u).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_token_span_content_is_token() {
        let (enc, mut params) = setup(small());
        params.get_mut(W_ATTN).unwrap().data_mut().fill(0.7);
        let mut g = Graph::new(0);
        let s = enc.encode(&mut g, &params, &toks("a b c")).unwrap();
        let z = enc.span_representation(&mut g, &s, 1, 1).unwrap();
        let zc: Vec<f64> = g.value(z).row_slice(0)[..8].to_vec();
        assert_eq!(zc, g.value(s.c).row_slice(1));
    }

    #[test]
    fn zero_attention_vector_gives_mean() {
        let (enc, params) = setup(small());
        let mut g = Graph::new(0);
        let s = enc.encode(&mut g, &params, &toks("a b c d")).unwrap();
        let z = enc.span_representation(&mut g, &s, 0, 2).unwrap();
        let c = g.value(s.c);
        for j in 0..8 {
            let mean = (c.get(0, j) + c.get(1, j) + c.get(2, j)) / 3.0;
            assert!((g.value(z).get(0, j) - mean).abs() < 1e-12);
        }
        let alpha = enc.span_attention(&g, &s, 0, 2).unwrap();
        assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn span_out_of_range() {
        let (enc, params) = setup(small());
        let mut g = Graph::new(0);
        let s = enc.encode(&mut g, &params, &toks("a b")).unwrap();
        assert!(matches!(
            enc.span_representation(&mut g, &s, 1, 2),
            Err(EncoderError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn eval_is_deterministic() {
        let (enc, params) = setup(EncoderConfig {
            dropout: 0.5,
            ..small()
        });
        let run = |seed| {
            let mut g = Graph::new(seed);
            let s = enc.encode(&mut g, &params, &toks("a b c")).unwrap();
            g.value(s.u).clone()
        };
        assert_eq!(run(1), run(2));
    }

    #[test]
    fn heads_must_divide_embedding() {
        let cfg = EncoderConfig {
            embed_dim: 10,
            attn_layers: 1,
            attn_heads: 4,
            ..EncoderConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn pretrained_rows_and_freezing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        fs::write(&path, "2 3\nb 1 2 3\nq 4 5 6\n").unwrap();
        let vectors = load_pretrained(&path, 3).unwrap();
        assert_eq!(vectors.len(), 2);
        let enc = Encoder::new(
            EncoderConfig {
                embed_dim: 3,
                freeze_pretrained: true,
                ..small()
            },
            Vocab::from_tokens(["a", "b"]),
        )
        .unwrap_err();
        assert!(matches!(enc, EncoderError::Config(_)));
        let enc = Encoder::new(
            EncoderConfig {
                embed_dim: 3,
                freeze_pretrained: true,
                attn_layers: 0,
                ..small()
            },
            Vocab::from_tokens(["a", "b"]),
        )
        .unwrap();
        let mut params = Parameters::new();
        enc.init_params(&mut params, Some(&vectors), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(params.value(EMBED).unwrap().row_slice(2), &[1.0, 2.0, 3.0]);
        assert!(params.is_frozen(EMBED));
        fs::write(&path, "b 1 2\n").unwrap();
        assert!(load_pretrained(&path, 3).is_err());
    }
}
