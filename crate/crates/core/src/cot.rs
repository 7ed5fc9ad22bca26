//! Next-token generation with a decoder stack of Hopfield layers in
//! self-attention form: token and position embedding, the layer stack,
//! an output softmax over the vocabulary, and the chain-of-thought loop
//! that appends each prediction to the input and continues.
//!
//! Pinned conventions:
//!
//! * A decoder layer is a Hopfield layer in softmax mode with the stored
//!   patterns set to the current hidden states (Y = R), followed by a
//!   feed-forward block applied to each position's state — no residual
//!   connections, no layer normalization, no causal masking.
//! * The output distribution is a plain softmax (β = 1) of
//!   `output · h_last`; argmax ties break to the lowest token index.
//! * `cot_generate` is the ordinary greedy append-one-token loop: step i
//!   runs one forward pass on the sequence extended with the first i−1
//!   generated tokens. (A literal reading of the recursive definition this
//!   implements — each step invoking two copies of the previous one —
//!   would repeat identical forward passes exponentially many times; the
//!   loop computes the same sequence with exactly one pass per step.)

use crate::fp::{self, FpError, FpFlags, FpNum, Precision};
use crate::hopfield::{self, FnnParams, HopfieldLayerParams, ModelError, Normalization};
use crate::linalg::{self, FpMatrix};
use crate::lower::{random_positive_matrix, random_signed_matrix};
use crate::problems::ProblemInstance;
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CotError {
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("sequence of length {len} exceeds the budget of {allowed}")]
    LengthBudget { len: usize, allowed: usize },
    #[error("chain-of-thought needs at least one step")]
    ZeroSteps,
    #[error("expected an s5_word instance, got {0}")]
    WrongInstanceKind(String),
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fp(#[from] FpError),
}

/// One decoder layer: the self-attention weight maps plus the per-position
/// feed-forward block. The stored-pattern matrix is not a parameter — each
/// forward pass uses the current hidden states for it.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderLayer {
    /// d×d.
    pub w_q: FpMatrix,
    /// d×d.
    pub w_k: FpMatrix,
    /// d×d.
    pub w_v_tilde: FpMatrix,
    /// d → d feed-forward, applied to each position.
    pub fnn: FnnParams,
}

/// Full next-token model: embedding tables, decoder stack, output map.
#[derive(Debug, Clone, PartialEq)]
pub struct MhmParams {
    /// Token strings; row i of `token_embed` and `output` belongs to
    /// `vocab[i]`.
    pub vocab: Vec<String>,
    /// Hard cap on sequence length; `pos_embed` has one row per position.
    pub n_max: usize,
    /// Inverse temperature of every decoder layer's attention.
    pub beta: FpNum,
    /// |V|×d.
    pub token_embed: FpMatrix,
    /// n_max×d.
    pub pos_embed: FpMatrix,
    /// |V|×d.
    pub output: FpMatrix,
    pub layers: Vec<DecoderLayer>,
}

impl MhmParams {
    pub fn d(&self) -> usize {
        self.token_embed.cols()
    }

    pub fn precision(&self) -> Precision {
        self.beta.precision()
    }

    pub fn validate(&self) -> Result<(), CotError> {
        let err = |msg: String| Err(CotError::Invalid(msg));
        if self.n_max < 2 {
            return err("n_max must be at least 2".into());
        }
        if self.vocab.is_empty() {
            return err("empty vocabulary".into());
        }
        let mut seen = std::collections::HashSet::new();
        for t in &self.vocab {
            if !seen.insert(t) {
                return err(format!("duplicate vocabulary token {t:?}"));
            }
        }
        let d = self.d();
        if self.token_embed.rows() != self.vocab.len() {
            return err("token_embed needs one row per vocabulary entry".into());
        }
        if self.pos_embed.rows() != self.n_max || self.pos_embed.cols() != d {
            return err("pos_embed must be n_max rows of width d".into());
        }
        if self.output.rows() != self.vocab.len() || self.output.cols() != d {
            return err("output must be |V|×d".into());
        }
        for (i, layer) in self.layers.iter().enumerate() {
            for (name, m) in [
                ("w_q", &layer.w_q),
                ("w_k", &layer.w_k),
                ("w_v_tilde", &layer.w_v_tilde),
            ] {
                if m.rows() != d || m.cols() != d {
                    return err(format!("layer {i} {name} must be d×d"));
                }
            }
            layer.fnn.validate().map_err(CotError::Model)?;
            if layer.fnn.in_dim() != d || layer.fnn.out_dim() != d {
                return err(format!("layer {i} FNN must map d to d"));
            }
        }
        Ok(())
    }

    pub fn token_index(&self, token: &str) -> Result<usize, CotError> {
        self.vocab
            .iter()
            .position(|t| t == token)
            .ok_or_else(|| CotError::UnknownToken(token.to_string()))
    }

    /// Row i of the result is token_embed(x_i) + pos_embed(i), added
    /// entrywise with one rounding each.
    pub fn embed(&self, tokens: &[String], flags: &mut FpFlags) -> Result<FpMatrix, CotError> {
        if tokens.len() > self.n_max {
            return Err(CotError::LengthBudget { len: tokens.len(), allowed: self.n_max });
        }
        let d = self.d();
        let mut h = FpMatrix::zero(tokens.len(), d, self.precision());
        for (i, tok) in tokens.iter().enumerate() {
            let t = self.token_index(tok)?;
            for j in 0..d {
                let v = fp::fp_add(&self.token_embed.get(t, j), &self.pos_embed.get(i, j), flags);
                h.set(i, j, v);
            }
        }
        Ok(h)
    }

    /// The hidden states after the full decoder stack.
    fn forward_hidden(
        &self,
        tokens: &[String],
        flags: &mut FpFlags,
    ) -> Result<FpMatrix, CotError> {
        let mut h = self.embed(tokens, flags)?;
        for layer in &self.layers {
            let params = HopfieldLayerParams {
                w_q: layer.w_q.clone(),
                w_k: layer.w_k.clone(),
                w_v_tilde: layer.w_v_tilde.clone(),
                y: h.clone(),
            };
            let z = hopfield::hopfield_layer(&params, &h, &self.beta, Normalization::Softmax, flags)?;
            h = hopfield::fnn_forward(&layer.fnn, &z.transpose(), flags)?.transpose();
        }
        Ok(h)
    }
}

/// One forward pass: the output distribution and its argmax.
#[derive(Debug, Clone)]
pub struct StepOutput {
    /// |V|×1 softmax of the output logits.
    pub distribution: FpMatrix,
    pub next_index: usize,
    pub next: String,
}

/// Run the model once on the token sequence and pick the next token.
pub fn mhm_step(
    params: &MhmParams,
    tokens: &[String],
    flags: &mut FpFlags,
) -> Result<StepOutput, CotError> {
    let h = params.forward_hidden(tokens, flags)?;
    if h.rows() == 0 {
        return Err(CotError::Invalid("cannot predict from an empty sequence".into()));
    }
    let last = FpMatrix::column(h.row(h.rows() - 1).to_vec(), params.precision());
    let logits = linalg::matmul(&params.output, &last, flags);
    let one = FpNum::one(params.precision());
    let distribution = linalg::softmax_cols(&logits, &one, flags)?;
    let mut next_index = 0;
    for i in 1..distribution.rows() {
        if distribution.get(i, 0).compare(&distribution.get(next_index, 0)) == Ordering::Greater {
            next_index = i;
        }
    }
    Ok(StepOutput {
        distribution,
        next_index,
        next: params.vocab[next_index].clone(),
    })
}

/// The generated suffix plus the number of forward passes it cost.
#[derive(Debug, Clone)]
pub struct CotOutput {
    pub generated: Vec<String>,
    pub forward_passes: usize,
}

/// Greedy chain-of-thought: append the model's prediction `steps` times.
/// The length budget keeps the final sequence strictly below `n_max`.
pub fn cot_generate(
    params: &MhmParams,
    tokens: &[String],
    steps: usize,
    flags: &mut FpFlags,
) -> Result<CotOutput, CotError> {
    if steps == 0 {
        return Err(CotError::ZeroSteps);
    }
    if tokens.len() + steps > params.n_max - 1 {
        return Err(CotError::LengthBudget {
            len: tokens.len() + steps,
            allowed: params.n_max - 1,
        });
    }
    let mut seq = tokens.to_vec();
    let mut generated = Vec::with_capacity(steps);
    let mut forward_passes = 0;
    for _ in 0..steps {
        let out = mhm_step(params, &seq, flags)?;
        forward_passes += 1;
        seq.push(out.next.clone());
        generated.push(out.next);
    }
    Ok(CotOutput { generated, forward_passes })
}

/// The model's verdict on a word-problem instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Answer {
    Yes,
    No,
    /// The final generated token was neither `yes` nor `no`.
    Abstain,
}

impl Answer {
    pub fn as_str(&self) -> &'static str {
        match self {
            Answer::Yes => "yes",
            Answer::No => "no",
            Answer::Abstain => "abstain",
        }
    }
}

#[derive(Debug, Clone)]
pub struct WordProblemOutcome {
    pub answer: Answer,
    /// Every generated token, the answer token last.
    pub trace: Vec<String>,
}

/// Feed an S₅ word instance through the model, generate `cot_steps`
/// tokens, and read the final token as the yes/no answer.
pub fn run_word_problem(
    instance: &ProblemInstance,
    params: &MhmParams,
    cot_steps: usize,
    flags: &mut FpFlags,
) -> Result<WordProblemOutcome, CotError> {
    if instance.kind() != "s5_word" {
        return Err(CotError::WrongInstanceKind(instance.kind().to_string()));
    }
    for required in ["yes", "no"] {
        params.token_index(required)?;
    }
    for tok in &instance.tokens {
        params.token_index(tok)?;
    }
    let out = cot_generate(params, &instance.tokens, cot_steps, flags)?;
    let answer = match out.generated.last().map(String::as_str) {
        Some("yes") => Answer::Yes,
        Some("no") => Answer::No,
        _ => Answer::Abstain,
    };
    Ok(WordProblemOutcome { answer, trace: out.generated })
}

/// A hand-built network that emits `vocab[token_index]` whatever the
/// input: zero embeddings keep the state at zero through the attention
/// sublayer, the feed-forward biases lift every position to the all-ones
/// state, and one dominant output row selects the token.
pub fn constant_network(
    vocab: &[String],
    token_index: usize,
    n_max: usize,
    p: Precision,
) -> MhmParams {
    assert!(token_index < vocab.len(), "constant token outside the vocabulary");
    let d = 2;
    let one = FpNum::one(p);
    let ones = |rows: usize, cols: usize| {
        let mut m = FpMatrix::zero(rows, cols, p);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, one);
            }
        }
        m
    };
    let mut output = FpMatrix::zero(vocab.len(), d, p);
    for j in 0..d {
        output.set(token_index, j, one);
    }
    let fnn = FnnParams {
        w1: FpMatrix::zero(d, d, p),
        b1: ones(d, 1),
        w2: FpMatrix::zero(d, d, p),
        b2: ones(d, 1),
    };
    MhmParams {
        vocab: vocab.to_vec(),
        n_max,
        beta: one,
        token_embed: FpMatrix::zero(vocab.len(), d, p),
        pos_embed: FpMatrix::zero(n_max, d, p),
        output,
        layers: vec![DecoderLayer {
            w_q: FpMatrix::zero(d, d, p),
            w_k: FpMatrix::zero(d, d, p),
            w_v_tilde: FpMatrix::zero(d, d, p),
            fnn,
        }],
    }
}

/// Seeded random model: positive attention weights (as in the lowering
/// generators), signed embeddings, feed-forward and output maps, β = 1.
pub fn random_params(
    vocab: Vec<String>,
    d: usize,
    n_max: usize,
    n_layers: usize,
    p: Precision,
    seed: u64,
) -> MhmParams {
    let mut rng = SplitMix64::new(seed);
    let v = vocab.len();
    let layers = (0..n_layers)
        .map(|_| DecoderLayer {
            w_q: random_positive_matrix(&mut rng, d, d, p),
            w_k: random_positive_matrix(&mut rng, d, d, p),
            w_v_tilde: random_positive_matrix(&mut rng, d, d, p),
            fnn: FnnParams {
                w1: random_signed_matrix(&mut rng, d, d, p),
                b1: random_signed_matrix(&mut rng, d, 1, p),
                w2: random_signed_matrix(&mut rng, d, d, p),
                b2: random_signed_matrix(&mut rng, d, 1, p),
            },
        })
        .collect();
    MhmParams {
        vocab,
        n_max,
        beta: FpNum::one(p),
        token_embed: random_signed_matrix(&mut rng, v, d, p),
        pos_embed: random_signed_matrix(&mut rng, n_max, d, p),
        output: random_signed_matrix(&mut rng, v, d, p),
        layers,
    }
}

// ---------------------------------------------------------------------
// Serialized form
// ---------------------------------------------------------------------

/// JSON-facing description of [`MhmParams`]: matrices as fixture text,
/// β as an fp literal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CotDesc {
    pub vocab: Vec<String>,
    pub n_max: usize,
    pub beta: String,
    pub token_embed: String,
    pub pos_embed: String,
    pub output: String,
    pub layers: Vec<CotLayerDesc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CotLayerDesc {
    pub w_q: String,
    pub w_k: String,
    pub w_v_tilde: String,
    pub w1: String,
    pub b1: String,
    pub w2: String,
    pub b2: String,
}

impl CotDesc {
    pub fn from_params(p: &MhmParams) -> CotDesc {
        CotDesc {
            vocab: p.vocab.clone(),
            n_max: p.n_max,
            beta: p.beta.to_string(),
            token_embed: p.token_embed.fixture_string(),
            pos_embed: p.pos_embed.fixture_string(),
            output: p.output.fixture_string(),
            layers: p
                .layers
                .iter()
                .map(|l| CotLayerDesc {
                    w_q: l.w_q.fixture_string(),
                    w_k: l.w_k.fixture_string(),
                    w_v_tilde: l.w_v_tilde.fixture_string(),
                    w1: l.fnn.w1.fixture_string(),
                    b1: l.fnn.b1.fixture_string(),
                    w2: l.fnn.w2.fixture_string(),
                    b2: l.fnn.b2.fixture_string(),
                })
                .collect(),
        }
    }

    pub fn to_params(&self) -> Result<MhmParams, CotError> {
        let mat = |name: &str, text: &str| {
            FpMatrix::parse_fixture(text)
                .map_err(|e| CotError::Invalid(format!("bad matrix {name}: {e}")))
        };
        let beta = FpNum::parse_literal(&self.beta)
            .map_err(|e| CotError::Invalid(format!("bad beta: {e}")))?;
        let params = MhmParams {
            vocab: self.vocab.clone(),
            n_max: self.n_max,
            beta,
            token_embed: mat("token_embed", &self.token_embed)?,
            pos_embed: mat("pos_embed", &self.pos_embed)?,
            output: mat("output", &self.output)?,
            layers: self
                .layers
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    Ok(DecoderLayer {
                        w_q: mat(&format!("layer {i} w_q"), &l.w_q)?,
                        w_k: mat(&format!("layer {i} w_k"), &l.w_k)?,
                        w_v_tilde: mat(&format!("layer {i} w_v_tilde"), &l.w_v_tilde)?,
                        fnn: FnnParams {
                            w1: mat(&format!("layer {i} w1"), &l.w1)?,
                            b1: mat(&format!("layer {i} b1"), &l.b1)?,
                            w2: mat(&format!("layer {i} w2"), &l.w2)?,
                            b2: mat(&format!("layer {i} b2"), &l.b2)?,
                        },
                    })
                })
                .collect::<Result<_, CotError>>()?,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn from_json(text: &str) -> Result<CotDesc, CotError> {
        serde_json::from_str(text).map_err(|e| CotError::Invalid(format!("bad params file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }
}
