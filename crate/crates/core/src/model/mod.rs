//! The three-branch singleton classifier.
//!
//! ```text
//! mention ids ──embed──► conv{2,3,4}+ReLU ─► max-pool ─► concat ─► dense+ReLU ─┐
//! syntactic flags ─────► dense+ReLU+dropout ─► dense+ReLU+dropout ─────────────┼─► concat ─► head ─► softmax
//! context ids ──embed──► conv{2,3,4}+ReLU ─► max-pool ─► concat ─► dense+ReLU ─┘
//! ```
//!
//! The head is a stack of dense+ReLU+dropout layers followed by an affine
//! layer into the softmax. A disabled branch contributes a zero vector of its
//! usual width, so the head shape never depends on which features are used.
//! Every branch's parameters are allocated (in the same order) regardless of
//! which are enabled, so two configs that differ only in enabled branches
//! start from identical weights.

pub mod checkpoint;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::features::{EncodedExample, FeatureConfig};
use crate::tensor::ops;
use crate::tensor::{Parameter, RngState, Tensor};

/// Head layer sizes from the prose description of the network, usable in
/// place of the default `[32, 8]` via `final_hidden`.
pub const ALTERNATIVE_FINAL_HIDDEN: [usize; 3] = [64, 32, 16];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    /// Input lengths, context mode and enabled branches.
    pub features: FeatureConfig,
    pub filter_widths: Vec<usize>,
    pub filters_per_width: usize,
    pub cnn_dense_out: usize,
    pub syntactic_hidden: Vec<usize>,
    pub final_hidden: Vec<usize>,
    pub classes: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 300,
            features: FeatureConfig::default(),
            filter_widths: vec![2, 3, 4],
            filters_per_width: 64,
            cnn_dense_out: 16,
            syntactic_hidden: vec![32, 16],
            final_hidden: vec![32, 8],
            classes: 2,
            dropout_rate: 0.2,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.classes != 2 {
            return bad(format!("classes must be 2, got {}", self.classes));
        }
        if self.embed_dim == 0 || self.filters_per_width == 0 || self.cnn_dense_out == 0 {
            return bad("embed_dim, filters_per_width and cnn_dense_out must be positive".into());
        }
        if self.filter_widths.is_empty() || self.filter_widths.contains(&0) {
            return bad(format!("invalid filter widths {:?}", self.filter_widths));
        }
        if self.syntactic_hidden.contains(&0) || self.final_hidden.contains(&0) {
            return bad("hidden layer sizes must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        let widest = *self.filter_widths.iter().max().expect("non-empty");
        self.features.validate(widest)
    }

    /// Width of the syntactic branch output.
    pub fn syntactic_out(&self) -> usize {
        self.syntactic_hidden
            .last()
            .copied()
            .unwrap_or(self.features.syntactic_len())
    }

    /// Width of the concatenated branch outputs fed to the head.
    pub fn head_input(&self) -> usize {
        2 * self.cnn_dense_out + self.syntactic_out()
    }

    /// Closed-form number of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        let dense = |i: usize, o: usize| i * o + o;
        let f = self.filters_per_width;
        let convs: usize = self
            .filter_widths
            .iter()
            .map(|&k| k * self.embed_dim * f + f)
            .sum();
        let cnn = convs + dense(self.filter_widths.len() * f, self.cnn_dense_out);
        let chain = |input: usize, sizes: &[usize]| -> (usize, usize) {
            sizes
                .iter()
                .fold((0, input), |(n, i), &o| (n + dense(i, o), o))
        };
        let (syn, _) = chain(self.features.syntactic_len(), &self.syntactic_hidden);
        let (head, last) = chain(self.head_input(), &self.final_hidden);
        2 * cnn + syn + head + dense(last, self.classes)
    }
}

/// Shapes through one convolutional branch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BranchTrace {
    pub input: [usize; 2],
    pub conv: Vec<[usize; 2]>,
    pub pooled: usize,
    pub output: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeTrace {
    pub word: BranchTrace,
    pub context: BranchTrace,
    /// Syntactic branch widths, input first.
    pub syntactic: Vec<usize>,
    /// Head widths from the concatenated input to the class count.
    pub head: Vec<usize>,
}

impl ShapeTrace {
    pub fn expected(cfg: &ModelConfig) -> ShapeTrace {
        let branch = |len: usize| BranchTrace {
            input: [len, cfg.embed_dim],
            conv: cfg
                .filter_widths
                .iter()
                .map(|&k| [len - k + 1, cfg.filters_per_width])
                .collect(),
            pooled: cfg.filter_widths.len() * cfg.filters_per_width,
            output: cfg.cnn_dense_out,
        };
        let mut syntactic = vec![cfg.features.syntactic_len()];
        syntactic.extend(&cfg.syntactic_hidden);
        let mut head = vec![cfg.head_input()];
        head.extend(&cfg.final_hidden);
        head.push(cfg.classes);
        ShapeTrace {
            word: branch(cfg.features.max_mention_len),
            context: branch(cfg.features.context_len),
            syntactic,
            head,
        }
    }
}

impl fmt::Display for BranchTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let convs: Vec<String> = self.conv.iter().map(|[t, n]| format!("{t}x{n}")).collect();
        write!(
            f,
            "{}x{} -> {{{}}} -> {} -> {}",
            self.input[0],
            self.input[1],
            convs.join(","),
            self.pooled,
            self.output
        )
    }
}

impl fmt::Display for ShapeTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| {
            v.iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(" -> ")
        };
        writeln!(f, "word:      {}", self.word)?;
        writeln!(f, "context:   {}", self.context)?;
        writeln!(f, "syntactic: {}", join(&self.syntactic))?;
        write!(f, "head:      {}", join(&self.head))
    }
}

/// A weight and bias pair with their registry names.
#[derive(Clone, Debug, PartialEq)]
struct Layer {
    names: [String; 2],
    weight: Parameter,
    bias: Parameter,
}

impl Layer {
    fn new(name: &str, weight: Parameter, bias_len: usize) -> Layer {
        Layer {
            names: [format!("{name}.weight"), format!("{name}.bias")],
            weight,
            bias: Parameter::zeros(&[bias_len]),
        }
    }

    fn dense(name: &str, n_in: usize, n_out: usize, rng: &mut RngState) -> Layer {
        Layer::new(
            name,
            Parameter::glorot(&[n_in, n_out], n_in, n_out, rng),
            n_out,
        )
    }

    /// Fans follow the usual 2-D convolution convention with a `k x dim`
    /// receptive field and a single input channel.
    fn conv(name: &str, k: usize, dim: usize, filters: usize, rng: &mut RngState) -> Layer {
        let field = k * dim;
        Layer::new(
            name,
            Parameter::glorot(&[k, dim, filters], field, field * filters, rng),
            filters,
        )
    }

    fn params(&self) -> [(&str, &Parameter); 2] {
        [(&self.names[0], &self.weight), (&self.names[1], &self.bias)]
    }

    fn params_mut(&mut self) -> [(&str, &mut Parameter); 2] {
        [
            (&self.names[0], &mut self.weight),
            (&self.names[1], &mut self.bias),
        ]
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        ops::dense(x, &self.weight.value, &self.bias.value)
    }

    fn backward(&mut self, x: &Tensor, dy: &Tensor) -> Tensor {
        ops::dense_backward(
            x,
            &self.weight.value,
            dy,
            &mut self.weight.grad,
            &mut self.bias.grad,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
struct CnnBranch {
    convs: Vec<Layer>,
    dense: Layer,
}

#[derive(Clone, Debug)]
struct CnnCache {
    input: Tensor,
    conv_pre: Vec<Tensor>,
    pools: Vec<ops::MaxPool>,
    pooled: Tensor,
    dense_pre: Tensor,
    output: Tensor,
}

impl CnnBranch {
    fn new(name: &str, cfg: &ModelConfig, rng: &mut RngState) -> CnnBranch {
        let f = cfg.filters_per_width;
        let convs = cfg
            .filter_widths
            .iter()
            .map(|&k| Layer::conv(&format!("{name}.conv{k}"), k, cfg.embed_dim, f, rng))
            .collect();
        let dense = Layer::dense(
            &format!("{name}.dense"),
            cfg.filter_widths.len() * f,
            cfg.cnn_dense_out,
            rng,
        );
        CnnBranch { convs, dense }
    }

    fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.convs.iter().chain(std::iter::once(&self.dense))
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Layer> {
        self.convs
            .iter_mut()
            .chain(std::iter::once(&mut self.dense))
    }

    fn forward(&self, input: Tensor) -> Result<CnnCache> {
        let mut conv_pre = Vec::with_capacity(self.convs.len());
        let mut pools = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            let pre = ops::conv_text(&input, &conv.weight.value, &conv.bias.value)?;
            pools.push(ops::maxpool_over_time(&ops::relu(&pre))?);
            conv_pre.push(pre);
        }
        let pooled = ops::concat(&pools.iter().map(|p| &p.output).collect::<Vec<_>>())?;
        let dense_pre = self.dense.forward(&pooled)?;
        let output = ops::relu(&dense_pre);
        Ok(CnnCache {
            input,
            conv_pre,
            pools,
            pooled,
            dense_pre,
            output,
        })
    }

    /// Accumulates parameter gradients; no gradient flows to the frozen
    /// embeddings.
    fn backward(&mut self, cache: &CnnCache, dy: &Tensor) {
        let d_pre = ops::relu_backward(&cache.dense_pre, dy);
        let d_pooled = self.dense.backward(&cache.pooled, &d_pre);
        let widths: Vec<usize> = cache.pools.iter().map(|p| p.output.len()).collect();
        let pieces = ops::concat_backward(&d_pooled, &widths);
        for ((conv, piece), (pool, pre)) in self
            .convs
            .iter_mut()
            .zip(&pieces)
            .zip(cache.pools.iter().zip(&cache.conv_pre))
        {
            let d_act = ops::maxpool_backward(pool, piece);
            let d_conv = ops::relu_backward(pre, &d_act);
            ops::conv_text_backward(
                &cache.input,
                &conv.weight.value,
                &d_conv,
                &mut conv.weight.grad,
                &mut conv.bias.grad,
                false,
            );
        }
    }
}

/// Dense layers, each followed by ReLU and dropout.
#[derive(Clone, Debug, PartialEq)]
struct Mlp {
    layers: Vec<Layer>,
}

#[derive(Clone, Debug)]
struct MlpCache {
    inputs: Vec<Tensor>,
    pre: Vec<Tensor>,
    masks: Vec<Option<Vec<f64>>>,
    output: Tensor,
}

impl Mlp {
    fn new(name: &str, input: usize, sizes: &[usize], rng: &mut RngState) -> Mlp {
        let mut n_in = input;
        let layers = sizes
            .iter()
            .enumerate()
            .map(|(i, &n_out)| {
                let layer = Layer::dense(&format!("{name}.dense{i}"), n_in, n_out, rng);
                n_in = n_out;
                layer
            })
            .collect();
        Mlp { layers }
    }

    fn forward(&self, x: Tensor, rate: f64, mut rng: Option<&mut RngState>) -> Result<MlpCache> {
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
            masks: Vec::with_capacity(self.layers.len()),
            output: x,
        };
        for layer in &self.layers {
            let pre = layer.forward(&cache.output)?;
            let (out, mask) = match rng.as_deref_mut() {
                Some(r) => ops::dropout(&ops::relu(&pre), rate, r, true)?,
                None => (ops::relu(&pre), None),
            };
            cache.inputs.push(std::mem::replace(&mut cache.output, out));
            cache.pre.push(pre);
            cache.masks.push(mask);
        }
        Ok(cache)
    }

    fn backward(&mut self, cache: &MlpCache, dy: &Tensor) -> Tensor {
        let mut d = dy.clone();
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            let d_act = ops::dropout_backward(cache.masks[i].as_deref(), &d);
            let d_pre = ops::relu_backward(&cache.pre[i], &d_act);
            d = layer.backward(&cache.inputs[i], &d_pre);
        }
        d
    }
}

/// Everything a forward pass computed, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub probs: Tensor,
    word: Option<CnnCache>,
    context: Option<CnnCache>,
    syntactic: Option<MlpCache>,
    head: MlpCache,
}

impl ForwardPass {
    fn trace(&self, cfg: &ModelConfig) -> ShapeTrace {
        let branch = |c: &CnnCache| BranchTrace {
            input: [c.input.shape()[0], c.input.shape()[1]],
            conv: c
                .conv_pre
                .iter()
                .map(|t| [t.shape()[0], t.shape()[1]])
                .collect(),
            pooled: c.pooled.len(),
            output: c.output.len(),
        };
        let syntactic = match &self.syntactic {
            Some(s) => s
                .inputs
                .iter()
                .map(Tensor::len)
                .chain(std::iter::once(s.output.len()))
                .collect(),
            None => ShapeTrace::expected(cfg).syntactic,
        };
        let mut head: Vec<usize> = self.head.inputs.iter().map(Tensor::len).collect();
        head.push(self.head.output.len());
        head.push(self.probs.len());
        let expected = ShapeTrace::expected(cfg);
        ShapeTrace {
            word: self.word.as_ref().map_or(expected.word, branch),
            context: self.context.as_ref().map_or(expected.context, branch),
            syntactic,
            head,
        }
    }
}

/// Index of the largest probability; ties go to the lower class index.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug)]
pub struct SingletonModel {
    config: ModelConfig,
    embedding: Arc<EmbeddingTable>,
    word: CnnBranch,
    context: CnnBranch,
    syntactic: Mlp,
    head: Mlp,
    output: Layer,
}

impl SingletonModel {
    /// Build with weights drawn from a generator seeded by `cfg.seed`.
    pub fn build(cfg: ModelConfig, embedding: Arc<EmbeddingTable>) -> Result<SingletonModel> {
        let mut rng = RngState::new(cfg.seed);
        SingletonModel::build_with_rng(cfg, embedding, &mut rng)
    }

    pub fn build_with_rng(
        cfg: ModelConfig,
        embedding: Arc<EmbeddingTable>,
        rng: &mut RngState,
    ) -> Result<SingletonModel> {
        cfg.validate()?;
        if embedding.dim() != cfg.embed_dim {
            return Err(Error::InvalidConfig(format!(
                "embedding table has dimension {}, model expects {}",
                embedding.dim(),
                cfg.embed_dim
            )));
        }
        let word = CnnBranch::new("word", &cfg, rng);
        let context = CnnBranch::new("context", &cfg, rng);
        let syntactic = Mlp::new(
            "syntactic",
            cfg.features.syntactic_len(),
            &cfg.syntactic_hidden,
            rng,
        );
        let head = Mlp::new("head", cfg.head_input(), &cfg.final_hidden, rng);
        let last = cfg.final_hidden.last().copied().unwrap_or(cfg.head_input());
        let output = Layer::dense("head.out", last, cfg.classes, rng);
        let model = SingletonModel {
            config: cfg,
            embedding,
            word,
            context,
            syntactic,
            head,
            output,
        };
        model.check_shapes()?;
        Ok(model)
    }

    /// Runs a padding-only example through every branch and compares the
    /// observed shapes with the ones the config implies.
    fn check_shapes(&self) -> Result<()> {
        let features = &self.config.features;
        let probe = EncodedExample {
            mention_ids: vec![0; features.max_mention_len],
            context_ids: vec![0; features.context_len],
            syntactic: vec![0.0; features.syntactic_len()],
            label: None,
        };
        let observed = self.run(&probe, None, true)?.trace(&self.config);
        let expected = ShapeTrace::expected(&self.config);
        if observed != expected {
            return Err(Error::Shape(format!(
                "built network does not match its config:\nexpected\n{expected}\nobserved\n{observed}"
            )));
        }
        Ok(())
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn features(&self) -> &FeatureConfig {
        &self.config.features
    }

    pub fn embedding(&self) -> &Arc<EmbeddingTable> {
        &self.embedding
    }

    pub fn shape_trace(&self) -> ShapeTrace {
        ShapeTrace::expected(&self.config)
    }

    /// Named parameters in registry order.
    pub fn parameters(&self) -> Vec<(&str, &Parameter)> {
        self.word
            .layers()
            .chain(self.context.layers())
            .chain(&self.syntactic.layers)
            .chain(&self.head.layers)
            .chain(std::iter::once(&self.output))
            .flat_map(Layer::params)
            .collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<(&str, &mut Parameter)> {
        self.word
            .layers_mut()
            .chain(self.context.layers_mut())
            .chain(&mut self.syntactic.layers)
            .chain(&mut self.head.layers)
            .chain(std::iter::once(&mut self.output))
            .flat_map(Layer::params_mut)
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|(_, p)| p.len()).sum()
    }

    /// SHA-256 over parameter names and value bits, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (name, p) in self.parameters() {
            h.update(name.as_bytes());
            for v in p.value.data() {
                h.update(v.to_le_bytes());
            }
        }
        format!("{:x}", h.finalize())
    }

    pub fn zero_grads(&mut self) {
        for (_, p) in self.parameters_mut() {
            p.zero_grad();
        }
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for (_, p) in self.parameters_mut() {
            p.grad.data_mut().iter_mut().for_each(|g| *g *= factor);
        }
    }

    fn embed(&self, ids: &[usize]) -> Tensor {
        let dim = self.embedding.dim();
        let mut data = Vec::with_capacity(ids.len() * dim);
        for &id in ids {
            data.extend_from_slice(self.embedding.row(id));
        }
        Tensor::matrix(ids.len(), dim, data)
    }

    fn check_example(&self, ex: &EncodedExample) -> Result<()> {
        let f = &self.config.features;
        if ex.mention_ids.len() != f.max_mention_len
            || ex.context_ids.len() != f.context_len
            || ex.syntactic.len() != f.syntactic_len()
        {
            return Err(Error::Shape(format!(
                "example lengths (mention {}, context {}, syntactic {}) do not match config ({}, {}, {})",
                ex.mention_ids.len(),
                ex.context_ids.len(),
                ex.syntactic.len(),
                f.max_mention_len,
                f.context_len,
                f.syntactic_len()
            )));
        }
        let rows = self.embedding.rows();
        if let Some(&id) = ex
            .mention_ids
            .iter()
            .chain(&ex.context_ids)
            .find(|&&i| i >= rows)
        {
            return Err(Error::Shape(format!(
                "token index {id} outside embedding table of {rows} rows"
            )));
        }
        Ok(())
    }

    fn run(
        &self,
        ex: &EncodedExample,
        mut dropout: Option<&mut RngState>,
        all_branches: bool,
    ) -> Result<ForwardPass> {
        self.check_example(ex)?;
        let cfg = &self.config;
        let on = cfg.features.branches;
        let word = if on.words || all_branches {
            Some(self.word.forward(self.embed(&ex.mention_ids))?)
        } else {
            None
        };
        let context = if on.context || all_branches {
            Some(self.context.forward(self.embed(&ex.context_ids))?)
        } else {
            None
        };
        let syntactic = if on.syntactic || all_branches {
            let x = Tensor::vector(ex.syntactic.clone());
            Some(
                self.syntactic
                    .forward(x, cfg.dropout_rate, dropout.as_deref_mut())?,
            )
        } else {
            None
        };
        let zeros_cnn = Tensor::zeros(&[cfg.cnn_dense_out]);
        let zeros_syn = Tensor::zeros(&[cfg.syntactic_out()]);
        let part = |enabled: bool, out: Option<&Tensor>, zero: &Tensor| -> Tensor {
            match out {
                Some(t) if enabled => t.clone(),
                _ => zero.clone(),
            }
        };
        let head_in = ops::concat(&[
            &part(on.words, word.as_ref().map(|c| &c.output), &zeros_cnn),
            &part(
                on.syntactic,
                syntactic.as_ref().map(|c| &c.output),
                &zeros_syn,
            ),
            &part(on.context, context.as_ref().map(|c| &c.output), &zeros_cnn),
        ])?;
        let head = self.head.forward(head_in, cfg.dropout_rate, dropout)?;
        let logits = self.output.forward(&head.output)?;
        let probs = ops::softmax(&logits)?;
        Ok(ForwardPass {
            probs,
            word: word.filter(|_| on.words),
            context: context.filter(|_| on.context),
            syntactic: syntactic.filter(|_| on.syntactic),
            head,
        })
    }

    /// Forward pass; dropout is active exactly when a generator is given.
    pub fn forward_pass(
        &self,
        ex: &EncodedExample,
        dropout: Option<&mut RngState>,
    ) -> Result<ForwardPass> {
        self.run(ex, dropout, false)
    }

    /// Class probabilities `[p_non_singleton, p_singleton]`.
    pub fn forward(
        &self,
        ex: &EncodedExample,
        training: bool,
        rng: &mut RngState,
    ) -> Result<Tensor> {
        let rng = if training { Some(rng) } else { None };
        Ok(self.forward_pass(ex, rng)?.probs)
    }

    /// Evaluation-mode probabilities.
    pub fn probabilities(&self, ex: &EncodedExample) -> Result<Tensor> {
        Ok(self.forward_pass(ex, None)?.probs)
    }

    /// Most likely class, ties resolved to class 0.
    pub fn predict(&self, ex: &EncodedExample) -> Result<usize> {
        Ok(argmax(self.probabilities(ex)?.data()))
    }

    /// Evaluation-mode cross-entropy loss.
    pub fn loss(&self, ex: &EncodedExample, label: usize) -> Result<f64> {
        ops::sparse_ce_loss(&self.probabilities(ex)?, label)
    }

    /// Adds `scale * d loss / d theta` for the pass into every parameter's
    /// gradient accumulator.
    pub fn backward(&mut self, pass: &ForwardPass, label: usize, scale: f64) -> Result<()> {
        let mut dz = ops::softmax_ce_backward(&pass.probs, label)?;
        dz.data_mut().iter_mut().for_each(|g| *g *= scale);
        let d_head_out = self.output.backward(&pass.head.output, &dz);
        let d_head_in = self.head.backward(&pass.head, &d_head_out);
        let cnn = self.config.cnn_dense_out;
        let syn = self.config.syntactic_out();
        let parts = ops::concat_backward(&d_head_in, &[cnn, syn, cnn]);
        if let Some(c) = &pass.word {
            self.word.backward(c, &parts[0]);
        }
        if let Some(c) = &pass.syntactic {
            self.syntactic.backward(c, &parts[1]);
        }
        if let Some(c) = &pass.context {
            self.context.backward(c, &parts[2]);
        }
        Ok(())
    }

    /// Loss of one example, accumulating its scaled gradient.
    pub fn accumulate(
        &mut self,
        ex: &EncodedExample,
        label: usize,
        scale: f64,
        dropout: Option<&mut RngState>,
    ) -> Result<(f64, Tensor)> {
        let pass = self.forward_pass(ex, dropout)?;
        let loss = ops::sparse_ce_loss(&pass.probs, label)?;
        self.backward(&pass, label, scale)?;
        Ok((loss, pass.probs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use crate::features::Branches;
    use crate::tensor::gradcheck::{central_difference, GradCheck};

    fn table(words: usize, dim: usize, seed: u64) -> Arc<EmbeddingTable> {
        let mut rng = RngState::new(seed);
        let entries: Vec<(String, Vec<f64>)> = (0..words)
            .map(|i| {
                let v = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
                (format!("w{i}"), v)
            })
            .collect();
        Arc::new(EmbeddingTable::from_vectors(dim, entries).unwrap())
    }

    fn small_config(seed: u64) -> ModelConfig {
        ModelConfig {
            embed_dim: 5,
            features: FeatureConfig {
                max_mention_len: 5,
                context_len: 6,
                ..FeatureConfig::default()
            },
            filter_widths: vec![2, 3],
            filters_per_width: 3,
            cnn_dense_out: 4,
            syntactic_hidden: vec![4, 3],
            final_hidden: vec![5, 3],
            seed,
            ..ModelConfig::default()
        }
    }

    fn random_example(cfg: &ModelConfig, vocab: usize, rng: &mut RngState) -> EncodedExample {
        let f = &cfg.features;
        EncodedExample {
            mention_ids: (0..f.max_mention_len)
                .map(|_| 1 + rng.below(vocab))
                .collect(),
            context_ids: (0..f.context_len).map(|_| 1 + rng.below(vocab)).collect(),
            syntactic: (0..f.syntactic_len())
                .map(|_| rng.below(2) as f64)
                .collect(),
            label: Label::from_index(rng.below(2)),
        }
    }

    /// Biases start at zero; spread them so no pre-activation sits on a ReLU
    /// kink during finite differencing.
    fn jitter_biases(model: &mut SingletonModel, rng: &mut RngState) {
        for (name, p) in model.parameters_mut() {
            if name.ends_with(".bias") {
                p.value
                    .data_mut()
                    .iter_mut()
                    .for_each(|b| *b = rng.uniform(-0.3, 0.3));
            }
        }
    }

    fn model_gradcheck(
        model: &mut SingletonModel,
        ex: &EncodedExample,
        coords: &[(usize, usize)],
    ) -> GradCheck {
        let label = ex.label.unwrap().index();
        model.zero_grads();
        model.accumulate(ex, label, 1.0, None).unwrap();
        let analytic: Vec<Vec<f64>> = model
            .parameters()
            .iter()
            .map(|(_, p)| p.grad.data().to_vec())
            .collect();
        let mut report = GradCheck::empty();
        for (n, &(pi, ei)) in coords.iter().enumerate() {
            let mut point = [model.parameters()[pi].1.value.data()[ei]];
            let mut f = |x: &[f64]| {
                model.parameters_mut()[pi].1.value.data_mut()[ei] = x[0];
                model.loss(ex, label).unwrap()
            };
            let numeric = central_difference(&mut f, &mut point, 0, 1e-5);
            model.parameters_mut()[pi].1.value.data_mut()[ei] = point[0];
            report.observe(n, analytic[pi][ei], numeric);
        }
        report
    }

    #[test]
    fn default_parameter_count_matches_closed_form() {
        let cfg = ModelConfig::default();
        let d = 300;
        let cnn: usize = [2, 3, 4].iter().map(|k| k * d * 64 + 64).sum::<usize>() + 192 * 16 + 16;
        let syn = 3 * 32 + 32 + 32 * 16 + 16;
        let head = 48 * 32 + 32 + 32 * 8 + 8 + 8 * 2 + 2;
        assert_eq!(cfg.parameter_count(), 2 * cnn + syn + head);
        let model = SingletonModel::build(cfg, table(3, d, 1)).unwrap();
        assert_eq!(model.parameter_count(), 2 * cnn + syn + head);
    }

    #[test]
    fn default_shape_trace() {
        let model = SingletonModel::build(ModelConfig::default(), table(3, 300, 1)).unwrap();
        let t = model.shape_trace();
        for b in [&t.word, &t.context] {
            assert_eq!(b.input, [10, 300]);
            assert_eq!(b.conv, vec![[9, 64], [8, 64], [7, 64]]);
            assert_eq!(b.pooled, 192);
            assert_eq!(b.output, 16);
        }
        assert_eq!(t.syntactic, vec![3, 32, 16]);
        assert_eq!(t.head, vec![48, 32, 8, 2]);
    }

    #[test]
    fn invalid_configs_rejected() {
        let cfg = ModelConfig {
            filter_widths: vec![2, 11],
            ..ModelConfig::default()
        };
        assert!(SingletonModel::build(cfg, table(3, 300, 1)).is_err());
        let mut cfg = small_config(1);
        cfg.features.branches = Branches {
            words: false,
            context: false,
            syntactic: false,
        };
        assert!(SingletonModel::build(cfg, table(3, 5, 1)).is_err());
        assert!(SingletonModel::build(small_config(1), table(3, 6, 1)).is_err());
    }

    #[test]
    fn same_seed_same_weights() {
        let t = table(5, 5, 2);
        let a = SingletonModel::build(small_config(9), t.clone()).unwrap();
        let b = SingletonModel::build(small_config(9), t.clone()).unwrap();
        let c = SingletonModel::build(small_config(10), t).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn registry_names_are_unique() {
        let model = SingletonModel::build(small_config(1), table(3, 5, 1)).unwrap();
        let names: Vec<&str> = model.parameters().iter().map(|(n, _)| *n).collect();
        let unique: std::collections::HashSet<_> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
        assert_eq!(names[0], "word.conv2.weight");
        assert_eq!(*names.last().unwrap(), "head.out.bias");
    }

    #[test]
    fn outputs_are_distributions() {
        let t = table(20, 5, 3);
        let cfg = small_config(4);
        let model = SingletonModel::build(cfg.clone(), t).unwrap();
        let mut rng = RngState::new(5);
        for _ in 0..50 {
            let ex = random_example(&cfg, 20, &mut rng);
            for training in [false, true] {
                let p = model.forward(&ex, training, &mut rng).unwrap();
                assert_eq!(p.len(), 2);
                assert!(p.data().iter().all(|&x| x > 0.0 && x < 1.0));
                assert!((p.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn all_oov_examples_are_indistinguishable() {
        let cfg = small_config(4);
        let model = SingletonModel::build(cfg.clone(), table(20, 5, 3)).unwrap();
        let blank = |label| EncodedExample {
            mention_ids: vec![0; 5],
            context_ids: vec![0; 6],
            syntactic: vec![0.0; 3],
            label,
        };
        let a = model.probabilities(&blank(Some(Label::Singleton))).unwrap();
        let b = model.probabilities(&blank(None)).unwrap();
        assert_eq!(a, b);
        assert!((a.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disabled_branch_equals_zeroed_branch() {
        let t = table(20, 5, 3);
        let mut ablated_cfg = small_config(8);
        ablated_cfg.features.branches.context = false;
        let ablated = SingletonModel::build(ablated_cfg, t.clone()).unwrap();
        let mut full = SingletonModel::build(small_config(8), t).unwrap();
        for (name, p) in full.parameters_mut() {
            if name.starts_with("context.") {
                p.value.fill(0.0);
            }
        }
        let mut rng = RngState::new(1);
        for _ in 0..20 {
            let ex = random_example(&small_config(8), 20, &mut rng);
            let zeroed = EncodedExample {
                context_ids: vec![0; ex.context_ids.len()],
                ..ex.clone()
            };
            assert_eq!(
                ablated.probabilities(&ex).unwrap(),
                full.probabilities(&zeroed).unwrap()
            );
        }
    }

    #[test]
    fn predict_tie_goes_to_class_zero() {
        assert_eq!(argmax(&[0.7, 0.3]), 0);
        assert_eq!(argmax(&[0.3, 0.7]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn example_shape_mismatch_is_an_error() {
        let model = SingletonModel::build(small_config(1), table(3, 5, 1)).unwrap();
        let ex = EncodedExample {
            mention_ids: vec![0; 4],
            context_ids: vec![0; 6],
            syntactic: vec![0.0; 3],
            label: None,
        };
        assert!(matches!(model.probabilities(&ex), Err(Error::Shape(_))));
        let ex = EncodedExample {
            mention_ids: vec![99; 5],
            context_ids: vec![0; 6],
            syntactic: vec![0.0; 3],
            label: None,
        };
        assert!(matches!(model.probabilities(&ex), Err(Error::Shape(_))));
    }

    #[test]
    fn small_model_gradient_check_all_coordinates() {
        let t = table(12, 5, 11);
        let mut rng = RngState::new(12);
        for seed in 0..5 {
            let cfg = small_config(seed);
            let mut model = SingletonModel::build(cfg.clone(), t.clone()).unwrap();
            jitter_biases(&mut model, &mut rng);
            let ex = random_example(&cfg, 12, &mut rng);
            let coords: Vec<(usize, usize)> = model
                .parameters()
                .iter()
                .enumerate()
                .flat_map(|(pi, (_, p))| (0..p.len()).map(move |ei| (pi, ei)))
                .collect();
            let r = model_gradcheck(&mut model, &ex, &coords);
            assert_eq!(r.checked, model.parameter_count());
            assert!(r.max_rel_error < 1e-4, "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn ablated_model_gradient_check() {
        let t = table(12, 5, 11);
        let mut rng = RngState::new(13);
        for branches in Branches::ABLATIONS {
            let mut cfg = small_config(3);
            cfg.features.branches = branches;
            let mut model = SingletonModel::build(cfg.clone(), t.clone()).unwrap();
            jitter_biases(&mut model, &mut rng);
            let ex = random_example(&cfg, 12, &mut rng);
            let coords: Vec<(usize, usize)> = model
                .parameters()
                .iter()
                .enumerate()
                .flat_map(|(pi, (_, p))| (0..p.len()).map(move |ei| (pi, ei)))
                .collect();
            let r = model_gradcheck(&mut model, &ex, &coords);
            assert!(r.max_rel_error < 1e-4, "{branches}: {r:?}");
        }
    }
}
