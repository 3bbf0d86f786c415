//! Desk-scale classifiers with a named, ordered parameter registry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{ops, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mlp,
    Convnet,
}

/// One convolution block: conv, bias, relu, then 2×2 mean pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// `[d]` for an MLP, `[channels, height, width]` for a convnet.
    pub input_shape: Vec<usize>,
    pub classes: usize,
    /// MLP widths `d → … → C`.
    pub layer_sizes: Vec<usize>,
    pub conv_stack: Vec<ConvLayer>,
    /// Dense widths after the conv stack, ending with `C`.
    pub head_sizes: Vec<usize>,
}

impl ModelSpec {
    pub fn mlp(layer_sizes: Vec<usize>, classes: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Mlp,
            input_shape: vec![layer_sizes.first().copied().unwrap_or(0)],
            classes,
            layer_sizes,
            conv_stack: Vec::new(),
            head_sizes: Vec::new(),
        }
    }

    pub fn convnet(
        input_shape: Vec<usize>,
        conv_stack: Vec<ConvLayer>,
        head_sizes: Vec<usize>,
        classes: usize,
    ) -> Self {
        ModelSpec {
            kind: ModelKind::Convnet,
            input_shape,
            classes,
            layer_sizes: Vec::new(),
            conv_stack,
            head_sizes,
        }
    }

    /// The default desk MLP `d–256–128–C`.
    pub fn default_mlp(input_dim: usize, classes: usize) -> Self {
        Self::mlp(vec![input_dim, 256, 128, classes], classes)
    }

    /// The default desk convnet: 8 and 16 channel 3×3 blocks and one dense head.
    pub fn default_convnet(input_shape: Vec<usize>, classes: usize) -> Self {
        let block = |cout| ConvLayer {
            cout,
            kernel: 3,
            stride: 1,
            padding: 1,
        };
        Self::convnet(input_shape, vec![block(8), block(16)], vec![classes], classes)
    }

    pub fn input_dim(&self) -> usize {
        self.input_shape.iter().product()
    }

    /// Checks dimensional consistency and returns the dense layer widths
    /// (for convnets, starting from the flattened conv output).
    fn validate(&self) -> Result<Vec<usize>> {
        if self.classes < 2 {
            return Err(Error::Spec(format!("need at least 2 classes, got {}", self.classes)));
        }
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(Error::Spec(format!("bad input shape {:?}", self.input_shape)));
        }
        let dense = match self.kind {
            ModelKind::Mlp => {
                let sizes = &self.layer_sizes;
                if sizes.len() < 2 || sizes.contains(&0) {
                    return Err(Error::Spec(format!("bad MLP layer sizes {sizes:?}")));
                }
                if sizes[0] != self.input_dim() {
                    return Err(Error::Spec(format!(
                        "first layer size {} does not match input dimension {}",
                        sizes[0],
                        self.input_dim()
                    )));
                }
                sizes.clone()
            }
            ModelKind::Convnet => {
                let [mut c, mut h, mut w] = match self.input_shape[..] {
                    [c, h, w] => [c, h, w],
                    _ => {
                        return Err(Error::Spec(format!(
                            "convnet input must be [channels, height, width], got {:?}",
                            self.input_shape
                        )))
                    }
                };
                for (i, layer) in self.conv_stack.iter().enumerate() {
                    let k = layer.kernel;
                    if layer.cout == 0 || k == 0 || layer.stride == 0 {
                        return Err(Error::Spec(format!("conv layer {i} has a zero size")));
                    }
                    if k > h + 2 * layer.padding || k > w + 2 * layer.padding {
                        return Err(Error::Spec(format!(
                            "conv layer {i}: kernel {k} exceeds padded input {h}x{w}"
                        )));
                    }
                    h = (h + 2 * layer.padding - k) / layer.stride + 1;
                    w = (w + 2 * layer.padding - k) / layer.stride + 1;
                    if h < 2 || w < 2 {
                        return Err(Error::Spec(format!("conv layer {i}: output {h}x{w} too small to pool")));
                    }
                    h /= 2;
                    w /= 2;
                    c = layer.cout;
                }
                if self.head_sizes.is_empty() || self.head_sizes.contains(&0) {
                    return Err(Error::Spec(format!("bad head sizes {:?}", self.head_sizes)));
                }
                let mut sizes = vec![c * h * w];
                sizes.extend(&self.head_sizes);
                sizes
            }
        };
        if *dense.last().expect("nonempty") != self.classes {
            return Err(Error::Spec(format!(
                "last layer size {} does not match class count {}",
                dense.last().unwrap(),
                self.classes
            )));
        }
        Ok(dense)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub tensor: Tensor,
    pub prunable: bool,
    pub layer_index: usize,
}

/// Ordered parameters. Weights and kernels are prunable; biases are not.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamRegistry {
    entries: Vec<ParamEntry>,
}

impl ParamRegistry {
    pub fn new(entries: Vec<ParamEntry>) -> Result<Self> {
        let mut names: Vec<&str> = entries.iter().map(|e| e.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Spec("duplicate parameter names".into()));
        }
        Ok(ParamRegistry { entries })
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tensors(&self) -> Vec<Tensor> {
        self.entries.iter().map(|e| e.tensor.clone()).collect()
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.entries[i].tensor
    }

    /// Replaces every tensor, keeping names and flags.
    pub fn set_tensors(&mut self, tensors: Vec<Tensor>) -> Result<()> {
        if tensors.len() != self.entries.len() {
            return Err(Error::Shape(format!(
                "{} tensors for {} parameters",
                tensors.len(),
                self.entries.len()
            )));
        }
        for (e, t) in self.entries.iter().zip(&tensors) {
            e.tensor.same_shape(t, &e.name)?;
        }
        for (e, t) in self.entries.iter_mut().zip(tensors) {
            e.tensor = t;
        }
        Ok(())
    }

    pub fn count_params(&self, prunable_only: bool) -> usize {
        self.entries
            .iter()
            .filter(|e| e.prunable || !prunable_only)
            .map(|e| e.tensor.len())
            .sum()
    }

    pub fn prunable(&self) -> impl Iterator<Item = (usize, &ParamEntry)> {
        self.entries.iter().enumerate().filter(|(_, e)| e.prunable)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    params: ParamRegistry,
}

impl Model {
    /// Kaiming-scaled normal weights (`sqrt(2 / fan_in)`), zero biases.
    pub fn build(spec: ModelSpec, seed: u64) -> Result<Model> {
        let dense = spec.validate()?;
        let mut entries = Vec::new();
        let mut layer = 0;
        let init = |shape: Vec<usize>, fan_in: usize, layer: usize| -> Result<Tensor> {
            let s = rng::derive_seed(seed, layer as u64);
            Tensor::randn(&shape, s, (2.0 / fan_in as f64).sqrt())
        };
        if spec.kind == ModelKind::Convnet {
            let mut cin = spec.input_shape[0];
            for conv in &spec.conv_stack {
                let shape = vec![conv.cout, cin, conv.kernel, conv.kernel];
                entries.push(ParamEntry {
                    name: format!("conv{layer}.weight"),
                    tensor: init(shape, cin * conv.kernel * conv.kernel, layer)?,
                    prunable: true,
                    layer_index: layer,
                });
                entries.push(ParamEntry {
                    name: format!("conv{layer}.bias"),
                    tensor: Tensor::zeros(&[conv.cout])?,
                    prunable: false,
                    layer_index: layer,
                });
                cin = conv.cout;
                layer += 1;
            }
        }
        for (i, pair) in dense.windows(2).enumerate() {
            entries.push(ParamEntry {
                name: format!("fc{i}.weight"),
                tensor: init(vec![pair[0], pair[1]], pair[0], layer)?,
                prunable: true,
                layer_index: layer,
            });
            entries.push(ParamEntry {
                name: format!("fc{i}.bias"),
                tensor: Tensor::zeros(&[pair[1]])?,
                prunable: false,
                layer_index: layer,
            });
            layer += 1;
        }
        Ok(Model {
            spec,
            params: ParamRegistry::new(entries)?,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamRegistry {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamRegistry {
        &mut self.params
    }

    pub fn count_params(&self, prunable_only: bool) -> usize {
        self.params.count_params(prunable_only)
    }

    fn check_input(&self, batch: &Tensor) -> Result<()> {
        let shape = batch.shape();
        let ok = match self.spec.kind {
            ModelKind::Mlp => shape[1..].iter().product::<usize>() == self.spec.input_dim(),
            ModelKind::Convnet => shape[1..] == self.spec.input_shape[..],
        };
        if !ok || shape.len() < 2 {
            return Err(Error::Shape(format!(
                "batch {:?} does not match input shape {:?}",
                shape, self.spec.input_shape
            )));
        }
        Ok(())
    }

    /// Records the forward pass on `tape`, with `params` in registry order.
    pub fn forward_on(&self, tape: &mut Tape, input: Var, params: &[Var]) -> Result<Var> {
        if params.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "{} parameter vars for {} parameters",
                params.len(),
                self.params.len()
            )));
        }
        let mut p = params.iter().copied();
        let mut x = input;
        if self.spec.kind == ModelKind::Convnet {
            for conv in &self.spec.conv_stack {
                let (k, b) = (p.next().unwrap(), p.next().unwrap());
                x = tape.conv2d(x, k, conv.stride, conv.padding)?;
                x = tape.add_channel_bias(x, b)?;
                x = tape.relu(x)?;
                x = tape.mean_pool2(x)?;
            }
        }
        if tape.value(x)?.shape().len() != 2 {
            x = tape.flatten(x)?;
        }
        let dense_layers = (self.params.len() - 2 * self.spec.conv_stack.len()) / 2;
        for i in 0..dense_layers {
            let (w, b) = (p.next().unwrap(), p.next().unwrap());
            x = tape.matmul(x, w)?;
            x = tape.add_bias(x, b)?;
            if i + 1 < dense_layers {
                x = tape.relu(x)?;
            }
        }
        Ok(x)
    }

    /// Logits for `batch` without recording gradients.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_input(batch)?;
        let mut tape = Tape::new();
        let input = tape.constant(batch.clone());
        let params: Vec<Var> = self
            .params
            .entries()
            .iter()
            .map(|e| tape.constant(e.tensor.clone()))
            .collect();
        let out = self.forward_on(&mut tape, input, &params)?;
        Ok(tape.value(out)?.clone())
    }

    /// Mean cross-entropy, its gradient with respect to `params` (registry
    /// order) and the logits, evaluated at `params` rather than the model's
    /// own parameters.
    pub fn loss_and_grad_at(
        &self,
        params: &[Tensor],
        batch: &Tensor,
        labels: &[usize],
    ) -> Result<(f64, Vec<Tensor>, Tensor)> {
        self.check_input(batch)?;
        let mut tape = Tape::new();
        let input = tape.constant(batch.clone());
        let vars: Vec<Var> = params.iter().map(|t| tape.param(t.clone())).collect();
        let logits = self.forward_on(&mut tape, input, &vars)?;
        let loss = tape.softmax_cross_entropy(logits, labels)?;
        let loss_value = tape.value(loss)?.item();
        if !loss_value.is_finite() {
            return Err(Error::Numeric(format!("loss is {loss_value}")));
        }
        let mut grads = tape.backward(loss)?;
        let g = vars
            .iter()
            .zip(params)
            .map(|(&v, p)| grads.take(v, p))
            .collect();
        Ok((loss_value, g, tape.value(logits)?.clone()))
    }

    pub fn loss_and_grad(&self, batch: &Tensor, labels: &[usize]) -> Result<(f64, Vec<Tensor>, Tensor)> {
        self.loss_and_grad_at(&self.params.tensors(), batch, labels)
    }

    /// Predicted classes; ties resolve to the smallest class index.
    pub fn predict(&self, batch: &Tensor) -> Result<Vec<usize>> {
        ops::argmax_rows(&self.forward(batch)?)
    }
}
