//! Sequential model assembly: declarative specs, shape-chain validation,
//! end-to-end forward/backward, parameter counting, and the versioned
//! `.sfmodel.json` on-disk format.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::NormStats;
use crate::error::{Error, Result};
use crate::layers::{
    AffineScale, Conv1DLayer, DenseLayer, GlobalAvgPool, Layer, LayerCache, LstmLayer,
};
use crate::tensor::{Activation, Tensor};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Layer hyperparameters in a declarative model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv1d { filters: usize, kernel_size: usize },
    Lstm { units: usize, return_sequences: bool },
    Dense { units: usize, activation: Activation },
    GlobalAvgPool,
    /// Affine output scaling; instantiated from the model's normalization
    /// statistics rather than trained.
    Scale,
}

/// Declarative architecture: input window geometry plus an ordered layer
/// list. [`ModelSpec::validate`] checks that adjacent shapes chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_window: usize,
    pub input_features: usize,
    pub layers: Vec<LayerSpec>,
}

/// Shape of one sample flowing between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleShape {
    Seq { time: usize, channels: usize },
    Flat { width: usize },
}

impl std::fmt::Display for SampleShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SampleShape::Seq { time, channels } => write!(f, "[{time}, {channels}]"),
            SampleShape::Flat { width } => write!(f, "[{width}]"),
        }
    }
}

impl ModelSpec {
    /// Walks the layer chain and returns the output sample shape, or an
    /// `InvalidSpec` error naming the first layer whose input does not fit.
    pub fn validate(&self) -> Result<SampleShape> {
        if self.input_window == 0 || self.input_features == 0 {
            return Err(Error::InvalidSpec(
                "input_window and input_features must be positive".to_string(),
            ));
        }
        let mut shape = SampleShape::Seq {
            time: self.input_window,
            channels: self.input_features,
        };
        for (idx, layer) in self.layers.iter().enumerate() {
            shape = match (layer, shape) {
                (LayerSpec::Conv1d { filters, kernel_size }, SampleShape::Seq { time, .. }) => {
                    if *filters == 0 || *kernel_size == 0 {
                        return Err(Error::InvalidSpec(format!(
                            "layer {idx}: conv1d filters and kernel_size must be positive"
                        )));
                    }
                    if time < *kernel_size {
                        return Err(Error::InvalidSpec(format!(
                            "layer {idx}: conv1d kernel {kernel_size} exceeds input length {time}"
                        )));
                    }
                    SampleShape::Seq {
                        time: time - kernel_size + 1,
                        channels: *filters,
                    }
                }
                (LayerSpec::Lstm { units, return_sequences }, SampleShape::Seq { time, .. }) => {
                    if *units == 0 {
                        return Err(Error::InvalidSpec(format!(
                            "layer {idx}: lstm units must be positive"
                        )));
                    }
                    if *return_sequences {
                        SampleShape::Seq {
                            time,
                            channels: *units,
                        }
                    } else {
                        SampleShape::Flat { width: *units }
                    }
                }
                (LayerSpec::Dense { units, .. }, SampleShape::Flat { .. }) => {
                    if *units == 0 {
                        return Err(Error::InvalidSpec(format!(
                            "layer {idx}: dense units must be positive"
                        )));
                    }
                    SampleShape::Flat { width: *units }
                }
                (LayerSpec::GlobalAvgPool, SampleShape::Seq { channels, .. }) => {
                    SampleShape::Flat { width: channels }
                }
                (LayerSpec::Scale, s) => s,
                (layer, shape) => {
                    return Err(Error::InvalidSpec(format!(
                        "layer {idx}: {layer:?} cannot consume input of shape {shape}"
                    )));
                }
            };
        }
        Ok(shape)
    }
}

/// Metadata carried with a model through training and serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub seed: u64,
    pub normalization: NormStats,
}

/// An instantiated model: spec, parameterized layers, and metadata.
/// `forward` retains per-layer caches so a following `backward` can run.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    layers: Vec<Layer>,
    meta: ModelMeta,
    caches: Option<Vec<LayerCache>>,
}

/// Parameter gradients mirroring [`Model::layer_parameters`] layout:
/// one inner vec per layer, in layer order.
pub type ModelGrads = Vec<Vec<Tensor>>;

/// Instantiates a validated spec with seeded parameters. `Scale` layers are
/// set to denormalize with the supplied statistics.
pub fn build_model(spec: ModelSpec, seed: u64, normalization: NormStats) -> Result<Model> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shape = SampleShape::Seq {
        time: spec.input_window,
        channels: spec.input_features,
    };
    let mut layers = Vec::with_capacity(spec.layers.len());
    for layer_spec in &spec.layers {
        let (layer, next) = match (layer_spec, shape) {
            (LayerSpec::Conv1d { filters, kernel_size }, SampleShape::Seq { time, channels }) => (
                Layer::Conv1D(Conv1DLayer::init(
                    *kernel_size,
                    channels,
                    *filters,
                    Activation::Relu,
                    &mut rng,
                )?),
                SampleShape::Seq {
                    time: time - kernel_size + 1,
                    channels: *filters,
                },
            ),
            (LayerSpec::Lstm { units, return_sequences }, SampleShape::Seq { time, channels }) => (
                Layer::Lstm(LstmLayer::init(channels, *units, *return_sequences, &mut rng)?),
                if *return_sequences {
                    SampleShape::Seq {
                        time,
                        channels: *units,
                    }
                } else {
                    SampleShape::Flat { width: *units }
                },
            ),
            (LayerSpec::Dense { units, activation }, SampleShape::Flat { width }) => (
                Layer::Dense(DenseLayer::init(width, *units, *activation, &mut rng)?),
                SampleShape::Flat { width: *units },
            ),
            (LayerSpec::GlobalAvgPool, SampleShape::Seq { channels, .. }) => (
                Layer::Pool(GlobalAvgPool),
                SampleShape::Flat { width: channels },
            ),
            (LayerSpec::Scale, s) => (
                Layer::Scale(AffineScale::new(normalization.std, normalization.mean)?),
                s,
            ),
            // unreachable after validate(), but keep the error honest
            (layer, shape) => {
                return Err(Error::InvalidSpec(format!(
                    "{layer:?} cannot consume input of shape {shape}"
                )))
            }
        };
        layers.push(layer);
        shape = next;
    }
    Ok(Model {
        spec,
        layers,
        meta: ModelMeta {
            seed,
            normalization,
        },
        caches: None,
    })
}

/// The forecasting stack: Conv1D(60 filters, k=5, ReLU) feeding two
/// 60-unit LSTMs, a 30/10/1 dense head, and a denormalizing scale layer
/// over a 60-step single-feature window.
pub fn cnn_lstm_spec() -> ModelSpec {
    cnn_lstm_spec_with_window(60)
}

/// [`cnn_lstm_spec`] over a custom window length (>= 5, so the conv kernel
/// fits). The layer stack is unchanged.
pub fn cnn_lstm_spec_with_window(window: usize) -> ModelSpec {
    ModelSpec {
        input_window: window,
        input_features: 1,
        layers: vec![
            LayerSpec::Conv1d {
                filters: 60,
                kernel_size: 5,
            },
            LayerSpec::Lstm {
                units: 60,
                return_sequences: true,
            },
            LayerSpec::Lstm {
                units: 60,
                return_sequences: false,
            },
            LayerSpec::Dense {
                units: 30,
                activation: Activation::Relu,
            },
            LayerSpec::Dense {
                units: 10,
                activation: Activation::Relu,
            },
            LayerSpec::Dense {
                units: 1,
                activation: Activation::Linear,
            },
            LayerSpec::Scale,
        ],
    }
}

/// [`cnn_lstm_spec`] with a second conv block inserted after the first;
/// kept for experimentation, not used by the standard stack.
pub fn cnn_lstm_spec_double_conv() -> ModelSpec {
    let mut spec = cnn_lstm_spec();
    spec.layers.insert(
        1,
        LayerSpec::Conv1d {
            filters: 60,
            kernel_size: 5,
        },
    );
    spec
}

/// Builds the standard CNN-LSTM forecasting model. `scale` and `offset`
/// configure the output denormalization (std and mean of the training data).
pub fn build_cnn_lstm(seed: u64, scale: f64, offset: f64) -> Result<Model> {
    build_model(
        cnn_lstm_spec(),
        seed,
        NormStats {
            mean: offset,
            std: scale,
        },
    )
}

/// Per-layer parameter counts with explanatory notes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParameterCounts {
    pub layers: Vec<LayerCount>,
    pub total: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerCount {
    pub layer: String,
    pub count: usize,
}

impl std::fmt::Display for ParameterCounts {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for lc in &self.layers {
            writeln!(f, "{:<44} {:>8}", lc.layer, lc.count)?;
        }
        writeln!(f, "{:<44} {:>8}", "total", self.total)?;
        for note in &self.notes {
            writeln!(f, "note: {note}")?;
        }
        Ok(())
    }
}

impl Model {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_window(&self) -> usize {
        self.spec.input_window
    }

    /// Parameter tensors per layer, in layer order.
    pub fn layer_parameters(&self) -> Vec<Vec<&Tensor>> {
        self.layers.iter().map(|l| l.parameters()).collect()
    }

    pub fn layer_parameters_mut(&mut self) -> Vec<Vec<&mut Tensor>> {
        self.layers.iter_mut().map(|l| l.parameters_mut()).collect()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.rank() != 3
            || x.dim(1) != self.spec.input_window
            || x.dim(2) != self.spec.input_features
        {
            return Err(Error::ShapeMismatch {
                context: "model forward".to_string(),
                expected: format!(
                    "[B, {}, {}]",
                    self.spec.input_window, self.spec.input_features
                ),
                got: format!("{:?}", x.shape()),
            });
        }
        Ok(())
    }

    /// Pure forward pass returning the caches instead of storing them.
    /// Safe to call from several threads over one shared model.
    pub fn forward_with_caches(&self, x: &Tensor) -> Result<(Tensor, Vec<LayerCache>)> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for layer in &self.layers {
            let (out, cache) = layer.forward(&current)?;
            caches.push(cache);
            current = out;
        }
        Ok((current, caches))
    }

    /// Forward pass that retains caches on the model for a following
    /// [`Model::backward`].
    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let (out, caches) = self.forward_with_caches(x)?;
        self.caches = Some(caches);
        Ok(out)
    }

    /// Inference-only forward; the caches are dropped.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        self.forward_with_caches(x).map(|(out, _)| out)
    }

    /// Chain-rule composition of layer backwards against explicit caches.
    pub fn backward_with_caches(
        &self,
        caches: &[LayerCache],
        grad_out: &Tensor,
    ) -> Result<(Tensor, ModelGrads)> {
        if caches.len() != self.layers.len() {
            return Err(Error::MissingCache);
        }
        let mut grads: Vec<Vec<Tensor>> = vec![Vec::new(); self.layers.len()];
        let mut grad = grad_out.clone();
        for (idx, (layer, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            let (grad_in, layer_grads) = layer.backward(cache, &grad)?;
            grads[idx] = layer_grads;
            grad = grad_in;
        }
        Ok((grad, grads))
    }

    /// Backward pass using the caches from the last [`Model::forward`];
    /// consumes them, so a second call without a new forward fails.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<ModelGrads> {
        let caches = self.caches.take().ok_or(Error::MissingCache)?;
        self.backward_with_caches(&caches, grad_out)
            .map(|(_, grads)| grads)
    }

    /// Exact per-layer and total parameter counts. For 60-unit LSTM layers
    /// over 60 inputs a note records that the true count (29,040) differs
    /// from the 24,840 sometimes quoted for this architecture, which no
    /// standard LSTM parameterization of these dimensions yields.
    pub fn count_parameters(&self) -> ParameterCounts {
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut notes = Vec::new();
        let mut total = 0;
        for layer in &self.layers {
            let count = layer.parameter_count();
            total += count;
            layers.push(LayerCount {
                layer: layer.describe(),
                count,
            });
            if let Layer::Lstm(l) = layer {
                let (i, u) = (l.in_dim(), l.units);
                if count == 29_040 {
                    notes.push(format!(
                        "lstm (units={u}): {count} parameters = 4*({i}*{u} + {u}*{u} + {u}); \
                         differs from the 24840 sometimes quoted for this layer, which no \
                         standard LSTM parameterization of these dimensions yields"
                    ));
                }
            }
        }
        ParameterCounts {
            layers,
            total,
            notes,
        }
    }

    /// Serializes to the versioned `.sfmodel.json` format.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            spec: self.spec.clone(),
            normalization: self.meta.normalization,
            seed: self.meta.seed,
            parameters: self.collect_parameters()?,
            checksum: String::new(),
        };
        file.checksum = file.compute_checksum();
        let body = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::MalformedModel(e.to_string()))?;
        fs::write(path, body)?;
        Ok(())
    }

    fn collect_parameters(&self) -> Result<Vec<ParamEntry>> {
        let mut out = Vec::new();
        for (idx, layer) in self.layers.iter().enumerate() {
            for (name, tensor) in named_parameters(layer) {
                if !tensor.all_finite() {
                    return Err(Error::NonFinite {
                        context: format!("save_model layer {idx} {name}"),
                    });
                }
                out.push(ParamEntry {
                    layer: idx,
                    name: name.to_string(),
                    shape: tensor.shape().to_vec(),
                    data: tensor.data().to_vec(),
                });
            }
        }
        Ok(out)
    }

    /// Loads and verifies a `.sfmodel.json` file; the parameters round-trip
    /// bit-exactly.
    pub fn load(path: &Path) -> Result<Model> {
        let body = fs::read_to_string(path)?;
        let file: ModelFile =
            serde_json::from_str(&body).map_err(|e| Error::MalformedModel(e.to_string()))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: file.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let computed = file.compute_checksum();
        if computed != file.checksum {
            return Err(Error::ChecksumMismatch {
                stored: file.checksum.clone(),
                computed,
            });
        }
        let mut model = build_model(file.spec.clone(), file.seed, file.normalization)?;
        let mut entries = file.parameters.iter();
        for (idx, layer) in model.layers.iter_mut().enumerate() {
            for (name, tensor) in named_parameters_mut(layer) {
                let entry = entries.next().ok_or_else(|| {
                    Error::MalformedModel(format!("missing parameter entry for layer {idx} {name}"))
                })?;
                if entry.layer != idx || entry.name != name || entry.shape != tensor.shape() {
                    return Err(Error::MalformedModel(format!(
                        "parameter entry mismatch at layer {idx} {name}: found layer {} '{}' {:?}",
                        entry.layer, entry.name, entry.shape
                    )));
                }
                let replacement = Tensor::new(entry.shape.clone(), entry.data.clone())?;
                *tensor = replacement;
            }
        }
        if entries.next().is_some() {
            return Err(Error::MalformedModel(
                "trailing parameter entries do not match the spec".to_string(),
            ));
        }
        Ok(model)
    }
}

fn named_parameters(layer: &Layer) -> Vec<(&'static str, &Tensor)> {
    match layer {
        Layer::Dense(l) => vec![("weights", &l.weights), ("bias", &l.bias)],
        Layer::Conv1D(l) => vec![("kernels", &l.kernels), ("bias", &l.bias)],
        Layer::Lstm(l) => vec![
            ("input_weights", &l.input_weights),
            ("recurrent_weights", &l.recurrent_weights),
            ("bias", &l.bias),
        ],
        Layer::Pool(_) | Layer::Scale(_) => vec![],
    }
}

fn named_parameters_mut(layer: &mut Layer) -> Vec<(&'static str, &mut Tensor)> {
    match layer {
        Layer::Dense(l) => vec![("weights", &mut l.weights), ("bias", &mut l.bias)],
        Layer::Conv1D(l) => vec![("kernels", &mut l.kernels), ("bias", &mut l.bias)],
        Layer::Lstm(l) => vec![
            ("input_weights", &mut l.input_weights),
            ("recurrent_weights", &mut l.recurrent_weights),
            ("bias", &mut l.bias),
        ],
        Layer::Pool(_) | Layer::Scale(_) => vec![],
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    spec: ModelSpec,
    normalization: NormStats,
    seed: u64,
    parameters: Vec<ParamEntry>,
    checksum: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamEntry {
    layer: usize,
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl ModelFile {
    /// sha256 over the compact serialization with the checksum field empty;
    /// shortest-round-trip float formatting makes this canonical.
    fn compute_checksum(&self) -> String {
        let canonical = ModelFile {
            format_version: self.format_version,
            spec: self.spec.clone(),
            normalization: self.normalization,
            seed: self.seed,
            parameters: self
                .parameters
                .iter()
                .map(|p| ParamEntry {
                    layer: p.layer,
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    data: p.data.clone(),
                })
                .collect(),
            checksum: String::new(),
        };
        let body = serde_json::to_string(&canonical).expect("model file serialization");
        let digest = Sha256::digest(body.as_bytes());
        format!("sha256:{}", crate::data::hex_string(&digest))
    }
}
