use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::ndmath::{ComputeGraph, NodeId, Tensor};
use crate::rng::{substream, Stream};
use crate::vocab::{LabelSet, LABEL_COUNT};

use super::sh::sh_encode;
use super::{EncoderConfig, Modality, MSI_CHANNELS, SAR_CHANNELS, SIREN_HIDDEN};

const CONV1_OUT: usize = 16;
const CONV2_OUT: usize = 32;
const KERNEL: usize = 3;
const STRIDE: usize = 2;
const PAD: usize = 1;

/// Initial temperature of the contrastive objective; stored as log tau so
/// the learnable parameter can never leave the positive reals.
pub(crate) const INITIAL_TAU: f64 = 0.07;

#[derive(Debug, Clone)]
pub struct WeightBias {
    pub w: Tensor,
    pub b: Tensor,
}

#[derive(Debug, Clone)]
pub struct TextParams {
    /// One row per vocabulary label.
    pub table: Tensor,
    pub hidden: WeightBias,
    pub out: WeightBias,
}

#[derive(Debug, Clone)]
pub struct VisionParams {
    pub conv1: WeightBias,
    pub conv2: WeightBias,
    pub conv3: WeightBias,
    pub head: WeightBias,
}

#[derive(Debug, Clone)]
pub struct LocationParams {
    pub sine: Vec<WeightBias>,
    pub out: WeightBias,
}

/// Full parameter set: text, two disjoint vision routes, location, and the
/// loss temperature.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: EncoderConfig,
    pub text: TextParams,
    pub sar: VisionParams,
    pub msi: VisionParams,
    pub location: LocationParams,
    pub log_tau: Tensor,
}

#[derive(Debug, Clone, Copy)]
pub struct LinearNodes {
    pub w: NodeId,
    pub b: NodeId,
}

#[derive(Debug, Clone, Copy)]
pub struct TextNodes {
    pub table: NodeId,
    pub hidden: LinearNodes,
    pub out: LinearNodes,
}

#[derive(Debug, Clone, Copy)]
pub struct VisionNodes {
    pub conv1: LinearNodes,
    pub conv2: LinearNodes,
    pub conv3: LinearNodes,
    pub head: LinearNodes,
}

#[derive(Debug, Clone)]
pub struct LocationNodes {
    pub sine: Vec<LinearNodes>,
    pub out: LinearNodes,
}

/// The model's parameters registered into one compute graph.
#[derive(Debug, Clone)]
pub struct ModelNodes {
    pub text: TextNodes,
    pub sar: VisionNodes,
    pub msi: VisionNodes,
    pub location: LocationNodes,
    pub log_tau: NodeId,
}

impl ModelNodes {
    /// Node ids in the same order as [`Model::named_params`].
    pub fn ordered(&self) -> Vec<NodeId> {
        let mut ids = vec![
            self.text.table,
            self.text.hidden.w,
            self.text.hidden.b,
            self.text.out.w,
            self.text.out.b,
        ];
        for v in [&self.sar, &self.msi] {
            ids.extend([
                v.conv1.w, v.conv1.b, v.conv2.w, v.conv2.b, v.conv3.w, v.conv3.b, v.head.w,
                v.head.b,
            ]);
        }
        for layer in &self.location.sine {
            ids.extend([layer.w, layer.b]);
        }
        ids.extend([self.location.out.w, self.location.out.b, self.log_tau]);
        ids
    }
}

impl Model {
    /// Fresh random parameters; the draw order is fixed, so a seed fully
    /// determines the model.
    pub fn init(config: EncoderConfig, seed: u64) -> Result<Model> {
        config.validate()?;
        let mut rng = substream(seed, Stream::Init);
        let d = config.embed_dim;
        let text = TextParams {
            table: glorot(&mut rng, &[LABEL_COUNT, d], LABEL_COUNT, d),
            hidden: linear_init(&mut rng, d, d),
            out: linear_init(&mut rng, d, d),
        };
        let sar = vision_init(&mut rng, SAR_CHANNELS, d);
        let msi = vision_init(&mut rng, MSI_CHANNELS, d);
        let location = location_init(&mut rng, &config);
        Ok(Model {
            config,
            text,
            sar,
            msi,
            location,
            log_tau: Tensor::scalar(INITIAL_TAU.ln()),
        })
    }

    pub fn tau(&self) -> f64 {
        self.log_tau.values()[0].exp()
    }

    /// All parameter tensors with their canonical block names, in a fixed
    /// order shared with [`ModelNodes::ordered`].
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = vec![
            ("text.table".into(), &self.text.table),
            ("text.hidden.w".into(), &self.text.hidden.w),
            ("text.hidden.b".into(), &self.text.hidden.b),
            ("text.out.w".into(), &self.text.out.w),
            ("text.out.b".into(), &self.text.out.b),
        ];
        for (prefix, v) in [("sar", &self.sar), ("msi", &self.msi)] {
            for (block, wb) in [
                ("conv1", &v.conv1),
                ("conv2", &v.conv2),
                ("conv3", &v.conv3),
                ("head", &v.head),
            ] {
                out.push((format!("{prefix}.{block}.w"), &wb.w));
                out.push((format!("{prefix}.{block}.b"), &wb.b));
            }
        }
        for (i, layer) in self.location.sine.iter().enumerate() {
            out.push((format!("loc.sine{i}.w"), &layer.w));
            out.push((format!("loc.sine{i}.b"), &layer.b));
        }
        out.push(("loc.out.w".into(), &self.location.out.w));
        out.push(("loc.out.b".into(), &self.location.out.b));
        out.push(("log_tau".into(), &self.log_tau));
        out
    }

    pub fn named_params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = vec![
            ("text.table".into(), &mut self.text.table),
            ("text.hidden.w".into(), &mut self.text.hidden.w),
            ("text.hidden.b".into(), &mut self.text.hidden.b),
            ("text.out.w".into(), &mut self.text.out.w),
            ("text.out.b".into(), &mut self.text.out.b),
        ];
        for (prefix, v) in [("sar", &mut self.sar), ("msi", &mut self.msi)] {
            for (block, wb) in [
                ("conv1", &mut v.conv1),
                ("conv2", &mut v.conv2),
                ("conv3", &mut v.conv3),
                ("head", &mut v.head),
            ] {
                out.push((format!("{prefix}.{block}.w"), &mut wb.w));
                out.push((format!("{prefix}.{block}.b"), &mut wb.b));
            }
        }
        for (i, layer) in self.location.sine.iter_mut().enumerate() {
            out.push((format!("loc.sine{i}.w"), &mut layer.w));
            out.push((format!("loc.sine{i}.b"), &mut layer.b));
        }
        out.push(("loc.out.w".into(), &mut self.location.out.w));
        out.push(("loc.out.b".into(), &mut self.location.out.b));
        out.push(("log_tau".into(), &mut self.log_tau));
        out
    }

    /// Registers every parameter into `g`, as trainable leaves or as frozen
    /// constants. Push order matches [`Model::named_params`].
    pub fn register(&self, g: &mut ComputeGraph, trainable: bool) -> ModelNodes {
        let add = |t: &Tensor, g: &mut ComputeGraph| {
            if trainable {
                g.leaf(t.clone())
            } else {
                g.constant(t.clone())
            }
        };
        let text = TextNodes {
            table: add(&self.text.table, g),
            hidden: LinearNodes {
                w: add(&self.text.hidden.w, g),
                b: add(&self.text.hidden.b, g),
            },
            out: LinearNodes {
                w: add(&self.text.out.w, g),
                b: add(&self.text.out.b, g),
            },
        };
        let vision = |v: &VisionParams, g: &mut ComputeGraph| VisionNodes {
            conv1: LinearNodes {
                w: add(&v.conv1.w, g),
                b: add(&v.conv1.b, g),
            },
            conv2: LinearNodes {
                w: add(&v.conv2.w, g),
                b: add(&v.conv2.b, g),
            },
            conv3: LinearNodes {
                w: add(&v.conv3.w, g),
                b: add(&v.conv3.b, g),
            },
            head: LinearNodes {
                w: add(&v.head.w, g),
                b: add(&v.head.b, g),
            },
        };
        let sar = vision(&self.sar, g);
        let msi = vision(&self.msi, g);
        let location = LocationNodes {
            sine: self
                .location
                .sine
                .iter()
                .map(|layer| LinearNodes {
                    w: add(&layer.w, g),
                    b: add(&layer.b, g),
                })
                .collect(),
            out: LinearNodes {
                w: add(&self.location.out.w, g),
                b: add(&self.location.out.b, g),
            },
        };
        let log_tau = add(&self.log_tau, g);
        ModelNodes {
            text,
            sar,
            msi,
            location,
            log_tau,
        }
    }

    /// Embedding of a non-empty label set; invariant to label order and to
    /// case, both handled by the set representation.
    pub fn encode_text(&self, labels: &LabelSet) -> Result<Tensor> {
        let mut g = ComputeGraph::new();
        let nodes = self.register(&mut g, false);
        let row = text_embedding(&mut g, &nodes.text, labels)?;
        Ok(row_vector(g.value(row)))
    }

    /// Embedding of one image through the vision route for its modality.
    pub fn encode_image(&self, image: &Tensor, modality: Modality) -> Result<Tensor> {
        let side = self.config.image_side;
        let ok = matches!(image.shape(),
            [c, h, w] if *c == modality.channels() && *h == side && *w == side);
        if !ok {
            return Err(Error::Shape(format!(
                "image shape {:?} does not fit modality {} ({} channels, side {})",
                image.shape(),
                modality,
                modality.channels(),
                side
            )));
        }
        let mut g = ComputeGraph::new();
        let nodes = self.register(&mut g, false);
        let img = g.constant(image.clone());
        let route = match modality {
            Modality::Sar => &nodes.sar,
            Modality::Msi => &nodes.msi,
        };
        let row = image_embedding(&mut g, route, img)?;
        Ok(row_vector(g.value(row)))
    }

    /// Embedding of a point on the globe.
    pub fn encode_location(&self, lon: f64, lat: f64) -> Result<Tensor> {
        let mut g = ComputeGraph::new();
        let nodes = self.register(&mut g, false);
        let row = location_embedding(&mut g, &nodes.location, &self.config, lon, lat)?;
        Ok(row_vector(g.value(row)))
    }
}

/// Mean-pooled label embeddings through a two-layer perceptron, normalized.
/// Emits a 1 x D row.
pub fn text_embedding(
    g: &mut ComputeGraph,
    nodes: &TextNodes,
    labels: &LabelSet,
) -> Result<NodeId> {
    if labels.is_empty() {
        return Err(Error::Contract("cannot encode an empty label set".into()));
    }
    let mut hot = vec![0.0; LABEL_COUNT];
    let weight = 1.0 / labels.len() as f64;
    for i in labels.indices() {
        hot[i] = weight;
    }
    let x = g.constant(Tensor::new(&[1, LABEL_COUNT], hot)?);
    let pooled = g.matmul(x, nodes.table)?;
    let h = g.matmul(pooled, nodes.hidden.w)?;
    let h = g.add_row_bias(h, nodes.hidden.b)?;
    let h = g.relu(h);
    let o = g.matmul(h, nodes.out.w)?;
    let o = g.add_row_bias(o, nodes.out.b)?;
    g.l2_normalize_rows(o)
}

/// Three strided convolution blocks, global average pooling, linear head,
/// normalization. Emits a 1 x D row.
pub fn image_embedding(g: &mut ComputeGraph, nodes: &VisionNodes, image: NodeId) -> Result<NodeId> {
    let mut h = image;
    for conv in [&nodes.conv1, &nodes.conv2, &nodes.conv3] {
        let c = g.conv2d(h, conv.w, conv.b, STRIDE, PAD)?;
        h = g.relu(c);
    }
    let pooled = g.global_avg_pool(h)?;
    let o = g.matmul(pooled, nodes.head.w)?;
    let o = g.add_row_bias(o, nodes.head.b)?;
    g.l2_normalize_rows(o)
}

/// Spherical-harmonic features through sine layers and a linear head,
/// normalized. Every sine layer computes sin(omega0 * (Wx + b)). Emits a
/// 1 x D row.
pub fn location_embedding(
    g: &mut ComputeGraph,
    nodes: &LocationNodes,
    config: &EncoderConfig,
    lon: f64,
    lat: f64,
) -> Result<NodeId> {
    let feats = sh_encode(lon, lat, config.sh_degree)?;
    let mut h = g.constant(Tensor::new(&[1, feats.len()], feats.values().to_vec())?);
    for layer in &nodes.sine {
        let pre = g.matmul(h, layer.w)?;
        let pre = g.add_row_bias(pre, layer.b)?;
        let scaled = g.scale(pre, config.siren_omega0);
        h = g.sin(scaled);
    }
    let o = g.matmul(h, nodes.out.w)?;
    let o = g.add_row_bias(o, nodes.out.b)?;
    g.l2_normalize_rows(o)
}

fn row_vector(row: &Tensor) -> Tensor {
    Tensor::new(&[row.len()], row.values().to_vec()).expect("row reshape")
}

fn uniform(rng: &mut ChaCha12Rng, shape: &[usize], limit: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let values = (0..n).map(|_| rng.gen_range(-limit..limit)).collect();
    Tensor::new(shape, values).expect("static shape")
}

fn glorot(rng: &mut ChaCha12Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(rng, shape, limit)
}

fn linear_init(rng: &mut ChaCha12Rng, fan_in: usize, fan_out: usize) -> WeightBias {
    WeightBias {
        w: glorot(rng, &[fan_in, fan_out], fan_in, fan_out),
        b: Tensor::zeros(&[fan_out]),
    }
}

fn conv_init(rng: &mut ChaCha12Rng, c_in: usize, c_out: usize) -> WeightBias {
    let rf = KERNEL * KERNEL;
    WeightBias {
        w: glorot(rng, &[c_out, c_in, KERNEL, KERNEL], c_in * rf, c_out * rf),
        b: Tensor::zeros(&[c_out]),
    }
}

fn vision_init(rng: &mut ChaCha12Rng, channels: usize, d: usize) -> VisionParams {
    VisionParams {
        conv1: conv_init(rng, channels, CONV1_OUT),
        conv2: conv_init(rng, CONV1_OUT, CONV2_OUT),
        conv3: conv_init(rng, CONV2_OUT, d),
        head: linear_init(rng, d, d),
    }
}

/// Sine-network initialization: the first layer draws from
/// U(-1/fan_in, 1/fan_in) and deeper layers from
/// U(-sqrt(6/fan_in)/omega0, sqrt(6/fan_in)/omega0), which together keep
/// first-layer pre-activations on the order of one period.
fn location_init(rng: &mut ChaCha12Rng, config: &EncoderConfig) -> LocationParams {
    let f = config.sh_dim();
    let mut sine = Vec::with_capacity(config.siren_layers);
    for i in 0..config.siren_layers {
        let fan_in = if i == 0 { f } else { SIREN_HIDDEN };
        let in_width = fan_in;
        let w_limit = if i == 0 {
            1.0 / fan_in as f64
        } else {
            (6.0 / fan_in as f64).sqrt() / config.siren_omega0
        };
        sine.push(WeightBias {
            w: uniform(rng, &[in_width, SIREN_HIDDEN], w_limit),
            b: uniform(rng, &[SIREN_HIDDEN], 1.0 / fan_in as f64),
        });
    }
    LocationParams {
        sine,
        out: linear_init(rng, SIREN_HIDDEN, config.embed_dim),
    }
}
