//! Fully connected networks: parameters, Glorot initialization, and two
//! evaluation paths (plain `ndarray` and graph-building) that must agree.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use thiserror::Error;

use super::graph::{sigmoid, Gradients, Graph, GraphError, NodeId};

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlpError {
    #[error("need at least 2 layer dimensions, got {0}")]
    TooFewDims(usize),

    #[error("layer dimensions must be positive, got {0:?}")]
    ZeroDim(Vec<usize>),

    #[error("{dims} layer dims need {} activations, got {got}", dims - 1)]
    ActivationCount { dims: usize, got: usize },

    #[error("input has {got} columns, network expects {expected}")]
    InputDim { expected: usize, got: usize },

    #[error("layer {layer}: weight {weight:?} does not chain with bias length {bias} / previous width {prev}")]
    BrokenChain {
        layer: usize,
        weight: (usize, usize),
        bias: usize,
        prev: usize,
    },

    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// Leaky ReLU with slope [`LEAKY_SLOPE`].
    LeakyRelu,
    Identity,
    Sigmoid,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::LeakyRelu => "leaky_relu",
            Activation::Identity => "identity",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "leaky_relu" => Some(Activation::LeakyRelu),
            "identity" => Some(Activation::Identity),
            "sigmoid" => Some(Activation::Sigmoid),
            _ => None,
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            Activation::Identity => x,
            Activation::Sigmoid => sigmoid(x),
        }
    }
}

/// One affine layer `y = act(x Wᵀ + b)` with `W` of shape (out, in).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

/// Per-layer gradients (or Adam moments) shaped like an [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(params: &MlpParams) -> Self {
        MlpGrads {
            weights: params.layers.iter().map(|l| Array2::zeros(l.weight.dim())).collect(),
            biases: params.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
        }
    }
}

/// Node handles for a network placed in a [`Graph`].
#[derive(Debug, Clone)]
pub struct MlpNodes {
    pub weights: Vec<NodeId>,
    pub biases: Vec<NodeId>,
    pub output: NodeId,
}

impl MlpNodes {
    /// Feed list binding `params` to these nodes. Biases are fed as 1×d rows.
    pub fn feeds(&self, params: &MlpParams) -> Vec<(NodeId, Array2<f64>)> {
        let mut out = Vec::with_capacity(2 * params.layers.len());
        for (layer, (&w, &b)) in params.layers.iter().zip(self.weights.iter().zip(&self.biases)) {
            out.push((w, layer.weight.clone()));
            out.push((b, layer.bias.clone().insert_axis(Axis(0))));
        }
        out
    }

    pub fn gradients(&self, grads: &mut Gradients) -> MlpGrads {
        let take = |grads: &mut Gradients, id: NodeId| grads.take(id).expect("trainable parameter has a gradient");
        MlpGrads {
            weights: self.weights.iter().map(|&w| take(grads, w)).collect(),
            biases: self
                .biases
                .iter()
                .map(|&b| take(grads, b).index_axis_move(Axis(0), 0))
                .collect(),
        }
    }
}

impl MlpParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(layer_dims: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self, MlpError> {
        if layer_dims.len() < 2 {
            return Err(MlpError::TooFewDims(layer_dims.len()));
        }
        if layer_dims.contains(&0) {
            return Err(MlpError::ZeroDim(layer_dims.to_vec()));
        }
        if activations.len() != layer_dims.len() - 1 {
            return Err(MlpError::ActivationCount {
                dims: layer_dims.len(),
                got: activations.len(),
            });
        }
        let layers = layer_dims
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weight = Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-limit..limit));
                Layer {
                    weight,
                    bias: Array1::zeros(fan_out),
                    activation,
                }
            })
            .collect();
        Ok(MlpParams { layers })
    }

    /// A single identity layer on `dim` features.
    pub fn identity(dim: usize) -> Self {
        MlpParams {
            layers: vec![Layer {
                weight: Array2::eye(dim),
                bias: Array1::zeros(dim),
                activation: Activation::Identity,
            }],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weight.ncols())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.nrows())
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn validate(&self) -> Result<(), MlpError> {
        let mut prev = self.input_dim();
        for (i, l) in self.layers.iter().enumerate() {
            if l.weight.ncols() != prev || l.bias.len() != l.weight.nrows() || l.weight.nrows() == 0 {
                return Err(MlpError::BrokenChain {
                    layer: i,
                    weight: l.weight.dim(),
                    bias: l.bias.len(),
                    prev,
                });
            }
            prev = l.weight.nrows();
        }
        Ok(())
    }

    /// Forward pass outside any graph.
    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, MlpError> {
        if x.ncols() != self.input_dim() {
            return Err(MlpError::InputDim {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let mut h = x.to_owned();
        for l in &self.layers {
            let mut next = h.dot(&l.weight.t()) + &l.bias;
            next.mapv_inplace(|v| l.activation.apply(v));
            h = next;
        }
        Ok(h)
    }

    /// Adds this network to `graph` on top of node `x`, with every weight
    /// and bias as a trainable input named `{prefix}.{layer}.weight|bias`.
    pub fn build(&self, graph: &mut Graph, x: NodeId, prefix: &str) -> Result<MlpNodes, MlpError> {
        let cols = graph.shape(x).1;
        if cols != self.input_dim() {
            return Err(MlpError::InputDim {
                expected: self.input_dim(),
                got: cols,
            });
        }
        let mut h = x;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            let w = graph.input(&format!("{prefix}.{i}.weight"), l.weight.dim(), true);
            let b = graph.input(&format!("{prefix}.{i}.bias"), (1, l.bias.len()), true);
            let wt = graph.transpose(w)?;
            let affine = graph.matmul(h, wt)?;
            let pre = graph.add_row(affine, b)?;
            h = match l.activation {
                Activation::LeakyRelu => graph.leaky_relu(pre, LEAKY_SLOPE),
                Activation::Identity => pre,
                Activation::Sigmoid => graph.sigmoid(pre),
            };
            weights.push(w);
            biases.push(b);
        }
        Ok(MlpNodes {
            weights,
            biases,
            output: h,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_network_is_identity() {
        let x = array![[1.0, -2.0, 3.5], [0.0, 4.0, -1.0]];
        assert_eq!(MlpParams::identity(3).apply(x.view()).unwrap(), x);
    }

    #[test]
    fn zero_weight_layer_outputs_bias() {
        let p = MlpParams {
            layers: vec![Layer {
                weight: Array2::zeros((2, 3)),
                bias: array![0.25, -7.0],
                activation: Activation::Identity,
            }],
        };
        let out = p.apply(Array2::from_elem((4, 3), 9.0).view()).unwrap();
        for row in out.rows() {
            assert_eq!(row.to_vec(), vec![0.25, -7.0]);
        }
    }

    #[test]
    fn leaky_relu_slope() {
        let p = MlpParams {
            layers: vec![Layer {
                weight: Array2::eye(1),
                bias: Array1::zeros(1),
                activation: Activation::LeakyRelu,
            }],
        };
        assert_eq!(p.apply(array![[-1.0], [2.0]].view()).unwrap(), array![[-0.2], [2.0]]);
    }

    #[test]
    fn apply_rejects_wrong_width() {
        let p = MlpParams::identity(3);
        assert_eq!(
            p.apply(Array2::zeros((1, 2)).view()),
            Err(MlpError::InputDim { expected: 3, got: 2 })
        );
    }

    #[test]
    fn init_shapes_and_determinism() {
        let acts = [Activation::LeakyRelu, Activation::Identity];
        let a = MlpParams::init(&[4, 3, 2], &acts, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = MlpParams::init(&[4, 3, 2], &acts, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.layers[0].weight.dim(), (3, 4));
        assert_eq!(a.layers[0].bias.len(), 3);
        assert!(a.layers.iter().all(|l| l.bias.iter().all(|&v| v == 0.0)));
        let limit = (6.0f64 / 7.0).sqrt();
        assert!(a.layers[0].weight.iter().all(|w| w.abs() <= limit));
        a.validate().unwrap();
    }

    #[test]
    fn init_rejects_bad_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            MlpParams::init(&[4], &[], &mut rng),
            Err(MlpError::TooFewDims(1))
        );
        assert!(matches!(
            MlpParams::init(&[4, 0, 2], &[Activation::Identity; 2], &mut rng),
            Err(MlpError::ZeroDim(_))
        ));
        assert!(matches!(
            MlpParams::init(&[4, 2], &[Activation::Identity; 2], &mut rng),
            Err(MlpError::ActivationCount { .. })
        ));
    }

    #[test]
    fn glorot_sample_mean_is_centered() {
        let p = MlpParams::init(&[64, 64], &[Activation::Identity], &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
        let w = &p.layers[0].weight;
        let n = w.len() as f64;
        let mean = w.sum() / n;
        // Uniform(−a, a) has variance a²/3
        let limit = (6.0f64 / 128.0).sqrt();
        let std_err = (limit * limit / 3.0 / n).sqrt();
        assert!(mean.abs() < 3.0 * std_err, "mean {mean} vs 3·se {}", 3.0 * std_err);
    }

    #[test]
    fn graph_and_plain_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let acts = [Activation::LeakyRelu, Activation::LeakyRelu, Activation::Sigmoid];
        let p = MlpParams::init(&[5, 7, 4, 3], &acts, &mut rng).unwrap();
        let x = Array2::from_shape_fn((6, 5), |(i, j)| (i as f64 - 2.0) * 0.3 + j as f64 * 0.1);
        let mut g = Graph::new();
        let xn = g.input("x", (6, 5), false);
        let nodes = p.build(&mut g, xn, "net").unwrap();
        let feeds = nodes.feeds(&p);
        let mut all: Vec<(NodeId, &Array2<f64>)> = feeds.iter().map(|(id, v)| (*id, v)).collect();
        all.push((xn, &x));
        g.forward(&all).unwrap();
        let from_graph = g.value(nodes.output).unwrap();
        let plain = p.apply(x.view()).unwrap();
        for (a, b) in from_graph.iter().zip(plain.iter()) {
            assert!((a - b).abs() < 1e-14);
            assert!(*a > 0.0 && *a < 1.0);
        }
    }
}
