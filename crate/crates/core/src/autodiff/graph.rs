//! Static computation graph over dense `f64` matrices.
//!
//! Nodes are appended in construction order, which is also a valid
//! topological order: every op only refers to nodes that already exist.
//! Shapes are inferred while building, so a malformed graph is rejected
//! before any data flows through it.
//!
//! ```
//! use continuum::autodiff::Graph;
//! use ndarray::array;
//!
//! let mut g = Graph::new();
//! let x = g.input("x", (1, 3), true);
//! let sq = g.mul(x, x).unwrap();
//! let f = g.sum(sq);
//! g.forward(&[(x, &array![[1.0, 2.0, 3.0]])]).unwrap();
//! assert_eq!(g.scalar(f).unwrap(), 14.0);
//! let grads = g.backward(f).unwrap();
//! assert_eq!(grads.get(x).unwrap(), &array![[2.0, 4.0, 6.0]]);
//! ```

use std::fmt;
use std::ops::Range;

use ndarray::{s, Array2, Axis};
use thiserror::Error;

use crate::kernels::{median_sigma_sq, KernelSpec};

pub type Shape = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("shape mismatch at node {node} ({op}): {detail}")]
    ShapeMismatch {
        node: usize,
        op: &'static str,
        detail: String,
    },

    #[error("non-finite value produced at node {node} ({op})")]
    NonFinite { node: usize, op: &'static str },

    #[error("no value fed for input node {node} ({name})")]
    MissingInput { node: usize, name: String },

    #[error("node {0} is not an input")]
    NotAnInput(usize),

    #[error("unknown node {0}")]
    UnknownNode(usize),

    #[error("backward called before forward")]
    BackwardBeforeForward,

    #[error("backward requires a scalar (1x1) output, node {node} has shape {shape:?}")]
    NonScalarOutput { node: usize, shape: Shape },
}

/// How a Gram node turns squared distances into kernel values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GramKernel {
    /// A kernel with every parameter fixed at build time.
    Fixed(KernelSpec),
    /// RBF whose σ² is recomputed by the median heuristic on every forward
    /// pass. The bandwidth is treated as a constant by backward.
    RbfMedian,
}

#[derive(Debug, Clone)]
pub enum Op {
    Input { name: String, trainable: bool },
    Constant(Array2<f64>),
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// (n×d) + (1×d) with the row broadcast down the rows.
    AddRow(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId, f64),
    Exp(NodeId),
    Rsqrt(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    PairwiseSqDist(NodeId, NodeId),
    SliceRows(NodeId, Range<usize>),
    SliceCols(NodeId, Range<usize>),
    LeakyRelu(NodeId, f64),
    Sigmoid(NodeId),
    Trace(NodeId),
    /// Kernel applied entrywise to a matrix of squared distances.
    Gram(NodeId, GramKernel),
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Input { .. } => "input",
            Op::Constant(_) => "constant",
            Op::MatMul(..) => "matmul",
            Op::Transpose(_) => "transpose",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AddRow(..) => "add_row",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Exp(_) => "exp",
            Op::Rsqrt(_) => "rsqrt",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::PairwiseSqDist(..) => "pairwise_sq_dist",
            Op::SliceRows(..) => "slice_rows",
            Op::SliceCols(..) => "slice_cols",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::Sigmoid(_) => "sigmoid",
            Op::Trace(_) => "trace",
            Op::Gram(..) => "gram",
        }
    }

    fn parents(&self) -> Vec<NodeId> {
        match self {
            Op::Input { .. } | Op::Constant(_) => vec![],
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::AddRow(a, b)
            | Op::PairwiseSqDist(a, b) => vec![*a, *b],
            Op::Transpose(a)
            | Op::Scale(a, _)
            | Op::AddScalar(a, _)
            | Op::Exp(a)
            | Op::Rsqrt(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::SliceRows(a, _)
            | Op::SliceCols(a, _)
            | Op::LeakyRelu(a, _)
            | Op::Sigmoid(a)
            | Op::Trace(a)
            | Op::Gram(a, _) => vec![*a],
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    shape: Shape,
    /// True when some trainable input is upstream of this node.
    needs_grad: bool,
}

/// Gradients of a scalar output w.r.t. the trainable inputs.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Array2<f64>> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, id: NodeId) -> Option<Array2<f64>> {
        self.grads.get_mut(id.0).and_then(Option::take)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    values: Option<Vec<Array2<f64>>>,
    /// σ² chosen by each median-bandwidth Gram node on the last forward pass.
    bandwidths: Vec<Option<f64>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, id: NodeId) -> Shape {
        self.nodes[id.0].shape
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id.0].op
    }

    /// Every Gram node with its kernel, in construction order.
    pub fn gram_nodes(&self) -> Vec<(NodeId, GramKernel)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.op {
                Op::Gram(_, k) => Some((NodeId(i), k)),
                _ => None,
            })
            .collect()
    }

    /// Bandwidth σ² a Gram node used on the last forward pass.
    pub fn resolved_bandwidth(&self, id: NodeId) -> Option<f64> {
        match self.nodes.get(id.0)?.op {
            Op::Gram(_, GramKernel::Fixed(KernelSpec::Rbf { sigma_sq })) => Some(sigma_sq),
            Op::Gram(_, GramKernel::RbfMedian) => self.bandwidths.get(id.0).copied().flatten(),
            _ => None,
        }
    }

    fn push(&mut self, op: Op, shape: Shape) -> NodeId {
        let needs_grad = match &op {
            Op::Input { trainable, .. } => *trainable,
            Op::Constant(_) => false,
            other => other.parents().iter().any(|p| self.nodes[p.0].needs_grad),
        };
        self.nodes.push(Node {
            op,
            shape,
            needs_grad,
        });
        self.values = None;
        NodeId(self.nodes.len() - 1)
    }

    fn mismatch(&self, op: &'static str, detail: String) -> GraphError {
        GraphError::ShapeMismatch {
            node: self.nodes.len(),
            op,
            detail,
        }
    }

    fn check(&self, id: NodeId) -> Result<Shape, GraphError> {
        self.nodes
            .get(id.0)
            .map(|n| n.shape)
            .ok_or(GraphError::UnknownNode(id.0))
    }

    // ------------------------------------------------------------------
    // Builders
    // ------------------------------------------------------------------

    /// Placeholder fed at forward time. Trainable inputs receive gradients.
    pub fn input(&mut self, name: &str, shape: Shape, trainable: bool) -> NodeId {
        self.push(
            Op::Input {
                name: name.to_string(),
                trainable,
            },
            shape,
        )
    }

    pub fn constant(&mut self, value: Array2<f64>) -> NodeId {
        let shape = value.dim();
        self.push(Op::Constant(value), shape)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let (sa, sb) = (self.check(a)?, self.check(b)?);
        if sa.1 != sb.0 {
            return Err(self.mismatch("matmul", format!("{sa:?} x {sb:?}")));
        }
        Ok(self.push(Op::MatMul(a, b), (sa.0, sb.1)))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId, GraphError> {
        let sa = self.check(a)?;
        Ok(self.push(Op::Transpose(a), (sa.1, sa.0)))
    }

    fn same_shape(&mut self, op: &'static str, a: NodeId, b: NodeId) -> Result<Shape, GraphError> {
        let (sa, sb) = (self.check(a)?, self.check(b)?);
        if sa != sb {
            return Err(self.mismatch(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(sa)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let shape = self.same_shape("add", a, b)?;
        Ok(self.push(Op::Add(a, b), shape))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let shape = self.same_shape("sub", a, b)?;
        Ok(self.push(Op::Sub(a, b), shape))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let shape = self.same_shape("mul", a, b)?;
        Ok(self.push(Op::Mul(a, b), shape))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId, GraphError> {
        let (sa, sr) = (self.check(a)?, self.check(row)?);
        if sr != (1, sa.1) {
            return Err(self.mismatch("add_row", format!("{sa:?} + row {sr:?}")));
        }
        Ok(self.push(Op::AddRow(a, row), sa))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let shape = self.nodes[a.0].shape;
        self.push(Op::Scale(a, c), shape)
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let shape = self.nodes[a.0].shape;
        self.push(Op::AddScalar(a, c), shape)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let shape = self.nodes[a.0].shape;
        self.push(Op::Exp(a), shape)
    }

    pub fn rsqrt(&mut self, a: NodeId) -> NodeId {
        let shape = self.nodes[a.0].shape;
        self.push(Op::Rsqrt(a), shape)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Sum(a), (1, 1))
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Mean(a), (1, 1))
    }

    /// Squared Euclidean distances between the rows of `a` and of `b`.
    pub fn pairwise_sq_dist(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let (sa, sb) = (self.check(a)?, self.check(b)?);
        if sa.1 != sb.1 {
            return Err(self.mismatch("pairwise_sq_dist", format!("{sa:?} vs {sb:?}")));
        }
        Ok(self.push(Op::PairwiseSqDist(a, b), (sa.0, sb.0)))
    }

    pub fn slice_rows(&mut self, a: NodeId, rows: Range<usize>) -> Result<NodeId, GraphError> {
        let sa = self.check(a)?;
        if rows.start >= rows.end || rows.end > sa.0 {
            return Err(self.mismatch("slice_rows", format!("rows {rows:?} of {sa:?}")));
        }
        let shape = (rows.len(), sa.1);
        Ok(self.push(Op::SliceRows(a, rows), shape))
    }

    pub fn slice_cols(&mut self, a: NodeId, cols: Range<usize>) -> Result<NodeId, GraphError> {
        let sa = self.check(a)?;
        if cols.start >= cols.end || cols.end > sa.1 {
            return Err(self.mismatch("slice_cols", format!("cols {cols:?} of {sa:?}")));
        }
        let shape = (sa.0, cols.len());
        Ok(self.push(Op::SliceCols(a, cols), shape))
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> NodeId {
        let shape = self.nodes[a.0].shape;
        self.push(Op::LeakyRelu(a, slope), shape)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let shape = self.nodes[a.0].shape;
        self.push(Op::Sigmoid(a), shape)
    }

    pub fn trace(&mut self, a: NodeId) -> Result<NodeId, GraphError> {
        let sa = self.check(a)?;
        if sa.0 != sa.1 {
            return Err(self.mismatch("trace", format!("non-square {sa:?}")));
        }
        Ok(self.push(Op::Trace(a), (1, 1)))
    }

    /// Gram matrix from a node holding squared distances.
    ///
    /// The median variant needs the distances of one sample set against
    /// itself, so it only accepts square inputs.
    pub fn gram(&mut self, sq_dists: NodeId, kernel: GramKernel) -> Result<NodeId, GraphError> {
        let sd = self.check(sq_dists)?;
        if kernel == GramKernel::RbfMedian && sd.0 != sd.1 {
            return Err(self.mismatch("gram", format!("median bandwidth needs a square input, got {sd:?}")));
        }
        Ok(self.push(Op::Gram(sq_dists, kernel), sd))
    }

    // ------------------------------------------------------------------
    // Evaluation
    // ------------------------------------------------------------------

    /// Evaluates every node. Each input must be fed exactly its declared shape.
    pub fn forward(&mut self, feeds: &[(NodeId, &Array2<f64>)]) -> Result<(), GraphError> {
        let mut fed: Vec<Option<&Array2<f64>>> = vec![None; self.nodes.len()];
        for &(id, value) in feeds {
            let node = self.nodes.get(id.0).ok_or(GraphError::UnknownNode(id.0))?;
            if !matches!(node.op, Op::Input { .. }) {
                return Err(GraphError::NotAnInput(id.0));
            }
            if value.dim() != node.shape {
                return Err(GraphError::ShapeMismatch {
                    node: id.0,
                    op: "input",
                    detail: format!("declared {:?}, fed {:?}", node.shape, value.dim()),
                });
            }
            fed[id.0] = Some(value);
        }

        self.values = None;
        self.bandwidths = vec![None; self.nodes.len()];
        let mut values: Vec<Array2<f64>> = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter().enumerate() {
            let v = |id: &NodeId| &values[id.0];
            let out = match &node.op {
                Op::Input { name, .. } => match fed[i] {
                    Some(x) => x.clone(),
                    None => {
                        return Err(GraphError::MissingInput {
                            node: i,
                            name: name.clone(),
                        })
                    }
                },
                Op::Constant(c) => c.clone(),
                Op::MatMul(a, b) => v(a).dot(v(b)),
                Op::Transpose(a) => v(a).t().to_owned(),
                Op::Add(a, b) => v(a) + v(b),
                Op::Sub(a, b) => v(a) - v(b),
                Op::Mul(a, b) => v(a) * v(b),
                Op::AddRow(a, r) => v(a) + v(r),
                Op::Scale(a, c) => v(a) * *c,
                Op::AddScalar(a, c) => v(a) + *c,
                Op::Exp(a) => v(a).mapv(f64::exp),
                Op::Rsqrt(a) => v(a).mapv(|x| 1.0 / x.sqrt()),
                Op::Sum(a) => Array2::from_elem((1, 1), v(a).sum()),
                Op::Mean(a) => {
                    let x = v(a);
                    Array2::from_elem((1, 1), x.sum() / x.len() as f64)
                }
                Op::PairwiseSqDist(a, b) => {
                    let (x, y) = (v(a), v(b));
                    let mut d = Array2::zeros((x.nrows(), y.nrows()));
                    for (i, xi) in x.rows().into_iter().enumerate() {
                        for (j, yj) in y.rows().into_iter().enumerate() {
                            d[[i, j]] = crate::kernels::row_sq_dist(xi, yj);
                        }
                    }
                    d
                }
                Op::SliceRows(a, r) => v(a).slice(s![r.clone(), ..]).to_owned(),
                Op::SliceCols(a, c) => v(a).slice(s![.., c.clone()]).to_owned(),
                Op::LeakyRelu(a, slope) => v(a).mapv(|x| if x > 0.0 { x } else { slope * x }),
                Op::Sigmoid(a) => v(a).mapv(sigmoid),
                Op::Trace(a) => Array2::from_elem((1, 1), v(a).diag().sum()),
                Op::Gram(a, kernel) => {
                    let d = v(a);
                    let spec = match kernel {
                        GramKernel::Fixed(spec) => *spec,
                        GramKernel::RbfMedian => {
                            let n = d.nrows();
                            let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
                            for r in 0..n {
                                for c in (r + 1)..n {
                                    upper.push(d[[r, c]]);
                                }
                            }
                            let sigma_sq = median_sigma_sq(upper);
                            self.bandwidths[i] = Some(sigma_sq);
                            KernelSpec::Rbf { sigma_sq }
                        }
                    };
                    d.mapv(|x| spec.from_sq_dist(x))
                }
            };
            if out.dim() != node.shape {
                return Err(GraphError::ShapeMismatch {
                    node: i,
                    op: node.op.name(),
                    detail: format!("inferred {:?}, computed {:?}", node.shape, out.dim()),
                });
            }
            if !out.iter().all(|x| x.is_finite()) {
                return Err(GraphError::NonFinite {
                    node: i,
                    op: node.op.name(),
                });
            }
            values.push(out);
        }
        self.values = Some(values);
        Ok(())
    }

    pub fn value(&self, id: NodeId) -> Option<&Array2<f64>> {
        self.values.as_ref()?.get(id.0)
    }

    /// Value of a 1×1 node after forward.
    pub fn scalar(&self, id: NodeId) -> Option<f64> {
        let v = self.value(id)?;
        (v.dim() == (1, 1)).then(|| v[[0, 0]])
    }

    /// Reverse-mode pass from a scalar node; returns gradients for every
    /// trainable input that the output depends on.
    pub fn backward(&self, output: NodeId) -> Result<Gradients, GraphError> {
        let values = self.values.as_ref().ok_or(GraphError::BackwardBeforeForward)?;
        let out_node = self.nodes.get(output.0).ok_or(GraphError::UnknownNode(output.0))?;
        if out_node.shape != (1, 1) {
            return Err(GraphError::NonScalarOutput {
                node: output.0,
                shape: out_node.shape,
            });
        }

        let mut adj: Vec<Option<Array2<f64>>> = vec![None; output.0 + 1];
        adj[output.0] = Some(Array2::ones((1, 1)));

        fn accumulate(adj: &mut [Option<Array2<f64>>], id: NodeId, g: Array2<f64>) {
            match &mut adj[id.0] {
                Some(acc) => *acc += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = adj[i].take() else { continue };
            let val = |id: &NodeId| &values[id.0];
            let wants = |id: &NodeId| self.nodes[id.0].needs_grad;
            match &node.op {
                Op::Input { trainable, .. } => {
                    if *trainable {
                        adj[i] = Some(g);
                    }
                }
                Op::Constant(_) => {}
                Op::MatMul(a, b) => {
                    if wants(a) {
                        accumulate(&mut adj, *a, g.dot(&val(b).t()));
                    }
                    if wants(b) {
                        accumulate(&mut adj, *b, val(a).t().dot(&g));
                    }
                }
                Op::Transpose(a) => accumulate(&mut adj, *a, g.t().to_owned()),
                Op::Add(a, b) => {
                    if wants(a) {
                        accumulate(&mut adj, *a, g.clone());
                    }
                    if wants(b) {
                        accumulate(&mut adj, *b, g);
                    }
                }
                Op::Sub(a, b) => {
                    if wants(a) {
                        accumulate(&mut adj, *a, g.clone());
                    }
                    if wants(b) {
                        accumulate(&mut adj, *b, -g);
                    }
                }
                Op::Mul(a, b) => {
                    if wants(a) {
                        accumulate(&mut adj, *a, &g * val(b));
                    }
                    if wants(b) {
                        accumulate(&mut adj, *b, &g * val(a));
                    }
                }
                Op::AddRow(a, r) => {
                    if wants(r) {
                        accumulate(&mut adj, *r, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if wants(a) {
                        accumulate(&mut adj, *a, g);
                    }
                }
                Op::Scale(a, c) => accumulate(&mut adj, *a, g * *c),
                Op::AddScalar(a, _) => accumulate(&mut adj, *a, g),
                Op::Exp(a) => accumulate(&mut adj, *a, g * &values[i]),
                Op::Rsqrt(a) => {
                    let y = &values[i];
                    accumulate(&mut adj, *a, ndarray::Zip::from(&g).and(y).map_collect(|&g, &y| -0.5 * g * y * y * y));
                }
                Op::Sum(a) => {
                    let shape = self.nodes[a.0].shape;
                    accumulate(&mut adj, *a, Array2::from_elem(shape, g[[0, 0]]));
                }
                Op::Mean(a) => {
                    let shape = self.nodes[a.0].shape;
                    let n = (shape.0 * shape.1) as f64;
                    accumulate(&mut adj, *a, Array2::from_elem(shape, g[[0, 0]] / n));
                }
                Op::PairwiseSqDist(a, b) => {
                    // D_ij = ‖a_i − b_j‖²
                    // dA_i = 2 (Σ_j G_ij) a_i − 2 (G B)_i ;  dB_j = 2 (Σ_i G_ij) b_j − 2 (Gᵀ A)_j
                    let (x, y) = (val(a), val(b));
                    if wants(a) {
                        let row_sums = g.sum_axis(Axis(1)).insert_axis(Axis(1));
                        let da = (x * &row_sums - g.dot(y)) * 2.0;
                        accumulate(&mut adj, *a, da);
                    }
                    if wants(b) {
                        let col_sums = g.sum_axis(Axis(0)).insert_axis(Axis(1));
                        let db = (y * &col_sums - g.t().dot(x)) * 2.0;
                        accumulate(&mut adj, *b, db);
                    }
                }
                Op::SliceRows(a, r) => {
                    let mut full = Array2::zeros(self.nodes[a.0].shape);
                    full.slice_mut(s![r.clone(), ..]).assign(&g);
                    accumulate(&mut adj, *a, full);
                }
                Op::SliceCols(a, c) => {
                    let mut full = Array2::zeros(self.nodes[a.0].shape);
                    full.slice_mut(s![.., c.clone()]).assign(&g);
                    accumulate(&mut adj, *a, full);
                }
                Op::LeakyRelu(a, slope) => {
                    let x = val(a);
                    let slope = *slope;
                    accumulate(
                        &mut adj,
                        *a,
                        ndarray::Zip::from(&g).and(x).map_collect(|&g, &x| if x > 0.0 { g } else { slope * g }),
                    );
                }
                Op::Sigmoid(a) => {
                    let y = &values[i];
                    accumulate(&mut adj, *a, ndarray::Zip::from(&g).and(y).map_collect(|&g, &y| g * y * (1.0 - y)));
                }
                Op::Trace(a) => {
                    let n = self.nodes[a.0].shape.0;
                    accumulate(&mut adj, *a, Array2::eye(n) * g[[0, 0]]);
                }
                Op::Gram(a, kernel) => {
                    let spec = match kernel {
                        GramKernel::Fixed(spec) => *spec,
                        GramKernel::RbfMedian => KernelSpec::Rbf {
                            sigma_sq: self.bandwidths[i].expect("bandwidth recorded by forward"),
                        },
                    };
                    let k = &values[i];
                    accumulate(&mut adj, *a, ndarray::Zip::from(&g).and(k).map_collect(|&g, &k| g * spec.d_sq_dist(k)));
                }
            }
        }

        adj.resize(self.nodes.len(), None);
        for (i, node) in self.nodes.iter().enumerate() {
            if !matches!(node.op, Op::Input { trainable: true, .. }) {
                adj[i] = None;
            }
        }
        Ok(Gradients { grads: adj })
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
