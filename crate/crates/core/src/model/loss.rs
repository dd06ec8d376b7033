use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::{BandwidthPolicy, ModelError, TrainingConfig, WaeParams};
use crate::autodiff::{Graph, GramKernel, MlpGrads, MlpNodes, MlpParams, NodeId};
use crate::box_muller_pair;
use crate::kernels::KernelSpec;

/// Per-term values of the regularized loss on one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub recon: f64,
    pub mmd: f64,
    pub hsic_ind: f64,
    pub hsic_dep: f64,
    pub total: f64,
    pub lambda_mmd: f64,
    pub lambda_ind: f64,
    pub lambda_dep: f64,
}

impl LossBreakdown {
    /// `recon + λ1·mmd + λ2·hsic_ind − λ3·hsic_dep`, evaluated in the same
    /// order as the loss graph so the result is bit-identical to `total`.
    pub fn recompose(&self) -> f64 {
        recompose(
            self.recon,
            self.mmd,
            self.hsic_ind,
            self.hsic_dep,
            (self.lambda_mmd, self.lambda_ind, self.lambda_dep),
        )
    }
}

pub fn recompose(recon: f64, mmd: f64, hsic_ind: f64, hsic_dep: f64, (l1, l2, l3): (f64, f64, f64)) -> f64 {
    recon + mmd * l1 + hsic_ind * l2 - hsic_dep * l3
}

/// A latent batch with its dependent axis (column 0) and independent axes
/// (columns 1..d_z).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPartition {
    pub z: Array2<f64>,
}

impl LatentPartition {
    pub fn dep(&self) -> ArrayView1<'_, f64> {
        self.z.column(0)
    }

    pub fn ind(&self) -> ArrayView2<'_, f64> {
        self.z.slice(ndarray::s![.., 1..])
    }

    pub fn d_z(&self) -> usize {
        self.z.ncols()
    }
}

/// `n × d_z` standard normal draws (Box-Muller, row-major fill).
pub fn prior_sample<R: Rng + ?Sized>(n: usize, d_z: usize, rng: &mut R) -> Result<Array2<f64>, ModelError> {
    if n == 0 || d_z == 0 {
        return Err(ModelError::PriorShape { n, d_z });
    }
    let total = n * d_z;
    let mut v = Vec::with_capacity(total + 1);
    while v.len() < total {
        let (a, b) = box_muller_pair(rng);
        v.push(a);
        v.push(b);
    }
    v.truncate(total);
    Ok(Array2::from_shape_vec((n, d_z), v).expect("length matches"))
}

pub fn encode(encoder: &MlpParams, x: ArrayView2<f64>) -> Result<LatentPartition, ModelError> {
    Ok(LatentPartition { z: encoder.apply(x)? })
}

pub fn decode(decoder: &MlpParams, z: ArrayView2<f64>) -> Result<Array2<f64>, ModelError> {
    Ok(decoder.apply(z)?)
}

fn side_info_column(s: ArrayView1<f64>) -> Result<Array2<f64>, ModelError> {
    if let Some(i) = s.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteSideInfo(i));
    }
    Ok(s.to_owned().insert_axis(Axis(1)))
}

/// Handles into the loss graph for one batch size.
#[derive(Debug, Clone)]
pub struct LossGraph {
    graph: Graph,
    batch: usize,
    x: NodeId,
    s: NodeId,
    prior: NodeId,
    encoder: MlpNodes,
    decoder: MlpNodes,
    recon: NodeId,
    mmd: NodeId,
    hsic_ind: Option<NodeId>,
    hsic_dep: NodeId,
    total: NodeId,
    /// (term, gram node) for every kernel in the loss.
    kernels: Vec<(&'static str, NodeId)>,
    weights: (f64, f64, f64),
}

impl LossGraph {
    /// Builds the loss for batches of `batch` rows. HSIC kernels follow the
    /// config's bandwidth policy.
    pub fn new(params: &WaeParams, batch: usize, config: &TrainingConfig) -> Result<Self, ModelError> {
        let kernel = match config.bandwidth {
            BandwidthPolicy::PerBatchMedian => GramKernel::RbfMedian,
            BandwidthPolicy::Frozen(sigma_sq) => GramKernel::Fixed(KernelSpec::Rbf { sigma_sq }),
        };
        Self::with_hsic_kernels(params, batch, config, [kernel; 3])
    }

    /// Same loss with explicit kernels for (Z_ind, Z_dep, S).
    pub fn with_hsic_kernels(
        params: &WaeParams,
        batch: usize,
        config: &TrainingConfig,
        [k_ind, k_dep, k_s]: [GramKernel; 3],
    ) -> Result<Self, ModelError> {
        config.validate()?;
        if batch < 2 {
            return Err(ModelError::BatchTooSmall(batch));
        }
        let n = batch;
        let nf = n as f64;
        let d_x = params.d_x();
        let d_z = params.d_z();
        let mut g = Graph::new();
        let x = g.input("x", (n, d_x), false);
        let s = g.input("s", (n, 1), false);
        let prior = g.input("prior", (n, d_z), false);
        let encoder = params.encoder.build(&mut g, x, "encoder")?;
        let z = encoder.output;
        let decoder = params.decoder.build(&mut g, z, "decoder")?;
        let mut kernels = Vec::new();

        // reconstruction: mean over the batch of ‖x − G(Q(x))‖²
        let diff = g.sub(x, decoder.output)?;
        let sq = g.mul(diff, diff)?;
        let sse = g.sum(sq);
        let recon = g.scale(sse, 1.0 / nf);

        // unbiased MMD² between Q(X) and the prior sample, IMQ kernel
        let imq = GramKernel::Fixed(KernelSpec::Imq);
        let mut off_diag_mean = |g: &mut Graph, a: NodeId, term: &'static str| -> Result<NodeId, ModelError> {
            let d = g.pairwise_sq_dist(a, a)?;
            let k = g.gram(d, imq)?;
            kernels.push((term, k));
            let total = g.sum(k);
            let diag = g.trace(k)?;
            let off = g.sub(total, diag)?;
            Ok(g.scale(off, 1.0 / (nf * (nf - 1.0))))
        };
        let mmd_qq = off_diag_mean(&mut g, z, "mmd")?;
        let mmd_pp = off_diag_mean(&mut g, prior, "mmd")?;
        let d_qp = g.pairwise_sq_dist(z, prior)?;
        let k_qp = g.gram(d_qp, imq)?;
        kernels.push(("mmd", k_qp));
        let cross_sum = g.sum(k_qp);
        let cross = g.scale(cross_sum, 2.0 / (nf * nf));
        let within = g.add(mmd_qq, mmd_pp)?;
        let mmd = g.sub(within, cross)?;

        // HSIC_b = tr(K H L H) / n²
        let h = g.constant(Array2::eye(n) - Array2::from_elem((n, n), 1.0 / nf));
        let d_s = g.pairwise_sq_dist(s, s)?;
        let l = g.gram(d_s, k_s)?;
        kernels.push(("hsic_s", l));
        let lh = g.matmul(l, h)?;
        let mut hsic = |g: &mut Graph, block: NodeId, kernel: GramKernel, term: &'static str| -> Result<NodeId, ModelError> {
            let d = g.pairwise_sq_dist(block, block)?;
            let k = g.gram(d, kernel)?;
            kernels.push((term, k));
            let kh = g.matmul(k, h)?;
            let khlh = g.matmul(kh, lh)?;
            let tr = g.trace(khlh)?;
            Ok(g.scale(tr, 1.0 / (nf * nf)))
        };
        let z_dep = g.slice_cols(z, 0..1)?;
        let hsic_dep = hsic(&mut g, z_dep, k_dep, "hsic_dep")?;
        let hsic_ind = if d_z >= 2 {
            let z_ind = g.slice_cols(z, 1..d_z)?;
            Some(hsic(&mut g, z_ind, k_ind, "hsic_ind")?)
        } else {
            None
        };

        let weights = (config.lambda_mmd, config.lambda_ind, config.lambda_dep);
        let w_mmd = g.scale(mmd, weights.0);
        let mut total = g.add(recon, w_mmd)?;
        if let Some(hi) = hsic_ind {
            let w_ind = g.scale(hi, weights.1);
            total = g.add(total, w_ind)?;
        }
        let w_dep = g.scale(hsic_dep, weights.2);
        let total = g.sub(total, w_dep)?;

        Ok(LossGraph {
            graph: g,
            batch: n,
            x,
            s,
            prior,
            encoder,
            decoder,
            recon,
            mmd,
            hsic_ind,
            hsic_dep,
            total,
            kernels,
            weights,
        })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Kernel of every Gram node, labelled by the loss term it serves.
    pub fn kernel_tags(&self) -> Vec<(&'static str, GramKernel)> {
        self.kernels
            .iter()
            .map(|&(term, id)| match self.graph.op(id) {
                crate::autodiff::Op::Gram(_, k) => (term, *k),
                _ => unreachable!("kernel list only holds gram nodes"),
            })
            .collect()
    }

    /// σ² used by each HSIC kernel on the last evaluation, as
    /// (Z_ind, Z_dep, S). Z_ind is `None` when d_z = 1.
    pub fn hsic_bandwidths(&self) -> (Option<f64>, Option<f64>, Option<f64>) {
        let find = |term: &str| {
            self.kernels
                .iter()
                .find(|(t, _)| *t == term)
                .and_then(|&(_, id)| self.graph.resolved_bandwidth(id))
        };
        (find("hsic_ind"), find("hsic_dep"), find("hsic_s"))
    }

    /// Runs the forward pass for one batch.
    pub fn evaluate(
        &mut self,
        params: &WaeParams,
        x: ArrayView2<f64>,
        s: ArrayView1<f64>,
        prior: &Array2<f64>,
    ) -> Result<LossBreakdown, ModelError> {
        if x.nrows() != s.len() {
            return Err(ModelError::RowMismatch { x: x.nrows(), s: s.len() });
        }
        let s_col = side_info_column(s)?;
        let x = x.to_owned();
        let enc = self.encoder.feeds(&params.encoder);
        let dec = self.decoder.feeds(&params.decoder);
        let mut feeds: Vec<(NodeId, &Array2<f64>)> = vec![(self.x, &x), (self.s, &s_col), (self.prior, prior)];
        feeds.extend(enc.iter().chain(dec.iter()).map(|(id, v)| (*id, v)));
        self.graph.forward(&feeds)?;
        let get = |id: NodeId| self.graph.scalar(id).expect("scalar loss term");
        let (lambda_mmd, lambda_ind, lambda_dep) = self.weights;
        Ok(LossBreakdown {
            recon: get(self.recon),
            mmd: get(self.mmd),
            hsic_ind: self.hsic_ind.map_or(0.0, get),
            hsic_dep: get(self.hsic_dep),
            total: get(self.total),
            lambda_mmd,
            lambda_ind,
            lambda_dep,
        })
    }

    /// Gradients of `total` for (encoder, decoder) after [`Self::evaluate`].
    pub fn gradients(&self) -> Result<(MlpGrads, MlpGrads), ModelError> {
        let mut grads = self.graph.backward(self.total)?;
        Ok((self.encoder.gradients(&mut grads), self.decoder.gradients(&mut grads)))
    }
}

/// Loss on one batch with a freshly drawn prior sample of the same size.
pub fn compute_loss<R: Rng + ?Sized>(
    params: &WaeParams,
    x: ArrayView2<f64>,
    s: ArrayView1<f64>,
    config: &TrainingConfig,
    rng: &mut R,
) -> Result<LossBreakdown, ModelError> {
    if x.nrows() != s.len() {
        return Err(ModelError::RowMismatch { x: x.nrows(), s: s.len() });
    }
    let mut lg = LossGraph::new(params, x.nrows(), config)?;
    let prior = prior_sample(x.nrows(), params.d_z(), rng)?;
    lg.evaluate(params, x, s, &prior)
}

/// Convenience for callers holding S as an `n × 1` matrix.
pub fn side_info_from_matrix(s: ArrayView2<f64>) -> Result<Array1<f64>, ModelError> {
    if s.ncols() != 1 {
        return Err(ModelError::SideInfoWidth(s.ncols()));
    }
    Ok(s.column(0).to_owned())
}
