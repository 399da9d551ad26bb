//! Population-conditioned Q-network `Q(x, mu, .)` with hand-written backprop.
//!
//! The state and the population are embedded separately (identity embedding
//! or a small convolutional tower per input plane) and meet in the first
//! dense layer. Because that layer is linear in the concatenated embedding,
//! its pre-activation splits into a state part and a population part; both
//! are computed once per distinct state and distinct population in a batch,
//! so a batch over the product of `S` states and `M` populations costs
//! `S + M` embeddings instead of `S * M`.

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::space::{Geometry, StateSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, a: &mut Array2<f64>) {
        if self == Activation::Relu {
            a.mapv_inplace(|v| v.max(0.0));
        }
    }

    /// Multiplies `grad` by the derivative at `pre`.
    fn backprop(self, grad: &mut Array2<f64>, pre: &Array2<f64>) {
        if self == Activation::Relu {
            ndarray::Zip::from(grad).and(pre).for_each(|g, &p| {
                if p <= 0.0 {
                    *g = 0.0;
                }
            });
        }
    }
}

/// How each input is embedded before the first dense layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Embedding {
    /// One-hot state and the raw histogram.
    Flat,
    /// Both inputs as `width x height` planes, each through its own stack of
    /// 3x3 same-padding convolutions with the given output channels.
    Conv {
        width: usize,
        height: usize,
        channels: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub embedding: Embedding,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Replace the population embedding by zeros.
    pub zero_mu_input: bool,
}

impl NetworkSpec {
    pub fn flat(n_states: usize, n_actions: usize, hidden: Vec<usize>) -> Self {
        Self {
            n_states,
            n_actions,
            embedding: Embedding::Flat,
            hidden,
            activation: Activation::Relu,
            zero_mu_input: false,
        }
    }

    pub fn conv(width: usize, height: usize, n_actions: usize, channels: Vec<usize>, hidden: Vec<usize>) -> Self {
        Self {
            n_states: width * height,
            n_actions,
            embedding: Embedding::Conv {
                width,
                height,
                channels,
            },
            hidden,
            activation: Activation::Relu,
            zero_mu_input: false,
        }
    }

    /// Flat `[64, 64]` on lines; conv `[8, 16]` channels and `[128]` dense on
    /// grids.
    pub fn default_for(space: &StateSpace, n_actions: usize) -> Self {
        match space.geometry() {
            Geometry::Line { n } => Self::flat(n, n_actions, vec![64, 64]),
            Geometry::Grid { width, height } => Self::conv(width, height, n_actions, vec![8, 16], vec![128]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(MfgError::InvalidNetwork(m.to_string()));
        if self.n_states == 0 || self.n_actions == 0 {
            return bad("empty input or output");
        }
        if self.hidden.contains(&0) {
            return bad("zero-width hidden layer");
        }
        if let Embedding::Conv {
            width,
            height,
            channels,
        } = &self.embedding
        {
            if width * height != self.n_states {
                return bad("conv plane does not match the state count");
            }
            if channels.is_empty() || channels.contains(&0) {
                return bad("conv tower needs nonzero channel counts");
            }
        }
        Ok(())
    }

    /// Width of one input's embedding.
    pub fn embed_dim(&self) -> usize {
        match &self.embedding {
            Embedding::Flat => self.n_states,
            Embedding::Conv { channels, .. } => self.n_states * channels.last().copied().unwrap_or(1),
        }
    }

    fn conv_layers(&self) -> Vec<(usize, usize)> {
        match &self.embedding {
            Embedding::Flat => Vec::new(),
            Embedding::Conv { channels, .. } => {
                let mut c_in = 1;
                channels
                    .iter()
                    .map(|&c| {
                        let l = (c_in, c);
                        c_in = c;
                        l
                    })
                    .collect()
            }
        }
    }

    fn dense_layers(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![2 * self.embed_dim()];
        dims.extend(&self.hidden);
        dims.push(self.n_actions);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Shapes of all tensors in parameter order: state-tower convs, then
    /// population-tower convs (weight then bias), then dense layers.
    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::new();
        for _tower in 0..2 {
            for (c_in, c_out) in self.conv_layers() {
                shapes.push((c_out, 9 * c_in));
                shapes.push((1, c_out));
            }
        }
        for (i, o) in self.dense_layers() {
            shapes.push((o, i));
            shapes.push((1, o));
        }
        shapes
    }

    fn n_conv(&self) -> usize {
        self.conv_layers().len()
    }
}

/// A batch over distinct states and distinct populations; each sample pairs
/// one of each.
#[derive(Clone, Copy, Debug)]
pub struct BatchInput<'a> {
    pub states: &'a [usize],
    pub mus: &'a [&'a [f64]],
    pub pairs: &'a [(usize, usize)],
}

struct ConvLayerCache {
    cols: Array2<f64>,
    pre: Array2<f64>,
}

struct TowerCache {
    layers: Vec<ConvLayerCache>,
}

/// Intermediate values kept for backprop.
pub struct ForwardCache {
    pairs: Vec<(usize, usize)>,
    fx: Array2<f64>,
    fmu: Option<Array2<f64>>,
    x_tower: Option<TowerCache>,
    mu_tower: Option<TowerCache>,
    /// Input to each dense layer after the first.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of every dense layer; the last is the raw output.
    pres: Vec<Array2<f64>>,
}

impl ForwardCache {
    /// `q = scale * raw + shift`, one row per sample.
    pub fn raw_output(&self) -> &Array2<f64> {
        self.pres.last().expect("at least one dense layer")
    }

    /// Sign pattern of every hidden pre-activation (conv and dense).
    pub fn activation_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for tower in [&self.x_tower, &self.mu_tower].into_iter().flatten() {
            for l in &tower.layers {
                out.extend(l.pre.iter().map(|&v| v > 0.0));
            }
        }
        for p in &self.pres[..self.pres.len() - 1] {
            out.extend(p.iter().map(|&v| v > 0.0));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QNetwork {
    spec: NetworkSpec,
    params: Vec<Array2<f64>>,
    out_scale: f64,
    out_shift: f64,
}

impl QNetwork {
    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let params = spec.param_shapes().into_iter().map(Array2::zeros).collect();
        Ok(Self {
            spec,
            params,
            out_scale: 1.0,
            out_shift: 0.0,
        })
    }

    /// He-uniform weights, zero biases.
    pub fn init<R: Rng>(spec: NetworkSpec, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        for p in net.params.iter_mut() {
            if p.nrows() == 1 {
                continue;
            }
            let bound = (6.0 / p.ncols() as f64).sqrt();
            p.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        Ok(net)
    }

    pub fn from_parts(spec: NetworkSpec, params: Vec<Array2<f64>>, out_scale: f64, out_shift: f64) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.param_shapes();
        if shapes.len() != params.len() || shapes.iter().zip(&params).any(|(s, p)| *s != p.dim()) {
            return Err(MfgError::InvalidNetwork("parameter shapes do not match the network layout".into()));
        }
        if params.iter().flatten().any(|v| !v.is_finite()) || !out_scale.is_finite() || !out_shift.is_finite() {
            return Err(MfgError::InvalidNetwork("non-finite parameter".into()));
        }
        Ok(Self {
            spec,
            params,
            out_scale,
            out_shift,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Array2<f64>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.iter().map(Array2::len).sum()
    }

    pub fn output_affine(&self) -> (f64, f64) {
        (self.out_scale, self.out_shift)
    }

    /// Changes the output affine map while keeping the function unchanged,
    /// by compensating in the last layer.
    pub fn rescale_output(&mut self, scale: f64, shift: f64) {
        let (old_scale, old_shift) = (self.out_scale, self.out_shift);
        let n = self.params.len();
        self.params[n - 2].mapv_inplace(|w| w * old_scale / scale);
        self.params[n - 1].mapv_inplace(|b| (b * old_scale + old_shift - shift) / scale);
        self.out_scale = scale;
        self.out_shift = shift;
    }

    /// Sets the output affine map without compensation.
    pub fn set_output_affine(&mut self, scale: f64, shift: f64) {
        self.out_scale = scale;
        self.out_shift = shift;
    }

    /// A cheap fingerprint of all parameters, for detecting changes.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for v in self.params.iter().flatten() {
            h ^= v.to_bits();
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }

    fn dense_offset(&self) -> usize {
        4 * self.spec.n_conv()
    }

    fn w0_split(&self) -> (ArrayView2<'_, f64>, ArrayView2<'_, f64>) {
        let w0 = &self.params[self.dense_offset()];
        let d = self.spec.embed_dim();
        (w0.slice(s![.., ..d]), w0.slice(s![.., d..]))
    }

    fn plane_dims(&self) -> (usize, usize) {
        match &self.spec.embedding {
            Embedding::Conv { width, height, .. } => (*width, *height),
            Embedding::Flat => (self.spec.n_states, 1),
        }
    }

    /// Embeds input planes (one row per image). Returns the features and the
    /// tower cache when the embedding is convolutional.
    fn embed(&self, planes: Array2<f64>, tower: usize, keep: bool) -> (Array2<f64>, Option<TowerCache>) {
        let n_conv = self.spec.n_conv();
        if n_conv == 0 {
            return (planes, None);
        }
        let (w, h) = self.plane_dims();
        let batch = planes.nrows();
        let mut act = planes.into_shape_with_order((batch * w * h, 1)).expect("contiguous planes");
        let mut layers = Vec::with_capacity(n_conv);
        for l in 0..n_conv {
            let weight = &self.params[(tower * n_conv + l) * 2];
            let bias = &self.params[(tower * n_conv + l) * 2 + 1];
            let cols = im2col(&act, batch, w, h);
            let mut pre = cols.dot(&weight.t());
            pre += bias;
            let mut out = pre.clone();
            self.spec.activation.apply(&mut out);
            if keep {
                layers.push(ConvLayerCache { cols, pre });
            }
            act = out;
        }
        let c = act.ncols();
        let feats = act.into_shape_with_order((batch, w * h * c)).expect("contiguous activations");
        (feats, keep.then_some(TowerCache { layers }))
    }

    fn one_hot_planes(&self, states: &[usize]) -> Array2<f64> {
        let mut p = Array2::zeros((states.len(), self.spec.n_states));
        for (i, &x) in states.iter().enumerate() {
            p[[i, x]] = 1.0;
        }
        p
    }

    fn mu_planes(&self, mus: &[&[f64]]) -> Array2<f64> {
        let n = self.spec.n_states;
        let mut p = Array2::zeros((mus.len(), n));
        for (i, mu) in mus.iter().enumerate() {
            p.row_mut(i).assign(&ndarray::ArrayView1::from(&mu[..n]));
        }
        p
    }

    fn check_batch(&self, batch: &BatchInput<'_>) -> Result<()> {
        let n = self.spec.n_states;
        if batch.states.iter().any(|&x| x >= n) {
            return Err(MfgError::InvalidNetwork("state index out of range".into()));
        }
        if batch.mus.iter().any(|m| m.len() != n) {
            return Err(MfgError::Shape {
                what: "network population input",
                expected: n,
                actual: batch.mus.iter().map(|m| m.len()).find(|&l| l != n).unwrap_or(0),
            });
        }
        if batch
            .pairs
            .iter()
            .any(|&(i, j)| i >= batch.states.len() || j >= batch.mus.len())
        {
            return Err(MfgError::InvalidNetwork("batch pair index out of range".into()));
        }
        Ok(())
    }

    /// First-layer contribution of each state: `embed(x) W_x^T`.
    pub fn state_projection(&self, states: &[usize]) -> Array2<f64> {
        let (fx, _) = self.embed(self.one_hot_planes(states), 0, false);
        fx.dot(&self.w0_split().0.t())
    }

    /// First-layer contribution of each population: `embed(mu) W_mu^T`.
    pub fn mu_projection(&self, mus: &[&[f64]]) -> Array2<f64> {
        let out0 = self.params[self.dense_offset()].nrows();
        if self.spec.zero_mu_input {
            return Array2::zeros((mus.len(), out0));
        }
        let (fmu, _) = self.embed(self.mu_planes(mus), 1, false);
        fmu.dot(&self.w0_split().1.t())
    }

    /// Runs the dense head on first-layer pre-activations (bias excluded).
    fn head(&self, mut pre0: Array2<f64>, keep: bool) -> (Array2<f64>, Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let off = self.dense_offset();
        let n_dense = self.spec.hidden.len() + 1;
        pre0 += &self.params[off + 1];
        let mut inputs = Vec::new();
        let mut pres = Vec::new();
        let mut cur = pre0;
        for l in 1..n_dense {
            let mut act = cur.clone();
            self.spec.activation.apply(&mut act);
            let mut next = act.dot(&self.params[off + 2 * l].t());
            next += &self.params[off + 2 * l + 1];
            if keep {
                pres.push(cur);
                inputs.push(act);
            }
            cur = next;
        }
        let out = cur.clone();
        if keep {
            pres.push(cur);
        }
        (out, inputs, pres)
    }

    fn scaled(&self, mut raw: Array2<f64>) -> Array2<f64> {
        let (a, b) = (self.out_scale, self.out_shift);
        raw.mapv_inplace(|v| a * v + b);
        raw
    }

    /// Q-values for every sample of the batch.
    pub fn forward(&self, batch: &BatchInput<'_>) -> Result<Array2<f64>> {
        self.check_batch(batch)?;
        let zx = self.state_projection(batch.states);
        let zmu = self.mu_projection(batch.mus);
        let (raw, _, _) = self.head(gather_sum(&zx, &zmu, batch.pairs), false);
        Ok(self.scaled(raw))
    }

    /// Q-values for every state against one population, from precomputed
    /// state projections (`state_projection` over all states in order).
    pub fn q_table_with(&self, state_proj: &Array2<f64>, mu: &[f64]) -> Result<Array2<f64>> {
        if mu.len() != self.spec.n_states {
            return Err(MfgError::Shape {
                what: "network population input",
                expected: self.spec.n_states,
                actual: mu.len(),
            });
        }
        let zmu = self.mu_projection(&[mu]);
        let pre0 = state_proj + &zmu;
        let (raw, _, _) = self.head(pre0, false);
        Ok(self.scaled(raw))
    }

    /// Activations entering the output layer for every row of `state_proj`
    /// against `mu`; `None` when there are no hidden layers.
    pub fn penultimate_with(&self, state_proj: &Array2<f64>, mu: &[f64]) -> Option<Array2<f64>> {
        if self.spec.hidden.is_empty() {
            return None;
        }
        let off = self.dense_offset();
        let n_dense = self.spec.hidden.len() + 1;
        let mut cur = state_proj + &self.mu_projection(&[mu]);
        cur += &self.params[off + 1];
        for l in 1..n_dense {
            self.spec.activation.apply(&mut cur);
            if l == n_dense - 1 {
                break;
            }
            let mut next = cur.dot(&self.params[off + 2 * l].t());
            next += &self.params[off + 2 * l + 1];
            cur = next;
        }
        Some(cur)
    }

    /// Replaces the output layer (in units before the output affine map).
    pub fn set_output_layer(&mut self, weight: Array2<f64>, bias: Array2<f64>) -> Result<()> {
        let n = self.params.len();
        if weight.dim() != self.params[n - 2].dim() || bias.dim() != self.params[n - 1].dim() {
            return Err(MfgError::InvalidNetwork("output layer shape mismatch".into()));
        }
        self.params[n - 2] = weight;
        self.params[n - 1] = bias;
        Ok(())
    }

    /// Q-values of one state against one population.
    pub fn q_values(&self, x: usize, mu: &[f64]) -> Result<Vec<f64>> {
        let q = self.forward(&BatchInput {
            states: &[x],
            mus: &[mu],
            pairs: &[(0, 0)],
        })?;
        Ok(q.row(0).to_vec())
    }

    /// Forward pass keeping every intermediate needed by [`Self::backward`].
    /// Returns the Q-values and the cache.
    pub fn forward_train(&self, batch: &BatchInput<'_>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_batch(batch)?;
        let (fx, x_tower) = self.embed(self.one_hot_planes(batch.states), 0, true);
        let zx = fx.dot(&self.w0_split().0.t());
        let (zmu, fmu, mu_tower) = if self.spec.zero_mu_input {
            let out0 = self.params[self.dense_offset()].nrows();
            (Array2::zeros((batch.mus.len(), out0)), None, None)
        } else {
            let (fmu, t) = self.embed(self.mu_planes(batch.mus), 1, true);
            (fmu.dot(&self.w0_split().1.t()), Some(fmu), t)
        };
        let (raw, inputs, pres) = self.head(gather_sum(&zx, &zmu, batch.pairs), true);
        let cache = ForwardCache {
            pairs: batch.pairs.to_vec(),
            fx,
            fmu,
            x_tower,
            mu_tower,
            inputs,
            pres,
        };
        Ok((self.scaled(raw), cache))
    }

    /// Gradients of a loss with respect to every parameter, given the loss
    /// gradient `dq` with respect to the Q-values of each sample.
    pub fn backward(&self, cache: &ForwardCache, dq: &Array2<f64>) -> Vec<Array2<f64>> {
        let off = self.dense_offset();
        let n_dense = self.spec.hidden.len() + 1;
        let mut grads: Vec<Array2<f64>> = self.params.iter().map(|p| Array2::zeros(p.dim())).collect();
        let mut d = dq * self.out_scale;
        for l in (1..n_dense).rev() {
            let input = &cache.inputs[l - 1];
            grads[off + 2 * l] = d.t().dot(input);
            grads[off + 2 * l + 1] = d.sum_axis(Axis(0)).insert_axis(Axis(0));
            let mut dh = d.dot(&self.params[off + 2 * l]);
            self.spec.activation.backprop(&mut dh, &cache.pres[l - 1]);
            d = dh;
        }
        grads[off + 1] = d.sum_axis(Axis(0)).insert_axis(Axis(0));
        let out0 = d.ncols();
        let mut gx = Array2::zeros((cache.fx.nrows(), out0));
        let n_mu = cache.fmu.as_ref().map_or(0, Array2::nrows);
        let mut gmu = Array2::zeros((n_mu, out0));
        for (s, &(i, j)) in cache.pairs.iter().enumerate() {
            let row = d.row(s);
            gx.row_mut(i).scaled_add(1.0, &row);
            if n_mu > 0 {
                gmu.row_mut(j).scaled_add(1.0, &row);
            }
        }
        let dim = self.spec.embed_dim();
        let mut gw0 = Array2::zeros((out0, 2 * dim));
        gw0.slice_mut(s![.., ..dim]).assign(&gx.t().dot(&cache.fx));
        if let Some(fmu) = &cache.fmu {
            gw0.slice_mut(s![.., dim..]).assign(&gmu.t().dot(fmu));
        }
        grads[off] = gw0;
        let (wx, wmu) = self.w0_split();
        if let Some(t) = &cache.x_tower {
            let dfx = gx.dot(&wx);
            self.tower_backward(t, 0, dfx, &mut grads);
        }
        if let Some(t) = &cache.mu_tower {
            let dfmu = gmu.dot(&wmu);
            self.tower_backward(t, 1, dfmu, &mut grads);
        }
        grads
    }

    fn tower_backward(&self, cache: &TowerCache, tower: usize, dfeat: Array2<f64>, grads: &mut [Array2<f64>]) {
        let n_conv = self.spec.n_conv();
        let (w, h) = self.plane_dims();
        let batch = dfeat.nrows();
        let c_last = dfeat.ncols() / (w * h);
        let mut d = dfeat.into_shape_with_order((batch * w * h, c_last)).expect("contiguous gradient");
        for l in (0..n_conv).rev() {
            let lc = &cache.layers[l];
            let wi = (tower * n_conv + l) * 2;
            self.spec.activation.backprop(&mut d, &lc.pre);
            grads[wi] = d.t().dot(&lc.cols);
            grads[wi + 1] = d.sum_axis(Axis(0)).insert_axis(Axis(0));
            if l > 0 {
                let dcols = d.dot(&self.params[wi]);
                let c_in = self.params[wi].ncols() / 9;
                d = col2im(&dcols, batch, w, h, c_in);
            }
        }
    }
}

/// `pre[s] = zx[i_s] + zmu[j_s]`.
fn gather_sum(zx: &Array2<f64>, zmu: &Array2<f64>, pairs: &[(usize, usize)]) -> Array2<f64> {
    let mut out = Array2::zeros((pairs.len(), zx.ncols()));
    for (s, &(i, j)) in pairs.iter().enumerate() {
        let mut row = out.row_mut(s);
        row.assign(&zx.row(i));
        row += &zmu.row(j);
    }
    out
}

/// Offsets of the 3x3 neighbourhood in kernel order.
const TAPS: [(isize, isize); 9] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 0),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Unfolds `(batch * h * w, c)` pixel rows into `(batch * h * w, 9 * c)`
/// patches with zero padding; column `k * c + ci` holds tap `k`, channel `ci`.
fn im2col(act: &Array2<f64>, batch: usize, w: usize, h: usize) -> Array2<f64> {
    let c = act.ncols();
    let hw = w * h;
    let mut cols = Array2::zeros((batch * hw, 9 * c));
    let src = act.as_slice().expect("standard layout");
    let dst = cols.as_slice_mut().expect("standard layout");
    for b in 0..batch {
        for r in 0..h {
            for col in 0..w {
                let p = b * hw + r * w + col;
                for (k, (dr, dc)) in TAPS.iter().enumerate() {
                    let rr = r as isize + dr;
                    let cc = col as isize + dc;
                    if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                        continue;
                    }
                    let q = b * hw + rr as usize * w + cc as usize;
                    let o = p * 9 * c + k * c;
                    dst[o..o + c].copy_from_slice(&src[q * c..(q + 1) * c]);
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto pixels.
fn col2im(dcols: &Array2<f64>, batch: usize, w: usize, h: usize, c: usize) -> Array2<f64> {
    let hw = w * h;
    let mut out = Array2::zeros((batch * hw, c));
    let src = dcols.as_slice().expect("standard layout");
    let dst = out.as_slice_mut().expect("standard layout");
    for b in 0..batch {
        for r in 0..h {
            for col in 0..w {
                let p = b * hw + r * w + col;
                for (k, (dr, dc)) in TAPS.iter().enumerate() {
                    let rr = r as isize + dr;
                    let cc = col as isize + dc;
                    if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                        continue;
                    }
                    let q = b * hw + rr as usize * w + cc as usize;
                    let o = p * 9 * c + k * c;
                    for ci in 0..c {
                        dst[q * c + ci] += src[o + ci];
                    }
                }
            }
        }
    }
    out
}
