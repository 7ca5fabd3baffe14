//! Feedforward ReLU networks: storage, evaluation, algebra and accounting.
//!
//! A network is a list of affine layers `A_1, ..., A_L` realizing
//! `A_L ∘ ρ ∘ A_{L-1} ∘ ... ∘ ρ ∘ A_1`; the activation is never applied after
//! the last layer.

use crate::error::{invalid, Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Affine map `x ↦ W x + b` with `W` stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineLayer {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl AffineLayer {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return invalid("layer dimensions must be positive");
        }
        if weights.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                got: weights.len(),
            });
        }
        if bias.len() != rows {
            return Err(Error::Dimension {
                expected: rows,
                got: bias.len(),
            });
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return invalid("layer entries must be finite");
        }
        Ok(Self {
            rows,
            cols,
            weights,
            bias,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "layer dimensions must be positive");
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    /// Builds a layer from row slices.
    pub fn from_rows(rows: &[&[f64]], bias: &[f64]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return invalid("ragged weight rows");
        }
        let weights = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), cols, weights, bias.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    #[inline]
    pub fn w(&self, r: usize, c: usize) -> f64 {
        self.weights[r * self.cols + c]
    }

    #[inline]
    pub fn set_w(&mut self, r: usize, c: usize, v: f64) {
        self.weights[r * self.cols + c] = v;
    }

    #[inline]
    pub fn add_w(&mut self, r: usize, c: usize, v: f64) {
        self.weights[r * self.cols + c] += v;
    }

    #[inline]
    pub fn set_b(&mut self, r: usize, v: f64) {
        self.bias[r] = v;
    }

    #[inline]
    pub fn add_b(&mut self, r: usize, v: f64) {
        self.bias[r] += v;
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .chain(self.bias.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| {
                let row = &self.weights[r * self.cols..(r + 1) * self.cols];
                row.iter().zip(x).fold(self.bias[r], |s, (w, v)| s + w * v)
            })
            .collect()
    }

    /// Matrix product `self ∘ inner` as affine maps (no activation between).
    pub fn after(&self, inner: &AffineLayer) -> AffineLayer {
        assert_eq!(self.cols, inner.rows);
        let mut out = AffineLayer::zeros(self.rows, inner.cols);
        for r in 0..self.rows {
            let mut b = self.bias[r];
            for k in 0..self.cols {
                let a = self.w(r, k);
                if a == 0.0 {
                    continue;
                }
                b += a * inner.bias[k];
                for c in 0..inner.cols {
                    let v = inner.w(k, c);
                    if v != 0.0 {
                        out.add_w(r, c, a * v);
                    }
                }
            }
            out.bias[r] = b;
        }
        out
    }

    /// `[W; -W]`, `[b; -b]`: the layer followed by a ReLU yields (ρ(y), ρ(-y)).
    fn doubled(&self) -> AffineLayer {
        let mut out = AffineLayer::zeros(2 * self.rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let v = self.w(r, c);
                out.set_w(r, c, v);
                out.set_w(self.rows + r, c, -v);
            }
            out.bias[r] = self.bias[r];
            out.bias[self.rows + r] = -self.bias[r];
        }
        out
    }

    /// `[W, -W]`: consumes a (ρ(y), ρ(-y)) pair as `y`.
    fn split_cols(&self) -> AffineLayer {
        let mut out = AffineLayer::zeros(self.rows, 2 * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let v = self.w(r, c);
                out.set_w(r, c, v);
                out.set_w(r, self.cols + c, -v);
            }
            out.bias[r] = self.bias[r];
        }
        out
    }
}

/// Depth L, width M and weight bound B of a network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub depth: usize,
    pub width: usize,
    pub weight_bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReluNetwork {
    layers: Vec<AffineLayer>,
}

impl ReluNetwork {
    pub fn new(layers: Vec<AffineLayer>) -> Result<Self> {
        if layers.is_empty() {
            return invalid("a network needs at least one layer");
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[1].cols != pair[0].rows {
                return Err(Error::InvalidParameter(format!(
                    "layer {} expects {} inputs but layer {} has {} outputs",
                    k + 1,
                    pair[1].cols,
                    k,
                    pair[0].rows
                )));
            }
        }
        Ok(Self { layers })
    }

    pub(crate) fn from_layers_unchecked(layers: Vec<AffineLayer>) -> Self {
        debug_assert!(Self::new(layers.clone()).is_ok());
        Self { layers }
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<AffineLayer> {
        self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn width(&self) -> usize {
        self.layers.iter().map(|l| l.rows).max().unwrap_or(0)
    }

    pub fn weight_bound(&self) -> f64 {
        self.layers.iter().fold(0.0, |m, l| m.max(l.max_abs()))
    }

    pub fn stats(&self) -> NetworkStats {
        NetworkStats {
            depth: self.depth(),
            width: self.width(),
            weight_bound: self.weight_bound(),
        }
    }

    /// Total number of stored parameters.
    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.rows * (l.cols + 1)).sum()
    }

    /// Exact forward pass for each input vector.
    pub fn evaluate(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let d = self.input_dim();
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(Error::Dimension {
                expected: d,
                got: p.len(),
            });
        }
        let flat: Vec<f64> = points.iter().flat_map(|p| p.iter().copied()).collect();
        let out = self.compile().eval_flat(&flat);
        let m = self.output_dim();
        Ok(out.chunks(m).map(|c| c.to_vec()).collect())
    }

    /// Single-point forward pass using dense arithmetic.
    pub fn eval_point(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_dim(), "input dimension mismatch");
        let mut v = x.to_vec();
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            v = l.apply(&v);
            if k < last {
                v.iter_mut().for_each(|t| *t = t.max(0.0));
            }
        }
        v
    }

    /// Convenience for scalar-to-scalar networks.
    pub fn eval1(&self, x: f64) -> f64 {
        self.eval_point(&[x])[0]
    }

    pub fn compile(&self) -> CompiledNet {
        CompiledNet::new(self)
    }

    /// Sparse concatenation `g ∘ f`: depth adds exactly and no weight grows.
    ///
    /// The last layer of `f` is emitted as `[W; -W]` so the ReLU produces
    /// the pair (ρ(y), ρ(-y)), and the first layer of `g` reads it through
    /// `[V, -V]`.
    pub fn compose(outer: &ReluNetwork, inner: &ReluNetwork) -> Result<ReluNetwork> {
        check_compose(outer, inner)?;
        let mut layers = Vec::with_capacity(outer.depth() + inner.depth());
        let (last, init) = inner.layers.split_last().unwrap();
        layers.extend_from_slice(init);
        layers.push(last.doubled());
        layers.push(outer.layers[0].split_cols());
        layers.extend_from_slice(&outer.layers[1..]);
        Ok(ReluNetwork { layers })
    }

    /// `g ∘ f` with the boundary layers multiplied together:
    /// depth is `L_g + L_f - 1` and boundary weights are products.
    pub fn compose_absorb(outer: &ReluNetwork, inner: &ReluNetwork) -> Result<ReluNetwork> {
        check_compose(outer, inner)?;
        let mut layers = Vec::with_capacity(outer.depth() + inner.depth() - 1);
        let (last, init) = inner.layers.split_last().unwrap();
        layers.extend_from_slice(init);
        layers.push(outer.layers[0].after(last));
        layers.extend_from_slice(&outer.layers[1..]);
        Ok(ReluNetwork { layers })
    }

    /// Owned variant of [`compose_absorb`](Self::compose_absorb) that avoids
    /// copying the inner layers.
    pub fn then_absorb(mut self, outer: &ReluNetwork) -> Result<ReluNetwork> {
        check_compose(outer, &self)?;
        let last = self.layers.pop().unwrap();
        self.layers.push(outer.layers[0].after(&last));
        self.layers.extend_from_slice(&outer.layers[1..]);
        Ok(self)
    }

    /// Owned variant of [`compose`](Self::compose).
    pub fn then(mut self, outer: &ReluNetwork) -> Result<ReluNetwork> {
        check_compose(outer, &self)?;
        let last = self.layers.pop().unwrap();
        self.layers.push(last.doubled());
        self.layers.push(outer.layers[0].split_cols());
        self.layers.extend_from_slice(&outer.layers[1..]);
        Ok(self)
    }

    /// Applies a plain affine map to the output (absorbed into the last layer).
    pub fn map_output(mut self, post: &AffineLayer) -> Result<ReluNetwork> {
        if post.cols != self.output_dim() {
            return Err(Error::Dimension {
                expected: self.output_dim(),
                got: post.cols,
            });
        }
        let last = self.layers.pop().unwrap();
        self.layers.push(post.after(&last));
        Ok(self)
    }

    /// Precomposes a plain affine map on the input (absorbed into the first layer).
    pub fn map_input(mut self, pre: &AffineLayer) -> Result<ReluNetwork> {
        if pre.rows != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: pre.rows,
            });
        }
        self.layers[0] = self.layers[0].after(pre);
        Ok(self)
    }

    /// Pads to exactly `depth` layers without changing the realized function.
    ///
    /// For `depth > L` the last layer becomes `[W; -W]`, followed by
    /// `depth - L - 1` identity layers of size `2k` and the output layer
    /// `[I, -I]`. Weights stay bounded by `max(B, 1)`.
    pub fn padded(&self, depth: usize) -> Result<ReluNetwork> {
        let l = self.depth();
        if depth < l {
            return invalid(format!("cannot pad depth {l} down to {depth}"));
        }
        if depth == l {
            return Ok(self.clone());
        }
        let k = self.output_dim();
        let mut layers = Vec::with_capacity(depth);
        let (last, init) = self.layers.split_last().unwrap();
        layers.extend_from_slice(init);
        layers.push(last.doubled());
        for _ in 0..depth - l - 1 {
            layers.push(identity_layer(2 * k));
        }
        let mut out = AffineLayer::zeros(k, 2 * k);
        for i in 0..k {
            out.set_w(i, i, 1.0);
            out.set_w(i, k + i, -1.0);
        }
        layers.push(out);
        Ok(ReluNetwork { layers })
    }
}

fn check_compose(outer: &ReluNetwork, inner: &ReluNetwork) -> Result<()> {
    if outer.input_dim() != inner.output_dim() {
        return Err(Error::Dimension {
            expected: outer.input_dim(),
            got: inner.output_dim(),
        });
    }
    Ok(())
}

fn identity_layer(n: usize) -> AffineLayer {
    let mut l = AffineLayer::zeros(n, n);
    for i in 0..n {
        l.set_w(i, i, 1.0);
    }
    l
}

/// Input assignment for [`parallel`].
///
/// `inputs[i]` lists, for the i-th sub-network, which coordinates of the
/// common input feed its input slots. `pass_through` lists coordinates that
/// are carried unchanged to the output (after all sub-network outputs).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Wiring {
    pub inputs: Vec<Vec<usize>>,
    pub pass_through: Vec<usize>,
}

impl Wiring {
    /// Every sub-network reads the whole input; no pass-through.
    pub fn shared(n_nets: usize, input_dim: usize) -> Self {
        Self {
            inputs: vec![(0..input_dim).collect(); n_nets],
            pass_through: Vec::new(),
        }
    }
}

/// Exact identity of depth `depth` on `dim` channels, realized with the
/// ρ(x) - ρ(-x) pair.
pub fn identity_net(dim: usize, depth: usize) -> ReluNetwork {
    assert!(depth >= 1 && dim >= 1);
    if depth == 1 {
        return ReluNetwork {
            layers: vec![identity_layer(dim)],
        };
    }
    ReluNetwork {
        layers: vec![identity_layer(dim)],
    }
    .padded(depth)
    .expect("padding identity")
}

/// Runs sub-networks side by side on slices of a common input of size
/// `input_dim`, padding all of them to the largest depth. The output is the
/// concatenation of the sub-network outputs followed by pass-through channels.
pub fn parallel(input_dim: usize, nets: &[&ReluNetwork], wiring: &Wiring) -> Result<ReluNetwork> {
    if nets.len() != wiring.inputs.len() {
        return invalid(format!(
            "wiring lists {} input maps for {} networks",
            wiring.inputs.len(),
            nets.len()
        ));
    }
    if nets.is_empty() && wiring.pass_through.is_empty() {
        return invalid("nothing to run in parallel");
    }
    for (n, map) in nets.iter().zip(&wiring.inputs) {
        if map.len() != n.input_dim() {
            return invalid(format!(
                "input map of length {} for a network with {} inputs",
                map.len(),
                n.input_dim()
            ));
        }
    }
    if let Some(&c) = wiring
        .inputs
        .iter()
        .flatten()
        .chain(&wiring.pass_through)
        .find(|&&c| c >= input_dim)
    {
        return invalid(format!("wiring references coordinate {c} >= {input_dim}"));
    }
    let depth = nets.iter().map(|n| n.depth()).max().unwrap_or(1);
    let mut blocks: Vec<ReluNetwork> = nets
        .iter()
        .map(|n| n.padded(depth))
        .collect::<Result<_>>()?;
    let mut maps: Vec<Vec<usize>> = wiring.inputs.clone();
    if !wiring.pass_through.is_empty() {
        blocks.push(identity_net(wiring.pass_through.len(), depth));
        maps.push(wiring.pass_through.clone());
    }
    let mut layers = Vec::with_capacity(depth);
    for k in 0..depth {
        let rows: usize = blocks.iter().map(|b| b.layers[k].rows).sum();
        let cols = if k == 0 {
            input_dim
        } else {
            blocks.iter().map(|b| b.layers[k].cols).sum()
        };
        let mut l = AffineLayer::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        for (b, map) in blocks.iter().zip(&maps) {
            let src = &b.layers[k];
            for r in 0..src.rows {
                for c in 0..src.cols {
                    let v = src.w(r, c);
                    if v != 0.0 {
                        let col = if k == 0 { map[c] } else { c0 + c };
                        l.add_w(r0 + r, col, v);
                    }
                }
                l.bias[r0 + r] = src.bias[r];
            }
            r0 += src.rows;
            c0 += src.cols;
        }
        layers.push(l);
    }
    Ok(ReluNetwork { layers })
}

/// Exactly representable building blocks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Primitive {
    /// `x ↦ x` as ρ(x) - ρ(-x).
    Identity,
    /// `x ↦ 1` with the 4-neuron layout of p₀.
    ConstOne,
    /// `(x, y) ↦ αx + βy`.
    Linear(f64, f64),
    /// Tent `χ(x - ℓ)` with `χ(x) = ρ(x+1) - 2ρ(x) + ρ(x-1)`.
    Hat(i32),
}

pub fn build_primitive(kind: Primitive) -> ReluNetwork {
    let layers = match kind {
        Primitive::Identity => {
            return identity_net(1, 2);
        }
        Primitive::ConstOne => vec![
            AffineLayer::new(4, 1, vec![0.0; 4], vec![2.0, 1.0, -1.0, -2.0]).unwrap(),
            AffineLayer::new(1, 4, vec![1.0, -1.0, -1.0, 1.0], vec![0.0]).unwrap(),
        ],
        Primitive::Linear(a, b) => vec![
            AffineLayer::new(2, 2, vec![a, b, -a, -b], vec![0.0, 0.0]).unwrap(),
            AffineLayer::new(1, 2, vec![1.0, -1.0], vec![0.0]).unwrap(),
        ],
        Primitive::Hat(l) => {
            let s = -(l as f64);
            vec![
                AffineLayer::new(3, 1, vec![1.0; 3], vec![s + 1.0, s, s - 1.0]).unwrap(),
                AffineLayer::new(1, 3, vec![1.0, -2.0, 1.0], vec![0.0]).unwrap(),
            ]
        }
    };
    ReluNetwork { layers }
}

/// `x ↦ x` for scalar input, depth 2.
pub fn p1() -> ReluNetwork {
    build_primitive(Primitive::Identity)
}

/// `x ↦ 1`, depth 2, width 4.
pub fn p0() -> ReluNetwork {
    build_primitive(Primitive::ConstOne)
}

/// Smallest `p ≥ 0` with `2^p ≥ a`.
pub(crate) fn log2_ceil(a: f64) -> u32 {
    if a <= 1.0 {
        return 0;
    }
    let mut p = a.log2().ceil() as i32;
    while 2f64.powi(p) < a {
        p += 1;
    }
    while p > 0 && 2f64.powi(p - 1) >= a {
        p -= 1;
    }
    p as u32
}

/// Exact realization of `x ↦ Ax + b` with every stored weight in `[-1, 1]`.
///
/// The map is scaled by `2^{-p}` with `2^p ≥ max|A_ij|, |b_i|` and the
/// factor `2^p` is recovered by `p` doubling layers, each of width 3 per
/// output. Depth is `p + 3` (or 1 when no scaling is needed).
pub fn bounded_affine(a: &[Vec<f64>], b: &[f64]) -> Result<ReluNetwork> {
    let dout = a.len();
    if dout == 0 || b.len() != dout {
        return invalid("bounded_affine needs matching nonempty A rows and b");
    }
    let din = a[0].len();
    if din == 0 || a.iter().any(|r| r.len() != din) {
        return invalid("bounded_affine needs a rectangular A");
    }
    let amax = a
        .iter()
        .flatten()
        .chain(b)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if !amax.is_finite() {
        return invalid("bounded_affine entries must be finite");
    }
    let p = log2_ceil(amax);
    let scale = 2f64.powi(-(p as i32));
    let mut first = AffineLayer::zeros(dout, din);
    for i in 0..dout {
        for j in 0..din {
            first.set_w(i, j, a[i][j] * scale);
        }
        first.bias[i] = b[i] * scale;
    }
    if p == 0 {
        return Ok(ReluNetwork {
            layers: vec![first],
        });
    }
    let mut layers = Vec::with_capacity(p as usize + 3);
    // (ρ(z), ρ(-z)) per output
    layers.push(first.doubled());
    // (A, B, C) = (ρ(z), ρ(-z), |z|)
    let mut tri = AffineLayer::zeros(3 * dout, 2 * dout);
    for i in 0..dout {
        let (pz, nz) = (i, dout + i);
        tri.set_w(3 * i, pz, 1.0);
        tri.set_w(3 * i, nz, -1.0);
        tri.set_w(3 * i + 1, nz, 1.0);
        tri.set_w(3 * i + 1, pz, -1.0);
        tri.set_w(3 * i + 2, pz, 1.0);
        tri.set_w(3 * i + 2, nz, 1.0);
    }
    layers.push(tri);
    let mut dbl = AffineLayer::zeros(3 * dout, 3 * dout);
    for i in 0..dout {
        let (a_, b_, c_) = (3 * i, 3 * i + 1, 3 * i + 2);
        for (r, coeffs) in [(a_, [1.0, -1.0, 1.0]), (b_, [-1.0, 1.0, 1.0]), (c_, [1.0, 1.0, 1.0])] {
            dbl.set_w(r, a_, coeffs[0]);
            dbl.set_w(r, b_, coeffs[1]);
            dbl.set_w(r, c_, coeffs[2]);
        }
    }
    for _ in 0..p {
        layers.push(dbl.clone());
    }
    let mut out = AffineLayer::zeros(dout, 3 * dout);
    for i in 0..dout {
        out.set_w(i, 3 * i, 1.0);
        out.set_w(i, 3 * i + 1, -1.0);
    }
    layers.push(out);
    Ok(ReluNetwork { layers })
}

/// Network with two outputs read as real and imaginary part.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexNet {
    net: ReluNetwork,
}

impl ComplexNet {
    pub fn new(net: ReluNetwork) -> Result<Self> {
        if net.output_dim() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: net.output_dim(),
            });
        }
        Ok(Self { net })
    }

    /// Complex net from a real scalar network (zero imaginary part).
    pub fn from_real(net: ReluNetwork) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::Dimension {
                expected: 1,
                got: net.output_dim(),
            });
        }
        let embed = AffineLayer::new(2, 1, vec![1.0, 0.0], vec![0.0, 0.0])?;
        Self::new(net.map_output(&embed)?)
    }

    pub fn net(&self) -> &ReluNetwork {
        &self.net
    }

    pub fn into_net(self) -> ReluNetwork {
        self.net
    }

    pub fn stats(&self) -> NetworkStats {
        self.net.stats()
    }

    pub fn eval1(&self, x: f64) -> Complex64 {
        let v = self.net.eval_point(&[x]);
        Complex64::new(v[0], v[1])
    }

    /// Batched evaluation for scalar input.
    pub fn eval_many(&self, xs: &[f64]) -> Vec<Complex64> {
        self.net
            .compile()
            .eval_flat(xs)
            .chunks(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect()
    }
}

/// Output of a builder that may be real- or complex-valued.
#[derive(Clone, Debug, PartialEq)]
pub enum EmulatorNet {
    Real(ReluNetwork),
    Complex(ComplexNet),
}

impl EmulatorNet {
    pub fn net(&self) -> &ReluNetwork {
        match self {
            EmulatorNet::Real(n) => n,
            EmulatorNet::Complex(c) => c.net(),
        }
    }

    pub fn stats(&self) -> NetworkStats {
        self.net().stats()
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, EmulatorNet::Complex(_))
    }

    pub fn eval1(&self, x: f64) -> Complex64 {
        match self {
            EmulatorNet::Real(n) => Complex64::new(n.eval1(x), 0.0),
            EmulatorNet::Complex(c) => c.eval1(x),
        }
    }

    pub fn eval_many(&self, xs: &[f64]) -> Vec<Complex64> {
        match self {
            EmulatorNet::Real(n) => n
                .compile()
                .eval_scalar(xs)
                .into_iter()
                .map(|v| Complex64::new(v, 0.0))
                .collect(),
            EmulatorNet::Complex(c) => c.eval_many(xs),
        }
    }

    /// Two-output form (a real network gets a zero imaginary output).
    pub fn into_complex(self) -> ComplexNet {
        match self {
            EmulatorNet::Real(n) => ComplexNet::from_real(n).expect("scalar network"),
            EmulatorNet::Complex(c) => c,
        }
    }
}

const CHUNK: usize = 256;

struct SparseLayer {
    rows: usize,
    /// (row, col, weight), sorted by row then column.
    entries: Vec<(u32, u32, f64)>,
    bias: Vec<f64>,
}

/// Sparse, batch-friendly form of a network for repeated evaluation.
///
/// Points are processed in chunks laid out neuron-major so the inner loops
/// run over contiguous memory. The summation order is fixed, so results are
/// deterministic.
pub struct CompiledNet {
    input_dim: usize,
    output_dim: usize,
    max_width: usize,
    layers: Vec<SparseLayer>,
}

impl CompiledNet {
    pub fn new(net: &ReluNetwork) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| {
                let mut entries = Vec::new();
                for r in 0..l.rows {
                    for c in 0..l.cols {
                        let w = l.w(r, c);
                        if w != 0.0 {
                            entries.push((r as u32, c as u32, w));
                        }
                    }
                }
                SparseLayer {
                    rows: l.rows,
                    entries,
                    bias: l.bias.clone(),
                }
            })
            .collect();
        Self {
            input_dim: net.input_dim(),
            output_dim: net.output_dim(),
            max_width: net.width().max(net.input_dim()),
            layers,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Evaluates points stored point-major in `inputs` (`n * input_dim`
    /// values) and returns `n * output_dim` values, point-major.
    pub fn eval_flat(&self, inputs: &[f64]) -> Vec<f64> {
        assert_eq!(inputs.len() % self.input_dim, 0, "input length mismatch");
        let n = inputs.len() / self.input_dim;
        let mut out = vec![0.0; n * self.output_dim];
        let mut a = vec![0.0; self.max_width * CHUNK];
        let mut b = vec![0.0; self.max_width * CHUNK];
        let last = self.layers.len() - 1;
        let mut start = 0;
        while start < n {
            let m = CHUNK.min(n - start);
            for p in 0..m {
                for d in 0..self.input_dim {
                    a[d * CHUNK + p] = inputs[(start + p) * self.input_dim + d];
                }
            }
            for (k, l) in self.layers.iter().enumerate() {
                for r in 0..l.rows {
                    b[r * CHUNK..r * CHUNK + m].fill(l.bias[r]);
                }
                for &(r, c, w) in &l.entries {
                    let (r, c) = (r as usize * CHUNK, c as usize * CHUNK);
                    let src = &a[c..c + m];
                    let dst = &mut b[r..r + m];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
                if k < last {
                    for r in 0..l.rows {
                        for v in &mut b[r * CHUNK..r * CHUNK + m] {
                            *v = v.max(0.0);
                        }
                    }
                }
                std::mem::swap(&mut a, &mut b);
            }
            for p in 0..m {
                for d in 0..self.output_dim {
                    out[(start + p) * self.output_dim + d] = a[d * CHUNK + p];
                }
            }
            start += m;
        }
        out
    }

    /// Scalar-input convenience; returns the first output per point.
    pub fn eval_scalar(&self, xs: &[f64]) -> Vec<f64> {
        assert_eq!(self.input_dim, 1);
        let v = self.eval_flat(xs);
        v.chunks(self.output_dim).map(|c| c[0]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_net(rng: &mut ChaCha8Rng, dims: &[usize]) -> ReluNetwork {
        let layers = dims
            .windows(2)
            .map(|w| {
                let (c, r) = (w[0], w[1]);
                let ws = (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect();
                let bs = (0..r).map(|_| rng.random_range(-1.0..1.0)).collect();
                AffineLayer::new(r, c, ws, bs).unwrap()
            })
            .collect();
        ReluNetwork::new(layers).unwrap()
    }

    #[test]
    fn primitives_are_exact() {
        assert_eq!(p1().eval1(-3.0), -3.0);
        assert_eq!(p0().eval1(7.2), 1.0);
        let h = build_primitive(Primitive::Hat(0));
        assert_eq!(h.eval1(0.0), 1.0);
        assert_eq!(h.eval1(1.0), 0.0);
        assert_eq!(h.eval1(-1.0), 0.0);
        assert_eq!(h.eval1(0.5), 0.5);
        let lin = build_primitive(Primitive::Linear(2.0, -1.0));
        assert_eq!(lin.eval_point(&[3.0, 4.0]), vec![2.0]);
    }

    #[test]
    fn primitive_stats() {
        let s = p0().stats();
        assert_eq!((s.depth, s.width), (2, 4));
        let s = p1().stats();
        assert_eq!((s.depth, s.width), (2, 2));
    }

    #[test]
    fn hats_partition_unity() {
        let hats: Vec<_> = (-3..=3).map(|l| build_primitive(Primitive::Hat(l))).collect();
        for i in 0..=600 {
            let x = -3.0 + i as f64 * 0.01;
            let s: f64 = hats.iter().map(|h| h.eval1(x)).sum();
            assert!((s - 1.0).abs() < 1e-12, "x={x} sum={s}");
        }
    }

    #[test]
    fn compose_depth_and_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_net(&mut rng, &[2, 4, 3, 3]);
        let g = random_net(&mut rng, &[3, 5, 1]);
        let h = ReluNetwork::compose(&g, &f).unwrap();
        assert_eq!(h.depth(), f.depth() + g.depth());
        assert!(h.weight_bound() <= f.weight_bound().max(g.weight_bound()));
        let ha = ReluNetwork::compose_absorb(&g, &f).unwrap();
        assert_eq!(ha.depth(), f.depth() + g.depth() - 1);
        for _ in 0..100 {
            let x = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let want = g.eval_point(&f.eval_point(&x));
            assert!((h.eval_point(&x)[0] - want[0]).abs() < 1e-12);
            assert!((ha.eval_point(&x)[0] - want[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn compose_constant_and_identity() {
        let id = p1();
        assert_eq!(ReluNetwork::compose(&id, &id).unwrap().eval1(5.0), 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_net(&mut rng, &[1, 6, 6, 1]);
        let c = ReluNetwork::compose(&p0(), &f).unwrap();
        for _ in 0..100 {
            assert_eq!(c.eval1(rng.random_range(-50.0..50.0)), 1.0);
        }
    }

    #[test]
    fn compose_dimension_mismatch() {
        let g = build_primitive(Primitive::Linear(1.0, 1.0));
        assert!(ReluNetwork::compose(&g, &p1()).is_err());
    }

    #[test]
    fn compose_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_net(&mut rng, &[1, 4, 2]);
        let g = random_net(&mut rng, &[2, 3, 2]);
        let h = random_net(&mut rng, &[2, 5, 1]);
        let left = ReluNetwork::compose(&ReluNetwork::compose(&h, &g).unwrap(), &f).unwrap();
        let right = ReluNetwork::compose(&h, &ReluNetwork::compose(&g, &f).unwrap()).unwrap();
        for _ in 0..200 {
            let x = rng.random_range(-3.0..3.0);
            let (a, b) = (left.eval1(x), right.eval1(x));
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn padding_preserves_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_net(&mut rng, &[2, 4, 3]);
        for depth in [2, 3, 4, 9] {
            let g = f.padded(depth).unwrap();
            assert_eq!(g.depth(), depth);
            assert!(g.width() >= f.width());
            for _ in 0..20 {
                let x = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
                let (a, b) = (f.eval_point(&x), g.eval_point(&x));
                for (u, v) in a.iter().zip(&b) {
                    assert!((u - v).abs() < 1e-14);
                }
            }
        }
        assert!(f.padded(1).is_err());
    }

    #[test]
    fn parallel_examples() {
        let id = p1();
        let pp = parallel(1, &[&id, &id], &Wiring::shared(2, 1)).unwrap();
        assert_eq!(pp.eval_point(&[3.5]), vec![3.5, 3.5]);
        let pq = parallel(1, &[&p0(), &p1()], &Wiring::shared(2, 1)).unwrap();
        assert_eq!(pq.eval_point(&[2.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn parallel_pads_to_max_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_net(&mut rng, &[1, 3, 3, 1]);
        let b = random_net(&mut rng, &[1, 2, 2, 2, 2, 2, 2, 1]);
        let w = Wiring {
            inputs: vec![vec![0], vec![1]],
            pass_through: vec![0, 1],
        };
        let p = parallel(2, &[&a, &b], &w).unwrap();
        assert_eq!(p.depth(), 7);
        for _ in 0..50 {
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let out = p.eval_point(&x);
            assert!((out[0] - a.eval1(x[0])).abs() < 1e-14);
            assert!((out[1] - b.eval1(x[1])).abs() < 1e-14);
            assert_eq!(&out[2..], &x);
        }
    }

    #[test]
    fn parallel_rejects_bad_wiring() {
        let id = p1();
        let bad = Wiring {
            inputs: vec![vec![3]],
            pass_through: vec![],
        };
        assert!(parallel(2, &[&id], &bad).is_err());
        assert!(parallel(1, &[&id], &Wiring::default()).is_err());
    }

    #[test]
    fn bounded_affine_examples() {
        let n = bounded_affine(&[vec![8.0]], &[0.0]).unwrap();
        assert!(n.depth() <= 8);
        assert_eq!(n.eval1(1.0), 8.0);
        assert!(n.weight_bound() <= 1.0);
        let big = bounded_affine(&[vec![1e6]], &[0.0]).unwrap();
        assert_eq!(big.eval1(1.0), 1e6);
        assert!(big.weight_bound() <= 1.0);
        let id = bounded_affine(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0]).unwrap();
        assert_eq!(id.eval_point(&[0.25, -3.0]), vec![0.25, -3.0]);
    }

    #[test]
    fn bounded_affine_depth_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let a: f64 = 10f64.powf(rng.random_range(0.0..9.0));
            let n = bounded_affine(&[vec![a, -a / 3.0]], &[a / 7.0]).unwrap();
            assert!(n.weight_bound() <= 1.0);
            assert!(n.depth() <= a.log2().floor() as usize + 5);
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let want = a * x[0] - a / 3.0 * x[1] + a / 7.0;
            assert!((n.eval_point(&x)[0] - want).abs() <= 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn compiled_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_net(&mut rng, &[3, 7, 5, 2]);
        let pts: Vec<Vec<f64>> = (0..700)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let out = f.evaluate(&pts).unwrap();
        for (p, o) in pts.iter().zip(&out) {
            let d = f.eval_point(p);
            for (u, v) in o.iter().zip(&d) {
                assert!((u - v).abs() < 1e-13);
            }
        }
        assert!(f.evaluate(&[vec![1.0]]).is_err());
    }

    #[test]
    fn layer_validation() {
        assert!(AffineLayer::new(2, 2, vec![0.0; 3], vec![0.0; 2]).is_err());
        assert!(AffineLayer::new(2, 2, vec![0.0; 4], vec![0.0; 1]).is_err());
        assert!(AffineLayer::new(1, 1, vec![f64::NAN], vec![0.0]).is_err());
        let a = AffineLayer::zeros(2, 3);
        let b = AffineLayer::zeros(2, 3);
        assert!(ReluNetwork::new(vec![a, b]).is_err());
    }

    #[test]
    fn complex_net_from_real() {
        let c = ComplexNet::from_real(p1()).unwrap();
        assert_eq!(c.eval1(2.5), Complex64::new(2.5, 0.0));
        assert!(ComplexNet::new(p1()).is_err());
    }
}
