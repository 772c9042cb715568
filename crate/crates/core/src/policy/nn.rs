use rand::Rng;

use crate::autodiff::{AutodiffError, ParamId, ParamStore, Tape, Tensor, Var};
use crate::molgraph::{featurize_with, MolGraph, EDGE_FEATURES};
use crate::templates::PatternGraph;

/// Extra pattern columns: mappable, was_mapped, charge delta one-hot over
/// [-2, 2], hydrogen delta one-hot over [-3, 3].
pub const PATTERN_EXTRA: usize = 2 + 5 + 7;

/// Featurized graph with directed edge lists.
#[derive(Clone, Debug)]
pub struct GraphInput {
    pub nodes: Tensor,
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    /// One row per directed edge.
    pub edges: Tensor,
}

impl GraphInput {
    pub fn molecule(g: &MolGraph, rw_steps: usize) -> GraphInput {
        let f = featurize_with(g, rw_steps);
        let nodes = Tensor::new(g.atom_count(), f.node_width, f.nodes).expect("feature shape");
        Self::with_nodes(g, nodes, &f.edges)
    }

    pub fn pattern(p: &PatternGraph, rw_steps: usize) -> GraphInput {
        let f = featurize_with(&p.graph, rw_steps);
        let n = p.atom_count();
        let width = f.node_width + PATTERN_EXTRA;
        let mut data = Vec::with_capacity(n * width);
        for i in 0..n {
            data.extend_from_slice(&f.nodes[i * f.node_width..(i + 1) * f.node_width]);
            let o = p.origin[i];
            let mut extra = [0.0; PATTERN_EXTRA];
            extra[0] = f64::from(u8::from(p.mappable[i]));
            extra[1] = f64::from(u8::from(o.was_mapped));
            extra[2 + (o.charge_delta.clamp(-2, 2) + 2) as usize] = 1.0;
            extra[7 + (o.h_delta.clamp(-3, 3) + 3) as usize] = 1.0;
            data.extend_from_slice(&extra);
        }
        let nodes = Tensor::new(n, width, data).expect("feature shape");
        Self::with_nodes(&p.graph, nodes, &f.edges)
    }

    fn with_nodes(g: &MolGraph, nodes: Tensor, edge_rows: &[f64]) -> GraphInput {
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut edges = Vec::new();
        for (k, b) in g.bonds().iter().enumerate() {
            let row = &edge_rows[k * EDGE_FEATURES..(k + 1) * EDGE_FEATURES];
            for (s, d) in [(b.a, b.b), (b.b, b.a)] {
                src.push(s);
                dst.push(d);
                edges.extend_from_slice(row);
            }
        }
        let e = src.len();
        GraphInput {
            nodes,
            src,
            dst,
            edges: Tensor::new(e, EDGE_FEATURES, edges).expect("edge shape"),
        }
    }

    pub fn atom_count(&self) -> usize {
        self.nodes.rows()
    }

    /// Same graph with atoms relabeled: new atom `i` is old atom `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> GraphInput {
        let mut inv = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            inv[old] = new;
        }
        let cols = self.nodes.cols();
        let mut data = Vec::with_capacity(self.nodes.len());
        for &old in order {
            data.extend_from_slice(self.nodes.row_slice(old));
        }
        GraphInput {
            nodes: Tensor::new(order.len(), cols, data).expect("shape"),
            src: self.src.iter().map(|&s| inv[s]).collect(),
            dst: self.dst.iter().map(|&d| inv[d]).collect(),
            edges: self.edges.clone(),
        }
    }
}

/// Affine layer `x W + b`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut impl Rng) -> Linear {
        Linear {
            w: store.add_uniform(&format!("{name}.w"), input, output, input, rng),
            b: store.add_uniform(&format!("{name}.b"), 1, output, input, rng),
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var, AutodiffError> {
        let w = tape.param(self.w);
        let b = tape.param(self.b);
        let y = tape.matmul(x, w)?;
        tape.add_row(y, b)
    }
}

/// Linear layers with GeLU between them.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn new(store: &mut ParamStore, name: &str, sizes: &[usize], rng: &mut impl Rng) -> Mlp {
        Mlp {
            layers: sizes
                .windows(2)
                .enumerate()
                .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
                .collect(),
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var, AutodiffError> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, h)?;
            if i + 1 < self.layers.len() {
                h = tape.gelu(h);
            }
        }
        Ok(h)
    }
}

/// Layer norm with learned gain and bias.
#[derive(Clone, Debug)]
struct Norm {
    gain: ParamId,
    bias: ParamId,
}

impl Norm {
    fn new(store: &mut ParamStore, name: &str, d: usize) -> Norm {
        Norm {
            gain: store.add(&format!("{name}.gain"), Tensor::filled(1, d, 1.0)),
            bias: store.add_zeros(&format!("{name}.bias"), 1, d),
        }
    }

    fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var, AutodiffError> {
        let n = tape.layer_norm(x);
        let g = tape.param(self.gain);
        let b = tape.param(self.bias);
        let y = tape.mul_row(n, g)?;
        tape.add_row(y, b)
    }
}

/// Pre-norm multi-head self-attention followed by a feed-forward block.
#[derive(Clone, Debug)]
pub struct TransformerLayer {
    heads: usize,
    norm1: Norm,
    q: Linear,
    k: Linear,
    v: Linear,
    out: Linear,
    norm2: Norm,
    ff: Mlp,
}

impl TransformerLayer {
    pub fn new(store: &mut ParamStore, name: &str, d: usize, heads: usize, rng: &mut impl Rng) -> TransformerLayer {
        TransformerLayer {
            heads,
            norm1: Norm::new(store, &format!("{name}.norm1"), d),
            q: Linear::new(store, &format!("{name}.q"), d, d, rng),
            k: Linear::new(store, &format!("{name}.k"), d, d, rng),
            v: Linear::new(store, &format!("{name}.v"), d, d, rng),
            out: Linear::new(store, &format!("{name}.out"), d, d, rng),
            norm2: Norm::new(store, &format!("{name}.norm2"), d),
            ff: Mlp::new(store, &format!("{name}.ff"), &[d, 2 * d, d], rng),
        }
    }

    pub fn forward(&self, tape: &mut Tape, h: Var) -> Result<Var, AutodiffError> {
        let d = tape.value(h).cols();
        let dh = d / self.heads;
        let x = self.norm1.forward(tape, h)?;
        let q = self.q.forward(tape, x)?;
        let k = self.k.forward(tape, x)?;
        let v = self.v.forward(tape, x)?;
        let mut parts = Vec::with_capacity(self.heads);
        for head in 0..self.heads {
            let qh = tape.slice_cols(q, head * dh, dh)?;
            let kh = tape.slice_cols(k, head * dh, dh)?;
            let vh = tape.slice_cols(v, head * dh, dh)?;
            let kt = tape.transpose(kh);
            let scores = tape.matmul(qh, kt)?;
            let attn = tape.softmax_with_temperature(scores, 1.0 / (dh as f64).sqrt());
            parts.push(tape.matmul(attn, vh)?);
        }
        let joined = tape.concat_cols(&parts)?;
        let attended = self.out.forward(tape, joined)?;
        let h = tape.add(h, attended)?;
        let x = self.norm2.forward(tape, h)?;
        let f = self.ff.forward(tape, x)?;
        tape.add(h, f)
    }
}

/// Message passing stack plus one transformer layer.
#[derive(Clone, Debug)]
pub struct Encoder {
    input: Linear,
    messages: Vec<Linear>,
    transformer: TransformerLayer,
}

impl Encoder {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_width: usize,
        d: usize,
        layers: usize,
        heads: usize,
        rng: &mut impl Rng,
    ) -> Encoder {
        Encoder {
            input: Linear::new(store, &format!("{name}.in"), in_width, d, rng),
            messages: (0..layers)
                .map(|l| Linear::new(store, &format!("{name}.mp{l}"), d + EDGE_FEATURES, d, rng))
                .collect(),
            transformer: TransformerLayer::new(store, &format!("{name}.attn"), d, heads, rng),
        }
    }

    /// n x d node embeddings.
    pub fn encode(&self, tape: &mut Tape, g: &GraphInput) -> Result<Var, AutodiffError> {
        let n = g.atom_count();
        let x = tape.leaf(g.nodes.clone());
        let mut h = self.input.forward(tape, x)?;
        let e = tape.leaf(g.edges.clone());
        for layer in &self.messages {
            let hs = tape.gather_rows(h, &g.src)?;
            let he = tape.concat_cols(&[hs, e])?;
            let msg = layer.forward(tape, he)?;
            let agg = tape.scatter_add_rows(msg, &g.dst, n)?;
            let act = tape.gelu(agg);
            h = tape.add(h, act)?;
        }
        self.transformer.forward(tape, h)
    }
}
