//! Message-passing graph encoder producing atom, object and graph
//! representations.

use mars_chem::{FeatureVectors, MolGraph, BOND_FEATURES};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::nn::Linear;
use crate::params::ParamStore;
use crate::tape::{Tape, Var};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flavor {
    /// Degree-normalized graph convolution.
    Conv,
    /// Additive multi-head attention.
    Attention,
    /// Self transform plus mean of neighbour messages.
    SampleAggregate,
    /// Scaled dot-product multi-head attention with bond features in the keys.
    Transformer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    Max,
    Sum,
    Mean,
    Attention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub layers: usize,
    pub heads: usize,
    pub dim: usize,
    pub flavor: Flavor,
    pub pooling: Pooling,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig { layers: 6, heads: 8, dim: 512, flavor: Flavor::Transformer, pooling: Pooling::Attention }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.dim == 0 || self.heads == 0 || !self.dim.is_multiple_of(self.heads) {
            return Err(ModelError::Config(format!("dim {} must be a positive multiple of heads {}", self.dim, self.heads)));
        }
        Ok(())
    }
}

/// Featurized graph in the layout the encoder consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput<T> {
    pub num_atoms: usize,
    pub atom_width: usize,
    pub atoms: Vec<T>,
    pub bonds: Vec<T>,
    pub begins: Vec<usize>,
    pub ends: Vec<usize>,
}

impl<T: Scalar> GraphInput<T> {
    pub fn new(g: &MolGraph, feats: &FeatureVectors) -> GraphInput<T> {
        let cast = |v: &[f64]| v.iter().map(|&x| T::from(x).unwrap()).collect::<Vec<T>>();
        GraphInput {
            num_atoms: g.num_atoms(),
            atom_width: feats.atom_width,
            atoms: cast(&feats.atoms),
            bonds: cast(&feats.bonds),
            begins: g.bonds().iter().map(|b| b.begin).collect(),
            ends: g.bonds().iter().map(|b| b.end).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> GraphInput<U> {
        let cast = |v: &[T]| v.iter().map(|x| U::from(*x).unwrap()).collect();
        GraphInput {
            num_atoms: self.num_atoms,
            atom_width: self.atom_width,
            atoms: cast(&self.atoms),
            bonds: cast(&self.bonds),
            begins: self.begins.clone(),
            ends: self.ends.clone(),
        }
    }

    pub fn num_bonds(&self) -> usize {
        self.begins.len()
    }

    pub fn num_objects(&self) -> usize {
        self.num_bonds() + self.num_atoms
    }

    /// Directed edges `(src, dst, bond)`, both directions of every bond.
    fn edges(&self) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let m = self.num_bonds();
        let mut src = Vec::with_capacity(2 * m);
        let mut dst = Vec::with_capacity(2 * m);
        let mut bond = Vec::with_capacity(2 * m);
        for b in 0..m {
            src.extend([self.begins[b], self.ends[b]]);
            dst.extend([self.ends[b], self.begins[b]]);
            bond.extend([b, b]);
        }
        (src, dst, bond)
    }
}

#[derive(Debug, Clone)]
enum LayerParams {
    Transformer { q: Linear, k: Linear, v: Linear, skip: Linear, edge: Linear },
    Attention { w: Linear, edge: Linear, a_src: usize, a_dst: usize, a_edge: usize, bias: usize },
    Conv { w: Linear, edge: Linear },
    SampleAggregate { own: Linear, nb: Linear, edge: Linear },
}

/// Encoder outputs on a tape.
#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    /// `n×D` atom representations.
    pub atoms: Var,
    /// `(m+n)×D` object representations, bonds first, when requested.
    pub objects: Option<Var>,
    /// `1×D` pooled graph representation.
    pub graph: Var,
}

/// Plain-value encoder outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEmbedding<T> {
    pub dim: usize,
    pub atom_reps: Vec<T>,
    pub object_reps: Vec<T>,
    pub graph_rep: Vec<T>,
}

impl<T: Scalar> GraphEmbedding<T> {
    pub fn atom(&self, v: usize) -> &[T] {
        &self.atom_reps[v * self.dim..(v + 1) * self.dim]
    }

    pub fn object(&self, i: usize) -> &[T] {
        &self.object_reps[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub atom_width: usize,
    atom_in: Linear,
    bond_in: Linear,
    layers: Vec<LayerParams>,
    bond_mlp: Linear,
    gate: Option<Linear>,
}

impl Encoder {
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        config: &EncoderConfig,
        atom_width: usize,
        rng: &mut R,
    ) -> Result<Encoder, ModelError> {
        config.validate()?;
        let d = config.dim;
        let h = config.heads;
        let atom_in = Linear::new(store, "enc.atom_in", atom_width, d, true, rng);
        let bond_in = Linear::new(store, "enc.bond_in", BOND_FEATURES, d, true, rng);
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let p = format!("enc.layer{l}");
            let lin = |store: &mut ParamStore<T>, rng: &mut R, name: &str, bias: bool| {
                Linear::new(store, &format!("{p}.{name}"), d, d, bias, rng)
            };
            layers.push(match config.flavor {
                Flavor::Transformer => LayerParams::Transformer {
                    q: lin(store, rng, "q", true),
                    k: lin(store, rng, "k", true),
                    v: lin(store, rng, "v", true),
                    skip: lin(store, rng, "skip", true),
                    edge: lin(store, rng, "edge", false),
                },
                Flavor::Attention => {
                    let w = lin(store, rng, "w", false);
                    let edge = lin(store, rng, "edge", false);
                    let bound = 1.0 / ((d / h) as f64).sqrt();
                    let a_src = store.uniform(&format!("{p}.a_src"), 1, d, bound, rng);
                    let a_dst = store.uniform(&format!("{p}.a_dst"), 1, d, bound, rng);
                    let a_edge = store.uniform(&format!("{p}.a_edge"), 1, d, bound, rng);
                    let bias = store.zeros(&format!("{p}.bias"), 1, d);
                    LayerParams::Attention { w, edge, a_src, a_dst, a_edge, bias }
                }
                Flavor::Conv => LayerParams::Conv { w: lin(store, rng, "w", true), edge: lin(store, rng, "edge", false) },
                Flavor::SampleAggregate => LayerParams::SampleAggregate {
                    own: lin(store, rng, "own", true),
                    nb: lin(store, rng, "nb", false),
                    edge: lin(store, rng, "edge", false),
                },
            });
        }
        let bond_mlp = Linear::new(store, "enc.bond_mlp", 2 * d, d, true, rng);
        let gate = (config.pooling == Pooling::Attention).then(|| Linear::zeros(store, "enc.gate", d, 1));
        Ok(Encoder { config: config.clone(), atom_width, atom_in, bond_in, layers, bond_mlp, gate })
    }

    fn check(&self, input: &GraphInput<impl Scalar>) -> Result<(), ModelError> {
        if input.num_atoms == 0 {
            return Err(ModelError::EmptyGraph);
        }
        if input.atom_width != self.atom_width {
            return Err(ModelError::DimensionMismatch { what: "atom features", expected: self.atom_width, got: input.atom_width });
        }
        if input.bonds.len() != input.num_bonds() * BOND_FEATURES {
            return Err(ModelError::DimensionMismatch {
                what: "bond features",
                expected: input.num_bonds() * BOND_FEATURES,
                got: input.bonds.len(),
            });
        }
        Ok(())
    }

    /// Encodes `input`; object representations are built only when
    /// `objects` is set.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, input: &GraphInput<T>, objects: bool) -> Result<Encoded, ModelError> {
        self.check(input)?;
        let n = input.num_atoms;
        let m = input.num_bonds();
        let x = tape.constant(n, self.atom_width, input.atoms.clone());
        let mut h = self.atom_in.forward(tape, x);
        let (src, dst, bond) = input.edges();
        let edge_emb = if m > 0 {
            let xb = tape.constant(m, BOND_FEATURES, input.bonds.clone());
            let eb = self.bond_in.forward(tape, xb);
            Some(tape.gather(eb, &bond))
        } else {
            None
        };
        for layer in &self.layers {
            let msg = self.layer(tape, layer, h, edge_emb, &src, &dst, n);
            let msg = tape.mish(msg);
            h = tape.add(h, msg);
        }
        let graph = self.pool(tape, h, n);
        let objects = objects.then(|| self.objects(tape, h, input, m));
        Ok(Encoded { atoms: h, objects, graph })
    }

    #[allow(clippy::too_many_arguments)]
    fn layer<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        layer: &LayerParams,
        h: Var,
        edge_emb: Option<Var>,
        src: &[usize],
        dst: &[usize],
        n: usize,
    ) -> Var {
        let heads = self.config.heads;
        let d = self.config.dim;
        match layer {
            LayerParams::Transformer { q, k, v, skip, edge } => {
                let own = skip.forward(tape, h);
                let Some(ee) = edge_emb else { return own };
                let (qh, kh, vh) = (q.forward(tape, h), k.forward(tape, h), v.forward(tape, h));
                let qe = tape.gather(qh, dst);
                let ke = tape.gather(kh, src);
                let ek = edge.forward(tape, ee);
                let ke = tape.add(ke, ek);
                let score = tape.head_dot(qe, ke, heads);
                let score = tape.scale(score, T::from(1.0 / ((d / heads) as f64).sqrt()).unwrap());
                let alpha = tape.segment_softmax(score, dst, n);
                let ve = tape.gather(vh, src);
                let msg = tape.head_scale(ve, alpha, heads);
                let agg = tape.segment_sum(msg, dst, n);
                tape.add(agg, own)
            }
            LayerParams::Attention { w, edge, a_src, a_dst, a_edge, bias } => {
                let wh = w.forward(tape, h);
                // Self loops carry a zero bond embedding.
                let loops: Vec<usize> = (0..n).collect();
                let all_src: Vec<usize> = src.iter().copied().chain(loops.iter().copied()).collect();
                let all_dst: Vec<usize> = dst.iter().copied().chain(loops.iter().copied()).collect();
                let e = all_src.len();
                let zero_loops = tape.zeros(n, d);
                let ee = match edge_emb {
                    Some(ee) => {
                        let we = edge.forward(tape, ee);
                        tape.concat_rows(&[we, zero_loops])
                    }
                    None => zero_loops,
                };
                let (ps, pd, pe) = (tape.param(*a_src), tape.param(*a_dst), tape.param(*a_edge));
                let rows = vec![0usize; e];
                let (ps, pd, pe) = (tape.gather(ps, &rows), tape.gather(pd, &rows), tape.gather(pe, &rows));
                let hs = tape.gather(wh, &all_src);
                let hd = tape.gather(wh, &all_dst);
                let s1 = tape.head_dot(hs, ps, heads);
                let s2 = tape.head_dot(hd, pd, heads);
                let s3 = tape.head_dot(ee, pe, heads);
                let score = tape.add_n(&[s1, s2, s3]);
                let score = tape.leaky_relu(score, T::from(0.2).unwrap());
                let alpha = tape.segment_softmax(score, &all_dst, n);
                let msg = tape.head_scale(hs, alpha, heads);
                let agg = tape.segment_sum(msg, &all_dst, n);
                let b = tape.param(*bias);
                tape.add_row(agg, b)
            }
            LayerParams::Conv { w, edge } => {
                let mut deg = vec![1.0f64; n];
                for &v in dst {
                    deg[v] += 1.0;
                }
                let wh = w.forward(tape, h);
                let self_norm: Vec<T> =
                    (0..n).flat_map(|v| std::iter::repeat_n(T::from(1.0 / deg[v]).unwrap(), d)).collect();
                let own = tape.mul_const(wh, self_norm);
                let Some(ee) = edge_emb else { return own };
                let hs = tape.gather(wh, src);
                let we = edge.forward(tape, ee);
                let msg = tape.add(hs, we);
                let norm: Vec<T> = src
                    .iter()
                    .zip(dst)
                    .flat_map(|(&u, &v)| std::iter::repeat_n(T::from(1.0 / (deg[u] * deg[v]).sqrt()).unwrap(), d))
                    .collect();
                let msg = tape.mul_const(msg, norm);
                let agg = tape.segment_sum(msg, dst, n);
                tape.add(agg, own)
            }
            LayerParams::SampleAggregate { own, nb, edge } => {
                let o = own.forward(tape, h);
                let Some(ee) = edge_emb else { return o };
                let mut deg = vec![0.0f64; n];
                for &v in dst {
                    deg[v] += 1.0;
                }
                let hs = tape.gather(h, src);
                let we = edge.forward(tape, ee);
                let msg = tape.add(hs, we);
                let agg = tape.segment_sum(msg, dst, n);
                let inv: Vec<T> = (0..n)
                    .flat_map(|v| std::iter::repeat_n(T::from(1.0 / deg[v].max(1.0)).unwrap(), d))
                    .collect();
                let mean = tape.mul_const(agg, inv);
                let nbv = nb.forward(tape, mean);
                tape.add(o, nbv)
            }
        }
    }

    /// Pools `n×D` atom representations into `1×D`.
    pub fn pool<T: Scalar>(&self, tape: &mut Tape<T>, h: Var, n: usize) -> Var {
        match self.config.pooling {
            Pooling::Sum => tape.sum_rows(h),
            Pooling::Mean => {
                let s = tape.sum_rows(h);
                tape.scale(s, T::from(1.0 / n as f64).unwrap())
            }
            Pooling::Max => tape.max_rows(h),
            Pooling::Attention => {
                let gate = self.gate.as_ref().expect("attention pooling has a gate");
                let score = gate.forward(tape, h);
                let alpha = tape.segment_softmax(score, &vec![0; n], 1);
                let weighted = tape.head_scale(h, alpha, 1);
                tape.sum_rows(weighted)
            }
        }
    }

    /// Bond rows average both concatenation orders; atom rows pair each
    /// atom with itself.
    fn objects<T: Scalar>(&self, tape: &mut Tape<T>, h: Var, input: &GraphInput<T>, m: usize) -> Var {
        let self_pair = tape.concat_cols(&[h, h]);
        let atoms = self.bond_mlp.forward(tape, self_pair);
        let atoms = tape.mish(atoms);
        if m == 0 {
            return atoms;
        }
        let hb = tape.gather(h, &input.begins);
        let he = tape.gather(h, &input.ends);
        let fwd = tape.concat_cols(&[hb, he]);
        let rev = tape.concat_cols(&[he, hb]);
        let fwd = self.bond_mlp.forward(tape, fwd);
        let fwd = tape.mish(fwd);
        let rev = self.bond_mlp.forward(tape, rev);
        let rev = tape.mish(rev);
        let sum = tape.add(fwd, rev);
        let bonds = tape.scale(sum, T::from(0.5).unwrap());
        tape.concat_rows(&[bonds, atoms])
    }

    /// Encodes outside of any training graph and returns plain values.
    pub fn embed<T: Scalar>(&self, params: &ParamStore<T>, input: &GraphInput<T>) -> Result<GraphEmbedding<T>, ModelError> {
        let mut tape = Tape::new(params);
        let enc = self.forward(&mut tape, input, true)?;
        Ok(GraphEmbedding {
            dim: self.config.dim,
            atom_reps: tape.value(enc.atoms).to_vec(),
            object_reps: tape.value(enc.objects.expect("requested")).to_vec(),
            graph_rep: tape.value(enc.graph).to_vec(),
        })
    }
}
