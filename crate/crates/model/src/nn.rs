//! Layers built on the tape: linear maps, MLPs with Mish hidden
//! activations, a stacked GRU and inverted dropout.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::params::ParamStore;
use crate::tape::{Tape, Var};
use crate::Scalar;

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: usize,
    pub b: Option<usize>,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    /// Weights and bias drawn from `U(-1/sqrt(input), 1/sqrt(input))`.
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        input: usize,
        output: usize,
        bias: bool,
        rng: &mut R,
    ) -> Linear {
        let bound = 1.0 / (input as f64).sqrt();
        let w = store.uniform(&format!("{name}.w"), input, output, bound, rng);
        let b = bias.then(|| store.uniform(&format!("{name}.b"), 1, output, bound, rng));
        Linear { w, b, input, output }
    }

    /// As [`Linear::new`] with an explicit init bound.
    pub fn with_bound<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        input: usize,
        output: usize,
        bias: bool,
        bound: f64,
        rng: &mut R,
    ) -> Linear {
        let w = store.uniform(&format!("{name}.w"), input, output, bound, rng);
        let b = bias.then(|| store.uniform(&format!("{name}.b"), 1, output, bound, rng));
        Linear { w, b, input, output }
    }

    /// A linear map whose parameters start at zero.
    pub fn zeros<T: Scalar>(store: &mut ParamStore<T>, name: &str, input: usize, output: usize) -> Linear {
        let w = store.zeros(&format!("{name}.w"), input, output);
        let b = Some(store.zeros(&format!("{name}.b"), 1, output));
        Linear { w, b, input, output }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, x: Var) -> Var {
        let w = tape.param(self.w);
        let b = self.b.map(|b| tape.param(b));
        tape.linear(x, w, b)
    }
}

/// Source of dropout masks; inactive at inference.
pub struct Dropout {
    rng: Option<ChaCha8Rng>,
}

impl Dropout {
    pub fn off() -> Dropout {
        Dropout { rng: None }
    }

    pub fn on(rng: ChaCha8Rng) -> Dropout {
        Dropout { rng: Some(rng) }
    }

    pub fn apply<T: Scalar>(&mut self, tape: &mut Tape<T>, x: Var, p: f64) -> Var {
        let Some(rng) = self.rng.as_mut() else { return x };
        if p <= 0.0 {
            return x;
        }
        let (r, c) = tape.shape(x);
        let keep = T::from(1.0 / (1.0 - p)).unwrap();
        let mask = (0..r * c).map(|_| if rng.gen::<f64>() < p { T::zero() } else { keep }).collect();
        tape.mul_const(x, mask)
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub dropout: f64,
}

impl Mlp {
    /// `depth` linear layers; hidden layers have width `hidden`.
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        input: usize,
        hidden: usize,
        output: usize,
        depth: usize,
        dropout: f64,
        rng: &mut R,
    ) -> Mlp {
        assert!(depth >= 1);
        let layers = (0..depth)
            .map(|i| {
                let inp = if i == 0 { input } else { hidden };
                let out = if i + 1 == depth { output } else { hidden };
                Linear::new(store, &format!("{name}.{i}"), inp, out, true, rng)
            })
            .collect();
        Mlp { layers, dropout }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, x: Var, drop: &mut Dropout) -> Var {
        let mut h = x;
        for (i, l) in self.layers.iter().enumerate() {
            h = l.forward(tape, h);
            if i + 1 < self.layers.len() {
                h = tape.mish(h);
                h = drop.apply(tape, h, self.dropout);
            }
        }
        h
    }
}

/// Stacked GRU cells with the gate layout `[reset, update, new]`.
#[derive(Debug, Clone)]
pub struct Gru {
    pub dim: usize,
    pub input: Vec<Linear>,
    pub hidden: Vec<Linear>,
}

impl Gru {
    pub fn new<T: Scalar, R: Rng>(store: &mut ParamStore<T>, name: &str, dim: usize, layers: usize, rng: &mut R) -> Gru {
        let mut input = Vec::new();
        let mut hidden = Vec::new();
        for l in 0..layers {
            input.push(Linear::new(store, &format!("{name}.{l}.ih"), dim, 3 * dim, true, rng));
            hidden.push(Linear::new(store, &format!("{name}.{l}.hh"), dim, 3 * dim, true, rng));
        }
        Gru { dim, input, hidden }
    }

    pub fn layers(&self) -> usize {
        self.input.len()
    }

    /// One step through every layer; returns the new hidden states, the
    /// last of which is the output.
    pub fn step<T: Scalar>(&self, tape: &mut Tape<T>, x: Var, hidden: &[Var]) -> Vec<Var> {
        let d = self.dim;
        let mut inp = x;
        let mut out = Vec::with_capacity(hidden.len());
        for (l, &h) in hidden.iter().enumerate() {
            let gi = self.input[l].forward(tape, inp);
            let gh = self.hidden[l].forward(tape, h);
            let (ir, iz, inn) = (tape.slice_cols(gi, 0, d), tape.slice_cols(gi, d, d), tape.slice_cols(gi, 2 * d, d));
            let (hr, hz, hn) = (tape.slice_cols(gh, 0, d), tape.slice_cols(gh, d, d), tape.slice_cols(gh, 2 * d, d));
            let r = tape.add(ir, hr);
            let r = tape.sigmoid(r);
            let z = tape.add(iz, hz);
            let z = tape.sigmoid(z);
            let rh = tape.mul(r, hn);
            let n = tape.add(inn, rh);
            let n = tape.tanh(n);
            let hm = tape.sub(h, n);
            let zh = tape.mul(z, hm);
            let h_new = tape.add(n, zh);
            out.push(h_new);
            inp = h_new;
        }
        out
    }
}

/// Two-layer MLP over `context ‖ item` whose first layer is split into a
/// context block and an item block, so item projections can be computed
/// once and reused across decoding steps.
#[derive(Debug, Clone)]
pub struct PairHead {
    pub context: Linear,
    pub item: Linear,
    pub out: Linear,
    pub dropout: f64,
}

impl PairHead {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        context: usize,
        item: usize,
        hidden: usize,
        output: usize,
        dropout: f64,
        rng: &mut R,
    ) -> PairHead {
        let bound = 1.0 / ((context + item) as f64).sqrt();
        PairHead {
            context: Linear::with_bound(store, &format!("{name}.0"), context, hidden, true, bound, rng),
            item: Linear::with_bound(store, &format!("{name}.0.item"), item, hidden, false, bound, rng),
            out: Linear::new(store, &format!("{name}.1"), hidden, output, true, rng),
            dropout,
        }
    }

    /// Item block of the first layer for every row of `items`.
    pub fn project_items<T: Scalar>(&self, tape: &mut Tape<T>, items: Var) -> Var {
        self.item.forward(tape, items)
    }

    /// Logits for each projected item row paired with the 1-row `context`.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, context: Var, items: Var, drop: &mut Dropout) -> Var {
        let c = self.context.forward(tape, context);
        let h = tape.add_row(items, c);
        let h = tape.mish(h);
        let h = drop.apply(tape, h, self.dropout);
        self.out.forward(tape, h)
    }
}
