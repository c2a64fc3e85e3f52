use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::DnnError;

pub const LAYER_DIMS: [usize; 6] = [8, 64, 32, 16, 8, 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Softsign,
    Softmax,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Softsign => "softsign",
            Activation::Softmax => "softmax",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        [Activation::Relu, Activation::Softsign, Activation::Softmax].into_iter().find(|a| a.name() == s)
    }
}

pub const ACTIVATIONS: [Activation; 5] =
    [Activation::Relu, Activation::Relu, Activation::Softsign, Activation::Relu, Activation::Softmax];

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major, `outputs` rows of `inputs` weights.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

fn activate(a: Activation, z: &[f64]) -> Vec<f64> {
    match a {
        Activation::Relu => z.iter().map(|v| v.max(0.0)).collect(),
        Activation::Softsign => z.iter().map(|v| v / (1.0 + v.abs())).collect(),
        Activation::Softmax => {
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|v| v / s).collect()
        }
    }
}

fn derivative(a: Activation, z: f64) -> f64 {
    match a {
        Activation::Relu => {
            if z > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::Softsign => 1.0 / ((1.0 + z.abs()) * (1.0 + z.abs())),
        Activation::Softmax => unreachable!("softmax is only used on the output, paired with cross-entropy"),
    }
}

/// Per-layer gradients, same shapes as the layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

impl Mlp {
    /// He-style uniform initialization, biases zero.
    pub fn init(rng: &mut ChaCha8Rng) -> Self {
        let layers = LAYER_DIMS
            .windows(2)
            .zip(ACTIVATIONS)
            .map(|(d, activation)| {
                let limit = (6.0 / d[0] as f64).sqrt();
                Layer {
                    inputs: d[0],
                    outputs: d[1],
                    weights: (0..d[0] * d[1]).map(|_| rng.gen_range(-limit..limit)).collect(),
                    bias: vec![0.0; d[1]],
                    activation,
                }
            })
            .collect();
        Self { layers }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.layers.iter().fold(x.to_vec(), |a, l| activate(l.activation, &l.affine(&a)))
    }

    /// Cross-entropy of the softmax output against class `label`; adds the
    /// gradient into `g` and returns the loss.
    fn backprop(&self, x: &[f64], label: usize, g: &mut Gradients) -> f64 {
        let mut zs = Vec::with_capacity(self.layers.len());
        let mut acts = vec![x.to_vec()];
        for l in &self.layers {
            let z = l.affine(acts.last().expect("input present"));
            acts.push(activate(l.activation, &z));
            zs.push(z);
        }
        let out = acts.last().expect("output present");
        let loss = -out[label].max(f64::MIN_POSITIVE).ln();
        let mut delta: Vec<f64> = out.iter().enumerate().map(|(i, p)| p - if i == label { 1.0 } else { 0.0 }).collect();
        for li in (0..self.layers.len()).rev() {
            let l = &self.layers[li];
            let input = &acts[li];
            for (o, d) in delta.iter().enumerate() {
                g.bias[li][o] += d;
                let row = &mut g.weights[li][o * l.inputs..(o + 1) * l.inputs];
                for (w, v) in row.iter_mut().zip(input) {
                    *w += d * v;
                }
            }
            if li == 0 {
                break;
            }
            let below = self.layers[li - 1].activation;
            delta = (0..l.inputs)
                .map(|i| {
                    let back: f64 = delta.iter().enumerate().map(|(o, d)| d * l.weights[o * l.inputs + i]).sum();
                    back * derivative(below, zs[li - 1][i])
                })
                .collect();
        }
        loss
    }

    /// Mean loss over `batch` and its gradient.
    pub fn loss_and_gradient(&self, batch: &[(&[f64], usize)]) -> (f64, Gradients) {
        let mut g = Gradients::zeros(self);
        let mut loss = 0.0;
        for (x, label) in batch {
            loss += self.backprop(x, *label, &mut g);
        }
        let n = batch.len().max(1) as f64;
        for v in g.weights.iter_mut().chain(g.bias.iter_mut()).flatten() {
            *v /= n;
        }
        (loss / n, g)
    }

    pub fn loss(&self, batch: &[(&[f64], usize)]) -> f64 {
        let n = batch.len().max(1) as f64;
        batch.iter().map(|(x, label)| -self.forward(x)[*label].max(f64::MIN_POSITIVE).ln()).sum::<f64>() / n
    }

    pub fn step(&mut self, g: &Gradients, learning_rate: f64) {
        for (li, l) in self.layers.iter_mut().enumerate() {
            for (w, d) in l.weights.iter_mut().zip(&g.weights[li]) {
                *w -= learning_rate * d;
            }
            for (b, d) in l.bias.iter_mut().zip(&g.bias[li]) {
                *b -= learning_rate * d;
            }
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameter `i` in layer order, weights before biases within a layer.
    pub fn parameter_mut(&mut self, mut i: usize) -> &mut f64 {
        for l in &mut self.layers {
            if i < l.weights.len() {
                return &mut l.weights[i];
            }
            i -= l.weights.len();
            if i < l.bias.len() {
                return &mut l.bias[i];
            }
            i -= l.bias.len();
        }
        panic!("parameter index out of range")
    }

    pub fn gradient_at(g: &Gradients, mut i: usize) -> f64 {
        for (w, b) in g.weights.iter().zip(&g.bias) {
            if i < w.len() {
                return w[i];
            }
            i -= w.len();
            if i < b.len() {
                return b[i];
            }
            i -= b.len();
        }
        panic!("parameter index out of range")
    }
}

fn push_row(out: &mut String, vals: &[f64]) {
    let row: Vec<String> = vals.iter().map(|v| format!("{v:.16e}")).collect();
    out.push_str(&row.join(" "));
    out.push('\n');
}

pub(super) fn write_weights(net: &Mlp, threshold: f64) -> String {
    let mut out = String::from("pairwise-ranker 1\n");
    let dims: Vec<String> = LAYER_DIMS.iter().map(|d| d.to_string()).collect();
    let acts: Vec<&str> = net.layers.iter().map(|l| l.activation.name()).collect();
    writeln!(out, "layer_dims {}", dims.join(" ")).unwrap();
    writeln!(out, "activations {}", acts.join(" ")).unwrap();
    writeln!(out, "threshold {threshold:.16e}").unwrap();
    for (i, l) in net.layers.iter().enumerate() {
        writeln!(out, "weights {i} {} {}", l.outputs, l.inputs).unwrap();
        for row in l.weights.chunks_exact(l.inputs) {
            push_row(&mut out, row);
        }
        writeln!(out, "bias {i} {}", l.outputs).unwrap();
        push_row(&mut out, &l.bias);
    }
    out
}

pub(super) fn read_weights(text: &str) -> Result<(Mlp, f64), DnnError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let mut last = 0;
    let mut next = |what: &str| -> Result<(usize, Vec<&str>), DnnError> {
        let (no, l) = lines.next().ok_or_else(|| DnnError::MalformedWeights { line: last + 1, message: format!("missing {what}") })?;
        last = no;
        Ok((no, l.split_whitespace().collect()))
    };
    let bad = |line: usize, m: String| DnnError::MalformedWeights { line, message: m };
    let floats = |line: usize, words: &[&str], n: usize| -> Result<Vec<f64>, DnnError> {
        if words.len() != n {
            return Err(bad(line, format!("expected {n} numbers, found {}", words.len())));
        }
        words.iter().map(|w| w.parse::<f64>().map_err(|_| bad(line, format!("`{w}` is not a number")))).collect()
    };
    let expect = |line: usize, got: &[&str], want: &[String]| -> Result<(), DnnError> {
        if got.iter().copied().eq(want.iter().map(String::as_str)) {
            Ok(())
        } else {
            Err(bad(line, format!("expected `{}`, found `{}`", want.join(" "), got.join(" "))))
        }
    };
    let (no, w) = next("header")?;
    expect(no, &w, &["pairwise-ranker".into(), "1".into()])?;
    let (no, w) = next("layer_dims")?;
    let dims: Vec<String> = std::iter::once("layer_dims".to_string()).chain(LAYER_DIMS.iter().map(|d| d.to_string())).collect();
    expect(no, &w, &dims)?;
    let (no, w) = next("activations")?;
    let acts: Vec<String> = std::iter::once("activations".to_string()).chain(ACTIVATIONS.iter().map(|a| a.name().to_string())).collect();
    if w.iter().skip(1).any(|a| Activation::from_name(a).is_none()) {
        return Err(bad(no, "unknown activation".into()));
    }
    expect(no, &w, &acts)?;
    let (no, w) = next("threshold")?;
    if w.first() != Some(&"threshold") {
        return Err(bad(no, "expected `threshold`".into()));
    }
    let threshold = floats(no, &w[1..], 1)?[0];
    let mut layers = Vec::new();
    for (i, (d, activation)) in LAYER_DIMS.windows(2).zip(ACTIVATIONS).enumerate() {
        let (no, w) = next("weights header")?;
        expect(no, &w, &["weights".into(), i.to_string(), d[1].to_string(), d[0].to_string()])?;
        let mut weights = Vec::with_capacity(d[0] * d[1]);
        for _ in 0..d[1] {
            let (no, w) = next("weight row")?;
            weights.extend(floats(no, &w, d[0])?);
        }
        let (no, w) = next("bias header")?;
        expect(no, &w, &["bias".into(), i.to_string(), d[1].to_string()])?;
        let (no, w) = next("bias row")?;
        let bias = floats(no, &w, d[1])?;
        layers.push(Layer { inputs: d[0], outputs: d[1], weights, bias, activation });
    }
    if let Some((no, _)) = lines.next() {
        return Err(bad(no, "trailing content".into()));
    }
    Ok((Mlp { layers }, threshold))
}
