//! Feed-forward networks over a tabulated base class, with l1 weight budgets
//! per layer and the capacity functionals `Lambda(f)` and `Gamma_alpha(f)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::empirical::{binary_margin, state_margin, ClassFile, FunctionClass};
use crate::error::{Error, Result};

/// Sigmoid range and slope are checked on this grid over `[-50, 50]`.
const CHECK_STEP: f64 = 1e-3;
const CHECK_RANGE: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sigmoid {
    Named(NamedSigmoid),
    /// Piecewise linear through `[x, y]` knots, constant outside.
    Table { table: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedSigmoid {
    Tanh,
    /// `x` clamped to `[-1, 1]`.
    Clamp,
}

impl Sigmoid {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Sigmoid::Named(NamedSigmoid::Tanh) => x.tanh(),
            Sigmoid::Named(NamedSigmoid::Clamp) => x.clamp(-1.0, 1.0),
            Sigmoid::Table { table } => {
                if x <= table[0][0] {
                    return table[0][1];
                }
                let last = table[table.len() - 1];
                if x >= last[0] {
                    return last[1];
                }
                let i = table.partition_point(|p| p[0] <= x);
                let (a, b) = (table[i - 1], table[i]);
                a[1] + (b[1] - a[1]) * (x - a[0]) / (b[0] - a[0])
            }
        }
    }

    fn validate(&self, declared_l: f64, layer: usize) -> Result<()> {
        if let Sigmoid::Table { table } = self {
            if table.is_empty() || table.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidNetwork(format!("layer {layer}: sigmoid table is empty or non-finite")));
            }
            if table.windows(2).any(|w| w[1][0] <= w[0][0]) {
                return Err(Error::InvalidNetwork(format!("layer {layer}: sigmoid knots must increase strictly")));
            }
        }
        let steps = (2.0 * CHECK_RANGE / CHECK_STEP).round() as usize;
        let mut prev = self.eval(-CHECK_RANGE);
        let mut slope = 0.0f64;
        for i in 0..=steps {
            let x = -CHECK_RANGE + i as f64 * CHECK_STEP;
            let y = self.eval(x);
            if !(-1.0..=1.0).contains(&y) {
                return Err(Error::InvalidNetwork(format!("layer {layer}: sigmoid value {y} at {x} leaves [-1, 1]")));
            }
            if i > 0 {
                slope = slope.max((y - prev).abs() / CHECK_STEP);
            }
            prev = y;
        }
        if declared_l < slope - 1e-6 {
            return Err(Error::InvalidNetwork(format!(
                "layer {layer}: declared L = {declared_l} is below the observed slope {slope}"
            )));
        }
        Ok(())
    }
}

/// One neuron: weights over its inputs. Without taps the inputs are all
/// outputs of the previous layer; taps `[layer, index]` select any earlier
/// outputs, layer 0 being the base functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neuron {
    pub w: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub taps: Vec<[usize; 2]>,
}

impl Neuron {
    pub fn l1(&self) -> f64 {
        self.w.iter().map(|v| v.abs()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub neurons: Vec<Neuron>,
    pub sigmoid: Sigmoid,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    base: FunctionClass,
    layers: Vec<Layer>,
}

impl NetworkSpec {
    pub fn new(base: FunctionClass, layers: Vec<Layer>) -> Result<Self> {
        let net = NetworkSpec { base, layers };
        net.validate()?;
        Ok(net)
    }

    pub fn base(&self) -> &FunctionClass {
        &self.base
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Depth `l(f)`: index of the output layer.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    fn width(&self, layer: usize) -> usize {
        if layer == 0 {
            self.base.len()
        } else {
            self.layers[layer - 1].neurons.len()
        }
    }

    fn inputs(&self, layer: usize, neuron: &Neuron) -> Vec<[usize; 2]> {
        if neuron.taps.is_empty() {
            (0..self.width(layer - 1)).map(|i| [layer - 1, i]).collect()
        } else {
            neuron.taps.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidNetwork("network has no layers".into()));
        }
        let last = self.layers.len();
        if self.layers[last - 1].neurons.len() != 1 {
            return Err(Error::InvalidNetwork("the output layer must have exactly one neuron".into()));
        }
        for (j0, layer) in self.layers.iter().enumerate() {
            let j = j0 + 1;
            if layer.neurons.is_empty() {
                return Err(Error::InvalidNetwork(format!("layer {j} has no neurons")));
            }
            if !(layer.lipschitz >= 0.0 && layer.lipschitz.is_finite()) {
                return Err(Error::InvalidNetwork(format!("layer {j}: L must be finite and >= 0")));
            }
            layer.sigmoid.validate(layer.lipschitz, j)?;
            for (u, neuron) in layer.neurons.iter().enumerate() {
                let inputs = self.inputs(j, neuron);
                if inputs.len() != neuron.w.len() {
                    return Err(Error::InvalidNetwork(format!(
                        "layer {j} neuron {u}: {} weights for {} inputs",
                        neuron.w.len(),
                        inputs.len()
                    )));
                }
                if neuron.w.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidNetwork(format!("layer {j} neuron {u}: non-finite weight")));
                }
                for &[l, i] in &inputs {
                    if l >= j || i >= self.width(l) {
                        return Err(Error::InvalidNetwork(format!(
                            "layer {j} neuron {u}: dangling input [{l}, {i}]"
                        )));
                    }
                }
                if let Some(b) = layer.budget {
                    if neuron.l1() > b + 1e-12 {
                        return Err(Error::InvalidNetwork(format!(
                            "layer {j} neuron {u}: ||w||_1 = {} exceeds budget {b}",
                            neuron.l1()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Output `f(x)` at state `x`.
    pub fn forward(&self, x: usize) -> Result<f64> {
        if x >= self.base.n_states() {
            return Err(Error::arg("state", format!("state {x} is out of range")));
        }
        let mut outputs: Vec<Vec<f64>> = vec![self.base.values().iter().map(|h| h[x]).collect()];
        for (j0, layer) in self.layers.iter().enumerate() {
            let j = j0 + 1;
            let vals = layer
                .neurons
                .iter()
                .map(|neuron| {
                    let s: f64 = self
                        .inputs(j, neuron)
                        .iter()
                        .zip(&neuron.w)
                        .map(|(&[l, i], w)| w * outputs[l][i])
                        .sum();
                    layer.sigmoid.eval(s)
                })
                .collect();
            outputs.push(vals);
        }
        Ok(outputs[self.layers.len()][0])
    }

    /// `f` on every state.
    pub fn tabulate(&self) -> Vec<f64> {
        (0..self.base.n_states())
            .into_par_iter()
            .map(|x| self.forward(x).expect("state in range"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkCapacity {
    pub depth: usize,
    /// `W_k = max_u ||w_u||_1 v b_k` per layer.
    pub w_k: Vec<f64>,
    pub lipschitz: Vec<f64>,
    #[serde(rename = "Lambda")]
    pub lambda_f: f64,
    #[serde(rename = "Gamma_alpha")]
    pub gamma_alpha: f64,
    pub alpha: f64,
    /// Layers where `W_k < 1/2` was raised to `1/2` inside the `log_2`.
    pub floored_layers: Vec<usize>,
}

/// `Lambda(f) = prod_k (4 L_k W_k + 1)` and
/// `Gamma_alpha(f) = sum_k sqrt((alpha/2) log(2 + log_2 max(W_k, 1/2)))`.
pub fn capacity(net: &NetworkSpec, alpha: f64) -> Result<NetworkCapacity> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::arg("alpha", "must be > 0"));
    }
    let mut w_k = Vec::new();
    let mut lipschitz = Vec::new();
    let mut floored_layers = Vec::new();
    let mut lambda_f = 1.0;
    let mut gamma_alpha = 0.0;
    for (j0, layer) in net.layers.iter().enumerate() {
        let widest = layer.neurons.iter().map(Neuron::l1).fold(0.0, f64::max);
        let w = layer.budget.map_or(widest, |b| widest.max(b));
        if w < 0.5 {
            floored_layers.push(j0 + 1);
        }
        lambda_f *= 4.0 * layer.lipschitz * w + 1.0;
        gamma_alpha += (alpha / 2.0 * (2.0 + w.max(0.5).log2()).ln()).sqrt();
        w_k.push(w);
        lipschitz.push(layer.lipschitz);
    }
    Ok(NetworkCapacity {
        depth: net.depth(),
        w_k,
        lipschitz,
        lambda_f,
        gamma_alpha,
        alpha,
        floored_layers,
    })
}

/// How labels attach to states.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    /// One real label per state.
    PerState(Vec<f64>),
    /// Lifted chain over `(x, y)` with these label values.
    Lifted(Vec<f64>),
}

/// Margins `y f(x)` of the network output as a one-function class.
pub fn network_margins(net: &NetworkSpec, labels: &Labels) -> Result<FunctionClass> {
    let f = net.tabulate();
    let m = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let single = FunctionClass::new(vec!["network".into()], vec![f], m, false)?;
    match labels {
        Labels::PerState(y) => state_margin(&single, y).map_err(|e| match e {
            Error::DimensionMismatch { expected, found, .. } => Error::DimensionMismatch {
                field: "labels".into(),
                expected,
                found,
            },
            other => other,
        }),
        Labels::Lifted(ys) => binary_margin(&single, ys),
    }
}

/// The base class in a network document: inline or a file path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaseRef {
    Inline(ClassFile),
    Path(String),
}

/// On-disk network document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub base: BaseRef,
    pub layers: Vec<Layer>,
}

impl NetworkFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            field: "network".into(),
            message: e.to_string(),
        })
    }

    /// Build the network, loading a referenced base class through `resolve`.
    pub fn into_spec(self, resolve: impl Fn(&str) -> Result<FunctionClass>) -> Result<NetworkSpec> {
        let base = match self.base {
            BaseRef::Inline(c) => c.into_class()?,
            BaseRef::Path(p) => resolve(&p)?,
        };
        NetworkSpec::new(base, self.layers)
    }
}
