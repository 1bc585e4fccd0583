//! Feed-forward networks built from dense, 1-D convolution and pooling layers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "sigmoid" => Some(Activation::Sigmoid),
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Layer structure without weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Dense { inputs: usize, outputs: usize, activation: Activation },
    /// Valid convolution with stride 1 over `[len, channels]` inputs.
    Conv1d { channels: usize, filters: usize, kernel: usize, activation: Activation },
    /// Window 2, stride 2.
    MaxPool,
    Flatten,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    /// `[fan_in, outputs]`; empty for parameter-free layers.
    pub weight: Option<Tensor>,
    /// `[1, outputs]`.
    pub bias: Option<Tensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
}

fn output_shape(spec: &LayerSpec, input: &[usize]) -> Result<Vec<usize>> {
    match (*spec, input) {
        (LayerSpec::Dense { inputs, outputs, .. }, &[n]) if n == inputs => Ok(vec![outputs]),
        (LayerSpec::Conv1d { channels, filters, kernel, .. }, &[l, c]) if c == channels && l >= kernel && kernel > 0 => {
            Ok(vec![l - kernel + 1, filters])
        }
        (LayerSpec::MaxPool, &[l, c]) if l >= 2 => Ok(vec![l / 2, c]),
        (LayerSpec::Flatten, &[l, c]) => Ok(vec![l * c]),
        _ => Err(Error::Shape(format!("layer {spec:?} cannot take input {input:?}"))),
    }
}

impl Network {
    /// Builds a network with seeded initial weights: He-uniform for rectifier
    /// layers, Xavier-uniform otherwise, zero biases.
    pub fn new(input_shape: &[usize], specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let next = output_shape(spec, &shape)?;
            let (fan_in, fan_out, act) = match *spec {
                LayerSpec::Dense { inputs, outputs, activation } => (inputs, outputs, activation),
                LayerSpec::Conv1d { channels, filters, kernel, activation } => (kernel * channels, filters, activation),
                _ => {
                    layers.push(Layer { spec: *spec, weight: None, bias: None });
                    shape = next;
                    continue;
                }
            };
            let limit = match act {
                Activation::Relu => (6.0 / fan_in as f64).sqrt(),
                _ => (6.0 / (fan_in + fan_out) as f64).sqrt(),
            };
            let w = (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..limit)).collect();
            layers.push(Layer {
                spec: *spec,
                weight: Some(Tensor::matrix(fan_in, fan_out, w)?),
                bias: Some(Tensor::zeros(&[1, fan_out])),
            });
            shape = next;
        }
        Ok(Self {
            input_shape: input_shape.to_vec(),
            layers,
        })
    }

    /// Fully connected network with `sizes[0]` inputs.
    pub fn mlp(sizes: &[usize], hidden: Activation, output: Activation, seed: u64) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Shape("an MLP needs at least input and output sizes".into()));
        }
        let specs: Vec<LayerSpec> = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| LayerSpec::Dense {
                inputs: w[0],
                outputs: w[1],
                activation: if i + 2 == sizes.len() { output } else { hidden },
            })
            .collect();
        Self::new(&sizes[..1], &specs, seed)
    }

    pub fn from_layers(input_shape: &[usize], layers: Vec<Layer>) -> Result<Self> {
        let mut shape = input_shape.to_vec();
        for layer in &layers {
            let next = output_shape(&layer.spec, &shape)?;
            let expected = match layer.spec {
                LayerSpec::Dense { inputs, outputs, .. } => Some((inputs, outputs)),
                LayerSpec::Conv1d { channels, filters, kernel, .. } => Some((kernel * channels, filters)),
                _ => None,
            };
            let ok = match (expected, &layer.weight, &layer.bias) {
                (Some((i, o)), Some(w), Some(b)) => w.shape() == [i, o] && b.shape() == [1, o],
                (None, None, None) => true,
                _ => false,
            };
            if !ok {
                return Err(Error::Shape(format!("weights do not fit layer {:?}", layer.spec)));
            }
            shape = next;
        }
        Ok(Self {
            input_shape: input_shape.to_vec(),
            layers,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> Vec<usize> {
        let mut shape = self.input_shape.clone();
        for l in &self.layers {
            shape = output_shape(&l.spec, &shape).expect("validated at construction");
        }
        shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Trainable tensors in layer order, weight before bias.
    pub fn params(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_ref(), l.bias.as_ref()])
            .flatten()
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut(), l.bias.as_mut()])
            .flatten()
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Multiply-accumulate operations for one sample's forward pass.
    pub fn macs_per_sample(&self) -> usize {
        let mut shape = self.input_shape.clone();
        let mut macs = 0;
        for l in &self.layers {
            let next = output_shape(&l.spec, &shape).expect("validated at construction");
            if let Some(w) = &l.weight {
                let positions = if next.len() == 2 { next[0] } else { 1 };
                macs += positions * w.len();
            }
            shape = next;
        }
        macs
    }

    /// Records the parameters on `tape`, as leaves when `trainable`, otherwise as constants.
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.params()
            .into_iter()
            .map(|t| if trainable { tape.leaf(t.clone()) } else { tape.constant(t.clone()) })
            .collect()
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        if shape.len() != self.input_shape.len() + 1 || shape[1..] != self.input_shape[..] {
            return Err(Error::Shape(format!(
                "network expects [batch, {:?}], got {shape:?}",
                self.input_shape
            )));
        }
        Ok(())
    }

    fn activate(tape: &mut Tape, act: Activation, h: Var) -> Var {
        match act {
            Activation::Relu => tape.relu(h),
            Activation::Sigmoid => tape.sigmoid(h),
            Activation::Tanh => tape.tanh(h),
            Activation::Identity => h,
        }
    }

    /// Forward pass recorded on `tape` with parameter handles from [`Network::register`].
    pub fn forward_tape(&self, tape: &mut Tape, params: &[Var], x: Var) -> Result<Var> {
        self.check_input(tape.value(x).shape())?;
        let batch = tape.value(x).shape()[0];
        let mut p = params.iter();
        let mut h = x;
        for layer in &self.layers {
            h = match layer.spec {
                LayerSpec::Dense { activation, .. } => {
                    let (w, b) = (*p.next().expect("weight"), *p.next().expect("bias"));
                    let z = tape.matmul(h, w)?;
                    let z = tape.add_row(z, b)?;
                    Self::activate(tape, activation, z)
                }
                LayerSpec::Conv1d { kernel, filters, activation, .. } => {
                    let (w, b) = (*p.next().expect("weight"), *p.next().expect("bias"));
                    let len = tape.value(h).shape()[1] - kernel + 1;
                    let cols = tape.im2col(h, kernel)?;
                    let z = tape.matmul(cols, w)?;
                    let z = tape.add_row(z, b)?;
                    let a = Self::activate(tape, activation, z);
                    tape.reshape(a, &[batch, len, filters])?
                }
                LayerSpec::MaxPool => tape.max_pool2(h)?,
                LayerSpec::Flatten => {
                    let n = tape.value(h).len() / batch;
                    tape.reshape(h, &[batch, n])?
                }
            };
        }
        Ok(h)
    }

    /// Forward pass together with its directional derivative along `dx`,
    /// both recorded on `tape` so that losses on the derivative can be
    /// differentiated as well. Dense layers only.
    pub fn forward_tangent_tape(&self, tape: &mut Tape, params: &[Var], x: Var, dx: Var) -> Result<(Var, Var)> {
        self.check_input(tape.value(x).shape())?;
        if tape.value(dx).shape() != tape.value(x).shape() {
            return Err(Error::Shape("tangent must match the input shape".into()));
        }
        let mut p = params.iter();
        let (mut h, mut dh) = (x, dx);
        for layer in &self.layers {
            let LayerSpec::Dense { activation, .. } = layer.spec else {
                return Err(Error::Usage("tangent propagation supports dense layers only".into()));
            };
            let (w, b) = (*p.next().expect("weight"), *p.next().expect("bias"));
            let z = tape.matmul(h, w)?;
            let z = tape.add_row(z, b)?;
            let dz = tape.matmul(dh, w)?;
            (h, dh) = match activation {
                Activation::Relu => (tape.relu(z), tape.relu_gate(z, dz)?),
                Activation::Sigmoid => {
                    let y = tape.sigmoid(z);
                    let neg = tape.scale(y, -1.0);
                    let one_minus = tape.offset(neg, 1.0);
                    let slope = tape.mul(y, one_minus)?;
                    (y, tape.mul(dz, slope)?)
                }
                Activation::Tanh => {
                    let y = tape.tanh(z);
                    let sq = tape.square(y);
                    let neg = tape.scale(sq, -1.0);
                    let slope = tape.offset(neg, 1.0);
                    (y, tape.mul(dz, slope)?)
                }
                Activation::Identity => (z, dz),
            };
        }
        Ok((h, dh))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let params = self.register(&mut tape, false);
        let xv = tape.constant(x.clone());
        let y = self.forward_tape(&mut tape, &params, xv)?;
        Ok(tape.value(y).clone())
    }

    /// Output and its directional derivative along `dx`.
    pub fn forward_tangent(&self, x: &Tensor, dx: &Tensor) -> Result<(Tensor, Tensor)> {
        let mut tape = Tape::new();
        let params = self.register(&mut tape, false);
        let xv = tape.constant(x.clone());
        let dxv = tape.constant(dx.clone());
        let (y, dy) = self.forward_tangent_tape(&mut tape, &params, xv, dxv)?;
        Ok((tape.value(y).clone(), tape.value(dy).clone()))
    }

    /// Derivative of every output with respect to input coordinate `index`.
    pub fn time_derivative(&self, x: &Tensor, index: usize) -> Result<Tensor> {
        let width = x.cols();
        if index >= width || self.input_shape.len() != 1 {
            return Err(Error::Shape(format!("input index {index} out of range for {:?}", x.shape())));
        }
        let mut dx = Tensor::zeros(x.shape());
        for row in dx.data_mut().chunks_mut(width) {
            row[index] = 1.0;
        }
        Ok(self.forward_tangent(x, &dx)?.1)
    }

    /// Compact architecture string, e.g. `input(8);dense(8,64,relu);dense(64,1,sigmoid)`.
    pub fn descriptor(&self) -> String {
        let dims: Vec<String> = self.input_shape.iter().map(|d| d.to_string()).collect();
        let mut parts = vec![format!("input({})", dims.join("x"))];
        for l in &self.layers {
            parts.push(match l.spec {
                LayerSpec::Dense { inputs, outputs, activation } => {
                    format!("dense({inputs},{outputs},{})", activation.name())
                }
                LayerSpec::Conv1d { channels, filters, kernel, activation } => {
                    format!("conv1d({channels},{filters},{kernel},{})", activation.name())
                }
                LayerSpec::MaxPool => "maxpool(2)".to_string(),
                LayerSpec::Flatten => "flatten".to_string(),
            });
        }
        parts.join(";")
    }

    /// Inverse of [`Network::descriptor`]: input shape and layer specs.
    pub fn parse_descriptor(desc: &str) -> std::result::Result<(Vec<usize>, Vec<LayerSpec>), String> {
        let mut parts = desc.trim().split(';');
        let input = parts
            .next()
            .and_then(|p| p.strip_prefix("input("))
            .and_then(|p| p.strip_suffix(')'))
            .ok_or("descriptor must start with input(...)")?;
        let input_shape = input
            .split('x')
            .map(|d| d.parse::<usize>().map_err(|_| format!("bad input dimension {d:?}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mut specs = Vec::new();
        for part in parts {
            if part == "flatten" {
                specs.push(LayerSpec::Flatten);
                continue;
            }
            if part == "maxpool(2)" {
                specs.push(LayerSpec::MaxPool);
                continue;
            }
            let (name, args) = part
                .strip_suffix(')')
                .and_then(|p| p.split_once('('))
                .ok_or_else(|| format!("bad layer {part:?}"))?;
            let args: Vec<&str> = args.split(',').collect();
            let num = |i: usize| -> std::result::Result<usize, String> {
                args.get(i)
                    .and_then(|a| a.parse().ok())
                    .ok_or_else(|| format!("bad argument {i} in {part:?}"))
            };
            let act = |i: usize| {
                args.get(i)
                    .and_then(|a| Activation::parse(a))
                    .ok_or_else(|| format!("bad activation in {part:?}"))
            };
            specs.push(match name {
                "dense" => LayerSpec::Dense { inputs: num(0)?, outputs: num(1)?, activation: act(2)? },
                "conv1d" => LayerSpec::Conv1d { channels: num(0)?, filters: num(1)?, kernel: num(2)?, activation: act(3)? },
                _ => return Err(format!("unknown layer {name:?}")),
            });
        }
        Ok((input_shape, specs))
    }
}
