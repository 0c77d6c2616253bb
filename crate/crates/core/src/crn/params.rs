use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Fully-connected layer `x ↦ x·W + b` with `W` stored row-major
/// (`inputs` rows of `outputs` values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Weights uniform in `±1/√inputs`, zero bias.
    fn uniform<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        Dense {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| rng.gen_range(-bound..bound)).collect(),
            bias: vec![0.0; outputs],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.outputs..(i + 1) * self.outputs]
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.inputs {
            return Err(Error::Shape {
                expected: self.inputs,
                actual: x.len(),
            });
        }
        let mut out = self.bias.clone();
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (o, w) in out.iter_mut().zip(self.row(i)) {
                    *o += xi * w;
                }
            }
        }
        Ok(out)
    }

    pub fn forward_sparse(&self, entries: &[(usize, f64)]) -> Result<Vec<f64>> {
        let mut out = self.bias.clone();
        for &(i, xi) in entries {
            if i >= self.inputs {
                return Err(Error::Shape {
                    expected: self.inputs,
                    actual: i + 1,
                });
            }
            for (o, w) in out.iter_mut().zip(self.row(i)) {
                *o += xi * w;
            }
        }
        Ok(out)
    }
}

/// All learned parameters of the containment-rate network.
///
/// `mlp1`/`mlp2` map `L`-wide set elements of the first/second query to `H`
/// values; `out1` maps the `4H` expanded pair to `2H`; `out2` maps `2H` to the
/// output logit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrnParams {
    pub input_width: usize,
    pub hidden: usize,
    pub mlp1: Dense,
    pub mlp2: Dense,
    pub out1: Dense,
    pub out2: Dense,
}

impl CrnParams {
    pub fn init(input_width: usize, hidden: usize, seed: u64) -> Result<Self> {
        if hidden == 0 || input_width == 0 {
            return Err(Error::Shape { expected: 1, actual: 0 });
        }
        let mut rng = seed::rng(seed);
        Ok(CrnParams {
            input_width,
            hidden,
            mlp1: Dense::uniform(input_width, hidden, &mut rng),
            mlp2: Dense::uniform(input_width, hidden, &mut rng),
            out1: Dense::uniform(4 * hidden, 2 * hidden, &mut rng),
            out2: Dense::uniform(2 * hidden, 1, &mut rng),
        })
    }

    pub fn zeros(input_width: usize, hidden: usize) -> Self {
        CrnParams {
            input_width,
            hidden,
            mlp1: Dense::zeros(input_width, hidden),
            mlp2: Dense::zeros(input_width, hidden),
            out1: Dense::zeros(4 * hidden, 2 * hidden),
            out2: Dense::zeros(2 * hidden, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_width, self.hidden)
    }

    /// `2·L·H + 8·H² + 6·H + 1`.
    pub fn expected_param_count(input_width: usize, hidden: usize) -> usize {
        2 * input_width * hidden + 8 * hidden * hidden + 6 * hidden + 1
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn tensors(&self) -> [&[f64]; 8] {
        [
            &self.mlp1.weights,
            &self.mlp1.bias,
            &self.mlp2.weights,
            &self.mlp2.bias,
            &self.out1.weights,
            &self.out1.bias,
            &self.out2.weights,
            &self.out2.bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        [
            &mut self.mlp1.weights,
            &mut self.mlp1.bias,
            &mut self.mlp2.weights,
            &mut self.mlp2.bias,
            &mut self.out1.weights,
            &mut self.out1.bias,
            &mut self.out2.weights,
            &mut self.out2.bias,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Checks that every layer has the shape implied by `(input_width, hidden)`.
    pub fn check_shapes(&self) -> Result<()> {
        let z = Self::zeros(self.input_width, self.hidden);
        for (a, b) in self.tensors().iter().zip(z.tensors()) {
            if a.len() != b.len() {
                return Err(Error::Shape {
                    expected: b.len(),
                    actual: a.len(),
                });
            }
        }
        let dims = |d: &Dense| (d.inputs, d.outputs);
        if [dims(&self.mlp1), dims(&self.mlp2), dims(&self.out1), dims(&self.out2)]
            != [dims(&z.mlp1), dims(&z.mlp2), dims(&z.out1), dims(&z.out2)]
        {
            return Err(Error::Checkpoint("layer dimensions inconsistent".into()));
        }
        Ok(())
    }
}
