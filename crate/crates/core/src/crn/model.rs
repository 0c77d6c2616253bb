//! Forward pass, q-error loss and hand-derived gradients.

use super::params::{CrnParams, Dense};
use crate::error::{Error, Result};
use crate::featurize::VectorSet;

/// One training example: both queries' vector sets and the true rate.
pub type Example<'a> = (&'a VectorSet, &'a VectorSet, f64);

#[inline]
fn relu(x: f64) -> f64 {
    x.max(0.0)
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_width(vs: &VectorSet, layer: &Dense) -> Result<()> {
    if vs.width() != layer.inputs {
        return Err(Error::Shape {
            expected: layer.inputs,
            actual: vs.width(),
        });
    }
    Ok(())
}

/// Mean of `ReLU(v·U + b)` over the set; the zero vector for an empty set.
pub fn pool_set(vs: &VectorSet, layer: &Dense) -> Result<Vec<f64>> {
    Ok(pool_trace(vs, layer)?.pooled)
}

struct SetTrace {
    /// Pre-activations, one row per element.
    pre: Vec<Vec<f64>>,
    pooled: Vec<f64>,
}

fn pool_trace(vs: &VectorSet, layer: &Dense) -> Result<SetTrace> {
    check_width(vs, layer)?;
    let mut pooled = vec![0.0; layer.outputs];
    let mut pre = Vec::with_capacity(vs.len());
    for v in vs.vectors() {
        let a = layer.forward_sparse(v.entries())?;
        for (p, &x) in pooled.iter_mut().zip(&a) {
            *p += relu(x);
        }
        pre.push(a);
    }
    if !pre.is_empty() {
        let n = pre.len() as f64;
        pooled.iter_mut().for_each(|p| *p /= n);
    }
    Ok(SetTrace { pre, pooled })
}

/// `[v1, v2, |v1 − v2|, v1 ⊙ v2]`.
pub fn expand(v1: &[f64], v2: &[f64]) -> Result<Vec<f64>> {
    if v1.len() != v2.len() {
        return Err(Error::Shape {
            expected: v1.len(),
            actual: v2.len(),
        });
    }
    let mut out = Vec::with_capacity(4 * v1.len());
    out.extend_from_slice(v1);
    out.extend_from_slice(v2);
    out.extend(v1.iter().zip(v2).map(|(a, b)| (a - b).abs()));
    out.extend(v1.iter().zip(v2).map(|(a, b)| a * b));
    Ok(out)
}

struct Trace {
    set1: SetTrace,
    set2: SetTrace,
    expanded: Vec<f64>,
    hidden_pre: Vec<f64>,
    yhat: f64,
}

fn forward_trace(params: &CrnParams, v1: &VectorSet, v2: &VectorSet) -> Result<Trace> {
    let set1 = pool_trace(v1, &params.mlp1)?;
    let set2 = pool_trace(v2, &params.mlp2)?;
    let expanded = expand(&set1.pooled, &set2.pooled)?;
    let hidden_pre = params.out1.forward(&expanded)?;
    let hidden: Vec<f64> = hidden_pre.iter().map(|&x| relu(x)).collect();
    let logit = params.out2.forward(&hidden)?[0];
    Ok(Trace {
        set1,
        set2,
        expanded,
        hidden_pre,
        yhat: sigmoid(logit).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON),
    })
}

/// Estimated containment rate of the first query in the second, strictly
/// inside `(0, 1)`.
pub fn forward(params: &CrnParams, v1: &VectorSet, v2: &VectorSet) -> Result<f64> {
    Ok(forward_trace(params, v1, v2)?.yhat)
}

/// q-error between a true rate `y` (floored at `floor`) and an estimate.
pub fn qerror(y: f64, yhat: f64, floor: f64) -> f64 {
    let y = y.max(floor);
    if yhat > y {
        yhat / y
    } else {
        y / yhat
    }
}

/// Mean q-error over a batch, without gradients.
pub fn mean_loss(params: &CrnParams, batch: &[Example<'_>], floor: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Numeric("empty batch".into()));
    }
    let mut total = 0.0;
    for &(v1, v2, y) in batch {
        total += qerror(y, forward(params, v1, v2)?, floor);
    }
    let loss = total / batch.len() as f64;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {loss}")));
    }
    Ok(loss)
}

/// Mean q-error over the batch and its exact gradient for every parameter.
///
/// With `y' = max(y, floor)` and `q = ŷ/y'` or `y'/ŷ`, the derivative with
/// respect to the output logit is `±q·(1 − ŷ)`; it is taken as zero when
/// `ŷ = y'`.
pub fn loss_and_grad(params: &CrnParams, batch: &[Example<'_>], floor: f64) -> Result<(f64, CrnParams)> {
    if batch.is_empty() {
        return Err(Error::Numeric("empty batch".into()));
    }
    let h = params.hidden;
    let scale = 1.0 / batch.len() as f64;
    let mut grad = params.zeros_like();
    let mut total = 0.0;

    for &(v1, v2, y) in batch {
        let tr = forward_trace(params, v1, v2)?;
        let yf = y.max(floor);
        let q = qerror(y, tr.yhat, floor);
        if !q.is_finite() {
            return Err(Error::Numeric(format!("non-finite q-error (ŷ = {})", tr.yhat)));
        }
        total += q;
        let dlogit = if tr.yhat > yf {
            q * (1.0 - tr.yhat)
        } else if tr.yhat < yf {
            -q * (1.0 - tr.yhat)
        } else {
            0.0
        } * scale;
        if dlogit == 0.0 {
            continue;
        }

        // out2
        let mut dhidden = vec![0.0; 2 * h];
        for (i, &pre) in tr.hidden_pre.iter().enumerate() {
            let r = relu(pre);
            grad.out2.weights[i] += r * dlogit;
            dhidden[i] = params.out2.weights[i] * dlogit;
        }
        grad.out2.bias[0] += dlogit;

        // out1
        let dpre: Vec<f64> = dhidden
            .iter()
            .zip(&tr.hidden_pre)
            .map(|(&d, &pre)| if pre > 0.0 { d } else { 0.0 })
            .collect();
        let mut dexp = vec![0.0; 4 * h];
        for (i, &e) in tr.expanded.iter().enumerate() {
            let row = params.out1.row(i);
            let grow = &mut grad.out1.weights[i * 2 * h..(i + 1) * 2 * h];
            let mut acc = 0.0;
            for k in 0..2 * h {
                grow[k] += e * dpre[k];
                acc += row[k] * dpre[k];
            }
            dexp[i] = acc;
        }
        for (b, d) in grad.out1.bias.iter_mut().zip(&dpre) {
            *b += d;
        }

        // expand
        let (p1, p2) = (&tr.set1.pooled, &tr.set2.pooled);
        let mut dq1 = vec![0.0; h];
        let mut dq2 = vec![0.0; h];
        for k in 0..h {
            let diff = p1[k] - p2[k];
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            dq1[k] = dexp[k] + sign * dexp[2 * h + k] + p2[k] * dexp[3 * h + k];
            dq2[k] = dexp[h + k] - sign * dexp[2 * h + k] + p1[k] * dexp[3 * h + k];
        }

        backprop_set(v1, &tr.set1, &dq1, &mut grad.mlp1);
        backprop_set(v2, &tr.set2, &dq2, &mut grad.mlp2);
    }

    let loss = total * scale;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {loss}")));
    }
    Ok((loss, grad))
}

fn backprop_set(vs: &VectorSet, tr: &SetTrace, dpooled: &[f64], grad: &mut Dense) {
    if vs.is_empty() {
        return;
    }
    let n = vs.len() as f64;
    let out = grad.outputs;
    for (v, pre) in vs.vectors().iter().zip(&tr.pre) {
        let da: Vec<f64> = pre
            .iter()
            .zip(dpooled)
            .map(|(&a, &d)| if a > 0.0 { d / n } else { 0.0 })
            .collect();
        for &(i, x) in v.entries() {
            for (g, d) in grad.weights[i * out..(i + 1) * out].iter_mut().zip(&da) {
                *g += x * d;
            }
        }
        for (b, d) in grad.bias.iter_mut().zip(&da) {
            *b += d;
        }
    }
}
