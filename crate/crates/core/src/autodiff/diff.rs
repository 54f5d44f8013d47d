//! Gradients, directional derivatives and Hessian-vector products over a
//! [`ParamSet`] block.

use super::params::{BlockSel, FlatVector, ParamSet};
use super::scalar::{Dual, Scalar};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// A function of the parameters expressed on a tape.
///
/// `params` holds one leaf per [`ParamSet`] entry, in canonical order.
/// Implementations must be pure: the same inputs build the same tape.
pub trait Objective: Sync {
    fn eval<S: Scalar>(&self, tape: &mut Tape<S>, params: &[Var]) -> Result<Var>;
}

fn leaves_f64(tape: &mut Tape<f64>, params: &ParamSet, sel: BlockSel) -> Vec<Var> {
    params
        .iter()
        .map(|e| {
            if sel.contains(e.block) {
                tape.param(e.tensor.clone())
            } else {
                tape.constant(e.tensor.clone())
            }
        })
        .collect()
}

/// Leaves carrying `direction` as tangent on the selected block.
fn leaves_dual(
    tape: &mut Tape<Dual>,
    params: &ParamSet,
    sel: BlockSel,
    direction: &[f64],
) -> Result<Vec<Var>> {
    let parts = params.split_flat(direction, sel)?;
    Ok(params
        .iter()
        .zip(parts)
        .map(|(e, part)| match part {
            Some(d) => {
                let data = e
                    .tensor
                    .data()
                    .iter()
                    .zip(d)
                    .map(|(&re, &du)| Dual::new(re, du))
                    .collect();
                tape.param(Tensor::from_parts(e.tensor.shape().to_vec(), data))
            }
            None => tape.constant(e.tensor.map(Dual::from_f64)),
        })
        .collect())
}

fn check_scalar<S: Scalar>(tape: &Tape<S>, out: Var) -> Result<S> {
    let v = tape.value(out);
    if v.len() != 1 {
        return Err(Error::NonScalarLoss(v.shape().to_vec()));
    }
    let s = v.data()[0];
    if !s.is_finite() {
        return Err(Error::NonFinite("objective value".into()));
    }
    Ok(s)
}

fn gather_block<S: Scalar, T>(
    tape: &Tape<S>,
    params: &ParamSet,
    sel: BlockSel,
    leaves: &[Var],
    adj: &[Option<Tensor<S>>],
    pick: impl Fn(S) -> T,
) -> Vec<T> {
    let mut out = Vec::with_capacity(params.block_len(sel));
    for (e, &leaf) in params.iter().zip(leaves) {
        if !sel.contains(e.block) {
            continue;
        }
        match &adj[leaf.index()] {
            Some(g) => out.extend(g.data().iter().map(|&v| pick(v))),
            None => out.extend((0..tape.value(leaf).len()).map(|_| pick(S::zero()))),
        }
    }
    out
}

/// Evaluates the objective without differentiation.
pub fn evaluate<O: Objective>(obj: &O, params: &ParamSet) -> Result<Tensor> {
    let mut tape = Tape::<f64>::new();
    let leaves = leaves_f64(&mut tape, params, BlockSel::All);
    let out = obj.eval(&mut tape, &leaves)?;
    Ok(tape.value(out).clone())
}

/// Loss value and its gradient with respect to the selected block.
pub fn value_and_grad<O: Objective>(
    obj: &O,
    params: &ParamSet,
    sel: BlockSel,
) -> Result<(f64, FlatVector)> {
    let mut tape = Tape::<f64>::new();
    let leaves = leaves_f64(&mut tape, params, sel);
    let out = obj.eval(&mut tape, &leaves)?;
    let value = check_scalar(&tape, out)?;
    let adj = tape.backward(out)?;
    let g = gather_block(&tape, params, sel, &leaves, &adj, |v| v);
    Ok((value, FlatVector::new(g)))
}

pub fn grad<O: Objective>(obj: &O, params: &ParamSet, sel: BlockSel) -> Result<FlatVector> {
    value_and_grad(obj, params, sel).map(|(_, g)| g)
}

/// Forward-mode directional derivative of the (possibly non-scalar) objective
/// output, flattened row-major.
pub fn jvp<O: Objective>(
    obj: &O,
    params: &ParamSet,
    sel: BlockSel,
    direction: &[f64],
) -> Result<FlatVector> {
    let mut tape = Tape::<Dual>::new();
    let leaves = leaves_dual(&mut tape, params, sel, direction)?;
    let out = obj.eval(&mut tape, &leaves)?;
    Ok(FlatVector::new(
        tape.value(out).data().iter().map(|d| d.du).collect(),
    ))
}

/// Hessian-vector product `∇²L · v` over the selected block.
///
/// Forward-over-reverse: the reverse sweep runs on dual numbers whose tangent
/// is seeded with `v`, so the tangent of the gradient is `H v`. Parameters
/// outside the block are held constant.
pub fn hvp<O: Objective>(obj: &O, params: &ParamSet, sel: BlockSel, v: &[f64]) -> Result<FlatVector> {
    hvp_with_grad(obj, params, sel, v).map(|(_, hv)| hv)
}

/// Like [`hvp`] but also returns the gradient computed along the way.
pub fn hvp_with_grad<O: Objective>(
    obj: &O,
    params: &ParamSet,
    sel: BlockSel,
    v: &[f64],
) -> Result<(FlatVector, FlatVector)> {
    let mut tape = Tape::<Dual>::new();
    let leaves = leaves_dual(&mut tape, params, sel, v)?;
    let out = obj.eval(&mut tape, &leaves)?;
    check_scalar(&tape, out)?;
    let adj = tape.backward(out)?;
    let g = gather_block(&tape, params, sel, &leaves, &adj, |d| d.re);
    let hv = gather_block(&tape, params, sel, &leaves, &adj, |d| d.du);
    if hv.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("Hessian-vector product".into()));
    }
    Ok((FlatVector::new(g), FlatVector::new(hv)))
}

fn scalar_value<O: Objective>(obj: &O, params: &ParamSet) -> Result<f64> {
    let v = evaluate(obj, params)?;
    v.item().ok_or_else(|| Error::NonScalarLoss(v.shape().to_vec()))
}

/// Central finite-difference gradient with step `eps·(1 + |θ_i|)` per coordinate.
pub fn finite_diff_grad<O: Objective>(
    obj: &O,
    params: &ParamSet,
    sel: BlockSel,
    eps: f64,
) -> Result<FlatVector> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let theta = params.flatten(sel);
    let mut work = theta.to_vec();
    let mut out = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let h = eps * (1.0 + theta[i].abs());
        work[i] = theta[i] + h;
        let plus = scalar_value(obj, &params.unflatten(&work, sel)?)?;
        work[i] = theta[i] - h;
        let minus = scalar_value(obj, &params.unflatten(&work, sel)?)?;
        work[i] = theta[i];
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(FlatVector::new(out))
}
