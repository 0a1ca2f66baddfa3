//! L2-regularized logistic regression.
//!
//! Minimizes `mean(softplus(z) - y z) + lambda/2 * |w|^2` with `z = w.x + b`
//! (intercept unpenalized) by damped Newton steps with Armijo backtracking,
//! falling back to steepest descent when the Hessian solve fails. Stops once
//! the full gradient norm drops below `tol` or after `max_iters` steps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{sigmoid, softplus, ModelError};
use crate::features::{Column, FeatureMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticHyper {
    pub l2_lambda: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// Carried for config uniformity; the optimizer itself is deterministic.
    pub seed: u64,
}

impl Default for LogisticHyper {
    fn default() -> Self {
        Self {
            l2_lambda: 1e-4,
            max_iters: 500,
            tol: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub columns: Vec<Column>,
    /// Whether the fitting matrix came out of `standardize`.
    pub standardized: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl LogisticModel {
    pub fn predict_row(&self, x: crate::features::RowView<'_>) -> f64 {
        sigmoid(x.dot(&self.weights) + self.intercept)
    }
}

/// Objective value, weight gradient and intercept gradient at `(w, b)`.
pub fn objective_and_gradient(x: &FeatureMatrix, w: &[f64], b: f64, lambda: f64) -> (f64, Vec<f64>, f64) {
    let n = x.n_rows() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for i in 0..x.n_rows() {
        let row = x.row(i);
        let z = row.dot(w) + b;
        let y = f64::from(x.labels()[i]);
        loss += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        gb += r;
        for (&c, &v) in row.indices.iter().zip(row.values) {
            gw[c as usize] += r * v;
        }
    }
    let mut reg = 0.0;
    for (g, wj) in gw.iter_mut().zip(w) {
        *g = *g / n + lambda * wj;
        reg += wj * wj;
    }
    (loss / n + 0.5 * lambda * reg, gw, gb / n)
}

pub fn objective(x: &FeatureMatrix, w: &[f64], b: f64, lambda: f64) -> f64 {
    let n = x.n_rows() as f64;
    let mut loss = 0.0;
    for i in 0..x.n_rows() {
        let z = x.row(i).dot(w) + b;
        loss += softplus(z) - f64::from(x.labels()[i]) * z;
    }
    loss / n + 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>()
}

/// Hessian over `(w, b)`, intercept last.
fn hessian(x: &FeatureMatrix, w: &[f64], b: f64, lambda: f64) -> DMatrix<f64> {
    let d = w.len();
    let n = x.n_rows() as f64;
    let mut h = DMatrix::<f64>::zeros(d + 1, d + 1);
    for i in 0..x.n_rows() {
        let row = x.row(i);
        let p = sigmoid(row.dot(w) + b);
        let s = p * (1.0 - p);
        for (&ca, &va) in row.indices.iter().zip(row.values) {
            let ca = ca as usize;
            for (&cb, &vb) in row.indices.iter().zip(row.values) {
                h[(ca, cb as usize)] += s * va * vb;
            }
            h[(ca, d)] += s * va;
            h[(d, ca)] += s * va;
        }
        h[(d, d)] += s;
    }
    h /= n;
    for j in 0..d {
        h[(j, j)] += lambda;
    }
    h
}

pub fn fit_logistic(x: &FeatureMatrix, hyper: &LogisticHyper) -> Result<LogisticModel, ModelError> {
    super::check_labels(x.labels())?;
    if !x.all_finite() {
        return Err(ModelError::NonFiniteFeature);
    }
    if hyper.tol.is_nan() || hyper.tol <= 0.0 || hyper.l2_lambda.is_nan() || hyper.l2_lambda < 0.0 {
        return Err(ModelError::InvalidHyper("tol must be > 0 and l2_lambda >= 0".into()));
    }
    let d = x.width();
    let lambda = hyper.l2_lambda;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let (mut f, mut gw, mut gb) = objective_and_gradient(x, &w, b, lambda);
    let mut iterations = 0;
    let grad_norm = |gw: &[f64], gb: f64| (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();

    while grad_norm(&gw, gb) >= hyper.tol && iterations < hyper.max_iters {
        let g = DVector::from_iterator(d + 1, gw.iter().copied().chain(std::iter::once(gb)));
        let newton = hessian(x, &w, b, lambda)
            .cholesky()
            .map(|c| -c.solve(&g))
            .filter(|step| step.dot(&g) < 0.0 && step.iter().all(|v| v.is_finite()));
        let step = newton.unwrap_or_else(|| -g.clone());
        let slope = step.dot(&g);

        // Armijo backtracking
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let wt: Vec<f64> = w.iter().zip(step.iter()).map(|(wi, si)| wi + t * si).collect();
            let bt = b + t * step[d];
            let ft = objective(x, &wt, bt, lambda);
            // a step that cannot strictly lower the loss means round-off has
            // taken over; the gradient-norm test alone can stall just above tol
            if ft < f && ft <= f + 1e-4 * t * slope {
                accepted = Some((wt, bt));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        let Some((wt, bt)) = accepted else {
            // no representable decrease left
            break;
        };
        w = wt;
        b = bt;
        (f, gw, gb) = objective_and_gradient(x, &w, b, lambda);
    }

    Ok(LogisticModel {
        weights: w,
        intercept: b,
        columns: x.columns().to_vec(),
        standardized: x.is_standardized(),
        iterations,
        gradient_norm: grad_norm(&gw, gb),
    })
}
