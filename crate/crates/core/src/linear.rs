//! Small regularized linear models: multinomial logistic regression fitted
//! by damped Newton steps, Platt scaling, and ridge regression.

use nalgebra::{DMatrix, DVector};

/// Multinomial logistic regression with class 0 as the reference class.
///
/// The intercept is expected as a constant column in the design and is
/// excluded from the L2 penalty when `intercept_col` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    n_classes: usize,
    dim: usize,
    /// `(n_classes - 1) * dim` coefficients, class-major.
    coef: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct LogisticOptions {
    pub l2: f64,
    pub intercept_col: Option<usize>,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            l2: 1.0,
            intercept_col: Some(0),
            max_iter: 50,
            tol: 1e-8,
        }
    }
}

impl LogisticModel {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    /// Fits on rows `x` with labels in `0..n_classes`. Classes absent from
    /// the labels are still parameterized; the penalty keeps them finite.
    pub fn fit(x: &[&[f64]], y: &[usize], n_classes: usize, opts: LogisticOptions) -> Self {
        assert_eq!(x.len(), y.len());
        assert!(n_classes >= 2);
        let dim = x.first().map_or(0, |r| r.len());
        let m = n_classes - 1;
        let p = m * dim;
        let mut model = Self {
            n_classes,
            dim,
            coef: vec![0.0; p],
        };
        if x.is_empty() {
            return model;
        }

        let penalty = |j: usize| -> f64 {
            match opts.intercept_col {
                Some(c) if j % dim == c => 1e-8,
                _ => opts.l2,
            }
        };

        let mut loss = model.penalized_nll(x, y, &penalty);
        let mut probs = vec![0.0; n_classes];
        for _ in 0..opts.max_iter {
            let mut grad = DVector::<f64>::zeros(p);
            let mut hess = DMatrix::<f64>::zeros(p, p);
            for (row, &label) in x.iter().zip(y) {
                model.probs_into(row, &mut probs);
                for a in 0..m {
                    let resid = probs[a + 1] - if label == a + 1 { 1.0 } else { 0.0 };
                    for (i, xi) in row.iter().enumerate() {
                        grad[a * dim + i] += resid * xi;
                    }
                    for b in a..m {
                        let w = if a == b {
                            probs[a + 1] * (1.0 - probs[a + 1])
                        } else {
                            -probs[a + 1] * probs[b + 1]
                        };
                        if w == 0.0 {
                            continue;
                        }
                        for i in 0..dim {
                            let wxi = w * row[i];
                            let r = a * dim + i;
                            for j in 0..dim {
                                hess[(r, b * dim + j)] += wxi * row[j];
                            }
                        }
                    }
                }
            }
            for a in 0..m {
                for b in (a + 1)..m {
                    for i in 0..dim {
                        for j in 0..dim {
                            hess[(b * dim + j, a * dim + i)] = hess[(a * dim + i, b * dim + j)];
                        }
                    }
                }
            }
            for j in 0..p {
                grad[j] += penalty(j) * model.coef[j];
                hess[(j, j)] += penalty(j);
            }
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&grad),
                None => {
                    // Fall back to a plain gradient step scaled by the diagonal.
                    DVector::from_iterator(p, (0..p).map(|j| grad[j] / hess[(j, j)].max(1e-6)))
                }
            };

            let mut scale = 1.0;
            let old = model.coef.clone();
            let mut improved = false;
            for _ in 0..30 {
                for j in 0..p {
                    model.coef[j] = old[j] - scale * step[j];
                }
                let candidate = model.penalized_nll(x, y, &penalty);
                if candidate <= loss + 1e-12 {
                    loss = candidate;
                    improved = true;
                    break;
                }
                scale *= 0.5;
            }
            if !improved {
                model.coef = old;
                break;
            }
            let step_norm = scale * step.norm();
            if step_norm < opts.tol * (1.0 + DVector::from_column_slice(&model.coef).norm()) {
                break;
            }
        }
        model
    }

    fn penalized_nll(&self, x: &[&[f64]], y: &[usize], penalty: &dyn Fn(usize) -> f64) -> f64 {
        let mut nll = 0.0;
        for (row, &label) in x.iter().zip(y) {
            let logits = self.logits(row);
            let lse = log_sum_exp(&logits);
            nll += lse - logits[label];
        }
        let reg: f64 = self
            .coef
            .iter()
            .enumerate()
            .map(|(j, c)| 0.5 * penalty(j) * c * c)
            .sum();
        nll + reg
    }

    fn logits(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_classes];
        for a in 1..self.n_classes {
            let w = &self.coef[(a - 1) * self.dim..a * self.dim];
            out[a] = w.iter().zip(row).map(|(w, x)| w * x).sum();
        }
        out
    }

    fn probs_into(&self, row: &[f64], out: &mut [f64]) {
        let logits = self.logits(row);
        let lse = log_sum_exp(&logits);
        for (o, l) in out.iter_mut().zip(&logits) {
            *o = (l - lse).exp();
        }
    }

    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_classes];
        self.probs_into(row, &mut out);
        out
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

/// One-dimensional sigmoid recalibration `p -> sigmoid(a * logit(p) + b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlattMap {
    pub slope: f64,
    pub intercept: f64,
}

impl PlattMap {
    pub const IDENTITY: PlattMap = PlattMap {
        slope: 1.0,
        intercept: 0.0,
    };

    /// Fits on raw probabilities and binary outcomes. Returns the identity
    /// when only one outcome class is present.
    pub fn fit(probs: &[f64], labels: &[bool]) -> Self {
        let positives = labels.iter().filter(|l| **l).count();
        if positives == 0 || positives == labels.len() {
            return Self::IDENTITY;
        }
        let rows: Vec<[f64; 2]> = probs.iter().map(|p| [1.0, logit(*p)]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let y: Vec<usize> = labels.iter().map(|l| usize::from(*l)).collect();
        let model = LogisticModel::fit(
            &refs,
            &y,
            2,
            LogisticOptions {
                l2: 1e-3,
                intercept_col: Some(0),
                ..LogisticOptions::default()
            },
        );
        let c = model.coefficients();
        Self {
            intercept: c[0],
            slope: c[1],
        }
    }

    pub fn apply(&self, p: f64) -> f64 {
        sigmoid(self.slope * logit(p) + self.intercept)
    }
}

/// Ridge regression via the normal equations.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    coef: Vec<f64>,
}

impl RidgeModel {
    pub fn fit(x: &[&[f64]], y: &[f64], l2: f64, intercept_col: Option<usize>) -> Self {
        let dim = x.first().map_or(0, |r| r.len());
        let mut xtx = DMatrix::<f64>::zeros(dim, dim);
        let mut xty = DVector::<f64>::zeros(dim);
        for (row, target) in x.iter().zip(y) {
            for i in 0..dim {
                if row[i] == 0.0 {
                    continue;
                }
                xty[i] += row[i] * target;
                for j in i..dim {
                    xtx[(i, j)] += row[i] * row[j];
                }
            }
        }
        for i in 0..dim {
            for j in 0..i {
                xtx[(i, j)] = xtx[(j, i)];
            }
            xtx[(i, i)] += if intercept_col == Some(i) { 1e-8 } else { l2 };
        }
        let coef = match xtx.clone().cholesky() {
            Some(ch) => ch.solve(&xty),
            None => xtx
                .lu()
                .solve(&xty)
                .unwrap_or_else(|| DVector::zeros(dim)),
        };
        Self {
            coef: coef.iter().cloned().collect(),
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.coef.iter().zip(row).map(|(c, x)| c * x).sum()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }
}
