//! L2-regularized logistic regression.
//!
//! Minimizes `lambda ||beta||^2 + sum_i ln(1 + exp(-y_i (beta . x_i + b)))`
//! over weights `beta` and an unregularized intercept `b`, with labels in
//! `{-1, +1}`. The solver is a damped Newton iteration: the Hessian system
//! is solved by a dense Cholesky factorization (the problems here have a
//! few dozen parameters at most) and steps are halved until the objective
//! decreases. Convergence requires the gradient infinity-norm to fall to
//! `1e-9`, so fitted coefficients are reproducible to high precision.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gradient infinity-norm at which the fit is declared converged.
pub const GRAD_TOL: f64 = 1e-9;

const MAX_NEWTON_ITER: usize = 200;
const MAX_HALVINGS: usize = 60;

/// Stable `ln(1 + e^z)`.
fn softplus<T: Real>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

/// Logistic sigmoid `1 / (1 + e^-z)`.
fn sigmoid<T: Real>(z: T) -> T {
    let one = T::one();
    if z >= T::zero() {
        one / (one + (-z).exp())
    } else {
        let e = z.exp();
        e / (one + e)
    }
}

fn check_inputs<T: Real>(x: &[Vec<T>], y: &[i8], lambda: T) -> Result<usize> {
    if !(lambda.is_finite() && lambda > T::zero()) {
        return Err(Error::InvalidRegularization(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    if x.is_empty() {
        return Err(Error::EmptyInput("no training rows".into()));
    }
    if x.len() != y.len() {
        return Err(Error::InsufficientData(format!(
            "{} rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::InsufficientData(
            "feature rows must share one positive dimension".into(),
        ));
    }
    if y.iter().any(|&l| l != -1 && l != 1) {
        return Err(Error::InsufficientData("labels must be -1 or +1".into()));
    }
    Ok(d)
}

/// Regularized negative log-likelihood.
pub fn objective<T: Real>(x: &[Vec<T>], y: &[i8], beta: &[T], intercept: T, lambda: T) -> T {
    let reg: T = lambda * beta.iter().map(|&b| b * b).sum::<T>();
    let loss: T = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let z: T = row.iter().zip(beta).map(|(&a, &b)| a * b).sum::<T>() + intercept;
            softplus(-T::from_f64_lossy(yi as f64) * z)
        })
        .sum();
    reg + loss
}

/// Gradient of [`objective`] with respect to `(beta, intercept)`.
pub fn gradient<T: Real>(
    x: &[Vec<T>],
    y: &[i8],
    beta: &[T],
    intercept: T,
    lambda: T,
) -> (Vec<T>, T) {
    let two = T::from_f64_lossy(2.0);
    let mut g: Vec<T> = beta.iter().map(|&b| two * lambda * b).collect();
    let mut gb = T::zero();
    for (row, &yi) in x.iter().zip(y) {
        let yt = T::from_f64_lossy(yi as f64);
        let z: T = row.iter().zip(beta).map(|(&a, &b)| a * b).sum::<T>() + intercept;
        // d/dz softplus(-y z) = -y sigmoid(-y z)
        let s = -yt * sigmoid(-yt * z);
        for (gj, &xj) in g.iter_mut().zip(row) {
            *gj += s * xj;
        }
        gb += s;
    }
    (g, gb)
}

/// Solve `a x = rhs` for a symmetric positive-definite `a` (row-major,
/// `n x n`) by Cholesky decomposition. `a` and `rhs` are consumed.
#[allow(clippy::needless_range_loop)] // triangular index ranges read clearer
fn cholesky_solve<T: Real>(mut a: Vec<Vec<T>>, mut rhs: Vec<T>) -> Result<Vec<T>> {
    let n = rhs.len();
    // Factor: a = L L^T, stored in the lower triangle.
    for j in 0..n {
        for i in j..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return Err(Error::SolveFailure(
                        "Newton system is not positive definite".into(),
                    ));
                }
                a[j][j] = s.sqrt();
            } else {
                a[i][j] = s / a[j][j];
            }
        }
    }
    // Forward substitution: L u = rhs.
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= a[i][k] * rhs[k];
        }
        rhs[i] = s / a[i][i];
    }
    // Back substitution: L^T x = u.
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for k in i + 1..n {
            s -= a[k][i] * rhs[k];
        }
        rhs[i] = s / a[i][i];
    }
    Ok(rhs)
}

/// Fitted coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LogReg<T> {
    pub beta: Vec<T>,
    pub intercept: T,
    pub lambda: T,
    /// Gradient infinity-norm at the solution.
    pub grad_norm: T,
    pub iterations: usize,
}

impl<T: Real> LogReg<T> {
    /// Decision value `beta . x + intercept`.
    pub fn score(&self, x: &[T]) -> T {
        self.beta.iter().zip(x).map(|(&b, &v)| b * v).sum::<T>() + self.intercept
    }

    /// Class prediction: `+1` when the score is non-negative.
    pub fn predict(&self, x: &[T]) -> i8 {
        if self.score(x) >= T::zero() {
            1
        } else {
            -1
        }
    }
}

/// Fit by damped Newton iteration from the zero vector.
pub fn fit<T: Real>(x: &[Vec<T>], y: &[i8], lambda: T) -> Result<LogReg<T>> {
    let d = check_inputs(x, y, lambda)?;
    fit_from(x, y, lambda, vec![T::zero(); d], T::zero())
}

/// Fit by damped Newton iteration from a caller-supplied starting point.
/// The ridge term makes the objective strictly convex, so every starting
/// point converges to the same optimum.
#[allow(clippy::needless_range_loop)] // symmetric Hessian fill uses i/j pairs
pub fn fit_from<T: Real>(
    x: &[Vec<T>],
    y: &[i8],
    lambda: T,
    beta0: Vec<T>,
    intercept0: T,
) -> Result<LogReg<T>> {
    let d = check_inputs(x, y, lambda)?;
    if beta0.len() != d {
        return Err(Error::InvalidField(format!(
            "starting point has {} weights for {d} features",
            beta0.len()
        )));
    }
    let two = T::from_f64_lossy(2.0);
    let tol = T::from_f64_lossy(GRAD_TOL);
    let mut beta = beta0;
    let mut intercept = intercept0;
    let mut obj = objective(x, y, &beta, intercept, lambda);

    for iter in 0..MAX_NEWTON_ITER {
        let (g, gb) = gradient(x, y, &beta, intercept, lambda);
        let gnorm = g
            .iter()
            .chain(std::iter::once(&gb))
            .fold(T::zero(), |m, &v| m.max(v.abs()));
        if gnorm <= tol {
            return Ok(LogReg {
                beta,
                intercept,
                lambda,
                grad_norm: gnorm,
                iterations: iter,
            });
        }

        // Hessian over (beta, intercept): X^T W X plus 2 lambda on the
        // weight block; W_ii = sigmoid(z_i)(1 - sigmoid(z_i)).
        let m = d + 1;
        let mut h = vec![vec![T::zero(); m]; m];
        for (row, _) in x.iter().zip(y) {
            let z: T = row.iter().zip(&beta).map(|(&a, &b)| a * b).sum::<T>() + intercept;
            let s = sigmoid(z);
            let w = s * (T::one() - s);
            for i in 0..d {
                for j in 0..=i {
                    h[i][j] += w * row[i] * row[j];
                }
                h[d][i] += w * row[i];
            }
            h[d][d] += w;
        }
        for i in 0..d {
            h[i][i] += two * lambda;
            for j in 0..i {
                h[j][i] = h[i][j];
            }
            h[i][d] = h[d][i];
        }

        let mut rhs: Vec<T> = g.iter().map(|&v| -v).collect();
        rhs.push(-gb);
        let step = cholesky_solve(h, rhs)?;

        // Damping: halve until the objective decreases.
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let nb: Vec<T> = beta.iter().zip(&step).map(|(&b, &s)| b + t * s).collect();
            let ni = intercept + t * step[d];
            let no = objective(x, y, &nb, ni, lambda);
            if no < obj {
                beta = nb;
                intercept = ni;
                obj = no;
                accepted = true;
                break;
            }
            t /= two;
        }
        if !accepted {
            // The objective is flat to machine precision. In the quadratic
            // convergence region the full Newton step still squares the
            // gradient norm down; take it when it helps, otherwise stop.
            let nb: Vec<T> = beta.iter().zip(&step).map(|(&b, &s)| b + s).collect();
            let ni = intercept + step[d];
            let (ng, ngb) = gradient(x, y, &nb, ni, lambda);
            let ngnorm = ng
                .iter()
                .chain(std::iter::once(&ngb))
                .fold(T::zero(), |m, &v| m.max(v.abs()));
            if ngnorm < gnorm {
                beta = nb;
                intercept = ni;
                obj = objective(x, y, &beta, intercept, lambda);
                continue;
            }
            return Err(Error::SolveFailure(format!(
                "logistic fit stalled at gradient norm {gnorm}"
            )));
        }
    }
    Err(Error::SolveFailure(format!(
        "logistic fit did not converge in {MAX_NEWTON_ITER} Newton iterations"
    )))
}
