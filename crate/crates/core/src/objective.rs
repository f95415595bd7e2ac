//! ℓ_p regression objectives over linear predictors.
//!
//! The training loss of a matrix `W` (`k × d`) is
//! `L¹(W) = (1/m) Σ_i Σ_c (1/p) (W x_i − y_i)_c^p`, which is the ℓ_p point
//! loss for scalar outputs and `½‖ŷ − y‖²` for `p = 2`. A deep network is
//! scored through its end-to-end matrix: `L^N(W_1, …, W_N) = L¹(W_N ⋯ W_1)`.

use crate::error::{Error, Result};
use crate::matcore::{svd, symmetric_eigen, Matrix};
use crate::model::{end_to_end, LinearNetwork};

const NEWTON_MAX_ITERS: usize = 10_000;
const NEWTON_GRAD_TOL: f64 = 1e-10;

/// Instances as rows of `x` (`m × d`), targets as rows of `y` (`m × k`).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: Matrix,
    y: Matrix,
}

impl Dataset {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(Error::Shape(format!(
                "{} instances but {} targets",
                x.rows(),
                y.rows()
            )));
        }
        Ok(Self { x, y })
    }

    /// Scalar targets.
    pub fn scalar(x: Matrix, y: &[f64]) -> Result<Self> {
        let y = Matrix::new(y.len(), 1, y.to_vec())?;
        Self::new(x, y)
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn input_dim(&self) -> usize {
        self.x.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.y.cols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpObjective {
    dataset: Dataset,
    p: u32,
}

impl LpObjective {
    pub fn new(dataset: Dataset, p: u32) -> Result<Self> {
        if p < 2 || !p.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("p must be even and at least 2, got {p}")));
        }
        if p > 2 && dataset.output_dim() > 1 {
            return Err(Error::UnsupportedObjective {
                p,
                outputs: dataset.output_dim(),
            });
        }
        Ok(Self { dataset, p })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// Shape `(k, d)` of the end-to-end matrix.
    pub fn weight_shape(&self) -> (usize, usize) {
        (self.dataset.output_dim(), self.dataset.input_dim())
    }

    fn check(&self, w: &Matrix) -> Result<()> {
        if w.shape() != self.weight_shape() {
            return Err(Error::Shape(format!(
                "weights are {:?}, objective expects {:?}",
                w.shape(),
                self.weight_shape()
            )));
        }
        Ok(())
    }

    /// `X Wᵀ − Y`, one row per instance.
    fn residuals(&self, w: &Matrix) -> Matrix {
        &self.dataset.x.matmul_t(w) - &self.dataset.y
    }
}

fn powi(r: f64, e: u32) -> f64 {
    r.powi(e as i32)
}

pub fn loss1(w: &Matrix, obj: &LpObjective) -> Result<f64> {
    obj.check(w)?;
    let r = obj.residuals(w);
    let p = obj.p;
    let total: f64 = r.as_slice().iter().map(|&v| powi(v, p)).sum();
    Ok(total / (p as f64 * obj.dataset.len() as f64))
}

/// `dL¹/dW = (1/m) Σ_i r_i^{∘(p−1)} x_iᵀ`.
pub fn grad1(w: &Matrix, obj: &LpObjective) -> Result<Matrix> {
    obj.check(w)?;
    let r = obj.residuals(w).map(|v| powi(v, obj.p - 1));
    Ok(r.t_matmul(&obj.dataset.x).scale(1.0 / obj.dataset.len() as f64))
}

pub fn loss_n(net: &LinearNetwork, obj: &LpObjective) -> Result<f64> {
    loss1(&end_to_end(net), obj)
}

/// `∂L^N/∂W_j = (W_N ⋯ W_{j+1})ᵀ · dL¹/dW(W_e) · (W_{j-1} ⋯ W_1)ᵀ`, empty
/// products being identities.
pub fn layer_grads(net: &LinearNetwork, obj: &LpObjective) -> Result<Vec<Matrix>> {
    let weights = net.weights();
    let depth = weights.len();
    // below[j] = W_j ⋯ W_1 (below[0] unused: identity).
    let mut below: Vec<Matrix> = Vec::with_capacity(depth);
    below.push(weights[0].clone());
    for w in &weights[1..] {
        let next = w.matmul(below.last().unwrap());
        below.push(next);
    }
    let w_e = below.last().unwrap();
    let g = grad1(w_e, obj)?;

    let mut grads = vec![Matrix::zeros(1, 1); depth];
    // above = W_N ⋯ W_{j+1}, grown downward from the output side.
    let mut above: Option<Matrix> = None;
    for j in (0..depth).rev() {
        let left = match &above {
            Some(a) => a.t_matmul(&g),
            None => g.clone(),
        };
        grads[j] = if j == 0 { left } else { left.matmul_t(&below[j - 1]) };
        above = Some(match above {
            Some(a) => a.matmul(&weights[j]),
            None => weights[j].clone(),
        });
    }
    Ok(grads)
}

/// Minimizer of `L¹` and its loss.
#[derive(Clone, Debug)]
pub struct ReferenceOptimum {
    pub w: Matrix,
    pub loss: f64,
    /// Newton iterations used (0 for the closed-form ℓ₂ case).
    pub iterations: usize,
}

/// ℓ₂: least squares through the pseudoinverse of `X`.
/// `p > 2`: damped Newton from the ℓ₂ solution until `‖dL¹/dW‖ ≤ 1e-10`,
/// accepting an earlier stop only when the Newton decrement has fallen to
/// the round-off level of the loss.
pub fn reference_optimum(obj: &LpObjective) -> Result<ReferenceOptimum> {
    let least_squares = least_squares(obj)?;
    if obj.p == 2 {
        let loss = loss1(&least_squares, obj)?;
        return Ok(ReferenceOptimum {
            w: least_squares,
            loss,
            iterations: 0,
        });
    }
    newton(obj, least_squares)
}

fn least_squares(obj: &LpObjective) -> Result<Matrix> {
    let x = obj.dataset.x();
    let f = svd(x)?;
    let top = f.s.first().copied().unwrap_or(0.0);
    let cutoff = top * f64::EPSILON * x.rows().max(x.cols()) as f64;
    // W*ᵀ = V Σ⁺ Uᵀ Y
    let uty = f.u.t_matmul(obj.dataset.y());
    let scaled = Matrix::from_fn(uty.rows(), uty.cols(), |i, j| {
        if f.s[i] > cutoff {
            uty[(i, j)] / f.s[i]
        } else {
            0.0
        }
    });
    Ok(f.v.matmul(&scaled).transpose())
}

fn hessian(w: &Matrix, obj: &LpObjective) -> Matrix {
    let x = obj.dataset.x();
    let (m, d) = x.shape();
    let r = obj.residuals(w);
    let mut h = Matrix::zeros(d, d);
    for i in 0..m {
        let weight = (obj.p - 1) as f64 * powi(r[(i, 0)], obj.p - 2) / m as f64;
        if weight == 0.0 {
            continue;
        }
        let xi = x.row(i);
        for a in 0..d {
            let wa = weight * xi[a];
            for b in 0..d {
                h[(a, b)] += wa * xi[b];
            }
        }
    }
    h
}

/// Pseudo-inverse solve of the symmetric PSD system `h · z = g`.
fn psd_solve(h: &Matrix, g: &[f64]) -> Result<Vec<f64>> {
    let eig = symmetric_eigen(h)?;
    let n = g.len();
    let top = eig.values.last().copied().unwrap_or(0.0);
    let cutoff = top * 1e-14;
    let mut z = vec![0.0; n];
    for (k, &lambda) in eig.values.iter().enumerate() {
        if lambda <= cutoff {
            continue;
        }
        let q = eig.vectors.column(k);
        let coeff: f64 = q.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() / lambda;
        for (zi, qi) in z.iter_mut().zip(&q) {
            *zi += coeff * qi;
        }
    }
    Ok(z)
}

fn newton(obj: &LpObjective, start: Matrix) -> Result<ReferenceOptimum> {
    let mut w = start;
    let mut loss = loss1(&w, obj)?;
    for iter in 0..NEWTON_MAX_ITERS {
        let g = grad1(&w, obj)?;
        let grad_norm = g.frobenius_norm();
        if grad_norm <= NEWTON_GRAD_TOL {
            return Ok(ReferenceOptimum { w, loss, iterations: iter });
        }
        let step = psd_solve(&hessian(&w, obj), g.as_slice())?;
        let decrement: f64 = step.iter().zip(g.as_slice()).map(|(a, b)| a * b).sum();
        if decrement <= 4.0 * f64::EPSILON * loss.abs().max(f64::MIN_POSITIVE) {
            return Ok(ReferenceOptimum { w, loss, iterations: iter });
        }
        let step = Matrix::new(1, step.len(), step)?;
        let mut t = 1.0;
        loop {
            let mut trial = w.clone();
            trial.axpy(-t, &step);
            let trial_loss = loss1(&trial, obj)?;
            if trial_loss <= loss - 1e-4 * t * decrement {
                w = trial;
                loss = trial_loss;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(Error::NewtonStalled {
                    iterations: iter,
                    grad_norm,
                    loss,
                });
            }
        }
    }
    let grad_norm = grad1(&w, obj)?.frobenius_norm();
    Err(Error::NewtonStalled {
        iterations: NEWTON_MAX_ITERS,
        grad_norm,
        loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_example(p: u32) -> LpObjective {
        let ds = Dataset::scalar(Matrix::row_vector(&[1.0, 0.0]), &[3.0]).unwrap();
        LpObjective::new(ds, p).unwrap()
    }

    fn two_point(y1: f64, y2: f64, p: u32) -> LpObjective {
        let ds = Dataset::scalar(Matrix::identity(2), &[y1, y2]).unwrap();
        LpObjective::new(ds, p).unwrap()
    }

    #[test]
    fn single_example_values() {
        let obj = single_example(4);
        let w = Matrix::zeros(1, 2);
        assert_eq!(loss1(&w, &obj).unwrap(), 20.25);
        assert_eq!(grad1(&w, &obj).unwrap(), Matrix::row_vector(&[-27.0, 0.0]));
    }

    #[test]
    fn interpolator_has_zero_loss_and_gradient() {
        let obj = two_point(5.0, -2.0, 4);
        let w = Matrix::row_vector(&[5.0, -2.0]);
        assert_eq!(loss1(&w, &obj).unwrap(), 0.0);
        assert_eq!(grad1(&w, &obj).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn rejects_bad_exponents() {
        let ds = Dataset::scalar(Matrix::identity(2), &[1.0, 2.0]).unwrap();
        assert!(LpObjective::new(ds.clone(), 3).is_err());
        assert!(LpObjective::new(ds, 0).is_err());
        let multi = Dataset::new(Matrix::identity(2), Matrix::identity(2)).unwrap();
        assert!(matches!(
            LpObjective::new(multi.clone(), 4),
            Err(Error::UnsupportedObjective { p: 4, outputs: 2 })
        ));
        assert!(LpObjective::new(multi, 2).is_ok());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let obj = two_point(1.0, 1.0, 2);
        assert!(loss1(&Matrix::zeros(1, 3), &obj).is_err());
    }

    #[test]
    fn multi_output_l2_is_half_squared_norm() {
        let ds = Dataset::new(Matrix::identity(2), Matrix::from_rows(&[&[1.0, 2.0], &[0.0, 0.0]])).unwrap();
        let obj = LpObjective::new(ds, 2).unwrap();
        // residual rows: -(1, 2) and 0 → (1/2)·½·5
        assert_eq!(loss1(&Matrix::zeros(2, 2), &obj).unwrap(), 1.25);
    }

    #[test]
    fn depth_one_layer_grad_is_grad1() {
        let obj = two_point(2.0, 1.0, 4);
        let w = Matrix::row_vector(&[0.5, -0.5]);
        let net = LinearNetwork::from_weights(vec![w.clone()]).unwrap();
        assert_eq!(layer_grads(&net, &obj).unwrap(), vec![grad1(&w, &obj).unwrap()]);
        assert_eq!(loss_n(&net, &obj).unwrap(), loss1(&w, &obj).unwrap());
    }

    #[test]
    fn separable_optimum_for_any_even_p() {
        for p in [2, 4, 6] {
            let opt = reference_optimum(&two_point(10.0, 1.0, p)).unwrap();
            assert!(opt.w.max_abs_diff(&Matrix::row_vector(&[10.0, 1.0])) < 1e-3, "p={p}: {:?}", opt.w);
            assert!(opt.loss < 1e-12);
        }
    }
}
