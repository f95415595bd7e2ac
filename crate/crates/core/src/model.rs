//! Deep linear networks `x ↦ W_N ⋯ W_1 x`: construction, initialization and
//! collapse to the end-to-end matrix.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matcore::{svd, Matrix};

/// Layer weights `W_1 … W_N`, where `W_j` is `n_j × n_{j-1}`, `n_0` is the
/// input dimension and `n_N` the output dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearNetwork {
    widths: Vec<usize>,
    weights: Vec<Matrix>,
}

impl LinearNetwork {
    pub fn from_weights(weights: Vec<Matrix>) -> Result<Self> {
        let first = weights
            .first()
            .ok_or_else(|| Error::InvalidArgument("a network needs at least one layer".into()))?;
        let mut widths = vec![first.cols()];
        for (j, w) in weights.iter().enumerate() {
            if w.cols() != *widths.last().unwrap() {
                return Err(Error::Shape(format!(
                    "layer {} is {:?} but receives {} inputs",
                    j + 1,
                    w.shape(),
                    widths.last().unwrap()
                )));
            }
            if !w.is_finite() {
                return Err(Error::NonFinite(format!("layer {}", j + 1)));
            }
            widths.push(w.rows());
        }
        Ok(Self { widths, weights })
    }

    /// Depth `N`.
    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<Matrix> {
        self.weights
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.rows() * w.cols()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Matrix::is_finite)
    }

    /// Same shapes, weights replaced. Caller guarantees matching shapes.
    pub(crate) fn with_weights(&self, weights: Vec<Matrix>) -> Self {
        debug_assert!(weights
            .iter()
            .zip(&self.weights)
            .all(|(a, b)| a.shape() == b.shape()));
        Self {
            widths: self.widths.clone(),
            weights,
        }
    }
}

fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least input and output widths, got {widths:?}"
        )));
    }
    if widths.contains(&0) {
        return Err(Error::InvalidArgument(format!("zero width in {widths:?}")));
    }
    Ok(())
}

fn gaussian(std: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(format!("std {std}: {e}")))
}

fn sample_matrix(rows: usize, cols: usize, dist: &Normal<f64>, rng: &mut ChaCha8Rng) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = dist.sample(rng);
        }
    }
    m
}

/// I.i.d. `N(0, std²)` entries, layer by layer in row-major order.
pub fn init_gaussian(widths: &[usize], std: f64, seed: u64) -> Result<LinearNetwork> {
    check_widths(widths)?;
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::InvalidArgument(format!("std must be positive, got {std}")));
    }
    let dist = gaussian(std)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = widths
        .windows(2)
        .map(|w| sample_matrix(w[1], w[0], &dist, &mut rng))
        .collect();
    LinearNetwork::from_weights(weights)
}

/// Gaussian entries plus `offset` on every `(i, i)` position, rectangular
/// layers included. `std = 0` gives exact (partial) identities.
pub fn init_identity(widths: &[usize], std: f64, offset: f64, seed: u64) -> Result<LinearNetwork> {
    check_widths(widths)?;
    if !(std >= 0.0 && std.is_finite()) {
        return Err(Error::InvalidArgument(format!("std must be non-negative, got {std}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = if std > 0.0 { Some(gaussian(std)?) } else { None };
    let weights = widths
        .windows(2)
        .map(|w| {
            let mut m = match &dist {
                Some(d) => sample_matrix(w[1], w[0], d, &mut rng),
                None => Matrix::zeros(w[1], w[0]),
            };
            for i in 0..w[0].min(w[1]) {
                m[(i, i)] += offset;
            }
            m
        })
        .collect();
    LinearNetwork::from_weights(weights)
}

/// Exactly balanced initialization (`W_{j+1}ᵀW_{j+1} = W_j W_jᵀ`).
///
/// Samples a target `W_e` with i.i.d. `N(0, (std^N)²)` entries, takes its
/// SVD `UΣVᵀ`, and splits `Σ^{1/N}` evenly across the layers:
/// `W_1 = A_1 Σ^{1/N} Vᵀ`, `W_j = A_j Σ^{1/N} A_{j-1}ᵀ`,
/// `W_N = U Σ^{1/N} A_{N-1}ᵀ`, where `A_j` holds the first `min(k, d)`
/// standard basis vectors of `R^{n_j}`. The sampled `W_e` depends only on
/// `(k, d, N, std, seed)`, so networks that differ only in hidden widths
/// share the same end-to-end matrix.
pub fn init_balanced(widths: &[usize], std: f64, seed: u64) -> Result<LinearNetwork> {
    check_widths(widths)?;
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::InvalidArgument(format!("std must be positive, got {std}")));
    }
    let depth = widths.len() - 1;
    let (d, k) = (widths[0], widths[depth]);
    let rank = k.min(d);
    if let Some(&narrow) = widths[1..depth].iter().find(|&&n| n < rank) {
        return Err(Error::InvalidArgument(format!(
            "hidden width {narrow} cannot carry the {rank} singular values of a {k}x{d} end-to-end matrix"
        )));
    }
    let dist = gaussian(std.powi(depth as i32))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = sample_matrix(k, d, &dist, &mut rng);
    if depth == 1 {
        return LinearNetwork::from_weights(vec![target]);
    }

    let f = svd(&target)?;
    let root: Vec<f64> = f.s.iter().map(|s| s.powf(1.0 / depth as f64)).collect();
    // Σ^{1/N} · (right factor)ᵀ for a p-column right factor.
    let scaled_t = |right: &Matrix| {
        Matrix::from_fn(rank, right.rows(), |i, j| root[i] * right[(j, i)])
    };
    let embed = |n: usize| Matrix::eye(n, rank);

    let mut weights = Vec::with_capacity(depth);
    weights.push(embed(widths[1]).matmul(&scaled_t(&f.v)));
    for j in 2..depth {
        weights.push(embed(widths[j]).matmul(&scaled_t(&embed(widths[j - 1]))));
    }
    weights.push(f.u.matmul(&scaled_t(&embed(widths[depth - 1]))));
    LinearNetwork::from_weights(weights)
}

/// `W_e = W_N W_{N-1} ⋯ W_1`, accumulated from the input side.
pub fn end_to_end(net: &LinearNetwork) -> Matrix {
    let mut layers = net.weights.iter();
    let mut acc = layers.next().unwrap().clone();
    for w in layers {
        acc = w.matmul(&acc);
    }
    acc
}

/// `max_j ‖W_{j+1}ᵀW_{j+1} − W_j W_jᵀ‖_F`; zero for depth one.
pub fn balancedness_residual(net: &LinearNetwork) -> f64 {
    net.weights
        .windows(2)
        .map(|pair| (&pair[1].t_matmul(&pair[1]) - &pair[0].matmul_t(&pair[0])).frobenius_norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_follow_widths() {
        let net = init_gaussian(&[128, 1, 1], 0.01, 3).unwrap();
        assert_eq!(net.weights()[0].shape(), (1, 128));
        assert_eq!(net.weights()[1].shape(), (1, 1));
        assert_eq!(end_to_end(&net).shape(), (1, 128));
    }

    #[test]
    fn gaussian_rejects_zero_std() {
        assert!(init_gaussian(&[2, 2], 0.0, 1).is_err());
        assert!(init_gaussian(&[2], 1.0, 1).is_err());
    }

    #[test]
    fn gaussian_is_deterministic_per_seed() {
        assert_eq!(init_gaussian(&[4, 3, 2], 0.1, 9).unwrap(), init_gaussian(&[4, 3, 2], 0.1, 9).unwrap());
        assert_ne!(init_gaussian(&[4, 3, 2], 0.1, 9).unwrap(), init_gaussian(&[4, 3, 2], 0.1, 10).unwrap());
    }

    #[test]
    fn identity_init_square_is_exact() {
        let net = init_identity(&[3, 3, 3], 0.0, 1.0, 0).unwrap();
        assert_eq!(end_to_end(&net), Matrix::identity(3));
        assert_eq!(balancedness_residual(&net), 0.0);
    }

    #[test]
    fn identity_init_rectangular_partial_identity() {
        // W1 = eye(2,3), W2 = eye(3,2) → W2 W1 = diag(1, 1, 0).
        let net = init_identity(&[3, 2, 3], 0.0, 1.0, 0).unwrap();
        assert_eq!(end_to_end(&net), Matrix::diag(&[1.0, 1.0, 0.0]));
    }

    #[test]
    fn end_to_end_multiplies_in_order() {
        let w1 = Matrix::from_rows(&[&[1.0], &[2.0]]);
        let w2 = Matrix::from_rows(&[&[3.0, 4.0]]);
        let net = LinearNetwork::from_weights(vec![w1, w2]).unwrap();
        assert_eq!(end_to_end(&net), Matrix::from_rows(&[&[11.0]]));
    }

    #[test]
    fn from_weights_checks_the_shape_chain() {
        let err = LinearNetwork::from_weights(vec![Matrix::zeros(2, 3), Matrix::zeros(1, 3)]);
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn hand_evaluated_residuals() {
        let w1 = Matrix::row_vector(&[1.0, 0.0]);
        let net = LinearNetwork::from_weights(vec![w1.clone(), Matrix::from_rows(&[&[1.0]])]).unwrap();
        assert_eq!(balancedness_residual(&net), 0.0);
        let net = LinearNetwork::from_weights(vec![w1, Matrix::from_rows(&[&[2.0]])]).unwrap();
        assert_eq!(balancedness_residual(&net), 3.0);
        let zeros = LinearNetwork::from_weights(vec![Matrix::zeros(2, 3), Matrix::zeros(1, 2)]).unwrap();
        assert_eq!(balancedness_residual(&zeros), 0.0);
    }

    #[test]
    fn balanced_depth_one_is_the_sample() {
        let net = init_balanced(&[3, 2], 0.5, 4).unwrap();
        assert_eq!(net.depth(), 1);
        assert_eq!(balancedness_residual(&net), 0.0);
    }

    #[test]
    fn balanced_init_is_balanced() {
        let net = init_balanced(&[4, 2, 1], 0.7, 5).unwrap();
        assert!(balancedness_residual(&net) <= 1e-12);
        let net = init_balanced(&[5, 6, 3, 4, 3], 0.9, 6).unwrap();
        assert!(balancedness_residual(&net) <= 1e-12);
    }

    #[test]
    fn balanced_init_requires_wide_hidden_layers() {
        assert!(init_balanced(&[4, 1, 3], 0.5, 0).is_err());
        assert!(init_balanced(&[4, 1, 1], 0.5, 0).is_ok());
    }

    #[test]
    fn balanced_collapse_ignores_hidden_widths() {
        let narrow = end_to_end(&init_balanced(&[6, 1, 1], 0.3, 11).unwrap());
        let wide = end_to_end(&init_balanced(&[6, 100, 1], 0.3, 11).unwrap());
        assert!(narrow.max_abs_diff(&wide) < 1e-14);
    }
}
