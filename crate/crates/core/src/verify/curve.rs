//! The closed curve `Γ_{r,R}`, the transformed fields `F_φ` and midpoint-rule
//! line integrals along the curve.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matcore::Matrix;

/// Geometry of `Γ_{r,R}` around direction `e`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveSpec {
    pub e: Vec<f64>,
    pub r: f64,
    pub big_r: f64,
    /// Default segments per piece `M` for lengths and sampled maxima.
    pub segments_per_piece: usize,
}

impl CurveSpec {
    pub fn new(e: Vec<f64>, r: f64, big_r: f64, segments_per_piece: usize) -> Result<Self> {
        let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("direction must be a unit vector, norm is {norm}")));
        }
        if !(r > 0.0 && r < big_r && big_r.is_finite()) {
            return Err(Error::InvalidArgument(format!("need 0 < r < R, got r = {r}, R = {big_r}")));
        }
        if segments_per_piece < 2 {
            return Err(Error::InvalidArgument("need at least 2 segments per piece".into()));
        }
        Ok(Self {
            e,
            r,
            big_r,
            segments_per_piece,
        })
    }
}

/// `Γ¹`: `−R·e → −r·e`; `Γ²`: half circle of radius `r` from `−r·e` to
/// `r·e`; `Γ³`: `r·e → R·e`; `Γ⁴`: half circle of radius `R` back to `−R·e`.
/// Both half circles lie in `span{e, u}` and pass through the `+u` side.
#[derive(Clone, Debug)]
pub struct Curve {
    spec: CurveSpec,
    u: Vec<f64>,
}

pub const PIECES: usize = 4;

pub fn build_curve(spec: &CurveSpec) -> Result<Curve> {
    let d = spec.e.len();
    if d < 2 {
        return Err(Error::InvalidArgument("the curve needs at least two dimensions".into()));
    }
    let pick = if spec.e[0].abs() > 1.0 - 1e-8 { 1 } else { 0 };
    let mut u = vec![0.0; d];
    u[pick] = 1.0;
    let along = spec.e[pick];
    for (ui, ei) in u.iter_mut().zip(&spec.e) {
        *ui -= along * ei;
    }
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    u.iter_mut().for_each(|v| *v /= norm);
    Ok(Curve { spec: spec.clone(), u })
}

impl Curve {
    pub fn spec(&self) -> &CurveSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.e.len()
    }

    /// Unit vector completing `e` to the plane of the half circles.
    pub fn plane_vector(&self) -> &[f64] {
        &self.u
    }

    fn combine(&self, a: f64, b: f64) -> Vec<f64> {
        self.spec.e.iter().zip(&self.u).map(|(e, u)| a * e + b * u).collect()
    }

    /// Point of piece `piece` (0-based) at parameter `t ∈ [0, 1]`.
    pub fn point(&self, piece: usize, t: f64) -> Vec<f64> {
        let (r, big_r) = (self.spec.r, self.spec.big_r);
        match piece {
            0 => self.combine(-big_r + t * (big_r - r), 0.0),
            1 => {
                let theta = PI * t;
                self.combine(-r * theta.cos(), r * theta.sin())
            }
            2 => self.combine(r + t * (big_r - r), 0.0),
            3 => {
                let theta = PI * t;
                self.combine(big_r * theta.cos(), big_r * theta.sin())
            }
            _ => panic!("curve has {PIECES} pieces, asked for piece {piece}"),
        }
    }

    /// Sample points: `M + 1` nodes per piece, pieces in order.
    pub fn nodes(&self, m: usize) -> Vec<Vec<f64>> {
        (0..PIECES)
            .flat_map(|piece| (0..=m).map(move |i| (piece, i as f64 / m as f64)))
            .map(|(piece, t)| self.point(piece, t))
            .collect()
    }

    /// `(γ(t_mid), γ(t_{i+1}) − γ(t_i))` for every segment of every piece.
    pub fn segments(&self, m: usize) -> impl Iterator<Item = (Vec<f64>, Vec<f64>)> + '_ {
        (0..PIECES).flat_map(move |piece| {
            (0..m).map(move |i| {
                let t0 = i as f64 / m as f64;
                let t1 = (i + 1) as f64 / m as f64;
                let a = self.point(piece, t0);
                let b = self.point(piece, t1);
                let mid = self.point(piece, 0.5 * (t0 + t1));
                let delta = b.iter().zip(&a).map(|(b, a)| b - a).collect();
                (mid, delta)
            })
        })
    }

    /// Polyline length with `m` chords per piece.
    pub fn arc_length(&self, m: usize) -> f64 {
        self.segments(m).map(|(_, d)| norm(&d)).sum()
    }

    /// `2(R − r) + π·r + π·R`.
    pub fn exact_length(&self) -> f64 {
        let (r, big_r) = (self.spec.r, self.spec.big_r);
        2.0 * (big_r - r) + PI * (r + big_r)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `F_φ(w) = ‖w‖^{2−2/N} (φ + (N−1)·⟨w, φ⟩/‖w‖² · w)`, with `F_φ(0) = 0` for
/// `N ≥ 2`. For `N = 1` the transform is the identity.
pub fn transform_field(w: &Matrix, phi: &Matrix, n: usize) -> Matrix {
    assert_eq!(w.shape(), phi.shape(), "field value shape differs from the point");
    if n == 1 {
        return phi.clone();
    }
    let sq = w.inner(w);
    if sq == 0.0 {
        return Matrix::zeros(w.rows(), w.cols());
    }
    let n = n as f64;
    let scale = sq.sqrt().powf(2.0 - 2.0 / n);
    let radial = (n - 1.0) * w.inner(phi) / sq;
    Matrix::from_fn(w.rows(), w.cols(), |i, j| scale * (phi[(i, j)] + radial * w[(i, j)]))
}

/// `F(w)` for the gradient field `grad_fn`.
pub fn field_f(w: &Matrix, grad_fn: impl Fn(&Matrix) -> Matrix, n: usize) -> Matrix {
    transform_field(w, &grad_fn(w), n)
}

/// Midpoint-rule value at `m` segments per piece and the refinement
/// `|I(2m) − I(m)|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineIntegral {
    pub value: f64,
    pub refinement: f64,
}

fn midpoint_sum(field: &impl Fn(&Matrix) -> Matrix, curve: &Curve, m: usize) -> Result<f64> {
    let mut total = 0.0;
    for (mid, delta) in curve.segments(m) {
        let f = field(&Matrix::row_vector(&mid));
        if !f.is_finite() {
            return Err(Error::NonFinite(format!("field value at {mid:?}")));
        }
        total += f.as_slice().iter().zip(&delta).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(total)
}

pub fn line_integral(field: impl Fn(&Matrix) -> Matrix, curve: &Curve, m: usize) -> Result<LineIntegral> {
    if m < 2 {
        return Err(Error::InvalidArgument("need at least 2 segments per piece".into()));
    }
    let value = midpoint_sum(&field, curve, m)?;
    let fine = midpoint_sum(&field, curve, 2 * m)?;
    Ok(LineIntegral {
        value,
        refinement: (fine - value).abs(),
    })
}

/// `(2N/(3 − 2/N) − 2)·(R^{3−2/N} − r^{3−2/N})`: the loop integral of the
/// transformed constant unit field `F_e`.
pub fn lemma3_reference(n: usize, r: f64, big_r: f64) -> f64 {
    let n = n as f64;
    let a = 3.0 - 2.0 / n;
    (2.0 * n / a - 2.0) * (big_r.powf(a) - r.powf(a))
}

/// `N · len(Γ) · max‖γ‖^{2−2/N} · max‖φ(γ)‖`, maxima over nodes and segment
/// midpoints at the curve's default resolution.
pub fn lemma2_bound(phi: impl Fn(&Matrix) -> Matrix, curve: &Curve, n: usize) -> f64 {
    let m = curve.spec.segments_per_piece;
    let mut max_point: f64 = 0.0;
    let mut max_phi: f64 = 0.0;
    let points = curve.nodes(m).into_iter().chain(curve.segments(m).map(|(mid, _)| mid));
    for p in points {
        max_point = max_point.max(norm(&p));
        max_phi = max_phi.max(phi(&Matrix::row_vector(&p)).frobenius_norm());
    }
    let exponent = 2.0 - 2.0 / n as f64;
    n as f64 * curve.arc_length(m) * max_point.powf(exponent) * max_phi
}
