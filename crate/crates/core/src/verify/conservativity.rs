//! Loop-integral evidence that the end-to-end field is not a gradient field.

use super::curve::{build_curve, field_f, lemma2_bound, lemma3_reference, line_integral, transform_field, CurveSpec};
use crate::error::{Error, Result};
use crate::matcore::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    ConservativeConsistent,
    NonConservative,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::ConservativeConsistent => "conservative-consistent",
            Verdict::NonConservative => "non-conservative",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConservativityReport {
    pub depth: usize,
    pub r: f64,
    pub big_r: f64,
    pub segments_per_piece: usize,
    /// `∮ F` over `Γ_{r,R}`.
    pub loop_integral: f64,
    /// `|I(2M) − I(M)|` for `loop_integral`.
    pub refinement: f64,
    /// `c · lemma3_reference(N, r, R)` with `c = ‖∇L¹(0)‖`.
    pub lemma3_constant_part: f64,
    /// Upper bound on `|∮ F_ξ|`, `ξ = ∇L¹ − ∇L¹(0)`.
    pub residual_bound: f64,
    /// `lemma3_constant_part − residual_bound`.
    pub lower_bound: f64,
    pub raw_gradient_loop_integral: f64,
    pub verdict: Verdict,
}

impl ConservativityReport {
    fn verdict_for(loop_integral: f64, raw: f64) -> Verdict {
        if loop_integral.abs() > (10.0 * raw.abs()).max(1e-8) {
            Verdict::NonConservative
        } else {
            Verdict::ConservativeConsistent
        }
    }
}

/// `r` with `r^{3−2/N} = 0.5·R^{3−2/N}`.
pub fn companion_radius(n: usize, big_r: f64) -> f64 {
    big_r * 0.5f64.powf(1.0 / (3.0 - 2.0 / n as f64))
}

/// Builds `Γ_{r,R}` along the normalized gradient at the origin, integrates
/// `F` and the raw gradient around it, and forms the decomposition lower
/// bound.
pub fn conservativity_report(
    grad_fn: impl Fn(&Matrix) -> Matrix,
    dim: usize,
    n: usize,
    r: f64,
    big_r: f64,
    m: usize,
) -> Result<ConservativityReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let g0 = grad_fn(&Matrix::zeros(1, dim));
    let c = g0.frobenius_norm();
    if c == 0.0 {
        return Err(Error::InvalidArgument("gradient vanishes at the origin".into()));
    }
    let e: Vec<f64> = g0.as_slice().iter().map(|v| v / c).collect();
    let curve = build_curve(&CurveSpec::new(e, r, big_r, m)?)?;

    let loop_f = line_integral(|w| field_f(w, &grad_fn, n), &curve, m)?;
    let raw = line_integral(&grad_fn, &curve, m)?;
    let xi = |w: &Matrix| &grad_fn(w) - &g0;
    let lemma3_constant_part = c * lemma3_reference(n, r, big_r);
    let residual_bound = lemma2_bound(xi, &curve, n);

    Ok(ConservativityReport {
        depth: n,
        r,
        big_r,
        segments_per_piece: m,
        loop_integral: loop_f.value,
        refinement: loop_f.refinement,
        lemma3_constant_part,
        residual_bound,
        lower_bound: lemma3_constant_part - residual_bound,
        raw_gradient_loop_integral: raw.value,
        verdict: ConservativityReport::verdict_for(loop_f.value, raw.value),
    })
}

/// Halves `R` (with `r` tied to it) until the lower bound is positive, at
/// most `max_halvings` times. Returns the last report either way.
pub fn shrink_until_positive(
    grad_fn: impl Fn(&Matrix) -> Matrix,
    dim: usize,
    n: usize,
    start_r: f64,
    m: usize,
    max_halvings: usize,
) -> Result<ConservativityReport> {
    let mut big_r = start_r;
    let mut report = conservativity_report(&grad_fn, dim, n, companion_radius(n, big_r), big_r, m)?;
    for _ in 0..max_halvings {
        if report.lower_bound > 0.0 {
            break;
        }
        big_r /= 2.0;
        report = conservativity_report(&grad_fn, dim, n, companion_radius(n, big_r), big_r, m)?;
    }
    Ok(report)
}

/// `max_p ‖J_F(p) − J_F(p)ᵀ‖_F` with a central-difference Jacobian of step `h`.
pub fn jacobian_asymmetry(grad_fn: impl Fn(&Matrix) -> Matrix, n: usize, points: &[Matrix], h: f64) -> f64 {
    let field = |w: &Matrix| transform_field(w, &grad_fn(w), n);
    let mut worst: f64 = 0.0;
    for p in points {
        let d = p.cols();
        let mut jac = Matrix::zeros(d, d);
        for b in 0..d {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus[(0, b)] += h;
            minus[(0, b)] -= h;
            let fp = field(&plus);
            let fm = field(&minus);
            for a in 0..d {
                jac[(a, b)] = (fp[(0, a)] - fm[(0, a)]) / (2.0 * h);
            }
        }
        worst = worst.max((&jac - &jac.transpose()).frobenius_norm());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_linear(w: &Matrix) -> Matrix {
        let mut g = w.clone();
        g[(0, 0)] += 1.0;
        g
    }

    #[test]
    fn verdict_rule() {
        assert_eq!(ConservativityReport::verdict_for(1e-9, 0.0), Verdict::ConservativeConsistent);
        assert_eq!(ConservativityReport::verdict_for(2e-8, 0.0), Verdict::NonConservative);
        assert_eq!(ConservativityReport::verdict_for(1.0, 0.2), Verdict::ConservativeConsistent);
        assert_eq!(ConservativityReport::verdict_for(-3.0, 0.2), Verdict::NonConservative);
    }

    #[test]
    fn rejects_flat_origin() {
        assert!(conservativity_report(|w| w.clone(), 3, 3, 0.05, 0.1, 64).is_err());
    }

    #[test]
    fn depth_one_is_conservative() {
        let rep = conservativity_report(quad_linear, 3, 1, 0.05, 0.1, 256).unwrap();
        assert_eq!(rep.verdict, Verdict::ConservativeConsistent);
        assert!(rep.loop_integral.abs() < 1e-12);
        assert_eq!(rep.lemma3_constant_part, 0.0);
    }

    #[test]
    fn companion_radius_halves_power() {
        let r = companion_radius(3, 0.1);
        let a = 7.0 / 3.0;
        assert!((r.powf(a) - 0.5 * 0.1f64.powf(a)).abs() < 1e-18);
    }

    #[test]
    fn shrinking_reaches_positive_bound() {
        let rep = shrink_until_positive(quad_linear, 3, 3, 0.1, 256, 10).unwrap();
        assert!(rep.lower_bound > 0.0);
        assert!(rep.big_r < 0.02);
    }
}
