//! Characteristic constants (τ, ρ, γ) of a degree set and a numerical check
//! of the implicit-function schema behind the square-root singularity.

use serde::Serialize;
use thiserror::Error;

use crate::tree_gf::DegreeSet;

#[derive(Debug, Error, PartialEq)]
pub enum CharError {
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("bisection residual {residual:e} exceeds tolerance {tol:e}")]
    NoConvergence { residual: f64, tol: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CharConstants {
    pub tau: f64,
    pub rho: f64,
    pub gamma: f64,
    pub period: usize,
    pub tolerance: f64,
    /// `Σ(δ−1)τ^{δ−2} − 1` at the returned τ.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SingularExpansion {
    pub alpha0: f64,
    pub alpha1: f64,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SchemaReport {
    pub r: f64,
    pub s: f64,
    pub g_residual: f64,
    pub gw_residual: f64,
    pub gt: f64,
    pub gt_expected: f64,
    pub alpha1_schema: f64,
    pub alpha1_expected: f64,
    pub ok: bool,
}

fn char_fn(delta: &DegreeSet, tau: f64) -> f64 {
    delta.degrees().iter().map(|&d| (d - 1) as f64 * tau.powi(d as i32 - 2)).sum::<f64>() - 1.0
}

/// Bisection on (0, 1) for `Σ(δ−1)τ^{δ−2} = 1`, then ρ and γ in closed form.
pub fn solve_characteristic(delta: &DegreeSet, tol: f64) -> Result<CharConstants, CharError> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(CharError::BadTolerance(tol));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if char_fn(delta, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = if char_fn(delta, lo).abs() <= char_fn(delta, hi).abs() { lo } else { hi };
    let residual = char_fn(delta, tau);
    if residual.abs() > tol {
        return Err(CharError::NoConvergence { residual, tol });
    }
    let ds = delta.degrees();
    let rho = tau - ds.iter().map(|&d| tau.powi(d as i32 - 1)).sum::<f64>();
    let second: f64 = ds
        .iter()
        .map(|&d| ((d - 1) * (d - 2)) as f64 * tau.powi(d as i32 - 3))
        .sum();
    let gamma = (2.0 * rho / second).sqrt();
    Ok(CharConstants { tau, rho, gamma, period: delta.period(), tolerance: tol, residual })
}

pub fn singular_expansion(c: &CharConstants) -> SingularExpansion {
    SingularExpansion {
        alpha0: c.tau / c.rho,
        alpha1: -c.gamma / (c.rho * (c.period as f64).sqrt()),
        radius: c.rho.powi(c.period as i32),
    }
}

/// Evaluates `G(t, w) = Σ_{k∈K} t^k (w+1)^{kp+1}` and its partials at
/// `r = ρ^p`, `s = τ/ρ − 1`.
pub fn verify_schema(delta: &DegreeSet, c: &CharConstants, tol: f64) -> SchemaReport {
    let p = delta.period() as i32;
    let r = c.rho.powi(p);
    let s = c.tau / c.rho - 1.0;
    let (mut g, mut gw, mut gww, mut gt) = (0.0, 0.0, 0.0, 0.0);
    for &k in delta.shifted() {
        let k = k as i32;
        let e = k * p + 1;
        let tk = r.powi(k);
        g += tk * (s + 1.0).powi(e);
        gw += tk * e as f64 * (s + 1.0).powi(e - 1);
        gww += tk * (e * (e - 1)) as f64 * (s + 1.0).powi(e - 2);
        gt += k as f64 * r.powi(k - 1) * (s + 1.0).powi(e);
    }
    let gt_expected = 1.0 / (r * p as f64);
    let alpha1_schema = -(2.0 * r * gt / gww).sqrt();
    let alpha1_expected = -c.gamma / (c.rho * (p as f64).sqrt());
    let g_residual = (g - s).abs();
    let gw_residual = (gw - 1.0).abs();
    let ok = g_residual <= tol
        && gw_residual <= tol
        && (gt - gt_expected).abs() <= tol * gt_expected.max(1.0)
        && (alpha1_schema - alpha1_expected).abs() <= tol * alpha1_expected.abs().max(1.0);
    SchemaReport { r, s, g_residual, gw_residual, gt, gt_expected, alpha1_schema, alpha1_expected, ok }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_constants() {
        let d = DegreeSet::new(&[3]).unwrap();
        let c = solve_characteristic(&d, 1e-14).unwrap();
        assert!((c.tau - 0.5).abs() < 1e-14);
        assert!((c.rho - 0.25).abs() < 1e-14);
        assert!((c.gamma - 0.5).abs() < 1e-14);
        let rep = verify_schema(&d, &c, 1e-12);
        assert!(rep.ok, "{rep:?}");
        assert!((rep.r - 0.25).abs() < 1e-14 && (rep.s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_degree_closed_forms() {
        for p in 1..=4i32 {
            let d = DegreeSet::new(&[p as u32 + 2]).unwrap();
            let c = solve_characteristic(&d, 1e-14).unwrap();
            let pf = p as f64;
            let tau = (pf + 1.0).powf(-1.0 / pf);
            let rho = (pf.powi(p) / (pf + 1.0).powi(p + 1)).powf(1.0 / pf);
            let gamma = (2.0 * (pf + 1.0).powf(-(pf + 2.0) / pf)).sqrt();
            assert!((c.tau - tau).abs() < 1e-13, "p={p}");
            assert!((c.rho - rho).abs() < 1e-13, "p={p}");
            assert!((c.gamma - gamma).abs() < 1e-13, "p={p}");
            assert!(verify_schema(&d, &c, 1e-10).ok);
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        let d = DegreeSet::new(&[3]).unwrap();
        assert_eq!(solve_characteristic(&d, 0.0), Err(CharError::BadTolerance(0.0)));
    }

    #[test]
    fn expansion_fields() {
        let d = DegreeSet::new(&[4]).unwrap();
        let c = solve_characteristic(&d, 1e-14).unwrap();
        let e = singular_expansion(&c);
        assert!((e.alpha0 - c.tau / c.rho).abs() < 1e-15);
        assert!((e.radius - c.rho * c.rho).abs() < 1e-15);
    }
}
