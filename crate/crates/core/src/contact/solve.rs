//! Solving the θ-condition together with the hyperosculation cubic.
//!
//! Writing `(u, v) = λ (2t, t² − 1)` makes the θ-condition linear in `λ` on
//! one sign branch, `λ = (x²+y²+1) / (2 D(t))`, and turns the cubic into a
//! degree-6 polynomial in `t`. Every real solution corresponds to exactly
//! one `t ∈ ℝ ∪ {∞}`.

use serde::{Deserialize, Serialize};

use super::residuals::*;
use crate::jets::Jet4;
use crate::poly::Poly;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    /// Relative residual gate for the θ-condition and the cubic.
    pub root_tol: f64,
    /// `|J| <= multiplicity_rel * scale³` marks a root as multiple.
    pub multiplicity_rel: f64,
    /// Leading coefficient below this fraction of the largest is treated as zero.
    pub degenerate_rel: f64,
    /// All coefficients below this fraction of the reference scale: identically zero.
    pub zero_rel: f64,
    /// Directions sampled from the solution family when the cubic vanishes identically.
    pub family_samples: usize,
    pub newton_iters: usize,
    /// Critical points of the polynomial with `|P|` below this fraction of
    /// its term magnitude are kept as (near-)double roots.
    pub near_double_rel: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            root_tol: 1e-8,
            multiplicity_rel: 1e-8,
            degenerate_rel: 1e-10,
            zero_rel: 1e-9,
            family_samples: 24,
            newton_iters: 8,
            near_double_rel: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperRoot {
    pub u: f64,
    pub v: f64,
    /// Direction parameter, absent for the direction at infinity and for
    /// roots found without the polynomial.
    pub t: Option<f64>,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub jacobian: f64,
    pub multiple: bool,
    pub at_infinity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    /// Sorted by `|c3|` ascending.
    pub roots: Vec<HyperRoot>,
    pub degenerate_leading: bool,
    pub identically_zero: bool,
    /// Representatives of the θ-condition solution family, filled only when
    /// the cubic vanishes identically and no isolated order-4 roots exist.
    pub family: Vec<HyperRoot>,
    /// Ascending coefficients of the degree-6 polynomial.
    pub coefficients: Vec<f64>,
    /// Candidates that failed the residual gate.
    pub rejected: usize,
}

impl SolveReport {
    /// Roots followed by family representatives.
    pub fn candidates(&self) -> impl Iterator<Item = &HyperRoot> {
        self.roots.iter().chain(self.family.iter())
    }

    pub fn min_order4(&self) -> Option<&HyperRoot> {
        self.candidates()
            .min_by(|a, b| a.c3.abs().total_cmp(&b.c3.abs()))
    }
}

/// `D(t) = t²(tanθ − y) − 2tx + y + tanθ`.
fn d_poly(x: f64, y: f64, theta: f64) -> Poly {
    let tt = theta.tan();
    Poly::new(vec![y + tt, -2.0 * x, tt - y])
}

/// The degree-6 polynomial in `t` whose roots give the hyperosculating
/// directions.
pub fn hyper_polynomial(x: f64, y: f64, j: &Jet4, theta: f64) -> Poly {
    let q = x * x + y * y + 1.0;
    let t = Poly::linear(0.0, 1.0);
    let t2m1 = Poly::new(vec![-1.0, 0.0, 1.0]);
    let t1 = t2m1.pow(3).scale(j.fxxx) - (&t2m1.pow(2) * &t).scale(6.0 * j.fxxy)
        + (&t2m1 * &t.pow(2)).scale(12.0 * j.fxyy)
        - t.pow(3).scale(8.0 * j.fyyy);
    let t2 = Poly::new(vec![0.0, -2.0, 0.0, 2.0]).scale(j.fxx - j.fyy)
        + Poly::new(vec![1.0, 0.0, -6.0, 0.0, 1.0]).scale(j.fxy);
    t1.scale(q) + (&t2 * &d_poly(x, y, theta)).scale(6.0)
}

/// Order-4 condition restricted to the θ-family, cleared of denominators:
/// `H4(U,V) + H3(U,V)·2D + H2(U,V)·(2D)²` with `U = 2tq`, `V = (t²−1)q`.
fn order4_family_polynomial(x: f64, y: f64, j: &Jet4, theta: f64) -> Poly {
    let q = x * x + y * y + 1.0;
    let uu = Poly::new(vec![0.0, 2.0 * q]);
    let vv = Poly::new(vec![-q, 0.0, q]);
    let d2 = d_poly(x, y, theta).scale(2.0);
    let p = |a: &Poly, k: u32| a.pow(k);
    let h4 = (&p(&vv, 4)).scale(j.fxxxx) - (&p(&vv, 3) * &uu).scale(4.0 * j.fxxxy)
        + (&p(&vv, 2) * &p(&uu, 2)).scale(6.0 * j.fxxyy)
        - (&vv * &p(&uu, 3)).scale(4.0 * j.fxyyy)
        + p(&uu, 4).scale(j.fyyyy);
    let h3 = (&uu * &p(&vv, 2)).scale(6.0 * j.fxxx)
        + (&vv * &(&p(&vv, 2) - &p(&uu, 2).scale(2.0))).scale(6.0 * j.fxxy)
        + (&uu * &(&p(&uu, 2) - &p(&vv, 2).scale(2.0))).scale(6.0 * j.fxyy)
        + (&p(&uu, 2) * &vv).scale(6.0 * j.fyyy);
    let h2 = (&p(&uu, 2) - &p(&vv, 2)).scale(3.0 * (j.fxx - j.fyy))
        + (&uu * &vv).scale(12.0 * j.fxy);
    h4 + &h3 * &d2 + &h2 * &d2.pow(2)
}

/// `(u, v)` on the θ-branch for direction parameter `t`, or `None` where the
/// branch denominator vanishes.
pub fn direction_to_uv(t: f64, x: f64, y: f64, theta: f64) -> Option<(f64, f64)> {
    let q = x * x + y * y + 1.0;
    let tt = theta.tan();
    if t.abs() <= 1.0 {
        let d = t * t * (tt - y) - 2.0 * t * x + y + tt;
        if d == 0.0 {
            return None;
        }
        Some((t * q / d, (t * t - 1.0) * q / (2.0 * d)))
    } else {
        // s = 1/t keeps the arithmetic bounded
        let s = 1.0 / t;
        let ds = (tt - y) - 2.0 * x * s + (y + tt) * s * s;
        if ds == 0.0 {
            return None;
        }
        Some((s * q / ds, (1.0 - s * s) * q / (2.0 * ds)))
    }
}

/// The direction `(0 : 1)`, not reachable by finite `t`.
pub fn uv_at_infinity(x: f64, y: f64, theta: f64) -> Option<(f64, f64)> {
    let q = x * x + y * y + 1.0;
    let d = theta.tan() - y;
    if d == 0.0 {
        None
    } else {
        Some((0.0, q / (2.0 * d)))
    }
}

/// θ-condition and cubic, each divided by the sum of its term magnitudes.
pub fn scaled_residuals(x: f64, y: f64, j: &Jet4, theta: f64, u: f64, v: f64) -> (f64, f64) {
    let r1 = theta_residual(x, y, u, v, theta) / theta_scale(x, y, u, v, theta).max(f64::MIN_POSITIVE);
    let s2 = hyper_scale(j, u, v);
    let c2 = hyper_residual(j, u, v);
    let r2 = if s2 > 0.0 { c2 / s2 } else { c2 };
    (r1, r2)
}

/// Newton iteration on (θ-condition, cubic) in `(u, v)`. Steps that do not
/// reduce the scaled residual are refused.
pub fn newton_polish(
    x: f64,
    y: f64,
    j: &Jet4,
    theta: f64,
    mut u: f64,
    mut v: f64,
    iters: usize,
) -> (f64, f64) {
    let norm = |(a, b): (f64, f64)| a.abs().max(b.abs());
    let mut best = norm(scaled_residuals(x, y, j, theta, u, v));
    for _ in 0..iters {
        // at rounding level further steps only wander along a flat valley
        if best <= 8.0 * f64::EPSILON {
            break;
        }
        let f1 = theta_residual(x, y, u, v, theta);
        let f2 = hyper_residual(j, u, v);
        let (a, b) = theta_gradient(x, y, u, v, theta);
        let (c, d) = hyper_gradient(j, u, v);
        let det = a * d - b * c;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let du = (f1 * d - b * f2) / det;
        let dv = (a * f2 - c * f1) / det;
        let (nu, nv) = (u - du, v - dv);
        let r = norm(scaled_residuals(x, y, j, theta, nu, nv));
        if !(r < best) {
            break;
        }
        u = nu;
        v = nv;
        best = r;
        if du.abs().max(dv.abs()) <= 4.0 * f64::EPSILON * u.abs().max(v.abs()) {
            break;
        }
    }
    (u, v)
}

/// Gauss-Newton on (θ-condition, cubic, J) for roots where the 2×2 system
/// is singular. An exactly multiple root is a regular solution of the
/// deflated system, so the iteration converges where plain Newton stalls.
fn deflated_polish(x: f64, y: f64, j: &Jet4, theta: f64, u: f64, v: f64) -> (f64, f64) {
    let eval = |u: f64, v: f64| -> [f64; 3] {
        let s1 = theta_scale(x, y, u, v, theta).max(f64::MIN_POSITIVE);
        let s2 = hyper_scale(j, u, v).max(f64::MIN_POSITIVE);
        let s3 = (j.scale().powi(3) * (1.0 + u.hypot(v)).powi(3) * (1.0 + x.hypot(y)).powi(3))
            .max(f64::MIN_POSITIVE);
        [
            theta_residual(x, y, u, v, theta) / s1,
            hyper_residual(j, u, v) / s2,
            multiplicity_jacobian(x, y, j, u, v, theta) / s3,
        ]
    };
    let (mut u, mut v) = (u, v);
    for _ in 0..20 {
        let f = eval(u, v);
        let h = 1e-7 * (1.0 + u.hypot(v));
        let fu = eval(u + h, v);
        let fv = eval(u, v + h);
        let cu: Vec<f64> = (0..3).map(|k| (fu[k] - f[k]) / h).collect();
        let cv: Vec<f64> = (0..3).map(|k| (fv[k] - f[k]) / h).collect();
        // normal equations of the 3×2 least-squares step
        let (a11, a12, a22) = (
            cu.iter().map(|c| c * c).sum::<f64>(),
            cu.iter().zip(&cv).map(|(a, b)| a * b).sum::<f64>(),
            cv.iter().map(|c| c * c).sum::<f64>(),
        );
        let b1: f64 = cu.iter().zip(&f).map(|(a, b)| a * b).sum();
        let b2: f64 = cv.iter().zip(&f).map(|(a, b)| a * b).sum();
        let det = a11 * a22 - a12 * a12;
        if !(det.abs() > 0.0) {
            break;
        }
        let du = (b1 * a22 - b2 * a12) / det;
        let dv = (a11 * b2 - a12 * b1) / det;
        u -= du;
        v -= dv;
        if du.hypot(dv) <= 1e-15 * (1.0 + u.hypot(v)) {
            break;
        }
    }
    (u, v)
}

fn polish_root(x: f64, y: f64, j: &Jet4, theta: f64, u: f64, v: f64, cfg: &SolveConfig) -> (f64, f64) {
    let (pu, pv) = newton_polish(x, y, j, theta, u, v, cfg.newton_iters);
    let (r1, r2) = scaled_residuals(x, y, j, theta, pu, pv);
    if r1.abs().max(r2.abs()) <= 1e-13 {
        return (pu, pv);
    }
    let jac = multiplicity_jacobian(x, y, j, pu, pv, theta);
    if jac.abs() > 1e-6 * j.scale().powi(3) * (1.0 + pu.hypot(pv)).powi(3) {
        return (pu, pv);
    }
    let (du, dv) = deflated_polish(x, y, j, theta, pu, pv);
    let worst = |u: f64, v: f64| {
        let (a, b) = scaled_residuals(x, y, j, theta, u, v);
        a.abs().max(b.abs())
    };
    if du.is_finite() && dv.is_finite() && worst(du, dv) <= worst(pu, pv).max(1e-14) {
        (du, dv)
    } else {
        (pu, pv)
    }
}

pub(crate) fn make_root(
    x: f64,
    y: f64,
    j: &Jet4,
    theta: f64,
    u: f64,
    v: f64,
    t: Option<f64>,
    at_infinity: bool,
    cfg: &SolveConfig,
) -> HyperRoot {
    let jac = multiplicity_jacobian(x, y, j, u, v, theta);
    let scale = j.scale();
    HyperRoot {
        u,
        v,
        t,
        c1: theta_residual(x, y, u, v, theta),
        c2: hyper_residual(j, u, v),
        c3: order4_residual(j, u, v),
        jacobian: jac,
        multiple: jac.abs() <= cfg.multiplicity_rel * scale.powi(3),
        at_infinity,
    }
}

fn passes_gate(x: f64, y: f64, j: &Jet4, theta: f64, u: f64, v: f64, tol: f64) -> bool {
    let (r1, r2) = scaled_residuals(x, y, j, theta, u, v);
    u.is_finite() && v.is_finite() && (u != 0.0 || v != 0.0) && r1.abs() <= tol && r2.abs() <= tol
}

fn push_unique(roots: &mut Vec<HyperRoot>, r: HyperRoot) {
    let dup = roots.iter().any(|o| {
        let d = ((o.u - r.u).powi(2) + (o.v - r.v).powi(2)).sqrt();
        d <= 1e-7 * (1.0 + r.u.hypot(r.v))
    });
    if !dup {
        roots.push(r);
    }
}

/// Seed on the opposite sign branch for a direction whose θ-branch
/// denominator vanishes.
fn opposite_branch_seed(t: f64, x: f64, y: f64, theta: f64) -> Option<(f64, f64)> {
    let q = x * x + y * y + 1.0;
    let tt = theta.tan();
    let d = -tt * (t * t + 1.0) - 2.0 * x * t - y * t * t + y;
    if d == 0.0 {
        return None;
    }
    let lam = q / (2.0 * d);
    Some((2.0 * t * lam, (t * t - 1.0) * lam))
}

pub fn solve_hyperosculating(x: f64, y: f64, j: &Jet4, theta: f64) -> SolveReport {
    solve_hyperosculating_with(x, y, j, theta, &SolveConfig::default())
}

pub fn solve_hyperosculating_with(
    x: f64,
    y: f64,
    j: &Jet4,
    theta: f64,
    cfg: &SolveConfig,
) -> SolveReport {
    let p = hyper_polynomial(x, y, j, theta);
    let coefficients: Vec<f64> = (0..=6).map(|k| p.coeff(k)).collect();
    let q = x * x + y * y + 1.0;
    let tt = theta.tan();
    let third = [j.fxxx, j.fxxy, j.fxyy, j.fyyy]
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let second = [j.fxx, j.fxy, j.fyy]
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let reference = q * third + 6.0 * second * (1.0 + tt.abs() + x.abs() + y.abs());
    let pmax = p.max_abs_coeff();
    let identically_zero = pmax <= cfg.zero_rel * reference;
    let lead = p.coeff(6);
    let degenerate_leading = !identically_zero && lead.abs() <= cfg.degenerate_rel * pmax;

    let mut roots = Vec::new();
    let mut family = Vec::new();
    let mut rejected = 0;

    let consider = |u: f64, v: f64, t: Option<f64>, inf: bool, roots: &mut Vec<HyperRoot>| {
        let (pu, pv) = polish_root(x, y, j, theta, u, v, cfg);
        if passes_gate(x, y, j, theta, pu, pv, cfg.root_tol) {
            push_unique(roots, make_root(x, y, j, theta, pu, pv, t, inf, cfg));
            true
        } else {
            false
        }
    };

    if identically_zero {
        let p4 = order4_family_polynomial(x, y, j, theta);
        let scale4 = reference.max(
            [j.fxxxx, j.fxxxy, j.fxxyy, j.fxyyy, j.fyyyy]
                .iter()
                .fold(0.0_f64, |m, v| m.max(v.abs())),
        ) * q.powi(4);
        if p4.max_abs_coeff() > cfg.zero_rel * scale4 {
            for t in p4.real_roots() {
                if let Some((u, v)) = direction_to_uv(t, x, y, theta) {
                    push_unique(&mut roots, make_root(x, y, j, theta, u, v, Some(t), false, cfg));
                }
            }
            if p4.trimmed(cfg.degenerate_rel).degree() < Some(8) {
                if let Some((u, v)) = uv_at_infinity(x, y, theta) {
                    push_unique(&mut roots, make_root(x, y, j, theta, u, v, None, true, cfg));
                }
            }
        }
        // no real order-4 direction: report the family with its residuals
        if roots.is_empty() {
            let n = cfg.family_samples.max(1);
            for k in 0..n {
                // t = tan(φ/2) sweeps every direction once
                let phi = -std::f64::consts::PI + std::f64::consts::TAU * (k as f64 + 0.5) / n as f64;
                let t = (phi / 2.0).tan();
                if let Some((u, v)) = direction_to_uv(t, x, y, theta) {
                    family.push(make_root(x, y, j, theta, u, v, Some(t), false, cfg));
                }
            }
        }
    } else {
        let reduced = if degenerate_leading {
            Poly::new(coefficients[..6].to_vec())
        } else {
            p.clone()
        };
        let mut ts = reduced.real_roots();
        // a double root perturbed by rounding becomes a complex pair or two
        // close real roots; either way the critical point between them, where
        // |P| is at rounding level, locates it far more accurately
        for t in reduced.derivative().real_roots() {
            let mag: f64 = reduced
                .coeffs()
                .iter()
                .enumerate()
                .map(|(k, c)| (c * t.powi(k as i32)).abs())
                .sum();
            if reduced.eval(t).abs() > cfg.near_double_rel * mag {
                continue;
            }
            // the real roots adjacent to t, if they straddle it, are the split pair
            let below = ts.iter().copied().filter(|r| *r <= t).reduce(f64::max);
            let above = ts.iter().copied().filter(|r| *r >= t).reduce(f64::min);
            let close = |r: f64| (r - t).abs() <= 1e-6 * (1.0 + t.abs());
            match (below, above) {
                (Some(lo), Some(hi)) => {
                    ts.retain(|r| *r != lo && *r != hi);
                    ts.push(t);
                }
                (lo, hi) if !lo.is_some_and(close) && !hi.is_some_and(close) => ts.push(t),
                _ => {}
            }
        }
        for t in ts {
            let accepted = match direction_to_uv(t, x, y, theta) {
                Some((u, v)) => consider(u, v, Some(t), false, &mut roots),
                None => false,
            };
            if !accepted {
                let ok = opposite_branch_seed(t, x, y, theta)
                    .map(|(u, v)| consider(u, v, Some(t), false, &mut roots))
                    .unwrap_or(false);
                if !ok {
                    rejected += 1;
                }
            }
        }
        if let Some((u, v)) = uv_at_infinity(x, y, theta) {
            if passes_gate(x, y, j, theta, u, v, cfg.root_tol) || degenerate_leading {
                if !consider(u, v, None, true, &mut roots) {
                    rejected += 1;
                }
            }
        }
    }
    roots.sort_by(|a, b| a.c3.abs().total_cmp(&b.c3.abs()));
    SolveReport {
        x,
        y,
        theta,
        roots,
        degenerate_leading,
        identically_zero,
        family,
        coefficients,
        rejected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::{jet_of_expression, parse_expression};
    use proptest::prelude::*;

    const S3: f64 = 1.732_050_807_568_877_2;

    fn jet(e: &str, x: f64, y: f64) -> Jet4 {
        jet_of_expression(&parse_expression(e).unwrap(), x, y).unwrap()
    }

    #[test]
    fn generator_root_is_found() {
        let th = 30f64.to_radians();
        let rep = solve_hyperosculating(S3, 0.0, &jet("y^2/(x^2+y^2)", S3, 0.0), th);
        assert!(!rep.identically_zero);
        assert!(rep.roots.len() <= 6 && !rep.roots.is_empty());
        let best = &rep.roots[0];
        assert!((best.u + S3 / 2.0).abs() < 1e-12 && best.v.abs() < 1e-12, "{rep:#?}");
        assert!(best.c3.abs() < 1e-9);
        assert!(best.multiple);
    }

    #[test]
    fn zero_jet_is_identically_zero() {
        let rep = solve_hyperosculating(0.2, 0.3, &Jet4::default(), 0.5);
        assert!(rep.identically_zero);
        assert!(rep.roots.is_empty());
        assert_eq!(rep.family.len(), 24);
        for r in &rep.family {
            assert!(r.c1.abs() < 1e-12 * (1.0 + r.u.hypot(r.v).powi(2)));
        }
    }

    #[test]
    fn sphere_jet_is_identically_zero_with_small_order4() {
        let j = jet("0.5*(x^2+y^2)+0.5", 0.4, -0.7);
        let rep = solve_hyperosculating(0.4, -0.7, &j, 0.3);
        assert!(rep.identically_zero);
        assert!(rep.min_order4().unwrap().c3.abs() < 1e-12);
    }

    #[test]
    fn identically_zero_cubic_with_isolated_order4_roots() {
        // third partials vanish and the Hessian is isotropic, but fourth partials do not
        let mut j = jet("0.5*(x^2+y^2)", 0.3, 0.2);
        j.fxxxx = 1.0;
        j.fyyyy = -2.0;
        let rep = solve_hyperosculating(0.3, 0.2, &j, 0.6);
        assert!(rep.identically_zero);
        assert!(rep.family.is_empty());
        assert!(!rep.roots.is_empty());
        for r in &rep.roots {
            assert!(r.c3.abs() < 1e-8 * (1.0 + r.u.hypot(r.v).powi(4)), "{r:?}");
            assert!(r.c1.abs() < 1e-9 * (1.0 + r.u.hypot(r.v).powi(2)));
        }
    }

    #[test]
    fn direction_at_infinity_is_used_when_leading_term_vanishes() {
        // fxxx = 0 and fxy = 0 kill the t^6 coefficient
        let j = Jet4 {
            fxx: 1.0,
            fyy: -0.5,
            fxxy: 0.7,
            fxyy: -0.4,
            fyyy: 1.3,
            ..Default::default()
        };
        let th = 0.5;
        let rep = solve_hyperosculating(0.2, 0.1, &j, th);
        assert!(rep.degenerate_leading);
        let inf: Vec<_> = rep.roots.iter().filter(|r| r.at_infinity).collect();
        assert_eq!(inf.len(), 1, "{rep:#?}");
        assert!(inf[0].u.abs() < 1e-12);
    }

    #[test]
    fn back_substitution_satisfies_theta_condition() {
        for &t in &[-30.0, -1.5, -1.0, -0.2, 0.0, 0.7, 1.0, 4.0, 1e6] {
            let (u, v) = direction_to_uv(t, 0.3, -0.8, 0.4).unwrap();
            let r = theta_residual(0.3, -0.8, u, v, 0.4);
            assert!(r.abs() < 1e-12 * theta_scale(0.3, -0.8, u, v, 0.4), "t={t}: {r}");
        }
    }

    #[test]
    fn saddle_roots_lie_on_diagonals() {
        let j = jet("x*y", 0.5, 0.25);
        let rep = solve_hyperosculating(0.5, 0.25, &j, 0.7);
        assert!(!rep.roots.is_empty());
        for r in &rep.roots {
            assert!((r.u.abs() - r.v.abs()).abs() < 1e-9 * (1.0 + r.u.abs()));
        }
    }

    proptest! {
        #[test]
        fn reported_roots_pass_residual_gate(p in proptest::collection::vec(-3.0f64..3.0, 12),
                x in -2.0f64..2.0, y in -2.0f64..2.0, th in 0.1f64..1.4) {
            let mut a = [0.0; 15];
            a[3..].copy_from_slice(&p);
            let j = Jet4::from_partials(x, y, a);
            let rep = solve_hyperosculating(x, y, &j, th);
            prop_assert!(rep.roots.len() <= 7);
            for r in &rep.roots {
                let s1 = theta_scale(x, y, r.u, r.v, th);
                let s2 = hyper_scale(&j, r.u, r.v);
                prop_assert!(r.c1.abs() <= 1e-8 * s1);
                prop_assert!(r.c2.abs() <= 1e-8 * s2.max(1e-300) || r.c2 == 0.0);
            }
            for w in rep.roots.windows(2) {
                prop_assert!(w[0].c3.abs() <= w[1].c3.abs());
            }
        }

        #[test]
        fn rotation_equivariance_on_generator_family(alpha in -3.1f64..3.1, rho2 in 0.6f64..4.5, phi in -3.1f64..3.1) {
            // the generator surface rotated in design space is the isotropic graph rotated in (x, y)
            let th = 30f64.to_radians();
            let (x, y) = (rho2.sqrt() * phi.cos(), rho2.sqrt() * phi.sin());
            let j = jet("y^2/(x^2+y^2)", x, y);
            let jr = j.rotated(alpha);
            let a = solve_hyperosculating(x, y, &j, th);
            let b = solve_hyperosculating(jr.x, jr.y, &jr, th);
            prop_assert_eq!(a.roots.len(), b.roots.len());
            let (s, c) = alpha.sin_cos();
            for r in &a.roots {
                let (ru, rv) = (c * r.u - s * r.v, s * r.u + c * r.v);
                let m = b.roots.iter().min_by(|p, q| {
                    let dp = (p.u - ru).hypot(p.v - rv);
                    let dq = (q.u - ru).hypot(q.v - rv);
                    dp.total_cmp(&dq)
                }).unwrap();
                prop_assert!((m.u - ru).hypot(m.v - rv) < 1e-7 * (1.0 + ru.hypot(rv)));
                prop_assert!((m.c3.abs() - r.c3.abs()).abs() < 1e-7 * (1.0 + r.c3.abs()));
                prop_assert!((m.jacobian.abs() - r.jacobian.abs()).abs() < 1e-6 * (1.0 + r.jacobian.abs()));
            }
        }
    }
}
