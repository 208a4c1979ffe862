//! Brute-force reference solver: scan directions, solve the θ-condition for
//! the scale on each sign branch, and bracket sign changes of the cubic.

use super::residuals::hyper_residual;
use super::solve::{make_root, SolveConfig, SolveReport};
use crate::jets::Jet4;

/// Scale along direction `phi` on branch `sign`, if positive.
fn branch_scale(x: f64, y: f64, theta: f64, phi: f64, sign: f64) -> Option<f64> {
    let q = x * x + y * y + 1.0;
    let den = sign * 2.0 * theta.tan() - 2.0 * (x * phi.cos() + y * phi.sin());
    let s = q / den;
    (den > 0.0 && s.is_finite()).then_some(s)
}

fn cubic_on_branch(x: f64, y: f64, j: &Jet4, theta: f64, phi: f64, sign: f64) -> Option<f64> {
    let s = branch_scale(x, y, theta, phi, sign)?;
    Some(hyper_residual(j, s * phi.cos(), s * phi.sin()))
}

/// Scan angles: a uniform grid plus geometric refinements toward the poles
/// of the scale, where roots far out in `(u, v)` crowd together.
fn scan_angles(x: f64, y: f64, theta: f64, sign: f64, n: usize) -> Vec<f64> {
    use std::f64::consts::{PI, TAU};
    let step = TAU / n as f64;
    let mut out: Vec<f64> = (0..=n).map(|k| -PI + k as f64 * step).collect();
    let rho = x.hypot(y);
    let c = sign * theta.tan() / rho;
    if rho > 0.0 && c.abs() < 1.0 {
        let alpha = y.atan2(x);
        for pole in [alpha + c.acos(), alpha - c.acos()] {
            let pole = (pole + PI).rem_euclid(TAU) - PI;
            for m in 0..=120 {
                let d = step * 10f64.powf(-m as f64 / 10.0);
                out.extend([pole - d, pole + d].into_iter().filter(|p| (-PI..=PI).contains(p)));
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

pub fn oracle_solve(x: f64, y: f64, j: &Jet4, theta: f64, n_angles: usize) -> SolveReport {
    let n = n_angles.max(360);
    let cfg = SolveConfig::default();
    let mut roots = Vec::new();
    for sign in [1.0, -1.0] {
        let angles = scan_angles(x, y, theta, sign, n);
        for w in angles.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (Some(ga), Some(gb)) = (
                cubic_on_branch(x, y, j, theta, a, sign),
                cubic_on_branch(x, y, j, theta, b, sign),
            ) else {
                continue;
            };
            let phi = if ga == 0.0 {
                a
            } else if gb == 0.0 || (ga > 0.0) == (gb > 0.0) {
                // a zero at b is picked up as the next interval's left end
                continue;
            } else {
                bisect(x, y, j, theta, sign, a, b, ga)
            };
            let s = branch_scale(x, y, theta, phi, sign).unwrap();
            roots.push(make_root(x, y, j, theta, s * phi.cos(), s * phi.sin(), None, false, &cfg));
        }
    }
    roots.sort_by(|a, b| a.c3.abs().total_cmp(&b.c3.abs()));
    SolveReport {
        x,
        y,
        theta,
        roots,
        degenerate_leading: false,
        identically_zero: false,
        family: Vec::new(),
        coefficients: Vec::new(),
        rejected: 0,
    }
}

#[allow(clippy::too_many_arguments)]
fn bisect(x: f64, y: f64, j: &Jet4, theta: f64, sign: f64, mut a: f64, mut b: f64, mut ga: f64) -> f64 {
    while b - a > 1e-12 {
        let m = 0.5 * (a + b);
        let Some(gm) = cubic_on_branch(x, y, j, theta, m, sign) else {
            break;
        };
        if gm == 0.0 {
            return m;
        }
        if (gm > 0.0) == (ga > 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::residuals::theta_residual;
    use crate::jets::{jet_of_expression, parse_expression};

    const S3: f64 = 1.732_050_807_568_877_2;

    #[test]
    fn generator_root_is_found() {
        let th = 30f64.to_radians();
        let j = jet_of_expression(&parse_expression("y^2/(x^2+y^2)").unwrap(), S3, 0.0).unwrap();
        let rep = oracle_solve(S3, 0.0, &j, th, 3600);
        let best = &rep.roots[0];
        assert!((best.u + S3 / 2.0).abs() < 1e-9 && best.v.abs() < 1e-9, "{rep:#?}");
        assert!(rep.roots.len() <= 6);
    }

    #[test]
    fn refinement_never_loses_roots() {
        let j = Jet4 {
            fxx: 0.3,
            fxy: -1.1,
            fyy: 0.8,
            fxxx: 1.7,
            fxxy: -0.2,
            fxyy: 0.9,
            fyyy: -1.4,
            ..Default::default()
        };
        let coarse = oracle_solve(0.4, -0.3, &j, 0.6, 360);
        let fine = oracle_solve(0.4, -0.3, &j, 0.6, 720);
        for r in &coarse.roots {
            assert!(fine
                .roots
                .iter()
                .any(|f| (f.u - r.u).hypot(f.v - r.v) < 1e-8 * (1.0 + r.u.hypot(r.v))));
            assert!(theta_residual(0.4, -0.3, r.u, r.v, 0.6).abs() < 1e-8 * (1.0 + r.u.hypot(r.v).powi(2)));
        }
    }

    #[test]
    fn pole_of_the_branch_is_skipped() {
        // at the origin the positive branch never has a pole, the negative one never exists
        assert!(branch_scale(0.0, 0.0, 0.5, 1.0, -1.0).is_none());
        // a direction where the denominator vanishes exactly is rejected
        let th = std::f64::consts::FRAC_PI_4;
        assert!(branch_scale(1.0, 0.0, th, 0.0, 1.0).is_none());
        let j = Jet4 { fxxx: 1.0, fxy: 0.5, fyyy: -0.3, ..Default::default() };
        let rep = oracle_solve(1.0, 0.0, &j, th, 360);
        assert!(rep.roots.iter().all(|r| r.u.is_finite() && r.v.is_finite()));
    }
}
