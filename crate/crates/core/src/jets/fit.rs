//! Weighted least-squares quartic fits to scattered isotropic samples.
//!
//! Each neighbor contributes a value equation and, since samples carry exact
//! first derivatives, two gradient (Hermite) equations. Coordinates are
//! scaled by the k-th neighbor distance so the design matrix stays balanced.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::taylor::{Taylor2, EXPONENTS, NCOEF};
use super::{Jet4, JetError, JetSource};
use crate::isomap::IsotropicSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScatterFitConfig {
    /// Neighbors used per query.
    pub k: usize,
    /// Gaussian bandwidth as a multiple of the k-th neighbor distance.
    pub bandwidth_factor: f64,
    pub condition_cap: f64,
    /// Include the gradient equations.
    pub hermite: bool,
}

impl Default for ScatterFitConfig {
    fn default() -> Self {
        ScatterFitConfig {
            k: 36,
            bandwidth_factor: 1.0,
            condition_cap: 1e8,
            hermite: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub condition_number: f64,
    pub residual_rms: f64,
    pub neighbors: usize,
    /// Distance to the k-th neighbor.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least {need} samples, have {have}")]
    TooFewSamples { have: usize, need: usize },
    #[error("design matrix condition number {condition:e} exceeds cap {cap:e}")]
    IllConditioned { condition: f64, cap: f64 },
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
}

/// Fits a quartic centered at `query` and returns its 4-jet.
pub fn fit_jet_scattered(
    samples: &[IsotropicSample],
    query: (f64, f64),
    cfg: &ScatterFitConfig,
) -> Result<(Jet4, FitDiagnostics), FitError> {
    if cfg.k < NCOEF {
        return Err(FitError::InvalidConfig(format!(
            "k = {} is below the {NCOEF} quartic coefficients",
            cfg.k
        )));
    }
    if !(cfg.bandwidth_factor > 0.0) {
        return Err(FitError::InvalidConfig("bandwidth factor must be positive".into()));
    }
    if samples.len() < cfg.k {
        return Err(FitError::TooFewSamples {
            have: samples.len(),
            need: cfg.k,
        });
    }
    let (qx, qy) = query;
    let mut order: Vec<(f64, usize)> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| ((s.x - qx).powi(2) + (s.y - qy).powi(2), i))
        .collect();
    if order.len() > cfg.k {
        order.select_nth_unstable_by(cfg.k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order.truncate(cfg.k);
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let radius = order.last().map(|o| o.0.sqrt()).unwrap_or(0.0);
    if !(radius > 0.0) {
        return Err(FitError::IllConditioned {
            condition: f64::INFINITY,
            cap: cfg.condition_cap,
        });
    }
    let bw = cfg.bandwidth_factor * radius;
    let rows_per = if cfg.hermite { 3 } else { 1 };
    let m = order.len() * rows_per;
    let mut a = DMatrix::<f64>::zeros(m, NCOEF);
    let mut b = DVector::<f64>::zeros(m);
    let mut row = 0;
    for &(d2, i) in &order {
        let s = &samples[i];
        let w = (-d2 / (bw * bw)).exp().sqrt();
        let xi = (s.x - qx) / radius;
        let eta = (s.y - qy) / radius;
        for (k, &(p, q)) in EXPONENTS.iter().enumerate() {
            a[(row, k)] = w * xi.powi(p as i32) * eta.powi(q as i32);
        }
        b[row] = w * s.f;
        row += 1;
        if cfg.hermite {
            for (k, &(p, q)) in EXPONENTS.iter().enumerate() {
                if p > 0 {
                    a[(row, k)] = w * p as f64 * xi.powi(p as i32 - 1) * eta.powi(q as i32);
                }
                if q > 0 {
                    a[(row + 1, k)] = w * q as f64 * xi.powi(p as i32) * eta.powi(q as i32 - 1);
                }
            }
            b[row] = w * radius * s.fx;
            b[row + 1] = w * radius * s.fy;
            row += 2;
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= cfg.condition_cap) {
        return Err(FitError::IllConditioned {
            condition,
            cap: cfg.condition_cap,
        });
    }
    let sol = svd
        .solve(&b, 0.0)
        .map_err(|e| FitError::InvalidConfig(e.to_string()))?;
    let resid = &a * &sol - &b;
    let residual_rms = (resid.norm_squared() / m as f64).sqrt();
    let mut c = [0.0; NCOEF];
    for (k, &(p, q)) in EXPONENTS.iter().enumerate() {
        c[k] = sol[k] / radius.powi((p + q) as i32);
    }
    let jet = Jet4::from_taylor(qx, qy, &Taylor2 { c });
    Ok((
        jet,
        FitDiagnostics {
            condition_number: condition,
            residual_rms,
            neighbors: order.len(),
            radius,
        },
    ))
}

/// Jet provider backed by scattered samples.
#[derive(Debug, Clone)]
pub struct ScatteredJets {
    pub samples: Vec<IsotropicSample>,
    pub cfg: ScatterFitConfig,
}

impl ScatteredJets {
    pub fn new(samples: Vec<IsotropicSample>, cfg: ScatterFitConfig) -> Self {
        ScatteredJets { samples, cfg }
    }
}

impl JetSource for ScatteredJets {
    fn jet_at(&self, x: f64, y: f64) -> Result<Jet4, JetError> {
        Ok(fit_jet_scattered(&self.samples, (x, y), &self.cfg)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::{jet_of_expression, parse_expression};

    fn samples_of(e: &str, pts: &[(f64, f64)]) -> Vec<IsotropicSample> {
        let ast = parse_expression(e).unwrap();
        pts.iter()
            .map(|&(x, y)| {
                let j = jet_of_expression(&ast, x, y).unwrap();
                IsotropicSample {
                    x,
                    y,
                    f: j.f,
                    fx: j.fx,
                    fy: j.fy,
                }
            })
            .collect()
    }

    fn grid(cx: f64, cy: f64, h: f64, n: i32) -> Vec<(f64, f64)> {
        let mut v = Vec::new();
        for i in -n..=n {
            for j in -n..=n {
                // mild jitter keeps the layout generic
                let jx = 0.13 * ((i * 7 + j * 3) as f64).sin();
                let jy = 0.11 * ((i * 5 - j * 11) as f64).cos();
                v.push((cx + h * (i as f64 + jx), cy + h * (j as f64 + jy)));
            }
        }
        v
    }

    #[test]
    fn quartic_is_reproduced() {
        let e = "1 + x - 2*y + x^2*y - 3*x*y^2 + 0.5*x^4 - x^2*y^2 + y^4 + x^3";
        let pts = grid(0.3, -0.2, 0.05, 4);
        let s = samples_of(e, &pts);
        let (j, d) = fit_jet_scattered(&s, (0.3, -0.2), &ScatterFitConfig::default()).unwrap();
        let want = jet_of_expression(&parse_expression(e).unwrap(), 0.3, -0.2).unwrap();
        for (g, w) in j.partials().iter().zip(want.partials()) {
            assert!((g - w).abs() < 1e-9 * w.abs().max(1.0), "{g} vs {w}");
        }
        assert!(d.residual_rms < 1e-12);
        assert!(d.condition_number < 1e8);
    }

    #[test]
    fn value_only_fit_also_reproduces_quartics() {
        let e = "x^4 - y^3 + x*y";
        let s = samples_of(e, &grid(0.0, 0.0, 0.1, 4));
        let cfg = ScatterFitConfig {
            hermite: false,
            ..Default::default()
        };
        let (j, _) = fit_jet_scattered(&s, (0.0, 0.0), &cfg).unwrap();
        assert!((j.fxxxx - 24.0).abs() < 1e-6);
        assert!((j.fyyy + 6.0).abs() < 1e-7);
    }

    #[test]
    fn error_shrinks_with_neighborhood() {
        let e = "y^2/(x^2+y^2)";
        let want = jet_of_expression(&parse_expression(e).unwrap(), 1.0, 0.5).unwrap();
        let mut errs = Vec::new();
        for h in [0.04, 0.02, 0.01] {
            let s = samples_of(e, &grid(1.0, 0.5, h, 4));
            let (j, _) = fit_jet_scattered(&s, (1.0, 0.5), &ScatterFitConfig::default()).unwrap();
            errs.push((j.fxxx - want.fxxx).abs() + (j.fxyy - want.fxyy).abs());
        }
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!(order1 >= 1.0 && order2 >= 1.0, "{errs:?}");
    }

    #[test]
    fn collinear_samples_are_ill_conditioned() {
        let pts: Vec<_> = (0..40).map(|i| (i as f64 * 0.01, 2.0 * i as f64 * 0.01)).collect();
        let s = samples_of("x^2 + y", &pts);
        let err = fit_jet_scattered(&s, (0.2, 0.4), &ScatterFitConfig::default()).unwrap_err();
        assert!(matches!(err, FitError::IllConditioned { .. }));
    }

    #[test]
    fn too_few_samples_and_bad_k() {
        let s = samples_of("x", &grid(0.0, 0.0, 0.1, 2));
        assert!(matches!(
            fit_jet_scattered(&s, (0.0, 0.0), &ScatterFitConfig::default()),
            Err(FitError::TooFewSamples { have: 25, need: 36 })
        ));
        let cfg = ScatterFitConfig {
            k: 10,
            ..Default::default()
        };
        assert!(matches!(
            fit_jet_scattered(&s, (0.0, 0.0), &cfg),
            Err(FitError::InvalidConfig(_))
        ));
    }
}
