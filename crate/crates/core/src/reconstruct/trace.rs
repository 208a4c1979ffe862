//! Fixed-step RK4 integration of direction fields on the `(x, y)` plane.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ReconstructError;
use crate::classify::{eval_form, form_directions, ruling_forms, DEFAULT_TOL};
use crate::contact::{direction_to_uv, solve_hyperosculating_with, ConicCandidate, SolveConfig};
use crate::jets::{Jet4, JetSource};

/// Largest angle between consecutive ruling directions.
const MAX_TURN_DEG: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TraceShape {
    Line { max_deviation: f64 },
    Circle { center: [f64; 2], radius: f64, max_deviation: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveTrace {
    pub points: Vec<[f64; 2]>,
    pub step: f64,
    pub f_values: Vec<f64>,
    pub shape: TraceShape,
    /// Largest change of `(fx, fy)` from the seed.
    pub tangent_variation: Option<f64>,
    /// Largest deviation of `f` from its linear fit in arclength.
    pub f_linearity: Option<f64>,
    /// Largest `|f − z(t)|` against the seed conic.
    pub f_consistency: Option<f64>,
    /// RK4 stages where the tracked root was multiple.
    #[serde(default)]
    pub multiple_stages: usize,
}

impl CurveTrace {
    pub fn max_deviation(&self) -> f64 {
        match self.shape {
            TraceShape::Line { max_deviation } | TraceShape::Circle { max_deviation, .. } => max_deviation,
        }
    }
}

fn jet(source: &dyn JetSource, p: [f64; 2]) -> Result<Jet4, ReconstructError> {
    source.jet_at(p[0], p[1]).map_err(|e| ReconstructError::Jet(e.to_string()))
}

fn unit(d: [f64; 2]) -> [f64; 2] {
    let h = d[0].hypot(d[1]);
    [d[0] / h, d[1] / h]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn aligned(d: [f64; 2], reference: [f64; 2]) -> [f64; 2] {
    if dot(d, reference) < 0.0 {
        [-d[0], -d[1]]
    } else {
        d
    }
}

/// Integrates a unit field; `field(p, reference)` returns the direction at
/// `p` closest to `reference`.
fn rk4<F>(seed: [f64; 2], dir0: [f64; 2], h: f64, n: usize, mut field: F) -> Result<Vec<[f64; 2]>, ReconstructError>
where
    F: FnMut([f64; 2], [f64; 2]) -> Result<[f64; 2], ReconstructError>,
{
    let mut pts = vec![seed];
    let mut p = seed;
    let mut d = dir0;
    let at = |p: [f64; 2], k: [f64; 2], s: f64| [p[0] + s * k[0], p[1] + s * k[1]];
    for _ in 0..n {
        let k1 = field(p, d)?;
        let k2 = field(at(p, k1, h / 2.0), k1)?;
        let k3 = field(at(p, k2, h / 2.0), k2)?;
        let k4 = field(at(p, k3, h), k3)?;
        p = [
            p[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            p[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        d = k4;
        pts.push(p);
    }
    Ok(pts)
}

fn steps_for(step: f64, length: f64) -> usize {
    (length / step).ceil().max(1.0) as usize
}

/// Largest distance of the points from the chord joining the ends.
fn chord_deviation(pts: &[[f64; 2]]) -> f64 {
    let (a, b) = (pts[0], pts[pts.len() - 1]);
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = d[0].hypot(d[1]);
    if len == 0.0 {
        return 0.0;
    }
    pts.iter()
        .map(|p| ((p[0] - a[0]) * d[1] - (p[1] - a[1]) * d[0]).abs() / len)
        .fold(0.0, f64::max)
}

/// Algebraic (Kåsa) circle fit: center, radius, largest radial deviation.
pub fn fit_circle(pts: &[[f64; 2]]) -> Option<([f64; 2], f64, f64)> {
    if pts.len() < 3 {
        return None;
    }
    // shift to the centroid for conditioning
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let a = DMatrix::from_fn(pts.len(), 3, |i, k| match k {
        0 => pts[i][0] - mx,
        1 => pts[i][1] - my,
        _ => 1.0,
    });
    let b = DVector::from_fn(pts.len(), |i, _| {
        let (x, y) = (pts[i][0] - mx, pts[i][1] - my);
        -(x * x + y * y)
    });
    let sol = a.svd(true, true).solve(&b, 1e-14).ok()?;
    let (cx, cy) = (-sol[0] / 2.0, -sol[1] / 2.0);
    let r2 = cx * cx + cy * cy - sol[2];
    if !(r2 > 0.0) {
        return None;
    }
    let r = r2.sqrt();
    let dev = pts
        .iter()
        .map(|p| ((p[0] - mx - cx).hypot(p[1] - my - cy) - r).abs())
        .fold(0.0, f64::max);
    Some(([cx + mx, cy + my], r, dev))
}

/// Largest deviation of `f` from its least-squares line in arclength.
fn linear_misfit(pts: &[[f64; 2]], f: &[f64]) -> f64 {
    let mut s = vec![0.0];
    for w in pts.windows(2) {
        let last = *s.last().unwrap();
        s.push(last + (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]));
    }
    let n = s.len() as f64;
    let ms = s.iter().sum::<f64>() / n;
    let mf = f.iter().sum::<f64>() / n;
    let sxy: f64 = s.iter().zip(f).map(|(a, b)| (a - ms) * (b - mf)).sum();
    let sxx: f64 = s.iter().map(|a| (a - ms).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    s.iter()
        .zip(f)
        .map(|(a, b)| (b - mf - slope * (a - ms)).abs())
        .fold(0.0, f64::max)
}

/// Unit vector spanning the near-kernel of the Hessian.
fn hessian_kernel(j: &Jet4) -> Option<[f64; 2]> {
    let (a, b, c) = (j.fxx, j.fxy, j.fyy);
    if a == 0.0 && b == 0.0 && c == 0.0 {
        return None;
    }
    let mean = (a + c) / 2.0;
    let rad = ((a - c) / 2.0).hypot(b);
    let lam = if (mean + rad).abs() < (mean - rad).abs() { mean + rad } else { mean - rad };
    let e1 = [b, lam - a];
    let e2 = [lam - c, b];
    let e = if e1[0].hypot(e1[1]) >= e2[0].hypot(e2[1]) { e1 } else { e2 };
    Some(unit(e))
}

pub fn integrate_ruling_developable(
    source: &dyn JetSource,
    seed: (f64, f64),
    step: f64,
    length: f64,
) -> Result<CurveTrace, ReconstructError> {
    let s = [seed.0, seed.1];
    let j0 = jet(source, s)?;
    let d0 = hessian_kernel(&j0).ok_or(ReconstructError::ZeroHessian)?;
    let pts = rk4(s, d0, step, steps_for(step, length), |p, r| {
        let j = jet(source, p)?;
        hessian_kernel(&j).map(|d| aligned(d, r)).ok_or(ReconstructError::ZeroHessian)
    })?;
    let mut f_values = Vec::with_capacity(pts.len());
    let mut tangent_variation: f64 = 0.0;
    for p in &pts {
        let j = jet(source, *p)?;
        f_values.push(j.f);
        tangent_variation = tangent_variation.max((j.fx - j0.fx).hypot(j.fy - j0.fy));
    }
    Ok(CurveTrace {
        shape: TraceShape::Line { max_deviation: chord_deviation(&pts) },
        f_linearity: Some(linear_misfit(&pts, &f_values)),
        points: pts,
        step,
        f_values,
        tangent_variation: Some(tangent_variation),
        f_consistency: None,
        multiple_stages: 0,
    })
}

/// Ruling direction at `j` nearest `reference`.
fn ruling_direction(j: &Jet4, reference: [f64; 2]) -> Result<[f64; 2], ReconstructError> {
    let (quad, cubic) = ruling_forms(j);
    let nq = quad.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let nc = cubic.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if j.fxx * j.fyy - j.fxy * j.fxy > DEFAULT_TOL * nq * nq {
        return Err(ReconstructError::NoRealRuling { x: j.x, y: j.y });
    }
    let dirs = if nq == 0.0 { form_directions(&cubic) } else { form_directions(&quad) };
    let cos_max = MAX_TURN_DEG.to_radians().cos();
    let reference = unit(reference);
    dirs.into_iter()
        .map(|d| aligned(d, reference))
        .filter(|d| dot(*d, reference) >= cos_max)
        .map(|d| {
            let r = if nc == 0.0 { 0.0 } else { eval_form(&cubic, d[0], d[1]).abs() / nc };
            (d, r)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(d, _)| d)
        .ok_or(ReconstructError::BranchJump { x: j.x, y: j.y })
}

pub fn integrate_ruling_ruled(
    source: &dyn JetSource,
    seed: (f64, f64),
    branch: [f64; 2],
    step: f64,
    length: f64,
) -> Result<CurveTrace, ReconstructError> {
    let s = [seed.0, seed.1];
    let d0 = ruling_direction(&jet(source, s)?, branch)?;
    let pts = rk4(s, d0, step, steps_for(step, length), |p, r| ruling_direction(&jet(source, p)?, r))?;
    let f_values = pts
        .iter()
        .map(|p| jet(source, *p).map(|j| j.f))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CurveTrace {
        shape: TraceShape::Line { max_deviation: chord_deviation(&pts) },
        f_linearity: Some(linear_misfit(&pts, &f_values)),
        points: pts,
        step,
        f_values,
        tangent_variation: None,
        f_consistency: None,
        multiple_stages: 0,
    })
}

/// Stage points a rounding-level distance off a curve of double roots see a
/// complex pair with a tiny imaginary part; keep its real part.
fn tracking_config() -> SolveConfig {
    SolveConfig { root_tol: 1e-6, near_double_rel: 1e-6, ..SolveConfig::default() }
}

/// Root at `p` whose top-view center is nearest `center`, with its
/// multiplicity flag and whether it came from a continuous family (the
/// multiplicity flag is never set then).
fn tracked_root(
    j: &Jet4,
    theta: f64,
    center: [f64; 2],
) -> Result<([f64; 2], bool, bool), ReconstructError> {
    let (x, y) = (j.x, j.y);
    let rep = solve_hyperosculating_with(x, y, j, theta, &tracking_config());
    let dist = |u: f64, v: f64| (x + u - center[0]).hypot(y + v - center[1]);
    let mut best: Option<([f64; 2], bool, f64)> = None;
    for r in &rep.roots {
        let d = dist(r.u, r.v);
        if best.is_none_or(|b| d < b.2) {
            best = Some(([r.u, r.v], r.multiple, d));
        }
    }
    if rep.identically_zero {
        // every conic of the θ-family lies on the graph: keep the nearest one
        if let Some(uv) = nearest_family_member(x, y, theta, center) {
            best = Some((uv, false, dist(uv[0], uv[1])));
        }
    }
    let radius = (center[0] - x).hypot(center[1] - y);
    match best {
        Some((uv, multiple, d)) if d <= 0.1 * radius => Ok((uv, multiple, rep.identically_zero)),
        _ => Err(ReconstructError::RootLost { x, y }),
    }
}

/// Member of the θ-family at `(x, y)` whose top-view center is nearest `center`.
fn nearest_family_member(x: f64, y: f64, theta: f64, center: [f64; 2]) -> Option<[f64; 2]> {
    use std::f64::consts::{PI, TAU};
    let cost = |phi: f64| match direction_to_uv((phi / 2.0).tan(), x, y, theta) {
        Some((u, v)) => (x + u - center[0]).hypot(y + v - center[1]),
        None => f64::INFINITY,
    };
    const N: usize = 720;
    let h = TAU / N as f64;
    let (mut best_phi, mut best) = (0.0, f64::INFINITY);
    for k in 0..N {
        let phi = -PI + h * (k as f64 + 0.5);
        let c = cost(phi);
        if c < best {
            (best_phi, best) = (phi, c);
        }
    }
    if !best.is_finite() {
        return None;
    }
    // golden-section refinement on the bracketing cell
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (best_phi - h, best_phi + h);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if cost(c) < cost(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let phi = 0.5 * (a + b);
    let phi = if cost(phi) <= best { phi } else { best_phi };
    direction_to_uv((phi / 2.0).tan(), x, y, theta).map(|(u, v)| [u, v])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleTraceOptions {
    pub step: f64,
    pub length: f64,
    /// Accept a multiple root at the seed (it may sit where two conics of
    /// the family touch).
    pub allow_multiple_seed: bool,
    /// Stop with `MultipleRoot` when the tracked root is multiple after the
    /// seed. When off, such stages are counted in `multiple_stages`.
    pub stop_on_multiple: bool,
}

impl CircleTraceOptions {
    pub fn new(step: f64, length: f64) -> Self {
        CircleTraceOptions { step, length, allow_multiple_seed: true, stop_on_multiple: true }
    }
}

/// Follows the top view of the conic through `seed` given by the root
/// `(u, v)`, re-solving for the continuously tracked root at every stage.
pub fn integrate_isotropic_circle(
    source: &dyn JetSource,
    seed: (f64, f64),
    root: (f64, f64),
    theta: f64,
    opts: &CircleTraceOptions,
) -> Result<CurveTrace, ReconstructError> {
    let (step, length) = (opts.step, opts.length);
    let s = [seed.0, seed.1];
    let j0 = jet(source, s)?;
    let mut center = [s[0] + root.0, s[1] + root.1];
    let (uv0, multiple0, _) = tracked_root(&j0, theta, center)?;
    if multiple0 && !opts.allow_multiple_seed {
        return Err(ReconstructError::MultipleRoot { x: s[0], y: s[1] });
    }
    center = [s[0] + uv0[0], s[1] + uv0[1]];
    let conic = ConicCandidate::osculating(&j0, uv0[0], uv0[1], theta);
    let d0 = unit([uv0[1], -uv0[0]]);
    let mut multiple_stages = 0;
    let pts = rk4(s, d0, step, steps_for(step, length), |p, r| {
        let j = jet(source, p)?;
        let (uv, multiple, on_family) = tracked_root(&j, theta, center)?;
        if multiple && p != s {
            if opts.stop_on_multiple {
                return Err(ReconstructError::MultipleRoot { x: p[0], y: p[1] });
            }
            multiple_stages += 1;
        }
        // follow slow drift of the center on inexact envelopes; on a
        // continuous family the seed circle itself is the target
        if !on_family {
            center = [p[0] + uv[0], p[1] + uv[1]];
        }
        Ok(aligned(unit([uv[1], -uv[0]]), r))
    })?;
    let mut f_values = Vec::with_capacity(pts.len());
    let mut consistency: f64 = 0.0;
    let (cx, cy) = conic.center();
    let a0 = (-conic.v).atan2(-conic.u);
    for p in &pts {
        let j = jet(source, *p)?;
        f_values.push(j.f);
        let t = (p[1] - cy).atan2(p[0] - cx) - a0;
        let (_, _, z) = conic.point_at(t);
        consistency = consistency.max((j.f - z).abs());
    }
    let shape = match fit_circle(&pts) {
        Some((c, r, dev)) => TraceShape::Circle { center: c, radius: r, max_deviation: dev },
        None => TraceShape::Line { max_deviation: chord_deviation(&pts) },
    };
    Ok(CurveTrace {
        points: pts,
        step,
        f_values,
        shape,
        tangent_variation: None,
        f_linearity: None,
        f_consistency: Some(consistency),
        multiple_stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isomap::{sphere_to_paraboloid, Orientation};
    use crate::jets::parse_expression;
    use nalgebra::Vector3;

    const S3: f64 = 1.732_050_807_568_877_2;

    fn steps_are_uniform(t: &CurveTrace) -> bool {
        t.points
            .windows(2)
            .all(|w| ((w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]) - t.step).abs() <= 0.1 * t.step)
    }

    #[test]
    fn developable_rulings() {
        let ast = parse_expression("x^2").unwrap();
        let t = integrate_ruling_developable(&ast, (0.5, 0.3), 1e-3, 0.5).unwrap();
        assert_eq!(t.max_deviation(), 0.0);
        assert!(t.points.iter().all(|p| p[0] == 0.5));
        assert!(steps_are_uniform(&t));

        let ast = parse_expression("(x+y)^2").unwrap();
        let t = integrate_ruling_developable(&ast, (0.2, 0.1), 1e-3, 0.5).unwrap();
        let end = t.points.last().unwrap();
        assert!((end[0] - 0.2 + (end[1] - 0.1)).abs() < 1e-10);
        assert!(t.max_deviation() < 1e-10);

        let ast = parse_expression("sqrt(x^2+y^2)").unwrap();
        let t = integrate_ruling_developable(&ast, (1.0, 0.5), 1e-3, 0.8).unwrap();
        assert!(t.max_deviation() < 1e-8);
        assert!(t.tangent_variation.unwrap() < 1e-8);
        // radial
        for p in &t.points {
            assert!((p[0] * 0.5 - p[1] * 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_hessian_at_seed() {
        let ast = parse_expression("2*x+y").unwrap();
        assert_eq!(
            integrate_ruling_developable(&ast, (0.1, 0.1), 1e-3, 0.1),
            Err(ReconstructError::ZeroHessian)
        );
    }

    #[test]
    fn ruled_rulings() {
        let ast = parse_expression("x*y").unwrap();
        let t = integrate_ruling_ruled(&ast, (1.0, 1.0), [1.0, 0.0], 1e-3, 0.5).unwrap();
        assert!(t.points.iter().all(|p| p[1] == 1.0));
        assert!(t.f_linearity.unwrap() < 1e-12);
        assert!(steps_are_uniform(&t));

        let ast = parse_expression("y/x").unwrap();
        let t = integrate_ruling_ruled(&ast, (1.0, 1.0), [1.0, 1.0], 1e-3, 0.5).unwrap();
        assert!(t.max_deviation() < 1e-9);
        assert!(t.f_linearity.unwrap() < 1e-9);
        let end = t.points.last().unwrap();
        assert!((end[0] - end[1]).abs() < 1e-9 && end[0] > 1.3);
    }

    #[test]
    fn ruled_errors() {
        let ast = parse_expression("x^2+y^2").unwrap();
        assert!(matches!(
            integrate_ruling_ruled(&ast, (0.3, 0.2), [1.0, 0.0], 1e-3, 0.1),
            Err(ReconstructError::NoRealRuling { .. })
        ));
        let ast = parse_expression("x*y").unwrap();
        assert!(matches!(
            integrate_ruling_ruled(&ast, (0.3, 0.2), [1.0, 1.0], 1e-3, 0.1),
            Err(ReconstructError::BranchJump { .. })
        ));
    }

    #[test]
    fn generator_circle_is_traced() {
        let ast = parse_expression("y^2/(x^2+y^2)").unwrap();
        let th = 30f64.to_radians();
        // the tracked root is a double root along this whole circle
        let track = CircleTraceOptions { stop_on_multiple: false, ..CircleTraceOptions::new(1e-3, 2.5) };
        let t = integrate_isotropic_circle(&ast, (S3, 0.0), (-S3 / 2.0, 0.0), th, &track).unwrap();
        assert!(t.multiple_stages > 0);
        let TraceShape::Circle { center, radius, max_deviation } = t.shape else {
            panic!("{:?}", t.shape)
        };
        assert!(max_deviation < 1e-6, "{max_deviation}");
        assert!((radius - S3 / 2.0).abs() < 1e-6);
        // through the origin
        assert!((center[0].hypot(center[1]) - radius).abs() < 1e-6);
        assert!(t.f_consistency.unwrap() < 1e-6);
        assert!(steps_are_uniform(&t));

        assert!(matches!(
            integrate_isotropic_circle(&ast, (S3, 0.0), (-S3 / 2.0, 0.0), th, &CircleTraceOptions::new(1e-3, 0.1)),
            Err(ReconstructError::MultipleRoot { .. })
        ));
    }

    #[test]
    fn reseeding_reproduces_the_circle() {
        let ast = parse_expression("y^2/(x^2+y^2)").unwrap();
        let th = 30f64.to_radians();
        let c = [S3 / 2.0, 0.0];
        // the arc stays clear of the singular origin
        let seed = (c[0] + S3 / 2.0 * 0.4f64.cos(), c[1] + S3 / 2.0 * 0.4f64.sin());
        let root = (c[0] - seed.0, c[1] - seed.1);
        let track = |len| CircleTraceOptions { stop_on_multiple: false, ..CircleTraceOptions::new(1e-3, len) };
        let t = integrate_isotropic_circle(&ast, seed, root, th, &track(1.5)).unwrap();
        let TraceShape::Circle { center, radius, .. } = t.shape else { panic!() };
        let p = t.points[700];
        let t2 = integrate_isotropic_circle(&ast, (p[0], p[1]), (center[0] - p[0], center[1] - p[1]), th, &track(1.0)).unwrap();
        let TraceShape::Circle { center: c2, radius: r2, .. } = t2.shape else { panic!() };
        assert!((center[0] - c2[0]).hypot(center[1] - c2[1]) < 1e-6);
        assert!((radius - r2).abs() < 1e-6);
        assert!((center[0] - c[0]).hypot(center[1] - c[1]) < 1e-6);
    }

    #[test]
    fn circles_on_the_sphere() {
        let par = sphere_to_paraboloid(&Vector3::zeros(), 1.0, Orientation::Inward);
        let src = move |x: f64, y: f64| Ok(par.jet(x, y));
        for th in [0.2, 0.6, 1.1] {
            let seed = (0.3, -0.2);
            let rep = crate::contact::solve_hyperosculating(seed.0, seed.1, &par.jet(seed.0, seed.1), th);
            let r = rep.family[5];
            let t = integrate_isotropic_circle(&src, seed, (r.u, r.v), th, &CircleTraceOptions::new(1e-3, 1.0)).unwrap();
            assert!(matches!(t.shape, TraceShape::Circle { .. }));
            assert!(t.max_deviation() < 1e-6);
            assert!(t.f_consistency.unwrap() < 1e-8, "{:?}", t.f_consistency);
        }
    }

    #[test]
    fn circle_fit_recovers_a_circle() {
        let pts: Vec<[f64; 2]> = (0..20).map(|k| {
            let a = k as f64 * 0.1;
            [1.0 + 2.0 * a.cos(), -3.0 + 2.0 * a.sin()]
        }).collect();
        let (c, r, dev) = fit_circle(&pts).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-10 && (c[1] + 3.0).abs() < 1e-10);
        assert!((r - 2.0).abs() < 1e-10 && dev < 1e-10);
    }
}
