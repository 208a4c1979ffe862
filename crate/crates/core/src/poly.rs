//! Dense univariate polynomials with real-root isolation by Sturm sequences.
//!
//! Coefficients are stored in ascending order of degree. Root isolation
//! brackets every distinct real root inside the Cauchy bound, then refines
//! each bracket by safeguarded Newton iteration.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Poly { coeffs };
        p.trim_exact();
        p
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    /// The polynomial `c * t^k`.
    pub fn monomial(c: f64, k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = c;
        Poly::new(coeffs)
    }

    /// `a + b t`.
    pub fn linear(a: f64, b: f64) -> Self {
        Poly::new(vec![a, b])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `t^k` (zero beyond the stored degree).
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    fn trim_exact(&mut self) {
        while matches!(self.coeffs.last(), Some(c) if *c == 0.0) {
            self.coeffs.pop();
        }
    }

    /// Drops leading coefficients whose magnitude is at most `rel` times the
    /// largest coefficient.
    pub fn trimmed(&self, rel: f64) -> Poly {
        let tol = rel * self.max_abs_coeff();
        let mut coeffs = self.coeffs.clone();
        while matches!(coeffs.last(), Some(c) if c.abs() <= tol) {
            coeffs.pop();
        }
        Poly::new(coeffs)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * k as f64)
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut out = Poly::constant(1.0);
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    /// Remainder of Euclidean division by `d`. Panics on a zero divisor.
    pub fn rem(&self, d: &Poly) -> Poly {
        let dd = d.degree().expect("division by the zero polynomial");
        let lead = d.coeffs[dd];
        let mut r = self.coeffs.clone();
        while r.len() > dd && !r.is_empty() {
            let k = r.len() - 1;
            let q = r[k] / lead;
            let shift = k - dd;
            for (i, c) in d.coeffs.iter().enumerate() {
                r[shift + i] -= q * c;
            }
            r.pop();
        }
        Poly::new(r)
    }

    /// Distinct real roots in ascending order.
    pub fn real_roots(&self) -> Vec<f64> {
        let mut p = self.trimmed(1e-15);
        let mut roots = Vec::new();
        // factor out exact roots at the origin
        if p.degree().is_some_and(|d| d > 0) && p.coeffs[0] == 0.0 {
            roots.push(0.0);
            while p.coeffs.first() == Some(&0.0) {
                p.coeffs.remove(0);
            }
        }
        match p.degree() {
            None | Some(0) => {}
            Some(1) => roots.push(-p.coeffs[0] / p.coeffs[1]),
            Some(_) => {
                let scale = p.max_abs_coeff();
                let p = p.scale(1.0 / scale);
                let found = isolate_and_refine(&p);
                roots.extend(found.into_iter().map(|r| refine_multiple(&p, r)));
            }
        }
        roots.sort_by(|a, b| a.total_cmp(b));
        roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
        roots
    }
}

/// Sturm chain `p, p', -rem(p, p'), ...`, each member rescaled to unit
/// max-norm (positive scaling leaves sign counts unchanged).
fn sturm_chain(p: &Poly) -> Vec<Poly> {
    let mut chain = vec![p.clone()];
    let d = p.derivative();
    let dn = d.max_abs_coeff();
    chain.push(d.scale(1.0 / dn));
    loop {
        let n = chain.len();
        let r = chain[n - 2].rem(&chain[n - 1]);
        let rn = r.max_abs_coeff();
        if r.is_zero() || rn <= 1e-13 * chain[n - 2].max_abs_coeff() {
            break;
        }
        let r = r.trimmed(1e-14);
        chain.push(-r.scale(1.0 / rn));
        if chain.last().unwrap().degree() == Some(0) {
            break;
        }
    }
    chain
}

fn sign_changes(chain: &[Poly], t: f64) -> usize {
    let mut count = 0;
    let mut last = 0.0_f64;
    for p in chain {
        let v = p.eval(t);
        if v == 0.0 || !v.is_finite() {
            continue;
        }
        if last != 0.0 && (v > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = v;
    }
    count
}

fn isolate_and_refine(p: &Poly) -> Vec<f64> {
    let n = p.degree().unwrap();
    let lead = p.coeffs[n];
    let bound = 1.0
        + p.coeffs[..n]
            .iter()
            .fold(0.0_f64, |m, c| m.max((c / lead).abs()));
    let chain = sturm_chain(p);
    let mut roots = Vec::new();
    let lo = -bound;
    let hi = bound;
    let mut stack = vec![(lo, sign_changes(&chain, lo), hi, sign_changes(&chain, hi))];
    while let Some((a, va, b, vb)) = stack.pop() {
        let count = va.saturating_sub(vb);
        if count == 0 {
            continue;
        }
        let width = b - a;
        let tiny = 4.0 * f64::EPSILON * (1.0 + a.abs().max(b.abs()));
        if count == 1 {
            roots.push(refine_single(p, a, b));
            continue;
        }
        if width <= tiny {
            roots.push(0.5 * (a + b));
            continue;
        }
        let m = 0.5 * (a + b);
        let vm = sign_changes(&chain, m);
        stack.push((a, va, m, vm));
        stack.push((m, vm, b, vb));
    }
    roots
}

/// Refines the unique root in `(a, b]`.
fn refine_single(p: &Poly, mut a: f64, mut b: f64) -> f64 {
    let dp = p.derivative();
    let mut fa = p.eval(a);
    let fb = p.eval(b);
    if fb == 0.0 {
        return b;
    }
    if fa == 0.0 || (fa > 0.0) == (fb > 0.0) {
        // even multiplicity: the root is an extremum, so refine a sign change
        // of the derivative when there is one
        let (da, db) = (dp.eval(a), dp.eval(b));
        if (da > 0.0) != (db > 0.0) && da != 0.0 && db != 0.0 {
            return refine_single(&dp, a, b);
        }
        return shrink_on_abs(p, a, b);
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let fx = p.eval(x);
        if fx == 0.0 {
            return x;
        }
        if (fx > 0.0) == (fa > 0.0) {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
        let d = dp.eval(x);
        let newton = if d != 0.0 { x - fx / d } else { f64::NAN };
        x = if newton.is_finite() && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (b - a).abs() <= 2.0 * f64::EPSILON * x.abs().max(1e-300) {
            break;
        }
        if (x - a).abs().min((b - x).abs()) == 0.0 {
            break;
        }
    }
    x
}

/// Sum of the magnitudes of the terms of `p` at `t`.
fn term_magnitude(p: &Poly, t: f64) -> f64 {
    p.coeffs
        .iter()
        .rev()
        .fold(0.0, |acc, c| acc * t.abs() + c.abs())
}

/// A root of multiplicity m is only determined to about eps^(1/m) by `p`
/// itself, but it is a simple root of the (m-1)-th derivative. Estimates m
/// from the relative size of successive derivatives and refines there. The
/// refined point is kept only if `p` still vanishes to rounding level, so
/// clusters of distinct roots are left alone.
fn refine_multiple(p: &Poly, r: f64) -> f64 {
    let mut derivs = vec![p.clone()];
    for _ in 0..3 {
        let d = derivs.last().unwrap().derivative();
        if d.is_zero() {
            break;
        }
        derivs.push(d);
    }
    let rel = |q: &Poly, t: f64| {
        let m = term_magnitude(q, t);
        if m == 0.0 {
            0.0
        } else {
            q.eval(t).abs() / m
        }
    };
    let Some(m) = (1..derivs.len()).find(|&k| rel(&derivs[k], r) > 1e-3) else {
        return r;
    };
    if m == 1 {
        return r;
    }
    let q = &derivs[m - 1];
    let dq = &derivs[m];
    let mut t = r;
    for _ in 0..50 {
        let d = dq.eval(t);
        if d == 0.0 {
            break;
        }
        let step = q.eval(t) / d;
        t -= step;
        if step.abs() <= 2.0 * f64::EPSILON * t.abs().max(1e-300) {
            break;
        }
    }
    let close = (t - r).abs() <= 1e-3 * (1.0 + r.abs());
    let vanishes = p.eval(t).abs() <= 16.0 * f64::EPSILON * term_magnitude(p, t);
    if t.is_finite() && close && vanishes {
        t
    } else {
        r
    }
}

fn shrink_on_abs(p: &Poly, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..300 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if p.eval(m1).abs() <= p.eval(m2).abs() {
            b = m2;
        } else {
            a = m1;
        }
        if b - a <= 4.0 * f64::EPSILON * (1.0 + a.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let n = self.coeffs.len().max(o.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + o.coeff(k)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        let n = self.coeffs.len().max(o.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - o.coeff(k)).collect())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut c = vec![0.0; self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly::new(c)
    }
}

impl Add for Poly {
    type Output = Poly;
    fn add(self, o: Poly) -> Poly {
        &self + &o
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(self, o: Poly) -> Poly {
        &self - &o
    }
}

impl Mul for Poly {
    type Output = Poly;
    fn mul(self, o: Poly) -> Poly {
        &self * &o
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn from_roots(roots: &[f64]) -> Poly {
        roots
            .iter()
            .fold(Poly::constant(1.0), |acc, r| &acc * &Poly::linear(-r, 1.0))
    }

    #[test]
    fn quadratic_roots() {
        let p = Poly::new(vec![-2.0, 0.0, 1.0]);
        let r = p.real_roots();
        assert_eq!(r.len(), 2);
        assert!((r[0] + 2f64.sqrt()).abs() < 1e-15);
        assert!((r[1] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn no_real_roots() {
        assert!(Poly::new(vec![1.0, 0.0, 1.0]).real_roots().is_empty());
        assert!(Poly::new(vec![3.0, 0.0, 1.0, 0.0, 2.0]).real_roots().is_empty());
    }

    #[test]
    fn double_root_is_found_once() {
        let p = from_roots(&[1.0, 1.0, -3.0]);
        let r = p.real_roots();
        assert_eq!(r.len(), 2, "{r:?}");
        assert!((r[0] + 3.0).abs() < 1e-12);
        assert!((r[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn triple_root_is_refined_through_derivatives() {
        let p = from_roots(&[-1.0, -1.0, -1.0, 0.0, 1.0]);
        let r = p.real_roots();
        assert_eq!(r.len(), 3, "{r:?}");
        assert!((r[0] + 1.0).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn close_distinct_roots_are_not_merged() {
        let p = from_roots(&[0.5, 0.5 + 1e-5, 2.0]);
        let r = p.real_roots();
        assert_eq!(r.len(), 3, "{r:?}");
        assert!((r[0] - 0.5).abs() < 1e-9 && (r[1] - 0.50001).abs() < 1e-9);
    }

    #[test]
    fn root_at_origin() {
        let p = from_roots(&[0.0, 2.0, -5.0]);
        let r = p.real_roots();
        assert_eq!(r.len(), 3);
        assert_eq!(r[1], 0.0);
    }

    #[test]
    fn six_spread_roots() {
        let want = [-1e3, -2.5, -0.001, 0.3, 7.0, 4e4];
        let p = from_roots(&want);
        let got = p.real_roots();
        assert_eq!(got.len(), 6);
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0), "{g} vs {w}");
        }
    }

    #[test]
    fn rem_matches_long_division() {
        // (t^3 - 1) = (t - 1)(t^2 + t + 1)
        let p = Poly::new(vec![-1.0, 0.0, 0.0, 1.0]);
        let r = p.rem(&Poly::new(vec![1.0, 1.0, 1.0]));
        assert!(r.is_zero() || r.max_abs_coeff() < 1e-15);
    }

    proptest! {
        #[test]
        fn recovers_separated_roots(raw in proptest::collection::vec(-50.0f64..50.0, 1..7)) {
            let mut roots = raw.clone();
            roots.sort_by(|a, b| a.total_cmp(b));
            roots.dedup_by(|a, b| (*a - *b).abs() < 0.5);
            let p = from_roots(&roots);
            let got = p.real_roots();
            prop_assert_eq!(got.len(), roots.len());
            for (g, w) in got.iter().zip(&roots) {
                prop_assert!((g - w).abs() <= 1e-6 * w.abs().max(1.0));
            }
        }
    }
}
