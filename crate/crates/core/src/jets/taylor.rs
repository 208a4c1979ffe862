//! Truncated bivariate Taylor polynomials of total degree 4.
//!
//! Coefficient `c[idx(i, j)]` multiplies `dx^i dy^j`. Layout is by total
//! degree, then by ascending power of `dy`, which matches the partial
//! ordering of [`Jet4`](super::Jet4).

use std::ops::{Add, Mul, Neg, Sub};

pub const DEGREE: usize = 4;
pub const NCOEF: usize = 15;

/// Flat index of the `dx^i dy^j` coefficient.
pub const fn idx(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

/// Inverse of [`idx`].
pub const EXPONENTS: [(usize, usize); NCOEF] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
    (4, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 4),
];

const FACT: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Taylor2 {
    pub c: [f64; NCOEF],
}

impl Taylor2 {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; NCOEF];
        c[0] = v;
        Taylor2 { c }
    }

    /// The independent variable `x` expanded at `x0`.
    pub fn var_x(x0: f64) -> Self {
        let mut t = Self::constant(x0);
        t.c[idx(1, 0)] = 1.0;
        t
    }

    pub fn var_y(y0: f64) -> Self {
        let mut t = Self::constant(y0);
        t.c[idx(0, 1)] = 1.0;
        t
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Partial derivative `d^(i+j) / dx^i dy^j` at the expansion point.
    pub fn partial(&self, i: usize, j: usize) -> f64 {
        self.c[idx(i, j)] * FACT[i] * FACT[j]
    }

    pub fn from_partials(p: &[f64; NCOEF]) -> Self {
        let mut c = [0.0; NCOEF];
        for (k, &(i, j)) in EXPONENTS.iter().enumerate() {
            c[k] = p[k] / (FACT[i] * FACT[j]);
        }
        Taylor2 { c }
    }

    pub fn partials(&self) -> [f64; NCOEF] {
        let mut p = [0.0; NCOEF];
        for (k, &(i, j)) in EXPONENTS.iter().enumerate() {
            p[k] = self.c[k] * FACT[i] * FACT[j];
        }
        p
    }

    /// Evaluates the truncated polynomial at offset `(dx, dy)`.
    pub fn eval(&self, dx: f64, dy: f64) -> f64 {
        EXPONENTS
            .iter()
            .zip(self.c.iter())
            .map(|(&(i, j), c)| c * dx.powi(i as i32) * dy.powi(j as i32))
            .sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut c = self.c;
        c.iter_mut().for_each(|v| *v *= s);
        Taylor2 { c }
    }

    fn nilpotent(&self) -> Self {
        let mut t = *self;
        t.c[0] = 0.0;
        t
    }

    /// `g(self)` given `g` and its first four derivatives at the value.
    pub fn compose(&self, g: &[f64; 5]) -> Self {
        let h = self.nilpotent();
        let mut out = Self::constant(g[0]);
        let mut hk = Self::constant(1.0);
        for (k, gk) in g.iter().enumerate().skip(1) {
            hk = hk * h;
            out = out + hk.scale(gk / FACT[k]);
        }
        out
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut out = Self::constant(1.0);
        let mut base = *self;
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                out = out * base;
            }
            base = base * base;
            e >>= 1;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }
}

impl Add for Taylor2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut c = self.c;
        c.iter_mut().zip(o.c).for_each(|(a, b)| *a += b);
        Taylor2 { c }
    }
}

impl Sub for Taylor2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut c = self.c;
        c.iter_mut().zip(o.c).for_each(|(a, b)| *a -= b);
        Taylor2 { c }
    }
}

impl Neg for Taylor2 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Mul for Taylor2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut c = [0.0; NCOEF];
        for (ka, &(ia, ja)) in EXPONENTS.iter().enumerate() {
            let a = self.c[ka];
            if a == 0.0 {
                continue;
            }
            for (kb, &(ib, jb)) in EXPONENTS.iter().enumerate() {
                if ia + ja + ib + jb > DEGREE {
                    continue;
                }
                c[idx(ia + ib, ja + jb)] += a * o.c[kb];
            }
        }
        Taylor2 { c }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_layout_round_trips() {
        for (k, &(i, j)) in EXPONENTS.iter().enumerate() {
            assert_eq!(idx(i, j), k);
        }
    }

    #[test]
    fn product_of_variables() {
        let x = Taylor2::var_x(2.0);
        let y = Taylor2::var_y(-1.0);
        let p = x * x * y;
        assert_eq!(p.value(), -4.0);
        assert_eq!(p.partial(1, 0), -4.0);
        assert_eq!(p.partial(0, 1), 4.0);
        assert_eq!(p.partial(2, 0), -2.0);
        assert_eq!(p.partial(1, 1), 4.0);
        assert_eq!(p.partial(2, 1), 2.0);
        assert_eq!(p.partial(3, 0), 0.0);
    }

    #[test]
    fn truncation_drops_degree_five() {
        let x = Taylor2::var_x(0.0);
        let p = x.powi(5);
        assert!(p.c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn compose_exp_matches_series() {
        let x = Taylor2::var_x(0.0);
        let e = x.compose(&[1.0; 5]);
        for k in 0..=4 {
            assert!((e.partial(k, 0) - 1.0).abs() < 1e-15);
        }
    }
}
