//! 4-jets of the isotropic graph function, from expressions or from
//! scattered oriented samples.

pub mod expr;
pub mod fit;
pub mod taylor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use expr::{parse_expression, parse_with_vars, DomainError, ExprAst, ParseError};
pub use fit::{fit_jet_scattered, FitDiagnostics, FitError, ScatterFitConfig, ScatteredJets};
use taylor::Taylor2;

/// Value and all partials up to total order 4 at a base point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Jet4 {
    pub x: f64,
    pub y: f64,
    pub f: f64,
    pub fx: f64,
    pub fy: f64,
    pub fxx: f64,
    pub fxy: f64,
    pub fyy: f64,
    pub fxxx: f64,
    pub fxxy: f64,
    pub fxyy: f64,
    pub fyyy: f64,
    pub fxxxx: f64,
    pub fxxxy: f64,
    pub fxxyy: f64,
    pub fxyyy: f64,
    pub fyyyy: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("at ({x}, {y}): {source}")]
    Domain {
        x: f64,
        y: f64,
        #[source]
        source: DomainError,
    },
    #[error(transparent)]
    Fit(#[from] FitError),
}

impl Jet4 {
    /// Partials ordered `f, fx, fy, fxx, fxy, fyy, fxxx, .., fyyyy`.
    pub fn from_partials(x: f64, y: f64, p: [f64; 15]) -> Self {
        Jet4 {
            x,
            y,
            f: p[0],
            fx: p[1],
            fy: p[2],
            fxx: p[3],
            fxy: p[4],
            fyy: p[5],
            fxxx: p[6],
            fxxy: p[7],
            fxyy: p[8],
            fyyy: p[9],
            fxxxx: p[10],
            fxxxy: p[11],
            fxxyy: p[12],
            fxyyy: p[13],
            fyyyy: p[14],
        }
    }

    pub fn partials(&self) -> [f64; 15] {
        [
            self.f, self.fx, self.fy, self.fxx, self.fxy, self.fyy, self.fxxx, self.fxxy,
            self.fxyy, self.fyyy, self.fxxxx, self.fxxxy, self.fxxyy, self.fxyyy, self.fyyyy,
        ]
    }

    pub fn from_taylor(x: f64, y: f64, t: &Taylor2) -> Self {
        Self::from_partials(x, y, t.partials())
    }

    pub fn taylor(&self) -> Taylor2 {
        Taylor2::from_partials(&self.partials())
    }

    pub fn is_finite(&self) -> bool {
        self.partials().iter().all(|v| v.is_finite())
    }

    /// Largest magnitude among the second and third partials.
    pub fn scale(&self) -> f64 {
        self.partials()[3..10]
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Componentwise `a*self + b*other` (base point taken from `self`).
    pub fn combine(&self, a: f64, other: &Jet4, b: f64) -> Jet4 {
        let p = self.partials();
        let q = other.partials();
        let mut r = [0.0; 15];
        for k in 0..15 {
            r[k] = a * p[k] + b * q[k];
        }
        Jet4::from_partials(self.x, self.y, r)
    }

    /// Value and gradient of the quartic Taylor model at offset `(dx, dy)`.
    pub fn eval_model(&self, dx: f64, dy: f64) -> (f64, f64, f64) {
        let t = self.taylor();
        let shifted = t.shifted(dx, dy);
        (shifted.c[0], shifted.c[1], shifted.c[2])
    }

    /// The jet of `f ∘ R(-alpha)` at the rotated base point, where `R` is the
    /// rotation of the (x, y) plane. This is the isotropic image of rotating
    /// the design surface about the z-axis by `alpha`.
    pub fn rotated(&self, alpha: f64) -> Jet4 {
        let (s, c) = alpha.sin_cos();
        let dx = Taylor2::var_x(0.0) * Taylor2::constant(c) + Taylor2::var_y(0.0) * Taylor2::constant(s);
        let dy = Taylor2::var_y(0.0) * Taylor2::constant(c) - Taylor2::var_x(0.0) * Taylor2::constant(s);
        let t = self.taylor().substitute(&dx, &dy);
        Jet4::from_taylor(c * self.x - s * self.y, s * self.x + c * self.y, &t)
    }
}

impl Taylor2 {
    /// Re-expands the polynomial about offset `(dx, dy)`.
    pub fn shifted(&self, dx: f64, dy: f64) -> Taylor2 {
        self.substitute(&Taylor2::var_x(dx), &Taylor2::var_y(dy))
    }

    /// Evaluates the polynomial with Taylor arguments in place of the offsets.
    pub fn substitute(&self, a: &Taylor2, b: &Taylor2) -> Taylor2 {
        let mut out = Taylor2::constant(0.0);
        let apow: Vec<Taylor2> = (0..=4).map(|k| a.powi(k)).collect();
        let bpow: Vec<Taylor2> = (0..=4).map(|k| b.powi(k)).collect();
        for (k, &(i, j)) in taylor::EXPONENTS.iter().enumerate() {
            if self.c[k] != 0.0 {
                out = out + (apow[i] * bpow[j]).scale(self.c[k]);
            }
        }
        out
    }
}

/// Anything that can supply a 4-jet at a query point.
pub trait JetSource: Sync {
    fn jet_at(&self, x: f64, y: f64) -> Result<Jet4, JetError>;
}

impl JetSource for ExprAst {
    fn jet_at(&self, x: f64, y: f64) -> Result<Jet4, JetError> {
        jet_of_expression(self, x, y)
    }
}

impl<F> JetSource for F
where
    F: Fn(f64, f64) -> Result<Jet4, JetError> + Sync,
{
    fn jet_at(&self, x: f64, y: f64) -> Result<Jet4, JetError> {
        self(x, y)
    }
}

/// Exact 4-jet by truncated Taylor arithmetic.
pub fn jet_of_expression(ast: &ExprAst, x: f64, y: f64) -> Result<Jet4, JetError> {
    let t = ast
        .taylor(x, y)
        .map_err(|source| JetError::Domain { x, y, source })?;
    Ok(Jet4::from_taylor(x, y, &t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const S3: f64 = 1.732_050_807_568_877_2;

    fn jet(e: &str, x: f64, y: f64) -> Jet4 {
        jet_of_expression(&parse_expression(e).unwrap(), x, y).unwrap()
    }

    fn assert_partials(got: &Jet4, want: &[f64; 15], rel: f64) {
        for (k, (g, w)) in got.partials().iter().zip(want).enumerate() {
            assert!(
                (g - w).abs() <= rel * w.abs().max(1.0),
                "partial {k}: {g} vs {w}"
            );
        }
    }

    #[test]
    fn square_has_constant_second_partial() {
        let j = jet("x^2", 0.7, -2.0);
        assert_eq!(j.fxx, 2.0);
        assert!(j.partials()[6..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn generator_surface_at_axis_point() {
        let j = jet("y^2/(x^2+y^2)", S3, 0.0);
        let want = [
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            2.0 / 3.0,
            0.0,
            0.0,
            -4.0 / (3.0 * S3),
            0.0,
            0.0,
            0.0,
            4.0 / 3.0,
            0.0,
            -8.0 / 3.0,
        ];
        assert_partials(&j, &want, 1e-14);
    }

    // Reference partials below were produced by symbolic differentiation.
    #[test]
    fn symbolic_reference_values() {
        let cases: [(&str, f64, f64, [f64; 15]); 6] = [
            (
                "y^2/(x^2+y^2)",
                1.0,
                0.5,
                [
                    0.2, -0.32, 0.64, 0.704, -0.768, 0.256, -1.8432, 0.8704, 1.3312, -3.6864,
                    5.03808, 0.98304, -7.18848, 6.38976, 9.33888,
                ],
            ),
            (
                "sin(x)*cos(y)+x^3*y",
                0.3,
                -0.7,
                [
                    2.07126321249623019e-01,
                    5.41681649935512377e-01,
                    2.17379344067372693e-01,
                    -1.48602632124962297e+00,
                    8.85444663558273448e-01,
                    -2.26026321249623019e-01,
                    -4.93068164993551239e+00,
                    1.60962065593262738e+00,
                    -7.30681649935512434e-01,
                    -1.90379344067372669e-01,
                    2.26026321249623019e-01,
                    5.38455533644172668e+00,
                    2.26026321249623019e-01,
                    -6.15444663558273541e-01,
                    2.26026321249623019e-01,
                ],
            ),
            (
                "exp(x*y)/(1+x^2)",
                0.2,
                0.4,
                [
                    1.04162218045669097e+00,
                    1.60249566224106299e-02,
                    2.08324436091338189e-01,
                    -1.84878691863780475e+00,
                    1.04482717178117301e+00,
                    4.16648872182676377e-02,
                    2.10742782207894175e+00,
                    -3.37707470482739691e-01,
                    4.17289870447572819e-01,
                    8.33297744365352720e-03,
                    1.81166256319806038e+01,
                    -5.12487519149762605e+00,
                    2.02211284946579806e+00,
                    1.25122861307782191e-01,
                    1.66659548873070553e-03,
                ],
            ),
            (
                "sqrt(1+x^2+y^2)*log(2+x)",
                0.5,
                -1.0 / 3.0,
                [
                    1.06900585385318081e+00,
                    8.59362694612733069e-01,
                    -2.61797351964044300e-01,
                    7.97326848347319372e-01,
                    -1.81152584621878075e-02,
                    7.21278418676448596e-01,
                    7.67107424432845603e-02,
                    2.16036444296344471e-01,
                    9.70132822889793744e-02,
                    5.29918838211268395e-01,
                    -1.98061966974488568e+00,
                    -4.15093246234531699e-01,
                    -5.63689767294922039e-01,
                    -3.18053061493926592e-01,
                    -9.40876304579190803e-01,
                ],
            ),
            (
                "atan(x-2*y)+tan(x*y)",
                0.25,
                1.0 / 3.0,
                [
                    -3.11264347784692252e-01,
                    1.18772991312601039e+00,
                    -1.45239783142768153e+00,
                    6.23711835926363811e-01,
                    -1.89046691089401309e-01,
                    2.43059701978448750e+00,
                    -5.16696748413276730e-01,
                    1.35495770222136858e+00,
                    -2.24445021052706517e+00,
                    4.77491718027757095e+00,
                    -4.33920937941647278e+00,
                    9.40995462542512051e+00,
                    -1.63927399254415107e+01,
                    3.52405821093700311e+01,
                    -6.96906477232526527e+01,
                ],
            ),
            (
                "(x-y)^-2",
                2.0,
                0.5,
                [
                    4.444444444444444e-01,
                    -5.925925925925926e-01,
                    5.925925925925926e-01,
                    1.1851851851851851,
                    -1.1851851851851851,
                    1.1851851851851851,
                    -3.1604938271604937,
                    3.1604938271604937,
                    -3.1604938271604937,
                    3.1604938271604937,
                    10.534979423868313,
                    -10.534979423868313,
                    10.534979423868313,
                    -10.534979423868313,
                    10.534979423868313,
                ],
            ),
        ];
        for (e, x, y, want) in cases {
            assert_partials(&jet(e, x, y), &want, 1e-12);
        }
    }

    #[test]
    fn domain_error_is_reported_with_location() {
        let err = jet_of_expression(&parse_expression("1/x").unwrap(), 0.0, 2.0).unwrap_err();
        assert!(matches!(err, JetError::Domain { x, y, .. } if x == 0.0 && y == 2.0));
    }

    #[test]
    fn rotation_by_zero_is_identity_and_quarter_turn_swaps_axes() {
        let j = jet("x^3 + 2*x*y^2 + sin(y)", 0.4, -0.3);
        let r = j.rotated(0.0);
        assert_partials(&r, &j.partials(), 1e-14);
        // g(X, Y) = f(Y, -X) for a quarter turn
        let q = j.rotated(std::f64::consts::FRAC_PI_2);
        let direct = jet("y^3 + 2*y*x^2 + sin(-x)", 0.3, 0.4);
        assert!((q.x - 0.3).abs() < 1e-15 && (q.y - 0.4).abs() < 1e-15);
        assert_partials(&q, &direct.partials(), 1e-12);
    }

    #[test]
    fn model_shift_matches_direct_jet_for_polynomials() {
        let e = "x^4 - 3*x^2*y + y^3 + x*y - 2";
        let j = jet(e, 0.2, 0.1);
        let (f, fx, fy) = j.eval_model(0.3, -0.4);
        let k = jet(e, 0.5, -0.3);
        assert!((f - k.f).abs() < 1e-14);
        assert!((fx - k.fx).abs() < 1e-14);
        assert!((fy - k.fy).abs() < 1e-14);
    }

    fn central_partial(e: &ExprAst, x: f64, y: f64, i: usize, j: usize, h: f64) -> f64 {
        // tensor product of 1-D central stencils
        fn weights(order: usize) -> &'static [(i32, f64)] {
            match order {
                0 => &[(0, 1.0)],
                1 => &[(-1, -0.5), (1, 0.5)],
                2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
                3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
                _ => &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
            }
        }
        let mut s = 0.0;
        for &(a, wa) in weights(i) {
            for &(b, wb) in weights(j) {
                s += wa * wb * e.eval(x + a as f64 * h, y + b as f64 * h).unwrap();
            }
        }
        s / h.powi((i + j) as i32)
    }

    const RANDOM_EXPRS: [&str; 6] = [
        "sin(x)*cos(y)+x^3*y",
        "exp(0.3*x*y)/(1+x^2)",
        "sqrt(2+x^2+y^2)*log(3+x)",
        "atan(x-2*y)+tan(0.5*x*y)",
        "(x-y+3)^-2 + y^4",
        "x*y/(1+y^2) - cos(x+y)^2",
    ];

    proptest! {
        #[test]
        fn partials_match_finite_differences(k in 0usize..6, x in -0.5f64..0.5, y in -0.5f64..0.5) {
            let e = parse_expression(RANDOM_EXPRS[k]).unwrap();
            let j = jet_of_expression(&e, x, y).unwrap();
            let p = j.partials();
            for (idx, &(i, jj)) in taylor::EXPONENTS.iter().enumerate() {
                if i + jj > 2 { continue; }
                let fd = central_partial(&e, x, y, i, jj, 1e-3);
                prop_assert!((p[idx] - fd).abs() <= 1e-5 * p[idx].abs().max(1.0),
                    "{} partial ({i},{jj}): {} vs {}", RANDOM_EXPRS[k], p[idx], fd);
            }
            // third and fourth orders need a larger step to keep cancellation bounded
            for (idx, &(i, jj)) in taylor::EXPONENTS.iter().enumerate().skip(6) {
                // Richardson extrapolation of two central stencils
                let fd = (4.0 * central_partial(&e, x, y, i, jj, 1e-2)
                    - central_partial(&e, x, y, i, jj, 2e-2)) / 3.0;
                prop_assert!((p[idx] - fd).abs() <= 1e-3 * p[idx].abs().max(1.0),
                    "{} partial ({i},{jj}): {} vs {}", RANDOM_EXPRS[k], p[idx], fd);
            }
        }

        #[test]
        fn jet_is_linear_in_the_expression(a in -3.0f64..3.0, b in -3.0f64..3.0,
                                           x in -0.5f64..0.5, y in -0.5f64..0.5) {
            let g = RANDOM_EXPRS[0];
            let h = RANDOM_EXPRS[2];
            let sum = parse_expression(&format!("({a})*({g}) + ({b})*({h})")).unwrap();
            let js = jet_of_expression(&sum, x, y).unwrap();
            let jg = jet(g, x, y);
            let jh = jet(h, x, y);
            let lin = jg.combine(a, &jh, b);
            for (s, l) in js.partials().iter().zip(lin.partials()) {
                prop_assert!((s - l).abs() <= 1e-12 * (1.0 + l.abs()));
            }
        }

        #[test]
        fn mixed_partials_agree_with_reordered_expression(x in -0.5f64..0.5, y in -0.5f64..0.5) {
            // swapping the roles of the variables must transpose the partials
            let a = jet("sin(x)*exp(y) + x^2*y^3", x, y);
            let b = jet("sin(y)*exp(x) + y^2*x^3", y, x);
            prop_assert!((a.fxy - b.fxy).abs() < 1e-13);
            prop_assert!((a.fxxy - b.fxyy).abs() < 1e-13);
            prop_assert!((a.fxxxy - b.fxyyy).abs() < 1e-12);
            prop_assert!((a.fxxyy - b.fxxyy).abs() < 1e-12);
        }
    }
}
