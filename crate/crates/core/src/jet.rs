//! Truncated multivariate Taylor polynomials ("jets") in the spacetime
//! variables `(t, x1, x2, x3)`.
//!
//! A jet of order `k` stores the Taylor coefficients `c_α = ∂^α f / α!` for
//! every multi-index `|α| ≤ k`. Arithmetic and elementary functions propagate
//! all partial derivatives exactly (up to roundoff), which is what the
//! identity checks need: residuals at machine precision rather than at a
//! finite-difference truncation level.
//!
//! Monomials are stored in graded order, so the coefficient vector of an
//! order-`k` jet is a prefix of the order-`k+1` vector and truncation is a
//! slice.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Number of independent variables: `t`, `x1`, `x2`, `x3`.
pub const NVARS: usize = 4;
/// Highest jet order supported by the shared monomial layout.
pub const MAX_ORDER: usize = 8;

/// Exponent tuple `(α0, α1, α2, α3)` for `∂_t^α0 ∂_1^α1 ∂_2^α2 ∂_3^α3`.
pub type Exponents = [u8; NVARS];

struct Layout {
    monomials: Vec<Exponents>,
    /// `count[k]` = number of monomials of degree ≤ k.
    count: Vec<usize>,
    /// Dense lookup over `(MAX_ORDER+1)^4` exponent tuples.
    lookup: Vec<u32>,
    /// `(i, j, k)` with `m_i + m_j = m_k`, sorted by `k`.
    products: Vec<(u32, u32, u32)>,
    /// `products_end[k]` = number of product entries whose result has degree ≤ k.
    products_end: Vec<usize>,
    /// For each variable and monomial index: index of `m + e_var` (or u32::MAX).
    raise: [Vec<u32>; NVARS],
    factorial: Vec<f64>,
}

const SIDE: usize = MAX_ORDER + 1;

fn dense_index(e: &Exponents) -> usize {
    ((e[0] as usize * SIDE + e[1] as usize) * SIDE + e[2] as usize) * SIDE + e[3] as usize
}

fn degree(e: &Exponents) -> usize {
    e.iter().map(|&a| a as usize).sum()
}

fn layout() -> &'static Layout {
    static LAYOUT: OnceLock<Layout> = OnceLock::new();
    LAYOUT.get_or_init(|| {
        let mut monomials = Vec::new();
        let mut count = Vec::with_capacity(SIDE);
        for deg in 0..=MAX_ORDER {
            // lexicographic within a degree, highest power of t first
            for a0 in (0..=deg).rev() {
                for a1 in (0..=deg - a0).rev() {
                    for a2 in (0..=deg - a0 - a1).rev() {
                        let a3 = deg - a0 - a1 - a2;
                        monomials.push([a0 as u8, a1 as u8, a2 as u8, a3 as u8]);
                    }
                }
            }
            count.push(monomials.len());
        }
        let mut lookup = vec![u32::MAX; SIDE.pow(4)];
        for (i, m) in monomials.iter().enumerate() {
            lookup[dense_index(m)] = i as u32;
        }
        let mut products = Vec::new();
        for (i, mi) in monomials.iter().enumerate() {
            for (j, mj) in monomials.iter().enumerate() {
                if degree(mi) + degree(mj) > MAX_ORDER {
                    continue;
                }
                let s = [mi[0] + mj[0], mi[1] + mj[1], mi[2] + mj[2], mi[3] + mj[3]];
                let k = lookup[dense_index(&s)];
                products.push((i as u32, j as u32, k));
            }
        }
        products.sort_by_key(|&(i, j, k)| (k, i, j));
        let products_end = (0..=MAX_ORDER)
            .map(|deg| products.partition_point(|&(_, _, k)| (k as usize) < count[deg]))
            .collect();
        let raise = std::array::from_fn(|var| {
            monomials
                .iter()
                .map(|m| {
                    let mut r = *m;
                    r[var] += 1;
                    if degree(&r) > MAX_ORDER {
                        u32::MAX
                    } else {
                        lookup[dense_index(&r)]
                    }
                })
                .collect()
        });
        let mut factorial = vec![1.0f64; 2 * SIDE];
        for n in 1..factorial.len() {
            factorial[n] = factorial[n - 1] * n as f64;
        }
        Layout {
            monomials,
            count,
            lookup,
            products,
            products_end,
            raise,
            factorial,
        }
    })
}

/// Number of Taylor coefficients of a jet of the given order.
pub fn coefficient_count(order: usize) -> usize {
    layout().count[order]
}

/// All exponent tuples with total degree ≤ `order`, in storage order.
pub fn monomials(order: usize) -> &'static [Exponents] {
    let l = layout();
    &l.monomials[..l.count[order]]
}

fn multi_factorial(e: &Exponents) -> f64 {
    let f = &layout().factorial;
    e.iter().map(|&a| f[a as usize]).product()
}

/// Truncated Taylor polynomial around a spacetime point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    order: usize,
    c: Vec<f64>,
}

impl Jet {
    pub fn zero(order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds MAX_ORDER");
        Jet {
            order,
            c: vec![0.0; coefficient_count(order)],
        }
    }

    pub fn constant(value: f64, order: usize) -> Self {
        let mut j = Jet::zero(order);
        j.c[0] = value;
        j
    }

    /// The coordinate function `var` (0 = t, 1..3 = x_j) expanded around `value`.
    pub fn variable(var: usize, value: f64, order: usize) -> Self {
        let mut j = Jet::constant(value, order);
        if order >= 1 {
            j.c[1 + var] = 1.0;
        }
        j
    }

    /// Builds a jet from Taylor coefficients in storage order.
    pub fn from_taylor(order: usize, coeffs: Vec<f64>) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::Order {
                requested: order,
                available: MAX_ORDER,
            });
        }
        if coeffs.len() != coefficient_count(order) {
            return Err(Error::argument(format!(
                "expected {} coefficients for order {order}, got {}",
                coefficient_count(order),
                coeffs.len()
            )));
        }
        Ok(Jet { order, c: coeffs })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn taylor_coeffs(&self) -> &[f64] {
        &self.c
    }

    /// Taylor coefficient `∂^α f / α!`; zero beyond the jet order.
    pub fn taylor(&self, alpha: Exponents) -> f64 {
        if degree(&alpha) > self.order {
            return 0.0;
        }
        self.c[layout().lookup[dense_index(&alpha)] as usize]
    }

    /// Partial derivative `∂^α f` at the expansion point.
    pub fn partial(&self, alpha: Exponents) -> Result<f64> {
        if degree(&alpha) > self.order {
            return Err(Error::Order {
                requested: degree(&alpha),
                available: self.order,
            });
        }
        Ok(self.taylor(alpha) * multi_factorial(&alpha))
    }

    /// Gradient `(∂_t f, ∂_1 f, ∂_2 f, ∂_3 f)`; requires order ≥ 1.
    pub fn gradient(&self) -> Result<[f64; NVARS]> {
        if self.order < 1 {
            return Err(Error::Order {
                requested: 1,
                available: 0,
            });
        }
        Ok([self.c[1], self.c[2], self.c[3], self.c[4]])
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet {
            order,
            c: self.c[..coefficient_count(order)].to_vec(),
        }
    }

    /// Partial derivative with respect to variable `var`, as a jet of one order less.
    pub fn d(&self, var: usize) -> Result<Jet> {
        if self.order == 0 {
            return Err(Error::Order {
                requested: 1,
                available: 0,
            });
        }
        let l = layout();
        let order = self.order - 1;
        let n = coefficient_count(order);
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            let k = l.raise[var][i] as usize;
            *o = (l.monomials[i][var] as f64 + 1.0) * self.c[k];
        }
        Ok(Jet { order, c: out })
    }

    fn mul_into(&self, other: &Jet, order: usize) -> Jet {
        let l = layout();
        let mut out = vec![0.0; coefficient_count(order)];
        for &(i, j, k) in &l.products[..l.products_end[order]] {
            out[k as usize] += self.c[i as usize] * other.c[j as usize];
        }
        Jet { order, c: out }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            order: self.order,
            c: self.c.iter().map(|v| v * s).collect(),
        }
    }

    /// Composes the univariate function with Taylor data `derivs[n] = g^{(n)}(a)`,
    /// `a = self.value()`, with this jet.
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        let f = &layout().factorial;
        let mut h = self.clone();
        h.c[0] = 0.0;
        let mut out = Jet::constant(derivs[0], self.order);
        let mut power = Jet::constant(1.0, self.order);
        for n in 1..=self.order {
            power = power.mul_into(&h, self.order);
            let coef = derivs[n] / f[n];
            if coef != 0.0 {
                for (o, p) in out.c.iter_mut().zip(&power.c) {
                    *o += coef * p;
                }
            }
        }
        out
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose(&vec![e; self.order + 1])
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let d: Vec<f64> = (0..=self.order).map(|n| cycle[n % 4]).collect();
        self.compose(&d)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let d: Vec<f64> = (0..=self.order).map(|n| cycle[n % 4]).collect();
        self.compose(&d)
    }

    /// `self^p` for real `p`; the expansion point must be positive unless `p`
    /// is a nonnegative integer.
    pub fn powf(&self, p: f64) -> Jet {
        let a = self.value();
        let mut d = Vec::with_capacity(self.order + 1);
        let mut coef = 1.0;
        for n in 0..=self.order {
            d.push(coef * a.powf(p - n as f64));
            coef *= p - n as f64;
        }
        self.compose(&d)
    }

    pub fn powi(&self, n: u32) -> Jet {
        let mut out = Jet::constant(1.0, self.order);
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Jet {
        let a = self.value();
        let f = &layout().factorial;
        let d: Vec<f64> = (0..=self.order)
            .map(|n| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                sign * f[n] / a.powi(n as i32 + 1)
            })
            .collect();
        self.compose(&d)
    }

    pub fn ln(&self) -> Jet {
        let a = self.value();
        let f = &layout().factorial;
        let mut d = vec![a.ln()];
        for n in 1..=self.order {
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            d.push(sign * f[n - 1] / a.powi(n as i32));
        }
        self.compose(&d)
    }

    pub fn square(&self) -> Jet {
        self * self
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_into(rhs, self.order.min(rhs.order))
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let n = coefficient_count(order);
        Jet {
            order,
            c: (0..n).map(|i| self.c[i] + rhs.c[i]).collect(),
        }
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let n = coefficient_count(order);
        Jet {
            order,
            c: (0..n).map(|i| self.c[i] - rhs.c[i]).collect(),
        }
    }
}

impl<'a> Div<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self * &rhs.recip()
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        if rhs.order < self.order {
            *self = self.truncate(rhs.order);
        }
        for (a, b) in self.c.iter_mut().zip(&rhs.c) {
            *a += b;
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

macro_rules! scalar_ops {
    ($lhs:ty) => {
        impl Add<f64> for $lhs {
            type Output = Jet;
            fn add(self, rhs: f64) -> Jet {
                let mut out = self.clone();
                out.c[0] += rhs;
                out
            }
        }
        impl Sub<f64> for $lhs {
            type Output = Jet;
            fn sub(self, rhs: f64) -> Jet {
                let mut out = self.clone();
                out.c[0] -= rhs;
                out
            }
        }
        impl Mul<f64> for $lhs {
            type Output = Jet;
            fn mul(self, rhs: f64) -> Jet {
                self.scale(rhs)
            }
        }
        impl Div<f64> for $lhs {
            type Output = Jet;
            fn div(self, rhs: f64) -> Jet {
                self.scale(1.0 / rhs)
            }
        }
        impl Add<$lhs> for f64 {
            type Output = Jet;
            fn add(self, rhs: $lhs) -> Jet {
                rhs + self
            }
        }
        impl Sub<$lhs> for f64 {
            type Output = Jet;
            fn sub(self, rhs: $lhs) -> Jet {
                let mut out = -rhs.clone();
                out.c[0] += self;
                out
            }
        }
        impl Mul<$lhs> for f64 {
            type Output = Jet;
            fn mul(self, rhs: $lhs) -> Jet {
                rhs.scale(self)
            }
        }
        impl Div<$lhs> for f64 {
            type Output = Jet;
            fn div(self, rhs: $lhs) -> Jet {
                rhs.recip().scale(self)
            }
        }
    };
}

scalar_ops!(Jet);
scalar_ops!(&Jet);

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn layout_counts_match_binomials() {
        // C(k + 4, 4)
        assert_eq!(coefficient_count(0), 1);
        assert_eq!(coefficient_count(1), 5);
        assert_eq!(coefficient_count(2), 15);
        assert_eq!(coefficient_count(4), 70);
        assert_eq!(coefficient_count(8), 495);
    }

    #[test]
    fn product_of_variables() {
        let x = Jet::variable(1, 2.0, 3);
        let y = Jet::variable(2, -1.0, 3);
        let p = &x * &y;
        assert_eq!(p.value(), -2.0);
        assert_eq!(p.partial([0, 1, 0, 0]).unwrap(), -1.0);
        assert_eq!(p.partial([0, 0, 1, 0]).unwrap(), 2.0);
        assert_eq!(p.partial([0, 1, 1, 0]).unwrap(), 1.0);
        assert_eq!(p.partial([0, 2, 0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn exp_sin_ln_derivatives() {
        let t = Jet::variable(0, 0.3, 4);
        let e = (&t * 2.0).exp();
        for n in 0..=4u8 {
            let expect = 2f64.powi(n as i32) * (0.6f64).exp();
            assert!(approx(e.partial([n, 0, 0, 0]).unwrap(), expect, 1e-13));
        }
        let s = t.sin();
        assert!(approx(s.partial([3, 0, 0, 0]).unwrap(), -(0.3f64).cos(), 1e-13));
        let l = (&t + 1.0).ln();
        assert!(approx(l.partial([2, 0, 0, 0]).unwrap(), -1.0 / 1.3f64.powi(2), 1e-13));
    }

    #[test]
    fn radius_jet_mixed_partials() {
        let (x, y, z) = (0.4, -1.2, 0.7);
        let j = [
            Jet::variable(1, x, 2),
            Jet::variable(2, y, 2),
            Jet::variable(3, z, 2),
        ];
        let r = (&j[0].square() + &j[1].square() + j[2].square()).sqrt();
        let rv = (x * x + y * y + z * z).sqrt();
        assert!(approx(r.value(), rv, 1e-15));
        assert!(approx(r.partial([0, 1, 0, 0]).unwrap(), x / rv, 1e-14));
        // ∂1∂2 r = -x y / r^3
        assert!(approx(r.partial([0, 1, 1, 0]).unwrap(), -x * y / rv.powi(3), 1e-13));
    }

    #[test]
    fn derivative_lowers_order() {
        let x = Jet::variable(1, 1.5, 3);
        let f = x.powi(3);
        let df = f.d(1).unwrap();
        assert_eq!(df.order(), 2);
        assert!(approx(df.value(), 3.0 * 1.5 * 1.5, 1e-14));
        assert!(approx(df.partial([0, 1, 0, 0]).unwrap(), 6.0 * 1.5, 1e-14));
        assert!(Jet::constant(1.0, 0).d(0).is_err());
    }

    #[test]
    fn division_and_powf() {
        let x = Jet::variable(1, 2.0, 3);
        let q = 1.0 / &x;
        assert!(approx(q.partial([0, 2, 0, 0]).unwrap(), 2.0 / 8.0, 1e-14));
        let p = x.powf(1.5);
        assert!(approx(p.partial([0, 1, 0, 0]).unwrap(), 1.5 * 2f64.sqrt(), 1e-14));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn point_jet(vals: [f64; 4], order: usize) -> [Jet; 4] {
            [0, 1, 2, 3].map(|i| Jet::variable(i, vals[i], order))
        }

        proptest! {
            #[test]
            fn product_rule(v in prop::array::uniform4(-2.0f64..2.0), i in 0usize..4) {
                let [t, x, y, z] = point_jet(v, 3);
                let f = (&t * &x).sin() + &y;
                let g = (&(&z * &x) * 0.5).exp();
                let lhs = (&f * &g).d(i).unwrap();
                let rhs = &(&f.d(i).unwrap() * &g.truncate(2)) + &(&f.truncate(2) * &g.d(i).unwrap());
                for (a, b) in lhs.taylor_coeffs().iter().zip(rhs.taylor_coeffs()) {
                    prop_assert!(approx(*a, *b, 1e-12));
                }
            }

            #[test]
            fn inverse_functions(v in prop::array::uniform4(0.5f64..3.0)) {
                let [t, x, _, _] = point_jet(v, 4);
                let q = &t * &t + &x;
                let back = q.sqrt().square();
                let one = &q.recip() * &q;
                let logexp = q.ln().exp();
                let unit = Jet::constant(1.0, 4);
                for (a, b) in back.taylor_coeffs().iter().zip(q.taylor_coeffs()) {
                    prop_assert!(approx(*a, *b, 1e-11));
                }
                for (a, b) in logexp.taylor_coeffs().iter().zip(q.taylor_coeffs()) {
                    prop_assert!(approx(*a, *b, 1e-11));
                }
                for (a, b) in one.taylor_coeffs().iter().zip(unit.taylor_coeffs()) {
                    prop_assert!(approx(*a, *b, 1e-11));
                }
            }
        }
    }
}
