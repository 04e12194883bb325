//! Null forms `Q_0` and `Q_ab`, the identities that expose their extra
//! decay, the null-form estimate harness, and the algebraic null-condition
//! check for quadratic symbols.

mod identities;
mod nfes;
mod symbol;

pub use identities::{identity_residual, modulated_wave, outgoing_gaussian, random_points, IdentityKind};
pub use nfes::{nfes_ratio, NullFormKind, RatioStats};
pub use symbol::{
    null_condition_check, LowerOrderTerm, NullCheck, NullWitness, QuadraticSymbol,
    QuasilinearTerm, SemilinearTerm, SymbolPart,
};

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::jet::Jet;

/// `Q_0(v, w; c)` on jets of order ≥ 1; the result has one order less.
pub fn q0_jet(v: &Jet, w: &Jet, c: f64) -> Result<Jet> {
    let mut space = v.d(1)? * w.d(1)?;
    space += &(v.d(2)? * w.d(2)?);
    space += &(v.d(3)? * w.d(3)?);
    Ok(v.d(0)? * w.d(0)? - space * (c * c))
}

/// `Q_ab(v, w)` on jets of order ≥ 1.
pub fn qab_jet(v: &Jet, w: &Jet, a: usize, b: usize) -> Result<Jet> {
    Ok(v.d(a)? * w.d(b)? - v.d(b)? * w.d(a)?)
}

fn check_ab(a: usize, b: usize) -> Result<()> {
    if a < b && b <= 3 {
        Ok(())
    } else {
        Err(Error::argument(format!("Q_ab needs 0 <= a < b <= 3, got a={a}, b={b}")))
    }
}

/// The field `Q_0(v, w; c) = ∂_t v ∂_t w - c² ∇v·∇w`.
pub fn q0(v: &ScalarField, w: &ScalarField, c: f64) -> ScalarField {
    let (v, w) = (v.clone(), w.clone());
    let max_order = v.max_order().min(w.max_order()).saturating_sub(1);
    ScalarField::from_evaluator(v.kind(), max_order, move |p, k| {
        q0_jet(&v.jet(p, k + 1)?, &w.jet(p, k + 1)?, c)
    })
}

/// The field `Q_ab(v, w) = ∂_a v ∂_b w - ∂_b v ∂_a w`, `0 ≤ a < b ≤ 3`.
pub fn qab(v: &ScalarField, w: &ScalarField, a: usize, b: usize) -> Result<ScalarField> {
    check_ab(a, b)?;
    let (v, w) = (v.clone(), w.clone());
    let max_order = v.max_order().min(w.max_order()).saturating_sub(1);
    Ok(ScalarField::from_evaluator(v.kind(), max_order, move |p, k| {
        qab_jet(&v.jet(p, k + 1)?, &w.jet(p, k + 1)?, a, b)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Point;

    fn t() -> ScalarField {
        ScalarField::analytic(|v| v.t.clone())
    }
    fn xj(j: usize) -> ScalarField {
        ScalarField::analytic(move |v| v.x[j - 1].clone())
    }

    #[test]
    fn q0_examples() {
        let p = Point::new(0.7, [0.2, -0.4, 1.1]);
        assert_eq!(q0(&t(), &t(), 1.0).value(p).unwrap(), 1.0);
        assert_eq!(q0(&t(), &xj(1), 1.0).value(p).unwrap(), 0.0);
        assert_eq!(q0(&xj(1), &xj(1), 3.0).value(p).unwrap(), -9.0);
    }

    #[test]
    fn qab_examples() {
        let p = Point::new(0.7, [0.2, -0.4, 1.1]);
        assert_eq!(qab(&t(), &xj(1), 0, 1).unwrap().value(p).unwrap(), 1.0);
        assert_eq!(qab(&xj(1), &xj(2), 1, 2).unwrap().value(p).unwrap(), 1.0);
        let v = ScalarField::analytic(|v| (&v.t * &v.x[1]).sin() + v.x[2].square());
        for (a, b) in [(0, 1), (0, 3), (1, 2), (2, 3)] {
            assert_eq!(qab(&v, &v, a, b).unwrap().value(p).unwrap(), 0.0);
        }
        assert!(qab(&v, &v, 2, 1).is_err());
        assert!(qab(&v, &v, 1, 1).is_err());
    }

    #[test]
    fn q0_is_bilinear_and_symmetric() {
        let v1 = ScalarField::analytic(|v| (&v.t - &v.r()).exp() * &v.x[0]);
        let v2 = ScalarField::analytic(|v| (&v.x[1] * &v.t).cos());
        let w = ScalarField::analytic(|v| v.r2().recip() + &v.t);
        let (a, b) = (1.7, -0.3);
        let comb = v1.scale(a).add(&v2.scale(b));
        for p in [Point::new(1.0, [0.3, 0.4, 0.5]), Point::new(3.0, [-1.0, 2.0, 0.1])] {
            let lhs = q0(&comb, &w, 2.0).value(p).unwrap();
            let rhs = a * q0(&v1, &w, 2.0).value(p).unwrap() + b * q0(&v2, &w, 2.0).value(p).unwrap();
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
            let sym = q0(&w, &comb, 2.0).value(p).unwrap();
            assert!((lhs - sym).abs() < 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
