//! Radial solutions of `□_c u = 0` through the one-dimensional reduction `v = ru`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{Point, Vars, R_MIN};
use crate::jet::{monomials, Jet, MAX_ORDER};

use super::quadrature::integrate_scalar;

/// Below this radius `u = v/r` is evaluated from the odd Taylor expansion of `v`.
pub const R_SERIES: f64 = 1e-3;

type ProfileFn = dyn Fn(&Jet) -> Jet + Send + Sync;

/// A radial function `f(|x|)` given as a function of `q = |x|²`, which keeps
/// its odd extension `s f(s²)` smooth through `s = 0`.
#[derive(Clone)]
pub struct RadialProfile(Arc<ProfileFn>);

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("RadialProfile")
    }
}

impl RadialProfile {
    pub fn new(f: impl Fn(&Jet) -> Jet + Send + Sync + 'static) -> Self {
        RadialProfile(Arc::new(f))
    }

    pub fn zero() -> Self {
        RadialProfile::new(|q| Jet::zero(q.order()))
    }

    /// `a e^{-r²/w²}`.
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        let k = 1.0 / (width * width);
        RadialProfile::new(move |q| (q * (-k)).exp() * amplitude)
    }

    /// `a exp(1 - 1/(1 - r²/R²))` for `r < R`, zero outside: smooth, compactly
    /// supported, peak `a` at the origin.
    pub fn bump(amplitude: f64, radius: f64) -> Self {
        let r2 = radius * radius;
        RadialProfile::new(move |q| {
            if q.value() >= r2 {
                return Jet::zero(q.order());
            }
            let inner = 1.0 - (q / r2);
            (1.0 - inner.recip()).exp() * amplitude
        })
    }

    /// Evaluates on a jet of `q = r²`.
    pub fn eval_q(&self, q: &Jet) -> Jet {
        (self.0)(q)
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval_q(&Jet::constant(r * r, 0)).value()
    }

    /// Derivatives `d^k/ds^k [s f(s²)]` at `s`, `k = 0..=order`.
    fn odd_extension_derivs(&self, s: f64, order: usize) -> Vec<f64> {
        let sj = Jet::variable(0, s, order);
        let odd = &sj * &self.eval_q(&sj.square());
        let mut fact = 1.0;
        (0..=order)
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                fact * odd.taylor([k as u8, 0, 0, 0])
            })
            .collect()
    }
}

/// Radial Cauchy data `u(0) = φ(|x|)`, `∂_t u(0) = ψ(|x|)`.
#[derive(Clone)]
pub struct RadialData {
    pub phi: RadialProfile,
    pub psi: RadialProfile,
    /// `G(q)` with `G' = g` where `ψ(r) = g(r²)`; enables the closed-form integral.
    pub psi_primitive: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    pub support_radius: Option<f64>,
}

impl fmt::Debug for RadialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialData")
            .field("closed_form_primitive", &self.psi_primitive.is_some())
            .field("support_radius", &self.support_radius)
            .finish()
    }
}

impl RadialData {
    pub fn new(phi: RadialProfile, psi: RadialProfile) -> Self {
        RadialData { phi, psi, psi_primitive: None, support_radius: None }
    }

    pub fn with_psi_primitive(mut self, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.psi_primitive = Some(Arc::new(g));
        self
    }

    pub fn with_support(mut self, radius: f64) -> Self {
        self.support_radius = Some(radius);
        self
    }

    /// `∫_a^b s ψ(|s|) ds`.
    fn psi_integral(&self, a: f64, b: f64) -> Result<f64> {
        match &self.psi_primitive {
            Some(g) => Ok(0.5 * (g(b * b) - g(a * a))),
            None => {
                let psi = &self.psi;
                integrate_scalar(|s| Ok(s * psi.eval_q(&Jet::constant(s * s, 0)).value()), a, b, 1e-14)
            }
        }
    }
}

/// Jet of `v = ru` in the variables `(t, r)` (jet slots 0 and 1).
fn v_jet(data: &RadialData, c: f64, t: f64, r: f64, order: usize) -> Result<Jet> {
    let (sp, sm) = (r + c * t, r - c * t);
    let tau = Jet::variable(0, 0.0, order);
    let rho = Jet::variable(1, 0.0, order);
    let hp = &rho + &(&tau * c) + sp;
    let hm = &rho - &(&tau * c) + sm;

    let phi_p = data.phi.odd_extension_derivs(sp, order);
    let phi_m = data.phi.odd_extension_derivs(sm, order);
    let mut prim_p = vec![data.psi_integral(sm, sp)?];
    let mut prim_m = vec![0.0];
    if order > 0 {
        prim_p.extend(data.psi.odd_extension_derivs(sp, order - 1));
        prim_m.extend(data.psi.odd_extension_derivs(sm, order - 1));
    }
    let v = (hp.compose(&phi_p) + hm.compose(&phi_m)) * 0.5
        + (hp.compose(&prim_p) - hm.compose(&prim_m)) * (0.5 / c);
    Ok(v)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Jet of the radial solution `u(t, r)` in the variables `(t, r)`.
pub fn radial_free_jet(data: &RadialData, c: f64, t: f64, r: f64, order: usize) -> Result<Jet> {
    if !(c > 0.0) {
        return Err(Error::argument("speed must be positive"));
    }
    if !(t >= 0.0 && r >= 0.0) {
        return Err(Error::domain(format!("radial solution needs t, r >= 0, got t={t}, r={r}")));
    }
    if r >= R_SERIES {
        if order > MAX_ORDER {
            return Err(Error::Order { requested: order, available: MAX_ORDER });
        }
        let v = v_jet(data, c, t, r, order)?;
        return Ok(v * Jet::variable(1, r, order).recip());
    }
    // v is odd in r: divide its expansion at r = 0 by r, then re-centre at r.
    let big = order + 3;
    if big > MAX_ORDER {
        return Err(Error::Order { requested: big, available: MAX_ORDER });
    }
    let v = v_jet(data, c, t, 0.0, big)?;
    let b = |i: usize, j: usize| v.taylor([i as u8, (j + 1) as u8, 0, 0]);
    let coeffs = monomials(order)
        .iter()
        .map(|e| {
            if e[2] != 0 || e[3] != 0 {
                return 0.0;
            }
            let (i, m) = (e[0] as usize, e[1] as usize);
            (m..big - i).map(|j| b(i, j) * binomial(j, m) * r.powi((j - m) as i32)).sum()
        })
        .collect();
    Jet::from_taylor(order, coeffs)
}

/// Re-expands a jet in `(t, r)` (slots 0 and 1) as a spacetime jet at `p`,
/// by substituting `r = |x|`. Needs `x ≠ 0` unless `order = 0`.
pub fn radial_to_cartesian(jet_tr: &Jet, p: Point) -> Result<Jet> {
    let order = jet_tr.order();
    let r0 = p.r();
    if order > 0 && r0 < R_MIN {
        return Err(Error::domain(format!("|x| = {r0} too close to the origin for a cartesian jet")));
    }
    let vars = Vars::at(p, order);
    let dt = Jet::variable(0, 0.0, order);
    let dr = vars.r() - r0;
    let mut out = Jet::zero(order);
    let mut tp = Jet::constant(1.0, order);
    for i in 0..=order {
        let mut rp = tp.clone();
        for j in 0..=order - i {
            let a = jet_tr.taylor([i as u8, j as u8, 0, 0]);
            if a != 0.0 {
                out += &(&rp * a);
            }
            rp = &rp * &dr;
        }
        tp = &tp * &dt;
    }
    Ok(out)
}

/// Spacetime jet of the radial solution at `p`.
pub fn radial_free_xjet(data: &RadialData, c: f64, p: Point, order: usize) -> Result<Jet> {
    radial_to_cartesian(&radial_free_jet(data, c, p.t, p.r(), order)?, p)
}

/// `u(t, r)` for radial data, from d'Alembert's formula for `v = ru`.
pub fn radial_free(data: &RadialData, c: f64, t: f64, r: f64) -> Result<f64> {
    Ok(radial_free_jet(data, c, t, r, 0)?.value())
}
