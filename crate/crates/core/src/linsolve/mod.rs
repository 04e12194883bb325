//! Linear solution operators of `□_c u = G` in three space dimensions:
//! Kirchhoff's formula for Cauchy data, Duhamel's principle for sources, and
//! the radial d'Alembert reduction used as an oracle.

mod quadrature;
mod radial;

pub use quadrature::{
    gauss_legendre, integrate_adaptive, integrate_scalar, spherical_mean, SphereNode, SphereRule,
};
pub use radial::{
    radial_free, radial_free_jet, radial_free_xjet, radial_to_cartesian, RadialData, RadialProfile, R_SERIES,
};

use crate::error::{Error, Result};
use crate::fields::{FieldKind, Point, ScalarField};
use crate::jet::{monomials, Jet, MAX_ORDER};

/// Highest jet order the solution operators produce.
pub const MAX_SOLUTION_ORDER: usize = 4;

/// Cauchy data `u(0) = ε φ`, `∂_t u(0) = ε ψ`.
#[derive(Clone, Debug)]
pub struct CauchyData {
    pub phi: ScalarField,
    pub psi: ScalarField,
    pub scale: f64,
    /// Both fields vanish for `|x| > R`.
    pub support_radius: Option<f64>,
    /// Profiles, when the data are radial.
    pub radial: Option<RadialData>,
}

fn profile_field(p: &RadialProfile) -> ScalarField {
    let p = p.clone();
    ScalarField::analytic(move |v| p.eval_q(&v.r2()))
}

impl CauchyData {
    pub fn new(phi: ScalarField, psi: ScalarField) -> Self {
        CauchyData { phi, psi, scale: 1.0, support_radius: None, radial: None }
    }

    pub fn from_radial(data: RadialData) -> Self {
        CauchyData {
            phi: profile_field(&data.phi),
            psi: profile_field(&data.psi),
            scale: 1.0,
            support_radius: data.support_radius,
            radial: Some(data),
        }
    }

    pub fn with_support(mut self, radius: f64) -> Self {
        self.support_radius = Some(radius);
        self
    }

    pub fn with_scale(mut self, eps: f64) -> Self {
        self.scale = eps;
        self
    }
}

/// `G(τ, y) = 0` unless `||y| - (a + sτ)| ≤ h`: a shell moving at speed `s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShellSupport {
    pub offset: f64,
    pub speed: f64,
    pub half_width: f64,
}

/// A source `G` on `[0, T] × ℝ³`.
#[derive(Clone, Debug)]
pub struct SourceTerm {
    pub g: ScalarField,
    pub t_max: f64,
    /// `G(τ, y) = 0` for `|y| > R`.
    pub support_radius: Option<f64>,
    pub shell: Option<ShellSupport>,
    /// `G(τ, ·) = 0` outside `[τ_0, τ_1]`.
    pub time_support: Option<(f64, f64)>,
    /// `G(τ, ·)` is radial for every `τ`.
    pub radial: bool,
}

impl SourceTerm {
    pub fn new(g: ScalarField, t_max: f64) -> Self {
        SourceTerm { g, t_max, support_radius: None, shell: None, time_support: None, radial: false }
    }

    pub fn with_support(mut self, radius: f64) -> Self {
        self.support_radius = Some(radius);
        self
    }

    pub fn with_shell(mut self, shell: ShellSupport) -> Self {
        self.shell = Some(shell);
        self
    }

    /// Radii `[r_in, r_out]` outside which `G(τ, ·)` vanishes, if known.
    pub fn band(&self, tau: f64) -> Option<(f64, f64)> {
        let ball = self.support_radius.map(|r| (0.0, r));
        let shell = self.shell.map(|s| {
            let mid = s.offset + s.speed * tau;
            ((mid - s.half_width).max(0.0), mid + s.half_width)
        });
        match (ball, shell) {
            (Some(b), Some(s)) => Some((s.0, b.1.min(s.1))),
            (b, s) => b.or(s),
        }
    }

    pub fn with_time_support(mut self, t0: f64, t1: f64) -> Self {
        self.time_support = Some((t0, t1));
        self
    }

    pub fn radial(mut self) -> Self {
        self.radial = true;
        self
    }
}

/// Quadrature settings shared by the solution operators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub rule: SphereRule,
    /// Absolute tolerance of the time integration, relative to `1 + |u|`.
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { rule: SphereRule::default(), abs_tol: 1e-8, max_panels: 200 }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    Position,
    Velocity,
}

#[derive(Clone, Copy)]
struct Term {
    coeff: f64,
    role: Role,
    gamma: [u8; 3],
}

/// For one derivative `∂^β u` of a free solution: the data `(Φ_β, Ψ_β)` of
/// the free solution that `∂^β u` itself is, as combinations of derivatives
/// of the original data.
struct BetaPlan {
    beta: [u8; 4],
    big_phi: Vec<Term>,
    grad_phi: [Vec<Term>; 3],
    big_psi: Vec<Term>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `coeff · Δ^n ∂^γ` applied to `role`.
fn laplacian_power(n: usize, gamma: [u8; 3], coeff: f64, role: Role) -> Vec<Term> {
    let mut out = Vec::new();
    for n1 in 0..=n {
        for n2 in 0..=n - n1 {
            let n3 = n - n1 - n2;
            let multinomial = factorial(n) / (factorial(n1) * factorial(n2) * factorial(n3));
            let g = [
                gamma[0] + 2 * n1 as u8,
                gamma[1] + 2 * n2 as u8,
                gamma[2] + 2 * n3 as u8,
            ];
            out.push(Term { coeff: coeff * multinomial, role, gamma: g });
        }
    }
    out
}

fn build_plan(order: usize, c: f64) -> Vec<BetaPlan> {
    monomials(order)
        .iter()
        .map(|&beta| {
            let k = beta[0] as usize;
            let n = k / 2;
            let gx = [beta[1], beta[2], beta[3]];
            let c2n = c.powi(2 * n as i32);
            // ∂_t^{2n} u has data c^{2n}Δ^n(φ, ψ); ∂_t^{2n+1} u has c^{2n}Δ^n(ψ, c²Δφ).
            let (big_phi, big_psi) = if k.is_multiple_of(2) {
                (
                    laplacian_power(n, gx, c2n, Role::Position),
                    laplacian_power(n, gx, c2n, Role::Velocity),
                )
            } else {
                (
                    laplacian_power(n, gx, c2n, Role::Velocity),
                    laplacian_power(n + 1, gx, c2n * c * c, Role::Position),
                )
            };
            let grad = |j: usize| {
                big_phi
                    .iter()
                    .map(|t| {
                        let mut g = t.gamma;
                        g[j] += 1;
                        Term { gamma: g, ..*t }
                    })
                    .collect()
            };
            let grad_phi = [grad(0), grad(1), grad(2)];
            BetaPlan { beta, big_phi, grad_phi, big_psi }
        })
        .collect()
}

fn eval_terms(terms: &[Term], pos: Option<&Jet>, vel: &Jet) -> Result<f64> {
    let mut sum = 0.0;
    for t in terms {
        let jet = match t.role {
            Role::Position => match pos {
                Some(j) => j,
                None => continue,
            },
            Role::Velocity => vel,
        };
        sum += t.coeff * jet.partial([0, t.gamma[0], t.gamma[1], t.gamma[2]])?;
    }
    Ok(sum)
}

/// `∂^β` of the free solution at time `s` with data given through jet callbacks
/// at the sphere nodes: `M[Φ] + cs M[ω·∇Φ] + s M[Ψ]`.
#[allow(clippy::too_many_arguments)]
fn kirchhoff_derivatives(
    plan: &[BetaPlan],
    order: usize,
    c: f64,
    s: f64,
    x: [f64; 3],
    band: Option<(f64, f64)>,
    radial: bool,
    rule: &SphereRule,
    mut data_at: impl FnMut([f64; 3]) -> Result<(Option<Jet>, Jet)>,
) -> Result<Vec<f64>> {
    let rho = c * s;
    let modes = if radial { Some(order + 2) } else { None };
    let mut out = vec![0.0; plan.len()];
    for node in rule.nodes(x, rho, band, modes) {
        let (pos, vel) = data_at(node.y)?;
        for (o, p) in out.iter_mut().zip(plan) {
            let big_phi = eval_terms(&p.big_phi, pos.as_ref(), &vel)?;
            let mut radial_deriv = 0.0;
            for j in 0..3 {
                radial_deriv += node.omega[j] * eval_terms(&p.grad_phi[j], pos.as_ref(), &vel)?;
            }
            let big_psi = eval_terms(&p.big_psi, pos.as_ref(), &vel)?;
            *o += node.weight * (big_phi + rho * radial_deriv + s * big_psi);
        }
    }
    Ok(out)
}

fn assemble(plan: &[BetaPlan], order: usize, derivs: &[f64], scale: f64) -> Result<Jet> {
    let coeffs = plan
        .iter()
        .zip(derivs)
        .map(|(p, d)| {
            let denom: f64 = p.beta.iter().map(|&b| factorial(b as usize)).product();
            scale * d / denom
        })
        .collect();
    Jet::from_taylor(order, coeffs)
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_SOLUTION_ORDER || order + 1 > MAX_ORDER {
        Err(Error::Order { requested: order, available: MAX_SOLUTION_ORDER })
    } else {
        Ok(())
    }
}

fn check_speed(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::argument(format!("speed must be positive, got {c}")))
    }
}

/// Jet of `U*_c[φ, ψ](t, x) = ∂_t(t M_{ct}[φ](x)) + t M_{ct}[ψ](x)` (times ε).
pub fn solve_free_jet(
    data: &CauchyData,
    c: f64,
    t: f64,
    x: [f64; 3],
    order: usize,
    opts: &SolverOptions,
) -> Result<Jet> {
    check_speed(c)?;
    check_order(order)?;
    if !(t >= 0.0) {
        return Err(Error::domain(format!("free solution needs t >= 0, got {t}")));
    }
    let plan = build_plan(order, c);
    let derivs = kirchhoff_derivatives(
        &plan,
        order,
        c,
        t,
        x,
        data.support_radius.map(|r| (0.0, r)),
        data.radial.is_some(),
        &opts.rule,
        |y| {
            let p = Point::new(0.0, y);
            Ok((Some(data.phi.jet(p, order + 1)?), data.psi.jet(p, order)?))
        },
    )?;
    assemble(&plan, order, &derivs, data.scale)
}

pub fn solve_free(data: &CauchyData, c: f64, t: f64, x: [f64; 3], opts: &SolverOptions) -> Result<f64> {
    Ok(solve_free_jet(data, c, t, x, 0, opts)?.value())
}

/// Times `τ` at which the sphere `|y - x| = c(t - τ)` can meet the source.
fn duhamel_window(src: &SourceTerm, c: f64, t: f64, x: [f64; 3]) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (0.0f64, t);
    if let Some((a, b)) = src.time_support {
        lo = lo.max(a);
        hi = hi.min(b);
    }
    let d = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    // each constraint reads α τ ≤ β
    let mut constrain = |alpha: f64, beta: f64| {
        if alpha > 0.0 {
            hi = hi.min(beta / alpha);
        } else if alpha < 0.0 {
            lo = lo.max(beta / alpha);
        } else if beta < 0.0 {
            hi = f64::NEG_INFINITY;
        }
    };
    if let Some(r) = src.support_radius {
        constrain(c, r + c * t - d);
        constrain(-c, r - c * t + d);
    }
    if let Some(sh) = src.shell {
        // outer radius a + h + sτ must reach the sphere, inner radius must not pass it
        let outer = sh.offset + sh.half_width;
        let inner = sh.offset - sh.half_width;
        constrain(c - sh.speed, outer + c * t - d);
        constrain(-(c + sh.speed), outer - c * t + d);
        constrain(c + sh.speed, d + c * t - inner);
    }
    (lo < hi).then_some((lo, hi))
}

/// Jet of `U_c[G](t, x) = ∫_0^t (t-τ) M_{c(t-τ)}[G(τ)](x) dτ`.
pub fn solve_duhamel_jet(
    src: &SourceTerm,
    c: f64,
    t: f64,
    x: [f64; 3],
    order: usize,
    opts: &SolverOptions,
) -> Result<Jet> {
    check_speed(c)?;
    check_order(order)?;
    if !(t >= 0.0 && t <= src.t_max) {
        return Err(Error::domain(format!("Duhamel solution needs 0 <= t <= {}, got {t}", src.t_max)));
    }
    let plan = build_plan(order, c);
    let mut derivs = match duhamel_window(src, c, t, x) {
        None => vec![0.0; plan.len()],
        Some((lo, hi)) => integrate_adaptive(
            |tau| {
                kirchhoff_derivatives(
                    &plan,
                    order,
                    c,
                    t - tau,
                    x,
                    src.band(tau),
                    src.radial,
                    &opts.rule,
                    |y| Ok((None, src.g.jet(Point::new(tau, y), order)?)),
                )
            },
            lo,
            hi,
            opts.abs_tol,
            opts.max_panels,
        )?,
    };
    // ∂_t^k picks up Σ_{2n+1 ≤ k-1} c^{2n} ∂_t^{k-2-2n} Δ^n ∂_x^γ G(t, x).
    if order >= 2 {
        let g = src.g.jet(Point::new(t, x), order)?;
        for (d, p) in derivs.iter_mut().zip(&plan) {
            let k = p.beta[0] as usize;
            let mut n = 0;
            while 2 * n + 2 <= k {
                let dt = (k - 2 - 2 * n) as u8;
                let gx = [p.beta[1], p.beta[2], p.beta[3]];
                for term in laplacian_power(n, gx, c.powi(2 * n as i32), Role::Velocity) {
                    *d += term.coeff * g.partial([dt, term.gamma[0], term.gamma[1], term.gamma[2]])?;
                }
                n += 1;
            }
        }
    }
    assemble(&plan, order, &derivs, 1.0)
}

pub fn solve_duhamel(src: &SourceTerm, c: f64, t: f64, x: [f64; 3], opts: &SolverOptions) -> Result<f64> {
    Ok(solve_duhamel_jet(src, c, t, x, 0, opts)?.value())
}

/// `U*_c[φ, ψ]` as a field (jets up to [`MAX_SOLUTION_ORDER`]).
pub fn free_solution_field(data: CauchyData, c: f64, opts: SolverOptions) -> ScalarField {
    ScalarField::from_evaluator(FieldKind::Analytic, MAX_SOLUTION_ORDER, move |p, k| {
        solve_free_jet(&data, c, p.t, p.x, k, &opts)
    })
}

/// `U_c[G]` as a field (jets up to [`MAX_SOLUTION_ORDER`]).
pub fn duhamel_field(src: SourceTerm, c: f64, opts: SolverOptions) -> ScalarField {
    ScalarField::from_evaluator(FieldKind::Analytic, MAX_SOLUTION_ORDER, move |p, k| {
        solve_duhamel_jet(&src, c, p.t, p.x, k, &opts)
    })
}
