//! Spacetime scalar fields with derivative jets, and the vector-field algebra
//! `Z = {∂_a, Ω_jk}` together with the auxiliary fields `S`, `L_{c,j}`,
//! `D_{±,c}`, `∂_r` and `T_{c,j}` used for cross-checks.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::{Jet, MAX_ORDER, NVARS};

/// Smallest radius at which r-dependent operators are evaluated.
pub const R_MIN: f64 = 1e-3;

/// A spacetime point `(t, x)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Point {
    pub t: f64,
    pub x: [f64; 3],
}

impl Point {
    pub fn new(t: f64, x: [f64; 3]) -> Self {
        Point { t, x }
    }

    /// Point at time `t`, radius `r`, direction `omega` (unit vector).
    pub fn polar(t: f64, r: f64, omega: [f64; 3]) -> Self {
        Point {
            t,
            x: [r * omega[0], r * omega[1], r * omega[2]],
        }
    }

    pub fn r(&self) -> f64 {
        (self.x[0] * self.x[0] + self.x[1] * self.x[1] + self.x[2] * self.x[2]).sqrt()
    }
}

/// Seeded coordinate jets at an expansion point; the input of analytic fields.
#[derive(Clone, Debug)]
pub struct Vars {
    pub t: Jet,
    pub x: [Jet; 3],
}

impl Vars {
    pub fn at(p: Point, order: usize) -> Self {
        Vars {
            t: Jet::variable(0, p.t, order),
            x: [
                Jet::variable(1, p.x[0], order),
                Jet::variable(2, p.x[1], order),
                Jet::variable(3, p.x[2], order),
            ],
        }
    }

    pub fn order(&self) -> usize {
        self.t.order()
    }

    pub fn constant(&self, v: f64) -> Jet {
        Jet::constant(v, self.order())
    }

    /// `|x|²`
    pub fn r2(&self) -> Jet {
        &(&self.x[0].square() + &self.x[1].square()) + &self.x[2].square()
    }

    /// `|x|`; the expansion point must not be the origin.
    pub fn r(&self) -> Jet {
        self.r2().sqrt()
    }
}

/// How a field's jets are produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FieldKind {
    /// Closed-form jets, exact to working precision.
    Analytic,
    /// Closed-form jets of a field built as a manufactured solution or source.
    Manufactured,
    /// Jets by centered differences of pointwise samples, error `O(step^p)`.
    GridSampled { truncation_order: u32, step: f64 },
}

type Evaluator = dyn Fn(Point, usize) -> Result<Jet> + Send + Sync;

/// An evaluable spacetime function `(t, x, order) -> Jet`.
#[derive(Clone)]
pub struct ScalarField {
    eval: Arc<Evaluator>,
    kind: FieldKind,
    max_order: usize,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("kind", &self.kind)
            .field("max_order", &self.max_order)
            .finish()
    }
}

/// Highest total derivative order the centered-difference jets provide.
pub const SAMPLED_MAX_ORDER: usize = 4;

// Second-order accurate central stencils for d^n/dx^n, n = 0..4, as (offset, weight).
const STENCILS: [&[(i8, f64)]; 5] = [
    &[(0, 1.0)],
    &[(-1, -0.5), (1, 0.5)],
    &[(-1, 1.0), (0, -2.0), (1, 1.0)],
    &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
    &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
];

/// Taylor jet of order `order` from pointwise samples via tensor-product
/// central differences of step `h` (truncation error `O(h²)`).
pub fn finite_difference_jet(
    sample: &dyn Fn(Point) -> Result<f64>,
    p: Point,
    order: usize,
    h: f64,
) -> Result<Jet> {
    if order > SAMPLED_MAX_ORDER {
        return Err(Error::Order {
            requested: order,
            available: SAMPLED_MAX_ORDER,
        });
    }
    let mut cache: HashMap<[i8; NVARS], f64> = HashMap::new();
    let mut coeffs = Vec::with_capacity(crate::jet::coefficient_count(order));
    for alpha in crate::jet::monomials(order) {
        let mut acc = 0.0;
        let mut stack = vec![([0i8; NVARS], 1.0f64, 0usize)];
        while let Some((off, w, var)) = stack.pop() {
            if var == NVARS {
                let v = match cache.get(&off) {
                    Some(v) => *v,
                    None => {
                        let q = Point {
                            t: p.t + off[0] as f64 * h,
                            x: [
                                p.x[0] + off[1] as f64 * h,
                                p.x[1] + off[2] as f64 * h,
                                p.x[2] + off[3] as f64 * h,
                            ],
                        };
                        let v = sample(q)?;
                        cache.insert(off, v);
                        v
                    }
                };
                acc += w * v;
                continue;
            }
            for &(o, sw) in STENCILS[alpha[var] as usize] {
                let mut next = off;
                next[var] = o;
                stack.push((next, w * sw, var + 1));
            }
        }
        let deg: i32 = alpha.iter().map(|&a| a as i32).sum();
        let fact: f64 = alpha
            .iter()
            .map(|&a| (1..=a as u32).product::<u32>() as f64)
            .product();
        coeffs.push(acc / h.powi(deg) / fact);
    }
    Jet::from_taylor(order, coeffs)
}

impl ScalarField {
    pub fn from_evaluator(
        kind: FieldKind,
        max_order: usize,
        eval: impl Fn(Point, usize) -> Result<Jet> + Send + Sync + 'static,
    ) -> Self {
        ScalarField {
            eval: Arc::new(eval),
            kind,
            max_order,
        }
    }

    /// Field given by a closed-form expression in the coordinate jets.
    pub fn analytic(f: impl Fn(&Vars) -> Jet + Send + Sync + 'static) -> Self {
        Self::from_evaluator(FieldKind::Analytic, MAX_ORDER, move |p, k| {
            Ok(f(&Vars::at(p, k)))
        })
    }

    /// Same as [`ScalarField::analytic`], tagged as a manufactured field.
    pub fn manufactured(f: impl Fn(&Vars) -> Jet + Send + Sync + 'static) -> Self {
        Self::from_evaluator(FieldKind::Manufactured, MAX_ORDER, move |p, k| {
            Ok(f(&Vars::at(p, k)))
        })
    }

    /// Field known only through pointwise samples; jets by central differences.
    pub fn sampled(f: impl Fn(Point) -> f64 + Send + Sync + 'static, step: f64) -> Self {
        let f = Arc::new(f);
        Self::from_evaluator(
            FieldKind::GridSampled {
                truncation_order: 2,
                step,
            },
            SAMPLED_MAX_ORDER,
            move |p, k| {
                let g = f.clone();
                finite_difference_jet(&move |q| Ok(g(q)), p, k, step)
            },
        )
    }

    pub fn zero() -> Self {
        Self::analytic(|v| v.constant(0.0))
    }

    pub fn constant(k: f64) -> Self {
        Self::analytic(move |v| v.constant(k))
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn jet(&self, p: Point, order: usize) -> Result<Jet> {
        if order > self.max_order {
            return Err(Error::Order {
                requested: order,
                available: self.max_order,
            });
        }
        (self.eval)(p, order)
    }

    pub fn value(&self, p: Point) -> Result<f64> {
        Ok(self.jet(p, 0)?.value())
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        let f = self.clone();
        Self::from_evaluator(self.kind, self.max_order, move |p, k| {
            Ok(f.jet(p, k)?.scale(s))
        })
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        let (a, b) = (self.clone(), other.clone());
        let kind = combine_kind(self.kind, other.kind);
        Self::from_evaluator(kind, self.max_order.min(other.max_order), move |p, k| {
            Ok(a.jet(p, k)? + b.jet(p, k)?)
        })
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        let (a, b) = (self.clone(), other.clone());
        let kind = combine_kind(self.kind, other.kind);
        Self::from_evaluator(kind, self.max_order.min(other.max_order), move |p, k| {
            Ok(a.jet(p, k)? * b.jet(p, k)?)
        })
    }
}

fn combine_kind(a: FieldKind, b: FieldKind) -> FieldKind {
    match (a, b) {
        (g @ FieldKind::GridSampled { .. }, _) | (_, g @ FieldKind::GridSampled { .. }) => g,
        (FieldKind::Manufactured, _) | (_, FieldKind::Manufactured) => FieldKind::Manufactured,
        _ => FieldKind::Analytic,
    }
}

/// A first-order differential operator from the vector-field family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VectorFieldOp {
    /// `∂_a`, `a = 0` is time.
    Partial(usize),
    /// `Ω_ij = x_i ∂_j - x_j ∂_i` with spatial indices `1 ≤ i, j ≤ 3`, `i ≠ j`.
    Rotation(usize, usize),
    /// `S = t∂_t + x·∇`
    Scaling,
    /// `L_{c,j} = (x_j/c)∂_t + ct∂_j`
    Boost { j: usize, c: f64 },
    /// `D_{+,c} = ∂_t + c∂_r`
    DPlus(f64),
    /// `D_{-,c} = ∂_t - c∂_r`
    DMinus(f64),
    /// `∂_r = ω·∇`
    Radial,
    /// `T_{c,j} = ω_j∂_t + c∂_j`
    Tangential { j: usize, c: f64 },
}

impl VectorFieldOp {
    pub fn rotation(i: usize, j: usize) -> Result<Self> {
        let op = VectorFieldOp::Rotation(i, j);
        op.validate()?;
        Ok(op)
    }

    pub fn validate(&self) -> Result<()> {
        let spatial = |j: usize| (1..=3).contains(&j);
        let speed_ok = |c: f64| c > 0.0 && c.is_finite();
        let ok = match *self {
            VectorFieldOp::Partial(a) => a <= 3,
            VectorFieldOp::Rotation(i, j) => spatial(i) && spatial(j) && i != j,
            VectorFieldOp::Scaling | VectorFieldOp::Radial => true,
            VectorFieldOp::Boost { j, c } | VectorFieldOp::Tangential { j, c } => {
                spatial(j) && speed_ok(c)
            }
            VectorFieldOp::DPlus(c) | VectorFieldOp::DMinus(c) => speed_ok(c),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::argument(format!("invalid vector field {self:?}")))
        }
    }

    pub fn is_r_dependent(&self) -> bool {
        matches!(
            self,
            VectorFieldOp::DPlus(_)
                | VectorFieldOp::DMinus(_)
                | VectorFieldOp::Radial
                | VectorFieldOp::Tangential { .. }
        )
    }

    fn check_domain(&self, p: Point) -> Result<()> {
        if self.is_r_dependent() && p.r() < R_MIN {
            return Err(Error::domain(format!(
                "{self:?} evaluated at |x| = {} < {R_MIN}",
                p.r()
            )));
        }
        Ok(())
    }

    /// Applies the operator to a jet of `f` around `p`; the result has one
    /// order less.
    pub fn apply_jet(&self, f: &Jet, p: Point) -> Result<Jet> {
        self.check_domain(p)?;
        let d = |a: usize| f.d(a);
        let k = f.order().saturating_sub(1);
        match *self {
            VectorFieldOp::Partial(a) => d(a),
            VectorFieldOp::Rotation(i, j) => {
                let v = Vars::at(p, k);
                Ok(&v.x[i - 1] * &d(j)? - &v.x[j - 1] * &d(i)?)
            }
            VectorFieldOp::Scaling => {
                let v = Vars::at(p, k);
                let mut out = &v.t * &d(0)?;
                for j in 0..3 {
                    out += &(&v.x[j] * &d(j + 1)?);
                }
                Ok(out)
            }
            VectorFieldOp::Boost { j, c } => {
                let v = Vars::at(p, k);
                Ok(&v.x[j - 1] * &d(0)? / c + &(&v.t * c) * &d(j)?)
            }
            VectorFieldOp::Radial => radial_derivative(f, p),
            VectorFieldOp::DPlus(c) => Ok(d(0)? + radial_derivative(f, p)? * c),
            VectorFieldOp::DMinus(c) => Ok(d(0)? - radial_derivative(f, p)? * c),
            VectorFieldOp::Tangential { j, c } => {
                let v = Vars::at(p, k);
                let omega = &v.x[j - 1] / &v.r();
                Ok(omega * d(0)? + d(j)? * c)
            }
        }
    }
}

fn radial_derivative(f: &Jet, p: Point) -> Result<Jet> {
    let k = f.order().saturating_sub(1);
    let v = Vars::at(p, k);
    let inv_r = v.r().recip();
    let mut out = &(&v.x[0] * &f.d(1)?) * &inv_r;
    out += &(&(&v.x[1] * &f.d(2)?) * &inv_r);
    out += &(&(&v.x[2] * &f.d(3)?) * &inv_r);
    Ok(out)
}

/// Returns the field `op f`.
pub fn apply_vf(op: VectorFieldOp, f: &ScalarField) -> Result<ScalarField> {
    op.validate()?;
    let f = f.clone();
    let max_order = f.max_order().saturating_sub(1);
    let kind = f.kind();
    Ok(ScalarField::from_evaluator(kind, max_order, move |p, k| {
        op.check_domain(p)?;
        if f.max_order() == 0 {
            return Err(Error::Order {
                requested: 1,
                available: 0,
            });
        }
        let fj = f.jet(p, k + 1)?;
        op.apply_jet(&fj, p)
    }))
}

/// `□_c = ∂_t² - c²Δ` applied to a jet (result has two orders less).
pub fn wave_operator_jet(c: f64, f: &Jet) -> Result<Jet> {
    let mut lap = f.d(1)?.d(1)?;
    lap += &f.d(2)?.d(2)?;
    lap += &f.d(3)?.d(3)?;
    Ok(f.d(0)?.d(0)? - lap * (c * c))
}

/// The field `□_c f`.
pub fn wave_operator(c: f64, f: &ScalarField) -> ScalarField {
    let f = f.clone();
    let max_order = f.max_order().saturating_sub(2);
    let kind = f.kind();
    ScalarField::from_evaluator(kind, max_order, move |p, k| {
        wave_operator_jet(c, &f.jet(p, k + 2)?)
    })
}

/// The seven generators `Z_1..Z_7 = ∂_0, ∂_1, ∂_2, ∂_3, Ω_12, Ω_13, Ω_23`.
pub const GENERATORS: [VectorFieldOp; 7] = [
    VectorFieldOp::Partial(0),
    VectorFieldOp::Partial(1),
    VectorFieldOp::Partial(2),
    VectorFieldOp::Partial(3),
    VectorFieldOp::Rotation(1, 2),
    VectorFieldOp::Rotation(1, 3),
    VectorFieldOp::Rotation(2, 3),
];

/// Exponents `(α_1, …, α_7)` over the ordered generator set; `Z^α` applies
/// `Z_7^{α_7}` first and `Z_1^{α_1}` last.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub [u8; 7]);

impl MultiIndex {
    pub fn zero() -> Self {
        MultiIndex([0; 7])
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(|&a| a as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All multi-indices with `|α| ≤ s`.
    pub fn all_up_to(s: usize) -> Vec<MultiIndex> {
        fn rec(pos: usize, left: usize, cur: &mut [u8; 7], out: &mut Vec<MultiIndex>) {
            if pos == 7 {
                out.push(MultiIndex(*cur));
                return;
            }
            for a in 0..=left {
                cur[pos] = a as u8;
                rec(pos + 1, left - a, cur, out);
            }
            cur[pos] = 0;
        }
        let mut out = Vec::new();
        rec(0, s, &mut [0; 7], &mut out);
        out
    }

    /// Generator indices in application order (innermost first).
    pub fn application_sequence(&self) -> Vec<usize> {
        let mut seq = Vec::with_capacity(self.len());
        for g in (0..7).rev() {
            for _ in 0..self.0[g] {
                seq.push(g);
            }
        }
        seq
    }
}

/// `Z^α f`, composed in the fixed order.
pub fn apply_multi(alpha: MultiIndex, f: &ScalarField) -> Result<ScalarField> {
    let mut out = f.clone();
    for g in alpha.application_sequence() {
        out = apply_vf(GENERATORS[g], &out)?;
    }
    Ok(out)
}

/// Visits `Z^α f` for all `|α| ≤ s`, given a jet of `f` of order ≥ `s`.
/// Each visited jet has order `f.order() - |α|`.
pub fn for_each_z(
    f: &Jet,
    s: usize,
    p: Point,
    visit: &mut dyn FnMut(MultiIndex, &Jet),
) -> Result<()> {
    if f.order() < s {
        return Err(Error::Order {
            requested: s,
            available: f.order(),
        });
    }
    fn rec(
        jet: &Jet,
        alpha: MultiIndex,
        max_gen: usize,
        left: usize,
        p: Point,
        visit: &mut dyn FnMut(MultiIndex, &Jet),
    ) -> Result<()> {
        visit(alpha, jet);
        if left == 0 {
            return Ok(());
        }
        for g in 0..=max_gen {
            let next = GENERATORS[g].apply_jet(jet, p)?;
            let mut a = alpha;
            a.0[g] += 1;
            rec(&next, a, g, left - 1, p, visit)?;
        }
        Ok(())
    }
    rec(f, MultiIndex::zero(), 6, s, p, visit)
}

/// `|f(t,x)|_s = Σ_{|α|≤s} |Z^α f(t,x)|` from a jet of order ≥ s.
pub fn local_norm_jet(f: &Jet, s: usize, p: Point) -> Result<f64> {
    let mut sum = 0.0;
    for_each_z(f, s, p, &mut |_, j| sum += j.value().abs())?;
    Ok(sum)
}

/// `|f(t,x)|_s = Σ_{|α|≤s} |Z^α f(t,x)|`.
pub fn local_norm(f: &ScalarField, s: usize, p: Point) -> Result<f64> {
    local_norm_jet(&f.jet(p, s)?, s, p)
}

/// Left factor of a commutator: another vector field or the wave operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Commutand {
    Op(VectorFieldOp),
    Wave(f64),
}

fn apply_commutand(a: Commutand, f: &ScalarField) -> Result<ScalarField> {
    match a {
        Commutand::Op(op) => apply_vf(op, f),
        Commutand::Wave(c) => {
            if !(c > 0.0) {
                return Err(Error::argument("wave speed must be positive"));
            }
            Ok(wave_operator(c, f))
        }
    }
}

/// `max_points |(ab - ba) f|`.
pub fn commutator_residual(
    a: Commutand,
    b: VectorFieldOp,
    f: &ScalarField,
    points: &[Point],
) -> Result<f64> {
    let ab = apply_commutand(a, &apply_vf(b, f)?)?;
    let ba = apply_vf(b, &apply_commutand(a, f)?)?;
    let mut worst: f64 = 0.0;
    for &p in points {
        worst = worst.max((ab.value(p)? - ba.value(p)?).abs());
    }
    Ok(worst)
}
