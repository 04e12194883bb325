use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Point, ScalarField, VectorFieldOp, Vars};
use crate::jet::Jet;

use super::q0_jet;

/// Pointwise identities expressing `Q_0` (or the gradient) through vector fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdentityKind {
    /// `Q_0` through `S`, the boosts `L_{c,j}` and rotations, divided by `t + r`.
    KlaEx,
    /// `Q_0` through `S`, `∂_r` and rotations, divided by `t` and `t²`.
    YokoEx,
    /// `Q_0 = ½(D_+v D_-w + D_-v D_+w) + (c²/r) Σ_{j≠k} ω_k ∂_j v Ω_jk w`.
    KataEx,
    /// `(∂_t, ∇) = (½, -x/2cr) D_- + (½, x/2cr) D_+ - (0, x/r² ∧ Ω)`.
    Decomposition,
    /// `D_{+,c} = Σ_j ω_j T_{c,j}`.
    TangentialSum,
}

impl IdentityKind {
    pub const ALL: [IdentityKind; 5] = [
        IdentityKind::KlaEx,
        IdentityKind::YokoEx,
        IdentityKind::KataEx,
        IdentityKind::Decomposition,
        IdentityKind::TangentialSum,
    ];
}

impl fmt::Display for IdentityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            IdentityKind::KlaEx => "klaex",
            IdentityKind::YokoEx => "yokoex",
            IdentityKind::KataEx => "kataex",
            IdentityKind::Decomposition => "decomposition",
            IdentityKind::TangentialSum => "tangentialsum",
        };
        f.write_str(s)
    }
}

impl FromStr for IdentityKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        IdentityKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::argument(format!("unknown identity '{s}'")))
    }
}

struct Ops<'a> {
    jet: &'a Jet,
    p: Point,
}

impl Ops<'_> {
    fn apply(&self, op: VectorFieldOp) -> Result<f64> {
        Ok(op.apply_jet(self.jet, self.p)?.value())
    }
    fn d(&self, a: usize) -> Result<f64> {
        self.apply(VectorFieldOp::Partial(a))
    }
    fn rot(&self, j: usize, k: usize) -> Result<f64> {
        self.apply(VectorFieldOp::Rotation(j, k))
    }
}

/// `Σ_{j≠k} ω_k (∂_j v)(Ω_jk w)`
fn rotation_sum(v: &Ops, w: &Ops, omega: &[f64; 3], rot_on_w: bool) -> Result<f64> {
    let mut sum = 0.0;
    for j in 1..=3 {
        for k in 1..=3 {
            if j == k {
                continue;
            }
            sum += if rot_on_w {
                omega[k - 1] * v.d(j)? * w.rot(j, k)?
            } else {
                omega[k - 1] * v.rot(j, k)? * w.d(j)?
            };
        }
    }
    Ok(sum)
}

fn residual_at(id: IdentityKind, v: &ScalarField, w: &ScalarField, c: f64, p: Point) -> Result<f64> {
    let r = p.r();
    if r <= 0.0 {
        return Err(Error::domain("identity evaluated at x = 0"));
    }
    if id == IdentityKind::YokoEx && p.t <= 0.0 {
        return Err(Error::domain("YokoEx requires t > 0"));
    }
    let vj = v.jet(p, 1)?;
    let omega = [p.x[0] / r, p.x[1] / r, p.x[2] / r];
    let vo = Ops { jet: &vj, p };
    if matches!(id, IdentityKind::Decomposition | IdentityKind::TangentialSum) {
        // validate the r-dependent ops first
        let dp = vo.apply(VectorFieldOp::DPlus(c))?;
        if id == IdentityKind::TangentialSum {
            let mut sum = 0.0;
            for j in 1..=3 {
                sum += omega[j - 1] * vo.apply(VectorFieldOp::Tangential { j, c })?;
            }
            return Ok((dp - sum).abs());
        }
        let dm = vo.apply(VectorFieldOp::DMinus(c))?;
        let rot = [vo.rot(2, 3)?, -vo.rot(1, 3)?, vo.rot(1, 2)?];
        let a = [p.x[0] / (r * r), p.x[1] / (r * r), p.x[2] / (r * r)];
        let cross = [
            a[1] * rot[2] - a[2] * rot[1],
            a[2] * rot[0] - a[0] * rot[2],
            a[0] * rot[1] - a[1] * rot[0],
        ];
        let mut worst = (vo.d(0)? - 0.5 * (dm + dp)).abs();
        for j in 0..3 {
            let rhs = p.x[j] / (2.0 * c * r) * (dp - dm) - cross[j];
            worst = worst.max((vo.d(j + 1)? - rhs).abs());
        }
        return Ok(worst);
    }

    let wj = w.jet(p, 1)?;
    let wo = Ops { jet: &wj, p };
    let lhs = q0_jet(&vj, &wj, c)?.value();
    let t = p.t;
    let rhs = match id {
        IdentityKind::KataEx => {
            let (dpv, dmv) = (vo.apply(VectorFieldOp::DPlus(c))?, vo.apply(VectorFieldOp::DMinus(c))?);
            let (dpw, dmw) = (wo.apply(VectorFieldOp::DPlus(c))?, wo.apply(VectorFieldOp::DMinus(c))?);
            0.5 * (dpv * dmw + dmv * dpw) + c * c / r * rotation_sum(&vo, &wo, &omega, true)?
        }
        IdentityKind::YokoEx => {
            let (sv, sw) = (vo.apply(VectorFieldOp::Scaling)?, wo.apply(VectorFieldOp::Scaling)?);
            let (drv, drw) = (vo.apply(VectorFieldOp::Radial)?, wo.apply(VectorFieldOp::Radial)?);
            (sv + (c * t - r) * drv) * (sw - (c * t + r) * drw) / (t * t)
                + c / t * (sv * drw - drv * sw)
                + c * c / r * rotation_sum(&vo, &wo, &omega, true)?
        }
        IdentityKind::KlaEx => {
            if t + r <= 0.0 {
                return Err(Error::domain("KlaEx requires t + r > 0"));
            }
            let (sv, sw) = (vo.apply(VectorFieldOp::Scaling)?, wo.apply(VectorFieldOp::Scaling)?);
            let drw = wo.apply(VectorFieldOp::Radial)?;
            let mut lrw = 0.0;
            let mut boost_sum = 0.0;
            for j in 1..=3 {
                lrw += omega[j - 1] * wo.apply(VectorFieldOp::Boost { j, c })?;
                boost_sum += vo.apply(VectorFieldOp::Boost { j, c })? * wo.d(j)?;
            }
            (vo.d(0)? * (sw + c * lrw) - c * boost_sum - c * c * sv * drw
                + c * c * rotation_sum(&vo, &wo, &omega, false)?)
                / (t + r)
        }
        IdentityKind::Decomposition | IdentityKind::TangentialSum => unreachable!(),
    };
    Ok((lhs - rhs).abs())
}

/// Largest `|LHS - RHS|` of the named identity over the sample points.
/// `w` is ignored for the gradient decomposition and the tangential sum.
pub fn identity_residual(
    id: IdentityKind,
    v: &ScalarField,
    w: &ScalarField,
    c: f64,
    points: &[Point],
) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::argument("speed must be positive"));
    }
    let mut worst: f64 = 0.0;
    for &p in points {
        worst = worst.max(residual_at(id, v, w, c, p)?);
    }
    Ok(worst)
}

/// `e^{-(ct-r)²}/r`, an exact outgoing solution of `□_c u = 0` away from `r = 0`.
pub fn outgoing_gaussian(c: f64) -> ScalarField {
    ScalarField::analytic(move |v: &Vars| {
        let r = v.r();
        (-(&v.t * c - &r).square()).exp() / r
    })
}

/// A generic second test field, `sin(0.7t - 0.3x_1 + 0.5x_2) e^{-(x_3 - 1)²/50}`.
pub fn modulated_wave() -> ScalarField {
    ScalarField::analytic(|v: &Vars| {
        let phase = &(&(&v.t * 0.7) - &(&v.x[0] * 0.3)) + &(&v.x[1] * 0.5);
        phase.sin() * (-(&v.x[2] - 1.0).square() * 0.02).exp()
    })
}

/// Admissible sample points: `t ∈ [0.1, 20]`, `|x| ∈ [0.5, 20]`, uniform directions.
pub fn random_points(rng: &mut impl Rng, n: usize) -> Vec<Point> {
    (0..n)
        .map(|_| {
            let t = rng.gen_range(0.1..20.0);
            let r = rng.gen_range(0.5..20.0);
            let z: f64 = rng.gen_range(-1.0..1.0);
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let s = (1.0 - z * z).sqrt();
            Point::polar(t, r, [s * phi.cos(), s * phi.sin(), z])
        })
        .collect()
}
