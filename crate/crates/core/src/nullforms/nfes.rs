use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{for_each_z, local_norm_jet, Point, ScalarField, VectorFieldOp};
use crate::jet::Jet;

use super::{q0_jet, qab_jet};

/// The bilinear form whose pointwise estimate is measured.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum NullFormKind {
    Q0 { c: f64 },
    Qab { a: usize, b: usize },
    /// `(∂_t v)(∂_t w)`, which is not a null form; used as a contrast.
    DtProduct,
}

impl NullFormKind {
    fn apply(&self, v: &Jet, w: &Jet) -> Result<Jet> {
        match *self {
            NullFormKind::Q0 { c } => q0_jet(v, w, c),
            NullFormKind::Qab { a, b } => {
                if !(a < b && b <= 3) {
                    return Err(Error::argument(format!("Q_ab needs 0 <= a < b <= 3, got a={a}, b={b}")));
                }
                qab_jet(v, w, a, b)
            }
            NullFormKind::DtProduct => Ok(v.d(0)? * w.d(0)?),
        }
    }
}

/// Distribution of `LHS / RHS` over the sample points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub p90: f64,
    pub ratios: Vec<f64>,
    pub argmax: Option<Point>,
}

impl RatioStats {
    fn from_ratios(ratios: Vec<f64>, points: &[Point]) -> Self {
        if ratios.is_empty() {
            return RatioStats { max: 0.0, mean: 0.0, median: 0.0, p90: 0.0, ratios, argmax: None };
        }
        let mut sorted = ratios.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let pick = |q: f64| sorted[((q * (n - 1) as f64).round() as usize).min(n - 1)];
        let (imax, &max) = ratios
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        RatioStats {
            max,
            mean: ratios.iter().sum::<f64>() / n as f64,
            median: pick(0.5),
            p90: pick(0.9),
            argmax: Some(points[imax]),
            ratios,
        }
    }
}

/// Per-field quantities entering the majorant, for norm orders `0..=s+1`.
struct FieldNorms {
    /// `|∂v|_n` for `n ≤ s`.
    grad: Vec<f64>,
    /// `|v|_n` for `n ≤ s + 1`.
    plain: Vec<f64>,
    /// `Σ_{|α|≤n} |D_+ Z^α v|` for `n ≤ s`.
    good: Vec<f64>,
}

fn field_norms(jet: &Jet, s: usize, c: f64, p: Point) -> Result<FieldNorms> {
    let mut grad = vec![0.0; s + 1];
    let mut plain = vec![0.0; s + 2];
    let mut good = vec![0.0; s + 1];
    for a in 0..4 {
        let da = jet.d(a)?;
        for_each_z(&da, s, p, &mut |alpha, z| {
            for n in alpha.len()..=s {
                grad[n] += z.value().abs();
            }
        })?;
    }
    for_each_z(jet, s + 1, p, &mut |alpha, z| {
        for n in alpha.len()..=s + 1 {
            plain[n] += z.value().abs();
        }
    })?;
    let mut failure = None;
    for_each_z(jet, s, p, &mut |alpha, z| match VectorFieldOp::DPlus(c).apply_jet(z, p) {
        Ok(d) => {
            for n in alpha.len()..=s {
                good[n] += d.value().abs();
            }
        }
        Err(e) => failure = Some(e),
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(FieldNorms { grad, plain, good })
}

/// Measures the pointwise null-form estimate
///
/// `|Q(v_j, v_k)|_s ≤ C_s { |∂v|_{[s/2]} Σ_{|α|≤s} |D_+ Z^α v| + |∂v|_s Σ_{|α|≤[s/2]} |D_+ Z^α v|
///   + r⁻¹ ( |∂v|_{[s/2]} |v|_{s+1} + |v|_{[s/2]+1} |∂v|_s ) }`
///
/// with `C_s = 1`, where norms of the vector `v` sum over its components.
/// `c` is the speed used in `D_+`; `0/0` counts as ratio 0.
pub fn nfes_ratio(
    v: &[ScalarField],
    form: NullFormKind,
    pair: (usize, usize),
    s: usize,
    c: f64,
    points: &[Point],
) -> Result<RatioStats> {
    let (j, k) = pair;
    if j >= v.len() || k >= v.len() {
        return Err(Error::argument("field index out of range"));
    }
    if !(c > 0.0) {
        return Err(Error::argument("speed must be positive"));
    }
    let half = s / 2;
    let mut ratios = Vec::with_capacity(points.len());
    for &p in points {
        if p.r() <= 0.0 {
            return Err(Error::domain("null-form estimate needs r > 0"));
        }
        let jets: Vec<Jet> = v.iter().map(|f| f.jet(p, s + 2)).collect::<Result<_>>()?;
        let q = form.apply(&jets[j], &jets[k])?;
        let lhs = local_norm_jet(&q, s, p)?;
        let mut grad = vec![0.0; s + 1];
        let mut plain = vec![0.0; s + 2];
        let mut good = vec![0.0; s + 1];
        for jet in &jets {
            let n = field_norms(jet, s, c, p)?;
            grad.iter_mut().zip(&n.grad).for_each(|(a, b)| *a += b);
            plain.iter_mut().zip(&n.plain).for_each(|(a, b)| *a += b);
            good.iter_mut().zip(&n.good).for_each(|(a, b)| *a += b);
        }
        let r = p.r();
        let rhs = grad[half] * good[s]
            + grad[s] * good[half]
            + (grad[half] * plain[s + 1] + plain[half + 1] * grad[s]) / r;
        let ratio = if lhs == 0.0 {
            0.0
        } else if rhs == 0.0 {
            f64::INFINITY
        } else {
            lhs / rhs
        };
        ratios.push(ratio);
    }
    Ok(RatioStats::from_ratios(ratios, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nullforms::identities::outgoing_gaussian;

    fn cone_points(n: usize) -> Vec<Point> {
        (0..n)
            .map(|i| {
                let r = 1.0 + 49.0 * i as f64 / (n - 1) as f64;
                let shift = [-1.5, -0.5, 0.0, 0.7, 1.2][i % 5];
                let theta = 0.37 * i as f64;
                Point::polar(r + shift, r, [theta.cos() * 0.6, theta.sin() * 0.6, 0.8])
            })
            .filter(|p| p.t > 0.0)
            .collect()
    }

    #[test]
    fn zero_field_has_zero_ratio() {
        let v = [ScalarField::zero()];
        let stats = nfes_ratio(&v, NullFormKind::Q0 { c: 1.0 }, (0, 0), 1, 1.0, &cone_points(10)).unwrap();
        assert_eq!(stats.max, 0.0);
    }

    #[test]
    fn outgoing_gaussian_ratio_bounded() {
        let v = [outgoing_gaussian(1.0)];
        let stats = nfes_ratio(&v, NullFormKind::Q0 { c: 1.0 }, (0, 0), 0, 1.0, &cone_points(60)).unwrap();
        assert!(stats.max <= 2.0, "{}", stats.max);
        let stats = nfes_ratio(&v, NullFormKind::Qab { a: 1, b: 2 }, (0, 0), 1, 1.0, &cone_points(20)).unwrap();
        assert!(stats.max.is_finite());
    }

    #[test]
    fn dt_product_ratio_grows_along_cone() {
        let v = [outgoing_gaussian(1.0)];
        let on_cone = |r: f64| Point::polar(r + 0.5, r, [0.0, 0.0, 1.0]);
        let small = nfes_ratio(&v, NullFormKind::DtProduct, (0, 0), 0, 1.0, &[on_cone(5.0)]).unwrap().max;
        let large = nfes_ratio(&v, NullFormKind::DtProduct, (0, 0), 0, 1.0, &[on_cone(50.0)]).unwrap().max;
        let slope = (large / small).ln() / 10f64.ln();
        assert!((slope - 1.0).abs() < 0.15, "slope {slope}");
    }

    #[test]
    fn origin_is_a_domain_error() {
        let v = [outgoing_gaussian(1.0)];
        let p = [Point::new(1.0, [0.0; 3])];
        assert!(nfes_ratio(&v, NullFormKind::Q0 { c: 1.0 }, (0, 0), 0, 1.0, &p).is_err());
    }
}
