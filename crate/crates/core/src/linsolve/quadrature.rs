//! Gauss–Legendre and Gauss–Kronrod rules and the sphere product rule.

use crate::error::{Error, Result};

pub const MIN_SPHERE_ORDER: usize = 2;
pub const MAX_SPHERE_ORDER: usize = 256;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<Panel>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let centre = f(mid)?;
    let n = centre.len();
    let mut kron: Vec<f64> = centre.iter().map(|v| v * WGK[7]).collect();
    let mut gauss: Vec<f64> = centre.iter().map(|v| v * WG[3]).collect();
    for i in 0..7 {
        let dx = half * XGK[i];
        let lo = f(mid - dx)?;
        let hi = f(mid + dx)?;
        for k in 0..n {
            let s = lo[k] + hi[k];
            kron[k] += WGK[i] * s;
            if i % 2 == 1 {
                gauss[k] += WG[i / 2] * s;
            }
        }
    }
    let mut error: f64 = 0.0;
    for k in 0..n {
        kron[k] *= half;
        gauss[k] *= half;
        error = error.max((kron[k] - gauss[k]).abs());
    }
    Ok(Panel { a, b, value: kron, error })
}

/// Adaptive Gauss–Kronrod (7/15) integration of a vector-valued integrand.
///
/// Panels are bisected until the summed error estimate falls below
/// `abs_tol · (1 + max_k |I_k|)` or `max_panels` is reached.
pub fn integrate_adaptive<F>(mut f: F, a: f64, b: f64, abs_tol: f64, max_panels: usize) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::argument("integration limits must be finite"));
    }
    if a == b {
        let n = f(a)?.len();
        return Ok(vec![0.0; n]);
    }
    let mut panels = vec![gk15(&mut f, a, b)?];
    loop {
        let n = panels[0].value.len();
        let mut total = vec![0.0; n];
        let mut err = 0.0;
        for p in &panels {
            for k in 0..n {
                total[k] += p.value[k];
            }
            err += p.error;
        }
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if err <= abs_tol * (1.0 + scale) || panels.len() >= max_panels {
            return Ok(total);
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("nonempty");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            return Ok(total);
        }
        panels.push(gk15(&mut f, p.a, mid)?);
        panels.push(gk15(&mut f, mid, p.b)?);
    }
}

/// Scalar convenience wrapper around [`integrate_adaptive`].
pub fn integrate_scalar<F>(mut f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    Ok(integrate_adaptive(|x| Ok(vec![f(x)?]), a, b, abs_tol, 500)?[0])
}

/// Product rule on the unit sphere: Gauss–Legendre in `cos θ` with `q` nodes
/// per panel, trapezoid in the azimuth with `2q` nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereRule {
    q: usize,
    panels: usize,
}

/// A quadrature node on the sphere `|y - x| = ρ`.
#[derive(Clone, Copy, Debug)]
pub struct SphereNode {
    pub y: [f64; 3],
    pub omega: [f64; 3],
    /// Weight normalised so that the full sphere has total weight 1.
    pub weight: f64,
}

impl Default for SphereRule {
    fn default() -> Self {
        SphereRule { q: 24, panels: 1 }
    }
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

impl SphereRule {
    pub fn new(q: usize) -> Result<Self> {
        if !(MIN_SPHERE_ORDER..=MAX_SPHERE_ORDER).contains(&q) {
            return Err(Error::argument(format!(
                "sphere quadrature order {q} outside {MIN_SPHERE_ORDER}..={MAX_SPHERE_ORDER}"
            )));
        }
        Ok(SphereRule { q, panels: 1 })
    }

    /// Splits the polar range into `panels` equal pieces.
    pub fn with_panels(mut self, panels: usize) -> Self {
        self.panels = panels.max(1);
        self
    }

    pub fn order(&self) -> usize {
        self.q
    }

    /// Nodes on the part of the sphere `|y - x| = ρ` inside the shell
    /// `r_in ≤ |y| ≤ r_out` (the whole sphere when `band` is `None`).
    ///
    /// The polar axis points from `x` towards the origin, so the shell cuts
    /// out a polar interval. `azimuthal_modes = Some(m)` declares the integrand
    /// a trigonometric polynomial of degree `≤ m` in the azimuth, which the
    /// trapezoid rule integrates exactly with `m + 2` nodes.
    pub fn nodes(
        &self,
        x: [f64; 3],
        rho: f64,
        band: Option<(f64, f64)>,
        azimuthal_modes: Option<usize>,
    ) -> Vec<SphereNode> {
        let d = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let inside = |r: f64| band.is_none_or(|(lo, hi)| r >= lo && r <= hi);
        if rho == 0.0 {
            return if inside(d) {
                vec![SphereNode { y: x, omega: [0.0, 0.0, 1.0], weight: 1.0 }]
            } else {
                Vec::new()
            };
        }
        let (mu_min, mu_max) = match band {
            None => (-1.0, 1.0),
            Some(_) if d == 0.0 => {
                if !inside(rho) {
                    return Vec::new();
                }
                (-1.0, 1.0)
            }
            Some((lo, hi)) => {
                // |y|² = d² + ρ² - 2dρμ
                let mu_at = |r: f64| (d * d + rho * rho - r * r) / (2.0 * d * rho);
                let (a, b) = (mu_at(hi).max(-1.0), mu_at(lo).min(1.0));
                if a >= b {
                    return Vec::new();
                }
                (a, b)
            }
        };
        let pole = if d > 0.0 { [-x[0] / d, -x[1] / d, -x[2] / d] } else { [0.0, 0.0, 1.0] };
        let helper = if pole[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let e1 = normalize(cross(pole, helper));
        let e2 = cross(pole, e1);

        let n_phi = match azimuthal_modes {
            Some(m) => m + 2,
            None => 2 * self.q,
        };
        let (gl_x, gl_w) = gauss_legendre(self.q);
        let panel_len = (mu_max - mu_min) / self.panels as f64;
        let mut out = Vec::with_capacity(self.q * self.panels * n_phi);
        for p in 0..self.panels {
            let lo = mu_min + p as f64 * panel_len;
            let half = 0.5 * panel_len;
            for (xi, wi) in gl_x.iter().zip(&gl_w) {
                let mu = lo + half * (xi + 1.0);
                let s = (1.0 - mu * mu).max(0.0).sqrt();
                let w_mu = wi * half / (2.0 * n_phi as f64);
                for k in 0..n_phi {
                    let phi = std::f64::consts::TAU * (k as f64 + 0.5) / n_phi as f64;
                    let (sp, cp) = phi.sin_cos();
                    let omega = [
                        mu * pole[0] + s * (cp * e1[0] + sp * e2[0]),
                        mu * pole[1] + s * (cp * e1[1] + sp * e2[1]),
                        mu * pole[2] + s * (cp * e1[2] + sp * e2[2]),
                    ];
                    let y = [x[0] + rho * omega[0], x[1] + rho * omega[1], x[2] + rho * omega[2]];
                    out.push(SphereNode { y, omega, weight: w_mu });
                }
            }
        }
        out
    }
}

/// Average of `f` over the sphere `|y - x| = ρ`.
pub fn spherical_mean(f: impl Fn([f64; 3]) -> f64, x: [f64; 3], rho: f64, rule: &SphereRule) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::argument("sphere radius must be positive"));
    }
    Ok(rule.nodes(x, rho, None, None).iter().map(|n| n.weight * f(n.y)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 24, 64] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..2 * n {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((got - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn adaptive_integration() {
        let v = integrate_scalar(|x| Ok(x.sin()), 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let v = integrate_scalar(|x| Ok((-x * x).exp()), -30.0, 30.0, 1e-12).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-11);
        let v = integrate_adaptive(|x| Ok(vec![1.0, x]), 1.0, 3.0, 1e-12, 10).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-14 && (v[1] - 4.0).abs() < 1e-13);
    }

    #[test]
    fn spherical_mean_examples() {
        let rule = SphereRule::new(24).unwrap();
        let x = [0.3, -1.2, 2.0];
        assert!((spherical_mean(|_| 1.0, x, 3.7, &rule).unwrap() - 1.0).abs() < 1e-13);
        assert!((spherical_mean(|y| y[0], x, 3.7, &rule).unwrap() - x[0]).abs() < 1e-13);
        let r2 = |y: [f64; 3]| y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
        assert!((spherical_mean(r2, [0.0; 3], 2.5, &rule).unwrap() - 6.25).abs() < 1e-12);
        assert!(SphereRule::new(1).is_err());
        assert!(SphereRule::new(1000).is_err());
    }

    #[test]
    fn cap_nodes_cover_intersection() {
        let rule = SphereRule::new(16).unwrap();
        // sphere far from the support: nothing
        assert!(rule.nodes([10.0, 0.0, 0.0], 2.0, Some((0.0, 1.0)), None).is_empty());
        // the cap weight equals the area fraction (1 - μ_min) / 2
        let (x, rho, r) = ([3.0, 0.0, 0.0], 2.5, 1.5);
        let mu_min: f64 = (9.0 + rho * rho - r * r) / (2.0 * 3.0 * rho);
        let w: f64 = rule.nodes(x, rho, Some((0.0, r)), None).iter().map(|n| n.weight).sum();
        assert!((w - (1.0 - mu_min) / 2.0).abs() < 1e-13);
        for n in rule.nodes(x, rho, Some((0.0, r)), None) {
            let ny = (n.y[0] * n.y[0] + n.y[1] * n.y[1] + n.y[2] * n.y[2]).sqrt();
            assert!(ny <= r + 1e-12);
        }
        // a shell band is the difference of two caps
        let band: f64 = rule.nodes(x, rho, Some((1.0, r)), None).iter().map(|n| n.weight).sum();
        let inner: f64 = rule.nodes(x, rho, Some((0.0, 1.0)), None).iter().map(|n| n.weight).sum();
        assert!((band + inner - w).abs() < 1e-13);
    }
}
