//! Empirical checks of the weighted decay estimates: ratio tables of
//! weighted solution sizes against the cone sup norms, decay exponent fits,
//! and the characteristic integration of `D_- D_+ (ru)`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Point, ScalarField, VectorFieldOp, R_MIN};
use crate::jet::Jet;
use crate::linsolve::{
    integrate_scalar, radial_free_xjet, solve_duhamel_jet, solve_free_jet, CauchyData, RadialData, RadialProfile,
    ShellSupport, SolverOptions, SourceTerm, SphereRule,
};
use crate::weights::{a_norm, b_norm, hom_norm, jb, phi_rho, psi_rho, ConeSup, Density, SpeedSet};

/// Which estimate is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimateKind {
    /// `⟨|x|⟩⟨t+|x|⟩⟨ct-|x|⟩^{κ-1} log(2+t+|x|)⁻¹ |D_+ u| ≤ C A_{κ,μ,2}[G]`.
    #[serde(rename = "thm-i")]
    ThmI,
    /// `⟨t+|x|⟩²⟨ct-|x|⟩^{κ-1} |D_+ u| ≤ C A_{κ,μ,2}[G]` on `|x| > δt`.
    #[serde(rename = "thm-i-exterior")]
    ThmIExterior,
    /// `⟨|x|⟩⟨t+|x|⟩⟨ct-|x|⟩^{κ-1} |D_+ u*| ≤ C B_{κ+μ+1,2}[φ, ψ]`.
    #[serde(rename = "thm-ii")]
    ThmII,
    /// `⟨t+|x|⟩⟨ct-|x|⟩^{κ-1} |u*| ≤ C sup ⟨|y|⟩^κ(⟨|y|⟩|φ|_1 + |y||ψ|)`.
    #[serde(rename = "lem-hom")]
    LemHom,
    /// `⟨t+|x|⟩ Φ_{κ-1}(ct,|x|)⁻¹ |u| ≤ C A_{κ,μ,0}[G]`.
    #[serde(rename = "lem-inhom-u")]
    LemInhomU,
    /// `⟨|x|⟩⟨ct-|x|⟩^κ Ψ_{κ-1}(t)⁻¹ |∂u| ≤ C A_{κ,μ,1}[G]`.
    #[serde(rename = "lem-inhom-du")]
    LemInhomDu,
}

impl EstimateKind {
    pub const ALL: [EstimateKind; 6] = [
        EstimateKind::ThmI,
        EstimateKind::ThmIExterior,
        EstimateKind::ThmII,
        EstimateKind::LemHom,
        EstimateKind::LemInhomU,
        EstimateKind::LemInhomDu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimateKind::ThmI => "thm-i",
            EstimateKind::ThmIExterior => "thm-i-exterior",
            EstimateKind::ThmII => "thm-ii",
            EstimateKind::LemHom => "lem-hom",
            EstimateKind::LemInhomU => "lem-inhom-u",
            EstimateKind::LemInhomDu => "lem-inhom-du",
        }
    }

    fn needs_source(self) -> bool {
        !matches!(self, EstimateKind::ThmII | EstimateKind::LemHom)
    }

    /// The solution quantity on the left: `|D_+ u|`, `|u|` or `|∂u|`.
    fn quantity(self) -> Quantity {
        match self {
            EstimateKind::ThmI | EstimateKind::ThmIExterior | EstimateKind::ThmII => Quantity::DPlus,
            EstimateKind::LemHom | EstimateKind::LemInhomU => Quantity::Value,
            EstimateKind::LemInhomDu => Quantity::Gradient,
        }
    }
}

impl fmt::Display for EstimateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimateKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EstimateKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::argument(format!("unknown estimate '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    /// `|D_{+,c} u|`
    DPlus,
    /// `|u|`
    Value,
    /// `Σ_a |∂_a u|`
    Gradient,
    /// `|∂_t u|`
    Dt,
}

impl Quantity {
    fn order(self) -> usize {
        if self == Quantity::Value {
            0
        } else {
            1
        }
    }

    /// Reads the quantity off a solution jet of order ≥ 1 (≥ 0 for `Value`).
    pub fn of(self, u: &Jet, c: f64, p: Point) -> Result<f64> {
        Ok(match self {
            Quantity::Value => u.value().abs(),
            Quantity::Dt => u.taylor([1, 0, 0, 0]).abs(),
            Quantity::DPlus => VectorFieldOp::DPlus(c).apply_jet(u, p)?.value().abs(),
            Quantity::Gradient => (0..4).map(|a| u.taylor(unit(a)).abs()).sum(),
        })
    }
}

fn unit(a: usize) -> [u8; 4] {
    let mut e = [0; 4];
    e[a] = 1;
    e
}

/// Either side of the linear problem.
#[derive(Clone, Debug)]
pub enum Problem {
    Cauchy(CauchyData),
    Source(SourceTerm),
}

impl Problem {
    /// Jet of the solution at `p`; radial Cauchy data use the d'Alembert oracle.
    pub fn solution_jet(&self, c: f64, p: Point, order: usize, opts: &SolverOptions) -> Result<Jet> {
        match self {
            Problem::Cauchy(d) => match &d.radial {
                Some(rd) => Ok(radial_free_xjet(rd, c, p, order)? * d.scale),
                None => solve_free_jet(d, c, p.t, p.x, order, opts),
            },
            Problem::Source(s) => solve_duhamel_jet(s, c, p.t, p.x, order, opts),
        }
    }
}

/// Radial bump data `φ = a b(|x|/R)`, `ψ = 0`, supported in `|x| ≤ R`.
pub fn bump_data(amplitude: f64, radius: f64) -> CauchyData {
    CauchyData::from_radial(RadialData::new(RadialProfile::bump(amplitude, radius), RadialProfile::zero()).with_support(radius))
}

fn unit_bump(s: &Jet) -> Jet {
    if s.value().abs() >= 1.0 {
        return Jet::zero(s.order());
    }
    (1.0 - (1.0 - s.square()).recip()).exp()
}

/// `G = ⟨τ⟩^{-2} b(|y| - cτ - 3)`, a radial shell riding the light cone.
pub fn cone_shell_source(c: f64, t_max: f64) -> SourceTerm {
    let g = ScalarField::analytic(move |v| {
        let decay = (v.t.square() + 1.0).recip();
        unit_bump(&(&(&v.r() - &(&v.t * c)) - 3.0)) * decay
    });
    SourceTerm::new(g, t_max).with_shell(ShellSupport { offset: 3.0, speed: c, half_width: 1.0 }).radial()
}

/// Quadrature for bump-type sources, which need a panelled sphere rule.
pub fn panelled_options() -> SolverOptions {
    SolverOptions { rule: SphereRule::new(24).expect("order 24 is supported").with_panels(4), ..SolverOptions::default() }
}

/// What to measure and where.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateSpec {
    pub which: EstimateKind,
    pub kappa: f64,
    pub mu: f64,
    /// Exterior cutoff `|x| > δt` for `thm-i-exterior`.
    pub delta: Option<f64>,
    /// Largest dyadic time.
    pub t_max: f64,
    /// Sample radii as multiples of `ct`.
    pub shells: Vec<f64>,
    /// Extra sample radii `ct + offset`.
    pub cone_offsets: Vec<f64>,
    /// Unit directions `ω` of the sample points.
    pub directions: Vec<[f64; 3]>,
    /// Keep the logarithmic factor (`log(2+t+|x|)`, `Φ_0`, `Ψ_0`) in the weight.
    pub log_factor: bool,
    /// Fit the decay exponent of the raw quantity near the light cone.
    pub fit_exponent: bool,
    /// Include a `ln ln(2+t)` column in the fit.
    pub log_fit: bool,
    /// Radial samples per time in the light-cone band `|ct - r| ≤ 3` of the fit.
    pub band_points: usize,
    /// First time of the exponent fit; earlier times carry the incoming transient.
    pub fit_from: f64,
    pub density: Density,
}

pub const DEFAULT_SHELLS: [f64; 6] = [0.25, 0.5, 0.9, 1.0, 1.1, 2.0];
pub const DEFAULT_T_MAX: f64 = 128.0;
/// Half-width of the light-cone band used by exponent fits.
pub const CONE_BAND: f64 = 3.0;

impl EstimateSpec {
    pub fn new(which: EstimateKind, kappa: f64, mu: f64) -> Self {
        EstimateSpec {
            which,
            kappa,
            mu,
            delta: None,
            t_max: DEFAULT_T_MAX,
            shells: DEFAULT_SHELLS.to_vec(),
            cone_offsets: Vec::new(),
            directions: vec![[1.0, 0.0, 0.0]],
            log_factor: true,
            fit_exponent: true,
            log_fit: false,
            band_points: 25,
            fit_from: 1.0,
            density: Density::default(),
        }
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (k, m) = (self.kappa, self.mu);
        if !(1.0..=2.0).contains(&k) {
            return Err(Error::argument(format!("kappa must lie in [1, 2], got {k}")));
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::argument(format!("mu must be positive, got {m}")));
        }
        match self.which {
            EstimateKind::ThmIExterior => {
                if !(k > 1.0 && k < 2.0) {
                    return Err(Error::argument("thm-i-exterior needs 1 < kappa < 2"));
                }
                if !self.delta.is_some_and(|d| d > 0.0) {
                    return Err(Error::argument("thm-i-exterior needs delta > 0"));
                }
            }
            EstimateKind::LemHom if k <= 1.0 => {
                return Err(Error::argument("lem-hom needs kappa > 1"));
            }
            _ => {}
        }
        if !(self.fit_from >= 0.0 && self.fit_from.is_finite()) {
            return Err(Error::argument("fit_from must be finite and non-negative"));
        }
        if !(self.t_max >= 1.0) {
            return Err(Error::argument("t_max must be at least 1"));
        }
        if self.shells.iter().chain(&self.cone_offsets).any(|s| !s.is_finite()) {
            return Err(Error::argument("shells and offsets must be finite"));
        }
        if self.directions.is_empty() {
            return Err(Error::argument("at least one sample direction is needed"));
        }
        for d in &self.directions {
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::argument("sample directions must be unit vectors"));
            }
        }
        Ok(())
    }
}

/// `1, 2, 4, …, ≤ t_max`.
pub fn dyadic_times(t_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = 1.0;
    while t <= t_max * (1.0 + 1e-12) {
        out.push(t);
        t *= 2.0;
    }
    out
}

/// `2^{k/2}` for `k = 0, 1, …` up to `t_max`.
pub fn half_octave_times(t_max: f64) -> Vec<f64> {
    (0..)
        .map(|k| 2f64.powf(k as f64 / 2.0))
        .take_while(|t| *t <= t_max * (1.0 + 1e-12))
        .collect()
}

/// One row of the ratio table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySample {
    pub t: f64,
    pub r_over_t: f64,
    pub x: [f64; 3],
    /// Unweighted solution quantity.
    pub raw: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub rhs_argmax: Option<Point>,
}

/// Least-squares decay exponent: `value ~ t^{-p}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub p: f64,
    pub stderr: f64,
    /// Coefficient of `ln ln(2+t)`, when fitted.
    pub log_coeff: Option<f64>,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub which: EstimateKind,
    pub kappa: f64,
    pub mu: f64,
    pub samples: Vec<DecaySample>,
    pub max_ratio: f64,
    /// `(t, max ratio at t)` per dyadic time.
    pub per_time_max: Vec<(f64, f64)>,
    /// Largest `m(2t)/m(t)` over `t ≥ 8`.
    pub max_growth: Option<f64>,
    pub exponent: Option<ExponentFit>,
    pub verdict: bool,
}

/// Growth factor above which consecutive dyadic maxima count as growing.
pub const GROWTH_LIMIT: f64 = 1.1;
/// Dyadic time from which flatness is required.
pub const FLAT_FROM: f64 = 8.0;

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

/// Weight multiplying the solution quantity on the left.
fn lhs_weight(spec: &EstimateSpec, c: f64, t: f64, r: f64) -> f64 {
    let k = spec.kappa;
    let cone = jb(c * t - r);
    match spec.which {
        EstimateKind::ThmI => {
            let log = if spec.log_factor { (2.0 + t + r).ln() } else { 1.0 };
            jb(r) * jb(t + r) * cone.powf(k - 1.0) / log
        }
        EstimateKind::ThmIExterior => jb(t + r).powi(2) * cone.powf(k - 1.0),
        EstimateKind::ThmII => jb(r) * jb(t + r) * cone.powf(k - 1.0),
        EstimateKind::LemHom => jb(t + r) * cone.powf(k - 1.0),
        EstimateKind::LemInhomU => {
            let phi = if spec.log_factor || k > 1.0 { phi_rho(k - 1.0, c * t, r) } else { 1.0 };
            jb(t + r) / phi
        }
        EstimateKind::LemInhomDu => {
            let psi = if spec.log_factor || k > 1.0 { psi_rho(k - 1.0, t) } else { 1.0 };
            jb(r) * cone.powf(k) / psi
        }
    }
}

fn rhs_norm(spec: &EstimateSpec, problem: &Problem, c: f64, p: Point) -> Result<ConeSup> {
    let (k, m) = (spec.kappa, spec.mu);
    match (spec.which, problem) {
        (EstimateKind::ThmII, Problem::Cauchy(d)) => b_norm(d, k + m + 1.0, 2, c, p, spec.density),
        (EstimateKind::LemHom, Problem::Cauchy(d)) => hom_norm(d, k, c, p, spec.density),
        (which, Problem::Source(g)) => {
            let s = match which {
                EstimateKind::ThmI | EstimateKind::ThmIExterior => 2,
                EstimateKind::LemInhomU => 0,
                _ => 1,
            };
            a_norm(g, k, m, s, &SpeedSet::single(c)?, c, p, spec.density)
        }
        (which, _) => Err(Error::argument(format!("{which} needs a source term, not Cauchy data"))),
    }
}

fn sample_points(spec: &EstimateSpec, c: f64) -> Vec<(f64, f64, [f64; 3])> {
    let mut out = Vec::new();
    for t in dyadic_times(spec.t_max) {
        let radii = spec
            .shells
            .iter()
            .map(|s| s * c * t)
            .chain(spec.cone_offsets.iter().map(|o| c * t + o));
        for r in radii {
            if r <= R_MIN {
                continue;
            }
            if spec.which == EstimateKind::ThmIExterior && r <= spec.delta.unwrap_or(0.0) * t {
                continue;
            }
            for w in &spec.directions {
                out.push((t, r, [r * w[0], r * w[1], r * w[2]]));
            }
        }
    }
    out
}

/// Ratio table of the chosen estimate over dyadic times and shells.
pub fn check_estimate(spec: &EstimateSpec, problem: &Problem, c: f64, opts: &SolverOptions) -> Result<DecayReport> {
    spec.validate()?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::argument("speed must be positive"));
    }
    match (spec.which.needs_source(), problem) {
        (true, Problem::Cauchy(_)) => {
            return Err(Error::argument(format!("{} needs a source term", spec.which)));
        }
        (false, Problem::Source(_)) => {
            return Err(Error::argument(format!("{} needs Cauchy data", spec.which)));
        }
        _ => {}
    }
    let quantity = spec.which.quantity();
    let samples: Vec<DecaySample> = sample_points(spec, c)
        .into_par_iter()
        .map(|(t, r, x)| {
            let p = Point::new(t, x);
            let u = problem.solution_jet(c, p, quantity.order(), opts)?;
            let raw = quantity.of(&u, c, p)?;
            let lhs = lhs_weight(spec, c, t, r) * raw;
            let norm = rhs_norm(spec, problem, c, p)?;
            Ok(DecaySample {
                t,
                r_over_t: r / (c * t),
                x,
                raw,
                lhs,
                rhs: norm.value,
                ratio: ratio(lhs, norm.value),
                rhs_argmax: norm.argmax,
            })
        })
        .collect::<Result<_>>()?;

    let mut per_time_max: Vec<(f64, f64)> = Vec::new();
    for s in &samples {
        match per_time_max.iter_mut().find(|(t, _)| *t == s.t) {
            Some(entry) => entry.1 = entry.1.max(s.ratio),
            None => per_time_max.push((s.t, s.ratio)),
        }
    }
    let max_growth = max_growth(&per_time_max);
    let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);

    let exponent = if spec.fit_exponent {
        let times: Vec<f64> = half_octave_times(spec.t_max).into_iter().filter(|t| *t >= spec.fit_from).collect();
        let series = cone_band_series(problem, c, quantity, &times, spec.band_points, opts)?;
        if series.len() >= MIN_FIT_SAMPLES && series.iter().all(|(_, v)| *v > 0.0) {
            Some(fit_decay_exponent(&series, spec.log_fit)?)
        } else {
            None
        }
    } else {
        None
    };
    let verdict = max_ratio.is_finite() && max_growth.is_none_or(|g| g <= GROWTH_LIMIT);
    Ok(DecayReport {
        which: spec.which,
        kappa: spec.kappa,
        mu: spec.mu,
        samples,
        max_ratio,
        per_time_max,
        max_growth,
        exponent,
        verdict,
    })
}

/// Largest ratio of consecutive dyadic maxima, counted from `t = 8` on.
pub fn max_growth(per_time_max: &[(f64, f64)]) -> Option<f64> {
    per_time_max
        .windows(2)
        .filter(|w| w[0].0 >= FLAT_FROM)
        .map(|w| ratio(w[1].1, w[0].1))
        .reduce(f64::max)
}

/// `sup_{|ct - r| ≤ 3} q(u)(t, r e_1)` for each `t`, from `n` radial samples.
pub fn cone_band_series(
    problem: &Problem,
    c: f64,
    quantity: Quantity,
    times: &[f64],
    n: usize,
    opts: &SolverOptions,
) -> Result<Vec<(f64, f64)>> {
    let n = n.max(2);
    times
        .par_iter()
        .map(|&t| {
            let lo = (c * t - CONE_BAND).max(0.5);
            let hi = c * t + CONE_BAND;
            let mut best: f64 = 0.0;
            for i in 0..n {
                let r = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                let p = Point::new(t, [r, 0.0, 0.0]);
                let u = problem.solution_jet(c, p, quantity.order(), opts)?;
                best = best.max(quantity.of(&u, c, p)?);
            }
            Ok((t, best))
        })
        .collect()
}

pub const MIN_FIT_SAMPLES: usize = 8;

/// Solves the symmetric system `a z = b` by Gaussian elimination with pivoting.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty");
        if a[piv][col].abs() < 1e-300 {
            return Err(Error::Data("singular least-squares system".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut z = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * z[k]).sum();
        z[row] = (b[row] - s) / a[row][row];
    }
    Ok(z)
}

/// Fits `ln v = a - p ln t (+ b ln ln(2+t))` by least squares.
pub fn fit_decay_exponent(samples: &[(f64, f64)], log_term: bool) -> Result<ExponentFit> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::argument(format!(
            "exponent fit needs at least {MIN_FIT_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if let Some((t, v)) = samples.iter().find(|(t, v)| !(*v > 0.0 && v.is_finite() && *t > 0.0)) {
        return Err(Error::Data(format!("fit needs positive values and times, got ({t}, {v})")));
    }
    let k = if log_term { 3 } else { 2 };
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .map(|(t, _)| {
            let mut row = vec![1.0, -t.ln()];
            if log_term {
                row.push((2.0 + t).ln().ln());
            }
            row
        })
        .collect();
    let y: Vec<f64> = samples.iter().map(|(_, v)| v.ln()).collect();
    let mut ata = vec![vec![0.0; k]; k];
    let mut aty = vec![0.0; k];
    for (row, yi) in rows.iter().zip(&y) {
        for i in 0..k {
            aty[i] += row[i] * yi;
            for j in 0..k {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let z = solve_small(ata.clone(), aty)?;
    let n = samples.len();
    let rss: f64 = rows
        .iter()
        .zip(&y)
        .map(|(row, yi)| {
            let fit: f64 = row.iter().zip(&z).map(|(a, b)| a * b).sum();
            (yi - fit).powi(2)
        })
        .sum();
    let sigma2 = if n > k { rss / (n - k) as f64 } else { 0.0 };
    // variance of p: σ² [(AᵀA)⁻¹]_{11}
    let mut e1 = vec![0.0; k];
    e1[1] = 1.0;
    let col = solve_small(ata, e1)?;
    Ok(ExponentFit {
        p: z[1],
        stderr: (sigma2 * col[1]).max(0.0).sqrt(),
        log_coeff: log_term.then(|| z[2]),
        samples: n,
    })
}

/// Summary written next to the CSV table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySummary {
    pub which: EstimateKind,
    pub kappa: f64,
    pub mu: f64,
    pub max_ratio: f64,
    pub max_growth: Option<f64>,
    pub exponent: Option<f64>,
    pub stderr: Option<f64>,
    pub verdict: bool,
}

#[derive(Serialize)]
struct CsvRow {
    which: &'static str,
    kappa: f64,
    mu: f64,
    t: f64,
    r_over_t: f64,
    lhs: f64,
    rhs: f64,
    ratio: f64,
}

impl DecayReport {
    pub fn summary(&self) -> DecaySummary {
        DecaySummary {
            which: self.which,
            kappa: self.kappa,
            mu: self.mu,
            max_ratio: self.max_ratio,
            max_growth: self.max_growth,
            exponent: self.exponent.map(|e| e.p),
            stderr: self.exponent.map(|e| e.stderr),
            verdict: self.verdict,
        }
    }

    /// Columns `which, kappa, mu, t, r_over_t, lhs, rhs, ratio`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for s in &self.samples {
            out.serialize(CsvRow {
                which: self.which.name(),
                kappa: self.kappa,
                mu: self.mu,
                t: s.t,
                r_over_t: s.r_over_t,
                lhs: s.lhs,
                rhs: s.rhs,
                ratio: s.ratio,
            })
            .map_err(|e| Error::Data(e.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Where the solution `u` in the characteristic demo comes from.
#[derive(Clone, Debug)]
pub enum SolutionSource {
    /// A known exact solution of `□_c u = G` (any initial data).
    Exact(ScalarField),
    /// `u = U_c[G]`, zero initial data.
    Duhamel(SolverOptions),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicCheck {
    /// `D_+ v(t, rω)` with `v = ru`.
    pub lhs: f64,
    /// `D_+ v(0, (r+ct)ω) + ∫_0^t D_-D_+ v(τ, (r + c(t-τ))ω) dτ`.
    pub rhs: f64,
    /// `|lhs - rhs| / max(|lhs|, |rhs|)`, zero when both vanish.
    pub residual: f64,
}

fn solution_jet_at(u: &SolutionSource, g: &SourceTerm, c: f64, p: Point, order: usize) -> Result<Jet> {
    match u {
        SolutionSource::Exact(f) => f.jet(p, order),
        SolutionSource::Duhamel(opts) => solve_duhamel_jet(g, c, p.t, p.x, order, opts),
    }
}

/// `D_{+,c} v = r D_{+,c} u + c u` at `p`.
fn d_plus_v(u: &Jet, c: f64, p: Point) -> Result<f64> {
    Ok(p.r() * VectorFieldOp::DPlus(c).apply_jet(u, p)?.value() + c * u.value())
}

/// Integrates `D_- D_+ v = rG + (c²/r) Σ Ω_jk² u` along the incoming
/// characteristic through `(t, rω)` and compares with `D_+ v` there.
pub fn characteristic_integral_demo(
    g: &SourceTerm,
    u: &SolutionSource,
    c: f64,
    t: f64,
    r: f64,
    omega: [f64; 3],
) -> Result<CharacteristicCheck> {
    if r < R_MIN {
        return Err(Error::domain(format!("characteristic demo needs r >= {R_MIN}, got {r}")));
    }
    if !(c > 0.0) {
        return Err(Error::argument("speed must be positive"));
    }
    if !(t >= 0.0 && t <= g.t_max) {
        return Err(Error::domain(format!("t must lie in [0, {}]", g.t_max)));
    }
    let n = (omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2]).sqrt();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::argument("omega must be a unit vector"));
    }
    let at = |tau: f64, rho: f64| Point::polar(tau, rho, omega);

    let top = at(t, r);
    let lhs = d_plus_v(&solution_jet_at(u, g, c, top, 1)?, c, top)?;
    let start = at(0.0, r + c * t);
    let initial = match u {
        SolutionSource::Exact(f) => d_plus_v(&f.jet(start, 1)?, c, start)?,
        SolutionSource::Duhamel(_) => 0.0,
    };
    let tol = match u {
        SolutionSource::Duhamel(o) => o.abs_tol,
        SolutionSource::Exact(_) => 1e-12,
    };
    // U_c[G] of a radial source is radial, so Σ Ω² u vanishes
    let radial_duhamel = g.radial && matches!(u, SolutionSource::Duhamel(_));
    let integral = integrate_scalar(
        |tau| {
            let rho = r + c * (t - tau);
            let p = at(tau, rho);
            let gv = g.g.value(p)?;
            if radial_duhamel {
                return Ok(rho * gv);
            }
            let uj = solution_jet_at(u, g, c, p, 2)?;
            let mut ang = 0.0;
            for (j, k) in [(1, 2), (1, 3), (2, 3)] {
                let op = VectorFieldOp::Rotation(j, k);
                ang += op.apply_jet(&op.apply_jet(&uj, p)?, p)?.value();
            }
            Ok(rho * gv + c * c / rho * ang)
        },
        0.0,
        t,
        tol,
    )?;
    let rhs = initial + integral;
    let scale = lhs.abs().max(rhs.abs());
    let residual = if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale };
    Ok(CharacteristicCheck { lhs, rhs, residual })
}
