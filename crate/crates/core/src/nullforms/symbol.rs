//! Quadratic symbols of systems `□_{c_i} u_i = F_i(u, ∂u, ∂²u)` and the
//! null-condition decision on null covectors.
//!
//! Unknown indices are zero-based. Derivative indices follow the usual
//! space-time convention: `0` is `∂_t`, `1..=3` are `∂_{x_1..x_3}`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `Σ_{a,b} A^{ab} (∂_a u_j)(∂_b u_k)` in equation `equation`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemilinearTerm {
    pub equation: usize,
    pub pair: [usize; 2],
    /// Row-major 4×4 tensor `A^{ab}`.
    pub tensor: Vec<f64>,
}

/// `coeff · u_j u_k` or `coeff · u_j ∂_a u_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerOrderTerm {
    pub equation: usize,
    /// The undifferentiated factor `u_j`.
    pub factor: usize,
    pub other: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivative: Option<usize>,
    pub coeff: f64,
}

/// First-order part of `c^{ij}_{ka}`: `coeff · ∂_b u_l` (or `coeff · u_l`),
/// multiplying `∂_k ∂_a u_j` in equation `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasilinearTerm {
    /// `[i, j, k, a]` with `k ∈ 1..=3`, `a ∈ 0..=3`.
    pub index: [usize; 4],
    pub unknown: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivative: Option<usize>,
    pub coeff: f64,
}

/// Quadratic part `F^{(2)}` of the nonlinearity of an `m`-component system.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSymbol {
    pub unknowns: usize,
    #[serde(default)]
    pub semilinear: Vec<SemilinearTerm>,
    #[serde(default)]
    pub lower_order: Vec<LowerOrderTerm>,
    #[serde(default)]
    pub quasilinear: Vec<QuasilinearTerm>,
}

fn q0_tensor(c: f64) -> Vec<f64> {
    let mut a = vec![0.0; 16];
    a[0] = 1.0;
    for j in 1..4 {
        a[j * 4 + j] = -c * c;
    }
    a
}

fn qab_tensor(a: usize, b: usize) -> Vec<f64> {
    let mut t = vec![0.0; 16];
    t[a * 4 + b] = 1.0;
    t[b * 4 + a] = -1.0;
    t
}

impl QuadraticSymbol {
    pub fn new(unknowns: usize) -> Self {
        QuadraticSymbol { unknowns, ..Default::default() }
    }

    /// Adds `coeff · Q_0(u_j, u_k; c)` to equation `i`.
    pub fn with_q0(mut self, i: usize, j: usize, k: usize, c: f64, coeff: f64) -> Self {
        let tensor = q0_tensor(c).into_iter().map(|x| x * coeff).collect();
        self.semilinear.push(SemilinearTerm { equation: i, pair: [j, k], tensor });
        self
    }

    /// Adds `coeff · Q_ab(u_j, u_k)` to equation `i`.
    pub fn with_qab(mut self, i: usize, j: usize, k: usize, a: usize, b: usize, coeff: f64) -> Self {
        let tensor = qab_tensor(a, b).into_iter().map(|x| x * coeff).collect();
        self.semilinear.push(SemilinearTerm { equation: i, pair: [j, k], tensor });
        self
    }

    pub fn with_semilinear(mut self, i: usize, j: usize, k: usize, tensor: [[f64; 4]; 4]) -> Self {
        let tensor = tensor.iter().flatten().copied().collect();
        self.semilinear.push(SemilinearTerm { equation: i, pair: [j, k], tensor });
        self
    }

    pub fn with_quasilinear(mut self, term: QuasilinearTerm) -> Self {
        self.quasilinear.push(term);
        self
    }

    pub fn with_lower_order(mut self, term: LowerOrderTerm) -> Self {
        self.lower_order.push(term);
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.semilinear.iter_mut().for_each(|t| t.tensor.iter_mut().for_each(|x| *x *= s));
        out.lower_order.iter_mut().for_each(|t| t.coeff *= s);
        out.quasilinear.iter_mut().for_each(|t| t.coeff *= s);
        out
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.unknowns;
        if m == 0 {
            return Err(Error::argument("symbol needs at least one unknown"));
        }
        let unknown = |v: usize, what: &str| -> Result<()> {
            if v < m {
                Ok(())
            } else {
                Err(Error::argument(format!("{what} index {v} out of range for {m} unknowns")))
            }
        };
        let deriv = |a: usize| -> Result<()> {
            if a <= 3 {
                Ok(())
            } else {
                Err(Error::argument(format!("derivative index {a} out of range")))
            }
        };
        let finite = |x: f64| -> Result<()> {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::argument("symbol coefficient is not finite"))
            }
        };
        for t in &self.semilinear {
            unknown(t.equation, "equation")?;
            unknown(t.pair[0], "unknown")?;
            unknown(t.pair[1], "unknown")?;
            if t.tensor.len() != 16 {
                return Err(Error::argument(format!(
                    "semilinear tensor must have 16 entries, got {}",
                    t.tensor.len()
                )));
            }
            t.tensor.iter().try_for_each(|&x| finite(x))?;
        }
        for t in &self.lower_order {
            unknown(t.equation, "equation")?;
            unknown(t.factor, "unknown")?;
            unknown(t.other, "unknown")?;
            if let Some(a) = t.derivative {
                deriv(a)?;
            }
            finite(t.coeff)?;
        }
        for t in &self.quasilinear {
            let [i, j, k, a] = t.index;
            unknown(i, "equation")?;
            unknown(j, "unknown")?;
            unknown(t.unknown, "unknown")?;
            if !(1..=3).contains(&k) {
                return Err(Error::argument(format!("quasilinear k = {k} must be spatial")));
            }
            deriv(a)?;
            if let Some(b) = t.derivative {
                deriv(b)?;
            }
            finite(t.coeff)?;
        }
        self.check_quasilinear_symmetry()
    }

    /// `c^{ij}_{ka} = c^{ji}_{ka}` and `c^{ij}_{kl} = c^{ij}_{lk}` for spatial `l`.
    fn check_quasilinear_symmetry(&self) -> Result<()> {
        type Key = (usize, usize, usize, usize, usize, Option<usize>);
        let mut table: BTreeMap<Key, f64> = BTreeMap::new();
        let mut scale: f64 = 0.0;
        for t in &self.quasilinear {
            let [i, j, k, a] = t.index;
            *table.entry((i, j, k, a, t.unknown, t.derivative)).or_default() += t.coeff;
            scale = scale.max(t.coeff.abs());
        }
        let tol = 1e-12 * scale.max(1.0);
        let get = |key: &Key| table.get(key).copied().unwrap_or(0.0);
        for (&(i, j, k, a, l, b), &v) in &table {
            let swapped = get(&(j, i, k, a, l, b));
            if (v - swapped).abs() > tol {
                return Err(Error::argument(format!(
                    "quasilinear coefficients not symmetric in (i,j): c^({i}{j})_({k}{a}) = {v}, c^({j}{i}) = {swapped}"
                )));
            }
            if a >= 1 {
                let other = get(&(i, j, a, k, l, b));
                if (v - other).abs() > tol {
                    return Err(Error::argument(format!(
                        "quasilinear coefficients not symmetric in (k,a): c_({k}{a}) = {v}, c_({a}{k}) = {other}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let sym: QuadraticSymbol = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        sym.validate()?;
        Ok(sym)
    }

    /// Semilinear and lower-order contributions to equation `i`.
    pub fn semilinear_value(&self, i: usize, u: &[f64], du: &[[f64; 4]]) -> f64 {
        let mut sum = 0.0;
        for t in self.semilinear.iter().filter(|t| t.equation == i) {
            let (vj, vk) = (&du[t.pair[0]], &du[t.pair[1]]);
            for a in 0..4 {
                for b in 0..4 {
                    sum += t.tensor[a * 4 + b] * vj[a] * vk[b];
                }
            }
        }
        for t in self.lower_order.iter().filter(|t| t.equation == i) {
            let other = match t.derivative {
                Some(a) => du[t.other][a],
                None => u[t.other],
            };
            sum += t.coeff * u[t.factor] * other;
        }
        sum
    }

    /// `c^{ij}_{ka}(u, ∂u)` evaluated to first order.
    pub fn quasilinear_coeff(&self, i: usize, j: usize, k: usize, a: usize, u: &[f64], du: &[[f64; 4]]) -> f64 {
        self.quasilinear
            .iter()
            .filter(|t| t.index == [i, j, k, a])
            .map(|t| {
                t.coeff
                    * match t.derivative {
                        Some(b) => du[t.unknown][b],
                        None => u[t.unknown],
                    }
            })
            .sum()
    }

    pub fn is_semilinear(&self) -> bool {
        self.quasilinear.iter().all(|t| t.coeff == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolPart {
    Semilinear,
    Quasilinear,
}

/// A null covector on which the symbol does not vanish.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullWitness {
    /// `(X_0, X)` with `X_0 = ±c|X|` and `|X| = 1`.
    pub covector: [f64; 4],
    pub value: f64,
    pub equation: usize,
    pub pair: [usize; 2],
    pub part: SymbolPart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullCheck {
    /// Null condition for the derivative terms (semilinear and quasilinear).
    pub satisfied: bool,
    pub witness: Option<NullWitness>,
    /// Largest `|symbol|` seen on null covectors, relative to the tensor size.
    pub max_relative_value: f64,
    /// Terms with an undifferentiated factor that the symbol test cannot decide.
    pub uncovered: Vec<String>,
    /// Couplings between different speeds, which are not resonant and are not tested.
    pub nonresonant: Vec<String>,
}

impl NullCheck {
    pub fn fully_null(&self) -> bool {
        self.satisfied && self.uncovered.is_empty()
    }
}

/// Unit directions: the 26 neighbours of the cube centre plus a spiral set.
fn sample_directions() -> Vec<[f64; 3]> {
    let mut dirs = Vec::new();
    // e_1 first so that witnesses are easy to read
    dirs.push([1.0, 0.0, 0.0]);
    for i in -1i32..=1 {
        for j in -1i32..=1 {
            for k in -1i32..=1 {
                if (i, j, k) == (0, 0, 0) || (i, j, k) == (1, 0, 0) {
                    continue;
                }
                let v = [i as f64, j as f64, k as f64];
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                dirs.push([v[0] / n, v[1] / n, v[2] / n]);
            }
        }
    }
    let n = 24;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    for i in 0..n {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
        let s = (1.0 - z * z).sqrt();
        let phi = golden * i as f64 + 0.3;
        dirs.push([s * phi.cos(), s * phi.sin(), z]);
    }
    dirs
}

struct Scan {
    witness: Option<NullWitness>,
    worst: f64,
}

impl Scan {
    fn record(&mut self, rel: f64, witness: NullWitness) {
        if rel > self.worst {
            self.worst = rel;
            if rel > NULL_TOL {
                self.witness = Some(witness);
            }
        }
    }
}

const NULL_TOL: f64 = 1e-10;

/// Decides the null condition for the derivative part of the symbol.
///
/// `speeds` holds one speed per unknown, or a single shared speed. Only
/// couplings whose unknowns all share a speed are resonant; the others are
/// listed in `nonresonant`.
pub fn null_condition_check(sym: &QuadraticSymbol, speeds: &[f64]) -> Result<NullCheck> {
    sym.validate()?;
    let m = sym.unknowns;
    if speeds.is_empty() || (speeds.len() != 1 && speeds.len() != m) {
        return Err(Error::argument(format!("expected 1 or {m} speeds, got {}", speeds.len())));
    }
    if speeds.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
        return Err(Error::argument("speeds must be positive"));
    }
    let speed = |i: usize| if speeds.len() == 1 { speeds[0] } else { speeds[i] };
    let dirs = sample_directions();
    let mut scan = Scan { witness: None, worst: 0.0 };
    let mut nonresonant = Vec::new();

    // combine all tensors of one (equation, unordered pair)
    let mut semi: BTreeMap<(usize, usize, usize), [f64; 16]> = BTreeMap::new();
    for t in &sym.semilinear {
        let (j, k) = (t.pair[0].min(t.pair[1]), t.pair[0].max(t.pair[1]));
        let acc = semi.entry((t.equation, j, k)).or_insert([0.0; 16]);
        for (x, y) in acc.iter_mut().zip(&t.tensor) {
            *x += y;
        }
    }
    for (&(i, j, k), tensor) in &semi {
        let c = speed(i);
        if speed(j) != c || speed(k) != c {
            nonresonant.push(format!("equation {i}: (∂u_{j})(∂u_{k})"));
            continue;
        }
        let size: f64 = tensor.iter().map(|x| x.abs()).sum();
        if size == 0.0 {
            continue;
        }
        for sigma in [1.0, -1.0] {
            for w in &dirs {
                let x = [sigma * c, w[0], w[1], w[2]];
                let mut q = 0.0;
                for a in 0..4 {
                    for b in 0..4 {
                        q += tensor[a * 4 + b] * x[a] * x[b];
                    }
                }
                let rel = q.abs() / (size * (1.0 + c * c));
                scan.record(
                    rel,
                    NullWitness { covector: x, value: q, equation: i, pair: [j, k], part: SymbolPart::Semilinear },
                );
            }
        }
    }

    // quasilinear: γ_{k a b} X_k X_a X_b per (equation, unordered pair (j, l))
    let mut quasi: BTreeMap<(usize, usize, usize), Vec<(usize, usize, usize, f64)>> = BTreeMap::new();
    let mut uncovered = Vec::new();
    for t in &sym.quasilinear {
        let [i, j, k, a] = t.index;
        if t.coeff == 0.0 {
            continue;
        }
        match t.derivative {
            Some(b) => {
                let key = (i, j.min(t.unknown), j.max(t.unknown));
                quasi.entry(key).or_default().push((k, a, b, t.coeff));
            }
            None => uncovered.push(format!("equation {i}: u_{} ∂_{k}∂_{a} u_{j}", t.unknown)),
        }
    }
    for (&(i, j, l), terms) in &quasi {
        let c = speed(i);
        if speed(j) != c || speed(l) != c {
            nonresonant.push(format!("equation {i}: (∂u_{l})(∂²u_{j})"));
            continue;
        }
        let size: f64 = terms.iter().map(|t| t.3.abs()).sum();
        for sigma in [1.0, -1.0] {
            for w in &dirs {
                let x = [sigma * c, w[0], w[1], w[2]];
                let p: f64 = terms.iter().map(|&(k, a, b, g)| g * x[k] * x[a] * x[b]).sum();
                let rel = p.abs() / (size * (1.0 + c).powi(3));
                scan.record(
                    rel,
                    NullWitness { covector: x, value: p, equation: i, pair: [j, l], part: SymbolPart::Quasilinear },
                );
            }
        }
    }

    for t in &sym.lower_order {
        if t.coeff == 0.0 {
            continue;
        }
        let desc = match t.derivative {
            Some(a) => format!("equation {}: u_{} ∂_{a} u_{}", t.equation, t.factor, t.other),
            None => format!("equation {}: u_{} u_{}", t.equation, t.factor, t.other),
        };
        uncovered.push(desc);
    }

    Ok(NullCheck {
        satisfied: scan.witness.is_none(),
        witness: scan.witness,
        max_relative_value: scan.worst,
        uncovered,
        nonresonant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q0_symbol_is_null() {
        for c in [0.5, 1.0, 3.0] {
            let sym = QuadraticSymbol::new(1).with_q0(0, 0, 0, c, 1.0);
            let check = null_condition_check(&sym, &[c]).unwrap();
            assert!(check.fully_null(), "{check:?}");
        }
    }

    #[test]
    fn dt_squared_fails_with_witness() {
        let mut a = [[0.0; 4]; 4];
        a[0][0] = 1.0;
        let sym = QuadraticSymbol::new(1).with_semilinear(0, 0, 0, a);
        let check = null_condition_check(&sym, &[1.0]).unwrap();
        assert!(!check.satisfied);
        let w = check.witness.unwrap();
        assert_eq!(w.covector, [1.0, 1.0, 0.0, 0.0]);
        assert_eq!(w.value, 1.0);
    }

    #[test]
    fn qab_symbols_are_null() {
        for (a, b) in [(0, 1), (0, 2), (1, 2), (2, 3)] {
            let sym = QuadraticSymbol::new(2).with_qab(1, 0, 1, a, b, 2.5);
            assert!(null_condition_check(&sym, &[1.3]).unwrap().satisfied);
        }
    }

    #[test]
    fn wrong_ratio_is_not_null() {
        let c = 2.0;
        let sym = QuadraticSymbol::new(1).with_q0(0, 0, 0, c * 2f64.sqrt(), 1.0);
        let check = null_condition_check(&sym, &[c]).unwrap();
        assert!(!check.satisfied);
        let w = check.witness.unwrap();
        let x = w.covector;
        let spatial = (x[1] * x[1] + x[2] * x[2] + x[3] * x[3]).sqrt();
        assert!((spatial - 1.0).abs() < 1e-12);
        assert!((x[0].abs() - c).abs() < 1e-12);
        assert!((w.value + c * c).abs() < 1e-12);
    }

    #[test]
    fn lower_order_terms_are_reported() {
        let sym = QuadraticSymbol::new(1).with_q0(0, 0, 0, 1.0, 1.0).with_lower_order(LowerOrderTerm {
            equation: 0,
            factor: 0,
            other: 0,
            derivative: Some(0),
            coeff: 1.0,
        });
        let check = null_condition_check(&sym, &[1.0]).unwrap();
        assert!(check.satisfied);
        assert!(!check.fully_null());
        assert_eq!(check.uncovered.len(), 1);
    }

    #[test]
    fn mixed_speeds_are_nonresonant() {
        let mut a = [[0.0; 4]; 4];
        a[0][0] = 1.0;
        let sym = QuadraticSymbol::new(2).with_semilinear(0, 0, 1, a);
        let check = null_condition_check(&sym, &[1.0, 2.0]).unwrap();
        assert!(check.satisfied);
        assert_eq!(check.nonresonant.len(), 1);
        assert!(null_condition_check(&sym, &[1.0, 1.0, 1.0]).is_err());
        assert!(null_condition_check(&sym, &[0.0]).is_err());
    }

    fn quasi(index: [usize; 4], b: usize, coeff: f64) -> QuasilinearTerm {
        QuasilinearTerm { index, unknown: 0, derivative: Some(b), coeff }
    }

    #[test]
    fn quasilinear_symbol() {
        // ∂_t u ∂_k∂_k u: cubic X_0 |X|² does not vanish on the cone
        let mut bad = QuadraticSymbol::new(1);
        for k in 1..=3 {
            bad = bad.with_quasilinear(quasi([0, 0, k, k], 0, 1.0));
        }
        assert!(!null_condition_check(&bad, &[1.0]).unwrap().satisfied);
        // ∂_1 u ∂_1∂_2 u - ∂_2 u ∂_1∂_1 u ... arranged as X_1 X_1 X_2 - X_2 X_1 X_1 = 0
        let good = QuadraticSymbol::new(1)
            .with_quasilinear(quasi([0, 0, 1, 2], 1, 0.5))
            .with_quasilinear(quasi([0, 0, 2, 1], 1, 0.5))
            .with_quasilinear(quasi([0, 0, 1, 1], 2, -1.0));
        assert!(null_condition_check(&good, &[1.0]).unwrap().satisfied);
    }

    #[test]
    fn quasilinear_symmetry_is_enforced() {
        let sym = QuadraticSymbol::new(1).with_quasilinear(quasi([0, 0, 1, 2], 0, 1.0));
        assert!(sym.validate().is_err());
        let sym = QuadraticSymbol::new(2).with_quasilinear(quasi([0, 1, 1, 0], 0, 1.0));
        assert!(sym.validate().is_err());
        let sym = QuadraticSymbol::new(1).with_quasilinear(quasi([0, 0, 1, 0], 0, 1.0));
        assert!(sym.validate().is_ok());
    }

    #[test]
    fn toml_round_trip() {
        let sym = QuadraticSymbol::new(2)
            .with_q0(0, 0, 1, 1.0, 2.0)
            .with_qab(1, 1, 1, 0, 3, -1.0)
            .with_lower_order(LowerOrderTerm { equation: 1, factor: 0, other: 1, derivative: None, coeff: 0.5 })
            .with_quasilinear(quasi([0, 0, 2, 0], 1, 1.0))
            .with_quasilinear(QuasilinearTerm { index: [0, 0, 1, 0], unknown: 1, derivative: None, coeff: 1.0 });
        let text = sym.to_toml().unwrap();
        assert_eq!(QuadraticSymbol::from_toml(&text).unwrap(), sym);
        assert!(QuadraticSymbol::from_toml("unknowns = 1\n[[semilinear]]\nequation = 0\npair = [0, 0]\ntensor = [1.0]\n").is_err());
    }

    #[test]
    fn rescaling_and_adding_null_forms_is_invariant() {
        let mut a = [[0.0; 4]; 4];
        a[0][1] = 1.0;
        a[2][3] = -0.4;
        let base = QuadraticSymbol::new(1).with_semilinear(0, 0, 0, a);
        let expected = null_condition_check(&base, &[1.0]).unwrap().satisfied;
        let variant = base.scaled(7.5).with_q0(0, 0, 0, 1.0, 3.0).with_qab(0, 0, 0, 1, 3, -2.0);
        assert_eq!(null_condition_check(&variant, &[1.0]).unwrap().satisfied, expected);
    }
}
