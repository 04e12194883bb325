//! Command-line front end: identity checks, the null-condition checker,
//! estimate tables and the nonlinear experiments.
//!
//! Every subcommand prints a human-readable line or two, then one JSON
//! summary line with the keys `command, params, max_ratio, exponent, stderr,
//! verdict`. Tables go to `--csv`, the summary also to `--json`. Exit codes:
//! 0 when the verdict passes, 2 when it fails, 1 on usage or domain errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::decaylab::{
    bump_data, check_estimate, cone_shell_source, panelled_options, EstimateKind, EstimateSpec, Problem,
};
use crate::error::{Error, Result};
use crate::linsolve::{CauchyData, RadialData, RadialProfile, SolverOptions, SphereRule};
use crate::nonlinear::{
    bootstrap_monitor, calibrated_data, cone_dplus_exponent, evolve, null_contrast_experiment, write_checkpoint,
    EvolveOptions, RunStatus, Scheme, SystemKind, WaveSystem, CONTRAST_RHO,
};
use crate::nullforms::{
    identity_residual, modulated_wave, null_condition_check, outgoing_gaussian, random_points, IdentityKind,
    QuadraticSymbol,
};

const SCHEMAS: &str = "\
CSV schemas (header row first, one row per sample):
  identities    identity,speed,t,x1,x2,x3,residual
  null-check    (no table; the witness is in the JSON summary)
  linear-decay  which,kappa,mu,t,r_over_t,lhs,rhs,ratio
  lemma-check   which,kappa,mu,t,r_over_t,lhs,rhs,ratio
  evolve        t,sup_u,sup_du,linear_sup_du,energy
                (bootstrap trace via --trace: t,e)
  contrast      system,eps,status,certificate_time,max_sup_u,max_linear_ratio,bootstrap_at_1,bootstrap_max

Config file (--config FILE): flat `key = value` lines naming long flags,
e.g. `kappa = 1.5` or `eps = [0.05, 0.03]`. Flags on the command line win.

Exit codes: 0 verdict pass, 2 verdict fail, 1 usage or domain error.";

#[derive(Parser, Debug)]
#[command(name = "nullcone", version, about = "Light-cone decay and null-condition experiments for 3-D wave equations")]
#[command(after_long_help = SCHEMAS)]
struct Cli {
    /// Flat `key = value` file supplying flags not given on the command line.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Residuals of the null-form identities at random points.
    Identities(IdentitiesArgs),
    /// Null-condition check of a quadratic symbol file (TOML).
    NullCheck(NullCheckArgs),
    /// Ratio table of a decay theorem (thm-i, thm-i-exterior, thm-ii).
    LinearDecay(EstimateArgs),
    /// Ratio table of a decay lemma (lem-hom, lem-inhom-u, lem-inhom-du).
    LemmaCheck(EstimateArgs),
    /// One nonlinear run with checkpoint, history and bootstrap trace.
    Evolve(EvolveArgs),
    /// Null versus non-null runs over an amplitude ladder.
    Contrast(ContrastArgs),
}

#[derive(Args, Debug)]
struct Output {
    /// CSV table path.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    /// JSON summary path.
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IdentitiesArgs {
    /// klaex, yokoex, kataex, decomposition, tangentialsum or all.
    #[arg(long, default_value = "all", value_parser = parse_identity)]
    which: IdentityChoice,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    speed: f64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    points: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pass threshold on the largest residual.
    #[arg(long, default_value_t = 1e-9, value_parser = positive)]
    tol: f64,
    #[command(flatten)]
    out: Output,
}

#[derive(Clone, Debug)]
enum IdentityChoice {
    All,
    One(IdentityKind),
}

#[derive(Args, Debug)]
struct NullCheckArgs {
    /// Symbol file in TOML (`unknowns`, `[[semilinear]]`, `[[quasilinear]]`, `[[lower_order]]`).
    #[arg(long, value_name = "FILE")]
    symbol: PathBuf,
    /// One speed, or one per unknown.
    #[arg(long, value_delimiter = ',', default_value = "1", value_parser = positive)]
    speeds: Vec<f64>,
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DataKind {
    /// `φ = b(|x|/2)`, `ψ = 0`
    Bump,
    /// `φ = e^{-|x|²}`, `ψ = 0`
    Gaussian,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Estimate name; theorems for linear-decay, lemmas for lemma-check.
    #[arg(long, value_parser = parse_estimate)]
    which: Option<EstimateKind>,
    #[arg(long, value_parser = kappa)]
    kappa: Option<f64>,
    #[arg(long, default_value_t = 0.5, value_parser = positive)]
    mu: f64,
    /// Exterior cutoff `|x| > δt` of thm-i-exterior.
    #[arg(long, value_parser = positive)]
    delta: Option<f64>,
    /// Largest dyadic time.
    #[arg(long, default_value_t = 64.0, value_parser = at_least_one)]
    tmax: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    speed: f64,
    /// Cauchy data for thm-ii and lem-hom; the other estimates use a cone shell source.
    #[arg(long, value_enum, default_value_t = DataKind::Bump)]
    data: DataKind,
    /// Sphere quadrature order.
    #[arg(long, default_value_t = 24, value_parser = clap::value_parser!(u64).range(2..=64))]
    order: u64,
    /// Skip the light-cone exponent fit.
    #[arg(long)]
    no_fit: bool,
    /// First time of the exponent fit.
    #[arg(long, default_value_t = 4.0, value_parser = non_negative)]
    fit_from: f64,
    #[command(flatten)]
    out: Output,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SystemChoice {
    /// `□u = Q_0(u, u)`
    Null,
    /// `□u = (∂_t u)²`
    NonNull,
    /// `□u = 0`
    Free,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EvolveData {
    /// The calibrated outgoing shell of the contrast experiment.
    Shell,
    /// `φ = e^{-|x|²}`, `ψ = 0`
    Gaussian,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SchemeChoice {
    Radial,
    Cartesian,
}

#[derive(Args, Debug)]
struct EvolveArgs {
    #[arg(long, value_enum, default_value_t = SystemChoice::Null)]
    system: SystemChoice,
    /// Data amplitude.
    #[arg(long, default_value_t = 0.01, value_parser = non_negative)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = EvolveData::Shell)]
    data: EvolveData,
    #[arg(long, value_enum, default_value_t = SchemeChoice::Radial)]
    scheme: SchemeChoice,
    #[arg(long, default_value_t = 0.05, value_parser = positive)]
    h: f64,
    #[arg(long, default_value_t = 50.0, value_parser = positive)]
    tmax: f64,
    #[arg(long, default_value_t = 0.5, value_parser = positive)]
    cfl: f64,
    /// Bootstrap weight exponent, in (1/2, 1).
    #[arg(long, default_value_t = CONTRAST_RHO, value_parser = rho)]
    rho: f64,
    /// Bootstrap derivative order.
    #[arg(long, default_value_t = 0)]
    k: usize,
    /// Binary checkpoint of the final state.
    #[arg(long, value_name = "FILE")]
    checkpoint: Option<PathBuf>,
    /// Bootstrap trace CSV.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug)]
struct ContrastArgs {
    /// Amplitude ladder.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.03,0.02", value_parser = non_negative)]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 0.05, value_parser = positive)]
    h: f64,
    #[arg(long, default_value_t = 50.0, value_parser = positive)]
    tmax: f64,
    #[command(flatten)]
    out: Output,
}

fn number(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    let v = number(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn non_negative(s: &str) -> std::result::Result<f64, String> {
    let v = number(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be non-negative, got {v}"))
    }
}

fn at_least_one(s: &str) -> std::result::Result<f64, String> {
    let v = number(s)?;
    if v >= 1.0 {
        Ok(v)
    } else {
        Err(format!("must be at least 1, got {v}"))
    }
}

fn kappa(s: &str) -> std::result::Result<f64, String> {
    let v = number(s)?;
    if (1.0..=2.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("kappa must lie in [1, 2], got {v}"))
    }
}

fn rho(s: &str) -> std::result::Result<f64, String> {
    let v = number(s)?;
    if v > 0.5 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("rho must lie in (1/2, 1), got {v}"))
    }
}

fn parse_identity(s: &str) -> std::result::Result<IdentityChoice, String> {
    if s == "all" {
        return Ok(IdentityChoice::All);
    }
    s.parse().map(IdentityChoice::One).map_err(|e: Error| e.to_string())
}

fn parse_estimate(s: &str) -> std::result::Result<EstimateKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn command() -> clap::Command {
    Cli::command().mut_subcommands(|s| s.allow_negative_numbers(true))
}

/// Loads the flat config file and appends `--key value` for every key not
/// already given as a flag.
fn merge_config(mut argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        let a = a.to_string_lossy();
        if a == "--config" {
            path = argv.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Argument(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        let given = argv.iter().any(|a| {
            let a = a.to_string_lossy();
            a == flag || a.starts_with(&format!("{flag}="))
        });
        if given || key == "config" {
            continue;
        }
        let scalar = |v: &toml::Value| -> Result<String> {
            match v {
                toml::Value::String(s) => Ok(s.clone()),
                toml::Value::Integer(i) => Ok(i.to_string()),
                toml::Value::Float(f) => Ok(f.to_string()),
                _ => Err(Error::Parse(format!("config key '{key}' must be a scalar or a list of scalars"))),
            }
        };
        match &value {
            toml::Value::Boolean(true) => argv.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<Result<Vec<_>>>()?;
                argv.push(flag.into());
                argv.push(parts.join(",").into());
            }
            v => {
                argv.push(flag.into());
                argv.push(scalar(v)?.into());
            }
        }
    }
    Ok(argv)
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match merge_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let parsed = command().try_get_matches_from(&argv).and_then(|m| Cli::from_arg_matches(&m));
    let cli = match parsed {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let _ = e.print();
            let mut cmd = command();
            cmd.build();
            let sub = argv.iter().skip(1).find_map(|a| {
                let a = a.to_string_lossy();
                cmd.get_subcommands().any(|s| s.get_name() == a).then(|| a.into_owned())
            });
            let help = match sub.and_then(|name| cmd.find_subcommand_mut(&name).map(|s| s.render_help())) {
                Some(h) => h,
                None => cmd.render_help(),
            };
            eprintln!("\n{help}");
            return 1;
        }
    };
    match dispatch(cli.command) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Identities(a) => identities(a),
        Command::NullCheck(a) => null_check(a),
        Command::LinearDecay(a) => estimate("linear-decay", a),
        Command::LemmaCheck(a) => estimate("lemma-check", a),
        Command::Evolve(a) => evolve_cmd(a),
        Command::Contrast(a) => contrast(a),
    }
}

fn value_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value().map_or_else(String::new, |p| p.get_name().to_string())
}

fn verdict_label(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

fn summary(command: &str, params: Value, max_ratio: Option<f64>, fit: Option<(f64, f64)>, pass: bool) -> Value {
    json!({
        "command": command,
        "params": params,
        "max_ratio": max_ratio,
        "exponent": fit.map(|f| f.0),
        "stderr": fit.map(|f| f.1),
        "verdict": verdict_label(pass),
    })
}

fn emit_summary(value: &Value, path: Option<&Path>) -> Result<()> {
    println!("{value}");
    if let Some(p) = path {
        let mut f = File::create(p)?;
        serde_json::to_writer_pretty(&mut f, value).map_err(|e| Error::Data(e.to_string()))?;
        writeln!(f)?;
    }
    Ok(())
}

fn write_rows<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for r in rows {
        w.serialize(r).map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct IdentityRow {
    identity: String,
    speed: f64,
    t: f64,
    x1: f64,
    x2: f64,
    x3: f64,
    residual: f64,
}

fn identities(a: IdentitiesArgs) -> Result<bool> {
    let kinds = match a.which {
        IdentityChoice::All => IdentityKind::ALL.to_vec(),
        IdentityChoice::One(k) => vec![k],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let points = random_points(&mut rng, a.points as usize);
    let (v, w) = (outgoing_gaussian(a.speed), modulated_wave());
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for id in &kinds {
        let mut max: f64 = 0.0;
        for p in &points {
            let res = identity_residual(*id, &v, &w, a.speed, std::slice::from_ref(p))?;
            max = max.max(res);
            rows.push(IdentityRow { identity: id.to_string(), speed: a.speed, t: p.t, x1: p.x[0], x2: p.x[1], x3: p.x[2], residual: res });
        }
        println!("{id} c={} points={} max_residual={max:.3e} {}", a.speed, a.points, verdict_label(max < a.tol));
        worst = worst.max(max);
    }
    if let Some(p) = &a.out.csv {
        write_rows(p, &rows)?;
    }
    let pass = worst < a.tol;
    let params = json!({
        "which": kinds.iter().map(|k| k.to_string()).collect::<Vec<_>>(),
        "speed": a.speed, "points": a.points, "seed": a.seed, "tol": a.tol,
    });
    emit_summary(&summary("identities", params, Some(worst), None, pass), a.out.json.as_deref())?;
    Ok(pass)
}

fn null_check(a: NullCheckArgs) -> Result<bool> {
    let text = std::fs::read_to_string(&a.symbol)
        .map_err(|e| Error::Argument(format!("cannot read symbol {}: {e}", a.symbol.display())))?;
    let sym = QuadraticSymbol::from_toml(&text)?;
    let check = null_condition_check(&sym, &a.speeds)?;
    let pass = check.fully_null();
    if pass {
        println!("satisfied");
    } else if check.satisfied {
        println!("undecided: terms without derivatives: {}", check.uncovered.join("; "));
    } else {
        println!("violated");
    }
    if let Some(w) = &check.witness {
        println!(
            "witness: equation {} pair {:?} ({:?}) covector {:?} value {:.6e}",
            w.equation, w.pair, w.part, w.covector, w.value
        );
    }
    for n in &check.nonresonant {
        println!("not tested (different speeds): {n}");
    }
    let params = json!({
        "symbol": a.symbol.display().to_string(),
        "speeds": a.speeds,
        "witness": check.witness,
        "uncovered": check.uncovered,
    });
    emit_summary(&summary("null-check", params, Some(check.max_relative_value), None, pass), a.json.as_deref())?;
    Ok(pass)
}

const THEOREMS: [EstimateKind; 3] = [EstimateKind::ThmI, EstimateKind::ThmIExterior, EstimateKind::ThmII];
const LEMMAS: [EstimateKind; 3] = [EstimateKind::LemHom, EstimateKind::LemInhomU, EstimateKind::LemInhomDu];

fn estimate(command: &str, a: EstimateArgs) -> Result<bool> {
    let (family, default_which, default_kappa) = if command == "linear-decay" {
        (&THEOREMS, EstimateKind::ThmII, 1.5)
    } else {
        (&LEMMAS, EstimateKind::LemInhomU, 1.0)
    };
    let which = a.which.unwrap_or(default_which);
    if !family.contains(&which) {
        let names: Vec<&str> = family.iter().map(|k| k.name()).collect();
        return Err(Error::Argument(format!("{command} takes --which in {{{}}}, got {which}", names.join(", "))));
    }
    let kappa = a.kappa.unwrap_or(default_kappa);
    let mut spec = EstimateSpec::new(which, kappa, a.mu).with_t_max(a.tmax);
    if let Some(d) = a.delta {
        spec = spec.with_delta(d);
    }
    // samples just off the cone, where D_+ u of compact data does not vanish
    spec.cone_offsets = vec![-1.0, 1.0];
    spec.fit_exponent = !a.no_fit;
    spec.fit_from = a.fit_from;
    let rule = SphereRule::new(a.order as usize)?;
    let (problem, opts) = match which {
        EstimateKind::ThmII | EstimateKind::LemHom => {
            let data = match a.data {
                DataKind::Bump => bump_data(1.0, 2.0),
                DataKind::Gaussian => CauchyData::from_radial(RadialData::new(
                    RadialProfile::gaussian(1.0, 1.0),
                    RadialProfile::zero(),
                )),
            };
            (Problem::Cauchy(data), SolverOptions { rule, ..SolverOptions::default() })
        }
        _ => {
            let mut opts = panelled_options();
            opts.rule = rule.with_panels(4);
            (Problem::Source(cone_shell_source(a.speed, a.tmax)), opts)
        }
    };
    let rep = check_estimate(&spec, &problem, a.speed, &opts)?;
    if let Some(p) = &a.out.csv {
        rep.write_csv(BufWriter::new(File::create(p)?))?;
    }
    let s = rep.summary();
    for (t, m) in &rep.per_time_max {
        println!("t={t} max_ratio={m:.6e}");
    }
    println!(
        "{which} kappa={kappa} mu={} max_ratio={:.6e} max_growth={} exponent={} {}",
        a.mu,
        s.max_ratio,
        s.max_growth.map_or("n/a".into(), |g| format!("{g:.4}")),
        s.exponent.map_or("n/a".into(), |p| format!("{p:.4}")),
        verdict_label(s.verdict)
    );
    let params = json!({
        "which": which.name(), "kappa": kappa, "mu": a.mu, "delta": a.delta, "tmax": a.tmax,
        "speed": a.speed, "data": value_name(&a.data), "order": a.order, "fit_from": a.fit_from,
        "max_growth": s.max_growth,
    });
    let fit = s.exponent.zip(s.stderr);
    emit_summary(&summary(command, params, Some(s.max_ratio), fit, s.verdict), a.out.json.as_deref())?;
    Ok(s.verdict)
}

#[derive(Serialize)]
struct HistoryCsv {
    t: f64,
    sup_u: f64,
    sup_du: f64,
    linear_sup_du: Option<f64>,
    energy: f64,
}

#[derive(Serialize)]
struct TraceCsv {
    t: f64,
    e: f64,
}

fn evolve_cmd(a: EvolveArgs) -> Result<bool> {
    let system = match a.system {
        SystemChoice::Null => SystemKind::Null.system()?,
        SystemChoice::NonNull => SystemKind::NonNull.system()?,
        SystemChoice::Free => WaveSystem::free(1, 1.0)?,
    };
    let data = match a.data {
        EvolveData::Shell => calibrated_data(),
        EvolveData::Gaussian => {
            CauchyData::from_radial(RadialData::new(RadialProfile::gaussian(1.0, 1.0), RadialProfile::zero()))
        }
    }
    .with_scale(a.eps);
    let scheme = match a.scheme {
        SchemeChoice::Radial => Scheme::Radial,
        SchemeChoice::Cartesian => Scheme::Cartesian,
    };
    let opts = EvolveOptions { scheme, h: a.h, t_final: a.tmax, cfl: a.cfl, ..EvolveOptions::default() };
    let sol = evolve(&system, &data, &opts)?;

    if let Some(p) = &a.out.csv {
        let rows: Vec<HistoryCsv> = sol
            .history
            .iter()
            .map(|h| HistoryCsv { t: h.t, sup_u: h.sup_u, sup_du: h.sup_du, linear_sup_du: h.linear_sup_du, energy: h.energy })
            .collect();
        write_rows(p, &rows)?;
    }
    if let Some(p) = &a.checkpoint {
        let chk = write_checkpoint(&sol, p)?;
        println!("checkpoint {} at t={}", p.display(), chk.time());
    }
    let trace = if sol.snapshots.is_empty() { None } else { Some(bootstrap_monitor(&sol, a.rho, a.k)?) };
    if let (Some(p), Some(tr)) = (&a.trace, &trace) {
        let rows: Vec<TraceCsv> = tr.times.iter().zip(&tr.values).map(|(&t, &e)| TraceCsv { t, e }).collect();
        write_rows(p, &rows)?;
    }
    let bounded = trace.as_ref().map(|tr| match tr.value_near(1.0) {
        Some(e1) => tr.max() <= 3.0 * e1,
        None => false,
    });
    let completed = sol.status == RunStatus::Completed;
    let pass = completed && bounded.unwrap_or(false);
    let max_ratio = sol
        .history
        .iter()
        .filter_map(|h| h.linear_sup_du.filter(|l| *l > 0.0).map(|l| h.sup_du / l))
        .reduce(f64::max);
    let fit = if completed && sol.scheme == Scheme::Radial && a.tmax > 8.0 {
        cone_dplus_exponent(&sol, 6.5, 4.0).ok().map(|f| (f.p, f.stderr))
    } else {
        None
    };
    match &sol.status {
        RunStatus::GrowthCertificate { time, reason } | RunStatus::NanAbort { time, reason } => {
            println!("{} at t={time:.4}: {reason}", sol.status.label())
        }
        s => println!("{} t={}", s.label(), a.tmax),
    }
    if let Some(tr) = &trace {
        println!(
            "bootstrap rho={} k={} e(1)={} max={:.6e} {}",
            a.rho,
            a.k,
            tr.value_near(1.0).map_or("n/a".into(), |e| format!("{e:.6e}")),
            tr.max(),
            if bounded == Some(true) { "bounded" } else { "unbounded" }
        );
    }
    let params = json!({
        "system": value_name(&a.system), "eps": a.eps,
        "data": value_name(&a.data), "scheme": value_name(&a.scheme),
        "h": a.h, "tmax": a.tmax, "cfl": a.cfl, "rho": a.rho, "k": a.k,
        "status": sol.status.label(), "certificate_time": sol.status.certificate_time(),
    });
    emit_summary(&summary("evolve", params, max_ratio, fit, pass), a.out.json.as_deref())?;
    Ok(pass)
}

#[derive(Serialize)]
struct ContrastCsv<'a> {
    system: &'a str,
    eps: f64,
    status: &'a str,
    certificate_time: Option<f64>,
    max_sup_u: f64,
    max_linear_ratio: f64,
    bootstrap_at_1: Option<f64>,
    bootstrap_max: Option<f64>,
}

fn contrast(a: ContrastArgs) -> Result<bool> {
    let opts = EvolveOptions { h: a.h, t_final: a.tmax, ..EvolveOptions::default() };
    let rep = null_contrast_experiment(&a.eps, &opts)?;
    for r in &rep.rows {
        println!(
            "{} eps={} {}{}",
            r.system.name(),
            r.eps,
            r.status,
            r.certificate_time.map_or(String::new(), |t| format!(" at t={t:.4}"))
        );
    }
    println!(
        "null completed={} non-null certified={} monotone={} {}",
        rep.null_completed,
        rep.non_null_certified,
        rep.monotone,
        verdict_label(rep.verdict)
    );
    if let Some(p) = &a.out.csv {
        let rows: Vec<ContrastCsv> = rep
            .rows
            .iter()
            .map(|r| ContrastCsv {
                system: r.system.name(),
                eps: r.eps,
                status: &r.status,
                certificate_time: r.certificate_time,
                max_sup_u: r.max_sup_u,
                max_linear_ratio: r.max_linear_ratio,
                bootstrap_at_1: r.bootstrap_at_1,
                bootstrap_max: r.bootstrap_max,
            })
            .collect();
        write_rows(p, &rows)?;
    }
    // bootstrap growth of the null runs, max / e(1)
    let max_ratio = rep
        .rows
        .iter()
        .filter(|r| r.system == SystemKind::Null)
        .filter_map(|r| match (r.bootstrap_max, r.bootstrap_at_1) {
            (Some(m), Some(e1)) if e1 > 0.0 => Some(m / e1),
            _ => None,
        })
        .reduce(f64::max);
    let params = json!({
        "eps": rep.rows.iter().filter(|r| r.system == SystemKind::Null).map(|r| r.eps).collect::<Vec<_>>(),
        "h": a.h, "tmax": a.tmax, "rho": CONTRAST_RHO,
        "null_completed": rep.null_completed, "non_null_certified": rep.non_null_certified, "monotone": rep.monotone,
    });
    emit_summary(&summary("contrast", params, max_ratio, None, rep.verdict), a.out.json.as_deref())?;
    Ok(rep.verdict)
}
