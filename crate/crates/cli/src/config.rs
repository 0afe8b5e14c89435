//! Declarative run configuration (TOML).
//!
//! Parsing never stops at the first problem: every unknown key, missing
//! field and out-of-range value is collected and reported together.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nvhp_core::orientation::NvConstants;
use serde::Serialize;
use toml::{Table, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    Syntax,
    UnknownKey,
    MissingRequired,
    OutOfRange,
    WrongType,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigError {
    pub kind: ErrorKind,
    pub field: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl ConfigErrors {
    pub fn has(&self, kind: ErrorKind, field: &str) -> bool {
        self.0.iter().any(|e| e.kind == kind && e.field == field)
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", e.field, e.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Levels,
    PmaxSurface,
    Prep,
    Cycle,
    Depolarize,
    Multispin,
    Ensemble,
    Totals,
    ValidateSecular,
    Rotation,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::Levels,
        Experiment::PmaxSurface,
        Experiment::Prep,
        Experiment::Cycle,
        Experiment::Depolarize,
        Experiment::Multispin,
        Experiment::Ensemble,
        Experiment::Totals,
        Experiment::ValidateSecular,
        Experiment::Rotation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Levels => "levels",
            Experiment::PmaxSurface => "pmax-surface",
            Experiment::Prep => "prep",
            Experiment::Cycle => "cycle",
            Experiment::Depolarize => "depolarize",
            Experiment::Multispin => "multispin",
            Experiment::Ensemble => "ensemble",
            Experiment::Totals => "totals",
            Experiment::ValidateSecular => "validate-secular",
            Experiment::Rotation => "rotation",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConstantsCfg {
    pub d: f64,
    pub e: f64,
    pub gamma_e: f64,
    pub gamma_n: f64,
    pub b: f64,
}

impl ConstantsCfg {
    pub fn nv(&self) -> NvConstants {
        NvConstants {
            d: self.d,
            e: self.e,
            gamma_e: self.gamma_e,
            gamma_n: self.gamma_n,
            b: self.b,
        }
    }

    pub fn gamma_n_b(&self) -> f64 {
        self.gamma_n * self.b
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelsCfg {
    pub omega_eff: f64,
    pub a_x: f64,
    pub a_z: f64,
    pub branch: String,
    pub delta_min: f64,
    pub delta_max: f64,
    pub n_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PmaxSurfaceCfg {
    pub omega_eff: f64,
    pub a_x_min: f64,
    pub a_x_max: f64,
    pub n_a_x: usize,
    pub rate_min: f64,
    pub rate_max: f64,
    pub n_rate: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrepCfg {
    pub omega_minus: f64,
    pub span: f64,
    pub duration: f64,
    pub theta_max_deg: f64,
    pub n_theta: usize,
}

/// Shared by `cycle` and `depolarize`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleCfg {
    pub omega_eff: f64,
    pub a_x: f64,
    pub a_z: f64,
    pub branch: String,
    pub rate: f64,
    pub duration: f64,
    pub n_cycles: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_step: Option<f64>,
    pub model: String,
    pub secular_term: bool,
    pub reset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reset_theta_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_averaging: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t1rho: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultispinCfg {
    pub omega_eff: f64,
    pub a_x: Vec<f64>,
    pub a_z: Vec<f64>,
    pub branch: String,
    pub rate: f64,
    pub duration: f64,
    pub n_cycles: usize,
    pub time_step: f64,
    pub dipolar_d: f64,
    pub chain_axis: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionCfg {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_max_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi_deg: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatticeCfg {
    pub n_sites: usize,
    pub abundance: f64,
    pub lattice_constant: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiffusionCfg {
    pub flip_flop_rate_scale: f64,
    pub frozen_core_threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleCfg {
    pub omega_eff: f64,
    pub rate: f64,
    pub cycle_time: f64,
    pub tau_b: f64,
    pub duration: f64,
    pub lattice: LatticeCfg,
    pub diffusion: DiffusionCfg,
    pub active: RegionCfg,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depolarizing: Option<RegionCfg>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TotalsCfg {
    pub volume_mm3: f64,
    pub diameter_nm: f64,
    pub nv_concentration: f64,
    pub abundance: f64,
    pub polarization: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidateSecularCfg {
    pub theta_deg: f64,
    pub fields: Vec<f64>,
    pub duration: f64,
    pub n_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RotationCfg {
    pub angle_deg: f64,
    pub durations: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Params {
    Levels(LevelsCfg),
    PmaxSurface(PmaxSurfaceCfg),
    Prep(PrepCfg),
    Cycle(CycleCfg),
    Depolarize(CycleCfg),
    Multispin(MultispinCfg),
    Ensemble(EnsembleCfg),
    Totals(TotalsCfg),
    ValidateSecular(ValidateSecularCfg),
    Rotation(RotationCfg),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output: String,
    pub constants: ConstantsCfg,
    pub params: Params,
}

/// Command-line values that take precedence over the document.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output: Option<String>,
}

impl RunConfig {
    /// Fully resolved document; parsing it yields this config again.
    pub fn to_toml(&self) -> String {
        let mut t = Table::new();
        t.insert(
            "experiment".into(),
            Value::String(self.experiment.name().into()),
        );
        t.insert("seed".into(), Value::Integer(self.seed as i64));
        t.insert("output".into(), Value::String(self.output.clone()));
        t.insert("constants".into(), to_value(&self.constants));
        let section = match &self.params {
            Params::Levels(p) => to_value(p),
            Params::PmaxSurface(p) => to_value(p),
            Params::Prep(p) => to_value(p),
            Params::Cycle(p) | Params::Depolarize(p) => to_value(p),
            Params::Multispin(p) => to_value(p),
            Params::Ensemble(p) => to_value(p),
            Params::Totals(p) => to_value(p),
            Params::ValidateSecular(p) => to_value(p),
            Params::Rotation(p) => to_value(p),
        };
        t.insert(self.experiment.name().into(), section);
        toml::to_string(&t).expect("resolved config serializes")
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    Value::try_from(v).expect("config section serializes")
}

#[derive(Clone, Copy)]
enum Check {
    Any,
    Positive,
    NonNegative,
    Fraction,
    Range(f64, f64),
}

impl Check {
    fn accepts(self, x: f64) -> Result<(), String> {
        let ok = match self {
            Check::Any => x.is_finite(),
            Check::Positive => x > 0.0 && x.is_finite(),
            Check::NonNegative => x >= 0.0 && x.is_finite(),
            Check::Fraction => (0.0..=1.0).contains(&x),
            Check::Range(lo, hi) => (lo..=hi).contains(&x),
        };
        if ok {
            return Ok(());
        }
        Err(match self {
            Check::Any => format!("{x} must be finite"),
            Check::Positive => format!("{x} must be positive"),
            Check::NonNegative => format!("{x} must be non-negative"),
            Check::Fraction => format!("{x} must lie in [0, 1]"),
            Check::Range(lo, hi) => format!("{x} must lie in [{lo}, {hi}]"),
        })
    }
}

struct Reader<'a> {
    root: &'a Table,
    used: RefCell<BTreeSet<String>>,
    errors: RefCell<Vec<ConfigError>>,
}

impl<'a> Reader<'a> {
    fn new(root: &'a Table) -> Self {
        Self {
            root,
            used: RefCell::new(BTreeSet::new()),
            errors: RefCell::new(Vec::new()),
        }
    }

    fn err(&self, kind: ErrorKind, field: &str, message: impl Into<String>) {
        self.errors.borrow_mut().push(ConfigError {
            kind,
            field: field.to_string(),
            message: message.into(),
        });
    }

    fn lookup(&self, path: &str) -> Option<&'a Value> {
        self.used.borrow_mut().insert(path.to_string());
        let mut parts = path.split('.');
        let mut v = self.root.get(parts.next()?)?;
        for p in parts {
            v = v.as_table()?.get(p)?;
        }
        Some(v)
    }

    fn present(&self, path: &str) -> bool {
        let mut parts = path.split('.');
        let Some(mut v) = parts.next().and_then(|p| self.root.get(p)) else {
            return false;
        };
        for p in parts {
            match v.as_table().and_then(|t| t.get(p)) {
                Some(x) => v = x,
                None => return false,
            }
        }
        true
    }

    fn as_f64(v: &Value) -> Option<f64> {
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn opt_num(&self, path: &str, check: Check) -> Option<f64> {
        let v = self.lookup(path)?;
        let Some(x) = Self::as_f64(v) else {
            self.err(ErrorKind::WrongType, path, "expected a number");
            return None;
        };
        if let Err(m) = check.accepts(x) {
            self.err(ErrorKind::OutOfRange, path, m);
            return None;
        }
        Some(x)
    }

    fn num(&self, path: &str, default: f64, check: Check) -> f64 {
        self.opt_num(path, check).unwrap_or(default)
    }

    fn opt_int(&self, path: &str, min: i64) -> Option<i64> {
        let v = self.lookup(path)?;
        let Some(i) = v.as_integer() else {
            self.err(ErrorKind::WrongType, path, "expected an integer");
            return None;
        };
        if i < min {
            self.err(
                ErrorKind::OutOfRange,
                path,
                format!("{i} must be at least {min}"),
            );
            return None;
        }
        Some(i)
    }

    fn count(&self, path: &str, default: usize, min: usize) -> usize {
        self.opt_int(path, min as i64)
            .map_or(default, |i| i as usize)
    }

    fn flag(&self, path: &str, default: bool) -> bool {
        match self.lookup(path) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(_) => {
                self.err(ErrorKind::WrongType, path, "expected a boolean");
                default
            }
        }
    }

    fn string(&self, path: &str, default: &str) -> String {
        match self.lookup(path) {
            None => default.to_string(),
            Some(Value::String(s)) => s.clone(),
            Some(_) => {
                self.err(ErrorKind::WrongType, path, "expected a string");
                default.to_string()
            }
        }
    }

    fn choice(&self, path: &str, default: &str, allowed: &[&str]) -> String {
        let s = self.string(path, default);
        if !allowed.contains(&s.as_str()) {
            self.err(
                ErrorKind::OutOfRange,
                path,
                format!("`{s}` is not one of {}", allowed.join(", ")),
            );
            return default.to_string();
        }
        s
    }

    fn num_list(&self, path: &str, default: &[f64], check: Check) -> Vec<f64> {
        let Some(v) = self.lookup(path) else {
            return default.to_vec();
        };
        let Some(items) = v.as_array() else {
            self.err(ErrorKind::WrongType, path, "expected an array of numbers");
            return default.to_vec();
        };
        let mut out = Vec::with_capacity(items.len());
        for (k, item) in items.iter().enumerate() {
            match Self::as_f64(item) {
                None => self.err(
                    ErrorKind::WrongType,
                    &format!("{path}[{k}]"),
                    "expected a number",
                ),
                Some(x) => match check.accepts(x) {
                    Ok(()) => out.push(x),
                    Err(m) => self.err(ErrorKind::OutOfRange, &format!("{path}[{k}]"), m),
                },
            }
        }
        out
    }

    /// Keys present in the document that no reader asked for.
    fn report_unknown(&self, skip: &BTreeSet<String>) {
        let used = self.used.borrow().clone();
        let mut unknown = Vec::new();
        walk(self.root, "", &used, skip, &mut unknown);
        for path in unknown {
            self.err(ErrorKind::UnknownKey, &path, "unknown key");
        }
    }
}

fn walk(
    t: &Table,
    prefix: &str,
    used: &BTreeSet<String>,
    skip: &BTreeSet<String>,
    out: &mut Vec<String>,
) {
    for (k, v) in t {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        if skip.contains(&path) {
            continue;
        }
        let child_used = used.iter().any(|u| u.starts_with(&format!("{path}.")));
        match v {
            Value::Table(inner) if child_used => walk(inner, &path, used, skip, out),
            _ if used.contains(&path) => {}
            _ => out.push(path),
        }
    }
}

const BRANCHES: &[&str] = &["positive", "negative"];
const MODELS: &[&str] = &["secular", "full"];
const RESETS: &[&str] = &["chi-minus", "chi-plus", "unpolarized", "orientation"];
const REGIONS: &[&str] = &["cone", "band"];

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    parse_config_with(text, &Overrides::default())
}

pub fn parse_config_with(text: &str, ov: &Overrides) -> Result<RunConfig, ConfigErrors> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        ConfigErrors(vec![ConfigError {
            kind: ErrorKind::Syntax,
            field: String::new(),
            message: e.message().to_string(),
        }])
    })?;
    let r = Reader::new(&root);

    let experiment = match r.lookup("experiment") {
        None => {
            r.err(ErrorKind::MissingRequired, "experiment", "required");
            None
        }
        Some(Value::String(s)) if s.trim().is_empty() => {
            r.err(
                ErrorKind::MissingRequired,
                "experiment",
                "must not be empty",
            );
            None
        }
        Some(Value::String(s)) => match s.parse::<Experiment>() {
            Ok(e) => Some(e),
            Err(m) => {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                r.err(
                    ErrorKind::OutOfRange,
                    "experiment",
                    format!("{m}; expected one of {}", names.join(", ")),
                );
                None
            }
        },
        Some(_) => {
            r.err(ErrorKind::WrongType, "experiment", "expected a string");
            None
        }
    };

    let file_seed = r.opt_int("seed", 0).map(|s| s as u64);
    let seed = ov.seed.or(file_seed).unwrap_or(0);
    let file_output = r.string("output", "out");
    let output = ov.output.clone().unwrap_or(file_output);
    if output.is_empty() {
        r.err(ErrorKind::OutOfRange, "output", "must not be empty");
    }

    let k = NvConstants::default();
    let constants = ConstantsCfg {
        d: r.num("constants.d", k.d, Check::Positive),
        e: r.num("constants.e", k.e, Check::NonNegative),
        gamma_e: r.num("constants.gamma_e", k.gamma_e, Check::Positive),
        gamma_n: r.num("constants.gamma_n", k.gamma_n, Check::Positive),
        b: r.num("constants.b", k.b, Check::Positive),
    };

    let params = experiment.map(|e| read_params(&r, e, &constants, seed));

    // With no valid experiment, its section cannot be judged.
    let skip: BTreeSet<String> = if experiment.is_none() {
        Experiment::ALL
            .iter()
            .map(|e| e.name().to_string())
            .collect()
    } else {
        BTreeSet::new()
    };
    r.report_unknown(&skip);

    let errors = r.errors.into_inner();
    match (experiment, params) {
        (Some(experiment), Some(params)) if errors.is_empty() => Ok(RunConfig {
            experiment,
            seed,
            output,
            constants,
            params,
        }),
        _ => Err(ConfigErrors(errors)),
    }
}

fn require_resonance(r: &Reader, path: &str, omega_eff: f64, c: &ConstantsCfg) {
    if omega_eff >= c.gamma_n_b() {
        r.err(
            ErrorKind::OutOfRange,
            path,
            format!(
                "{omega_eff} MHz leaves no Hartmann-Hahn resonance below gamma_n*B = {} MHz",
                c.gamma_n_b()
            ),
        );
    }
}

fn ordered(r: &Reader, path: &str, lo: f64, hi: f64) {
    if lo >= hi {
        r.err(
            ErrorKind::OutOfRange,
            path,
            format!("{hi} must exceed the lower bound {lo}"),
        );
    }
}

fn read_params(r: &Reader, e: Experiment, c: &ConstantsCfg, seed: u64) -> Params {
    let s = e.name();
    let p = |k: &str| format!("{s}.{k}");
    match e {
        Experiment::Levels => {
            let cfg = LevelsCfg {
                omega_eff: r.num(&p("omega_eff"), 3.0, Check::Positive),
                a_x: r.num(&p("a_x"), 1.0, Check::NonNegative),
                a_z: r.num(&p("a_z"), 0.0, Check::Any),
                branch: r.choice(&p("branch"), "positive", BRANCHES),
                delta_min: r.num(&p("delta_min"), -6.0, Check::Any),
                delta_max: r.num(&p("delta_max"), 6.0, Check::Any),
                n_points: r.count(&p("n_points"), 241, 2),
            };
            ordered(r, &p("delta_max"), cfg.delta_min, cfg.delta_max);
            Params::Levels(cfg)
        }
        Experiment::PmaxSurface => {
            let cfg = PmaxSurfaceCfg {
                omega_eff: r.num(&p("omega_eff"), 3.6, Check::Positive),
                a_x_min: r.num(&p("a_x_min"), 0.1, Check::Positive),
                a_x_max: r.num(&p("a_x_max"), 1.0, Check::Positive),
                n_a_x: r.count(&p("n_a_x"), 19, 2),
                rate_min: r.num(&p("rate_min"), 1.0, Check::Positive),
                rate_max: r.num(&p("rate_max"), 20.0, Check::Positive),
                n_rate: r.count(&p("n_rate"), 20, 2),
            };
            ordered(r, &p("a_x_max"), cfg.a_x_min, cfg.a_x_max);
            ordered(r, &p("rate_max"), cfg.rate_min, cfg.rate_max);
            require_resonance(r, &p("omega_eff"), cfg.omega_eff, c);
            Params::PmaxSurface(cfg)
        }
        Experiment::Prep => Params::Prep(PrepCfg {
            omega_minus: r.num(&p("omega_minus"), 20.0, Check::NonNegative),
            span: r.num(&p("span"), 870.0, Check::Positive),
            duration: r.num(&p("duration"), 0.4, Check::Positive),
            theta_max_deg: r.num(&p("theta_max_deg"), 20.0, Check::Range(0.0, 90.0)),
            n_theta: r.count(&p("n_theta"), 21, 2),
        }),
        Experiment::Cycle => Params::Cycle(read_cycle(r, s, c, 3.0, 0.6, 0.64, 30, "chi-minus")),
        Experiment::Depolarize => {
            let cfg = read_cycle(r, s, c, 3.5, 0.6, 0.0, 10, "unpolarized");
            if cfg.reset != "unpolarized" {
                r.err(
                    ErrorKind::OutOfRange,
                    &p("reset"),
                    "depolarization runs reset the electron to the unpolarized state",
                );
            }
            if cfg.phase_averaging.is_some() {
                r.err(
                    ErrorKind::OutOfRange,
                    &p("phase_averaging"),
                    "not used by depolarization runs",
                );
            }
            Params::Depolarize(cfg)
        }
        Experiment::Multispin => {
            let a_x = r.num_list(&p("a_x"), &[0.7, 0.5, 0.4, 0.32, 0.2], Check::NonNegative);
            let a_z = if r.present(&p("a_z")) {
                r.num_list(&p("a_z"), &[], Check::Any)
            } else {
                vec![0.0; a_x.len()]
            };
            if a_x.is_empty() || a_x.len() > nvhp_core::cycles::MAX_SPINS {
                r.err(
                    ErrorKind::OutOfRange,
                    &p("a_x"),
                    format!("need 1 to {} spins", nvhp_core::cycles::MAX_SPINS),
                );
            }
            if a_z.len() != a_x.len() {
                r.err(
                    ErrorKind::OutOfRange,
                    &p("a_z"),
                    "must have one entry per spin",
                );
            }
            let cfg = MultispinCfg {
                omega_eff: r.num(&p("omega_eff"), 3.23, Check::Positive),
                a_x,
                a_z,
                branch: r.choice(&p("branch"), "positive", BRANCHES),
                rate: r.num(&p("rate"), 6.0, Check::Positive),
                duration: r.num(&p("duration"), 10.0, Check::Positive),
                n_cycles: r.count(&p("n_cycles"), 20, 1),
                time_step: r.num(&p("time_step"), 1e-3, Check::Positive),
                dipolar_d: r.num(&p("dipolar_d"), 0.002, Check::Any),
                chain_axis: r.num_list(&p("chain_axis"), &[1.0, 0.0, 0.0], Check::Any),
            };
            let norm: f64 = cfg.chain_axis.iter().map(|x| x * x).sum::<f64>().sqrt();
            if cfg.chain_axis.len() != 3 || norm == 0.0 {
                r.err(
                    ErrorKind::OutOfRange,
                    &p("chain_axis"),
                    "must be a non-zero 3-vector",
                );
            }
            require_resonance(r, &p("omega_eff"), cfg.omega_eff, c);
            Params::Multispin(cfg)
        }
        Experiment::Ensemble => {
            let l = nvhp_core::ensemble::LatticeConfig::default();
            let d = nvhp_core::ensemble::DiffusionConfig::default();
            let cfg = EnsembleCfg {
                omega_eff: r.num(&p("omega_eff"), 2.3, Check::Positive),
                rate: r.num(&p("rate"), 0.8, Check::Positive),
                cycle_time: r.num(&p("cycle_time"), 70.0, Check::Positive),
                tau_b: r.num(&p("tau_b"), 205.0, Check::Positive),
                duration: r.num(&p("duration"), 2e6, Check::Positive),
                lattice: LatticeCfg {
                    n_sites: r.count(&p("lattice.n_sites"), l.n_sites, 1),
                    abundance: r.num(&p("lattice.abundance"), l.abundance, Check::Fraction),
                    lattice_constant: r.num(
                        &p("lattice.lattice_constant"),
                        l.lattice_constant,
                        Check::Positive,
                    ),
                    seed: r.opt_int(&p("lattice.seed"), 0).map_or(seed, |s| s as u64),
                },
                diffusion: DiffusionCfg {
                    flip_flop_rate_scale: r.num(
                        &p("diffusion.flip_flop_rate_scale"),
                        d.flip_flop_rate_scale,
                        Check::Positive,
                    ),
                    frozen_core_threshold: r.num(
                        &p("diffusion.frozen_core_threshold"),
                        d.frozen_core_threshold,
                        Check::Positive,
                    ),
                },
                active: read_region(r, &p("active"), true).expect("required region has a value"),
                depolarizing: read_region(r, &p("depolarizing"), false),
            };
            if cfg.lattice.abundance == 0.0 {
                r.err(
                    ErrorKind::OutOfRange,
                    &p("lattice.abundance"),
                    "must be positive",
                );
            }
            require_resonance(r, &p("omega_eff"), cfg.omega_eff, c);
            Params::Ensemble(cfg)
        }
        Experiment::Totals => Params::Totals(TotalsCfg {
            volume_mm3: r.num(&p("volume_mm3"), 1.0, Check::Positive),
            diameter_nm: r.num(&p("diameter_nm"), 85.0, Check::Positive),
            nv_concentration: r.num(&p("nv_concentration"), 2e18, Check::Positive),
            abundance: r.num(&p("abundance"), 0.011, Check::Fraction),
            polarization: r.num(&p("polarization"), 0.3, Check::Range(-1.0, 1.0)),
        }),
        Experiment::ValidateSecular => {
            let cfg = ValidateSecularCfg {
                theta_deg: r.num(&p("theta_deg"), 10.0, Check::Range(0.0, 180.0)),
                fields: r.num_list(&p("fields"), &[0.36, 0.54], Check::Positive),
                duration: r.num(&p("duration"), 1.0, Check::Positive),
                n_points: r.count(&p("n_points"), 2001, 2),
            };
            if cfg.fields.is_empty() {
                r.err(
                    ErrorKind::OutOfRange,
                    &p("fields"),
                    "need at least one field",
                );
            }
            Params::ValidateSecular(cfg)
        }
        Experiment::Rotation => {
            let cfg = RotationCfg {
                angle_deg: r.num(&p("angle_deg"), 180.0, Check::Any),
                durations: r.num_list(
                    &p("durations"),
                    &[0.01, 0.03, 0.078, 0.2, 1.0, 10.0, 50.0],
                    Check::Positive,
                ),
            };
            if cfg.durations.is_empty() {
                r.err(
                    ErrorKind::OutOfRange,
                    &p("durations"),
                    "need at least one duration",
                );
            }
            Params::Rotation(cfg)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn read_cycle(
    r: &Reader,
    s: &str,
    c: &ConstantsCfg,
    omega_eff: f64,
    a_x: f64,
    a_z: f64,
    n_cycles: usize,
    reset: &str,
) -> CycleCfg {
    let p = |k: &str| format!("{s}.{k}");
    let cfg = CycleCfg {
        omega_eff: r.num(&p("omega_eff"), omega_eff, Check::Positive),
        a_x: r.num(&p("a_x"), a_x, Check::NonNegative),
        a_z: r.num(&p("a_z"), a_z, Check::Any),
        branch: r.choice(&p("branch"), "positive", BRANCHES),
        rate: r.num(&p("rate"), 6.0, Check::Positive),
        duration: r.num(&p("duration"), 10.0, Check::Positive),
        n_cycles: r.count(&p("n_cycles"), n_cycles, 1),
        time_step: r.opt_num(&p("time_step"), Check::Positive),
        model: r.choice(&p("model"), "secular", MODELS),
        secular_term: r.flag(&p("secular_term"), true),
        reset: r.choice(&p("reset"), reset, RESETS),
        reset_theta_deg: r.opt_num(&p("reset_theta_deg"), Check::Range(0.0, 90.0)),
        phase_averaging: r
            .opt_int(&p("phase_averaging"), nvhp_core::sweep::MIN_PHASES as i64)
            .map(|n| n as usize),
        t1rho: r.opt_num(&p("t1rho"), Check::Positive),
    };
    match (cfg.reset.as_str(), cfg.reset_theta_deg) {
        ("orientation", None) => r.err(
            ErrorKind::MissingRequired,
            &p("reset_theta_deg"),
            "required when reset = \"orientation\"",
        ),
        ("orientation", Some(_)) | (_, None) => {}
        (_, Some(_)) => r.err(
            ErrorKind::OutOfRange,
            &p("reset_theta_deg"),
            "only used when reset = \"orientation\"",
        ),
    }
    require_resonance(r, &p("omega_eff"), cfg.omega_eff, c);
    cfg
}

fn read_region(r: &Reader, path: &str, required: bool) -> Option<RegionCfg> {
    if !required && !r.present(path) {
        return None;
    }
    let p = |k: &str| format!("{path}.{k}");
    let kind = r.choice(&p("kind"), "cone", REGIONS);
    let mut cfg = RegionCfg {
        kind,
        theta_max_deg: None,
        lo_deg: None,
        hi_deg: None,
    };
    if cfg.kind == "cone" {
        cfg.theta_max_deg = Some(r.num(&p("theta_max_deg"), 20.0, Check::Range(0.0, 90.0)));
    } else {
        let lo = r.opt_num(&p("lo_deg"), Check::Range(0.0, 180.0));
        let hi = r.opt_num(&p("hi_deg"), Check::Range(0.0, 180.0));
        for (v, k) in [(lo, "lo_deg"), (hi, "hi_deg")] {
            if v.is_none() && !r.present(&p(k)) {
                r.err(ErrorKind::MissingRequired, &p(k), "required for a band");
            }
        }
        if let (Some(a), Some(b)) = (lo, hi) {
            ordered(r, &p("hi_deg"), a, b);
        }
        cfg.lo_deg = lo;
        cfg.hi_deg = hi;
    }
    Some(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_experiment_is_missing() {
        let e = parse_config("experiment = \"\"").unwrap_err();
        assert!(e.has(ErrorKind::MissingRequired, "experiment"));
        let e = parse_config("seed = 3").unwrap_err();
        assert!(e.has(ErrorKind::MissingRequired, "experiment"));
    }

    #[test]
    fn negative_field_is_out_of_range() {
        let e = parse_config("experiment = \"cycle\"\n[constants]\nb = -1").unwrap_err();
        assert!(e.has(ErrorKind::OutOfRange, "constants.b"));
    }

    #[test]
    fn minimal_cycle_config_fills_defaults() {
        let c = parse_config("experiment = \"cycle\"").unwrap();
        assert_eq!(c.experiment, Experiment::Cycle);
        assert_eq!(
            (c.constants.d, c.constants.e, c.constants.b),
            (2870.0, 20.0, 0.36)
        );
        let echo = c.to_toml();
        assert!(echo.contains("d = 2870.0"));
        assert!(echo.contains("b = 0.36"));
    }

    #[test]
    fn every_error_is_reported() {
        let text = "experiment = \"cycle\"\nbogus = 1\n[cycle]\nrate = -2\nn_cycles = 0\ncolour = \"red\"\n[constants]\nb = 0";
        let e = parse_config(text).unwrap_err();
        assert!(e.has(ErrorKind::UnknownKey, "bogus"));
        assert!(e.has(ErrorKind::UnknownKey, "cycle.colour"));
        assert!(e.has(ErrorKind::OutOfRange, "cycle.rate"));
        assert!(e.has(ErrorKind::OutOfRange, "cycle.n_cycles"));
        assert!(e.has(ErrorKind::OutOfRange, "constants.b"));
        assert_eq!(e.0.len(), 5, "{e}");
    }

    #[test]
    fn section_of_another_experiment_is_unknown() {
        let e = parse_config("experiment = \"levels\"\n[cycle]\nrate = 2").unwrap_err();
        assert!(e.has(ErrorKind::UnknownKey, "cycle"));
    }

    #[test]
    fn unknown_experiment_named() {
        let e = parse_config("experiment = \"fig7\"\n[fig7]\nx = 1").unwrap_err();
        assert!(e.has(ErrorKind::OutOfRange, "experiment"));
        assert!(e.has(ErrorKind::UnknownKey, "fig7"));
    }

    #[test]
    fn echo_round_trips_for_every_experiment() {
        for e in Experiment::ALL {
            let c = parse_config(&format!("experiment = \"{e}\"\nseed = 5")).unwrap();
            let again = parse_config(&c.to_toml()).unwrap();
            assert_eq!(c, again, "{e}");
        }
        let band = "experiment = \"ensemble\"\n[ensemble.active]\nkind = \"band\"\nlo_deg = 70\nhi_deg = 110\n[ensemble.depolarizing]\nkind = \"cone\"\ntheta_max_deg = 20";
        let c = parse_config(band).unwrap();
        assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn overrides_take_precedence() {
        let ov = Overrides {
            seed: Some(9),
            output: Some("elsewhere".into()),
        };
        let c = parse_config_with("experiment = \"ensemble\"\nseed = 1", &ov).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.output, "elsewhere");
        let Params::Ensemble(p) = &c.params else {
            panic!()
        };
        assert_eq!(p.lattice.seed, 9);
    }

    #[test]
    fn resonance_is_required() {
        let e = parse_config("experiment = \"cycle\"\n[cycle]\nomega_eff = 4.5").unwrap_err();
        assert!(e.has(ErrorKind::OutOfRange, "cycle.omega_eff"));
    }

    #[test]
    fn orientation_reset_needs_angle() {
        let e =
            parse_config("experiment = \"cycle\"\n[cycle]\nreset = \"orientation\"").unwrap_err();
        assert!(e.has(ErrorKind::MissingRequired, "cycle.reset_theta_deg"));
        let e = parse_config("experiment = \"depolarize\"\n[depolarize]\nreset = \"chi-minus\"")
            .unwrap_err();
        assert!(e.has(ErrorKind::OutOfRange, "depolarize.reset"));
    }

    #[test]
    fn syntax_error_reported() {
        let e = parse_config("experiment = ").unwrap_err();
        assert_eq!(e.0[0].kind, ErrorKind::Syntax);
    }
}
