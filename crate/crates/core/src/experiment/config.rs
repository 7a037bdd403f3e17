//! Plain-text experiment description.
//!
//! ```text
//! # comment
//! mode = static_measure
//! model = ring
//! n_sys_list = 4
//! n_env_list = 8, 10
//! beta_list = 0.1, 0.9
//! lambda_list = 0, 0.5, 1
//!
//! [system_bonds]        # custom models only; sites are 1-based
//! 1 2  -1 -1 -1
//! ```
//!
//! Keys are unique, lists are comma separated, and bond-table rows are
//! `i j Jx Jy Jz`. For `[coupling_bonds]`, `i` is a system site and `j` an
//! environment site.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hamiltonian::{
    build_chain_model, build_ring_model_with, Bond, Coupling, EnvTopology, SpinModel, DEFAULT_MAX_SPINS,
};
use crate::observe::{InitialState, DEFAULT_T_BURN};
use crate::propagate::Method;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    StaticMeasure,
    TimeTrace,
    TheoryOverlay,
    SymmetryCheck,
    NormalizationDiag,
    MomentCheck,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::StaticMeasure => "static_measure",
            Mode::TimeTrace => "time_trace",
            Mode::TheoryOverlay => "theory_overlay",
            Mode::SymmetryCheck => "symmetry_check",
            Mode::NormalizationDiag => "normalization_diag",
            Mode::MomentCheck => "moment_check",
        }
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "static_measure" => Mode::StaticMeasure,
            "time_trace" => Mode::TimeTrace,
            "theory_overlay" => Mode::TheoryOverlay,
            "symmetry_check" => Mode::SymmetryCheck,
            "normalization_diag" => Mode::NormalizationDiag,
            "moment_check" => Mode::MomentCheck,
            _ => return Err(format!("unknown mode `{s}`")),
        })
    }
}

/// How the reduced state of a sweep point is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Estimator {
    /// One pure state per realization.
    #[default]
    Sample,
    /// Exact `Tr_E e^{-βH}/Z` from a full diagonalization; one row per point.
    Gibbs,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    Ring {
        j_system: f64,
        coupling_seed: u64,
        env_seed: u64,
        topology: EnvTopology,
    },
    Chain {
        j_iso: f64,
        omega_iso: f64,
        delta_iso: f64,
    },
    Custom {
        system_bonds: Vec<Bond>,
        env_bonds: Vec<Bond>,
        coupling_bonds: Vec<Bond>,
    },
}

impl ModelSpec {
    /// Bond tables of an existing model.
    pub fn from_model(model: &SpinModel) -> Self {
        ModelSpec::Custom {
            system_bonds: model.system_bonds().to_vec(),
            env_bonds: model.env_bonds().to_vec(),
            coupling_bonds: model.coupling_bonds().to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub model: ModelSpec,
    pub n_sys_list: Vec<usize>,
    pub n_env_list: Vec<usize>,
    pub beta_list: Vec<f64>,
    pub lambda_list: Vec<f64>,
    /// `None` selects a size-dependent default, see [`default_realizations`].
    pub n_realizations: Option<usize>,
    pub master_seed: u64,
    pub method: Method,
    pub initial_state: InitialState,
    pub estimator: Estimator,
    pub coupling_shift: f64,
    pub t_max: f64,
    pub dt: f64,
    pub t_burn: f64,
    pub max_spins: usize,
    pub output: Option<PathBuf>,
}

/// 1000 realizations up to 12 spins, 10 up to 20, a single one above.
pub fn default_realizations(n_spins: usize) -> usize {
    match n_spins {
        0..=12 => 1000,
        13..=20 => 10,
        _ => 1,
    }
}

impl ExperimentConfig {
    /// Defaults for everything except the mode and model.
    pub fn new(mode: Mode, model: ModelSpec) -> Self {
        Self {
            mode,
            model,
            n_sys_list: vec![],
            n_env_list: vec![],
            beta_list: vec![0.0],
            lambda_list: vec![1.0],
            n_realizations: None,
            master_seed: 0,
            method: Method::Chebyshev,
            initial_state: InitialState::X,
            estimator: Estimator::Sample,
            coupling_shift: 0.0,
            t_max: 300.0,
            dt: 0.5,
            t_burn: DEFAULT_T_BURN,
            max_spins: DEFAULT_MAX_SPINS,
            output: None,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn realizations_for(&self, n_spins: usize) -> usize {
        self.n_realizations.unwrap_or_else(|| default_realizations(n_spins))
    }

    /// The model at one sweep point.
    pub fn build_model(&self, n_sys: usize, n_env: usize, lambda: f64) -> Result<SpinModel> {
        let model = match &self.model {
            ModelSpec::Ring {
                j_system,
                coupling_seed,
                env_seed,
                topology,
            } => build_ring_model_with(n_sys, n_env, *j_system, *coupling_seed, *env_seed, lambda, *topology)?,
            ModelSpec::Chain {
                j_iso,
                omega_iso,
                delta_iso,
            } => build_chain_model(n_sys, n_env, *j_iso, *omega_iso, *delta_iso, lambda)?,
            ModelSpec::Custom {
                system_bonds,
                env_bonds,
                coupling_bonds,
            } => SpinModel::with_spin_cap(
                n_sys,
                n_env,
                system_bonds.clone(),
                env_bonds.clone(),
                coupling_bonds.clone(),
                lambda,
                self.max_spins,
            )?,
        };
        Ok(model.with_coupling_shift(self.coupling_shift))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Parser::default().parse(text)
    }

    /// Text form that [`ExperimentConfig::parse`] reads back to an equal value.
    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let list_f = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let list_u = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let _ = writeln!(o, "mode = {}", self.mode.name());
        match &self.model {
            ModelSpec::Ring {
                j_system,
                coupling_seed,
                env_seed,
                topology,
            } => {
                let _ = writeln!(o, "model = ring");
                let _ = writeln!(o, "j_system = {j_system:?}");
                let _ = writeln!(o, "coupling_seed = {coupling_seed}");
                let _ = writeln!(o, "env_seed = {env_seed}");
                let t = match topology {
                    EnvTopology::Chain => "chain",
                    EnvTopology::FullyConnected => "fully_connected",
                };
                let _ = writeln!(o, "env_topology = {t}");
            }
            ModelSpec::Chain {
                j_iso,
                omega_iso,
                delta_iso,
            } => {
                let _ = writeln!(o, "model = chain");
                let _ = writeln!(o, "j_iso = {j_iso:?}");
                let _ = writeln!(o, "omega_iso = {omega_iso:?}");
                let _ = writeln!(o, "delta_iso = {delta_iso:?}");
            }
            ModelSpec::Custom { .. } => {
                let _ = writeln!(o, "model = custom");
            }
        }
        let _ = writeln!(o, "n_sys_list = {}", list_u(&self.n_sys_list));
        let _ = writeln!(o, "n_env_list = {}", list_u(&self.n_env_list));
        let _ = writeln!(o, "beta_list = {}", list_f(&self.beta_list));
        let _ = writeln!(o, "lambda_list = {}", list_f(&self.lambda_list));
        if let Some(n) = self.n_realizations {
            let _ = writeln!(o, "n_realizations = {n}");
        }
        let _ = writeln!(o, "master_seed = {}", self.master_seed);
        let method = match self.method {
            Method::Chebyshev => "chebyshev",
            Method::Exact => "exact",
        };
        let _ = writeln!(o, "method = {method}");
        let init = match self.initial_state {
            InitialState::X => "x",
            InitialState::Ududy => "ududy",
        };
        let _ = writeln!(o, "initial_state = {init}");
        let est = match self.estimator {
            Estimator::Sample => "sample",
            Estimator::Gibbs => "gibbs",
        };
        let _ = writeln!(o, "estimator = {est}");
        let _ = writeln!(o, "coupling_shift = {:?}", self.coupling_shift);
        let _ = writeln!(o, "t_max = {:?}", self.t_max);
        let _ = writeln!(o, "dt = {:?}", self.dt);
        let _ = writeln!(o, "t_burn = {:?}", self.t_burn);
        let _ = writeln!(o, "max_spins = {}", self.max_spins);
        if let Some(p) = &self.output {
            let _ = writeln!(o, "output = {}", p.display());
        }
        if let ModelSpec::Custom {
            system_bonds,
            env_bonds,
            coupling_bonds,
        } = &self.model
        {
            for (name, bonds) in [
                ("system_bonds", system_bonds),
                ("env_bonds", env_bonds),
                ("coupling_bonds", coupling_bonds),
            ] {
                let _ = writeln!(o, "\n[{name}]");
                for b in bonds {
                    let c = b.coupling;
                    let _ = writeln!(o, "{} {} {:?} {:?} {:?}", b.i + 1, b.j + 1, c.x, c.y, c.z);
                }
            }
        }
        o
    }
}

#[derive(Default)]
struct Parser {
    seen: BTreeSet<String>,
    keys: Vec<(usize, String, String)>,
    tables: [Vec<(usize, Bond)>; 3],
    table_seen: [bool; 3],
}

fn parse_value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(line, format!("`{key}`: cannot parse `{v}`")))
}

fn parse_list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::config(line, format!("`{key}` must not be empty")));
    }
    items.iter().map(|s| parse_value(line, key, s)).collect()
}

const TABLES: [&str; 3] = ["system_bonds", "env_bonds", "coupling_bonds"];

impl Parser {
    fn parse(mut self, text: &str) -> Result<ExperimentConfig> {
        let mut section: Option<usize> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim();
                let t = TABLES
                    .iter()
                    .position(|t| *t == name)
                    .ok_or_else(|| Error::config(line, format!("unknown section [{name}]")))?;
                if self.table_seen[t] {
                    return Err(Error::config(line, format!("duplicate section [{name}]")));
                }
                self.table_seen[t] = true;
                section = Some(t);
                continue;
            }
            if let Some(t) = section {
                self.tables[t].push((line, parse_bond(line, content)?));
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| Error::config(line, format!("expected `key = value`, found `{content}`")))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if !self.seen.insert(k.clone()) {
                return Err(Error::config(line, format!("duplicate key `{k}`")));
            }
            self.keys.push((line, k, v));
        }
        self.build()
    }

    fn build(self) -> Result<ExperimentConfig> {
        let get = |key: &str| self.keys.iter().find(|(_, k, _)| k == key).map(|(l, _, v)| (*l, v.as_str()));
        let (ml, mode) = get("mode").ok_or_else(|| Error::config(0, "missing `mode`"))?;
        let mode: Mode = mode.parse().map_err(|e: String| Error::config(ml, e))?;
        let (kl, kind) = get("model").ok_or_else(|| Error::config(0, "missing `model`"))?;

        let f64_or = |key: &str, default: f64| -> Result<f64> {
            get(key).map_or(Ok(default), |(l, v)| parse_value(l, key, v))
        };
        let u64_or = |key: &str, default: u64| -> Result<u64> {
            get(key).map_or(Ok(default), |(l, v)| parse_value(l, key, v))
        };

        let model_keys: &[&str] = match kind {
            "ring" => &["j_system", "coupling_seed", "env_seed", "env_topology"],
            "chain" => &["j_iso", "omega_iso", "delta_iso"],
            "custom" => &[],
            other => return Err(Error::config(kl, format!("unknown model `{other}`"))),
        };
        const COMMON: &[&str] = &[
            "mode",
            "model",
            "n_sys_list",
            "n_env_list",
            "beta_list",
            "lambda_list",
            "n_realizations",
            "master_seed",
            "seed",
            "method",
            "initial_state",
            "estimator",
            "coupling_shift",
            "t_max",
            "dt",
            "t_burn",
            "max_spins",
            "output",
        ];
        for (l, k, _) in &self.keys {
            if !COMMON.contains(&k.as_str()) && !model_keys.contains(&k.as_str()) {
                return Err(Error::config(*l, format!("unknown key `{k}` for model `{kind}`")));
            }
        }
        if kind != "custom" {
            if let Some(t) = self.table_seen.iter().position(|s| *s) {
                return Err(Error::config(0, format!("[{}] is only valid for custom models", TABLES[t])));
            }
        }

        let model = match kind {
            "ring" => {
                let topology = match get("env_topology") {
                    None | Some((_, "chain")) => EnvTopology::Chain,
                    Some((_, "fully_connected")) => EnvTopology::FullyConnected,
                    Some((l, v)) => return Err(Error::config(l, format!("unknown env_topology `{v}`"))),
                };
                ModelSpec::Ring {
                    j_system: f64_or("j_system", -1.0)?,
                    coupling_seed: u64_or("coupling_seed", 1)?,
                    env_seed: u64_or("env_seed", 2)?,
                    topology,
                }
            }
            "chain" => ModelSpec::Chain {
                j_iso: f64_or("j_iso", 1.0)?,
                omega_iso: f64_or("omega_iso", 1.0)?,
                delta_iso: f64_or("delta_iso", 1.0)?,
            },
            _ => {
                let [s, e, c] = self.tables.clone();
                let strip = |v: Vec<(usize, Bond)>| v.into_iter().map(|(_, b)| b).collect();
                ModelSpec::Custom {
                    system_bonds: strip(s),
                    env_bonds: strip(e),
                    coupling_bonds: strip(c),
                }
            }
        };

        let mut cfg = ExperimentConfig::new(mode, model);
        let list_u = |key: &str| -> Result<Vec<usize>> {
            let (l, v) = get(key).ok_or_else(|| Error::config(0, format!("missing `{key}`")))?;
            parse_list(l, key, v)
        };
        cfg.n_sys_list = list_u("n_sys_list")?;
        cfg.n_env_list = list_u("n_env_list")?;
        if let Some((l, v)) = get("beta_list") {
            cfg.beta_list = parse_list(l, "beta_list", v)?;
            if let Some(b) = cfg.beta_list.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
                return Err(Error::config(l, format!("inverse temperature {b} must be finite and non-negative")));
            }
        }
        if let Some((l, v)) = get("lambda_list") {
            cfg.lambda_list = parse_list(l, "lambda_list", v)?;
        }
        if let Some((l, v)) = get("n_realizations") {
            let n: usize = parse_value(l, "n_realizations", v)?;
            if n == 0 {
                return Err(Error::config(l, "`n_realizations` must be positive"));
            }
            cfg.n_realizations = Some(n);
        }
        cfg.master_seed = match (get("master_seed"), get("seed")) {
            (Some(_), Some((l, _))) => return Err(Error::config(l, "`seed` duplicates `master_seed`")),
            (Some((l, v)), None) | (None, Some((l, v))) => parse_value(l, "master_seed", v)?,
            (None, None) => 0,
        };
        cfg.method = match get("method") {
            None | Some((_, "chebyshev")) => Method::Chebyshev,
            Some((_, "exact")) => Method::Exact,
            Some((l, v)) => return Err(Error::config(l, format!("unknown method `{v}`"))),
        };
        cfg.initial_state = match get("initial_state") {
            None | Some((_, "x")) => InitialState::X,
            Some((_, "ududy")) => InitialState::Ududy,
            Some((l, v)) => return Err(Error::config(l, format!("unknown initial_state `{v}`"))),
        };
        cfg.estimator = match get("estimator") {
            None | Some((_, "sample")) => Estimator::Sample,
            Some((_, "gibbs")) => Estimator::Gibbs,
            Some((l, v)) => return Err(Error::config(l, format!("unknown estimator `{v}`"))),
        };
        cfg.coupling_shift = f64_or("coupling_shift", 0.0)?;
        cfg.t_max = f64_or("t_max", cfg.t_max)?;
        cfg.dt = f64_or("dt", cfg.dt)?;
        cfg.t_burn = f64_or("t_burn", cfg.t_burn)?;
        if let Some((l, v)) = get("max_spins") {
            cfg.max_spins = parse_value(l, "max_spins", v)?;
        }
        if let Some((l, _)) = get("dt").filter(|_| cfg.dt.is_nan() || cfg.dt <= 0.0) {
            return Err(Error::config(l, "`dt` must be positive"));
        }
        if let Some((l, _)) = get("t_max").filter(|_| cfg.t_max.is_nan() || cfg.t_max < 0.0) {
            return Err(Error::config(l, "`t_max` must be non-negative"));
        }
        cfg.output = get("output").map(|(_, v)| PathBuf::from(v));

        for &ns in &cfg.n_sys_list {
            for &ne in &cfg.n_env_list {
                if ns + ne > cfg.max_spins {
                    let (l, _) = get("n_env_list").expect("checked above");
                    return Err(Error::config(
                        l,
                        format!("{} spins exceed the cap of {}", ns + ne, cfg.max_spins),
                    ));
                }
            }
        }
        if let ModelSpec::Custom { .. } = cfg.model {
            if cfg.n_sys_list.len() != 1 || cfg.n_env_list.len() != 1 {
                return Err(Error::config(0, "custom models take exactly one n_sys and one n_env"));
            }
            // surface bond-range errors at parse time
            cfg.build_model(cfg.n_sys_list[0], cfg.n_env_list[0], cfg.lambda_list[0])
                .map_err(|e| Error::config(0, e.to_string()))?;
        }
        Ok(cfg)
    }
}

fn parse_bond(line: usize, content: &str) -> Result<Bond> {
    let f: Vec<&str> = content.split_whitespace().collect();
    if f.len() != 5 {
        return Err(Error::config(line, "bond rows need `i j Jx Jy Jz`"));
    }
    let site = |s: &str| -> Result<usize> {
        let v: usize = parse_value(line, "site", s)?;
        v.checked_sub(1)
            .ok_or_else(|| Error::config(line, "sites are numbered from 1"))
    };
    let num = |s: &str| parse_value::<f64>(line, "coupling", s);
    Ok(Bond::new(
        site(f[0])?,
        site(f[1])?,
        Coupling::new(num(f[2])?, num(f[3])?, num(f[4])?),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const RING: &str = "
        # ring sweep
        mode = static_measure
        model = ring
        j_system = -1
        n_sys_list = 4
        n_env_list = 6, 8
        beta_list = 0.1, 0.9
        lambda_list = 0, 0.5
        n_realizations = 20
        master_seed = 7
    ";

    #[test]
    fn parses_ring_config() {
        let c = ExperimentConfig::parse(RING).unwrap();
        assert_eq!(c.mode, Mode::StaticMeasure);
        assert_eq!(c.n_env_list, vec![6, 8]);
        assert_eq!(c.lambda_list, vec![0.0, 0.5]);
        assert_eq!(c.n_realizations, Some(20));
        assert_eq!(c.master_seed, 7);
        assert!(matches!(c.model, ModelSpec::Ring { j_system, .. } if j_system == -1.0));
    }

    #[test]
    fn empty_lambda_list_is_an_error() {
        let text = RING.replace("lambda_list = 0, 0.5", "lambda_list =");
        match ExperimentConfig::parse(&text) {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 9);
                assert!(message.contains("lambda_list"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let bad = RING.replace("master_seed = 7", "master_seed = seven");
        assert!(matches!(ExperimentConfig::parse(&bad), Err(Error::Config { line: 11, .. })));
        let unknown = format!("{RING}\nfoo = 1\n");
        assert!(matches!(ExperimentConfig::parse(&unknown), Err(Error::Config { .. })));
        let dup = format!("{RING}\nmode = time_trace\n");
        assert!(ExperimentConfig::parse(&dup).is_err());
        let big = RING.replace("n_env_list = 6, 8", "n_env_list = 30");
        assert!(ExperimentConfig::parse(&big).is_err());
    }

    #[test]
    fn custom_model_round_trip() {
        let text = "
            mode = symmetry_check
            model = custom
            n_sys_list = 2
            n_env_list = 2
            beta_list = 0.5
            [system_bonds]
            1 2 1 1 1
            [env_bonds]
            1 2 0.5 -0.25 1
            [coupling_bonds]
            2 1 0.3 0.3 0.3
        ";
        let c = ExperimentConfig::parse(text).unwrap();
        let m = c.build_model(2, 2, 1.0).unwrap();
        assert_eq!(m.coupling_bonds()[0].i, 1);
        assert_eq!(m.coupling_bonds()[0].j, 0);
        let again = ExperimentConfig::parse(&c.to_text()).unwrap();
        assert_eq!(again, c);
        let bad = text.replace("2 1 0.3", "3 1 0.3");
        assert!(ExperimentConfig::parse(&bad).is_err());
    }

    #[test]
    fn ring_and_chain_round_trip() {
        let c = ExperimentConfig::parse(RING).unwrap();
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
        let mut chain = ExperimentConfig::new(Mode::TheoryOverlay, ModelSpec::Chain { j_iso: 1.0, omega_iso: 1.0, delta_iso: 0.1 });
        chain.n_sys_list = vec![4];
        chain.n_env_list = vec![8];
        chain.beta_list = vec![0.1, 1.0 / 3.0];
        assert_eq!(ExperimentConfig::parse(&chain.to_text()).unwrap(), chain);
    }

    #[test]
    fn model_spec_from_model_rebuilds_identically() {
        let m = crate::hamiltonian::build_ring_model(2, 3, -1.0, 4, 5, 0.7).unwrap();
        let mut c = ExperimentConfig::new(Mode::StaticMeasure, ModelSpec::from_model(&m));
        c.n_sys_list = vec![2];
        c.n_env_list = vec![3];
        let parsed = ExperimentConfig::parse(&c.to_text()).unwrap();
        assert_eq!(parsed.build_model(2, 3, 0.7).unwrap(), m);
    }

    #[test]
    fn default_realization_counts() {
        assert_eq!(default_realizations(12), 1000);
        assert_eq!(default_realizations(16), 10);
        assert_eq!(default_realizations(26), 1);
    }
}
