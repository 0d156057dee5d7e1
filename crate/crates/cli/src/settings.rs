//! Run settings: defaults, overridden by a TOML config file with flat dotted
//! keys, overridden in turn by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rila::filter::FilterOptions;
use rila::learn::{EmConfig, ResampleScheme, TrainConfig};
use rila::optim::{ObjectiveKind, SolverKind, DEFAULT_LAMBDA};
use rila::{Error, Result};
use toml::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainerKind {
    Ila,
    Rila,
    Em,
}

impl TrainerKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ila" => Ok(Self::Ila),
            "rila" => Ok(Self::Rila),
            "em" => Ok(Self::Em),
            _ => Err(Error::Config(format!("unknown trainer {s:?} (ila, rila, em)"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Settings {
    pub model: String,
    pub n_train: usize,
    pub n_val: usize,
    pub t: usize,
    pub seed: u64,
    /// Seed for the training run; falls back to `seed`.
    pub train_seed: Option<u64>,
    pub gamma: f64,
    pub corrupt_symbol: u32,
    pub trainer: TrainerKind,
    pub states: Option<usize>,
    pub symbols: Option<usize>,
    pub copies: usize,
    pub use_l1: bool,
    pub lambda: f64,
    pub train: TrainConfig,
    pub em_restarts: usize,
    pub out: PathBuf,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            model: "m2010_24".into(),
            n_train: 30,
            n_val: 5,
            t: 100,
            seed: 0,
            train_seed: None,
            gamma: 0.0,
            corrupt_symbol: 4,
            trainer: TrainerKind::Rila,
            states: None,
            symbols: None,
            copies: 1,
            use_l1: false,
            lambda: DEFAULT_LAMBDA,
            train: TrainConfig::default(),
            em_restarts: EmConfig::default().restarts,
            out: PathBuf::from("out"),
        }
    }
}

/// Flattens nested tables so `[train]\nbatches = 4` and `"train.batches" = 4`
/// mean the same thing.
fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

fn bad(key: &str, want: &str) -> Error {
    Error::Config(format!("config key {key:?} must be {want}"))
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    v.as_integer()
        .and_then(|i| usize::try_from(i).ok())
        .ok_or_else(|| bad(key, "a non-negative integer"))
}

fn as_u64(key: &str, v: &Value) -> Result<u64> {
    v.as_integer()
        .and_then(|i| u64::try_from(i).ok())
        .ok_or_else(|| bad(key, "a non-negative integer"))
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(bad(key, "a number")),
    }
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    v.as_bool().ok_or_else(|| bad(key, "true or false"))
}

fn as_str<'v>(key: &str, v: &'v Value) -> Result<&'v str> {
    v.as_str().ok_or_else(|| bad(key, "a string"))
}

pub fn parse_objective(s: &str) -> Result<bool> {
    match s {
        "regular" => Ok(false),
        "l1" => Ok(true),
        _ => Err(Error::Config(format!("unknown objective {s:?} (regular, l1)"))),
    }
}

pub fn parse_solver(s: &str) -> Result<SolverKind> {
    match s {
        "pattern" => Ok(SolverKind::PatternSearch),
        "fd" => Ok(SolverKind::FdLocal),
        _ => Err(Error::Config(format!("unknown solver {s:?} (pattern, fd)"))),
    }
}

pub fn parse_resample(s: &str) -> Result<ResampleScheme> {
    match s {
        "softmax" => Ok(ResampleScheme::Softmax),
        "literal" => Ok(ResampleScheme::Literal),
        _ => Err(Error::Config(format!("unknown resampling scheme {s:?} (softmax, literal)"))),
    }
}

impl Settings {
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("{}: {e}", path.display())))?;
        self.apply_table(&table)
    }

    pub fn apply_table(&mut self, table: &toml::Table) -> Result<()> {
        let mut flat = BTreeMap::new();
        flatten("", table, &mut flat);
        for (key, v) in &flat {
            let k = key.as_str();
            match k {
                "model" => self.model = as_str(k, v)?.to_string(),
                "n" => self.n_train = as_usize(k, v)?,
                "n_val" => self.n_val = as_usize(k, v)?,
                "t" => self.t = as_usize(k, v)?,
                "seed" => self.seed = as_u64(k, v)?,
                "out" => self.out = PathBuf::from(as_str(k, v)?),
                "corrupt.gamma" => self.gamma = as_f64(k, v)?,
                "corrupt.symbol" => self.corrupt_symbol = as_usize(k, v)? as u32,
                "trainer" => self.trainer = TrainerKind::parse(as_str(k, v)?)?,
                "learner.states" => self.states = Some(as_usize(k, v)?),
                "learner.symbols" => self.symbols = Some(as_usize(k, v)?),
                "learner.copies" => self.copies = as_usize(k, v)?,
                "objective" => self.use_l1 = parse_objective(as_str(k, v)?)?,
                "lambda" => self.lambda = as_f64(k, v)?,
                "train.seed" => self.train_seed = Some(as_u64(k, v)?),
                "train.batch_size" => self.train.batch_size = as_usize(k, v)?,
                "train.batches" => self.train.batches = as_usize(k, v)?,
                "train.iterations" => self.train.iterations = as_usize(k, v)?,
                "train.proposals" => self.train.proposals = as_usize(k, v)?,
                "train.filter_count" => self.train.filter_count = as_usize(k, v)?,
                "train.chain_proposals" => self.train.chain_proposals = as_bool(k, v)?,
                "train.resample" => self.train.resample = parse_resample(as_str(k, v)?)?,
                "filter.keep_high_s" => self.train.filter = FilterOptions { keep_high_s: as_bool(k, v)? },
                "solver.kind" => self.train.solver.kind = parse_solver(as_str(k, v)?)?,
                "solver.max_evals" => self.train.solver.max_evals = as_usize(k, v)?,
                "solver.mesh_start" => self.train.solver.mesh_start = as_f64(k, v)?,
                "solver.mesh_tol" => self.train.solver.mesh_tol = as_f64(k, v)?,
                "solver.fd_step" => self.train.solver.fd_step = as_f64(k, v)?,
                "solver.grad_tol" => self.train.solver.grad_tol = as_f64(k, v)?,
                "em.restarts" => self.em_restarts = as_usize(k, v)?,
                _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
            }
        }
        Ok(())
    }

    /// Training configuration with the objective and seed resolved.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            objective: if self.use_l1 {
                ObjectiveKind::L1 { lambda: self.lambda }
            } else {
                ObjectiveKind::Regular
            },
            seed: self.train_seed.unwrap_or(self.seed),
            ..self.train
        }
    }

    pub fn em_config(&self) -> EmConfig {
        EmConfig {
            restarts: self.em_restarts,
            seed: self.train_seed.unwrap_or(self.seed),
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_and_nested_keys_agree() {
        let a: toml::Table = "\"train.batches\" = 8\nlambda = 0.5\n".parse().unwrap();
        let b: toml::Table = "lambda = 0.5\n[train]\nbatches = 8\n".parse().unwrap();
        let (mut sa, mut sb) = (Settings::default(), Settings::default());
        sa.apply_table(&a).unwrap();
        sb.apply_table(&b).unwrap();
        assert_eq!(sa.train.batches, 8);
        assert_eq!(sa.train, sb.train);
        assert_eq!(sa.lambda, sb.lambda);
    }

    #[test]
    fn model_name_and_learner_table_coexist() {
        let t: toml::Table = "model = \"s2018_26\"\n[learner]\nstates = 3\ncopies = 2\n".parse().unwrap();
        let mut s = Settings::default();
        s.apply_table(&t).unwrap();
        assert_eq!((s.model.as_str(), s.states, s.copies), ("s2018_26", Some(3), 2));
    }

    #[test]
    fn rejects_unknown_and_mistyped_keys() {
        let mut s = Settings::default();
        let t: toml::Table = "bogus = 1".parse().unwrap();
        assert!(matches!(s.apply_table(&t), Err(Error::Config(_))));
        let t: toml::Table = "train.batches = \"four\"".parse().unwrap();
        assert!(matches!(s.apply_table(&t), Err(Error::Config(_))));
        let t: toml::Table = "solver.kind = \"newton\"".parse().unwrap();
        assert!(matches!(s.apply_table(&t), Err(Error::Config(_))));
    }

    #[test]
    fn objective_resolution() {
        let mut s = Settings::default();
        assert_eq!(s.train_config().objective, ObjectiveKind::Regular);
        s.use_l1 = true;
        assert_eq!(s.train_config().objective, ObjectiveKind::L1 { lambda: DEFAULT_LAMBDA });
    }
}
