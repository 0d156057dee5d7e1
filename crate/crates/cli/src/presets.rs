//! Named experiment presets with pinned seeds.
//!
//! Names look like `m2010-corrupt-l1-rila-b8` or `s2018-clean-em`. Data seeds
//! depend only on the model and the corruption flag, so presets that differ
//! only in trainer or objective see the same sequences.

use rila::gen::Benchmark;
use rila::optim::DEFAULT_LAMBDA;
use rila::{Error, Result};

use crate::settings::{Settings, TrainerKind};

pub const CORRUPT_GAMMA: f64 = 1.0 / 3.0;
pub const CORRUPT_SYMBOL: u32 = 4;
pub const FILTER_COUNT: usize = 10;
pub const TRAIN_SEED: u64 = 7;
pub const HMM88_EM_STATES: usize = 8;

fn data_seed(b: Benchmark) -> u64 {
    match b {
        Benchmark::M2010 => 101,
        Benchmark::S2018 => 202,
        Benchmark::Hmm88 => 303,
    }
}

fn model_key(s: &str) -> Option<Benchmark> {
    match s {
        "m2010" => Some(Benchmark::M2010),
        "s2018" => Some(Benchmark::S2018),
        "hmm88" => Some(Benchmark::Hmm88),
        _ => None,
    }
}

/// Every valid preset name.
pub fn all_names() -> Vec<String> {
    let mut out = Vec::new();
    for model in ["m2010", "s2018", "hmm88"] {
        for data in ["clean", "corrupt"] {
            for l1 in ["", "-l1"] {
                for trainer in ["ila", "rila"] {
                    for b in [4, 8] {
                        out.push(format!("{model}-{data}{l1}-{trainer}-b{b}"));
                    }
                }
            }
            out.push(format!("{model}-{data}-em"));
        }
    }
    out
}

/// Settings for a preset. The output directory is left at its default.
pub fn preset(name: &str) -> Result<Settings> {
    let unknown = || Error::Config(format!("unknown preset {name:?}; run `rila preset --list`"));
    let parts: Vec<&str> = name.split('-').collect();
    if parts.len() < 3 {
        return Err(unknown());
    }
    let bench = model_key(parts[0]).ok_or_else(unknown)?;
    let corrupted = match parts[1] {
        "clean" => false,
        "corrupt" => true,
        _ => return Err(unknown()),
    };
    let mut s = Settings {
        model: bench.name().to_string(),
        seed: data_seed(bench) + u64::from(corrupted),
        train_seed: Some(TRAIN_SEED),
        gamma: if corrupted { CORRUPT_GAMMA } else { 0.0 },
        corrupt_symbol: CORRUPT_SYMBOL,
        ..Settings::default()
    };
    let rest = &parts[2..];
    if rest == ["em"] {
        s.trainer = TrainerKind::Em;
        if bench == Benchmark::Hmm88 {
            s.states = Some(HMM88_EM_STATES);
        }
        return Ok(s);
    }
    let (l1, rest) = match rest {
        ["l1", tail @ ..] => (true, tail),
        tail => (false, tail),
    };
    let [trainer, batches] = rest else {
        return Err(unknown());
    };
    s.use_l1 = l1;
    s.lambda = DEFAULT_LAMBDA;
    s.train.batches = match *batches {
        "b4" => 4,
        "b8" => 8,
        _ => return Err(unknown()),
    };
    match *trainer {
        "rila" => {
            s.trainer = TrainerKind::Rila;
            s.train.filter_count = if corrupted { FILTER_COUNT } else { 0 };
        }
        // Same optimizer budget as the matching RILA preset.
        "ila" => {
            s.trainer = TrainerKind::Ila;
            s.train = s.train.ila_matched();
        }
        _ => return Err(unknown()),
    }
    Ok(s)
}
