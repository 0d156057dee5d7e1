//! Model files and result bundles on disk.

use std::fs;
use std::path::Path;

use rila::filter::FilterStats;
use rila::gen::{benchmark_by_name, HmmSpec, ModelSpec};
use rila::hqmm::HqmmModel;
use rila::learn::{ResampleTrace, RunRecord};
use rila::{Error, Result};
use serde_json::{json, Value};

/// Resolves a benchmark name or a path to a model JSON file.
pub fn resolve_model(name_or_path: &str) -> Result<ModelSpec> {
    match benchmark_by_name(name_or_path) {
        Ok(m) => Ok(m),
        Err(_) if Path::new(name_or_path).exists() => load_model(Path::new(name_or_path)),
        Err(e) => Err(e),
    }
}

/// Loads either an HQMM document (has `kraus`) or a classical HMM (has `a`).
pub fn load_model(path: &Path) -> Result<ModelSpec> {
    let text = fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text)?;
    if v.get("kraus").is_some() {
        Ok(ModelSpec::Quantum(HqmmModel::from_json(&text)?))
    } else if v.get("a").is_some() {
        let name = v.get("name").and_then(Value::as_str).unwrap_or("hmm").to_string();
        Ok(ModelSpec::Classical { name, hmm: HmmSpec::from_json(&text)? })
    } else {
        Err(Error::Parse(format!("{}: neither an HQMM nor an HMM model", path.display())))
    }
}

pub fn save_model(model: &ModelSpec, path: &Path) -> Result<()> {
    let text = match model {
        ModelSpec::Quantum(q) => q.to_json(),
        ModelSpec::Classical { hmm, .. } => hmm.to_json(),
    };
    fs::write(path, text)?;
    Ok(())
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

/// Writes the result bundle for one training run into `dir`.
pub fn write_bundle(
    dir: &Path,
    rec: &RunRecord,
    rho0: &rila::hqmm::DensityMatrix,
    filter: Option<&FilterStats>,
    trace: Option<&ResampleTrace>,
    extra: Value,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("iterations.csv"), rec.iterations_csv())?;
    let mut summary = rec.summary();
    if let (Value::Object(s), Value::Object(e)) = (&mut summary, extra) {
        s.extend(e);
    }
    fs::write(dir.join("summary.json"), pretty(&summary))?;
    fs::write(
        dir.join("timing.json"),
        pretty(&json!({ "wall_time_secs": rec.wall_time.as_secs_f64() })),
    )?;
    let model = HqmmModel {
        name: format!("{}_best", rec.trainer.name()),
        kraus: rec.kappa_best.clone(),
        rho0: rho0.clone(),
    };
    model.save(dir.join("model.json"))?;
    if let Some(f) = filter {
        fs::write(dir.join("filter_report.csv"), f.to_csv())?;
    }
    if let Some(t) = trace {
        fs::write(dir.join("resample.csv"), t.to_csv())?;
    }
    if let Some(h) = &rec.hmm {
        fs::write(dir.join("hmm.json"), h.to_json())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rila::gen::{benchmark, Benchmark};

    #[test]
    fn model_files_round_trip_both_kinds() {
        let dir = std::env::temp_dir().join(format!("rila-bundle-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        for b in Benchmark::ALL {
            let m = benchmark(b);
            let p = dir.join(format!("{}.json", b.name()));
            save_model(&m, &p).unwrap();
            let back = load_model(&p).unwrap();
            assert_eq!(back.n(), m.n());
            assert_eq!(back.m(), m.m());
            assert_eq!(back.quantum().is_some(), m.quantum().is_some());
        }
        fs::write(dir.join("junk.json"), "{\"x\": 1}").unwrap();
        assert!(matches!(load_model(&dir.join("junk.json")), Err(Error::Parse(_))));
        fs::remove_dir_all(&dir).unwrap();
    }
}
