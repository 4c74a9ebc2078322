//! File formats: model and schedule JSON, trace CSV, experiment directories.
//!
//! A model file holds the couplings and either an explicit `9 x 9` state
//! (rows of `[re, im]` pairs) or a preset:
//!
//! ```json
//! {"gamma1": 1.0, "gamma2": 2.0, "J12": 0.5, "rho0": {"preset": "thermal", "beta": 0.1}}
//! {"gamma1": 1.0, "gamma2": 2.0, "J12": 0.5, "rho0": {"preset": "random", "seed": 7}}
//! ```
//!
//! An experiment directory pairs `schedule_<k>.json` with `trace_<k>.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlSchedule, MagnetizationTrace};
use crate::error::{Error, Result};
use crate::ident::ExperimentRecord;
use crate::model::{random_density_matrix, thermal_state, Couplings, DensityMatrix, SpinPairModel};

/// Inverse temperature of the thermal preset when none is given.
pub const DEFAULT_THERMAL_BETA: f64 = 0.1;

fn default_beta() -> f64 {
    DEFAULT_THERMAL_BETA
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase", deny_unknown_fields)]
pub enum StatePreset {
    /// `exp(-β H) / Z` for the model's Hamiltonian with unit field along `z`.
    Thermal {
        #[serde(default = "default_beta")]
        beta: f64,
    },
    /// `G G^† / Tr(G G^†)` for a seeded Gaussian `G`; the run's seed when absent.
    Random {
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Preset(StatePreset),
    Matrix(DensityMatrix),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub gamma1: f64,
    pub gamma2: f64,
    #[serde(rename = "J12")]
    pub j12: f64,
    pub rho0: StateSpec,
}

impl ModelFile {
    pub fn couplings(&self) -> Couplings {
        Couplings::new(self.gamma1, self.gamma2, self.j12)
    }

    /// Builds the model; `seed` fills in a random preset without its own seed.
    pub fn resolve(&self, seed: u64) -> Result<SpinPairModel> {
        let c = self.couplings();
        if !c.is_finite() {
            return Err(Error::InvalidState("non-finite couplings".into()));
        }
        let rho0 = match &self.rho0 {
            StateSpec::Matrix(m) => m.clone(),
            StateSpec::Preset(StatePreset::Thermal { beta }) => thermal_state(&c, *beta)?,
            StateSpec::Preset(StatePreset::Random { seed: s }) => random_density_matrix(s.unwrap_or(seed)),
        };
        SpinPairModel::new(c, rho0)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn read_model_file(path: &Path) -> Result<ModelFile> {
    parse_json(path)
}

pub fn load_model(path: &Path, seed: u64) -> Result<SpinPairModel> {
    read_model_file(path)?.resolve(seed)
}

pub fn read_schedule(path: &Path) -> Result<ControlSchedule> {
    parse_json(path)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_schedule(path: &Path, schedule: &ControlSchedule) -> Result<()> {
    write_json(path, schedule)
}

const TRACE_HEADER: [&str; 4] = ["t", "mx", "my", "mz"];

/// CSV with header `t,mx,my,mz` and 17 significant digits per value.
pub fn write_trace_csv(path: &Path, trace: &MagnetizationTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_HEADER)?;
    for i in 0..trace.len() {
        let m = trace.sample(i);
        w.write_record([trace.times[i], m[0], m[1], m[2]].map(|x| format!("{x:.16e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<MagnetizationTrace> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != TRACE_HEADER {
        return Err(Error::Parse(format!(
            "{}: expected header t,mx,my,mz, found {}",
            path.display(),
            header.join(",")
        )));
    }
    let mut cols: [Vec<f64>; 4] = Default::default();
    for (line, row) in r.deserialize::<(f64, f64, f64, f64)>().enumerate() {
        let (t, x, y, z) = row.map_err(|e| Error::Parse(format!("{} row {}: {e}", path.display(), line + 1)))?;
        for (c, v) in cols.iter_mut().zip([t, x, y, z]) {
            c.push(v);
        }
    }
    let [t, x, y, z] = cols;
    MagnetizationTrace::from_columns(t, x, y, z)
}

fn schedule_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("schedule_{k:03}.json"))
}

fn trace_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("trace_{k:03}.csv"))
}

/// Writes `schedule_<k>.json` / `trace_<k>.csv` pairs; returns the paths written.
pub fn write_experiment(dir: &Path, record: &ExperimentRecord) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (k, (s, t)) in record.schedules().iter().zip(record.traces()).enumerate() {
        let (sp, tp) = (schedule_path(dir, k), trace_path(dir, k));
        write_schedule(&sp, s)?;
        write_trace_csv(&tp, t)?;
        written.push(sp);
        written.push(tp);
    }
    Ok(written)
}

/// Reads every `schedule_*.json` in `dir` (sorted by name) with its matching
/// `trace_*.csv`.
pub fn read_experiment(dir: &Path) -> Result<ExperimentRecord> {
    let mut stems: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter_map(|name| {
            name.strip_prefix("schedule_")
                .and_then(|rest| rest.strip_suffix(".json"))
                .map(str::to_string)
        })
        .collect();
    stems.sort();
    if stems.is_empty() {
        return Err(Error::InvalidRecord(format!("{}: no schedule_*.json files", dir.display())));
    }
    let mut schedules = Vec::with_capacity(stems.len());
    let mut traces = Vec::with_capacity(stems.len());
    for stem in &stems {
        let tp = dir.join(format!("trace_{stem}.csv"));
        if !tp.exists() {
            return Err(Error::InvalidRecord(format!("missing {}", tp.display())));
        }
        schedules.push(read_schedule(&dir.join(format!("schedule_{stem}.json")))?);
        traces.push(read_trace_csv(&tp)?);
    }
    ExperimentRecord::new(schedules, traces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{propagate, RandomScheduleSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn model_presets() {
        let thermal: ModelFile =
            serde_json::from_str(r#"{"gamma1": 1, "gamma2": 2, "J12": 0.5, "rho0": {"preset": "thermal"}}"#).unwrap();
        assert_eq!(thermal.rho0, StateSpec::Preset(StatePreset::Thermal { beta: 0.1 }));
        thermal.resolve(0).unwrap();
        let random: ModelFile =
            serde_json::from_str(r#"{"gamma1": 1, "gamma2": 2, "J12": 0.5, "rho0": {"preset": "random"}}"#).unwrap();
        let a = random.resolve(3).unwrap();
        let b = random.resolve(4).unwrap();
        assert_ne!(a.rho0, b.rho0);
        assert_eq!(a.rho0, random_density_matrix(3));
    }

    #[test]
    fn explicit_state_is_validated() {
        let mut rows = vec![vec![[0.0, 0.0]; 9]; 9];
        rows[8][8] = [1.0, 0.0];
        let value = serde_json::json!({"gamma1": 1, "gamma2": 2, "J12": 0.5, "rho0": rows});
        let m: ModelFile = serde_json::from_value(value).unwrap();
        assert_eq!(m.resolve(0).unwrap().rho0, DensityMatrix::basis_state(8));
        rows[8][8] = [2.0, 0.0];
        let bad = serde_json::json!({"gamma1": 1, "gamma2": 2, "J12": 0.5, "rho0": rows});
        assert!(serde_json::from_value::<ModelFile>(bad).is_err());
    }

    #[test]
    fn malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        fs::write(&p, "{not json").unwrap();
        assert!(matches!(load_model(&p, 0), Err(Error::Parse(_))));
        assert!(matches!(load_model(&dir.path().join("missing.json"), 0), Err(Error::Io(_))));
        let csv = dir.path().join("t.csv");
        fs::write(&csv, "time,a,b,c\n0,0,0,0\n").unwrap();
        assert!(matches!(read_trace_csv(&csv), Err(Error::Parse(_))));
    }

    #[test]
    fn trace_csv_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let m = SpinPairModel::new(Couplings::new(1.0, 2.0, 0.5), random_density_matrix(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = ControlSchedule::random(RandomScheduleSpec::default(), &mut rng);
        let (trace, _) = propagate(&m, &s, 16).unwrap();
        let p = dir.path().join("trace.csv");
        write_trace_csv(&p, &trace).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("t,mx,my,mz\n"));
        assert_eq!(read_trace_csv(&p).unwrap(), trace);
    }

    #[test]
    fn experiment_directory() {
        let dir = tempfile::tempdir().unwrap();
        let c = Couplings::new(1.0, 2.0, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let schedules = (0..3).map(|_| ControlSchedule::random(RandomScheduleSpec::default(), &mut rng)).collect();
        let rec = ExperimentRecord::simulate(&c, random_density_matrix(7).matrix(), schedules, 16).unwrap();
        let written = write_experiment(dir.path(), &rec).unwrap();
        assert_eq!(written.len(), 6);
        let back = read_experiment(dir.path()).unwrap();
        assert_eq!(back.schedules(), rec.schedules());
        assert_eq!(back.traces(), rec.traces());
        fs::remove_file(dir.path().join("trace_001.csv")).unwrap();
        assert!(matches!(read_experiment(dir.path()), Err(Error::InvalidRecord(_))));
    }
}
