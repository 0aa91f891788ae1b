//! Dataset assembly for experiments: load or synthesize trajectories,
//! resample file-based telemetry to the configured rate, split at trajectory
//! level, fit normalization on the training side, and enumerate windows.

use std::path::{Path, PathBuf};

use e2e_tcn::dataset::{
    load_csv, make_windows, resample_uniform, split_trajectories, synth_trajectories,
    window_to_example, NormStats, SynthOptions, Trajectory, Window,
};
use e2e_tcn::tcn::TrainExample;

use crate::config::{DataSource, ExperimentConfig};
use crate::error::HarnessError;

#[derive(Debug)]
pub struct PreparedData {
    /// Uniform-rate trajectories in raw physical units.
    pub trajectories: Vec<Trajectory>,
    pub train_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    /// Fitted on the training trajectories only.
    pub norm: NormStats,
    pub train_windows: Vec<Window>,
    pub test_windows: Vec<Window>,
}

/// Expands a `files` pattern: either a literal path or a single-directory
/// glob whose file name may contain `*` wildcards.
pub fn expand_glob(pattern: &str) -> Result<Vec<PathBuf>, HarnessError> {
    let path = Path::new(pattern);
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| HarnessError::Config(format!("bad file pattern `{pattern}`")))?;
    if !name.contains('*') {
        return Ok(vec![path.to_path_buf()]);
    }
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let parts: Vec<&str> = name.split('*').collect();
    let matches_pattern = |candidate: &str| -> bool {
        let mut rest = candidate;
        for (i, part) in parts.iter().enumerate() {
            if i == 0 {
                match rest.strip_prefix(part) {
                    Some(r) => rest = r,
                    None => return false,
                }
            } else if i == parts.len() - 1 {
                return rest.ends_with(part) && rest.len() >= part.len();
            } else if let Some(pos) = rest.find(part) {
                rest = &rest[pos + part.len()..];
            } else {
                return false;
            }
        }
        rest.is_empty()
    };
    let mut out: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok())
        .map(|entry| entry.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(matches_pattern)
                .unwrap_or(false)
        })
        .collect();
    out.sort();
    Ok(out)
}

pub fn load_trajectories(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Trajectory>, HarnessError> {
    match cfg.data.source {
        DataSource::Synthetic => {
            let opts = SynthOptions {
                params: cfg.physics.clone(),
                samples: cfg.data.samples,
                dt: cfg.data.dt,
                ..SynthOptions::default()
            };
            Ok(synth_trajectories(cfg.data.trajectories, &opts, seed)?)
        }
        DataSource::Files => {
            let pattern = cfg.data.files.as_deref().expect("validated");
            let paths = expand_glob(pattern)?;
            if paths.is_empty() {
                return Err(HarnessError::Data(format!(
                    "no telemetry files match `{pattern}`"
                )));
            }
            let mut out = Vec::with_capacity(paths.len());
            for p in &paths {
                let raw = load_csv(p)
                    .map_err(|e| HarnessError::Data(format!("{}: {e}", p.display())))?;
                out.push(resample_uniform(&raw, cfg.data.dt)?);
            }
            Ok(out)
        }
    }
}

pub fn prepare(cfg: &ExperimentConfig, seed: u64) -> Result<PreparedData, HarnessError> {
    let trajectories = load_trajectories(cfg, seed)?;
    let (train_ids, test_ids) = split_trajectories(trajectories.len(), cfg.data.test_fraction, seed)?;
    let train_trajs: Vec<Trajectory> = train_ids
        .iter()
        .map(|&i| trajectories[i].clone())
        .collect();
    let norm = NormStats::fit(&train_trajs)?;

    let windows_of = |ids: &[usize]| -> Result<Vec<Window>, HarnessError> {
        let mut out = Vec::new();
        for &id in ids {
            let per_traj = make_windows(
                std::slice::from_ref(&trajectories[id]),
                cfg.data.past,
                cfg.data.future,
                cfg.data.stride,
            )?;
            out.extend(per_traj.into_iter().map(|w| Window { traj_id: id, ..w }));
        }
        Ok(out)
    };
    let train_windows = windows_of(&train_ids)?;
    let test_windows = windows_of(&test_ids)?;
    if train_windows.is_empty() || test_windows.is_empty() {
        return Err(HarnessError::Data(format!(
            "not enough data for {}+{} step windows: {} train, {} test",
            cfg.data.past,
            cfg.data.future,
            train_windows.len(),
            test_windows.len()
        )));
    }
    Ok(PreparedData {
        trajectories,
        train_ids,
        test_ids,
        norm,
        train_windows,
        test_windows,
    })
}

impl PreparedData {
    /// Training examples for the end-to-end network: normalized inputs and
    /// normalized labels.
    pub fn e2e_examples(
        &self,
        windows: &[Window],
        past: usize,
        future: usize,
    ) -> Result<Vec<TrainExample>, HarnessError> {
        let mut normalized: Vec<Option<Trajectory>> = vec![None; self.trajectories.len()];
        let mut out = Vec::with_capacity(windows.len());
        for w in windows {
            let traj = normalized[w.traj_id]
                .get_or_insert_with(|| self.norm.normalize_trajectory(&self.trajectories[w.traj_id]));
            out.push(window_to_example(traj, w, past, future)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    fn small_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.data.trajectories = 4;
        cfg.data.samples = 120;
        cfg.data.past = 10;
        cfg.data.future = 10;
        cfg.data.stride = 5;
        cfg
    }

    #[test]
    fn prepare_splits_and_windows() {
        let cfg = small_cfg();
        let data = prepare(&cfg, 3).unwrap();
        assert_eq!(data.trajectories.len(), 4);
        assert_eq!(data.train_ids.len() + data.test_ids.len(), 4);
        assert!(!data.train_windows.is_empty());
        assert!(!data.test_windows.is_empty());
        // Test windows only reference test trajectories.
        for w in &data.test_windows {
            assert!(data.test_ids.contains(&w.traj_id));
        }
        let examples = data
            .e2e_examples(&data.train_windows, cfg.data.past, cfg.data.future)
            .unwrap();
        assert_eq!(examples.len(), data.train_windows.len());
        assert_eq!(examples[0].input.channels(), 16);
        assert_eq!(examples[0].input.steps(), 20);
    }

    #[test]
    fn glob_expansion_matches_wildcards() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["a1.csv", "a2.csv", "b1.csv", "a1.txt"] {
            std::fs::write(dir.path().join(name), "x").unwrap();
        }
        let pattern = format!("{}/a*.csv", dir.path().display());
        let got = expand_glob(&pattern).unwrap();
        let names: Vec<String> = got
            .iter()
            .map(|p| p.file_name().unwrap().to_str().unwrap().to_string())
            .collect();
        assert_eq!(names, vec!["a1.csv", "a2.csv"]);
    }
}
