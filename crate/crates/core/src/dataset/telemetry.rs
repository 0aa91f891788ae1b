//! CSV telemetry files: one row per sample, seventeen columns
//! `t,roll,pitch,yaw,x,y,z,wx,wy,wz,vx,vy,vz,u1,u2,u3,u4`. Comment lines
//! starting with `#` may precede the header.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{DataError, Trajectory};
use crate::quadstate::{ControlInput, QuadState};

pub const CSV_HEADER: &str = "t,roll,pitch,yaw,x,y,z,wx,wy,wz,vx,vy,vz,u1,u2,u3,u4";
const COLUMNS: usize = 17;

/// Loads one trajectory from a telemetry CSV file. Parse failures report the
/// 1-based line number.
pub fn load_csv(path: &Path) -> Result<Trajectory, DataError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut traj = Trajectory::default();
    let mut saw_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if !saw_header {
            if trimmed.starts_with('#') {
                continue;
            }
            if trimmed != CSV_HEADER {
                return Err(DataError::Format {
                    line: lineno,
                    message: format!("expected header `{CSV_HEADER}`, got `{trimmed}`"),
                });
            }
            saw_header = true;
            continue;
        }
        let mut values = [0.0f64; COLUMNS];
        let mut count = 0;
        for (i, field) in trimmed.split(',').enumerate() {
            if i >= COLUMNS {
                count = i + 1;
                break;
            }
            values[i] = field.trim().parse::<f64>().map_err(|e| DataError::Format {
                line: lineno,
                message: format!("column {}: {e}", i + 1),
            })?;
            count = i + 1;
        }
        if count != COLUMNS {
            return Err(DataError::Format {
                line: lineno,
                message: format!("expected {COLUMNS} columns, got {count}"),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Format {
                line: lineno,
                message: "non-finite value".into(),
            });
        }
        if let Some(prev) = traj.t.last() {
            if values[0] <= *prev {
                return Err(DataError::Format {
                    line: lineno,
                    message: format!("time stamps must increase: {} after {}", values[0], prev),
                });
            }
        }
        traj.t.push(values[0]);
        let mut state = [0.0; 12];
        state.copy_from_slice(&values[1..13]);
        traj.states.push(QuadState::from_array(state));
        let mut u = [0.0; 4];
        u.copy_from_slice(&values[13..17]);
        traj.controls.push(ControlInput(u));
    }
    if !saw_header {
        return Err(DataError::Invalid(format!(
            "{}: no header row found",
            path.display()
        )));
    }
    if traj.is_empty() {
        return Err(DataError::Invalid(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    Ok(traj)
}

/// Writes a trajectory as telemetry CSV. Floats use shortest round-trip
/// formatting, so `load_csv(save_csv(x)) == x` bit for bit.
pub fn save_csv(path: &Path, traj: &Trajectory) -> Result<(), DataError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{CSV_HEADER}")?;
    for i in 0..traj.len() {
        let s = traj.states[i].to_array();
        let u = traj.controls[i].0;
        write!(w, "{}", traj.t[i])?;
        for v in s.iter().chain(u.iter()) {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_traj() -> Trajectory {
        let mut traj = Trajectory::default();
        for k in 0..5 {
            traj.t.push(k as f64 * 0.01 + 0.1234567890123);
            let mut s = [0.0; 12];
            for (i, slot) in s.iter_mut().enumerate() {
                *slot = (k * 12 + i) as f64 * 0.37 - 2.0;
            }
            traj.states.push(QuadState::from_array(s));
            traj.controls
                .push(ControlInput([0.1 * k as f64, 0.2, 0.3, 1.0 / 3.0]));
        }
        traj
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flight.csv");
        let traj = sample_traj();
        save_csv(&path, &traj).unwrap();
        let loaded = load_csv(&path).unwrap();
        assert_eq!(traj.t, loaded.t);
        for (a, b) in traj.states.iter().zip(&loaded.states) {
            assert_eq!(a.to_array(), b.to_array());
        }
        for (a, b) in traj.controls.iter().zip(&loaded.controls) {
            assert_eq!(a.0, b.0);
        }
    }

    #[test]
    fn comments_before_header_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flight.csv");
        let body = format!(
            "# recorded 2026-01-01\n# rig 3\n{CSV_HEADER}\n0.0{}\n",
            ",1".repeat(16)
        );
        std::fs::write(&path, body).unwrap();
        let traj = load_csv(&path).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.states[0].to_array(), [1.0; 12]);
    }

    #[test]
    fn bad_float_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flight.csv");
        let body = format!(
            "{CSV_HEADER}\n0.0{}\n0.01,oops{}\n",
            ",1".repeat(16),
            ",1".repeat(15)
        );
        std::fs::write(&path, body).unwrap();
        match load_csv(&path) {
            Err(DataError::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_column_count_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flight.csv");
        let body = format!("{CSV_HEADER}\n0.0,1,2\n");
        std::fs::write(&path, body).unwrap();
        match load_csv(&path) {
            Err(DataError::Format { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("columns"), "{message}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flight.csv");
        std::fs::write(&path, "time,roll\n").unwrap();
        match load_csv(&path) {
            Err(DataError::Format { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn non_monotonic_time_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flight.csv");
        let row = ",0".repeat(16);
        let body = format!("{CSV_HEADER}\n0.02{row}\n0.01{row}\n");
        std::fs::write(&path, body).unwrap();
        match load_csv(&path) {
            Err(DataError::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected format error, got {other:?}"),
        }
    }
}
