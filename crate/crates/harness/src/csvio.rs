//! CSV emission and parsing with a fixed schema. Output is written
//! atomically (temp file in the target directory, then rename) so a killed
//! run never leaves a partial file at the destination.

use crate::error::HarnessError;
use std::fs;
use std::io::Write;
use std::path::Path;

/// The exact header row.
pub const HEADER: &str = "experiment,variant,T,seed,t,loss,grad_fro,grad_nuc,est_err,state_elems,wall_ms";

/// One emitted row: either a recorded step or the terminal marker of a
/// diverged run.
#[derive(Debug, Clone, PartialEq)]
pub enum CsvRow {
    Step {
        experiment: String,
        variant: String,
        horizon: usize,
        seed: u64,
        t: usize,
        loss: f64,
        grad_fro: f64,
        grad_nuc: f64,
        est_err: f64,
        state_elems: usize,
        wall_ms: f64,
    },
    Diverged {
        experiment: String,
        variant: String,
        horizon: usize,
        seed: u64,
        t: usize,
    },
}

impl CsvRow {
    fn write_line(&self, out: &mut String) {
        match self {
            CsvRow::Step {
                experiment,
                variant,
                horizon,
                seed,
                t,
                loss,
                grad_fro,
                grad_nuc,
                est_err,
                state_elems,
                wall_ms,
            } => {
                out.push_str(&format!(
                    "{experiment},{variant},{horizon},{seed},{t},{loss},{grad_fro},{grad_nuc},{est_err},{state_elems},{wall_ms}\n"
                ));
            }
            CsvRow::Diverged {
                experiment,
                variant,
                horizon,
                seed,
                t,
            } => {
                out.push_str(&format!("{experiment},{variant},{horizon},{seed},{t},diverged,,,,,\n"));
            }
        }
    }
}

/// Writes header + rows atomically.
pub fn write_csv_atomic(path: &Path, rows: &[CsvRow]) -> Result<(), HarnessError> {
    let mut contents = String::with_capacity(64 * (rows.len() + 1));
    contents.push_str(HEADER);
    contents.push('\n');
    for row in rows {
        row.write_line(&mut contents);
    }

    let io_err = |source: std::io::Error| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    {
        let mut file = fs::File::create(&tmp).map_err(io_err)?;
        file.write_all(contents.as_bytes()).map_err(io_err)?;
        file.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}

/// A parsed step row (markers are reported separately).
#[derive(Debug, Clone)]
pub struct ParsedStep {
    pub horizon: usize,
    pub seed: u64,
    pub t: usize,
    pub grad_nuc: f64,
}

#[derive(Debug, Default)]
pub struct ParsedCsv {
    pub steps: Vec<ParsedStep>,
    pub diverged_runs: usize,
}

/// Reads a result file back, validating the header.
pub fn read_csv(path: &Path) -> Result<ParsedCsv, HarnessError> {
    let io_err = |source: std::io::Error| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let text = fs::read_to_string(path).map_err(io_err)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == HEADER => {}
        other => {
            return Err(HarnessError::Config(format!(
                "{}: unexpected header {:?}",
                path.display(),
                other
            )))
        }
    }

    let mut parsed = ParsedCsv::default();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(HarnessError::Config(format!(
                "{}:{}: expected 11 fields, got {}",
                path.display(),
                lineno + 2,
                fields.len()
            )));
        }
        if fields[5] == "diverged" {
            parsed.diverged_runs += 1;
            continue;
        }
        let bad = |what: &str| {
            HarnessError::Config(format!("{}:{}: bad {what}", path.display(), lineno + 2))
        };
        parsed.steps.push(ParsedStep {
            horizon: fields[2].parse().map_err(|_| bad("T"))?,
            seed: fields[3].parse().map_err(|_| bad("seed"))?,
            t: fields[4].parse().map_err(|_| bad("t"))?,
            grad_nuc: fields[7].parse().map_err(|_| bad("grad_nuc"))?,
        });
    }
    Ok(parsed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let rows = vec![
            CsvRow::Step {
                experiment: "e".into(),
                variant: "limuon1".into(),
                horizon: 10,
                seed: 3,
                t: 0,
                loss: 1.25,
                grad_fro: 0.5,
                grad_nuc: 0.75,
                est_err: 0.0,
                state_elems: 12,
                wall_ms: 0.0,
            },
            CsvRow::Diverged {
                experiment: "e".into(),
                variant: "limuon1".into(),
                horizon: 10,
                seed: 4,
                t: 7,
            },
        ];
        write_csv_atomic(&path, &rows).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(HEADER));
        assert!(text.contains("e,limuon1,10,3,0,1.25,0.5,0.75,0,12,0"));
        assert!(text.contains("e,limuon1,10,4,7,diverged,,,,,"));

        let parsed = read_csv(&path).unwrap();
        assert_eq!(parsed.steps.len(), 1);
        assert_eq!(parsed.diverged_runs, 1);
        assert_eq!(parsed.steps[0].grad_nuc, 0.75);
    }

    #[test]
    fn no_leftover_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_csv_atomic(&path, &[]).unwrap();
        let entries: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(entries, vec![std::ffi::OsString::from("out.csv")]);
    }

    #[test]
    fn header_validated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "nope\n").unwrap();
        assert!(read_csv(&path).is_err());
    }
}
