//! Load-displacement curve as CSV, one row per load step.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::driver::StepRecord;
use crate::error::{Error, Result};

pub const CURVE_HEADER: &str = "step,u_star_mm,reaction_N,max_D,eroded_count,newton_iters,jacobi_sweeps,wall_s";

fn format_row(r: &StepRecord) -> String {
    format!(
        "{},{:.16e},{:.16e},{:.16e},{},{},{},{:.16e}",
        r.step, r.u_star, r.reaction, r.max_damage, r.eroded_count, r.newton_iterations, r.jacobi_sweeps, r.wall_time
    )
}

/// Row-by-row writer, flushed after every row.
pub struct CurveWriter<W: Write> {
    out: W,
}

impl CurveWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        CurveWriter::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> CurveWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{CURVE_HEADER}")?;
        out.flush()?;
        Ok(CurveWriter { out })
    }

    pub fn push(&mut self, record: &StepRecord) -> Result<()> {
        writeln!(self.out, "{}", format_row(record))?;
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn write_curve(path: &Path, records: &[StepRecord]) -> Result<()> {
    let mut w = CurveWriter::create(path)?;
    for r in records {
        w.push(r)?;
    }
    Ok(())
}

fn bad_row(line: usize, reason: impl Into<String>) -> Error {
    Error::Config {
        path: format!("csv line {line}"),
        reason: reason.into(),
    }
}

pub fn read_curve(path: &Path) -> Result<Vec<StepRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().transpose()?;
    if header.as_deref() != Some(CURVE_HEADER) {
        return Err(bad_row(1, "missing header"));
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        let n = k + 2;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(bad_row(n, format!("expected 8 columns, got {}", cols.len())));
        }
        let int = |i: usize| cols[i].parse::<usize>().map_err(|e| bad_row(n, e.to_string()));
        let float = |i: usize| cols[i].parse::<f64>().map_err(|e| bad_row(n, e.to_string()));
        out.push(StepRecord {
            step: int(0)?,
            u_star: float(1)?,
            reaction: float(2)?,
            max_damage: float(3)?,
            eroded_count: int(4)?,
            newton_iterations: int(5)?,
            jacobi_sweeps: int(6)?,
            wall_time: float(7)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(step: usize, u: f64, f: f64) -> StepRecord {
        StepRecord {
            step,
            u_star: u,
            reaction: f,
            max_damage: 0.25,
            eroded_count: 3,
            newton_iterations: 4,
            jacobi_sweeps: 17,
            wall_time: 0.125,
        }
    }

    #[test]
    fn header_and_row_layout() {
        let mut w = CurveWriter::new(Vec::new()).unwrap();
        w.push(&record(1, 0.025, -1.5)).unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CURVE_HEADER));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "1");
        assert_eq!(row[4], "3");
        assert_eq!(row[1].parse::<f64>().unwrap(), 0.025);
        assert_eq!(row[2].parse::<f64>().unwrap(), -1.5);
    }

    proptest! {
        #[test]
        fn values_survive_bitwise(u in -1e6f64..1e6, f in prop::num::f64::NORMAL, d in 0.0f64..1.0) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("curve.csv");
            let mut r = record(7, u, f);
            r.max_damage = d;
            write_curve(&path, &[r.clone(), record(8, 1.0 / 3.0, 1e-300)]).unwrap();
            let back = read_curve(&path).unwrap();
            prop_assert_eq!(back[0].u_star.to_bits(), u.to_bits());
            prop_assert_eq!(back[0].reaction.to_bits(), f.to_bits());
            prop_assert_eq!(back[0].max_damage.to_bits(), d.to_bits());
            prop_assert_eq!(&back[0], &r);
            prop_assert_eq!(back[1].u_star, 1.0 / 3.0);
        }
    }

    #[test]
    fn rejects_malformed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, format!("{CURVE_HEADER}\n1,2,3\n")).unwrap();
        assert!(read_curve(&path).is_err());
        std::fs::write(&path, "a,b\n").unwrap();
        assert!(read_curve(&path).is_err());
    }
}
