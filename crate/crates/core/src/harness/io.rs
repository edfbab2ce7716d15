//! CSV files: datasets (label first, then features) and numeric tables.

use std::fs::File;
use std::path::Path;

use crate::data::{Dataset, Label};
use crate::error::{Error, Result};

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

fn parse_field(s: &str, line: usize, column: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("column {}: '{s}' is not a number", column + 1),
    })
}

/// Reads every record; a first record that does not parse as numbers is
/// taken as a header.
fn read_records(path: &Path) -> Result<(Option<Vec<String>>, Vec<(usize, Vec<f64>)>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(csv_error)?;
    let mut header = None;
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(k + 1, |p| p.line() as usize);
        if k == 0 && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            header = Some(rec.iter().map(str::to_string).collect());
            continue;
        }
        let values = rec
            .iter()
            .enumerate()
            .map(|(c, f)| parse_field(f, line, c))
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, values));
    }
    Ok((header, rows))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let (_, rows) = read_records(path.as_ref())?;
    let mut samples = Vec::with_capacity(rows.len());
    let mut labels: Vec<Label> = Vec::with_capacity(rows.len());
    for (line, mut r) in rows {
        if r.len() < 2 {
            return Err(Error::Parse {
                line,
                message: "expected a label and at least one feature".into(),
            });
        }
        let y = r.remove(0);
        labels.push(match y {
            v if v == 1.0 => 1,
            v if v == -1.0 => -1,
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("label must be +1 or -1, got {y}"),
                })
            }
        });
        samples.push(r);
    }
    Dataset::new(samples, labels)
}

pub fn write_dataset(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let header: Vec<String> = std::iter::once("label".to_string())
        .chain((0..data.dim()).map(|j| format!("x{j}")))
        .collect();
    let rows: Vec<Vec<f64>> = data
        .samples()
        .iter()
        .zip(data.labels())
        .map(|(x, &y)| std::iter::once(f64::from(y)).chain(x.iter().copied()).collect())
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(path, &header, &rows)
}

/// Floats are written in shortest round-trip form.
pub fn write_table(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(header).map_err(csv_error)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string())).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let (header, rows) = read_records(path.as_ref())?;
    Ok((header.unwrap_or_default(), rows.into_iter().map(|(_, r)| r).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synth::{generate, SyntheticSpec};

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let d = generate(&SyntheticSpec::toy(10, 30, 2)).unwrap();
        write_dataset(&p, &d).unwrap();
        let back = read_dataset(&p).unwrap();
        assert_eq!(back.samples(), d.samples());
        assert_eq!(back.labels(), d.labels());
    }

    #[test]
    fn headerless_and_bad_labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "1,0.5,2\n-1,1.5,3\n").unwrap();
        let d = read_dataset(&p).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.sample(0), &[0.5, 2.0]);
        std::fs::write(&p, "1,0.5\n0,1.5\n").unwrap();
        match read_dataset(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "label,a\n1,x\n").unwrap();
        assert!(matches!(read_dataset(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn table_round_trip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let rows = vec![vec![0.1 + 0.2, f64::INFINITY, -1e-300], vec![1.0 / 3.0, 0.0, 5e300]];
        write_table(&p, &["a", "b", "c"], &rows).unwrap();
        let (h, back) = read_table(&p).unwrap();
        assert_eq!(h, vec!["a", "b", "c"]);
        assert_eq!(back, rows);
    }
}
