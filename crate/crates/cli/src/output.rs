//! CSV rendering and all-or-nothing file emission.
//!
//! Floats go through the csv serializer, which prints the shortest decimal
//! that parses back to the same bits.

use anyhow::{Context, Result};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

/// A rendered file waiting to be written.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

pub fn render<R: Serialize>(name: impl Into<String>, rows: &[R]) -> Result<OutputFile> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    Ok(OutputFile {
        name: name.into(),
        bytes: w.into_inner().context("flushing csv")?,
    })
}

/// Header-only files for empty tables (serde only emits a header with a row).
pub fn render_with_header<R: Serialize>(
    name: impl Into<String>,
    header: &[&str],
    rows: &[R],
) -> Result<OutputFile> {
    if !rows.is_empty() {
        return render(name, rows);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    Ok(OutputFile {
        name: name.into(),
        bytes: w.into_inner().context("flushing csv")?,
    })
}

/// Writes every file or none: each goes to a hidden temporary first and is
/// renamed into place only once all temporaries exist.
pub fn emit(dir: &Path, files: &[OutputFile]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
    let result = (|| -> Result<()> {
        for f in files {
            let tmp = dir.join(format!(".{}.partial", f.name));
            fs::write(&tmp, &f.bytes).with_context(|| format!("writing {}", tmp.display()))?;
            staged.push((tmp, dir.join(&f.name)));
        }
        Ok(())
    })();
    if let Err(e) = result {
        for (tmp, _) in &staged {
            let _ = fs::remove_file(tmp);
        }
        return Err(e);
    }
    let mut written = Vec::new();
    for (tmp, dest) in staged {
        fs::rename(&tmp, &dest).with_context(|| format!("moving {} into place", dest.display()))?;
        written.push(dest);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        v: f64,
        w: Option<f64>,
    }

    #[test]
    fn floats_round_trip_bit_for_bit() {
        let values = [
            0.1 + 0.2,
            1.0 / 3.0,
            1e-300,
            5e-324,
            f64::MAX,
            -0.0,
            20.0,
            9.743665166066558e-5,
        ];
        let rows: Vec<Row> = values.iter().map(|&v| Row { v, w: None }).collect();
        let file = render("t.csv", &rows).unwrap();
        let text = String::from_utf8(file.bytes).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("v,w"));
        for (line, v) in lines.zip(values) {
            let (field, rest) = line.split_once(',').unwrap();
            assert_eq!(rest, "");
            assert_eq!(
                field.parse::<f64>().unwrap().to_bits(),
                v.to_bits(),
                "{field}"
            );
        }
    }

    #[test]
    fn empty_table_keeps_header() {
        let file = render_with_header::<Row>("t.csv", &["v", "w"], &[]).unwrap();
        assert_eq!(file.bytes, b"v,w\n");
    }

    #[test]
    fn emit_leaves_no_partials() {
        let dir = tempfile::tempdir().unwrap();
        let files = vec![
            OutputFile {
                name: "a.csv".into(),
                bytes: b"x\n1\n".to_vec(),
            },
            OutputFile {
                name: "b.csv".into(),
                bytes: b"y\n2\n".to_vec(),
            },
        ];
        let written = emit(dir.path(), &files).unwrap();
        assert_eq!(written.len(), 2);
        let mut names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert_eq!(names, ["a.csv", "b.csv"]);
    }
}
