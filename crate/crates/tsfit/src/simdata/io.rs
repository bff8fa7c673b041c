//! Line-delimited text format for datasets. One header record, then per
//! sample: the id line, `d` feature rows of `x`, the label row, and (when
//! ground truth is present) `d` mask rows. Reals carry 17 significant digits
//! so a round trip is bit-faithful.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::simdata::{TimeSeriesDataset, TimeSeriesSample};

pub const DATASET_MAGIC: &str = "tsfit.dataset";

fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn save_dataset(ds: &TimeSeriesDataset, path: &Path) -> Result<()> {
    let has_gt = ds.has_gt();
    assert!(
        has_gt || ds.samples.iter().all(|s| s.gt.is_none()),
        "dataset mixes samples with and without ground truth"
    );
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "{DATASET_MAGIC} version=1 name={} d={} t_max={} n_samples={} has_gt={}",
        ds.name,
        ds.d,
        ds.t_max,
        ds.samples.len(),
        u8::from(has_gt)
    )?;
    for s in &ds.samples {
        writeln!(w, "sample id={}", s.id)?;
        for f in 0..ds.d {
            let row: Vec<String> = s.x.row(f).iter().map(|&v| fmt_real(v)).collect();
            writeln!(w, "x {}", row.join(" "))?;
        }
        let labels: Vec<String> = s.y.iter().map(|v| v.to_string()).collect();
        writeln!(w, "y {}", labels.join(" "))?;
        if let Some(gt) = &s.gt {
            for f in 0..ds.d {
                let row: Vec<String> = gt.row(f).iter().map(|v| v.to_string()).collect();
                writeln!(w, "g {}", row.join(" "))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

struct LineSource<R: BufRead> {
    reader: R,
    line_no: usize,
}

impl<R: BufRead> LineSource<R> {
    fn next_line(&mut self, field: &str) -> Result<String> {
        let mut buf = String::new();
        let n = self.reader.read_line(&mut buf)?;
        self.line_no += 1;
        if n == 0 {
            return Err(Error::Format {
                line: self.line_no,
                field: field.to_string(),
                reason: "unexpected end of file".into(),
            });
        }
        Ok(buf.trim_end_matches(['\n', '\r']).to_string())
    }
}

fn parse_kv(token: &str, key: &str, line: usize) -> Result<String> {
    match token.strip_prefix(&format!("{key}=")) {
        Some(v) => Ok(v.to_string()),
        None => Err(Error::Format {
            line,
            field: key.to_string(),
            reason: format!("expected `{key}=...`, found `{token}`"),
        }),
    }
}

fn parse_usize(s: &str, field: &str, line: usize) -> Result<usize> {
    s.parse().map_err(|_| Error::Format {
        line,
        field: field.to_string(),
        reason: format!("`{s}` is not a non-negative integer"),
    })
}

fn parse_row<T, F>(line: &str, prefix: &str, expect_len: usize, field: &str, line_no: usize, parse: F) -> Result<Vec<T>>
where
    F: Fn(&str) -> Option<T>,
{
    let body = line.strip_prefix(prefix).ok_or_else(|| Error::Format {
        line: line_no,
        field: field.to_string(),
        reason: format!("expected a `{}`-record", prefix.trim()),
    })?;
    let vals: Option<Vec<T>> = body.split_whitespace().map(|tok| parse(tok)).collect();
    let vals = vals.ok_or_else(|| Error::Format {
        line: line_no,
        field: field.to_string(),
        reason: "unparseable value".into(),
    })?;
    if vals.len() != expect_len {
        return Err(Error::Format {
            line: line_no,
            field: field.to_string(),
            reason: format!("expected {expect_len} values, found {}", vals.len()),
        });
    }
    Ok(vals)
}

pub fn load_dataset(path: &Path) -> Result<TimeSeriesDataset> {
    let mut src = LineSource {
        reader: BufReader::new(File::open(path)?),
        line_no: 0,
    };
    let header = src.next_line("header")?;
    let mut tokens = header.split_whitespace();
    let magic = tokens.next().unwrap_or_default();
    if magic != DATASET_MAGIC {
        return Err(Error::Format {
            line: 1,
            field: "header".into(),
            reason: format!("not a dataset file (leading token `{magic}`)"),
        });
    }
    let version = parse_kv(tokens.next().unwrap_or_default(), "version", 1)?;
    if version != "1" {
        return Err(Error::Format {
            line: 1,
            field: "version".into(),
            reason: format!("unsupported version {version}"),
        });
    }
    let name = parse_kv(tokens.next().unwrap_or_default(), "name", 1)?;
    let d = parse_usize(&parse_kv(tokens.next().unwrap_or_default(), "d", 1)?, "d", 1)?;
    let t_max = parse_usize(&parse_kv(tokens.next().unwrap_or_default(), "t_max", 1)?, "t_max", 1)?;
    let n_samples = parse_usize(
        &parse_kv(tokens.next().unwrap_or_default(), "n_samples", 1)?,
        "n_samples",
        1,
    )?;
    let has_gt = parse_kv(tokens.next().unwrap_or_default(), "has_gt", 1)? == "1";

    let mut ds = TimeSeriesDataset::new(name, d, t_max);
    for rec in 0..n_samples {
        let field = format!("sample {rec}");
        let line = src.next_line(&field)?;
        let id_tok = line.strip_prefix("sample ").ok_or_else(|| Error::Format {
            line: src.line_no,
            field: field.clone(),
            reason: "expected a `sample`-record".into(),
        })?;
        let id = parse_usize(&parse_kv(id_tok, "id", src.line_no)?, "id", src.line_no)? as u64;

        let mut x = Array2::<f64>::zeros((d, t_max));
        for f in 0..d {
            let fld = format!("sample {rec} x row {f}");
            let line = src.next_line(&fld)?;
            let row = parse_row(&line, "x ", t_max, &fld, src.line_no, |tok| {
                tok.parse::<f64>().ok().filter(|v| v.is_finite())
            })?;
            for (t, v) in row.into_iter().enumerate() {
                x[[f, t]] = v;
            }
        }

        let fld = format!("sample {rec} y");
        let line = src.next_line(&fld)?;
        let y = parse_row(&line, "y ", t_max, &fld, src.line_no, |tok| {
            match tok {
                "0" => Some(0u8),
                "1" => Some(1u8),
                _ => None,
            }
        })?;

        let gt = if has_gt {
            let mut m = Array2::<u8>::zeros((d, t_max));
            for f in 0..d {
                let fld = format!("sample {rec} gt row {f}");
                let line = src.next_line(&fld)?;
                let row = parse_row(&line, "g ", t_max, &fld, src.line_no, |tok| match tok {
                    "0" => Some(0u8),
                    "1" => Some(1u8),
                    _ => None,
                })?;
                for (t, v) in row.into_iter().enumerate() {
                    m[[f, t]] = v;
                }
            }
            Some(m)
        } else {
            None
        };

        ds.samples.push(TimeSeriesSample { id, x, y, gt });
    }
    Ok(ds)
}
