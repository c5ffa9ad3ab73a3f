//! Long-format conversion of metrics CSVs for plotting tools.

use std::path::Path;

use crate::error::{Error, Result};
use crate::train::METRICS_HEADER;

/// Turns `epoch,train_loss,…` rows into `epoch,series,value` rows, one per
/// metric per epoch, grouped by series.
pub fn plot_emit(metrics_csv: &str) -> Result<String> {
    let mut r = csv::Reader::from_reader(metrics_csv.as_bytes());
    let header = r.headers()?.clone();
    if header.is_empty() || header.iter().collect::<Vec<_>>() != METRICS_HEADER {
        return Err(Error::Format(format!(
            "expected header {}, got {:?}",
            METRICS_HEADER.join(","),
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows: Vec<(u64, [f64; 4])> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let epoch = rec[0]
            .parse::<u64>()
            .map_err(|e| Error::Format(format!("line {line}: epoch: {e}")))?;
        let mut vals = [0.0; 4];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = rec[k + 1].parse::<f64>().map_err(|e| {
                Error::Format(format!("line {line}: {}: {e}", METRICS_HEADER[k + 1]))
            })?;
        }
        rows.push((epoch, vals));
    }
    if rows.is_empty() {
        return Err(Error::Format("metrics file has no rows".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "series", "value"])?;
    for (k, series) in METRICS_HEADER[1..].iter().enumerate() {
        for (epoch, vals) in &rows {
            w.write_record([
                epoch.to_string(),
                series.to_string(),
                format!("{:?}", vals[k]),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn plot_file(input: impl AsRef<Path>, output: impl AsRef<Path>) -> Result<()> {
    let text = std::fs::read_to_string(input)?;
    std::fs::write(output, plot_emit(&text)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(n: usize) -> String {
        let mut s = String::from("epoch,train_loss,train_acc,test_loss,test_acc\n");
        for e in 1..=n {
            s += &format!("{e},{},0.5,{},0.6\n", 1.0 / e as f64, 2.0 / e as f64);
        }
        s
    }

    #[test]
    fn long_format() {
        let out = plot_emit(&metrics(10)).unwrap();
        let mut lines = out.lines();
        assert_eq!(lines.next(), Some("epoch,series,value"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 40);
        for series in ["train_loss", "train_acc", "test_loss", "test_acc"] {
            assert_eq!(
                rows.iter()
                    .filter(|r| r.split(',').nth(1) == Some(series))
                    .count(),
                10
            );
        }
        assert_eq!(rows[0], "1,train_loss,1.0");
    }

    #[test]
    fn malformed() {
        assert!(matches!(plot_emit(""), Err(Error::Format(_))));
        assert!(matches!(
            plot_emit("epoch,train_loss,train_acc,test_loss,test_acc\n"),
            Err(Error::Format(_))
        ));
        assert!(matches!(plot_emit("a,b\n1,2\n"), Err(Error::Format(_))));
        assert!(plot_emit("epoch,train_loss,train_acc,test_loss,test_acc\nx,1,1,1,1\n").is_err());
        assert!(plot_emit("epoch,train_loss,train_acc,test_loss,test_acc\n1,1,1\n").is_err());
    }
}
