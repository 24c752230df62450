use std::io::{Read, Write};

use super::tensor::VerifiedSample;
use super::UncertaintyError;

fn csv_error(e: csv::Error) -> UncertaintyError {
    let line = e.position().map_or(0, |p| p.line());
    UncertaintyError::Csv { line, message: e.to_string() }
}

/// Reads rows `true,pred,v1,...,vn` with 1-based labels and `0`/`1` verdicts.
/// Returns the samples and the number of verifiers declared by the header.
pub fn read_samples_csv(reader: impl Read) -> Result<(Vec<VerifiedSample>, usize), UncertaintyError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < 2 || names[0] != "true" || names[1] != "pred" {
        return Err(UncertaintyError::Csv { line: 1, message: "header must start with `true,pred`".into() });
    }
    for (i, name) in names[2..].iter().enumerate() {
        if *name != format!("v{}", i + 1) {
            return Err(UncertaintyError::Csv {
                line: 1,
                message: format!("expected column `v{}`, found `{name}`", i + 1),
            });
        }
    }
    let n = names.len() - 2;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| UncertaintyError::Csv { line, message };
        let label = |i: usize| -> Result<u32, UncertaintyError> {
            record[i].parse().map_err(|_| bad(format!("`{}` is not a class label", &record[i])))
        };
        let verdicts = (2..record.len())
            .map(|i| match &record[i] {
                "1" => Ok(true),
                "0" => Ok(false),
                other => Err(bad(format!("verdict `{other}` must be 0 or 1"))),
            })
            .collect::<Result<_, _>>()?;
        rows.push(VerifiedSample::new(label(0)?, label(1)?, verdicts));
    }
    Ok((rows, n))
}

pub fn write_samples_csv(
    writer: impl Write,
    rows: &[VerifiedSample],
    verifiers: usize,
) -> Result<(), UncertaintyError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["true".to_string(), "pred".to_string()];
    header.extend((1..=verifiers).map(|i| format!("v{i}")));
    w.write_record(&header).map_err(csv_error)?;
    for r in rows {
        let mut rec = vec![r.true_label.to_string(), r.predicted.to_string()];
        rec.extend(r.verdicts.iter().map(|&b| if b { "1" } else { "0" }.to_string()));
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}
