use std::io::{Read, Write};

use super::MatrixResult;
use crate::error::Result;

const CSV_HEADER: &str = "id,embed_set,train_set,test,precision,recall,f1";

/// One line per row. Corpus sets are joined with `+`; failed rows leave the
/// metric cells empty.
pub fn write_matrix_csv<W: Write>(mut out: W, result: &MatrixResult) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in &result.rows {
        let s = &row.spec;
        write!(
            out,
            "{},{},{},{}",
            s.id,
            s.embed_set.join("+"),
            s.train_set.join("+"),
            s.test
        )?;
        match &row.report {
            Some(r) => writeln!(out, ",{},{},{}", r.precision, r.recall, r.f1)?,
            None => writeln!(out, ",,,")?,
        }
    }
    Ok(())
}

pub fn write_matrix_json<W: Write>(mut out: W, result: &MatrixResult) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, result)?;
    out.write_all(b"\n").map_err(serde_json::Error::io)?;
    Ok(())
}

pub fn read_matrix_json<R: Read>(input: R) -> Result<MatrixResult> {
    Ok(serde_json::from_reader(input)?)
}
