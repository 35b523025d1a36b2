use std::fs::File;
use std::io::{self, BufWriter, Write};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::{Cli, Format, SCHEMA_VERSION};

/// Long-format table for the CSV output.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip decimal; `inf`, `-inf` and `nan` for non-finite values.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    config: &'a Cli,
    result: &'a T,
}

pub fn emit<T: Serialize>(cli: &Cli, default: Format, result: &T, table: &Table) -> Result<()> {
    let format = cli.format.unwrap_or(default);
    let mut sink: Box<dyn Write> = match &cli.out {
        Some(path) => Box::new(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match format {
        Format::Json => {
            let env = Envelope { schema_version: SCHEMA_VERSION, config: cli, result };
            serde_json::to_writer_pretty(&mut sink, &env)?;
            writeln!(sink)?;
        }
        Format::Csv => {
            let config = serde_json::json!({ "schema_version": SCHEMA_VERSION, "config": cli });
            writeln!(sink, "# config: {config}")?;
            writeln!(sink, "{}", table.header.join(","))?;
            for row in &table.rows {
                writeln!(sink, "{}", row.join(","))?;
            }
        }
    }
    sink.flush()?;
    Ok(())
}
