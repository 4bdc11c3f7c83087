// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io::Write;

use lancet_core::config::OutputFormat;
use serde::Serialize;
use serde_json::Value;

/// A command result, renderable as JSON, CSV or aligned text.
pub struct Rendered {
    pub json: Value,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Rendered {
    pub fn new(json: impl Serialize, header: &[&str]) -> Self {
        Self {
            json: serde_json::to_value(json).expect("outputs serialize"),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(mut self, cells: impl IntoIterator<Item = impl ToString>) -> Self {
        self.rows.push(cells.into_iter().map(|c| c.to_string()).collect());
        self
    }

    pub fn rows<I, C>(mut self, rows: I) -> Self
    where
        I: IntoIterator<Item = C>,
        C: IntoIterator,
        C::Item: ToString,
    {
        for r in rows {
            self = self.row(r);
        }
        self
    }

    /// Two-column `field,value` table from the top-level JSON scalars.
    pub fn fields(json: impl Serialize) -> Self {
        let json = serde_json::to_value(json).expect("outputs serialize");
        let rows = match &json {
            Value::Object(map) => map
                .iter()
                .map(|(k, v)| vec![k.clone(), scalar(v)])
                .collect(),
            other => vec![vec!["value".to_string(), scalar(other)]],
        };
        Self {
            json,
            header: vec!["field".into(), "value".into()],
            rows,
        }
    }

    pub fn write(&self, format: OutputFormat, mut out: impl Write) -> std::io::Result<()> {
        match format {
            OutputFormat::Json => {
                serde_json::to_writer_pretty(&mut out, &self.json)?;
                writeln!(out)
            }
            OutputFormat::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.header)?;
                for r in &self.rows {
                    w.write_record(r)?;
                }
                w.flush()
            }
            OutputFormat::Plain => {
                let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
                for r in &self.rows {
                    for (w, c) in widths.iter_mut().zip(r) {
                        *w = (*w).max(c.chars().count());
                    }
                }
                for r in std::iter::once(&self.header).chain(&self.rows) {
                    let line: Vec<String> = r
                        .iter()
                        .zip(&widths)
                        .map(|(c, w)| format!("{c:<w$}"))
                        .collect();
                    writeln!(out, "{}", line.join("  ").trim_end())?;
                }
                Ok(())
            }
        }
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}
