//! Number formatting and output sinks.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use serde_json::Value;

/// Shortest text that parses back to the same double.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:?}")
    }
}

/// JSON number, or the strings `inf`, `-inf`, `nan`.
pub fn jnum(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or_else(|| Value::String(num(x)))
}

/// RFC 4180 table with a header row.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> io::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| io::Error::other(e.to_string()))
}

/// Where tables and reports go: files under `--out`, else stdout.
pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> io::Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d)?;
        }
        Ok(Self { dir })
    }

    pub fn file(&self, name: &str, bytes: &[u8]) -> io::Result<()> {
        match &self.dir {
            Some(d) => fs::write(d.join(name), bytes),
            None => io::stdout().lock().write_all(bytes),
        }
    }

    /// JSON reports always reach stdout; with `--out` they are also
    /// appended to `name` as JSON lines.
    pub fn report(&self, name: &str, values: &[Value]) -> io::Result<()> {
        let mut text = String::new();
        for v in values {
            text.push_str(&v.to_string());
            text.push('\n');
        }
        if let Some(d) = &self.dir {
            fs::write(d.join(name), &text)?;
        }
        io::stdout().lock().write_all(text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 2.5e17, -0.0, 5e-324] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_quotes_fields() {
        let b = csv_table(&["a", "b"], &[vec!["x,y".into(), "1".into()]]).unwrap();
        assert_eq!(String::from_utf8(b).unwrap(), "a,b\r\n\"x,y\",1\r\n");
    }
}
