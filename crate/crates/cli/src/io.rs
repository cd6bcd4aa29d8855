use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::CliError;

/// Reads one vector per row. A first row that does not parse as numbers is
/// taken as a header; lines starting with `#` are skipped.
pub fn read_points(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let file = File::open(path).map_err(|e| CliError::Csv(format!("{}: {e}", path.display())))?;
    parse_points(file).map_err(|e| match e {
        CliError::Csv(msg) => CliError::Csv(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_points(reader: impl Read) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CliError::Csv(e.to_string()))?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => {
                if let Some(bad) = row.iter().position(|v| !v.is_finite()) {
                    return Err(CliError::Csv(format!(
                        "row {}: column {} is not finite",
                        i + 1,
                        bad + 1
                    )));
                }
                rows.push(row);
            }
            Err(_) if i == 0 => continue,
            Err(e) => return Err(CliError::Csv(format!("row {}: {e}", i + 1))),
        }
    }
    if rows.is_empty() {
        return Err(CliError::Csv("no data rows".into()));
    }
    if rows[0].is_empty() {
        return Err(CliError::Csv("rows have no columns".into()));
    }
    Ok(rows)
}

/// A flat table written after a `# config` comment line.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, config_line: &str) -> Result<String, CliError> {
        let mut out = format!("# config {config_line}\n").into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.header)
                .map_err(|e| CliError::Output(e.to_string()))?;
            for row in &self.rows {
                w.write_record(row).map_err(|e| CliError::Output(e.to_string()))?;
            }
            w.flush().map_err(|e| CliError::Output(e.to_string()))?;
        }
        String::from_utf8(out).map_err(|e| CliError::Output(e.to_string()))
    }
}
