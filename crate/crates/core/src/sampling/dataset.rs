use std::io::{BufRead, Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("row has {got} values, expected {expected}")]
    Arity { expected: usize, got: usize },
    #[error("line {line}, column `{column}`: cannot parse {value:?} as a number")]
    Parse {
        line: usize,
        column: String,
        value: String,
    },
    #[error("missing header row")]
    MissingHeader,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Column-oriented table of named numeric variables. Missing values are NaN.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    columns: Vec<String>,
    data: Vec<Vec<f64>>,
    provenance: Vec<String>,
}

impl Dataset {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Result<Self, DataError> {
        let columns: Vec<String> = columns.into_iter().map(Into::into).collect();
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].contains(c) {
                return Err(DataError::DuplicateColumn(c.clone()));
            }
        }
        let data = vec![Vec::new(); columns.len()];
        Ok(Dataset {
            columns,
            data,
            provenance: Vec::new(),
        })
    }

    pub fn from_columns<S: Into<String>>(
        columns: impl IntoIterator<Item = (S, Vec<f64>)>,
    ) -> Result<Self, DataError> {
        let (names, data): (Vec<String>, Vec<Vec<f64>>) =
            columns.into_iter().map(|(n, v)| (n.into(), v)).unzip();
        let mut ds = Dataset::new(names)?;
        if let Some(first) = data.first() {
            if let Some(bad) = data.iter().find(|c| c.len() != first.len()) {
                return Err(DataError::Arity {
                    expected: first.len(),
                    got: bad.len(),
                });
            }
        }
        ds.data = data;
        Ok(ds)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows() == 0
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.column_index(name).map(|i| self.data[i].as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64], DataError> {
        self.column(name)
            .ok_or_else(|| DataError::UnknownColumn(name.to_string()))
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.iter().map(|c| c[i]).collect()
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<(), DataError> {
        if row.len() != self.columns.len() {
            return Err(DataError::Arity {
                expected: self.columns.len(),
                got: row.len(),
            });
        }
        for (c, v) in self.data.iter_mut().zip(row) {
            c.push(*v);
        }
        Ok(())
    }

    /// Adds or replaces a column.
    pub fn set_column(&mut self, name: &str, values: Vec<f64>) -> Result<(), DataError> {
        if !self.columns.is_empty() && values.len() != self.n_rows() {
            return Err(DataError::Arity {
                expected: self.n_rows(),
                got: values.len(),
            });
        }
        match self.column_index(name) {
            Some(i) => self.data[i] = values,
            None => {
                self.columns.push(name.to_string());
                self.data.push(values);
            }
        }
        Ok(())
    }

    /// New dataset holding the given rows (repeats allowed), in order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self.columns.clone(),
            data: self
                .data
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn provenance(&self) -> &[String] {
        &self.provenance
    }

    pub fn add_provenance(&mut self, line: impl Into<String>) {
        self.provenance.push(line.into());
    }

    /// Writes provenance as `# ` lines, then a header and one line per row.
    /// Missing values are written as empty fields.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), DataError> {
        for p in &self.provenance {
            for line in p.lines() {
                writeln!(out, "# {line}")?;
            }
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns)?;
        let mut record = Vec::with_capacity(self.columns.len());
        for i in 0..self.n_rows() {
            record.clear();
            record.extend(self.data.iter().map(|c| format_value(c[i])));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// Reads the format produced by [`Dataset::write_csv`]. Leading `#` lines
    /// become provenance; empty, `NA` and `nan` fields become NaN.
    pub fn read_csv<R: BufRead>(mut input: R) -> Result<Dataset, DataError> {
        let mut provenance = Vec::new();
        let mut header_line = String::new();
        let mut line_no = 0;
        loop {
            header_line.clear();
            if input.read_line(&mut header_line)? == 0 {
                return Err(DataError::MissingHeader);
            }
            line_no += 1;
            let trimmed = header_line.trim_end_matches(['\r', '\n']);
            if let Some(rest) = trimmed.strip_prefix('#') {
                provenance.push(rest.strip_prefix(' ').unwrap_or(rest).to_string());
            } else if !trimmed.trim().is_empty() {
                break;
            }
        }
        let rest = std::io::Cursor::new(header_line.clone().into_bytes()).chain(input);
        let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(rest);
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut ds = Dataset::new(header)?;
        ds.provenance = provenance;
        let mut row = Vec::with_capacity(ds.columns.len());
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            row.clear();
            for (field, name) in record.iter().zip(&ds.columns) {
                row.push(parse_value(field).ok_or_else(|| DataError::Parse {
                    line: line_no + i + 1,
                    column: name.clone(),
                    value: field.to_string(),
                })?);
            }
            ds.push_row(&row)?;
        }
        Ok(ds)
    }
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn parse_value(field: &str) -> Option<f64> {
    match field {
        "" | "NA" | "nan" | "NaN" => Some(f64::NAN),
        s => s.parse::<f64>().ok().filter(|v| v.is_finite()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_with_provenance_and_missing() {
        let mut ds = Dataset::from_columns([("a", vec![0.0, 1.0]), ("z", vec![0.25, f64::NAN])]).unwrap();
        ds.add_provenance("seed=3");
        let text = ds.to_csv_string();
        assert_eq!(text, "# seed=3\na,z\n0,0.25\n1,\n");
        let back = Dataset::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back.provenance(), ["seed=3"]);
        assert_eq!(back.column("a").unwrap(), [0.0, 1.0]);
        assert!(back.column("z").unwrap()[1].is_nan());
    }

    #[test]
    fn empty_dataset_keeps_columns() {
        let ds = Dataset::new(["x", "y"]).unwrap();
        let back = Dataset::read_csv(ds.to_csv_string().as_bytes()).unwrap();
        assert_eq!(back.columns(), ["x", "y"]);
        assert_eq!(back.n_rows(), 0);
    }

    #[test]
    fn bad_numbers_are_located() {
        let err = Dataset::read_csv("a,b\n1,2\n3,x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 3, ref column, .. } if column == "b"), "{err}");
        assert!(Dataset::read_csv("a,b\n1\n".as_bytes()).is_err());
        assert!(matches!(Dataset::read_csv("# only\n".as_bytes()), Err(DataError::MissingHeader)));
    }

    #[test]
    fn crlf_input() {
        let ds = Dataset::read_csv("a,b\r\n1,2\r\n".as_bytes()).unwrap();
        assert_eq!(ds.row(0), vec![1.0, 2.0]);
    }

    #[test]
    fn duplicate_columns_rejected() {
        assert!(Dataset::new(["a", "a"]).is_err());
    }
}
