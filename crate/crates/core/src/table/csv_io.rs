use super::{Column, ColumnData, ColumnKind, Table, TableError};
use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

/// Cell tokens read as missing unless overridden.
pub const DEFAULT_MISSING_TOKENS: [&str; 3] = ["", "NA", "NaN"];

/// Fraction of non-empty cells that must parse as reals for a column to be
/// inferred numeric.
const NUMERIC_FRACTION: f64 = 0.95;

/// Two-valued vocabularies recognised as binary, false-like level first.
const BOOLEAN_PAIRS: [(&str, &str); 6] = [
    ("0", "1"),
    ("false", "true"),
    ("no", "yes"),
    ("n", "y"),
    ("f", "t"),
    ("0.0", "1.0"),
];

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub kind_hints: BTreeMap<String, ColumnKind>,
    pub missing_tokens: Vec<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            kind_hints: BTreeMap::new(),
            missing_tokens: DEFAULT_MISSING_TOKENS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl CsvOptions {
    pub fn with_hint(mut self, column: &str, kind: ColumnKind) -> Self {
        self.kind_hints.insert(column.to_string(), kind);
        self
    }
}

pub fn read_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Table, TableError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| TableError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv_from_reader(std::io::BufReader::new(file), options)
}

pub fn read_csv_from_reader<R: Read>(reader: R, options: &CsvOptions) -> Result<Table, TableError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| TableError::Csv(e.to_string()))?
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let h = h.trim().trim_start_matches('\u{feff}');
            if h.is_empty() {
                format!("column_{i}")
            } else {
                h.to_string()
            }
        })
        .collect();
    let width = headers.len();
    let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); width];
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| TableError::Csv(e.to_string()))?;
        if record.len() == 1 && record.get(0) == Some("") && width > 1 {
            // blank line
            continue;
        }
        if record.len() != width {
            return Err(TableError::Ragged {
                row: i + 1,
                expected: width,
                found: record.len(),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let field = field.trim();
            let missing = options.missing_tokens.iter().any(|t| t == field);
            cells[j].push((!missing).then(|| field.to_string()));
        }
    }
    if cells.first().map_or(true, |c| c.is_empty()) {
        return Err(TableError::NoRows);
    }
    let columns = headers
        .into_iter()
        .zip(cells)
        .map(|(name, column)| {
            let kind = match options.kind_hints.get(&name) {
                Some(k) => *k,
                None => infer_kind(&column),
            };
            build_column(name, &column, kind)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Table::new(columns)
}

fn boolean_pair(distinct: &BTreeSet<&str>) -> Option<(usize, usize)> {
    if distinct.len() != 2 {
        return None;
    }
    let lower: BTreeSet<String> = distinct.iter().map(|s| s.to_ascii_lowercase()).collect();
    BOOLEAN_PAIRS
        .iter()
        .position(|(f, t)| lower.contains(*f) && lower.contains(*t))
        .map(|i| (i, distinct.len()))
}

/// Kind decision from the multiset of present cells only, so row order never
/// matters.
fn infer_kind(cells: &[Option<String>]) -> ColumnKind {
    let present: Vec<&str> = cells.iter().flatten().map(String::as_str).collect();
    if present.is_empty() {
        return ColumnKind::Numeric;
    }
    let distinct: BTreeSet<&str> = present.iter().copied().collect();
    if boolean_pair(&distinct).is_some() {
        return ColumnKind::Binary;
    }
    let parsed = present.iter().filter(|s| parse_real(s).is_some()).count();
    if parsed as f64 >= NUMERIC_FRACTION * present.len() as f64 {
        ColumnKind::Numeric
    } else {
        ColumnKind::Categorical
    }
}

fn parse_real(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn build_column(name: String, cells: &[Option<String>], kind: ColumnKind) -> Result<Column, TableError> {
    match kind {
        ColumnKind::Numeric => {
            let values: Vec<f64> = cells
                .iter()
                .map(|c| c.as_deref().and_then(parse_real).unwrap_or(f64::NAN))
                .collect();
            Ok(Column::numeric(name, values))
        }
        ColumnKind::Categorical => Ok(Column::categorical(name, cells)),
        ColumnKind::Binary => {
            let distinct: BTreeSet<&str> = cells.iter().flatten().map(String::as_str).collect();
            if distinct.len() > 2 {
                return Err(TableError::KindMismatch {
                    column: name,
                    found: ColumnKind::Categorical,
                    expected: "at most two distinct values for a binary column",
                });
            }
            // false-like level gets code 0 when the vocabulary is recognised
            let mut levels: Vec<String> = distinct.iter().map(|s| s.to_string()).collect();
            if let Some((pair, _)) = boolean_pair(&distinct) {
                let truthy = BOOLEAN_PAIRS[pair].1;
                levels.sort_by_key(|l| l.to_ascii_lowercase() == truthy);
            }
            let index: BTreeMap<&str, u32> = levels
                .iter()
                .enumerate()
                .map(|(i, l)| (l.as_str(), i as u32))
                .collect();
            let codes = cells
                .iter()
                .map(|c| c.as_deref().map_or(0, |s| index[s]))
                .collect();
            let missing = cells.iter().map(Option::is_none).collect();
            Ok(Column {
                schema: super::ColumnSchema {
                    name,
                    kind: ColumnKind::Binary,
                    role: super::ColumnRole::Feature,
                },
                data: ColumnData::Categorical { codes, levels },
                missing,
            })
        }
    }
}

/// Writes every column (including ignored ones) with missing cells left empty.
pub fn write_csv<W: Write>(table: &Table, writer: W) -> Result<(), TableError> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| TableError::Csv(e.to_string());
    w.write_record(table.columns().iter().map(|c| c.name()))
        .map_err(err)?;
    for row in 0..table.row_count() {
        w.write_record(
            table
                .columns()
                .iter()
                .map(|c| c.cell_text(row).unwrap_or_default()),
        )
        .map_err(err)?;
    }
    w.flush().map_err(|e| TableError::Csv(e.to_string()))
}
