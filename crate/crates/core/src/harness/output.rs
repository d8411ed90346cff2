use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            // 17 significant digits: parses back to the same double
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    pub fn opt_float(v: Option<f64>) -> Cell {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

pub type ResultRow = Vec<Cell>;

/// Column layout of each command's CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    /// Optimal value table; `h` is 1-based.
    Solve,
    Vigu,
    Ucb,
    /// One summary row per `(seed, K)` of a learning sweep.
    UcbSweep,
}

impl Schema {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Schema::Solve => &["h", "s", "y_index", "y_value", "value", "action", "seed", "config_hash"],
            Schema::Vigu => &[
                "n",
                "seed",
                "gap_discretized",
                "gap_mc_mean",
                "gap_mc_ci",
                "iota1",
                "wall_ms",
                "config_hash",
            ],
            Schema::Ucb => &[
                "k",
                "s1",
                "v_opt",
                "v_pik",
                "regret_k",
                "cum_regret",
                "mc_value",
                "mc_ci",
                "wall_ms",
                "seed",
                "config_hash",
            ],
            Schema::UcbSweep => &[
                "K",
                "seed",
                "m",
                "cum_regret",
                "mean_regret_first10",
                "mean_regret_last10",
                "iota2",
                "wall_ms",
                "config_hash",
            ],
        }
    }
}

/// Rows of one experiment, in key order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub schema: Schema,
    pub rows: Vec<ResultRow>,
}

/// Writes a header and `rows` as CSV with LF line endings.
pub fn write_csv_to<W: Write>(schema: Schema, rows: &[ResultRow], out: W) -> Result<()> {
    let cols = schema.columns();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let to_io = |e: csv::Error| -> std::io::Error {
        match e.into_kind() {
            csv::ErrorKind::Io(e) => e,
            other => std::io::Error::other(format!("{other:?}")),
        }
    };
    let io_err = |e| Error::Io {
        path: "<csv>".into(),
        source: to_io(e),
    };
    w.write_record(cols).map_err(io_err)?;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != cols.len() {
            return Err(Error::InvalidParam(format!(
                "row {i} has {} fields, schema has {}",
                row.len(),
                cols.len()
            )));
        }
        w.write_record(row.iter().map(Cell::render)).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv>".into(),
        source: e,
    })?;
    Ok(())
}

pub fn csv_bytes(schema: Schema, rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv_to(schema, rows, &mut buf)?;
    Ok(buf)
}

/// Writes the CSV to `path`; filesystem errors carry the path.
pub fn write_csv(schema: Schema, rows: &[ResultRow], path: &Path) -> Result<()> {
    let bytes = csv_bytes(schema, rows)?;
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
