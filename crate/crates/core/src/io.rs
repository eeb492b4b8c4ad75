//! Test-function files: a JSON grid header line followed by one value per line.
//!
//! ```text
//! {"mode":"continuous","horizon":1.0,"step":0.5}
//! 0.25
//! -1
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::operator::{Grid, SignPattern, TestFunction};

pub fn write_test_function(f: &TestFunction) -> String {
    let mut out = serde_json::to_string(&f.grid).expect("grid serializes");
    out.push('\n');
    for v in &f.values {
        writeln!(out, "{v}").expect("writing to a String");
    }
    out
}

pub fn write_sign_pattern(s: &SignPattern, grid: &Grid) -> String {
    write_test_function(&TestFunction {
        values: s.to_values(),
        grid: *grid,
    })
}

pub fn parse_test_function(text: &str) -> Result<TestFunction> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Format("empty file; expected a JSON grid header".into()))?;
    let grid: Grid = serde_json::from_str(header)
        .map_err(|e| Error::Format(format!("line 1: bad grid header: {e}")))?;
    let grid = grid.revalidate()?;
    let values = lines
        .map(|(lineno, l)| {
            let cell = l.split(',').next().unwrap_or("").trim();
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Format(format!("line {lineno}: `{l}` is not a finite number")))
        })
        .collect::<Result<Vec<_>>>()?;
    TestFunction::new(values, grid)
}

pub fn read_test_function(path: &Path) -> Result<TestFunction> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_test_function(&text)
}
