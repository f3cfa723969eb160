//! On-disk formats.
//!
//! A metric space with `k` points is stored as text: the first line holds
//! `k`, then line `i` (`i = 0..k`) lists `d(i, 0), …, d(i, i−1), 0`, i.e. the
//! lower triangle including the zero diagonal. Lines starting with `#` and
//! blank lines are ignored.
//!
//! ```text
//! 3
//! 0
//! 1,0
//! 2,1.5,0
//! ```

use std::io::{self, BufRead, Write};

use lpwalk_core::{FiniteMetricSpace, GridSnapshot};

use crate::report::{fmt_real, Cell, Table};
use crate::Error;

pub fn write_metric_space(space: &FiniteMetricSpace, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "{}", space.k())?;
    for i in 0..space.k() {
        let mut line = String::new();
        for &x in space.lower_row(i) {
            line.push_str(&fmt_real(x));
            line.push(',');
        }
        line.push('0');
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_metric_space(r: impl BufRead) -> Result<FiniteMetricSpace, Error> {
    let mut k = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| Error::Format { line: n + 1, msg };
        let Some(k) = k else {
            let v: usize = line.parse().map_err(|_| bad(format!("expected the point count, got {line:?}")))?;
            if v == 0 {
                return Err(bad("point count must be positive".into()));
            }
            k = Some(v);
            continue;
        };
        let i = rows.len();
        if i == k {
            return Err(bad(format!("more than {k} rows")));
        }
        let mut row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|_| bad(format!("not a number: {f:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != i + 1 {
            return Err(bad(format!("row {i} needs {} entries, got {}", i + 1, row.len())));
        }
        if row.pop() != Some(0.0) {
            return Err(bad(format!("row {i} must end with the zero diagonal")));
        }
        rows.push(row);
    }
    match k {
        None => Err(Error::Format { line: 0, msg: "empty metric-space file".into() }),
        Some(k) if rows.len() != k => {
            Err(Error::Format { line: 0, msg: format!("expected {k} rows, found {}", rows.len()) })
        }
        Some(_) => Ok(FiniteMetricSpace::from_lower_rows(&rows)?),
    }
}

/// Long-format dump with columns `i,t_i,coord_index,value`.
pub fn snapshot_table(snapshot: &GridSnapshot) -> Table {
    let mut t = Table::new(&["i", "t_i", "coord_index", "value"]);
    for (i, (point, &time)) in snapshot.points().zip(snapshot.times()).enumerate() {
        for (c, &x) in point.iter().enumerate() {
            t.push(vec![Cell::from(i), time.into(), c.into(), x.into()]);
        }
    }
    t
}
