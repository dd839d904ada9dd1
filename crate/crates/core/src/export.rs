//! Delimited-text export of solutions and sweep logs.
//!
//! Columns: `t, weighted_u, u, g, is_impulse_left, is_impulse_right`.
//! Reals are written with 17 significant digits, so a file read back
//! reproduces every value bit for bit. `u` is blank where it is unbounded.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::picard::{GridSolution, RefinementRow};

pub const SOLUTION_HEADER: [&str; 6] = [
    "t",
    "weighted_u",
    "u",
    "g",
    "is_impulse_left",
    "is_impulse_right",
];

/// One row of a solution file.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionRow {
    pub t: f64,
    pub weighted_u: f64,
    pub u: Option<f64>,
    pub g: f64,
    pub is_impulse_left: bool,
    pub is_impulse_right: bool,
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.position() {
        Some(p) => Error::Parse {
            offset: p.byte() as usize,
            message: e.to_string(),
        },
        None => Error::Io(e.to_string()),
    }
}

/// Rows of a solution in slot order.
pub fn solution_rows(sol: &GridSolution) -> Vec<SolutionRow> {
    (0..sol.grid().len())
        .map(|i| SolutionRow {
            t: sol.grid()[i],
            weighted_u: sol.weighted_values()[i],
            u: sol.u_value(i),
            g: sol.g_values()[i],
            is_impulse_left: sol.is_impulse_left(i),
            is_impulse_right: sol.is_impulse_right(i),
        })
        .collect()
}

pub fn write_rows<W: Write>(rows: &[SolutionRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SOLUTION_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            real(r.t),
            real(r.weighted_u),
            r.u.map(real).unwrap_or_default(),
            real(r.g),
            (r.is_impulse_left as u8).to_string(),
            (r.is_impulse_right as u8).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_solution_csv<W: Write>(sol: &GridSolution, out: W) -> Result<()> {
    write_rows(&solution_rows(sol), out)
}

fn field(rec: &csv::StringRecord, i: usize, offset: usize) -> Result<&str> {
    rec.get(i).ok_or_else(|| Error::Parse {
        offset,
        message: format!("missing column `{}`", SOLUTION_HEADER[i]),
    })
}

fn parse_real(s: &str, col: usize, offset: usize) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Parse {
        offset,
        message: format!("column `{}`: `{s}` is not a number", SOLUTION_HEADER[col]),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            offset,
            message: format!("column `{}` is not finite", SOLUTION_HEADER[col]),
        });
    }
    Ok(v)
}

fn parse_flag(s: &str, col: usize, offset: usize) -> Result<bool> {
    match s.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Parse {
            offset,
            message: format!(
                "column `{}`: expected 0 or 1, got `{other}`",
                SOLUTION_HEADER[col]
            ),
        }),
    }
}

/// Reads a solution file written by [`write_solution_csv`].
pub fn read_solution_csv<R: Read>(input: R) -> Result<Vec<SolutionRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(SOLUTION_HEADER) {
        return Err(Error::Parse {
            offset: 0,
            message: format!("unexpected header, expected {}", SOLUTION_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let offset = rec.position().map_or(0, |p| p.byte() as usize);
        if rec.len() != SOLUTION_HEADER.len() {
            return Err(Error::Parse {
                offset,
                message: format!(
                    "expected {} columns, got {}",
                    SOLUTION_HEADER.len(),
                    rec.len()
                ),
            });
        }
        let u = field(&rec, 2, offset)?;
        rows.push(SolutionRow {
            t: parse_real(field(&rec, 0, offset)?, 0, offset)?,
            weighted_u: parse_real(field(&rec, 1, offset)?, 1, offset)?,
            u: if u.trim().is_empty() {
                None
            } else {
                Some(parse_real(u, 2, offset)?)
            },
            g: parse_real(field(&rec, 3, offset)?, 3, offset)?,
            is_impulse_left: parse_flag(field(&rec, 4, offset)?, 4, offset)?,
            is_impulse_right: parse_flag(field(&rec, 5, offset)?, 5, offset)?,
        });
    }
    Ok(rows)
}

/// `sweep, delta` per Picard sweep.
pub fn write_convergence_log<W: Write>(deltas: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sweep", "delta"]).map_err(csv_err)?;
    for (i, d) in deltas.iter().enumerate() {
        w.write_record([(i + 1).to_string(), real(*d)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `n, u_end, weighted_end, change, sweeps` per refinement level.
pub fn write_refinement_table<W: Write>(rows: &[RefinementRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "u_end", "weighted_end", "change", "sweeps"])
        .map_err(csv_err)?;
    for r in rows {
        let change = if r.change.is_nan() {
            String::new()
        } else {
            real(r.change)
        };
        w.write_record([
            r.n.to_string(),
            real(r.u_end),
            real(r.weighted_end),
            change,
            r.sweeps.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
