//! Plain-text state files.
//!
//! Primal states are stored as
//!
//! ```text
//! lagflow-state v1 <nx> <ny> <spacing> <t>
//! <i> <j> <value>
//! ...
//! ```
//!
//! with one line per non-exterior node in row-major order.  Dual (Legendre
//! transformed) states use the magic `lagflow-dual v1` and carry only the
//! nodes where the transform is trustworthy.  Values are printed with Rust's
//! shortest round-trip formatting, so writing and re-reading a state is
//! bit-exact and byte-identical runs produce byte-identical files.

use crate::flow::FlowState;
use crate::grid::{FlowGrid, NodeClass};
use crate::legendre::DualState;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

pub const STATE_MAGIC: &str = "lagflow-state";
pub const DUAL_MAGIC: &str = "lagflow-dual";
pub const FORMAT_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum StateError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad state header: {0}")]
    BadHeader(String),
    #[error(
        "state file does not match the grid: file is {file_nx}x{file_ny} at spacing \
         {file_spacing}, grid is {grid_nx}x{grid_ny} at spacing {grid_spacing}"
    )]
    GridMismatch {
        file_nx: usize,
        file_ny: usize,
        file_spacing: f64,
        grid_nx: usize,
        grid_ny: usize,
        grid_spacing: f64,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: node ({i},{j}) is outside the grid or exterior")]
    UnexpectedNode { line: usize, i: usize, j: usize },
    #[error("line {line}: duplicate node ({i},{j})")]
    DuplicateNode { line: usize, i: usize, j: usize },
    #[error("state file is missing {missing} grid nodes")]
    MissingNodes { missing: usize },
}

fn write_tagged<W: Write>(
    w: &mut W,
    magic: &str,
    grid: &FlowGrid,
    t: f64,
    value_at: impl Fn(usize) -> Option<f64>,
) -> io::Result<()> {
    writeln!(
        w,
        "{} {} {} {} {} {}",
        magic,
        FORMAT_VERSION,
        grid.nx(),
        grid.ny(),
        grid.spacing(),
        t
    )?;
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            if let Some(v) = value_at(grid.flat(i, j)) {
                writeln!(w, "{i} {j} {v}")?;
            }
        }
    }
    Ok(())
}

struct TaggedFile {
    t: f64,
    /// One entry per grid node; `None` where the file had no line.
    values: Vec<Option<f64>>,
}

fn read_tagged<R: BufRead>(r: &mut R, magic: &str, grid: &FlowGrid) -> Result<TaggedFile, StateError> {
    let mut header = String::new();
    r.read_line(&mut header)?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 6 || parts[0] != magic || parts[1] != FORMAT_VERSION {
        return Err(StateError::BadHeader(header.trim().to_string()));
    }
    let parse_usize = |s: &str| {
        s.parse::<usize>()
            .map_err(|e| StateError::BadHeader(format!("{header:?}: {e}")))
    };
    let parse_f64 = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| StateError::BadHeader(format!("{header:?}: {e}")))
    };
    let (file_nx, file_ny) = (parse_usize(parts[2])?, parse_usize(parts[3])?);
    let file_spacing = parse_f64(parts[4])?;
    let t = parse_f64(parts[5])?;
    let spacing_ok = (file_spacing - grid.spacing()).abs() <= 1e-12 * grid.spacing();
    if file_nx != grid.nx() || file_ny != grid.ny() || !spacing_ok {
        return Err(StateError::GridMismatch {
            file_nx,
            file_ny,
            file_spacing,
            grid_nx: grid.nx(),
            grid_ny: grid.ny(),
            grid_spacing: grid.spacing(),
        });
    }

    let mut values: Vec<Option<f64>> = vec![None; grid.node_count()];
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line_num = lineno + 2;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut it = trimmed.split_whitespace();
        let (si, sj, sv) = match (it.next(), it.next(), it.next(), it.next()) {
            (Some(a), Some(b), Some(c), None) => (a, b, c),
            _ => {
                return Err(StateError::Parse {
                    line: line_num,
                    msg: format!("expected 'i j value', got {trimmed:?}"),
                })
            }
        };
        let parse = |s: &str, what: &str| -> Result<usize, StateError> {
            s.parse().map_err(|e| StateError::Parse {
                line: line_num,
                msg: format!("bad {what} {s:?}: {e}"),
            })
        };
        let i = parse(si, "column index")?;
        let j = parse(sj, "row index")?;
        let v: f64 = sv.parse().map_err(|e| StateError::Parse {
            line: line_num,
            msg: format!("bad value {sv:?}: {e}"),
        })?;
        if i >= grid.nx() || j >= grid.ny() {
            return Err(StateError::UnexpectedNode {
                line: line_num,
                i,
                j,
            });
        }
        let k = grid.flat(i, j);
        if grid.class(k) == NodeClass::Exterior {
            return Err(StateError::UnexpectedNode {
                line: line_num,
                i,
                j,
            });
        }
        if values[k].is_some() {
            return Err(StateError::DuplicateNode {
                line: line_num,
                i,
                j,
            });
        }
        values[k] = Some(v);
    }
    Ok(TaggedFile { t, values })
}

pub fn write_state<W: Write>(w: &mut W, grid: &FlowGrid, state: &FlowState) -> io::Result<()> {
    write_tagged(w, STATE_MAGIC, grid, state.t, |k| {
        (grid.class(k) != NodeClass::Exterior).then(|| state.u[k])
    })
}

/// Read a primal state; every non-exterior node must be present.
pub fn read_state<R: BufRead>(r: &mut R, grid: &FlowGrid) -> Result<FlowState, StateError> {
    let tagged = read_tagged(r, STATE_MAGIC, grid)?;
    let mut u = vec![0.0; grid.node_count()];
    let mut missing = 0usize;
    for k in 0..grid.node_count() {
        match (grid.class(k), tagged.values[k]) {
            (NodeClass::Exterior, _) => {}
            (_, Some(v)) => u[k] = v,
            (_, None) => missing += 1,
        }
    }
    if missing > 0 {
        return Err(StateError::MissingNodes { missing });
    }
    Ok(FlowState { t: tagged.t, u })
}

pub fn write_dual<W: Write>(w: &mut W, grid: &FlowGrid, dual: &DualState) -> io::Result<()> {
    write_tagged(w, DUAL_MAGIC, grid, dual.t, |k| {
        (dual.valid[k] && grid.class(k) != NodeClass::Exterior).then(|| dual.values[k])
    })
}

/// Read a dual state; nodes absent from the file are marked invalid.
pub fn read_dual<R: BufRead>(r: &mut R, grid: &FlowGrid) -> Result<DualState, StateError> {
    let tagged = read_tagged(r, DUAL_MAGIC, grid)?;
    let mut values = vec![0.0; grid.node_count()];
    let mut valid = vec![false; grid.node_count()];
    for k in 0..grid.node_count() {
        if let Some(v) = tagged.values[k] {
            values[k] = v;
            valid[k] = true;
        }
    }
    Ok(DualState {
        t: tagged.t,
        values,
        valid,
        argmax: vec![u32::MAX; grid.node_count()],
    })
}

pub fn save_state(path: &Path, grid: &FlowGrid, state: &FlowState) -> Result<(), StateError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_state(&mut w, grid, state)?;
    w.flush()?;
    Ok(())
}

pub fn load_state(path: &Path, grid: &FlowGrid) -> Result<FlowState, StateError> {
    let mut r = BufReader::new(File::open(path)?);
    read_state(&mut r, grid)
}

pub fn save_dual(path: &Path, grid: &FlowGrid, dual: &DualState) -> Result<(), StateError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dual(&mut w, grid, dual)?;
    w.flush()?;
    Ok(())
}

pub fn load_dual(path: &Path, grid: &FlowGrid) -> Result<DualState, StateError> {
    let mut r = BufReader::new(File::open(path)?);
    read_dual(&mut r, grid)
}
