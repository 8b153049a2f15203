//! File formats: grid immersions as text (`GIF1`) or binary (`GIB1`), paths
//! (`GPF1`), and triangle meshes (Wavefront OBJ).
//!
//! Floats are written with 17 significant digits so text files round-trip.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GridImmersion, ParamGrid, TensorField, TensorType};
use crate::path::DiscretePath;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn parse_usize(tok: Option<&str>, what: &str) -> Result<usize> {
    tok.ok_or_else(|| parse_err(format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(format!("bad {what}")))
}

fn header(line: &str, magic: &str, fields: usize) -> Result<Vec<usize>> {
    let mut it = line.split_whitespace();
    if it.next() != Some(magic) {
        return Err(parse_err(format!("expected {magic} header, found '{}'", line.trim())));
    }
    let vals = (0..fields)
        .map(|i| parse_usize(it.next(), &format!("{magic} header field {}", i + 1)))
        .collect::<Result<Vec<_>>>()?;
    if it.next().is_some() {
        return Err(parse_err(format!("trailing tokens in {magic} header")));
    }
    Ok(vals)
}

fn write_body<W: Write>(w: &mut W, f: &GridImmersion) -> Result<()> {
    for node in f.positions().values().chunks_exact(f.dim()) {
        let line: Vec<String> = node.iter().map(|&x| fmt_f64(x)).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

fn read_body<R: BufRead>(r: &mut R, grid: ParamGrid, dim: usize) -> Result<GridImmersion> {
    let mut values = Vec::with_capacity(grid.len() * dim);
    let mut line = String::new();
    for node in 0..grid.len() {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(parse_err(format!("unexpected end of file at node {node}")));
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|_| parse_err(format!("bad number '{tok}'")))?);
        }
        if values.len() - before != dim {
            return Err(parse_err(format!("node {node}: expected {dim} values")));
        }
    }
    GridImmersion::new(TensorField::new(grid, TensorType::VECTOR, dim, values)?)
}

pub fn write_gif1<W: Write>(w: &mut W, f: &GridImmersion) -> Result<()> {
    let g = f.grid();
    writeln!(w, "GIF1 {} {} {}", g.n_u(), g.n_v(), f.dim())?;
    write_body(w, f)
}

pub fn read_gif1<R: BufRead>(r: &mut R, stencil_order: usize) -> Result<GridImmersion> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let h = header(&line, "GIF1", 3)?;
    read_body(r, ParamGrid::with_order(h[0], h[1], stencil_order)?, h[2])
}

pub fn write_gib1<W: Write>(w: &mut W, f: &GridImmersion) -> Result<()> {
    let g = f.grid();
    writeln!(w, "GIB1 {} {} {}", g.n_u(), g.n_v(), f.dim())?;
    for x in f.positions().values() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_gib1<R: BufRead>(r: &mut R, stencil_order: usize) -> Result<GridImmersion> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let h = header(&line, "GIB1", 3)?;
    let grid = ParamGrid::with_order(h[0], h[1], stencil_order)?;
    let count = grid.len() * h[2];
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)
        .map_err(|_| parse_err(format!("GIB1 body shorter than {count} floats")))?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    GridImmersion::new(TensorField::new(grid, TensorType::VECTOR, h[2], values)?)
}

pub fn write_gpf1<W: Write>(w: &mut W, path: &DiscretePath) -> Result<()> {
    let g = path.grid();
    writeln!(w, "GPF1 {} {} {} {}", path.steps(), g.n_u(), g.n_v(), path.dim())?;
    for f in path.slices() {
        write_body(w, f)?;
    }
    Ok(())
}

pub fn read_gpf1<R: BufRead>(r: &mut R, stencil_order: usize) -> Result<DiscretePath> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let h = header(&line, "GPF1", 4)?;
    let grid = ParamGrid::with_order(h[1], h[2], stencil_order)?;
    let slices = (0..=h[0])
        .map(|_| read_body(r, grid, h[3]))
        .collect::<Result<Vec<_>>>()?;
    DiscretePath::new(slices)
}

/// Triangulated periodic mesh: every grid cell becomes two triangles.
pub fn export_obj<W: Write>(w: &mut W, f: &GridImmersion) -> Result<()> {
    if f.dim() != 3 {
        return Err(Error::UnsupportedAmbientDim(f.dim()));
    }
    let g = f.grid();
    for p in f.positions().values().chunks_exact(3) {
        writeln!(w, "v {} {} {}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2]))?;
    }
    for j in 0..g.n_v() as isize {
        for i in 0..g.n_u() as isize {
            let a = g.index(i, j) + 1;
            let b = g.index(i + 1, j) + 1;
            let c = g.index(i + 1, j + 1) + 1;
            let d = g.index(i, j + 1) + 1;
            writeln!(w, "f {a} {b} {c}")?;
            writeln!(w, "f {a} {c} {d}")?;
        }
    }
    Ok(())
}

/// Reads a grid immersion, choosing the format from the header.
pub fn load_immersion(path: &Path, stencil_order: usize) -> Result<GridImmersion> {
    let mut r = BufReader::new(File::open(path)?);
    let magic = {
        let buf = r.fill_buf()?;
        buf.get(..4).map(|b| b.to_vec()).unwrap_or_default()
    };
    match magic.as_slice() {
        b"GIF1" => read_gif1(&mut r, stencil_order),
        b"GIB1" => read_gib1(&mut r, stencil_order),
        _ => Err(parse_err(format!("{}: not a GIF1 or GIB1 file", path.display()))),
    }
}

pub fn load_path(path: &Path, stencil_order: usize) -> Result<DiscretePath> {
    read_gpf1(&mut BufReader::new(File::open(path)?), stencil_order)
}

/// Creates `path` and hands a buffered writer to `write`.
pub fn save_with<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = BufWriter::new(File::create(path)?);
    write(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes a CSV table with a header row.
pub fn write_csv<W: Write>(w: &mut W, header: &str, rows: &[String]) -> Result<()> {
    writeln!(w, "{header}")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    Ok(())
}
