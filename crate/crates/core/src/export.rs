//! CSV and Matrix Market writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::eigensolver::{EigenPair, FieldSample};
use crate::error::Result;
use crate::mesh::Mesh;
use crate::sparse::SparseMatrix;

fn sci(v: f64) -> String {
    format!("{v:.6e}")
}

fn tags(mesh: &Mesh, node: usize) -> String {
    let t = mesh.tags[node];
    let mut parts = Vec::new();
    if t.left_edge {
        parts.push("left");
    }
    if t.right_edge {
        parts.push("right");
    }
    if t.dirichlet {
        parts.push("dirichlet");
    }
    parts.join("|")
}

/// Writes `nodes.csv` (index,x1,x2,tags) and `triangles.csv`
/// (index,n0,n1,n2,region) into `dir`.
pub fn write_mesh(mesh: &Mesh, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("nodes.csv"))?;
    w.write_record(["index", "x1", "x2", "tags"])?;
    for (i, p) in mesh.nodes.iter().enumerate() {
        w.write_record([i.to_string(), sci(p[0]), sci(p[1]), tags(mesh, i)])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("triangles.csv"))?;
    w.write_record(["index", "n0", "n1", "n2", "region"])?;
    for (i, (t, r)) in mesh.triangles.iter().zip(&mesh.regions).enumerate() {
        w.write_record([
            i.to_string(),
            t[0].to_string(),
            t[1].to_string(),
            t[2].to_string(),
            r.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `re_alpha,im_alpha,residual,shift_re,shift_im`.
pub fn write_eigenvalues(pairs: &[EigenPair], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["re_alpha", "im_alpha", "residual", "shift_re", "shift_im"])?;
    for p in pairs {
        w.write_record([
            sci(p.alpha.re),
            sci(p.alpha.im),
            sci(p.residual),
            sci(p.shift.re),
            sci(p.shift.im),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `x1,x2,re_u,im_u,abs_u`.
pub fn write_field(samples: &[FieldSample], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x1", "x2", "re_u", "im_u", "abs_u"])?;
    for s in samples {
        w.write_record([sci(s.x1), sci(s.x2), sci(s.u.re), sci(s.u.im), sci(s.u.norm())])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `x2,max_abs_u`.
pub fn write_profile(profile: &[(f64, f64)], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x2", "max_abs_u"])?;
    for &(x2, m) in profile {
        w.write_record([sci(x2), sci(m)])?;
    }
    w.flush()?;
    Ok(())
}

/// Matrix Market `coordinate complex general`, 1-based indices.
pub fn write_matrix_market(m: &SparseMatrix, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix coordinate complex general")?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (i, j, v) in m.triplets() {
        writeln!(w, "{} {} {:.17e} {:.17e}", i + 1, j + 1, v.re, v.im)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back a file written by [`write_matrix_market`].
pub fn read_matrix_market(path: &Path) -> Result<SparseMatrix> {
    use crate::error::Error;
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.starts_with('%') && !l.trim().is_empty());
    let header: Vec<usize> = lines
        .next()
        .ok_or_else(|| Error::invalid("empty Matrix Market file"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::invalid("bad Matrix Market size line")))
        .collect::<Result<_>>()?;
    if header.len() != 3 {
        return Err(Error::invalid("bad Matrix Market size line"));
    }
    let mut trip = Vec::with_capacity(header[2]);
    for line in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(Error::invalid(format!("bad Matrix Market entry: {line}")));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|_| Error::invalid(format!("bad number {s}")));
        let i: usize = f[0].parse().map_err(|_| Error::invalid("bad row index"))?;
        let j: usize = f[1].parse().map_err(|_| Error::invalid("bad column index"))?;
        trip.push((i - 1, j - 1, num_complex::Complex64::new(parse(f[2])?, parse(f[3])?)));
    }
    SparseMatrix::from_triplets(header[0], header[1], &trip)
}
