//! ASCII PLY with a single `vertex` element carrying `x y z`.
//!
//! Values are written with Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces every coordinate bit-for-bit.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Frame, PointCloud, Vec3};

pub fn to_string(cloud: &PointCloud) -> String {
    let mut s = String::with_capacity(64 + cloud.len() * 32);
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", cloud.len());
    s.push_str("property float x\nproperty float y\nproperty float z\nend_header\n");
    for p in &cloud.points {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    s
}

pub fn write<W: Write>(mut w: W, cloud: &PointCloud) -> Result<()> {
    w.write_all(to_string(cloud).as_bytes())?;
    Ok(())
}

pub fn write_file(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    std::fs::write(path, to_string(cloud))?;
    Ok(())
}

/// Reads an ASCII PLY vertex list. Extra vertex properties and `comment`
/// lines are tolerated; binary encodings are rejected.
pub fn read<R: BufRead>(r: R, frame: Frame) -> Result<PointCloud> {
    let mut lines = r.lines().enumerate();
    let next = |lines: &mut std::iter::Enumerate<std::io::Lines<R>>| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, l)) => Ok((i + 1, l?)),
            None => Err(Error::Parse {
                line: 0,
                msg: "unexpected end of file".into(),
            }),
        }
    };

    let (line, magic) = next(&mut lines)?;
    if magic.trim() != "ply" {
        return Err(Error::Parse { line, msg: "missing 'ply' magic".into() });
    }

    let mut vertex_count: Option<usize> = None;
    let mut in_vertex = false;
    let mut props: Vec<String> = Vec::new();
    loop {
        let (line, text) = next(&mut lines)?;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        match tokens.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => {}
            ["format", other, ..] => {
                return Err(Error::Parse { line, msg: format!("unsupported format '{other}'") })
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, n] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    vertex_count = Some(n.parse().map_err(|_| Error::Parse {
                        line,
                        msg: format!("bad vertex count '{n}'"),
                    })?);
                }
            }
            ["property", .., name] if in_vertex => props.push(name.to_string()),
            ["property", ..] => {}
            _ => return Err(Error::Parse { line, msg: format!("unexpected header line '{text}'") }),
        }
    }

    let n = vertex_count.ok_or(Error::Parse { line: 0, msg: "no vertex element".into() })?;
    let col = |axis: &str| {
        props.iter().position(|p| p == axis).ok_or(Error::Parse {
            line: 0,
            msg: format!("missing property '{axis}'"),
        })
    };
    let (ix, iy, iz) = (col("x")?, col("y")?, col("z")?);

    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let (line, text) = next(&mut lines)?;
        let vals: Vec<f64> = text
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        if vals.len() < props.len() {
            return Err(Error::Parse { line, msg: "too few vertex values".into() });
        }
        let p = Vec3::new(vals[ix], vals[iy], vals[iz]);
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::Parse { line, msg: "non-finite coordinate".into() });
        }
        points.push(p);
    }
    Ok(PointCloud::new(points, frame))
}

pub fn read_file(path: impl AsRef<Path>, frame: Frame) -> Result<PointCloud> {
    let f = std::fs::File::open(path)?;
    read(std::io::BufReader::new(f), frame)
}
