//! Plain-text file formats for instances and tours, plus a TSPLIB EUC_2D
//! subset reader. Coordinates are written with 17 significant digits so a
//! write/read round trip reproduces every f64 exactly.

use std::fs;
use std::path::Path;

use crate::instance::{Instance, Tour};
use crate::{malformed, Error, Result};

/// Writes `n <count>` followed by one `<x> <y>` line per vertex.
pub fn write_instance(inst: &Instance, path: &Path) -> Result<()> {
    let mut out = format!("n {}\n", inst.n());
    for &(x, y) in inst.coords() {
        out.push_str(&format!("{x:.16e} {y:.16e}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads either the plain `n <count>` format or a TSPLIB EUC_2D file.
/// Out-of-square coordinates are normalized into the unit square; the record
/// is kept on the instance for reporting lengths in original units.
pub fn read_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path)?;
    parse_instance(&text)
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let first = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| malformed("instance", "empty file"))?;
    if first.trim_start().starts_with("n ") {
        parse_plain_instance(text)
    } else {
        parse_tsplib_instance(text)
    }
}

fn parse_plain_instance(text: &str) -> Result<Instance> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().unwrap();
    let n: usize = header
        .trim()
        .strip_prefix("n ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| malformed("instance", format!("bad header {header:?}")))?;
    let mut coords = Vec::with_capacity(n);
    for line in lines {
        let mut it = line.split_whitespace();
        let x = parse_coord(it.next(), line)?;
        let y = parse_coord(it.next(), line)?;
        if it.next().is_some() {
            return Err(malformed(
                "instance",
                format!("expected two coordinates per line, got {line:?}"),
            ));
        }
        coords.push((x, y));
    }
    if coords.len() != n {
        return Err(Error::CountMismatch {
            expected: n,
            found: coords.len(),
        });
    }
    Instance::normalized(coords)
}

fn parse_coord(tok: Option<&str>, line: &str) -> Result<f64> {
    let tok =
        tok.ok_or_else(|| malformed("instance", format!("truncated coordinate line {line:?}")))?;
    let v: f64 = tok
        .parse()
        .map_err(|_| malformed("instance", format!("bad number {tok:?}")))?;
    if !v.is_finite() {
        return Err(Error::NonFinite(tok.to_string()));
    }
    Ok(v)
}

/// Minimal TSPLIB reader: honors NAME/COMMENT/TYPE headers, requires
/// EDGE_WEIGHT_TYPE EUC_2D when present, and reads `idx x y` rows from
/// NODE_COORD_SECTION (1-based indices).
fn parse_tsplib_instance(text: &str) -> Result<Instance> {
    let mut dimension: Option<usize> = None;
    let mut coords: Vec<(f64, f64)> = Vec::new();
    let mut in_coords = false;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line == "EOF" {
            continue;
        }
        if in_coords {
            let mut it = line.split_whitespace();
            let _idx = it.next();
            let x = parse_coord(it.next(), line)?;
            let y = parse_coord(it.next(), line)?;
            coords.push((x, y));
            continue;
        }
        let (key, value) = match line.split_once(':') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => (line, ""),
        };
        match key {
            "DIMENSION" => {
                dimension = Some(value.parse().map_err(|_| {
                    malformed("instance", format!("bad DIMENSION {value:?}"))
                })?);
            }
            "EDGE_WEIGHT_TYPE" if value != "EUC_2D" => {
                return Err(malformed(
                    "instance",
                    format!("unsupported EDGE_WEIGHT_TYPE {value:?}"),
                ));
            }
            "NODE_COORD_SECTION" => in_coords = true,
            _ => {}
        }
    }
    let n = dimension.ok_or_else(|| malformed("instance", "missing DIMENSION"))?;
    if coords.len() != n {
        return Err(Error::CountMismatch {
            expected: n,
            found: coords.len(),
        });
    }
    Instance::normalized(coords)
}

/// Tour file: `n <count>`, the zero-based visiting order, then
/// `length <value>`.
pub fn write_tour(tour: &Tour, length: f64, path: &Path) -> Result<()> {
    let order: Vec<String> = tour.order().iter().map(|v| v.to_string()).collect();
    let out = format!("n {}\n{}\nlength {:.16e}\n", tour.len(), order.join(" "), length);
    fs::write(path, out)?;
    Ok(())
}

pub fn read_tour(path: &Path) -> Result<(Tour, f64)> {
    let text = fs::read_to_string(path)?;
    parse_tour(&text)
}

pub fn parse_tour(text: &str) -> Result<(Tour, f64)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| malformed("tour", "empty file"))?;
    let n: usize = header
        .trim()
        .strip_prefix("n ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| malformed("tour", format!("bad header {header:?}")))?;
    let order_line = lines
        .next()
        .ok_or_else(|| malformed("tour", "missing order line"))?;
    let order: Vec<u32> = order_line
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| malformed("tour", format!("bad index {t:?}")))
        })
        .collect::<Result<_>>()?;
    let len_line = lines
        .next()
        .ok_or_else(|| malformed("tour", "missing length line"))?;
    let length: f64 = len_line
        .trim()
        .strip_prefix("length ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| malformed("tour", format!("bad length line {len_line:?}")))?;
    if !length.is_finite() {
        return Err(Error::NonFinite(len_line.to_string()));
    }
    let tour = Tour::new(order, n)?;
    Ok((tour, length))
}
