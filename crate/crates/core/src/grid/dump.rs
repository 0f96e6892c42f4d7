//! Plain-text field dumps.
//!
//! ```text
//! halflap-field v1; dims=2; counts=3,2; origins=-1,0; spacings=1,1
//! 0.25
//! ...
//! ```
//!
//! Values follow in row-major order (last axis fastest), one per line. The
//! mask is written to a parallel file with the same header and one `0`/`1`
//! per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Axis, ScalarField, UniformGrid};
use crate::error::{Error, Result};

const MAGIC: &str = "halflap-field v1";

fn join<T: std::fmt::Display>(xs: impl Iterator<Item = T>) -> String {
    xs.map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn header(grid: &UniformGrid) -> String {
    let axes = grid.axes();
    format!(
        "{MAGIC}; dims={}; counts={}; origins={}; spacings={}",
        grid.dim(),
        join(axes.iter().map(|a| a.count)),
        join(axes.iter().map(|a| a.origin)),
        join(axes.iter().map(|a| a.spacing)),
    )
}

fn parse_header(line: &str) -> Result<UniformGrid> {
    let mut parts = line.trim_end().split("; ");
    if parts.next() != Some(MAGIC) {
        return Err(Error::Parse(format!("bad magic in header `{line}`")));
    }
    let mut dims = None;
    let mut counts: Option<Vec<usize>> = None;
    let mut origins: Option<Vec<f64>> = None;
    let mut spacings: Option<Vec<f64>> = None;
    for part in parts {
        let (key, val) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("header entry `{part}` has no `=`")))?;
        let bad = |e: &dyn std::fmt::Display| Error::Parse(format!("header entry `{part}`: {e}"));
        match key {
            "dims" => dims = Some(val.parse::<usize>().map_err(|e| bad(&e))?),
            "counts" => {
                counts = Some(
                    val.split(',')
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| bad(&e))?,
                )
            }
            "origins" => {
                origins = Some(
                    val.split(',')
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| bad(&e))?,
                )
            }
            "spacings" => {
                spacings = Some(
                    val.split(',')
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| bad(&e))?,
                )
            }
            other => return Err(Error::Parse(format!("unknown header key `{other}`"))),
        }
    }
    let missing = |k: &str| Error::Parse(format!("header lacks `{k}`"));
    let dims = dims.ok_or_else(|| missing("dims"))?;
    let counts = counts.ok_or_else(|| missing("counts"))?;
    let origins = origins.ok_or_else(|| missing("origins"))?;
    let spacings = spacings.ok_or_else(|| missing("spacings"))?;
    if counts.len() != dims || origins.len() != dims || spacings.len() != dims {
        return Err(Error::Parse("header lists disagree with dims".into()));
    }
    let axes = (0..dims)
        .map(|a| Axis::new(origins[a], spacings[a], counts[a]))
        .collect();
    UniformGrid::new(axes)
}

/// Write values and mask to two writers.
pub fn write_field<W1: Write, W2: Write>(
    field: &ScalarField,
    mut values: W1,
    mut mask: W2,
) -> Result<()> {
    let head = header(field.grid());
    writeln!(values, "{head}")?;
    writeln!(mask, "{head}")?;
    for (&v, &m) in field.values().iter().zip(field.mask()) {
        writeln!(values, "{v}")?;
        writeln!(mask, "{}", u8::from(m))?;
    }
    values.flush()?;
    mask.flush()?;
    Ok(())
}

/// Read a field written by [`write_field`].
pub fn read_field<R1: Read, R2: Read>(values: R1, mask: R2) -> Result<ScalarField> {
    let mut vl = BufReader::new(values).lines();
    let mut ml = BufReader::new(mask).lines();
    let vh = vl
        .next()
        .ok_or_else(|| Error::Parse("empty value file".into()))??;
    let mh = ml
        .next()
        .ok_or_else(|| Error::Parse("empty mask file".into()))??;
    let grid = parse_header(&vh)?;
    if parse_header(&mh)? != grid {
        return Err(Error::Parse("value and mask headers differ".into()));
    }
    let mut vals = Vec::with_capacity(grid.len());
    for line in vl {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        vals.push(
            line.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("value `{line}`: {e}")))?,
        );
    }
    let mut bits = Vec::with_capacity(grid.len());
    for line in ml {
        let line = line?;
        match line.trim() {
            "" => continue,
            "0" => bits.push(false),
            "1" => bits.push(true),
            other => return Err(Error::Parse(format!("mask entry `{other}`"))),
        }
    }
    if vals.len() != grid.len() || bits.len() != grid.len() {
        return Err(Error::Parse(format!(
            "expected {} entries, found {} values and {} mask bits",
            grid.len(),
            vals.len(),
            bits.len()
        )));
    }
    ScalarField::new(grid, vals, bits)
}

pub fn write_field_dump(field: &ScalarField, values_path: &Path, mask_path: &Path) -> Result<()> {
    write_field(
        field,
        BufWriter::new(File::create(values_path)?),
        BufWriter::new(File::create(mask_path)?),
    )
}

pub fn read_field_dump(values_path: &Path, mask_path: &Path) -> Result<ScalarField> {
    read_field(File::open(values_path)?, File::open(mask_path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let g = UniformGrid::new(vec![Axis::new(-1.0, 1.0, 3), Axis::new(0.0, 0.5, 2)]).unwrap();
        assert_eq!(
            header(&g),
            "halflap-field v1; dims=2; counts=3,2; origins=-1,0; spacings=1,0.5"
        );
    }

    #[test]
    fn rejects_truncated_dump() {
        let text = "halflap-field v1; dims=2; counts=2,2; origins=0,0; spacings=1,1\n1\n2\n";
        let mask = "halflap-field v1; dims=2; counts=2,2; origins=0,0; spacings=1,1\n1\n1\n1\n1\n";
        assert!(read_field(text.as_bytes(), mask.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn dump_round_trips(vals in proptest::collection::vec(-1e6f64..1e6, 12), bits in proptest::collection::vec(any::<bool>(), 12)) {
            let g = UniformGrid::new(vec![Axis::new(-0.3, 0.1, 4), Axis::new(0.0, 0.7, 3)]).unwrap();
            let f = ScalarField::new(g, vals, bits).unwrap();
            let mut v = Vec::new();
            let mut m = Vec::new();
            write_field(&f, &mut v, &mut m).unwrap();
            let back = read_field(v.as_slice(), m.as_slice()).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
