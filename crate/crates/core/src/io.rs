//! On-disk formats: CVF1 binary fields, sample catalogs and mask lists.
//!
//! CVF1 layout: magic `CVF1`, `u32` rows, `u32` cols (little endian), then
//! rows*cols pairs of little-endian `f64` (re, im) in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, GridIndex, C64};
use crate::sampling::{Sample, SampleSet};

pub const CVF1_MAGIC: &[u8; 4] = b"CVF1";

pub fn write_cvf<W: Write>(mut w: W, field: &ComplexField) -> Result<()> {
    let rows = u32::try_from(field.rows())
        .map_err(|_| Error::Shape("row count exceeds u32".into()))?;
    let cols = u32::try_from(field.cols())
        .map_err(|_| Error::Shape("column count exceeds u32".into()))?;
    w.write_all(CVF1_MAGIC)?;
    w.write_all(&rows.to_le_bytes())?;
    w.write_all(&cols.to_le_bytes())?;
    for z in field.as_slice() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cvf<R: Read>(mut r: R) -> Result<ComplexField> {
    let fmt_err = |message: String| Error::Format {
        format: "CVF1",
        message,
    };
    let mut head = [0u8; 12];
    r.read_exact(&mut head)
        .map_err(|e| fmt_err(format!("truncated header: {e}")))?;
    if &head[..4] != CVF1_MAGIC {
        return Err(fmt_err(format!("bad magic {:?}", &head[..4])));
    }
    let rows = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    if rows == 0 || cols == 0 {
        return Err(fmt_err(format!("empty grid {rows}x{cols}")));
    }
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| fmt_err("grid size overflows".into()))?;
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() != n * 16 {
        return Err(fmt_err(format!(
            "expected {} payload bytes, found {}",
            n * 16,
            buf.len()
        )));
    }
    let data = buf
        .chunks_exact(16)
        .map(|c| {
            C64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    ComplexField::new(rows, cols, data)
}

pub fn save_cvf(path: impl AsRef<Path>, field: &ComplexField) -> Result<()> {
    write_cvf(BufWriter::new(File::create(path)?), field)
}

pub fn load_cvf(path: impl AsRef<Path>) -> Result<ComplexField> {
    read_cvf(BufReader::new(File::open(path)?))
}

/// Column names used for the value pair of a sample catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleHeader {
    /// `row,col,re,im`
    ReIm,
    /// `row,col,e1,e2`, the ellipticity catalog layout.
    Ellipticity,
}

impl SampleHeader {
    fn names(self) -> [&'static str; 4] {
        match self {
            SampleHeader::ReIm => ["row", "col", "re", "im"],
            SampleHeader::Ellipticity => ["row", "col", "e1", "e2"],
        }
    }
}

pub fn write_samples_csv<W: Write>(w: W, samples: &SampleSet, header: SampleHeader) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header.names())?;
    for s in samples.entries() {
        wr.write_record([
            s.index.row.to_string(),
            s.index.col.to_string(),
            format_f64(s.value.re),
            format_f64(s.value.im),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads a sample catalog; both `row,col,re,im` and `row,col,e1,e2` headers are accepted.
pub fn read_samples_csv<R: Read>(r: R, rows: usize, cols: usize) -> Result<SampleSet> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    let accepted = [SampleHeader::ReIm, SampleHeader::Ellipticity];
    if !accepted.iter().any(|h| header == h.names()) {
        return Err(Error::Format {
            format: "sample CSV",
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut entries = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> Result<&str> {
            rec.get(i).ok_or_else(|| Error::Format {
                format: "sample CSV",
                message: format!("record {} has {} fields", line + 1, rec.len()),
            })
        };
        let index = GridIndex::new(parse(field(0)?, line)?, parse(field(1)?, line)?);
        let value = C64::new(parse(field(2)?, line)?, parse(field(3)?, line)?);
        entries.push(Sample { index, value });
    }
    SampleSet::new(rows, cols, entries)
}

pub fn write_mask_csv<W: Write>(w: W, mask: &[GridIndex]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["row", "col"])?;
    for idx in mask {
        wr.write_record([idx.row.to_string(), idx.col.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_mask_csv<R: Read>(r: R) -> Result<Vec<GridIndex>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    if header != ["row", "col"] {
        return Err(Error::Format {
            format: "mask CSV",
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut out = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Format {
                format: "mask CSV",
                message: format!("record {} has {} fields", line + 1, rec.len()),
            });
        }
        out.push(GridIndex::new(parse(&rec[0], line)?, parse(&rec[1], line)?));
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Format {
        format: "CSV",
        message: format!("cannot parse {s:?} on record {}", line + 1),
    })
}

/// Shortest representation that round-trips exactly.
pub(crate) fn format_f64(x: f64) -> String {
    format!("{x:?}")
}
