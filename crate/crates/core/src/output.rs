//! Time-series CSV and binary snapshot files.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::state::SimState;

pub const CSV_HEADER: &str =
    "t,S,E_total,E_spin,E_em,E_ex,min_rho,max_rho,max_abs_s,max_m_defect,resE,resH,picard_iters,beta_ok,diss_rate";

pub const SNAPSHOT_MAGIC: &[u8; 6] = b"SDML1\n";
const NAME_LEN: usize = 16;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// One CSV row without the trailing newline.
pub fn csv_row(r: &DiagnosticsRecord) -> String {
    let mut cols: Vec<String> = [
        r.t,
        r.s,
        r.e_total,
        r.e_spin,
        r.e_em,
        r.e_ex,
        r.min_rho,
        r.max_rho,
        r.max_abs_s,
        r.max_m_defect,
        r.res_e,
        r.res_h,
    ]
    .iter()
    .map(|v| num(*v))
    .collect();
    cols.push(r.picard_iters.to_string());
    cols.push(u8::from(r.beta_ok).to_string());
    cols.push(num(r.diss_rate));
    cols.join(",")
}

/// Appends records to a CSV stream, header first.
pub struct CsvWriter<W: Write> {
    out: W,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{CSV_HEADER}")?;
        Ok(Self { out })
    }

    pub fn push(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        writeln!(self.out, "{}", csv_row(r))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn csv_string(records: &[DiagnosticsRecord]) -> String {
    let mut w = CsvWriter::new(Vec::new()).expect("writing to memory");
    for r in records {
        w.push(r).expect("writing to memory");
    }
    String::from_utf8(w.finish().expect("writing to memory")).expect("ascii output")
}

/// A named set of cell arrays on an `nx × ny` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub fields: Vec<(String, Vec<f64>)>,
}

impl Snapshot {
    /// ρ, the three components of s, E, H and m.
    pub fn from_state(state: &SimState, spec: &GridSpec) -> Self {
        let mut fields = vec![("rho".to_string(), state.rho.clone())];
        for (name, f) in [("s", &state.s), ("E", &state.e), ("H", &state.h), ("m", &state.m)] {
            for (c, axis) in ["x", "y", "z"].iter().enumerate() {
                fields.push((format!("{name}_{axis}"), f.comp(c).to_vec()));
            }
        }
        Self {
            nx: spec.nx,
            ny: spec.ny,
            fields,
        }
    }

    pub fn field(&self, name: &str) -> Option<&[f64]> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        let n = self.nx * self.ny;
        out.write_all(SNAPSHOT_MAGIC)?;
        for v in [self.nx, self.ny, self.fields.len()] {
            let v = u32::try_from(v).map_err(|_| Error::Data(format!("{v} does not fit in 32 bits")))?;
            out.write_all(&v.to_le_bytes())?;
        }
        for (name, data) in &self.fields {
            if !name.is_ascii() || name.len() > NAME_LEN || name.contains('\0') {
                return Err(Error::Data(format!("invalid field name {name:?}")));
            }
            if data.len() != n {
                return Err(Error::Shape {
                    expected: n.to_string(),
                    found: data.len().to_string(),
                });
            }
            let mut label = [0u8; NAME_LEN];
            label[..name.len()].copy_from_slice(name.as_bytes());
            out.write_all(&label)?;
            for v in data {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(input: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 6];
        input.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::Data("not an SDML1 snapshot".into()));
        }
        let mut word = [0u8; 4];
        let mut next_u32 = |input: &mut dyn Read| -> Result<usize> {
            input.read_exact(&mut word)?;
            Ok(u32::from_le_bytes(word) as usize)
        };
        let nx = next_u32(input)?;
        let ny = next_u32(input)?;
        let count = next_u32(input)?;
        let n = nx * ny;
        let mut fields = Vec::with_capacity(count);
        let mut buf = [0u8; 8];
        for _ in 0..count {
            let mut label = [0u8; NAME_LEN];
            input.read_exact(&mut label)?;
            let end = label.iter().position(|b| *b == 0).unwrap_or(NAME_LEN);
            let name = std::str::from_utf8(&label[..end])
                .map_err(|_| Error::Data("field name is not ASCII".into()))?
                .to_string();
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                input.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            fields.push((name, data));
        }
        Ok(Self { nx, ny, fields })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut std::io::BufReader::new(File::open(path)?))
    }
}
