//! `WVOP` dataset files and per-sample CSV export.
//!
//! Little-endian layout: magic `WVOP`, version `u16`, `n_points` `u32`,
//! sample count `u32`, then per sample the split code `u8`, active `k_max`
//! `u16`, regime code `u8`, seed `i64`, and the `u0`, `c`, `uT` arrays.

use std::path::Path;

use super::{DataError, Dataset, Regime, Result, Sample, SampleMeta, Split};
use crate::binfmt::{FormatError, Reader};
use crate::io::{fmt_f64, write_atomic, Csv};
use crate::solver::{CoefficientField, WaveField};

pub const DATASET_MAGIC: &[u8; 4] = b"WVOP";
const VERSION: u16 = 1;

impl Dataset {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let n = self.n_points;
        let mut out = Vec::with_capacity(14 + self.len() * (12 + 24 * n));
        out.extend_from_slice(DATASET_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&as_u32(n, "n_points")?.to_le_bytes());
        out.extend_from_slice(&as_u32(self.len(), "sample count")?.to_le_bytes());
        for (i, s) in self.samples.iter().enumerate() {
            if s.u0.len() != n || s.c.values().len() != n || s.ut.len() != n {
                return Err(DataError::InvalidSpec(format!(
                    "sample {i} arrays do not match n_points {n}"
                )));
            }
            out.push(s.meta.split.code());
            out.extend_from_slice(&s.meta.k_max.to_le_bytes());
            out.push(s.meta.regime.code());
            out.extend_from_slice(&s.meta.seed.to_le_bytes());
            for arr in [s.u0.values(), s.c.values(), s.ut.values()] {
                for v in arr {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(DATASET_MAGIC)?;
        r.version(VERSION)?;
        let n_points = r.u32()? as usize;
        let count = r.u32()? as usize;
        let mut samples = Vec::with_capacity(count.min(bytes.len() / (12 + 24 * n_points.max(1))));
        for _ in 0..count {
            let split_pos = r.pos();
            let split =
                Split::from_code(r.u8()?).ok_or_else(|| FormatError::invalid(split_pos, "unknown split label"))?;
            let k_max = r.u16()?;
            let regime_pos = r.pos();
            let regime =
                Regime::from_code(r.u8()?).ok_or_else(|| FormatError::invalid(regime_pos, "unknown regime"))?;
            let seed = r.i64()?;
            let u0 = WaveField::new(r.f64_vec(n_points)?);
            let c_pos = r.pos();
            let c =
                CoefficientField::new(r.f64_vec(n_points)?).map_err(|e| FormatError::invalid(c_pos, e.to_string()))?;
            let ut = WaveField::new(r.f64_vec(n_points)?);
            samples.push(Sample {
                u0,
                c,
                ut,
                meta: SampleMeta {
                    seed,
                    split,
                    k_max,
                    regime,
                },
            });
        }
        r.finish()?;
        Ok(Self { n_points, samples })
    }
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    write_atomic(path, &ds.to_bytes()?)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    Dataset::from_bytes(&std::fs::read(path)?)
}

/// One row per grid point of each selected sample.
pub fn export_samples_csv(ds: &Dataset, indices: &[usize], path: &Path) -> Result<()> {
    let mut csv = Csv::new(&["sample", "x", "u0", "c", "uT"]);
    let grid = ds.grid()?;
    for &i in indices {
        let s = ds.samples.get(i).ok_or(DataError::IndexOutOfRange {
            index: i,
            len: ds.len(),
        })?;
        for (p, &x) in grid.xs().iter().enumerate() {
            csv.row(&[
                i.to_string(),
                fmt_f64(x),
                fmt_f64(s.u0.values()[p]),
                fmt_f64(s.c.values()[p]),
                fmt_f64(s.ut.values()[p]),
            ]);
        }
    }
    csv.write(path)?;
    Ok(())
}

fn as_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| DataError::InvalidSpec(format!("{what} {v} exceeds u32")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binfmt::FormatIssue;
    use crate::data::{generate_split, DataConfig, SolverPolicy};
    use crate::solver::Grid;

    fn tiny() -> Dataset {
        let grid = Grid::new(128).unwrap();
        let mut m = DataConfig::default().manifest(Split::Val);
        m.count = 3;
        generate_split(&m, &grid, &SolverPolicy::default(), 1).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ds = tiny();
        let bytes = ds.to_bytes().unwrap();
        let back = Dataset::from_bytes(&bytes).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = tiny().to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[1] = b'?';
        assert!(matches!(
            Dataset::from_bytes(&bad),
            Err(DataError::Format(FormatError {
                offset: 0,
                issue: FormatIssue::BadMagic { .. }
            }))
        ));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(
            Dataset::from_bytes(&bad),
            Err(DataError::Format(FormatError {
                offset: 4,
                issue: FormatIssue::UnsupportedVersion(2)
            }))
        ));
        let record = 12 + 24 * 128;
        let two = &bytes[..bytes.len() - record];
        match Dataset::from_bytes(two) {
            Err(DataError::Format(FormatError {
                offset,
                issue: FormatIssue::Truncated { needed },
            })) => {
                assert_eq!(offset as usize, two.len());
                assert_eq!(needed, 1);
            }
            other => panic!("expected truncation, got {other:?}"),
        }
    }

    #[test]
    fn csv_export_shape_and_precision() {
        let ds = tiny();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        export_samples_csv(&ds, &[1], &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 129);
        assert_eq!(lines[0], "sample,x,u0,c,uT");
        for (row, want) in lines[1..].iter().zip(ds.samples[1].ut.values()) {
            let got: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
            assert_eq!(got.to_bits(), want.to_bits());
        }

        export_samples_csv(&ds, &[], &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 1);
        assert!(matches!(
            export_samples_csv(&ds, &[3], &p),
            Err(DataError::IndexOutOfRange { index: 3, len: 3 })
        ));
    }
}
