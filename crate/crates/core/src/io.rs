//! Artifact writers: JSON reports, CSV time series, binary field frames, and the
//! per-directory manifest that pins every artifact to one configuration hash.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::PathTrajectory;
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

pub const FRAME_MAGIC: [u8; 8] = *b"WFFRAME\0";
pub const FRAME_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Manifest {
    pub config_hash: String,
}

/// Creates `dir` and pins it to `hash`. Refuses a directory already holding
/// artifacts of a different configuration.
pub fn claim_directory(dir: &Path, hash: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(MANIFEST);
    if path.exists() {
        let m: Manifest = read_json(&path)?;
        if m.config_hash != hash {
            return Err(Error::HashMismatch {
                expected: hash.to_string(),
                found: m.config_hash,
            });
        }
        return Ok(());
    }
    write_json(&path, &Manifest { config_hash: hash.to_string() })
}

/// Snapshot time series: `t, step, C0, u_h1` then `Cm, c0m, C0m` per relaxation branch.
pub fn write_trajectory_csv(path: &Path, traj: &PathTrajectory, config_hash: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["t".to_string(), "step".into(), "C0".into(), "u_h1".into()];
    if let Some(first) = traj.snapshots.first() {
        for b in &first.branches {
            for name in ["Cm", "c0m", "C0m"] {
                header.push(format!("{name}[m={}]", b.m));
            }
        }
    }
    header.push("config_hash".into());
    w.write_record(&header).map_err(csv_err)?;
    for s in &traj.snapshots {
        let mut row = vec![s.t.to_string(), s.step.to_string(), s.c0.to_string(), s.u_h1.to_string()];
        for b in &s.branches {
            row.extend([b.cm.to_string(), b.c0m.to_string(), b.c0m_int.to_string()]);
        }
        row.push(config_hash.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Generic numeric table.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Serialization(e.to_string())
}

/// Header of a field-frame file (32 bytes, little endian):
/// magic (8) · version u32 · points u32 · grid hash u64 · frame count u64.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub version: u32,
    pub points: u32,
    pub grid_hash: u64,
    pub frames: u64,
}

impl FrameHeader {
    pub fn to_bytes(&self) -> [u8; 32] {
        let mut b = [0u8; 32];
        b[..8].copy_from_slice(&FRAME_MAGIC);
        b[8..12].copy_from_slice(&self.version.to_le_bytes());
        b[12..16].copy_from_slice(&self.points.to_le_bytes());
        b[16..24].copy_from_slice(&self.grid_hash.to_le_bytes());
        b[24..32].copy_from_slice(&self.frames.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8; 32]) -> Result<Self> {
        if b[..8] != FRAME_MAGIC {
            return Err(Error::Serialization("not a field-frame file".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().unwrap());
        let u64_at = |i: usize| u64::from_le_bytes(b[i..i + 8].try_into().unwrap());
        let h = Self {
            version: u32_at(8),
            points: u32_at(12),
            grid_hash: u64_at(16),
            frames: u64_at(24),
        };
        if h.version != FRAME_VERSION {
            return Err(Error::Serialization(format!("unsupported frame version {}", h.version)));
        }
        Ok(h)
    }
}

/// Writes frames `(t, field)`; each record is `t` followed by the grid values, all `f64`.
pub fn write_frames(path: &Path, grid: &SpatialGrid, frames: &[(f64, &[f64])]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let header = FrameHeader {
        version: FRAME_VERSION,
        points: grid.len() as u32,
        grid_hash: grid.fingerprint(),
        frames: frames.len() as u64,
    };
    w.write_all(&header.to_bytes())?;
    for (t, field) in frames {
        grid.check_len(field)?;
        w.write_all(&t.to_le_bytes())?;
        for v in field.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_frames(path: &Path) -> Result<(FrameHeader, Vec<(f64, Vec<f64>)>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut hb = [0u8; 32];
    r.read_exact(&mut hb)?;
    let h = FrameHeader::from_bytes(&hb)?;
    let mut buf = [0u8; 8];
    let mut next = |r: &mut BufReader<File>| -> Result<f64> {
        r.read_exact(&mut buf)?;
        Ok(f64::from_le_bytes(buf))
    };
    let mut out = Vec::with_capacity(h.frames as usize);
    for _ in 0..h.frames {
        let t = next(&mut r)?;
        let v = (0..h.points).map(|_| next(&mut r)).collect::<Result<Vec<_>>>()?;
        out.push((t, v));
    }
    Ok((h, out))
}

/// `dir/name`.
pub fn artifact(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = SpatialGrid::new(1.0, 5).unwrap();
        let a = [0.0, 1.0, 2.0, 3.0, 4.0];
        let b = [0.5; 5];
        let p = dir.path().join("f.bin");
        write_frames(&p, &g, &[(0.0, &a), (0.25, &b)]).unwrap();
        assert_eq!(fs::metadata(&p).unwrap().len(), 32 + 2 * 6 * 8);
        let (h, frames) = read_frames(&p).unwrap();
        assert_eq!(h.frames, 2);
        assert_eq!(h.grid_hash, g.fingerprint());
        assert_eq!(frames[1], (0.25, b.to_vec()));
    }

    #[test]
    fn manifest_refuses_foreign_hash() {
        let dir = tempfile::tempdir().unwrap();
        claim_directory(dir.path(), "aa").unwrap();
        claim_directory(dir.path(), "aa").unwrap();
        assert!(matches!(claim_directory(dir.path(), "bb"), Err(Error::HashMismatch { .. })));
    }
}
