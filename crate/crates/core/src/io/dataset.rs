//! `TXNP1` patch dataset files.
//!
//! Layout (little-endian): magic `TXNP1`, version `u16`, record count
//! `u64`, grid size `N: u16`, pitch `d: f32`, channels `C: u16`, flags
//! `u16`; then per record: position `3 × f32`, frame `i` and `j`
//! `6 × f32`, face `u32`, mask bitset `⌈N²/8⌉` bytes (bit `k` of byte
//! `k / 8` is cell `k`, least significant first), values `N·N·C × f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::rosy::SurfaceSample;
use crate::signal::{SignalPatch, SignalSource};

const MAGIC: &[u8; 5] = b"TXNP1";
const VERSION: u16 = 1;
/// Bytes before the first record.
pub const HEADER_LEN: u64 = 5 + 2 + 8 + 2 + 4 + 2 + 2;

/// Low bits of the flags field name the signal source.
pub fn source_flag(source: &SignalSource) -> u16 {
    match source {
        SignalSource::VertexColor => 0,
        SignalSource::TextureAtlas => 1,
        SignalSource::Normal => 2,
        SignalSource::Constant(_) => 3,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchRecord {
    pub position: [f32; 3],
    /// `i` then `j` of the sample frame.
    pub frame: [f32; 6],
    pub face: u32,
    pub mask: Vec<bool>,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchDataset {
    pub n: u16,
    pub d: f32,
    pub channels: u16,
    pub flags: u16,
    pub records: Vec<PatchRecord>,
}

impl PatchDataset {
    pub fn new(n: u16, d: f32, channels: u16, flags: u16) -> Self {
        PatchDataset {
            n,
            d,
            channels,
            flags,
            records: Vec::new(),
        }
    }

    /// Pairs each patch with the sample it was taken at.
    pub fn from_patches(
        samples: &[SurfaceSample],
        patches: &[SignalPatch],
        n: usize,
        d: f64,
        source: &SignalSource,
    ) -> Result<Self> {
        if samples.len() != patches.len() {
            return Err(Error::Dimension(format!(
                "{} samples for {} patches",
                samples.len(),
                patches.len()
            )));
        }
        let mut ds = PatchDataset::new(n as u16, d as f32, source.channels() as u16, source_flag(source));
        for (s, p) in samples.iter().zip(patches) {
            if p.n != n || p.channels != source.channels() {
                return Err(Error::Dimension("patch size differs from dataset header".into()));
            }
            let (i, j) = (p.frame.i, p.frame.j);
            ds.records.push(PatchRecord {
                position: [s.position.x as f32, s.position.y as f32, s.position.z as f32],
                frame: [i.x, i.y, i.z, j.x, j.y, j.z].map(|v| v as f32),
                face: s.face as u32,
                mask: p.mask.clone(),
                values: p.values.clone(),
            });
        }
        Ok(ds)
    }

    pub fn cells(&self) -> usize {
        self.n as usize * self.n as usize
    }

    pub fn record_len(&self) -> u64 {
        let cells = self.cells() as u64;
        12 + 24 + 4 + cells.div_ceil(8) + 4 * cells * self.channels as u64
    }

    /// Exact file size implied by the header.
    pub fn file_len(&self) -> u64 {
        HEADER_LEN + self.records.len() as u64 * self.record_len()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::Open {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u16::<LittleEndian>(VERSION)?;
        w.write_u64::<LittleEndian>(self.records.len() as u64)?;
        w.write_u16::<LittleEndian>(self.n)?;
        w.write_f32::<LittleEndian>(self.d)?;
        w.write_u16::<LittleEndian>(self.channels)?;
        w.write_u16::<LittleEndian>(self.flags)?;
        let cells = self.cells();
        let values = cells * self.channels as usize;
        for r in &self.records {
            if r.mask.len() != cells || r.values.len() != values {
                return Err(Error::Dimension("record size differs from header".into()));
            }
            for v in r.position.iter().chain(&r.frame) {
                w.write_f32::<LittleEndian>(*v)?;
            }
            w.write_u32::<LittleEndian>(r.face)?;
            let mut bits = vec![0u8; cells.div_ceil(8)];
            for (k, &m) in r.mask.iter().enumerate() {
                if m {
                    bits[k / 8] |= 1 << (k % 8);
                }
            }
            w.write_all(&bits)?;
            for v in &r.values {
                w.write_f32::<LittleEndian>(*v)?;
            }
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::Open {
            path: path.to_path_buf(),
            source: e,
        })?;
        let actual = file.metadata()?.len();
        let ds = Self::read_from(&mut BufReader::new(file))?;
        if ds.file_len() != actual {
            return Err(Error::Format(format!(
                "{}: {actual} bytes, header implies {}",
                path.display(),
                ds.file_len()
            )));
        }
        Ok(ds)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a patch dataset".into()));
        }
        let version = r.read_u16::<LittleEndian>()?;
        if version != VERSION {
            return Err(Error::Format(format!("dataset version {version} unsupported")));
        }
        let count = r.read_u64::<LittleEndian>()?;
        let n = r.read_u16::<LittleEndian>()?;
        let d = r.read_f32::<LittleEndian>()?;
        let channels = r.read_u16::<LittleEndian>()?;
        let flags = r.read_u16::<LittleEndian>()?;
        let mut ds = PatchDataset::new(n, d, channels, flags);
        let cells = ds.cells();
        let mut bits = vec![0u8; cells.div_ceil(8)];
        for _ in 0..count {
            let mut head = [0f32; 9];
            r.read_f32_into::<LittleEndian>(&mut head)
                .map_err(|_| Error::Format("truncated record".into()))?;
            let face = r.read_u32::<LittleEndian>()?;
            r.read_exact(&mut bits)?;
            let mask = (0..cells).map(|k| bits[k / 8] >> (k % 8) & 1 == 1).collect();
            let mut values = vec![0f32; cells * channels as usize];
            r.read_f32_into::<LittleEndian>(&mut values)
                .map_err(|_| Error::Format("truncated record".into()))?;
            ds.records.push(PatchRecord {
                position: [head[0], head[1], head[2]],
                frame: [head[3], head[4], head[5], head[6], head[7], head[8]],
                face,
                mask,
                values,
            });
        }
        Ok(ds)
    }

    /// Fraction of valid cells over all records.
    pub fn mask_density(&self) -> f64 {
        let total = self.records.len() * self.cells();
        let valid: usize = self.records.iter().map(|r| r.mask.iter().filter(|&&m| m).count()).sum();
        valid as f64 / total.max(1) as f64
    }
}
