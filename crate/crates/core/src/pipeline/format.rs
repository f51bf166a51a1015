//! `BFPD` binary dataset files and the CSV inspection export.
//!
//! Layout, all little-endian:
//!
//! | field            | type        |
//! |------------------|-------------|
//! | magic            | `b"BFPD"`   |
//! | version          | u32 = 1     |
//! | beams            | u32         |
//! | samples          | u32         |
//! | position count   | u32         |
//! | bounds x0 y0 x1 y1 | 4 × f64   |
//! | tx x y           | 2 × f64     |
//! | config digest    | 32 bytes    |
//!
//! followed by, per position, `f32 x, f32 y` and `beams·samples` f32 powers
//! in dBm, row-major, with NaN (always written as `0x7fc00000`) for empty bins.

use std::fmt::Write as _;

use super::dataset::{ConfigDigest, Dataset};
use crate::error::{Error, Result};
use crate::geometry::{Point2, Rect};

pub const DATASET_MAGIC: &[u8; 4] = b"BFPD";
pub const DATASET_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 4 + 6 * 8 + 32;

pub(crate) fn put_f32(out: &mut Vec<u8>, v: f32) {
    let bits = if v.is_nan() {
        f32::NAN.to_bits()
    } else {
        v.to_bits()
    };
    out.extend_from_slice(&bits.to_le_bytes());
}

/// Little-endian cursor over a byte slice with truncation checks.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    kind: &'static str,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8], kind: &'static str) -> Self {
        Reader { buf, pos: 0, kind }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated {} file: needed {n} bytes at offset {}, {} left",
                self.kind,
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Format(format!(
                "{} trailing bytes after {} payload",
                self.remaining(),
                self.kind
            )));
        }
        Ok(())
    }
}

pub fn save_dataset(ds: &Dataset) -> Vec<u8> {
    let width = ds.beams() * ds.samples();
    let mut out = Vec::with_capacity(HEADER_LEN + ds.len() * (8 + 4 * width));
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(&(ds.beams() as u32).to_le_bytes());
    out.extend_from_slice(&(ds.samples() as u32).to_le_bytes());
    out.extend_from_slice(&(ds.len() as u32).to_le_bytes());
    let b = ds.bounds();
    for v in [b.min.x, b.min.y, b.max.x, b.max.y, ds.tx().x, ds.tx().y] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(ds.digest());
    for (i, label) in ds.labels().iter().enumerate() {
        put_f32(&mut out, label[0]);
        put_f32(&mut out, label[1]);
        for &v in &ds.clean_values()[i * width..(i + 1) * width] {
            put_f32(&mut out, v);
        }
    }
    out
}

pub fn load_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader::new(bytes, "dataset");
    let magic = r.take(4)?;
    if magic != DATASET_MAGIC {
        return Err(Error::Format(format!(
            "bad dataset magic {magic:?}, expected \"BFPD\""
        )));
    }
    let version = r.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::UnsupportedVersion {
            kind: "dataset",
            found: version,
            supported: DATASET_VERSION,
        });
    }
    let beams = r.u32()? as usize;
    let samples = r.u32()? as usize;
    let count = r.u32()? as usize;
    let mut hdr = [0.0f64; 6];
    for h in &mut hdr {
        *h = r.f64()?;
    }
    let digest: ConfigDigest = r.take(32)?.try_into().unwrap();
    let width = beams
        .checked_mul(samples)
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let expected = count
        .checked_mul(8 + 4 * width)
        .ok_or_else(|| Error::Format("position count overflow".into()))?;
    if r.remaining() < expected {
        return Err(Error::Format(format!(
            "truncated dataset file: {count} positions need {expected} bytes, {} present",
            r.remaining()
        )));
    }
    let mut labels = Vec::with_capacity(count);
    let mut clean = Vec::with_capacity(count * width);
    for _ in 0..count {
        labels.push([r.f32()?, r.f32()?]);
        for _ in 0..width {
            clean.push(r.f32()?);
        }
    }
    r.finish()?;
    Dataset::from_parts(
        beams,
        samples,
        Rect::new(hdr[0], hdr[1], hdr[2], hdr[3]),
        Point2::new(hdr[4], hdr[5]),
        digest,
        labels,
        clean,
    )
}

/// Loads and warns (without failing) when the stored digest differs from `expected`.
pub fn load_dataset_checked(bytes: &[u8], expected: &ConfigDigest) -> Result<Dataset> {
    let ds = load_dataset(bytes)?;
    if ds.digest() != expected {
        log::warn!("dataset config digest differs from the current configuration");
    }
    Ok(ds)
}

pub const DATASET_CSV_HEADER: &str = "x,y,beam,sample,power_dbm";

/// Long-format export of every non-empty entry.
pub fn dataset_to_csv(ds: &Dataset) -> String {
    let mut out = String::from(DATASET_CSV_HEADER);
    out.push('\n');
    let width = ds.beams() * ds.samples();
    for (i, l) in ds.labels().iter().enumerate() {
        for (k, v) in ds.clean_values()[i * width..(i + 1) * width]
            .iter()
            .enumerate()
        {
            if !v.is_nan() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    l[0],
                    l[1],
                    k / ds.samples(),
                    k % ds.samples(),
                    v
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::NO_DETECTION;

    fn sample() -> Dataset {
        Dataset::from_parts(
            2,
            3,
            Rect::new(-10.0, -20.0, 30.0, 40.0),
            Point2::new(1.5, -2.5),
            [7; 32],
            vec![[1.0, 2.0], [3.0, -4.0]],
            vec![
                -90.0,
                NO_DETECTION,
                -60.5,
                -101.0,
                NO_DETECTION,
                NO_DETECTION,
                NO_DETECTION,
                -70.0,
                -80.0,
                -55.0,
                -99.0,
                NO_DETECTION,
            ],
        )
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let ds = sample();
        let bytes = save_dataset(&ds);
        assert_eq!(&bytes[..4], b"BFPD");
        let back = load_dataset(&bytes).unwrap();
        assert_eq!(back.labels(), ds.labels());
        assert_eq!(save_dataset(&back), bytes);
        for i in 0..2 {
            assert_eq!(back.fingerprint(i), ds.fingerprint(i));
        }
    }

    #[test]
    fn corrupted_magic() {
        let mut bytes = save_dataset(&sample());
        bytes[0] = b'X';
        assert!(matches!(load_dataset(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn future_version() {
        let mut bytes = save_dataset(&sample());
        bytes[4..8].copy_from_slice(&(DATASET_VERSION + 1).to_le_bytes());
        assert!(matches!(
            load_dataset(&bytes),
            Err(Error::UnsupportedVersion { found: 2, .. })
        ));
    }

    #[test]
    fn truncated_and_trailing() {
        let bytes = save_dataset(&sample());
        assert!(matches!(
            load_dataset(&bytes[..bytes.len() - 3]),
            Err(Error::Format(_))
        ));
        assert!(matches!(load_dataset(&bytes[..10]), Err(Error::Format(_))));
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(load_dataset(&longer), Err(Error::Format(_))));
    }

    #[test]
    fn digest_mismatch_only_warns() {
        let bytes = save_dataset(&sample());
        assert!(load_dataset_checked(&bytes, &[0; 32]).is_ok());
    }

    #[test]
    fn csv_lists_detections() {
        let csv = dataset_to_csv(&sample());
        assert_eq!(csv.lines().count(), 1 + 7);
        assert!(csv.contains("\n1,2,0,2,-60.5\n"));
    }
}
