//! Little-endian binary encodings.
//!
//! Every format starts with a 4-byte ASCII magic and a `u32` version (always 1),
//! followed by `u32` (or `u64`) dimensions and a flat payload. Decoders check
//! every type invariant and report violations with the byte offset at which
//! they were detected. Encoders produce the single canonical byte layout, so
//! `encode(decode(b)) == b` for any `b` the decoder accepts unchanged.

use std::path::Path;

use thiserror::Error;

use super::{
    Correspondence, CorrespondenceTable, FeatureMatrix, ImageFeatureStack, InstanceRaster, ScenePrediction,
    SuperpointMask, ViewDims, BACKGROUND,
};
use crate::superpoint::{Edge, EdgeList};

pub const VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("bad magic at byte offset {offset}: expected {expected:?}, found {found:?}")]
    BadMagic { offset: u64, expected: String, found: String },

    #[error("unsupported version {found} at byte offset {offset} (expected {VERSION})")]
    UnsupportedVersion { offset: u64, found: u32 },

    #[error("truncated input at byte offset {offset}: {needed} more bytes needed")]
    Truncated { offset: u64, needed: u64 },

    #[error("dimension overflow at byte offset {offset}: {detail}")]
    DimensionOverflow { offset: u64, detail: String },

    #[error("non-finite float at byte offset {offset}")]
    NonFinite { offset: u64 },

    #[error("label out of range at byte offset {offset}: {detail}")]
    LabelRange { offset: u64, detail: String },

    #[error("labels not contiguous at byte offset {offset}: {detail}")]
    NonContiguous { offset: u64, detail: String },

    #[error("invalid value at byte offset {offset}: {detail}")]
    InvalidValue { offset: u64, detail: String },

    #[error("{count} trailing bytes at byte offset {offset}")]
    TrailingBytes { offset: u64, count: u64 },

    #[error("malformed PLY at byte offset {offset}: {detail}")]
    Ply { offset: u64, detail: String },
}

impl CodecError {
    pub fn offset(&self) -> u64 {
        match self {
            CodecError::BadMagic { offset, .. }
            | CodecError::UnsupportedVersion { offset, .. }
            | CodecError::Truncated { offset, .. }
            | CodecError::DimensionOverflow { offset, .. }
            | CodecError::NonFinite { offset }
            | CodecError::LabelRange { offset, .. }
            | CodecError::NonContiguous { offset, .. }
            | CodecError::InvalidValue { offset, .. }
            | CodecError::TrailingBytes { offset, .. }
            | CodecError::Ply { offset, .. } => *offset,
        }
    }

    /// Stable machine-readable name of the error class.
    pub fn class(&self) -> &'static str {
        match self {
            CodecError::BadMagic { .. } => "bad_magic",
            CodecError::UnsupportedVersion { .. } => "unsupported_version",
            CodecError::Truncated { .. } => "truncated",
            CodecError::DimensionOverflow { .. } => "dimension_overflow",
            CodecError::NonFinite { .. } => "non_finite",
            CodecError::LabelRange { .. } => "label_range",
            CodecError::NonContiguous { .. } => "non_contiguous",
            CodecError::InvalidValue { .. } => "invalid_value",
            CodecError::TrailingBytes { .. } => "trailing_bytes",
            CodecError::Ply { .. } => "ply",
        }
    }
}

pub type CodecResult<T> = Result<T, CodecError>;

/// A value with a canonical binary file encoding.
pub trait Codec: Sized {
    const MAGIC: &'static [u8; 4];

    fn encode(&self) -> CodecResult<Vec<u8>>;

    fn decode(bytes: &[u8]) -> CodecResult<Self>;
}

pub fn load<T: Codec>(path: impl AsRef<Path>) -> crate::Result<T> {
    let bytes = std::fs::read(path)?;
    Ok(T::decode(&bytes)?)
}

pub fn save<T: Codec>(path: impl AsRef<Path>, value: &T) -> crate::Result<()> {
    std::fs::write(path, value.encode()?)?;
    Ok(())
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn offset(&self) -> u64 {
        self.pos as u64
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> CodecResult<&'a [u8]> {
        if self.remaining() < n {
            return Err(CodecError::Truncated {
                offset: self.offset(),
                needed: (n - self.remaining()) as u64,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn header(&mut self, magic: &[u8; 4]) -> CodecResult<()> {
        let found = self.take(4).map_err(|_| CodecError::BadMagic {
            offset: 0,
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(self.buf).into_owned(),
        })?;
        if found != magic {
            return Err(CodecError::BadMagic {
                offset: 0,
                expected: String::from_utf8_lossy(magic).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        let at = self.offset();
        let version = self.u32()?;
        if version != VERSION {
            return Err(CodecError::UnsupportedVersion { offset: at, found: version });
        }
        Ok(())
    }

    pub(crate) fn u8(&mut self) -> CodecResult<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> CodecResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> CodecResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn i32(&mut self) -> CodecResult<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> CodecResult<f32> {
        let at = self.offset();
        let v = f32::from_le_bytes(self.take(4)?.try_into().unwrap());
        if !v.is_finite() {
            return Err(CodecError::NonFinite { offset: at });
        }
        Ok(v)
    }

    /// Verifies that `count` records of `record_size` bytes are present, so
    /// that payload vectors are never allocated from a corrupt header alone.
    fn expect_payload(&self, count: u64, record_size: u64, what: &str) -> CodecResult<usize> {
        let bytes = count.checked_mul(record_size).ok_or_else(|| CodecError::DimensionOverflow {
            offset: self.offset(),
            detail: format!("{what}: {count} records of {record_size} bytes"),
        })?;
        if bytes > self.remaining() as u64 {
            return Err(CodecError::Truncated {
                offset: self.offset(),
                needed: bytes - self.remaining() as u64,
            });
        }
        Ok(count as usize)
    }

    fn finish(self) -> CodecResult<()> {
        if self.remaining() != 0 {
            return Err(CodecError::TrailingBytes {
                offset: self.offset(),
                count: self.remaining() as u64,
            });
        }
        Ok(())
    }
}

fn product(dims: &[u32], offset: u64, what: &str) -> CodecResult<u64> {
    dims.iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
        .filter(|&p| usize::try_from(p).is_ok())
        .ok_or_else(|| CodecError::DimensionOverflow {
            offset,
            detail: format!("{what} {dims:?}"),
        })
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new(magic: &[u8; 4], capacity: usize) -> Self {
        let mut buf = Vec::with_capacity(capacity + 8);
        buf.extend_from_slice(magic);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        Self { buf }
    }

    fn len(&mut self, n: usize, what: &str) -> CodecResult<()> {
        let v = u32::try_from(n).map_err(|_| CodecError::DimensionOverflow {
            offset: self.buf.len() as u64,
            detail: format!("{what} = {n} does not fit in u32"),
        })?;
        self.u32(v);
        Ok(())
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn i32(&mut self, v: i32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn finish(self) -> Vec<u8> {
        self.buf
    }
}

impl Codec for CorrespondenceTable {
    const MAGIC: &'static [u8; 4] = b"OV3C";

    fn encode(&self) -> CodecResult<Vec<u8>> {
        let mut w = Writer::new(Self::MAGIC, 8 + 8 * self.view_count() + 12 * self.len());
        w.len(self.len(), "N")?;
        w.len(self.view_count(), "V")?;
        for d in self.view_dims() {
            w.u32(d.height);
            w.u32(d.width);
        }
        for e in self.entries() {
            w.u32(e.view);
            w.f32(e.x);
            w.f32(e.y);
        }
        Ok(w.finish())
    }

    fn decode(bytes: &[u8]) -> CodecResult<Self> {
        let mut r = Reader::new(bytes);
        r.header(Self::MAGIC)?;
        let n = r.u32()?;
        let v = r.u32()?;
        let views = r.expect_payload(v as u64, 8, "view dims")?;
        let mut dims = Vec::with_capacity(views);
        for _ in 0..views {
            let at = r.offset();
            let h = r.u32()?;
            let wd = r.u32()?;
            if h == 0 || wd == 0 {
                return Err(CodecError::InvalidValue {
                    offset: at,
                    detail: format!("view size {h}x{wd} must be positive"),
                });
            }
            dims.push(ViewDims::new(h, wd));
        }
        let count = r.expect_payload(n as u64, 12, "correspondence records")?;
        let mut entries = Vec::with_capacity(count);
        for i in 0..count {
            let at = r.offset();
            let view = r.u32()?;
            if view >= v {
                return Err(CodecError::LabelRange {
                    offset: at,
                    detail: format!("point {i} references view {view} of {v}"),
                });
            }
            let at = r.offset();
            let x = r.f32()?;
            let y = r.f32()?;
            if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
                return Err(CodecError::InvalidValue {
                    offset: at,
                    detail: format!("point {i} coordinates ({x}, {y}) outside [0, 1]"),
                });
            }
            entries.push(Correspondence { view, x, y });
        }
        r.finish()?;
        Ok(CorrespondenceTable { entries, view_dims: dims })
    }
}

impl Codec for InstanceRaster {
    const MAGIC: &'static [u8; 4] = b"OV2M";

    fn encode(&self) -> CodecResult<Vec<u8>> {
        let mut w = Writer::new(Self::MAGIC, 12 + 4 * self.labels().len());
        w.len(self.views(), "V")?;
        w.len(self.height(), "H")?;
        w.len(self.width(), "W")?;
        for &l in self.labels() {
            w.i32(l);
        }
        Ok(w.finish())
    }

    /// Decodes and compacts per-view ids; see [`decode_raster`] for the flag.
    fn decode(bytes: &[u8]) -> CodecResult<Self> {
        decode_raster(bytes).map(|(r, _)| r)
    }
}

/// Decodes an OV2M raster. Views whose ids are not contiguous from 0 are
/// compacted (relative order kept) and the returned flag is set.
pub fn decode_raster(bytes: &[u8]) -> CodecResult<(InstanceRaster, bool)> {
    let mut r = Reader::new(bytes);
    r.header(InstanceRaster::MAGIC)?;
    let at = r.offset();
    let v = r.u32()?;
    let h = r.u32()?;
    let wd = r.u32()?;
    let total = product(&[v, h, wd], at, "raster")?;
    let count = r.expect_payload(total, 4, "raster labels")?;
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let at = r.offset();
        let l = r.i32()?;
        if l < BACKGROUND {
            return Err(CodecError::LabelRange {
                offset: at,
                detail: format!("instance id {l} is below the background value -1"),
            });
        }
        labels.push(l);
    }
    r.finish()?;
    let (raster, changed) = InstanceRaster::relabeled(v as usize, h as usize, wd as usize, labels)
        .expect("labels validated above");
    Ok((raster, changed))
}

impl Codec for FeatureMatrix {
    const MAGIC: &'static [u8; 4] = b"OVFM";

    fn encode(&self) -> CodecResult<Vec<u8>> {
        let mut w = Writer::new(Self::MAGIC, 8 + 4 * self.data().len());
        w.len(self.rows(), "rows")?;
        w.len(self.cols(), "cols")?;
        for &x in self.data() {
            w.f32(x);
        }
        Ok(w.finish())
    }

    fn decode(bytes: &[u8]) -> CodecResult<Self> {
        let mut r = Reader::new(bytes);
        r.header(Self::MAGIC)?;
        let at = r.offset();
        let rows = r.u32()?;
        let cols = r.u32()?;
        let total = product(&[rows, cols], at, "matrix")?;
        let count = r.expect_payload(total, 4, "matrix entries")?;
        let data = (0..count).map(|_| r.f32()).collect::<CodecResult<Vec<_>>>()?;
        r.finish()?;
        Ok(FeatureMatrix { rows: rows as usize, cols: cols as usize, data })
    }
}

impl Codec for ImageFeatureStack {
    const MAGIC: &'static [u8; 4] = b"OVIF";

    fn encode(&self) -> CodecResult<Vec<u8>> {
        let mut w = Writer::new(Self::MAGIC, 16 + 4 * self.data().len());
        w.len(self.views(), "V")?;
        w.len(self.height(), "h")?;
        w.len(self.width(), "w")?;
        w.len(self.channels(), "C")?;
        for &x in self.data() {
            w.f32(x);
        }
        Ok(w.finish())
    }

    fn decode(bytes: &[u8]) -> CodecResult<Self> {
        let mut r = Reader::new(bytes);
        r.header(Self::MAGIC)?;
        let at = r.offset();
        let v = r.u32()?;
        let h = r.u32()?;
        let wd = r.u32()?;
        let c = r.u32()?;
        let total = product(&[v, h, wd, c], at, "feature stack")?;
        let count = r.expect_payload(total, 4, "feature values")?;
        let data = (0..count).map(|_| r.f32()).collect::<CodecResult<Vec<_>>>()?;
        r.finish()?;
        Ok(ImageFeatureStack {
            views: v as usize,
            height: h as usize,
            width: wd as usize,
            channels: c as usize,
            data,
        })
    }
}

impl Codec for SuperpointMask {
    const MAGIC: &'static [u8; 4] = b"OVSP";

    fn encode(&self) -> CodecResult<Vec<u8>> {
        let mut w = Writer::new(Self::MAGIC, 8 + 4 * self.point_count());
        w.len(self.point_count(), "N")?;
        w.len(self.superpoint_count(), "n")?;
        for &l in self.labels() {
            w.u32(l);
        }
        Ok(w.finish())
    }

    fn decode(bytes: &[u8]) -> CodecResult<Self> {
        decode_superpoints(bytes, true)
    }
}

/// Decodes an OVSP file. In strict mode every label must be `< n` and every
/// superpoint non-empty; otherwise labels are compacted and `n` re-derived.
pub fn decode_superpoints(bytes: &[u8], strict: bool) -> CodecResult<SuperpointMask> {
    let mut r = Reader::new(bytes);
    r.header(SuperpointMask::MAGIC)?;
    let n_points = r.u32()?;
    let n_sp = r.u32()?;
    let labels_at = r.offset();
    let count = r.expect_payload(n_points as u64, 4, "superpoint labels")?;
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let at = r.offset();
        let l = r.u32()?;
        if strict && l >= n_sp {
            return Err(CodecError::LabelRange {
                offset: at,
                detail: format!("point {i} has label {l} but n = {n_sp}"),
            });
        }
        labels.push(l);
    }
    r.finish()?;
    if !strict {
        return Ok(SuperpointMask::compacted(&labels));
    }
    let mut used = vec![false; n_sp as usize];
    for &l in &labels {
        used[l as usize] = true;
    }
    if let Some(missing) = used.iter().position(|u| !u) {
        return Err(CodecError::NonContiguous {
            offset: labels_at,
            detail: format!("superpoint {missing} of n = {n_sp} has no points"),
        });
    }
    Ok(SuperpointMask::from_parts_unchecked(labels, n_sp as usize))
}

impl Codec for EdgeList {
    const MAGIC: &'static [u8; 4] = b"OVEG";

    fn encode(&self) -> CodecResult<Vec<u8>> {
        let mut w = Writer::new(Self::MAGIC, 8 + 12 * self.len());
        w.buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for e in self.edges() {
            w.u32(e.i);
            w.u32(e.j);
            w.f32(e.w);
        }
        Ok(w.finish())
    }

    fn decode(bytes: &[u8]) -> CodecResult<Self> {
        let mut r = Reader::new(bytes);
        r.header(Self::MAGIC)?;
        let e = r.u64()?;
        let start = r.offset();
        let count = r.expect_payload(e, 12, "edges")?;
        let mut edges = Vec::with_capacity(count);
        for k in 0..count {
            let at = r.offset();
            let i = r.u32()?;
            let j = r.u32()?;
            if i >= j {
                return Err(CodecError::InvalidValue {
                    offset: at,
                    detail: format!("edge {k} ({i}, {j}) must satisfy i < j"),
                });
            }
            let at = r.offset();
            let w = r.f32()?;
            if !(0.0..=2.0).contains(&w) {
                return Err(CodecError::InvalidValue {
                    offset: at,
                    detail: format!("edge {k} weight {w} outside [0, 2]"),
                });
            }
            edges.push(Edge { i, j, w });
        }
        r.finish()?;
        let mut order: Vec<usize> = (0..edges.len()).collect();
        order.sort_unstable_by_key(|&k| (edges[k].i, edges[k].j, k));
        if let Some(pair) = order
            .windows(2)
            .find(|p| (edges[p[0]].i, edges[p[0]].j) == (edges[p[1]].i, edges[p[1]].j))
        {
            let dup = pair[1];
            return Err(CodecError::InvalidValue {
                offset: start + 12 * dup as u64,
                detail: format!("duplicate edge ({}, {})", edges[dup].i, edges[dup].j),
            });
        }
        Ok(EdgeList::from_parts_unchecked(edges))
    }
}

impl Codec for ScenePrediction {
    const MAGIC: &'static [u8; 4] = b"OVPR";

    fn encode(&self) -> CodecResult<Vec<u8>> {
        let q = self.query_count();
        let mut w = Writer::new(Self::MAGIC, 8 + self.masks().len() + 8 * q);
        w.len(q, "q")?;
        w.len(self.superpoint_count(), "n")?;
        w.buf.extend(self.masks().iter().map(|&b| b as u8));
        for &c in self.classes() {
            w.i32(c);
        }
        for &s in self.init_superpoints() {
            w.u32(s);
        }
        Ok(w.finish())
    }

    fn decode(bytes: &[u8]) -> CodecResult<Self> {
        let mut r = Reader::new(bytes);
        r.header(Self::MAGIC)?;
        let at = r.offset();
        let q = r.u32()?;
        let n = r.u32()?;
        let cells = product(&[q, n], at, "prediction masks")?;
        let cell_count = r.expect_payload(cells, 1, "mask cells")?;
        let mut masks = Vec::with_capacity(cell_count);
        for _ in 0..cell_count {
            let at = r.offset();
            match r.u8()? {
                0 => masks.push(false),
                1 => masks.push(true),
                b => {
                    return Err(CodecError::InvalidValue {
                        offset: at,
                        detail: format!("mask byte {b} is not 0 or 1"),
                    })
                }
            }
        }
        let q_count = r.expect_payload(q as u64, 8, "query records")?;
        let mut classes = Vec::with_capacity(q_count);
        for a in 0..q_count {
            let at = r.offset();
            let c = r.i32()?;
            if c < 0 {
                return Err(CodecError::LabelRange {
                    offset: at,
                    detail: format!("query {a} has negative class {c}"),
                });
            }
            classes.push(c);
        }
        let mut init = Vec::with_capacity(q_count);
        let mut seen = vec![false; n as usize];
        for a in 0..q_count {
            let at = r.offset();
            let s = r.u32()?;
            if s >= n {
                return Err(CodecError::LabelRange {
                    offset: at,
                    detail: format!("query {a} initialized from superpoint {s} but n = {n}"),
                });
            }
            if std::mem::replace(&mut seen[s as usize], true) {
                return Err(CodecError::InvalidValue {
                    offset: at,
                    detail: format!("superpoint {s} initializes more than one query"),
                });
            }
            init.push(s);
        }
        r.finish()?;
        Ok(ScenePrediction {
            superpoint_count: n as usize,
            masks,
            classes,
            init_superpoints: init,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_header(magic: &[u8; 4], body: &[u32]) -> Vec<u8> {
        let mut b = magic.to_vec();
        b.extend_from_slice(&1u32.to_le_bytes());
        for v in body {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    #[test]
    fn ov3c_two_records() {
        let mut b = with_header(b"OV3C", &[2, 1, 4, 4]);
        for (v, x, y) in [(0u32, 0.5f32, 0.5f32), (0, 0.25, 0.75)] {
            b.extend_from_slice(&v.to_le_bytes());
            b.extend_from_slice(&x.to_le_bytes());
            b.extend_from_slice(&y.to_le_bytes());
        }
        let t = CorrespondenceTable::decode(&b).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get(0), Correspondence { view: 0, x: 0.5, y: 0.5 });
        assert_eq!(t.get(1), Correspondence { view: 0, x: 0.25, y: 0.75 });
        assert_eq!(t.encode().unwrap(), b);
    }

    #[test]
    fn ovsp_non_contiguous_strict_and_lenient() {
        // Header claims four superpoints but label 3 never occurs.
        let b = with_header(b"OVSP", &[4, 4, 0, 0, 2, 1]);
        let err = SuperpointMask::decode(&b).unwrap_err();
        assert_eq!(err.class(), "non_contiguous");
        assert!(err.to_string().contains("labels not contiguous"));
        assert_eq!(err.offset(), 16);
        let m = decode_superpoints(&b, false).unwrap();
        assert_eq!(m.superpoint_count(), 3);
        assert_eq!(m.labels(), &[0, 0, 2, 1]);
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let b = with_header(b"XXXX", &[0, 0]);
        let err = CorrespondenceTable::decode(&b).unwrap_err();
        assert_eq!(err.offset(), 0);
        assert!(err.to_string().contains("OV3C"));
    }

    #[test]
    fn huge_header_is_rejected_before_allocation() {
        let b = with_header(b"OVFM", &[u32::MAX, u32::MAX]);
        assert_eq!(FeatureMatrix::decode(&b).unwrap_err().class(), "dimension_overflow");
        let b = with_header(b"OVFM", &[100_000, 100_000]);
        assert_eq!(FeatureMatrix::decode(&b).unwrap_err().class(), "truncated");
        let b = with_header(b"OVIF", &[u32::MAX, u32::MAX, u32::MAX, u32::MAX]);
        assert_eq!(ImageFeatureStack::decode(&b).unwrap_err().class(), "dimension_overflow");
    }

    #[test]
    fn raster_relabel_flag() {
        let mut b = with_header(b"OV2M", &[1, 1, 3]);
        for l in [-1i32, 5, 2] {
            b.extend_from_slice(&l.to_le_bytes());
        }
        let (r, changed) = decode_raster(&b).unwrap();
        assert!(changed);
        assert_eq!(r.labels(), &[-1, 1, 0]);
    }
}
