//! Random valid values for every file format and a catalog of corrupted
//! files with the error each must produce.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::codec::{decode_raster, decode_superpoints, Codec, CodecError, CodecResult};
use crate::model::ply::{decode_ply, encode_ply, PlyFormat};
use crate::model::{
    Correspondence, CorrespondenceTable, FeatureMatrix, ImageFeatureStack, InstanceRaster, PointCloud, ScenePrediction,
    SuperpointMask, ViewDims,
};
use crate::superpoint::{Edge, EdgeList};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Ply,
    Ov3c,
    Ov2m,
    Ovfm,
    Ovif,
    Ovsp,
    Oveg,
    Ovpr,
}

impl Format {
    pub const ALL: [Format; 8] =
        [Format::Ply, Format::Ov3c, Format::Ov2m, Format::Ovfm, Format::Ovif, Format::Ovsp, Format::Oveg, Format::Ovpr];
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Format::Ply => "ply",
            Format::Ov3c => "ov3c",
            Format::Ov2m => "ov2m",
            Format::Ovfm => "ovfm",
            Format::Ovif => "ovif",
            Format::Ovsp => "ovsp",
            Format::Oveg => "oveg",
            Format::Ovpr => "ovpr",
        };
        f.write_str(name)
    }
}

fn finite(rng: &mut ChaCha8Rng) -> f32 {
    match rng.random_range(0..10) {
        0 => 0.0,
        1 => -0.0,
        2 => f32::MAX,
        3 => f32::MIN_POSITIVE,
        _ => rng.random_range(-1e3f32..1e3),
    }
}

fn unit(rng: &mut ChaCha8Rng) -> f32 {
    match rng.random_range(0..8) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.random_range(0.0f32..=1.0),
    }
}

pub fn random_point_cloud(rng: &mut ChaCha8Rng) -> PointCloud {
    let n = rng.random_range(1..=64);
    PointCloud::new((0..n).map(|_| [finite(rng), finite(rng), finite(rng)]).collect()).unwrap()
}

pub fn random_correspondence(rng: &mut ChaCha8Rng) -> CorrespondenceTable {
    let v = rng.random_range(1..=4);
    let dims = (0..v)
        .map(|_| ViewDims::new(rng.random_range(1..=2000), rng.random_range(1..=2000)))
        .collect();
    let n = rng.random_range(0..=64);
    let entries = (0..n)
        .map(|_| Correspondence { view: rng.random_range(0..v as u32), x: unit(rng), y: unit(rng) })
        .collect();
    CorrespondenceTable::new(entries, dims).unwrap()
}

pub fn random_raster(rng: &mut ChaCha8Rng) -> InstanceRaster {
    let (v, h, w) = (rng.random_range(0..=3), rng.random_range(1..=9), rng.random_range(1..=9));
    let raw = (0..v * h * w).map(|_| rng.random_range(-1..6)).collect();
    InstanceRaster::relabeled(v, h, w, raw).unwrap().0
}

pub fn random_feature_matrix(rng: &mut ChaCha8Rng) -> FeatureMatrix {
    let (r, c) = (rng.random_range(0..=20), rng.random_range(0..=20));
    FeatureMatrix::new(r, c, (0..r * c).map(|_| finite(rng)).collect()).unwrap()
}

pub fn random_feature_stack(rng: &mut ChaCha8Rng) -> ImageFeatureStack {
    let dims: [usize; 4] = [rng.random_range(0..=3), rng.random_range(1..=6), rng.random_range(1..=6), rng.random_range(0..=5)];
    let len = dims.iter().product();
    ImageFeatureStack::new(dims[0], dims[1], dims[2], dims[3], (0..len).map(|_| finite(rng)).collect()).unwrap()
}

pub fn random_superpoints(rng: &mut ChaCha8Rng) -> SuperpointMask {
    let n_points = rng.random_range(0..=80);
    let n = rng.random_range(1..=20usize).min(n_points.max(1));
    let raw: Vec<u32> = (0..n_points)
        .map(|i| if i < n { i as u32 } else { rng.random_range(0..n as u32) })
        .collect();
    SuperpointMask::compacted(&raw)
}

pub fn random_edges(rng: &mut ChaCha8Rng) -> EdgeList {
    let n = rng.random_range(2..=40u32);
    let mut pairs: Vec<(u32, u32)> = (0..rng.random_range(0..=60))
        .map(|_| {
            let i = rng.random_range(0..n - 1);
            (i, rng.random_range(i + 1..n))
        })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    let edges = pairs
        .into_iter()
        .map(|(i, j)| {
            let w = match rng.random_range(0..6) {
                0 => 0.0,
                1 => 2.0,
                _ => rng.random_range(0.0f32..=2.0),
            };
            Edge { i, j, w }
        })
        .collect();
    EdgeList::new(edges).unwrap()
}

pub fn random_prediction(rng: &mut ChaCha8Rng) -> ScenePrediction {
    let n = rng.random_range(0..=30);
    let q = rng.random_range(0..=n);
    let init = rand::seq::index::sample(rng, n, q).into_iter().map(|k| k as u32).collect();
    let masks = (0..q * n).map(|_| rng.random_bool(0.5)).collect();
    let classes = (0..q).map(|_| rng.random_range(0..200)).collect();
    ScenePrediction::new(n, masks, classes, init).unwrap()
}

/// Encodes a random value of `format` from `seed`, decodes it, and reports
/// whether the decoded value equals the original.
pub fn round_trip(format: Format, seed: u64) -> CodecResult<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fn check<T: Codec + PartialEq>(v: T) -> CodecResult<bool> {
        Ok(T::decode(&v.encode()?)? == v)
    }
    match format {
        Format::Ply => {
            let cloud = random_point_cloud(&mut rng);
            let fmt = if rng.random_bool(0.5) { PlyFormat::Ascii } else { PlyFormat::BinaryLittleEndian };
            Ok(decode_ply(&encode_ply(&cloud, fmt))? == cloud)
        }
        Format::Ov3c => check(random_correspondence(&mut rng)),
        Format::Ov2m => check(random_raster(&mut rng)),
        Format::Ovfm => check(random_feature_matrix(&mut rng)),
        Format::Ovif => check(random_feature_stack(&mut rng)),
        Format::Ovsp => check(random_superpoints(&mut rng)),
        Format::Oveg => check(random_edges(&mut rng)),
        Format::Ovpr => check(random_prediction(&mut rng)),
    }
}

/// Decodes `bytes` as `format`, discarding the value. Superpoint files are
/// decoded strictly.
pub fn decode_as(format: Format, bytes: &[u8]) -> CodecResult<()> {
    match format {
        Format::Ply => decode_ply(bytes).map(drop),
        Format::Ov3c => CorrespondenceTable::decode(bytes).map(drop),
        Format::Ov2m => decode_raster(bytes).map(drop),
        Format::Ovfm => FeatureMatrix::decode(bytes).map(drop),
        Format::Ovif => ImageFeatureStack::decode(bytes).map(drop),
        Format::Ovsp => decode_superpoints(bytes, true).map(drop),
        Format::Oveg => EdgeList::decode(bytes).map(drop),
        Format::Ovpr => ScenePrediction::decode(bytes).map(drop),
    }
}

#[derive(Clone, Debug)]
pub struct CorruptCase {
    pub name: &'static str,
    pub format: Format,
    pub bytes: Vec<u8>,
    pub class: &'static str,
    pub offset: u64,
}

impl CorruptCase {
    /// `Ok(())` when decoding fails with the documented class and offset.
    pub fn check(&self) -> Result<(), String> {
        match decode_as(self.format, &self.bytes) {
            Ok(()) => Err(format!("{}: decoded without error", self.name)),
            Err(e) if e.class() == self.class && e.offset() == self.offset => Ok(()),
            Err(e) => Err(format!(
                "{}: expected {} at offset {}, got {} at offset {} ({e})",
                self.name,
                self.class,
                self.offset,
                e.class(),
                e.offset()
            )),
        }
    }

    pub fn error(&self) -> Option<CodecError> {
        decode_as(self.format, &self.bytes).err()
    }
}

struct Bytes(Vec<u8>);

impl Bytes {
    fn header(magic: &[u8; 4]) -> Self {
        let mut b = magic.to_vec();
        b.extend_from_slice(&1u32.to_le_bytes());
        Bytes(b)
    }
    fn u32(mut self, v: u32) -> Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }
    fn i32(mut self, v: i32) -> Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }
    fn u64(mut self, v: u64) -> Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }
    fn f32(mut self, v: f32) -> Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }
    fn raw(mut self, v: &[u8]) -> Self {
        self.0.extend_from_slice(v);
        self
    }
}

/// Ten hand-built invalid files, one per documented failure mode.
pub fn corrupt_cases() -> Vec<CorruptCase> {
    let case = |name, format, bytes: Bytes, class, offset| CorruptCase { name, format, bytes: bytes.0, class, offset };
    let mut wrong_magic = Bytes::header(b"OV3C");
    wrong_magic.0[..4].copy_from_slice(b"OV3X");
    vec![
        case("ov3c_bad_magic", Format::Ov3c, wrong_magic.u32(0).u32(1).u32(4).u32(4), "bad_magic", 0),
        case(
            "ov3c_version_2",
            Format::Ov3c,
            Bytes(b"OV3C".to_vec()).u32(2).u32(0).u32(0),
            "unsupported_version",
            4,
        ),
        case(
            "ov3c_view_out_of_range",
            Format::Ov3c,
            Bytes::header(b"OV3C").u32(1).u32(1).u32(4).u32(4).u32(3).f32(0.5).f32(0.5),
            "label_range",
            24,
        ),
        case(
            "ov2m_label_below_background",
            Format::Ov2m,
            Bytes::header(b"OV2M").u32(1).u32(1).u32(2).i32(0).i32(-7),
            "label_range",
            24,
        ),
        case(
            "ovfm_nan",
            Format::Ovfm,
            Bytes::header(b"OVFM").u32(1).u32(2).f32(1.0).f32(f32::NAN),
            "non_finite",
            20,
        ),
        case(
            "ovif_dimension_overflow",
            Format::Ovif,
            Bytes::header(b"OVIF").u32(u32::MAX).u32(u32::MAX).u32(u32::MAX).u32(u32::MAX),
            "dimension_overflow",
            8,
        ),
        case(
            "ovsp_non_contiguous",
            Format::Ovsp,
            Bytes::header(b"OVSP").u32(4).u32(4).u32(0).u32(0).u32(2).u32(1),
            "non_contiguous",
            16,
        ),
        case(
            "oveg_truncated",
            Format::Oveg,
            Bytes::header(b"OVEG").u64(3).u32(0).u32(1).f32(0.5),
            "truncated",
            16,
        ),
        case(
            "ovpr_mask_byte",
            Format::Ovpr,
            Bytes::header(b"OVPR").u32(1).u32(2).raw(&[1, 7]).i32(0).u32(0),
            "invalid_value",
            17,
        ),
        case(
            "ply_missing_vertex_element",
            Format::Ply,
            Bytes(b"ply\nformat ascii 1.0\nelement face 0\nend_header\n".to_vec()),
            "ply",
            0,
        ),
    ]
}
