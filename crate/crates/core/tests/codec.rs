use ovseg3r_core::model::codec::{decode_raster, decode_superpoints, load, save, Codec};
use ovseg3r_core::model::ply::{decode_ply, encode_colored_ply, encode_ply, PlyFormat};
use ovseg3r_core::model::{CorrespondenceTable, ImageFeatureStack, InstanceRaster, PointCloud};
use ovseg3r_core::synth::fixtures::{corrupt_cases, round_trip, Format};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn every_format_round_trips(seed in any::<u64>()) {
        for format in Format::ALL {
            prop_assert!(round_trip(format, seed).unwrap(), "{} seed {}", format, seed);
        }
    }

    #[test]
    fn truncation_never_panics(seed in any::<u64>(), cut in 0usize..64) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let t = ovseg3r_core::synth::fixtures::random_correspondence(&mut rng);
        let bytes = t.encode().unwrap();
        let cut = cut.min(bytes.len().saturating_sub(1));
        let err = CorrespondenceTable::decode(&bytes[..cut]).unwrap_err();
        prop_assert!(matches!(err.class(), "truncated" | "bad_magic"), "{}", err);
    }
}

#[test]
fn corrupt_files_map_to_documented_classes() {
    let cases = corrupt_cases();
    assert_eq!(cases.len(), 10);
    let failures: Vec<String> = cases.iter().filter_map(|c| c.check().err()).collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn bad_magic_message_names_expected_magic() {
    let case = corrupt_cases().into_iter().find(|c| c.name == "ov3c_bad_magic").unwrap();
    let msg = case.error().unwrap().to_string();
    assert!(msg.contains("offset 0") && msg.contains("OV3C"), "{msg}");
}

#[test]
fn ply_single_origin_point_is_byte_identical() {
    let cloud = PointCloud::new(vec![[0.0, 0.0, 0.0]]).unwrap();
    for format in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
        let bytes = encode_ply(&cloud, format);
        let back = decode_ply(&bytes).unwrap();
        assert_eq!(back, cloud);
        assert_eq!(encode_ply(&back, format), bytes);
    }
}

#[test]
fn colored_ply_preserves_positions() {
    let cloud = PointCloud::new(vec![[1.5, -2.25, 1e-7], [3.0e5, 0.1, -0.3]]).unwrap();
    let bytes = encode_colored_ply(&cloud, &[[255, 0, 0], [0, 0, 255]]);
    assert_eq!(decode_ply(&bytes).unwrap(), cloud);
}

#[test]
fn ovsp_strict_and_lenient() {
    let mut b = b"OVSP".to_vec();
    for v in [1u32, 4, 4, 0, 0, 2, 1] {
        b.extend_from_slice(&v.to_le_bytes());
    }
    let err = decode_superpoints(&b, true).unwrap_err();
    assert_eq!(err.class(), "non_contiguous");
    assert!(err.to_string().contains("labels not contiguous"));
    let lenient = decode_superpoints(&b, false).unwrap();
    assert_eq!(lenient.superpoint_count(), 3);
    assert_eq!(lenient.labels(), &[0, 0, 2, 1]);
}

#[test]
fn raster_ids_are_relabeled_with_flag() {
    let raw = InstanceRaster::relabeled(1, 1, 3, vec![0, 1, 2]).unwrap().0;
    let mut bytes = raw.encode().unwrap();
    // Replace id 2 with 9: the view now skips ids 2..8.
    let last = bytes.len() - 4;
    bytes[last..].copy_from_slice(&9i32.to_le_bytes());
    let (r, changed) = decode_raster(&bytes).unwrap();
    assert!(changed);
    assert_eq!(r.labels(), &[0, 1, 2]);
    assert!(!decode_raster(&raw.encode().unwrap()).unwrap().1);
}

#[test]
fn files_on_disk() {
    let dir = std::env::temp_dir().join(format!("ovseg3r-codec-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let stack = ImageFeatureStack::new(1, 2, 2, 1, vec![0.5, 1.5, -2.0, 3.0]).unwrap();
    let path = dir.join("x.ovif");
    save(&path, &stack).unwrap();
    assert_eq!(load::<ImageFeatureStack>(&path).unwrap(), stack);
    assert!(load::<CorrespondenceTable>(&path).is_err());
    std::fs::remove_dir_all(&dir).unwrap();
}
