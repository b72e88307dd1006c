use ovseg3r_core::model::ply::encode_colored_ply;
use ovseg3r_core::model::PointCloud;

use crate::error::{CliError, CliResult};

pub const BACKGROUND_GRAY: [u8; 3] = [128, 128, 128];

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable color for a label; negative labels are background gray.
pub fn label_color(label: i64, seed: u64) -> [u8; 3] {
    if label < 0 {
        return BACKGROUND_GRAY;
    }
    let h = splitmix64(seed ^ splitmix64(label as u64));
    // Keep every channel away from the midpoint so no label reads as gray.
    let channel = |shift: u32| {
        let c = (h >> shift) as u8;
        if (96..160).contains(&c) {
            c.wrapping_add(64)
        } else {
            c
        }
    };
    [channel(0), channel(8), channel(16)]
}

pub fn export_ply(points: &PointCloud, labels: &[i64], seed: u64) -> CliResult<Vec<u8>> {
    if labels.len() != points.len() {
        return Err(CliError::config(format!("{} labels for {} points", labels.len(), points.len())));
    }
    let colors: Vec<[u8; 3]> = labels.iter().map(|&l| label_color(l, seed)).collect();
    Ok(encode_colored_ply(points, &colors))
}
