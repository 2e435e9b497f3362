//! On-disk formats.
//!
//! Volumes are raw little-endian `f32` in x-fastest order with a JSON
//! sidecar next to them (`foo.raw` + `foo.json`). Measurements use the same
//! layout with `f64` so they roundtrip bitwise. Previews are 8-bit binary
//! PGM slices whose min-max window is recorded in their own sidecar.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Grid, MeasurementSet, NoiseSpec, Signal};
use crate::optimize::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeSidecar {
    pub dims: Vec<usize>,
    pub spacing: Vec<f64>,
    pub dtype: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSidecar {
    pub len: usize,
    pub dtype: String,
    pub op_id: String,
    pub seed: u64,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreviewSidecar {
    pub axis: usize,
    pub index: usize,
    pub width: usize,
    pub height: usize,
    pub window_min: f64,
    pub window_max: f64,
}

pub fn sidecar_path(data: &Path) -> PathBuf {
    data.with_extension("json")
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.display().to_string(), reason: reason.into() }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e.to_string()))
}

/// Writes `path` (raw f32) and its sidecar. The signal must carry a grid.
pub fn write_volume(path: &Path, volume: &Signal) -> Result<()> {
    let grid = volume
        .grid()
        .ok_or_else(|| Error::Shape("volume export needs grid geometry".into()))?;
    let mut bytes = Vec::with_capacity(volume.len() * 4);
    for &v in volume.values() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    write_json(
        &sidecar_path(path),
        &VolumeSidecar { dims: grid.dims.clone(), spacing: grid.spacing.clone(), dtype: "f32le".into() },
    )
}

pub fn read_volume(path: &Path) -> Result<Signal> {
    let side: VolumeSidecar = read_json(&sidecar_path(path))?;
    if side.dtype != "f32le" {
        return Err(format_err(path, format!("unsupported dtype {}", side.dtype)));
    }
    let grid = Grid::new(side.dims, side.spacing)?;
    let bytes = fs::read(path)?;
    if bytes.len() != grid.len() * 4 {
        return Err(format_err(
            path,
            format!("expected {} bytes, found {}", grid.len() * 4, bytes.len()),
        ));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Signal::with_grid(values, grid)
}

pub fn write_measurements(path: &Path, set: &MeasurementSet) -> Result<()> {
    let mut bytes = Vec::with_capacity(set.len() * 8);
    for &v in &set.y {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    write_json(
        &sidecar_path(path),
        &MeasurementSidecar {
            len: set.len(),
            dtype: "f64le".into(),
            op_id: set.op_id.clone(),
            seed: set.seed,
            noise: set.noise.clone(),
        },
    )
}

pub fn read_measurements(path: &Path) -> Result<MeasurementSet> {
    let side: MeasurementSidecar = read_json(&sidecar_path(path))?;
    if side.dtype != "f64le" {
        return Err(format_err(path, format!("unsupported dtype {}", side.dtype)));
    }
    let bytes = fs::read(path)?;
    if bytes.len() != side.len * 8 {
        return Err(format_err(
            path,
            format!("expected {} bytes, found {}", side.len * 8, bytes.len()),
        ));
    }
    let y = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(MeasurementSet { y, op_id: side.op_id, seed: side.seed, noise: side.noise })
}

/// Min-max windowed 8-bit slice. For 3D volumes `axis` picks the
/// normal direction (0 = x, 1 = y, 2 = z); 2D images ignore it.
pub fn slice_to_u8(volume: &Signal, axis: usize, index: usize) -> Result<(Vec<u8>, PreviewSidecar)> {
    let grid = volume
        .grid()
        .ok_or_else(|| Error::Shape("preview needs grid geometry".into()))?;
    let v = volume.values();
    let (width, height, pixels): (usize, usize, Vec<f64>) = match grid.dims[..] {
        [nx, ny] => (nx, ny, v.to_vec()),
        [nx, ny, nz] => {
            let bound = [nx, ny, nz];
            if axis > 2 || index >= bound[axis] {
                return Err(Error::Domain(format!("slice {index} on axis {axis} is out of range")));
            }
            let at = |x: usize, y: usize, z: usize| v[(z * ny + y) * nx + x];
            match axis {
                0 => (ny, nz, (0..nz).flat_map(|z| (0..ny).map(move |y| (y, z))).map(|(y, z)| at(index, y, z)).collect()),
                1 => (nx, nz, (0..nz).flat_map(|z| (0..nx).map(move |x| (x, z))).map(|(x, z)| at(x, index, z)).collect()),
                _ => (nx, ny, v[index * nx * ny..(index + 1) * nx * ny].to_vec()),
            }
        }
        _ => return Err(Error::Shape("preview needs a 2D or 3D grid".into())),
    };
    let lo = pixels.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = pixels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let bytes = pixels
        .iter()
        .map(|&p| (((p - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let side = PreviewSidecar { axis, index, width, height, window_min: lo, window_max: hi };
    Ok((bytes, side))
}

/// Writes a binary PGM (P5) and its windowing sidecar.
pub fn write_pgm_slice(path: &Path, volume: &Signal, axis: usize, index: usize) -> Result<PreviewSidecar> {
    let (bytes, side) = slice_to_u8(volume, axis, index)?;
    let mut f = fs::File::create(path)?;
    write!(f, "P5\n{} {}\n255\n", side.width, side.height)?;
    f.write_all(&bytes)?;
    write_json(&sidecar_path(path), &side)?;
    Ok(side)
}

pub fn write_trajectory_csv(path: &Path, trajectory: &Trajectory) -> Result<()> {
    fs::write(path, trajectory.to_csv())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(n: usize) -> Signal {
        let grid = Grid::cubic(3, n, 0.5).unwrap();
        let values = (0..grid.len()).map(|i| i as f64 * 0.25).collect();
        Signal::with_grid(values, grid).unwrap()
    }

    #[test]
    fn volume_size_and_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.raw");
        let vol = cube(4);
        write_volume(&p, &vol).unwrap();
        assert_eq!(fs::metadata(&p).unwrap().len(), 64 * 4);
        let back = read_volume(&p).unwrap();
        assert_eq!(back, vol);
    }

    #[test]
    fn truncated_volume_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.raw");
        write_volume(&p, &cube(4)).unwrap();
        fs::write(&p, [0u8; 10]).unwrap();
        assert!(matches!(read_volume(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn measurements_roundtrip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("y.bin");
        let y = vec![0.0, 1.0 / 3.0, 0.999_999_999_999, f64::MIN_POSITIVE, 1e-300];
        let set = MeasurementSet { y, op_id: "gaussian:3x2:seed7".into(), seed: 7, noise: None };
        write_measurements(&p, &set).unwrap();
        let back = read_measurements(&p).unwrap();
        for (a, b) in set.y.iter().zip(&back.y) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back, set);
    }

    #[test]
    fn pgm_window_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.pgm");
        let side = write_pgm_slice(&p, &cube(4), 2, 1).unwrap();
        assert_eq!((side.width, side.height), (4, 4));
        assert_eq!(side.window_min, 16.0 * 0.25);
        assert_eq!(side.window_max, 31.0 * 0.25);
        let bytes = fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"P5\n4 4\n255\n"));
        let px = &bytes[bytes.len() - 16..];
        assert_eq!((px[0], px[15]), (0, 255));
    }

    #[test]
    fn slices_along_each_axis() {
        let vol = cube(4);
        let (x, _) = slice_to_u8(&vol, 0, 0).unwrap();
        let (y, _) = slice_to_u8(&vol, 1, 0).unwrap();
        assert_eq!(x.len(), 16);
        assert_eq!(y.len(), 16);
        assert!(slice_to_u8(&vol, 2, 4).is_err());
    }
}
