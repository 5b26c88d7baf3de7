//! Volume and sinogram files.
//!
//! A file is a UTF-8 header of `key=value` lines introduced by the magic line
//! `TVTOMO1`, terminated by an empty line, followed by the raw 64-bit float
//! payload in the axis order of [`Volume`] / [`Sinogram`]:
//!
//! ```text
//! TVTOMO1
//! kind=volume
//! dims=16 16 16
//! spacing=1 1 1
//! dtype=f64
//! endianness=little
//!
//! <16·16·16 × 8 bytes>
//! ```
//!
//! Sinogram headers carry `views`, `detector_rows`, `detector_cols`,
//! `detector_pixel_size`, the flattened `directions` and the reconstruction
//! grid (`volume_dims`, `volume_spacing`). Any further keys are free-form
//! metadata and are preserved on read. Writers always emit little-endian;
//! readers honour the declared endianness.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{ProjectionGeometry, Sinogram, Volume, VolumeGrid};

pub const MAGIC: &str = "TVTOMO1";

/// Ordered free-form `key=value` pairs.
pub type Metadata = Vec<(String, String)>;

const RESERVED: &[&str] = &[
    "kind",
    "dims",
    "spacing",
    "dtype",
    "endianness",
    "views",
    "detector_rows",
    "detector_cols",
    "detector_pixel_size",
    "directions",
    "volume_dims",
    "volume_spacing",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endianness {
    Little,
    Big,
}

#[derive(Clone, Debug)]
pub struct SinogramFile {
    pub sinogram: Sinogram,
    pub geometry: ProjectionGeometry,
    pub grid: VolumeGrid,
    pub meta: Metadata,
}

struct Header {
    entries: Metadata,
}

impl Header {
    fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn require(&self, key: &str, path: &Path) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::format(path, format!("missing header key {key:?}")))
    }

    fn extras(&self) -> Metadata {
        self.entries
            .iter()
            .filter(|(k, _)| !RESERVED.contains(&k.as_str()))
            .cloned()
            .collect()
    }
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

fn parse_list<T: std::str::FromStr>(text: &str, key: &str, path: &Path) -> Result<Vec<T>> {
    text.split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::format(path, format!("bad value {t:?} for {key}")))
        })
        .collect()
}

fn parse_three<T: std::str::FromStr + Copy>(text: &str, key: &str, path: &Path) -> Result<[T; 3]> {
    let v: Vec<T> = parse_list(text, key, path)?;
    v.try_into()
        .map_err(|_| Error::format(path, format!("{key} needs exactly three values")))
}

fn parse_one<T: std::str::FromStr>(text: &str, key: &str, path: &Path) -> Result<T> {
    text.trim()
        .parse()
        .map_err(|_| Error::format(path, format!("bad value {text:?} for {key}")))
}

fn write_file(path: &Path, kind: &str, mut entries: Metadata, extra: &[(String, String)], payload: &[f64]) -> Result<()> {
    for (k, v) in extra {
        if RESERVED.contains(&k.as_str()) || k.contains('=') || k.contains('\n') || v.contains('\n') {
            return Err(Error::invalid(format!("metadata key {k:?} is reserved or malformed")));
        }
        entries.push((k.clone(), v.clone()));
    }
    let mut text = format!("{MAGIC}\nkind={kind}\n");
    for (k, v) in &entries {
        text.push_str(&format!("{k}={v}\n"));
    }
    text.push('\n');
    let mut bytes = text.into_bytes();
    bytes.reserve(payload.len() * 8);
    for v in payload {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path, kind: &str) -> Result<(Header, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let split = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| Error::format(path, "header is not terminated by an empty line"))?;
    let text = std::str::from_utf8(&bytes[..split])
        .map_err(|_| Error::format(path, "header is not valid UTF-8"))?;
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::format(path, format!("missing magic line {MAGIC:?}")));
    }
    let mut entries = Vec::new();
    for line in lines {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, format!("header line {line:?} is not key=value")))?;
        entries.push((k.trim().to_string(), v.trim().to_string()));
    }
    let header = Header { entries };
    let found = header.require("kind", path)?;
    if found != kind {
        return Err(Error::format(path, format!("expected kind {kind}, found {found}")));
    }
    let dtype = header.require("dtype", path)?;
    if dtype != "f64" {
        return Err(Error::format(path, format!("unsupported dtype {dtype:?}")));
    }
    Ok((header, bytes[split + 2..].to_vec()))
}

fn decode(header: &Header, payload: &[u8], count: usize, path: &Path) -> Result<Vec<f64>> {
    let endianness = match header.require("endianness", path)? {
        "little" => Endianness::Little,
        "big" => Endianness::Big,
        other => return Err(Error::format(path, format!("unknown endianness {other:?}"))),
    };
    let expected = count
        .checked_mul(8)
        .ok_or_else(|| Error::format(path, "declared dimensions overflow"))?;
    if payload.len() != expected {
        return Err(Error::format(
            path,
            format!("payload has {} bytes, header implies {expected}", payload.len()),
        ));
    }
    Ok(payload
        .chunks_exact(8)
        .map(|c| {
            let raw: [u8; 8] = c.try_into().unwrap();
            match endianness {
                Endianness::Little => f64::from_le_bytes(raw),
                Endianness::Big => f64::from_be_bytes(raw),
            }
        })
        .collect())
}

fn checked_count(dims: &[usize], path: &Path) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format(path, format!("dimensions {dims:?} overflow")))
}

fn grid_entries(grid: &VolumeGrid, dims_key: &str, spacing_key: &str) -> Metadata {
    vec![
        (dims_key.into(), join(&grid.dims)),
        (spacing_key.into(), join(&grid.spacing)),
    ]
}

fn parse_grid(header: &Header, dims_key: &str, spacing_key: &str, path: &Path) -> Result<VolumeGrid> {
    let dims: [usize; 3] = parse_three(header.require(dims_key, path)?, dims_key, path)?;
    let spacing: [f64; 3] = parse_three(header.require(spacing_key, path)?, spacing_key, path)?;
    checked_count(&dims, path)?;
    VolumeGrid::new(dims, spacing).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_volume(v: &Volume, path: impl AsRef<Path>) -> Result<()> {
    write_volume_with_meta(v, path, &[])
}

pub fn write_volume_with_meta(v: &Volume, path: impl AsRef<Path>, meta: &[(String, String)]) -> Result<()> {
    let mut entries = grid_entries(v.grid(), "dims", "spacing");
    entries.push(("dtype".into(), "f64".into()));
    entries.push(("endianness".into(), "little".into()));
    write_file(path.as_ref(), "volume", entries, meta, v.values())
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    read_volume_with_meta(path).map(|(v, _)| v)
}

pub fn read_volume_with_meta(path: impl AsRef<Path>) -> Result<(Volume, Metadata)> {
    let path = path.as_ref();
    let (header, payload) = read_file(path, "volume")?;
    let grid = parse_grid(&header, "dims", "spacing", path)?;
    let values = decode(&header, &payload, grid.len(), path)?;
    Ok((Volume::from_values(grid, values)?, header.extras()))
}

/// Writes a sinogram together with the geometry and reconstruction grid it
/// was produced for.
pub fn write_sinogram(
    s: &Sinogram,
    geometry: &ProjectionGeometry,
    grid: &VolumeGrid,
    path: impl AsRef<Path>,
    meta: &[(String, String)],
) -> Result<()> {
    s.check_geometry(geometry)?;
    let directions: Vec<f64> = geometry.directions().into_iter().flatten().collect();
    let mut entries: Metadata = vec![
        ("views".into(), geometry.n_views().to_string()),
        ("detector_rows".into(), geometry.detector_rows().to_string()),
        ("detector_cols".into(), geometry.detector_cols().to_string()),
        ("detector_pixel_size".into(), geometry.detector_pixel_size().to_string()),
        ("directions".into(), join(&directions)),
    ];
    entries.extend(grid_entries(grid, "volume_dims", "volume_spacing"));
    entries.push(("dtype".into(), "f64".into()));
    entries.push(("endianness".into(), "little".into()));
    write_file(path.as_ref(), "sinogram", entries, meta, s.values())
}

pub fn read_sinogram(path: impl AsRef<Path>) -> Result<SinogramFile> {
    let path = path.as_ref();
    let (header, payload) = read_file(path, "sinogram")?;
    let views: usize = parse_one(header.require("views", path)?, "views", path)?;
    let rows: usize = parse_one(header.require("detector_rows", path)?, "detector_rows", path)?;
    let cols: usize = parse_one(header.require("detector_cols", path)?, "detector_cols", path)?;
    let pixel: f64 = parse_one(header.require("detector_pixel_size", path)?, "detector_pixel_size", path)?;
    let flat: Vec<f64> = parse_list(header.require("directions", path)?, "directions", path)?;
    if flat.len() != 3 * views {
        return Err(Error::format(
            path,
            format!("{} direction components for {views} views", flat.len()),
        ));
    }
    let directions: Vec<[f64; 3]> = flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    let geometry = ProjectionGeometry::from_directions(&directions, rows, cols, pixel)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let grid = parse_grid(&header, "volume_dims", "volume_spacing", path)?;
    let count = checked_count(&[views, rows, cols], path)?;
    let values = decode(&header, &payload, count, path)?;
    Ok(SinogramFile {
        sinogram: Sinogram::from_values(&geometry, values)?,
        geometry,
        grid,
        meta: header.extras(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_geometry;

    #[test]
    fn volume_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.tvt");
        let grid = VolumeGrid::new([3, 4, 2], [0.5, 1.0, 2.0]).unwrap();
        let values: Vec<f64> = (0..24).map(|i| (i as f64).sqrt() * 1e-7 - 0.1).collect();
        let v = Volume::from_values(grid, values).unwrap();
        let meta = vec![("seed".to_string(), "7".to_string())];
        write_volume_with_meta(&v, &path, &meta).unwrap();
        let (back, extras) = read_volume_with_meta(&path).unwrap();
        assert_eq!(back, v);
        assert_eq!(extras, meta);
    }

    #[test]
    fn sinogram_round_trip_preserves_geometry() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.tvt");
        let g = make_geometry(7, 4, 5, 1.3).unwrap();
        let grid = VolumeGrid::cube(3).unwrap();
        let values = (0..140).map(|i| i as f64 / 3.0).collect();
        let s = Sinogram::from_values(&g, values).unwrap();
        write_sinogram(&s, &g, &grid, &path, &[]).unwrap();
        let back = read_sinogram(&path).unwrap();
        assert_eq!(back.sinogram, s);
        assert_eq!(back.geometry, g);
        assert_eq!(back.grid, grid);
    }

    #[test]
    fn payload_length_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.tvt");
        write_volume(&Volume::zeros(VolumeGrid::cube(2).unwrap()), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_volume(&path), Err(Error::Format { .. })));

        let text = format!("{MAGIC}\nkind=volume\ndims=2 2 3\nspacing=1 1 1\ndtype=f64\nendianness=little\n\n");
        let mut bytes = text.into_bytes();
        bytes.extend(std::iter::repeat_n(0u8, 8 * 8));
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_volume(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn malformed_headers_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tvt");
        let cases = [
            "NOPE\nkind=volume\n\n".to_string(),
            format!("{MAGIC}\nkind=volume\ndims=2 2\nspacing=1 1 1\ndtype=f64\nendianness=little\n\n"),
            format!("{MAGIC}\nkind=volume\ndims=2 2 2\nspacing=1 1 1\ndtype=f32\nendianness=little\n\n"),
            format!("{MAGIC}\nkind=volume\ndims=2 2 2\nspacing=1 1 1\ndtype=f64\nendianness=middle\n\n"),
            format!("{MAGIC}\nkind=sinogram\ndims=2 2 2\n\n"),
            format!("{MAGIC}\nkind=volume\nno equals sign\n\n"),
            format!("{MAGIC}\nkind=volume\ndims=2 2 2\n"),
            format!(
                "{MAGIC}\nkind=volume\ndims={} {} 2\nspacing=1 1 1\ndtype=f64\nendianness=little\n\n",
                usize::MAX,
                usize::MAX
            ),
        ];
        for text in cases {
            fs::write(&path, text.as_bytes()).unwrap();
            assert!(read_volume(&path).is_err(), "{text:?}");
        }
        assert!(matches!(read_volume(dir.path().join("missing")), Err(Error::Io { .. })));
    }

    #[test]
    fn reserved_metadata_keys_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let v = Volume::zeros(VolumeGrid::cube(2).unwrap());
        let meta = vec![("dims".to_string(), "1 1 1".to_string())];
        assert!(write_volume_with_meta(&v, dir.path().join("x"), &meta).is_err());
    }
}
