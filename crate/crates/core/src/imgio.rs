//! Image, volume and label-map files.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageFormat, ImageReader, Luma, Rgb};

use crate::color::RgbImage;
use crate::error::{Error, Result};
use crate::metrics::boundary_mask;
use crate::regions::Rag;
use crate::shape::Shape;

/// Overlay boundary color.
pub const BOUNDARY_COLOR: [u8; 3] = [255, 0, 0];

/// A 2D map of non-negative region ids, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub width: usize,
    pub height: usize,
    pub ids: Vec<u32>,
}

pub type LabelMapFile = LabelMap;

impl LabelMap {
    pub fn new(width: usize, height: usize, ids: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config(format!("label map must be non-empty, got {width}x{height}")));
        }
        if ids.len() != width * height {
            return Err(Error::dims(width * height, ids.len()));
        }
        Ok(LabelMap { width, height, ids })
    }

    /// Volumes are stacked slice by slice, giving `height * depth` rows.
    pub fn from_rag(rag: &Rag) -> Self {
        let s = rag.shape();
        LabelMap {
            width: s.width,
            height: s.height * s.depth,
            ids: rag.pixel_map().to_vec(),
        }
    }

    pub fn shape(&self) -> Shape {
        Shape::new_2d(self.width, self.height)
    }

    pub fn region_count(&self) -> usize {
        let mut ids = self.ids.clone();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    /// Ids renumbered 0.. in order of first appearance.
    pub fn normalized(&self) -> LabelMap {
        let mut remap = std::collections::HashMap::new();
        let ids = self
            .ids
            .iter()
            .map(|&id| {
                let next = remap.len() as u32;
                *remap.entry(id).or_insert(next)
            })
            .collect();
        LabelMap {
            width: self.width,
            height: self.height,
            ids,
        }
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase())
}

fn image_format(path: &Path) -> Result<(ImageFormat, &'static str)> {
    match extension(path).as_deref() {
        Some("png") => Ok((ImageFormat::Png, "PNG")),
        Some("ppm" | "pnm") => Ok((ImageFormat::Pnm, "PPM")),
        _ => Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let (format, name) = image_format(path)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let decode_err = |message: String| Error::Decode {
        format: name,
        path: path.to_path_buf(),
        message,
    };
    let mut reader = ImageReader::new(std::io::Cursor::new(bytes));
    reader.set_format(format);
    reader.decode().map_err(|e| decode_err(e.to_string()))
}

/// Reads an 8-bit PNG or binary PPM. Gray images are broadcast to RGB.
pub fn read_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let rgb = decode(path)?.into_rgb8();
    let (w, h) = rgb.dimensions();
    let data = rgb.pixels().map(|p| p.0).collect();
    RgbImage::new(Shape::new_2d(w as usize, h as usize), data)
}

/// Reads a directory of equally sized 2D slices, ordered by file name.
pub fn read_volume(dir: impl AsRef<Path>) -> Result<RgbImage> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && image_format(p).is_ok())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no PNG/PPM slices in {}", dir.display())));
    }
    let mut data = Vec::new();
    let mut dims = None;
    for p in &paths {
        let slice = read_image(p)?;
        let s = slice.shape();
        match dims {
            None => dims = Some((s.width, s.height)),
            Some(d) if d != (s.width, s.height) => {
                return Err(Error::dims(format!("{}x{}", d.0, d.1), format!("{} in {}", s, p.display())));
            }
            _ => {}
        }
        data.extend_from_slice(slice.pixels());
    }
    let (w, h) = dims.unwrap();
    RgbImage::new(Shape::new_3d(w, h, paths.len()), data)
}

/// Writes a label map with dense ids: 16-bit gray PNG for `.png`, CSV for `.csv`.
pub fn write_label_map(map: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let map = map.normalized();
    match extension(path).as_deref() {
        Some("png") => {
            let count = map.region_count();
            if count > usize::from(u16::MAX) {
                return Err(Error::TooManyRegionsForPng { count });
            }
            let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(
                map.width as u32,
                map.height as u32,
                map.ids.iter().map(|&id| id as u16).collect(),
            )
            .expect("buffer length matches dimensions");
            save(&DynamicImage::ImageLuma16(buf), path, ImageFormat::Png)
        }
        Some("csv") => {
            let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
            let mut out = BufWriter::new(file);
            let mut line = String::new();
            for row in map.ids.chunks(map.width) {
                line.clear();
                for (i, id) in row.iter().enumerate() {
                    if i > 0 {
                        line.push(',');
                    }
                    write!(line, "{id}").unwrap();
                }
                line.push('\n');
                out.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
            }
            out.flush().map_err(|e| Error::io(path, e))
        }
        _ => Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
}

pub fn write_rag_label_map(rag: &Rag, path: impl AsRef<Path>) -> Result<()> {
    write_label_map(&LabelMap::from_rag(rag), path)
}

pub fn read_label_map(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("png") => {
            let img = decode(path)?;
            let (w, h) = (img.width() as usize, img.height() as usize);
            let ids = match img {
                DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(u32::from).collect(),
                DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(u32::from).collect(),
                other => {
                    return Err(Error::Decode {
                        format: "PNG",
                        path: path.to_path_buf(),
                        message: format!("label maps must be grayscale, got {:?}", other.color()),
                    })
                }
            };
            LabelMap::new(w, h, ids)
        }
        Some("csv") => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let bad = |line: usize, message: String| Error::Decode {
                format: "CSV",
                path: path.to_path_buf(),
                message: format!("line {line}: {message}"),
            };
            let mut ids = Vec::new();
            let mut width = None;
            let mut height = 0;
            for (n, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                let before = ids.len();
                for field in line.split(',') {
                    let id = field.trim().parse::<u32>().map_err(|e| bad(n + 1, format!("{field:?}: {e}")))?;
                    ids.push(id);
                }
                let w = ids.len() - before;
                match width {
                    None => width = Some(w),
                    Some(prev) if prev != w => return Err(bad(n + 1, format!("expected {prev} ids, got {w}"))),
                    _ => {}
                }
                height += 1;
            }
            LabelMap::new(width.unwrap_or(0), height, ids)
        }
        _ => Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
}

fn save(img: &DynamicImage, path: &Path, format: ImageFormat) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    img.write_to(&mut out, format).map_err(|e| Error::Decode {
        format: "PNG",
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Image pixels with region boundaries painted in [`BOUNDARY_COLOR`].
pub fn overlay(img: &RgbImage, map: &LabelMap) -> Result<RgbImage> {
    let s = img.shape();
    if (s.width, s.height * s.depth) != (map.width, map.height) {
        return Err(Error::dims(
            format!("{}x{}", s.width, s.height * s.depth),
            format!("{}x{}", map.width, map.height),
        ));
    }
    let mask = boundary_mask(map);
    let data = img
        .pixels()
        .iter()
        .zip(&mask)
        .map(|(&p, &b)| if b { BOUNDARY_COLOR } else { p })
        .collect();
    RgbImage::new(s, data)
}

/// Writes the overlay PNG and, if requested, a black/white boundary map.
pub fn write_overlay(img: &RgbImage, rag: &Rag, path: impl AsRef<Path>, boundary_path: Option<&Path>) -> Result<()> {
    let map = LabelMap::from_rag(rag);
    let over = overlay(img, &map)?;
    let raw: Vec<u8> = over.pixels().iter().flatten().copied().collect();
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(map.width as u32, map.height as u32, raw).expect("buffer length matches dimensions");
    save(&DynamicImage::ImageRgb8(buf), path.as_ref(), ImageFormat::Png)?;
    if let Some(bp) = boundary_path {
        write_boundary_map(rag, bp)?;
    }
    Ok(())
}

/// White boundary pixels on black.
pub fn write_boundary_map(rag: &Rag, path: impl AsRef<Path>) -> Result<()> {
    let map = LabelMap::from_rag(rag);
    let raw = boundary_mask(&map).into_iter().map(|b| if b { 255u8 } else { 0 }).collect();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(map.width as u32, map.height as u32, raw).expect("buffer length matches dimensions");
    save(&DynamicImage::ImageLuma8(buf), path.as_ref(), ImageFormat::Png)
}

/// One CSV line per region: id, size, label, then the mean features.
pub fn rag_summary(rag: &Rag) -> String {
    let mut out = String::from("id,size,label");
    for d in 0..rag.dim() {
        write!(out, ",mean{d}").unwrap();
    }
    out.push('\n');
    for (i, r) in rag.regions().iter().enumerate() {
        write!(out, "{i},{},{}", r.size, r.label).unwrap();
        for m in &r.mean {
            write!(out, ",{m:.9}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p6_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ppm");
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 20, 30]);
        fs::write(&p, &bytes).unwrap();
        let img = read_image(&p).unwrap();
        assert_eq!(img.shape(), Shape::new_2d(2, 2));
        assert_eq!(img.pixels(), &[[255, 0, 0], [0, 255, 0], [0, 0, 255], [10, 20, 30]]);

        fs::write(&p, &bytes[..bytes.len() - 4]).unwrap();
        let err = read_image(&p).unwrap_err();
        assert!(err.to_string().contains("PPM"), "{err}");
    }

    #[test]
    fn gray_png_broadcast() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.png");
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_raw(3, 1, vec![0, 128, 255]).unwrap();
        buf.save(&p).unwrap();
        let img = read_image(&p).unwrap();
        assert_eq!(img.pixels(), &[[0, 0, 0], [128, 128, 128], [255, 255, 255]]);
    }

    #[test]
    fn unsupported_and_missing() {
        assert!(matches!(read_image("x.jpg"), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(read_image("/nonexistent/x.png"), Err(Error::Io { .. })));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.png");
        fs::write(&p, b"not a png").unwrap();
        assert!(read_image(&p).unwrap_err().to_string().contains("PNG"));
    }

    #[test]
    fn label_map_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let map = LabelMap::new(4, 3, vec![0, 0, 1, 1, 2, 2, 1, 1, 3, 3, 3, 1]).unwrap();
        for name in ["m.png", "m.csv"] {
            let p = dir.path().join(name);
            write_label_map(&map, &p).unwrap();
            assert_eq!(read_label_map(&p).unwrap(), map);
        }
        let sparse = LabelMap::new(2, 1, vec![70000, 5]).unwrap();
        let p = dir.path().join("s.csv");
        write_label_map(&sparse, &p).unwrap();
        assert_eq!(read_label_map(&p).unwrap().ids, vec![0, 1]);
    }

    #[test]
    fn png_region_limit() {
        let n = 65536;
        let map = LabelMap::new(n, 1, (0..n as u32).collect()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let err = write_label_map(&map, dir.path().join("big.png")).unwrap_err();
        assert!(matches!(err, Error::TooManyRegionsForPng { count: 65536 }));
        assert!(err.to_string().contains("CSV"));
        let p = dir.path().join("big.csv");
        write_label_map(&map, &p).unwrap();
        assert_eq!(read_label_map(&p).unwrap(), map);
    }

    #[test]
    fn ragged_csv_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        fs::write(&p, "0,1\n0\n").unwrap();
        assert!(read_label_map(&p).unwrap_err().to_string().contains("line 2"));
        fs::write(&p, "0,x\n").unwrap();
        assert!(read_label_map(&p).is_err());
    }

    #[test]
    fn overlay_lines() {
        let img = RgbImage::new(Shape::new_2d(4, 2), vec![[9, 9, 9]; 8]).unwrap();
        let one = LabelMap::new(4, 2, vec![0; 8]).unwrap();
        assert_eq!(overlay(&img, &one).unwrap(), img);
        let halves = LabelMap::new(4, 2, vec![0, 0, 1, 1, 0, 0, 1, 1]).unwrap();
        let o = overlay(&img, &halves).unwrap();
        for (i, p) in o.pixels().iter().enumerate() {
            let col = i % 4;
            assert_eq!(*p == BOUNDARY_COLOR, col == 1 || col == 2);
        }
        let wrong = LabelMap::new(2, 2, vec![0; 4]).unwrap();
        assert!(overlay(&img, &wrong).is_err());
    }
}
