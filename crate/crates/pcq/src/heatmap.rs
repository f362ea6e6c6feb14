//! Grids, class catalogs, annotations, and ground-truth heatmap rendering.
//!
//! A heatmap is one 2D activation grid per object class, values in [0, 1].
//! Targets are rendered from annotated object centers: each center splats an
//! unnormalized Gaussian with sigma = extent / 3 onto its class channel,
//! overlapping splats combine by elementwise max, and the cell nearest the
//! center is snapped to exactly 1.0.

use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contributions beyond this many sigmas are below 1e-12 and are not splatted.
const SPLAT_CUTOFF_SIGMAS: f64 = 7.5;

/// Ordered set of object classes; channel `c` of every heatmap is class `c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCatalog {
    classes: Vec<String>,
}

impl ClassCatalog {
    pub fn new<S: Into<String>>(classes: impl IntoIterator<Item = S>) -> Result<Self> {
        let classes: Vec<String> = classes.into_iter().map(Into::into).collect();
        for (i, name) in classes.iter().enumerate() {
            if classes[..i].contains(name) {
                return Err(Error::DuplicateClass(name.clone()));
            }
        }
        Ok(Self { classes })
    }

    /// The ten nuScenes categories, in their conventional order.
    pub fn nuscenes() -> Self {
        Self::new([
            "car",
            "truck",
            "construction_vehicle",
            "bus",
            "trailer",
            "barrier",
            "motorcycle",
            "bicycle",
            "pedestrian",
            "traffic_cone",
        ])
        .expect("static names are unique")
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.classes.get(index).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(String::as_str)
    }
}

/// K-channel activation grid; storage is channel-major, row-major per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    channels: usize,
    values: Vec<f64>,
}

impl Heatmap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            width,
            height,
            channels,
            values: vec![0.0; channels * height * width],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    #[inline]
    fn index(&self, c: usize, x: usize, y: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.values[self.index(c, x, y)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, x: usize, y: usize, v: f64) {
        let i = self.index(c, x, y);
        self.values[i] = v;
    }

    /// Row-major slice of one channel.
    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.values[c * plane..(c + 1) * plane]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let plane = self.height * self.width;
        &mut self.values[c * plane..(c + 1) * plane]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Max over channels at each cell, row-major.
    pub fn max_over_channels(&self) -> Vec<f64> {
        let plane = self.height * self.width;
        let mut out = vec![f64::NEG_INFINITY; plane];
        for c in 0..self.channels {
            for (o, &v) in out.iter_mut().zip(self.channel(c)) {
                if v > *o {
                    *o = v;
                }
            }
        }
        out
    }
}

/// One annotated object: class, sub-cell center position, characteristic radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectCenter {
    pub class_index: usize,
    pub x: f64,
    pub y: f64,
    /// Radius in cells at which the object effectively ends; drives the
    /// Gaussian spread (sigma = extent / 3).
    pub extent: f64,
}

impl ObjectCenter {
    /// Integer cell nearest the real-valued center.
    pub fn cell(&self) -> (usize, usize) {
        (self.x.round() as usize, self.y.round() as usize)
    }
}

/// Ground-truth centers of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameAnnotation {
    pub frame_id: String,
    pub width: usize,
    pub height: usize,
    pub centers: Vec<ObjectCenter>,
}

impl FrameAnnotation {
    pub fn validate(&self, catalog: &ClassCatalog) -> Result<()> {
        for (index, c) in self.centers.iter().enumerate() {
            if c.class_index >= catalog.len() {
                return Err(Error::UnknownClassIndex {
                    class_index: c.class_index,
                    class_count: catalog.len(),
                });
            }
            let in_bounds =
                c.x >= 0.0 && c.x < self.width as f64 && c.y >= 0.0 && c.y < self.height as f64;
            if !in_bounds || c.extent <= 0.0 || c.extent.is_nan() {
                return Err(Error::CenterOutOfBounds {
                    frame_id: self.frame_id.clone(),
                    index,
                    x: c.x,
                    y: c.y,
                    width: self.width,
                    height: self.height,
                });
            }
        }
        Ok(())
    }

    pub fn max_extent(&self) -> f64 {
        self.centers.iter().fold(0.0, |m, c| m.max(c.extent))
    }
}

/// Ground-truth count per class: counts[c] = number of centers of class c.
pub fn annotation_counts(ann: &FrameAnnotation, catalog: &ClassCatalog) -> Vec<usize> {
    let mut counts = vec![0usize; catalog.len()];
    for c in &ann.centers {
        if c.class_index < counts.len() {
            counts[c.class_index] += 1;
        }
    }
    counts
}

/// Splat one Gaussian onto a channel by elementwise max. No snapping here.
fn splat(hm: &mut Heatmap, center: &ObjectCenter) {
    let sigma = center.extent / 3.0;
    let radius = (SPLAT_CUTOFF_SIGMAS * sigma).ceil() as i64;
    let inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    let cx = center.x;
    let cy = center.y;
    let x_lo = ((cx.floor() as i64) - radius).max(0) as usize;
    let x_hi = ((cx.ceil() as i64) + radius).min(hm.width as i64 - 1) as usize;
    let y_lo = ((cy.floor() as i64) - radius).max(0) as usize;
    let y_hi = ((cy.ceil() as i64) + radius).min(hm.height as i64 - 1) as usize;
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let v = (-(dx * dx + dy * dy) * inv_two_sigma_sq).exp();
            if v > hm.get(center.class_index, x, y) {
                hm.set(center.class_index, x, y, v);
            }
        }
    }
}

/// Render the K-channel target heatmap for an annotation.
///
/// Each center cell (nearest integer cell) ends up at exactly 1.0 so targets
/// carry one unambiguous peak per object.
pub fn render_target_heatmap(ann: &FrameAnnotation, catalog: &ClassCatalog) -> Result<Heatmap> {
    ann.validate(catalog)?;
    let mut hm = Heatmap::zeros(catalog.len(), ann.height, ann.width);
    for center in &ann.centers {
        splat(&mut hm, center);
    }
    for center in &ann.centers {
        let (x, y) = center.cell();
        // round() of an in-bounds coordinate can land on width/height; clamp.
        let x = x.min(ann.width - 1);
        let y = y.min(ann.height - 1);
        hm.set(center.class_index, x, y, 1.0);
    }
    Ok(hm)
}

// --- PCQH file format -------------------------------------------------------
//
// magic "PCQH", little-endian u32 {channels, height, width}, then
// channel-major row-major f32 values. A stream file is a concatenation of
// records in frame order.

const MAGIC: &[u8; 4] = b"PCQH";

pub fn write_heatmap<W: Write>(w: &mut W, hm: &Heatmap) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(hm.channels as u32).to_le_bytes())?;
    w.write_all(&(hm.height as u32).to_le_bytes())?;
    w.write_all(&(hm.width as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(hm.values.len() * 4);
    for &v in &hm.values {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Read one record. Returns `Ok(None)` at clean end-of-stream.
pub fn read_heatmap<R: Read>(r: &mut R) -> Result<Option<Heatmap>> {
    let mut magic = [0u8; 4];
    match r.read(&mut magic)? {
        0 => return Ok(None),
        4 => {}
        n => {
            // Short read of the magic can still be a partial fill; finish it.
            r.read_exact(&mut magic[n..])
                .map_err(|_| Error::HeatmapFormat("truncated magic".into()))?;
        }
    }
    if &magic != MAGIC {
        return Err(Error::HeatmapFormat(format!(
            "bad magic {:02x?}, expected \"PCQH\"",
            magic
        )));
    }
    let mut u32_buf = [0u8; 4];
    let mut dim = || -> Result<usize> {
        r.read_exact(&mut u32_buf)
            .map_err(|_| Error::HeatmapFormat("truncated header".into()))?;
        Ok(u32::from_le_bytes(u32_buf) as usize)
    };
    let channels = dim()?;
    let height = dim()?;
    let width = dim()?;
    let n = channels
        .checked_mul(height)
        .and_then(|p| p.checked_mul(width))
        .ok_or_else(|| Error::HeatmapFormat("dimensions overflow".into()))?;
    let mut raw = vec![0u8; n * 4];
    r.read_exact(&mut raw)
        .map_err(|_| Error::HeatmapFormat("truncated values".into()))?;
    let values = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Ok(Some(Heatmap {
        width,
        height,
        channels,
        values,
    }))
}

pub fn save_heatmaps(path: &Path, maps: &[Heatmap]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for hm in maps {
        write_heatmap(&mut file, hm)?;
    }
    file.flush()?;
    Ok(())
}

pub fn load_heatmaps(path: &Path) -> Result<Vec<Heatmap>> {
    let mut file = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    while let Some(hm) = read_heatmap(&mut file)? {
        out.push(hm);
    }
    Ok(out)
}
