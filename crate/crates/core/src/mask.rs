//! Binary-mask geometry primitives.
//!
//! Masks are single-channel rasters whose pixels are strictly 0 or 1
//! (serialized as 0/255 in PNG files). All region facts used elsewhere —
//! areas, centroids, bounding boxes, connected components, overlap
//! fractions, 3x3 grid cells, compass directions, normalized distances —
//! are computed here.

use crate::error::{Error, Result};

/// Row-major binary raster. One byte per pixel, value 0 or 1.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<u8>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("set", &self.count_ones())
            .finish()
    }
}

impl BinaryMask {
    /// Build from raw 0/1 bytes, row-major.
    pub fn from_bits(width: u32, height: u32, bits: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMask(format!(
                "zero dimension: {width}x{height}"
            )));
        }
        if bits.len() != (width as usize) * (height as usize) {
            return Err(Error::InvalidMask(format!(
                "bit length {} != {}x{}",
                bits.len(),
                width,
                height
            )));
        }
        if let Some(&v) = bits.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidMask(format!("bit value {v} not in {{0,1}}")));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    /// All-zero mask.
    pub fn zeros(width: u32, height: u32) -> Self {
        Self::from_bits(width, height, vec![0; (width as usize) * (height as usize)])
            .expect("nonzero dims")
    }

    /// Build by evaluating a predicate at every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity((width as usize) * (height as usize));
        for y in 0..height {
            for x in 0..width {
                bits.push(u8::from(f(x, y)));
            }
        }
        Self::from_bits(width, height, bits).expect("nonzero dims")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        debug_assert!(x < self.width && y < self.height);
        self.bits[y as usize * self.width as usize + x as usize] == 1
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        debug_assert!(x < self.width && y < self.height);
        self.bits[y as usize * self.width as usize + x as usize] = u8::from(value);
    }

    /// Raw 0/1 bytes, row-major.
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|&b| b as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    /// Coordinates of set pixels, row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(move |(i, _)| ((i as u32) % w, (i as u32) / w))
    }

    /// Number of pixels set in both masks. Errors on dimension mismatch.
    pub fn intersection_count(&self, other: &BinaryMask) -> Result<u64> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a == 1 && b == 1)
            .count() as u64)
    }

    /// Does any set pixel lie on the image border?
    pub fn touches_border(&self) -> bool {
        let (w, h) = (self.width, self.height);
        for x in 0..w {
            if self.get(x, 0) || self.get(x, h - 1) {
                return true;
            }
        }
        for y in 0..h {
            if self.get(0, y) || self.get(w - 1, y) {
                return true;
            }
        }
        false
    }
}

/// Aggregate geometry of a mask's set pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionStats {
    pub area_px: u64,
    /// Inclusive pixel bounds: (min_x, min_y, max_x, max_y).
    pub bbox: (u32, u32, u32, u32),
    /// Arithmetic mean of set-pixel coordinates.
    pub centroid: (f64, f64),
    /// Number of 4-connected components.
    pub component_count: usize,
}

/// One of the nine 3x3 grid cells of an image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GridCell {
    TopLeft,
    Top,
    TopRight,
    Left,
    Center,
    Right,
    BottomLeft,
    Bottom,
    BottomRight,
}

impl GridCell {
    pub const ALL: [GridCell; 9] = [
        GridCell::TopLeft,
        GridCell::Top,
        GridCell::TopRight,
        GridCell::Left,
        GridCell::Center,
        GridCell::Right,
        GridCell::BottomLeft,
        GridCell::Bottom,
        GridCell::BottomRight,
    ];

    fn from_indices(col: u32, row: u32) -> GridCell {
        Self::ALL[(row * 3 + col) as usize]
    }

    pub fn label(self) -> &'static str {
        match self {
            GridCell::TopLeft => "top-left",
            GridCell::Top => "top",
            GridCell::TopRight => "top-right",
            GridCell::Left => "left",
            GridCell::Center => "center",
            GridCell::Right => "right",
            GridCell::BottomLeft => "bottom-left",
            GridCell::Bottom => "bottom",
            GridCell::BottomRight => "bottom-right",
        }
    }
}

/// Eight-way compass direction in image coordinates (y grows downward,
/// "north" points toward smaller y).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction8 {
    North,
    Northeast,
    East,
    Southeast,
    South,
    Southwest,
    West,
    Northwest,
}

impl Direction8 {
    pub const ALL: [Direction8; 8] = [
        Direction8::North,
        Direction8::Northeast,
        Direction8::East,
        Direction8::Southeast,
        Direction8::South,
        Direction8::Southwest,
        Direction8::West,
        Direction8::Northwest,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Direction8::North => "north",
            Direction8::Northeast => "northeast",
            Direction8::East => "east",
            Direction8::Southeast => "southeast",
            Direction8::South => "south",
            Direction8::Southwest => "southwest",
            Direction8::West => "west",
            Direction8::Northwest => "northwest",
        }
    }

    /// The 180-degree opposite label.
    pub fn opposite(self) -> Direction8 {
        match self {
            Direction8::North => Direction8::South,
            Direction8::Northeast => Direction8::Southwest,
            Direction8::East => Direction8::West,
            Direction8::Southeast => Direction8::Northwest,
            Direction8::South => Direction8::North,
            Direction8::Southwest => Direction8::Northeast,
            Direction8::West => Direction8::East,
            Direction8::Northwest => Direction8::Southeast,
        }
    }
}

/// Area, bounding box, centroid, and 4-connected component count of a mask.
///
/// Errors with `EmptyMask` when no pixel is set.
pub fn region_stats(mask: &BinaryMask) -> Result<RegionStats> {
    let mut area: u64 = 0;
    let mut sum_x: f64 = 0.0;
    let mut sum_y: f64 = 0.0;
    let (mut min_x, mut min_y) = (u32::MAX, u32::MAX);
    let (mut max_x, mut max_y) = (0u32, 0u32);
    for (x, y) in mask.iter_set() {
        area += 1;
        sum_x += x as f64;
        sum_y += y as f64;
        min_x = min_x.min(x);
        min_y = min_y.min(y);
        max_x = max_x.max(x);
        max_y = max_y.max(y);
    }
    if area == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(RegionStats {
        area_px: area,
        bbox: (min_x, min_y, max_x, max_y),
        centroid: (sum_x / area as f64, sum_y / area as f64),
        component_count: component_count(mask),
    })
}

/// Count 4-connected components of set pixels.
fn component_count(mask: &BinaryMask) -> usize {
    let (w, h) = (mask.width as usize, mask.height as usize);
    let mut visited = vec![false; w * h];
    let mut count = 0;
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            if visited[idx] || mask.bits[idx] == 0 {
                continue;
            }
            count += 1;
            visited[idx] = true;
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                let mut try_push = |nx: usize, ny: usize, stack: &mut Vec<(usize, usize)>| {
                    let nidx = ny * w + nx;
                    if !visited[nidx] && mask.bits[nidx] == 1 {
                        visited[nidx] = true;
                        stack.push((nx, ny));
                    }
                };
                if cx > 0 {
                    try_push(cx - 1, cy, &mut stack);
                }
                if cx + 1 < w {
                    try_push(cx + 1, cy, &mut stack);
                }
                if cy > 0 {
                    try_push(cx, cy - 1, &mut stack);
                }
                if cy + 1 < h {
                    try_push(cx, cy + 1, &mut stack);
                }
            }
        }
    }
    count
}

/// |a ∩ b| / |a|. The caller passes the source mask as `a`.
pub fn overlap_fraction(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let inter = a.intersection_count(b)?;
    let denom = a.count_ones();
    if denom == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(inter as f64 / denom as f64)
}

/// 3x3 grid cell of a point: indices floor(3x/w), floor(3y/h), clamped to {0,1,2}.
pub fn grid_cell(point: (f64, f64), image: (u32, u32)) -> Result<GridCell> {
    let (x, y) = point;
    let (w, h) = image;
    if !(0.0..(w as f64)).contains(&x) || !(0.0..(h as f64)).contains(&y) {
        return Err(Error::OutOfBounds(x, y, w, h));
    }
    let col = ((3.0 * x / w as f64).floor() as u32).min(2);
    let row = ((3.0 * y / h as f64).floor() as u32).min(2);
    Ok(GridCell::from_indices(col, row))
}

/// Compass direction of `to` as seen from `from`, in image coordinates.
///
/// The plane is partitioned into eight 45-degree sectors centered on the
/// compass axes; an angle exactly on a sector edge resolves to the
/// clockwise-later sector.
pub fn direction(from: (f64, f64), to: (f64, f64)) -> Result<Direction8> {
    let dx = to.0 - from.0;
    let dy = to.1 - from.1;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    // Math-convention angle with y flipped so that north (smaller image y)
    // sits at +90 degrees.
    let theta = (-dy).atan2(dx).to_degrees();
    Ok(sector_of(theta))
}

/// Map a math-convention angle in degrees to its compass sector.
///
/// Sectors are (center-22.5, center+22.5]; the half-open end implements the
/// clockwise-later tie-break for angles exactly on a sector edge.
fn sector_of(theta: f64) -> Direction8 {
    let k = ((theta - 22.5) / 45.0).ceil() as i32;
    match k.rem_euclid(8) {
        0 => Direction8::East,
        1 => Direction8::Northeast,
        2 => Direction8::North,
        3 => Direction8::Northwest,
        4 => Direction8::West,
        5 => Direction8::Southwest,
        6 => Direction8::South,
        7 => Direction8::Southeast,
        _ => unreachable!(),
    }
}

/// Euclidean distance between two in-bounds points divided by the image
/// diagonal sqrt(w^2 + h^2).
pub fn normalized_distance(a: (f64, f64), b: (f64, f64), image: (u32, u32)) -> Result<f64> {
    let (w, h) = image;
    for &(x, y) in &[a, b] {
        if !(0.0..(w as f64)).contains(&x) || !(0.0..(h as f64)).contains(&y) {
            return Err(Error::OutOfBounds(x, y, w, h));
        }
    }
    let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
    let diag = ((w as f64).powi(2) + (h as f64).powi(2)).sqrt();
    Ok(d / diag)
}
