//! Binary foreground/background grids and their 8-connected components.

use std::collections::VecDeque;

use crate::error::{Result, ShapeError};

/// Integer pixel coordinate `(row, col)`.
pub type Pixel = (usize, usize);

/// Offsets of the 8 neighbours, clockwise on screen (rows grow downwards)
/// starting from the west neighbour.
pub(crate) const NEIGHBORS_CW: [(isize, isize); 8] = [
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
];

/// A 2-D binary mask stored row-major; `1` marks foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(ShapeError::InvalidParams(format!(
                "mask data has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(bad) = data.iter().find(|&&v| v > 1) {
            return Err(ShapeError::InvalidParams(format!(
                "mask value {bad} is not 0 or 1"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    /// Builds a mask from a predicate over `(row, col)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c) as u8);
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Mask containing exactly the listed pixels.
    pub fn from_pixels(width: usize, height: usize, pixels: &[Pixel]) -> Self {
        let mut mask = Self::zeros(width, height);
        for &(r, c) in pixels {
            mask.set(r, c, true);
        }
        mask
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `(width, height)`
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col] != 0
    }

    /// Like [`get`](Self::get) but out-of-range coordinates read as background.
    #[inline]
    pub fn get_signed(&self, row: isize, col: isize) -> bool {
        row >= 0
            && col >= 0
            && (row as usize) < self.height
            && (col as usize) < self.width
            && self.get(row as usize, col as usize)
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value as u8;
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn foreground_pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(move |(i, _)| (i / self.width, i % self.width))
    }

    /// Rotates the grid by 90° clockwise on screen.
    pub fn rotate90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        // new width = h, new height = w; (r, c) -> (c, h - 1 - r)
        let mut out = Self::zeros(h, w);
        for r in 0..h {
            for c in 0..w {
                if self.get(r, c) {
                    out.set(c, h - 1 - r, true);
                }
            }
        }
        out
    }

    /// Translates the content by `(d_row, d_col)`; pixels leaving the grid are dropped.
    pub fn shifted(&self, d_row: isize, d_col: isize) -> Self {
        let mut out = Self::zeros(self.width, self.height);
        for (r, c) in self.foreground_pixels() {
            let (nr, nc) = (r as isize + d_row, c as isize + d_col);
            if nr >= 0 && nc >= 0 && (nr as usize) < self.height && (nc as usize) < self.width {
                out.set(nr as usize, nc as usize, true);
            }
        }
        out
    }

    /// Embeds the mask into a larger zero grid at the given offset.
    pub fn padded(&self, width: usize, height: usize, row_off: usize, col_off: usize) -> Self {
        let mut out = Self::zeros(width, height);
        for (r, c) in self.foreground_pixels() {
            if r + row_off < height && c + col_off < width {
                out.set(r + row_off, c + col_off, true);
            }
        }
        out
    }

    /// Labels 8-connected foreground components.
    pub fn components(&self) -> ComponentMap {
        ComponentMap::label(self)
    }

    /// Pixel-wise intersection over union; `0/0` is defined as 0.
    pub fn iou(&self, other: &BinaryMask) -> Result<f64> {
        ensure_same_dims(self.dims(), other.dims())?;
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.data.iter().zip(&other.data) {
            inter += (a & b) as usize;
            union += (a | b) as usize;
        }
        Ok(if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        })
    }

    /// Fills a closed polygon given as real `(row, col)` vertices: a pixel is
    /// foreground when its centre lies inside (even-odd rule) or when the
    /// polygon outline passes through it.
    pub fn from_polygon(width: usize, height: usize, vertices: &[(f64, f64)]) -> Self {
        let mut mask = Self::zeros(width, height);
        let n = vertices.len();
        if n == 0 {
            return mask;
        }
        for r in 0..height {
            let y = r as f64;
            let mut xs = Vec::new();
            for i in 0..n {
                let (r0, c0) = vertices[i];
                let (r1, c1) = vertices[(i + 1) % n];
                if (r0 <= y && r1 > y) || (r1 <= y && r0 > y) {
                    xs.push(c0 + (y - r0) / (r1 - r0) * (c1 - c0));
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                let lo = pair[0].ceil().max(0.0);
                let hi = pair[1].floor().min(width as f64 - 1.0);
                let mut c = lo;
                while c <= hi {
                    mask.set(r, c as usize, true);
                    c += 1.0;
                }
            }
        }
        for i in 0..n {
            let (r0, c0) = vertices[i];
            let (r1, c1) = vertices[(i + 1) % n];
            let steps = ((r1 - r0).abs().max((c1 - c0).abs()) * 4.0).ceil().max(1.0) as usize;
            for s in 0..=steps {
                let t = s as f64 / steps as f64;
                let (r, c) = ((r0 + t * (r1 - r0)).round(), (c0 + t * (c1 - c0)).round());
                if r >= 0.0 && c >= 0.0 && (r as usize) < height && (c as usize) < width {
                    mask.set(r as usize, c as usize, true);
                }
            }
        }
        mask
    }
}

pub(crate) fn ensure_same_dims(left: (usize, usize), right: (usize, usize)) -> Result<()> {
    if left != right {
        return Err(ShapeError::DimensionMismatch { left, right });
    }
    Ok(())
}

/// One 8-connected foreground component.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    /// Label in raster order of the component's first pixel, starting at 0.
    pub id: usize,
    pub area: usize,
    /// Topmost-then-leftmost pixel.
    pub first: Pixel,
    pub pixels: Vec<Pixel>,
}

impl Component {
    /// Arithmetic mean of the component's pixel coordinates.
    pub fn centroid(&self) -> (f64, f64) {
        let n = self.pixels.len() as f64;
        let (sr, sc) = self.pixels.iter().fold((0.0, 0.0), |(sr, sc), &(r, c)| {
            (sr + r as f64, sc + c as f64)
        });
        (sr / n, sc / n)
    }
}

/// Component labelling of a mask.
#[derive(Debug, Clone)]
pub struct ComponentMap {
    width: usize,
    height: usize,
    labels: Vec<Option<usize>>,
    components: Vec<Component>,
}

impl ComponentMap {
    fn label(mask: &BinaryMask) -> Self {
        let (w, h) = mask.dims();
        let mut labels = vec![None; w * h];
        let mut components = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..w * h {
            if mask.data[start] == 0 || labels[start].is_some() {
                continue;
            }
            let id = components.len();
            labels[start] = Some(id);
            queue.push_back(start);
            let mut pixels = Vec::new();
            while let Some(i) = queue.pop_front() {
                let (r, c) = (i / w, i % w);
                pixels.push((r, c));
                for (dr, dc) in NEIGHBORS_CW {
                    let (nr, nc) = (r as isize + dr, c as isize + dc);
                    if mask.get_signed(nr, nc) {
                        let j = nr as usize * w + nc as usize;
                        if labels[j].is_none() {
                            labels[j] = Some(id);
                            queue.push_back(j);
                        }
                    }
                }
            }
            pixels.sort_unstable();
            components.push(Component {
                id,
                area: pixels.len(),
                first: (start / w, start % w),
                pixels,
            });
        }
        Self {
            width: w,
            height: h,
            labels,
            components,
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Component> {
        self.components.get(id)
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    #[inline]
    pub fn label_at(&self, row: isize, col: isize) -> Option<usize> {
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            return None;
        }
        self.labels[row as usize * self.width + col as usize]
    }

    /// Components by descending area; ties go to the component whose first
    /// pixel comes earlier in raster order.
    pub fn by_area(&self) -> Vec<&Component> {
        let mut v: Vec<&Component> = self.components.iter().collect();
        v.sort_by(|a, b| b.area.cmp(&a.area).then(a.id.cmp(&b.id)));
        v
    }

    pub fn largest(&self) -> Option<&Component> {
        self.by_area().into_iter().next()
    }

    /// Mask holding only the given component.
    pub fn component_mask(&self, id: usize) -> BinaryMask {
        let mut m = BinaryMask::zeros(self.width, self.height);
        if let Some(comp) = self.components.get(id) {
            for &(r, c) in &comp.pixels {
                m.set(r, c, true);
            }
        }
        m
    }
}
