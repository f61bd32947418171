//! Outer-boundary tracing and the distance-to-centre profile along it.
//!
//! Contours are traced with Moore-neighbour tracing on 8-connected
//! foreground, starting at the topmost-then-leftmost pixel of a component and
//! walking clockwise on screen. Interior holes are not traced. Arc length is
//! the cumulative chord length between consecutive pixels, so every step
//! contributes either 1 or √2.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{Result, ShapeError};
use crate::mask::{BinaryMask, Component, ComponentMap, Pixel, NEIGHBORS_CW};

/// Minimum distance allowed between the centroid and any contour point.
const CENTROID_EPS: f64 = 1e-9;

/// Which components [`trace_contours`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectSelector {
    Largest,
    All,
}

/// Ordered closed boundary pixel cycle with its arc-length parameterisation.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    points: Vec<Pixel>,
    arc_lengths: Vec<f64>,
    total_length: f64,
}

impl Contour {
    /// Builds a contour from an ordered closed pixel cycle. Consecutive
    /// points (including last → first) must be 8-neighbours.
    pub fn from_points(points: Vec<Pixel>) -> Result<Self> {
        let distinct = points.iter().collect::<HashSet<_>>().len();
        if distinct < 4 {
            return Err(ShapeError::DegenerateObject {
                boundary_pixels: distinct,
            });
        }
        let n = points.len();
        let mut arc_lengths = Vec::with_capacity(n);
        let mut acc = 0.0;
        for i in 0..n {
            arc_lengths.push(acc);
            acc += chord(points[i], points[(i + 1) % n]).ok_or_else(|| {
                ShapeError::InvalidParams(format!(
                    "contour points {} and {} are not 8-neighbours",
                    i,
                    (i + 1) % n
                ))
            })?;
        }
        Ok(Self {
            points,
            arc_lengths,
            total_length: acc,
        })
    }

    pub fn points(&self) -> &[Pixel] {
        &self.points
    }

    /// Cumulative arc length `l_t` at each point, `l_0 = 0`.
    pub fn arc_lengths(&self) -> &[f64] {
        &self.arc_lengths
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn start_point(&self) -> Pixel {
        self.points[0]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same cycle started `shift` points later.
    pub fn rotated_start(&self, shift: usize) -> Self {
        let mut pts = self.points.clone();
        let n = pts.len();
        pts.rotate_left(shift % n);
        Self::from_points(pts).expect("rotation preserves a valid cycle")
    }

    /// Marks the contour pixels (outline only) in a mask of the given size.
    pub fn rasterize(&self, width: usize, height: usize) -> BinaryMask {
        BinaryMask::from_pixels(width, height, &self.points)
    }
}

fn chord(a: Pixel, b: Pixel) -> Option<f64> {
    let dr = a.0.abs_diff(b.0);
    let dc = a.1.abs_diff(b.1);
    match (dr, dc) {
        (0, 1) | (1, 0) => Some(1.0),
        (1, 1) => Some(std::f64::consts::SQRT_2),
        _ => None,
    }
}

/// Traces the outer boundary of one labelled component.
pub fn trace_component(labels: &ComponentMap, component: &Component) -> Result<Contour> {
    let id = component.id;
    let inside = |p: (isize, isize)| labels.label_at(p.0, p.1) == Some(id);
    let start = (component.first.0 as isize, component.first.1 as isize);

    // Scans clockwise around `cur`, beginning just after the backtrack
    // direction, and returns the next boundary pixel plus the direction from
    // it back to the last background pixel examined.
    let step = |cur: (isize, isize), back: usize| -> Option<((isize, isize), usize)> {
        for k in 1..=8 {
            let d = (back + k) % 8;
            let (dr, dc) = NEIGHBORS_CW[d];
            let next = (cur.0 + dr, cur.1 + dc);
            if inside(next) {
                let (pr, pc) = NEIGHBORS_CW[(d + 7) % 8];
                let prev = (cur.0 + pr, cur.1 + pc);
                let rel = (prev.0 - next.0, prev.1 - next.1);
                let nb = NEIGHBORS_CW
                    .iter()
                    .position(|&o| o == rel)
                    .expect("consecutive ring cells are adjacent");
                return Some((next, nb));
            }
        }
        None
    };

    let to_pixel = |p: (isize, isize)| (p.0 as usize, p.1 as usize);
    let mut points = vec![to_pixel(start)];
    // The start pixel is topmost-then-leftmost, so its west neighbour is background.
    let Some((second, mut back)) = step(start, 0) else {
        return Err(ShapeError::DegenerateObject { boundary_pixels: 1 });
    };
    let mut cur = second;
    let limit = 4 * component.area + 8;
    loop {
        if cur == start {
            let (next, nb) = step(cur, back).expect("start has a neighbour");
            if next == second {
                break;
            }
            points.push(to_pixel(cur));
            cur = next;
            back = nb;
            continue;
        }
        points.push(to_pixel(cur));
        let (next, nb) = step(cur, back).expect("traced pixel has a neighbour");
        cur = next;
        back = nb;
        if points.len() > limit {
            unreachable!("Moore trace failed to close");
        }
    }
    Contour::from_points(points)
}

/// Traces the largest foreground component's outer boundary.
pub fn trace_largest(mask: &BinaryMask) -> Result<Contour> {
    let labels = mask.components();
    let comp = labels.largest().ok_or(ShapeError::EmptyMask)?;
    trace_component(&labels, comp)
}

/// Traces the selected components. `All` returns one contour per component
/// ordered by descending area.
pub fn trace_contours(mask: &BinaryMask, selector: ObjectSelector) -> Result<Vec<Contour>> {
    let labels = mask.components();
    if labels.is_empty() {
        return Err(ShapeError::EmptyMask);
    }
    match selector {
        ObjectSelector::Largest => Ok(vec![trace_component(
            &labels,
            labels.largest().expect("non-empty"),
        )?]),
        ObjectSelector::All => labels
            .by_area()
            .into_iter()
            .map(|c| trace_component(&labels, c))
            .collect(),
    }
}

/// Area centroid `(row, col)` of the labelled component `component`.
pub fn area_centroid(mask: &BinaryMask, component: usize) -> Result<(f64, f64)> {
    let labels = mask.components();
    labels
        .get(component)
        .map(Component::centroid)
        .ok_or(ShapeError::EmptyMask)
}

/// Sampled distance-to-centre function along a closed contour.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    centroid: (f64, f64),
    xi: Vec<f64>,
    deltas: Vec<f64>,
    arc_lengths: Vec<f64>,
    total_length: f64,
    mean_radius: f64,
}

impl RadialProfile {
    /// Builds a profile from already sampled radii `xi[t]` at arc lengths
    /// `arc_lengths[t]` on a closed curve of length `total_length`.
    pub fn from_samples(
        centroid: (f64, f64),
        xi: Vec<f64>,
        arc_lengths: Vec<f64>,
        total_length: f64,
    ) -> Result<Self> {
        let n = xi.len();
        if n < 4 || arc_lengths.len() != n {
            return Err(ShapeError::InvalidParams(format!(
                "profile needs at least 4 samples with matching arc lengths (got {n} and {})",
                arc_lengths.len()
            )));
        }
        if let Some(index) = xi.iter().position(|&x| !(x > CENTROID_EPS)) {
            return Err(ShapeError::CentroidOnContour { index });
        }
        let increasing = arc_lengths.windows(2).all(|w| w[1] > w[0]);
        if arc_lengths[0] != 0.0 || !increasing || !(total_length > arc_lengths[n - 1]) {
            return Err(ShapeError::InvalidParams(
                "arc lengths must start at 0 and increase strictly below the total length".into(),
            ));
        }
        let deltas = (0..n).map(|t| xi[(t + n - 1) % n] - xi[t]).collect();
        // ξ is held at ξ_t along the arc from l_t to l_{t+1}; a_0 is its mean.
        let weighted: f64 = (0..n)
            .map(|t| {
                let next = if t + 1 < n {
                    arc_lengths[t + 1]
                } else {
                    total_length
                };
                xi[t] * (next - arc_lengths[t])
            })
            .sum();
        Ok(Self {
            centroid,
            mean_radius: weighted / total_length,
            xi,
            deltas,
            arc_lengths,
            total_length,
        })
    }

    /// Profile of a real-valued closed polyline; arc length is the cumulative
    /// chord length.
    pub fn from_polyline(points: &[(f64, f64)], centroid: (f64, f64)) -> Result<Self> {
        let n = points.len();
        let mut arcs = Vec::with_capacity(n);
        let mut acc = 0.0;
        for i in 0..n {
            arcs.push(acc);
            let (a, b) = (points[i], points[(i + 1) % n]);
            acc += (a.0 - b.0).hypot(a.1 - b.1);
        }
        let xi = points
            .iter()
            .map(|p| (p.0 - centroid.0).hypot(p.1 - centroid.1))
            .collect();
        Self::from_samples(centroid, xi, arcs, acc)
    }

    pub fn centroid(&self) -> (f64, f64) {
        self.centroid
    }

    /// ξ(l_t)
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// Δξ_t = ξ(l_{t-1}) − ξ(l_t), wrapping at t = 0.
    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn arc_lengths(&self) -> &[f64] {
        &self.arc_lengths
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn mean_radius(&self) -> f64 {
        self.mean_radius
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    /// Arc length covered by sample `t` (up to the next sample).
    pub fn segment_length(&self, t: usize) -> f64 {
        let next = self
            .arc_lengths
            .get(t + 1)
            .copied()
            .unwrap_or(self.total_length);
        next - self.arc_lengths[t]
    }

    /// CSV rows `t,row,col,l_t,xi_t` for the contour this profile was built from.
    pub fn to_csv(&self, contour: &Contour) -> String {
        let mut out = String::from("t,row,col,l_t,xi_t\n");
        for (t, (&(r, c), (&l, &x))) in contour
            .points()
            .iter()
            .zip(self.arc_lengths.iter().zip(&self.xi))
            .enumerate()
        {
            let _ = writeln!(out, "{t},{r},{c},{l},{x}");
        }
        out
    }
}

/// Distance-to-centre profile of a traced contour.
pub fn radial_profile(contour: &Contour, centroid: (f64, f64)) -> Result<RadialProfile> {
    let xi = contour
        .points()
        .iter()
        .map(|&(r, c)| (r as f64 - centroid.0).hypot(c as f64 - centroid.1))
        .collect();
    RadialProfile::from_samples(
        centroid,
        xi,
        contour.arc_lengths().to_vec(),
        contour.total_length(),
    )
}
