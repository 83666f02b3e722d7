//! Run-length encoded binary masks.
//!
//! Counts alternate background and foreground runs over a column-major scan
//! (pixel `(row, col)` has scan index `row + height * col`), always starting
//! with a background run that may be empty. Masks are stored in canonical
//! form: no empty runs other than the leading one, and no trailing empty run.

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::grid::{check_dims, Grid};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: u32,
    width: u32,
    counts: Vec<u32>,
}

impl BinaryMask {
    /// Build a mask from run counts. Counts must sum to `height * width`.
    pub fn from_counts(height: u32, width: u32, counts: &[u32]) -> Result<Self> {
        check_dims(height, width)?;
        let total: u64 = counts.iter().map(|&c| c as u64).sum();
        let expected = height as u64 * width as u64;
        if total != expected {
            return Err(Error::format(format!(
                "RLE counts sum to {total}, expected {expected} for a {height}x{width} mask"
            )));
        }
        Ok(BinaryMask {
            height,
            width,
            counts: canonicalize(counts),
        })
    }

    pub fn empty(height: u32, width: u32) -> Result<Self> {
        check_dims(height, width)?;
        Ok(BinaryMask {
            height,
            width,
            counts: vec![height * width],
        })
    }

    /// Encode a dense grid.
    pub fn encode(pixels: &Grid<bool>) -> Self {
        let (h, w) = pixels.dims();
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for col in 0..w {
            for row in 0..h {
                let v = pixels.get(row, col);
                if v != current {
                    counts.push(run);
                    run = 0;
                    current = v;
                }
                run += 1;
            }
        }
        counts.push(run);
        BinaryMask {
            height: h,
            width: w,
            counts,
        }
    }

    /// Mask with exactly the listed `(row, col)` pixels set.
    pub fn from_pixels(
        height: u32,
        width: u32,
        pixels: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self> {
        let mut grid = Grid::filled(height, width, false)?;
        for (row, col) in pixels {
            if row >= height || col >= width {
                return Err(Error::shape(format!(
                    "pixel ({row}, {col}) outside {height}x{width} mask"
                )));
            }
            grid.set(row, col, true);
        }
        Ok(Self::encode(&grid))
    }

    pub fn decode(&self) -> Grid<bool> {
        let h = self.height as usize;
        let w = self.width as usize;
        let mut data = vec![false; h * w];
        let mut idx = 0usize;
        for (i, &c) in self.counts.iter().enumerate() {
            let c = c as usize;
            if i % 2 == 1 {
                for s in idx..idx + c {
                    // column-major scan index -> row-major storage
                    data[(s % h) * w + s / h] = true;
                }
            }
            idx += c;
        }
        Grid::from_vec(self.height, self.width, data).expect("dimensions already validated")
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (u32, u32) {
        (self.height, self.width)
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> u64 {
        self.counts
            .iter()
            .skip(1)
            .step_by(2)
            .map(|&c| c as u64)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    /// Foreground pixels as `(row, col)` in scan order.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let h = self.height;
        let mut starts = Vec::with_capacity(self.counts.len() / 2);
        let mut idx = 0u32;
        for (i, &c) in self.counts.iter().enumerate() {
            if i % 2 == 1 {
                starts.push((idx, c));
            }
            idx += c;
        }
        starts
            .into_iter()
            .flat_map(move |(start, len)| (start..start + len).map(move |s| (s % h, s / h)))
    }

    fn check_same_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::shape(format!(
                "mask {}x{} vs mask {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }

    /// Foreground pixels shared by both masks, counted run by run.
    pub fn intersection_area(&self, other: &BinaryMask) -> Result<u64> {
        self.check_same_dims(other)?;
        Ok(run_intersection(&self.counts, &other.counts))
    }
}

fn canonicalize(counts: &[u32]) -> Vec<u32> {
    let mut out: Vec<u32> = Vec::with_capacity(counts.len());
    // parity of the run currently at the end of `out`
    let mut last_fg = false;
    for (i, &c) in counts.iter().enumerate() {
        let fg = i % 2 == 1;
        if out.is_empty() {
            if fg {
                out.push(0);
                out.push(c);
                last_fg = true;
            } else {
                out.push(c);
                last_fg = false;
            }
            continue;
        }
        if c == 0 {
            continue;
        }
        if fg == last_fg {
            *out.last_mut().unwrap() += c;
        } else {
            out.push(c);
            last_fg = fg;
        }
    }
    if out.is_empty() {
        out.push(0);
    }
    if out.len() > 1 && *out.last().unwrap() == 0 {
        out.pop();
    }
    out
}

fn run_intersection(a: &[u32], b: &[u32]) -> u64 {
    let (mut i, mut j) = (0usize, 0usize);
    let (mut ra, mut rb) = (a[0], b[0]);
    let mut inter = 0u64;
    loop {
        while ra == 0 {
            i += 1;
            if i == a.len() {
                return inter;
            }
            ra = a[i];
        }
        while rb == 0 {
            j += 1;
            if j == b.len() {
                return inter;
            }
            rb = b[j];
        }
        let step = ra.min(rb);
        if i % 2 == 1 && j % 2 == 1 {
            inter += step as u64;
        }
        ra -= step;
        rb -= step;
    }
}

/// Intersection over union of two masks; 0 when both are empty.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let inter = a.intersection_area(b)?;
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Backward-warp a mask with one flow field.
///
/// Output pixel `p` is foreground iff the bilinear sample of the 0/1 input
/// mask at `p + flow(p)` is at least 0.5. Samples outside the image read 0.
pub fn warp(mask: &BinaryMask, flow: &FlowField) -> Result<BinaryMask> {
    if mask.dims() != flow.dims() {
        return Err(Error::shape(format!(
            "mask {}x{} vs flow {}x{}",
            mask.height(),
            mask.width(),
            flow.height(),
            flow.width()
        )));
    }
    let (h, w) = mask.dims();
    if mask.is_empty() {
        return Ok(mask.clone());
    }
    let src = mask.decode();
    let read = |r: i64, c: i64| -> f64 {
        if r < 0 || c < 0 || r >= h as i64 || c >= w as i64 {
            0.0
        } else if src.get(r as u32, c as u32) {
            1.0
        } else {
            0.0
        }
    };
    let out = Grid::from_fn(h, w, |row, col| {
        let (du, dv) = flow.at(row, col);
        let x = col as f64 + du as f64;
        let y = row as f64 + dv as f64;
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let mut value = (1.0 - fx) * (1.0 - fy) * read(y0, x0);
        if fx > 0.0 {
            value += fx * (1.0 - fy) * read(y0, x0 + 1);
        }
        if fy > 0.0 {
            value += (1.0 - fx) * fy * read(y0 + 1, x0);
            if fx > 0.0 {
                value += fx * fy * read(y0 + 1, x0 + 1);
            }
        }
        value >= 0.5
    })?;
    Ok(BinaryMask::encode(&out))
}

/// Apply `warp` once per flow, oldest step first.
pub fn compose_warp(mask: &BinaryMask, flows: &[FlowField]) -> Result<BinaryMask> {
    let mut current = mask.clone();
    for flow in flows {
        current = warp(&current, flow)?;
    }
    Ok(current)
}
