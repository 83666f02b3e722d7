use crate::error::{Error, Result};
use crate::grid::check_dims;

/// Dense backward flow for one frame pair.
///
/// The vector stored at pixel `p` of frame `t` points to the location in
/// frame `t - 1` that `p` came from, so earlier masks are pulled into the
/// current frame by sampling at `p + (u, v)`. Values are row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    height: u32,
    width: u32,
    u: Vec<f32>,
    v: Vec<f32>,
}

impl FlowField {
    pub fn new(height: u32, width: u32, u: Vec<f32>, v: Vec<f32>) -> Result<Self> {
        check_dims(height, width)?;
        let n = height as usize * width as usize;
        if u.len() != n || v.len() != n {
            return Err(Error::shape(format!(
                "flow {height}x{width} needs {n} values per component, got u={} v={}",
                u.len(),
                v.len()
            )));
        }
        if let Some(i) = u.iter().chain(v.iter()).position(|x| !x.is_finite()) {
            let (comp, idx) = if i < n { ("u", i) } else { ("v", i - n) };
            return Err(Error::data(format!(
                "non-finite flow {comp} at row {}, col {}",
                idx / width as usize,
                idx % width as usize
            )));
        }
        Ok(FlowField {
            height,
            width,
            u,
            v,
        })
    }

    pub fn zeros(height: u32, width: u32) -> Result<Self> {
        Self::constant(height, width, 0.0, 0.0)
    }

    pub fn constant(height: u32, width: u32, u: f32, v: f32) -> Result<Self> {
        check_dims(height, width)?;
        let n = height as usize * width as usize;
        Self::new(height, width, vec![u; n], vec![v; n])
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

    /// Displacement `(u, v)` at a pixel.
    #[inline]
    pub fn at(&self, row: u32, col: u32) -> (f32, f32) {
        let i = row as usize * self.width as usize + col as usize;
        (self.u[i], self.v[i])
    }

    pub fn u(&self) -> &[f32] {
        &self.u
    }

    pub fn v(&self) -> &[f32] {
        &self.v
    }
}
