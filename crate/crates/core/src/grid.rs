use crate::error::{Error, Result};

/// Dense row-major 2-D grid of pixels.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Grid<T> {
    height: u32,
    width: u32,
    data: Vec<T>,
}

/// Per-pixel class ids, 0 is background.
pub type LabelMap = Grid<u8>;

impl<T: Copy> Grid<T> {
    pub fn filled(height: u32, width: u32, value: T) -> Result<Self> {
        check_dims(height, width)?;
        Ok(Grid {
            height,
            width,
            data: vec![value; height as usize * width as usize],
        })
    }

    pub fn from_vec(height: u32, width: u32, data: Vec<T>) -> Result<Self> {
        check_dims(height, width)?;
        let expected = height as usize * width as usize;
        if data.len() != expected {
            return Err(Error::shape(format!(
                "grid {height}x{width} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Grid {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: u32, width: u32, mut f: impl FnMut(u32, u32) -> T) -> Result<Self> {
        check_dims(height, width)?;
        let mut data = Vec::with_capacity(height as usize * width as usize);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Ok(Grid {
            height,
            width,
            data,
        })
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

    #[inline]
    pub fn get(&self, row: u32, col: u32) -> T {
        self.data[self.index(row, col)]
    }

    #[inline]
    pub fn set(&mut self, row: u32, col: u32, value: T) {
        let i = self.index(row, col);
        self.data[i] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    fn index(&self, row: u32, col: u32) -> usize {
        debug_assert!(row < self.height && col < self.width);
        row as usize * self.width as usize + col as usize
    }
}

pub(crate) fn check_dims(height: u32, width: u32) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::shape(format!(
            "dimensions must be positive, got {height}x{width}"
        )));
    }
    Ok(())
}
