use crate::error::{Error, Result};

/// A `len × dim` row-major buffer: one row per timestep.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Frames {
    dim: usize,
    data: Vec<f64>,
}

impl Frames {
    pub fn zeros(len: usize, dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; len * dim],
        }
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} values do not divide into rows of {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    /// All rows must share one length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::invalid(format!(
                    "row of length {} in frames of width {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { dim, data })
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Rows `start..end` as a new buffer.
    pub fn slice(&self, start: usize, end: usize) -> Frames {
        Frames {
            dim: self.dim,
            data: self.data[start * self.dim..end * self.dim].to_vec(),
        }
    }

    /// Rows in reverse time order.
    pub fn reversed(&self) -> Frames {
        let mut data = Vec::with_capacity(self.data.len());
        for t in (0..self.len()).rev() {
            data.extend_from_slice(self.row(t));
        }
        Frames {
            dim: self.dim,
            data,
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}
