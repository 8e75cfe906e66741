use crate::error::{Error, Result};

/// Dense row-major float tensor, rank 1 to 4.
///
/// Rank-3 activations use (height, width, channel) axis order; rank-4 filter
/// banks use (out-channel, kernel-height, kernel-width, in-channel).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if dims.is_empty() || dims.len() > 4 {
            return Err(Error::Shape(format!(
                "tensor rank must be 1..=4, got {}",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::Shape(format!("all dims must be >= 1, got {dims:?}")));
        }
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "dims {dims:?} expect {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Tensor::new(dims, vec![0.0; n]).expect("zeros: valid dims")
    }

    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(usize) -> f32) -> Self {
        let n: usize = dims.iter().product();
        let data = (0..n).map(&mut f).collect();
        Tensor::new(dims, data).expect("from_fn: valid dims")
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Reinterpret as a flat rank-1 tensor; the row-major order is preserved.
    pub fn flatten(mut self) -> Tensor {
        self.dims = vec![self.data.len()];
        self
    }

    /// Elementwise a += b. Shapes must match.
    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!(
                "add_assign: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f32) {
        for v in &mut self.data {
            *v *= factor;
        }
    }
}
