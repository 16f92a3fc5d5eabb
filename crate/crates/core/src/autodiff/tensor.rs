use super::{shape_err, Result};

/// Row-major dense array. For complex tensors `data` holds `2 * numel`
/// values laid out as `(re, im)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    complex: bool,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::with_layout(shape, data, false)
    }

    pub fn complex(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::with_layout(shape, data, true)
    }

    pub fn with_layout(shape: Vec<usize>, data: Vec<f64>, complex: bool) -> Result<Self> {
        let n: usize = shape.iter().product();
        let expected = if complex { 2 * n } else { n };
        if data.len() != expected {
            return shape_err(format!(
                "shape {shape:?} (complex: {complex}) needs {expected} values, got {}",
                data.len()
            ));
        }
        Ok(Self { shape, data, complex })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
            complex: false,
        }
    }

    pub fn zeros_complex(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; 2 * n],
            complex: true,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
            complex: false,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_complex(&self) -> bool {
        self.complex
    }

    /// Logical element count (complex entries count once).
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn reshaped(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.numel() {
            return shape_err(format!("cannot reshape {:?} into {shape:?}", self.shape));
        }
        self.shape = shape;
        Ok(self)
    }

    pub(crate) fn zeros_like(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: vec![0.0; self.data.len()],
            complex: self.complex,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_checked() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        let c = Tensor::complex(vec![2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(c.numel(), 2);
        assert!(Tensor::complex(vec![2], vec![1.0, 2.0]).is_err());
    }
}
