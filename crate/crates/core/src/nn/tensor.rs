use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim("Tensor::from_vec", rows * cols, data.len()));
        }
        Ok(Tensor { rows, cols, data })
    }

    /// Build from equal-length rows. An empty slice gives a `0 × cols` tensor.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], cols: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::dim(
                    format!("Tensor::from_rows row {i}"),
                    cols,
                    r.len(),
                ));
            }
            data.extend_from_slice(r);
        }
        Ok(Tensor {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(n, n);
        for i in 0..n {
            t.set(i, i, 1.0);
        }
        t
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, so guard zero-width tensors
        let cols = self.cols.max(1);
        self.data.chunks_exact(cols).take(self.rows)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|v| *v *= k);
    }

    /// Stack `self` on top of `other`.
    pub fn vstack(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.cols {
            return Err(Error::dim("Tensor::vstack", self.cols, other.cols));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Tensor {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    /// Concatenate columns of `self` and `other` row by row.
    pub fn hstack(&self, other: &Tensor) -> Result<Tensor> {
        if self.rows != other.rows {
            return Err(Error::dim("Tensor::hstack", self.rows, other.rows));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Tensor {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Rows `[start, end)` as a new tensor.
    pub fn slice_rows(&self, start: usize, end: usize) -> Tensor {
        Tensor {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    pub fn transpose(&self) -> Tensor {
        let mut t = Tensor::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// `self · otherᵀ`, i.e. `(n×k)·(m×k)ᵀ → n×m`.
    pub fn matmul_t(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.cols {
            return Err(Error::dim("Tensor::matmul_t", other.cols, self.cols));
        }
        let (n, m, k) = (self.rows, other.rows, self.cols);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let a = &self.data[i * k..(i + 1) * k];
            let o = &mut out[i * m..(i + 1) * m];
            for (j, oj) in o.iter_mut().enumerate() {
                let b = &other.data[j * k..(j + 1) * k];
                *oj = dot(a, b);
            }
        }
        Ok(Tensor {
            rows: n,
            cols: m,
            data: out,
        })
    }

    /// `self · other`, i.e. `(n×k)·(k×m) → n×m`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.rows {
            return Err(Error::dim("Tensor::matmul", other.rows, self.cols));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let o = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let b = &other.data[p * m..(p + 1) * m];
                for (oj, bj) in o.iter_mut().zip(b) {
                    *oj += a * bj;
                }
            }
        }
        Ok(Tensor {
            rows: n,
            cols: m,
            data: out,
        })
    }

    /// `selfᵀ · other`, i.e. `(k×n)ᵀ·(k×m) → n×m`.
    pub fn t_matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.rows != other.rows {
            return Err(Error::dim("Tensor::t_matmul", other.rows, self.rows));
        }
        let (k, n, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; n * m];
        for p in 0..k {
            let a = &self.data[p * n..(p + 1) * n];
            let b = &other.data[p * m..(p + 1) * m];
            for (i, &ai) in a.iter().enumerate() {
                if ai == 0.0 {
                    continue;
                }
                let o = &mut out[i * m..(i + 1) * m];
                for (oj, bj) in o.iter_mut().zip(b) {
                    *oj += ai * bj;
                }
            }
        }
        Ok(Tensor {
            rows: n,
            cols: m,
            data: out,
        })
    }

    /// Column sums as a vector.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for r in self.iter_rows() {
            for (si, v) in s.iter_mut().zip(r) {
                *si += v;
            }
        }
        s
    }

    /// Frobenius inner product.
    pub fn frobenius_dot(&self, other: &Tensor) -> f64 {
        dot(&self.data, &other.data)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
