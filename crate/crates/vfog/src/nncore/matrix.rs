use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::Rng;

/// Dense row-major matrix. Row i is the weight vector of output unit i.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                context: "matrix from_vec",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Glorot (Xavier) uniform init: U(-L, L), L = sqrt(6 / (fan_in + fan_out)).
    /// Fans are passed explicitly because recurrent weights have a fan_in
    /// larger than their column count alone suggests.
    pub fn glorot<R: Rng>(rows: usize, cols: usize, fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| S::from_f64_c((rng.gen::<f64>() * 2.0 - 1.0) * limit))
            .collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// out = W x
    pub fn matvec(&self, x: &[S], out: &mut [S]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            let mut acc = S::zero();
            for (w, xv) in row.iter().zip(x) {
                acc = acc + *w * *xv;
            }
            *o = acc;
        }
    }

    /// out += W^T d, the backward map of `matvec`.
    pub fn matvec_t_acc(&self, d: &[S], out: &mut [S]) {
        debug_assert_eq!(d.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (di, row) in d.iter().zip(self.data.chunks_exact(self.cols)) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += *di * *w;
            }
        }
    }
}

/// gw += d ⊗ x, accumulated into a flat row-major gradient buffer.
pub fn outer_acc<S: Scalar>(gw: &mut [S], d: &[S], x: &[S]) {
    debug_assert_eq!(gw.len(), d.len() * x.len());
    for (gr, di) in gw.chunks_exact_mut(x.len()).zip(d) {
        for (g, xv) in gr.iter_mut().zip(x) {
            *g += *di * *xv;
        }
    }
}

pub fn add_assign<S: Scalar>(acc: &mut [S], v: &[S]) {
    debug_assert_eq!(acc.len(), v.len());
    for (a, b) in acc.iter_mut().zip(v) {
        *a += *b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_transpose_agree_with_hand_math() {
        let w = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let x = [1.0, 0.5, -1.0];
        let mut out = [0.0; 2];
        w.matvec(&x, &mut out);
        assert_eq!(out, [-1.0, 0.5]);

        let d = [1.0, -1.0];
        let mut back = [0.0; 3];
        w.matvec_t_acc(&d, &mut back);
        assert_eq!(back, [-3.0, -3.0, -3.0]);
    }

    #[test]
    fn outer_product_accumulates() {
        let mut g = vec![0.0; 6];
        outer_acc(&mut g, &[2.0, -1.0], &[1.0, 0.0, 3.0]);
        outer_acc(&mut g, &[1.0, 1.0], &[0.0, 1.0, 0.0]);
        assert_eq!(g, vec![2.0, 1.0, 6.0, -1.0, 1.0, -3.0]);
    }

    #[test]
    fn from_vec_rejects_wrong_len() {
        assert!(Matrix::<f64>::from_vec(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn glorot_within_limit() {
        let mut rng = crate::rng::seeded_rng(1);
        let m = Matrix::<f64>::glorot(10, 20, 20, 10, &mut rng);
        let limit = (6.0f64 / 30.0).sqrt();
        assert!(m.data().iter().all(|v| v.abs() <= limit));
        // not all equal (actually random)
        assert!(m.data().iter().any(|v| *v != m.data()[0]));
    }
}
