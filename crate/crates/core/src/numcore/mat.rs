//! Dense row-major f64 matrices. Column vectors are `Mat` with `cols == 1`.

use crate::error::{Error, Result};
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dim(format!(
                "data length {} does not fill {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |v| v.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::Dim("ragged row lengths".into()));
            }
            data.extend_from_slice(row);
        }
        Ok(Mat { rows: r, cols: c, data })
    }

    /// Column vector from a slice.
    pub fn col(values: &[f64]) -> Self {
        Mat {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    /// Entries drawn uniformly from `[lo, hi)`.
    pub fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect();
        Mat { rows, cols, data }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Mat {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_slice_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn same_shape(&self, other: &Mat) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    fn require_same_shape(&self, other: &Mat, op: &str) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Dim(format!(
                "{op}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    /// Standard matrix product.
    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(Error::Dim(format!(
                "matmul: {}x{} . {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · v` without materializing the transpose.
    pub fn t_matmul(&self, v: &Mat) -> Result<Mat> {
        if self.rows != v.rows {
            return Err(Error::Dim(format!(
                "t_matmul: ({}x{})ᵀ . {}x{}",
                self.rows, self.cols, v.rows, v.cols
            )));
        }
        let mut out = Mat::zeros(self.cols, v.cols);
        for k in 0..self.rows {
            let a_row = &self.data[k * self.cols..(k + 1) * self.cols];
            let v_row = &v.data[k * v.cols..(k + 1) * v.cols];
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * v.cols..(i + 1) * v.cols];
                for (o, &b) in out_row.iter_mut().zip(v_row.iter()) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self += a · bᵀ` for column vectors `a`, `b`.
    pub fn add_outer(&mut self, a: &Mat, b: &Mat) -> Result<()> {
        if a.cols != 1 || b.cols != 1 || self.rows != a.rows || self.cols != b.rows {
            return Err(Error::Dim(format!(
                "add_outer: {}x{} += ({}x{})({}x{})ᵀ",
                self.rows, self.cols, a.rows, a.cols, b.rows, b.cols
            )));
        }
        for i in 0..self.rows {
            let ai = a.data[i];
            if ai == 0.0 {
                continue;
            }
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (o, &bj) in row.iter_mut().zip(b.data.iter()) {
                *o += ai * bj;
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &Mat) -> Result<Mat> {
        self.require_same_shape(other, "add")?;
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a + b)
            .collect();
        Ok(Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn add_assign(&mut self, other: &Mat) -> Result<()> {
        self.require_same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Mat) -> Result<Mat> {
        self.require_same_shape(other, "sub")?;
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a - b)
            .collect();
        Ok(Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Mat) -> Result<Mat> {
        self.require_same_shape(other, "hadamard")?;
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .collect();
        Ok(Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn scale_assign(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| f(a)).collect(),
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|a| *a = v);
    }

    /// Vertical concatenation of two column vectors.
    pub fn vconcat(top: &Mat, bottom: &Mat) -> Result<Mat> {
        if top.cols != bottom.cols {
            return Err(Error::Dim(format!(
                "vconcat: {} vs {} cols",
                top.cols, bottom.cols
            )));
        }
        let mut data = Vec::with_capacity(top.data.len() + bottom.data.len());
        data.extend_from_slice(&top.data);
        data.extend_from_slice(&bottom.data);
        Ok(Mat {
            rows: top.rows + bottom.rows,
            cols: top.cols,
            data,
        })
    }

    /// Splits the rows of a column vector at `at`.
    pub fn split_rows(&self, at: usize) -> Result<(Mat, Mat)> {
        if self.cols != 1 || at > self.rows {
            return Err(Error::Dim(format!(
                "split_rows at {} of {}x{}",
                at, self.rows, self.cols
            )));
        }
        Ok((
            Mat::col(&self.data[..at]),
            Mat::col(&self.data[at..]),
        ))
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        let cols = self.cols;
        &mut self.data[r * cols + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent scalar triple-loop product used as the matmul oracle.
    fn matmul_oracle(a: &Mat, b: &Mat) -> Mat {
        let mut out = Mat::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    #[test]
    fn matmul_identity() {
        let b = Mat::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        let i = Mat::identity(2);
        assert_eq!(i.matmul(&b).unwrap(), b);
    }

    #[test]
    fn matmul_zero_annihilates() {
        let z = Mat::zeros(2, 2);
        let b = Mat::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        assert_eq!(z.matmul(&b).unwrap(), Mat::zeros(2, 2));
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Mat::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        let got = a.matmul(&b).unwrap();
        assert_eq!(
            got,
            Mat::from_rows(&[vec![19.0, 22.0], vec![43.0, 50.0]]).unwrap()
        );
        assert_eq!(got, matmul_oracle(&a, &b));

        // wider shapes against the oracle
        let mut rng = crate::util::seeded_rng(11, 0);
        for &(m, k, n) in &[(1usize, 4usize, 3usize), (5, 2, 7), (3, 3, 3)] {
            let a = Mat::uniform(m, k, -2.0, 2.0, &mut rng);
            let b = Mat::uniform(k, n, -2.0, 2.0, &mut rng);
            let got = a.matmul(&b).unwrap();
            let want = matmul_oracle(&a, &b);
            for (g, w) in got.data().iter().zip(want.data().iter()) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let a = Mat::zeros(2, 3);
        let b = Mat::zeros(2, 2);
        let err = a.matmul(&b).unwrap_err().to_string();
        assert!(err.contains("2x3") && err.contains("2x2"), "{err}");
    }

    #[test]
    fn t_matmul_matches_explicit_transpose() {
        let mut rng = crate::util::seeded_rng(13, 0);
        let w = Mat::uniform(4, 6, -1.0, 1.0, &mut rng);
        let v = Mat::uniform(4, 1, -1.0, 1.0, &mut rng);
        let got = w.t_matmul(&v).unwrap();
        // explicit transpose route
        let mut wt = Mat::zeros(6, 4);
        for i in 0..4 {
            for j in 0..6 {
                wt.set(j, i, w.get(i, j));
            }
        }
        let want = wt.matmul(&v).unwrap();
        for (g, e) in got.data().iter().zip(want.data().iter()) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn add_outer_is_rank_one_update() {
        let mut m = Mat::zeros(2, 3);
        let a = Mat::col(&[2.0, -1.0]);
        let b = Mat::col(&[1.0, 0.0, 3.0]);
        m.add_outer(&a, &b).unwrap();
        assert_eq!(
            m,
            Mat::from_rows(&[vec![2.0, 0.0, 6.0], vec![-1.0, 0.0, -3.0]]).unwrap()
        );
    }

    #[test]
    fn vconcat_split_roundtrip() {
        let a = Mat::col(&[1.0, 2.0]);
        let b = Mat::col(&[3.0, 4.0, 5.0]);
        let joined = Mat::vconcat(&a, &b).unwrap();
        let (top, bottom) = joined.split_rows(2).unwrap();
        assert_eq!(top, a);
        assert_eq!(bottom, b);
    }
}
