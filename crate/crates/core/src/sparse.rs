//! Minimal compressed-sparse-row matrix used by the assembly and multigrid
//! kernels. Built once from triplets, then applied; no incremental updates.

use nalgebra::DMatrix;
use std::io::Write;

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, _, _) in triplets {
            debug_assert!(i < nrows);
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut order: Vec<usize> = counts[..nrows].to_vec();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0f64; triplets.len()];
        for &(i, j, v) in triplets {
            debug_assert!(j < ncols);
            let slot = order[i];
            cols[slot] = j;
            vals[slot] = v;
            order[i] += 1;
        }

        // sort each row by column and merge duplicates
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut row_buf: Vec<(usize, f64)> = Vec::new();
        for i in 0..nrows {
            row_buf.clear();
            for k in counts[i]..counts[i + 1] {
                row_buf.push((cols[k], vals[k]));
            }
            row_buf.sort_unstable_by_key(|(j, _)| *j);
            let mut iter = row_buf.iter().copied();
            if let Some((mut cur_j, mut cur_v)) = iter.next() {
                for (j, v) in iter {
                    if j == cur_j {
                        cur_v += v;
                    } else {
                        indices.push(cur_j);
                        data.push(cur_v);
                        cur_j = j;
                        cur_v = v;
                    }
                }
                indices.push(cur_j);
                data.push(cur_v);
            }
            indptr.push(indices.len());
        }

        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            y[i] = acc;
        }
    }

    /// y += alpha * A x
    pub fn matvec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for i in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            y[i] += alpha * acc;
        }
    }

    /// y = A^T x
    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        y.fill(0.0);
        for i in 0..self.nrows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for k in self.indptr[i]..self.indptr[i + 1] {
                y[self.indices[k]] += self.data[k] * xi;
            }
        }
    }

    /// C = A B by row-wise accumulation.
    pub fn matmul(&self, rhs: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, rhs.nrows, "matmul dimension mismatch");
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        let mut scratch = vec![0.0f64; rhs.ncols];
        let mut mark = vec![usize::MAX; rhs.ncols];
        let mut touched: Vec<usize> = Vec::new();
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                let a = self.data[k];
                let row = self.indices[k];
                for l in rhs.indptr[row]..rhs.indptr[row + 1] {
                    let j = rhs.indices[l];
                    if mark[j] != i {
                        mark[j] = i;
                        touched.push(j);
                        scratch[j] = 0.0;
                    }
                    scratch[j] += a * rhs.data[l];
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                indices.push(j);
                data.push(scratch[j]);
            }
            touched.clear();
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: rhs.ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                triplets.push((self.indices[k], i, self.data[k]));
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.nrows, &triplets)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        for k in self.indptr[i]..self.indptr[i + 1] {
            if self.indices[k] == j {
                return self.data[k];
            }
        }
        0.0
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                m[(i, self.indices[k])] = self.data[k];
            }
        }
        m
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                let j = self.indices[k];
                worst = worst.max((self.data[k] - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Coordinate text dump "i j value", one entry per line.
    pub fn dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                writeln!(w, "{} {} {:e}", i, self.indices[k], self.data[k])?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_merge_and_matvec() {
        let a = CsrMatrix::from_triplets(
            2,
            3,
            &[(0, 1, 2.0), (0, 1, 3.0), (1, 0, 1.0), (1, 2, -1.0), (0, 0, 4.0)],
        );
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.get(0, 1), 5.0);
        let mut y = vec![0.0; 2];
        a.matvec(&[1.0, 1.0, 2.0], &mut y);
        assert_eq!(y, vec![9.0, -1.0]);

        let mut yt = vec![0.0; 3];
        a.matvec_transpose(&[1.0, 2.0], &mut yt);
        assert_eq!(yt, vec![6.0, 5.0, -2.0]);

        let at = a.transpose();
        let mut yt2 = vec![0.0; 3];
        at.matvec(&[1.0, 2.0], &mut yt2);
        assert_eq!(yt, yt2);
    }

    #[test]
    fn matmul_against_dense() {
        let a = CsrMatrix::from_triplets(
            3,
            4,
            &[(0, 0, 1.0), (0, 3, 2.0), (1, 1, -1.0), (2, 0, 0.5), (2, 2, 3.0)],
        );
        let b = CsrMatrix::from_triplets(
            4,
            2,
            &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, -1.0), (2, 1, 4.0), (3, 0, 1.0)],
        );
        let c = a.matmul(&b);
        let expect = a.to_dense() * b.to_dense();
        assert_eq!(c.to_dense(), expect);
    }

    #[test]
    fn dense_round_trip() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 2, 2.0), (2, 1, -3.0)]);
        let d = a.to_dense();
        assert_eq!(d[(1, 2)], 2.0);
        assert_eq!(d[(2, 1)], -3.0);
        assert_eq!(d[(2, 2)], 0.0);
        assert!(a.max_abs_asymmetry() > 0.0);
    }
}
