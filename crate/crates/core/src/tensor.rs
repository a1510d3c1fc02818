//! Small dense containers: a row-major [`Matrix`] and an `l × l × m`
//! [`Kernel`] tensor. Both serialize as nested JSON arrays.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy> Matrix<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged matrix rows".into()));
        }
        let n = rows.len();
        Ok(Self {
            rows: n,
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data
            .chunks(self.cols.max(1))
            .map(<[T]>::to_vec)
            .take(self.rows)
            .collect()
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Column-major vectorization (concatenation of columns).
    pub fn vect(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                out.push(self.get(r, c));
            }
        }
        out
    }

    /// Inverse of [`Matrix::vect`].
    pub fn from_vect(rows: usize, cols: usize, v: &[T]) -> Result<Self> {
        if v.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "vector of length {} cannot be reshaped to {rows}x{cols}",
                v.len()
            )));
        }
        Ok(Self::from_fn(rows, cols, |r, c| v[c * rows + r]))
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

impl<T: Copy + num_traits::Zero + std::ops::Mul<Output = T>> Matrix<T> {
    /// Row vector times matrix: `vᵀ · self`.
    pub fn left_mul(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.rows {
            return Err(Error::Dimension(format!(
                "vector length {} does not match {} matrix rows",
                v.len(),
                self.rows
            )));
        }
        let mut out = vec![T::zero(); self.cols];
        for (r, &x) in v.iter().enumerate() {
            for (c, slot) in out.iter_mut().enumerate() {
                *slot = *slot + x * self.get(r, c);
            }
        }
        Ok(out)
    }
}

impl<T: Copy + Serialize> Serialize for Matrix<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de, T: Copy + DeserializeOwned> Deserialize<'de> for Matrix<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<T>>::deserialize(deserializer)?;
        Matrix::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// An `l × l × m` tensor; `m = 1` is the plain 2-D kernel.
///
/// Indices are 0-based `(row, col, slice)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Kernel<T> {
    l: usize,
    m: usize,
    data: Vec<T>,
}

impl<T: Copy> Kernel<T> {
    pub fn filled(l: usize, m: usize, value: T) -> Self {
        Self {
            l,
            m,
            data: vec![value; l * l * m],
        }
    }

    pub fn from_fn(l: usize, m: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(l * l * m);
        for i in 0..l {
            for j in 0..l {
                for k in 0..m {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { l, m, data }
    }

    /// 2-D kernel from square nested rows.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let l = rows.len();
        if rows.iter().any(|r| r.len() != l) {
            return Err(Error::Dimension("kernel must be square".into()));
        }
        Ok(Self {
            l,
            m: 1,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// 3-D kernel from nested `[i][j][k]` arrays.
    pub fn from_nested(nested: Vec<Vec<Vec<T>>>) -> Result<Self> {
        let l = nested.len();
        let m = nested.first().and_then(|r| r.first()).map_or(0, Vec::len);
        if nested.iter().any(|r| r.len() != l || r.iter().any(|c| c.len() != m)) {
            return Err(Error::Dimension("kernel must be l x l x m".into()));
        }
        Ok(Self {
            l,
            m,
            data: nested.into_iter().flatten().flatten().collect(),
        })
    }

    pub fn side(&self) -> usize {
        self.l
    }

    pub fn depth(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[(i * self.l + j) * self.m + k]
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.get(i, j, 0)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: T) {
        self.data[(i * self.l + j) * self.m + k] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Slice `k` as a 2-D kernel.
    pub fn slice(&self, k: usize) -> Kernel<T> {
        Kernel::from_fn(self.l, 1, |i, j, _| self.get(i, j, k))
    }

    /// Stacks equally sized 2-D kernels along the third axis.
    pub fn stack(slices: &[Kernel<T>]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::Dimension("cannot stack zero slices".into()))?;
        let l = first.l;
        if slices.iter().any(|s| s.l != l || s.m != 1) {
            return Err(Error::Dimension("stacked slices must be l x l".into()));
        }
        Ok(Kernel::from_fn(l, slices.len(), |i, j, k| slices[k].at(i, j)))
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Kernel<U> {
        Kernel {
            l: self.l,
            m: self.m,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map<U: Copy, V: Copy>(&self, other: &Kernel<U>, f: impl Fn(T, U) -> V) -> Result<Kernel<V>> {
        if self.l != other.l || self.m != other.m {
            return Err(Error::Dimension(format!(
                "kernel shapes differ: {0}x{0}x{1} vs {2}x{2}x{3}",
                self.l, self.m, other.l, other.m
            )));
        }
        Ok(Kernel {
            l: self.l,
            m: self.m,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn same_shape<U>(&self, other: &Kernel<U>) -> bool {
        self.l == other.l && self.m == other.m
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.l)
            .map(|i| (0..self.l).map(|j| self.at(i, j)).collect())
            .collect()
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<T>>> {
        (0..self.l)
            .map(|i| {
                (0..self.l)
                    .map(|j| (0..self.m).map(|k| self.get(i, j, k)).collect())
                    .collect()
            })
            .collect()
    }
}

impl Kernel<i32> {
    pub fn to_f64(&self) -> Kernel<f64> {
        self.map(f64::from)
    }
}

impl<T: Copy + Serialize> Serialize for Kernel<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.m == 1 {
            self.to_rows().serialize(serializer)
        } else {
            self.to_nested().serialize(serializer)
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NestedKernel<T> {
    Flat(Vec<Vec<T>>),
    Deep(Vec<Vec<Vec<T>>>),
}

impl<'de, T: Copy + DeserializeOwned> Deserialize<'de> for Kernel<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let kernel = match NestedKernel::<T>::deserialize(deserializer)? {
            NestedKernel::Flat(rows) => Kernel::from_rows(rows),
            NestedKernel::Deep(nested) => Kernel::from_nested(nested),
        };
        kernel.map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vect_is_column_major() {
        let m = Matrix::from_rows(vec![vec![1, 2], vec![3, 4]]).unwrap();
        assert_eq!(m.vect(), vec![1, 3, 2, 4]);
        assert_eq!(Matrix::from_vect(2, 2, &m.vect()).unwrap(), m);
    }

    #[test]
    fn kernel_json_shapes() {
        let k: Kernel<i32> = serde_json::from_str("[[1,2],[3,4]]").unwrap();
        assert_eq!((k.side(), k.depth()), (2, 1));
        assert_eq!(k.at(1, 0), 3);
        let k3: Kernel<i32> = serde_json::from_str("[[[1,5],[2,6]],[[3,7],[4,8]]]").unwrap();
        assert_eq!((k3.side(), k3.depth()), (2, 2));
        assert_eq!(k3.get(1, 0, 1), 7);
        assert_eq!(serde_json::to_string(&k3).unwrap(), "[[[1,5],[2,6]],[[3,7],[4,8]]]");
        assert!(serde_json::from_str::<Kernel<i32>>("[[1,2],[3]]").is_err());
    }

    #[test]
    fn left_mul_checks_length() {
        let m = Matrix::filled(3, 2, 1i64);
        assert_eq!(m.left_mul(&[1, 2, 3]).unwrap(), vec![6, 6]);
        assert!(m.left_mul(&[1, 2]).is_err());
    }
}
