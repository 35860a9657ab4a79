//! Small dense integer matrices with an exact characteristic polynomial.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::poly::IntPoly;

#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize, PartialOrd, Ord)]
pub struct IntMatrix {
    n: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn zeros(n: usize) -> Self {
        IntMatrix {
            n,
            data: vec![0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMatrix::zeros(n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    /// Square matrix from rows. Returns `None` when the rows are ragged or not square.
    pub fn from_rows(rows: &[Vec<i64>]) -> Option<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return None;
        }
        Some(IntMatrix {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    /// `D_{i,j}` with 1-based indices, as in the fold matrix `I + D_{i,j}`.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = IntMatrix::zeros(n);
        m.set(i - 1, j - 1, 1);
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: i64) {
        self.data[i * self.n + j] = v;
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: i64) {
        self.data[i * self.n + j] += v;
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        self.data.chunks(self.n.max(1)).map(|r| r.to_vec()).take(self.n).collect()
    }

    pub fn column(&self, j: usize) -> Vec<i64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn add(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.n, other.n);
        IntMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.n, other.n);
        IntMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = IntMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..n {
                    let b = other.get(k, j);
                    if b != 0 {
                        let v = a.checked_mul(b).and_then(|x| x.checked_add(out.get(i, j)));
                        out.set(i, j, v.expect("matrix entry overflow"));
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) as f64 * v[j]).sum())
            .collect()
    }

    pub fn pow(&self, k: u32) -> IntMatrix {
        let mut out = IntMatrix::identity(self.n);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut out = IntMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn trace(&self) -> i64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn entry_sum(&self) -> i64 {
        self.data.iter().sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&x| x >= 0)
    }

    pub fn is_positive(&self) -> bool {
        self.data.iter().all(|&x| x > 0)
    }

    /// Zero pattern only; used for primitivity tests without overflow.
    pub fn support(&self) -> Vec<Vec<bool>> {
        self.rows()
            .into_iter()
            .map(|r| r.into_iter().map(|x| x != 0).collect())
            .collect()
    }

    /// Conjugate by a permutation: entry (i, j) moves to (perm[i], perm[j]).
    pub fn permuted(&self, perm: &[usize]) -> IntMatrix {
        let mut out = IntMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(perm[i], perm[j], self.get(i, j));
            }
        }
        out
    }

    /// `det(tI - M)` by fraction-free (Bareiss) elimination over `Z[t]`.
    ///
    /// The leading principal minors of `tI - M` are monic, so no pivoting is
    /// ever needed and every division is exact.
    pub fn char_poly(&self) -> IntPoly {
        let n = self.n;
        if n == 0 {
            return IntPoly::one();
        }
        let mut a: Vec<Vec<IntPoly>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let m = IntPoly::constant(-self.get(i, j));
                        if i == j {
                            m.add(&IntPoly::t())
                        } else {
                            m
                        }
                    })
                    .collect()
            })
            .collect();
        let mut prev = IntPoly::one();
        for k in 0..n - 1 {
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = a[k][k].mul(&a[i][j]).sub(&a[i][k].mul(&a[k][j]));
                    a[i][j] = num
                        .div_exact(&prev)
                        .expect("Bareiss step must divide exactly");
                }
            }
            prev = a[k][k].clone();
        }
        a[n - 1][n - 1].clone()
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.rows().iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            write!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// Parse whitespace-separated integer rows; `#` starts a comment.
pub fn parse_matrix(text: &str) -> Result<IntMatrix, String> {
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line == "matrix" {
            continue;
        }
        let row: Result<Vec<i64>, _> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<i64>())
            .collect();
        rows.push(row.map_err(|e| format!("line {}: {e}", ln + 1))?);
    }
    if rows.is_empty() {
        return Err("empty matrix".into());
    }
    IntMatrix::from_rows(&rows).ok_or_else(|| "matrix is not square".to_string())
}
