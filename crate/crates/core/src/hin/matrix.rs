use serde::{Deserialize, Serialize};

/// Sparse binary matrix stored as sorted, deduplicated column lists per row.
///
/// Every entry is either present (1) or absent (0); there is no way to store
/// any other value, which keeps all derived interaction matrices binary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinMatrix {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<Vec<u32>>,
}

impl BinMatrix {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            rows: vec![Vec::new(); n_rows],
        }
    }

    /// Builds a matrix from `(row, col)` pairs. Duplicates collapse.
    pub fn from_pairs<I>(n_rows: usize, n_cols: usize, pairs: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut rows = vec![Vec::new(); n_rows];
        for (r, c) in pairs {
            assert!(r < n_rows && c < n_cols, "entry ({r},{c}) outside {n_rows}x{n_cols}");
            rows[r].push(c as u32);
        }
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
        }
        Self { n_rows, n_cols, rows }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.rows[r]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.rows.iter().map(Vec::as_slice)
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r].binary_search(&(c as u32)).is_ok()
    }

    pub fn insert(&mut self, r: usize, c: usize) {
        assert!(r < self.n_rows && c < self.n_cols);
        let row = &mut self.rows[r];
        if let Err(pos) = row.binary_search(&(c as u32)) {
            row.insert(pos, c as u32);
        }
    }

    pub fn remove(&mut self, r: usize, c: usize) -> bool {
        let row = &mut self.rows[r];
        match row.binary_search(&(c as u32)) {
            Ok(pos) => {
                row.remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.iter().all(Vec::is_empty)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&c| (r, c as usize)))
    }

    pub fn transpose(&self) -> Self {
        let mut rows = vec![Vec::new(); self.n_cols];
        for (r, row) in self.rows.iter().enumerate() {
            for &c in row {
                rows[c as usize].push(r as u32);
            }
        }
        // rows are visited in ascending order, so each output row is already sorted
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            rows,
        }
    }

    /// Boolean matrix product: `(A ⊗ B)(r, c) = OR_k A(r, k) AND B(k, c)`.
    pub fn bool_product(&self, other: &BinMatrix) -> Self {
        assert_eq!(self.n_cols, other.n_rows, "inner dimensions differ");
        let mut mark = vec![false; other.n_cols];
        let mut rows = Vec::with_capacity(self.n_rows);
        for row in &self.rows {
            let mut out = Vec::new();
            for &k in row {
                for &c in other.row(k as usize) {
                    if !mark[c as usize] {
                        mark[c as usize] = true;
                        out.push(c);
                    }
                }
            }
            for &c in &out {
                mark[c as usize] = false;
            }
            out.sort_unstable();
            rows.push(out);
        }
        Self {
            n_rows: self.n_rows,
            n_cols: other.n_cols,
            rows,
        }
    }

    /// Elementwise logical OR.
    pub fn or(&self, other: &BinMatrix) -> Self {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| merge_sorted(a, b))
            .collect();
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            rows,
        }
    }

    pub fn drop_diagonal(&mut self) {
        for (r, row) in self.rows.iter_mut().enumerate() {
            row.retain(|&c| c as usize != r);
        }
    }

    /// Number of entries per column.
    pub fn col_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_cols];
        for row in &self.rows {
            for &c in row {
                counts[c as usize] += 1;
            }
        }
        counts
    }
}

pub(crate) fn merge_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}
