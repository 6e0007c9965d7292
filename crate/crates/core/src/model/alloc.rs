use crate::error::{Error, Result};

/// Combined feature-allocation and lifetime matrix.
///
/// Entry `(n, k)` holds `λ = z·ℓ`: zero when observation `n` does not start an
/// instance of feature `k`, otherwise the lifetime of that instance. An
/// instance started at row `n` with lifetime `ℓ` is active on rows
/// `n..n + ℓ` (0-based, end exclusive).
///
/// Storage is column-major because the samplers add, prune and scan whole
/// columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureAllocation {
    n_rows: usize,
    cols: Vec<Vec<u32>>,
}

/// One feature instance: the row it starts at and the feature it copies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Instance {
    pub start: usize,
    pub feature: usize,
}

impl FeatureAllocation {
    pub fn empty(n_rows: usize) -> Self {
        FeatureAllocation {
            n_rows,
            cols: Vec::new(),
        }
    }

    pub fn from_columns(n_rows: usize, cols: Vec<Vec<u32>>) -> Result<Self> {
        if let Some((k, c)) = cols.iter().enumerate().find(|(_, c)| c.len() != n_rows) {
            return Err(Error::Shape(format!(
                "column {k} has {} entries, expected {n_rows}",
                c.len()
            )));
        }
        Ok(FeatureAllocation { n_rows, cols })
    }

    /// Builds an allocation from row-major nested vectors.
    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let cols = (0..n_cols)
            .map(|k| rows.iter().map(|r| r[k]).collect())
            .collect();
        Ok(FeatureAllocation { n_rows, cols })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    #[inline]
    pub fn get(&self, n: usize, k: usize) -> u32 {
        self.cols[k][n]
    }

    #[inline]
    pub fn set(&mut self, n: usize, k: usize, lambda: u32) {
        self.cols[k][n] = lambda;
    }

    pub fn column(&self, k: usize) -> &[u32] {
        &self.cols[k]
    }

    pub fn columns(&self) -> &[Vec<u32>] {
        &self.cols
    }

    pub fn push_column(&mut self, col: Vec<u32>) -> Result<usize> {
        if col.len() != self.n_rows {
            return Err(Error::Shape(format!(
                "column has {} entries, expected {}",
                col.len(),
                self.n_rows
            )));
        }
        self.cols.push(col);
        Ok(self.cols.len() - 1)
    }

    pub fn remove_column(&mut self, k: usize) -> Vec<u32> {
        self.cols.remove(k)
    }

    /// Number of rows that start an instance of feature `k` (`m_k`).
    pub fn column_count(&self, k: usize) -> usize {
        self.cols[k].iter().filter(|&&l| l > 0).count()
    }

    /// `m_k` with row `n` left out.
    pub fn column_count_excluding(&self, k: usize, n: usize) -> usize {
        self.column_count(k) - usize::from(self.cols[k][n] > 0)
    }

    /// Binary pattern of column `k`.
    pub fn pattern(&self, k: usize) -> Vec<bool> {
        self.cols[k].iter().map(|&l| l > 0).collect()
    }

    /// Number of columns with at least one instance.
    pub fn n_nonempty(&self) -> usize {
        self.cols.iter().filter(|c| c.iter().any(|&l| l > 0)).count()
    }

    /// Drops every all-zero column and returns the indices that were kept, in
    /// order, so parallel per-feature arrays can be compacted the same way.
    pub fn prune_empty(&mut self) -> Vec<usize> {
        let keep: Vec<usize> = (0..self.cols.len())
            .filter(|&k| self.cols[k].iter().any(|&l| l > 0))
            .collect();
        if keep.len() != self.cols.len() {
            let mut cols = std::mem::take(&mut self.cols);
            let mut i = 0;
            cols.retain(|_| {
                let r = keep.binary_search(&i).is_ok();
                i += 1;
                r
            });
            self.cols = cols;
        }
        keep
    }

    /// Largest representable lifetime for an instance starting at row `n`: the
    /// instance is then active through the last observation.
    #[inline]
    pub fn cap(&self, n: usize) -> u32 {
        (self.n_rows - n) as u32
    }

    /// Copy with every lifetime clipped to the data horizon.
    pub fn capped(&self) -> Self {
        let mut out = self.clone();
        for col in &mut out.cols {
            for (n, l) in col.iter_mut().enumerate() {
                *l = (*l).min((self.n_rows - n) as u32);
            }
        }
        out
    }

    /// `(start, feature, lifetime)` for every instance, column by column.
    pub fn instances(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.cols.iter().enumerate().flat_map(|(k, col)| {
            col.iter()
                .enumerate()
                .filter(|(_, &l)| l > 0)
                .map(move |(n, &l)| (n, k, l))
        })
    }

    pub fn n_instances(&self) -> usize {
        self.cols.iter().flatten().filter(|&&l| l > 0).count()
    }

    /// Sum of all lifetimes, each clipped to the horizon: the number of
    /// (row, instance) contributions to the data.
    pub fn total_contributions(&self) -> u64 {
        self.instances()
            .map(|(n, _, l)| u64::from(l.min(self.cap(n))))
            .sum()
    }

    /// Lifetimes clipped to the horizon as a row-major `N × K` table.
    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        (0..self.n_rows)
            .map(|n| self.cols.iter().map(|c| c[n]).collect())
            .collect()
    }
}

/// Instances active at row `n`: every `(i, k)` with `i ≤ n`, `λ_ik ≥ 1` and
/// `i + λ_ik > n`.
pub fn active_instances(alloc: &FeatureAllocation, n: usize) -> Result<Vec<Instance>> {
    if n >= alloc.n_rows() {
        return Err(Error::Index {
            index: n,
            bound: alloc.n_rows(),
        });
    }
    let mut out = Vec::new();
    for (k, col) in alloc.columns().iter().enumerate() {
        for (i, &l) in col[..=n].iter().enumerate() {
            if l > 0 && i + l as usize > n {
                out.push(Instance {
                    start: i,
                    feature: k,
                });
            }
        }
    }
    Ok(out)
}

/// Per-row active instance sets for a whole allocation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceSet {
    rows: Vec<Vec<Instance>>,
}

impl InstanceSet {
    /// Builds every row's set in one forward pass: instances carried over from
    /// the previous row lose one unit of remaining lifetime, and new instances
    /// starting at the row are appended.
    pub fn from_allocation(alloc: &FeatureAllocation) -> Self {
        let mut rows = Vec::with_capacity(alloc.n_rows());
        let mut live: Vec<(Instance, u32)> = Vec::new();
        for n in 0..alloc.n_rows() {
            live.retain_mut(|(_, remaining)| {
                *remaining -= 1;
                *remaining > 0
            });
            for k in 0..alloc.n_cols() {
                let l = alloc.get(n, k);
                if l > 0 {
                    live.push((Instance { start: n, feature: k }, l));
                }
            }
            let mut row: Vec<Instance> = live.iter().map(|(i, _)| *i).collect();
            row.sort_by_key(|i| (i.feature, i.start));
            rows.push(row);
        }
        InstanceSet { rows }
    }

    pub fn row(&self, n: usize) -> &[Instance] {
        &self.rows[n]
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// `|𝒴_n|` for every row.
    pub fn sizes(&self) -> Vec<usize> {
        self.rows.iter().map(Vec::len).collect()
    }

    /// Count of active copies of each feature at each row, row-major `N × K`.
    pub fn counts(&self, n_features: usize) -> Vec<Vec<u32>> {
        self.rows
            .iter()
            .map(|row| {
                let mut c = vec![0u32; n_features];
                for inst in row {
                    c[inst.feature] += 1;
                }
                c
            })
            .collect()
    }
}
