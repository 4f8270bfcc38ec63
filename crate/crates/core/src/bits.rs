//! Packed bool matrix with both row-major and column-major word storage.
//!
//! Row scans (grouping users by fingerprint, applying patterns) read the
//! row-major side; attribute scans (popularity counts, split scoring) read
//! the column-major mirror. Both sides are kept in sync at build time; the
//! matrix is immutable afterwards.
//!
//! Bit layout: within a row, column j lives in word `j / 64`, bit `j % 64`;
//! serialized bytes are little-endian within the word, so bit 0 of byte 0 is
//! column 0.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    n_rows: usize,
    n_cols: usize,
    row_words: usize,
    col_words: usize,
    rows: Vec<u64>,
    cols: Vec<u64>,
}

pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

impl BitMatrix {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        let row_words = words_for(n_cols);
        let col_words = words_for(n_rows);
        Self {
            n_rows,
            n_cols,
            row_words,
            col_words,
            rows: vec![0; n_rows * row_words],
            cols: vec![0; n_cols * col_words],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row_words(&self) -> usize {
        self.row_words
    }

    pub fn col_words(&self) -> usize {
        self.col_words
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        self.rows[row * self.row_words + col / 64] >> (col % 64) & 1 == 1
    }

    /// Set (row, col) to 1 in both mirrors. Only used during construction.
    pub fn set(&mut self, row: usize, col: usize) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        self.rows[row * self.row_words + col / 64] |= 1 << (col % 64);
        self.cols[col * self.col_words + row / 64] |= 1 << (row % 64);
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[u64] {
        &self.rows[row * self.row_words..(row + 1) * self.row_words]
    }

    #[inline]
    pub fn col(&self, col: usize) -> &[u64] {
        &self.cols[col * self.col_words..(col + 1) * self.col_words]
    }

    /// Number of set bits in a column.
    pub fn col_popcount(&self, col: usize) -> usize {
        self.col(col).iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of set bits in a row.
    pub fn row_popcount(&self, row: usize) -> usize {
        self.row(row).iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Set bits of the row, masked by `mask` (row-width words), counted.
    pub fn row_popcount_masked(&self, row: usize, mask: &[u64]) -> usize {
        debug_assert_eq!(mask.len(), self.row_words);
        self.row(row)
            .iter()
            .zip(mask)
            .map(|(w, m)| (w & m).count_ones() as usize)
            .sum()
    }

    /// Column indices of the set bits in a row, ascending.
    pub fn row_ones(&self, row: usize) -> impl Iterator<Item = usize> + '_ {
        iter_ones(self.row(row))
    }

    /// Row indices of the set bits in a column, ascending.
    pub fn col_ones(&self, col: usize) -> impl Iterator<Item = usize> + '_ {
        iter_ones(self.col(col))
    }

    /// Zero the given columns in both mirrors.
    pub fn clear_columns(&mut self, cols_to_clear: &[usize]) {
        let mut mask = vec![u64::MAX; self.row_words];
        for &col in cols_to_clear {
            debug_assert!(col < self.n_cols);
            mask[col / 64] &= !(1 << (col % 64));
        }
        for row in 0..self.n_rows {
            let base = row * self.row_words;
            for (w, m) in self.rows[base..base + self.row_words].iter_mut().zip(&mask) {
                *w &= m;
            }
        }
        for &col in cols_to_clear {
            self.cols[col * self.col_words..(col + 1) * self.col_words].fill(0);
        }
    }
}

/// Ascending indices of set bits over a word slice.
pub fn iter_ones(words: &[u64]) -> impl Iterator<Item = usize> + '_ {
    words.iter().enumerate().flat_map(|(wi, &w)| {
        std::iter::successors(if w == 0 { None } else { Some(w) }, |w| {
            let w = w & (w - 1);
            if w == 0 {
                None
            } else {
                Some(w)
            }
        })
        .map(move |w| wi * 64 + w.trailing_zeros() as usize)
    })
}

/// Mark the given bit indices in a fresh word buffer of `words_for(len)` words.
pub fn bitmask(len: usize, set: impl IntoIterator<Item = usize>) -> Vec<u64> {
    let mut mask = vec![0u64; words_for(len)];
    for idx in set {
        debug_assert!(idx < len);
        mask[idx / 64] |= 1 << (idx % 64);
    }
    mask
}
