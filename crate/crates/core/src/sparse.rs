//! Sparse Cholesky factorization for the Newton systems.
//!
//! Matrices are symmetric and stored as the upper triangle in compressed
//! sparse column form. The factorization is the classic up-looking
//! algorithm driven by the elimination tree; the symbolic phase is done once
//! per sparsity pattern and reused for every Newton step.

const NONE: usize = usize::MAX;

/// Upper triangle (row <= column) of a symmetric matrix in CSC form, with
/// rows sorted inside each column.
#[derive(Clone, Debug)]
pub struct UpperCsc {
    n: usize,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
    values: Vec<f64>,
}

impl UpperCsc {
    /// Builds the pattern from `(row, col)` pairs; duplicates are merged,
    /// lower-triangle pairs are mirrored.
    pub fn from_pattern(n: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (r, c) in entries {
            let (r, c) = if r <= c { (r, c) } else { (c, r) };
            assert!(c < n, "entry ({r}, {c}) outside a {n} x {n} matrix");
            cols[c].push(r);
        }
        let mut colptr = Vec::with_capacity(n + 1);
        let mut rowidx = Vec::new();
        colptr.push(0);
        for mut col in cols {
            col.sort_unstable();
            col.dedup();
            rowidx.extend(col);
            colptr.push(rowidx.len());
        }
        let nnz = rowidx.len();
        UpperCsc {
            n,
            colptr,
            rowidx,
            values: vec![0.0; nnz],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.rowidx.len()
    }

    /// Storage slot of entry `(r, c)` (either triangle), if present.
    pub fn slot(&self, r: usize, c: usize) -> Option<usize> {
        let (r, c) = if r <= c { (r, c) } else { (c, r) };
        let col = &self.rowidx[self.colptr[c]..self.colptr[c + 1]];
        col.binary_search(&r).ok().map(|k| self.colptr[c] + k)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// `y = A x` using the symmetric structure.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for c in 0..self.n {
            for p in self.colptr[c]..self.colptr[c + 1] {
                let r = self.rowidx[p];
                let a = self.values[p];
                y[r] += a * x[c];
                if r != c {
                    y[c] += a * x[r];
                }
            }
        }
        y
    }

    /// Symmetric permutation `C = P A P^T` where `perm[new] = old`; returns
    /// the permuted matrix and, for each slot of `self`, its slot in `C`.
    pub fn permuted(&self, perm: &[usize]) -> (UpperCsc, Vec<usize>) {
        assert_eq!(perm.len(), self.n);
        let mut inv = vec![NONE; self.n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut pairs = Vec::with_capacity(self.nnz());
        for c in 0..self.n {
            for p in self.colptr[c]..self.colptr[c + 1] {
                pairs.push((inv[self.rowidx[p]], inv[c]));
            }
        }
        let out = UpperCsc::from_pattern(self.n, pairs.iter().copied());
        let map = pairs
            .iter()
            .map(|&(r, c)| out.slot(r, c).expect("permuted pattern contains every entry"))
            .collect();
        (out, map)
    }
}

/// Elimination tree and column structure of `L`, reusable across numeric
/// factorizations of matrices with the same pattern.
#[derive(Clone, Debug)]
pub struct CholeskySymbolic {
    n: usize,
    parent: Vec<usize>,
    lp: Vec<usize>,
}

/// Pattern of row `k` of `L` (excluding the diagonal) in topological order,
/// written to `stack[top..n]`; returns `top`.
fn ereach(a: &UpperCsc, k: usize, parent: &[usize], stack: &mut [usize], mark: &mut [usize]) -> usize {
    let n = a.n;
    let mut top = n;
    mark[k] = k;
    for p in a.colptr[k]..a.colptr[k + 1] {
        let mut i = a.rowidx[p];
        if i > k {
            continue;
        }
        let mut len = 0;
        while mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            top -= 1;
            len -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

impl CholeskySymbolic {
    pub fn analyze(a: &UpperCsc) -> Self {
        let n = a.n;
        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for p in a.colptr[k]..a.colptr[k + 1] {
                let mut i = a.rowidx[p];
                while i != NONE && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == NONE {
                        parent[i] = k;
                    }
                    i = next;
                }
            }
        }
        let mut counts = vec![1usize; n];
        let mut stack = vec![0; n];
        let mut mark = vec![NONE; n];
        for k in 0..n {
            let top = ereach(a, k, &parent, &mut stack, &mut mark);
            for &j in &stack[top..n] {
                counts[j] += 1;
            }
        }
        let mut lp = Vec::with_capacity(n + 1);
        lp.push(0);
        let mut acc = 0;
        for c in counts {
            acc += c;
            lp.push(acc);
        }
        CholeskySymbolic { n, parent, lp }
    }

    /// Number of nonzeros in the factor, diagonal included.
    pub fn factor_nnz(&self) -> usize {
        self.lp[self.n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotPositiveDefinite {
    pub column: usize,
    pub pivot: f64,
}

/// Lower-triangular Cholesky factor `A = L L^T`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
}

impl CholeskyFactor {
    pub fn factor(a: &UpperCsc, sym: &CholeskySymbolic) -> Result<Self, NotPositiveDefinite> {
        let n = a.n;
        assert_eq!(n, sym.n);
        let lp = sym.lp.clone();
        let nnz = sym.factor_nnz();
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0; nnz];
        let mut next: Vec<usize> = lp[..n].to_vec();
        let mut x = vec![0.0; n];
        let mut stack = vec![0; n];
        let mut mark = vec![NONE; n];
        for k in 0..n {
            let top = ereach(a, k, &sym.parent, &mut stack, &mut mark);
            x[k] = 0.0;
            for p in a.colptr[k]..a.colptr[k + 1] {
                let r = a.rowidx[p];
                if r <= k {
                    x[r] = a.values[p];
                }
            }
            let akk = x[k];
            let mut d = akk;
            x[k] = 0.0;
            for &i in &stack[top..n] {
                let lki = x[i] / lx[lp[i]];
                x[i] = 0.0;
                for p in lp[i] + 1..next[i] {
                    x[li[p]] -= lx[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                li[p] = k;
                lx[p] = lki;
            }
            if !(d > 16.0 * f64::EPSILON * akk.abs()) {
                return Err(NotPositiveDefinite { column: k, pivot: d });
            }
            let p = next[k];
            next[k] += 1;
            li[p] = k;
            lx[p] = d.sqrt();
        }
        Ok(CholeskyFactor { lp, li, lx })
    }

    /// Solves `L L^T x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.lp.len() - 1;
        for j in 0..n {
            let (start, end) = (self.lp[j], self.lp[j + 1]);
            b[j] /= self.lx[start];
            let bj = b[j];
            for p in start + 1..end {
                b[self.li[p]] -= self.lx[p] * bj;
            }
        }
        for j in (0..n).rev() {
            let (start, end) = (self.lp[j], self.lp[j + 1]);
            let mut s = b[j];
            for p in start + 1..end {
                s -= self.lx[p] * b[self.li[p]];
            }
            b[j] = s / self.lx[start];
        }
    }
}

/// Geometric nested-dissection ordering of a `w x h` lattice (index
/// `x + y * w`) for stencils reaching one lattice step, diagonals included.
/// Returns `perm` with `perm[new] = old`.
pub fn nested_dissection(w: usize, h: usize) -> Vec<usize> {
    fn recurse(x0: usize, x1: usize, y0: usize, y1: usize, w: usize, out: &mut Vec<usize>) {
        let (dx, dy) = (x1 - x0, y1 - y0);
        if dx == 0 || dy == 0 {
            return;
        }
        if dx * dy <= 16 || (dx < 3 && dy < 3) {
            for y in y0..y1 {
                for x in x0..x1 {
                    out.push(x + y * w);
                }
            }
            return;
        }
        if dx >= dy {
            let m = x0 + dx / 2;
            recurse(x0, m, y0, y1, w, out);
            recurse(m + 1, x1, y0, y1, w, out);
            out.extend((y0..y1).map(|y| m + y * w));
        } else {
            let m = y0 + dy / 2;
            recurse(x0, x1, y0, m, w, out);
            recurse(x0, x1, m + 1, y1, w, out);
            out.extend((x0..x1).map(|x| x + m * w));
        }
    }
    let mut out = Vec::with_capacity(w * h);
    recurse(0, w, 0, h, w, &mut out);
    out
}
