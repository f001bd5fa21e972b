//! Compressed sparse row matrices and an ILU(0)-preconditioned BiCGSTAB
//! solver with symmetric diagonal scaling.

use super::TissueError;

/// Accumulates `(row, col, value)` entries; duplicates are summed.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push((row, col, value));
    }

    /// Sorted CSR with every diagonal entry present (zero if never added).
    pub fn build(mut self) -> CsrMatrix {
        for i in 0..self.n {
            self.entries.push((i, i, 0.0));
        }
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let diag = (0..self.n)
            .map(|i| {
                (row_ptr[i]..row_ptr[i + 1])
                    .find(|&k| cols[k] == i)
                    .expect("diagonal is always present")
            })
            .collect();
        CsrMatrix {
            n: self.n,
            row_ptr,
            cols,
            vals,
            diag,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    /// Position of the diagonal entry of each row in `cols`/`vals`.
    pub diag: Vec<usize>,
}

impl CsrMatrix {
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[i] = s;
        }
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.vals[self.diag[i]]
    }

    pub fn add_diagonal(&mut self, i: usize, v: f64) {
        self.vals[self.diag[i]] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        (self.row_ptr[i]..self.row_ptr[i + 1])
            .find(|&k| self.cols[k] == j)
            .map_or(0.0, |k| self.vals[k])
    }
}

/// Incomplete LU factorization on the sparsity pattern of the matrix.
struct Ilu0 {
    lu: CsrMatrix,
}

impl Ilu0 {
    fn new(a: &CsrMatrix) -> Result<Self, TissueError> {
        let mut lu = a.clone();
        let n = lu.n;
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in start..end {
                pos[lu.cols[k]] = k;
            }
            for k in start..lu.diag[i] {
                let j = lu.cols[k];
                let pivot = lu.vals[lu.diag[j]];
                let factor = lu.vals[k] / pivot;
                lu.vals[k] = factor;
                for kk in lu.diag[j] + 1..lu.row_ptr[j + 1] {
                    let p = pos[lu.cols[kk]];
                    if p != usize::MAX {
                        lu.vals[p] -= factor * lu.vals[kk];
                    }
                }
            }
            for k in start..end {
                pos[lu.cols[k]] = usize::MAX;
            }
            let d = lu.vals[lu.diag[i]];
            if d == 0.0 || !d.is_finite() {
                return Err(TissueError::Solver(format!("zero pivot in row {i}")));
            }
        }
        Ok(Self { lu })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut s = r[i];
            for k in lu.row_ptr[i]..lu.diag[i] {
                s -= lu.vals[k] * z[lu.cols[k]];
            }
            z[i] = s;
        }
        for i in (0..lu.n).rev() {
            let mut s = z[i];
            for k in lu.diag[i] + 1..lu.row_ptr[i + 1] {
                s -= lu.vals[k] * z[lu.cols[k]];
            }
            z[i] = s / lu.vals[lu.diag[i]];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target on the scaled system.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-13,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b`, starting from the contents of `x`.
///
/// Rows whose only nonzero is the diagonal (Dirichlet rows) are solved
/// directly and eliminated. The remaining system is scaled as
/// `D A D y = D b` with `D = diag(|a_ii|)^(-1/2)`, which equilibrates the
/// very different magnitudes of vessel and tissue rows.
pub fn solve(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    opts: &SolverOptions,
) -> Result<SolveStats, TissueError> {
    let n = a.n;
    let fixed: Vec<bool> = (0..n)
        .map(|i| (a.row_ptr[i]..a.row_ptr[i + 1]).all(|k| k == a.diag[i] || a.vals[k] == 0.0))
        .collect();
    for i in 0..n {
        if fixed[i] {
            let d = a.diagonal(i);
            if d == 0.0 {
                return Err(TissueError::Solver(format!("empty row {i}")));
            }
            x[i] = b[i] / d;
        }
    }
    let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
    if free.is_empty() {
        return Ok(SolveStats {
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let mut slot = vec![usize::MAX; n];
    for (j, &i) in free.iter().enumerate() {
        slot[i] = j;
    }
    let m = free.len();
    let mut row_ptr = Vec::with_capacity(m + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut diag = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    row_ptr.push(0);
    for &i in &free {
        let mut bi = b[i];
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            let c = a.cols[k];
            if fixed[c] {
                bi -= a.vals[k] * x[c];
            } else {
                if c == i {
                    diag.push(cols.len());
                }
                cols.push(slot[c]);
                vals.push(a.vals[k]);
            }
        }
        row_ptr.push(cols.len());
        rhs.push(bi);
    }
    let mut s = CsrMatrix {
        n: m,
        row_ptr,
        cols,
        vals,
        diag,
    };
    let d: Vec<f64> = (0..m)
        .map(|i| {
            let v = s.diagonal(i).abs();
            if v > 0.0 {
                1.0 / v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    for i in 0..m {
        for k in s.row_ptr[i]..s.row_ptr[i + 1] {
            s.vals[k] *= d[i] * d[s.cols[k]];
        }
    }
    let bs: Vec<f64> = rhs.iter().zip(&d).map(|(b, d)| b * d).collect();
    let mut y: Vec<f64> = free.iter().zip(&d).map(|(&i, d)| x[i] / d).collect();
    let stats = bicgstab(&s, &bs, &mut y, opts)?;
    for (j, &i) in free.iter().enumerate() {
        x[i] = y[j] * d[j];
    }
    Ok(stats)
}

const MAX_RESTARTS: usize = 20;

fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    opts: &SolverOptions,
) -> Result<SolveStats, TissueError> {
    let n = a.n;
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let ilu = Ilu0::new(a)?;
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut rel = norm(&r) / b_norm;
    if rel <= opts.rel_tol {
        return Ok(SolveStats {
            iterations: 0,
            rel_residual: rel,
        });
    }
    let mut r_hat = r.clone();
    let mut restarts = 0;
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=opts.max_iter {
        let mut rho_new = dot(&r_hat, &r);
        if rho_new.abs() <= 1e-30 * dot(&r, &r) || !rho_new.is_finite() {
            // shadow residual orthogonal to the residual: restart from it
            restarts += 1;
            if restarts > MAX_RESTARTS || !rho_new.is_finite() {
                return Err(TissueError::Solver(format!("BiCGSTAB breakdown at iteration {it}")));
            }
            r_hat.copy_from_slice(&r);
            rho_new = dot(&r_hat, &r);
            (rho, alpha, omega) = (1.0, 1.0, 1.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        ilu.apply(&p, &mut p_hat);
        a.mul_vec(&p_hat, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / b_norm <= opts.rel_tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            return Ok(SolveStats {
                iterations: it,
                rel_residual: true_residual(a, b, x) / b_norm,
            });
        }
        ilu.apply(&s, &mut s_hat);
        a.mul_vec(&s_hat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        rel = norm(&r) / b_norm;
        if rel <= opts.rel_tol {
            return Ok(SolveStats {
                iterations: it,
                rel_residual: true_residual(a, b, x) / b_norm,
            });
        }
        if omega == 0.0 {
            return Err(TissueError::Solver(format!("BiCGSTAB stagnation at iteration {it}")));
        }
    }
    Err(TissueError::Solver(format!(
        "BiCGSTAB did not converge in {} iterations (relative residual {rel:e})",
        opts.max_iter
    )))
}

fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64]) -> f64 {
    let mut ax = vec![0.0; a.n];
    a.mul_vec(x, &mut ax);
    ax.iter().zip(b).map(|(p, q)| (q - p).powi(2)).sum::<f64>().sqrt()
}
