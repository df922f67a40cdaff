//! Sparse finite-difference Jacobian of the discrete operator `u ↦ Q_c(u)`,
//! including the dependence of the ghost ring on the interior.
//!
//! Columns that never share a row are perturbed together (distance-2 colouring
//! of the stencil graph), so one assembly costs one operator evaluation per
//! colour. The sparsity pattern, colouring and symbolic LU are built once per
//! grid.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::MatMut;

use crate::error::{CapflowError, Result};
use crate::grid::Grid;

/// Interior nodes read when evaluating the operator at node `(i, j)`.
fn row_dependencies(grid: &Grid, i: usize, j: usize) -> Vec<usize> {
    let nb = grid.n_beta as isize;
    let ng = grid.n_gamma as isize;
    let idx = |ii: isize, jj: isize| (ii as usize) * grid.n_gamma + jj.rem_euclid(ng) as usize;
    let mut cols = Vec::with_capacity(16);
    for di in -1..=1isize {
        for dj in -1..=1isize {
            let ii = i as isize + di;
            let jj = j as isize + dj;
            if ii < 0 {
                cols.push(idx(0, jj + ng / 2));
            } else if ii >= nb {
                // ghost value at jj: last three rings at jj - 1 ..= jj + 1
                for r in nb - 3..nb {
                    for dk in -1..=1 {
                        cols.push(idx(r, jj + dk));
                    }
                }
            } else {
                cols.push(idx(ii, jj));
            }
        }
    }
    cols.sort_unstable();
    cols.dedup();
    cols
}

pub(crate) struct JacobianWorkspace {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    diag_pos: Vec<usize>,
    color_groups: Vec<Vec<usize>>,
    symbolic: SymbolicSparseColMat<usize>,
    symbolic_lu: SymbolicLu<usize>,
}

impl JacobianWorkspace {
    pub(crate) fn new(grid: &Grid) -> Result<Self> {
        let n = grid.len();
        let rows: Vec<Vec<usize>> = grid.nodes().map(|(i, j)| row_dependencies(grid, i, j)).collect();

        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (r, deps) in rows.iter().enumerate() {
            for &c in deps {
                cols[c].push(r);
            }
        }

        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut diag_pos = vec![usize::MAX; n];
        col_ptr.push(0);
        for (c, rs) in cols.iter().enumerate() {
            for &r in rs {
                if r == c {
                    diag_pos[c] = row_idx.len();
                }
                row_idx.push(r);
            }
            col_ptr.push(row_idx.len());
        }
        debug_assert!(diag_pos.iter().all(|&p| p != usize::MAX));

        // greedy distance-2 colouring
        let mut color = vec![usize::MAX; n];
        let mut mark = Vec::<usize>::new();
        for c in 0..n {
            for &r in &cols[c] {
                for &other in &rows[r] {
                    let k = color[other];
                    if k != usize::MAX {
                        if mark.len() <= k {
                            mark.resize(k + 1, usize::MAX);
                        }
                        mark[k] = c;
                    }
                }
            }
            color[c] = (0..).find(|&k| k >= mark.len() || mark[k] != c).unwrap();
        }
        let n_colors = color.iter().max().map_or(0, |m| m + 1);
        let mut color_groups = vec![Vec::new(); n_colors];
        for (c, &k) in color.iter().enumerate() {
            color_groups[k].push(c);
        }

        let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr.clone(), None, row_idx.clone());
        let symbolic_lu = SymbolicLu::try_new(symbolic.as_ref())
            .map_err(|e| CapflowError::Solver(format!("symbolic LU failed: {e:?}")))?;

        Ok(Self {
            n,
            col_ptr,
            row_idx,
            diag_pos,
            color_groups,
            symbolic,
            symbolic_lu,
        })
    }

    #[cfg(test)]
    fn n_colors(&self) -> usize {
        self.color_groups.len()
    }

    /// Forward-difference Jacobian values in CSC order, given `f0 = eval(u)`.
    pub(crate) fn assemble(
        &self,
        u: &[f64],
        f0: &[f64],
        eval: impl Fn(Vec<f64>) -> Result<Vec<f64>>,
    ) -> Result<Vec<f64>> {
        let mut jac = vec![0.0; self.row_idx.len()];
        let mut steps = vec![0.0; self.n];
        for group in &self.color_groups {
            let mut pert = u.to_vec();
            for &c in group {
                let h = f64::EPSILON.sqrt() * u[c].abs().max(1.0);
                pert[c] = u[c] + h;
                steps[c] = pert[c] - u[c];
            }
            let f1 = eval(pert)?;
            for &c in group {
                for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                    let r = self.row_idx[p];
                    jac[p] = (f1[r] - f0[r]) / steps[c];
                }
            }
        }
        Ok(jac)
    }

    /// Factorize `I − scale·J`.
    pub(crate) fn factor_shifted(&self, jac: &[f64], scale: f64) -> Result<ShiftedLu> {
        let mut w: Vec<f64> = jac.iter().map(|&x| -scale * x).collect();
        for &p in &self.diag_pos {
            w[p] += 1.0;
        }
        let mat = SparseColMatRef::new(self.symbolic.as_ref(), &w);
        let lu = Lu::try_new_with_symbolic(self.symbolic_lu.clone(), mat)
            .map_err(|e| CapflowError::Solver(format!("numeric LU failed: {e:?}")))?;
        Ok(ShiftedLu { lu, n: self.n })
    }

    /// Dense product `J x` from CSC values, used by tests.
    #[cfg(test)]
    pub(crate) fn apply(&self, jac: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for c in 0..self.n {
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[p]] += jac[p] * x[c];
            }
        }
        y
    }
}

pub(crate) struct ShiftedLu {
    lu: Lu<usize, f64>,
    n: usize,
}

impl ShiftedLu {
    pub(crate) fn solve_in_place(&self, rhs: &mut [f64]) {
        let mat = MatMut::from_column_major_slice_mut(rhs, self.n, 1);
        self.lu.solve_in_place(mat);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::eval_qc_values;
    use crate::flow::SurfaceState;
    use crate::geometry::{AmbientParams, CapSpec};

    fn bumpy_state(nb: usize, ng: usize, theta: f64) -> SurfaceState {
        let spec = CapSpec::centered(2.0, 1.0, theta).unwrap();
        let cap = SurfaceState::from_cap(Grid::new(nb, ng).unwrap(), &spec).unwrap();
        let g = cap.grid.clone();
        let vals = g
            .nodes()
            .map(|(i, j)| cap.u.get(i, j) + 0.05 * (2.0 * g.gamma(j)).cos() * (g.beta(i) * 2.0).sin().powi(2))
            .collect();
        cap.with_values(vals, 0.0).unwrap()
    }

    #[test]
    fn colouring_separates_shared_rows() {
        let g = Grid::new(8, 16).unwrap();
        let ws = JacobianWorkspace::new(&g).unwrap();
        let mut color = vec![0; g.len()];
        for (k, grp) in ws.color_groups.iter().enumerate() {
            for &c in grp {
                color[c] = k;
            }
        }
        for (i, j) in g.nodes() {
            let deps = row_dependencies(&g, i, j);
            for a in 0..deps.len() {
                for b in a + 1..deps.len() {
                    assert_ne!(color[deps[a]], color[deps[b]]);
                }
            }
        }
        assert!(ws.n_colors() <= 40, "{}", ws.n_colors());
    }

    #[test]
    fn coloured_jacobian_matches_single_column_differences() {
        let theta = 1.1;
        let s = bumpy_state(8, 16, theta);
        let g = &s.grid;
        let amb = AmbientParams::new(2.0, theta).unwrap();
        let u = s.u.values().to_vec();
        let eval = |v: Vec<f64>| eval_qc_values(v, g, &amb);
        let f0 = eval(u.clone()).unwrap();
        let ws = JacobianWorkspace::new(g).unwrap();
        let jac = ws.assemble(&u, &f0, eval).unwrap();
        for c in [0, 5, 40, 77, g.len() - 1, g.len() - 9] {
            let h = 1e-7;
            let mut up = u.clone();
            up[c] += h;
            let mut dn = u.clone();
            dn[c] -= h;
            let fp = eval(up).unwrap();
            let fm = eval(dn).unwrap();
            let mut e = vec![0.0; g.len()];
            e[c] = 1.0;
            let col = ws.apply(&jac, &e);
            for r in 0..g.len() {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                assert!(
                    (fd - col[r]).abs() <= 1e-5 * (1.0 + fd.abs()),
                    "col {c} row {r}: {fd} vs {}",
                    col[r]
                );
            }
        }
    }

    #[test]
    fn shifted_solve_inverts() {
        let s = bumpy_state(8, 16, 2.0);
        let g = &s.grid;
        let amb = s.amb;
        let u = s.u.values().to_vec();
        let eval = |v: Vec<f64>| eval_qc_values(v, g, &amb);
        let f0 = eval(u.clone()).unwrap();
        let ws = JacobianWorkspace::new(g).unwrap();
        let jac = ws.assemble(&u, &f0, eval).unwrap();
        let scale = 0.3;
        let lu = ws.factor_shifted(&jac, scale).unwrap();
        let x: Vec<f64> = (0..g.len()).map(|k| (k as f64 * 0.37).sin()).collect();
        let jx = ws.apply(&jac, &x);
        let mut b: Vec<f64> = x.iter().zip(&jx).map(|(a, b)| a - scale * b).collect();
        lu.solve_in_place(&mut b);
        for (a, b) in x.iter().zip(&b) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
