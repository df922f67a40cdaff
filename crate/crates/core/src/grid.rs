//! Discrete calculus on the half-sphere `S²₊`.
//!
//! Nodes are cell-centred in β (`β_i = (i + ½)Δβ`) and uniform-periodic in γ
//! (`γ_j = jΔγ`). Stencils that step across the pole read `(−β_i, γ)` as
//! `(β_i, γ + π)`, which is why `n_gamma` must be even. Beyond the wall
//! `β = π/2` sits one ghost ring, filled by [`apply_capillary_bc`].

use std::f64::consts::PI;

use crate::error::{CapflowError, Result};
use crate::geometry::{FrameJet, Gradient, Hessian};

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub n_beta: usize,
    pub n_gamma: usize,
    pub d_beta: f64,
    pub d_gamma: f64,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    sin_beta: Vec<f64>,
    cos_beta: Vec<f64>,
    sin_gamma: Vec<f64>,
    cos_gamma: Vec<f64>,
}

impl Grid {
    pub const MIN_N_BETA: usize = 8;
    pub const MIN_N_GAMMA: usize = 16;

    pub fn new(n_beta: usize, n_gamma: usize) -> Result<Self> {
        let mut problems = Vec::new();
        if n_beta < Self::MIN_N_BETA {
            problems.push(format!("n_beta = {n_beta} must be at least {}", Self::MIN_N_BETA));
        }
        if n_gamma < Self::MIN_N_GAMMA {
            problems.push(format!("n_gamma = {n_gamma} must be at least {}", Self::MIN_N_GAMMA));
        }
        if n_gamma % 2 != 0 {
            problems.push(format!("n_gamma = {n_gamma} must be even for pole closure"));
        }
        if !problems.is_empty() {
            return Err(CapflowError::Validation(problems));
        }
        let d_beta = PI / 2.0 / n_beta as f64;
        let d_gamma = 2.0 * PI / n_gamma as f64;
        let beta: Vec<f64> = (0..n_beta).map(|i| (i as f64 + 0.5) * d_beta).collect();
        let gamma: Vec<f64> = (0..n_gamma).map(|j| j as f64 * d_gamma).collect();
        Ok(Self {
            n_beta,
            n_gamma,
            d_beta,
            d_gamma,
            sin_beta: beta.iter().map(|b| b.sin()).collect(),
            cos_beta: beta.iter().map(|b| b.cos()).collect(),
            sin_gamma: gamma.iter().map(|g| g.sin()).collect(),
            cos_gamma: gamma.iter().map(|g| g.cos()).collect(),
            beta,
            gamma,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_beta * self.n_gamma
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_gamma + j
    }

    #[inline]
    pub fn beta(&self, i: usize) -> f64 {
        self.beta[i]
    }

    #[inline]
    pub fn gamma(&self, j: usize) -> f64 {
        self.gamma[j]
    }

    #[inline]
    pub fn sin_beta(&self, i: usize) -> f64 {
        self.sin_beta[i]
    }

    #[inline]
    pub fn cos_beta(&self, i: usize) -> f64 {
        self.cos_beta[i]
    }

    #[inline]
    pub fn sin_gamma(&self, j: usize) -> f64 {
        self.sin_gamma[j]
    }

    #[inline]
    pub fn cos_gamma(&self, j: usize) -> f64 {
        self.cos_gamma[j]
    }

    /// β of the ghost ring, one half-cell past the wall.
    pub fn ghost_beta(&self) -> f64 {
        PI / 2.0 + 0.5 * self.d_beta
    }

    #[inline]
    pub fn wrap(&self, j: isize) -> usize {
        j.rem_euclid(self.n_gamma as isize) as usize
    }

    /// Largest spacing in arc length, `max(Δβ, Δγ)`; used for `C·h²` tolerances.
    pub fn h(&self) -> f64 {
        self.d_beta.max(self.d_gamma)
    }

    /// Iterator over `(i, j)` in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_beta).flat_map(move |i| (0..self.n_gamma).map(move |j| (i, j)))
    }
}

/// A scalar field on the interior nodes plus the ghost ring past `β = π/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    n_beta: usize,
    n_gamma: usize,
    values: Vec<f64>,
    ghost: Option<Vec<f64>>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Self::from_values(grid, vec![0.0; grid.len()])
    }

    /// Wrap interior values; the ghost ring starts out stale.
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "field size does not match grid");
        Self {
            n_beta: grid.n_beta,
            n_gamma: grid.n_gamma,
            values,
            ghost: None,
        }
    }

    /// Sample `f(β, γ)` on the interior and on the ghost ring, so the ghost is
    /// consistent with `f` itself rather than with a boundary condition.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid.nodes().map(|(i, j)| f(grid.beta(i), grid.gamma(j))).collect();
        let gb = grid.ghost_beta();
        let ghost = (0..grid.n_gamma).map(|j| f(gb, grid.gamma(j))).collect();
        Self {
            n_beta: grid.n_beta,
            n_gamma: grid.n_gamma,
            values,
            ghost: Some(ghost),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access to the interior; invalidates the ghost ring.
    pub fn values_mut(&mut self) -> &mut [f64] {
        self.ghost = None;
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn ghost(&self) -> Option<&[f64]> {
        self.ghost.as_deref()
    }

    pub(crate) fn set_ghost(&mut self, ghost: Vec<f64>) {
        debug_assert_eq!(ghost.len(), self.n_gamma);
        self.ghost = Some(ghost);
    }

    pub fn has_ghost(&self) -> bool {
        self.ghost.is_some()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_gamma + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            n_beta: self.n_beta,
            n_gamma: self.n_gamma,
            values: self.values.iter().map(|&x| f(x)).collect(),
            ghost: None,
        }
    }

    /// Value at a possibly out-of-range stencil position: `i = −1` crosses the
    /// pole, `i = n_beta` reads the ghost ring, `j` wraps periodically.
    #[inline]
    fn at(&self, ghost: &[f64], i: isize, j: isize) -> f64 {
        let ng = self.n_gamma as isize;
        if i < 0 {
            let jj = (j + ng / 2).rem_euclid(ng) as usize;
            self.values[jj]
        } else if i as usize >= self.n_beta {
            ghost[j.rem_euclid(ng) as usize]
        } else {
            self.values[i as usize * self.n_gamma + j.rem_euclid(ng) as usize]
        }
    }

    /// Coordinate partial derivatives at node `(i, j)` by centred differences:
    /// `[f, f_β, f_γ, f_ββ, f_βγ, f_γγ]`.
    #[inline]
    pub(crate) fn partials(&self, grid: &Grid, ghost: &[f64], i: usize, j: usize) -> [f64; 6] {
        let (ii, jj) = (i as isize, j as isize);
        let f = self.values[i * self.n_gamma + j];
        let n = self.at(ghost, ii + 1, jj);
        let s = self.at(ghost, ii - 1, jj);
        let e = self.at(ghost, ii, jj + 1);
        let w = self.at(ghost, ii, jj - 1);
        let ne = self.at(ghost, ii + 1, jj + 1);
        let nw = self.at(ghost, ii + 1, jj - 1);
        let se = self.at(ghost, ii - 1, jj + 1);
        let sw = self.at(ghost, ii - 1, jj - 1);
        let db = grid.d_beta;
        let dg = grid.d_gamma;
        [
            f,
            (n - s) / (2.0 * db),
            (e - w) / (2.0 * dg),
            (n - 2.0 * f + s) / (db * db),
            (ne - nw - se + sw) / (4.0 * db * dg),
            (e - 2.0 * f + w) / (dg * dg),
        ]
    }

    /// Covariant gradient and Hessian at a node (ghost must be populated).
    pub fn covariant_at(&self, grid: &Grid, i: usize, j: usize) -> Result<(Gradient, Hessian)> {
        let ghost = self.ghost.as_deref().ok_or(CapflowError::GhostNotApplied)?;
        Ok(covariant_from_partials(grid, i, &self.partials(grid, ghost, i, j)))
    }

    /// Orthonormal-frame jet at a node (ghost must be populated).
    pub fn jet_at(&self, grid: &Grid, i: usize, j: usize) -> Result<FrameJet> {
        let ghost = self.ghost.as_deref().ok_or(CapflowError::GhostNotApplied)?;
        Ok(jet_from_partials(grid, i, &self.partials(grid, ghost, i, j)))
    }
}

/// Christoffel corrections for `σ = dβ² + sin²β dγ²`:
/// `Γ^β_γγ = −sin β cos β`, `Γ^γ_βγ = cot β`.
#[inline]
pub(crate) fn covariant_from_partials(grid: &Grid, i: usize, d: &[f64; 6]) -> (Gradient, Hessian) {
    let sb = grid.sin_beta(i);
    let cb = grid.cos_beta(i);
    (
        Gradient::new(d[1], d[2]),
        Hessian {
            bb: d[3],
            bg: d[4] - cb / sb * d[2],
            gg: d[5] + sb * cb * d[1],
        },
    )
}

#[inline]
pub(crate) fn jet_from_partials(grid: &Grid, i: usize, d: &[f64; 6]) -> FrameJet {
    let sb = grid.sin_beta(i);
    let cb = grid.cos_beta(i);
    let off = (d[4] - cb / sb * d[2]) / sb;
    FrameJet {
        grad: [d[1], d[2] / sb],
        hess: [[d[3], off], [off, (d[5] + sb * cb * d[1]) / (sb * sb)]],
    }
}

/// Per-node first and second covariant derivatives of a field.
#[derive(Clone, Debug)]
pub struct DiffBundle {
    pub u_beta: Vec<f64>,
    pub u_gamma: Vec<f64>,
    pub h_bb: Vec<f64>,
    pub h_bg: Vec<f64>,
    pub h_gg: Vec<f64>,
    /// `v = √(1 + |∇u|²)`.
    pub v: Vec<f64>,
    /// `a^{ij} u_ij` with `a^{ij} = σ^{ij} − u^i u^j / v²`.
    pub contraction: Vec<f64>,
}

pub fn gradient_hessian(f: &Field, grid: &Grid) -> Result<DiffBundle> {
    let ghost = f.ghost.as_deref().ok_or(CapflowError::GhostNotApplied)?;
    let n = grid.len();
    let mut out = DiffBundle {
        u_beta: Vec::with_capacity(n),
        u_gamma: Vec::with_capacity(n),
        h_bb: Vec::with_capacity(n),
        h_bg: Vec::with_capacity(n),
        h_gg: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
        contraction: Vec::with_capacity(n),
    };
    for (i, j) in grid.nodes() {
        let d = f.partials(grid, ghost, i, j);
        let (g, h) = covariant_from_partials(grid, i, &d);
        let jet = jet_from_partials(grid, i, &d);
        out.u_beta.push(g.beta);
        out.u_gamma.push(g.gamma);
        out.h_bb.push(h.bb);
        out.h_bg.push(h.bg);
        out.h_gg.push(h.gg);
        out.v.push(jet.v());
        out.contraction.push(jet.contraction());
    }
    Ok(out)
}

/// Closed-form normal derivative demanded by the capillary condition
/// `u_β = v cos θ` at the wall, given the tangential derivative there.
#[inline]
pub fn boundary_normal_derivative(tangential: f64, theta: f64) -> f64 {
    let (st, ct) = theta.sin_cos();
    ct / st.abs() * (1.0 + tangential * tangential).sqrt()
}

/// Populate the ghost ring so the capillary condition holds at the wall.
///
/// The face derivative is taken from the cubic through the ghost and the last
/// three rings, and the tangential derivative from face values quadratically
/// extrapolated from those rings; both are accurate enough that the second
/// differences on the last ring stay second order.
pub fn apply_capillary_bc(f: &Field, grid: &Grid, theta: f64) -> Result<Field> {
    let st = theta.sin();
    if !(theta > 0.0 && theta < PI) || st.abs() < 1e-12 {
        return Err(CapflowError::DegenerateAngle { sin_theta: st });
    }
    let mut out = f.clone();
    out.ghost = Some(capillary_ghost(f, grid, theta));
    Ok(out)
}

/// Values of a field extrapolated to the wall `β = π/2`, one per γ node.
pub(crate) fn wall_values(f: &Field, grid: &Grid) -> Vec<f64> {
    let n = grid.n_beta;
    (0..grid.n_gamma)
        .map(|j| (15.0 * f.get(n - 1, j) - 10.0 * f.get(n - 2, j) + 3.0 * f.get(n - 3, j)) / 8.0)
        .collect()
}

pub(crate) fn capillary_ghost(f: &Field, grid: &Grid, theta: f64) -> Vec<f64> {
    let ng = grid.n_gamma;
    let n = grid.n_beta;
    let face = wall_values(f, grid);
    (0..ng)
        .map(|j| {
            let t = (face[(j + 1) % ng] - face[(j + ng - 1) % ng]) / (2.0 * grid.d_gamma);
            let d = boundary_normal_derivative(t, theta);
            (21.0 * f.get(n - 1, j) + 3.0 * f.get(n - 2, j) - f.get(n - 3, j) + 24.0 * grid.d_beta * d) / 23.0
        })
        .collect()
}

/// Midpoint rule for `∫_{S²₊} f dσ`.
pub fn quadrature(f: &Field, grid: &Grid) -> f64 {
    quadrature_values(f.values(), grid)
}

pub(crate) fn quadrature_values(values: &[f64], grid: &Grid) -> f64 {
    let mut total = 0.0;
    for i in 0..grid.n_beta {
        let row: f64 = values[i * grid.n_gamma..(i + 1) * grid.n_gamma].iter().sum();
        total += row * grid.sin_beta(i);
    }
    total * grid.d_beta * grid.d_gamma
}
