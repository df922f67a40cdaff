//! Pointwise hyperbolic geometry of radial graphs in the upper half-space model.
//!
//! A surface is written `x = c E3 + ρ(z) z` with
//! `z = (cos β, sin β sin γ, sin β cos γ)` ranging over the closed half-sphere
//! `S²₊ = {z1 >= 0}`. The hyperbolic metric is `δ / x3²`, so every quantity
//! below is a conformal rescaling of its Euclidean counterpart by the height
//! `x3 = c + ρ sin β cos γ`.
//!
//! Derivatives of `u = log ρ` enter in two flavours. The public operations
//! take covariant components with respect to the round metric
//! `σ = dβ² + sin²β dγ²` ([`Gradient`], [`Hessian`]); internally everything is
//! converted to the orthonormal frame `{∂β, ∂γ / sin β}` ([`FrameJet`]), where
//! `σ^{ij} = δ^{ij}` and the formulas lose their coordinate singularity.
//!
//! Umbilical caps are Euclidean spheres of radius `R` centred at
//! `-R cos θ E1 + a2 E2 + c E3`; with this centre they meet the wall
//! `{x1 = 0}` at the contact angle θ and are static under the flow.

use std::f64::consts::PI;

use crate::error::{CapflowError, Result};

/// Spatial dimension of the evolving surface.
pub const DIM: usize = 2;

/// Ambient parameters: height of the star centre `c E3` and contact angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmbientParams {
    pub c: f64,
    /// Contact angle in radians, strictly inside (0, π).
    pub theta: f64,
    pub n: usize,
}

impl AmbientParams {
    pub fn new(c: f64, theta: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(CapflowError::InvalidParameter(format!("c must be positive, got {c}")));
        }
        if !(theta > 0.0 && theta < PI) {
            return Err(CapflowError::InvalidParameter(format!(
                "theta must lie in (0, pi), got {theta}"
            )));
        }
        Ok(Self { c, theta, n: DIM })
    }

    pub fn from_degrees(c: f64, theta_degrees: f64) -> Result<Self> {
        Self::new(c, theta_degrees.to_radians())
    }

    /// `n c`, the constant that keeps recurring in the flow speed.
    #[inline]
    pub fn nc(&self) -> f64 {
        self.n as f64 * self.c
    }
}

/// A direction on the half-sphere. `β = 0` is the `E1` pole, `β = π/2` the wall.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarPoint {
    pub beta: f64,
    pub gamma: f64,
}

impl PolarPoint {
    pub fn new(beta: f64, gamma: f64) -> Self {
        Self { beta, gamma }
    }

    /// Unit vector `z(β, γ)`.
    pub fn direction(&self) -> [f64; 3] {
        let (sb, cb) = self.beta.sin_cos();
        let (sg, cg) = self.gamma.sin_cos();
        [cb, sb * sg, sb * cg]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CartesianPoint {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl CartesianPoint {
    pub fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Self { x1, x2, x3 }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x1, self.x2, self.x3]
    }

    /// Euclidean `|x - c E3|²`.
    pub fn dist_sq_to_star_center(&self, c: f64) -> f64 {
        let dz = self.x3 - c;
        self.x1 * self.x1 + self.x2 * self.x2 + dz * dz
    }
}

pub fn polar_to_cartesian(p: PolarPoint, rho: f64, amb: &AmbientParams) -> Result<CartesianPoint> {
    let z = p.direction();
    let x3 = rho * z[2] + amb.c;
    if x3 <= 0.0 {
        return Err(CapflowError::NonpositiveHeight { x3 });
    }
    Ok(CartesianPoint::new(rho * z[0], rho * z[1], x3))
}

/// Inverse of [`polar_to_cartesian`]: returns `(p, ρ)` with `γ ∈ [0, 2π)`.
pub fn cartesian_to_polar(x: CartesianPoint, amb: &AmbientParams) -> (PolarPoint, f64) {
    let rho = x.dist_sq_to_star_center(amb.c).sqrt();
    let beta = (x.x1 / rho).clamp(-1.0, 1.0).acos();
    let mut gamma = x.x2.atan2(x.x3 - amb.c);
    if gamma < 0.0 {
        gamma += 2.0 * PI;
    }
    (PolarPoint::new(beta, gamma), rho)
}

/// Minimal Euclidean height of the cap `C_{c,R,θ}`; positive iff the cap is compact.
pub fn k0(c: f64, r: f64, theta: f64) -> f64 {
    if theta <= PI / 2.0 {
        c - r * theta.sin()
    } else {
        c - r
    }
}

/// The contact-angle hypothesis of the convergence theorem:
/// `|cos θ| < (4nK₀ − c(n−1)) / (4nK₀ + c(n−1))`.
///
/// Only meaningful when `K₀ > c(n−1)/(4n)`; below that the right-hand side is
/// not a valid bound and `PreconditionViolated` is returned.
pub fn angle_condition_holds(c: f64, r: f64, theta: f64, n: usize) -> Result<bool> {
    let k = k0(c, r, theta);
    let nf = n as f64;
    let threshold = c * (nf - 1.0) / (4.0 * nf);
    if k <= threshold {
        return Err(CapflowError::PreconditionViolated(format!(
            "K0(c={c}, R={r}, theta={theta}) = {k} must exceed c(n-1)/(4n) = {threshold}"
        )));
    }
    let bound = (4.0 * nf * k - c * (nf - 1.0)) / (4.0 * nf * k + c * (nf - 1.0));
    Ok(theta.cos().abs() < bound)
}

/// An umbilical θ-cap: the part with `x1 >= 0` of the Euclidean sphere of
/// radius `radius` centred at `-R cos θ E1 + a2 E2 + c E3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CapSpec {
    pub c: f64,
    pub radius: f64,
    pub theta: f64,
    pub a2: f64,
}

impl CapSpec {
    pub fn new(c: f64, radius: f64, theta: f64, a2: f64) -> Result<Self> {
        AmbientParams::new(c, theta)?;
        if !(radius.is_finite() && radius > 0.0) {
            return Err(CapflowError::InvalidParameter(format!(
                "cap radius must be positive, got {radius}"
            )));
        }
        // cE3 must sit inside the wetted disc for the cap to be a radial graph.
        if a2.abs() >= radius * theta.sin() {
            return Err(CapflowError::InvalidParameter(format!(
                "cap offset |a2| = {} must be below R sin(theta) = {}",
                a2.abs(),
                radius * theta.sin()
            )));
        }
        Ok(Self { c, radius, theta, a2 })
    }

    pub fn centered(c: f64, radius: f64, theta: f64) -> Result<Self> {
        Self::new(c, radius, theta, 0.0)
    }

    pub fn center(&self) -> [f64; 3] {
        [-self.radius * self.theta.cos(), self.a2, self.c]
    }

    pub fn k0(&self) -> f64 {
        k0(self.c, self.radius, self.theta)
    }

    pub fn is_compact(&self) -> bool {
        self.k0() > 0.0
    }

    /// Hyperbolic principal curvature `c / R` shared by every point of the cap.
    pub fn principal_curvature(&self) -> f64 {
        self.c / self.radius
    }

    /// Same cap with a different radius (and no offset), as used for barriers.
    pub fn with_radius(&self, radius: f64) -> Self {
        Self {
            radius,
            a2: 0.0,
            ..*self
        }
    }
}

/// Radial function about `c E3` of the centred cap (the offset `a2` is ignored):
/// the positive root of `ρ² + 2ρR cos θ cos β − R² sin²θ = 0`.
pub fn cap_radial(beta: f64, spec: &CapSpec) -> f64 {
    let (st, ct) = spec.theta.sin_cos();
    let a = ct * beta.cos();
    spec.radius * (-a + (a * a + st * st).sqrt())
}

/// Radial function of a cap with arbitrary offset `a2`.
pub fn cap_radial_at(p: PolarPoint, spec: &CapSpec) -> f64 {
    let z = p.direction();
    let center = spec.center();
    // |ρ z - (center - c E3)|² = R²
    let proj = z[0] * center[0] + z[1] * center[1];
    let offset_sq = center[0] * center[0] + center[1] * center[1];
    proj + (proj * proj + spec.radius * spec.radius - offset_sq).sqrt()
}

/// `ρ` and the covariant derivatives of `u = log ρ` for the centred cap.
pub fn cap_log_jet(beta: f64, spec: &CapSpec) -> (f64, Gradient, Hessian) {
    let (st, ct) = spec.theta.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let r = spec.radius;
    let s = (ct * ct * cb * cb + st * st).sqrt();
    let rho = r * (-ct * cb + s);
    let d_rho = r * (ct * sb - ct * ct * cb * sb / s);
    let d2_rho = r * (ct * cb - ct * ct * ((2.0 * beta).cos() / s + ct * ct * cb * cb * sb * sb / (s * s * s)));
    let u_b = d_rho / rho;
    let u_bb = d2_rho / rho - u_b * u_b;
    (
        rho,
        Gradient::new(u_b, 0.0),
        Hessian {
            bb: u_bb,
            bg: 0.0,
            gg: sb * cb * u_b,
        },
    )
}

/// Radius of the centred θ-cap through `x`: the positive root of
/// `R² sin²θ − 2R cos θ x1 − |x − cE3|² = 0`.
pub fn point_cap_radius(x: CartesianPoint, amb: &AmbientParams) -> Result<f64> {
    let (st, ct) = amb.theta.sin_cos();
    if st.abs() < 1e-12 {
        return Err(CapflowError::DegenerateAngle { sin_theta: st });
    }
    let d2 = x.dist_sq_to_star_center(amb.c);
    let b = ct * x.x1;
    Ok((b + (b * b + st * st * d2).sqrt()) / (st * st))
}

/// Covariant gradient `(u_β, u_γ) = (∂u/∂β, ∂u/∂γ)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Gradient {
    pub beta: f64,
    pub gamma: f64,
}

impl Gradient {
    pub fn new(beta: f64, gamma: f64) -> Self {
        Self { beta, gamma }
    }
}

/// Covariant Hessian components `∇²u(∂_i, ∂_j)` for the round metric.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Hessian {
    pub bb: f64,
    pub bg: f64,
    pub gg: f64,
}

/// First and second derivatives of `u` in the orthonormal frame `{∂β, ∂γ/sin β}`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FrameJet {
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

impl FrameJet {
    pub fn from_covariant(beta: f64, grad: Gradient, hess: Hessian) -> Self {
        let sb = beta.sin();
        let off = hess.bg / sb;
        Self {
            grad: [grad.beta, grad.gamma / sb],
            hess: [[hess.bb, off], [off, hess.gg / (sb * sb)]],
        }
    }

    #[inline]
    pub fn grad_norm_sq(&self) -> f64 {
        self.grad[0] * self.grad[0] + self.grad[1] * self.grad[1]
    }

    #[inline]
    pub fn v(&self) -> f64 {
        (1.0 + self.grad_norm_sq()).sqrt()
    }

    /// `a^{ij} u_ij` with `a^{ij} = δ^{ij} − u^i u^j / v²`.
    #[inline]
    pub fn contraction(&self) -> f64 {
        contract(&self.hess, &self.grad)
    }
}

/// `(δ^{ij} − ψ^i ψ^j / (1 + |ψ|²)) λ_ij` for a full (not necessarily symmetric) `λ`.
#[inline]
pub(crate) fn contract(lambda: &[[f64; 2]; 2], psi: &[f64; 2]) -> f64 {
    let v2 = 1.0 + psi[0] * psi[0] + psi[1] * psi[1];
    let quad = psi[0] * (lambda[0][0] * psi[0] + lambda[0][1] * psi[1])
        + psi[1] * (lambda[1][0] * psi[0] + lambda[1][1] * psi[1]);
    lambda[0][0] + lambda[1][1] - quad / v2
}

/// Support quantities of the radial graph at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportBundle {
    /// Hyperbolic `⟨E1, ν⟩`.
    pub e1_nu: f64,
    /// Euclidean `⟨E3, ν̃⟩_δ` of the Euclidean unit normal `ν̃ = x3 ν`.
    pub e3_nutilde: f64,
    /// Hyperbolic `⟨x − cE3, ν⟩ = ρ e^w / v`.
    pub radial_support: f64,
    /// `x3 = e^{−w}`.
    pub conformal_height: f64,
}

/// Everything the diagnostics need at a single surface point.
#[derive(Clone, Copy, Debug)]
pub struct PointGeometry {
    pub position: CartesianPoint,
    pub v: f64,
    /// Euclidean outward unit normal.
    pub nu_tilde: [f64; 3],
    pub support: SupportBundle,
    pub mean_curvature: f64,
    /// Hyperbolic principal curvatures, `kappa[0] >= kappa[1]`.
    pub kappa: [f64; 2],
    /// `(κ1 − κ2)²`, computed without the square root.
    pub umbilic_gap_sq: f64,
    pub qc: f64,
}

impl PointGeometry {
    /// `H₂ = κ1 κ2` (n = 2).
    pub fn gauss_product(&self) -> f64 {
        self.kappa[0] * self.kappa[1]
    }
}

/// Euclidean unit normal of the radial graph, `ν̃ = (z − ∇u) / v`.
fn euclidean_normal(p: PolarPoint, jet: &FrameJet, v: f64) -> [f64; 3] {
    let (sb, cb) = p.beta.sin_cos();
    let (sg, cg) = p.gamma.sin_cos();
    let [g1, g2] = jet.grad;
    // e_β = (−sin β, cos β sin γ, cos β cos γ), e_γ = (0, cos γ, −sin γ)
    [
        (cb + g1 * sb) / v,
        (sb * sg - g1 * cb * sg - g2 * cg) / v,
        (sb * cg - g1 * cb * cg + g2 * sg) / v,
    ]
}

/// Evaluate the full pointwise geometry from an orthonormal-frame jet.
pub fn evaluate(p: PolarPoint, rho: f64, jet: &FrameJet, amb: &AmbientParams) -> Result<PointGeometry> {
    let position = polar_to_cartesian(p, rho, amb)?;
    let x3 = position.x3;
    let v = jet.v();
    let nu_tilde = euclidean_normal(p, jet, v);

    // Euclidean shape operator S = (I − Aλ)/(ρv), A = I − ψψᵀ/v².
    let [g1, g2] = jet.grad;
    let v2 = v * v;
    let a = [[1.0 - g1 * g1 / v2, -g1 * g2 / v2], [-g1 * g2 / v2, 1.0 - g2 * g2 / v2]];
    let l = &jet.hess;
    let m = [
        [
            a[0][0] * l[0][0] + a[0][1] * l[1][0],
            a[0][0] * l[0][1] + a[0][1] * l[1][1],
        ],
        [
            a[1][0] * l[0][0] + a[1][1] * l[1][0],
            a[1][0] * l[0][1] + a[1][1] * l[1][1],
        ],
    ];
    let scale = 1.0 / (rho * v);
    let tr_s = scale * (2.0 - m[0][0] - m[1][1]);
    let det_s = scale * scale * ((1.0 - m[0][0]) * (1.0 - m[1][1]) - m[0][1] * m[1][0]);
    let disc = (tr_s * tr_s - 4.0 * det_s).max(0.0);

    let n3 = nu_tilde[2];
    let mean_curvature = x3 * tr_s - DIM as f64 * n3;
    let root = disc.sqrt();
    let kappa = [x3 * 0.5 * (tr_s + root) - n3, x3 * 0.5 * (tr_s - root) - n3];
    let umbilic_gap_sq = x3 * x3 * disc;

    let support = SupportBundle {
        e1_nu: nu_tilde[0] / x3,
        e3_nutilde: n3,
        radial_support: rho / (v * x3),
        conformal_height: x3,
    };
    let qc = qc_from_parts(&support, mean_curvature, amb);

    Ok(PointGeometry {
        position,
        v,
        nu_tilde,
        support,
        mean_curvature,
        kappa,
        umbilic_gap_sq,
        qc,
    })
}

#[inline]
fn qc_from_parts(s: &SupportBundle, h: f64, amb: &AmbientParams) -> f64 {
    let nc = amb.nc();
    nc / s.conformal_height - nc * amb.theta.cos() * s.e1_nu - h * s.radial_support
}

pub fn support_bundle(p: PolarPoint, rho: f64, grad: Gradient, amb: &AmbientParams) -> Result<SupportBundle> {
    let x = polar_to_cartesian(p, rho, amb)?;
    let jet = FrameJet::from_covariant(p.beta, grad, Hessian::default());
    let v = jet.v();
    let nu = euclidean_normal(p, &jet, v);
    Ok(SupportBundle {
        e1_nu: nu[0] / x.x3,
        e3_nutilde: nu[2],
        radial_support: rho / (v * x.x3),
        conformal_height: x.x3,
    })
}

/// Hyperbolic mean curvature (sum of principal curvatures) via the conformal formula
/// `H = −x3 a^{ij}u_ij/(ρv) + nc/(ρv) + (n/v)(cos β cos γ u_β − (sin γ / sin β) u_γ)`.
pub fn mean_curvature(p: PolarPoint, rho: f64, grad: Gradient, hess: Hessian, amb: &AmbientParams) -> Result<f64> {
    let x3 = polar_to_cartesian(p, rho, amb)?.x3;
    let jet = FrameJet::from_covariant(p.beta, grad, hess);
    Ok(mean_curvature_frame(p, rho, x3, &jet, amb))
}

#[inline]
pub(crate) fn mean_curvature_frame(p: PolarPoint, rho: f64, x3: f64, jet: &FrameJet, amb: &AmbientParams) -> f64 {
    let (_, cb) = p.beta.sin_cos();
    let (sg, cg) = p.gamma.sin_cos();
    let v = jet.v();
    let n = amb.n as f64;
    -x3 * jet.contraction() / (rho * v) + amb.nc() / (rho * v) + n / v * (cb * cg * jet.grad[0] - sg * jet.grad[1])
}

/// Hyperbolic principal curvatures `(κ1, κ2)`, `κ1 >= κ2`, from the conformal
/// shift `κ_i = x3 κ_i^δ − ⟨ν̃, E3⟩_δ` of the Euclidean shape operator.
pub fn principal_curvatures(
    p: PolarPoint,
    rho: f64,
    grad: Gradient,
    hess: Hessian,
    amb: &AmbientParams,
) -> Result<(f64, f64)> {
    let jet = FrameJet::from_covariant(p.beta, grad, hess);
    let g = evaluate(p, rho, &jet, amb)?;
    Ok((g.kappa[0], g.kappa[1]))
}

/// Normal speed `q_c = nc/x3 − nc cos θ ⟨E1, ν⟩ − H ⟨x − cE3, ν⟩`.
pub fn normal_velocity_qc(p: PolarPoint, rho: f64, grad: Gradient, hess: Hessian, amb: &AmbientParams) -> Result<f64> {
    let support = support_bundle(p, rho, grad, amb)?;
    let h = mean_curvature(p, rho, grad, hess, amb)?;
    Ok(qc_from_parts(&support, h, amb))
}
