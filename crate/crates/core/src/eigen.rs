//! Dirichlet Sturm–Liouville eigenpairs `e'' + ρ(x) λ² e = 0` on `[0, 1]` for
//! a merely bounded density ρ.
//!
//! Discretization: conforming piecewise-linear finite elements on a uniform
//! mesh. The stiffness matrix comes from `∫ e' φ'`, the mass matrix from
//! `∫ ρ e φ` with exact-per-cell quadrature, giving a symmetric positive
//! definite generalized tridiagonal pencil. The lowest modes are extracted by
//! Sylvester-inertia bisection (an LDLᵀ pivot count per shift) followed by
//! inverse iteration with a pivoted tridiagonal factorization — no convergence
//! heuristics, deterministic to the last bit.
//!
//! Eigenfunctions are normalized in the ρ-weighted inner product and sign-fixed
//! by `eₖ'(0) > 0`, so free evolution coefficients obey `zₖ' = -λₖ² zₖ`
//! exactly and expansions are reproducible.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::profile::{NodalFunction, PiecewiseProfile};
use crate::quad;
use crate::Result;

/// Uniform partition of `[0, 1]` into `n` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mesh {
    n: usize,
}

impl Mesh {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(CoreError::invalid("mesh needs at least 2 cells"));
        }
        Ok(Mesh { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    /// Index of the cell containing `x`, right-continuous at nodes.
    pub fn cell_of(&self, x: f64) -> usize {
        ((x * self.n as f64).floor() as usize).min(self.n - 1)
    }
}

/// Density representation accepted by the eigensolver: an exact
/// piecewise-constant profile or a tabulated function with linear
/// interpolation on its own uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DensityRep {
    Piecewise(PiecewiseProfile),
    Tabulated(NodalFunction),
}

impl DensityRep {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            DensityRep::Piecewise(p) => p.eval(x.clamp(0.0, 1.0)).unwrap(),
            DensityRep::Tabulated(t) => t.eval(x),
        }
    }

    pub fn min_value(&self) -> f64 {
        match self {
            DensityRep::Piecewise(p) => p.min_value(),
            DensityRep::Tabulated(t) => t.values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn max_value(&self) -> f64 {
        match self {
            DensityRep::Piecewise(p) => p.max_value(),
            DensityRep::Tabulated(t) => t.values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Points where the representation is not smooth, for quadrature splitting.
    fn kinks_in(&self, l: f64, r: f64) -> Vec<f64> {
        match self {
            DensityRep::Piecewise(p) => {
                p.breakpoints().iter().copied().filter(|&b| b > l && b < r).collect()
            }
            DensityRep::Tabulated(t) => {
                let n = t.mesh_n as f64;
                let lo = (l * n).floor() as i64 + 1;
                let hi = (r * n).ceil() as i64 - 1;
                (lo..=hi).map(|i| i as f64 / n).filter(|&b| b > l && b < r).collect()
            }
        }
    }
}

/// Symmetric tridiagonal matrix (diagonal plus one off-diagonal band).
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn matvec(&self, v: &[f64], out: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut s = self.diag[i] * v[i];
            if i > 0 {
                s += self.off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * v[i + 1];
            }
            out[i] = s;
        }
    }

    pub fn quadratic_form(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.diag.len();
        let mut s = 0.0;
        for i in 0..n {
            s += self.diag[i] * u[i] * v[i];
            if i + 1 < n {
                s += self.off[i] * (u[i] * v[i + 1] + u[i + 1] * v[i]);
            }
        }
        s
    }
}

/// Number of pencil eigenvalues `K x = σ M x` strictly below `sigma`, by
/// Sylvester's law of inertia on `K - σ M`.
fn inertia_below(k: &SymTridiag, m: &SymTridiag, sigma: f64) -> usize {
    let n = k.diag.len();
    let pivmin = f64::MIN_POSITIVE / f64::EPSILON;
    let mut count = 0;
    let mut d_prev = 1.0;
    for i in 0..n {
        let mut d = k.diag[i] - sigma * m.diag[i];
        if i > 0 {
            let e = k.off[i - 1] - sigma * m.off[i - 1];
            d -= e * e / d_prev;
        }
        if d.abs() < pivmin {
            d = -pivmin;
        }
        if d < 0.0 {
            count += 1;
        }
        d_prev = d;
    }
    count
}

/// Pivoted LU factorization of a general tridiagonal matrix, LAPACK
/// `dgttrf`-style (fill-in limited to a second superdiagonal).
struct TriPlu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swap: Vec<bool>,
}

impl TriPlu {
    fn factor(sub: &[f64], diag: &[f64], sup: &[f64]) -> TriPlu {
        let n = diag.len();
        let mut dl = sub.to_vec();
        let mut d = diag.to_vec();
        let mut du = sup.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swap = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                } else {
                    dl[i] = 0.0;
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swap[i] = true;
            }
        }
        TriPlu { dl, d, du, du2, swap }
    }

    fn solve(&self, rhs: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swap[i] {
                rhs.swap(i, i + 1);
            }
            let f = self.dl[i];
            rhs[i + 1] -= f * rhs[i];
        }
        // back substitution with three bands
        let tiny = f64::MIN_POSITIVE * 1e4;
        let safe_div = |num: f64, den: f64| {
            if den.abs() < tiny {
                num / tiny.copysign(den)
            } else {
                num / den
            }
        };
        rhs[n - 1] = safe_div(rhs[n - 1], self.d[n - 1]);
        if n >= 2 {
            rhs[n - 2] = safe_div(rhs[n - 2] - self.du[n - 2] * rhs[n - 1], self.d[n - 2]);
        }
        for i in (0..n.saturating_sub(2)).rev() {
            rhs[i] = safe_div(
                rhs[i] - self.du[i] * rhs[i + 1] - self.du2[i] * rhs[i + 2],
                self.d[i],
            );
        }
    }
}

/// First `m` Dirichlet eigenpairs of `e'' + ρ λ² e = 0`, ρ-orthonormal.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    mesh: Mesh,
    /// λₖ in strictly ascending order (the equation eigenvalues are λₖ²).
    lambdas: Vec<f64>,
    /// Nodal values of eₖ including the zero boundary nodes (length n + 1).
    vectors: Vec<Vec<f64>>,
    rho: DensityRep,
    /// ρ-weighted mass matrix on interior nodes (rebuilt on deserialization).
    mass: SymTridiag,
}

/// Deviation of `∫ ρ eⱼ eₖ` from the identity, measured independently of the
/// assembled mass matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrthoReport {
    pub max_offdiag: f64,
    pub max_diag_dev: f64,
}

impl OrthoReport {
    pub fn max_deviation(&self) -> f64 {
        self.max_offdiag.max(self.max_diag_dev)
    }
}

fn assemble_stiffness(mesh: Mesh) -> SymTridiag {
    let n = mesh.n();
    let h = mesh.h();
    SymTridiag { diag: vec![2.0 / h; n - 1], off: vec![-1.0 / h; n - 2] }
}

fn assemble_mass(mesh: Mesh, rho: &DensityRep) -> SymTridiag {
    let n = mesh.n();
    let h = mesh.h();
    let mut diag = vec![0.0; n - 1];
    let mut off = vec![0.0; n - 2];
    for cell in 0..n {
        let x0 = mesh.node(cell);
        let x1 = mesh.node(cell + 1);
        let cuts = rho.kinks_in(x0, x1);
        let phi_l = |x: f64| (x1 - x) / h;
        let phi_r = |x: f64| (x - x0) / h;
        let ill = quad::integrate(|x| rho.eval(x) * phi_l(x) * phi_l(x), x0, x1, &cuts);
        let irr = quad::integrate(|x| rho.eval(x) * phi_r(x) * phi_r(x), x0, x1, &cuts);
        let ilr = quad::integrate(|x| rho.eval(x) * phi_l(x) * phi_r(x), x0, x1, &cuts);
        // interior dof index of node j is j - 1
        if cell >= 1 {
            diag[cell - 1] += ill;
        }
        if cell + 1 <= n - 1 {
            diag[cell] += irr;
        }
        if cell >= 1 && cell + 1 <= n - 1 {
            off[cell - 1] += ilr;
        }
    }
    SymTridiag { diag, off }
}

/// Compute the first `m` eigenpairs on `mesh`.
///
/// Requires `m <= n/10` so that the top requested mode stays well inside the
/// resolved part of the discrete spectrum.
pub fn solve_basis(rho: DensityRep, m: usize, mesh: Mesh) -> Result<EigenBasis> {
    let n = mesh.n();
    if m == 0 {
        return Err(CoreError::invalid("mode count must be positive"));
    }
    if m > n / 10 {
        return Err(CoreError::precondition(format!(
            "m = {m} exceeds n/10 = {}; use a mesh with at least {} cells",
            n / 10,
            10 * m
        )));
    }
    let rho_min = rho.min_value();
    let rho_max = rho.max_value();
    if !(rho_min > 0.0) || !rho_max.is_finite() {
        return Err(CoreError::precondition(format!(
            "density must be positive and bounded, got range [{rho_min}, {rho_max}]"
        )));
    }

    let stiff = assemble_stiffness(mesh);
    let mass = assemble_mass(mesh, &rho);

    let mut lambdas = Vec::with_capacity(m);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut mass_times: Vec<Vec<f64>> = Vec::with_capacity(m);

    for k in 1..=m {
        let kpi = k as f64 * std::f64::consts::PI;
        // min-max brackets from the density bounds, with discrete slack
        let mut lo = kpi * kpi / rho_max * 0.999;
        let mut hi = kpi * kpi / rho_min * 1.05;
        while inertia_below(&stiff, &mass, lo) > k - 1 {
            lo *= 0.5;
        }
        while inertia_below(&stiff, &mass, hi) < k {
            hi *= 1.5;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if inertia_below(&stiff, &mass, mid) >= k {
                hi = mid;
            } else {
                lo = mid;
            }
            if (hi - lo) <= 1e-14 * hi {
                break;
            }
        }
        let sigma = 0.5 * (lo + hi);

        let vec = inverse_iterate(&stiff, &mass, sigma, k, mesh, &vectors, &mass_times)?;
        let mut mv = vec![0.0; n - 1];
        mass.matvec(&vec, &mut mv);

        lambdas.push(sigma.sqrt());
        vectors.push(vec);
        mass_times.push(mv);
    }

    // strict ascent
    for k in 1..m {
        if lambdas[k] - lambdas[k - 1] <= 1e-9 * lambdas[k] {
            return Err(CoreError::numerical(format!(
                "eigenvalues {} and {} not strictly separated: {} vs {}",
                k,
                k + 1,
                lambdas[k - 1],
                lambdas[k]
            )));
        }
    }
    // min-max bounds against the density range (1.05 slack covers the O(h²)
    // excess of the discrete upper end)
    let k_tilde = rho_max.max(1.0 / rho_min);
    for (i, &l) in lambdas.iter().enumerate() {
        let kpi = (i + 1) as f64 * std::f64::consts::PI;
        if l < kpi / k_tilde.sqrt() * 0.999 || l > kpi * k_tilde.sqrt() * 1.05 {
            return Err(CoreError::numerical(format!(
                "λ_{} = {l} violates min-max bounds [{}, {}]",
                i + 1,
                kpi / k_tilde.sqrt(),
                kpi * k_tilde.sqrt()
            )));
        }
    }

    // attach boundary zeros
    let full_vectors: Vec<Vec<f64>> = vectors
        .into_iter()
        .map(|v| {
            let mut full = Vec::with_capacity(n + 1);
            full.push(0.0);
            full.extend(v);
            full.push(0.0);
            full
        })
        .collect();

    Ok(EigenBasis { mesh, lambdas, vectors: full_vectors, rho, mass })
}

fn inverse_iterate(
    stiff: &SymTridiag,
    mass: &SymTridiag,
    sigma: f64,
    k: usize,
    mesh: Mesh,
    prev: &[Vec<f64>],
    prev_mass: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let n = mesh.n();
    let dim = n - 1;
    let sub: Vec<f64> = (0..dim - 1).map(|i| stiff.off[i] - sigma * mass.off[i]).collect();
    let diag: Vec<f64> = (0..dim).map(|i| stiff.diag[i] - sigma * mass.diag[i]).collect();
    let plu = TriPlu::factor(&sub, &diag, &sub);

    let mut v: Vec<f64> =
        (1..n).map(|i| (k as f64 * std::f64::consts::PI * mesh.node(i)).sin()).collect();
    let mut work = vec![0.0; dim];
    for _ in 0..3 {
        mass.matvec(&v, &mut work);
        plu.solve(&mut work);
        let norm = mass.quadratic_form(&work, &work).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(CoreError::numerical(format!(
                "inverse iteration broke down for mode {k}"
            )));
        }
        for (vi, wi) in v.iter_mut().zip(&work) {
            *vi = wi / norm;
        }
    }
    // one modified Gram-Schmidt pass in the M-inner product
    for (p, pm) in prev.iter().zip(prev_mass) {
        let proj: f64 = v.iter().zip(pm).map(|(a, b)| a * b).sum();
        for (vi, pi) in v.iter_mut().zip(p) {
            *vi -= proj * pi;
        }
    }
    let norm = mass.quadratic_form(&v, &v).sqrt();
    for vi in v.iter_mut() {
        *vi /= norm;
    }
    // sign convention e'(0) > 0
    if v[0] < 0.0 {
        for vi in v.iter_mut() {
            *vi = -*vi;
        }
    }
    Ok(v)
}

impl EigenBasis {
    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    pub fn mode_count(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn lambda(&self, k: usize) -> f64 {
        self.lambdas[k]
    }

    /// Nodal values of mode `k` (0-based), including boundary zeros.
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k]
    }

    pub fn rho(&self) -> &DensityRep {
        &self.rho
    }

    pub fn mass(&self) -> &SymTridiag {
        &self.mass
    }

    /// Number of modes with `λₖ <= mu`.
    pub fn modes_below(&self, mu: f64) -> usize {
        self.lambdas.partition_point(|&l| l <= mu)
    }

    /// P1 evaluation of mode `k` at `x ∈ [0, 1]`.
    pub fn eval(&self, k: usize, x: f64) -> f64 {
        let n = self.mesh.n();
        let t = x.clamp(0.0, 1.0) * n as f64;
        let i = (t.floor() as usize).min(n - 1);
        let frac = t - i as f64;
        self.vectors[k][i] * (1.0 - frac) + self.vectors[k][i + 1] * frac
    }

    /// Cell-wise derivative of mode `k` at `x ∈ [0, 1]` (right-continuous at
    /// nodes).
    pub fn eval_deriv(&self, k: usize, x: f64) -> f64 {
        let n = self.mesh.n();
        let i = self.mesh.cell_of(x.clamp(0.0, 1.0));
        (self.vectors[k][i + 1] - self.vectors[k][i]) * n as f64
    }

    /// Reduce `x ∈ ℝ` to the fundamental domain `[-1, 1)` of the period-2
    /// extension; returns `(|t|, sign of t)`.
    fn fold(x: f64) -> (f64, f64) {
        let t = x - 2.0 * ((x + 1.0) * 0.5).floor();
        if t >= 0.0 {
            (t, 1.0)
        } else {
            (-t, -1.0)
        }
    }

    /// Odd-periodic extension of mode `k` to all of ℝ (odd reflection at 0,
    /// period 2).
    pub fn eval_extended(&self, k: usize, x: f64) -> f64 {
        let (t, sign) = Self::fold(x);
        sign * self.eval(k, t)
    }

    /// Derivative of the extended mode (even, period 2).
    pub fn eval_deriv_extended(&self, k: usize, x: f64) -> f64 {
        let (t, _) = Self::fold(x);
        self.eval_deriv(k, t)
    }

    /// Even-periodic extension of the density.
    pub fn rho_extended(&self, x: f64) -> f64 {
        let (t, _) = Self::fold(x);
        self.rho.eval(t)
    }

    /// ρ-weighted inner product of two nodal functions on this mesh
    /// (exact quadrature, independent of the assembled mass matrix).
    pub fn rho_inner_nodal(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.mesh.n();
        let h = self.mesh.h();
        let mut acc = 0.0;
        for cell in 0..n {
            let x0 = self.mesh.node(cell);
            let x1 = self.mesh.node(cell + 1);
            let cuts = self.rho.kinks_in(x0, x1);
            let ul = u[cell];
            let ur = u[cell + 1];
            let vl = v[cell];
            let vr = v[cell + 1];
            acc += quad::integrate(
                |x| {
                    let tr = (x - x0) / h;
                    let uu = ul * (1.0 - tr) + ur * tr;
                    let vv = vl * (1.0 - tr) + vr * tr;
                    self.rho.eval(x) * uu * vv
                },
                x0,
                x1,
                &cuts,
            );
        }
        acc
    }

    /// Expansion coefficients `zₖ = ∫ ρ z eₖ` of a nodal state on this mesh.
    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.mesh.n() + 1);
        let interior = &z[1..self.mesh.n()];
        let mut mz = vec![0.0; self.mesh.n() - 1];
        self.mass.matvec(interior, &mut mz);
        self.vectors
            .iter()
            .map(|v| v[1..self.mesh.n()].iter().zip(&mz).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Nodal synthesis `Σ zₖ eₖ` on this mesh.
    pub fn synthesize_nodal(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.mesh.n();
        let mut out = vec![0.0; n + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(&self.vectors[k]) {
                *o += c * v;
            }
        }
        out
    }
}

/// Max deviation of the ρ-weighted Gram of the basis from the identity,
/// computed by direct quadrature (not via the assembled mass matrix).
pub fn check_orthonormality(basis: &EigenBasis) -> OrthoReport {
    let m = basis.mode_count();
    let mut max_offdiag: f64 = 0.0;
    let mut max_diag_dev: f64 = 0.0;
    for j in 0..m {
        for k in j..m {
            let val = basis.rho_inner_nodal(basis.vector(j), basis.vector(k));
            if j == k {
                max_diag_dev = max_diag_dev.max((val - 1.0).abs());
            } else {
                max_offdiag = max_offdiag.max(val.abs());
            }
        }
    }
    OrthoReport { max_offdiag, max_diag_dev }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_density_matches_sines() {
        let mesh = Mesh::new(2000).unwrap();
        let basis =
            solve_basis(DensityRep::Piecewise(PiecewiseProfile::constant(1.0)), 5, mesh).unwrap();
        for k in 1..=5 {
            let rel = (basis.lambda(k - 1) - k as f64 * PI).abs() / (k as f64 * PI);
            assert!(rel < 1e-4, "mode {k}: rel error {rel}");
            // sup-norm against sqrt(2) sin(k pi x)
            let mut sup: f64 = 0.0;
            for i in 0..=200 {
                let x = i as f64 / 200.0;
                let exact = (2.0f64).sqrt() * (k as f64 * PI * x).sin();
                sup = sup.max((basis.eval(k - 1, x) - exact).abs());
            }
            assert!(sup < 1e-3, "mode {k}: sup error {sup}");
        }
    }

    #[test]
    fn refuses_small_mesh() {
        let mesh = Mesh::new(40).unwrap();
        let err = solve_basis(DensityRep::Piecewise(PiecewiseProfile::constant(1.0)), 8, mesh)
            .unwrap_err();
        assert!(err.to_string().contains("80 cells"), "{err}");
    }

    #[test]
    fn orthonormality_constant() {
        let mesh = Mesh::new(1000).unwrap();
        let basis =
            solve_basis(DensityRep::Piecewise(PiecewiseProfile::constant(1.0)), 6, mesh).unwrap();
        let rep = check_orthonormality(&basis);
        assert!(rep.max_deviation() <= 1e-8, "deviation {:?}", rep);
    }

    #[test]
    fn single_mode_normalization() {
        let mesh = Mesh::new(500).unwrap();
        let rho = DensityRep::Piecewise(PiecewiseProfile::two_piece(0.4, 0.5, 3.0).unwrap());
        let basis = solve_basis(rho, 1, mesh).unwrap();
        let rep = check_orthonormality(&basis);
        assert!(rep.max_diag_dev <= 1e-10, "{:?}", rep);
    }

    #[test]
    fn minmax_bounds_hold() {
        // K tilde = 4 => every lambda_k in [k pi / 2, 2 k pi]
        let mesh = Mesh::new(2000).unwrap();
        let rho = DensityRep::Piecewise(
            PiecewiseProfile::new(vec![0.0, 0.2, 0.55, 1.0], vec![4.0, 0.25, 1.0]).unwrap(),
        );
        let basis = solve_basis(rho, 12, mesh).unwrap();
        for (i, &l) in basis.lambdas().iter().enumerate() {
            let kpi = (i + 1) as f64 * PI;
            assert!(l >= kpi / 2.0 && l <= 2.0 * kpi * 1.05, "λ_{} = {l}", i + 1);
        }
    }

    #[test]
    fn eigenvalue_monotone_in_density() {
        let mesh = Mesh::new(1500).unwrap();
        let rho1 = DensityRep::Piecewise(PiecewiseProfile::two_piece(0.5, 1.0, 2.0).unwrap());
        let rho2 = DensityRep::Piecewise(PiecewiseProfile::two_piece(0.5, 1.5, 2.0).unwrap());
        let b1 = solve_basis(rho1, 8, mesh).unwrap();
        let b2 = solve_basis(rho2, 8, mesh).unwrap();
        for k in 0..8 {
            assert!(
                b1.lambda(k) >= b2.lambda(k),
                "pointwise rho1 <= rho2 must give λ(rho1) >= λ(rho2) at k={k}"
            );
        }
    }

    #[test]
    fn refinement_second_order() {
        let rho = DensityRep::Piecewise(PiecewiseProfile::two_piece(0.5, 1.0, 4.0).unwrap());
        let b1 = solve_basis(rho.clone(), 4, Mesh::new(500).unwrap()).unwrap();
        let b2 = solve_basis(rho.clone(), 4, Mesh::new(1000).unwrap()).unwrap();
        let b3 = solve_basis(rho, 4, Mesh::new(2000).unwrap()).unwrap();
        for k in 0..4 {
            let d12 = (b1.lambda(k) - b2.lambda(k)).abs();
            let d23 = (b2.lambda(k) - b3.lambda(k)).abs();
            let ratio = d12 / d23;
            assert!(
                (2.5..6.0).contains(&ratio),
                "mode {k}: refinement ratio {ratio} not ~4 ({d12} vs {d23})"
            );
        }
    }

    #[test]
    fn extension_parities() {
        let mesh = Mesh::new(400).unwrap();
        let rho = DensityRep::Piecewise(PiecewiseProfile::two_piece(0.3, 2.0, 0.5).unwrap());
        let basis = solve_basis(rho, 3, mesh).unwrap();
        for k in 0..3 {
            for i in 1..20 {
                let x = i as f64 / 20.0 * 0.99;
                let odd = basis.eval_extended(k, -x) + basis.eval_extended(k, x);
                assert!(odd.abs() < 1e-14, "odd reflection failed at {x}: {odd}");
                let per = basis.eval_extended(k, x + 2.0) - basis.eval_extended(k, x);
                assert!(per.abs() < 1e-12, "periodicity failed at {x}: {per}");
                let rho_even = basis.rho_extended(-x) - basis.rho_extended(x);
                assert!(rho_even.abs() < 1e-14, "even rho reflection failed at {x}");
            }
        }
    }

    #[test]
    fn extension_weak_equation_across_joints() {
        // against hat functions centered at extended nodes near 0 and 1 the
        // residual of e'' + rho λ² e vanishes like at interior nodes
        let mesh = Mesh::new(600).unwrap();
        let rho = DensityRep::Piecewise(PiecewiseProfile::two_piece(0.45, 1.0, 3.0).unwrap());
        let basis = solve_basis(rho, 2, mesh).unwrap();
        let h = mesh.h();
        for k in 0..2 {
            let lam2 = basis.lambda(k).powi(2);
            for center in [-2.0 * h, -h, 0.0, h, 1.0 - h, 1.0, 1.0 + h] {
                let cuts: Vec<f64> = (-2..=2).map(|j| center + j as f64 * h * 0.5).collect();
                let hat = |x: f64| (1.0 - ((x - center) / h).abs()).max(0.0);
                let hat_d = |x: f64| {
                    if (x - center).abs() >= h {
                        0.0
                    } else if x > center {
                        -1.0 / h
                    } else {
                        1.0 / h
                    }
                };
                let resid = quad::integrate(
                    |x| {
                        basis.eval_deriv_extended(k, x) * hat_d(x)
                            - lam2 * basis.rho_extended(x) * basis.eval_extended(k, x) * hat(x)
                    },
                    center - h,
                    center + h,
                    &cuts,
                );
                assert!(
                    resid.abs() < 1e-7 * lam2,
                    "joint residual at {center}: {resid}"
                );
            }
        }
    }

    #[test]
    fn project_synthesize_roundtrip() {
        let mesh = Mesh::new(800).unwrap();
        let rho = DensityRep::Piecewise(PiecewiseProfile::two_piece(0.6, 1.0, 2.0).unwrap());
        let basis = solve_basis(rho, 6, mesh).unwrap();
        let coeffs = vec![0.3, -1.2, 0.0, 0.5, 0.0, 2.0];
        let nodal = basis.synthesize_nodal(&coeffs);
        let back = basis.project(&nodal);
        for (a, b) in coeffs.iter().zip(&back) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}
