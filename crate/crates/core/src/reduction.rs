//! Reduction of the general equation
//! `∂ₓ(a ∂ₓz) + b ∂ₓz + c z − ρ ∂ₜz = f χ_ω` to the canonical form
//! `∂²_y z − ρ̃ ∂_t z = f̃ χ_ω̃` on `[0, 1]`, and the exact inverse maps for
//! states and controls.
//!
//! The chain, applied in order:
//!
//! 1. Sign normalization: when `c` has a positive part, substitute
//!    `z → e^{−st} z` with the smallest multiple `s` of `2K` that makes
//!    `c − sρ ≤ 0` cell-wise. The shift is kept as metadata (`shift_rate`),
//!    never baked into a modified `c`, so inversion is exact.
//! 2. Drift absorption: `B(x) = ∫₀ˣ b/a`, turning the operator into
//!    `e^{−B} ∂ₓ(a e^B ∂ₓ·)`.
//! 3. The auxiliary problem `e^{−B}(a e^B w')' + c w = 0`, `w(0) = w(1) = 1`
//!    with nonpositive `c`, solved by P1 finite elements; by the maximum
//!    principle `0 < w ≤ 1`, and the substitution `z → z/w` removes the
//!    zero-order term.
//! 4. The Liouville coordinate `y(x) = L⁻¹ ∫₀ˣ (a w² e^B)⁻¹` with
//!    `L = ∫₀¹ (a w² e^B)⁻¹`, which maps onto `[0, 1]` and produces the
//!    canonical density `ρ̃(y) = L² (ρ a w⁴ e^{2B}) ∘ x(y)`.
//!
//! The control transforms as `f̃(y, t) = L² (a w³ e^{2B})(x) e^{−st} f(x, t)`;
//! the state as `z(x, t) = e^{st} w(x) Z(y(x), t)`.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::profile::{ControlRegion, PiecewiseProfile, ProblemSpec};
use crate::quad;
use crate::Result;

/// The piecewise-linear antiderivative `B(x) = ∫₀ˣ b/a ds`, exact per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BFunction {
    /// Union of the breakpoints of `a` and `b`.
    pub knots: Vec<f64>,
    /// Values of B at the knots; linear in between.
    pub values: Vec<f64>,
}

impl BFunction {
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let idx = self.knots.partition_point(|&k| k <= x).min(self.knots.len() - 1);
        let i = idx - 1;
        let t = (x - self.knots[i]) / (self.knots[i + 1] - self.knots[i]);
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }
}

/// `B(x) = ∫₀ˣ b(s)/a(s) ds` with kinks exactly at the union of breakpoints.
pub fn compute_b(a: &PiecewiseProfile, b: &PiecewiseProfile) -> BFunction {
    let mut knots: Vec<f64> =
        a.breakpoints().iter().chain(b.breakpoints()).copied().collect();
    knots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    knots.dedup();
    let mut values = Vec::with_capacity(knots.len());
    values.push(0.0);
    for w in knots.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let slope = b.eval(mid).unwrap() / a.eval(mid).unwrap();
        let prev = *values.last().unwrap();
        values.push(prev + slope * (w[1] - w[0]));
    }
    BFunction { knots, values }
}

/// P1 solution of `e^{−B} (a e^B w')' + c w = 0`, `w(0) = w(1) = 1`.
///
/// Requires `c ≤ 0` cell-wise; callers with a positive part in `c` must first
/// shift it by a multiple of `2K` (tracked as the time factor `e^{−st}`).
/// Returns nodal values on a uniform grid with `n` cells; the maximum
/// principle bound `0 < w ≤ 1 + 1e−8` is enforced after the solve.
pub fn solve_w(
    a: &PiecewiseProfile,
    b: &PiecewiseProfile,
    c: &PiecewiseProfile,
    n: usize,
) -> Result<Vec<f64>> {
    if c.max_value() > 0.0 {
        return Err(CoreError::precondition(
            "solve_w requires c <= 0; shift c by a multiple of -2K first \
             (tracked as the state factor e^{-2Kt})",
        ));
    }
    let bfun = compute_b(a, b);
    let h = 1.0 / n as f64;
    let coeff_cuts: Vec<f64> = {
        let mut v: Vec<f64> =
            a.breakpoints().iter().chain(b.breakpoints()).chain(c.breakpoints()).copied().collect();
        v.sort_by(|x, y| x.partial_cmp(y).unwrap());
        v.dedup();
        v
    };

    // bilinear form A[w0, phi] = ∫ a e^B w0' phi' − ∫ c e^B w0 phi  (SPD for c ≤ 0)
    // right-hand side for w = 1 + w0:   rhs[phi] = ∫ c e^B phi
    let dim = n - 1;
    let mut diag = vec![0.0; dim];
    let mut off = vec![0.0; dim - 1];
    let mut rhs = vec![0.0; dim];
    for cell in 0..n {
        let x0 = cell as f64 * h;
        let x1 = (cell + 1) as f64 * h;
        let cuts: Vec<f64> =
            coeff_cuts.iter().copied().filter(|&p| p > x0 && p < x1).collect();
        let ae = |x: f64| a.eval(x).unwrap() * bfun.eval(x).exp();
        let ce = |x: f64| c.eval(x).unwrap() * bfun.eval(x).exp();
        // derivative part: phi_l' = -1/h, phi_r' = 1/h
        let k_int = quad::integrate(&ae, x0, x1, &cuts) / (h * h);
        let m_ll = quad::integrate(|x| ce(x) * ((x1 - x) / h).powi(2), x0, x1, &cuts);
        let m_rr = quad::integrate(|x| ce(x) * ((x - x0) / h).powi(2), x0, x1, &cuts);
        let m_lr = quad::integrate(|x| ce(x) * (x1 - x) * (x - x0) / (h * h), x0, x1, &cuts);
        let r_l = quad::integrate(|x| ce(x) * (x1 - x) / h, x0, x1, &cuts);
        let r_r = quad::integrate(|x| ce(x) * (x - x0) / h, x0, x1, &cuts);
        if cell >= 1 {
            diag[cell - 1] += k_int - m_ll;
            rhs[cell - 1] += r_l;
        }
        if cell + 1 <= n - 1 {
            diag[cell] += k_int - m_rr;
            rhs[cell] += r_r;
        }
        if cell >= 1 && cell + 1 <= n - 1 {
            off[cell - 1] += -k_int - m_lr;
        }
    }

    // Thomas solve (matrix SPD, no pivoting needed)
    let mut cp = vec![0.0; dim];
    let mut dp = vec![0.0; dim];
    cp[0] = off.first().copied().unwrap_or(0.0) / diag[0];
    dp[0] = rhs[0] / diag[0];
    for i in 1..dim {
        let m = diag[i] - off[i - 1] * cp[i - 1];
        if i < dim - 1 {
            cp[i] = off[i] / m;
        }
        dp[i] = (rhs[i] - off[i - 1] * dp[i - 1]) / m;
    }
    let mut w0 = vec![0.0; dim];
    w0[dim - 1] = dp[dim - 1];
    for i in (0..dim - 1).rev() {
        w0[i] = dp[i] - cp[i] * w0[i + 1];
    }

    let mut w = Vec::with_capacity(n + 1);
    w.push(1.0);
    w.extend(w0.iter().map(|v| 1.0 + v));
    w.push(1.0);

    let wmin = w.iter().copied().fold(f64::INFINITY, f64::min);
    let wmax = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if wmin <= 0.0 || wmax > 1.0 + 1e-8 {
        return Err(CoreError::numerical(format!(
            "w violates the maximum principle: range [{wmin}, {wmax}]"
        )));
    }
    Ok(w)
}

/// The canonical system produced by [`build_canonical`], with everything
/// needed to map states and controls both ways. All tabulations live on
/// uniform grids; `rho_tilde` is linearly interpolated between its nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CanonicalSystem {
    /// Cells of the uniform x- and y-grids (nodes = grid_n + 1).
    pub grid_n: usize,
    /// w at the x-grid nodes.
    pub w: Vec<f64>,
    /// Exact piecewise-linear B.
    pub b_integral: BFunction,
    /// y(x) at the x-grid nodes (strictly increasing, 0 → 0, 1 → 1).
    pub y_of_x: Vec<f64>,
    /// x(y) at the y-grid nodes (inverse map, same convention).
    pub x_of_y: Vec<f64>,
    /// Canonical density ρ̃(y) = L² (ρ a w⁴ e^{2B}) ∘ x(y) at the y-grid nodes.
    pub rho_tilde: Vec<f64>,
    /// Control divisor L² a w³ e^{2B} at the x-grid nodes:
    /// f(x,t) = e^{st} f̃(y(x),t) / divisor(x).
    pub control_divisor: Vec<f64>,
    /// Liouville length L = ∫₀¹ (a w² e^BInverse)⁻¹.
    pub length_scale: f64,
    /// Ellipticity constant actually realized by ρ̃ and the coordinate map.
    pub k_tilde: f64,
    /// Image of ω under y, with recomputed inradius.
    pub omega_tilde: ControlRegion,
    /// Sign-normalization rate s: the original state is e^{st} w(x) Z(y(x),t).
    /// Zero when c was already nonpositive, otherwise a multiple of 2K.
    pub shift_rate: f64,
}

fn interp_uniform(values: &[f64], x: f64) -> f64 {
    let n = values.len() - 1;
    let t = x.clamp(0.0, 1.0) * n as f64;
    let i = (t.floor() as usize).min(n - 1);
    let frac = t - i as f64;
    values[i] * (1.0 - frac) + values[i + 1] * frac
}

impl CanonicalSystem {
    pub fn w_at(&self, x: f64) -> f64 {
        interp_uniform(&self.w, x)
    }

    pub fn y_at(&self, x: f64) -> f64 {
        interp_uniform(&self.y_of_x, x)
    }

    pub fn x_at(&self, y: f64) -> f64 {
        interp_uniform(&self.x_of_y, y)
    }

    pub fn rho_tilde_at(&self, y: f64) -> f64 {
        interp_uniform(&self.rho_tilde, y)
    }

    pub fn control_divisor_at(&self, x: f64) -> f64 {
        interp_uniform(&self.control_divisor, x)
    }

    /// ρ̃ as a density for the eigensolver.
    pub fn rho_tilde_density(&self) -> crate::eigen::DensityRep {
        crate::eigen::DensityRep::Tabulated(crate::profile::NodalFunction {
            mesh_n: self.grid_n,
            values: self.rho_tilde.clone(),
        })
    }

    /// Map an original-coordinates state sample to canonical coordinates:
    /// `Z(y, t) = e^{−st} z(x(y), t) / w(x(y))`.
    pub fn state_to_canonical(&self, z: impl Fn(f64) -> f64, t: f64, y: f64) -> f64 {
        let x = self.x_at(y);
        (-self.shift_rate * t).exp() * z(x) / self.w_at(x)
    }

    /// Map a canonical state sample back: `z(x, t) = e^{st} w(x) Z(y(x), t)`.
    pub fn state_from_canonical(&self, zc: impl Fn(f64) -> f64, t: f64, x: f64) -> f64 {
        (self.shift_rate * t).exp() * self.w_at(x) * zc(self.y_at(x))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("canonical system serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CoreError::Deserialize(e.to_string()))
    }
}

/// Default tabulation grid; ρ̃ is a boundary-value-problem byproduct, so no
/// piecewise-exact representation exists and a fine grid is the contract.
pub const DEFAULT_GRID_N: usize = 4096;

/// Run the full reduction chain on a validated problem.
pub fn build_canonical(spec: &ProblemSpec) -> Result<CanonicalSystem> {
    build_canonical_with_grid(spec, DEFAULT_GRID_N)
}

pub fn build_canonical_with_grid(spec: &ProblemSpec, grid_n: usize) -> Result<CanonicalSystem> {
    let report = crate::profile::validate(spec);
    if !report.is_valid() {
        return Err(CoreError::precondition(format!(
            "spec fails validation: {}",
            report.violations[0].message
        )));
    }

    // 1. sign normalization: smallest multiple of 2K with c - s rho <= 0
    let shift_rate = required_shift(spec);
    let c_shifted = shifted_c(spec, shift_rate)?;

    // 2./3. drift absorption and the auxiliary w
    let bfun = compute_b(&spec.a, &spec.b);
    let w = solve_w(&spec.a, &spec.b, &c_shifted, grid_n)?;

    // 4. Liouville coordinate: integrand (a w² e^B)⁻¹, cumulative per grid cell
    let h = 1.0 / grid_n as f64;
    let coeff_cuts = spec.all_breakpoints();
    let w_interp = |x: f64| interp_uniform(&w, x);
    let integrand = |x: f64| {
        1.0 / (spec.a.eval(x).unwrap() * w_interp(x).powi(2) * bfun.eval(x).exp())
    };
    let mut y_raw = Vec::with_capacity(grid_n + 1);
    y_raw.push(0.0);
    for cell in 0..grid_n {
        let x0 = cell as f64 * h;
        let x1 = (cell + 1) as f64 * h;
        let cuts: Vec<f64> =
            coeff_cuts.iter().copied().filter(|&p| p > x0 && p < x1).collect();
        let inc = quad::integrate(integrand, x0, x1, &cuts);
        y_raw.push(y_raw.last().unwrap() + inc);
    }
    let length_scale = *y_raw.last().unwrap();
    let y_of_x: Vec<f64> = y_raw.iter().map(|v| v / length_scale).collect();
    let mut y_of_x = y_of_x;
    y_of_x[grid_n] = 1.0;

    // monotone inversion onto a uniform y-grid
    let mut x_of_y = Vec::with_capacity(grid_n + 1);
    let mut seg = 0usize;
    for j in 0..=grid_n {
        let y = j as f64 * h;
        while seg + 1 < grid_n && y_of_x[seg + 1] < y {
            seg += 1;
        }
        let (y0, y1) = (y_of_x[seg], y_of_x[seg + 1]);
        let t = if y1 > y0 { ((y - y0) / (y1 - y0)).clamp(0.0, 1.0) } else { 0.0 };
        x_of_y.push((seg as f64 + t) * h);
    }
    x_of_y[0] = 0.0;
    x_of_y[grid_n] = 1.0;

    // canonical density and control divisor
    let weight = |x: f64| {
        let wv = w_interp(x);
        let eb = bfun.eval(x).exp();
        spec.a.eval(x).unwrap() * wv * wv * wv * eb * eb
    };
    let rho_tilde: Vec<f64> = x_of_y
        .iter()
        .map(|&x| length_scale * length_scale * spec.rho.eval(x).unwrap() * weight(x) * w_interp(x))
        .collect();
    let control_divisor: Vec<f64> = (0..=grid_n)
        .map(|i| {
            let x = i as f64 * h;
            length_scale * length_scale * weight(x)
        })
        .collect();

    // region image with recomputed inradius
    let y_interp = |x: f64| interp_uniform(&y_of_x, x);
    let mapped: Vec<(f64, f64)> =
        spec.omega.intervals().iter().map(|&(l, r)| (y_interp(l), y_interp(r))).collect();
    let omega_tilde = ControlRegion::new(mapped)?;

    // realized ellipticity constant of the canonical picture
    let rt_min = rho_tilde.iter().copied().fold(f64::INFINITY, f64::min);
    let rt_max = rho_tilde.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(rt_min > 0.0) {
        return Err(CoreError::numerical(format!(
            "canonical density not uniformly positive: min {rt_min}"
        )));
    }
    let mut k_tilde = rt_max.max(1.0 / rt_min);
    for win in y_of_x.windows(2) {
        let slope = (win[1] - win[0]) / h;
        if !(slope > 0.0) {
            return Err(CoreError::numerical("coordinate map not strictly increasing"));
        }
        k_tilde = k_tilde.max(slope).max(1.0 / slope);
    }

    Ok(CanonicalSystem {
        grid_n,
        w,
        b_integral: bfun,
        y_of_x,
        x_of_y,
        rho_tilde,
        control_divisor,
        length_scale,
        k_tilde,
        omega_tilde,
        shift_rate,
    })
}

/// Smallest multiple of 2K making `c − s ρ ≤ 0` cell-wise (0 when `c ≤ 0`).
fn required_shift(spec: &ProblemSpec) -> f64 {
    if spec.c.max_value() <= 0.0 {
        return 0.0;
    }
    let merged = {
        let mut v: Vec<f64> = spec
            .c
            .breakpoints()
            .iter()
            .chain(spec.rho.breakpoints())
            .copied()
            .collect();
        v.sort_by(|x, y| x.partial_cmp(y).unwrap());
        v.dedup();
        v
    };
    let mut needed: f64 = 0.0;
    for wdw in merged.windows(2) {
        let mid = 0.5 * (wdw[0] + wdw[1]);
        let cv = spec.c.eval(mid).unwrap();
        if cv > 0.0 {
            needed = needed.max(cv / spec.rho.eval(mid).unwrap());
        }
    }
    let unit = 2.0 * spec.k;
    (needed / unit).ceil() * unit
}

/// `c − s ρ` as a profile on the merged partition.
fn shifted_c(spec: &ProblemSpec, s: f64) -> Result<PiecewiseProfile> {
    if s == 0.0 {
        return Ok(spec.c.clone());
    }
    let mut bps: Vec<f64> =
        spec.c.breakpoints().iter().chain(spec.rho.breakpoints()).copied().collect();
    bps.sort_by(|x, y| x.partial_cmp(y).unwrap());
    bps.dedup();
    let vals: Vec<f64> = bps
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            spec.c.eval(mid).unwrap() - s * spec.rho.eval(mid).unwrap()
        })
        .collect();
    PiecewiseProfile::new(bps, vals)
}

/// A control in original coordinates obtained by pulling a canonical control
/// back through the reduction chain.
pub struct MappedControl<'a, F>
where
    F: Fn(f64, f64) -> f64,
{
    system: &'a CanonicalSystem,
    canonical: F,
}

impl<'a, F> MappedControl<'a, F>
where
    F: Fn(f64, f64) -> f64,
{
    /// `f(x, t) = e^{st} f̃(y(x), t) / (L² a w³ e^{2B})(x)`.
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        let y = self.system.y_at(x);
        let ft = (self.canonical)(y, t);
        if ft == 0.0 {
            return 0.0;
        }
        (self.system.shift_rate * t).exp() * ft / self.system.control_divisor_at(x)
    }
}

/// Pull a canonical control `f̃(y, t)` supported in ω̃ back to the original
/// coordinates. Fails if the canonical support does not land inside ω.
pub fn map_control_back<'a, F>(
    canonical: F,
    system: &'a CanonicalSystem,
    omega_original: &ControlRegion,
) -> Result<MappedControl<'a, F>>
where
    F: Fn(f64, f64) -> f64,
{
    // support check: the preimage of every ω̃ interval must lie inside ω
    for &(l, r) in system.omega_tilde.intervals() {
        let xl = system.x_at(l);
        let xr = system.x_at(r);
        let tol = 2.0 / system.grid_n as f64;
        let inside = omega_original
            .intervals()
            .iter()
            .any(|&(ol, or)| xl >= ol - tol && xr <= or + tol);
        if !inside {
            return Err(CoreError::precondition(format!(
                "canonical support ({l}, {r}) maps to ({xl}, {xr}) outside ω"
            )));
        }
    }
    Ok(MappedControl { system, canonical })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{NodalFunction, ProblemSpec};

    fn spec_with(
        a: PiecewiseProfile,
        b: PiecewiseProfile,
        c: PiecewiseProfile,
        rho: PiecewiseProfile,
        k: f64,
    ) -> ProblemSpec {
        ProblemSpec {
            a,
            b,
            c,
            rho,
            k,
            omega: ControlRegion::single(0.3, 0.5).unwrap(),
            horizon: 1.0,
            z0: NodalFunction::from_fn(32, |x| x * (1.0 - x)),
        }
    }

    #[test]
    fn b_zero_drift() {
        let b = compute_b(&PiecewiseProfile::constant(1.0), &PiecewiseProfile::constant(0.0));
        for i in 0..=10 {
            assert_eq!(b.eval(i as f64 / 10.0), 0.0);
        }
    }

    #[test]
    fn b_constant_slope() {
        let b = compute_b(&PiecewiseProfile::constant(1.0), &PiecewiseProfile::constant(2.0));
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            assert!((b.eval(x) - 2.0 * x).abs() < 1e-15);
        }
    }

    #[test]
    fn b_two_piece_exact() {
        // a = [1 | 2] split at 0.5, b = 1: B(1) = 0.5 + 0.25 = 0.75
        let a = PiecewiseProfile::two_piece(0.5, 1.0, 2.0).unwrap();
        let b = compute_b(&a, &PiecewiseProfile::constant(1.0));
        assert!((b.eval(1.0) - 0.75).abs() < 1e-15);
        assert!((b.eval(0.5) - 0.5).abs() < 1e-15);
        assert!((b.eval(0.75) - 0.625).abs() < 1e-15);
    }

    #[test]
    fn w_constant_when_c_zero() {
        let w = solve_w(
            &PiecewiseProfile::two_piece(0.4, 1.0, 3.0).unwrap(),
            &PiecewiseProfile::constant(0.5),
            &PiecewiseProfile::constant(0.0),
            256,
        )
        .unwrap();
        for &v in &w {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn w_cosh_closed_form() {
        // a = 1, b = 0, c = -1: w = cosh(x - 1/2)/cosh(1/2)
        let w = solve_w(
            &PiecewiseProfile::constant(1.0),
            &PiecewiseProfile::constant(0.0),
            &PiecewiseProfile::constant(-1.0),
            4096,
        )
        .unwrap();
        let exact = |x: f64| (x - 0.5).cosh() / 0.5f64.cosh();
        for i in [0, 1024, 2048, 3072, 4096] {
            let x = i as f64 / 4096.0;
            assert!((w[i] - exact(x)).abs() < 1e-6, "w({x}) = {} vs {}", w[i], exact(x));
        }
        assert!((w[2048] - 0.886818883970074).abs() < 1e-6);
    }

    #[test]
    fn w_rejects_positive_c() {
        let err = solve_w(
            &PiecewiseProfile::constant(1.0),
            &PiecewiseProfile::constant(0.0),
            &PiecewiseProfile::two_piece(0.5, -1.0, 0.5).unwrap(),
            128,
        )
        .unwrap_err();
        assert!(err.to_string().contains("shift c"), "{err}");
    }

    #[test]
    fn w_maximum_principle_random_admissible() {
        let a = PiecewiseProfile::new(vec![0.0, 0.3, 0.8, 1.0], vec![0.5, 2.0, 1.0]).unwrap();
        let b = PiecewiseProfile::two_piece(0.6, 1.0, -1.5).unwrap();
        let c = PiecewiseProfile::new(vec![0.0, 0.25, 0.9, 1.0], vec![-2.0, -0.1, -1.0]).unwrap();
        let w = solve_w(&a, &b, &c, 1024).unwrap();
        let wmin = w.iter().copied().fold(f64::INFINITY, f64::min);
        let wmax = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(wmin > 0.0);
        assert!(wmax <= 1.0 + 1e-8);
    }

    #[test]
    fn identity_chain() {
        let spec = spec_with(
            PiecewiseProfile::constant(1.0),
            PiecewiseProfile::constant(0.0),
            PiecewiseProfile::constant(0.0),
            PiecewiseProfile::constant(1.0),
            1.0,
        );
        let sys = build_canonical_with_grid(&spec, 1024).unwrap();
        assert!((sys.length_scale - 1.0).abs() < 1e-12);
        assert_eq!(sys.shift_rate, 0.0);
        for i in 0..=1024 {
            let x = i as f64 / 1024.0;
            assert!((sys.y_at(x) - x).abs() < 1e-12);
            assert!((sys.rho_tilde[i] - 1.0).abs() < 1e-12);
        }
        let (l, r) = sys.omega_tilde.intervals()[0];
        assert!((l - 0.3).abs() < 1e-12 && (r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_a_rescales_density() {
        // a = 4: L = 1/4, y = x, rho_tilde = 1/4
        let spec = spec_with(
            PiecewiseProfile::constant(4.0),
            PiecewiseProfile::constant(0.0),
            PiecewiseProfile::constant(0.0),
            PiecewiseProfile::constant(1.0),
            4.0,
        );
        let sys = build_canonical_with_grid(&spec, 1024).unwrap();
        assert!((sys.length_scale - 0.25).abs() < 1e-12);
        for i in (0..=1024).step_by(64) {
            let x = i as f64 / 1024.0;
            assert!((sys.y_at(x) - x).abs() < 1e-12);
            assert!((sys.rho_tilde[i] - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn two_piece_a_hand_integration() {
        // a = [1 | 4] at 0.5: L = 0.5 + 0.125 = 0.625, y(0.5) = 0.8,
        // rho_tilde = [L², 4L²] split at y = 0.8
        let spec = spec_with(
            PiecewiseProfile::two_piece(0.5, 1.0, 4.0).unwrap(),
            PiecewiseProfile::constant(0.0),
            PiecewiseProfile::constant(0.0),
            PiecewiseProfile::constant(1.0),
            4.0,
        );
        let sys = build_canonical_with_grid(&spec, 4096).unwrap();
        assert!((sys.length_scale - 0.625).abs() < 1e-12);
        assert!((sys.y_at(0.5) - 0.8).abs() < 1e-12);
        let l2 = 0.625f64 * 0.625;
        assert!((sys.rho_tilde_at(0.4) - l2).abs() < 1e-10);
        assert!((sys.rho_tilde_at(0.9) - 4.0 * l2).abs() < 1e-10);
    }

    #[test]
    fn coordinate_maps_are_inverse() {
        let spec = spec_with(
            PiecewiseProfile::new(vec![0.0, 0.3, 0.7, 1.0], vec![1.0, 3.0, 0.5]).unwrap(),
            PiecewiseProfile::constant(0.5),
            PiecewiseProfile::constant(-0.5),
            PiecewiseProfile::two_piece(0.6, 2.0, 1.0).unwrap(),
            4.0,
        );
        let sys = build_canonical_with_grid(&spec, 8192).unwrap();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            let round = sys.x_at(sys.y_at(x));
            assert!((round - x).abs() < 1e-10, "x = {x}: round trip {round}");
        }
        // bi-Lipschitz constants within the recorded k_tilde
        for i in 0..8192 {
            let slope = (sys.y_of_x[i + 1] - sys.y_of_x[i]) * 8192.0;
            assert!(slope <= sys.k_tilde * (1.0 + 1e-12) && slope >= 1.0 / sys.k_tilde * (1.0 - 1e-12));
        }
        // density bounds within the recorded k_tilde
        let rt_min = sys.rho_tilde.iter().copied().fold(f64::INFINITY, f64::min);
        let rt_max = sys.rho_tilde.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(rt_max <= sys.k_tilde * (1.0 + 1e-12));
        assert!(rt_min >= 1.0 / sys.k_tilde * (1.0 - 1e-12));
    }

    #[test]
    fn shift_activates_only_for_positive_c() {
        let mut spec = spec_with(
            PiecewiseProfile::constant(1.0),
            PiecewiseProfile::constant(0.0),
            PiecewiseProfile::two_piece(0.5, 1.0, -1.0).unwrap(),
            PiecewiseProfile::constant(1.0),
            2.0,
        );
        let sys = build_canonical_with_grid(&spec, 512).unwrap();
        assert_eq!(sys.shift_rate, 4.0); // 2K with K = 2 suffices: c - 4 rho <= 0
        spec.c = PiecewiseProfile::constant(-1.0);
        let sys = build_canonical_with_grid(&spec, 512).unwrap();
        assert_eq!(sys.shift_rate, 0.0);
    }

    #[test]
    fn shift_bumps_when_2k_insufficient() {
        // K = 4, c = 4, rho = 1/4: c/rho = 16 > 2K = 8, so s = 16 (two units)
        let spec = spec_with(
            PiecewiseProfile::constant(1.0),
            PiecewiseProfile::constant(0.0),
            PiecewiseProfile::constant(4.0),
            PiecewiseProfile::constant(0.25),
            4.0,
        );
        let sys = build_canonical_with_grid(&spec, 512).unwrap();
        assert_eq!(sys.shift_rate, 16.0);
    }

    #[test]
    fn control_roundtrip_through_reduction() {
        let spec = spec_with(
            PiecewiseProfile::two_piece(0.5, 1.0, 4.0).unwrap(),
            PiecewiseProfile::constant(0.5),
            PiecewiseProfile::two_piece(0.4, 0.5, -0.5).unwrap(),
            PiecewiseProfile::two_piece(0.3, 1.0, 2.0).unwrap(),
            4.0,
        );
        let sys = build_canonical_with_grid(&spec, 8192).unwrap();
        let (l, r) = sys.omega_tilde.intervals()[0];
        // a smooth canonical control supported in omega_tilde
        let f_tilde = move |y: f64, t: f64| {
            if y <= l || y >= r {
                0.0
            } else {
                let s = (y - l) / (r - l);
                (s * (1.0 - s)).powi(2) * (1.0 + t)
            }
        };
        let mapped = map_control_back(f_tilde, &sys, &spec.omega).unwrap();
        // re-reduce: forward map of the pulled-back control recovers f_tilde
        for t in [0.0, 0.4, 1.0] {
            for j in 0..=50 {
                let y = l + (r - l) * j as f64 / 50.0;
                let x = sys.x_at(y);
                let fwd = sys.control_divisor_at(x)
                    * (-sys.shift_rate * t).exp()
                    * mapped.eval(x, t);
                let expect = f_tilde(sys.y_at(x), t);
                assert!(
                    (fwd - expect).abs() <= 1e-8 * (1.0 + expect.abs()),
                    "t={t} y={y}: {fwd} vs {expect}"
                );
            }
        }
        // support: outside omega the pulled-back control vanishes
        for x in [0.05, 0.2, 0.95] {
            assert_eq!(mapped.eval(x, 0.5), 0.0);
        }
    }

    #[test]
    fn identity_chain_control_is_unchanged() {
        let spec = spec_with(
            PiecewiseProfile::constant(1.0),
            PiecewiseProfile::constant(0.0),
            PiecewiseProfile::constant(0.0),
            PiecewiseProfile::constant(1.0),
            1.0,
        );
        let sys = build_canonical_with_grid(&spec, 2048).unwrap();
        let f_tilde = |y: f64, t: f64| {
            if y > 0.3 && y < 0.5 {
                (y - 0.3) * (0.5 - y) * (2.0 - t)
            } else {
                0.0
            }
        };
        let mapped = map_control_back(f_tilde, &sys, &spec.omega).unwrap();
        for t in [0.0, 0.7] {
            for x in [0.31, 0.4, 0.49] {
                assert!((mapped.eval(x, t) - f_tilde(x, t)).abs() < 1e-9);
            }
        }
    }
}
