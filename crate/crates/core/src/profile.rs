//! Piecewise-constant coefficient profiles on `[0, 1]` and the problem
//! description they assemble into.
//!
//! Piecewise-constant profiles are the computable surrogate for "measurable,
//! bounded" coefficients: they exercise zero smoothness beyond boundedness
//! while keeping every quadrature in the pipeline exact per cell.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::Result;

/// A piecewise-constant function on `[0, 1]`.
///
/// Values are taken right-continuously at interior breakpoints and
/// left-continuously at `x = 1`, so evaluation is deterministic everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseProfile {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseProfile {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(CoreError::invalid("profile needs at least two breakpoints"));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(CoreError::invalid(format!(
                "breakpoints must start at 0 and end at 1, got [{}, {}]",
                breakpoints[0],
                breakpoints.last().unwrap()
            )));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::invalid("breakpoints must be strictly increasing"));
        }
        if values.len() + 1 != breakpoints.len() {
            return Err(CoreError::invalid(format!(
                "expected {} cell values, got {}",
                breakpoints.len() - 1,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::invalid("cell values must be finite"));
        }
        Ok(PiecewiseProfile { breakpoints, values })
    }

    pub fn constant(v: f64) -> Self {
        PiecewiseProfile { breakpoints: vec![0.0, 1.0], values: vec![v] }
    }

    /// Two cells split at `x = split`.
    pub fn two_piece(split: f64, left: f64, right: f64) -> Result<Self> {
        PiecewiseProfile::new(vec![0.0, split, 1.0], vec![left, right])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell_count(&self) -> usize {
        self.values.len()
    }

    /// Index of the cell whose value is taken at `x` (right-continuous at
    /// breakpoints, left-continuous at 1).
    pub fn cell_index(&self, x: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&x) {
            return Err(CoreError::invalid(format!("x = {x} outside [0, 1]")));
        }
        let idx = self.breakpoints.partition_point(|&b| b <= x);
        Ok((idx - 1).min(self.values.len() - 1))
    }

    /// Cell value containing `x`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.values[self.cell_index(x)?])
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Exact integral over `[0, x]` (cell sums plus a partial cell).
    pub fn integral_to(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.values.len() {
            let l = self.breakpoints[i];
            let r = self.breakpoints[i + 1];
            if x <= l {
                break;
            }
            acc += self.values[i] * (x.min(r) - l);
        }
        acc
    }
}

/// An open control region: a finite union of disjoint subintervals of
/// `(0, 1)` together with its inradius, the largest half-length among the
/// intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlRegion {
    intervals: Vec<(f64, f64)>,
    inradius: f64,
}

impl ControlRegion {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(CoreError::invalid("control region must be nonempty"));
        }
        intervals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for &(l, r) in &intervals {
            if !(0.0..1.0).contains(&l) || !(l..=1.0).contains(&r) || r <= l || r > 1.0 {
                return Err(CoreError::invalid(format!("bad interval ({l}, {r})")));
            }
        }
        if intervals.windows(2).any(|w| w[0].1 >= w[1].0) {
            return Err(CoreError::invalid("control intervals must be disjoint"));
        }
        let inradius = intervals.iter().map(|&(l, r)| 0.5 * (r - l)).fold(0.0, f64::max);
        Ok(ControlRegion { intervals, inradius })
    }

    pub fn single(l: f64, r: f64) -> Result<Self> {
        ControlRegion::new(vec![(l, r)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Inradius δ: the radius of the largest interval contained in the region.
    pub fn inradius(&self) -> f64 {
        self.inradius
    }

    /// The interval realizing the inradius (ties broken towards the left).
    pub fn largest_interval(&self) -> (f64, f64) {
        *self
            .intervals
            .iter()
            .max_by(|a, b| (a.1 - a.0).partial_cmp(&(b.1 - b.0)).unwrap())
            .unwrap()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(l, r)| x > l && x < r)
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|&(l, r)| r - l).sum()
    }
}

/// A state sampled at the nodes of a uniform mesh on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalFunction {
    pub mesh_n: usize,
    pub values: Vec<f64>,
}

impl NodalFunction {
    pub fn new(mesh_n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh_n + 1 {
            return Err(CoreError::invalid(format!(
                "nodal function on {mesh_n} cells needs {} values, got {}",
                mesh_n + 1,
                values.len()
            )));
        }
        Ok(NodalFunction { mesh_n, values })
    }

    pub fn from_fn(mesh_n: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..=mesh_n).map(|i| f(i as f64 / mesh_n as f64)).collect();
        NodalFunction { mesh_n, values }
    }

    /// Piecewise-linear interpolation, clamped to `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.mesh_n as f64;
        let t = (x.clamp(0.0, 1.0)) * n;
        let i = (t.floor() as usize).min(self.mesh_n - 1);
        let frac = t - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }
}

/// The full problem description: coefficients, ellipticity constant, control
/// region, horizon, and initial state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub a: PiecewiseProfile,
    pub b: PiecewiseProfile,
    pub c: PiecewiseProfile,
    pub rho: PiecewiseProfile,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(
        serialize_with = "serialize_omega",
        deserialize_with = "deserialize_omega",
        rename = "omega"
    )]
    pub omega: ControlRegion,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub z0: NodalFunction,
}

fn serialize_omega<S: serde::Serializer>(r: &ControlRegion, s: S) -> std::result::Result<S::Ok, S::Error> {
    r.intervals().serialize(s)
}

fn deserialize_omega<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<ControlRegion, D::Error> {
    let intervals = Vec::<(f64, f64)>::deserialize(d)?;
    ControlRegion::new(intervals).map_err(serde::de::Error::custom)
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CoreError::Deserialize(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialization cannot fail")
    }

    /// All breakpoints of all four coefficient profiles, merged.
    pub fn all_breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .a
            .breakpoints()
            .iter()
            .chain(self.b.breakpoints())
            .chain(self.c.breakpoints())
            .chain(self.rho.breakpoints())
            .copied()
            .collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        pts
    }
}

/// One violated coefficient bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub cell: usize,
    pub message: String,
}

/// Result of checking a [`ProblemSpec`] against the ellipticity and size
/// bounds (`K⁻¹ ≤ a, ρ ≤ K` and `|b| + |c| ≤ K` cell-wise). Report-only:
/// validation never errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub inradius: f64,
    pub k: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check every quantified bound cell-wise and compute the control region's
/// inradius.
pub fn validate(spec: &ProblemSpec) -> ValidationReport {
    let mut violations = Vec::new();
    let k = spec.k;

    if k < 1.0 {
        violations.push(Violation {
            field: "K".into(),
            cell: 0,
            message: format!("K = {k} must be >= 1"),
        });
    }
    if spec.horizon <= 0.0 {
        violations.push(Violation {
            field: "T".into(),
            cell: 0,
            message: format!("T = {} must be positive", spec.horizon),
        });
    }

    let check_elliptic = |name: &str, p: &PiecewiseProfile, out: &mut Vec<Violation>| {
        for (i, &v) in p.values().iter().enumerate() {
            if v < 1.0 / k {
                out.push(Violation {
                    field: name.into(),
                    cell: i,
                    message: format!("{name} = {v} below K⁻¹ = {} in cell {i}", 1.0 / k),
                });
            }
            if v > k {
                out.push(Violation {
                    field: name.into(),
                    cell: i,
                    message: format!("{name} = {v} above K = {k} in cell {i}"),
                });
            }
        }
    };
    check_elliptic("a", &spec.a, &mut violations);
    check_elliptic("rho", &spec.rho, &mut violations);

    // |b| + |c| <= K on every cell of the merged partition
    let merged = spec.all_breakpoints();
    for (i, w) in merged.windows(2).enumerate() {
        let mid = 0.5 * (w[0] + w[1]);
        let bv = spec.b.eval(mid).unwrap().abs();
        let cv = spec.c.eval(mid).unwrap().abs();
        if bv + cv > k {
            violations.push(Violation {
                field: "b,c".into(),
                cell: i,
                message: format!(
                    "|b| + |c| = {} exceeds K = {k} on ({}, {})",
                    bv + cv,
                    w[0],
                    w[1]
                ),
            });
        }
    }

    ValidationReport { violations, inradius: spec.omega.inradius(), k }
}
