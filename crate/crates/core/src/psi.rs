//! The weight function `Ψ`, the fractional order, the singular kernel and
//! the weighted sup-norm.
//!
//! Every quantity in the calculus is built from increments `Ψ(t) − Ψ(s)`.
//! Solutions are stored in weighted form `w(t) = (Ψ(t) − Ψ(0))^{1−ρ} u(t)`,
//! which stays finite at `t = 0` even when `u` itself does not.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::special::gamma;

/// Table for a user-supplied `Ψ`, interpolated by piecewise cubic Hermite
/// polynomials.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPsi {
    nodes: Vec<f64>,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl TabulatedPsi {
    /// Builds a table from nodes, values and optional node derivatives.
    ///
    /// Without derivatives, slopes are chosen by the Fritsch–Carlson
    /// rule, which keeps the interpolant monotone on monotone data.
    pub fn new(nodes: Vec<f64>, values: Vec<f64>, derivs: Option<Vec<f64>>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Domain(
                "tabulated psi needs at least two nodes".into(),
            ));
        }
        if values.len() != nodes.len() {
            return Err(Error::Domain(format!(
                "tabulated psi has {} nodes but {} values",
                nodes.len(),
                values.len()
            )));
        }
        if nodes.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "tabulated psi contains non-finite entries".into(),
            ));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain(
                "tabulated psi nodes must be strictly increasing".into(),
            ));
        }
        let derivs = match derivs {
            Some(d) => {
                if d.len() != nodes.len() {
                    return Err(Error::Domain(format!(
                        "tabulated psi has {} nodes but {} derivatives",
                        nodes.len(),
                        d.len()
                    )));
                }
                if d.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Domain(
                        "tabulated psi derivative is not finite".into(),
                    ));
                }
                d
            }
            None => fritsch_carlson_slopes(&nodes, &values),
        };
        Ok(Self {
            nodes,
            values,
            derivs,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivs(&self) -> &[f64] {
        &self.derivs
    }

    fn segment(&self, t: f64) -> usize {
        let last = self.nodes.len() - 2;
        match self.nodes.partition_point(|&n| n <= t) {
            0 => 0,
            k => (k - 1).min(last),
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let (t0, t1) = (self.nodes[i], self.nodes[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.values[i]
            + h10 * h * self.derivs[i]
            + h01 * self.values[i + 1]
            + h11 * h * self.derivs[i + 1]
    }

    fn deriv(&self, t: f64) -> f64 {
        let i = self.segment(t);
        let (t0, t1) = (self.nodes[i], self.nodes[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let s2 = s * s;
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        d00 * self.values[i]
            + d10 * self.derivs[i]
            + d01 * self.values[i + 1]
            + d11 * self.derivs[i + 1]
    }
}

fn fritsch_carlson_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let secants: Vec<f64> = (0..n - 1)
        .map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i]))
        .collect();
    let mut m = vec![0.0; n];
    m[0] = secants[0];
    m[n - 1] = secants[n - 2];
    for i in 1..n - 1 {
        m[i] = if secants[i - 1] * secants[i] <= 0.0 {
            0.0
        } else {
            0.5 * (secants[i - 1] + secants[i])
        };
    }
    for i in 0..n - 1 {
        let d = secants[i];
        if d == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let a = m[i] / d;
        let b = m[i + 1] / d;
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            m[i] = tau * a * d;
            m[i + 1] = tau * b * d;
        }
    }
    m
}

/// The family a weight function belongs to.
#[derive(Debug, Clone, PartialEq)]
pub enum PsiKind {
    /// `Ψ(t) = t`: the classical Riemann–Liouville / Caputo calculus.
    Identity,
    /// `Ψ(t) = ln(t + shift)`: Hadamard-type calculus moved to start at 0.
    LogShifted { shift: f64 },
    /// `Ψ(t) = t^σ`: Katugampola-type calculus.
    Power { sigma: f64 },
    /// Tabulated values with cubic Hermite interpolation.
    Tabulated(Arc<TabulatedPsi>),
}

/// A weight function `Ψ` on `[0, b]` together with its derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiSpec {
    kind: PsiKind,
    b: f64,
}

impl PsiSpec {
    pub fn new(kind: PsiKind, b: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::Domain(format!(
                "psi domain end must be finite and positive, got {b}"
            )));
        }
        match &kind {
            PsiKind::Identity => {}
            PsiKind::LogShifted { shift } => {
                if !(*shift > 0.0) || !shift.is_finite() {
                    return Err(Error::Domain(format!(
                        "log-shifted psi needs shift > 0, got {shift}"
                    )));
                }
            }
            PsiKind::Power { sigma } => {
                if !(*sigma > 0.0) || !sigma.is_finite() {
                    return Err(Error::Domain(format!(
                        "power psi needs sigma > 0, got {sigma}"
                    )));
                }
            }
            PsiKind::Tabulated(table) => {
                let first = table.nodes[0];
                let last = *table.nodes.last().unwrap();
                if first != 0.0 || (last - b).abs() > 1e-12 * b {
                    return Err(Error::Domain(format!(
                        "tabulated psi must cover [0, {b}], got [{first}, {last}]"
                    )));
                }
            }
        }
        Ok(Self { kind, b })
    }

    pub fn identity(b: f64) -> Result<Self> {
        Self::new(PsiKind::Identity, b)
    }

    pub fn power(sigma: f64, b: f64) -> Result<Self> {
        Self::new(PsiKind::Power { sigma }, b)
    }

    pub fn log_shifted(shift: f64, b: f64) -> Result<Self> {
        Self::new(PsiKind::LogShifted { shift }, b)
    }

    pub fn tabulated(table: TabulatedPsi, b: f64) -> Result<Self> {
        Self::new(PsiKind::Tabulated(Arc::new(table)), b)
    }

    pub fn kind(&self) -> &PsiKind {
        &self.kind
    }

    /// Right end of the domain `[0, b]`.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// `Ψ(t)`. No domain check; see [`psi_increment`] for the checked form.
    pub fn eval(&self, t: f64) -> f64 {
        match &self.kind {
            PsiKind::Identity => t,
            PsiKind::LogShifted { shift } => (t + shift).ln(),
            PsiKind::Power { sigma } => t.powf(*sigma),
            PsiKind::Tabulated(table) => table.eval(t),
        }
    }

    /// `Ψ′(t)`.
    pub fn deriv(&self, t: f64) -> f64 {
        match &self.kind {
            PsiKind::Identity => 1.0,
            PsiKind::LogShifted { shift } => 1.0 / (t + shift),
            PsiKind::Power { sigma } => sigma * t.powf(sigma - 1.0),
            PsiKind::Tabulated(table) => table.deriv(t),
        }
    }

    /// `Ψ(t) − Ψ(0)`, the quantity the weighted space is built on.
    pub fn offset(&self, t: f64) -> f64 {
        match &self.kind {
            PsiKind::Identity => t,
            PsiKind::LogShifted { shift } => (t / shift).ln_1p(),
            PsiKind::Power { sigma } => t.powf(*sigma),
            PsiKind::Tabulated(table) => table.eval(t) - table.values[0],
        }
    }

    fn check_in_domain(&self, t: f64, name: &str) -> Result<()> {
        if !(0.0..=self.b).contains(&t) {
            return Err(Error::Domain(format!(
                "{name} = {t} lies outside [0, {}]",
                self.b
            )));
        }
        Ok(())
    }
}

/// `Ψ(t) − Ψ(s)` for `0 ≤ s ≤ t ≤ b`.
pub fn psi_increment(psi: &PsiSpec, t: f64, s: f64) -> Result<f64> {
    psi.check_in_domain(t, "t")?;
    psi.check_in_domain(s, "s")?;
    if s > t {
        return Err(Error::Domain(format!(
            "increment needs s <= t, got s = {s}, t = {t}"
        )));
    }
    if s == t {
        return Ok(0.0);
    }
    if s == 0.0 {
        return Ok(psi.offset(t));
    }
    Ok(psi.eval(t) - psi.eval(s))
}

/// The kernel `Ψ′(s) (Ψ(t) − Ψ(s))^{α−1}` of the Ψ-Riemann–Liouville
/// integral, for `0 ≤ s < t ≤ b` and `0 < α < 1`.
///
/// The kernel is singular at `s = t`. Quadrature must integrate across
/// that point analytically rather than sample it.
pub fn kernel(psi: &PsiSpec, alpha: f64, t: f64, s: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "kernel order must lie in (0, 1), got {alpha}"
        )));
    }
    psi.check_in_domain(t, "t")?;
    psi.check_in_domain(s, "s")?;
    if s == t {
        return Err(Error::Singularity(format!(
            "kernel evaluated on the diagonal s = t = {t}"
        )));
    }
    let inc = psi_increment(psi, t, s)?;
    if inc == 0.0 {
        return Err(Error::Singularity(format!(
            "psi increment vanishes between s = {s} and t = {t}"
        )));
    }
    Ok(psi.deriv(s) * inc.powf(alpha - 1.0))
}

/// `ℛ^ρ(t, 0) = (Ψ(t) − Ψ(0))^{ρ−1} / Γ(ρ)`.
pub fn rho_weight(psi: &PsiSpec, rho: f64, t: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Domain(format!("rho must lie in (0, 1], got {rho}")));
    }
    psi.check_in_domain(t, "t")?;
    if rho == 1.0 {
        return Ok(1.0);
    }
    let inc = psi.offset(t);
    if inc == 0.0 {
        return Err(Error::Singularity(format!(
            "rho weight is singular at t = {t} for rho = {rho} < 1; use the weighted representation"
        )));
    }
    Ok(inc.powf(rho - 1.0) / gamma(rho)?)
}

/// Fractional order `α ∈ (0, 1)` and type `β ∈ [0, 1]` of the Ψ-Hilfer
/// derivative. `ρ` is derived on demand and never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalOrder {
    alpha: f64,
    beta: f64,
}

impl FractionalOrder {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Domain(format!(
                "beta must lie in [0, 1], got {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `ρ = α + β − αβ`.
    pub fn rho(&self) -> f64 {
        self.alpha + self.beta - self.alpha * self.beta
    }
}

/// Unweights a stored value: `u = w / (Ψ(t) − Ψ(0))^{1−ρ}`.
///
/// Returns `None` at `t = 0` when `ρ < 1`, where `u` has no finite value.
pub fn unweight(psi_offset: f64, rho: f64, weighted: f64) -> Option<f64> {
    if rho == 1.0 {
        return Some(weighted);
    }
    if psi_offset == 0.0 {
        return None;
    }
    Some(weighted * psi_offset.powf(rho - 1.0))
}

/// `(Ψ(t) − Ψ(0))^{1−ρ}`.
pub fn weight_factor(psi_offset: f64, rho: f64) -> f64 {
    if rho == 1.0 {
        1.0
    } else {
        psi_offset.powf(1.0 - rho)
    }
}

/// Grid samples of a function held in weighted form.
///
/// Grid times are non-decreasing, start at 0 and end at `b`. A time may
/// appear twice in a row; the pair then holds the left and right limits
/// across a jump.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGridFunction {
    grid: Vec<f64>,
    weighted_values: Vec<f64>,
    rho: f64,
    psi: PsiSpec,
}

impl WeightedGridFunction {
    pub fn new(grid: Vec<f64>, weighted_values: Vec<f64>, rho: f64, psi: PsiSpec) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::Domain(
                "weighted grid function has an empty grid".into(),
            ));
        }
        if grid.len() != weighted_values.len() {
            return Err(Error::Domain(format!(
                "grid has {} nodes but {} values",
                grid.len(),
                weighted_values.len()
            )));
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::Domain(format!("rho must lie in (0, 1], got {rho}")));
        }
        if grid[0] != 0.0 || *grid.last().unwrap() != psi.b() {
            return Err(Error::Domain(format!("grid must span [0, {}]", psi.b())));
        }
        for (i, w) in grid.windows(2).enumerate() {
            if w[1] < w[0] {
                return Err(Error::Domain(format!("grid decreases at node {}", i + 1)));
            }
            if i > 0 && w[1] == w[0] && grid[i - 1] == w[0] {
                return Err(Error::Domain(format!(
                    "time {} repeated more than twice",
                    w[0]
                )));
            }
        }
        if let Some(i) = weighted_values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "weighted value at node {i} is not finite"
            )));
        }
        Ok(Self {
            grid,
            weighted_values,
            rho,
            psi,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn weighted_values(&self) -> &[f64] {
        &self.weighted_values
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn psi(&self) -> &PsiSpec {
        &self.psi
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// The unweighted value `u(tᵢ)`, or `None` at a singular origin.
    pub fn value(&self, i: usize) -> Option<f64> {
        unweight(
            self.psi.offset(self.grid[i]),
            self.rho,
            self.weighted_values[i],
        )
    }
}

/// The `PC_{1−ρ;Ψ}` norm on the grid: `max |w(tᵢ)|`.
pub fn weighted_norm(u: &WeightedGridFunction) -> Result<f64> {
    sup_abs(u.weighted_values())
}

pub(crate) fn sup_abs(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("norm of an empty grid function".into()));
    }
    Ok(values.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
}

/// Result of [`validate_psi`].
#[derive(Debug, Clone, PartialEq)]
pub struct PsiValidation {
    pub probes: usize,
    pub finite: bool,
    pub strictly_increasing: bool,
    pub positive_derivative: bool,
    pub derivative_consistent: bool,
    pub failures: Vec<String>,
}

impl PsiValidation {
    pub fn passed(&self) -> bool {
        self.finite
            && self.strictly_increasing
            && self.positive_derivative
            && self.derivative_consistent
    }
}

const FD_REL_TOL: f64 = 1e-6;

/// Probes `Ψ` at `probe_count` equally spaced points of `[0, b]`.
///
/// Checks finiteness, strict monotonicity, `Ψ′ > 0` (including at the
/// origin) and agreement of `Ψ′` with a second-order finite difference of
/// `Ψ` to relative tolerance `1e-6`. Failures are collected, not raised.
pub fn validate_psi(psi: &PsiSpec, probe_count: usize) -> Result<PsiValidation> {
    if probe_count < 2 {
        return Err(Error::Domain(format!(
            "validate_psi needs at least 2 probes, got {probe_count}"
        )));
    }
    let b = psi.b();
    let probes: Vec<f64> = (0..probe_count)
        .map(|i| {
            if i + 1 == probe_count {
                b
            } else {
                b * i as f64 / (probe_count - 1) as f64
            }
        })
        .collect();
    let values: Vec<f64> = probes.iter().map(|&t| psi.eval(t)).collect();
    let derivs: Vec<f64> = probes.iter().map(|&t| psi.deriv(t)).collect();

    let mut report = PsiValidation {
        probes: probe_count,
        finite: true,
        strictly_increasing: true,
        positive_derivative: true,
        derivative_consistent: true,
        failures: Vec::new(),
    };

    for (i, &t) in probes.iter().enumerate() {
        if !values[i].is_finite() || !derivs[i].is_finite() {
            report.finite = false;
            report
                .failures
                .push(format!("non-finite psi or psi' at t = {t}"));
        }
        if !(derivs[i] > 0.0) {
            report.positive_derivative = false;
            report
                .failures
                .push(format!("psi'({t}) = {} is not positive", derivs[i]));
        }
    }
    for i in 1..probe_count {
        if !(values[i] > values[i - 1]) {
            report.strictly_increasing = false;
            report.failures.push(format!(
                "psi not increasing between t = {} and t = {}",
                probes[i - 1],
                probes[i]
            ));
        }
    }

    let h = f64::EPSILON.cbrt() * b.max(1.0);
    for (i, &t) in probes.iter().enumerate() {
        if !derivs[i].is_finite() {
            continue;
        }
        let fd = if t - h >= 0.0 && t + h <= b {
            (psi.eval(t + h) - psi.eval(t - h)) / (2.0 * h)
        } else if t + 2.0 * h <= b {
            (-3.0 * psi.eval(t) + 4.0 * psi.eval(t + h) - psi.eval(t + 2.0 * h)) / (2.0 * h)
        } else {
            (3.0 * psi.eval(t) - 4.0 * psi.eval(t - h) + psi.eval(t - 2.0 * h)) / (2.0 * h)
        };
        let scale = derivs[i].abs().max(fd.abs());
        if !((fd - derivs[i]).abs() <= FD_REL_TOL * scale + 1e-12) {
            report.derivative_consistent = false;
            report.failures.push(format!(
                "psi'({t}) = {} disagrees with finite difference {fd}",
                derivs[i]
            ));
        }
    }
    Ok(report)
}
