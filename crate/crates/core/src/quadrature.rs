//! Product integration of the Ψ-Riemann–Liouville fractional integral
//!
//! `𝕀^{α;Ψ} g(t) = (1/Γ(α)) ∫₀ᵗ Ψ′(s) (Ψ(t) − Ψ(s))^{α−1} g(s) ds`.
//!
//! After the substitution `x = Ψ(s)` the kernel becomes `(X − x)^{α−1}`
//! with `X = Ψ(t)`. The integrand is replaced on each panel by a constant
//! or a linear function of `x`, and the remaining moments of the kernel are
//! integrated in closed form. The weak singularity at `x = X` is therefore
//! never sampled.
//!
//! Repeated grid times (left/right limits at a jump) are allowed and give
//! zero-width panels that contribute nothing.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::psi::PsiSpec;
use crate::special::gamma;

/// How the integrand is represented on each panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadratureScheme {
    /// Piecewise constant in `x = Ψ(s)`, equal to the mean of the two
    /// endpoint samples.
    ProductRectangle,
    /// Piecewise linear in `x = Ψ(s)`.
    #[default]
    ProductTrapezoid,
}

impl std::str::FromStr for QuadratureScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rect" | "rectangle" | "product-rectangle" => Ok(Self::ProductRectangle),
            "trap" | "trapezoid" | "product-trapezoid" => Ok(Self::ProductTrapezoid),
            other => Err(Error::Domain(format!(
                "unknown quadrature scheme `{other}`"
            ))),
        }
    }
}

/// `a^p − c^p` for `a ≥ c ≥ 0`, with `h = a − c` supplied separately so
/// that thin panels far from the singularity do not cancel.
fn pow_diff(a: f64, h: f64, p: f64) -> f64 {
    if h >= a {
        return a.powf(p);
    }
    -a.powf(p) * (p * (-h / a).ln_1p()).exp_m1()
}

/// Closed-form kernel moments on the panel `[x_lo, x_hi]` for the end
/// point `x_end ≥ x_hi`:
///
/// * `m0 = ∫ (x_end − x)^{α−1} dx`
/// * `m1 = ∫ (x_end − x)^{α−1} (x − x_lo) dx`
pub fn panel_moments(alpha: f64, x_end: f64, x_lo: f64, x_hi: f64) -> (f64, f64) {
    let h = x_hi - x_lo;
    if h <= 0.0 {
        return (0.0, 0.0);
    }
    let a = x_end - x_lo;
    let i0 = pow_diff(a, h, alpha) / alpha;
    let i1 = pow_diff(a, h, alpha + 1.0) / (alpha + 1.0);
    (i0, (a * i0 - i1).max(0.0))
}

/// Weights `(w_lo, w_hi)` of the two endpoint samples on one panel, before
/// the `1/Γ(α)` factor.
fn panel_weights(
    alpha: f64,
    x_end: f64,
    x_lo: f64,
    x_hi: f64,
    scheme: QuadratureScheme,
) -> (f64, f64) {
    let h = x_hi - x_lo;
    if h <= 0.0 {
        return (0.0, 0.0);
    }
    let (m0, m1) = panel_moments(alpha, x_end, x_lo, x_hi);
    match scheme {
        QuadratureScheme::ProductRectangle => (0.5 * m0, 0.5 * m0),
        QuadratureScheme::ProductTrapezoid => {
            let w_hi = m1 / h;
            ((m0 - w_hi).max(0.0), w_hi)
        }
    }
}

fn check_order(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "integral order must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// `Ψ(tᵢ) − Ψ(0)` for each grid time, after checking the grid.
pub(crate) fn transformed_grid(psi: &PsiSpec, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::Domain("empty quadrature grid".into()));
    }
    if grid[0] != 0.0 {
        return Err(Error::Domain(format!(
            "quadrature grid must start at 0, got {}",
            grid[0]
        )));
    }
    if let Some(i) = grid.windows(2).position(|w| !(w[1] >= w[0])) {
        return Err(Error::Domain(format!(
            "quadrature grid decreases at node {}",
            i + 1
        )));
    }
    let last = *grid.last().unwrap();
    if last > psi.b() {
        return Err(Error::Domain(format!(
            "quadrature grid ends at {last}, beyond b = {}",
            psi.b()
        )));
    }
    Ok(grid.iter().map(|&t| psi.offset(t)).collect())
}

fn check_samples(g: &[f64], upto: usize) -> Result<()> {
    if let Some(i) = g[..=upto].iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "integrand sample at node {i} is not finite"
        )));
    }
    Ok(())
}

/// Row `j` of the weight matrix (already divided by `Γ(α)`).
fn row_weights(
    alpha: f64,
    xs: &[f64],
    j: usize,
    scheme: QuadratureScheme,
    inv_gamma: f64,
    out: &mut [f64],
) {
    out.iter_mut().for_each(|w| *w = 0.0);
    let x_end = xs[j];
    for i in 0..j {
        let (lo, hi) = panel_weights(alpha, x_end, xs[i], xs[i + 1], scheme);
        out[i] += lo * inv_gamma;
        out[i + 1] += hi * inv_gamma;
    }
}

/// `𝕀^{α;Ψ} g(t_j)` from samples of `g` at `grid[0..=j]`.
pub fn frac_integral_at(
    alpha: f64,
    psi: &PsiSpec,
    grid: &[f64],
    g: &[f64],
    j: usize,
    scheme: QuadratureScheme,
) -> Result<f64> {
    check_order(alpha)?;
    let xs = transformed_grid(psi, grid)?;
    if j >= grid.len() || g.len() <= j {
        return Err(Error::Domain(format!(
            "node index {j} out of range for {} nodes and {} samples",
            grid.len(),
            g.len()
        )));
    }
    check_samples(g, j)?;
    if j == 0 {
        return Ok(0.0);
    }
    let inv_gamma = 1.0 / gamma(alpha)?;
    let mut w = vec![0.0; j + 1];
    row_weights(alpha, &xs, j, scheme, inv_gamma, &mut w);
    Ok(w.iter().zip(g).map(|(w, g)| w * g).sum())
}

/// `𝕀^{α;Ψ} g` at every grid node.
pub fn frac_integral_profile(
    alpha: f64,
    psi: &PsiSpec,
    grid: &[f64],
    g: &[f64],
    scheme: QuadratureScheme,
) -> Result<Vec<f64>> {
    let op = FracIntegralOperator::new(alpha, psi, grid, scheme)?;
    op.apply(g)
}

/// Entries above which rows are recomputed on every application instead
/// of being cached.
const CACHE_LIMIT: usize = 1 << 23;

/// The fractional integral as a lower-triangular matrix on a fixed grid.
///
/// Rows are cached when the grid is small enough. Each row is summed in
/// index order, so results do not depend on thread scheduling.
#[derive(Debug, Clone)]
pub struct FracIntegralOperator {
    alpha: f64,
    scheme: QuadratureScheme,
    xs: Vec<f64>,
    inv_gamma: f64,
    /// Row `j` occupies `rows[j*(j+1)/2 .. (j+1)*(j+2)/2]`.
    rows: Option<Vec<f64>>,
}

impl FracIntegralOperator {
    pub fn new(alpha: f64, psi: &PsiSpec, grid: &[f64], scheme: QuadratureScheme) -> Result<Self> {
        check_order(alpha)?;
        let xs = transformed_grid(psi, grid)?;
        Self::from_transformed(alpha, xs, scheme)
    }

    /// Builds the operator from already transformed nodes `Ψ(tᵢ) − Ψ(0)`.
    pub fn from_transformed(alpha: f64, xs: Vec<f64>, scheme: QuadratureScheme) -> Result<Self> {
        check_order(alpha)?;
        let inv_gamma = 1.0 / gamma(alpha)?;
        let n = xs.len();
        let total = n * (n + 1) / 2;
        let rows = (total <= CACHE_LIMIT).then(|| {
            let mut rows = vec![0.0; total];
            let mut chunks: Vec<&mut [f64]> = Vec::with_capacity(n);
            let mut rest = rows.as_mut_slice();
            for j in 0..n {
                let (head, tail) = rest.split_at_mut(j + 1);
                chunks.push(head);
                rest = tail;
            }
            chunks
                .into_par_iter()
                .enumerate()
                .for_each(|(j, row)| row_weights(alpha, &xs, j, scheme, inv_gamma, row));
            rows
        });
        Ok(Self {
            alpha,
            scheme,
            xs,
            inv_gamma,
            rows,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scheme(&self) -> QuadratureScheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    fn row_value(&self, g: &[f64], j: usize) -> f64 {
        match &self.rows {
            Some(rows) => {
                let start = j * (j + 1) / 2;
                rows[start..=start + j]
                    .iter()
                    .zip(g)
                    .map(|(w, g)| w * g)
                    .sum()
            }
            None => {
                let mut w = vec![0.0; j + 1];
                row_weights(self.alpha, &self.xs, j, self.scheme, self.inv_gamma, &mut w);
                w.iter().zip(g).map(|(w, g)| w * g).sum()
            }
        }
    }

    /// `𝕀^{α;Ψ} g` at node `j`.
    pub fn apply_at(&self, g: &[f64], j: usize) -> Result<f64> {
        if g.len() != self.xs.len() || j >= self.xs.len() {
            return Err(Error::Domain(format!(
                "operator on {} nodes applied to {} samples at node {j}",
                self.xs.len(),
                g.len()
            )));
        }
        check_samples(g, j)?;
        Ok(self.row_value(g, j))
    }

    /// `𝕀^{α;Ψ} g` at every node.
    pub fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        if g.len() != self.xs.len() {
            return Err(Error::Domain(format!(
                "operator on {} nodes applied to {} samples",
                self.xs.len(),
                g.len()
            )));
        }
        check_samples(g, g.len() - 1)?;
        Ok((0..g.len())
            .into_par_iter()
            .map(|j| self.row_value(g, j))
            .collect())
    }
}
