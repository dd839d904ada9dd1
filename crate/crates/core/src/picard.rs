//! Picard iteration on the equivalent integral equation
//!
//! ```text
//! u(t) = ℛ(t) (u₀ + Σ_{t_k < t} 𝒥_k(u(t_k⁻))) + 𝕀^{α;Ψ} g_u(t),
//! g_u(t) = f(t, u(t), u(h(t)), g_u(t)),   ℛ(t) = (Ψ(t) − Ψ(0))^{ρ−1} / Γ(ρ)
//! ```
//!
//! held in weighted form `w = (Ψ(t) − Ψ(0))^{1−ρ} u`, in which it reads
//! `w = (u₀ + Σ 𝒥_k)/Γ(ρ) + (Ψ(t) − Ψ(0))^{1−ρ} 𝕀^{α;Ψ} g_u`.
//!
//! Every impulse time is a grid node and appears twice: a left slot for
//! `u(t_k⁻)` and a right slot for `u(t_k⁺)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problem::{implicit_fixed_point, ImpulsiveDelayIVP};
use crate::psi::{unweight, weight_factor, PsiSpec, WeightedGridFunction};
use crate::quadrature::{FracIntegralOperator, QuadratureScheme};
use crate::special::gamma;

/// How the base nodes are spread over `[0, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridKind {
    /// Equal steps in `t`.
    #[default]
    UniformT,
    /// Equal steps in `Ψ(t)`.
    UniformPsi,
}

impl std::str::FromStr for GridKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-t" | "t" => Ok(Self::UniformT),
            "uniform-psi" | "psi" => Ok(Self::UniformPsi),
            other => Err(Error::Domain(format!("unknown grid kind `{other}`"))),
        }
    }
}

/// `n` base intervals of the given kind. Impulse times are added on top.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub n: usize,
    pub kind: GridKind,
}

impl GridSpec {
    pub fn uniform_t(n: usize) -> Self {
        Self {
            n,
            kind: GridKind::UniformT,
        }
    }

    pub fn uniform_psi(n: usize) -> Self {
        Self {
            n,
            kind: GridKind::UniformPsi,
        }
    }
}

/// Base node closer than this (relative to `b`) to an impulse time is moved onto it.
const SNAP_REL: f64 = 1e-12;

/// Inverts `t ↦ Ψ(t) − Ψ(0)` on `[0, b]` by bisection.
fn invert_offset(psi: &PsiSpec, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, psi.b());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if psi.offset(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Indices of the left and right slots of one impulse.
pub type ImpulseSlots = (usize, usize);

/// Slot times and, per impulse, the `(left, right)` slot pair.
pub fn build_slots(
    psi: &PsiSpec,
    impulse_times: &[f64],
    spec: GridSpec,
) -> Result<(Vec<f64>, Vec<ImpulseSlots>)> {
    if spec.n == 0 {
        return Err(Error::Domain("grid needs at least one interval".into()));
    }
    let b = psi.b();
    let n = spec.n;
    let mut base: Vec<f64> = match spec.kind {
        GridKind::UniformT => (0..=n).map(|i| b * i as f64 / n as f64).collect(),
        GridKind::UniformPsi => {
            let total = psi.offset(b);
            (0..=n)
                .map(|i| invert_offset(psi, total * i as f64 / n as f64))
                .collect()
        }
    };
    base[0] = 0.0;
    base[n] = b;
    let mut times = Vec::with_capacity(base.len() + 2 * impulse_times.len());
    let mut pairs = Vec::with_capacity(impulse_times.len());
    let mut k = 0;
    let mut i = 0;
    while i < base.len() {
        let t = base[i];
        if k < impulse_times.len() {
            let tk = impulse_times[k];
            if (t - tk).abs() <= SNAP_REL * b || t > tk {
                let snapped = (t - tk).abs() <= SNAP_REL * b;
                let left = times.len();
                times.push(tk);
                times.push(tk);
                pairs.push((left, left + 1));
                k += 1;
                if snapped {
                    i += 1;
                }
                continue;
            }
        }
        times.push(t);
        i += 1;
    }
    if k != impulse_times.len() {
        return Err(Error::Domain(format!(
            "impulse time {} lies outside the grid",
            impulse_times[k]
        )));
    }
    Ok((times, pairs))
}

/// Knobs of [`picard_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub grid: GridSpec,
    pub scheme: QuadratureScheme,
    /// Stop once the weighted sup-norm change of a sweep is at most `tol`.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Absolute tolerance of the pointwise implicit solve.
    pub inner_tol: f64,
    pub inner_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            grid: GridSpec::uniform_t(512),
            scheme: QuadratureScheme::default(),
            tol: 1e-12,
            max_sweeps: 200,
            inner_tol: 1e-14,
            inner_max_iter: 200,
        }
    }
}

/// Grid, quadrature and impulse bookkeeping shared by all sweeps.
#[derive(Debug, Clone)]
pub struct Discretization {
    slots: Vec<f64>,
    offsets: Vec<f64>,
    weights: Vec<f64>,
    pairs: Vec<(usize, usize)>,
    op: FracIntegralOperator,
    rho: f64,
    gamma_rho: f64,
}

/// Output of one application of the solution operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub weighted: Vec<f64>,
    pub g: Vec<f64>,
    pub impulse_sums: Vec<f64>,
}

impl Discretization {
    pub fn new(ivp: &ImpulsiveDelayIVP, grid: GridSpec, scheme: QuadratureScheme) -> Result<Self> {
        let (slots, pairs) = build_slots(ivp.psi(), &ivp.impulse_times(), grid)?;
        Self::from_slots(ivp, slots, pairs, scheme)
    }

    fn from_slots(
        ivp: &ImpulsiveDelayIVP,
        slots: Vec<f64>,
        pairs: Vec<(usize, usize)>,
        scheme: QuadratureScheme,
    ) -> Result<Self> {
        let psi = ivp.psi();
        let rho = ivp.order().rho();
        let offsets: Vec<f64> = slots.iter().map(|&t| psi.offset(t)).collect();
        let weights = offsets.iter().map(|&x| weight_factor(x, rho)).collect();
        let op =
            FracIntegralOperator::from_transformed(ivp.order().alpha(), offsets.clone(), scheme)?;
        Ok(Self {
            slots,
            offsets,
            weights,
            pairs,
            op,
            rho,
            gamma_rho: gamma(rho)?,
        })
    }

    pub fn slots(&self) -> &[f64] {
        &self.slots
    }

    pub fn impulse_pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// The weighted constant `u₀/Γ(ρ)`.
    pub fn initial_iterate(&self, ivp: &ImpulsiveDelayIVP) -> Vec<f64> {
        vec![ivp.u0_weighted() / self.gamma_rho; self.slots.len()]
    }

    fn u_at_slot(&self, w: &[f64], i: usize) -> Option<f64> {
        unweight(self.offsets[i], self.rho, w[i])
    }

    /// `u(s)` for the iterate `w`; `left` picks the left limit when `s`
    /// is an impulse time.
    fn lookup(&self, ivp: &ImpulsiveDelayIVP, w: &[f64], s: f64, left: bool) -> Result<f64> {
        if s <= 0.0 {
            return ivp.history_eval(s);
        }
        let j = self.slots.partition_point(|&x| x < s);
        if j >= self.slots.len() {
            return Err(Error::Domain(format!("lookup at {s} beyond the grid")));
        }
        let psi_s = ivp.psi().offset(s);
        let wv = if self.slots[j] == s {
            let dup = j + 1 < self.slots.len() && self.slots[j + 1] == s;
            if dup && !left {
                w[j + 1]
            } else {
                w[j]
            }
        } else {
            let (t0, t1) = (self.slots[j - 1], self.slots[j]);
            let lam = (s - t0) / (t1 - t0);
            w[j - 1] + lam * (w[j] - w[j - 1])
        };
        unweight(psi_s, self.rho, wv)
            .ok_or_else(|| Error::Singularity(format!("u({s}) is unbounded")))
    }

    /// One application of the solution operator to the weighted iterate `w`.
    pub fn apply(
        &self,
        ivp: &ImpulsiveDelayIVP,
        w: &[f64],
        inner_tol: f64,
        inner_max_iter: usize,
    ) -> Result<Sweep> {
        let n = self.slots.len();
        if w.len() != n {
            return Err(Error::Domain(format!(
                "iterate has {} values for {n} slots",
                w.len()
            )));
        }
        let singular_origin = self.rho < 1.0;
        let results: Vec<Result<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                if i == 0 && singular_origin {
                    return Ok(0.0);
                }
                let t = self.slots[i];
                let u = self
                    .u_at_slot(w, i)
                    .expect("finite weight away from a singular origin");
                let s = ivp.delay_at(t);
                let ud = if s == t {
                    u
                } else {
                    self.lookup(ivp, w, s, true)?
                };
                implicit_fixed_point(|g| ivp.rhs(t, u, ud, g), inner_tol, inner_max_iter, None)
            })
            .collect();
        let mut g = Vec::with_capacity(n);
        for (i, r) in results.into_iter().enumerate() {
            g.push(r.map_err(|e| e.at_node(i, self.slots[i]))?);
        }
        if singular_origin && n > 1 {
            // g has no value at a singular origin; carry the first interior sample back
            g[0] = g[1];
        }

        let integral = self.op.apply(&g)?;

        let mut impulse_sums = vec![0.0; n];
        let mut acc = 0.0;
        let mut next_pair = 0;
        for (i, sum) in impulse_sums.iter_mut().enumerate() {
            while next_pair < self.pairs.len() && self.pairs[next_pair].1 == i {
                let (left, _) = self.pairs[next_pair];
                let u_left = self.u_at_slot(w, left).ok_or_else(|| {
                    Error::Singularity("impulse at the origin".into())
                        .at_node(left, self.slots[left])
                })?;
                acc += ivp.impulse_jump(next_pair, u_left);
                next_pair += 1;
            }
            *sum = acc;
        }

        let u0 = ivp.u0_weighted();
        let weighted: Vec<f64> = (0..n)
            .map(|i| (u0 + impulse_sums[i]) / self.gamma_rho + self.weights[i] * integral[i])
            .collect();
        if let Some(i) = weighted.iter().position(|v| !v.is_finite()) {
            return Err(
                Error::Overflow("weighted iterate is not finite".into()).at_node(i, self.slots[i])
            );
        }
        Ok(Sweep {
            weighted,
            g,
            impulse_sums,
        })
    }
}

/// A discrete solution in weighted form with its Picard history.
#[derive(Debug, Clone)]
pub struct GridSolution {
    ivp: ImpulsiveDelayIVP,
    weighted: WeightedGridFunction,
    g_values: Vec<f64>,
    impulse_contributions: Vec<f64>,
    impulse_pairs: Vec<(usize, usize)>,
    deltas: Vec<f64>,
}

impl GridSolution {
    fn assemble(
        ivp: &ImpulsiveDelayIVP,
        disc: &Discretization,
        sweep: Sweep,
        deltas: Vec<f64>,
    ) -> Result<Self> {
        let weighted = WeightedGridFunction::new(
            disc.slots.clone(),
            sweep.weighted,
            disc.rho,
            ivp.psi().clone(),
        )?;
        Ok(Self {
            ivp: ivp.clone(),
            weighted,
            g_values: sweep.g,
            impulse_contributions: sweep.impulse_sums,
            impulse_pairs: disc.pairs.clone(),
            deltas,
        })
    }

    pub fn ivp(&self) -> &ImpulsiveDelayIVP {
        &self.ivp
    }

    pub fn grid(&self) -> &[f64] {
        self.weighted.grid()
    }

    pub fn weighted(&self) -> &WeightedGridFunction {
        &self.weighted
    }

    pub fn weighted_values(&self) -> &[f64] {
        self.weighted.weighted_values()
    }

    pub fn g_values(&self) -> &[f64] {
        &self.g_values
    }

    /// `Σ_{t_k < t} 𝒥_k(u(t_k⁻))` at each slot.
    pub fn impulse_contributions(&self) -> &[f64] {
        &self.impulse_contributions
    }

    /// `(left, right)` slot indices per impulse.
    pub fn impulse_pairs(&self) -> &[(usize, usize)] {
        &self.impulse_pairs
    }

    /// Weighted sup-norm change of each sweep.
    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn sweeps(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_impulse_left(&self, i: usize) -> bool {
        self.impulse_pairs.iter().any(|p| p.0 == i)
    }

    pub fn is_impulse_right(&self, i: usize) -> bool {
        self.impulse_pairs.iter().any(|p| p.1 == i)
    }

    /// `u(tᵢ)` at slot `i`; `None` at a singular origin.
    pub fn u_value(&self, i: usize) -> Option<f64> {
        self.weighted.value(i)
    }

    fn weighted_interp(&self, t: f64, left: bool) -> Result<f64> {
        let grid = self.grid();
        let w = self.weighted_values();
        let b = self.ivp.b();
        if !(t >= 0.0 && t <= b) {
            return Err(Error::Domain(format!("t = {t} lies outside [0, {b}]")));
        }
        let j = grid.partition_point(|&x| x < t);
        if grid[j] == t {
            let dup = j + 1 < grid.len() && grid[j + 1] == t;
            return Ok(if dup && !left { w[j + 1] } else { w[j] });
        }
        let (t0, t1) = (grid[j - 1], grid[j]);
        Ok(w[j - 1] + (t - t0) / (t1 - t0) * (w[j] - w[j - 1]))
    }

    /// Weighted value at `t ∈ [0, b]`, right limit at impulse times.
    pub fn weighted_at(&self, t: f64) -> Result<f64> {
        self.weighted_interp(t, false)
    }

    /// Weighted value at `t ∈ [0, b]`, left limit at impulse times.
    pub fn weighted_at_left(&self, t: f64) -> Result<f64> {
        self.weighted_interp(t, true)
    }

    fn unweighted(&self, t: f64, w: f64) -> Result<f64> {
        unweight(self.ivp.psi().offset(t), self.weighted.rho(), w)
            .ok_or_else(|| Error::Singularity(format!("u is unbounded at t = {t}")))
    }

    /// `u(t)` for `t ∈ [−r, b]`: the history for `t ≤ 0`, otherwise the
    /// unweighted linear interpolant of the weighted values. Returns the
    /// right limit at impulse times.
    pub fn solution_at(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return self.ivp.history_eval(t);
        }
        self.unweighted(t, self.weighted_at(t)?)
    }

    /// As [`solution_at`](Self::solution_at), with the left limit at impulse times.
    pub fn solution_at_left(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return self.ivp.history_eval(t);
        }
        self.unweighted(t, self.weighted_at_left(t)?)
    }

    /// `u(b)`.
    pub fn final_value(&self) -> f64 {
        let last = self.grid().len() - 1;
        self.u_value(last).expect("b > 0")
    }
}

/// One application of the solution operator to `current`, on its own grid.
pub fn apply_t(
    ivp: &ImpulsiveDelayIVP,
    current: &GridSolution,
    scheme: QuadratureScheme,
    inner_tol: f64,
    inner_max_iter: usize,
) -> Result<GridSolution> {
    let disc = Discretization::from_slots(
        ivp,
        current.grid().to_vec(),
        current.impulse_pairs.clone(),
        scheme,
    )?;
    let sweep = disc.apply(ivp, current.weighted_values(), inner_tol, inner_max_iter)?;
    let delta = sup_diff(&sweep.weighted, current.weighted_values());
    let mut deltas = current.deltas.clone();
    deltas.push(delta);
    GridSolution::assemble(ivp, &disc, sweep, deltas)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Iterates the solution operator from the weighted constant `u₀/Γ(ρ)`
/// until a sweep changes the weighted values by at most `opts.tol`.
pub fn picard_solve(ivp: &ImpulsiveDelayIVP, opts: &SolverOptions) -> Result<GridSolution> {
    let disc = Discretization::new(ivp, opts.grid, opts.scheme)?;
    picard_solve_on(ivp, &disc, opts)
}

/// [`picard_solve`] on a prepared discretization.
pub fn picard_solve_on(
    ivp: &ImpulsiveDelayIVP,
    disc: &Discretization,
    opts: &SolverOptions,
) -> Result<GridSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    if opts.max_sweeps == 0 {
        return Err(Error::Domain("max_sweeps must be positive".into()));
    }
    let lip = ivp.lipschitz();
    let l = crate::analysis::contraction_constant(
        ivp.order(),
        ivp.psi(),
        ivp.b(),
        lip.k(),
        lip.l_f(),
        lip.l_j(),
    )?;
    if l >= 1.0 {
        log::warn!(
            "contraction constant L = {l:.4} is not below 1 for `{}`; iterating anyway without a convergence guarantee",
            ivp.name()
        );
    }
    let mut w = disc.initial_iterate(ivp);
    let mut deltas = Vec::new();
    for sweep_no in 1..=opts.max_sweeps {
        let sweep = disc.apply(ivp, &w, opts.inner_tol, opts.inner_max_iter)?;
        let delta = sup_diff(&sweep.weighted, &w);
        deltas.push(delta);
        log::debug!("sweep {sweep_no}: delta = {delta:e}");
        if delta <= opts.tol {
            return GridSolution::assemble(ivp, disc, sweep, deltas);
        }
        w = sweep.weighted;
    }
    Err(Error::NonConvergence { deltas })
}

/// One row of a grid-refinement study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementRow {
    pub n: usize,
    pub u_end: f64,
    pub weighted_end: f64,
    /// `|u_end − u_end(previous row)|`; NaN on the first row.
    pub change: f64,
    pub sweeps: usize,
}

/// Solves on `n₀, 2n₀, …` (`levels` grids) and tabulates `u(b)`.
pub fn convergence_study(
    ivp: &ImpulsiveDelayIVP,
    opts: &SolverOptions,
    levels: usize,
) -> Result<Vec<RefinementRow>> {
    let mut rows: Vec<RefinementRow> = Vec::with_capacity(levels);
    let mut n = opts.grid.n;
    for _ in 0..levels {
        let o = SolverOptions {
            grid: GridSpec { n, ..opts.grid },
            ..*opts
        };
        let sol = picard_solve(ivp, &o)?;
        let u_end = sol.final_value();
        let change = rows.last().map_or(f64::NAN, |r| (u_end - r.u_end).abs());
        rows.push(RefinementRow {
            n,
            u_end,
            weighted_end: *sol.weighted_values().last().unwrap(),
            change,
            sweeps: sol.sweeps(),
        });
        n *= 2;
    }
    Ok(rows)
}
