//! The impulsive implicit delay problem
//!
//! ```text
//! D^{α,β;Ψ} u(t) = f(t, u(t), u(h(t)), D^{α,β;Ψ} u(t)),   t ∈ (0, b] \ {t_k}
//! Δ 𝕀^{1−ρ;Ψ} u(t_k) = 𝒥_k(u(t_k⁻))
//! 𝕀^{1−ρ;Ψ} u(0⁺) = u₀
//! u(t) = φ(t),                                              t ∈ [−r, 0]
//! ```
//!
//! and the pointwise solve of the implicit relation `g = f(t, u, v, g)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr};
use crate::psi::{FractionalOrder, PsiSpec};

/// Default tolerance of the inner implicit solve.
pub const DEFAULT_IMPLICIT_TOL: f64 = 1e-12;
/// Default iteration budget of the inner implicit solve.
pub const DEFAULT_IMPLICIT_MAX_ITER: usize = 200;

/// Lipschitz constants asserted for `f` and the impulse maps.
///
/// `|f(t,u₁,v₁,w₁) − f(t,u₂,v₂,w₂)| ≤ K (Ψ(t)−Ψ(0))^{1−ρ} (|u₁−u₂| + |v₁−v₂|) + L_f |w₁−w₂|`
/// and `|𝒥_k(u) − 𝒥_k(v)| ≤ L_{J,k} |u − v|`.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzData {
    k: f64,
    l_f: f64,
    l_j: Vec<f64>,
}

impl LipschitzData {
    pub fn new(k: f64, l_f: f64, l_j: Vec<f64>) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::config(
                "lipschitz.K",
                format!("must be positive and finite, got {k}"),
            ));
        }
        if !(l_f > 0.0 && l_f < 1.0) {
            return Err(Error::config(
                "lipschitz.L_f",
                format!("must lie in (0, 1), got {l_f}"),
            ));
        }
        if let Some((i, v)) = l_j
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
        {
            return Err(Error::config(
                format!("lipschitz.L_J[{i}]"),
                format!("must be positive and finite, got {v}"),
            ));
        }
        Ok(Self { k, l_f, l_j })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn l_f(&self) -> f64 {
        self.l_f
    }

    pub fn l_j(&self) -> &[f64] {
        &self.l_j
    }
}

/// An extra additive term `ℰ(t)` in the right-hand side.
#[derive(Clone)]
pub struct Forcing(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl Forcing {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.0)(t)
    }
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Forcing(..)")
    }
}

/// An impulse at `time` with jump map `𝒥(u) = map(u) + shift`.
#[derive(Debug, Clone)]
pub struct Impulse {
    pub time: f64,
    pub map: Expr,
    pub shift: f64,
}

/// Unvalidated parts of a problem, checked by [`ImpulsiveDelayIVP::new`].
#[derive(Debug, Clone)]
pub struct IvpParts {
    pub name: String,
    pub order: FractionalOrder,
    pub psi: PsiSpec,
    pub r: f64,
    pub rhs: Expr,
    pub delay: Expr,
    pub history: Expr,
    pub impulses: Vec<Impulse>,
    pub u0_weighted: f64,
    pub lipschitz: LipschitzData,
}

/// Number of probes used when checking the delay and history.
pub const PROBES: usize = 256;

/// A validated problem. Immutable once built.
#[derive(Debug, Clone)]
pub struct ImpulsiveDelayIVP {
    name: String,
    order: FractionalOrder,
    psi: PsiSpec,
    r: f64,
    rhs: Expr,
    delay: Expr,
    history: Expr,
    impulses: Vec<Impulse>,
    u0_weighted: f64,
    lipschitz: LipschitzData,
    forcing: Option<Forcing>,
}

impl ImpulsiveDelayIVP {
    pub fn new(parts: IvpParts) -> Result<Self> {
        let IvpParts {
            name,
            order,
            psi,
            r,
            rhs,
            delay,
            history,
            impulses,
            u0_weighted,
            lipschitz,
        } = parts;
        let b = psi.b();
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::config(
                "domain.r",
                format!("must be finite and nonnegative, got {r}"),
            ));
        }
        if !u0_weighted.is_finite() {
            return Err(Error::config("initial.u0_weighted", "must be finite"));
        }
        let mut prev = 0.0;
        for (k, imp) in impulses.iter().enumerate() {
            if !(imp.time > 0.0 && imp.time < b) {
                return Err(Error::config(
                    format!("impulses[{k}].time"),
                    format!(
                        "impulse time {} must lie strictly inside (0, {b})",
                        imp.time
                    ),
                ));
            }
            if imp.time <= prev {
                return Err(Error::config(
                    format!("impulses[{k}].time"),
                    format!(
                        "impulse times must be strictly increasing, {} follows {prev}",
                        imp.time
                    ),
                ));
            }
            if !imp.shift.is_finite() {
                return Err(Error::config(
                    format!("impulses[{k}].map"),
                    "shift is not finite",
                ));
            }
            prev = imp.time;
        }
        if lipschitz.l_j().len() != impulses.len() {
            return Err(Error::config(
                "lipschitz.L_J",
                format!(
                    "{} constants given for {} impulses",
                    lipschitz.l_j().len(),
                    impulses.len()
                ),
            ));
        }
        let ivp = Self {
            name,
            order,
            psi,
            r,
            rhs,
            delay,
            history,
            impulses,
            u0_weighted,
            lipschitz,
            forcing: None,
        };
        ivp.check_delay()?;
        ivp.check_history()?;
        Ok(ivp)
    }

    fn check_delay(&self) -> Result<()> {
        let b = self.b();
        let slack = 1e-12 * b.max(1.0);
        for i in 1..=PROBES {
            let t = b * i as f64 / PROBES as f64;
            let h = self.delay_at(t);
            if !h.is_finite() {
                return Err(Error::config("delay.expr", format!("h({t}) is not finite")));
            }
            if h > t + slack {
                return Err(Error::config(
                    "delay.expr",
                    format!("h({t}) = {h} exceeds t"),
                ));
            }
            if h < -self.r - slack {
                return Err(Error::config(
                    "delay.expr",
                    format!("h({t}) = {h} reaches before the history start -{}", self.r),
                ));
            }
        }
        Ok(())
    }

    fn check_history(&self) -> Result<()> {
        for i in 0..=PROBES {
            let t = -self.r * i as f64 / PROBES as f64;
            let v = self.history.eval(&Bindings {
                t,
                ..Default::default()
            });
            if !v.is_finite() {
                return Err(Error::config(
                    "history.expr",
                    format!("phi({t}) is not finite"),
                ));
            }
        }
        Ok(())
    }

    /// The same problem with `ℰ(t)` added to `f` and `shifts[k]` added to
    /// each impulse map.
    pub fn perturbed(&self, forcing: Forcing, shifts: &[f64]) -> Result<Self> {
        if shifts.len() != self.impulses.len() {
            return Err(Error::Domain(format!(
                "{} impulse shifts for {} impulses",
                shifts.len(),
                self.impulses.len()
            )));
        }
        let mut out = self.clone();
        out.forcing = Some(forcing);
        for (imp, s) in out.impulses.iter_mut().zip(shifts) {
            imp.shift += s;
        }
        Ok(out)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> FractionalOrder {
        self.order
    }

    pub fn psi(&self) -> &PsiSpec {
        &self.psi
    }

    pub fn b(&self) -> f64 {
        self.psi.b()
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn u0_weighted(&self) -> f64 {
        self.u0_weighted
    }

    pub fn lipschitz(&self) -> &LipschitzData {
        &self.lipschitz
    }

    pub fn impulses(&self) -> &[Impulse] {
        &self.impulses
    }

    pub fn impulse_times(&self) -> Vec<f64> {
        self.impulses.iter().map(|i| i.time).collect()
    }

    pub fn rhs_expr(&self) -> &Expr {
        &self.rhs
    }

    fn bindings(&self, t: f64) -> Bindings {
        Bindings {
            t,
            p: self.psi.offset(t),
            alpha: self.order.alpha(),
            beta: self.order.beta(),
            rho: self.order.rho(),
            ..Default::default()
        }
    }

    /// `f(t, u, v, w)`, including any forcing term.
    pub fn rhs(&self, t: f64, u: f64, u_delayed: f64, w: f64) -> f64 {
        let b = Bindings {
            u,
            ud: u_delayed,
            w,
            ..self.bindings(t)
        };
        let base = self.rhs.eval(&b);
        match &self.forcing {
            Some(e) => base + e.eval(t),
            None => base,
        }
    }

    /// `h(t)`.
    pub fn delay_at(&self, t: f64) -> f64 {
        self.delay.eval(&self.bindings(t))
    }

    /// `𝒥_k(u)`.
    pub fn impulse_jump(&self, k: usize, u: f64) -> f64 {
        let imp = &self.impulses[k];
        let b = Bindings {
            u,
            ..self.bindings(imp.time)
        };
        imp.map.eval(&b) + imp.shift
    }

    /// `φ(t)` for `t ∈ [−r, 0]`.
    pub fn history_eval(&self, t: f64) -> Result<f64> {
        if !(t <= 0.0 && t >= -self.r) {
            return Err(Error::Domain(format!(
                "history queried at t = {t}, outside [-{}, 0]",
                self.r
            )));
        }
        Ok(self.history.eval(&Bindings {
            t,
            ..Default::default()
        }))
    }
}

/// Solves `g = f(t, u, v, g)` by fixed-point iteration from
/// `g₀ = f(t, u, v, 0)`. The returned `g` satisfies `|g − f(t,u,v,g)| ≤ tol`.
pub fn solve_implicit_g(
    ivp: &ImpulsiveDelayIVP,
    t: f64,
    u: f64,
    u_delayed: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    implicit_fixed_point(|w| ivp.rhs(t, u, u_delayed, w), tol, max_iter, None)
}

/// As [`solve_implicit_g`], also returning the successive differences
/// `|g_{n+1} − g_n|`.
pub fn solve_implicit_g_traced(
    ivp: &ImpulsiveDelayIVP,
    t: f64,
    u: f64,
    u_delayed: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut trace = Vec::new();
    let g = implicit_fixed_point(
        |w| ivp.rhs(t, u, u_delayed, w),
        tol,
        max_iter,
        Some(&mut trace),
    )?;
    Ok((g, trace))
}

pub(crate) fn implicit_fixed_point(
    f: impl Fn(f64) -> f64,
    tol: f64,
    max_iter: usize,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "implicit tolerance must be positive, got {tol}"
        )));
    }
    let mut g = f(0.0);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        if !g.is_finite() {
            return Err(Error::FixedPoint {
                residual: f64::NAN,
                iterations: 0,
            });
        }
        let next = f(g);
        residual = (next - g).abs();
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(residual);
        }
        if !residual.is_finite() {
            break;
        }
        if residual <= tol {
            return Ok(g);
        }
        g = next;
    }
    Err(Error::FixedPoint {
        residual,
        iterations: max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Context;
    use proptest::prelude::*;

    fn parts(rhs: &str) -> IvpParts {
        IvpParts {
            name: "test".into(),
            order: FractionalOrder::new(0.5, 1.0).unwrap(),
            psi: PsiSpec::identity(1.0).unwrap(),
            r: 1.0,
            rhs: Expr::parse(rhs, Context::Rhs).unwrap(),
            delay: Expr::parse("t - 0.5", Context::Delay).unwrap(),
            history: Expr::parse("1 + t", Context::History).unwrap(),
            impulses: vec![],
            u0_weighted: 1.0,
            lipschitz: LipschitzData::new(0.02, 0.5, vec![]).unwrap(),
        }
    }

    fn ivp(rhs: &str) -> ImpulsiveDelayIVP {
        ImpulsiveDelayIVP::new(parts(rhs)).unwrap()
    }

    #[test]
    fn history_values_and_domain() {
        let p = ivp("0");
        assert_eq!(p.history_eval(-0.5).unwrap(), 0.5);
        assert_eq!(p.history_eval(0.0).unwrap(), 1.0);
        assert_eq!(p.history_eval(-1.0).unwrap(), 0.0);
        assert!(matches!(p.history_eval(0.1), Err(Error::Domain(_))));
        assert!(matches!(p.history_eval(-1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn implicit_independent_of_w() {
        let p = ivp("sin(t)");
        let (g, trace) = solve_implicit_g_traced(&p, 0.7, 0.0, 0.0, 1e-12, 200).unwrap();
        assert_eq!(g, 0.7f64.sin());
        assert_eq!(trace, vec![0.0]);
    }

    #[test]
    fn implicit_geometric_series() {
        let p = ivp("2 + 0.5 * w");
        let g = solve_implicit_g(&p, 0.5, 0.0, 0.0, 1e-12, 200).unwrap();
        assert!((g - 4.0).abs() < 1e-11);
    }

    #[test]
    fn implicit_paper_rhs_matches_bisection() {
        let p = ivp("P^(1-rho) / (50*exp(P)*(1+abs(u)+abs(ud))) + abs(w)/(15*(1+abs(w)))");
        let g = solve_implicit_g(&p, 0.5, 0.0, 0.0, 1e-12, 200).unwrap();
        // bisection on g − f(g) over [0, 1]
        let phi = |g: f64| g - 1.0 / (50.0 * 0.5f64.exp()) - g / (15.0 * (1.0 + g));
        let (mut lo, mut hi) = (0.0, 1.0);
        while hi - lo > 1e-14 {
            let mid = 0.5 * (lo + hi);
            if phi(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((g - lo).abs() < 1e-12, "{g} vs {lo}");
        assert!((g - 0.012985196002486495).abs() < 1e-12);
    }

    #[test]
    fn implicit_reports_nonconvergence() {
        let p = ivp("1 + 2 * w");
        match solve_implicit_g(&p, 0.5, 0.0, 0.0, 1e-12, 50) {
            Err(Error::FixedPoint {
                residual,
                iterations,
            }) => {
                assert_eq!(iterations, 50);
                assert!(residual > 1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_impulse_at_horizon() {
        let mut pp = parts("0");
        pp.impulses = vec![Impulse {
            time: 1.0,
            map: Expr::parse("0", Context::Impulse).unwrap(),
            shift: 0.0,
        }];
        pp.lipschitz = LipschitzData::new(0.02, 0.5, vec![0.1]).unwrap();
        match ImpulsiveDelayIVP::new(pp) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "impulses[0].time"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_anticipating_delay() {
        let mut pp = parts("0");
        pp.delay = Expr::parse("t + 0.1", Context::Delay).unwrap();
        assert!(
            matches!(ImpulsiveDelayIVP::new(pp), Err(Error::Config { ref field, .. }) if field == "delay.expr")
        );
        let mut pp = parts("0");
        pp.delay = Expr::parse("t - 2", Context::Delay).unwrap();
        assert!(
            matches!(ImpulsiveDelayIVP::new(pp), Err(Error::Config { ref field, .. }) if field == "delay.expr")
        );
    }

    #[test]
    fn undelayed_problem_is_allowed() {
        let mut pp = parts("0");
        pp.delay = Expr::parse("t", Context::Delay).unwrap();
        assert!(ImpulsiveDelayIVP::new(pp).is_ok());
    }

    #[test]
    fn lipschitz_validation() {
        assert!(LipschitzData::new(0.0, 0.5, vec![]).is_err());
        assert!(LipschitzData::new(1.0, 1.0, vec![]).is_err());
        assert!(LipschitzData::new(1.0, 0.5, vec![-1.0]).is_err());
        let mut pp = parts("0");
        pp.lipschitz = LipschitzData::new(0.02, 0.5, vec![0.1]).unwrap();
        assert!(
            matches!(ImpulsiveDelayIVP::new(pp), Err(Error::Config { ref field, .. }) if field == "lipschitz.L_J")
        );
    }

    #[test]
    fn perturbation_adds_forcing_and_shifts() {
        let mut pp = parts("u");
        pp.impulses = vec![Impulse {
            time: 0.5,
            map: Expr::parse("u / 2", Context::Impulse).unwrap(),
            shift: 0.0,
        }];
        pp.lipschitz = LipschitzData::new(0.02, 0.5, vec![0.5]).unwrap();
        let p = ImpulsiveDelayIVP::new(pp).unwrap();
        let q = p.perturbed(Forcing::new(|t| 10.0 * t), &[0.25]).unwrap();
        assert_eq!(q.rhs(0.5, 1.0, 0.0, 0.0), 6.0);
        assert_eq!(q.impulse_jump(0, 1.0), 0.75);
        assert_eq!(p.impulse_jump(0, 1.0), 0.5);
        assert!(p.perturbed(Forcing::new(|_| 0.0), &[]).is_err());
    }

    proptest! {
        #[test]
        fn implicit_residual_within_tol(a in -5.0f64..5.0, c in -0.9f64..0.9, tol in 1e-13f64..1e-6) {
            let p = ivp(&format!("{a:e} + {c:e} * sat(abs(w), 1) + t"));
            let g = solve_implicit_g(&p, 0.3, 0.0, 0.0, tol, 500).unwrap();
            prop_assert!((g - p.rhs(0.3, 0.0, 0.0, g)).abs() <= tol);
        }
    }
}
