//! Contraction and stability constants, the impulsive Ψ-Gronwall bound and
//! an empirical check of the Ulam–Hyers–Mittag–Leffler envelope.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::picard::{picard_solve_on, Discretization, SolverOptions};
use crate::problem::{Forcing, ImpulsiveDelayIVP};
use crate::psi::{FractionalOrder, PsiSpec};
use crate::quadrature::panel_moments;
use crate::special::{gamma, ml};

fn check_constants(psi: &PsiSpec, b: f64, k: f64, l_f: f64, l_j: &[f64]) -> Result<()> {
    if !(l_f > 0.0 && l_f < 1.0) {
        return Err(Error::Domain(format!("L_f must lie in (0, 1), got {l_f}")));
    }
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::Domain(format!(
            "K must be finite and nonnegative, got {k}"
        )));
    }
    if let Some(v) = l_j.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!(
            "impulse Lipschitz constants must be nonnegative, got {v}"
        )));
    }
    if !(b > 0.0 && b <= psi.b()) {
        return Err(Error::Domain(format!(
            "b = {b} must lie in (0, {}]",
            psi.b()
        )));
    }
    Ok(())
}

/// `ℒ = Σ L_{J,k}/Γ(ρ) + 2K (Ψ(b)−Ψ(0))^{1−ρ+α} / ((1−L_f) Γ(α+1))`.
pub fn contraction_constant(
    order: FractionalOrder,
    psi: &PsiSpec,
    b: f64,
    k: f64,
    l_f: f64,
    l_j: &[f64],
) -> Result<f64> {
    check_constants(psi, b, k, l_f, l_j)?;
    let (alpha, rho) = (order.alpha(), order.rho());
    let pb = psi.offset(b);
    let impulses: f64 = l_j.iter().sum::<f64>() / gamma(rho)?;
    let rhs = 2.0 * k * pb.powf(1.0 - rho + alpha) / ((1.0 - l_f) * gamma(alpha + 1.0)?);
    Ok(impulses + rhs)
}

/// Which `ζ` enters the Mittag–Leffler envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZetaVariant {
    /// `2K (Ψ(b)−Ψ(0))^{1−ρ} / (1−L_f)`, as carried through the derivation.
    #[default]
    Derived,
    /// `2 (Ψ(b)−Ψ(0))^{1−ρ} / (1−L_f)`, as printed in the constants block.
    AsStated,
}

impl ZetaVariant {
    pub fn name(self) -> &'static str {
        match self {
            ZetaVariant::Derived => "derived",
            ZetaVariant::AsStated => "as-stated",
        }
    }
}

impl FromStr for ZetaVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "derived" => Ok(Self::Derived),
            "as-stated" => Ok(Self::AsStated),
            other => Err(Error::Domain(format!("unknown zeta variant `{other}`"))),
        }
    }
}

/// Echo of the asserted constants with the verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypotheses {
    pub k: f64,
    pub l_f: f64,
    pub l_j: Vec<f64>,
    /// `K > 0` and `0 < L_f < 1`.
    pub h1_ok: bool,
    /// Every `L_{J,k} > 0`.
    pub h2_ok: bool,
    /// `ℒ < 1`.
    pub h3_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCertificate {
    pub l_contraction: f64,
    pub zeta_derived: f64,
    pub zeta_as_stated: f64,
    pub c_p_e_alpha: f64,
    /// `C_{p,E_α} E_α(ζ (Ψ(b)−Ψ(0))^α)` for `zeta_variant`.
    pub c_f: f64,
    pub zeta_variant: ZetaVariant,
    pub hypotheses: Hypotheses,
    /// The number `m` bounding `Σ|ℰ_k| ≤ mε`; set to the impulse count.
    pub m_convention: usize,
    alpha: f64,
    pb: f64,
}

impl StabilityCertificate {
    pub fn is_contractive(&self) -> bool {
        self.l_contraction < 1.0
    }

    pub fn zeta(&self, variant: ZetaVariant) -> f64 {
        match variant {
            ZetaVariant::Derived => self.zeta_derived,
            ZetaVariant::AsStated => self.zeta_as_stated,
        }
    }

    /// `C_f` for either variant.
    pub fn c_f_for(&self, variant: ZetaVariant) -> Result<f64> {
        Ok(self.c_p_e_alpha * ml(self.alpha, self.zeta(variant) * self.pb.powf(self.alpha))?)
    }

    /// `C_{p,E_α} E_α(ζ (Ψ(t)−Ψ(0))^α)` at the offset `x = Ψ(t)−Ψ(0)`.
    pub fn envelope(&self, variant: ZetaVariant, x: f64) -> Result<f64> {
        Ok(self.c_p_e_alpha * ml(self.alpha, self.zeta(variant) * x.powf(self.alpha))?)
    }

    /// Key = value rendering with full precision.
    pub fn render(&self) -> String {
        let h = &self.hypotheses;
        let lj: Vec<String> = h.l_j.iter().map(|v| format!("{v:.16e}")).collect();
        let verdict = if self.is_contractive() {
            "CONTRACTIVE"
        } else {
            "NOT-CONTRACTIVE"
        };
        format!(
            "L_contraction={:.16e}\nverdict={verdict}\nzeta_derived={:.16e}\nzeta_as_stated={:.16e}\n\
             C_p_E_alpha={:.16e}\nC_f={:.16e}\nzeta_variant={}\nm_convention={}\n\
             K={:.16e}\nL_f={:.16e}\nL_J=[{}]\nH1={}\nH2={}\nH3={}\n",
            self.l_contraction,
            self.zeta_derived,
            self.zeta_as_stated,
            self.c_p_e_alpha,
            self.c_f,
            self.zeta_variant.name(),
            self.m_convention,
            h.k,
            h.l_f,
            lj.join(","),
            verdict_word(h.h1_ok),
            verdict_word(h.h2_ok),
            verdict_word(h.h3_ok),
        )
    }
}

fn verdict_word(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "violated"
    }
}

/// The constants of the stability theorem for `p` impulses.
#[allow(clippy::too_many_arguments)]
pub fn stability_constants(
    order: FractionalOrder,
    psi: &PsiSpec,
    b: f64,
    k: f64,
    l_f: f64,
    l_j: &[f64],
    p: usize,
    variant: ZetaVariant,
) -> Result<StabilityCertificate> {
    let l_contraction = contraction_constant(order, psi, b, k, l_f, l_j)?;
    let (alpha, rho) = (order.alpha(), order.rho());
    let pb = psi.offset(b);
    let g_rho = gamma(rho)?;
    let zeta_as_stated = 2.0 * pb.powf(1.0 - rho) / (1.0 - l_f);
    let zeta_derived = k * zeta_as_stated;
    let m = p;
    let l_max = l_j.iter().copied().fold(0.0_f64, f64::max);
    let lead = m as f64 / g_rho + pb.powf(1.0 - rho) * ml(alpha, pb.powf(alpha))?;
    let brace =
        1.0 + l_max / g_rho * ml(alpha, 2.0 * k * pb.powf(1.0 - rho + alpha) / (1.0 - l_f))?;
    let c_p_e_alpha = lead * brace.powi(p as i32);
    let mut cert = StabilityCertificate {
        l_contraction,
        zeta_derived,
        zeta_as_stated,
        c_p_e_alpha,
        c_f: 0.0,
        zeta_variant: variant,
        hypotheses: Hypotheses {
            k,
            l_f,
            l_j: l_j.to_vec(),
            h1_ok: k > 0.0 && l_f > 0.0 && l_f < 1.0,
            h2_ok: l_j.iter().all(|v| *v > 0.0),
            h3_ok: l_contraction < 1.0,
        },
        m_convention: m,
        alpha,
        pb,
    };
    cert.c_f = cert.c_f_for(variant)?;
    Ok(cert)
}

/// Certificate for a problem's own constants.
pub fn certify(ivp: &ImpulsiveDelayIVP, variant: ZetaVariant) -> Result<StabilityCertificate> {
    let lip = ivp.lipschitz();
    stability_constants(
        ivp.order(),
        ivp.psi(),
        ivp.b(),
        lip.k(),
        lip.l_f(),
        lip.l_j(),
        ivp.impulses().len(),
        variant,
    )
}

fn interp(grid: &[f64], values: &[f64], t: f64) -> Result<f64> {
    if grid.len() != values.len() || grid.is_empty() {
        return Err(Error::Domain("grid and samples differ in length".into()));
    }
    if !(t >= grid[0] && t <= *grid.last().unwrap()) {
        return Err(Error::Domain(format!(
            "t = {t} lies outside the sample grid"
        )));
    }
    let j = grid.partition_point(|&x| x < t);
    if grid[j] == t {
        return Ok(values[j]);
    }
    let lam = (t - grid[j - 1]) / (grid[j] - grid[j - 1]);
    Ok(values[j - 1] + lam * (values[j] - values[j - 1]))
}

/// The bound `V(t) Π_{t_i<t} {1 + β_i E_α(g(t)Γ(α)(Ψ(t_i)−Ψ(0))^α)} E_α(g(t)Γ(α)(Ψ(t)−Ψ(0))^α)`
/// for any `U ≤ V + g ∫₀ᵗ Ψ′(s)(Ψ(t)−Ψ(s))^{α−1} U(s) ds + Σ_{t_k<t} β_k U(t_k⁻)`.
///
/// `V` and `g` are sampled on `grid` and interpolated linearly.
#[allow(clippy::too_many_arguments)]
pub fn gronwall_bound(
    v: &[f64],
    g_coeff: &[f64],
    grid: &[f64],
    beta: &[f64],
    impulse_times: &[f64],
    alpha: f64,
    psi: &PsiSpec,
    t: f64,
) -> Result<f64> {
    if let Some(x) = v.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::Domain(format!("V must be nonnegative, got {x}")));
    }
    if beta.len() != impulse_times.len() {
        return Err(Error::Domain(
            "one beta per impulse time is required".into(),
        ));
    }
    if let Some(x) = beta.iter().find(|x| !(**x > 0.0)) {
        return Err(Error::Domain(format!(
            "impulse coefficients must be positive, got {x}"
        )));
    }
    let vt = interp(grid, v, t)?;
    let gt = interp(grid, g_coeff, t)?;
    let c = gt * gamma(alpha)?;
    let mut prod = 1.0;
    for (&ti, &bi) in impulse_times.iter().zip(beta) {
        if ti < t {
            prod *= 1.0 + bi * ml(alpha, c * psi.offset(ti).powf(alpha))?;
        }
    }
    Ok(vt * prod * ml(alpha, c * psi.offset(t).powf(alpha))?)
}

/// Forward substitution of the Gronwall inequality taken with equality.
///
/// The integral uses left-endpoint product weights and `U(t_k⁻)` is the
/// value at the last node before `t_k`. For nondecreasing `V, g ≥ 0` the
/// exact solution is nondecreasing, so both choices under-estimate it and
/// the result is a lower bound for the worst case the lemma must dominate.
pub fn gronwall_worst_case(
    v: &[f64],
    g_coeff: &[f64],
    grid: &[f64],
    beta: &[f64],
    impulse_times: &[f64],
    alpha: f64,
    psi: &PsiSpec,
) -> Result<Vec<f64>> {
    let n = grid.len();
    if v.len() != n || g_coeff.len() != n || beta.len() != impulse_times.len() {
        return Err(Error::Domain("inconsistent sample lengths".into()));
    }
    let xs: Vec<f64> = grid.iter().map(|&t| psi.offset(t)).collect();
    let mut u = vec![0.0; n];
    for j in 0..n {
        let mut integral = 0.0;
        for i in 0..j {
            let (m0, _) = panel_moments(alpha, xs[j], xs[i], xs[i + 1]);
            integral += m0 * u[i];
        }
        let mut jumps = 0.0;
        for (&tk, &bk) in impulse_times.iter().zip(beta) {
            if tk < grid[j] {
                let last_before = grid.partition_point(|&x| x < tk).saturating_sub(1);
                jumps += bk * u[last_before];
            }
        }
        u[j] = v[j] + g_coeff[j] * integral + jumps;
    }
    Ok(u)
}

/// Shape `η` of the forcing perturbation, `|η| ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerturbationShape {
    ConstantOne,
    /// `sin(2π · frequency · t)`.
    Sinusoidal {
        frequency: f64,
    },
}

impl PerturbationShape {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            PerturbationShape::ConstantOne => 1.0,
            PerturbationShape::Sinusoidal { frequency } => {
                (2.0 * std::f64::consts::PI * frequency * t).sin()
            }
        }
    }
}

/// `ℰ(t) = ε η(t) E_α((Ψ(t)−Ψ(0))^α)` and impulse shifts `ε ξ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    epsilon: f64,
    shape: PerturbationShape,
    impulse_signs: Vec<f64>,
}

impl PerturbationSpec {
    pub fn new(epsilon: f64, shape: PerturbationShape, impulse_signs: Vec<f64>) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::Domain(format!(
                "epsilon must be finite and nonnegative, got {epsilon}"
            )));
        }
        if let PerturbationShape::Sinusoidal { frequency } = shape {
            if !frequency.is_finite() {
                return Err(Error::Domain("perturbation frequency is not finite".into()));
            }
        }
        if let Some(x) = impulse_signs.iter().find(|x| !(x.abs() <= 1.0)) {
            return Err(Error::Domain(format!(
                "impulse perturbation {x} exceeds 1 in magnitude"
            )));
        }
        Ok(Self {
            epsilon,
            shape,
            impulse_signs,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn shape(&self) -> PerturbationShape {
        self.shape
    }

    pub fn impulse_signs(&self) -> &[f64] {
        &self.impulse_signs
    }

    /// Largest `|η|` over `probes` equally spaced points of `[0, b]`.
    pub fn max_shape(&self, b: f64, probes: usize) -> f64 {
        (0..=probes)
            .map(|i| self.shape.eval(b * i as f64 / probes as f64).abs())
            .fold(0.0, f64::max)
    }
}

/// Outcome of [`uhml_verify`].
#[derive(Debug, Clone, PartialEq)]
pub struct UhmlReport {
    pub epsilon: f64,
    pub zeta_variant: ZetaVariant,
    /// Largest ratio of the weighted deviation to the selected envelope.
    pub max_ratio: f64,
    pub argmax_time: f64,
    pub pass: bool,
    pub max_ratio_derived: f64,
    pub max_ratio_as_stated: f64,
    pub max_weighted_deviation: f64,
    /// `ε C_f` for the selected variant.
    pub uh_bound: f64,
    pub uh_pass: bool,
    pub l_contraction: f64,
    pub c_p_e_alpha: f64,
    pub grid_nodes: usize,
    pub sweeps_exact: usize,
    pub sweeps_perturbed: usize,
}

const REPORT_KEYS: [&str; 15] = [
    "epsilon",
    "zeta_variant",
    "max_ratio",
    "argmax_time",
    "pass",
    "max_ratio_derived",
    "max_ratio_as_stated",
    "max_weighted_deviation",
    "uh_bound",
    "uh_pass",
    "l_contraction",
    "c_p_e_alpha",
    "grid_nodes",
    "sweeps_exact",
    "sweeps_perturbed",
];

impl fmt::Display for UhmlReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "epsilon={:.16e}", self.epsilon)?;
        writeln!(f, "zeta_variant={}", self.zeta_variant.name())?;
        writeln!(f, "max_ratio={:.16e}", self.max_ratio)?;
        writeln!(f, "argmax_time={:.16e}", self.argmax_time)?;
        writeln!(f, "pass={}", self.pass)?;
        writeln!(f, "max_ratio_derived={:.16e}", self.max_ratio_derived)?;
        writeln!(f, "max_ratio_as_stated={:.16e}", self.max_ratio_as_stated)?;
        writeln!(
            f,
            "max_weighted_deviation={:.16e}",
            self.max_weighted_deviation
        )?;
        writeln!(f, "uh_bound={:.16e}", self.uh_bound)?;
        writeln!(f, "uh_pass={}", self.uh_pass)?;
        writeln!(f, "l_contraction={:.16e}", self.l_contraction)?;
        writeln!(f, "c_p_e_alpha={:.16e}", self.c_p_e_alpha)?;
        writeln!(f, "grid_nodes={}", self.grid_nodes)?;
        writeln!(f, "sweeps_exact={}", self.sweeps_exact)?;
        writeln!(f, "sweeps_perturbed={}", self.sweeps_perturbed)
    }
}

impl FromStr for UhmlReport {
    type Err = Error;

    /// Parses `key=value` lines. Blank lines and `#` comments are skipped;
    /// every key must appear exactly once.
    fn from_str(text: &str) -> Result<Self> {
        let mut values: [Option<(&str, usize)>; REPORT_KEYS.len()] = [None; REPORT_KEYS.len()];
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let start = offset;
            offset += line.len();
            let body = line.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::Parse {
                offset: start,
                message: "expected key=value".into(),
            })?;
            let key = key.trim();
            let idx = REPORT_KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| Error::Parse {
                    offset: start,
                    message: format!("unknown key `{key}`"),
                })?;
            if values[idx].is_some() {
                return Err(Error::Parse {
                    offset: start,
                    message: format!("duplicate key `{key}`"),
                });
            }
            values[idx] = Some((value.trim(), start));
        }
        let get = |i: usize| {
            values[i].ok_or_else(|| Error::Parse {
                offset: text.len(),
                message: format!("missing key `{}`", REPORT_KEYS[i]),
            })
        };
        let num = |i: usize| -> Result<f64> {
            let (v, at) = get(i)?;
            v.parse().map_err(|_| Error::Parse {
                offset: at,
                message: format!("`{}` is not a number: `{v}`", REPORT_KEYS[i]),
            })
        };
        let count = |i: usize| -> Result<usize> {
            let (v, at) = get(i)?;
            v.parse().map_err(|_| Error::Parse {
                offset: at,
                message: format!("`{}` is not a count: `{v}`", REPORT_KEYS[i]),
            })
        };
        let flag = |i: usize| -> Result<bool> {
            let (v, at) = get(i)?;
            v.parse().map_err(|_| Error::Parse {
                offset: at,
                message: format!("`{}` is not true/false: `{v}`", REPORT_KEYS[i]),
            })
        };
        let (variant, at) = get(1)?;
        let zeta_variant = variant.parse().map_err(|_| Error::Parse {
            offset: at,
            message: format!("unknown zeta variant `{variant}`"),
        })?;
        Ok(UhmlReport {
            epsilon: num(0)?,
            zeta_variant,
            max_ratio: num(2)?,
            argmax_time: num(3)?,
            pass: flag(4)?,
            max_ratio_derived: num(5)?,
            max_ratio_as_stated: num(6)?,
            max_weighted_deviation: num(7)?,
            uh_bound: num(8)?,
            uh_pass: flag(9)?,
            l_contraction: num(10)?,
            c_p_e_alpha: num(11)?,
            grid_nodes: count(12)?,
            sweeps_exact: count(13)?,
            sweeps_perturbed: count(14)?,
        })
    }
}

/// Solves the problem and its perturbation on the same grid and compares
/// the weighted deviation against the stability envelope.
pub fn uhml_verify(
    ivp: &ImpulsiveDelayIVP,
    pert: &PerturbationSpec,
    opts: &SolverOptions,
    variant: ZetaVariant,
) -> Result<UhmlReport> {
    let cert = certify(ivp, variant)?;
    if !cert.is_contractive() {
        return Err(Error::NonContractive(cert.l_contraction));
    }
    if pert.impulse_signs().len() != ivp.impulses().len() {
        return Err(Error::Domain(format!(
            "{} impulse perturbations for {} impulses",
            pert.impulse_signs().len(),
            ivp.impulses().len()
        )));
    }
    let alpha = ivp.order().alpha();
    // fail early if the forcing envelope cannot be evaluated
    ml(alpha, ivp.psi().offset(ivp.b()).powf(alpha))?;
    let eps = pert.epsilon();
    let shape = pert.shape();
    let psi = ivp.psi().clone();
    let forcing = Forcing::new(move |t| {
        let envelope = ml(alpha, psi.offset(t).powf(alpha)).unwrap_or(f64::NAN);
        eps * shape.eval(t) * envelope
    });
    let shifts: Vec<f64> = pert.impulse_signs().iter().map(|x| eps * x).collect();
    let perturbed = ivp.perturbed(forcing, &shifts)?;

    let disc = Discretization::new(ivp, opts.grid, opts.scheme)?;
    let (exact, approx) = rayon::join(
        || picard_solve_on(ivp, &disc, opts),
        || picard_solve_on(&perturbed, &disc, opts),
    );
    let (exact, approx) = (exact?, approx?);

    let mut max_dev = 0.0_f64;
    let mut best = [(0.0_f64, 0.0_f64); 2];
    for (i, &t) in exact.grid().iter().enumerate() {
        let dev = (exact.weighted_values()[i] - approx.weighted_values()[i]).abs();
        max_dev = max_dev.max(dev);
        let x = ivp.psi().offset(t);
        for (slot, v) in [ZetaVariant::Derived, ZetaVariant::AsStated]
            .into_iter()
            .enumerate()
        {
            let ratio = if dev == 0.0 {
                0.0
            } else {
                dev / (eps * cert.envelope(v, x)?)
            };
            if ratio > best[slot].0 {
                best[slot] = (ratio, t);
            }
        }
    }
    let sel = match variant {
        ZetaVariant::Derived => best[0],
        ZetaVariant::AsStated => best[1],
    };
    let uh_bound = eps * cert.c_f;
    Ok(UhmlReport {
        epsilon: eps,
        zeta_variant: variant,
        max_ratio: sel.0,
        argmax_time: sel.1,
        pass: sel.0 <= 1.0,
        max_ratio_derived: best[0].0,
        max_ratio_as_stated: best[1].0,
        max_weighted_deviation: max_dev,
        uh_bound,
        uh_pass: max_dev <= uh_bound,
        l_contraction: cert.l_contraction,
        c_p_e_alpha: cert.c_p_e_alpha,
        grid_nodes: exact.grid().len(),
        sweeps_exact: exact.sweeps(),
        sweeps_perturbed: approx.sweeps(),
    })
}
