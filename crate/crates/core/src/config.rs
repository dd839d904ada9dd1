//! TOML problem files and the built-in catalog.
//!
//! ```toml
//! [order]
//! alpha = 0.5
//! beta = 1.0
//!
//! [psi]
//! kind = "identity"        # or "power" (sigma), "log-shifted" (shift),
//!                          # "tabulated" (nodes, values, optional derivs)
//! [domain]
//! b = 1.0
//! r = 1.0
//!
//! [history]
//! expr = "0"
//!
//! [rhs]
//! expr = "P^(1-rho) / (50*exp(P)*(1+abs(u)+abs(ud))) + abs(w)/(15*(1+abs(w)))"
//!
//! [delay]
//! expr = "t - 0.5"
//!
//! [[impulses]]
//! time = 0.3333333333333333
//! map = "P^(1-rho)*abs(u)/(7*(1+abs(u)))"
//!
//! [initial]
//! u0_weighted = 0.0
//!
//! [lipschitz]
//! K = 0.02
//! L_f = 0.06666666666666667
//! L_J = [0.14285714285714285]
//! ```
//!
//! A file may instead hold the single key `catalog = "<name>"`.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::{Context, Expr};
use crate::problem::{Impulse, ImpulsiveDelayIVP, IvpParts, LipschitzData, PROBES};
use crate::psi::{validate_psi, FractionalOrder, PsiSpec, TabulatedPsi};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub name: Option<String>,
    pub catalog: Option<String>,
    pub order: Option<OrderSection>,
    pub psi: Option<PsiSection>,
    pub domain: Option<DomainSection>,
    pub history: Option<ExprSection>,
    pub rhs: Option<ExprSection>,
    pub delay: Option<ExprSection>,
    #[serde(default)]
    pub impulses: Vec<ImpulseSection>,
    pub initial: Option<InitialSection>,
    pub lipschitz: Option<LipschitzSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderSection {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiSection {
    pub kind: String,
    pub sigma: Option<f64>,
    pub shift: Option<f64>,
    pub nodes: Option<Vec<f64>>,
    pub values: Option<Vec<f64>>,
    pub derivs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub b: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExprSection {
    pub expr: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpulseSection {
    pub time: f64,
    pub map: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub u0_weighted: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzSection {
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "L_f")]
    pub l_f: f64,
    #[serde(rename = "L_J", default)]
    pub l_j: Vec<f64>,
}

/// Parses a problem file without validating it.
pub fn parse_config(text: &str) -> Result<ProblemConfig> {
    toml::from_str(text).map_err(|e| Error::Parse {
        offset: e.span().map_or(0, |s| s.start),
        message: e.message().to_string(),
    })
}

const PAPER_CAPUTO: &str = r#"
name = "paper-ex-caputo"

[order]
alpha = 0.5
beta = 1.0

[psi]
kind = "identity"

[domain]
b = 1.0
r = 1.0

[history]
expr = "0"

[rhs]
expr = "P^(1-rho) / (50*exp(P)*(1+abs(u)+abs(ud))) + abs(w)/(15*(1+abs(w)))"

[delay]
expr = "t - 0.5"

[[impulses]]
time = 0.3333333333333333
map = "P^(1-rho)*abs(u)/(7*(1+abs(u)))"

[initial]
u0_weighted = 0.0

[lipschitz]
K = 0.02
L_f = 0.06666666666666667
L_J = [0.14285714285714285]
"#;

const PAPER_RL: &str = r#"
name = "paper-ex-rl"

[order]
alpha = 0.3333333333333333
beta = 0.0

[psi]
kind = "identity"

[domain]
b = 1.0
r = 1.0

[history]
expr = "0"

[rhs]
expr = "P^(1-rho) / (50*exp(P)*(1+abs(u)+abs(ud))) + abs(w)/(15*(1+abs(w)))"

[delay]
expr = "t - 0.5"

[[impulses]]
time = 0.3333333333333333
map = "P^(1-rho)*abs(u)/(7*(1+abs(u)))"

[initial]
u0_weighted = 0.0

[lipschitz]
K = 0.02
L_f = 0.06666666666666667
L_J = [0.14285714285714285]
"#;

const LINEAR_CAPUTO: &str = r#"
name = "linear-caputo"

[order]
alpha = 0.5
beta = 1.0

[psi]
kind = "identity"

[domain]
b = 1.0
r = 0.0

[history]
expr = "1"

[rhs]
expr = "u"

[delay]
expr = "t"

[initial]
u0_weighted = 1.0

[lipschitz]
K = 1.0
L_f = 0.01
"#;

const CATALOG: &[(&str, &str)] = &[
    ("paper-ex-caputo", PAPER_CAPUTO),
    ("paper-ex-rl", PAPER_RL),
    ("linear-caputo", LINEAR_CAPUTO),
];

/// Names of the built-in problems.
pub fn catalog_names() -> Vec<&'static str> {
    CATALOG.iter().map(|(n, _)| *n).collect()
}

/// TOML source of a built-in problem.
pub fn catalog_source(name: &str) -> Option<&'static str> {
    CATALOG.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Builds a built-in problem by name.
pub fn load_catalog(name: &str) -> Result<ImpulsiveDelayIVP> {
    let src = catalog_source(name).ok_or_else(|| {
        Error::config(
            "catalog",
            format!(
                "unknown problem `{name}`; known: {}",
                catalog_names().join(", ")
            ),
        )
    })?;
    build_problem(&parse_config(src)?)
}

/// Reads, parses and builds a problem file.
pub fn load_problem(path: &Path) -> Result<ImpulsiveDelayIVP> {
    let text = std::fs::read_to_string(path)?;
    build_problem(&parse_config(&text)?)
}

fn require<'a, T>(v: &'a Option<T>, field: &str) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::config(field, "missing section"))
}

fn parse_expr(src: &str, ctx: Context, field: &str) -> Result<Expr> {
    Expr::parse(src, ctx).map_err(|e| Error::config(field, e.to_string()))
}

fn build_psi(sec: &PsiSection, b: f64) -> Result<PsiSpec> {
    let wrap = |e: Error| Error::config("psi", e.to_string());
    let need = |v: &Option<f64>, key: &str| {
        v.ok_or_else(|| {
            Error::config(
                format!("psi.{key}"),
                format!("required for kind `{}`", sec.kind),
            )
        })
    };
    let psi = match sec.kind.as_str() {
        "identity" => PsiSpec::identity(b).map_err(wrap)?,
        "power" => PsiSpec::power(need(&sec.sigma, "sigma")?, b).map_err(wrap)?,
        "log-shifted" => PsiSpec::log_shifted(need(&sec.shift, "shift")?, b).map_err(wrap)?,
        "tabulated" => {
            let nodes = sec
                .nodes
                .clone()
                .ok_or_else(|| Error::config("psi.nodes", "required for kind `tabulated`"))?;
            let values = sec
                .values
                .clone()
                .ok_or_else(|| Error::config("psi.values", "required for kind `tabulated`"))?;
            let table = TabulatedPsi::new(nodes, values, sec.derivs.clone()).map_err(wrap)?;
            PsiSpec::tabulated(table, b).map_err(wrap)?
        }
        other => {
            return Err(Error::config(
                "psi.kind",
                format!(
                    "unknown kind `{other}` (expected identity, power, log-shifted or tabulated)"
                ),
            ))
        }
    };
    let report = validate_psi(&psi, PROBES)?;
    if !report.passed() {
        return Err(Error::config("psi", report.failures.join("; ")));
    }
    Ok(psi)
}

/// Validates a parsed configuration and builds the problem.
pub fn build_problem(cfg: &ProblemConfig) -> Result<ImpulsiveDelayIVP> {
    if let Some(name) = &cfg.catalog {
        let others = cfg.order.is_some()
            || cfg.psi.is_some()
            || cfg.domain.is_some()
            || cfg.history.is_some()
            || cfg.rhs.is_some()
            || cfg.delay.is_some()
            || !cfg.impulses.is_empty()
            || cfg.initial.is_some()
            || cfg.lipschitz.is_some();
        if others {
            return Err(Error::config(
                "catalog",
                "a catalog reference cannot be combined with other sections",
            ));
        }
        return load_catalog(name);
    }
    let order_sec = require(&cfg.order, "order")?;
    let order = FractionalOrder::new(order_sec.alpha, order_sec.beta)
        .map_err(|e| Error::config("order", e.to_string()))?;
    let domain = require(&cfg.domain, "domain")?;
    if !(domain.b > 0.0) || !domain.b.is_finite() {
        return Err(Error::config(
            "domain.b",
            format!("must be positive and finite, got {}", domain.b),
        ));
    }
    let psi = build_psi(require(&cfg.psi, "psi")?, domain.b)?;
    let rhs = parse_expr(&require(&cfg.rhs, "rhs")?.expr, Context::Rhs, "rhs.expr")?;
    let delay = parse_expr(
        &require(&cfg.delay, "delay")?.expr,
        Context::Delay,
        "delay.expr",
    )?;
    let history = parse_expr(
        &require(&cfg.history, "history")?.expr,
        Context::History,
        "history.expr",
    )?;
    let impulses = cfg
        .impulses
        .iter()
        .enumerate()
        .map(|(k, s)| {
            Ok(Impulse {
                time: s.time,
                map: parse_expr(&s.map, Context::Impulse, &format!("impulses[{k}].map"))?,
                shift: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let lip = require(&cfg.lipschitz, "lipschitz")?;
    let lipschitz = LipschitzData::new(lip.k, lip.l_f, lip.l_j.clone())?;
    let u0_weighted = require(&cfg.initial, "initial")?.u0_weighted;
    ImpulsiveDelayIVP::new(IvpParts {
        name: cfg.name.clone().unwrap_or_else(|| "custom".into()),
        order,
        psi,
        r: domain.r,
        rhs,
        delay,
        history,
        impulses,
        u0_weighted,
        lipschitz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_replacement(from: &str, to: &str) -> String {
        let src = PAPER_CAPUTO.replace(from, to);
        assert_ne!(src, PAPER_CAPUTO, "replacement `{from}` did not apply");
        src
    }

    fn config_error(src: &str) -> String {
        match parse_config(src).and_then(|c| build_problem(&c)) {
            Err(Error::Config { field, .. }) => field,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn catalog_entries_build() {
        for name in catalog_names() {
            let p = load_catalog(name).unwrap();
            assert_eq!(p.name(), name);
        }
        let c = load_catalog("paper-ex-caputo").unwrap();
        assert_eq!(c.order().rho(), 1.0);
        assert_eq!(c.impulse_times(), vec![1.0 / 3.0]);
        assert_eq!(c.r(), 1.0);
        let rl = load_catalog("paper-ex-rl").unwrap();
        assert!((rl.order().rho() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn catalog_reference_file() {
        let cfg = parse_config("catalog = \"paper-ex-rl\"").unwrap();
        assert_eq!(build_problem(&cfg).unwrap().name(), "paper-ex-rl");
        assert_eq!(config_error("catalog = \"nope\""), "catalog");
        assert_eq!(
            config_error("catalog = \"paper-ex-rl\"\n[initial]\nu0_weighted = 1.0\n"),
            "catalog"
        );
    }

    #[test]
    fn paper_history_is_zero() {
        let p = load_catalog("paper-ex-caputo").unwrap();
        for t in [-1.0, -0.75, -0.5, -0.1, 0.0] {
            assert_eq!(p.history_eval(t).unwrap(), 0.0);
        }
    }

    #[test]
    fn paper_impulse_map() {
        let p = load_catalog("paper-ex-caputo").unwrap();
        assert!((p.impulse_jump(0, 1.0) - 1.0 / 14.0).abs() < 1e-15);
        let rl = load_catalog("paper-ex-rl").unwrap();
        let expected = (1.0f64 / 3.0).powf(2.0 / 3.0) / 14.0;
        assert!((rl.impulse_jump(0, -1.0) - expected).abs() < 1e-15);
    }

    #[test]
    fn impulse_at_horizon_names_field() {
        assert_eq!(
            config_error(&with_replacement("time = 0.3333333333333333", "time = 1.0")),
            "impulses[0].time"
        );
        assert_eq!(
            config_error(&with_replacement("time = 0.3333333333333333", "time = 1.5")),
            "impulses[0].time"
        );
    }

    #[test]
    fn field_specific_errors() {
        assert_eq!(
            config_error(&with_replacement("alpha = 0.5", "alpha = 1.5")),
            "order"
        );
        assert_eq!(
            config_error(&with_replacement("expr = \"t - 0.5\"", "expr = \"t + 1\"")),
            "delay.expr"
        );
        assert_eq!(
            config_error(&with_replacement("expr = \"0\"", "expr = \"ln(t)\"")),
            "history.expr"
        );
        assert_eq!(
            config_error(&with_replacement("L_f = 0.06666666666666667", "L_f = 1.5")),
            "lipschitz.L_f"
        );
        assert_eq!(
            config_error(&with_replacement("L_J = [0.14285714285714285]", "L_J = []")),
            "lipschitz.L_J"
        );
        assert_eq!(
            config_error(&with_replacement("kind = \"identity\"", "kind = \"cubic\"")),
            "psi.kind"
        );
        assert_eq!(
            config_error(&with_replacement("kind = \"identity\"", "kind = \"power\"")),
            "psi.sigma"
        );
        assert_eq!(
            config_error(&with_replacement("abs(w)/(15", "abs(q)/(15")),
            "rhs.expr"
        );
        assert_eq!(
            config_error(&PAPER_CAPUTO.replace("[initial]\nu0_weighted = 0.0\n", "")),
            "initial"
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        let src = with_replacement("b = 1.0", "b = 1.0\nextra = 2");
        assert!(matches!(parse_config(&src), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_config("bogus = 1"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(parse_config("[order\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn decreasing_psi_rejected() {
        let src = with_replacement(
            "kind = \"identity\"",
            "kind = \"tabulated\"\nnodes = [0.0, 0.5, 1.0]\nvalues = [0.0, -0.5, -1.0]",
        );
        assert_eq!(config_error(&src), "psi");
    }

    #[test]
    fn log_shifted_psi_builds() {
        let src = with_replacement("kind = \"identity\"", "kind = \"log-shifted\"\nshift = 1.0");
        let p = build_problem(&parse_config(&src).unwrap()).unwrap();
        assert_eq!(p.psi().offset(0.5), 1.5f64.ln());
        // t² has a vanishing derivative at the origin
        let src = with_replacement("kind = \"identity\"", "kind = \"power\"\nsigma = 2.0");
        assert_eq!(config_error(&src), "psi");
    }
}
