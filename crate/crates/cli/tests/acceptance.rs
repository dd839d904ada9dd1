//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use psi_hilfer::analysis::{
    gronwall_bound, gronwall_worst_case, uhml_verify, PerturbationShape, PerturbationSpec,
    ZetaVariant,
};
use psi_hilfer::config::load_catalog;
use psi_hilfer::picard::{build_slots, picard_solve, GridSpec, SolverOptions};
use psi_hilfer::psi::PsiSpec;
use psi_hilfer::quadrature::{frac_integral_at, QuadratureScheme};
use psi_hilfer::special::{gamma, ml};

const BIN: &str = env!("CARGO_BIN_EXE_psi-hilfer");

struct Verdict {
    pass: bool,
    detail: String,
}

type Check = fn() -> Result<Verdict, String>;

fn run_bin(args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(BIN)
        .args(args)
        .output()
        .map_err(|e| format!("spawning {BIN}: {e}"))
}

fn c1_contraction() -> Result<Verdict, String> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, expect) in [("paper-ex-caputo", 0.1912), ("paper-ex-rl", 0.1013)] {
        let out = run_bin(&["check-hypotheses", "--problem", name])?;
        let text = String::from_utf8_lossy(&out.stdout);
        let l: f64 = text
            .lines()
            .find_map(|l| l.strip_prefix("L_full = "))
            .ok_or_else(|| format!("no L_full line for {name}"))?
            .trim()
            .parse()
            .map_err(|e| format!("{e}"))?;
        let ok = out.status.success() && (l - expect).abs() <= 5e-4;
        pass &= ok;
        parts.push(format!("{name} L={l:.6} (target {expect})"));
    }
    Ok(Verdict {
        pass,
        detail: parts.join(", "),
    })
}

fn c2_special() -> Result<Verdict, String> {
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let z = -5.0 + 10.0 * i as f64 / 99.0;
        let e = ml(1.0, z).map_err(|e| e.to_string())?;
        worst = worst.max(((e - z.exp()) / z.exp()).abs());
    }
    let e0 = ml(0.5, 0.0).map_err(|e| e.to_string())?;
    let g = gamma(0.5).map_err(|e| e.to_string())?;
    let gerr = (g - std::f64::consts::PI.sqrt()).abs();
    Ok(Verdict {
        pass: worst <= 1e-10 && e0 == 1.0 && gerr <= 1e-12,
        detail: format!("max rel err E1 vs exp {worst:.2e}, E_0.5(0)={e0}, |Γ(0.5)-√π|={gerr:.2e}"),
    })
}

/// Relative error of the product rule for `𝕀^α (Ψ−Ψ(0))^{δ−1}` at `t = 1`.
fn power_identity_error(
    psi: &PsiSpec,
    grid: &[f64],
    alpha: f64,
    delta: f64,
    scheme: QuadratureScheme,
) -> Result<f64, String> {
    let g: Vec<f64> = grid
        .iter()
        .map(|&t| psi.offset(t).powf(delta - 1.0))
        .collect();
    let j = grid.len() - 1;
    let approx = frac_integral_at(alpha, psi, grid, &g, j, scheme).map_err(|e| e.to_string())?;
    let p = psi.offset(grid[j]);
    let exact = gamma(delta).unwrap() / gamma(delta + alpha).unwrap() * p.powf(delta + alpha - 1.0);
    Ok(((approx - exact) / exact).abs())
}

/// Least-squares slope of `-log2(err)` against `log2(N)`.
fn observed_order(ns: &[usize], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).log2()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| -e.log2()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

const ROUNDING_FLOOR: f64 = 1e-13;

fn c3_quadrature() -> Result<Verdict, String> {
    let ns = [64usize, 128, 256, 512];
    let mut pass = true;
    let mut lines = Vec::new();
    let mut info = Vec::new();
    for (psi_name, psi) in [
        ("id", PsiSpec::identity(1.0).unwrap()),
        ("t^2", PsiSpec::power(2.0, 1.0).unwrap()),
    ] {
        for alpha in [1.0 / 3.0, 0.5] {
            for delta in [1.0, 1.5, 2.0] {
                for (scheme, need) in [
                    (QuadratureScheme::ProductRectangle, 1.0),
                    (QuadratureScheme::ProductTrapezoid, 1.5),
                ] {
                    let mut errs = Vec::new();
                    let mut errs_t = Vec::new();
                    for &n in &ns {
                        let (grid, _) = build_slots(&psi, &[], GridSpec::uniform_psi(n))
                            .map_err(|e| e.to_string())?;
                        errs.push(power_identity_error(&psi, &grid, alpha, delta, scheme)?);
                        let (grid_t, _) = build_slots(&psi, &[], GridSpec::uniform_t(n))
                            .map_err(|e| e.to_string())?;
                        errs_t.push(power_identity_error(&psi, &grid_t, alpha, delta, scheme)?);
                    }
                    let last = *errs.last().unwrap();
                    let exact = errs.iter().all(|&e| e <= ROUNDING_FLOOR);
                    let order = if exact {
                        f64::INFINITY
                    } else {
                        observed_order(&ns, &errs)
                    };
                    let ok = last <= 1e-4 && (exact || order >= need);
                    pass &= ok;
                    let tag = match scheme {
                        QuadratureScheme::ProductRectangle => "rect",
                        QuadratureScheme::ProductTrapezoid => "trap",
                    };
                    if !ok || !exact {
                        lines.push(format!(
                            "      Ψ={psi_name} α={alpha:.3} δ={delta} {tag}: order {} err(512) {last:.2e} {}",
                            if exact { "exact".to_string() } else { format!("{order:.2}") },
                            if ok { "ok" } else { "FAIL" }
                        ));
                    }
                    let last_t = *errs_t.last().unwrap();
                    if !errs_t.iter().all(|&e| e <= ROUNDING_FLOOR) {
                        info.push(format!(
                            "      [uniform-t, informational] Ψ={psi_name} α={alpha:.3} δ={delta} {tag}: order {:.2} err(512) {last_t:.2e}",
                            observed_order(&ns, &errs_t)
                        ));
                    }
                }
            }
        }
    }
    lines.extend(info);
    Ok(Verdict {
        pass,
        detail: format!("grids uniform in Ψ, N ∈ {{64..512}}\n{}", lines.join("\n")),
    })
}

fn c4_linear() -> Result<Verdict, String> {
    let ivp = load_catalog("linear-caputo").map_err(|e| e.to_string())?;
    let exact = ml(0.5, 1.0).map_err(|e| e.to_string())?;
    let mut errs = Vec::new();
    let mut last_u = 0.0;
    for n in [256usize, 512, 1024, 2048] {
        let opts = SolverOptions {
            grid: GridSpec::uniform_t(n),
            ..SolverOptions::default()
        };
        let sol = picard_solve(&ivp, &opts).map_err(|e| e.to_string())?;
        last_u = sol.final_value();
        errs.push((last_u - exact).abs());
    }
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    let rel = errs[3] / exact;
    let shown: Vec<String> = errs.iter().map(|e| format!("{e:.2e}")).collect();
    Ok(Verdict {
        pass: rel <= 0.01 && monotone,
        detail: format!(
            "u(1)={last_u:.6} vs E_0.5(1)={exact:.6}, rel {rel:.2e}, errors [{}]",
            shown.join(", ")
        ),
    })
}

fn c5_contraction_rate() -> Result<Verdict, String> {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["paper-ex-caputo", "paper-ex-rl"] {
        let ivp = load_catalog(name).map_err(|e| e.to_string())?;
        let l = psi_hilfer::analysis::certify(&ivp, ZetaVariant::Derived)
            .map_err(|e| e.to_string())?
            .l_contraction;
        let sol = picard_solve(&ivp, &SolverOptions::default()).map_err(|e| e.to_string())?;
        let d = sol.deltas();
        // Ratios of deltas already at the rounding floor carry no information.
        let ratios: Vec<f64> = d
            .windows(2)
            .filter(|w| w[0] > 1e-12)
            .map(|w| w[1] / w[0])
            .collect();
        let worst = ratios.iter().cloned().fold(0.0, f64::max);
        let ok = !ratios.is_empty() && worst <= l + 0.05;
        pass &= ok;
        parts.push(format!(
            "{name}: max ratio {worst:.4} vs L+0.05={:.4} over {} ratios",
            l + 0.05,
            ratios.len()
        ));
    }
    Ok(Verdict {
        pass,
        detail: parts.join("; "),
    })
}

fn c6_jump() -> Result<Verdict, String> {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["paper-ex-caputo", "paper-ex-rl"] {
        let ivp = load_catalog(name).map_err(|e| e.to_string())?;
        let sol = picard_solve(&ivp, &SolverOptions::default()).map_err(|e| e.to_string())?;
        let (l, r) = sol.impulse_pairs()[0];
        let t1 = sol.grid()[l];
        let w = sol.weighted_values();
        let u_left = sol.u_value(l).ok_or("u undefined at t1-")?;
        let jump = ivp.impulse_jump(0, u_left);
        let expect = jump / gamma(ivp.order().rho()).unwrap();
        let err = (w[r] - w[l] - expect).abs();
        let ok = (t1 - 1.0 / 3.0).abs() < 1e-12 && err <= 1e-8;
        pass &= ok;
        parts.push(format!(
            "{name}: jump {:.6e} expected {expect:.6e} err {err:.1e}",
            w[r] - w[l]
        ));
    }
    Ok(Verdict {
        pass,
        detail: parts.join("; "),
    })
}

fn nondecreasing(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    let mut x = rng.gen_range(0.0..scale);
    (0..n)
        .map(|_| {
            x += rng.gen_range(0.0..scale / n as f64);
            x
        })
        .collect()
}

fn c7_gronwall() -> Result<Verdict, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a0_2024);
    let mut violations = 0usize;
    let mut nodes = 0usize;
    let mut tightest = f64::INFINITY;
    for _ in 0..200 {
        let b = rng.gen_range(0.5..1.5);
        let psi = match rng.gen_range(0..3) {
            0 => PsiSpec::identity(b),
            1 => PsiSpec::log_shifted(rng.gen_range(0.5..2.0), b),
            _ => PsiSpec::power(rng.gen_range(1.0..1.5), b),
        }
        .map_err(|e| e.to_string())?;
        let alpha = rng.gen_range(0.3..1.0);
        let n = rng.gen_range(20..120);
        let k = rng.gen_range(0..=3);
        let mut times: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05 * b..0.95 * b)).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let beta: Vec<f64> = times.iter().map(|_| rng.gen_range(1e-3..=1.0)).collect();
        let grid: Vec<f64> = (0..=n).map(|i| b * i as f64 / n as f64).collect();
        let v = nondecreasing(&mut rng, grid.len(), 2.0);
        // Keeps g·Γ(α)·P^α small enough for E_α to stay finite.
        let g = nondecreasing(&mut rng, grid.len(), 0.5);
        let u = gronwall_worst_case(&v, &g, &grid, &beta, &times, alpha, &psi)
            .map_err(|e| e.to_string())?;
        for (i, &t) in grid.iter().enumerate() {
            let bound = gronwall_bound(&v, &g, &grid, &beta, &times, alpha, &psi, t)
                .map_err(|e| e.to_string())?;
            nodes += 1;
            if u[i] > bound * (1.0 + 1e-12) {
                violations += 1;
            }
            if bound > 0.0 {
                tightest = tightest.min((bound - u[i]) / bound);
            }
        }
    }
    Ok(Verdict {
        pass: violations == 0,
        detail: format!("200 instances, {nodes} nodes, {violations} violations, min relative slack {tightest:.2e}"),
    })
}

fn c8_uhml() -> Result<Verdict, String> {
    let ivp = load_catalog("paper-ex-caputo").map_err(|e| e.to_string())?;
    let opts = SolverOptions::default();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut devs = Vec::new();
    for eps in [1e-3, 1e-2] {
        let pert = PerturbationSpec::new(eps, PerturbationShape::ConstantOne, vec![1.0])
            .map_err(|e| e.to_string())?;
        let rep =
            uhml_verify(&ivp, &pert, &opts, ZetaVariant::Derived).map_err(|e| e.to_string())?;
        let ok = rep.max_ratio_derived <= 1.0 && rep.max_weighted_deviation <= rep.uh_bound;
        pass &= ok && rep.uh_pass;
        devs.push(rep.max_weighted_deviation);
        parts.push(format!(
            "ε={eps:e}: max ratio {:.4}, deviation {:.3e} ≤ εC_f {:.3e}",
            rep.max_ratio_derived, rep.max_weighted_deviation, rep.uh_bound
        ));
    }
    // The deviation should scale with ε.
    let scale = devs[1] / devs[0];
    let linear = (scale / 10.0 - 1.0).abs() <= 0.2;
    pass &= linear;
    parts.push(format!("deviation ratio at 10ε {scale:.3}"));
    Ok(Verdict {
        pass,
        detail: parts.join("; "),
    })
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn c9_determinism() -> Result<Verdict, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut pass = true;
    let mut compared = 0;
    for name in ["paper-ex-caputo", "paper-ex-rl"] {
        let a = dir.path().join(format!("{name}-a"));
        let b = dir.path().join(format!("{name}-b"));
        for out in [&a, &b] {
            let o = run_bin(&["solve", "--problem", name, "--out", out.to_str().unwrap()])?;
            if !o.status.success() {
                return Err(format!(
                    "solve failed: {}",
                    String::from_utf8_lossy(&o.stderr)
                ));
            }
        }
        for file in ["solution.csv", "convergence.csv", "manifest.txt"] {
            pass &= read(&a.join(file))? == read(&b.join(file))?;
            compared += 1;
        }
    }
    Ok(Verdict {
        pass,
        detail: format!("{compared} artifact pairs compared byte for byte"),
    })
}

fn main() -> ExitCode {
    let checks: [(&str, Check, Duration); 9] = [
        (
            "contraction constants",
            c1_contraction,
            Duration::from_secs(1),
        ),
        (
            "special-function identities",
            c2_special,
            Duration::from_secs(1),
        ),
        (
            "quadrature convergence",
            c3_quadrature,
            Duration::from_secs(10),
        ),
        (
            "solver oracle equivalence",
            c4_linear,
            Duration::from_secs(30),
        ),
        (
            "Picard contraction property",
            c5_contraction_rate,
            Duration::from_secs(30),
        ),
        ("impulse jump identity", c6_jump, Duration::from_secs(5)),
        ("Gronwall dominance", c7_gronwall, Duration::from_secs(30)),
        ("UHML envelope", c8_uhml, Duration::from_secs(60)),
        ("determinism", c9_determinism, Duration::from_secs(60)),
    ];
    let mut failures = 0;
    for (i, (name, check, budget)) in checks.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= *budget;
        let (pass, detail) = match result {
            Ok(v) => (v.pass && in_budget, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {} {:<30} {}  ({:.2}s of {}s){}",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_budget { "" } else { " over budget" }
        );
        println!("    {detail}");
    }
    if failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
