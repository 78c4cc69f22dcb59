use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C;
use serde_json::{json, Value};

use glame::backlund::{apply_word, apply_word_theta, base_point_image, invariance_check, theta_of_n, word_for};
use glame::generators::{addition_map, deg_sigma, fiber_witness, z_np, FiberOptions};
use glame::hitchin::{family_residuals, family_state, hitchin_wp, mu_family, riccati_wp, degeneration_check, SolutionTag, Z_rs};
use glame::monodromy::{
    counterexample, cross_scan, cycle_monodromy, monodromy_data, tau0, uniqueness_scan, MonodromyData, MonodromyOptions,
    ParamGrid, ScanEntry, ScanReport,
};
use glame::painleve::{flow, from_pvi, isomonodromy_check, riccati_residual, to_pvi, EllipticState, FlowOptions};
use glame::transport::{default_base_point, DEFAULT_CLEARANCE};
use glame::{EllipticContext, Mat2, Multiplicity, ProjectiveC, TorusEquation};

const CTX_TOL: f64 = 1e-13;
const DEFAULT_TOL: f64 = 1e-8;

#[derive(Parser, Debug)]
#[command(name = "glame", version, about = "Monodromy of generalized Lame and Heun equations on complex tori")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Weierstrass functions at one point.
    Wp {
        #[arg(long, value_parser = parse_c, allow_hyphen_values = true)]
        tau: C,
        #[arg(long, value_parser = parse_c, allow_hyphen_values = true)]
        z: C,
        #[arg(long = "fn", default_value = "wp", value_parser = ["wp", "zeta", "sigma"])]
        func: String,
    },
    /// Monodromy of H(n, B) or GLE(n, p, A).
    Monodromy {
        #[command(subcommand)]
        which: MonodromyCmd,
    },
    /// Hitchin's solution for (r, s).
    Hitchin {
        #[arg(long, value_parser = parse_c, allow_hyphen_values = true)]
        r: C,
        #[arg(long, value_parser = parse_c, allow_hyphen_values = true)]
        s: C,
        #[arg(long, value_parser = parse_c, allow_hyphen_values = true)]
        tau: C,
        #[arg(long)]
        check: bool,
    },
    /// Riccati solution family k with parameter C.
    Riccati {
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..4))]
        k: u8,
        #[arg(long = "C", value_parser = parse_projective, allow_hyphen_values = true)]
        c: ProjectiveC,
        #[arg(long, value_parser = parse_c, allow_hyphen_values = true)]
        tau: C,
        #[arg(long)]
        check: bool,
    },
    /// Hamiltonian flow of (p, A) in tau.
    Flow {
        #[arg(long, value_parser = parse_n)]
        n: Multiplicity,
        #[arg(long, value_parser = parse_c, allow_hyphen_values = true)]
        p: C,
        #[arg(long = "A", value_parser = parse_c, allow_hyphen_values = true)]
        a: C,
        #[arg(long, value_parser = parse_c, allow_hyphen_values = true)]
        tau0: C,
        #[arg(long, value_parser = parse_c, allow_hyphen_values = true)]
        tau1: C,
        #[arg(long, default_value_t = 4)]
        steps: usize,
        #[arg(long)]
        check_isomonodromy: bool,
        #[command(flatten)]
        num: Numerics,
    },
    /// Backlund word from theta^0 to theta^n and its action on a Hitchin state.
    Backlund {
        #[arg(long, value_parser = parse_n)]
        n: Multiplicity,
        #[arg(long, value_parser = parse_word)]
        word: Option<Word>,
        #[arg(long, value_parser = parse_c, allow_hyphen_values = true, default_value = "0.1,1.1")]
        tau: C,
        #[arg(long, value_parser = parse_c, allow_hyphen_values = true, default_value = "0.2,0")]
        r: C,
        #[arg(long, value_parser = parse_c, allow_hyphen_values = true, default_value = "0.3,0")]
        s: C,
        #[command(flatten)]
        num: Numerics,
    },
    /// Grid scans over B.
    Scan {
        #[command(subcommand)]
        which: ScanCmd,
    },
    /// Equal monodromy of H((1,0,0,0), B1) and H((4,0,0,0), B2).
    Counterexample {
        #[arg(long, value_parser = parse_c, allow_hyphen_values = true)]
        tau0: Option<C>,
        #[arg(long = "box", default_value_t = 10.0)]
        half_width: f64,
        #[arg(long, default_value_t = 40)]
        grid: usize,
        #[arg(long = "box1", default_value_t = 1.0)]
        half_width1: f64,
        #[arg(long, default_value_t = 11)]
        grid1: usize,
        #[arg(long, default_value_t = 1e-5)]
        match_tol: f64,
        #[command(flatten)]
        num: Numerics,
    },
    /// z_{n,p}, the addition map and its degree.
    Zgen {
        #[arg(long, value_parser = parse_n)]
        n: Multiplicity,
        #[arg(long, value_parser = parse_c, allow_hyphen_values = true)]
        p: C,
        #[arg(long, value_parser = parse_c, allow_hyphen_values = true)]
        tau: C,
        /// One zero per flag.
        #[arg(long, value_parser = parse_c, allow_hyphen_values = true)]
        a: Vec<C>,
        /// Also list the fiber of the addition map over this point (needs sum n = 1).
        #[arg(long, value_parser = parse_c, allow_hyphen_values = true)]
        fiber: Option<C>,
    },
}

#[derive(Subcommand, Debug)]
enum MonodromyCmd {
    Heun {
        #[arg(long, value_parser = parse_n)]
        n: Multiplicity,
        #[arg(long = "B", value_parser = parse_c, allow_hyphen_values = true)]
        b: C,
        #[arg(long, value_parser = parse_c, allow_hyphen_values = true)]
        tau: C,
        #[command(flatten)]
        num: Numerics,
    },
    Gle {
        #[arg(long, value_parser = parse_n)]
        n: Multiplicity,
        #[arg(long, value_parser = parse_c, allow_hyphen_values = true)]
        p: C,
        #[arg(long = "A", value_parser = parse_c, allow_hyphen_values = true)]
        a: C,
        #[arg(long, value_parser = parse_c, allow_hyphen_values = true)]
        tau: C,
        #[command(flatten)]
        num: Numerics,
    },
}

#[derive(Subcommand, Debug)]
enum ScanCmd {
    Uniqueness {
        #[arg(long, value_parser = parse_n)]
        n: Multiplicity,
        #[command(flatten)]
        grid: GridArgs,
    },
    Cross {
        #[arg(long, value_parser = parse_n)]
        n: Multiplicity,
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..4))]
        k: u8,
        #[command(flatten)]
        grid: GridArgs,
    },
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long, value_parser = parse_c, allow_hyphen_values = true)]
    tau: C,
    /// Half width of the square box of B values.
    #[arg(long = "box", default_value_t = 3.0)]
    half_width: f64,
    #[arg(long, value_parser = parse_c, allow_hyphen_values = true, default_value = "0,0")]
    center: C,
    #[arg(long, default_value_t = 15)]
    grid: usize,
    #[arg(long, default_value_t = 1e-4)]
    threshold: f64,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    num: Numerics,
}

#[derive(Args, Debug, Clone, Copy)]
struct Numerics {
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_CLEARANCE)]
    clearance: f64,
    #[arg(long, value_parser = parse_c, allow_hyphen_values = true)]
    q0: Option<C>,
}

impl Numerics {
    fn options(&self) -> MonodromyOptions {
        MonodromyOptions { tol: self.tol, clearance: self.clearance, q0: self.q0, ..Default::default() }
    }

    fn echo(&self, ctx: &EllipticContext) -> Value {
        json!({
            "tol": self.tol,
            "clearance": self.clearance,
            "q0": c(self.q0.unwrap_or_else(|| default_base_point(ctx))),
        })
    }
}

fn parse_c(s: &str) -> Result<C, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |x: &str| x.parse::<f64>().map_err(|e| format!("'{x}': {e}"));
    match parts.as_slice() {
        [re] => Ok(C::new(num(re)?, 0.0)),
        [re, im] => Ok(C::new(num(re)?, num(im)?)),
        _ => Err(format!("expected RE,IM, got '{s}'")),
    }
}

fn parse_projective(s: &str) -> Result<ProjectiveC, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(ProjectiveC::INFINITY),
        _ => parse_c(s).map(ProjectiveC::Finite),
    }
}

fn parse_n(s: &str) -> Result<Multiplicity, String> {
    let v: Vec<u32> = s
        .split(',')
        .map(|x| x.trim().parse::<u32>().map_err(|e| format!("'{x}': {e}")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [n0] => Ok(Multiplicity::lame(*n0)),
        [a, b, cc, d] => Ok(Multiplicity::new([*a, *b, *cc, *d])),
        _ => Err(format!("expected N0,N1,N2,N3, got '{s}'")),
    }
}

#[derive(Debug, Clone)]
struct Word(Vec<usize>);

fn parse_word(s: &str) -> Result<Word, String> {
    if s.trim().is_empty() {
        return Ok(Word(Vec::new()));
    }
    s.split(',')
        .map(|x| match x.trim().parse::<usize>() {
            Ok(j) if j <= 4 => Ok(j),
            _ => Err(format!("generator indices are 0..=4, got '{x}'")),
        })
        .collect::<Result<_, _>>()
        .map(Word)
}

fn c(z: C) -> Value {
    json!([z.re, z.im])
}

fn cs(v: &[C]) -> Value {
    Value::Array(v.iter().map(|&z| c(z)).collect())
}

fn mat(m: &Mat2) -> Value {
    json!([[c(m[(0, 0)]), c(m[(0, 1)])], [c(m[(1, 0)]), c(m[(1, 1)])]])
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("library records serialize")
}

struct Failure {
    kind: String,
    message: String,
}

impl<E: std::error::Error + std::fmt::Debug> From<E> for Failure {
    fn from(e: E) -> Self {
        let dbg = format!("{e:?}");
        let end = dbg.find(|ch: char| !ch.is_alphanumeric() && ch != '_').unwrap_or(dbg.len());
        Failure { kind: dbg[..end].to_string(), message: e.to_string() }
    }
}

fn fail(kind: &str, message: impl Into<String>) -> Failure {
    Failure { kind: kind.into(), message: message.into() }
}

struct Output {
    inputs: Value,
    defaults: Value,
    outputs: Value,
    diagnostics: Value,
}

fn context(tau: C) -> Result<EllipticContext, Failure> {
    Ok(EllipticContext::new(tau, CTX_TOL)?)
}

fn monodromy_record(eq: &TorusEquation, opts: &MonodromyOptions) -> Result<(Value, Value), Failure> {
    let cm = cycle_monodromy(eq, opts)?;
    let data = glame::monodromy::classify(&cm.n[0], &cm.n[1], &opts.classify)?;
    let (t1, t2) = cm.traces();
    let outputs = json!({
        "traces": [c(t1), c(t2)],
        "N1": mat(&cm.n[0]),
        "N2": mat(&cm.n[1]),
        "data": to_value(&data),
    });
    let diagnostics = json!({
        "transport_error": cm.err,
        "commutator_norm": cm.commutator_norm(),
        "det_defect": [(cm.n[0].determinant() - 1.0).norm(), (cm.n[1].determinant() - 1.0).norm()],
        "q0": c(cm.q0),
    });
    Ok((outputs, diagnostics))
}

fn scan_csv(path: &PathBuf, report: &ScanReport) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| fail("Io", e.to_string()))?;
    w.write_record([
        "family", "b_re", "b_im", "kind", "r_re", "r_im", "s_re", "s_im", "eps1", "eps2", "C_re", "C_im", "tr1_re",
        "tr1_im", "tr2_re", "tr2_im",
    ])
    .map_err(|e| fail("Io", e.to_string()))?;
    let mut rows = |family: &str, entries: &[ScanEntry]| -> Result<(), Failure> {
        for e in entries {
            let (t1, t2) = e.data.traces();
            let mut rec: Vec<String> = vec![family.into(), e.b.re.to_string(), e.b.im.to_string()];
            match e.data {
                MonodromyData::Cr { r, s } => {
                    rec.push("CR".into());
                    rec.extend([r.re, r.im, s.re, s.im].map(|x| x.to_string()));
                    rec.extend(["", "", "", ""].map(String::from));
                }
                MonodromyData::Ncr { eps1, eps2, c } => {
                    rec.push("NCR".into());
                    rec.extend(["", "", "", ""].map(String::from));
                    rec.extend([eps1.to_string(), eps2.to_string()]);
                    match c.finite() {
                        Some(z) => rec.extend([z.re.to_string(), z.im.to_string()]),
                        None => rec.extend(["inf".to_string(), "inf".to_string()]),
                    }
                }
            }
            rec.extend([t1.re, t1.im, t2.re, t2.im].map(|x| x.to_string()));
            w.write_record(&rec).map_err(|e| fail("Io", e.to_string()))?;
        }
        Ok(())
    };
    let name = |n: &Multiplicity| format!("{:?}", n.0);
    rows(&name(&report.n), &report.entries)?;
    if let Some(other) = &report.n_other {
        rows(&name(other), &report.entries_other)?;
    }
    w.flush().map_err(|e| fail("Io", e.to_string()))?;
    Ok(())
}

fn run(cmd: &Cmd) -> Result<Output, Failure> {
    match cmd {
        Cmd::Wp { tau, z, func } => {
            let ctx = context(*tau)?;
            let outputs = match func.as_str() {
                "wp" => {
                    let w = ctx.wp(*z)?;
                    json!({ "wp": c(w.wp), "dwp": c(w.dwp), "ddwp": c(w.ddwp) })
                }
                "zeta" => json!({ "zeta": c(ctx.zeta(*z)?) }),
                _ => json!({ "sigma": c(ctx.sigma(*z)) }),
            };
            Ok(Output {
                inputs: json!({ "tau": c(*tau), "z": c(*z), "fn": func }),
                defaults: json!({}),
                outputs,
                diagnostics: json!({ "g2": c(ctx.g2), "g3": c(ctx.g3), "e": cs(&ctx.e) }),
            })
        }
        Cmd::Monodromy { which: MonodromyCmd::Heun { n, b, tau, num } } => {
            let ctx = context(*tau)?;
            let eq = TorusEquation::heun(*n, *b, &ctx)?;
            let (outputs, diagnostics) = monodromy_record(&eq, &num.options())?;
            Ok(Output {
                inputs: json!({ "n": n.0, "B": c(*b), "tau": c(*tau) }),
                defaults: num.echo(&ctx),
                outputs,
                diagnostics,
            })
        }
        Cmd::Monodromy { which: MonodromyCmd::Gle { n, p, a, tau, num } } => {
            let ctx = context(*tau)?;
            let eq = TorusEquation::gle(*n, *p, *a, &ctx)?;
            let (mut outputs, diagnostics) = monodromy_record(&eq, &num.options())?;
            outputs["B"] = c(eq.b());
            Ok(Output {
                inputs: json!({ "n": n.0, "p": c(*p), "A": c(*a), "tau": c(*tau) }),
                defaults: num.echo(&ctx),
                outputs,
                diagnostics,
            })
        }
        Cmd::Hitchin { r, s, tau, check } => {
            let ctx = context(*tau)?;
            let tag = SolutionTag::rs(*r, *s)?;
            let st = family_state(&ctx, &tag, None)?;
            let outputs = json!({
                "wp_p": c(hitchin_wp(&ctx, *r, *s)?),
                "p": c(st.p),
                "A": c(st.a),
                "mu": c(mu_family(&ctx, &tag)?),
                "Z_rs": c(Z_rs(&ctx, *r, *s)?),
            });
            let diagnostics = if *check { to_value(&family_residuals(&ctx, &tag, None)?) } else { json!({}) };
            Ok(Output { inputs: json!({ "r": c(*r), "s": c(*s), "tau": c(*tau), "check": check }), defaults: json!({}), outputs, diagnostics })
        }
        Cmd::Riccati { k, c: cc, tau, check } => {
            let ctx = context(*tau)?;
            let k = *k as usize;
            let tag = SolutionTag::kc(k, *cc)?;
            let st = family_state(&ctx, &tag, None)?;
            let outputs = json!({
                "wp_p": c(riccati_wp(&ctx, k, *cc)?),
                "p": c(st.p),
                "A": c(st.a),
                "mu": c(mu_family(&ctx, &tag)?),
            });
            let diagnostics = if *check {
                json!({
                    "riccati": to_value(&riccati_residual(&ctx, k, *cc, &[*tau])?),
                    "degeneration": to_value(&degeneration_check(&ctx, k, *cc, &[1e-1, 1e-2, 1e-3])?),
                })
            } else {
                json!({})
            };
            Ok(Output { inputs: json!({ "k": k, "C": to_value(cc), "tau": c(*tau), "check": check }), defaults: json!({}), outputs, diagnostics })
        }
        Cmd::Flow { n, p, a, tau0, tau1, steps, check_isomonodromy, num } => {
            let ctx = context(*tau0)?;
            let state = EllipticState { p: *p, a: *a, tau: *tau0 };
            let fopts = FlowOptions::default();
            let inputs = json!({ "n": n.0, "p": c(*p), "A": c(*a), "tau0": c(*tau0), "tau1": c(*tau1), "steps": steps });
            let mut defaults = num.echo(&ctx);
            defaults["flow_tol"] = json!(fopts.tol);
            defaults["guard"] = json!(fopts.guard);
            if *check_isomonodromy {
                let rep = isomonodromy_check(&ctx, state, *n, *tau1, *steps, &fopts, &num.options())?;
                Ok(Output {
                    inputs,
                    defaults,
                    outputs: json!({ "trajectory": to_value(&rep.trajectory), "traces": rep.traces }),
                    diagnostics: json!({ "trace_drift": rep.drift }),
                })
            } else {
                let traj = flow(&ctx, state, *n, *tau1, *steps, &fopts)?;
                Ok(Output { inputs, defaults, outputs: json!({ "trajectory": to_value(&traj) }), diagnostics: json!({}) })
            }
        }
        Cmd::Backlund { n, word, tau, r, s, num } => {
            let ctx = context(*tau)?;
            let theta0 = theta_of_n(Multiplicity::ZERO);
            let theta_n = theta_of_n(*n);
            let found = word_for(*n)?;
            let word = word.as_ref().map_or_else(|| found.clone(), |w| w.0.clone());
            let tag = SolutionTag::rs(*r, *s)?;
            let st = family_state(&ctx, &tag, None)?;
            let state0 = to_pvi(&ctx, Multiplicity::ZERO, st.p, st.a)?;
            let x0 = base_point_image(&ctx, num.q0)?;
            let report = invariance_check(&word, &theta0, &state0, x0, num.tol)?;
            let (theta_after, state_after) = apply_word(&word, &theta0, &state0)?;
            let mut outputs = json!({
                "theta_n": to_value(&theta_n),
                "word_found": found,
                "word": word,
                "theta_after": to_value(&theta_after),
                "state0": to_value(&state0),
                "state_after": to_value(&state_after),
                "invariance": to_value(&report),
            });
            if apply_word_theta(&word, &theta0) == theta_n {
                let (p, a) = from_pvi(&ctx, *n, &state_after, None)?;
                let eq = TorusEquation::gle(*n, p, a, &ctx)?;
                let (data, _) = monodromy_data(&eq, &num.options())?;
                let (cr, csv) = glame::monodromy::canonical_rs(*r, *s);
                outputs["cross_family"] = json!({
                    "p": c(p),
                    "A": c(a),
                    "data": to_value(&data),
                    "expected": to_value(&MonodromyData::Cr { r: cr, s: csv }),
                    "distance": glame::monodromy::data_distance(&data, &MonodromyData::Cr { r: cr, s: csv }),
                });
            }
            let mut defaults = num.echo(&ctx);
            defaults["x0"] = c(x0);
            Ok(Output {
                inputs: json!({ "n": n.0, "tau": c(*tau), "r": c(*r), "s": c(*s) }),
                defaults,
                outputs,
                diagnostics: json!({ "max_delta_kappa": report.max_delta }),
            })
        }
        Cmd::Scan { which } => {
            let (g, report, inputs) = match which {
                ScanCmd::Uniqueness { n, grid } => {
                    let ctx = context(grid.tau)?;
                    let pg = ParamGrid::new(grid.center, grid.half_width, grid.grid);
                    let rep = uniqueness_scan(*n, &ctx, &pg, grid.threshold, &grid.num.options())?;
                    (grid, rep, json!({ "kind": "uniqueness", "n": n.0 }))
                }
                ScanCmd::Cross { n, k, grid } => {
                    let ctx = context(grid.tau)?;
                    let pg = ParamGrid::new(grid.center, grid.half_width, grid.grid);
                    let rep = cross_scan(*n, *k as usize, &ctx, &pg, grid.threshold, &grid.num.options())?;
                    (grid, rep, json!({ "kind": "cross", "n": n.0, "k": k }))
                }
            };
            let ctx = context(g.tau)?;
            let mut inputs = inputs;
            inputs["tau"] = c(g.tau);
            inputs["grid"] = to_value(&report.grid);
            inputs["threshold"] = json!(g.threshold);
            if let Some(path) = &g.csv {
                scan_csv(path, &report)?;
                inputs["csv"] = json!(path);
            }
            Ok(Output {
                inputs,
                defaults: g.num.echo(&ctx),
                outputs: json!({
                    "coincidences": to_value(&report.coincidences),
                    "entries": report.entries.len(),
                    "entries_other": report.entries_other.len(),
                }),
                diagnostics: json!({ "failures": report.failures }),
            })
        }
        Cmd::Counterexample { tau0: t, half_width, grid, half_width1, grid1, match_tol, num } => {
            let tau = t.unwrap_or_else(tau0);
            let ctx = context(tau)?;
            let g1 = ParamGrid::new(C::new(0.0, 0.0), *half_width1, *grid1);
            let g2 = ParamGrid::new(C::new(0.0, 0.0), *half_width, *grid);
            let rep = counterexample(&ctx, Multiplicity::lame(1), Multiplicity::lame(4), &g1, &g2, *match_tol, &num.options())?;
            let b1_near_zero = rep.b1.iter().any(|m| m.b.norm() < 1e-4);
            Ok(Output {
                inputs: json!({ "tau0": c(tau), "grid1": to_value(&g1), "grid2": to_value(&g2), "match_tol": match_tol }),
                defaults: num.echo(&ctx),
                outputs: to_value(&rep),
                diagnostics: json!({
                    "B1_near_zero": b1_near_zero,
                    "B2_found": !rep.b2.is_empty(),
                    "wp_third": c(ctx.wp_only((1.0 + tau) / 3.0)?),
                    "g2": c(ctx.g2),
                }),
            })
        }
        Cmd::Zgen { n, p, tau, a, fiber } => {
            let ctx = context(*tau)?;
            let want = n.total() as usize + 1;
            if a.is_empty() && fiber.is_none() {
                return Err(fail("Arity", format!("give {want} values with --a, or --fiber")));
            }
            let mut outputs = json!({ "deg_sigma": deg_sigma(*n) });
            if !a.is_empty() {
                if a.len() != want {
                    return Err(fail("Arity", format!("expected {want} values of --a, got {}", a.len())));
                }
                outputs["z"] = c(z_np(&ctx, *n, *p, a)?);
                outputs["sigma"] = c(addition_map(&ctx, *n, a));
            }
            if let Some(sigma0) = fiber {
                outputs["fiber"] = to_value(&fiber_witness(&ctx, *n, *p, *sigma0, &FiberOptions::default())?);
            }
            Ok(Output {
                inputs: json!({ "n": n.0, "p": c(*p), "tau": c(*tau), "a": cs(a), "fiber": fiber.map(c) }),
                defaults: json!({}),
                outputs,
                diagnostics: json!({}),
            })
        }
    }
}

fn command_name(cmd: &Cmd) -> &'static str {
    match cmd {
        Cmd::Wp { .. } => "wp",
        Cmd::Monodromy { which: MonodromyCmd::Heun { .. } } => "monodromy heun",
        Cmd::Monodromy { which: MonodromyCmd::Gle { .. } } => "monodromy gle",
        Cmd::Hitchin { .. } => "hitchin",
        Cmd::Riccati { .. } => "riccati",
        Cmd::Flow { .. } => "flow",
        Cmd::Backlund { .. } => "backlund",
        Cmd::Scan { which: ScanCmd::Uniqueness { .. } } => "scan uniqueness",
        Cmd::Scan { which: ScanCmd::Cross { .. } } => "scan cross",
        Cmd::Counterexample { .. } => "counterexample",
        Cmd::Zgen { .. } => "zgen",
    }
}

fn emit(v: &Value) {
    use std::io::Write;
    // A closed pipe is not an error worth reporting.
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(v).expect("json"));
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            emit(&json!({
                "command": argv.get(1..).map(|a| a.join(" ")).unwrap_or_default(),
                "error": { "kind": "Usage", "message": e.render().to_string().trim() },
            }));
            return ExitCode::from(2);
        }
    };
    let name = command_name(&cli.cmd);
    let start = Instant::now();
    match run(&cli.cmd) {
        Ok(out) => {
            emit(&json!({
                "command": name,
                "inputs": out.inputs,
                "defaults": out.defaults,
                "outputs": out.outputs,
                "diagnostics": out.diagnostics,
                "timing": { "seconds": start.elapsed().as_secs_f64() },
            }));
            ExitCode::SUCCESS
        }
        Err(f) => {
            emit(&json!({
                "command": name,
                "error": { "kind": f.kind, "message": f.message },
                "timing": { "seconds": start.elapsed().as_secs_f64() },
            }));
            ExitCode::from(1)
        }
    }
}
