//! Command-line front end: cone estimation, differentiability classification,
//! first-order optimality certification, and the example corpus, with
//! deterministic JSON reports.

mod expr;
mod model;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use conekit::cones::{estimate_cone, Answer, ConeKind};
use conekit::corpus;
use conekit::diff::{
    cone_diff_test, cone_strict_diff_test, cyrenian_check, estimate_differential,
    estimate_strict_differential, DiffStatus, DifferentialReport, FnModel,
};
use conekit::geom::{unit_sphere_grid, Vector};
use conekit::probe::ProbeConfig;
use conekit::regula::{default_tol, regula_check, Satisfied};
use conekit::setmodel::{shapes, SetModel};

use expr::parse_expression;
use model::{load_model, parse_point};

const EXIT_NEGATIVE: u8 = 3;
const EXIT_INCONCLUSIVE: u8 = 4;

/// Numerical tangent-cone and differentiability toolkit.
///
/// Equality comparisons inside piecewise guards hold within 1e-12 absolute.
#[derive(Parser)]
#[command(name = "conekit", version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Probe configuration file (TOML or JSON); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed (overrides config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Zero-quotient threshold (overrides config file).
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write per-direction quotient traces as CSV files into this directory.
    #[arg(long, global = true)]
    trace_dir: Option<PathBuf>,
    /// Worker cap; results are identical for any value.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate one of the four tangent cones of a set at a point.
    Cone {
        /// Model file (JSON/CSV) or shorthand (r1..r9, quadrant, ...).
        #[arg(long)]
        model: String,
        /// Base point as "c1,c2,...,cN".
        #[arg(long)]
        point: String,
        /// Cone kind: tan- | tan+ | ptan- | ptan+.
        #[arg(long)]
        kind: String,
        /// Number of grid directions.
        #[arg(long, default_value_t = 32)]
        grid: usize,
    },
    /// Classify differentiability of an expression at a point.
    Diff {
        /// Scalar expression in x1..xN.
        #[arg(long = "fn")]
        func: String,
        /// Domain model file or shorthand.
        #[arg(long)]
        domain: String,
        #[arg(long)]
        point: String,
        /// Test strict differentiability instead of plain.
        #[arg(long)]
        strict: bool,
        /// direct | cone | cyrenian | all.
        #[arg(long, default_value = "direct")]
        method: String,
        /// Grid directions for the cone method.
        #[arg(long, default_value_t = 18)]
        grid: usize,
    },
    /// Certify the first-order necessary condition at a candidate optimizer.
    Regula {
        /// Objective expression (its gradient is estimated numerically).
        #[arg(long = "fn")]
        func: Option<String>,
        /// Gradient as "g1,...,gN" (alternative to --fn).
        #[arg(long)]
        gradient: Option<String>,
        /// Feasible-set model file or shorthand.
        #[arg(long)]
        feasible: String,
        #[arg(long)]
        point: String,
        /// max | min.
        #[arg(long, default_value = "max")]
        sense: String,
        /// Relative slack on the inner-product comparison.
        #[arg(long)]
        tol: Option<f64>,
        /// Grid directions for the cone estimate.
        #[arg(long, default_value_t = 24)]
        grid: usize,
    },
    /// Run the example corpus and report per-case verdicts.
    Corpus {
        /// Run a single case by name.
        #[arg(long)]
        case: Option<String>,
        /// Rewrite the golden summary file from this run.
        #[arg(long)]
        golden_update: bool,
        /// Golden summary path for regression comparison.
        #[arg(long, default_value = "golden/corpus.json")]
        golden: PathBuf,
        /// Also write a Markdown summary table here.
        #[arg(long)]
        md: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(common: &Common) -> Result<ProbeConfig> {
    let mut cfg = match &common.config {
        None => ProbeConfig::default(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            if path.extension().and_then(|e| e.to_str()) == Some("toml") {
                toml::from_str(&text).context("parsing TOML config")?
            } else {
                serde_json::from_str(&text).context("parsing JSON config")?
            }
        }
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(eps) = common.eps {
        if !(eps > 0.0) {
            bail!("--eps must be positive");
        }
        cfg.eps = eps;
    }
    if common.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    Ok(cfg)
}

fn wrap_report(cfg: &ProbeConfig, command: &str, model_desc: &str, report: Value) -> Value {
    json!({
        "tool": {"name": "conekit", "version": env!("CARGO_PKG_VERSION")},
        "command": command,
        "seed": cfg.seed,
        "config": serde_json::to_value(cfg).expect("config serializes"),
        "model": model_desc,
        "report": report,
    })
}

fn emit(common: &Common, doc: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(doc)? + "\n";
    match &common.out {
        Some(path) => {
            if let Some(dir) = path.parent() {
                if !dir.as_os_str().is_empty() {
                    fs::create_dir_all(dir)?;
                }
            }
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn parse_kind(s: &str) -> Result<ConeKind> {
    Ok(match s {
        "tan-" => ConeKind::TanLower,
        "tan+" => ConeKind::TanUpper,
        "ptan-" => ConeKind::PTanLower,
        "ptan+" => ConeKind::PTanUpper,
        other => bail!("unknown cone kind '{other}' (expected tan-|tan+|ptan-|ptan+)"),
    })
}

fn fn_model(src: &str, domain: SetModel) -> Result<FnModel> {
    let e = parse_expression(src).map_err(|err| anyhow!("in --fn: {err}"))?;
    if e.arity() > domain.ambient_dim() {
        bail!(
            "expression uses x{} but the domain has dimension {}",
            e.arity(),
            domain.ambient_dim()
        );
    }
    let e = Arc::new(e);
    let descriptor = src.to_string();
    Ok(FnModel::scalar(domain, descriptor, move |p: &Vector| e.eval(p)))
}

fn write_traces(dir: &Path, est: &conekit::cones::ConeEstimate) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, d) in est.dirs.iter().enumerate() {
        let name = dir.join(format!("dir_{i:03}.csv"));
        fs::write(&name, d.trace.to_csv())
            .with_context(|| format!("writing {}", name.display()))?;
    }
    Ok(())
}

fn diff_exit(status: DiffStatus) -> ExitCode {
    match status {
        DiffStatus::Differentiable | DiffStatus::StrictlyDifferentiable => ExitCode::SUCCESS,
        DiffStatus::NotDifferentiable | DiffStatus::NotStrict => ExitCode::from(EXIT_NEGATIVE),
        DiffStatus::Inconclusive => ExitCode::from(EXIT_INCONCLUSIVE),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = load_config(&cli.common)?;
    match &cli.cmd {
        Cmd::Cone { model, point, kind, grid } => {
            let m = load_model(model)?;
            let base = parse_point(point)?;
            if base.len() != m.ambient_dim() {
                bail!("point has dimension {}, model has {}", base.len(), m.ambient_dim());
            }
            let k = parse_kind(kind)?;
            let g = unit_sphere_grid(m.ambient_dim(), (*grid).max(2 * m.ambient_dim()), cfg.seed)
                .map_err(|e| anyhow!("building direction grid: {e}"))?;
            let est = estimate_cone(&m, &base, k, &g, &cfg);
            if let Some(dir) = &cli.common.trace_dir {
                write_traces(dir, &est)?;
            }
            let doc = wrap_report(&cfg, "cone", &m.descriptor(), est.to_json());
            emit(&cli.common, &doc)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Diff { func, domain, point, strict, method, grid } => {
            let dom = load_model(domain)?;
            let f = fn_model(func, dom)?;
            let base = parse_point(point)?;
            if base.len() != f.in_dim() {
                bail!("point has dimension {}, domain has {}", base.len(), f.in_dim());
            }
            let run_one = |name: &str| -> Result<DifferentialReport> {
                Ok(match name {
                    "direct" => {
                        if *strict {
                            estimate_strict_differential(&f, &base, &cfg)
                        } else {
                            estimate_differential(&f, &base, &cfg)
                        }
                    }
                    "cone" => {
                        let g = unit_sphere_grid(f.in_dim() + 1, (*grid).max(2 * (f.in_dim() + 1)), cfg.seed)
                            .map_err(|e| anyhow!("building direction grid: {e}"))?;
                        if *strict {
                            cone_strict_diff_test(&f, &base, &g, &cfg)
                        } else {
                            cone_diff_test(&f, &base, &g, &cfg)
                        }
                    }
                    "cyrenian" => {
                        // estimate a candidate map directly, then verify it
                        // along decoupled point/scale sequences
                        let mut rep = estimate_differential(&f, &base, &cfg);
                        if let Some(l) = rep.l.clone() {
                            let ans = cyrenian_check(&f, &base, &l, &cfg);
                            rep.notes.push(format!("decoupled-sequence verification: {ans:?}"));
                            rep.status = match (rep.status, ans) {
                                (DiffStatus::Differentiable, Answer::Yes) => DiffStatus::Differentiable,
                                (DiffStatus::Differentiable, Answer::No) => DiffStatus::NotDifferentiable,
                                (s, Answer::Unknown) => {
                                    if s == DiffStatus::Differentiable {
                                        DiffStatus::Inconclusive
                                    } else {
                                        s
                                    }
                                }
                                (s, _) => s,
                            };
                        }
                        rep
                    }
                    other => bail!("unknown method '{other}' (expected direct|cone|cyrenian|all)"),
                })
            };
            let (status, report_json) = if method == "all" {
                let mut reports = serde_json::Map::new();
                let mut statuses = Vec::new();
                for name in ["direct", "cone", "cyrenian"] {
                    let rep = run_one(name)?;
                    statuses.push(rep.status);
                    reports.insert(name.to_string(), rep.to_json());
                }
                // the worst verdict wins so disagreement is always visible
                let overall = *statuses
                    .iter()
                    .max_by_key(|s| match s {
                        DiffStatus::NotDifferentiable | DiffStatus::NotStrict => 2,
                        DiffStatus::Inconclusive => 1,
                        _ => 0,
                    })
                    .unwrap();
                let agree = statuses.windows(2).all(|w| w[0] == w[1]);
                (
                    overall,
                    json!({"methods": Value::Object(reports), "agree": agree, "status": overall.name()}),
                )
            } else {
                let rep = run_one(method)?;
                (rep.status, rep.to_json())
            };
            let doc = wrap_report(&cfg, "diff", &f.descriptor, report_json);
            emit(&cli.common, &doc)?;
            Ok(diff_exit(status))
        }
        Cmd::Regula { func, gradient, feasible, point, sense, tol, grid } => {
            let m = load_model(feasible)?;
            let base = parse_point(point)?;
            if base.len() != m.ambient_dim() {
                bail!("point has dimension {}, model has {}", base.len(), m.ambient_dim());
            }
            let mut g = match (func, gradient) {
                (Some(_), Some(_)) => bail!("--fn and --gradient are mutually exclusive"),
                (None, None) => bail!("one of --fn or --gradient is required"),
                (None, Some(csv)) => parse_point(csv)?,
                (Some(src), None) => {
                    let f = fn_model(src, shapes::full_space(m.ambient_dim()))?;
                    let rep = estimate_differential(&f, &base, &cfg);
                    let l = rep.l.ok_or_else(|| {
                        anyhow!("could not estimate the gradient of '{src}' at the point ({:?})", rep.status)
                    })?;
                    Vector::from_vec(l.entries_row_major())
                }
            };
            if g.len() != m.ambient_dim() {
                bail!("gradient has dimension {}, model has {}", g.len(), m.ambient_dim());
            }
            match sense.as_str() {
                "max" => {}
                "min" => g = -g,
                other => bail!("unknown sense '{other}' (expected max|min)"),
            }
            let grid_dirs = unit_sphere_grid(m.ambient_dim(), (*grid).max(2 * m.ambient_dim()), cfg.seed)
                .map_err(|e| anyhow!("building direction grid: {e}"))?;
            let rep = regula_check(&g, &m, &base, &grid_dirs, &cfg, tol.unwrap_or_else(default_tol))?;
            let doc = wrap_report(&cfg, "regula", &m.descriptor(), rep.to_json());
            emit(&cli.common, &doc)?;
            Ok(match rep.satisfied {
                Satisfied::Yes => ExitCode::SUCCESS,
                Satisfied::No => ExitCode::from(EXIT_NEGATIVE),
                Satisfied::Unknown => ExitCode::from(EXIT_INCONCLUSIVE),
            })
        }
        Cmd::Corpus { case, golden_update, golden, md } => {
            let reports = match case {
                Some(name) => vec![corpus::run_case(name, &cfg)?],
                None => corpus::run_all(&cfg),
            };
            let summary = corpus::json_summary(&reports);
            let doc = wrap_report(&cfg, "corpus", "example corpus", summary);
            emit(&cli.common, &doc)?;
            if let Some(path) = md {
                fs::write(path, corpus::markdown_summary(&reports))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            let all_pass = reports.iter().all(|r| r.pass());
            // golden regression diffing only applies to full default runs
            if case.is_none() && cli.common.config.is_none() && cli.common.seed.is_none() && cli.common.eps.is_none() {
                let bytes = serde_json::to_string_pretty(&doc)? + "\n";
                if *golden_update {
                    if let Some(dir) = golden.parent() {
                        if !dir.as_os_str().is_empty() {
                            fs::create_dir_all(dir)?;
                        }
                    }
                    fs::write(golden, &bytes)
                        .with_context(|| format!("writing {}", golden.display()))?;
                } else if golden.exists() {
                    let want = fs::read_to_string(golden)?;
                    if want != bytes {
                        eprintln!("corpus summary differs from golden file {}", golden.display());
                        return Ok(ExitCode::from(EXIT_NEGATIVE));
                    }
                }
            }
            Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(EXIT_NEGATIVE) })
        }
    }
}
