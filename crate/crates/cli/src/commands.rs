use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Map, Value};
use wishart_core::matfun::RMat;
use wishart_core::pricing::{fourier_price, zcb_curve, zcb_price};
use wishart_core::simulate::{laplace_sample, step_count, summarize, McConfig};
use wishart_core::transform_cm::cm_transform;
use wishart_core::transform_ode::transform as evaluate;
use wishart_core::{presets, AreSolver, LaplaceQuery, Method, MethodConfig, WishartModel};

use crate::modelfile::ModelFile;
use crate::output::{emit, parse_grid, round15, sig15};
use crate::{
    error_kind, AreChoice, BenchArgs, CallArgs, CliError, Format, MethodFlags, Preset, QueryFlags, Source,
    TransformArgs, ValidateArgs, ZcbArgs,
};

struct Setup {
    file: ModelFile,
    model: WishartModel,
    w: RMat,
    v: RMat,
    preset: Option<Preset>,
}

fn setup(source: &Source, query: &QueryFlags) -> Result<Setup, CliError> {
    let file = match &source.model {
        Some(path) => ModelFile::load(path)?,
        None => ModelFile::reference(),
    };
    let model = file.model()?;
    for w in model.warnings() {
        eprintln!("warning: model: {w:?}");
    }
    let (w, v) = file.weights(query.w.as_ref(), query.v.as_ref())?;
    // Validate the weights once so per-cell errors are method errors only.
    LaplaceQuery::new(w.clone(), v.clone(), 0.0).map_err(|e| CliError::input("query", e.to_string()))?;
    Ok(Setup {
        file,
        model,
        w,
        v,
        preset: source.preset,
    })
}

impl Setup {
    fn query(&self, t: f64) -> LaplaceQuery {
        LaplaceQuery::new(self.w.clone(), self.v.clone(), t).expect("weights validated in setup")
    }

    fn grid(&self, flag: Option<&str>) -> Result<Vec<f64>, CliError> {
        match (flag, self.preset) {
            (Some(s), _) => parse_grid(s).map_err(|e| CliError::input("t_grid", e)),
            (None, Some(Preset::Table1)) => Ok(presets::SHORT_HORIZON.iter().map(|r| r.0).collect()),
            (None, Some(Preset::Table2)) => Ok(presets::LONG_HORIZON.iter().map(|r| r.0).collect()),
            (None, None) => Err(CliError::input("t_grid", "--t-grid is required without a preset")),
        }
    }

    fn methods(&self, flag: Option<&str>, fallback: &[Method]) -> Result<Vec<Method>, CliError> {
        match (flag, self.preset) {
            (Some(s), _) => s
                .split(',')
                .map(|tag| {
                    Method::from_tag(tag.trim()).ok_or_else(|| CliError::input("method", format!("unknown method {tag:?}")))
                })
                .collect(),
            (None, Some(Preset::Table1)) => Ok(Method::ALL.to_vec()),
            (None, Some(Preset::Table2)) => Ok(vec![Method::Linearization, Method::CameronMartin, Method::RungeKutta4]),
            (None, None) => Ok(fallback.to_vec()),
        }
    }

    fn metadata(&self, methods: &[Method], flags: &MethodFlags) -> Value {
        json!({
            "model_hash": self.file.hash(),
            "preset": self.preset.map(|p| match p {
                Preset::Table1 => "table1",
                Preset::Table2 => "table2",
            }),
            "methods": methods.iter().map(|m| m.tag()).collect::<Vec<_>>(),
            "config": {
                "rk4_step": flags.rk4_step,
                "vc_points": flags.vc_points,
                "are_solver": match flags.are_solver {
                    AreChoice::Schur => "schur",
                    AreChoice::ClosedForm => "closed_form",
                },
            },
            "versions": {
                "wishart-cli": env!("CARGO_PKG_VERSION"),
                "wishart-core": wishart_core::VERSION,
            },
        })
    }
}

fn method_config(flags: &MethodFlags, method: Method) -> Result<MethodConfig, CliError> {
    let cfg = MethodConfig {
        method,
        rk4_step: flags.rk4_step,
        quadrature_points: flags.vc_points,
        are_solver: match flags.are_solver {
            AreChoice::Schur => AreSolver::Schur,
            AreChoice::ClosedForm => AreSolver::ClosedForm,
        },
    };
    cfg.validate().map_err(|e| CliError::from_core(&e))?;
    Ok(cfg)
}

fn error_token(e: &wishart_core::Error) -> String {
    format!("error:{}", error_kind(e))
}

pub fn transform(args: &TransformArgs) -> Result<(), CliError> {
    let s = setup(&args.source, &args.query)?;
    let ts = s.grid(args.methods.t_grid.as_deref())?;
    let methods = s.methods(args.methods.method.as_deref(), &[Method::CameronMartin])?;
    let configs: Vec<MethodConfig> = methods
        .iter()
        .map(|&m| method_config(&args.methods, m))
        .collect::<Result<_, _>>()?;

    let cells: Vec<(usize, usize)> = (0..ts.len()).flat_map(|i| (0..methods.len()).map(move |j| (i, j))).collect();
    let results: Vec<_> = cells
        .par_iter()
        .map(|&(i, j)| evaluate(&s.model, &s.query(ts[i]), &configs[j]))
        .collect();

    for (&(i, j), r) in cells.iter().zip(&results) {
        let tag = methods[j].tag();
        match r {
            Ok(r) => {
                for w in &r.diagnostics.warnings {
                    eprintln!("warning: t={} {tag}: {w:?}", sig15(ts[i]));
                }
            }
            Err(e) => eprintln!("warning: t={} {tag}: {e}", sig15(ts[i])),
        }
    }

    let text = match args.format {
        Format::Csv => {
            let mut out = String::from("t");
            for m in &methods {
                out.push(',');
                out.push_str(m.tag());
            }
            out.push('\n');
            for (i, t) in ts.iter().enumerate() {
                out.push_str(&sig15(*t));
                for j in 0..methods.len() {
                    out.push(',');
                    match &results[i * methods.len() + j] {
                        Ok(r) => out.push_str(&sig15(r.value)),
                        Err(e) => out.push_str(&error_token(e)),
                    }
                }
                out.push('\n');
            }
            out
        }
        Format::Json => {
            let rows: Vec<Value> = ts
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let mut values = Map::new();
                    for (j, m) in methods.iter().enumerate() {
                        let cell = match &results[i * methods.len() + j] {
                            Ok(r) => json!(round15(r.value)),
                            Err(e) => json!({ "error": error_kind(e), "message": e.to_string() }),
                        };
                        values.insert(m.tag().into(), cell);
                    }
                    json!({ "t": round15(*t), "values": values })
                })
                .collect();
            let report = json!({ "metadata": s.metadata(&methods, &args.methods), "rows": rows });
            format!("{}\n", serde_json::to_string_pretty(&report).expect("report serializes"))
        }
    };
    emit(&text, args.out.as_deref())
}

fn median(xs: &mut [u128]) -> u128 {
    xs.sort_unstable();
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2
    }
}

/// Median wall time of `reps` evaluations after one discarded warmup.
pub fn time_cell(model: &WishartModel, query: &LaplaceQuery, cfg: &MethodConfig, reps: usize) -> Result<u128, wishart_core::Error> {
    evaluate(model, query, cfg)?;
    let mut samples: Vec<u128> = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        let r = evaluate(model, query, cfg);
        samples.push(start.elapsed().as_nanos().max(1));
        std::hint::black_box(r)?;
    }
    Ok(median(&mut samples))
}

pub fn bench(args: &BenchArgs) -> Result<(), CliError> {
    if args.reps < 11 {
        return Err(CliError::input("reps", "--reps must be at least 11"));
    }
    let s = setup(&args.source, &args.query)?;
    let ts = s.grid(args.methods.t_grid.as_deref())?;
    let methods = s.methods(
        args.methods.method.as_deref(),
        &[Method::CameronMartin, Method::Linearization],
    )?;
    let configs: Vec<MethodConfig> = methods
        .iter()
        .map(|&m| method_config(&args.methods, m))
        .collect::<Result<_, _>>()?;

    // Serial on purpose: concurrent cells would skew each other's timings.
    let timings: Vec<Vec<Result<u128, wishart_core::Error>>> = ts
        .iter()
        .map(|&t| configs.iter().map(|cfg| time_cell(&s.model, &s.query(t), cfg, args.reps)).collect())
        .collect();

    let text = match args.format {
        Format::Csv => {
            let mut out = String::from("t");
            for m in &methods {
                out.push_str(&format!(",{}_ns", m.tag()));
            }
            out.push_str(",reps\n");
            for (t, row) in ts.iter().zip(&timings) {
                out.push_str(&sig15(*t));
                for cell in row {
                    out.push(',');
                    match cell {
                        Ok(ns) => out.push_str(&ns.to_string()),
                        Err(e) => out.push_str(&error_token(e)),
                    }
                }
                out.push_str(&format!(",{}\n", args.reps));
            }
            out
        }
        Format::Json => {
            let rows: Vec<Value> = ts
                .iter()
                .zip(&timings)
                .map(|(t, row)| {
                    let mut cells = Map::new();
                    for (m, cell) in methods.iter().zip(row) {
                        let v = match cell {
                            Ok(ns) => json!(*ns as u64),
                            Err(e) => json!({ "error": error_kind(e), "message": e.to_string() }),
                        };
                        cells.insert(m.tag().into(), v);
                    }
                    json!({ "t": round15(*t), "wall_nanos": cells, "repetitions": args.reps })
                })
                .collect();
            let report = json!({ "metadata": s.metadata(&methods, &args.methods), "timings": rows });
            format!("{}\n", serde_json::to_string_pretty(&report).expect("report serializes"))
        }
    };
    emit(&text, args.out.as_deref())
}

fn maturity(flag: Option<f64>, file: &ModelFile) -> Result<f64, CliError> {
    flag.or(file.contract.map(|c| c.maturity))
        .ok_or_else(|| CliError::input("contract", "no maturity: pass --maturity or add a contract block"))
}

fn pretty(v: &Value) -> String {
    format!("{}\n", serde_json::to_string_pretty(v).expect("report serializes"))
}

pub fn price_zcb(args: &ZcbArgs) -> Result<(), CliError> {
    let file = ModelFile::load(&args.model)?;
    let model = file.short_rate_model()?;
    let tau = maturity(args.maturity, &file)?;
    let price = zcb_price(&model, tau).map_err(|e| CliError::from_core(&e))?;
    let mut diagnostics = json!({
        "a": model.a(),
        "maturity": tau,
        "yield": if tau > 0.0 { json!(round15(-price.ln() / tau)) } else { Value::Null },
    });
    if let Some(grid) = &args.t_grid {
        let taus = parse_grid(grid).map_err(|e| CliError::input("t_grid", e))?;
        let curve = zcb_curve(&model, &taus).map_err(|e| CliError::from_core(&e))?;
        diagnostics["curve"] = json!({
            "maturities": curve.maturities.iter().map(|x| round15(*x)).collect::<Vec<_>>(),
            "prices": curve.prices.iter().map(|x| round15(*x)).collect::<Vec<_>>(),
            "yields": curve.yields.iter().map(|y| y.map(round15)).collect::<Vec<_>>(),
            "decreasing": curve.decreasing,
        });
    }
    let report = json!({ "instrument": "zcb", "price": round15(price), "diagnostics": diagnostics });
    emit(&pretty(&report), args.out.as_deref())
}

pub fn price_call(args: &CallArgs) -> Result<(), CliError> {
    let file = ModelFile::load(&args.model)?;
    let model = file.sv_model()?;
    let strike = args
        .strike
        .or(file.contract.and_then(|c| c.strike))
        .ok_or_else(|| CliError::input("contract", "no strike: pass --strike or add contract.strike"))?;
    let tau = maturity(args.maturity, &file)?;
    let mut cfg = file.carr_madan();
    if let Some(d) = args.damping {
        cfg.damping = d;
    }
    if let Some(w) = args.omega_max {
        cfg.omega_max = w;
    }
    if let Some(n) = args.points {
        cfg.points = n;
    }
    cfg.validate().map_err(|e| CliError::from_core(&e))?;

    let call = fourier_price(&model, strike, tau, cfg.damping, &cfg).map_err(|e| CliError::from_core(&e))?;
    let put = fourier_price(&model, strike, tau, -1.0 - cfg.damping, &cfg).map_err(|e| CliError::from_core(&e))?;
    let forward_gap = model.spot() - strike * (-model.rate() * tau).exp();
    let parity = call.price - put.price - forward_gap;
    let (price, instrument) = if args.put { (put.price, "put") } else { (call.price, "call") };
    let report = json!({
        "instrument": instrument,
        "price": round15(price),
        "diagnostics": {
            "strike": strike,
            "maturity": tau,
            "damping": cfg.damping,
            "put_damping": -1.0 - cfg.damping,
            "grid": {
                "omega_max": cfg.omega_max,
                "points": cfg.points,
                "spacing": round15(cfg.omega_max / (cfg.points - 1) as f64),
            },
            "max_phase_step": round15(call.max_phase_step.max(put.max_phase_step)),
            "call_price": round15(call.price),
            "put_price": round15(put.price),
            "parity_residual": round15(parity),
        },
    });
    emit(&pretty(&report), args.out.as_deref())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct McFile {
    paths: Option<usize>,
    step: Option<f64>,
    seed: Option<u64>,
}

fn mc_config(args: &ValidateArgs) -> Result<McConfig, CliError> {
    let file = match &args.mc_config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::input("mc_config", format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::input("mc_config", e.to_string()))?
        }
        None => McFile::default(),
    };
    let base = McConfig::default();
    let cfg = McConfig {
        paths: args.paths.or(file.paths).unwrap_or(base.paths),
        step: args.step.or(file.step).unwrap_or(base.step),
        seed: args.seed.or(file.seed).unwrap_or(base.seed),
        ..base
    };
    cfg.validate().map_err(|e| CliError::from_core(&e))?;
    Ok(cfg)
}

/// Monte Carlo estimate with paths spread over the rayon pool; the result is
/// identical to the sequential estimator.
pub fn parallel_mc(model: &WishartModel, query: &LaplaceQuery, cfg: &McConfig) -> Result<wishart_core::simulate::McEstimate, wishart_core::Error> {
    cfg.validate()?;
    let draws: Vec<(f64, usize)> = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|p| laplace_sample(model, query, cfg, p))
        .collect::<Result<_, _>>()?;
    let samples: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let clipped = draws.iter().map(|d| d.1).sum();
    Ok(summarize(&samples, clipped, step_count(query.t, cfg.step)))
}

/// `(mc - exact) / stderr`; a zero standard error means the estimator is
/// exact, so only roundoff-level differences count as agreement.
pub fn z_score(mc: f64, exact: f64, stderr: f64) -> f64 {
    let diff = mc - exact;
    if stderr > 0.0 {
        diff / stderr
    } else if diff.abs() <= 1e-14 * exact.abs().max(1e-300) {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

pub fn validate(args: &ValidateArgs) -> Result<(), CliError> {
    let s = setup(&args.source, &args.query)?;
    let ts = parse_grid(&args.t_grid).map_err(|e| CliError::input("t_grid", e))?;
    let cfg = mc_config(args)?;
    let mut rows = Vec::with_capacity(ts.len());
    let mut all_pass = true;
    for &t in &ts {
        let q = s.query(t);
        let exact = cm_transform(&s.model, &q).map_err(|e| CliError::from_core(&e))?.value;
        let mc = parallel_mc(&s.model, &q, &cfg).map_err(|e| CliError::from_core(&e))?;
        let z = z_score(mc.estimate, exact, mc.stderr);
        let pass = z.abs() <= 3.0;
        all_pass &= pass;
        rows.push(json!({
            "t": round15(t),
            "cm": round15(exact),
            "mc": round15(mc.estimate),
            "stderr": round15(mc.stderr),
            "z": if z.is_finite() { json!(round15(z)) } else { json!(z.to_string()) },
            "pass": pass,
            "clip_fraction": round15(mc.clip_fraction),
        }));
    }
    let report = json!({
        "model_hash": s.file.hash(),
        "config": { "paths": cfg.paths, "step": cfg.step, "seed": cfg.seed, "projection": "eigenvalue_clip" },
        "rows": rows,
        "pass": all_pass,
    });
    emit(&pretty(&report), args.out.as_deref())
}
