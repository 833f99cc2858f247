//! Subcommand implementations.

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use quasidiff::boundary::{classify, classify_left, BoundaryClass};
use quasidiff::config::{read_pair, write_pair};
use quasidiff::harmonic::{solve, SolveOptions};
use quasidiff::kernel::{default_window, regime_problem, resolvent_identity_check, Kernel, Normalization, PiecewiseFn, Regime};
use quasidiff::oracle::{calibrate_normalization, standard_family, AtomicChain};
use quasidiff::pair::{QuasiPair, Side, SplitPoint};
use quasidiff::simulate::{
    estimate_chain, estimate_timechange, path_property_audit, simulate_chain, simulate_timechange, LaplaceEstimate, PathSample,
    SimOptions,
};
use serde_json::{json, Value};

use crate::cache::{self, Cache};
use crate::output::{csv_table, jnum, num, Sink};
use crate::{Cli, CliError, Command};

const CALIBRATION_ALPHAS: [f64; 3] = [0.5, 1.0, 2.0];

struct Ctx {
    pair: QuasiPair<f64>,
    /// Canonical pair text; the cache key is built from it.
    text: String,
    sink: Sink,
    cache: Option<Cache>,
    tol: f64,
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if !cli.tol.is_finite() || cli.tol <= 0.0 {
        return Err(CliError::Usage(format!("--tol must be positive, got {}", cli.tol)));
    }
    if let Command::Calibrate { alpha, agree } = &cli.command {
        let pair = match &cli.pair {
            Some(p) => Some(load(p)?.0),
            None => None,
        };
        return calibrate_cmd(cli, pair, &parse_alphas(alpha)?, *agree);
    }
    let path = cli.pair.as_ref().ok_or_else(|| CliError::Usage("--pair <file> is required".into()))?;
    let (pair, text) = load(path)?;
    let sink = Sink::new(cli.out.clone())?;
    let cache_dir = match (&cli.cache_dir, &cli.out) {
        _ if cli.no_cache => None,
        (Some(d), _) => Some(d.clone()),
        (None, Some(o)) => Some(o.join(".cache")),
        (None, None) => None,
    };
    let ctx = Ctx { pair, text, sink, cache: cache_dir.as_deref().map(Cache::new), tol: cli.tol };
    match &cli.command {
        Command::Validate { canonical } => validate_cmd(&ctx, *canonical),
        Command::Classify => classify_cmd(&ctx),
        Command::Solve { alpha, grid } => solve_cmd(&ctx, &parse_alphas(alpha)?, *grid),
        Command::Kernel { alpha, regime, grid, format } => {
            let alphas = parse_alphas(alpha)?;
            let regime = pick_regime(&ctx.pair, regime.as_deref())?;
            if format != "csv" && format != "json" {
                return Err(CliError::Usage(format!("unknown format {format:?} (csv, json)")));
            }
            let c = constant(cli.normalization, cli.tol)?;
            kernel_cmd(&ctx, &alphas, regime, *grid, format, c)
        }
        Command::Resolvent { alpha, regime, f, points, grid } => {
            let alphas = parse_alphas(alpha)?;
            let regime = pick_regime(&ctx.pair, regime.as_deref())?;
            let f: PiecewiseFn<f64> = f.parse()?;
            let c = constant(cli.normalization, cli.tol)?;
            resolvent_cmd(&ctx, &alphas, regime, &f, points.as_deref(), *grid, c)
        }
        Command::Simulate { x0, f, lambda, paths, dt, horizon, sampler, record } => {
            let f: PiecewiseFn<f64> = f.parse()?;
            let opts = SimOptions { dt: *dt, horizon: *horizon, ..Default::default() };
            simulate_cmd(&ctx, *x0, &f, *lambda, *paths, opts, sampler.as_deref(), *record, cli.seed)
        }
        Command::Compare { alpha, threshold } => compare_cmd(&ctx, &parse_alphas(alpha)?, *threshold),
        Command::Calibrate { .. } => unreachable!("handled above"),
    }
}

fn load(path: &PathBuf) -> Result<(QuasiPair<f64>, String), CliError> {
    let raw = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let pair = read_pair(&raw)?;
    let text = write_pair(&pair)?;
    Ok((pair, text))
}

fn parse_alphas(s: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let a: f64 = part.parse().map_err(|_| CliError::Usage(format!("bad α value {part:?}")))?;
        if !a.is_finite() || a <= 0.0 {
            return Err(CliError::Usage(format!("α must be positive and finite, got {part}")));
        }
        out.push(a);
    }
    if out.is_empty() {
        return Err(CliError::Usage("empty α list".into()));
    }
    Ok(out)
}

fn pick_regime(pair: &QuasiPair<f64>, name: Option<&str>) -> Result<Regime, CliError> {
    match name {
        None => Ok(Regime::natural_for(pair.strictness())),
        Some(s) => s.parse().map_err(CliError::Usage),
    }
}

/// Solver options whose explicit panels cover the default window.
fn solve_opts(pair: &QuasiPair<f64>, regime: Regime, tol: f64) -> SolveOptions<f64> {
    let view = if regime == Regime::Darned {
        None
    } else {
        let (lo, hi) = default_window(pair);
        let s = pair.scale();
        Some((s.left_limit(lo).min(s.eval(lo)), s.right_limit(hi).max(s.eval(hi))))
    };
    SolveOptions { tol, view, ..Default::default() }
}

fn build_kernel(ctx: &Ctx, alpha: f64, regime: Regime, c: f64) -> Result<Kernel<f64>, CliError> {
    let problem = regime_problem(&ctx.pair, regime)?;
    let sol = solve(&problem, alpha, &solve_opts(&ctx.pair, regime, ctx.tol))?;
    Ok(Kernel::with_solution(&ctx.pair, Arc::new(sol), regime, c)?)
}

fn c_prob(tol: f64) -> Result<f64, CliError> {
    let opts = SolveOptions { tol, ..Default::default() };
    Ok(calibrate_normalization(&standard_family(), &CALIBRATION_ALPHAS, 1e-6, &opts)?.c_prob)
}

fn constant(n: Normalization, tol: f64) -> Result<f64, CliError> {
    match n {
        Normalization::Paper => Ok(1.0),
        Normalization::Probabilistic => c_prob(tol),
    }
}

fn side_name(s: Side) -> &'static str {
    match s {
        Side::Left => "left",
        Side::Center => "center",
        Side::Right => "right",
    }
}

fn parse_points(s: &str) -> Result<Vec<SplitPoint<f64>>, CliError> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (body, side) = match part.as_bytes()[part.len() - 1] {
            b'-' if part.len() > 1 => (&part[..part.len() - 1], Side::Left),
            b'+' if part.len() > 1 => (&part[..part.len() - 1], Side::Right),
            _ => (part, Side::Center),
        };
        let x: f64 = body.parse().map_err(|_| CliError::Usage(format!("bad point {part:?}")))?;
        out.push(SplitPoint { x, side });
    }
    if out.is_empty() {
        return Err(CliError::Usage("empty point list".into()));
    }
    Ok(out)
}

fn class_json(c: &BoundaryClass<f64>) -> Value {
    json!({
        "kind": format!("{:?}", c.kind),
        "refinement": c.refinement.map(|r| format!("{r:?}")),
        "instantaneous": c.instantaneous,
        "sigma_hat": jnum(c.sigma_hat),
        "lambda_hat": jnum(c.lambda_hat),
    })
}

/// Cached bytes for `(pair, α, tol, extra)`, or a fresh computation.
fn cached<F>(ctx: &Ctx, alpha: f64, extra: &str, compute: F) -> Result<Vec<u8>, CliError>
where
    F: FnOnce() -> Result<Vec<u8>, CliError>,
{
    match &ctx.cache {
        Some(c) => Ok(c.get_or_compute(&cache::key(&ctx.text, alpha, ctx.tol, extra), compute)?.0),
        None => compute(),
    }
}

fn validate_cmd(ctx: &Ctx, canonical: bool) -> Result<(), CliError> {
    if canonical {
        return Ok(ctx.sink.file("pair.toml", ctx.text.as_bytes())?);
    }
    let p = &ctx.pair;
    let m = p.measure();
    let report = json!({
        "valid": true,
        "strictness": format!("{:?}", p.strictness()),
        "l": jnum(m.interval.left),
        "r": jnum(m.interval.right),
        "r_included": m.interval.right_included,
        "base": jnum(p.base()),
        "l_hat": jnum(p.l_hat()),
        "r_hat": jnum(p.r_hat()),
        "atoms": m.atoms().len(),
        "density_pieces": m.densities().len(),
        "jumps": p.scale().jumps().len(),
        "flats": p.scale().flats().len(),
    });
    Ok(ctx.sink.report("validate.jsonl", &[report])?)
}

fn classify_cmd(ctx: &Ctx) -> Result<(), CliError> {
    let right = classify(&ctx.pair)?;
    let left = classify_left(&ctx.pair)?;
    let v = json!({ "left": class_json(&left), "right": class_json(&right) });
    Ok(ctx.sink.report("classify.jsonl", &[v])?)
}

fn solve_cmd(ctx: &Ctx, alphas: &[f64], grid: usize) -> Result<(), CliError> {
    let regime = Regime::natural_for(ctx.pair.strictness());
    let mut reports = Vec::new();
    for &alpha in alphas {
        let k = build_kernel(ctx, alpha, regime, 1.0)?;
        let sol = k.solution();
        reports.push(json!({
            "alpha": jnum(alpha),
            "regime": regime.to_string(),
            "l_hat": jnum(sol.l_hat),
            "r_hat": jnum(sol.r_hat),
            "gamma_bar": jnum(sol.gamma_bar),
            "gamma_underline": jnum(sol.gamma_underline),
            "gamma": jnum(sol.gamma),
            "wronskian": jnum(sol.wronskian),
            "nodes": sol.nodes().len(),
            "max_remainder": jnum(sol.max_remainder),
            "right": class_json(&sol.right),
            "left": class_json(&sol.left),
        }));
        let bytes = cached(ctx, alpha, &format!("solve\0{grid}"), || {
            let mut rows = Vec::new();
            for p in k.state_grid(grid) {
                let y = k.map(p)?;
                let e = sol.eval(y)?;
                let u_left = e.u * (sol.left_a + sol.left_b * e.h);
                let v = sol.gamma * e.u * (e.t + sol.inv_k);
                rows.push(vec![
                    num(p.x),
                    side_name(p.side).into(),
                    num(y),
                    num(e.u),
                    num(e.du_minus),
                    num(e.du_plus),
                    num(e.u * e.h),
                    num(e.u * e.t),
                    num(u_left),
                    num(v),
                ]);
            }
            Ok(csv_table(&["x", "side", "y_hat", "u", "du_minus", "du_plus", "u_minus", "u_plus", "u_left", "v"], &rows)?)
        })?;
        ctx.sink.file(&format!("solve_a{}.csv", num(alpha)), &bytes)?;
    }
    Ok(ctx.sink.report("solve.jsonl", &reports)?)
}

fn kernel_cmd(ctx: &Ctx, alphas: &[f64], regime: Regime, grid: usize, format: &str, c: f64) -> Result<(), CliError> {
    for &alpha in alphas {
        let extra = format!("kernel\0{regime}\0{grid}\0{format}\0{}", num(c));
        let bytes = cached(ctx, alpha, &extra, || {
            let k = build_kernel(ctx, alpha, regime, c)?;
            let pts = k.state_grid(grid);
            let vals = k.grid_values(&pts)?;
            let n = pts.len();
            if format == "json" {
                let v = json!({
                    "alpha": jnum(alpha),
                    "regime": regime.to_string(),
                    "c": jnum(c),
                    "points": pts.iter().map(|p| json!([jnum(p.x), side_name(p.side)])).collect::<Vec<_>>(),
                    "values": (0..n).map(|i| vals[i * n..(i + 1) * n].iter().map(|g| jnum(*g)).collect::<Vec<_>>()).collect::<Vec<_>>(),
                });
                let mut s = v.to_string();
                s.push('\n');
                return Ok(s.into_bytes());
            }
            let mut rows = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    rows.push(vec![
                        num(alpha),
                        num(pts[i].x),
                        side_name(pts[i].side).into(),
                        num(pts[j].x),
                        side_name(pts[j].side).into(),
                        num(vals[i * n + j]),
                    ]);
                }
            }
            Ok(csv_table(&["alpha", "x", "x_side", "y", "y_side", "g"], &rows)?)
        })?;
        ctx.sink.file(&format!("kernel_a{}.{format}", num(alpha)), &bytes)?;
    }
    Ok(())
}

fn resolvent_cmd(
    ctx: &Ctx,
    alphas: &[f64],
    regime: Regime,
    f: &PiecewiseFn<f64>,
    points: Option<&str>,
    grid: usize,
    c: f64,
) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for &alpha in alphas {
        let k = build_kernel(ctx, alpha, regime, c)?;
        let pts = match points {
            Some(s) => parse_points(s)?,
            None => k.state_grid(grid),
        };
        let vals = k.resolvent_many(f, &pts)?;
        for (p, r) in pts.iter().zip(vals) {
            rows.push(vec![num(alpha), num(p.x), side_name(p.side).into(), num(f.eval(p.x)), num(r)]);
        }
    }
    let bytes = csv_table(&["alpha", "x", "side", "f", "rf"], &rows)?;
    Ok(ctx.sink.file("resolvent.csv", &bytes)?)
}

fn estimate_json(e: &LaplaceEstimate) -> Value {
    json!({
        "estimate": jnum(e.value),
        "std_error": jnum(e.std_error),
        "paths": e.paths,
        "horizon_bias": jnum(e.horizon_bias),
        "truncated": e.truncated,
    })
}

#[allow(clippy::too_many_arguments)]
fn simulate_cmd(
    ctx: &Ctx,
    x0: f64,
    f: &PiecewiseFn<f64>,
    lambda: f64,
    paths: usize,
    opts: SimOptions<f64>,
    sampler: Option<&str>,
    record: usize,
    seed: u64,
) -> Result<(), CliError> {
    if f.sup().is_infinite() {
        return Err(CliError::Usage("f must be bounded".into()));
    }
    let atomic = ctx.pair.image_measure().is_finite_atomic();
    let which = sampler.unwrap_or(if atomic { "chain" } else { "timechange" });
    let (use_chain, use_tc) = match which {
        "chain" => (true, false),
        "timechange" => (false, true),
        "both" => (true, true),
        other => return Err(CliError::Usage(format!("unknown sampler {other:?} (chain, timechange, both)"))),
    };
    let fx = |x: f64| f.eval(x);
    let mut report = json!({
        "x0": jnum(x0),
        "lambda": jnum(lambda),
        "horizon": jnum(opts.horizon),
        "seed": seed,
    });
    let mut recorded: Vec<PathSample<f64>> = Vec::new();
    let mut resolution = 0.0;
    let mut estimates = Vec::new();
    if use_chain {
        let e = estimate_chain(&ctx.pair, x0, fx, lambda, opts.horizon, paths, seed)?;
        report["chain"] = estimate_json(&e);
        estimates.push(e);
        recorded = simulate_chain(&ctx.pair, x0, opts.horizon, record.clamp(1, 1000), seed)?;
    }
    if use_tc {
        let e = estimate_timechange(&ctx.pair, x0, fx, lambda, opts, paths, seed)?;
        report["timechange"] = estimate_json(&e);
        estimates.push(e);
        if !use_chain {
            recorded = simulate_timechange(&ctx.pair, x0, opts, record.clamp(1, 200), seed)?;
            resolution = 8.0 * opts.dt.sqrt();
        }
    }
    if let [a, b] = estimates.as_slice() {
        let se = (a.std_error * a.std_error + b.std_error * b.std_error).sqrt();
        report["samplers_z"] = jnum((a.value - b.value) / se);
    }
    let regime = Regime::natural_for(ctx.pair.strictness());
    let reference = c_prob(ctx.tol)
        .and_then(|c| build_kernel(ctx, lambda, regime, c))
        .and_then(|k| Ok(k.resolvent_apply(f, SplitPoint::center(x0))?));
    if let Ok(r) = reference {
        report["reference"] = jnum(r);
        // Only the part of the gap not explained by the horizon counts; the
        // reference itself is good to `tol`.
        let z = |e: &LaplaceEstimate| {
            let d = e.value - r;
            let excess = (d.abs() - e.horizon_bias).max(0.0).copysign(d);
            if excess == 0.0 {
                0.0
            } else {
                excess / e.std_error.hypot(ctx.tol * r.abs())
            }
        };
        report["reference_z"] = Value::Array(estimates.iter().map(|e| jnum(z(e))).collect());
    }
    let audit = path_property_audit(&recorded, &ctx.pair, resolution);
    report["audit"] = json!({
        "paths": recorded.len(),
        "transitions": audit.transitions,
        "violations": audit.violations,
        "jumps": audit.jumps.iter().map(|j| json!([jnum(j.from), jnum(j.to), j.count])).collect::<Vec<_>>(),
    });
    if record > 0 {
        let mut rows = Vec::new();
        for (i, p) in recorded.iter().take(record).enumerate() {
            for k in 0..p.times.len() {
                rows.push(vec![i.to_string(), num(p.times[k]), num(p.states[k]), num(p.image[k])]);
            }
            rows.push(vec![
                i.to_string(),
                num(p.end),
                if p.lifetime.is_some() { "killed".into() } else { "end".into() },
                String::new(),
            ]);
        }
        ctx.sink.file("paths.csv", &csv_table(&["path", "t", "state", "image"], &rows)?)?;
    }
    Ok(ctx.sink.report("simulate.jsonl", &[report])?)
}

fn compare_cmd(ctx: &Ctx, alphas: &[f64], threshold: f64) -> Result<(), CliError> {
    let c = c_prob(ctx.tol)?;
    let regime = Regime::natural_for(ctx.pair.strictness());
    let mut lines = Vec::new();
    let mut failed = 0;
    if ctx.pair.image_measure().is_finite_atomic() {
        let chain = AtomicChain::from_measure(ctx.pair.image_measure())?;
        for &alpha in alphas {
            let k = build_kernel(ctx, alpha, regime, 1.0)?;
            let sol = k.solution();
            let n = chain.len();
            let mut worst = 0.0f64;
            for col in 0..n {
                let mut e = vec![0.0; n];
                e[col] = 1.0;
                let r = chain.resolvent(alpha, &e)?;
                for (row, want) in r.iter().enumerate() {
                    let s = c * sol.kernel(chain.states[row], chain.states[col])? * chain.masses[col];
                    worst = worst.max((s - want).abs() / want.abs().max(f64::MIN_POSITIVE));
                }
            }
            let pass = worst <= threshold;
            failed += usize::from(!pass);
            lines.push(json!({"check": "chain-resolvent", "alpha": jnum(alpha), "c_prob": jnum(c), "max_rel_err": jnum(worst), "threshold": jnum(threshold), "pass": pass}));
        }
    }
    let pts = build_kernel(ctx, alphas[0], regime, 1.0)?.state_grid(7);
    let (lo, hi) = default_window(&ctx.pair);
    let f = PiecewiseFn::indicator(lo, 0.5 * (lo + hi));
    for w in alphas.windows(2) {
        let ka = build_kernel(ctx, w[0], regime, 1.0)?;
        let kb = build_kernel(ctx, w[1], regime, 1.0)?;
        let rep = resolvent_identity_check(&ka, &kb, &f, &pts)?;
        let dev = rep.factor.map(|cp| (cp - c).abs() / c);
        let pass = dev.is_some_and(|d| d <= threshold);
        failed += usize::from(!pass);
        lines.push(json!({
            "check": "resolvent-identity",
            "alpha": jnum(w[0]),
            "beta": jnum(w[1]),
            "factor": rep.factor.map(jnum),
            "c_prob": jnum(c),
            "rel_dev": dev.map(jnum),
            "threshold": jnum(threshold),
            "pass": pass,
        }));
    }
    ctx.sink.report("compare.jsonl", &lines)?;
    if failed > 0 {
        return Err(CliError::Comparison(format!("{failed} of {} checks failed", lines.len())));
    }
    Ok(())
}

fn calibrate_cmd(cli: &Cli, pair: Option<QuasiPair<f64>>, alphas: &[f64], agree: f64) -> Result<(), CliError> {
    let mut family = standard_family();
    if let Some(p) = pair {
        if !p.image_measure().is_finite_atomic() {
            return Err(CliError::Usage("calibration pairs must have finitely many atoms and no density".into()));
        }
        family.push(("user-pair".into(), p));
    }
    let opts = SolveOptions { tol: cli.tol, ..Default::default() };
    let rep = calibrate_normalization(&family, alphas, agree, &opts)?;
    let v = json!({
        "c_prob": jnum(rep.c_prob),
        "spread": jnum(rep.spread),
        "agree": jnum(agree),
        "fits": rep.fits.iter().map(|f| json!({"pair": f.label, "alpha": jnum(f.alpha), "c": jnum(f.c), "residual": jnum(f.residual)})).collect::<Vec<_>>(),
    });
    Ok(Sink::new(cli.out.clone())?.report("calibrate.jsonl", &[v])?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_lists() {
        assert_eq!(parse_alphas("0.5, 1,2").unwrap(), vec![0.5, 1.0, 2.0]);
        assert!(matches!(parse_alphas(""), Err(CliError::Usage(_))));
        assert!(matches!(parse_alphas(" , "), Err(CliError::Usage(_))));
        assert!(matches!(parse_alphas("1,-1"), Err(CliError::Usage(_))));
    }

    #[test]
    fn point_lists() {
        let p = parse_points("-1,0-,0+,2").unwrap();
        assert_eq!(p[0], SplitPoint { x: -1.0, side: Side::Center });
        assert_eq!(p[1], SplitPoint { x: 0.0, side: Side::Left });
        assert_eq!(p[2], SplitPoint { x: 0.0, side: Side::Right });
    }
}
