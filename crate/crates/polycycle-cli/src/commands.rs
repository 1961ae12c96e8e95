use std::path::Path;

use polycycle::approx::{eval_bump, shifted_bump_polynomial, BoxDomain, BumpSpec, ShiftOptions};
use polycycle::bifurcate::{
    circuit, detect_cycles, detect_sigma0, model_map_roots, search_offsets, solve_connection_break,
    trapping_curve, BreakOptions, ContactDirection, CycleOptions, ModelMapSpec, TrappingOptions,
};
use polycycle::builder::{
    build_main3_family, build_polycycle, saddle_data, BuiltPolycycle, Orientation, PolycycleSpec,
};
use polycycle::flow::{
    estimate_dulac_exponent, find_saddle, geometric_values, integrate, IntegratorOptions,
    ShotOptions,
};
use polycycle::graphic::{
    check_ch_conditions, delta_for_permutation, delta_max, graphic_number, stability,
    ExpulsionPlan, RatioVector,
};
use polycycle::melnikov::{
    bump_family, melnikov_matrix, ConnectionGeometry, MelnikovOptions, PerturbationFamily,
};
use polycycle::par::Exec;
use polycycle::polyalg::{AnyField, PlanarField, Point2};
use serde_json::{json, Value};

use crate::report::{
    emit_json, envelope, input, to_value, write_atomic, Failure, Outcome, RunConfig,
};
use crate::svg::{render, Scene};
use crate::{
    BreakArgs, BuildArgs, BumpArgs, CyclesArgs, DulacArgs, FamilyArg, MelnikovArgs, ModelMapArgs,
    OrientationArg, PlotArgs, PolycycleArgs, RatiosArgs, SimulateArgs,
};

/// A polycycle plus, when loaded from a break report, its broken field.
struct Loaded {
    b: BuiltPolycycle,
    broken: Option<AnyField>,
}

fn read_json(path: &Path) -> Outcome<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load(a: &PolycycleArgs) -> Outcome<Loaded> {
    if let Some(path) = &a.field {
        let v = read_json(path)?;
        // a report envelope, or a bare polycycle
        let r = v.get("result").unwrap_or(&v);
        let bv = r.get("polycycle").unwrap_or(r);
        let b: BuiltPolycycle = serde_json::from_value(bv.clone())
            .map_err(|e| Failure::Input(format!("{}: no polycycle: {e}", path.display())))?;
        let broken = match r.pointer("/break/broken_field") {
            Some(f) if !f.is_null() => {
                Some(serde_json::from_value(f.clone()).map_err(|e| {
                    Failure::Input(format!("{}: broken field: {e}", path.display()))
                })?)
            }
            _ => None,
        };
        return Ok(Loaded { b, broken });
    }
    let ratios = a.ratios.clone().unwrap_or_default();
    if let Some(n) = a.n {
        if n != ratios.len() {
            return input(format!("--n {n} does not match {} ratios", ratios.len()));
        }
    }
    let orientation = match a.orientation {
        OrientationArg::Cw => Orientation::Clockwise,
        OrientationArg::Ccw => Orientation::Counterclockwise,
    };
    let b = build_polycycle(&PolycycleSpec::new(ratios, orientation))?;
    Ok(Loaded { b, broken: None })
}

fn polycycle_of(a: &PolycycleArgs) -> Outcome<BuiltPolycycle> {
    Ok(load(a)?.b)
}

fn plan_of(b: &BuiltPolycycle, text: &str) -> Outcome<ExpulsionPlan> {
    let r = RatioVector::new(b.spec.ratios.clone())?;
    if text.trim() == "auto" {
        return Ok(delta_max(&r)?.1);
    }
    let sigma: Vec<usize> = text
        .split(',')
        .map(|t| t.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| {
            Failure::Input(format!(
                "--plan must be `auto` or a permutation, got {text:?}"
            ))
        })?;
    Ok(delta_for_permutation(&r, &sigma)?)
}

fn family_of(
    b: &BuiltPolycycle,
    family: FamilyArg,
    d1: f64,
    d2: f64,
) -> Outcome<PerturbationFamily> {
    Ok(match family {
        FamilyArg::Main3 => build_main3_family(b),
        FamilyArg::Bump => bump_family(b, d1, d2)?,
    })
}

fn pair(v: &[f64], what: &str) -> Outcome<(f64, f64)> {
    match v {
        [a, b] if a.is_finite() && b.is_finite() => Ok((*a, *b)),
        _ => input(format!("{what} needs exactly two finite numbers")),
    }
}

fn positive(v: f64, what: &str) -> Outcome<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        input(format!("{what} must be positive, got {v}"))
    }
}

fn saddles_json(b: &BuiltPolycycle) -> Outcome<Value> {
    let mut out = Vec::new();
    for s in 1..=b.n() {
        let (ls, lu, r) = saddle_data(b, s)?;
        out.push(json!({ "index": s, "location": b.vertex(s), "lambda_s": ls, "lambda_u": lu, "ratio": r }));
    }
    Ok(Value::Array(out))
}

pub fn build(a: &BuildArgs, cfg: &RunConfig) -> Outcome<()> {
    let b = polycycle_of(&a.poly)?;
    let invariants = b.verify();
    if !invariants.ok {
        return Err(Failure::Numerical(format!(
            "built field fails its invariants: {invariants:?}"
        )));
    }
    let result = json!({
        "polycycle": to_value(&b),
        "invariants": to_value(&invariants),
        "saddles": saddles_json(&b)?,
    });
    emit_json(a.out.as_deref(), &envelope(cfg, json!({}), result))
}

pub fn analyze(a: &RatiosArgs, cfg: &RunConfig) -> Outcome<()> {
    let r = RatioVector::new(a.ratios.clone())?;
    let (delta, plan) = delta_max(&r)?;
    let ch = check_ch_conditions(&r)?;
    let result = json!({
        "ratios": r.values(),
        "graphic_number": graphic_number(&r),
        "stability": to_value(&stability(&r)),
        "delta": delta,
        "plan": to_value(&plan),
        "ch_conditions": to_value(&ch),
    });
    emit_json(
        a.out.as_deref(),
        &envelope(cfg, json!({ "ratio_tolerance": 1e-9 }), result),
    )
}

pub fn simulate(a: &SimulateArgs, cfg: &RunConfig) -> Outcome<()> {
    let Loaded { b, broken } = load(&a.poly)?;
    let (x, y) = pair(&a.x0, "--x0")?;
    let opts = IntegratorOptions::default().recording();
    let run = match &a.mu {
        Some(mu) => {
            if mu.len() != b.n() {
                return input(format!("--mu needs {} values, got {}", b.n(), mu.len()));
            }
            let fam = build_main3_family(&b);
            integrate(&fam.at(mu), [x, y], (0.0, a.t_end), &[], &opts)?
        }
        None => match &broken {
            Some(f) => integrate(f, [x, y], (0.0, a.t_end), &[], &opts)?,
            None => integrate(&b.field, [x, y], (0.0, a.t_end), &[], &opts)?,
        },
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Failure::Numerical(format!("CSV: {e}"));
    w.write_record(["t", "x", "y"]).map_err(csv_err)?;
    for (t, p) in run.trajectory.times.iter().zip(&run.trajectory.states) {
        w.write_record([t.to_string(), p[0].to_string(), p[1].to_string()])
            .map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Failure::Numerical(format!("CSV: {e}")))?;
    match &a.csv {
        Some(p) => write_atomic(p, &bytes)?,
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    if a.out.is_some() {
        let result = json!({
            "points": run.trajectory.states.len(),
            "accepted_steps": run.trajectory.accepted,
            "rejected_steps": run.trajectory.rejected,
            "final_time": run.final_time,
            "final_state": run.final_state,
        });
        emit_json(
            a.out.as_deref(),
            &envelope(cfg, json!({ "integrator": to_value(&opts) }), result),
        )?;
    }
    Ok(())
}

fn inner_sign(b: &BuiltPolycycle, sec: &polycycle::flow::Section) -> f64 {
    let p = sec.point(1e-3);
    if b.lines.iter().all(|l| l.eval(p) > 0.0) {
        1.0
    } else {
        -1.0
    }
}

pub fn dulac(a: &DulacArgs, cfg: &RunConfig) -> Outcome<()> {
    let b = polycycle_of(&a.poly)?;
    if a.saddle == 0 || a.saddle > b.n() {
        return input(format!("--saddle must lie in 1..={}", b.n()));
    }
    positive(a.s_min, "--s-min")?;
    if !(a.s_max > a.s_min) || a.count < 2 {
        return input("need s-min < s-max and at least two samples");
    }
    let f = b.any_field();
    let saddle = find_saddle(&f, b.vertex(a.saddle))?;
    let c_in = b.section(b.incoming(a.saddle).edge);
    let c_out = b.section(b.outgoing(a.saddle).edge);
    let (from, to) = if a.reversed {
        (c_out, c_in)
    } else {
        (c_in, c_out)
    };
    let opts = ShotOptions::precise();
    let s = geometric_values(a.s_min, a.s_max, a.count);
    let est = estimate_dulac_exponent(
        &f,
        &saddle,
        &from,
        &to,
        inner_sign(&b, &from),
        &s,
        a.reversed,
        &opts,
    )?;
    let expected = if a.reversed {
        1.0 / saddle.ratio
    } else {
        saddle.ratio
    };
    let result = json!({
        "estimate": to_value(&est),
        "expected_exponent": expected,
        "relative_error": (est.exponent / expected - 1.0).abs(),
    });
    emit_json(
        a.out.as_deref(),
        &envelope(cfg, json!({ "shots": to_value(&opts) }), result),
    )
}

pub fn melnikov(a: &MelnikovArgs, cfg: &RunConfig) -> Outcome<()> {
    let b = polycycle_of(&a.poly)?;
    let fam = family_of(&b, a.family, a.delta1, a.delta2)?;
    let conns = ConnectionGeometry::all_of_builder(&b)?;
    let opts = MelnikovOptions::default();
    let m = melnikov_matrix(&fam, &conns, &opts)?;
    let result = json!({
        "diagonally_dominant": m.is_diagonally_dominant(),
        "report": to_value(&m),
    });
    emit_json(
        a.out.as_deref(),
        &envelope(cfg, json!({ "melnikov": to_value(&opts) }), result),
    )
}

pub fn breaking(a: &BreakArgs, cfg: &RunConfig) -> Outcome<()> {
    let b = polycycle_of(&a.poly)?;
    positive(a.free, "--free")?;
    let plan = plan_of(&b, &a.plan)?;
    let opts = BreakOptions::default();
    let fam = family_of(&b, a.family, a.delta1, a.delta2)?;
    let res = solve_connection_break(&fam, &b, &plan, a.free, &opts)?;
    let result = json!({
        "polycycle": to_value(&b),
        "plan": to_value(&plan),
        "break": to_value(&res),
    });
    emit_json(
        a.out.as_deref(),
        &envelope(cfg, json!({ "break": to_value(&opts) }), result),
    )
}

/// Unstable separatrices of `f` at the continued vertices, traced in short
/// chunks so a failure late in the run keeps the part already computed.
fn separatrices<F: PlanarField>(f: &F, b: &BuiltPolycycle, t_max: f64) -> Vec<Vec<Point2>> {
    let opts = IntegratorOptions {
        escape_radius: 10.0,
        ..IntegratorOptions::default().recording()
    };
    let mut out = Vec::new();
    for s in 1..=b.n() {
        let Ok(saddle) = find_saddle(f, b.vertex(s)) else {
            continue;
        };
        for sign in [1.0, -1.0] {
            let d = saddle.dir_u;
            let mut x = [
                saddle.location[0] + sign * 1e-7 * d[0],
                saddle.location[1] + sign * 1e-7 * d[1],
            ];
            let mut pts = vec![x];
            let mut t = 0.0;
            while t < t_max {
                match integrate(f, x, (0.0, 1.0), &[], &opts) {
                    Ok(run) => {
                        pts.extend(run.trajectory.states.iter().skip(1));
                        x = run.final_state;
                        t += 1.0;
                    }
                    Err(_) => break,
                }
            }
            // keep branches that stay near the polygon
            if pts.len() > 1 && pts.iter().all(|p| p[0].hypot(p[1]) < 3.0) {
                out.push(thin(&pts, 1500));
            }
        }
    }
    out
}

fn thin(pts: &[Point2], max: usize) -> Vec<Point2> {
    let stride = pts.len().div_ceil(max).max(1);
    let mut v: Vec<Point2> = pts.iter().step_by(stride).copied().collect();
    if v.last() != pts.last() {
        v.push(*pts.last().expect("nonempty"));
    }
    v
}

pub fn cycles(a: &CyclesArgs, cfg: &RunConfig) -> Outcome<()> {
    let Loaded { b, broken: stored } = load(&a.poly)?;
    let shots = ShotOptions::precise();
    let side = detect_sigma0(&b, &shots)?;
    let break_opts = BreakOptions::default();
    let free = match (a.free, &stored) {
        (Some(v), _) if !(v >= 0.0 && v.is_finite()) => {
            return input("--free must be zero or positive")
        }
        (Some(v), _) => Some(v),
        (None, Some(_)) => None,
        (None, None) => Some(1e-4),
    };
    let (field, broken) = match (free, stored) {
        (Some(v), _) if v > 0.0 => {
            let (_, plan) = delta_max(&RatioVector::new(b.spec.ratios.clone())?)?;
            let res = solve_connection_break(&build_main3_family(&b), &b, &plan, v, &break_opts)?;
            let f = res
                .broken_field
                .clone()
                .ok_or_else(|| Failure::Numerical("broken field has no polynomial form".into()))?;
            (f, Some(res))
        }
        (Some(_), _) => (b.any_field(), None),
        (None, Some(f)) => (f, None),
        (None, None) => unreachable!("a free value is chosen when nothing is stored"),
    };
    let window = match &a.window {
        Some(w) => pair(w, "--window")?,
        None if side.sign < 0.0 => (-0.1, 0.0),
        None => (0.0, 0.1),
    };
    let copts = CycleOptions {
        grid: a.grid,
        levels: a.levels,
        ..Default::default()
    };
    let (home, way) = circuit(&b, 1);
    let scan = detect_cycles(&field, &home, &way, window, Some(&b.polygon()), &copts)?;
    let topts = TrappingOptions::default();
    let trapping = if a.no_trapping {
        Value::Null
    } else {
        match trapping_curve(&b, &field, ContactDirection::Outward, &topts) {
            Ok(t) => to_value(&t),
            Err(e) => json!({ "error": e.to_string() }),
        }
    };
    let result = json!({
        "polycycle": to_value(&b),
        "return_side": to_value(&side),
        "window": [window.0, window.1],
        "free": free,
        "break": broken.as_ref().map(to_value),
        "scan": to_value(&scan),
        "trapping": trapping,
        "separatrices": separatrices(&field, &b, 60.0),
    });
    let defaults = json!({
        "shots": to_value(&shots),
        "break": to_value(&break_opts),
        "cycles": to_value(&copts),
        "trapping": to_value(&topts),
    });
    emit_json(a.out.as_deref(), &envelope(cfg, defaults, result))
}

pub fn modelmap(a: &ModelMapArgs, cfg: &RunConfig) -> Outcome<()> {
    let window = pair(&a.window, "--window")?;
    if a.grid < 2 {
        return input("--grid must be at least 2");
    }
    let result = if a.search {
        let s = search_offsets(
            &a.ratios,
            a.alpha,
            window,
            a.bound,
            a.target,
            a.trials,
            a.grid / 10,
            a.seed,
            Exec::default(),
        )?;
        json!({ "search": to_value(&s) })
    } else {
        let Some(offsets) = a.offsets.clone() else {
            return input("--offsets is required unless --search is given");
        };
        let spec = ModelMapSpec::new(a.ratios.clone(), offsets, a.alpha, window)?;
        let scan = model_map_roots(&spec, a.grid)?;
        let dense = model_map_roots(&spec, 10 * a.grid)?;
        json!({
            "spec": to_value(&spec),
            "roots": to_value(&scan),
            "dense_root_count": dense.roots.len(),
            "stable_under_refinement": dense.roots.len() == scan.roots.len(),
        })
    };
    let defaults = json!({ "bisection_tolerance": 1e-12, "search_grid": a.grid / 10 });
    emit_json(a.out.as_deref(), &envelope(cfg, defaults, result))
}

pub fn bump_approx(a: &BumpArgs, cfg: &RunConfig) -> Outcome<()> {
    let center = pair(&a.center, "--center")?;
    positive(a.eps, "--eps")?;
    if a.validate < 2 {
        return input("--validate must be at least 2");
    }
    let spec = BumpSpec::new(a.delta1, a.delta2, [center.0, center.1])?;
    let domain = match &a.domain {
        Some(v) if v.len() == 4 => BoxDomain::new([v[0], v[1]], [v[2], v[3]])?,
        Some(_) => return input("--box needs xmin,ymin,xmax,ymax"),
        None => BoxDomain::around(&spec),
    };
    let opts = ShiftOptions::default();
    let q = shifted_bump_polynomial(&spec, &domain, a.eps, a.order, &opts)?;
    let k = a.validate;
    let (mut lo, mut hi, mut qmin) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..k {
        for j in 0..k {
            let x = domain.from_unit([(i as f64 + 0.5) / k as f64, (j as f64 + 0.5) / k as f64]);
            let v = q.eval(x);
            let gap = v - eval_bump(&spec, x);
            lo = lo.min(gap);
            hi = hi.max(gap);
            qmin = qmin.min(v);
        }
    }
    let mut result = json!({
        "bump": to_value(&spec),
        "domain": to_value(&domain),
        "degree": q.degree(),
        "shift": q.shift,
        "grid_errors": q.grid_errors,
        "local_poly": q.local_poly.as_ref().map(to_value),
        "validation": {
            "points": k * k,
            "min_gap": lo,
            "max_gap": hi,
            "min_value": qmin,
            "sandwich": lo > 0.25 * a.eps && hi < 0.75 * a.eps,
            "positive": qmin > 0.0,
        },
    });
    if a.coefficients {
        result["bernstein"] = to_value(&q.bernstein);
    }
    emit_json(
        a.out.as_deref(),
        &envelope(cfg, json!({ "shift": to_value(&opts) }), result),
    )
}

fn read_points(v: &Value) -> Option<Vec<Point2>> {
    serde_json::from_value(v.clone()).ok()
}

fn read_trajectory(path: &Path) -> Outcome<Vec<Point2>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let mut pts = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        let num = |k: usize| -> Outcome<f64> {
            rec.get(k)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Failure::Input(format!("{}: bad row {:?}", path.display(), rec)))
        };
        pts.push([num(1)?, num(2)?]);
    }
    Ok(pts)
}

pub fn plot(a: &PlotArgs) -> Outcome<()> {
    let mut scene = Scene::default();
    for path in &a.report {
        let v = read_json(path)?;
        let r = &v["result"];
        if let Some(b) = r.get("polycycle") {
            let b: BuiltPolycycle = serde_json::from_value(b.clone())
                .map_err(|e| Failure::Input(format!("{}: polycycle: {e}", path.display())))?;
            scene.polygon = Some(b.vertices.clone());
        }
        if let Some(seps) = r.get("separatrices").and_then(Value::as_array) {
            scene
                .separatrices
                .extend(seps.iter().filter_map(read_points));
        }
        if let Some(cs) = r.pointer("/scan/cycles").and_then(Value::as_array) {
            scene
                .cycles
                .extend(cs.iter().filter_map(|c| read_points(&c["orbit"])));
        }
        if let Some(c) = r.pointer("/trapping/curve").and_then(read_points) {
            scene.boundaries.push(c);
        }
    }
    for path in &a.trajectory {
        scene.trajectories.push(read_trajectory(path)?);
    }
    if scene.polygon.is_none() && scene.trajectories.is_empty() {
        return input("nothing to plot: give a report with a polycycle or a trajectory");
    }
    write_atomic(&a.out, render(&scene, a.size).as_bytes())
}
