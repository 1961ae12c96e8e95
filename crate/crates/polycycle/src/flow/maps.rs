use serde::{Deserialize, Serialize};

use super::integrate::{drive, planar_rhs, Crossing, EventSpec, Flow};
use super::saddle::Branch;
use super::{IntegratorOptions, Saddle, Section};
use crate::error::{Error, Result};
use crate::polyalg::{norm, sub, PlanarField, Point2};
use crate::real::{Precision, Real, TwoFloat};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotOptions {
    pub integrator: IntegratorOptions,
    /// Seed offset relative to the saddle-to-section distance.
    pub delta_rel: f64,
    pub max_time: f64,
    /// Allowed disagreement between the δ and δ/2 shots.
    pub richardson_tol: f64,
}

impl Default for ShotOptions {
    fn default() -> Self {
        ShotOptions {
            integrator: IntegratorOptions::default(),
            delta_rel: 1e-7,
            max_time: 1e4,
            richardson_tol: 1e-7,
        }
    }
}

impl ShotOptions {
    pub fn precise() -> Self {
        ShotOptions {
            integrator: IntegratorOptions::default().with_precision(Precision::DoubleDouble),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotResult {
    pub coord: f64,
    pub coord_half: f64,
    /// False when the δ and δ/2 shots disagree by more than the tolerance.
    pub confident: bool,
    pub time: f64,
    pub hit: Point2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnResult {
    pub coord: f64,
    pub time: f64,
    pub state: Point2,
}

struct Landing {
    coord: f64,
    time: f64,
    state: Point2,
}

/// Integrates from `start` until the first recorded crossing of `target`.
fn first_crossing<T: Real, F: PlanarField>(
    f: &F,
    start: [T; 2],
    backward: bool,
    target: &Section,
    crossing: Crossing,
    opts: &ShotOptions,
) -> Result<Landing> {
    let rhs = planar_rhs::<T, F>(f);
    let ev = [EventSpec {
        section: *target,
        crossing,
        armed: true,
    }];
    let mut landing = None;
    let t1 = if backward {
        -opts.max_time
    } else {
        opts.max_time
    };
    drive(
        &rhs,
        start,
        0.0,
        t1,
        &opts.integrator,
        &ev,
        |_, _| Ok(Flow::Continue),
        |h| {
            landing = Some(Landing {
                coord: h.coord,
                time: h.t,
                state: [h.y[0].to_f64(), h.y[1].to_f64()],
            });
            Ok(Flow::Stop)
        },
    )?;
    landing.ok_or(Error::NoCrossing { t: t1 })
}

fn shoot_once<T: Real, F: PlanarField>(
    f: &F,
    s: &Saddle,
    branch: Branch,
    until: &Section,
    delta: f64,
    opts: &ShotOptions,
) -> Result<Landing> {
    let d = s.branch_dir(branch);
    let start = [
        T::from_f64(s.location[0]) + T::from_f64(delta) * T::from_f64(d[0]),
        T::from_f64(s.location[1]) + T::from_f64(delta) * T::from_f64(d[1]),
    ];
    first_crossing(f, start, !branch.is_unstable(), until, Crossing::Any, opts)
}

/// Follows a separatrix branch from its saddle to the first crossing of
/// `until`; unstable branches forward in time, stable branches backward.
pub fn shoot_separatrix<F: PlanarField>(
    f: &F,
    s: &Saddle,
    branch: Branch,
    until: &Section,
    opts: &ShotOptions,
) -> Result<ShotResult> {
    let delta = opts.delta_rel * norm(sub(until.base, s.location)).max(1e-3);
    let run = |dl: f64| match opts.integrator.precision {
        Precision::Double => shoot_once::<f64, F>(f, s, branch, until, dl, opts),
        Precision::DoubleDouble => shoot_once::<TwoFloat, F>(f, s, branch, until, dl, opts),
    };
    let a = run(delta)?;
    let b = run(0.5 * delta)?;
    Ok(ShotResult {
        coord: a.coord,
        coord_half: b.coord,
        confident: (a.coord - b.coord).abs() <= opts.richardson_tol,
        time: a.time,
        hit: a.state,
    })
}

fn transition<F: PlanarField>(
    f: &F,
    from: &Section,
    to: &Section,
    s: f64,
    backward: bool,
    opts: &ShotOptions,
) -> Result<Landing> {
    if !(s.abs() <= from.half_width) {
        return Err(Error::Invalid(format!(
            "start coordinate {s} outside section half-width {}",
            from.half_width
        )));
    }
    match opts.integrator.precision {
        Precision::Double => {
            first_crossing::<f64, F>(f, from.point_t(s), backward, to, Crossing::Any, opts)
        }
        Precision::DoubleDouble => {
            first_crossing::<TwoFloat, F>(f, from.point_t(s), backward, to, Crossing::Any, opts)
        }
    }
}

/// Coordinate on `to` of the orbit through `from.point(s)`.
pub fn transition_map<F: PlanarField>(
    f: &F,
    from: &Section,
    to: &Section,
    s: f64,
    opts: &ShotOptions,
) -> Result<f64> {
    transition(f, from, to, s, false, opts).map(|l| l.coord)
}

/// Same map under time reversal: follows the orbit backward to `to`.
pub fn transition_map_reversed<F: PlanarField>(
    f: &F,
    from: &Section,
    to: &Section,
    s: f64,
    opts: &ShotOptions,
) -> Result<f64> {
    transition(f, from, to, s, true, opts).map(|l| l.coord)
}

fn return_once<T: Real, F: PlanarField>(
    f: &F,
    sec: &Section,
    waypoints: &[Section],
    s: f64,
    opts: &ShotOptions,
) -> Result<ReturnResult> {
    let rhs = planar_rhs::<T, F>(f);
    let mut events: Vec<EventSpec> = waypoints.iter().map(|w| EventSpec::forward(*w)).collect();
    events.push(EventSpec {
        section: *sec,
        crossing: Crossing::Forward,
        armed: false,
    });
    let home = events.len() - 1;
    let mut next = 0usize;
    let mut result = None;
    drive(
        &rhs,
        sec.point_t::<T>(s),
        0.0,
        opts.max_time,
        &opts.integrator,
        &events,
        |_, _| Ok(Flow::Continue),
        |h| {
            if h.event == home {
                if next == waypoints.len() {
                    result = Some(ReturnResult {
                        coord: h.coord,
                        time: h.t,
                        state: [h.y[0].to_f64(), h.y[1].to_f64()],
                    });
                    return Ok(Flow::Stop);
                }
            } else if h.event == next {
                next += 1;
            }
            Ok(Flow::Continue)
        },
    )?;
    result.ok_or(Error::NoCrossing { t: opts.max_time })
}

/// First return to `sec` after crossing every waypoint section in order.
/// Crossings count when the offset along `Section::normal` increases, so
/// every section's normal must point along the flow.
pub fn return_map<F: PlanarField>(
    f: &F,
    sec: &Section,
    waypoints: &[Section],
    s: f64,
    opts: &ShotOptions,
) -> Result<ReturnResult> {
    match opts.integrator.precision {
        Precision::Double => return_once::<f64, F>(f, sec, waypoints, s, opts),
        Precision::DoubleDouble => return_once::<TwoFloat, F>(f, sec, waypoints, s, opts),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DulacEstimate {
    pub exponent: f64,
    pub coefficient: f64,
    pub fit_residual: f64,
    pub s_window: (f64, f64),
    /// Ratio of the saddle the passage flanks, for comparison.
    pub saddle_ratio: f64,
    pub samples: Vec<(f64, f64)>,
}

/// Least-squares fit of log D(s) against log s for the passage from `from`
/// (started at coordinate `side·s`) to `to`; `backward` follows the passage
/// under time reversal.
#[allow(clippy::too_many_arguments)]
pub fn estimate_dulac_exponent<F: PlanarField>(
    f: &F,
    saddle: &Saddle,
    from: &Section,
    to: &Section,
    side: f64,
    s_values: &[f64],
    backward: bool,
    opts: &ShotOptions,
) -> Result<DulacEstimate> {
    if s_values.len() < 2 {
        return Err(Error::Invalid("need at least two s values".into()));
    }
    if s_values.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Invalid("s values must be positive".into()));
    }
    let sign = if side < 0.0 { -1.0 } else { 1.0 };
    let mut samples = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let d = transition(f, from, to, sign * s, backward, opts)?.coord;
        if d == 0.0 || !d.is_finite() {
            return Err(Error::Numerical(format!("passage value {d} at s = {s}")));
        }
        samples.push((s, d));
    }
    let signs: Vec<bool> = samples.iter().map(|p| p.1 > 0.0).collect();
    if signs.iter().any(|&b| b != signs[0]) {
        return Err(Error::Numerical(
            "passage values change sign across the window".into(),
        ));
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .map(|&(s, d)| (s.ln(), d.abs().ln()))
        .collect();
    let (slope, intercept, resid) = line_fit(&pts);
    let lo = s_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = s_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(DulacEstimate {
        exponent: slope,
        coefficient: intercept.exp(),
        fit_residual: resid,
        s_window: (lo, hi),
        saddle_ratio: if backward {
            1.0 / saddle.ratio
        } else {
            saddle.ratio
        },
        samples,
    })
}

/// Ordinary least squares y = a x + b; returns (a, b, rms residual).
pub(crate) fn line_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let rms = (pts.iter().map(|p| (p.1 - a * p.0 - b).powi(2)).sum::<f64>() / n).sqrt();
    (a, b, rms)
}

/// Geometric sequence of `count` values from `lo` to `hi`.
pub fn geometric_values(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|k| lo * (r * k as f64).exp()).collect()
}
