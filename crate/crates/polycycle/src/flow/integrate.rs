use serde::{Deserialize, Serialize};

use super::rk::{dp_step, initial_step, Controller};
use super::{IntegratorOptions, Section, Trajectory};
use crate::error::{Error, Result};
use crate::polyalg::{PlanarField, Point2};
use crate::real::{lift, Precision, Real, TwoFloat};

/// Which sign change of the section offset counts as a crossing, measured
/// along the direction of integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Crossing {
    /// offset goes from negative to non-negative
    Forward,
    /// offset goes from positive to non-positive
    Backward,
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub section: Section,
    pub crossing: Crossing,
    /// An unarmed event ignores crossings until the orbit has been seen
    /// strictly on the pre-crossing side. Used when starting on the section.
    pub armed: bool,
}

impl EventSpec {
    pub fn any(section: Section) -> Self {
        EventSpec {
            section,
            crossing: Crossing::Any,
            armed: true,
        }
    }

    pub fn forward(section: Section) -> Self {
        EventSpec {
            section,
            crossing: Crossing::Forward,
            armed: true,
        }
    }

    fn crosses(&self, g_old: f64, g_new: f64) -> Option<bool> {
        let fwd = g_old < 0.0 && g_new >= 0.0;
        let bwd = g_old > 0.0 && g_new <= 0.0;
        match self.crossing {
            Crossing::Forward if fwd => Some(true),
            Crossing::Backward if bwd => Some(false),
            Crossing::Any if fwd || bwd => Some(fwd),
            _ => None,
        }
    }

    fn pre_side(&self, g: f64, tol: f64) -> bool {
        match self.crossing {
            Crossing::Forward => g < -tol,
            Crossing::Backward => g > tol,
            Crossing::Any => g.abs() > tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventHit {
    pub event: usize,
    pub time: f64,
    pub state: Point2,
    /// Signed coordinate ⟨x − base, direction⟩ of the crossing point.
    pub coord: f64,
    /// True when the offset increased through zero.
    pub forward: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationResult {
    pub trajectory: Trajectory,
    pub hits: Vec<EventHit>,
    pub final_time: f64,
    pub final_state: Point2,
    /// True when a hit handler ended the run before the end of the time span.
    pub stopped: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct RawHit<T: Real, const N: usize> {
    pub event: usize,
    pub t: f64,
    pub y: [T; N],
    pub coord: f64,
    pub forward: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Flow {
    Continue,
    Stop,
}

pub(crate) struct Outcome<T: Real, const N: usize> {
    pub t: f64,
    pub y: [T; N],
    pub accepted: usize,
    pub rejected: usize,
    pub stopped: bool,
}

#[inline]
fn xy<T: Real, const N: usize>(y: &[T; N]) -> [T; 2] {
    [y[0], y[1]]
}

/// Adaptive integration of an autonomous system whose first two state
/// components are the planar position. `on_step` sees every accepted step,
/// `on_hit` every localized section crossing; either may end the run.
#[allow(clippy::too_many_arguments)]
pub(crate) fn drive<T, const N: usize, F, S, H>(
    rhs: &F,
    y0: [T; N],
    t0: f64,
    t1: f64,
    opts: &IntegratorOptions,
    events: &[EventSpec],
    mut on_step: S,
    mut on_hit: H,
) -> Result<Outcome<T, N>>
where
    T: Real,
    F: Fn(&[T; N]) -> [T; N],
    S: FnMut(f64, &[T; N]) -> Result<Flow>,
    H: FnMut(&RawHit<T, N>) -> Result<Flow>,
{
    if y0.iter().any(|v| !v.to_f64().is_finite()) {
        return Err(Error::Invalid("non-finite initial state".into()));
    }
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(&y);
    let mut ctrl = Controller::new();
    let mut h = initial_step(rhs, &y, &k1, dir, opts.rtol, opts.atol, opts.h_max);
    let mut armed: Vec<bool> = events.iter().map(|e| e.armed).collect();
    let mut g_prev: Vec<f64> = events.iter().map(|e| e.section.offset_t(xy(&y))).collect();
    for (k, e) in events.iter().enumerate() {
        if !armed[k] && e.pre_side(g_prev[k], opts.event_tol) {
            armed[k] = true;
        }
    }
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut stalled_for = 0.0;

    loop {
        let remaining = (t1 - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        if accepted + rejected >= opts.max_steps {
            return Err(Error::MaxSteps(opts.max_steps));
        }
        let last = h >= remaining;
        let h_try = if last { remaining } else { h };
        let trial = dp_step(rhs, &y, &k1, dir * h_try, opts.rtol, opts.atol);
        if !(trial.err <= 1.0) {
            rejected += 1;
            h = h_try * ctrl.reject(trial.err);
            if h < 1e-14 * (1.0 + t.abs()) {
                let p = xy(&y);
                return Err(Error::StepUnderflow {
                    t,
                    x: p[0].to_f64(),
                    y: p[1].to_f64(),
                });
            }
            continue;
        }
        accepted += 1;
        let t_new = if last { t1 } else { t + dir * h_try };
        let y_new = trial.y;

        // section crossings inside this step, earliest first
        let mut found: Vec<(f64, usize, bool)> = Vec::new();
        let mut g_new_all = Vec::with_capacity(events.len());
        for (k, e) in events.iter().enumerate() {
            let g_new = e.section.offset_t(xy(&y_new));
            if armed[k] {
                if let Some(fwd) = e.crosses(g_prev[k], g_new) {
                    found.push((0.0, k, fwd));
                }
            }
            g_new_all.push(g_new);
        }
        if !found.is_empty() {
            let mut hits = Vec::with_capacity(found.len());
            for &(_, k, fwd) in &found {
                let sec = &events[k].section;
                let (theta, yh) = localize(
                    rhs,
                    &y,
                    &k1,
                    dir * h_try,
                    sec,
                    g_prev[k],
                    g_new_all[k],
                    opts,
                );
                hits.push((theta, k, fwd, yh));
            }
            hits.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (theta, k, fwd, yh) in hits {
                let sec = &events[k].section;
                let coord = sec.coord_t(xy(&yh));
                if coord.abs() > sec.half_width {
                    continue;
                }
                let hit = RawHit {
                    event: k,
                    t: t + dir * theta * h_try,
                    y: yh,
                    coord,
                    forward: fwd,
                };
                if on_hit(&hit)? == Flow::Stop {
                    return Ok(Outcome {
                        t: hit.t,
                        y: hit.y,
                        accepted,
                        rejected,
                        stopped: true,
                    });
                }
            }
        }
        for (k, e) in events.iter().enumerate() {
            if !armed[k] && e.pre_side(g_new_all[k], opts.event_tol) {
                armed[k] = true;
            }
        }
        g_prev = g_new_all;

        let dt = h_try;
        t = t_new;
        y = y_new;
        k1 = trial.k_end;

        let p = xy(&y);
        let (px, py) = (p[0].to_f64(), p[1].to_f64());
        if !(px.is_finite() && py.is_finite()) || px.hypot(py) > opts.escape_radius {
            return Err(Error::Escaped { x: px, y: py });
        }
        let speed = k1[0].to_f64().hypot(k1[1].to_f64());
        if speed < opts.stagnation_speed {
            stalled_for += dt;
            if stalled_for > opts.stagnation_time {
                return Err(Error::Stagnation {
                    speed: opts.stagnation_speed,
                    budget: opts.stagnation_time,
                    x: px,
                    y: py,
                });
            }
        } else {
            stalled_for = 0.0;
        }
        if on_step(t, &y)? == Flow::Stop {
            return Ok(Outcome {
                t,
                y,
                accepted,
                rejected,
                stopped: true,
            });
        }
        h = (h_try * ctrl.accept(trial.err)).min(opts.h_max);
    }
    Ok(Outcome {
        t,
        y,
        accepted,
        rejected,
        stopped: false,
    })
}

/// Locates the crossing inside a step by re-taking partial steps from the
/// step's start: Illinois-modified regula falsi on the signed offset, which
/// keeps a bracket like bisection.
#[allow(clippy::too_many_arguments)]
fn localize<T, const N: usize, F>(
    rhs: &F,
    y: &[T; N],
    k1: &[T; N],
    h: f64,
    sec: &Section,
    g0: f64,
    g1: f64,
    opts: &IntegratorOptions,
) -> (f64, [T; N])
where
    T: Real,
    F: Fn(&[T; N]) -> [T; N],
{
    let eval = |theta: f64| -> ([T; N], f64) {
        let yt = dp_step(rhs, y, k1, theta * h, opts.rtol, opts.atol).y;
        let g = sec.offset_t(xy(&yt));
        (yt, g)
    };
    if g1 == 0.0 {
        return (1.0, dp_step(rhs, y, k1, h, opts.rtol, opts.atol).y);
    }
    let (mut a, mut ga) = (0.0f64, g0);
    let (mut b, mut gb) = (1.0f64, g1);
    let mut best = eval(1.0);
    let mut best_theta = 1.0;
    let mut side = 0i8;
    for _ in 0..200 {
        let mut m = (a * gb - b * ga) / (gb - ga);
        if !(m > a && m < b) {
            m = 0.5 * (a + b);
        }
        let (ym, gm) = eval(m);
        best = (ym, gm);
        best_theta = m;
        if gm.abs() <= opts.event_tol || (b - a) * h.abs() < 1e-15 {
            break;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = m;
            gb = gm;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
    }
    (best_theta, best.0)
}

pub(crate) fn planar_rhs<T: Real, F: PlanarField>(f: &F) -> impl Fn(&[T; 2]) -> [T; 2] + '_ {
    move |y: &[T; 2]| f.eval_t(*y)
}

fn run_planar<T: Real, F: PlanarField>(
    f: &F,
    x0: Point2,
    t_span: (f64, f64),
    events: &[EventSpec],
    opts: &IntegratorOptions,
    stop_after_first: bool,
) -> Result<IntegrationResult> {
    let rhs = planar_rhs::<T, F>(f);
    let mut traj = Trajectory::default();
    if opts.record {
        traj.times.push(t_span.0);
        traj.states.push(x0);
    }
    let mut hits = Vec::new();
    let out = drive(
        &rhs,
        lift::<T>(x0),
        t_span.0,
        t_span.1,
        opts,
        events,
        |t, y| {
            if opts.record {
                traj.times.push(t);
                traj.states.push([y[0].to_f64(), y[1].to_f64()]);
            }
            Ok(Flow::Continue)
        },
        |h| {
            hits.push(EventHit {
                event: h.event,
                time: h.t,
                state: [h.y[0].to_f64(), h.y[1].to_f64()],
                coord: h.coord,
                forward: h.forward,
            });
            Ok(if stop_after_first {
                Flow::Stop
            } else {
                Flow::Continue
            })
        },
    )?;
    let final_state = [out.y[0].to_f64(), out.y[1].to_f64()];
    if opts.record && out.stopped {
        traj.times.push(out.t);
        traj.states.push(final_state);
    }
    traj.accepted = out.accepted;
    traj.rejected = out.rejected;
    Ok(IntegrationResult {
        trajectory: traj,
        hits,
        final_time: out.t,
        final_state,
        stopped: out.stopped,
    })
}

/// Integrates over `t_span` (backward when t1 < t0), recording every crossing
/// of the given sections in either direction.
pub fn integrate<F: PlanarField>(
    f: &F,
    x0: Point2,
    t_span: (f64, f64),
    events: &[Section],
    opts: &IntegratorOptions,
) -> Result<IntegrationResult> {
    let specs: Vec<EventSpec> = events.iter().map(|s| EventSpec::any(*s)).collect();
    integrate_events(f, x0, t_span, &specs, opts, false)
}

/// Like [`integrate`] with explicit event specifications; optionally stops at
/// the first recorded crossing.
pub fn integrate_events<F: PlanarField>(
    f: &F,
    x0: Point2,
    t_span: (f64, f64),
    events: &[EventSpec],
    opts: &IntegratorOptions,
    stop_at_first: bool,
) -> Result<IntegrationResult> {
    match opts.precision {
        Precision::Double => run_planar::<f64, F>(f, x0, t_span, events, opts, stop_at_first),
        Precision::DoubleDouble => {
            run_planar::<TwoFloat, F>(f, x0, t_span, events, opts, stop_at_first)
        }
    }
}
