use serde::{Deserialize, Serialize};

use super::geometry::hausdorff_distance;
use crate::error::{Error, Result};
use crate::flow::{integrate, return_map, Section, ShotOptions};
use crate::par::Exec;
use crate::polyalg::{PlanarField, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleOptions {
    pub shots: ShotOptions,
    /// Uniform grid points on the window.
    pub grid: usize,
    /// Extra points far·2^−k, k = 1..=levels, toward the polycycle.
    pub levels: usize,
    /// Largest |π(t) − t| accepted at a refined root.
    pub accept: f64,
    pub max_orbit_points: usize,
    pub exec: Exec,
}

impl Default for CycleOptions {
    fn default() -> Self {
        CycleOptions {
            shots: ShotOptions::precise(),
            grid: 60,
            levels: 40,
            accept: 1e-10,
            max_orbit_points: 2000,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    /// Signed coordinate on the home section.
    pub fixed_point: f64,
    pub period: f64,
    /// Derivative of the return map at the fixed point.
    pub multiplier: f64,
    /// None when no reference curve was given.
    pub hausdorff_to_polycycle: Option<f64>,
    pub residual: f64,
    /// Distance between the orbit's start and end after one period.
    pub closure_gap: f64,
    pub orbit: Vec<Point2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleScan {
    pub cycles: Vec<CycleRecord>,
    /// Grid coordinates whose orbits did not come back.
    pub failed_points: Vec<f64>,
    pub evaluated: usize,
}

fn scan_grid(window: (f64, f64), grid: usize, levels: usize) -> Vec<f64> {
    let (lo, hi) = window;
    let mut ts: Vec<f64> = (0..grid.max(2))
        .map(|k| lo + (hi - lo) * k as f64 / (grid.max(2) - 1) as f64)
        .collect();
    // refine toward zero when the window touches it
    if lo >= 0.0 || hi <= 0.0 {
        let far = if hi.abs() > lo.abs() { hi } else { lo };
        let mut e = far;
        for _ in 0..levels {
            e *= 0.5;
            if e > lo.min(hi) && e < lo.max(hi) {
                ts.push(e);
            }
        }
    }
    ts.retain(|&t| t != 0.0);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// Fixed points of the first return map to `home` in the signed coordinate
/// window, each with its period, multiplier and one traced period.
/// `reference` is a closed curve, typically the polycycle, for the distance.
pub fn detect_cycles<F: PlanarField + Sync>(
    f: &F,
    home: &Section,
    waypoints: &[Section],
    window: (f64, f64),
    reference: Option<&[Point2]>,
    opts: &CycleOptions,
) -> Result<CycleScan> {
    if !(window.0 < window.1) {
        return Err(Error::Invalid("cycle window must satisfy lo < hi".into()));
    }
    let ts = scan_grid(window, opts.grid, opts.levels);
    let g = |t: f64| return_map(f, home, waypoints, t, &opts.shots).map(|r| r.coord - t);
    let vals = opts.exec.map(&ts, |&t| g(t).ok());
    let failed_points: Vec<f64> = ts
        .iter()
        .zip(&vals)
        .filter(|(_, v)| v.is_none())
        .map(|(t, _)| *t)
        .collect();
    let mut brackets = Vec::new();
    for k in 0..ts.len().saturating_sub(1) {
        if let (Some(a), Some(b)) = (vals[k], vals[k + 1]) {
            if a == 0.0 || (a < 0.0) != (b < 0.0) {
                brackets.push((ts[k], a, ts[k + 1]));
            }
        }
    }
    let found = opts.exec.map(&brackets, |&(a, fa, b)| {
        refine(f, home, waypoints, a, fa, b, reference, opts)
    });
    let mut cycles = Vec::new();
    for c in found {
        if let Some(c) = c? {
            cycles.push(c);
        }
    }
    Ok(CycleScan {
        cycles,
        failed_points,
        evaluated: ts.len(),
    })
}

#[allow(clippy::too_many_arguments)]
fn refine<F: PlanarField>(
    f: &F,
    home: &Section,
    waypoints: &[Section],
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    reference: Option<&[Point2]>,
    opts: &CycleOptions,
) -> Result<Option<CycleRecord>> {
    let g = |t: f64| return_map(f, home, waypoints, t, &opts.shots);
    if fa != 0.0 {
        let tol = |x: f64| 1e-11f64.min(1e-9 * x.abs()).max(1e-300);
        while (b - a).abs() > tol(0.5 * (a + b)) {
            let m = 0.5 * (a + b);
            let fm = match g(m) {
                Ok(r) => r.coord - m,
                Err(_) => return Ok(None),
            };
            if fm == 0.0 {
                a = m;
                break;
            }
            if (fm < 0.0) == (fa < 0.0) {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        // endpoint with the smaller residual
        let fb = g(b).map(|r| r.coord - b).unwrap_or(f64::INFINITY);
        if fb.abs() < fa.abs() {
            a = b;
        }
    }
    let t = a;
    let at = g(t)?;
    let residual = (at.coord - t).abs();
    if residual >= opts.accept {
        return Ok(None);
    }
    let h = 1e-4 * t.abs();
    let multiplier = match (g(t + h), g(t - h)) {
        (Ok(p), Ok(m)) => (p.coord - m.coord) / (2.0 * h),
        _ => f64::NAN,
    };
    let x0 = home.point(t);
    let run = integrate(
        f,
        x0,
        (0.0, at.time),
        &[],
        &opts.shots.integrator.recording(),
    )?;
    let end = run.final_state;
    let closure_gap = (end[0] - x0[0]).hypot(end[1] - x0[1]);
    let states = run.trajectory.states;
    let stride = states.len().div_ceil(opts.max_orbit_points.max(2)).max(1);
    let mut orbit: Vec<Point2> = states.iter().step_by(stride).copied().collect();
    if orbit.last() != states.last() {
        orbit.push(*states.last().expect("recorded run"));
    }
    let hausdorff_to_polycycle = match reference {
        Some(r) => {
            let mut closed = r.to_vec();
            if closed.first() != closed.last() {
                closed.push(closed[0]);
            }
            Some(hausdorff_distance(&orbit, &closed)?)
        }
        None => None,
    };
    Ok(Some(CycleRecord {
        fixed_point: t,
        period: at.time,
        multiplier,
        hausdorff_to_polycycle,
        residual,
        closure_gap,
        orbit,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::{Poly2, VectorField2};

    #[test]
    fn grid_refines_toward_zero() {
        let ts = scan_grid((0.0, 0.1), 5, 10);
        assert!(!ts.contains(&0.0));
        assert!(ts.iter().any(|&t| (t - 0.1 / 1024.0).abs() < 1e-18));
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn finds_the_unit_circle() {
        // x' = -y + x(1 - r²), y' = x + y(1 - r²): stable cycle r = 1
        let r2 = Poly2::x1()
            .mul(&Poly2::x1())
            .add(&Poly2::x2().mul(&Poly2::x2()));
        let damp = Poly2::constant(1.0).sub(&r2);
        let f = VectorField2::new(
            Poly2::x2().scale(-1.0).add(&Poly2::x1().mul(&damp)),
            Poly2::x1().add(&Poly2::x2().mul(&damp)),
        );
        // section on the positive x axis, coordinate 1.5 − r, normal along the flow
        let home = Section::new([1.5, 0.0], [-1.0, 0.0], 2.0);
        let opts = CycleOptions {
            shots: ShotOptions::default(),
            grid: 9,
            levels: 0,
            ..Default::default()
        };
        let scan = detect_cycles(&f, &home, &[], (0.1, 1.0), None, &opts).unwrap();
        assert_eq!(scan.cycles.len(), 1);
        let c = &scan.cycles[0];
        assert!((c.fixed_point - 0.5).abs() < 1e-9);
        assert!((c.period - 2.0 * std::f64::consts::PI).abs() < 1e-7);
        // multiplier e^{-2·2π}
        assert!((c.multiplier - (-4.0 * std::f64::consts::PI).exp()).abs() < 1e-5);
        assert!(c.closure_gap < 1e-8);
    }
}
