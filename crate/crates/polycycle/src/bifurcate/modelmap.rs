use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;

/// Ψ(t) − α·t with Ψ(t) = (…((t^{r1} + b1)^{r2} + b2)…)^{rn} + bn on (ρ, ε).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMapSpec {
    pub ratios: Vec<f64>,
    pub offsets: Vec<f64>,
    pub alpha: f64,
    pub rho: f64,
    pub eps_upper: f64,
}

impl ModelMapSpec {
    pub fn new(
        ratios: Vec<f64>,
        offsets: Vec<f64>,
        alpha: f64,
        window: (f64, f64),
    ) -> Result<Self> {
        let s = ModelMapSpec {
            ratios,
            offsets,
            alpha,
            rho: window.0,
            eps_upper: window.1,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratios.is_empty() || self.ratios.len() != self.offsets.len() {
            return Err(Error::Invalid(format!(
                "need matching nonempty ratios and offsets, got {} and {}",
                self.ratios.len(),
                self.offsets.len()
            )));
        }
        if self.ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Invalid("ratios must be positive".into()));
        }
        if self.offsets.iter().any(|b| !b.is_finite()) {
            return Err(Error::Invalid("offsets must be finite".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Invalid("alpha must be positive".into()));
        }
        if !(self.rho < self.eps_upper) {
            return Err(Error::Invalid("window must satisfy rho < eps_upper".into()));
        }
        Ok(())
    }

    pub fn lower(&self) -> f64 {
        self.rho.max(0.0)
    }
}

pub fn model_map_eval(spec: &ModelMapSpec, t: f64) -> Result<f64> {
    let mut v = t;
    for (level, (&r, &b)) in spec.ratios.iter().zip(&spec.offsets).enumerate() {
        if v < 0.0 {
            return Err(Error::Domain {
                level: level + 1,
                base: v,
            });
        }
        v = v.powf(r) + b;
    }
    Ok(v - spec.alpha * t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootScan {
    pub roots: Vec<f64>,
    /// Grid points where |Ψ − αt| < 1e−12 without a sign change.
    pub tangencies: Vec<f64>,
    /// Grid points outside the valid domain.
    pub invalid_points: usize,
    pub grid: usize,
}

fn bisect(spec: &ModelMapSpec, mut a: f64, mut fa: f64, mut b: f64) -> f64 {
    while (b - a).abs() > 1e-12 {
        let m = 0.5 * (a + b);
        match model_map_eval(spec, m) {
            Ok(0.0) => return m,
            Ok(fm) if (fm < 0.0) == (fa < 0.0) => {
                a = m;
                fa = fm;
            }
            Ok(_) => b = m,
            // the valid domain is an interval, so an invalid midpoint is on a's side
            Err(_) => a = m,
        }
    }
    0.5 * (a + b)
}

/// Smallest valid t in (a, b], given a invalid and b valid. Every level is
/// increasing in t, so the valid domain is an interval reaching to the right.
fn domain_edge(spec: &ModelMapSpec, mut a: f64, mut b: f64) -> f64 {
    loop {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if model_map_eval(spec, m).is_ok() {
            b = m;
        } else {
            a = m;
        }
    }
    b
}

/// Sign-change bracketing on `grid` interior points of the window, each
/// bracket refined by bisection to 1e−12. When the valid domain starts inside
/// the window, its edge is located and bracketed against the first grid point.
pub fn model_map_roots(spec: &ModelMapSpec, grid: usize) -> Result<RootScan> {
    spec.validate()?;
    if grid < 2 {
        return Err(Error::Invalid("grid needs at least two points".into()));
    }
    let lo = spec.lower();
    let hi = spec.eps_upper;
    let ts: Vec<f64> = (1..=grid)
        .map(|k| lo + (hi - lo) * k as f64 / (grid + 1) as f64)
        .collect();
    let vals: Vec<Option<f64>> = ts.iter().map(|&t| model_map_eval(spec, t).ok()).collect();
    let mut roots = Vec::new();
    let mut tangencies = Vec::new();
    // segment from `a` (or the domain edge past it) to the valid grid point b
    let leading = |a: f64, b: f64, w: f64| -> Option<f64> {
        let e = if model_map_eval(spec, a).is_ok() {
            a
        } else {
            domain_edge(spec, a, b)
        };
        let fe = model_map_eval(spec, e).ok()?;
        (fe != 0.0 && w != 0.0 && (fe < 0.0) != (w < 0.0)).then(|| bisect(spec, e, fe, b))
    };
    if let Some(w) = vals[0] {
        roots.extend(leading(lo, ts[0], w));
    }
    for k in 0..grid {
        let Some(v) = vals[k] else {
            if let Some(&Some(w)) = vals.get(k + 1) {
                roots.extend(leading(ts[k], ts[k + 1], w));
            }
            continue;
        };
        if v == 0.0 {
            roots.push(ts[k]);
            continue;
        }
        if k + 1 < grid {
            if let Some(w) = vals[k + 1] {
                if w != 0.0 && (v < 0.0) != (w < 0.0) {
                    roots.push(bisect(spec, ts[k], v, ts[k + 1]));
                    continue;
                }
            }
        }
        if v.abs() < 1e-12 {
            tangencies.push(ts[k]);
        }
    }
    Ok(RootScan {
        roots,
        tangencies,
        invalid_points: vals.iter().filter(|v| v.is_none()).count(),
        grid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetSearch {
    pub seed: u64,
    pub trials: usize,
    pub target: usize,
    pub best_count: usize,
    pub best_offsets: Vec<f64>,
    pub best_roots: Vec<f64>,
    /// Root count of the best configuration on a 10× denser grid.
    pub dense_count: usize,
    pub found: bool,
}

/// Seeded random search over offsets in the box [−bound, bound]^n for a
/// configuration with `target` roots on the window.
#[allow(clippy::too_many_arguments)]
pub fn search_offsets(
    ratios: &[f64],
    alpha: f64,
    window: (f64, f64),
    bound: f64,
    target: usize,
    trials: usize,
    grid: usize,
    seed: u64,
    exec: Exec,
) -> Result<OffsetSearch> {
    ModelMapSpec::new(ratios.to_vec(), vec![0.0; ratios.len()], alpha, window)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let configs: Vec<Vec<f64>> = (0..trials)
        .map(|_| {
            ratios
                .iter()
                .map(|_| rng.gen_range(-bound..=bound))
                .collect()
        })
        .collect();
    let counts = exec.map(&configs, |b| {
        let spec =
            ModelMapSpec::new(ratios.to_vec(), b.clone(), alpha, window).expect("validated above");
        model_map_roots(&spec, grid)
            .map(|s| s.roots.len())
            .unwrap_or(0)
    });
    // first configuration reaching the best count, for reproducibility
    let mut best = 0usize;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
        if c >= target {
            best = k;
            break;
        }
    }
    let spec = ModelMapSpec::new(ratios.to_vec(), configs[best].clone(), alpha, window)?;
    let scan = model_map_roots(&spec, grid)?;
    let dense = model_map_roots(&spec, 10 * grid)?;
    Ok(OffsetSearch {
        seed,
        trials,
        target,
        best_count: scan.roots.len(),
        best_offsets: configs[best].clone(),
        best_roots: scan.roots,
        dense_count: dense.roots.len(),
        found: counts[best] >= target && dense.roots.len() == counts[best],
    })
}
