use serde::{Deserialize, Serialize};

use super::displacement::{
    bypass_with_saddles, connection_offsets, detect_sigma0, saddles_at, BypassDisplacement,
    DisplacementVector, Regime, ReturnSide,
};
use crate::builder::BuiltPolycycle;
use crate::error::{Error, Result};
use crate::flow::ShotOptions;
use crate::graphic::ExpulsionPlan;
use crate::melnikov::{
    melnikov_matrix, ConnectionGeometry, MelnikovOptions, MelnikovReport, PerturbationFamily,
};
use crate::par::Exec;
use crate::polyalg::AnyField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakOptions {
    pub shots: ShotOptions,
    /// Options for the shot carried through the expelled saddle.
    pub passage: ShotOptions,
    pub melnikov: MelnikovOptions,
    pub max_iter: usize,
    pub tol: f64,
    /// The bypass equation aims at this fraction of the control displacement,
    /// on the return side, instead of exactly zero.
    pub bias: f64,
    pub exec: Exec,
}

impl Default for BreakOptions {
    fn default() -> Self {
        BreakOptions {
            shots: ShotOptions::precise(),
            passage: ShotOptions::precise(),
            melnikov: MelnikovOptions::default(),
            max_iter: 30,
            tol: 1e-9,
            bias: 1e-8,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakStep {
    pub mu: Vec<f64>,
    pub residual: Vec<f64>,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakResult {
    pub mu: Vec<f64>,
    pub expelled: usize,
    /// 0-based parameter held fixed.
    pub free_index: usize,
    pub free_value: f64,
    pub free_param: f64,
    /// Edges whose displacement is driven to zero, then the bypass target.
    pub equations: Vec<usize>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub linear_prediction: Vec<f64>,
    pub return_side: ReturnSide,
    pub bypass: BypassDisplacement,
    pub displacement: DisplacementVector,
    pub melnikov: MelnikovReport,
    pub history: Vec<BreakStep>,
    pub regime_switches: usize,
    pub broken_field: Option<AnyField>,
}

/// Gaussian elimination with partial pivoting.
pub(crate) fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .expect("nonempty");
        if a[p][c].abs() < 1e-300 {
            return Err(Error::Numerical("singular linear system".into()));
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let k = a[r][c] / a[c][c];
            for cc in c..n {
                a[r][cc] -= k * a[c][cc];
            }
            b[r] -= k * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Ok(x)
}

struct Residual {
    values: Vec<f64>,
    bypass: BypassDisplacement,
}

/// Fixes the parameter of the saddle expelled last in `plan` and solves for
/// the others so that every remaining connection persists, with the
/// expelled saddle bypassed. The free parameter's sign is chosen so that a
/// positive `free_value` opens the bypass on the return side.
pub fn solve_connection_break(
    fam: &PerturbationFamily,
    b: &BuiltPolycycle,
    plan: &ExpulsionPlan,
    free_value: f64,
    opts: &BreakOptions,
) -> Result<BreakResult> {
    let n = b.n();
    if fam.n_params() != n {
        return Err(Error::Invalid(format!(
            "family has {} parameters, polycycle has {n} connections",
            fam.n_params()
        )));
    }
    if plan.permutation.len() != n {
        return Err(Error::Invalid("plan does not match the polycycle".into()));
    }
    let k = *plan.permutation.last().expect("nonempty plan");
    let side = detect_sigma0(b, &opts.shots)?;
    let sigma = side.sign;
    let conns = ConnectionGeometry::all_of_builder(b)?;
    let m = melnikov_matrix(fam, &conns, &opts.melnikov)?;
    let ratio = conns[b.incoming(k).edge - 1].to.ratio;
    if (ratio - 1.0).abs() <= 1e-6 {
        return Err(Error::RatioNearOne { saddle: k, ratio });
    }
    let above = ratio > 1.0;
    let c_in = b.incoming(k).edge;
    let c_out = b.outgoing(k).edge;
    let (control, target) = if above { (c_in, c_out) } else { (c_out, c_in) };
    // parameter most strongly attached to each connection
    let attach = |c: usize| -> usize {
        (0..n)
            .max_by(|&i, &j| {
                m.matrix[c - 1][i]
                    .abs()
                    .total_cmp(&m.matrix[c - 1][j].abs())
            })
            .expect("n ≥ 1")
    };
    let jf = attach(control);
    let mc = m.matrix[control - 1][jf];
    let orient = if above { sigma } else { -sigma };
    let free_param = free_value * orient * mc.signum();
    let unknowns: Vec<usize> = (0..n).filter(|&j| j != jf).collect();
    let mut equations: Vec<usize> = (1..=n).filter(|&c| c != c_in && c != c_out).collect();
    equations.push(target);

    let assemble = |x: &[f64]| -> Vec<f64> {
        let mut mu = vec![0.0; n];
        mu[jf] = free_param;
        for (&j, &v) in unknowns.iter().zip(x) {
            mu[j] = v;
        }
        mu
    };
    let evaluate = |mu: &[f64]| -> Result<Residual> {
        let f = fam.at(mu);
        let saddles = saddles_at(&f, b)?;
        let bp = bypass_with_saddles(
            &f,
            b,
            &saddles,
            k,
            sigma,
            &opts.shots,
            &opts.passage,
            opts.exec,
        )?;
        let plain: Vec<usize> = equations[..equations.len() - 1].to_vec();
        let mut values = opts
            .exec
            .map(&plain, |&c| {
                connection_offsets(&f, b, &saddles, c, &opts.shots).map(|r| r.d)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let control_d = if above { bp.incoming.d } else { bp.outgoing.d };
        values.push(bp.value - sigma * opts.bias * control_d.abs());
        Ok(Residual { values, bypass: bp })
    };

    // first-order prediction from the Melnikov rows; the passage term has
    // zero derivative at the boundary, so the bypass row is the target row
    let jac0: Vec<Vec<f64>> = equations
        .iter()
        .map(|&c| unknowns.iter().map(|&j| m.matrix[c - 1][j]).collect())
        .collect();
    let rhs: Vec<f64> = equations
        .iter()
        .map(|&c| -m.matrix[c - 1][jf] * free_param)
        .collect();
    let prediction = solve_linear(jac0.clone(), rhs)?;
    let mut linear_prediction = vec![0.0; n];
    linear_prediction[jf] = free_param;
    for (&j, &v) in unknowns.iter().zip(&prediction) {
        linear_prediction[j] = v;
    }

    let mut x = prediction;
    let mut bmat = jac0;
    let mut history = Vec::new();
    let mut res = evaluate(&assemble(&x))?;
    let norm_inf = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut switches = 0usize;
    let mut iterations = 0usize;
    history.push(BreakStep {
        mu: assemble(&x),
        residual: res.values.clone(),
        regime: res.bypass.regime,
    });
    while norm_inf(&res.values) >= opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let step = solve_linear(bmat.clone(), res.values.iter().map(|v| -v).collect())?;
        let x_new: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + s).collect();
        let res_new = evaluate(&assemble(&x_new))?;
        if res_new.bypass.regime != res.bypass.regime {
            switches += 1;
        }
        // Broyden update B += (ΔF − B·Δx) Δxᵀ / (Δxᵀ Δx)
        let df: Vec<f64> = res_new
            .values
            .iter()
            .zip(&res.values)
            .map(|(a, b)| a - b)
            .collect();
        let dx2: f64 = step.iter().map(|s| s * s).sum();
        if dx2 > 0.0 {
            for r in 0..bmat.len() {
                let bdx: f64 = bmat[r].iter().zip(&step).map(|(a, s)| a * s).sum();
                let k = (df[r] - bdx) / dx2;
                for c in 0..step.len() {
                    bmat[r][c] += k * step[c];
                }
            }
        }
        x = x_new;
        res = res_new;
        history.push(BreakStep {
            mu: assemble(&x),
            residual: res.values.clone(),
            regime: res.bypass.regime,
        });
        if switches > 4 {
            break;
        }
    }
    let mu = assemble(&x);
    let residual = norm_inf(&res.values);
    let converged = residual < opts.tol;
    if !converged {
        let what = if switches > 4 {
            "connection break (bypass regime oscillates)"
        } else {
            "connection break"
        };
        return Err(Error::NoConvergence {
            what,
            iterations,
            residual,
        });
    }
    let f = fam.at(&mu);
    let saddles = saddles_at(&f, b)?;
    let records = opts
        .exec
        .map_range(n, |c| {
            connection_offsets(&f, b, &saddles, c + 1, &opts.shots)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(BreakResult {
        broken_field: fam.field_at(&mu),
        mu: mu.clone(),
        expelled: k,
        free_index: jf,
        free_value,
        free_param,
        equations,
        residual,
        iterations,
        converged,
        linear_prediction,
        return_side: side,
        bypass: res.bypass,
        displacement: DisplacementVector { mu, records },
        melnikov: m,
        history,
        regime_switches: switches,
    })
}
