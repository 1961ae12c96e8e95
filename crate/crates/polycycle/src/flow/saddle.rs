use serde::{Deserialize, Serialize};

use crate::builder::eigenvalues_2x2;
use crate::error::{Error, Result};
use crate::polyalg::{norm, PlanarField, Point2, Vec2};
use crate::real::{lift, Real, TwoFloat};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Saddle {
    pub location: Point2,
    pub lambda_s: f64,
    pub lambda_u: f64,
    pub dir_s: Vec2,
    pub dir_u: Vec2,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    UnstablePlus,
    UnstableMinus,
    StablePlus,
    StableMinus,
}

impl Branch {
    pub fn is_unstable(self) -> bool {
        matches!(self, Branch::UnstablePlus | Branch::UnstableMinus)
    }

    pub fn sign(self) -> f64 {
        match self {
            Branch::UnstablePlus | Branch::StablePlus => 1.0,
            _ => -1.0,
        }
    }
}

impl Saddle {
    /// Unit vector of a separatrix branch.
    pub fn branch_dir(&self, b: Branch) -> Vec2 {
        let d = if b.is_unstable() {
            self.dir_u
        } else {
            self.dir_s
        };
        [b.sign() * d[0], b.sign() * d[1]]
    }

    /// The branch of the given kind that points towards `target`.
    pub fn branch_towards(&self, unstable: bool, target: Point2) -> Branch {
        let d = if unstable { self.dir_u } else { self.dir_s };
        let to = [target[0] - self.location[0], target[1] - self.location[1]];
        let plus = d[0] * to[0] + d[1] * to[1] >= 0.0;
        match (unstable, plus) {
            (true, true) => Branch::UnstablePlus,
            (true, false) => Branch::UnstableMinus,
            (false, true) => Branch::StablePlus,
            (false, false) => Branch::StableMinus,
        }
    }
}

fn eigenvector(j: [[f64; 2]; 2], lambda: f64) -> Vec2 {
    let r1 = [j[0][0] - lambda, j[0][1]];
    let r2 = [j[1][0], j[1][1] - lambda];
    let r = if norm(r1) >= norm(r2) { r1 } else { r2 };
    let mut v = [-r[1], r[0]];
    let l = norm(v);
    v = [v[0] / l, v[1] / l];
    // deterministic sign: largest component positive
    if (v[0].abs() >= v[1].abs() && v[0] < 0.0) || (v[1].abs() > v[0].abs() && v[1] < 0.0) {
        v = [-v[0], -v[1]];
    }
    v
}

/// Newton on X(x) = 0 from `seed`, polished in double-double, then classified.
pub fn find_saddle<F: PlanarField>(f: &F, seed: Point2) -> Result<Saddle> {
    find_saddle_with(f, seed, 1e-12, 50)
}

pub fn find_saddle_with<F: PlanarField>(
    f: &F,
    seed: Point2,
    tol: f64,
    max_iter: usize,
) -> Result<Saddle> {
    let mut x: [TwoFloat; 2] = lift(seed);
    let mut converged = false;
    let mut res = f64::INFINITY;
    let mut polish = 0;
    for _ in 0..max_iter {
        let v = f.eval_t(x);
        res = v[0].to_f64().hypot(v[1].to_f64());
        if !res.is_finite() {
            break;
        }
        if res < tol {
            converged = true;
            // two extra double-double iterations for a clean location
            polish += 1;
            if polish > 2 {
                break;
            }
        }
        let j = f.jacobian_t(x);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.to_f64() == 0.0 {
            break;
        }
        let dx = (j[1][1] * v[0] - j[0][1] * v[1]) / det;
        let dy = (j[0][0] * v[1] - j[1][0] * v[0]) / det;
        x = [x[0] - dx, x[1] - dy];
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "saddle Newton iteration",
            iterations: max_iter,
            residual: res,
        });
    }
    let loc = [x[0].to_f64(), x[1].to_f64()];
    let j = f.jacobian(loc);
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det >= 0.0 {
        return Err(Error::NotASaddle {
            x: loc[0],
            y: loc[1],
            det,
        });
    }
    let (ls, lu) = eigenvalues_2x2(j);
    Ok(Saddle {
        location: loc,
        lambda_s: ls,
        lambda_u: lu,
        dir_s: eigenvector(j, ls),
        dir_u: eigenvector(j, lu),
        ratio: -ls / lu,
    })
}
