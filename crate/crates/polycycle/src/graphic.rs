//! Combinatorics of hyperbolicity-ratio vectors: graphic number, stability,
//! sign-alternation counts over orderings and the subset-product conditions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;

/// Tolerance for "equals one" comparisons.
pub const ONE_TOL: f64 = 1e-9;
/// Largest n for the exhaustive permutation search.
pub const MAX_SEARCH_N: usize = 10;
/// Largest n for the subset enumeration.
pub const MAX_SUBSET_N: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RatioVector(Vec<f64>);

impl RatioVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Invalid("ratio vector is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Invalid(format!(
                "ratios must be positive and finite, got {v}"
            )));
        }
        Ok(RatioVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpulsionPlan {
    /// 1-based ordering of the saddles.
    pub permutation: Vec<usize>,
    /// R_0, R_1, ..., R_n with R_0 = 1/R_1.
    pub partial_products: Vec<f64>,
    /// Entry i-1 tells whether (R_i − 1)(R_{i−1} − 1) < 0.
    pub sign_changes: Vec<bool>,
    pub delta: usize,
}

pub fn ratio_from_eigenvalues(lambda_s: f64, lambda_u: f64) -> Result<f64> {
    if !(lambda_s < 0.0 && lambda_u > 0.0 && lambda_s.is_finite() && lambda_u.is_finite()) {
        return Err(Error::Invalid(format!(
            "not a saddle: eigenvalues {lambda_s}, {lambda_u}"
        )));
    }
    Ok(-lambda_s / lambda_u)
}

pub fn graphic_number(r: &RatioVector) -> f64 {
    r.values().iter().product()
}

pub fn stability(r: &RatioVector) -> Stability {
    let g = graphic_number(r);
    if g > 1.0 + ONE_TOL {
        Stability::Stable
    } else if g < 1.0 - ONE_TOL {
        Stability::Unstable
    } else {
        Stability::Undetermined
    }
}

#[inline]
fn side(v: f64) -> i8 {
    if v > 1.0 + ONE_TOL {
        1
    } else if v < 1.0 - ONE_TOL {
        -1
    } else {
        0
    }
}

fn check_permutation(n: usize, sigma: &[usize]) -> Result<()> {
    if sigma.len() != n {
        return Err(Error::Invalid(format!(
            "permutation has {} entries, expected {n}",
            sigma.len()
        )));
    }
    let mut seen = vec![false; n];
    for &s in sigma {
        if s == 0 || s > n || std::mem::replace(&mut seen[s - 1], true) {
            return Err(Error::Invalid(format!(
                "{sigma:?} is not a permutation of 1..={n}"
            )));
        }
    }
    Ok(())
}

pub fn delta_for_permutation(r: &RatioVector, sigma: &[usize]) -> Result<ExpulsionPlan> {
    let n = r.len();
    check_permutation(n, sigma)?;
    let v = r.values();
    let mut prods = Vec::with_capacity(n + 1);
    let mut acc = 1.0;
    for &s in sigma {
        acc *= v[s - 1];
        prods.push(acc);
    }
    prods.insert(0, 1.0 / prods[0]);
    let sign_changes: Vec<bool> = (1..=n)
        .map(|i| side(prods[i]) * side(prods[i - 1]) < 0)
        .collect();
    let delta = sign_changes.iter().filter(|&&b| b).count();
    Ok(ExpulsionPlan {
        permutation: sigma.to_vec(),
        partial_products: prods,
        sign_changes,
        delta,
    })
}

/// Count only, on 0-based indices; the hot loop of the search.
fn count(v: &[f64], sigma: &[usize]) -> usize {
    let mut acc = v[sigma[0]];
    let mut prev = side(acc);
    let mut c = usize::from(prev != 0);
    for &s in &sigma[1..] {
        acc *= v[s];
        let cur = side(acc);
        if cur * prev < 0 {
            c += 1;
        }
        prev = cur;
    }
    c
}

/// Lexicographic successor in place; false after the last permutation.
fn next_permutation(a: &mut [usize]) -> bool {
    let n = a.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

pub fn delta_max(r: &RatioVector) -> Result<(usize, ExpulsionPlan)> {
    delta_max_with(r, Exec::default())
}

/// Exhaustive search, sharded by the first entry of the permutation. Each
/// shard scans in lexicographic order, so the first maximizer per shard and
/// the smallest first entry among tied shards give the lexicographic minimum.
pub fn delta_max_with(r: &RatioVector, exec: Exec) -> Result<(usize, ExpulsionPlan)> {
    let n = r.len();
    if n > MAX_SEARCH_N {
        return Err(Error::SearchSpace {
            n,
            max: MAX_SEARCH_N,
        });
    }
    let v = r.values();
    let shards = exec.map_range(n, |first| {
        let mut perm: Vec<usize> = std::iter::once(first)
            .chain((0..n).filter(|&k| k != first))
            .collect();
        let mut best = (count(v, &perm), perm.clone());
        while next_permutation(&mut perm[1..]) {
            let c = count(v, &perm);
            if c > best.0 {
                best = (c, perm.clone());
                if c == n {
                    break;
                }
            }
        }
        best
    });
    let (d, perm) = shards
        .into_iter()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .expect("n ≥ 1");
    let sigma: Vec<usize> = perm.iter().map(|k| k + 1).collect();
    let plan = delta_for_permutation(r, &sigma)?;
    debug_assert_eq!(plan.delta, d);
    Ok((d, plan))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChVerdict {
    pub pass: bool,
    /// A 1-based subset whose product equals one, if any.
    pub witness: Option<Vec<usize>>,
}

/// Every nonempty subset product must differ from 1 by more than the tolerance.
/// Subsets are visited by size, then lexicographically.
pub fn check_ch_conditions(r: &RatioVector) -> Result<ChVerdict> {
    let n = r.len();
    if n > MAX_SUBSET_N {
        return Err(Error::SearchSpace {
            n,
            max: MAX_SUBSET_N,
        });
    }
    let v = r.values();
    for size in 1..=n {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let p: f64 = idx.iter().map(|&k| v[k]).product();
            if (p - 1.0).abs() <= ONE_TOL {
                return Ok(ChVerdict {
                    pass: false,
                    witness: Some(idx.iter().map(|k| k + 1).collect()),
                });
            }
            // next combination
            let mut i = size;
            while i > 0 && idx[i - 1] == n - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for k in i..size {
                idx[k] = idx[k - 1] + 1;
            }
        }
    }
    Ok(ChVerdict {
        pass: true,
        witness: None,
    })
}
