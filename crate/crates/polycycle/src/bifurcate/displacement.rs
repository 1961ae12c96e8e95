use serde::{Deserialize, Serialize};

use crate::builder::BuiltPolycycle;
use crate::error::{Error, Result};
use crate::flow::{
    find_saddle, return_map, shoot_separatrix, transition_map, Saddle, Section, ShotOptions,
};
use crate::melnikov::PerturbationFamily;
use crate::par::Exec;
use crate::polyalg::PlanarField;

/// Which side of the polycycle carries the first return map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Inner,
    Outer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnSide {
    /// Geometric side relative to the polygon.
    pub side: Side,
    /// Sign of the returning coordinate on section 1.
    pub sign: f64,
    pub delta: f64,
    /// Return coordinate of the seed on the returning side.
    pub returned_to: f64,
}

/// Home section `i` and the waypoint sections crossed before coming back.
pub fn circuit(b: &BuiltPolycycle, i: usize) -> (Section, Vec<Section>) {
    let order = b.circuit_after(i);
    let way = order[..order.len() - 1]
        .iter()
        .map(|&e| b.section(e))
        .collect();
    (b.section(i), way)
}

pub fn detect_sigma0(b: &BuiltPolycycle, opts: &ShotOptions) -> Result<ReturnSide> {
    detect_sigma0_at(b, 1e-3, opts)
}

/// Seeds at x_1 ± δ·v_1 and keeps the side whose orbit completes a circuit.
pub fn detect_sigma0_at(b: &BuiltPolycycle, delta: f64, opts: &ShotOptions) -> Result<ReturnSide> {
    let f = b.any_field();
    let (home, way) = circuit(b, 1);
    let plus = return_map(&f, &home, &way, delta, opts);
    let minus = return_map(&f, &home, &way, -delta, opts);
    let (sign, r) = match (plus, minus) {
        (Ok(r), Err(_)) => (1.0, r),
        (Err(_), Ok(r)) => (-1.0, r),
        (Ok(_), Ok(_)) => {
            return Err(Error::Numerical(
                "orbits return on both sides of the polycycle".into(),
            ))
        }
        (Err(a), Err(c)) => {
            return Err(Error::Numerical(format!(
                "neither side returns: plus side {a}; minus side {c}"
            )))
        }
    };
    let p = home.point(sign * delta);
    let inside = b.lines.iter().all(|l| l.eval(p) > 0.0);
    Ok(ReturnSide {
        side: if inside { Side::Inner } else { Side::Outer },
        sign,
        delta,
        returned_to: r.coord,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionDisplacement {
    pub edge: usize,
    pub b_u: f64,
    pub b_s: f64,
    pub d: f64,
    pub confident: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementVector {
    pub mu: Vec<f64>,
    pub records: Vec<ConnectionDisplacement>,
}

impl DisplacementVector {
    pub fn d(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.d).collect()
    }

    /// Record for edge `i` (1-based).
    pub fn edge(&self, i: usize) -> &ConnectionDisplacement {
        &self.records[i - 1]
    }
}

/// Saddles of the family at μ, continued by Newton from the unperturbed vertices.
pub fn saddles_at<F: PlanarField>(f: &F, b: &BuiltPolycycle) -> Result<Vec<Saddle>> {
    (1..=b.n()).map(|s| find_saddle(f, b.vertex(s))).collect()
}

/// Both separatrix landings on the section of edge `i`.
pub(crate) fn connection_offsets<F: PlanarField>(
    f: &F,
    b: &BuiltPolycycle,
    saddles: &[Saddle],
    i: usize,
    opts: &ShotOptions,
) -> Result<ConnectionDisplacement> {
    let c = b.connection(i);
    let sec = b.section(i);
    let from = &saddles[c.from - 1];
    let to = &saddles[c.to - 1];
    let u = shoot_separatrix(f, from, from.branch_towards(true, sec.base), &sec, opts)?;
    let s = shoot_separatrix(f, to, to.branch_towards(false, sec.base), &sec, opts)?;
    Ok(ConnectionDisplacement {
        edge: c.edge,
        b_u: u.coord,
        b_s: s.coord,
        d: u.coord - s.coord,
        confident: u.confident && s.confident,
    })
}

pub fn displacement_vector(
    fam: &PerturbationFamily,
    b: &BuiltPolycycle,
    mu: &[f64],
    opts: &ShotOptions,
    exec: Exec,
) -> Result<DisplacementVector> {
    let f = fam.at(mu);
    let saddles = saddles_at(&f, b)?;
    let records = exec
        .map_range(b.n(), |k| connection_offsets(&f, b, &saddles, k + 1, opts))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(DisplacementVector {
        mu: mu.to_vec(),
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Unbroken,
    Bypass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BypassCase {
    RatioAboveOne,
    RatioBelowOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BypassDisplacement {
    pub value: f64,
    pub regime: Regime,
    pub which: BypassCase,
    pub expelled: usize,
    /// Edge whose displacement the bypass value replaces.
    pub target_edge: usize,
    /// Edge whose displacement decides the regime.
    pub control_edge: usize,
    pub incoming: ConnectionDisplacement,
    pub outgoing: ConnectionDisplacement,
    /// Landing of the continued separatrix after the passage, when taken.
    pub passage_landing: Option<f64>,
    pub ratio: f64,
}

/// Displacement measured past the expelled saddle `k` (1-based): in the
/// bypass regime the separatrix is carried through the saddle's hyperbolic
/// sector to the next section; otherwise the plain displacement is returned.
/// `sign` is the coordinate sign of the return side.
#[allow(clippy::too_many_arguments)]
pub fn bypass_displacement(
    fam: &PerturbationFamily,
    b: &BuiltPolycycle,
    mu: &[f64],
    k: usize,
    sign: f64,
    opts: &ShotOptions,
    passage: &ShotOptions,
    exec: Exec,
) -> Result<BypassDisplacement> {
    let f = fam.at(mu);
    let saddles = saddles_at(&f, b)?;
    bypass_with_saddles(&f, b, &saddles, k, sign, opts, passage, exec)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn bypass_with_saddles<F: PlanarField>(
    f: &F,
    b: &BuiltPolycycle,
    saddles: &[Saddle],
    k: usize,
    sign: f64,
    opts: &ShotOptions,
    passage: &ShotOptions,
    exec: Exec,
) -> Result<BypassDisplacement> {
    if k == 0 || k > b.n() {
        return Err(Error::Invalid(format!(
            "saddle index {k} outside 1..={}",
            b.n()
        )));
    }
    let ratio = saddles[k - 1].ratio;
    if (ratio - 1.0).abs() <= 1e-6 {
        return Err(Error::RatioNearOne { saddle: k, ratio });
    }
    let c_in = b.incoming(k);
    let c_out = b.outgoing(k);
    let pair = exec.map_range(2, |j| {
        let e = if j == 0 { c_in.edge } else { c_out.edge };
        connection_offsets(f, b, saddles, e, opts)
    });
    let mut it = pair.into_iter();
    let inc = it.next().expect("two entries")?;
    let out = it.next().expect("two entries")?;
    let sec_in = b.section(c_in.edge);
    let sec_out = b.section(c_out.edge);
    let above = ratio > 1.0;
    let (regime, value, landing) = if above {
        if sign * inc.d > 0.0 {
            let src = &saddles[c_in.from - 1];
            let shot = shoot_separatrix(
                f,
                src,
                src.branch_towards(true, sec_in.base),
                &sec_out,
                passage,
            )?;
            (Regime::Bypass, shot.coord - out.b_s, Some(shot.coord))
        } else {
            (Regime::Unbroken, out.d, None)
        }
    } else if sign * out.d < 0.0 {
        let dst = &saddles[c_out.to - 1];
        let shot = shoot_separatrix(
            f,
            dst,
            dst.branch_towards(false, sec_out.base),
            &sec_in,
            passage,
        )?;
        (Regime::Bypass, inc.b_u - shot.coord, Some(shot.coord))
    } else {
        (Regime::Unbroken, inc.d, None)
    };
    Ok(BypassDisplacement {
        value,
        regime,
        which: if above {
            BypassCase::RatioAboveOne
        } else {
            BypassCase::RatioBelowOne
        },
        expelled: k,
        target_edge: if above { c_out.edge } else { c_in.edge },
        control_edge: if above { c_in.edge } else { c_out.edge },
        incoming: inc,
        outgoing: out,
        passage_landing: landing,
        ratio,
    })
}

/// The same bypass value assembled from separate pieces: the plain
/// displacement on the target side plus the passage map's offset from the
/// saddle's own separatrix.
pub fn bypass_decomposition<F: PlanarField>(
    f: &F,
    b: &BuiltPolycycle,
    bp: &BypassDisplacement,
    passage: &ShotOptions,
) -> Result<f64> {
    let sec_in = b.section(bp.incoming.edge);
    let sec_out = b.section(bp.outgoing.edge);
    match bp.which {
        BypassCase::RatioAboveOne => {
            let t = transition_map(f, &sec_in, &sec_out, bp.incoming.b_u, passage)?;
            Ok(bp.outgoing.d + (t - bp.outgoing.b_u))
        }
        BypassCase::RatioBelowOne => {
            let t = crate::flow::transition_map_reversed(
                f,
                &sec_out,
                &sec_in,
                bp.outgoing.b_s,
                passage,
            )?;
            Ok(bp.incoming.d + (bp.incoming.b_s - t))
        }
    }
}
