//! Dormand–Prince 5(4) with PI step-size control, generic over the scalar
//! type and the state dimension.

use crate::real::Real;

// autonomous systems only, so the node coefficients are not needed
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th-order weights minus embedded 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn comb<T: Real, const N: usize>(y: &[T; N], h: T, terms: &[(f64, &[T; N])]) -> [T; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = T::zero();
        for &(c, k) in terms {
            acc += T::from_f64(c) * k[i];
        }
        out[i] += h * acc;
    }
    out
}

pub(crate) struct Trial<T: Real, const N: usize> {
    pub y: [T; N],
    pub k_end: [T; N],
    pub err: f64,
}

/// One Dormand–Prince step of size `h` from `y` with first stage `k1`.
pub(crate) fn dp_step<T: Real, const N: usize, F>(
    f: &F,
    y: &[T; N],
    k1: &[T; N],
    h: f64,
    rtol: f64,
    atol: f64,
) -> Trial<T, N>
where
    F: Fn(&[T; N]) -> [T; N],
{
    let ht = T::from_f64(h);
    let k2 = f(&comb(y, ht, &[(A21, k1)]));
    let k3 = f(&comb(y, ht, &[(A31, k1), (A32, &k2)]));
    let k4 = f(&comb(y, ht, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(&comb(
        y,
        ht,
        &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)],
    ));
    let k6 = f(&comb(
        y,
        ht,
        &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
    ));
    let y_new = comb(
        y,
        ht,
        &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
    );
    let k7 = f(&y_new);
    let mut sum = 0.0;
    for i in 0..N {
        let e = h
            * (E1 * k1[i].to_f64()
                + E3 * k3[i].to_f64()
                + E4 * k4[i].to_f64()
                + E5 * k5[i].to_f64()
                + E6 * k6[i].to_f64()
                + E7 * k7[i].to_f64());
        let sc = atol + rtol * y[i].to_f64().abs().max(y_new[i].to_f64().abs());
        sum += (e / sc) * (e / sc);
    }
    let err = (sum / N as f64).sqrt();
    Trial {
        y: y_new,
        k_end: k7,
        err: if err.is_finite() { err } else { f64::INFINITY },
    }
}

/// PI controller state (Hairer's DOPRI5 constants).
pub(crate) struct Controller {
    err_old: f64,
}

impl Controller {
    pub fn new() -> Self {
        Controller { err_old: 1e-4 }
    }

    /// Factor for the next step after an accepted step with error `err`.
    pub fn accept(&mut self, err: f64) -> f64 {
        let beta = 0.04;
        let expo = 0.2 - 0.75 * beta;
        let e = err.max(1e-10);
        let fac = 0.9 * e.powf(-expo) * self.err_old.powf(beta);
        self.err_old = e.max(1e-4);
        fac.clamp(0.2, 10.0)
    }

    pub fn reject(&self, err: f64) -> f64 {
        (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
    }
}

/// Starting step from the usual two-evaluation heuristic.
pub(crate) fn initial_step<T: Real, const N: usize, F>(
    f: &F,
    y: &[T; N],
    k1: &[T; N],
    dir: f64,
    rtol: f64,
    atol: f64,
    h_max: f64,
) -> f64
where
    F: Fn(&[T; N]) -> [T; N],
{
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..N {
        let sc = atol + rtol * y[i].to_f64().abs();
        d0 += (y[i].to_f64() / sc).powi(2);
        d1 += (k1[i].to_f64() / sc).powi(2);
    }
    d0 = (d0 / N as f64).sqrt();
    d1 = (d1 / N as f64).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(h_max);
    let y1 = comb(y, T::from_f64(dir * h0), &[(1.0, k1)]);
    let k2 = f(&y1);
    let mut d2 = 0.0;
    for i in 0..N {
        let sc = atol + rtol * y[i].to_f64().abs();
        d2 += ((k2[i].to_f64() - k1[i].to_f64()) / sc).powi(2);
    }
    d2 = (d2 / N as f64).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(h_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step_is_fifth_order_on_exponential() {
        let f = |y: &[f64; 1]| [y[0]];
        let y = [1.0];
        let k1 = f(&y);
        let e1 = (dp_step(&f, &y, &k1, 0.1, 1e-10, 1e-12).y[0] - 0.1f64.exp()).abs();
        let e2 = (dp_step(&f, &y, &k1, 0.05, 1e-10, 1e-12).y[0] - 0.05f64.exp()).abs();
        // local error O(h^6)
        let order = (e1 / e2).log2();
        assert!(order > 5.5, "observed local order {order}");
    }
}
