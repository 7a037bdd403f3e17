//! Chebyshev expansions of `e^{-iHt}` and `e^{-τH}`.
//!
//! With the spectrum mapped to `[-1, 1]` by `X = (H - c) / a`,
//!
//! ```text
//! e^{-iHt} = e^{-ict} [J_0(at) + 2 Σ_k (-i)^k J_k(at) T_k(X)]
//! e^{-τH}  = e^{-τ(c-a)} [Ĩ_0(aτ) + 2 Σ_k (-1)^k Ĩ_k(aτ) T_k(X)]
//! ```
//!
//! where `Ĩ_k(x) = e^{-x} I_k(x)`. Both Bessel sequences come from Miller's
//! downward recurrence, normalized by `J_0 + 2 Σ J_{2k} = 1` and
//! `Ĩ_0 + 2 Σ Ĩ_k = 1`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hamiltonian::SpinOperator;
use crate::state::StateVector;

pub const DEFAULT_TOLERANCE: f64 = 1e-15;
pub const DEFAULT_MAX_ORDER: usize = 20_000;

/// Values above this are rescaled during the downward recurrence.
const RESCALE: f64 = 1e250;

/// Bessel functions `J_0(z) ..= J_n(z)` for `z ≥ 0`.
pub fn bessel_j_sequence(z: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if z == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = n.max(z.ceil() as usize) + 30 + (10.0 * z.cbrt()) as usize;
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-300; // J_k
    let mut even_sum = 0.0;
    for k in (1..=start).rev() {
        let prev = (2.0 * k as f64 / z) * cur - next;
        next = cur;
        cur = prev;
        // `cur` now holds J_{k-1}
        if k - 1 <= n {
            out[k - 1] = cur;
        }
        if (k - 1) % 2 == 0 && k > 1 {
            even_sum += cur;
        }
        if cur.abs() > RESCALE {
            next /= RESCALE;
            cur /= RESCALE;
            even_sum /= RESCALE;
            out.iter_mut().for_each(|v| *v /= RESCALE);
        }
    }
    let norm = cur + 2.0 * even_sum;
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

/// Scaled modified Bessel functions `e^{-x} I_0(x) ..= e^{-x} I_n(x)` for `x ≥ 0`.
pub fn scaled_bessel_i_sequence(x: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = n + 30 + (10.0 * x.sqrt()) as usize;
    let mut next = 0.0;
    let mut cur = 1e-300;
    let mut sum = 0.0;
    for k in (1..=start).rev() {
        let prev = (2.0 * k as f64 / x) * cur + next;
        next = cur;
        cur = prev;
        if k - 1 <= n {
            out[k - 1] = cur;
        }
        if k > 1 {
            sum += cur;
        }
        if cur > RESCALE {
            next /= RESCALE;
            cur /= RESCALE;
            sum /= RESCALE;
            out.iter_mut().for_each(|v| *v /= RESCALE);
        }
    }
    let norm = cur + 2.0 * sum;
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

/// Index one past the last coefficient kept: the expansion stops once two
/// consecutive magnitudes fall below `tolerance · max|c|`.
fn truncation(mags: &[f64], tolerance: f64) -> Option<usize> {
    let max = mags.iter().copied().fold(0.0, f64::max);
    let cut = tolerance * max;
    (1..mags.len()).find(|&k| mags[k] < cut && mags[k - 1] < cut).map(|k| k - 1)
}

/// Starting order for the adaptive search.
fn order_guess(arg: f64, real_time: bool) -> usize {
    if real_time {
        (arg + 10.0 * arg.cbrt() + 20.0) as usize
    } else {
        (9.0 * arg.sqrt() + 20.0) as usize
    }
}

/// A truncated expansion of `f(H)` applied as `e^{log_prefactor} Σ_k c_k T_k(X)`.
#[derive(Clone, Debug)]
pub struct ChebyshevPlan {
    pub e_min: f64,
    pub e_max: f64,
    pub order: usize,
    pub coefficients: Vec<C64>,
    pub tolerance: f64,
    pub log_prefactor: C64,
}

impl ChebyshevPlan {
    fn build(
        arg: f64,
        real_time: bool,
        tolerance: f64,
        max_order: usize,
    ) -> Result<(Vec<f64>, usize)> {
        let mut n = order_guess(arg, real_time).max(8);
        loop {
            let seq = if real_time {
                bessel_j_sequence(arg, n)
            } else {
                scaled_bessel_i_sequence(arg, n)
            };
            let mags: Vec<f64> = seq.iter().map(|v| v.abs()).collect();
            if let Some(len) = truncation(&mags, tolerance) {
                if len - 1 > max_order {
                    return Err(Error::ChebyshevOrder {
                        required: len - 1,
                        max: max_order,
                    });
                }
                return Ok((seq[..len].to_vec(), len - 1));
            }
            if n > max_order {
                return Err(Error::ChebyshevOrder {
                    required: n,
                    max: max_order,
                });
            }
            n *= 2;
        }
    }

    fn affine(e_min: f64, e_max: f64) -> Result<(f64, f64)> {
        if !(e_min.is_finite() && e_max.is_finite()) || e_max < e_min {
            return Err(Error::InvalidModel(format!(
                "invalid spectral bounds [{e_min}, {e_max}]"
            )));
        }
        // pad so the mapped spectrum sits strictly inside [-1, 1]
        let pad = 1e-8 * (e_max - e_min).max(1.0);
        let (lo, hi) = (e_min - pad, e_max + pad);
        Ok((0.5 * (hi + lo), 0.5 * (hi - lo)))
    }

    /// Expansion of `e^{-iHt}` for `H` with spectrum inside `[e_min, e_max]`.
    pub fn real_time(e_min: f64, e_max: f64, t: f64, tolerance: f64, max_order: usize) -> Result<Self> {
        let (c, a) = Self::affine(e_min, e_max)?;
        let z = a * t.abs();
        let (j, order) = Self::build(z, true, tolerance, max_order)?;
        // e^{-izX} for t ≥ 0; negative t conjugates the phase factors.
        let minus_i = C64::new(0.0, -t.signum());
        let mut phase = C64::new(1.0, 0.0);
        let coefficients = j
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let w = if k == 0 { 1.0 } else { 2.0 };
                let out = phase * (w * v);
                phase *= minus_i;
                out
            })
            .collect();
        Ok(Self {
            e_min,
            e_max,
            order,
            coefficients,
            tolerance,
            log_prefactor: C64::new(0.0, -c * t),
        })
    }

    /// Expansion of `e^{-τH}` for `τ ≥ 0`.
    pub fn imaginary_time(e_min: f64, e_max: f64, tau: f64, tolerance: f64, max_order: usize) -> Result<Self> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::InvalidBeta(2.0 * tau));
        }
        let (c, a) = Self::affine(e_min, e_max)?;
        let x = a * tau;
        let (i, order) = Self::build(x, false, tolerance, max_order)?;
        let coefficients = i
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let w = if k == 0 { 1.0 } else { 2.0 };
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                C64::new(w * sign * v, 0.0)
            })
            .collect();
        Ok(Self {
            e_min,
            e_max,
            order,
            coefficients,
            tolerance,
            log_prefactor: C64::new(-tau * (c - a), 0.0),
        })
    }

    /// `Σ_k c_k T_k(X) ψ`, without the prefactor.
    pub fn apply_series(&self, op: &SpinOperator, psi: &StateVector) -> Result<StateVector> {
        psi.check_dim(op.dim())?;
        let (c, a) = Self::affine(self.e_min, self.e_max)?;
        let dim = psi.dim();
        let x = psi.amplitudes();
        let mut out: Vec<C64> = x.iter().map(|v| v * self.coefficients[0]).collect();
        if self.coefficients.len() == 1 {
            return Ok(StateVector::from_amplitudes(out));
        }
        let inv_a = 1.0 / a;
        let mut hbuf = vec![C64::new(0.0, 0.0); dim];
        // T_1 ψ = X ψ
        let mut prev = x.to_vec();
        op.apply_into(&prev, &mut hbuf)?;
        let mut cur: Vec<C64> = hbuf
            .iter()
            .zip(&prev)
            .map(|(h, v)| (h - v * c) * inv_a)
            .collect();
        axpy(&mut out, self.coefficients[1], &cur);
        for ck in &self.coefficients[2..] {
            op.apply_into(&cur, &mut hbuf)?;
            // T_{k+1} = 2 X T_k - T_{k-1}, written into the T_{k-1} buffer
            for ((p, h), v) in prev.iter_mut().zip(&hbuf).zip(&cur) {
                *p = (h - v * c) * (2.0 * inv_a) - *p;
            }
            std::mem::swap(&mut prev, &mut cur);
            axpy(&mut out, *ck, &cur);
        }
        Ok(StateVector::from_amplitudes(out))
    }
}

fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}
