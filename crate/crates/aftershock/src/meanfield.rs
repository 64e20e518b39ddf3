//! Deterministic spread/gap recursions for the post-shock relaxation and
//! their comparison against simulated curves.
//!
//! Two regimes: a deposition-only limit (no market orders) where the spread
//! narrowing closes on itself, and the general coupled spread/gap system
//! where market orders re-open the spread by the first gap and the gap
//! hierarchy is truncated by pinning the second-to-first gap ratio at its
//! equilibrium value.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MeanFieldError {
    #[error("market-order rate must be positive")]
    ZeroMarketRate,
    #[error("gap ratio shortcut requires limit-order rate 0.5, got {0}")]
    RequiresHalfLo(f64),
    #[error("rates sum to {0}, expected 1")]
    BadRates(f64),
    #[error("{what} turned negative at step {step} ({value})")]
    NonPhysical {
        what: &'static str,
        step: usize,
        value: f64,
    },
    #[error("curves share no common grid points over the horizon")]
    GridMismatch,
}

/// Parameters of the coupled spread/gap recursion.
///
/// `sigma` is the equilibrium spread (ticks), normally measured from a
/// shock-free simulation stretch. `s0` is the spread right after the shock;
/// clearing depth `j` on one side opens the spread to roughly `sigma + j`.
/// `gamma0` overrides the initial first gap; when `None` it starts at the
/// equilibrium gap implied by `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldParams {
    pub d: f64,
    pub p_lo: f64,
    pub p_mo: f64,
    pub p_c: f64,
    pub sigma: f64,
    pub s0: f64,
    pub gamma0: Option<f64>,
    pub steps: usize,
}

impl MeanFieldParams {
    pub fn validate(&self) -> Result<(), MeanFieldError> {
        let sum = self.p_lo + self.p_mo + self.p_c;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(MeanFieldError::BadRates(sum));
        }
        Ok(())
    }
}

/// Expected-value trajectories; index 0 holds the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldTrajectory {
    pub spread: Vec<f64>,
    pub gap1: Vec<f64>,
}

/// Sum 1 + 2 + ... + n continued to real arguments.
fn ksum(n: f64) -> f64 {
    n * (n + 1.0) / 2.0
}

/// Spread relaxation with market orders switched off: each step the spread
/// shrinks by the expected bite of a limit order landing inside it,
///
/// `S_{t+1} = S_t (1 - 1/(8D)) - S_t^2 / (16D)`.
///
/// Strictly decreasing and positive for `0 < S0 <= 4D`. Fails with
/// `NonPhysical` when `S0` is so far out of regime that the quadratic bite
/// overshoots zero.
pub fn limit_recursion(d: f64, s0: f64, steps: usize) -> Result<Vec<f64>, MeanFieldError> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = s0;
    out.push(s);
    for step in 1..=steps {
        s = s * (1.0 - 1.0 / (8.0 * d)) - s * s / (16.0 * d);
        if s < 0.0 {
            return Err(MeanFieldError::NonPhysical {
                what: "spread",
                step,
                value: s,
            });
        }
        out.push(s);
    }
    Ok(out)
}

/// Closed-form solution of the pure narrowing flow `dS/dt = -S^2/(16D)`:
/// `S(t) = S0 / (1 + S0 t / (16D))`, so `t * S(t) -> 16D`.
///
/// The discrete recursion follows this curve only while `S >> 2`; below
/// that its linear term dominates and the decay turns exponential with
/// rate `1/(8D)`.
pub fn limit_asymptote(d: f64, s0: f64, t: f64) -> f64 {
    s0 / (1.0 + s0 * t / (16.0 * d))
}

/// Equilibrium first gap from the zero-drift balance of spread narrowing
/// against market-order widening:
/// `gamma1 = (P_LO / P_MO) (sigma^2/(8D) + sigma/(4D))`.
pub fn stationary_gap(sigma: f64, p_lo: f64, p_mo: f64, d: f64) -> Result<f64, MeanFieldError> {
    if p_mo <= 0.0 {
        return Err(MeanFieldError::ZeroMarketRate);
    }
    Ok(p_lo / p_mo * (sigma * sigma / (8.0 * d) + sigma / (4.0 * d)))
}

/// Equilibrium second-to-first gap ratio, in the form valid when the
/// limit-order rate is exactly one half:
/// `gamma2/gamma1 = (1/(2D)) (P_LO/P_MO) (sigma + gamma1 - 1)`.
pub fn gap_ratio(
    sigma: f64,
    gamma1: f64,
    p_lo: f64,
    p_mo: f64,
    d: f64,
) -> Result<f64, MeanFieldError> {
    if p_lo != 0.5 {
        return Err(MeanFieldError::RequiresHalfLo(p_lo));
    }
    if p_mo <= 0.0 {
        return Err(MeanFieldError::ZeroMarketRate);
    }
    Ok(p_lo / p_mo / (2.0 * d) * (sigma + gamma1 - 1.0))
}

/// Gap ratio without the half-rate simplification:
/// `1 + (1/(2D)) (P_LO/P_MO) (sigma + gamma1 - 1) - 2 P_LO`.
/// Coincides with [`gap_ratio`] at `p_lo = 0.5`.
pub fn gap_ratio_general(
    sigma: f64,
    gamma1: f64,
    p_lo: f64,
    p_mo: f64,
    d: f64,
) -> Result<f64, MeanFieldError> {
    if p_mo <= 0.0 {
        return Err(MeanFieldError::ZeroMarketRate);
    }
    Ok(1.0 + p_lo / p_mo / (2.0 * d) * (sigma + gamma1 - 1.0) - 2.0 * p_lo)
}

/// Coupled spread/gap recursion.
///
/// Per step, with every state variable read at the previous step:
///
/// * spread: `S' = S - P_LO (S^2/(8D) + S/(4D)) + P_MO g`
/// * gap: `g' = P_C g + P_LO [ (D - S/2 - g)/D g + T(g)/D + T(S/2)/D ] + P_MO g2`
///
/// with `T(n) = n(n+1)/2` and the hierarchy closed by `g2 = r g`, where the
/// ratio `r` is pinned at its equilibrium value. The product `P_MO * r`
/// is formed analytically so the closure stays finite as `p_mo -> 0` (the
/// second-gap feedback then drops out together with the widening term).
pub fn general_recursion(params: &MeanFieldParams) -> Result<MeanFieldTrajectory, MeanFieldError> {
    params.validate()?;
    if params.p_lo != 0.5 {
        return Err(MeanFieldError::RequiresHalfLo(params.p_lo));
    }
    let d = params.d;
    let gamma_eq = match params.gamma0 {
        Some(g) => g,
        None => stationary_gap(params.sigma, params.p_lo, params.p_mo, d)?,
    };
    // p_mo * (gamma2/gamma1), with p_mo cancelled against the ratio
    let closure = params.p_lo / (2.0 * d) * (params.sigma + gamma_eq - 1.0);
    let mut spread = Vec::with_capacity(params.steps + 1);
    let mut gap1 = Vec::with_capacity(params.steps + 1);
    let mut s = params.s0;
    let mut g = gamma_eq;
    spread.push(s);
    gap1.push(g);
    for step in 1..=params.steps {
        let s_next = s - params.p_lo * (s * s / (8.0 * d) + s / (4.0 * d)) + params.p_mo * g;
        let g_next = params.p_c * g
            + params.p_lo * ((d - s / 2.0 - g) / d * g + ksum(g) / d + ksum(s / 2.0) / d)
            + closure * g;
        if s_next < 0.0 {
            return Err(MeanFieldError::NonPhysical {
                what: "spread",
                step,
                value: s_next,
            });
        }
        if g_next < 0.0 {
            return Err(MeanFieldError::NonPhysical {
                what: "gap",
                step,
                value: g_next,
            });
        }
        s = s_next;
        g = g_next;
        spread.push(s);
        gap1.push(g);
    }
    Ok(MeanFieldTrajectory { spread, gap1 })
}

/// Pointwise relative error of `candidate` against `reference` over the
/// grid points both series carry inside `[horizon.0, horizon.1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// `(grid point, |candidate - reference| / |reference|)`
    pub rel_err: Vec<(i64, f64)>,
    pub max_rel_err: f64,
}

pub fn compare(
    candidate: &[(i64, f64)],
    reference: &[(i64, f64)],
    horizon: (i64, i64),
) -> Result<ComparisonReport, MeanFieldError> {
    let reference: std::collections::BTreeMap<i64, f64> = reference
        .iter()
        .filter(|(t, _)| *t >= horizon.0 && *t <= horizon.1)
        .map(|&(t, v)| (t, v))
        .collect();
    let mut rel_err = Vec::new();
    for &(t, v) in candidate {
        if t < horizon.0 || t > horizon.1 {
            continue;
        }
        if let Some(&r) = reference.get(&t) {
            let err = if r == 0.0 {
                if v == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (v - r).abs() / r.abs()
            };
            rel_err.push((t, err));
        }
    }
    if rel_err.is_empty() {
        return Err(MeanFieldError::GridMismatch);
    }
    let max_rel_err = rel_err.iter().map(|&(_, e)| e).fold(0.0, f64::max);
    Ok(ComparisonReport { rel_err, max_rel_err })
}
