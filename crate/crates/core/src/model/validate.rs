//! Falsifiable checks of the declared constants on fixed sample grids.

use serde::Serialize;

use super::{DiffusionMatrix, MonotoneFlux, Nonlinearity, ProblemData};
use crate::error::{Assumption, Error, Result};
use crate::grid::l2_norm;
use crate::scalar::{Real, Vec2};

/// Absolute slack on every nonnegativity check.
pub const VALIDATION_TOL: f64 = 1e-12;

fn tol<T: Real>() -> T {
    T::lit(VALIDATION_TOL)
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < 100 {
        return Err(Error::InvalidArgument(format!(
            "need at least 100 samples, got {samples}"
        )));
    }
    Ok(())
}

/// Grid of `(k+1)²` points `(i/k, j/k)` covering the closed square, `k` a multiple of 4.
fn x_grid<T: Real>(samples: usize) -> Vec<Vec2<T>> {
    let k = ((samples as f64).sqrt().ceil() as usize).max(4).div_ceil(4) * 4;
    let kk = T::from_count(k);
    let mut out = Vec::with_capacity((k + 1) * (k + 1));
    for j in 0..=k {
        for i in 0..=k {
            out.push(Vec2::new(T::from_count(i) / kk, T::from_count(j) / kk));
        }
    }
    out
}

/// Deterministic spread of gradient samples in `[−R, R]²` (Halton bases 2 and 3), plus the origin.
fn xi_samples<T: Real>(count: usize, radius: T) -> Vec<Vec2<T>> {
    fn halton(mut i: usize, base: usize) -> f64 {
        let (mut f, mut r) = (1.0, 0.0);
        while i > 0 {
            f /= base as f64;
            r += f * (i % base) as f64;
            i /= base;
        }
        r
    }
    let mut out = vec![Vec2::zero()];
    for i in 1..count {
        let u = T::lit(2.0 * halton(i, 2) - 1.0);
        let v = T::lit(2.0 * halton(i, 3) - 1.0);
        out.push(Vec2::new(u * radius, v * radius));
    }
    out
}

/// Minimum of `A(x)ξ·ξ / |ξ|²` over a fixed `x` grid (exact in `ξ` via the
/// smallest eigenvalue of the symmetric part). Also checks the entry bound.
pub fn validate_coercivity<T: Real>(a: &DiffusionMatrix<T>, samples: usize) -> Result<T> {
    check_samples(samples)?;
    let mut estimate = T::infinity();
    for x in x_grid::<T>(samples) {
        let m = a.eval(x);
        if m.max_abs_entry() > a.bound + tol::<T>() {
            return Err(Error::AssumptionViolated {
                assumption: Assumption::A1,
                detail: format!(
                    "entry {} exceeds declared bound {} at x=({}, {})",
                    m.max_abs_entry(),
                    a.bound,
                    x.x,
                    x.y
                ),
            });
        }
        let (p, q) = (m.m[0][0], m.m[1][1]);
        let off = (m.m[0][1] + m.m[1][0]) / T::lit(2.0);
        let half = (p - q) / T::lit(2.0);
        let min_eig = (p + q) / T::lit(2.0) - half.hypot(off);
        estimate = estimate.min(min_eig);
    }
    if estimate < a.gamma - tol::<T>() {
        return Err(Error::AssumptionViolated {
            assumption: Assumption::A1,
            detail: format!(
                "sampled coercivity {estimate} below declared gamma {}",
                a.gamma
            ),
        });
    }
    Ok(estimate)
}

/// Smallest `(a(x,ξ) − a(x,ξ′))·(ξ − ξ′)` over `samples` gradients in
/// `[−10, 10]²` and a 5×5 grid of points.
pub fn validate_monotonicity<T: Real>(flux: &MonotoneFlux<T>, samples: usize) -> Result<T> {
    check_samples(samples)?;
    let xis = xi_samples::<T>(samples, T::lit(10.0));
    let xs = x_grid::<T>(16);
    let mut worst = T::infinity();
    for &x in &xs {
        let vals: Vec<Vec2<T>> = xis.iter().map(|&xi| flux.eval(x, xi)).collect();
        for a in 0..xis.len() {
            for b in (a + 1)..xis.len() {
                let pairing = (vals[a] - vals[b]).dot(xis[a] - xis[b]);
                worst = worst.min(pairing);
            }
        }
    }
    if worst < -tol::<T>() {
        return Err(Error::AssumptionViolated {
            assumption: Assumption::A3,
            detail: format!("monotonicity pairing {worst} < 0"),
        });
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct FluxReport {
    pub worst_pairing: f64,
    pub coercivity_estimate: f64,
    pub growth_ratio: f64,
    pub strong_monotonicity_estimate: Option<f64>,
}

/// Checks coercivity, monotonicity, growth and (when declared) strong monotonicity.
pub fn validate_flux<T: Real>(flux: &MonotoneFlux<T>, samples: usize) -> Result<FluxReport> {
    let worst_pairing = validate_monotonicity(flux, samples)?;
    let xis = xi_samples::<T>(samples, T::lit(10.0));
    let xs = x_grid::<T>(16);
    let mut coercivity = T::infinity();
    let mut growth = T::zero();
    let mut strong = T::infinity();
    for &x in &xs {
        for (a, &xi) in xis.iter().enumerate() {
            let v = flux.eval(x, xi);
            let s2 = xi.norm_sq();
            if v.dot(xi) < flux.delta * s2 - tol::<T>() {
                return Err(Error::AssumptionViolated {
                    assumption: Assumption::A2,
                    detail: format!("a(x,ξ)·ξ = {} < δ|ξ|² = {}", v.dot(xi), flux.delta * s2),
                });
            }
            if s2 > T::zero() {
                coercivity = coercivity.min(v.dot(xi) / s2);
            }
            let bound = flux.beta * (flux.weight_b + xi.norm());
            if v.norm() > bound + tol::<T>() {
                return Err(Error::AssumptionViolated {
                    assumption: Assumption::A4,
                    detail: format!("|a(x,ξ)| = {} > {}", v.norm(), bound),
                });
            }
            if bound > T::zero() {
                growth = growth.max(v.norm() / bound);
            }
            if let Some(sm) = flux.strong_monotonicity {
                for &xi2 in &xis[a + 1..] {
                    let d = xi - xi2;
                    let pairing = (v - flux.eval(x, xi2)).dot(d);
                    if pairing < sm * d.norm_sq() - tol::<T>() * (T::one() + d.norm_sq()) {
                        return Err(Error::AssumptionViolated {
                            assumption: Assumption::StrongMonotonicity,
                            detail: format!("pairing {pairing} < {sm}·|ξ−ξ′|²"),
                        });
                    }
                    strong = strong.min(pairing / d.norm_sq());
                }
            }
        }
    }
    Ok(FluxReport {
        worst_pairing: worst_pairing.to_f64_lossy(),
        coercivity_estimate: coercivity.to_f64_lossy(),
        growth_ratio: growth.to_f64_lossy(),
        strong_monotonicity_estimate: flux.strong_monotonicity.map(|_| strong.to_f64_lossy()),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    /// Largest `|f(r)| / (a + M|r|^α)` over the samples.
    pub max_ratio: f64,
    /// Constants `(a, M)` of the two-dimensional linear bound on `ℝ⁺`, when one follows from the declared growth.
    pub linear_bound: Option<(f64, f64)>,
    pub linear_bound_holds: bool,
    /// `(r, |f(r)|/√|r|)` at `r = −R, −R/2, −R/4, …`.
    pub left_tail: Vec<(f64, f64)>,
    /// Whether the left-tail ratio is nonincreasing as `r → −∞`.
    pub left_tail_decays: bool,
}

/// Number of sampling intervals on `[−R, R]`.
pub const GROWTH_SAMPLES: usize = 4000;

/// Checks `|f(r)| <= a + M|r|^α` on `[−R, R]` (an error if violated), then
/// reports the linear bound on `ℝ⁺` and the left-tail ratio trend.
pub fn validate_growth<T: Real>(f: &Nonlinearity<T>, r_val: T) -> Result<GrowthReport> {
    if !(r_val > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "R_val must be > 0, got {r_val}"
        )));
    }
    let n = GROWTH_SAMPLES;
    let mut max_ratio = T::zero();
    for k in 0..=n {
        let r = -r_val + T::lit(2.0) * r_val * T::from_count(k) / T::from_count(n);
        let lhs = f.eval(r).norm();
        let rhs = f.a0 + f.m * r.abs().powf(f.alpha);
        if lhs > rhs + tol::<T>() * (T::one() + rhs) {
            return Err(Error::AssumptionViolated {
                assumption: Assumption::PowerGrowth,
                detail: format!("|f({r})| = {lhs} > {rhs}"),
            });
        }
        if rhs > T::zero() {
            max_ratio = max_ratio.max(lhs / rhs);
        }
    }

    // r^α <= 1 + r on ℝ⁺ when α <= 1, and r^α <= r exactly when α = 1.
    let linear_bound = if f.alpha == T::one() {
        Some((f.a0, f.m))
    } else if f.alpha < T::one() {
        Some((f.a0 + f.m, f.m))
    } else {
        None
    };
    let linear_bound_holds = match linear_bound {
        Some((a, m)) => (0..=n).all(|k| {
            let r = r_val * T::from_count(k) / T::from_count(n);
            f.eval(r).norm() <= a + m * r + tol::<T>() * (T::one() + a + m * r)
        }),
        None => false,
    };

    let mut left_tail = Vec::new();
    let mut r = r_val;
    while r >= T::lit(1e-3) * r_val && left_tail.len() < 12 {
        left_tail.push((-r, f.eval(-r).norm() / r.sqrt()));
        r /= T::lit(2.0);
    }
    // Entries run from −R towards 0, so decay towards −∞ means nondecreasing along the list.
    let left_tail_decays = left_tail.windows(2).all(|w| w[0].1 <= w[1].1 + tol::<T>());
    Ok(GrowthReport {
        max_ratio: max_ratio.to_f64_lossy(),
        linear_bound: linear_bound.map(|(a, m)| (a.to_f64_lossy(), m.to_f64_lossy())),
        linear_bound_holds,
        left_tail: left_tail
            .into_iter()
            .map(|(r, v)| (r.to_f64_lossy(), v.to_f64_lossy()))
            .collect(),
        left_tail_decays,
    })
}

/// Checks `|f(r) − f(r′)| <= L|r − r′|` on a grid of `[0, R]` (all pairs of a coarse grid
/// plus consecutive pairs of a fine one). Returns the sampled Lipschitz ratio.
pub fn validate_lipschitz<T: Real>(f: &Nonlinearity<T>, r_val: T) -> Result<T> {
    let l = f.lipschitz.ok_or_else(|| Error::AssumptionViolated {
        assumption: Assumption::Lipschitz,
        detail: format!("`{}` declares no Lipschitz constant", f.label()),
    })?;
    let fine: Vec<T> = (0..=GROWTH_SAMPLES)
        .map(|k| r_val * T::from_count(k) / T::from_count(GROWTH_SAMPLES))
        .collect();
    let coarse: Vec<T> = fine.iter().step_by(GROWTH_SAMPLES / 50).copied().collect();
    let mut worst = T::zero();
    let mut check = |a: T, b: T| -> Result<()> {
        let lhs = (f.eval(a) - f.eval(b)).norm();
        let d = (a - b).abs();
        if lhs > l * d + tol::<T>() {
            return Err(Error::AssumptionViolated {
                assumption: Assumption::Lipschitz,
                detail: format!("|f({a}) − f({b})| = {lhs} > {l}·{d}"),
            });
        }
        if d > T::zero() {
            worst = worst.max(lhs / d);
        }
        Ok(())
    };
    for w in fine.windows(2) {
        check(w[0], w[1])?;
    }
    for (i, &a) in coarse.iter().enumerate() {
        for &b in &coarse[i + 1..] {
            check(a, b)?;
        }
    }
    Ok(worst)
}

/// `f(r0) = 0` exactly at the declared zero point.
pub fn validate_zero_point<T: Real>(f: &Nonlinearity<T>) -> Result<T> {
    let r0 = f.r0.ok_or_else(|| Error::AssumptionViolated {
        assumption: Assumption::ZeroPoint,
        detail: format!("`{}` declares no zero point", f.label()),
    })?;
    if r0 > T::zero() || f.eval(r0) != Vec2::zero() {
        return Err(Error::AssumptionViolated {
            assumption: Assumption::ZeroPoint,
            detail: format!("f({r0}) = {:?} (need 0 with r0 <= 0)", f.eval(r0)),
        });
    }
    Ok(r0)
}

/// Outcome of every model check, collecting all failures instead of stopping at the first.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub gamma_estimate: Option<f64>,
    pub flux: Option<FluxReport>,
    pub growth: Option<GrowthReport>,
    pub lipschitz_estimate: Option<f64>,
    pub zero_point: Option<f64>,
    pub g_l2: f64,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Runs all validators. Lipschitz and zero-point checks run only when declared.
pub fn validate_problem<T: Real>(
    problem: &ProblemData<T>,
    samples: usize,
    r_val: T,
) -> ValidationReport {
    let mut report = ValidationReport {
        g_l2: l2_norm(&problem.g).to_f64_lossy(),
        ..Default::default()
    };
    match validate_coercivity(&problem.diffusion, samples) {
        Ok(g) => report.gamma_estimate = Some(g.to_f64_lossy()),
        Err(e) => report.violations.push(e.to_string()),
    }
    match validate_flux(&problem.flux, samples) {
        Ok(r) => report.flux = Some(r),
        Err(e) => report.violations.push(e.to_string()),
    }
    match validate_growth(&problem.f, r_val) {
        Ok(r) => report.growth = Some(r),
        Err(e) => report.violations.push(e.to_string()),
    }
    if problem.f.lipschitz.is_some() {
        match validate_lipschitz(&problem.f, r_val) {
            Ok(l) => report.lipschitz_estimate = Some(l.to_f64_lossy()),
            Err(e) => report.violations.push(e.to_string()),
        }
    }
    if problem.f.r0.is_some() {
        match validate_zero_point(&problem.f) {
            Ok(r0) => report.zero_point = Some(r0.to_f64_lossy()),
            Err(e) => report.violations.push(e.to_string()),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Mat2;

    #[test]
    fn coercivity_examples() {
        let id = DiffusionMatrix::<f64>::identity();
        assert_eq!(validate_coercivity(&id, 100).unwrap(), 1.0);
        let d = DiffusionMatrix::<f64>::diagonal(2.0, 0.5);
        assert_eq!(validate_coercivity(&d, 100).unwrap(), 0.5);
        let osc = DiffusionMatrix::<f64>::oscillating(0.5);
        let g = validate_coercivity(&osc, 400).unwrap();
        // Brute-force minimum of 1 + sin(2πx)/2 over the same closed grid.
        let k = 20;
        let oracle = (0..=k)
            .map(|i| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * i as f64 / k as f64).sin())
            .fold(f64::INFINITY, f64::min);
        assert!((g - oracle).abs() < 1e-15);
        assert!((g - 0.5).abs() < 1e-12);
        assert!(validate_coercivity(&id, 50).is_err());
    }

    #[test]
    fn coercivity_violation_detected() {
        let bad = DiffusionMatrix::<f64>::custom("liar", 2.0, 1.0, |_| Mat2::identity());
        assert!(matches!(
            validate_coercivity(&bad, 100),
            Err(Error::AssumptionViolated {
                assumption: Assumption::A1,
                ..
            })
        ));
    }

    #[test]
    fn monotonicity_examples() {
        let id = MonotoneFlux::<f64>::identity();
        assert!(validate_monotonicity(&id, 100).unwrap() >= 0.0);
        let radial = MonotoneFlux::<f64>::radial();
        assert!(validate_monotonicity(&radial, 100).unwrap() >= 0.0);
        // 1D cross-check: d/ds (2s − s/(1+s)) = 2 − 1/(1+s)² >= 1.
        for k in 0..1000 {
            let s = k as f64 * 0.01;
            assert!(2.0 - 1.0 / (1.0 + s).powi(2) >= 1.0);
        }
        let anti = MonotoneFlux::<f64>::custom("anti", 1.0, 1.0, |_, _| -1.0);
        assert!(matches!(
            validate_monotonicity(&anti, 100),
            Err(Error::AssumptionViolated {
                assumption: Assumption::A3,
                ..
            })
        ));
    }

    #[test]
    fn built_in_fluxes_pass_all_checks() {
        for flux in [
            MonotoneFlux::<f64>::identity(),
            MonotoneFlux::scalar(1.0, 3.0),
            MonotoneFlux::radial(),
        ] {
            let r = validate_flux(&flux, 100).unwrap();
            assert!(
                r.coercivity_estimate >= flux.delta - 1e-12,
                "{}",
                flux.label()
            );
            assert!(r.growth_ratio <= 1.0 + 1e-12);
            assert!(
                r.strong_monotonicity_estimate.unwrap() >= flux.strong_monotonicity.unwrap() - 1e-9
            );
        }
    }

    #[test]
    fn growth_examples() {
        let p = Nonlinearity::<f64>::power(1.0, 0.6, 0);
        let r = validate_growth(&p, 10.0).unwrap();
        assert!((r.max_ratio - 1.0).abs() < 1e-12);
        let sq = Nonlinearity::<f64>::custom("square", 0.0, 1.0, 1.0, |r| Vec2::new(r * r, 0.0));
        match validate_growth(&sq, 10.0) {
            Err(Error::AssumptionViolated {
                assumption: Assumption::PowerGrowth,
                detail,
            }) => assert!(detail.contains("|f(")),
            other => panic!("expected violation, got {other:?}"),
        }
        let lin = Nonlinearity::<f64>::linear_positive(1.0, 0);
        let r = validate_growth(&lin, 10.0).unwrap();
        assert_eq!(r.linear_bound, Some((0.0, 1.0)));
        assert!(r.linear_bound_holds);
        assert!(r.left_tail_decays);
        assert!(r.left_tail.iter().all(|&(_, v)| v == 0.0));
    }

    #[test]
    fn left_tail_growth_flagged() {
        let f = Nonlinearity::<f64>::custom("abs", 0.0, 1.0, 1.0, |r| Vec2::new(r.abs(), 0.0));
        let r = validate_growth(&f, 100.0).unwrap();
        assert!(!r.left_tail_decays);
    }

    #[test]
    fn lipschitz_and_zero_point() {
        let lin = Nonlinearity::<f64>::linear_positive(2.0, 1);
        assert!((validate_lipschitz(&lin, 5.0).unwrap() - 2.0).abs() < 1e-12);
        let liar = lin.clone().with_lipschitz(Some(1.0));
        assert!(validate_lipschitz(&liar, 5.0).is_err());
        let s = Nonlinearity::<f64>::shifted(1.0, 1.0, -1.0, 0);
        assert_eq!(validate_zero_point(&s).unwrap(), -1.0);
        let c = Nonlinearity::<f64>::constant(1.0, 0).with_zero_point(Some(-1.0));
        assert!(validate_zero_point(&c).is_err());
    }
}
