//! The coupled system: the map `Γ: θ̂ ↦ θ`, the damped Picard driver, the
//! ε-truncation scheme, the small-data ball, positivity and uniqueness probes.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::P1Space;
use crate::grid::{h1_seminorm, l1_norm, l2_norm, lq_norm, ScalarField};
use crate::model::{truncated_nonlinearity, ProblemData};
use crate::scalar::Real;
use crate::theta_solver::{
    diagnostics, solve_theta_with, theta_weak_residual, RenormDiagnostics, ThetaOptions,
};
use crate::u_solver::{nonlinearity_on_cells, solve_u, u_weak_residual};

/// Truncation heights and level-set thresholds recorded with every solution.
pub const DIAGNOSTIC_LEVELS: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FixedPointTrace {
    pub iterations: usize,
    /// `‖θ_{k+1} − θ_k‖_{L¹}` per iteration.
    pub increments: Vec<f64>,
    /// `increment_k / increment_{k−1}`, from the second iteration on.
    pub ratios: Vec<f64>,
    pub u_residual: f64,
    pub theta_residual: f64,
    pub converged: bool,
    pub relaxation: f64,
    /// Why the iteration stopped early, if it did.
    pub stop_reason: Option<String>,
}

impl FixedPointTrace {
    /// Whether every reported ratio is below one.
    pub fn geometric(&self) -> bool {
        self.ratios.iter().all(|&r| r < 1.0)
    }
}

#[derive(Clone, Debug)]
pub struct CoupledSolution<T> {
    pub u: ScalarField<T>,
    pub theta: ScalarField<T>,
    /// `(A Du − f(θ))·Du` projected to the nodes.
    pub rhs: ScalarField<T>,
    pub f_theta_l2: T,
    pub rhs_l1: T,
    pub trace: FixedPointTrace,
    pub diagnostics: RenormDiagnostics,
}

#[derive(Clone, Copy, Debug)]
pub struct FixedPointOptions<T> {
    pub relaxation: T,
    pub tol: T,
    pub max_iters: usize,
    pub theta: ThetaOptions<T>,
}

impl<T: Real> Default for FixedPointOptions<T> {
    fn default() -> Self {
        Self {
            relaxation: T::lit(0.5),
            tol: T::lit(1e-8),
            max_iters: 200,
            theta: ThetaOptions::default(),
        }
    }
}

impl<T: Real> FixedPointOptions<T> {
    pub fn new(relaxation: T, tol: T, max_iters: usize) -> Self {
        Self {
            relaxation,
            tol,
            max_iters,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.relaxation > T::zero() && self.relaxation <= T::one()) {
            return Err(Error::InvalidArgument(format!(
                "relaxation must lie in (0, 1], got {}",
                self.relaxation
            )));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Cellwise `(A Du − f(θ))·Du`, projected to the nodes by area-weighted
/// averaging (which preserves the lumped integral).
pub fn coupling_rhs<T: Real>(
    problem: &ProblemData<T>,
    u: &ScalarField<T>,
    theta: &ScalarField<T>,
) -> Result<ScalarField<T>> {
    problem.g.ensure_same_mesh(u)?;
    problem.g.ensure_same_mesh(theta)?;
    let mesh = *problem.mesh();
    let f_cells = nonlinearity_on_cells(&problem.f, theta);
    let cellwise: Vec<T> = mesh
        .cells()
        .map(|c| {
            let du = u.cell_gradient(&c);
            let q = problem.diffusion.eval(mesh.centroid(&c)).mul_vec(du) - f_cells[c.index];
            q.dot(du)
        })
        .collect();
    Ok(P1Space::new(mesh).project_to_nodes(&cellwise))
}

/// `θ = Γ(θ̂)`: solve for `u` at `θ̂`, then for `θ` with `f(θ̂)` frozen in the
/// right-hand side. Returns `(θ, u)`.
pub fn gamma_map<T: Real>(
    problem: &ProblemData<T>,
    theta_hat: &ScalarField<T>,
) -> Result<(ScalarField<T>, ScalarField<T>)> {
    if !theta_hat.is_finite() {
        return Err(Error::InvalidArgument("theta_hat is not finite".into()));
    }
    let u = solve_u(problem, theta_hat)?;
    let rhs = coupling_rhs(problem, &u, theta_hat)?;
    let theta = solve_theta_with(problem, &rhs, None, ThetaOptions::default())?.theta;
    Ok((theta, u))
}

/// Damped Picard iteration from `θ₀ ≡ 0`.
pub fn fixed_point_solve<T: Real>(
    problem: &ProblemData<T>,
    relaxation: T,
    tol: T,
    max_iters: usize,
) -> Result<CoupledSolution<T>> {
    fixed_point_solve_from(
        problem,
        &ScalarField::zeros(*problem.mesh()),
        FixedPointOptions::new(relaxation, tol, max_iters),
    )
}

/// `θ_{k+1} = (1 − ω)θ_k + ωΓ(θ_k)` until the L¹ increment drops below `tol`
/// and the coupled θ-residual is within ten times the solver tolerance.
pub fn fixed_point_solve_from<T: Real>(
    problem: &ProblemData<T>,
    init: &ScalarField<T>,
    opts: FixedPointOptions<T>,
) -> Result<CoupledSolution<T>> {
    opts.check()?;
    problem.g.ensure_same_mesh(init)?;
    let omega = opts.relaxation;
    let mut theta = init.clone();
    theta.zero_boundary();
    let mut trace = FixedPointTrace {
        relaxation: omega.to_f64_lossy(),
        ..FixedPointTrace::default()
    };
    let residual_target = opts.theta.rel_tol * T::lit(10.0);
    let fail = |mut trace: FixedPointTrace, reason: String| {
        trace.stop_reason = Some(reason);
        Err(Error::NotConverged(Box::new(trace)))
    };
    loop {
        let u = match solve_u(problem, &theta) {
            Ok(u) => u,
            Err(e @ Error::SolverFailure { .. }) if trace.iterations > 0 => {
                return fail(trace, e.to_string())
            }
            Err(e) => return Err(e),
        };
        let rhs = coupling_rhs(problem, &u, &theta)?;
        if !rhs.is_finite() {
            return fail(trace, "coupling right-hand side overflowed".into());
        }
        let theta_res = theta_weak_residual(problem, &theta, &rhs)?;
        let u_res = u_weak_residual(problem, &theta, &u)?;
        trace.theta_residual = theta_res.to_f64_lossy();
        trace.u_residual = u_res.to_f64_lossy();
        let last_inc = trace.increments.last().copied();
        if let Some(inc) = last_inc {
            if inc < opts.tol.to_f64_lossy() && theta_res <= residual_target {
                trace.converged = true;
                let f_cells = nonlinearity_on_cells(&problem.f, &theta);
                let f_theta_l2 =
                    crate::grid::integrate_with(problem.mesh(), |c| f_cells[c.index].norm_sq())
                        .sqrt();
                let levels: Vec<T> = DIAGNOSTIC_LEVELS.iter().map(|&v| T::lit(v)).collect();
                let diagnostics = diagnostics(problem, &theta, &rhs, &levels, &levels)?;
                return Ok(CoupledSolution {
                    rhs_l1: l1_norm(&rhs),
                    f_theta_l2,
                    u,
                    theta,
                    rhs,
                    trace,
                    diagnostics,
                });
            }
        }
        if trace.iterations >= opts.max_iters {
            let reason = format!("iteration limit {} reached", opts.max_iters);
            return fail(trace, reason);
        }
        let gamma = match solve_theta_with(problem, &rhs, None, opts.theta) {
            Ok(s) => s.theta,
            Err(e @ Error::SolverFailure { .. }) if trace.iterations > 0 => {
                return fail(trace, e.to_string())
            }
            Err(e) => return Err(e),
        };
        let next = theta.scaled(T::one() - omega).axpy(omega, &gamma)?;
        let inc = l1_norm(&next.sub(&theta)?).to_f64_lossy();
        if !inc.is_finite() {
            return fail(trace, "increment is not finite".into());
        }
        if let Some(prev) = last_inc {
            trace.ratios.push(if prev > 0.0 { inc / prev } else { 0.0 });
        }
        trace.increments.push(inc);
        trace.iterations += 1;
        theta = next;
    }
}

#[derive(Clone, Debug)]
pub struct EpsilonEntry<T> {
    pub epsilon: T,
    pub result: std::result::Result<CoupledSolution<T>, FixedPointTrace>,
    /// `‖θ_ε − θ_{ε_min}‖_{L¹}`, when both runs converged.
    pub dist_theta_l1: Option<T>,
    /// `‖D(u_ε − u_{ε_min})‖_{L²}`, when both runs converged.
    pub dist_u_h1: Option<T>,
}

/// Runs the coupled solve with `f ∘ T_{1/ε}` for each `ε` (strictly
/// decreasing) and measures distances to the smallest `ε`. Non-convergence
/// of one entry does not abort the sweep.
pub fn epsilon_scheme<T: Real>(
    problem: &ProblemData<T>,
    epsilons: &[T],
    opts: FixedPointOptions<T>,
) -> Result<Vec<EpsilonEntry<T>>> {
    if epsilons.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::InvalidArgument(
            "epsilons must be strictly decreasing".into(),
        ));
    }
    let runs: Vec<std::result::Result<CoupledSolution<T>, FixedPointTrace>> = epsilons
        .par_iter()
        .map(|&eps| {
            let p = problem.with_f(truncated_nonlinearity(&problem.f, eps)?);
            match fixed_point_solve_from(&p, &ScalarField::zeros(*p.mesh()), opts) {
                Ok(s) => Ok(Ok(s)),
                Err(Error::NotConverged(t)) => Ok(Err(*t)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let finest = runs.last().and_then(|r| r.as_ref().ok()).cloned();
    epsilons
        .iter()
        .zip(runs)
        .map(|(&epsilon, result)| {
            let (dist_theta_l1, dist_u_h1) = match (&result, &finest) {
                (Ok(s), Some(f)) => (
                    Some(l1_norm(&s.theta.sub(&f.theta)?)),
                    Some(h1_seminorm(&s.u.sub(&f.u)?)),
                ),
                _ => (None, None),
            };
            Ok(EpsilonEntry {
                epsilon,
                result,
                dist_theta_l1,
                dist_u_h1,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BallCertificate {
    pub eta: f64,
    pub c: f64,
    pub m: f64,
    pub alpha: f64,
    pub feasible: bool,
    /// Midpoint of the feasible interval, present iff feasible.
    pub r: Option<f64>,
    /// Feasible interval `(lo, hi)`.
    pub interval: Option<(f64, f64)>,
}

fn bisect<T: Real>(phi: impl Fn(T) -> T, mut neg: T, mut pos: T) -> T {
    for _ in 0..400 {
        let mid = (neg + pos) / T::lit(2.0);
        if mid == neg || mid == pos {
            break;
        }
        if phi(mid) < T::zero() {
            neg = mid;
        } else {
            pos = mid;
        }
    }
    (neg + pos) / T::lit(2.0)
}

/// Radius `R` with `C(η + M²R^{2α}) < R < 2Cη`: the midpoint of the set
/// where the convex `φ(R) = C(η + M²R^{2α}) − R` is negative, intersected
/// with `(0, 2Cη)`.
pub fn ball_radius<T: Real>(eta: T, c: T, m: T, alpha: T) -> Result<BallCertificate> {
    let all_positive = [eta, c, m].iter().all(|v| *v > T::zero() && v.is_finite());
    if !all_positive || !(alpha > T::lit(0.5)) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "ball_radius needs eta, C, M > 0 and alpha > 1/2 (got {eta}, {c}, {m}, {alpha})"
        )));
    }
    let two_alpha = alpha + alpha;
    let phi = |r: T| c * (eta + m * m * r.powf(two_alpha)) - r;
    let r_min = (T::one() / (two_alpha * c * m * m)).powf(T::one() / (two_alpha - T::one()));
    let mut cert = BallCertificate {
        eta: eta.to_f64_lossy(),
        c: c.to_f64_lossy(),
        m: m.to_f64_lossy(),
        alpha: alpha.to_f64_lossy(),
        feasible: false,
        r: None,
        interval: None,
    };
    if !(phi(r_min) < T::zero()) {
        return Ok(cert);
    }
    let lo = bisect(phi, r_min, T::zero());
    let cap = T::lit(2.0) * c * eta;
    if lo >= cap {
        return Ok(cert);
    }
    let mut far = r_min + r_min;
    while phi(far) < T::zero() {
        far = far + far;
    }
    let hi = bisect(phi, r_min, far).min(cap);
    let r = (lo + hi) / T::lit(2.0);
    cert.feasible = phi(r) < T::zero() && r < cap;
    if cert.feasible {
        cert.r = Some(r.to_f64_lossy());
        cert.interval = Some((lo.to_f64_lossy(), hi.to_f64_lossy()));
    }
    Ok(cert)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmallDataReport {
    /// `a + ‖g‖_{L²}`.
    pub eta_actual: f64,
    /// `‖Du‖_{L²} + ‖u‖_{L²}`.
    pub u_norm: f64,
    /// `‖θ‖_{L^{2α}}`.
    pub theta_norm: f64,
}

pub fn small_data_certificate<T: Real>(
    problem: &ProblemData<T>,
    solution: &CoupledSolution<T>,
) -> Result<SmallDataReport> {
    problem.g.ensure_same_mesh(&solution.theta)?;
    let q = (problem.f.alpha + problem.f.alpha).max(T::one());
    Ok(SmallDataReport {
        eta_actual: (problem.f.a0 + l2_norm(&problem.g)).to_f64_lossy(),
        u_norm: (h1_seminorm(&solution.u) + l2_norm(&solution.u)).to_f64_lossy(),
        theta_norm: lq_norm(&solution.theta, q)?.to_f64_lossy(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepEntry {
    pub scale: f64,
    pub report: Option<SmallDataReport>,
    pub trace: FixedPointTrace,
}

#[derive(Clone, Debug, Serialize)]
pub struct SmallDataSweep {
    pub entries: Vec<SweepEntry>,
    /// Both norms nondecreasing in `η` over the converged entries.
    pub monotone: bool,
    /// Every converged run had geometric increments.
    pub geometric: bool,
    /// `max (‖u‖ + ‖θ‖)/(η + M²‖θ‖^{2α})` over the sweep.
    pub fitted_c: f64,
    /// Ball certificate at the largest `η` with the fitted constant.
    pub certificate: Option<BallCertificate>,
}

type SweepRun<T> = (
    T,
    std::result::Result<CoupledSolution<T>, FixedPointTrace>,
    ProblemData<T>,
);

/// Runs the coupled solve with `g` scaled by each factor.
pub fn small_data_sweep<T: Real>(
    problem: &ProblemData<T>,
    scales: &[T],
    opts: FixedPointOptions<T>,
) -> Result<SmallDataSweep> {
    let runs: Vec<SweepRun<T>> = scales
        .par_iter()
        .map(|&s| {
            let p = problem.with_g(problem.g.scaled(s));
            let r = match fixed_point_solve_from(&p, &ScalarField::zeros(*p.mesh()), opts) {
                Ok(sol) => Ok(sol),
                Err(Error::NotConverged(t)) => Err(*t),
                Err(e) => return Err(e),
            };
            Ok((s, r, p))
        })
        .collect::<Result<_>>()?;
    let mut entries = Vec::with_capacity(runs.len());
    for (s, r, p) in &runs {
        let (report, trace) = match r {
            Ok(sol) => (Some(small_data_certificate(p, sol)?), sol.trace.clone()),
            Err(t) => (None, t.clone()),
        };
        entries.push(SweepEntry {
            scale: s.to_f64_lossy(),
            report,
            trace,
        });
    }
    let mut reports: Vec<SmallDataReport> = entries.iter().filter_map(|e| e.report).collect();
    reports.sort_by(|a, b| a.eta_actual.partial_cmp(&b.eta_actual).expect("finite"));
    let slack = |x: f64| x * (1.0 + 1e-12) + 1e-300;
    let monotone = reports
        .windows(2)
        .all(|w| w[0].u_norm <= slack(w[1].u_norm) && w[0].theta_norm <= slack(w[1].theta_norm));
    let geometric = entries
        .iter()
        .filter(|e| e.report.is_some())
        .all(|e| e.trace.geometric());
    let m = problem.f.m.to_f64_lossy();
    let alpha = problem.f.alpha.to_f64_lossy();
    let fitted_c = reports
        .iter()
        .map(|r| {
            let denom = r.eta_actual + m * m * r.theta_norm.powf(2.0 * alpha);
            if denom > 0.0 {
                (r.u_norm + r.theta_norm) / denom
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    let certificate = match reports.last() {
        Some(r) if fitted_c > 0.0 && r.eta_actual > 0.0 && alpha > 0.5 => {
            Some(ball_radius(r.eta_actual, fitted_c, m, alpha)?)
        }
        _ => None,
    };
    Ok(SmallDataSweep {
        entries,
        monotone,
        geometric,
        fitted_c,
        certificate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PositivityReport {
    pub r0: f64,
    pub min_value: f64,
    pub pass: bool,
}

/// Minimum nodal `θ` against the lower bound `r0` (tolerance `1e−8`).
pub fn positivity_check<T: Real>(solution: &CoupledSolution<T>, r0: T) -> PositivityReport {
    let min = solution.theta.min_value();
    PositivityReport {
        r0: r0.to_f64_lossy(),
        min_value: min.to_f64_lossy(),
        pass: min >= r0 - T::lit(1e-8),
    }
}

#[derive(Clone, Debug)]
pub struct ProbeRun<T> {
    pub solution: Option<CoupledSolution<T>>,
    pub trace: FixedPointTrace,
}

#[derive(Clone, Debug)]
pub struct UniquenessProbe<T> {
    pub runs: Vec<ProbeRun<T>>,
    /// Max `‖θ_i − θ_j‖_{L²}` over converged runs.
    pub max_pairwise_l2: f64,
    /// The same divided by the largest `‖θ_i‖_{L²}` (0 when all vanish).
    pub max_pairwise_relative: f64,
    /// Indices of the pair attaining the maximum.
    pub farthest_pair: Option<(usize, usize)>,
    /// Runs that did not converge.
    pub flagged: Vec<usize>,
}

/// Runs the coupled solve from every initialization and compares the limits.
pub fn uniqueness_probe<T: Real>(
    problem: &ProblemData<T>,
    initializations: &[ScalarField<T>],
    opts: FixedPointOptions<T>,
) -> Result<UniquenessProbe<T>> {
    let runs: Vec<ProbeRun<T>> = initializations
        .par_iter()
        .map(|init| match fixed_point_solve_from(problem, init, opts) {
            Ok(s) => Ok(ProbeRun {
                trace: s.trace.clone(),
                solution: Some(s),
            }),
            Err(Error::NotConverged(t)) => Ok(ProbeRun {
                solution: None,
                trace: *t,
            }),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let flagged = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.solution.is_none())
        .map(|(i, _)| i)
        .collect();
    let mut max = 0.0f64;
    let mut pair = None;
    let mut scale = 0.0f64;
    for (i, a) in runs.iter().enumerate() {
        let Some(sa) = &a.solution else { continue };
        scale = scale.max(l2_norm(&sa.theta).to_f64_lossy());
        for (j, b) in runs.iter().enumerate().skip(i + 1) {
            let Some(sb) = &b.solution else { continue };
            let d = l2_norm(&sa.theta.sub(&sb.theta)?).to_f64_lossy();
            if pair.is_none() || d > max {
                max = d;
                pair = Some((i, j));
            }
        }
    }
    Ok(UniquenessProbe {
        runs,
        max_pairwise_l2: max,
        max_pairwise_relative: if scale > 0.0 { max / scale } else { 0.0 },
        farthest_pair: pair,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_mesh, Mesh};
    use crate::model::{MonotoneFlux, Nonlinearity};
    use crate::scalar::Vec2;
    use crate::theta_solver::solve_theta;
    use std::f64::consts::PI;

    fn sine(mesh: Mesh) -> ScalarField<f64> {
        ScalarField::from_fn_dirichlet(mesh, |p: Vec2<f64>| (PI * p.x).sin() * (PI * p.y).sin())
    }

    #[test]
    fn rhs_of_zero_gradient_is_zero() {
        let mesh = build_mesh(8).unwrap();
        let p = ProblemData::<f64>::simple(ScalarField::zeros(mesh));
        let z = ScalarField::zeros(mesh);
        let f = coupling_rhs(&p, &z, &sine(mesh)).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
        let f = coupling_rhs(&p, &sine(mesh), &z).unwrap();
        assert!(f.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn gamma_matches_chained_solves() {
        let mesh = build_mesh(16).unwrap();
        let u_star = sine(mesh);
        let p = ProblemData::simple(u_star.scaled(2.0 * PI * PI + 1.0));
        let hat = sine(mesh).scaled(0.3);
        let (theta, u) = gamma_map(&p, &hat).unwrap();
        let u2 = solve_u(&p, &hat).unwrap();
        let t2 = solve_theta(&p, &coupling_rhs(&p, &u2, &hat).unwrap()).unwrap();
        assert_eq!(u, u2);
        assert_eq!(theta, t2);
        let (_, u3) = gamma_map(&p, &ScalarField::zeros(mesh)).unwrap();
        assert_eq!(u, u3);
    }

    #[test]
    fn zero_data_converges_immediately() {
        let mesh = build_mesh(8).unwrap();
        let p =
            ProblemData::simple(ScalarField::zeros(mesh)).with_f(Nonlinearity::power(1.0, 0.6, 0));
        let s = fixed_point_solve(&p, 0.5, 1e-8, 10).unwrap();
        assert_eq!(s.trace.iterations, 1);
        assert!(s.theta.values().iter().all(|&v| v == 0.0));
        assert!(s.u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn large_data_reports_not_converged() {
        let mesh = build_mesh(8).unwrap();
        let g = ScalarField::constant(mesh, 200.0);
        let p = ProblemData::simple(g).with_f(Nonlinearity::power(5.0, 1.5, 0));
        match fixed_point_solve(&p, 1.0, 1e-8, 15) {
            Err(Error::NotConverged(t)) => {
                assert!(!t.converged);
                assert!(!t.increments.is_empty());
            }
            other => panic!("expected NotConverged, got {:?}", other.map(|s| s.trace)),
        }
    }

    #[test]
    fn relaxation_invariance() {
        let mesh = build_mesh(16).unwrap();
        let p = ProblemData::simple(sine(mesh).scaled(2.0))
            .with_f(Nonlinearity::linear_positive(1.0, 0))
            .with_flux(MonotoneFlux::radial());
        let tol = 1e-10;
        let base = fixed_point_solve(&p, 1.0, tol, 200).unwrap();
        for w in [0.3, 0.5] {
            let s = fixed_point_solve(&p, w, tol, 400).unwrap();
            assert!(l1_norm(&s.theta.sub(&base.theta).unwrap()) <= 10.0 * tol);
            let (again, _) = gamma_map(&p, &s.theta).unwrap();
            assert!(l1_norm(&again.sub(&s.theta).unwrap()) <= 10.0 * tol);
        }
    }

    #[test]
    fn ball_radius_quadratic_case() {
        let c = ball_radius(0.1, 1.0, 1.0, 1.0).unwrap();
        let r1 = (1.0 - 0.6f64.sqrt()) / 2.0;
        let (lo, hi) = c.interval.unwrap();
        assert!((lo - r1).abs() < 1e-12 && (hi - 0.2).abs() < 1e-15);
        assert!((c.r.unwrap() - (r1 + 0.2) / 2.0).abs() < 1e-10);
        assert!(!ball_radius(1.0, 1.0, 1.0, 1.0).unwrap().feasible);
        for eta in [1e-2, 1e-3, 1e-4] {
            let c = ball_radius(eta, 1.0, 1.0, 1.0).unwrap();
            let r = c.r.unwrap();
            assert!(eta < r && r < 2.0 * eta);
        }
        assert!(ball_radius(0.1, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn positivity_of_zero_run() {
        let mesh = build_mesh(8).unwrap();
        let p = ProblemData::<f64>::simple(ScalarField::zeros(mesh));
        let s = fixed_point_solve(&p, 0.5, 1e-8, 10).unwrap();
        let r = positivity_check(&s, 0.0);
        assert!(r.pass && r.min_value == 0.0);
    }
}
