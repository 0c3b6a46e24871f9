//! The monotone equation `μθ − div a(x, Dθ) = F`, `θ = 0` on the boundary,
//! plus the renormalized-solution diagnostics.
//!
//! Nonlinear fluxes are solved by damped Kachanov iteration (freeze the
//! secant modulus `c(x, |Dθ|)` per cell, solve the SPD system). If that
//! stagnates, a Newton iteration with backtracking takes over, using the
//! convex energy as merit function when the flux has a potential and the
//! residual norm otherwise.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::P1Space;
use crate::grid::{integrate_with, l1_norm, truncate_field, Mesh, ScalarField};
use crate::linalg::{dot, norm2, pcg, CgOptions};
use crate::model::ProblemData;
use crate::scalar::{truncate, Real, Vec2};

#[derive(Clone, Copy, Debug)]
pub struct ThetaOptions<T> {
    /// Target `‖residual‖ / ‖load‖`.
    pub rel_tol: T,
    pub max_iters: usize,
    /// Relaxation of the Kachanov update, in `(0, 1]`.
    pub damping: T,
}

impl<T: Real> Default for ThetaOptions<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-9).max(T::tolerance_floor() * T::lit(10.0)),
            max_iters: 200,
            damping: T::one(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ThetaMethod {
    Linear,
    Kachanov,
    Newton,
}

#[derive(Clone, Debug)]
pub struct ThetaSolve<T> {
    pub theta: ScalarField<T>,
    pub iterations: usize,
    pub rel_residual: f64,
    pub method: ThetaMethod,
}

struct Operator<'a, T> {
    problem: &'a ProblemData<T>,
    space: P1Space<T>,
    centroids: Vec<Vec2<T>>,
    mass: Vec<T>,
}

impl<'a, T: Real> Operator<'a, T> {
    fn new(problem: &'a ProblemData<T>) -> Self {
        let mesh = *problem.mesh();
        let space = P1Space::new(mesh);
        let centroids = mesh.cells().map(|c| mesh.centroid(&c)).collect();
        let mass = space.dof_masses();
        Self {
            problem,
            space,
            centroids,
            mass,
        }
    }

    fn gradients(&self, x: &[T]) -> Vec<Vec2<T>> {
        let field = self.space.extend(x);
        self.space
            .mesh()
            .cells()
            .map(|c| field.cell_gradient(&c))
            .collect()
    }

    /// `μ M x + ∫a(x, Dθ)·∇φ − b`.
    fn residual(&self, x: &[T], b: &[T]) -> Vec<T> {
        let grads = self.gradients(x);
        let flux = &self.problem.flux;
        let mu = self.problem.mu;
        let mut r: Vec<T> = (0..x.len())
            .map(|d| mu * self.mass[d] * x[d] - b[d])
            .collect();
        self.space.add_divergence_load(&mut r, T::one(), |c| {
            flux.eval(self.centroids[c.index], grads[c.index])
        });
        r
    }

    fn energy(&self, x: &[T], b: &[T]) -> Option<T> {
        let grads = self.gradients(x);
        let flux = &self.problem.flux;
        let mut e = T::zero();
        for (d, &xd) in x.iter().enumerate() {
            e += self.problem.mu * self.mass[d] * xd * xd / T::lit(2.0) - b[d] * xd;
        }
        let area = self.space.mesh().cell_area::<T>();
        for (c, g) in grads.iter().enumerate() {
            e += area * flux.potential(self.centroids[c], g.norm())?;
        }
        Some(e)
    }
}

/// Lumped load `∫Fφ` over the interior nodes.
fn load<T: Real>(space: &P1Space<T>, f: &ScalarField<T>) -> Vec<T> {
    space.lumped_load(f)
}

fn rel<T: Real>(r: &[T], bnorm: T) -> T {
    let rn = norm2(r);
    if bnorm > T::zero() {
        rn / bnorm
    } else {
        rn
    }
}

pub fn solve_theta<T: Real>(
    problem: &ProblemData<T>,
    f: &ScalarField<T>,
) -> Result<ScalarField<T>> {
    Ok(solve_theta_with(problem, f, None, ThetaOptions::default())?.theta)
}

/// Solves starting from `init` (zero when absent).
pub fn solve_theta_with<T: Real>(
    problem: &ProblemData<T>,
    f: &ScalarField<T>,
    init: Option<&ScalarField<T>>,
    opts: ThetaOptions<T>,
) -> Result<ThetaSolve<T>> {
    problem.g.ensure_same_mesh(f)?;
    if !f.is_finite() {
        return Err(Error::InvalidArgument(
            "right-hand side is not finite".into(),
        ));
    }
    if !(opts.damping > T::zero() && opts.damping <= T::one()) {
        return Err(Error::InvalidArgument(format!(
            "damping must lie in (0, 1], got {}",
            opts.damping
        )));
    }
    let op = Operator::new(problem);
    let space = &op.space;
    let b = load(space, f);
    let bnorm = norm2(&b);
    let mut x = match init {
        Some(t) => {
            problem.g.ensure_same_mesh(t)?;
            space.restrict(t)
        }
        None => vec![T::zero(); space.dofs()],
    };
    if bnorm == T::zero() {
        return Ok(ThetaSolve {
            theta: ScalarField::zeros(*problem.mesh()),
            iterations: 0,
            rel_residual: 0.0,
            method: ThetaMethod::Linear,
        });
    }
    let cg = CgOptions {
        rel_tol: (opts.rel_tol * T::lit(0.01)).max(T::tolerance_floor()),
        ..CgOptions::default()
    };
    // Nonlinear sweeps never need the linear solves tighter than a hundred
    // rounding units; Newton's solve is relative to the current residual.
    let kachanov_cg = CgOptions {
        rel_tol: cg.rel_tol.max(T::tolerance_floor() * T::lit(100.0)),
        ..cg
    };
    let newton_cg = CgOptions {
        rel_tol: T::lit(1e-8).max(T::tolerance_floor() * T::lit(100.0)),
        ..cg
    };
    let flux = &problem.flux;
    let mut mat = space.new_matrix();

    if flux.is_linear() {
        space.assemble(&mut mat, problem.mu, |c| {
            let k = flux.modulus(op.centroids[c.index], T::zero());
            [[k, T::zero()], [T::zero(), k]]
        });
        let info = pcg(&mat, &b, &mut x, cg)?;
        let r = rel(&op.residual(&x, &b), bnorm);
        return Ok(ThetaSolve {
            theta: space.extend(&x),
            iterations: info.iterations.max(1),
            rel_residual: r.to_f64_lossy(),
            method: ThetaMethod::Linear,
        });
    }

    let mut history: Vec<f64> = Vec::new();
    let kachanov_cap = opts.max_iters / 2;
    let mut it = 0;
    while it < kachanov_cap {
        let r = rel(&op.residual(&x, &b), bnorm);
        history.push(r.to_f64_lossy());
        if r <= opts.rel_tol {
            return Ok(ThetaSolve {
                theta: space.extend(&x),
                iterations: it,
                rel_residual: r.to_f64_lossy(),
                method: ThetaMethod::Kachanov,
            });
        }
        if it >= 5 && history[it] > 0.5 * history[it - 5] {
            log::debug!(
                "Kachanov iteration stagnates at {:e}; switching to Newton",
                r.to_f64_lossy()
            );
            break;
        }
        let grads = op.gradients(&x);
        space.assemble(&mut mat, problem.mu, |c| {
            let k = flux.modulus(op.centroids[c.index], grads[c.index].norm());
            [[k, T::zero()], [T::zero(), k]]
        });
        let mut y = x.clone();
        pcg(&mat, &b, &mut y, kachanov_cg)?;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi += opts.damping * (*yi - *xi);
        }
        it += 1;
    }

    let use_energy = flux.has_potential();
    while it < opts.max_iters {
        let r = op.residual(&x, &b);
        let rn = rel(&r, bnorm);
        history.push(rn.to_f64_lossy());
        if rn <= opts.rel_tol {
            return Ok(ThetaSolve {
                theta: space.extend(&x),
                iterations: it,
                rel_residual: rn.to_f64_lossy(),
                method: ThetaMethod::Newton,
            });
        }
        let grads = op.gradients(&x);
        space.assemble(&mut mat, problem.mu, |c| {
            flux.jacobian(op.centroids[c.index], grads[c.index])
        });
        let neg_r: Vec<T> = r.iter().map(|&v| -v).collect();
        let mut step = vec![T::zero(); x.len()];
        pcg(&mat, &neg_r, &mut step, newton_cg)?;
        let e0 = if use_energy { op.energy(&x, &b) } else { None };
        let slope = dot(&r, &step);
        let mut t = T::one();
        let mut accepted = false;
        while t > T::lit(1e-10) {
            let trial: Vec<T> = x.iter().zip(&step).map(|(&a, &s)| a + t * s).collect();
            let rt = rel(&op.residual(&trial, &b), bnorm);
            let energy_ok = match (e0, op.energy(&trial, &b)) {
                (Some(e0), Some(e1)) => e1 <= e0 + T::lit(1e-4) * t * slope,
                _ => false,
            };
            let residual_ok = rt <= (T::one() - T::lit(1e-4) * t) * rn;
            if energy_ok || residual_ok {
                x = trial;
                accepted = true;
                break;
            }
            t /= T::lit(2.0);
        }
        it += 1;
        if !accepted {
            break;
        }
    }
    Err(Error::SolverFailure {
        iterations: it,
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

/// Relative residual `‖R‖₂ / ‖b‖₂` of the discrete weak form.
pub fn theta_weak_residual<T: Real>(
    problem: &ProblemData<T>,
    theta: &ScalarField<T>,
    f: &ScalarField<T>,
) -> Result<T> {
    problem.g.ensure_same_mesh(theta)?;
    problem.g.ensure_same_mesh(f)?;
    let op = Operator::new(problem);
    let b = load(&op.space, f);
    let r = op.residual(&op.space.restrict(theta), &b);
    Ok(rel(&r, norm2(&b)))
}

/// Nodal residuals `R_i` and loads `b_i`.
fn nodal_residual<T: Real>(
    problem: &ProblemData<T>,
    theta: &ScalarField<T>,
    f: &ScalarField<T>,
) -> Result<(P1Space<T>, Vec<T>, Vec<T>)> {
    problem.g.ensure_same_mesh(theta)?;
    problem.g.ensure_same_mesh(f)?;
    let op = Operator::new(problem);
    let b = load(&op.space, f);
    let r = op.residual(&op.space.restrict(theta), &b);
    Ok((op.space, r, b))
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// `max_i |R_i| / max_i |b_i|`: the weak form tested against every nodal
/// basis function.
pub fn weak_residual_max<T: Real>(
    problem: &ProblemData<T>,
    theta: &ScalarField<T>,
    f: &ScalarField<T>,
) -> Result<T> {
    let (_, r, b) = nodal_residual(problem, theta, f)?;
    let scale = max_abs(&b);
    let rm = max_abs(&r);
    Ok(if scale > T::zero() { rm / scale } else { rm })
}

/// Residual of `μ∫θw + ∫a(x,Dθ)·Dw = ∫Fw` for `w = T_K(θ)/K`, normalized
/// by `max(|lhs|, |rhs|, 1)`.
pub fn identity_with_admissible_test<T: Real>(
    problem: &ProblemData<T>,
    theta: &ScalarField<T>,
    f: &ScalarField<T>,
    k: T,
) -> Result<T> {
    if !(k > T::zero()) {
        return Err(Error::InvalidTruncation(k.to_f64_lossy()));
    }
    problem.g.ensure_same_mesh(theta)?;
    problem.g.ensure_same_mesh(f)?;
    let op = Operator::new(problem);
    let space = &op.space;
    let x = space.restrict(theta);
    let w: Vec<T> = x.iter().map(|&v| truncate(v, k) / k).collect();
    let grads = op.gradients(&x);
    let wgrads = op.gradients(&w);
    let area = space.mesh().cell_area::<T>();
    let mut lhs = problem.mu * space.mass_inner(&x, &w);
    for (c, (g, gw)) in grads.iter().zip(&wgrads).enumerate() {
        lhs += area * problem.flux.eval(op.centroids[c], *g).dot(*gw);
    }
    let fx = space.restrict(f);
    let rhs = space.mass_inner(&fx, &w);
    let scale = lhs.abs().max(rhs.abs()).max(T::one());
    Ok((lhs - rhs).abs() / scale)
}

/// `h_n(r)`: 1 on `|r| <= n`, affine down to 0 on `n <= |r| <= 2n`, 0 beyond.
pub fn h_n<T: Real>(r: T, n: T) -> T {
    let a = r.abs();
    if a <= n {
        T::one()
    } else if a >= n + n {
        T::zero()
    } else {
        (n + n - a) / n
    }
}

/// Renormalized identity with `h = h_n`, tested against every nodal `φ_i`.
///
/// With the nodal interpolant of `h_n(θ)φ_i` as test function the identity
/// reads `h_n(θ_i)·R_i = 0`; the maximum over `i` is reported relative to
/// `max_i |b_i|`.
pub fn renorm_identity_residual<T: Real>(
    problem: &ProblemData<T>,
    theta: &ScalarField<T>,
    f: &ScalarField<T>,
    n: T,
) -> Result<T> {
    if !(n > T::zero()) {
        return Err(Error::InvalidTruncation(n.to_f64_lossy()));
    }
    let (space, r, b) = nodal_residual(problem, theta, f)?;
    let x = space.restrict(theta);
    let hr: Vec<T> = r.iter().zip(&x).map(|(&ri, &xi)| h_n(xi, n) * ri).collect();
    let scale = max_abs(&b);
    let m = max_abs(&hr);
    Ok(if scale > T::zero() { m / scale } else { m })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RenormDiagnostics {
    /// `K ↦ (1/K)∫|DT_K(θ)|²`.
    pub truncation_energies: Vec<(f64, f64)>,
    /// `n ↦ (1/n)∫_{n<|θ|<2n}|Dθ|²`.
    pub level_energies: Vec<(f64, f64)>,
    /// `n ↦` renormalized identity residual with `h_n`.
    pub renorm_residuals: Vec<(f64, f64)>,
}

fn sorted_levels<T: Real>(levels: &[T], what: &str) -> Result<Vec<T>> {
    let mut v = levels.to_vec();
    if let Some(bad) = v.iter().find(|k| !(**k > T::zero()) || !k.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "{what} levels must be positive, got {bad}"
        )));
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    v.dedup();
    Ok(v)
}

/// `(1/K)∫|DT_K(θ)|²`.
pub fn truncation_energy<T: Real>(theta: &ScalarField<T>, k: T) -> Result<T> {
    let t = truncate_field(theta, k)?;
    Ok(crate::grid::dirichlet_energy(&t) / k)
}

/// `(1/n)∫_{n<|θ|<2n}|Dθ|²` with centroid membership.
pub fn level_energy<T: Real>(theta: &ScalarField<T>, n: T) -> Result<T> {
    if !(n > T::zero()) {
        return Err(Error::InvalidTruncation(n.to_f64_lossy()));
    }
    let e = integrate_with(theta.mesh(), |c| {
        let v = theta.centroid_value(c).abs();
        if n < v && v < n + n {
            theta.cell_gradient(c).norm_sq()
        } else {
            T::zero()
        }
    });
    Ok(e / n)
}

pub fn diagnostics<T: Real>(
    problem: &ProblemData<T>,
    theta: &ScalarField<T>,
    f: &ScalarField<T>,
    ks: &[T],
    ns: &[T],
) -> Result<RenormDiagnostics> {
    let ks = sorted_levels(ks, "truncation")?;
    let ns = sorted_levels(ns, "level-set")?;
    let mut out = RenormDiagnostics::default();
    for &k in &ks {
        out.truncation_energies.push((
            k.to_f64_lossy(),
            truncation_energy(theta, k)?.to_f64_lossy(),
        ));
    }
    for &n in &ns {
        out.level_energies
            .push((n.to_f64_lossy(), level_energy(theta, n)?.to_f64_lossy()));
        out.renorm_residuals.push((
            n.to_f64_lossy(),
            renorm_identity_residual(problem, theta, f, n)?.to_f64_lossy(),
        ));
    }
    Ok(out)
}

/// Solves with `T_n(F)` for every level and reports `‖θ_n − θ_last‖_{L¹}`
/// against the finest (last) level.
pub fn truncated_data_stability<T: Real>(
    problem: &ProblemData<T>,
    f: &ScalarField<T>,
    levels: &[T],
) -> Result<Vec<(T, T)>> {
    if levels.is_empty() {
        return Ok(Vec::new());
    }
    if levels.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(
            "levels must be strictly increasing".into(),
        ));
    }
    let thetas: Vec<ScalarField<T>> = levels
        .par_iter()
        .map(|&n| solve_theta(problem, &truncate_field(f, n)?))
        .collect::<Result<_>>()?;
    let last = thetas.last().expect("nonempty");
    levels
        .iter()
        .zip(&thetas)
        .map(|(&n, t)| Ok((n, l1_norm(&t.sub(last)?))))
        .collect()
}

/// Centre of the near-singular data family.
pub const SINGULAR_CENTRE: (f64, f64) = (0.5, 0.5);

/// `amplitude · min(cap, |x − x₀|^{−3/2})`, integrable but not square
/// integrable as `cap → ∞`.
pub fn near_singular_source<T: Real>(mesh: Mesh, amplitude: T, cap: T) -> ScalarField<T> {
    let x0 = Vec2::new(T::lit(SINGULAR_CENTRE.0), T::lit(SINGULAR_CENTRE.1));
    ScalarField::from_fn(mesh, |p| {
        let r = (p - x0).norm();
        let v = if r > T::zero() {
            r.powf(T::lit(-1.5))
        } else {
            cap
        };
        amplitude * v.min(cap)
    })
}

/// Terms of the comparison inequality between two solutions, integrated
/// exactly for the piecewise-linear fields (each cell is split along the
/// level lines `δ = ±K`):
/// `lhs = μ∫δT_K(δ) + ∫_{|δ|<K}(a(Dθ₁) − a(Dθ₂))·Dδ`, `rhs = ∫(F₁ − F₂)T_K(δ)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ComparisonTerms {
    pub k: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs|`; the continuous relation is an identity, so any gap is
    /// discretization error.
    pub slack: f64,
}

/// Polygon vertex in reference coordinates carrying `(δ, F)`.
type PVert<T> = [T; 4];

/// Keeps the part of a convex polygon where `side(δ) >= 0` (`side` linear).
fn clip<T: Real>(poly: &[PVert<T>], side: impl Fn(T) -> T) -> Vec<PVert<T>> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let (sa, sb) = (side(a[2]), side(b[2]));
        if sa >= T::zero() {
            out.push(a);
        }
        if (sa >= T::zero()) != (sb >= T::zero()) {
            let t = sa / (sa - sb);
            out.push(std::array::from_fn(|j| a[j] + t * (b[j] - a[j])));
        }
    }
    out
}

/// `(∫ f, area)` over a polygon in reference coordinates, with `f` a
/// quadratic in the carried attributes (edge-midpoint rule, exact).
fn poly_integral<T: Real>(poly: &[PVert<T>], f: impl Fn(T, T) -> T) -> (T, T) {
    let half = T::lit(0.5);
    let third = T::one() / T::lit(3.0);
    let (mut acc, mut area) = (T::zero(), T::zero());
    for i in 1..poly.len().saturating_sub(1) {
        let (a, b, c) = (poly[0], poly[i], poly[i + 1]);
        let ar = ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs() * half;
        let mid = |p: PVert<T>, q: PVert<T>| f((p[2] + q[2]) * half, (p[3] + q[3]) * half);
        acc += ar * third * (mid(a, b) + mid(b, c) + mid(c, a));
        area += ar;
    }
    (acc, area)
}

pub fn comparison_terms<T: Real>(
    problem: &ProblemData<T>,
    (theta1, f1): (&ScalarField<T>, &ScalarField<T>),
    (theta2, f2): (&ScalarField<T>, &ScalarField<T>),
    k: T,
) -> Result<ComparisonTerms> {
    if !(k > T::zero()) {
        return Err(Error::InvalidTruncation(k.to_f64_lossy()));
    }
    for fld in [theta1, f1, theta2, f2] {
        problem.g.ensure_same_mesh(fld)?;
    }
    let mesh = *problem.mesh();
    let delta = theta1.sub(theta2)?;
    let df = f1.sub(f2)?;
    let flux = &problem.flux;
    // Reference triangle has area 1/2; cell integrals scale by 2|T|.
    let scale = mesh.cell_area::<T>() * T::lit(2.0);
    let (mut lhs, mut rhs) = (T::zero(), T::zero());
    for c in mesh.cells() {
        let [p, q, r] = c.nodes;
        let v = |n: usize, x: T, y: T| [x, y, delta.values()[n], df.values()[n]];
        let tri = [
            v(p, T::zero(), T::zero()),
            v(q, T::one(), T::zero()),
            v(r, T::zero(), T::one()),
        ];
        let upper = clip(&tri, |d| d - k);
        let lower = clip(&tri, |d| -k - d);
        let middle = clip(&clip(&tri, |d| k - d), |d| d + k);
        let mu = problem.mu;
        let (l_up, _) = poly_integral(&upper, |d, _| mu * d * k);
        let (l_lo, _) = poly_integral(&lower, |d, _| -mu * d * k);
        let (l_mid, area_mid) = poly_integral(&middle, |d, _| mu * d * d);
        let (r_up, _) = poly_integral(&upper, |_, f| f * k);
        let (r_lo, _) = poly_integral(&lower, |_, f| -f * k);
        let (r_mid, _) = poly_integral(&middle, |d, f| f * d);
        let mut cell_lhs = l_up + l_lo + l_mid;
        if area_mid > T::zero() {
            let x = mesh.centroid(&c);
            let g1 = theta1.cell_gradient(&c);
            let g2 = theta2.cell_gradient(&c);
            cell_lhs += area_mid * (flux.eval(x, g1) - flux.eval(x, g2)).dot(g1 - g2);
        }
        lhs += cell_lhs * scale;
        rhs += (r_up + r_lo + r_mid) * scale;
    }
    Ok(ComparisonTerms {
        k: k.to_f64_lossy(),
        lhs: lhs.to_f64_lossy(),
        rhs: rhs.to_f64_lossy(),
        slack: (lhs - rhs).abs().to_f64_lossy(),
    })
}

/// `(‖θ₁ − θ₂‖_{L¹}, ‖F₁ − F₂‖_{L¹}/μ)` for the solutions of the two data.
pub fn l1_contraction<T: Real>(
    problem: &ProblemData<T>,
    f1: &ScalarField<T>,
    f2: &ScalarField<T>,
) -> Result<(T, T)> {
    let t1 = solve_theta(problem, f1)?;
    let t2 = solve_theta(problem, f2)?;
    Ok((l1_norm(&t1.sub(&t2)?), l1_norm(&f1.sub(f2)?) / problem.mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_mesh, l2_norm};
    use crate::model::{MonotoneFlux, ProblemData};
    use crate::scalar::Vec2;
    use std::f64::consts::PI;

    fn sine(mesh: Mesh) -> ScalarField<f64> {
        ScalarField::from_fn_dirichlet(mesh, |p: Vec2<f64>| (PI * p.x).sin() * (PI * p.y).sin())
    }

    fn problem(mesh: Mesh, flux: MonotoneFlux<f64>) -> ProblemData<f64> {
        ProblemData::simple(ScalarField::zeros(mesh)).with_flux(flux)
    }

    #[test]
    fn manufactured_sine() {
        let mut errs = Vec::new();
        for n in [16, 32] {
            let mesh = build_mesh(n).unwrap();
            let p = problem(mesh, MonotoneFlux::identity());
            let exact = sine(mesh);
            let f = exact.scaled(2.0 * PI * PI + 1.0);
            let t = solve_theta(&p, &f).unwrap();
            assert!(theta_weak_residual(&p, &t, &f).unwrap() <= 1e-9);
            errs.push(l2_norm(&t.sub(&exact).unwrap()));
        }
        assert!((errs[0] / errs[1]).log2() > 1.9);
    }

    #[test]
    fn zero_data_zero_solution() {
        let mesh = build_mesh(8).unwrap();
        let p = problem(mesh, MonotoneFlux::radial());
        let t = solve_theta(&p, &ScalarField::zeros(mesh)).unwrap();
        assert!(t.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn maximum_principle_on_coarse_mesh() {
        let mesh = build_mesh(4).unwrap();
        let p = problem(mesh, MonotoneFlux::identity())
            .with_mu(2.0)
            .unwrap();
        let c = 3.0;
        let t = solve_theta(&p, &ScalarField::constant(mesh, c)).unwrap();
        for &v in t.values() {
            assert!((0.0..=c / 2.0).contains(&v), "{v}");
        }
    }

    #[test]
    fn radial_flux_converges_from_any_guess() {
        let mesh = build_mesh(16).unwrap();
        let p = problem(mesh, MonotoneFlux::radial());
        let f = ScalarField::constant(mesh, 20.0);
        let a = solve_theta_with(&p, &f, None, ThetaOptions::default()).unwrap();
        let guess = sine(mesh).scaled(-5.0);
        let b = solve_theta_with(&p, &f, Some(&guess), ThetaOptions::default()).unwrap();
        assert!(a.rel_residual <= 1e-9 && b.rel_residual <= 1e-9);
        let d = l2_norm(&a.theta.sub(&b.theta).unwrap()) / l2_norm(&a.theta);
        assert!(d <= 1e-8, "{d}");
    }

    #[test]
    fn admissible_test_and_renormalized_identities() {
        let mesh = build_mesh(16).unwrap();
        let p = problem(mesh, MonotoneFlux::radial());
        let f = sine(mesh).scaled(2.0 * PI * PI + 1.0);
        let t = solve_theta(&p, &f).unwrap();
        for k in [0.5, 10.0] {
            assert!(identity_with_admissible_test(&p, &t, &f, k).unwrap() <= 1e-7);
        }
        let big = 10.0 * t.max_abs();
        assert_eq!(
            renorm_identity_residual(&p, &t, &f, big).unwrap(),
            weak_residual_max(&p, &t, &f).unwrap()
        );
        let z = ScalarField::zeros(mesh);
        assert_eq!(identity_with_admissible_test(&p, &z, &z, 1.0).unwrap(), 0.0);
        assert_eq!(renorm_identity_residual(&p, &z, &z, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn h_n_profile() {
        assert_eq!(h_n(0.5, 1.0), 1.0);
        assert_eq!(h_n(-1.5, 1.0), 0.5);
        assert_eq!(h_n(3.0, 1.0), 0.0);
    }

    #[test]
    fn diagnostics_of_constant_field() {
        let mesh = build_mesh(8).unwrap();
        let p = problem(mesh, MonotoneFlux::identity());
        let t = ScalarField::constant(mesh, 0.5);
        let d = diagnostics(&p, &t, &t, &[1.0], &[4.0, 1.0, 2.0]).unwrap();
        assert_eq!(
            d.level_energies.iter().map(|e| e.0).collect::<Vec<_>>(),
            vec![1.0, 2.0, 4.0]
        );
        assert!(d.level_energies.iter().all(|e| e.1 == 0.0));
    }

    #[test]
    fn truncated_data_distances() {
        let mesh = build_mesh(8).unwrap();
        let p = problem(mesh, MonotoneFlux::identity());
        let f = ScalarField::constant(mesh, 10.0);
        let d = truncated_data_stability(&p, &f, &[1.0, 100.0]).unwrap();
        assert!(d[0].1 > 0.0);
        assert_eq!(d[1].1, 0.0);
        let d = truncated_data_stability(&p, &f, &[20.0, 100.0]).unwrap();
        assert_eq!(d[0].1, 0.0);
    }
}
