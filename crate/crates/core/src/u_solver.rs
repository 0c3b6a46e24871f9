//! The linear equation `λu − div(A(x)Du − f(θ)) = g`, `u = 0` on the boundary.

use serde::Serialize;

use crate::error::Result;
use crate::fem::P1Space;
use crate::grid::{dirichlet_energy, integrate_with, l2_norm, ScalarField};
use crate::linalg::{norm2, pcg, CgOptions, CsrMatrix};
use crate::model::{Nonlinearity, ProblemData};
use crate::scalar::{Real, Vec2};

/// Assembled SPD system over the interior nodes.
#[derive(Clone, Debug)]
pub struct LinearSystem<T> {
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
}

/// `f(θ)` at every cell centroid.
pub fn nonlinearity_on_cells<T: Real>(f: &Nonlinearity<T>, theta: &ScalarField<T>) -> Vec<Vec2<T>> {
    theta
        .mesh()
        .cells()
        .map(|c| f.eval(theta.centroid_value(&c)))
        .collect()
}

/// `λ M + K_A` and `∫gφ + ∫f(θ)·∇φ`.
pub fn assemble_u_system<T: Real>(
    space: &P1Space<T>,
    problem: &ProblemData<T>,
    theta: &ScalarField<T>,
) -> Result<LinearSystem<T>> {
    problem.g.ensure_same_mesh(theta)?;
    let mesh = *space.mesh();
    let mut matrix = space.new_matrix();
    space.assemble(&mut matrix, problem.lambda, |cell| {
        problem.diffusion.eval(mesh.centroid(cell)).m
    });
    let f_cells = nonlinearity_on_cells(&problem.f, theta);
    let mut rhs = space.lumped_load(&problem.g);
    space.add_divergence_load(&mut rhs, T::one(), |cell| f_cells[cell.index]);
    Ok(LinearSystem { matrix, rhs })
}

pub fn solve_u<T: Real>(
    problem: &ProblemData<T>,
    theta: &ScalarField<T>,
) -> Result<ScalarField<T>> {
    solve_u_with(problem, theta, CgOptions::default())
}

pub fn solve_u_with<T: Real>(
    problem: &ProblemData<T>,
    theta: &ScalarField<T>,
    opts: CgOptions<T>,
) -> Result<ScalarField<T>> {
    let space = P1Space::new(*problem.mesh());
    let sys = assemble_u_system(&space, problem, theta)?;
    let mut x = vec![T::zero(); space.dofs()];
    pcg(&sys.matrix, &sys.rhs, &mut x, opts)?;
    Ok(space.extend(&x))
}

/// Relative residual `‖b − (λM + K_A)u‖ / ‖b‖` of the discrete weak form
/// (absolute when `b = 0`).
pub fn u_weak_residual<T: Real>(
    problem: &ProblemData<T>,
    theta: &ScalarField<T>,
    u: &ScalarField<T>,
) -> Result<T> {
    let space = P1Space::new(*problem.mesh());
    problem.g.ensure_same_mesh(u)?;
    let sys = assemble_u_system(&space, problem, theta)?;
    let x = space.restrict(u);
    let ax = sys.matrix.mul_vec(&x);
    let r: Vec<T> = sys.rhs.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
    let bn = norm2(&sys.rhs);
    let rn = norm2(&r);
    Ok(if bn > T::zero() { rn / bn } else { rn })
}

/// Energy estimate `∫|Du|² <= C(‖g‖² + ‖f(θ)‖²)` for a computed `u`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct UEnergyAudit {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    /// `max(1/γ², 2/γ) · 1.01` for the declared coercivity `γ`.
    pub c_theory: f64,
    pub pass: bool,
}

pub fn u_energy_audit<T: Real>(
    problem: &ProblemData<T>,
    theta: &ScalarField<T>,
    u: &ScalarField<T>,
) -> Result<UEnergyAudit> {
    problem.g.ensure_same_mesh(theta)?;
    problem.g.ensure_same_mesh(u)?;
    let lhs = dirichlet_energy(u);
    let f_cells = nonlinearity_on_cells(&problem.f, theta);
    let f_sq = integrate_with(u.mesh(), |c| f_cells[c.index].norm_sq());
    let rhs = l2_norm(&problem.g).powi(2) + f_sq;
    let constant = if rhs > T::zero() {
        lhs / rhs
    } else {
        T::zero()
    };
    let gamma = problem.diffusion.gamma;
    let c_theory = (gamma.powi(2).recip()).max(T::lit(2.0) / gamma) * T::lit(1.01);
    Ok(UEnergyAudit {
        lhs: lhs.to_f64_lossy(),
        rhs: rhs.to_f64_lossy(),
        constant: constant.to_f64_lossy(),
        c_theory: c_theory.to_f64_lossy(),
        pass: constant <= c_theory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_mesh, Mesh};
    use crate::model::{DiffusionMatrix, MonotoneFlux};
    use crate::scalar::Vec2;
    use std::f64::consts::PI;

    fn sine(mesh: Mesh) -> ScalarField<f64> {
        ScalarField::from_fn_dirichlet(mesh, |p: Vec2<f64>| (PI * p.x).sin() * (PI * p.y).sin())
    }

    #[test]
    fn zero_data_gives_zero() {
        let mesh = build_mesh(8).unwrap();
        let p = ProblemData::<f64>::simple(ScalarField::zeros(mesh));
        let u = solve_u(&p, &ScalarField::zeros(mesh)).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
        let a = u_energy_audit(&p, &ScalarField::zeros(mesh), &u).unwrap();
        assert_eq!((a.lhs, a.rhs, a.constant), (0.0, 0.0, 0.0));
        assert!(a.pass);
    }

    #[test]
    fn f_vanishing_at_zero_matches_decoupled() {
        let mesh = build_mesh(16).unwrap();
        let g = sine(mesh).scaled(2.0 * PI * PI + 1.0);
        let plain = ProblemData::simple(g.clone());
        let coupled = plain.with_f(Nonlinearity::linear_positive(3.0, 0));
        let zero = ScalarField::zeros(mesh);
        assert_eq!(
            solve_u(&plain, &zero).unwrap(),
            solve_u(&coupled, &zero).unwrap()
        );
    }

    #[test]
    fn manufactured_sine_is_second_order() {
        let mut errs = Vec::new();
        for n in [16, 32] {
            let mesh = build_mesh(n).unwrap();
            let exact = sine(mesh);
            let p = ProblemData::simple(exact.scaled(2.0 * PI * PI + 1.0));
            let u = solve_u(&p, &ScalarField::zeros(mesh)).unwrap();
            errs.push(l2_norm(&u.sub(&exact).unwrap()));
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.9, "order {order}");
    }

    #[test]
    fn residual_and_energy_audit() {
        let mesh = build_mesh(16).unwrap();
        let p = ProblemData::simple(sine(mesh).scaled(2.0 * PI * PI + 1.0));
        let theta = ScalarField::zeros(mesh);
        let u = solve_u(&p, &theta).unwrap();
        assert!(u_weak_residual(&p, &theta, &u).unwrap() <= 1e-9);
        let a = u_energy_audit(&p, &theta, &u).unwrap();
        assert!(a.pass && a.constant <= 1.0);
    }

    #[test]
    fn anisotropic_diffusion_solves() {
        let mesh = build_mesh(16).unwrap();
        let p = ProblemData::new(
            2.0,
            1.0,
            ScalarField::constant(mesh, 1.0),
            DiffusionMatrix::diagonal(2.0, 0.5),
            MonotoneFlux::identity(),
            Nonlinearity::power(1.0, 0.6, 1),
        )
        .unwrap();
        let theta = sine(mesh);
        let u = solve_u(&p, &theta).unwrap();
        assert!(u.boundary_is_zero());
        assert!(u_weak_residual(&p, &theta, &u).unwrap() <= 1e-9);
        assert!(u_energy_audit(&p, &theta, &u).unwrap().pass);
    }
}
