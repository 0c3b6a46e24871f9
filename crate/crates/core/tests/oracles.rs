//! Solver outputs checked against values computed independently here.

use std::f64::consts::PI;

use thermovisc::theta_solver::{comparison_terms, l1_contraction};
use thermovisc::{
    build_mesh, solve_theta, solve_u, DiffusionMatrix, MonotoneFlux, Nonlinearity, ProblemData,
    ProblemData32, ProblemData64, ScalarField, ScalarField32, ScalarField64, Vec2,
};

fn sine(p: Vec2<f64>) -> f64 {
    (PI * p.x).sin() * (PI * p.y).sin()
}

fn max_nodal_error(field: &ScalarField64, exact: impl Fn(Vec2<f64>) -> f64) -> f64 {
    let mesh = field.mesh();
    (0..mesh.node_count())
        .map(|k| (field.values()[k] - exact(mesh.node_coords(k))).abs())
        .fold(0.0, f64::max)
}

fn problem(n: usize, lambda: f64, mu: f64, g: impl Fn(Vec2<f64>) -> f64) -> ProblemData64 {
    let mesh = build_mesh(n).unwrap();
    ProblemData::new(
        lambda,
        mu,
        ScalarField::from_fn(mesh, g),
        DiffusionMatrix::identity(),
        MonotoneFlux::identity(),
        Nonlinearity::zero(),
    )
    .unwrap()
}

#[test]
fn u_solver_reproduces_manufactured_sine() {
    let lambda = 2.0;
    let mut errs = Vec::new();
    for n in [16, 32] {
        let p = problem(n, lambda, 1.0, |x| (lambda + 2.0 * PI * PI) * sine(x));
        let u = solve_u(&p, &ScalarField::zeros(*p.mesh())).unwrap();
        errs.push(max_nodal_error(&u, sine));
    }
    assert!(errs[1] < 5e-3, "{errs:?}");
    assert!(errs[0] / errs[1] > 3.5, "second order expected: {errs:?}");
}

#[test]
fn theta_solver_reproduces_manufactured_sine() {
    let mu = 0.5;
    let p = problem(32, 1.0, mu, |_| 0.0);
    let f = ScalarField::from_fn(*p.mesh(), |x| (mu + 2.0 * PI * PI) * sine(x));
    let theta = solve_theta(&p, &f).unwrap();
    assert!(max_nodal_error(&theta, sine) < 5e-3);
}

#[test]
fn radial_flux_theta_is_odd_in_the_source() {
    let mut p = problem(16, 1.0, 1.0, |_| 0.0);
    p.flux = MonotoneFlux::radial();
    let f = ScalarField::from_fn(*p.mesh(), |x| 20.0 * sine(x) + 5.0 * x.x);
    let plus = solve_theta(&p, &f).unwrap();
    let minus = solve_theta(&p, &f.scaled(-1.0)).unwrap();
    let gap = plus.axpy(1.0, &minus).unwrap().max_abs();
    assert!(gap < 1e-8 * plus.max_abs(), "{gap}");
}

#[test]
fn l1_contraction_holds_for_nonlinear_flux() {
    let mut p = problem(24, 1.0, 0.7, |_| 0.0);
    p.flux = MonotoneFlux::radial();
    let mesh = *p.mesh();
    let f1 = ScalarField::from_fn(mesh, |x| 10.0 * sine(x));
    let f2 = ScalarField::from_fn(mesh, |x| -3.0 + 4.0 * x.y * x.y);
    let (dtheta, bound) = l1_contraction(&p, &f1, &f2).unwrap();
    assert!(dtheta <= 1.05 * bound, "{dtheta} > {bound}");
}

#[test]
fn comparison_terms_match_closed_forms() {
    // n odd so the level line x = 1/2 crosses cells.
    let mesh = build_mesh(7).unwrap();
    let mu = 1.5;
    let mut p = problem(7, 1.0, mu, |_| 0.0);
    p.mu = mu;
    let zero = ScalarField64::zeros(mesh);

    // δ = x, F = 0, K = 1/2: μ(∫_{x<½} x² + ∫_{x>½} x/2) + |{x<½}|.
    let delta = ScalarField::from_fn(mesh, |q| q.x);
    let t = comparison_terms(&p, (&delta, &zero), (&zero, &zero), 0.5).unwrap();
    let lhs = mu * (1.0 / 24.0 + 3.0 / 16.0) + 0.5;
    assert!((t.lhs - lhs).abs() < 1e-12, "{} vs {lhs}", t.lhs);
    assert!(t.rhs.abs() < 1e-14);

    // δ ≡ 3 above K = 1, F₁ − F₂ = y: lhs = 3μ, rhs = ∫y = 1/2.
    let three = ScalarField::constant(mesh, 3.0);
    let y = ScalarField::from_fn(mesh, |q| q.y);
    let t = comparison_terms(&p, (&three, &y), (&zero, &zero), 1.0).unwrap();
    assert!((t.lhs - 3.0 * mu).abs() < 1e-12);
    assert!((t.rhs - 0.5).abs() < 1e-12);
}

#[test]
fn comparison_terms_without_truncation_are_the_weak_form() {
    let mesh = build_mesh(9).unwrap();
    let p = problem(9, 1.0, 0.8, |_| 0.0);
    let d = ScalarField64::from_fn(mesh, |q| (3.0 * q.x).sin() * q.y + q.x * q.x);
    let f = ScalarField64::from_fn(mesh, |q| (q.x - q.y).cos());
    let zero = ScalarField64::zeros(mesh);
    let t = comparison_terms(&p, (&d, &f), (&zero, &zero), 1e6).unwrap();

    // Consistent P1 mass and stiffness, assembled independently.
    let area = mesh.cell_area::<f64>();
    let (mut mass, mut cross, mut stiff) = (0.0, 0.0, 0.0);
    for c in mesh.cells() {
        let a = c.nodes.map(|k| d.values()[k]);
        let b = c.nodes.map(|k| f.values()[k]);
        let pair = |u: [f64; 3], v: [f64; 3]| {
            let (su, sv): (f64, f64) = (u.iter().sum(), v.iter().sum());
            let diag: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
            (su * sv + diag) * area / 12.0
        };
        mass += pair(a, a);
        cross += pair(a, b);
        stiff += area * d.cell_gradient(&c).norm_sq();
    }
    assert!((t.lhs - (0.8 * mass + stiff)).abs() < 1e-12 * t.lhs);
    assert!((t.rhs - cross).abs() < 1e-12);
}

#[test]
fn single_precision_matches_double() {
    let n = 16;
    let mesh = build_mesh(n).unwrap();
    let g64 = ScalarField64::from_fn(mesh, |x| 5.0 * sine(x));
    let g32 = ScalarField32::from_fn(mesh, |x| {
        5.0 * (std::f32::consts::PI * x.x).sin() * (std::f32::consts::PI * x.y).sin()
    });
    let t64 = solve_theta(&ProblemData64::simple(ScalarField::zeros(mesh)), &g64).unwrap();
    let t32 = solve_theta(&ProblemData32::simple(ScalarField::zeros(mesh)), &g32).unwrap();
    let worst = (0..mesh.node_count())
        .map(|k| (t64.values()[k] - f64::from(t32.values()[k])).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-4 * t64.max_abs(), "{worst}");
}
