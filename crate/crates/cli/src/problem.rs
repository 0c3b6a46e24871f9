//! Turns a [`Scenario`] into problem data on a given mesh.

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufReader;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermovisc::{
    build_mesh, extend_below, read_field_csv, DiffusionMatrix, Mesh, MonotoneFlux, Nonlinearity,
    ProblemData64, ScalarField64, Vec2,
};

use crate::config::{Base, GSpec, Init, Manufactured, Scenario};
use crate::CliError;

/// Environment variable seeding the random initialization.
pub const SEED_VAR: &str = "THERMOVISC_SEED";
pub const DEFAULT_SEED: u64 = 42;

pub fn seed() -> u64 {
    std::env::var(SEED_VAR)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

/// Exact solution of the manufactured case.
pub fn exact(case: Manufactured, p: Vec2<f64>) -> f64 {
    match case {
        Manufactured::Sine => (PI * p.x).sin() * (PI * p.y).sin(),
        Manufactured::Poly => p.x * (1.0 - p.x) * p.y * (1.0 - p.y),
    }
}

/// `c·w − Δw` for the exact solution `w` of the case.
pub fn manufactured_source(case: Manufactured, c: f64, p: Vec2<f64>) -> f64 {
    let w = exact(case, p);
    let lap = match case {
        Manufactured::Sine => -2.0 * PI * PI * w,
        Manufactured::Poly => -2.0 * (p.y * (1.0 - p.y) + p.x * (1.0 - p.x)),
    };
    c * w - lap
}

/// Unit-L² base fields for `scaled:` sources.
pub fn base_field(mesh: Mesh, base: Base) -> ScalarField64 {
    match base {
        Base::Sine => {
            ScalarField64::from_fn_dirichlet(mesh, |p| 2.0 * (PI * p.x).sin() * (PI * p.y).sin())
        }
        Base::One => ScalarField64::constant(mesh, 1.0),
    }
}

pub fn source(s: &Scenario, mesh: Mesh) -> Result<ScalarField64, CliError> {
    Ok(match &s.g {
        GSpec::Manufactured(case) => {
            ScalarField64::from_fn_dirichlet(mesh, |p| manufactured_source(*case, s.lambda, p))
        }
        GSpec::Scaled { base, factor } => base_field(mesh, *base).scaled(*factor),
        GSpec::File(path) => {
            let f = File::open(path).map_err(|e| {
                CliError::Other(format!("cannot open g file {}: {e}", path.display()))
            })?;
            let g: ScalarField64 = read_field_csv(BufReader::new(f))?;
            if g.mesh().n() != mesh.n() {
                return Err(CliError::Other(format!(
                    "g file {} is on mesh {}, scenario asks for {}",
                    path.display(),
                    g.mesh().n(),
                    mesh.n()
                )));
            }
            g
        }
    })
}

pub fn nonlinearity(s: &Scenario) -> Result<Nonlinearity<f64>, CliError> {
    let f = Nonlinearity::from_key(&s.f)?;
    Ok(match s.r0 {
        Some(r0) => extend_below(&f, r0)?.f,
        None => f,
    })
}

pub fn build_problem(s: &Scenario, n: usize) -> Result<ProblemData64, CliError> {
    let mesh = build_mesh(n)?;
    Ok(ProblemData64::new(
        s.lambda,
        s.mu,
        source(s, mesh)?,
        DiffusionMatrix::from_key(&s.a)?,
        MonotoneFlux::from_key(&s.flux)?,
        nonlinearity(s)?,
    )?)
}

/// Initial fields for the uniqueness probe, in the order given.
pub fn initializations(s: &Scenario, mesh: Mesh, seed: u64) -> Vec<ScalarField64> {
    let a = s.init_amplitude;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    s.inits
        .iter()
        .map(|init| match init {
            Init::Zero => ScalarField64::zeros(mesh),
            Init::Plus => ScalarField64::from_fn_dirichlet(mesh, |_| a),
            Init::Minus => ScalarField64::from_fn_dirichlet(mesh, |_| -a),
            Init::Large => ScalarField64::from_fn_dirichlet(mesh, |_| 10.0 * a),
            Init::Random => {
                // Smooth: a few sine modes with random weights.
                let modes: Vec<(f64, f64, f64)> = (1..=3)
                    .flat_map(|k| (1..=3).map(move |l| (k as f64, l as f64)))
                    .map(|(k, l)| (k, l, rng.gen_range(-1.0..1.0) * a / 3.0))
                    .collect();
                ScalarField64::from_fn_dirichlet(mesh, |p| {
                    modes
                        .iter()
                        .map(|&(k, l, c)| c * (k * PI * p.x).sin() * (l * PI * p.y).sin())
                        .sum()
                })
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use thermovisc::l2_norm;

    #[test]
    fn bases_have_unit_norm() {
        let mesh = build_mesh(64).unwrap();
        for b in [Base::Sine, Base::One] {
            let n = l2_norm(&base_field(mesh, b));
            assert!((n - 1.0).abs() < 2e-3, "{b:?}: {n}");
        }
    }

    #[test]
    fn manufactured_sources_match_closed_forms() {
        let p = Vec2::new(0.3, 0.7);
        let s = manufactured_source(Manufactured::Sine, 1.0, p);
        assert!((s - (1.0 + 2.0 * PI * PI) * exact(Manufactured::Sine, p)).abs() < 1e-12);
        // Central differences of the polynomial case.
        let h = 1e-4;
        let w = |x: f64, y: f64| exact(Manufactured::Poly, Vec2::new(x, y));
        let lap = (w(p.x + h, p.y) + w(p.x - h, p.y) + w(p.x, p.y + h) + w(p.x, p.y - h)
            - 4.0 * w(p.x, p.y))
            / (h * h);
        let expect = 2.0 * w(p.x, p.y) - lap;
        assert!((manufactured_source(Manufactured::Poly, 2.0, p) - expect).abs() < 1e-6);
    }
}
