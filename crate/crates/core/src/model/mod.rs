//! Problem data: diffusion matrix `A`, monotone flux `a`, nonlinearity `f`,
//! source `g` and the coefficients `λ`, `μ`.
//!
//! Every coefficient is an evaluator plus the constants it declares; the
//! validators in [`validate`] check the declared constants by deterministic
//! sampling.

use std::fmt;
use std::sync::Arc;

use crate::error::{Assumption, Error, Result};
use crate::grid::{Mesh, ScalarField};
use crate::scalar::{truncate, Mat2, Real, Vec2};

mod keys;
pub mod validate;

pub use keys::{parse_key, KeySpec};
pub use validate::{
    validate_coercivity, validate_flux, validate_growth, validate_lipschitz, validate_monotonicity,
    validate_problem, validate_zero_point, FluxReport, GrowthReport, ValidationReport,
};

type MatrixFn<T> = Arc<dyn Fn(Vec2<T>) -> Mat2<T> + Send + Sync>;
type ModulusFn<T> = Arc<dyn Fn(Vec2<T>, T) -> T + Send + Sync>;
type CurveFn<T> = Arc<dyn Fn(T) -> Vec2<T> + Send + Sync>;

/// Coercive, bounded matrix field `x ↦ A(x)`.
#[derive(Clone)]
pub struct DiffusionMatrix<T> {
    eval: MatrixFn<T>,
    /// Declared coercivity constant.
    pub gamma: T,
    /// Declared bound on the entries.
    pub bound: T,
    label: String,
}

impl<T: Real> DiffusionMatrix<T> {
    pub fn identity() -> Self {
        Self::custom("identity", T::one(), T::one(), |_| Mat2::identity())
    }

    pub fn diagonal(a11: T, a22: T) -> Self {
        Self::custom(
            format!("diag:a11={a11},a22={a22}"),
            a11.min(a22),
            a11.abs().max(a22.abs()),
            move |_| Mat2::new(a11, T::zero(), T::zero(), a22),
        )
    }

    /// `(1 + amp·sin(2πx₁)) I` with `0 <= amp < 1`.
    pub fn oscillating(amp: T) -> Self {
        Self::custom(
            format!("oscillating:amp={amp}"),
            T::one() - amp.abs(),
            T::one() + amp.abs(),
            move |x| {
                let s = T::one() + amp * (T::lit(2.0) * T::PI() * x.x).sin();
                Mat2::scaled_identity(s)
            },
        )
    }

    pub fn custom(
        label: impl Into<String>,
        gamma: T,
        bound: T,
        f: impl Fn(Vec2<T>) -> Mat2<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(f),
            gamma,
            bound,
            label: label.into(),
        }
    }

    #[inline]
    pub fn eval(&self, x: Vec2<T>) -> Mat2<T> {
        (self.eval)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl<T: fmt::Debug> fmt::Debug for DiffusionMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionMatrix")
            .field("label", &self.label)
            .field("gamma", &self.gamma)
            .field("bound", &self.bound)
            .finish()
    }
}

/// Flux of the form `a(x, ξ) = c(x, |ξ|) ξ`.
///
/// The secant modulus `c` and its slope `∂c/∂s` drive the nonlinear solver;
/// fluxes with a known potential `Φ(x, s)` (`Φ' = c·s`) also get the
/// energy-based fallback.
#[derive(Clone)]
pub struct MonotoneFlux<T> {
    modulus: ModulusFn<T>,
    slope: ModulusFn<T>,
    potential: Option<ModulusFn<T>>,
    /// Coercivity `a(x,ξ)·ξ >= δ|ξ|²`.
    pub delta: T,
    /// Growth `|a(x,ξ)| <= β(b(x) + |ξ|)`.
    pub beta: T,
    /// Constant weight `b`; on the unit square its L² norm equals its value.
    pub weight_b: T,
    pub strong_monotonicity: Option<T>,
    linear: bool,
    label: String,
}

impl<T: Real> MonotoneFlux<T> {
    /// `a(x, ξ) = ξ`.
    pub fn identity() -> Self {
        Self {
            modulus: Arc::new(|_, _| T::one()),
            slope: Arc::new(|_, _| T::zero()),
            potential: Some(Arc::new(|_, s| s * s / T::lit(2.0))),
            delta: T::one(),
            beta: T::one(),
            weight_b: T::zero(),
            strong_monotonicity: Some(T::one()),
            linear: true,
            label: "identity".into(),
        }
    }

    /// `a(x, ξ) = c(x) ξ` with `c(x) = lo + (hi − lo)(1 + sin 2πx₁ sin 2πx₂)/2 ∈ [lo, hi]`.
    pub fn scalar(lo: T, hi: T) -> Self {
        let c = move |x: Vec2<T>| {
            let two_pi = T::lit(2.0) * T::PI();
            let s = (two_pi * x.x).sin() * (two_pi * x.y).sin();
            lo + (hi - lo) * (T::one() + s) / T::lit(2.0)
        };
        Self {
            modulus: Arc::new(move |x, _| c(x)),
            slope: Arc::new(|_, _| T::zero()),
            potential: Some(Arc::new(move |x, s| c(x) * s * s / T::lit(2.0))),
            delta: lo,
            beta: hi,
            weight_b: T::zero(),
            strong_monotonicity: Some(lo),
            linear: true,
            label: format!("scalar:lo={lo},hi={hi}"),
        }
    }

    /// `a(x, ξ) = 2ξ − ξ/(1 + |ξ|)`, the gradient of `|ξ|² − |ξ| + ln(1 + |ξ|)`.
    pub fn radial() -> Self {
        Self {
            modulus: Arc::new(|_, s| T::lit(2.0) - (T::one() + s).recip()),
            slope: Arc::new(|_, s| (T::one() + s).powi(2).recip()),
            potential: Some(Arc::new(|_, s| s * s - s + s.ln_1p())),
            delta: T::one(),
            beta: T::lit(2.0),
            weight_b: T::zero(),
            strong_monotonicity: Some(T::one()),
            linear: false,
            label: "radial".into(),
        }
    }

    /// Flux from an arbitrary secant modulus `c(x, s)`; the slope is taken by
    /// central differences and no potential is available.
    pub fn custom(
        label: impl Into<String>,
        delta: T,
        beta: T,
        c: impl Fn(Vec2<T>, T) -> T + Send + Sync + 'static,
    ) -> Self {
        let c: ModulusFn<T> = Arc::new(c);
        let cc = c.clone();
        let slope = Arc::new(move |x: Vec2<T>, s: T| {
            let eps = T::epsilon().cbrt() * (T::one() + s);
            let lo = (s - eps).max(T::zero());
            (cc(x, s + eps) - cc(x, lo)) / (s + eps - lo)
        });
        Self {
            modulus: c,
            slope,
            potential: None,
            delta,
            beta,
            weight_b: T::zero(),
            strong_monotonicity: None,
            linear: false,
            label: label.into(),
        }
    }

    pub fn with_strong_monotonicity(mut self, delta: Option<T>) -> Self {
        self.strong_monotonicity = delta;
        self
    }

    #[inline]
    pub fn modulus(&self, x: Vec2<T>, s: T) -> T {
        (self.modulus)(x, s)
    }

    #[inline]
    pub fn modulus_slope(&self, x: Vec2<T>, s: T) -> T {
        (self.slope)(x, s)
    }

    #[inline]
    pub fn eval(&self, x: Vec2<T>, xi: Vec2<T>) -> Vec2<T> {
        xi * self.modulus(x, xi.norm())
    }

    /// Jacobian `∂a/∂ξ = c I + (c'(s)/s) ξ ξᵀ`.
    pub fn jacobian(&self, x: Vec2<T>, xi: Vec2<T>) -> [[T; 2]; 2] {
        let s = xi.norm();
        let c = self.modulus(x, s);
        if s == T::zero() {
            return [[c, T::zero()], [T::zero(), c]];
        }
        let w = self.modulus_slope(x, s) / s;
        [
            [c + w * xi.x * xi.x, w * xi.x * xi.y],
            [w * xi.y * xi.x, c + w * xi.y * xi.y],
        ]
    }

    pub fn potential(&self, x: Vec2<T>, s: T) -> Option<T> {
        self.potential.as_ref().map(|p| p(x, s))
    }

    pub fn has_potential(&self) -> bool {
        self.potential.is_some()
    }

    /// Whether `a` is linear in `ξ` (one SPD solve suffices).
    pub fn is_linear(&self) -> bool {
        self.linear
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl<T: fmt::Debug> fmt::Debug for MonotoneFlux<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneFlux")
            .field("label", &self.label)
            .field("delta", &self.delta)
            .field("beta", &self.beta)
            .field("strong_monotonicity", &self.strong_monotonicity)
            .finish()
    }
}

/// Continuous `f: ℝ → ℝ²` with its declared growth data.
#[derive(Clone)]
pub struct Nonlinearity<T> {
    eval: CurveFn<T>,
    /// Growth offset `a` in `|f(r)| <= a + M|r|^α`.
    pub a0: T,
    /// Growth factor `M`.
    pub m: T,
    /// Growth exponent `α`.
    pub alpha: T,
    /// Declared zero `f(r0) = 0` with `r0 <= 0`.
    pub r0: Option<T>,
    /// Declared Lipschitz constant on `ℝ⁺`.
    pub lipschitz: Option<T>,
    label: String,
}

impl<T: Real> Nonlinearity<T> {
    pub fn zero() -> Self {
        Self {
            eval: Arc::new(|_| Vec2::zero()),
            a0: T::zero(),
            m: T::one(),
            alpha: T::one(),
            r0: Some(T::zero()),
            lipschitz: Some(T::one()),
            label: "zero".into(),
        }
    }

    /// `f(r) = M max(r, 0)^α e_d`.
    pub fn power(m: T, alpha: T, dir: usize) -> Self {
        let e = Vec2::axis(dir);
        Self {
            eval: Arc::new(move |r: T| e * (m * r.max(T::zero()).powf(alpha))),
            a0: T::zero(),
            m,
            alpha,
            r0: Some(T::zero()),
            lipschitz: (alpha == T::one()).then_some(m),
            label: format!("power:M={m},alpha={alpha},d={}", dir + 1),
        }
    }

    /// `f(r) = M max(r, 0) e_d`: Lipschitz, vanishing on `ℝ⁻`.
    pub fn linear_positive(m: T, dir: usize) -> Self {
        let mut f = Self::power(m, T::one(), dir);
        f.label = format!("linear:M={m},d={}", dir + 1);
        f
    }

    /// `f(r) = M max(r − r0, 0)^α e_d` with `r0 < 0`.
    pub fn shifted(m: T, alpha: T, r0: T, dir: usize) -> Self {
        let e = Vec2::axis(dir);
        // (|r| + |r0|)^α <= c(|r|^α + |r0|^α) with c = max(1, 2^{α−1}).
        let c = T::one().max(T::lit(2.0).powf(alpha - T::one()));
        Self {
            eval: Arc::new(move |r: T| e * (m * (r - r0).max(T::zero()).powf(alpha))),
            a0: c * m * r0.abs().powf(alpha),
            m: c * m,
            alpha,
            r0: Some(r0),
            lipschitz: (alpha == T::one()).then_some(m),
            label: format!("shifted:M={m},alpha={alpha},r0={r0},d={}", dir + 1),
        }
    }

    /// `f(r) = c e_d`.
    pub fn constant(c: T, dir: usize) -> Self {
        let e = Vec2::axis(dir);
        Self {
            eval: Arc::new(move |_| e * c),
            a0: c.abs(),
            m: T::one(),
            alpha: T::one(),
            r0: None,
            lipschitz: None,
            label: format!("constant:c={c},d={}", dir + 1),
        }
    }

    pub fn custom(
        label: impl Into<String>,
        a0: T,
        m: T,
        alpha: T,
        f: impl Fn(T) -> Vec2<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            eval: Arc::new(f),
            a0,
            m,
            alpha,
            r0: None,
            lipschitz: None,
            label: label.into(),
        }
    }

    pub fn with_zero_point(mut self, r0: Option<T>) -> Self {
        self.r0 = r0;
        self
    }

    pub fn with_lipschitz(mut self, l: Option<T>) -> Self {
        self.lipschitz = l;
        self
    }

    #[inline]
    pub fn eval(&self, r: T) -> Vec2<T> {
        (self.eval)(r)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl<T: fmt::Debug> fmt::Debug for Nonlinearity<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("label", &self.label)
            .field("a0", &self.a0)
            .field("m", &self.m)
            .field("alpha", &self.alpha)
            .field("r0", &self.r0)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

/// `f ∘ T_{1/ε}`: equal to `f` on `[−1/ε, 1/ε]` and bounded by `sup_{|s|<=1/ε} |f(s)|`.
pub fn truncated_nonlinearity<T: Real>(f: &Nonlinearity<T>, epsilon: T) -> Result<Nonlinearity<T>> {
    if !(epsilon > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    let level = epsilon.recip();
    let inner = f.eval.clone();
    Ok(Nonlinearity {
        eval: Arc::new(move |r| inner(truncate(r, level))),
        a0: f.a0,
        m: f.m,
        alpha: f.alpha,
        r0: f.r0.filter(|r0| r0.abs() <= level),
        lipschitz: f.lipschitz,
        label: format!("{}∘T[{level}]", f.label),
    })
}

/// Value of the nondecreasing envelope `sup_{0<=r'<=r} |f(r')|`, with the sampling step used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Envelope<T> {
    pub value: T,
    pub step: T,
}

/// Samples used by [`f_star`]; even, so `r/2` is always a sample.
pub const ENVELOPE_SAMPLES: usize = 4096;

pub fn f_star<T: Real>(f: &Nonlinearity<T>, r: T) -> Result<Envelope<T>> {
    if !(r >= T::zero()) {
        return Err(Error::InvalidArgument(format!("f* needs r >= 0, got {r}")));
    }
    let n = ENVELOPE_SAMPLES;
    let step = r / T::from_count(n);
    let mut value = f.eval(T::zero()).norm();
    for k in 1..=n {
        let rk = if k == n {
            r
        } else {
            r * T::from_count(k) / T::from_count(n)
        };
        value = value.max(f.eval(rk).norm());
    }
    Ok(Envelope { value, step })
}

/// `f̃` equal to `0` on `(−∞, r0]` and to `f` above.
#[derive(Clone, Debug)]
pub struct Extension<T> {
    pub f: Nonlinearity<T>,
    /// `|f(r0)|` when nonzero: the jump of `f̃` at `r0`.
    pub discontinuity: Option<T>,
}

pub fn extend_below<T: Real>(f: &Nonlinearity<T>, r0: T) -> Result<Extension<T>> {
    if !(r0 <= T::zero()) {
        return Err(Error::InvalidArgument(format!("r0 must be <= 0, got {r0}")));
    }
    let jump = f.eval(r0).norm();
    let discontinuity = (jump > T::zero()).then_some(jump);
    if let Some(j) = discontinuity {
        log::warn!(
            "extension of `{}` below r0 = {r0} is discontinuous (|f(r0)| = {j})",
            f.label
        );
    }
    let inner = f.eval.clone();
    Ok(Extension {
        f: Nonlinearity {
            eval: Arc::new(move |r| if r <= r0 { Vec2::zero() } else { inner(r) }),
            a0: f.a0,
            m: f.m,
            alpha: f.alpha,
            r0: Some(r0),
            lipschitz: if discontinuity.is_none() {
                f.lipschitz
            } else {
                None
            },
            label: format!("{}|>{r0}", f.label),
        },
        discontinuity,
    })
}

/// Coefficients and source of the coupled system, in two space dimensions.
#[derive(Clone, Debug)]
pub struct ProblemData<T> {
    pub lambda: T,
    pub mu: T,
    pub g: ScalarField<T>,
    pub diffusion: DiffusionMatrix<T>,
    pub flux: MonotoneFlux<T>,
    pub f: Nonlinearity<T>,
}

impl<T: Real> ProblemData<T> {
    pub const DIMENSION: usize = 2;

    pub fn new(
        lambda: T,
        mu: T,
        g: ScalarField<T>,
        diffusion: DiffusionMatrix<T>,
        flux: MonotoneFlux<T>,
        f: Nonlinearity<T>,
    ) -> Result<Self> {
        if !(lambda > T::zero() && mu > T::zero()) {
            return Err(Error::AssumptionViolated {
                assumption: Assumption::A5,
                detail: format!("need lambda > 0 and mu > 0, got lambda={lambda}, mu={mu}"),
            });
        }
        if !g.is_finite() {
            return Err(Error::AssumptionViolated {
                assumption: Assumption::A7,
                detail: "source g has non-finite values".into(),
            });
        }
        Ok(Self {
            lambda,
            mu,
            g,
            diffusion,
            flux,
            f,
        })
    }

    /// Identity coefficients, zero nonlinearity, `λ = μ = 1`.
    pub fn simple(g: ScalarField<T>) -> Self {
        Self::new(
            T::one(),
            T::one(),
            g,
            DiffusionMatrix::identity(),
            MonotoneFlux::identity(),
            Nonlinearity::zero(),
        )
        .expect("valid defaults")
    }

    #[inline]
    pub fn mesh(&self) -> &Mesh {
        self.g.mesh()
    }

    pub fn with_g(&self, g: ScalarField<T>) -> Self {
        Self { g, ..self.clone() }
    }

    pub fn with_f(&self, f: Nonlinearity<T>) -> Self {
        Self { f, ..self.clone() }
    }

    pub fn with_flux(&self, flux: MonotoneFlux<T>) -> Self {
        Self {
            flux,
            ..self.clone()
        }
    }

    pub fn with_mu(&self, mu: T) -> Result<Self> {
        Self::new(
            self.lambda,
            mu,
            self.g.clone(),
            self.diffusion.clone(),
            self.flux.clone(),
            self.f.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_nonlinearity_cases() {
        let f = Nonlinearity::<f64>::power(1.0, 1.0, 0);
        let fe = truncated_nonlinearity(&f, 0.5).unwrap();
        assert_eq!(fe.eval(3.0), Vec2::new(2.0, 0.0));
        let g = Nonlinearity::<f64>::custom("sq", 0.0, 1.0, 2.0, |r| Vec2::new(r * r, 0.0));
        let ge = truncated_nonlinearity(&g, 1.0).unwrap();
        let sup = (-50..=50)
            .map(|k| ge.eval(k as f64 * 0.1).norm())
            .fold(0.0, f64::max);
        assert_eq!(sup, 1.0);
        let small = truncated_nonlinearity(&g, 1e-3).unwrap();
        for r in [-999.0, -3.5, 0.0, 2.0, 999.0] {
            assert_eq!(small.eval(r), g.eval(r));
        }
        assert!(truncated_nonlinearity(&g, 0.0).is_err());
    }

    #[test]
    fn f_star_cases() {
        let f = Nonlinearity::<f64>::power(1.0, 1.0, 0);
        assert_eq!(f_star(&f, 2.0).unwrap().value, 2.0);
        let s = Nonlinearity::<f64>::custom("sin", 1.0, 1.0, 0.0, |r| Vec2::new(r.sin(), 0.0));
        let e = f_star(&s, std::f64::consts::PI).unwrap();
        assert!((e.value - 1.0).abs() < 1e-15);
        assert!(e.step > 0.0);
        let c = Nonlinearity::<f64>::constant(-0.7, 1);
        assert_eq!(f_star(&c, 0.0).unwrap().value, 0.7);
        assert!(f_star(&c, -1.0).is_err());
    }

    #[test]
    fn extend_below_cases() {
        let f = Nonlinearity::<f64>::shifted(1.0, 1.0, -1.0, 0);
        let ext = extend_below(&f, -1.0).unwrap();
        assert!(ext.discontinuity.is_none());
        for r in [-3.0, -1.0, -0.5, 0.0, 2.0] {
            assert_eq!(ext.f.eval(r), f.eval(r));
        }
        let c = Nonlinearity::<f64>::constant(1.0, 0);
        let ext = extend_below(&c, -1.0).unwrap();
        assert_eq!(ext.discontinuity, Some(1.0));
        assert_eq!(ext.f.eval(-1.0), Vec2::zero());
        assert_eq!(ext.f.eval(-0.999), Vec2::new(1.0, 0.0));
        let lin = Nonlinearity::<f64>::custom("r", 0.0, 1.0, 1.0, |r| Vec2::new(r, 0.0));
        let ext = extend_below(&lin, 0.0).unwrap();
        for r in [-2.0, -0.1, 0.0, 0.3, 4.0] {
            assert_eq!(ext.f.eval(r), Vec2::new(r.max(0.0), 0.0));
        }
        assert!(extend_below(&lin, 0.5).is_err());
    }

    #[test]
    fn radial_flux_jacobian_matches_differences() {
        let a = MonotoneFlux::<f64>::radial();
        let x = Vec2::new(0.3, 0.4);
        let xi = Vec2::new(0.7, -1.3);
        let j = a.jacobian(x, xi);
        let eps = 1e-6;
        for (col, dir) in [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]
            .into_iter()
            .enumerate()
        {
            let d = (a.eval(x, xi + dir * eps) - a.eval(x, xi - dir * eps)) * (0.5 / eps);
            assert!((d.x - j[0][col]).abs() < 1e-8);
            assert!((d.y - j[1][col]).abs() < 1e-8);
        }
    }

    #[test]
    fn problem_rejects_nonpositive_mu() {
        let mesh = crate::grid::build_mesh(4).unwrap();
        let p = ProblemData::<f64>::simple(ScalarField::zeros(mesh));
        assert!(matches!(
            p.with_mu(-1.0),
            Err(Error::AssumptionViolated {
                assumption: Assumption::A5,
                ..
            })
        ));
    }
}
