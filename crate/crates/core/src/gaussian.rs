//! Gaussian expectations, the standard normal cdf/pdf and the RBF kernel.
//!
//! `E_{Z~N(0,σ²)}[f(Z)]` is computed with degree-127 Gauss–Hermite quadrature
//! when `f` is smooth. Functionals that declare kinks (`|x|`, `ψ_r`) are
//! integrated piecewise with composite Gauss–Legendre between the kinks,
//! since Gauss–Hermite converges only algebraically across a kink.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{invalid, Error, Result};

pub const HERMITE_DEGREE: usize = 127;

/// Standardized half-width beyond which the Gaussian tail is dropped
/// (`φ(12) ≈ 2e-32`).
const TAIL_CUTOFF: f64 = 12.0;
const PANEL_WIDTH: f64 = 0.25;
const LEGENDRE_ORDER: usize = 20;

pub fn std_normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

/// `Φ(t)`. Computed through `erfc` so both tails keep full relative accuracy.
pub fn std_normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t * FRAC_1_SQRT_2)
}

/// `exp(−‖x − y‖² / 2)`.
pub fn rbf_kernel(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-0.5 * sq).exp())
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A Lipschitz test function `f: R → R`.
#[derive(Clone)]
pub struct ScalarFunctional {
    label: String,
    lipschitz: f64,
    eval: RealFn,
    closed_form: Option<RealFn>,
    kinks: Vec<f64>,
}

impl fmt::Debug for ScalarFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFunctional")
            .field("label", &self.label)
            .field("lipschitz", &self.lipschitz)
            .field("closed_form", &self.closed_form.is_some())
            .field("kinks", &self.kinks)
            .finish()
    }
}

impl ScalarFunctional {
    pub fn new(
        label: impl Into<String>,
        lipschitz: f64,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz > 0.0) {
            return Err(invalid("lipschitz", "must be positive and finite"));
        }
        Ok(Self {
            label: label.into(),
            lipschitz,
            eval: Arc::new(eval),
            closed_form: None,
            kinks: Vec::new(),
        })
    }

    /// Attaches `σ ↦ E_{Z~N(0,σ²)}[f(Z)]`.
    pub fn with_closed_form(mut self, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.closed_form = Some(Arc::new(g));
        self
    }

    /// Points where `f` is not differentiable.
    pub fn with_kinks(mut self, kinks: impl IntoIterator<Item = f64>) -> Self {
        self.kinks = kinks.into_iter().collect();
        self.kinks.sort_by(f64::total_cmp);
        self.kinks.dedup();
        self
    }

    pub fn cos() -> Self {
        Self::new("cos", 1.0, f64::cos)
            .expect("valid constant")
            .with_closed_form(|s| (-0.5 * s * s).exp())
    }

    pub fn abs() -> Self {
        Self::new("abs", 1.0, f64::abs)
            .expect("valid constant")
            .with_closed_form(|s| s * (2.0 / PI).sqrt())
            .with_kinks([0.0])
    }

    pub fn identity() -> Self {
        Self::new("identity", 1.0, |x| x)
            .expect("valid constant")
            .with_closed_form(|_| 0.0)
    }

    /// `ψ_r(x) = min(|x|, r)`.
    pub fn psi(r: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(invalid("r", "truncation level must be finite and nonnegative"));
        }
        Ok(Self::new(format!("psi_{r}"), 1.0, move |x| psi(r, x))?
            .with_closed_form(move |s| psi_expectation(r, s))
            .with_kinks([-r, 0.0, r]))
    }

    /// `x ↦ c·f(x)` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(invalid("c", "scale must be positive and finite"));
        }
        let inner = Arc::clone(&self.eval);
        Ok(Self {
            label: format!("{}*{c}", self.label),
            lipschitz: self.lipschitz * c,
            eval: Arc::new(move |x| c * inner(x)),
            closed_form: self
                .closed_form
                .clone()
                .map(|g| -> RealFn { Arc::new(move |s| c * g(s)) }),
            kinks: self.kinks.clone(),
        })
    }

    /// `x ↦ f(x) + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let inner = Arc::clone(&self.eval);
        Self {
            label: format!("{}+{c}", self.label),
            lipschitz: self.lipschitz,
            eval: Arc::new(move |x| inner(x) + c),
            closed_form: self
                .closed_form
                .clone()
                .map(|g| -> RealFn { Arc::new(move |s| g(s) + c) }),
            kinks: self.kinks.clone(),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn lipschitz_constant(&self) -> f64 {
        self.lipschitz
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    pub fn closed_form_expectation(&self, sigma: f64) -> Option<f64> {
        self.closed_form.as_ref().map(|g| g(sigma))
    }
}

/// `min(|x|, r)`.
#[inline]
pub fn psi(r: f64, x: f64) -> f64 {
    x.abs().min(r)
}

/// `E[min(|Z|, r)]` for `Z ~ N(0, σ²)`.
fn psi_expectation(r: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let t = r / sigma;
    sigma * (2.0 / PI).sqrt() * (1.0 - (-0.5 * t * t).exp()) + r * libm::erfc(t * FRAC_1_SQRT_2)
}

/// Nodes and weights for `E[g(G)]`, `G ~ N(0, 1)`: `Σ w_i g(x_i)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub–Welsch: nodes are eigenvalues of the Hermite Jacobi matrix,
    /// polished by Newton steps on the orthonormal Hermite-function recurrence.
    pub fn new(degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(invalid("degree", "must be positive"));
        }
        let n = degree;
        let mut x = vec![0.0; n];
        let mut off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
        off.push(0.0);
        tridiagonal_eigenvalues(&mut x, &mut off);
        let mut w = vec![0.0; n];
        for (z, wi) in x.iter_mut().zip(w.iter_mut()) {
            let mut deriv = 0.0;
            for _ in 0..3 {
                let (value, d) = hermite_function_and_derivative(n, *z);
                deriv = d;
                *z -= value / d;
            }
            // `deriv` carries exp(-z²/2); the weight is 2/H'(z)² for the
            // orthonormal polynomial H.
            let unscaled = deriv * (0.5 * *z * *z).exp();
            *wi = if unscaled.is_finite() {
                2.0 / (unscaled * unscaled)
            } else {
                0.0
            };
        }
        let scale = PI.sqrt().recip();
        Ok(Self {
            nodes: x.iter().map(|v| v * SQRT_2).collect(),
            weights: w.iter().map(|v| v * scale).collect(),
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[g(G)]` for standard normal `G`.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * g(x)).sum()
    }
}

/// `(ψ_n(z), √(2n)·ψ_{n-1}(z))` for orthonormal Hermite functions `ψ_k`,
/// i.e. the value and derivative of the orthonormal polynomial scaled by `exp(-z²/2)`.
fn hermite_function_and_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p1, mut p2) = (PI.powf(-0.25) * (-0.5 * z * z).exp(), 0.0);
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `off[..n-1]` (implicit QL with Wilkinson shifts). Results
/// overwrite `diag`; `off` is destroyed.
fn tridiagonal_eigenvalues(diag: &mut [f64], off: &mut [f64]) {
    let n = diag.len();
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            assert!(iterations < 100, "tridiagonal QL failed to converge");
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(invalid("order", "must be positive"));
        }
        let n = order;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
                }
                pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                let step = p1 / pp;
                z -= step;
                if step.abs() <= 1e-16 {
                    break;
                }
            }
            x[i] = -z;
            x[n - 1 - i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
            w[n - 1 - i] = w[i];
        }
        Ok(Self { nodes: x, weights: w })
    }

    pub fn integrate(&self, a: f64, b: f64, g: impl Fn(f64) -> f64) -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(mid + half * x))
            .sum::<f64>()
    }
}

fn hermite_127() -> &'static GaussHermite {
    static RULE: OnceLock<GaussHermite> = OnceLock::new();
    RULE.get_or_init(|| GaussHermite::new(HERMITE_DEGREE).expect("positive degree"))
}

fn legendre_panel_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(LEGENDRE_ORDER).expect("positive order"))
}

/// `E_{Z~N(0,σ²)}[f(Z)]` by quadrature.
pub fn gaussian_expectation(f: &ScalarFunctional, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if sigma == 0.0 {
        return Ok(f.eval(0.0));
    }
    if f.kinks.is_empty() {
        Ok(hermite_127().expect(|x| f.eval(sigma * x)))
    } else {
        Ok(piecewise_expectation(f, sigma, legendre_panel_rule(), PANEL_WIDTH))
    }
}

/// As [`gaussian_expectation`] with an explicit Gauss–Hermite degree for smooth
/// functionals and a panel refinement factor for kinked ones; used to check
/// that the default rule has converged.
pub fn gaussian_expectation_refined(f: &ScalarFunctional, sigma: f64, degree: usize) -> Result<f64> {
    check_sigma(sigma)?;
    if sigma == 0.0 {
        return Ok(f.eval(0.0));
    }
    if f.kinks.is_empty() {
        Ok(GaussHermite::new(degree)?.expect(|x| f.eval(sigma * x)))
    } else {
        let refine = (degree as f64 / HERMITE_DEGREE as f64).max(1.0);
        let rule = GaussLegendre::new(LEGENDRE_ORDER * refine.ceil() as usize)?;
        Ok(piecewise_expectation(f, sigma, &rule, PANEL_WIDTH / refine))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma >= 0.0 {
        Ok(())
    } else {
        Err(invalid("sigma", "must be finite and nonnegative"))
    }
}

/// `∫ f(σx) φ(x) dx` over `[-12, 12]`, split at every kink of `x ↦ f(σx)`.
fn piecewise_expectation(f: &ScalarFunctional, sigma: f64, rule: &GaussLegendre, width: f64) -> f64 {
    let mut breaks = vec![-TAIL_CUTOFF];
    breaks.extend(f.kinks.iter().map(|k| k / sigma).filter(|t| t.abs() < TAIL_CUTOFF));
    breaks.push(TAIL_CUTOFF);
    let integrand = |x: f64| f.eval(sigma * x) * std_normal_pdf(x);
    breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let panels = ((w[1] - w[0]) / width).ceil().max(1.0) as usize;
            let h = (w[1] - w[0]) / panels as f64;
            (0..panels)
                .map(|p| {
                    let a = w[0] + p as f64 * h;
                    rule.integrate(a, a + h, integrand)
                })
                .sum::<f64>()
        })
        .sum()
}
