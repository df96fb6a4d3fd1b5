//! Nonlinearity families: pure powers, the oscillatory subcritical f, the
//! oscillatory critical g, fractal self-similar g built from one fundamental
//! interval, and piecewise-linear tables.
//!
//! Every family exposes the value (f or g), the primitive (F or G) and the
//! derivative, with the primitive exact so that d/ds F = f holds to rounding.

use crate::error::{Error, Result};
use crate::radial::critical_exponent;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};

/// `(π/2) / ln(ln 2 + 1)`, chosen so that `L(1) = π/2`.
pub fn c0() -> f64 {
    (PI / 2.0) / (2f64.ln() + 1.0).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscSubcriticalParams {
    pub dim: usize,
    #[serde(with = "crate::serde_num")]
    pub lambda: f64,
    #[serde(with = "crate::serde_num")]
    pub p0: f64,
    #[serde(with = "crate::serde_num")]
    pub q0: f64,
    #[serde(with = "crate::serde_num")]
    pub alpha: f64,
    #[serde(with = "crate::serde_num")]
    pub beta: f64,
}

impl OscSubcriticalParams {
    /// Checks the ordering chain, the derivative inequality and the AR window.
    pub fn validate(&self) -> Result<()> {
        let two_star = critical_exponent(self.dim);
        let bad = |m: &str| Err(Error::InvalidParameter(format!("osc_subcritical: {m}")));
        let Self {
            lambda,
            p0,
            q0,
            alpha,
            beta,
            ..
        } = *self;
        if [lambda, p0, q0, alpha, beta].iter().any(|v| !v.is_finite()) {
            return bad("non-finite parameter");
        }
        if lambda <= 0.0 || q0 <= 0.0 || alpha <= 0.0 || beta <= 0.0 {
            return bad("lambda, q0, alpha, beta must be positive");
        }
        if !(p0 > 2.0 && p0 < two_star) {
            return bad("p0 must lie in (2, 2*)");
        }
        if !(p0 <= beta - alpha && beta + alpha <= q0 && q0 < two_star) {
            return bad("chain p0 <= beta-alpha <= beta+alpha <= q0 < 2* violated");
        }
        if !(4.0 * (q0 - (beta + alpha)) < E * ((beta - alpha) - p0)) {
            return bad("4[q0-(beta+alpha)] < e[(beta-alpha)-p0] violated");
        }
        let mu = beta - (c0() + 1.0) * alpha;
        if !(2.0 < mu && mu < p0) {
            return bad("2 < beta-(C0+1)alpha < p0 violated");
        }
        Ok(())
    }

    /// The Ambrosetti–Rabinowitz exponent β − (C0+1)α.
    pub fn ar_exponent(&self) -> f64 {
        self.beta - (c0() + 1.0) * self.alpha
    }
}

fn smoothstep(t: f64) -> (f64, f64) {
    let t = t.clamp(0.0, 1.0);
    let v = t * t * t * (t * (6.0 * t - 15.0) + 10.0);
    let d = 30.0 * t * t * (t - 1.0) * (t - 1.0);
    (v, d)
}

/// The exponent profile ρ and its derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rho {
    q0: f64,
    alpha: f64,
    beta: f64,
    c0: f64,
    sup_eta_prime: f64,
}

impl Rho {
    pub fn sup_eta_prime(&self) -> f64 {
        self.sup_eta_prime
    }

    /// (ρ(s), ρ'(s)).
    pub fn eval(&self, s: f64) -> (f64, f64) {
        let a = s.abs();
        let sgn = s.signum();
        let top = self.beta + self.alpha;
        if a <= 0.25 {
            (self.q0, 0.0)
        } else if a < 0.5 {
            let (v, d) = smoothstep((a - 0.25) * 4.0);
            (self.q0 + (top - self.q0) * v, (top - self.q0) * d * 4.0 * sgn)
        } else if a <= 1.0 {
            (top, 0.0)
        } else {
            let l0 = (a + 1.0).ln() + 1.0;
            let l = self.c0 * l0.ln();
            let dl = self.c0 / (l0 * (a + 1.0));
            (
                self.beta + self.alpha * l.sin(),
                self.alpha * l.cos() * dl * sgn,
            )
        }
    }
}

/// Builds ρ; rejects parameter sets whose smoothstep transition is too steep.
pub fn build_rho(params: &OscSubcriticalParams) -> Result<Rho> {
    params.validate()?;
    // max of the quintic smoothstep slope is 15/8, stretched by 4 on [1/4, 1/2]
    let sup = (params.q0 - (params.beta + params.alpha)).abs() * 15.0 / 8.0 * 4.0;
    let bound = E * ((params.beta - params.alpha) - params.p0);
    if sup > bound {
        return Err(Error::EtaDerivativeBound { sup, bound });
    }
    Ok(Rho {
        q0: params.q0,
        alpha: params.alpha,
        beta: params.beta,
        c0: c0(),
        sup_eta_prime: sup,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscCriticalParams {
    pub dim: usize,
    #[serde(rename = "A", with = "crate::serde_num")]
    pub a: f64,
    #[serde(rename = "B", with = "crate::serde_num")]
    pub b: f64,
    #[serde(rename = "E", with = "crate::serde_num")]
    pub e: f64,
    #[serde(with = "crate::serde_num")]
    pub omega: f64,
}

impl OscCriticalParams {
    /// γ = exp{4π/(ω(N−2))}.
    pub fn gamma(&self) -> f64 {
        (4.0 * PI / (self.omega * (self.dim as f64 - 2.0))).exp()
    }

    /// Finiteness and positivity only; the structural inequalities are
    /// reported by [`OscCriticalParams::violations`].
    pub fn validate_structure(&self) -> Result<()> {
        if self.dim < 3 {
            return Err(Error::InvalidParameter("osc_critical: dim < 3".into()));
        }
        if [self.a, self.b, self.e, self.omega]
            .iter()
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(Error::InvalidParameter(
                "osc_critical: A, B, E, omega must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    /// Names of the violated invariants (empty when all hold).
    pub fn violations(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !(self.b / (self.a + self.e) < 0.5) {
            out.push("B/(A+E) < 1/2");
        }
        let n = self.dim as f64;
        if !(self.a > self.b && 1.0 + self.e / (self.a - self.b) <= 2f64.powf(n / (n - 2.0))) {
            out.push("1 + E/(A-B) <= 2^{N/(N-2)}");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        match self.violations().first() {
            Some(v) => Err(Error::InvalidParameter(format!("osc_critical: {v} violated"))),
            None => Ok(()),
        }
    }

    /// (1/2*)(A − B + E).
    pub fn lambda_star(&self) -> f64 {
        (self.a - self.b + self.e) / critical_exponent(self.dim)
    }

    /// 2*(A − B + E)/(A + B + E).
    pub fn mu_star_formula(&self) -> f64 {
        critical_exponent(self.dim) * (self.a - self.b + self.e) / (self.a + self.b + self.e)
    }

    pub(crate) fn eval(&self, s: f64) -> (f64, f64, f64) {
        if s == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let q = critical_exponent(self.dim);
        let a = s.abs();
        let phi = self.omega * a.ln();
        let (sn, cs) = phi.sin_cos();
        let pw = a.powf(q - 2.0);
        let coef = self.a + self.e + self.b * sn;
        let g = coef * pw * s;
        let big_g = a * a
            * pw
            * ((self.a + self.e) / q + self.b * (q * sn - self.omega * cs) / (q * q + self.omega * self.omega));
        let dg = (coef * (q - 1.0) + self.b * self.omega * cs) * pw;
        (g, big_g, dg)
    }
}

/// G* sampled on the fundamental interval I₀ = [1, γ^{(N−2)/2}] together with
/// its derivative; evaluation uses cubic Hermite interpolation so that the
/// derivative of the interpolant is the g that is returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractalBase {
    pub dim: usize,
    #[serde(with = "crate::serde_num")]
    pub gamma: f64,
    #[serde(with = "crate::serde_num::vec")]
    pub s: Vec<f64>,
    #[serde(rename = "G", with = "crate::serde_num::vec")]
    pub big_g: Vec<f64>,
    #[serde(rename = "g", with = "crate::serde_num::vec")]
    pub g: Vec<f64>,
}

const MAX_FOLD: i32 = 4000;

impl FractalBase {
    /// Samples a primitive and its derivative at `n` uniformly spaced knots of I₀.
    pub fn sample(
        dim: usize,
        gamma: f64,
        n: usize,
        big_g: impl Fn(f64) -> f64,
        g: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let end = gamma.powf((dim as f64 - 2.0) / 2.0);
        let s: Vec<f64> = (0..n)
            .map(|k| if k + 1 == n { end } else { 1.0 + (end - 1.0) * k as f64 / (n - 1) as f64 })
            .collect();
        let base = Self {
            dim,
            gamma,
            big_g: s.iter().map(|&x| big_g(x)).collect(),
            g: s.iter().map(|&x| g(x)).collect(),
            s,
        };
        base.validate()?;
        Ok(base)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(format!("fractal base: {m}")));
        if self.dim < 3 || !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return bad("need dim >= 3 and gamma > 1".into());
        }
        let n = self.s.len();
        if n < 2 || self.big_g.len() != n || self.g.len() != n {
            return bad("knots, G and g must have equal length >= 2".into());
        }
        if self.s.iter().chain(&self.big_g).chain(&self.g).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("fractal base"));
        }
        if self.s.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("knots must be strictly increasing".into());
        }
        let nd = self.dim as f64;
        let end = self.gamma.powf((nd - 2.0) / 2.0);
        if (self.s[0] - 1.0).abs() > 1e-12 || (self.s[n - 1] - end).abs() > 1e-12 * end {
            return bad(format!("knots must span [1, {end}]"));
        }
        let target = self.gamma.powf(nd) * self.big_g[0];
        if (self.big_g[n - 1] - target).abs() > 1e-8 * target.abs().max(f64::MIN_POSITIVE) {
            return bad(format!(
                "endpoint matching G*(end) = gamma^N G*(1) fails: {} vs {}",
                self.big_g[n - 1],
                target
            ));
        }
        Ok(())
    }

    fn hermite(&self, x: f64) -> (f64, f64, f64) {
        let k = (self.s.partition_point(|&t| t <= x).max(1) - 1).min(self.s.len() - 2);
        let (x0, x1) = (self.s[k], self.s[k + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (y0, y1, m0, m1) = (self.big_g[k], self.big_g[k + 1], self.g[k], self.g[k + 1]);
        let (t2, t3) = (t * t, t * t * t);
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * m1;
        let d = ((6.0 * t2 - 6.0 * t) * y0 + (-6.0 * t2 + 6.0 * t) * y1) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (3.0 * t2 - 2.0 * t) * m1;
        let dd = ((12.0 * t - 6.0) * y0 + (-12.0 * t + 6.0) * y1) / (h * h)
            + ((6.0 * t - 4.0) * m0 + (6.0 * t - 2.0) * m1) / h;
        (v, d, dd)
    }

    /// Folds |s| into I₀: returns (j, s*) with |s| = γ^{(N−2)j/2} s*.
    fn fold(&self, a: f64) -> Option<(i32, f64)> {
        let half = (self.dim as f64 - 2.0) / 2.0;
        let period = half * self.gamma.ln();
        let jf = (a.ln() / period).floor();
        if !jf.is_finite() || jf.abs() > MAX_FOLD as f64 {
            return None;
        }
        let mut j = jf as i32;
        let mut x = a * self.gamma.powf(-half * j as f64);
        let end = self.s[self.s.len() - 1];
        if x >= end {
            j += 1;
            x /= end;
        } else if x < 1.0 {
            j -= 1;
            x *= end;
        }
        Some((j, x.clamp(1.0, end)))
    }

    /// (g, G, g') or `None` past the fold depth.
    fn eval(&self, s: f64) -> Option<(f64, f64, f64)> {
        if s == 0.0 {
            return Some((0.0, 0.0, 0.0));
        }
        let (j, x) = self.fold(s.abs())?;
        let nd = self.dim as f64;
        let (v, d, dd) = self.hermite(x);
        let jf = j as f64;
        let big_g = self.gamma.powf(nd * jf) * v;
        let g = self.gamma.powf((nd + 2.0) * jf / 2.0) * d * s.signum();
        let dg = self.gamma.powf(2.0 * jf) * dd;
        Some((g, big_g, dg))
    }
}

/// Piecewise-linear table of the nonlinearity value; the primitive is integrated
/// exactly from s = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct TabulatedNonlinearity {
    s: Vec<f64>,
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableRepr {
    #[serde(with = "crate::serde_num::vec")]
    s: Vec<f64>,
    #[serde(with = "crate::serde_num::vec")]
    values: Vec<f64>,
}

impl TryFrom<TableRepr> for TabulatedNonlinearity {
    type Error = Error;

    fn try_from(r: TableRepr) -> Result<Self> {
        Self::new(r.s, r.values)
    }
}

impl From<TabulatedNonlinearity> for TableRepr {
    fn from(t: TabulatedNonlinearity) -> Self {
        Self {
            s: t.s,
            values: t.values,
        }
    }
}

impl TabulatedNonlinearity {
    pub fn new(s: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let mut t = Self {
            s,
            values,
            cumulative: vec![],
        };
        t.prepare()?;
        Ok(t)
    }

    fn prepare(&mut self) -> Result<()> {
        let n = self.s.len();
        if n < 2 || self.values.len() != n {
            return Err(Error::InvalidParameter(
                "tabulated: need >= 2 knots and matching values".into(),
            ));
        }
        if self.s.iter().chain(&self.values).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tabulated nonlinearity"));
        }
        if self.s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "tabulated: knots must be strictly increasing".into(),
            ));
        }
        if !(self.s[0] <= 0.0 && self.s[n - 1] >= 0.0) {
            return Err(Error::InvalidParameter("tabulated: knots must bracket 0".into()));
        }
        let mut cum = vec![0.0; n];
        for k in 1..n {
            cum[k] = cum[k - 1] + 0.5 * (self.values[k] + self.values[k - 1]) * (self.s[k] - self.s[k - 1]);
        }
        let zero = self.segment_integral(&cum, 0.0);
        for c in cum.iter_mut() {
            *c -= zero;
        }
        self.cumulative = cum;
        Ok(())
    }

    fn segment(&self, x: f64) -> usize {
        (self.s.partition_point(|&t| t <= x).max(1) - 1).min(self.s.len() - 2)
    }

    fn segment_integral(&self, cum: &[f64], x: f64) -> f64 {
        let k = self.segment(x);
        let (x0, x1) = (self.s[k], self.s[k + 1]);
        let slope = (self.values[k + 1] - self.values[k]) / (x1 - x0);
        let dx = x - x0;
        cum[k] + self.values[k] * dx + 0.5 * slope * dx * dx
    }

    pub fn in_range(&self, x: f64) -> bool {
        x >= self.s[0] && x <= self.s[self.s.len() - 1]
    }

    fn eval(&self, x: f64) -> (f64, f64, f64) {
        if !self.in_range(x) {
            return (f64::NAN, f64::NAN, f64::NAN);
        }
        let k = self.segment(x);
        let (x0, x1) = (self.s[k], self.s[k + 1]);
        let slope = (self.values[k + 1] - self.values[k]) / (x1 - x0);
        let v = self.values[k] + slope * (x - x0);
        (v, self.segment_integral(&self.cumulative, x), slope)
    }

    pub fn knots(&self) -> &[f64] {
        &self.s
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A tagged nonlinearity family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlinearitySpec {
    /// `coefficient·|s|^{p−2}s`, primitive `coefficient·|s|^p/p`.
    PurePower {
        #[serde(with = "crate::serde_num")]
        coefficient: f64,
        #[serde(with = "crate::serde_num")]
        exponent: f64,
    },
    OscSubcritical(OscSubcriticalParams),
    OscCritical(OscCriticalParams),
    FractalSelfSimilar(FractalBase),
    Tabulated(TabulatedNonlinearity),
}

impl NonlinearitySpec {
    pub fn power(coefficient: f64, exponent: f64) -> Self {
        Self::PurePower {
            coefficient,
            exponent,
        }
    }

    /// The critical power `|s|^{2*−2}s` in dimension N.
    pub fn critical_power(dim: usize) -> Self {
        Self::power(1.0, critical_exponent(dim))
    }

    pub fn zero() -> Self {
        Self::power(0.0, 4.0)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::PurePower { coefficient, .. } if *coefficient == 0.0)
    }

    /// Structural validation (what a problem file must satisfy to be loaded).
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::PurePower {
                coefficient,
                exponent,
            } => {
                if !(coefficient.is_finite() && *coefficient >= 0.0) {
                    return Err(Error::InvalidParameter(
                        "pure_power coefficient must be finite and >= 0".into(),
                    ));
                }
                if !(exponent.is_finite() && *exponent > 2.0) {
                    return Err(Error::InvalidParameter(
                        "pure_power exponent must exceed 2".into(),
                    ));
                }
                Ok(())
            }
            Self::OscSubcritical(p) => build_rho(p).map(|_| ()),
            Self::OscCritical(p) => p.validate_structure(),
            Self::FractalSelfSimilar(b) => b.validate(),
            Self::Tabulated(_) => Ok(()),
        }
    }

    /// Self-similarity ratio γ when the family fixes one.
    pub fn gamma(&self) -> Option<f64> {
        match self {
            Self::OscCritical(p) => Some(p.gamma()),
            Self::FractalSelfSimilar(b) => Some(b.gamma),
            _ => None,
        }
    }

    /// (value, primitive, derivative) without argument checks; NaN when the
    /// argument is outside a table or past the fold depth.
    #[inline]
    pub fn triple(&self, s: f64) -> (f64, f64, f64) {
        match self {
            Self::PurePower {
                coefficient,
                exponent,
            } => {
                if s == 0.0 || *coefficient == 0.0 {
                    return (0.0, 0.0, 0.0);
                }
                let a = s.abs();
                let pm2 = a.powf(exponent - 2.0);
                (
                    coefficient * pm2 * s,
                    coefficient * pm2 * a * a / exponent,
                    coefficient * (exponent - 1.0) * pm2,
                )
            }
            Self::OscSubcritical(p) => osc_sub_triple(p, s),
            Self::OscCritical(p) => p.eval(s),
            Self::FractalSelfSimilar(b) => b.eval(s).unwrap_or((f64::NAN, f64::NAN, f64::NAN)),
            Self::Tabulated(t) => t.eval(s),
        }
    }

    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        match self {
            Self::PurePower {
                coefficient,
                exponent,
            } => {
                if s == 0.0 {
                    0.0
                } else {
                    coefficient * s.abs().powf(exponent - 2.0) * s
                }
            }
            _ => self.triple(s).0,
        }
    }

    #[inline]
    pub fn primitive(&self, s: f64) -> f64 {
        match self {
            Self::PurePower {
                coefficient,
                exponent,
            } => coefficient * s.abs().powf(*exponent) / exponent,
            _ => self.triple(s).1,
        }
    }

    #[inline]
    pub fn derivative(&self, s: f64) -> f64 {
        self.triple(s).2
    }

    fn checked(&self, s: f64) -> Result<(f64, f64, f64)> {
        if !s.is_finite() {
            return Err(Error::NonFiniteArgument(s));
        }
        match self {
            Self::FractalSelfSimilar(b) => b.eval(s).ok_or(Error::FoldDepth(s)),
            Self::Tabulated(t) if !t.in_range(s) => Err(Error::OutOfTable(s)),
            _ => {
                let t = self.triple(s);
                if t.0.is_finite() && t.1.is_finite() {
                    Ok(t)
                } else {
                    Err(Error::NonFinite("nonlinearity value"))
                }
            }
        }
    }

    pub fn kink_set(&self) -> Vec<f64> {
        match self {
            Self::OscSubcritical(_) => vec![-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0],
            Self::Tabulated(t) => t.knots().to_vec(),
            _ => vec![0.0],
        }
    }
}

fn osc_sub_triple(p: &OscSubcriticalParams, s: f64) -> (f64, f64, f64) {
    if s == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let rho = Rho {
        q0: p.q0,
        alpha: p.alpha,
        beta: p.beta,
        c0: c0(),
        sup_eta_prime: 0.0,
    };
    let a = s.abs();
    let la = a.ln();
    let (r, dr) = rho.eval(s);
    let ap0 = a.powf(p.p0);
    let ar = a.powf(r);
    let big_f = p.lambda * (ap0 + ar);
    let sgn = s.signum();
    // d/ds |s|^ρ(s) = (ρ' s ln|s| + ρ)|s|^{ρ-2}s
    let kappa = dr * s * la + r;
    let f = p.lambda * (p.p0 * ap0 / a + kappa * ar / a) * sgn;
    // numerical derivative of f is enough for Newton steps
    let h = 1e-6 * a.max(1e-3);
    let fp = |x: f64| {
        let (rx, drx) = rho.eval(x);
        let ax = x.abs();
        p.lambda * (p.p0 * ax.powf(p.p0 - 1.0) + (drx * x * ax.ln() + rx) * ax.powf(rx - 1.0)) * x.signum()
    };
    let df = (fp(s + h) - fp(s - h)) / (2.0 * h);
    (f, big_f, df)
}

/// f(s) for a subcritical family.
pub fn eval_f(spec: &NonlinearitySpec, s: f64) -> Result<f64> {
    spec.checked(s).map(|t| t.0)
}

/// F(s) = ∫₀ˢ f.
pub fn eval_big_f(spec: &NonlinearitySpec, s: f64) -> Result<f64> {
    spec.checked(s).map(|t| t.1)
}

/// g(s) for a critical family.
pub fn eval_g(spec: &NonlinearitySpec, s: f64) -> Result<f64> {
    spec.checked(s).map(|t| t.0)
}

/// G(s) = ∫₀ˢ g.
pub fn eval_big_g(spec: &NonlinearitySpec, s: f64) -> Result<f64> {
    spec.checked(s).map(|t| t.1)
}

/// Ḡ(s) = g(s)s.
pub fn eval_gbar(spec: &NonlinearitySpec, s: f64) -> Result<f64> {
    spec.checked(s).map(|t| t.0 * s)
}
