use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::{Jet, Scalar};

/// Default central-difference step in coordinate units.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Below this `|det g|` a metric is treated as singular.
pub const SINGULAR_DET: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    Flat,
    ConformallyFlat,
    General,
}

/// How partial derivatives of `g_ab` are obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Derivatives {
    /// Exact partials through forward-mode jets.
    Analytic,
    /// Nested central differences of the component values.
    FiniteDifference { h: f64 },
}

type MetricFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

#[derive(Clone)]
enum Source {
    Flat,
    /// Upper triangle, row-major, `n(n+1)/2` entries.
    Components(Vec<Expr>),
    Rescaled { base: Box<Source>, factor: Expr },
    Function(MetricFn),
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Flat => write!(f, "Flat"),
            Source::Components(c) => f.debug_tuple("Components").field(c).finish(),
            Source::Rescaled { base, factor } => f
                .debug_struct("Rescaled")
                .field("base", base)
                .field("factor", factor)
                .finish(),
            Source::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// A metric on an n-dimensional coordinate patch.
#[derive(Clone, Debug)]
pub struct MetricSpec {
    name: String,
    dim: usize,
    signature: Vec<f64>,
    source: Source,
    derivatives: Derivatives,
    /// The patch is `{x : domain(x) > 0}`; everywhere when absent.
    domain: Option<Expr>,
}

/// `g_ab` and its coordinate partials at a point.
#[derive(Clone, Debug)]
pub struct MetricDerivs {
    pub g: DMatrix<f64>,
    /// `[c][a][b] = ∂_c g_ab`
    pub dg: Tensor,
    /// `[c][d][a][b] = ∂_c ∂_d g_ab`
    pub ddg: Tensor,
    /// `[c][d][e][a][b]`, present at full order.
    pub dddg: Option<Tensor>,
}

impl MetricSpec {
    pub fn flat(signature: Vec<f64>) -> Self {
        MetricSpec {
            name: if signature.iter().all(|s| *s > 0.0) {
                "flat-euclidean".into()
            } else {
                "flat".into()
            },
            dim: signature.len(),
            signature,
            source: Source::Flat,
            derivatives: Derivatives::Analytic,
            domain: None,
        }
    }

    pub fn euclidean(n: usize) -> Self {
        Self::flat(vec![1.0; n])
    }

    /// Minkowski space with signature (-, +, ..., +).
    pub fn minkowski(n: usize) -> Self {
        let mut s = vec![1.0; n];
        s[0] = -1.0;
        let mut m = Self::flat(s);
        m.name = "flat-minkowski".into();
        m
    }

    /// `Ω² δ` for an expression `Ω`.
    pub fn conformally_flat(n: usize, factor: Expr) -> Self {
        let name = format!("conformally-flat({factor})");
        let mut m = Self::euclidean(n).rescale_unchecked(&ConformalFactor::new(factor));
        m.name = name;
        m
    }

    /// Unit round sphere in stereographic coordinates, `Ω = 2/(1+|x|²)`.
    pub fn round_sphere(n: usize) -> Self {
        let mut m = Self::conformally_flat(n, Expr::parse("2/(1+r2)").expect("valid"));
        m.name = "round-sphere-stereographic".into();
        m
    }

    /// General metric from the upper-triangular components (row-major).
    pub fn from_components(name: &str, n: usize, upper: Vec<Expr>, signature: Vec<f64>) -> Result<Self> {
        if upper.len() != n * (n + 1) / 2 {
            return Err(Error::DimensionMismatch { expected: n * (n + 1) / 2, got: upper.len() });
        }
        if signature.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: signature.len() });
        }
        Ok(MetricSpec {
            name: name.into(),
            dim: n,
            signature,
            source: Source::Components(upper),
            derivatives: Derivatives::Analytic,
            domain: None,
        })
    }

    /// Diagonal metric `diag(d_1, ..., d_n)`.
    pub fn diagonal(name: &str, entries: Vec<Expr>, signature: Vec<f64>) -> Result<Self> {
        let n = entries.len();
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        let mut it = entries.into_iter();
        for a in 0..n {
            for b in a..n {
                upper.push(if a == b { it.next().expect("n entries") } else { Expr::constant(0.0) });
            }
        }
        Self::from_components(name, n, upper, signature)
    }

    /// Metric given only by its values; curvature uses finite differences.
    pub fn from_fn(
        name: &str,
        n: usize,
        signature: Vec<f64>,
        f: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        MetricSpec {
            name: name.into(),
            dim: n,
            signature,
            source: Source::Function(Arc::new(f)),
            derivatives: Derivatives::FiniteDifference { h: DEFAULT_FD_STEP },
            domain: None,
        }
    }

    pub fn with_finite_differences(mut self, h: f64) -> Self {
        self.derivatives = Derivatives::FiniteDifference { h };
        self
    }

    pub fn with_domain(mut self, domain: Expr) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn signature(&self) -> &[f64] {
        &self.signature
    }

    pub fn derivatives(&self) -> Derivatives {
        self.derivatives
    }

    pub fn kind(&self) -> MetricKind {
        fn kind_of(s: &Source) -> MetricKind {
            match s {
                Source::Flat => MetricKind::Flat,
                Source::Rescaled { base, .. } => match kind_of(base) {
                    MetricKind::General => MetricKind::General,
                    _ => MetricKind::ConformallyFlat,
                },
                Source::Components(_) | Source::Function(_) => MetricKind::General,
            }
        }
        kind_of(&self.source)
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.source, Source::Flat)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.domain {
            None => true,
            Some(d) => d.eval_f64(x).map(|v| v > 0.0).unwrap_or(false),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if !self.contains(x) {
            return Err(Error::PatchExit(x.to_vec()));
        }
        Ok(())
    }

    /// `ĝ = Ω² g`. The factor is only checked where the metric is evaluated.
    pub fn rescale(&self, factor: &ConformalFactor) -> MetricSpec {
        let mut m = self.rescale_unchecked(factor);
        m.name = format!("({})^2*{}", factor.omega, self.name);
        m
    }

    fn rescale_unchecked(&self, factor: &ConformalFactor) -> MetricSpec {
        MetricSpec {
            name: self.name.clone(),
            dim: self.dim,
            signature: self.signature.clone(),
            source: Source::Rescaled {
                base: Box::new(self.source.clone()),
                factor: factor.omega.clone(),
            },
            derivatives: self.derivatives,
            domain: self.domain.clone(),
        }
    }

    /// Component values `g_ab(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        self.values(&self.source, x)
    }

    fn values(&self, src: &Source, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim;
        Ok(match src {
            Source::Flat => DMatrix::from_diagonal(&DVector::from_column_slice(&self.signature)),
            Source::Components(c) => {
                let mut g = DMatrix::zeros(n, n);
                let mut k = 0;
                for a in 0..n {
                    for b in a..n {
                        let v = c[k].eval_f64(x)?;
                        g[(a, b)] = v;
                        g[(b, a)] = v;
                        k += 1;
                    }
                }
                g
            }
            Source::Rescaled { base, factor } => {
                let om = factor.eval_f64(x)?;
                if om == 0.0 {
                    return Err(Error::ZeroFactor);
                }
                self.values(base, x)? * (om * om)
            }
            Source::Function(f) => f(x),
        })
    }

    fn jets(&self, src: &Source, x: &[f64], third: bool) -> Result<Vec<Jet>> {
        let n = self.dim;
        Ok(match src {
            Source::Flat => {
                let mut out = vec![Jet::constant(n, third, 0.0); n * n];
                for a in 0..n {
                    out[a * n + a] = Jet::constant(n, third, self.signature[a]);
                }
                out
            }
            Source::Components(c) => {
                let vars = Jet::variables(x, third);
                let mut out = vec![Jet::constant(n, third, 0.0); n * n];
                let mut k = 0;
                for a in 0..n {
                    for b in a..n {
                        let v = c[k].eval(&vars)?;
                        out[b * n + a] = v.clone();
                        out[a * n + b] = v;
                        k += 1;
                    }
                }
                out
            }
            Source::Rescaled { base, factor } => {
                let vars = Jet::variables(x, third);
                let om = factor.eval(&vars)?;
                if om.value() == 0.0 {
                    return Err(Error::ZeroFactor);
                }
                let om2 = om.clone() * om;
                self.jets(base, x, third)?
                    .into_iter()
                    .map(|j| j * om2.clone())
                    .collect()
            }
            Source::Function(_) => {
                return Err(Error::Config("function metrics have no analytic partials".into()))
            }
        })
    }

    /// `g` and its partials to second order (`full = false`) or third order.
    pub fn derivs(&self, x: &[f64], full: bool) -> Result<MetricDerivs> {
        self.check_point(x)?;
        let n = self.dim;
        if let Source::Flat = self.source {
            return Ok(MetricDerivs {
                g: self.values(&self.source, x)?,
                dg: Tensor::zeros(n, 3),
                ddg: Tensor::zeros(n, 4),
                dddg: full.then(|| Tensor::zeros(n, 5)),
            });
        }
        match self.derivatives {
            Derivatives::Analytic => {
                let jets = self.jets(&self.source, x, full)?;
                let mut g = DMatrix::zeros(n, n);
                let mut dg = Tensor::zeros(n, 3);
                let mut ddg = Tensor::zeros(n, 4);
                let mut dddg = full.then(|| Tensor::zeros(n, 5));
                for a in 0..n {
                    for b in 0..n {
                        let j = &jets[a * n + b];
                        g[(a, b)] = j.value();
                        for c in 0..n {
                            dg.set([c, a, b], j.grad(c));
                            for d in 0..n {
                                ddg.set([c, d, a, b], j.hess(c, d));
                                if let Some(t) = dddg.as_mut() {
                                    for e in 0..n {
                                        t.set([c, d, e, a, b], j.third(c, d, e));
                                    }
                                }
                            }
                        }
                    }
                }
                Ok(MetricDerivs { g, dg, ddg, dddg })
            }
            Derivatives::FiniteDifference { h } => self.fd_derivs(x, h, full),
        }
    }

    fn fd_derivs(&self, x: &[f64], h: f64, full: bool) -> Result<MetricDerivs> {
        let n = self.dim;
        let g = self.values(&self.source, x)?;
        let shifted = |x: &[f64], c: usize, s: f64| {
            let mut y = x.to_vec();
            y[c] += s;
            y
        };
        let grad = |x: &[f64]| -> Result<Tensor> {
            let mut t = Tensor::zeros(n, 3);
            for c in 0..n {
                let gp = self.values(&self.source, &shifted(x, c, h))?;
                let gm = self.values(&self.source, &shifted(x, c, -h))?;
                for a in 0..n {
                    for b in 0..n {
                        t.set([c, a, b], (gp[(a, b)] - gm[(a, b)]) / (2.0 * h));
                    }
                }
            }
            Ok(t)
        };
        let hess = |x: &[f64]| -> Result<Tensor> {
            let mut t = Tensor::zeros(n, 4);
            for d in 0..n {
                let p = grad(&shifted(x, d, h))?;
                let m = grad(&shifted(x, d, -h))?;
                for c in 0..n {
                    for a in 0..n {
                        for b in 0..n {
                            t.set([d, c, a, b], (p.at([c, a, b]) - m.at([c, a, b])) / (2.0 * h));
                        }
                    }
                }
            }
            Ok(t)
        };
        let dg = grad(x)?;
        let ddg = hess(x)?;
        let dddg = if full {
            let mut t = Tensor::zeros(n, 5);
            for e in 0..n {
                let p = hess(&shifted(x, e, h))?;
                let m = hess(&shifted(x, e, -h))?;
                for c in 0..n {
                    for d in 0..n {
                        for a in 0..n {
                            for b in 0..n {
                                t.set(
                                    [e, c, d, a, b],
                                    (p.at([c, d, a, b]) - m.at([c, d, a, b])) / (2.0 * h),
                                );
                            }
                        }
                    }
                }
            }
            Some(t)
        } else {
            None
        };
        Ok(MetricDerivs { g, dg, ddg, dddg })
    }
}

/// A nowhere-vanishing conformal factor `Ω`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConformalFactor {
    pub omega: Expr,
}

impl ConformalFactor {
    pub fn new(omega: Expr) -> Self {
        ConformalFactor { omega }
    }

    pub fn parse(src: &str) -> Result<Self> {
        Ok(ConformalFactor { omega: Expr::parse(src)? })
    }

    pub fn identity() -> Self {
        ConformalFactor { omega: Expr::constant(1.0) }
    }

    /// `Ω = 2/(1+|x|²)`.
    pub fn stereographic() -> Self {
        Self::parse("2/(1+r2)").expect("valid")
    }

    /// `Ω = exp(<k, x>)`.
    pub fn exponential(k: &[f64]) -> Self {
        let terms: Vec<String> = k
            .iter()
            .enumerate()
            .map(|(i, ki)| format!("({ki:?})*x{}", i + 1))
            .collect();
        Self::parse(&format!("exp({})", terms.join("+"))).expect("valid")
    }

    /// `1/Ω`, so that rescaling by `Ω` then by the inverse is the identity.
    pub fn inverse(&self) -> Self {
        Self::parse(&format!("1/({})", self.omega.source())).expect("valid")
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let v = self.omega.eval_f64(x)?;
        if v == 0.0 {
            return Err(Error::ZeroFactor);
        }
        Ok(v)
    }

    /// `Υ_a` together with its partials `∂_b Υ_a` (matrix indexed `[a][b]`).
    pub fn upsilon_with_partials(&self, x: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let om: Jet = self.omega.eval(&Jet::variables(x, false))?;
        let v = om.value();
        if v == 0.0 {
            return Err(Error::ZeroFactor);
        }
        let n = x.len();
        let ups = DVector::from_fn(n, |a, _| om.grad(a) / v);
        let dups = DMatrix::from_fn(n, n, |a, b| om.hess(a, b) / v - om.grad(a) * om.grad(b) / (v * v));
        Ok((ups, dups))
    }

    /// The one-form `Υ = Ω⁻¹ dΩ` at `x`.
    pub fn upsilon(&self, x: &[f64]) -> Result<DVector<f64>> {
        let om: Jet = self.omega.eval(&Jet::variables(x, false))?;
        let v = om.value();
        if v == 0.0 {
            return Err(Error::ZeroFactor);
        }
        Ok(DVector::from_fn(x.len(), |a, _| om.grad(a) / v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_kinds_and_values() {
        let m = MetricSpec::minkowski(4);
        assert_eq!(m.kind(), MetricKind::Flat);
        let g = m.eval(&[0.0; 4]).unwrap();
        assert_eq!(g[(0, 0)], -1.0);
        assert_eq!(g[(3, 3)], 1.0);
        assert_eq!(MetricSpec::round_sphere(3).kind(), MetricKind::ConformallyFlat);
    }

    #[test]
    fn identity_rescale_leaves_values() {
        let m = MetricSpec::diagonal(
            "d",
            vec![
                Expr::parse("1+x2^2").unwrap(),
                Expr::parse("exp(x1)").unwrap(),
                Expr::parse("2").unwrap(),
            ],
            vec![1.0; 3],
        )
        .unwrap();
        let r = m.rescale(&ConformalFactor::identity());
        let x = [0.3, -0.4, 0.9];
        assert!((m.eval(&x).unwrap() - r.eval(&x).unwrap()).amax() == 0.0);
        assert_eq!(r.kind(), MetricKind::General);
    }

    #[test]
    fn stereographic_rescale_gives_sphere_values() {
        let flat = MetricSpec::euclidean(3);
        let s = flat.rescale(&ConformalFactor::stereographic());
        let x = [0.5, 0.2, -0.1];
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let om = 2.0 / (1.0 + r2);
        let g = s.eval(&x).unwrap();
        assert!((g[(1, 1)] - om * om).abs() < 1e-15);
        assert_eq!(g[(0, 1)], 0.0);
    }

    #[test]
    fn double_rescale_is_identity() {
        let m = MetricSpec::round_sphere(3);
        let f = ConformalFactor::exponential(&[0.3, -0.2, 0.5]);
        let back = m.rescale(&f).rescale(&f.inverse());
        let x = [0.1, 0.7, -0.3];
        assert!((m.eval(&x).unwrap() - back.eval(&x).unwrap()).amax() < 1e-14);
    }

    #[test]
    fn zero_factor_is_reported() {
        let m = MetricSpec::euclidean(3).rescale(&ConformalFactor::parse("x1").unwrap());
        assert_eq!(m.eval(&[0.0, 1.0, 1.0]), Err(Error::ZeroFactor));
        assert_eq!(m.derivs(&[0.0, 1.0, 1.0], false).unwrap_err(), Error::ZeroFactor);
    }

    #[test]
    fn domain_guards_the_patch() {
        let m = MetricSpec::euclidean(3).with_domain(Expr::parse("1 - r2").unwrap());
        assert!(m.eval(&[0.1, 0.1, 0.1]).is_ok());
        assert!(matches!(m.eval(&[1.0, 1.0, 0.0]), Err(Error::PatchExit(_))));
    }

    #[test]
    fn upsilon_of_exponential_is_k() {
        let f = ConformalFactor::exponential(&[0.3, -0.2, 0.5]);
        let u = f.upsilon(&[0.4, 0.1, 0.2]).unwrap();
        assert!((u[0] - 0.3).abs() < 1e-15 && (u[1] + 0.2).abs() < 1e-15 && (u[2] - 0.5).abs() < 1e-15);
    }
}
