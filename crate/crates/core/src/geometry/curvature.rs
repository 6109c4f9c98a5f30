//! Pointwise connection and curvature data.
//!
//! Conventions: `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`, stored as
//! `R^a_bcd` with `(R(X,Y)Z)^a = R^a_bcd Z^b X^c Y^d`; Ricci `r_bd = R^c_bcd`.
//! Lowered tensors use `R_abcd = g_ae R^e_bcd`, so that
//! `<R(X,Y)Z, T> = R_abcd T^a Z^b X^c Y^d`.

use nalgebra::{DMatrix, DVector};

use super::metric::{MetricDerivs, MetricSpec, SINGULAR_DET};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// How much of the curvature hierarchy to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetLevel {
    /// Connection, its first partials, Riemann, Ricci, Schouten, Weyl.
    Curvature,
    /// Additionally second partials of the connection and `∇P`.
    Full,
}

#[derive(Clone, Debug)]
pub struct GeometryJet {
    pub dim: usize,
    pub point: Vec<f64>,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// `[a][b][c] = Γ^a_bc`
    pub christoffel: Tensor,
    /// `[e][a][b][c] = ∂_e Γ^a_bc`
    pub dchristoffel: Tensor,
    /// `[f][e][a][b][c] = ∂_f ∂_e Γ^a_bc` (full level only)
    pub d2christoffel: Option<Tensor>,
    /// `R^a_bcd`
    pub riemann: Tensor,
    /// `R_abcd`
    pub riemann_lower: Tensor,
    pub ricci: DMatrix<f64>,
    pub scalar: f64,
    pub schouten: DMatrix<f64>,
    /// `(P♯)^a_b = g^ac P_cb`
    pub schouten_sharp: DMatrix<f64>,
    /// `W_abcd`, same slot convention as `R_abcd`.
    pub weyl: Tensor,
    /// `[c][a][b] = ∇_c P_ab` (full level only)
    pub nabla_schouten: Option<Tensor>,
}

/// Evaluates all pointwise geometric data of `spec` at `x`.
pub fn geometry_jet(spec: &MetricSpec, x: &[f64], level: JetLevel) -> Result<GeometryJet> {
    let n = spec.dim();
    if n < 3 {
        return Err(Error::DimensionTooSmall(n));
    }
    if spec.is_flat() {
        return flat_jet(spec, x, level);
    }
    let md = spec.derivs(x, level == JetLevel::Full)?;
    from_derivs(x, &md)
}

fn flat_jet(spec: &MetricSpec, x: &[f64], level: JetLevel) -> Result<GeometryJet> {
    let n = spec.dim();
    let g = spec.eval(x)?;
    let g_inv = DMatrix::from_diagonal(&g.diagonal().map(|v| 1.0 / v));
    let full = level == JetLevel::Full;
    Ok(GeometryJet {
        dim: n,
        point: x.to_vec(),
        g,
        g_inv,
        christoffel: Tensor::zeros(n, 3),
        dchristoffel: Tensor::zeros(n, 4),
        d2christoffel: full.then(|| Tensor::zeros(n, 5)),
        riemann: Tensor::zeros(n, 4),
        riemann_lower: Tensor::zeros(n, 4),
        ricci: DMatrix::zeros(n, n),
        scalar: 0.0,
        schouten: DMatrix::zeros(n, n),
        schouten_sharp: DMatrix::zeros(n, n),
        weyl: Tensor::zeros(n, 4),
        nabla_schouten: full.then(|| Tensor::zeros(n, 3)),
    })
}

/// Same as [`geometry_jet`] but without the `n >= 3` restriction; the
/// Schouten, Weyl and `∇P` fields are zero. Used for 2-dimensional flat
/// Kähler computations that only need the connection.
pub fn connection_jet(spec: &MetricSpec, x: &[f64]) -> Result<GeometryJet> {
    let md = spec.derivs(x, false)?;
    let n = spec.dim();
    if n >= 3 {
        return from_derivs(x, &md);
    }
    let (g_inv, christoffel, dchristoffel, _) = connection(&md)?;
    Ok(GeometryJet {
        dim: n,
        point: x.to_vec(),
        g: md.g.clone(),
        g_inv,
        christoffel,
        dchristoffel,
        d2christoffel: None,
        riemann: Tensor::zeros(n, 4),
        riemann_lower: Tensor::zeros(n, 4),
        ricci: DMatrix::zeros(n, n),
        scalar: 0.0,
        schouten: DMatrix::zeros(n, n),
        schouten_sharp: DMatrix::zeros(n, n),
        weyl: Tensor::zeros(n, 4),
        nabla_schouten: None,
    })
}

type Connection = (DMatrix<f64>, Tensor, Tensor, Option<Tensor>);

fn connection(md: &MetricDerivs) -> Result<Connection> {
    let n = md.g.nrows();
    let det = md.g.determinant();
    if !det.is_finite() || det.abs() < SINGULAR_DET {
        return Err(Error::SingularMetric { det });
    }
    let gi = md.g.clone().try_inverse().ok_or(Error::SingularMetric { det })?;

    // Γ_dbc = ½(∂_b g_dc + ∂_c g_db − ∂_d g_bc)
    let mut low = Tensor::zeros(n, 3);
    for d in 0..n {
        for b in 0..n {
            for c in 0..n {
                low.set(
                    [d, b, c],
                    0.5 * (md.dg.at([b, d, c]) + md.dg.at([c, d, b]) - md.dg.at([d, b, c])),
                );
            }
        }
    }
    // ∂_e Γ_dbc
    let mut dlow = Tensor::zeros(n, 4);
    for e in 0..n {
        for d in 0..n {
            for b in 0..n {
                for c in 0..n {
                    dlow.set(
                        [e, d, b, c],
                        0.5 * (md.ddg.at([e, b, d, c]) + md.ddg.at([e, c, d, b])
                            - md.ddg.at([e, d, b, c])),
                    );
                }
            }
        }
    }
    // ∂_e g^{ad} = −g^{ap} ∂_e g_pq g^{qd}
    let dgi: Vec<DMatrix<f64>> = (0..n)
        .map(|e| {
            let de = DMatrix::from_fn(n, n, |p, q| md.dg.at([e, p, q]));
            -(&gi * de * &gi)
        })
        .collect();

    let mut gamma = Tensor::zeros(n, 3);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let v: f64 = (0..n).map(|d| gi[(a, d)] * low.at([d, b, c])).sum();
                gamma.set([a, b, c], v);
            }
        }
    }
    let mut dgamma = Tensor::zeros(n, 4);
    for e in 0..n {
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let v: f64 = (0..n)
                        .map(|d| dgi[e][(a, d)] * low.at([d, b, c]) + gi[(a, d)] * dlow.at([e, d, b, c]))
                        .sum();
                    dgamma.set([e, a, b, c], v);
                }
            }
        }
    }

    let d2gamma = md.dddg.as_ref().map(|dddg| {
        // ∂_f ∂_e Γ_dbc
        let mut d2low = Tensor::zeros(n, 5);
        for f in 0..n {
            for e in 0..n {
                for d in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            d2low.set(
                                [f, e, d, b, c],
                                0.5 * (dddg.at([f, e, b, d, c]) + dddg.at([f, e, c, d, b])
                                    - dddg.at([f, e, d, b, c])),
                            );
                        }
                    }
                }
            }
        }
        // ∂_f ∂_e g⁻¹ = G g_f G g_e G + G g_e G g_f G − G g_fe G
        let dmat = |e: usize| DMatrix::from_fn(n, n, |p, q| md.dg.at([e, p, q]));
        let mut d2gi = vec![DMatrix::zeros(n, n); n * n];
        for f in 0..n {
            for e in 0..n {
                let gf = dmat(f);
                let ge = dmat(e);
                let gfe = DMatrix::from_fn(n, n, |p, q| md.ddg.at([f, e, p, q]));
                d2gi[f * n + e] = &gi * &gf * &gi * &ge * &gi + &gi * &ge * &gi * &gf * &gi
                    - &gi * gfe * &gi;
            }
        }
        let mut t = Tensor::zeros(n, 5);
        for f in 0..n {
            for e in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            let v: f64 = (0..n)
                                .map(|d| {
                                    d2gi[f * n + e][(a, d)] * low.at([d, b, c])
                                        + dgi[e][(a, d)] * dlow.at([f, d, b, c])
                                        + dgi[f][(a, d)] * dlow.at([e, d, b, c])
                                        + gi[(a, d)] * d2low.at([f, e, d, b, c])
                                })
                                .sum();
                            t.set([f, e, a, b, c], v);
                        }
                    }
                }
            }
        }
        t
    });
    Ok((gi, gamma, dgamma, d2gamma))
}

/// Builds the jet from metric partials.
pub fn from_derivs(x: &[f64], md: &MetricDerivs) -> Result<GeometryJet> {
    let n = md.g.nrows();
    if n < 3 {
        return Err(Error::DimensionTooSmall(n));
    }
    let (gi, gamma, dgamma, d2gamma) = connection(md)?;
    let g = &md.g;

    // R^a_bcd = ∂_c Γ^a_db − ∂_d Γ^a_cb + Γ^a_ce Γ^e_db − Γ^a_de Γ^e_cb
    let mut riem = Tensor::zeros(n, 4);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut v = dgamma.at([c, a, d, b]) - dgamma.at([d, a, c, b]);
                    for e in 0..n {
                        v += gamma.at([a, c, e]) * gamma.at([e, d, b])
                            - gamma.at([a, d, e]) * gamma.at([e, c, b]);
                    }
                    riem.set([a, b, c, d], v);
                }
            }
        }
    }
    let mut riem_low = Tensor::zeros(n, 4);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let v: f64 = (0..n).map(|e| g[(a, e)] * riem.at([e, b, c, d])).sum();
                    riem_low.set([a, b, c, d], v);
                }
            }
        }
    }
    let ricci = DMatrix::from_fn(n, n, |b, d| (0..n).map(|c| riem.at([c, b, c, d])).sum());
    let scalar: f64 = (0..n)
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .map(|(a, b)| gi[(a, b)] * ricci[(a, b)])
        .sum();
    let nf = n as f64;
    let schouten = (&ricci - g * (scalar / (2.0 * (nf - 1.0)))) / (nf - 2.0);
    let schouten_sharp = &gi * &schouten;

    // W_abcd = R_abcd − (g_bd P_ca + g_ca P_db − g_cb P_da − g_da P_cb)
    let p = &schouten;
    let mut weyl = Tensor::zeros(n, 4);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let kn = g[(b, d)] * p[(c, a)] + g[(c, a)] * p[(d, b)]
                        - g[(c, b)] * p[(d, a)]
                        - g[(d, a)] * p[(c, b)];
                    weyl.set([a, b, c, d], riem_low.at([a, b, c, d]) - kn);
                }
            }
        }
    }

    let nabla_schouten = d2gamma.as_ref().map(|d2g| {
        // ∂_f R^a_bcd
        let driem = |f: usize, a: usize, b: usize, c: usize, d: usize| -> f64 {
            let mut v = d2g.at([f, c, a, d, b]) - d2g.at([f, d, a, c, b]);
            for e in 0..n {
                v += dgamma.at([f, a, c, e]) * gamma.at([e, d, b])
                    + gamma.at([a, c, e]) * dgamma.at([f, e, d, b])
                    - dgamma.at([f, a, d, e]) * gamma.at([e, c, b])
                    - gamma.at([a, d, e]) * dgamma.at([f, e, c, b]);
            }
            v
        };
        let mut dricci = Tensor::zeros(n, 3);
        for f in 0..n {
            for b in 0..n {
                for d in 0..n {
                    let v: f64 = (0..n).map(|c| driem(f, c, b, c, d)).sum();
                    dricci.set([f, b, d], v);
                }
            }
        }
        let mut nabla = Tensor::zeros(n, 3);
        for f in 0..n {
            // ∂_f S = ∂_f g^{ab} r_ab + g^{ab} ∂_f r_ab, with ∂_f g^{-1} = −G ∂_f g G
            let dgf = DMatrix::from_fn(n, n, |p, q| md.dg.at([f, p, q]));
            let dgi = -(&gi * &dgf * &gi);
            let mut ds = 0.0;
            for a in 0..n {
                for b in 0..n {
                    ds += dgi[(a, b)] * ricci[(a, b)] + gi[(a, b)] * dricci.at([f, a, b]);
                }
            }
            for a in 0..n {
                for b in 0..n {
                    let dp = (dricci.at([f, a, b])
                        - (ds * g[(a, b)] + scalar * dgf[(a, b)]) / (2.0 * (nf - 1.0)))
                        / (nf - 2.0);
                    let mut v = dp;
                    for d in 0..n {
                        v -= gamma.at([d, f, a]) * p[(d, b)] + gamma.at([d, f, b]) * p[(a, d)];
                    }
                    nabla.set([f, a, b], v);
                }
            }
        }
        nabla
    });

    Ok(GeometryJet {
        dim: n,
        point: x.to_vec(),
        g: g.clone(),
        g_inv: gi,
        christoffel: gamma,
        dchristoffel: dgamma,
        d2christoffel: d2gamma,
        riemann: riem,
        riemann_lower: riem_low,
        ricci,
        scalar,
        schouten,
        schouten_sharp,
        weyl,
        nabla_schouten,
    })
}

impl GeometryJet {
    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (u.transpose() * &self.g * v)[(0, 0)]
    }

    pub fn norm2(&self, u: &DVector<f64>) -> f64 {
        self.inner(u, u)
    }

    pub fn lower(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.g * v
    }

    pub fn raise(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.g_inv * w
    }

    /// `Γ^a_bc u^b v^c`
    pub fn gamma(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        DVector::from_fn(n, |a, _| {
            let mut s = 0.0;
            for b in 0..n {
                for c in 0..n {
                    s += self.christoffel.at([a, b, c]) * u[b] * v[c];
                }
            }
            s
        })
    }

    /// `∂_e Γ^a_bc w^e u^b v^c`
    pub fn dgamma(&self, w: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        DVector::from_fn(n, |a, _| {
            let mut s = 0.0;
            for e in 0..n {
                if w[e] == 0.0 {
                    continue;
                }
                for b in 0..n {
                    for c in 0..n {
                        s += self.dchristoffel.at([e, a, b, c]) * w[e] * u[b] * v[c];
                    }
                }
            }
            s
        })
    }

    /// `∂_f ∂_e Γ^a_bc w1^f w2^e u^b v^c`; requires the full level.
    pub fn d2gamma(
        &self,
        w1: &DVector<f64>,
        w2: &DVector<f64>,
        u: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let t = self
            .d2christoffel
            .as_ref()
            .ok_or_else(|| Error::Config("second connection partials need JetLevel::Full".into()))?;
        let n = self.dim;
        Ok(DVector::from_fn(n, |a, _| {
            let mut s = 0.0;
            for f in 0..n {
                for e in 0..n {
                    let w = w1[f] * w2[e];
                    if w == 0.0 {
                        continue;
                    }
                    for b in 0..n {
                        for c in 0..n {
                            s += t.at([f, e, a, b, c]) * w * u[b] * v[c];
                        }
                    }
                }
            }
            s
        }))
    }

    pub fn schouten_form(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (u.transpose() * &self.schouten * v)[(0, 0)]
    }

    pub fn schouten_sharp_apply(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.schouten_sharp * u
    }

    /// `R(X,Y)Z`
    pub fn riemann_apply(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        DVector::from_fn(n, |a, _| {
            let mut s = 0.0;
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        s += self.riemann.at([a, b, c, d]) * z[b] * x[c] * y[d];
                    }
                }
            }
            s
        })
    }

    /// `<W(X,Y)Z, T>`
    pub fn weyl_form(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>, t: &DVector<f64>) -> f64 {
        let n = self.dim;
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        s += self.weyl.at([a, b, c, d]) * t[a] * z[b] * x[c] * y[d];
                    }
                }
            }
        }
        s
    }

    /// Maximum over all index pairs of the `g`-traces of the Weyl tensor.
    pub fn weyl_trace_max(&self) -> f64 {
        let n = self.dim;
        let gi = &self.g_inv;
        let pairs = [(0usize, 1usize), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        let mut m: f64 = 0.0;
        for (p, q) in pairs {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for u in 0..n {
                        for v in 0..n {
                            let mut idx = [0usize; 4];
                            idx[p] = u;
                            idx[q] = v;
                            let free: Vec<usize> = (0..4).filter(|k| *k != p && *k != q).collect();
                            idx[free[0]] = i;
                            idx[free[1]] = j;
                            s += gi[(u, v)] * self.weyl.at(idx);
                        }
                    }
                    m = m.max(s.abs());
                }
            }
        }
        m
    }

    /// Maximum of `|R_a[bcd]|` (first Bianchi identity).
    pub fn bianchi_max(&self) -> f64 {
        let n = self.dim;
        let r = &self.riemann_lower;
        let mut m: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let s = r.at([a, b, c, d]) + r.at([a, c, d, b]) + r.at([a, d, b, c]);
                        m = m.max(s.abs());
                    }
                }
            }
        }
        m
    }
}
