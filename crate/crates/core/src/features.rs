//! Tensor-product feature maps `φ_j(x, t) = a_i(x) b_k(t)` with exact
//! directional derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XBasis {
    /// All monomials of total degree at most `degree` in `dim` variables.
    Polynomial { dim: usize, degree: usize },
    /// Products of Legendre polynomials with total degree at most `degree`,
    /// each coordinate mapped from `[lo, hi]` to `[-1, 1]`.
    Legendre { dim: usize, degree: usize, lo: f64, hi: f64 },
    /// A constant plus Gaussian bumps `exp(-|x - c|² / 2h²)`.
    Rbf { dim: usize, centers: Vec<Vec<f64>>, bandwidth: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TBasis {
    /// `1, t, ..., t^degree`.
    Monomial { degree: usize },
    /// Legendre polynomials mapped from `[lo, hi]` to `[-1, 1]`.
    Legendre { degree: usize, lo: f64, hi: f64 },
    /// `1, t², ..., t^(2 degree)`.
    EvenMonomial { degree: usize },
}

impl TBasis {
    pub fn len(&self) -> usize {
        match self {
            TBasis::Monomial { degree } | TBasis::Legendre { degree, .. } | TBasis::EvenMonomial { degree } => degree + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn eval_into(&self, t: f64, val: &mut [f64], der: &mut [f64]) {
        match *self {
            TBasis::Monomial { degree } => {
                let mut p = 1.0;
                let mut pm1 = 0.0;
                for j in 0..=degree {
                    val[j] = p;
                    der[j] = j as f64 * pm1;
                    pm1 = p;
                    p *= t;
                }
            }
            TBasis::EvenMonomial { degree } => {
                let t2 = t * t;
                let mut prev = 0.0;
                let mut p = 1.0;
                for j in 0..=degree {
                    val[j] = p;
                    der[j] = 2.0 * j as f64 * t * prev;
                    prev = p;
                    p *= t2;
                }
            }
            TBasis::Legendre { degree, lo, hi } => {
                let scale = 2.0 / (hi - lo);
                let u = scale * (t - lo) - 1.0;
                val[0] = 1.0;
                der[0] = 0.0;
                if degree >= 1 {
                    val[1] = u;
                    der[1] = 1.0;
                }
                for n in 1..degree {
                    let nf = n as f64;
                    val[n + 1] = ((2.0 * nf + 1.0) * u * val[n] - nf * val[n - 1]) / (nf + 1.0);
                    der[n + 1] = der[n - 1] + (2.0 * nf + 1.0) * val[n];
                }
                for d in der.iter_mut().take(degree + 1) {
                    *d *= scale;
                }
            }
        }
    }
}

impl XBasis {
    pub fn dim(&self) -> usize {
        match self {
            XBasis::Polynomial { dim, .. } | XBasis::Legendre { dim, .. } | XBasis::Rbf { dim, .. } => *dim,
        }
    }
}

/// Serialisable description of a [`FeatureMap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub x: XBasis,
    pub t: TBasis,
    /// Separate coefficient blocks for `t >= +0` and `t <= -0`, with the time
    /// basis evaluated at `|t|`.
    #[serde(default)]
    pub split_at_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "FeatureSpec", into = "FeatureSpec")]
pub struct FeatureMap {
    spec: FeatureSpec,
    exponents: Vec<Vec<u32>>,
    nx: usize,
    nt: usize,
}

impl From<FeatureSpec> for FeatureMap {
    fn from(spec: FeatureSpec) -> Self {
        let exponents = match &spec.x {
            XBasis::Polynomial { dim, degree } | XBasis::Legendre { dim, degree, .. } => monomials(*dim, *degree),
            XBasis::Rbf { .. } => Vec::new(),
        };
        let nx = match &spec.x {
            XBasis::Polynomial { .. } | XBasis::Legendre { .. } => exponents.len(),
            XBasis::Rbf { centers, .. } => centers.len() + 1,
        };
        let nt = spec.t.len();
        Self { spec, exponents, nx, nt }
    }
}

impl From<FeatureMap> for FeatureSpec {
    fn from(m: FeatureMap) -> Self {
        m.spec
    }
}

fn monomials(dim: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=degree as u32 {
        let mut cur = vec![0u32; dim];
        fill(&mut out, &mut cur, 0, total);
    }
    out
}

fn fill(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, k: usize, left: u32) {
    if k + 1 >= cur.len() {
        if let Some(last) = cur.last_mut() {
            *last = left;
            out.push(cur.clone());
        } else if left == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for e in (0..=left).rev() {
        cur[k] = e;
        fill(out, cur, k + 1, left - e);
    }
    cur[k] = 0;
}

/// Reusable buffers for feature evaluation.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    ax: Vec<f64>,
    axd: Vec<f64>,
    bt: Vec<f64>,
    btd: Vec<f64>,
    pw: Vec<f64>,
    pwd: Vec<f64>,
}

impl FeatureMap {
    pub fn new(spec: FeatureSpec) -> Result<Self> {
        if spec.x.dim() == 0 {
            return Err(Error::Validation("feature map needs at least one x coordinate".into()));
        }
        if let TBasis::Legendre { lo, hi, .. } = spec.t {
            if !(hi > lo) {
                return Err(Error::Validation("Legendre range must have hi > lo".into()));
            }
        }
        if let XBasis::Legendre { lo, hi, .. } = spec.x {
            if !(hi > lo) {
                return Err(Error::Validation("Legendre range must have hi > lo".into()));
            }
        }
        if let XBasis::Rbf { bandwidth, centers, dim } = &spec.x {
            if !(*bandwidth > 0.0) || centers.iter().any(|c| c.len() != *dim) {
                return Err(Error::Validation("bad radial basis".into()));
            }
        }
        Ok(spec.into())
    }

    pub fn polynomial(dim: usize, degree: usize, t: TBasis, split_at_zero: bool) -> Result<Self> {
        Self::new(FeatureSpec { x: XBasis::Polynomial { dim, degree }, t, split_at_zero })
    }

    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn x_dim(&self) -> usize {
        self.spec.x.dim()
    }

    pub fn len(&self) -> usize {
        self.block_len() * if self.spec.split_at_zero { 2 } else { 1 }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn block_len(&self) -> usize {
        self.nx * self.nt
    }

    /// Index range of features that can be non-zero at time `t`.
    pub fn active_range(&self, t: f64) -> (usize, usize) {
        if self.spec.split_at_zero && t.is_sign_negative() {
            (self.block_len(), self.block_len())
        } else {
            (0, self.block_len())
        }
    }

    fn x_into(&self, x: &[f64], dx: &[f64], s: &mut Scratch) {
        s.ax.resize(self.nx, 0.0);
        s.axd.resize(self.nx, 0.0);
        match &self.spec.x {
            XBasis::Polynomial { dim, degree } | XBasis::Legendre { dim, degree, .. } => {
                let stride = degree + 1;
                s.pw.resize(dim * stride, 0.0);
                s.pwd.resize(dim * stride, 0.0);
                for k in 0..*dim {
                    let (pv, pd) = (&mut s.pw[k * stride..(k + 1) * stride], &mut s.pwd[k * stride..(k + 1) * stride]);
                    match self.spec.x {
                        XBasis::Legendre { lo, hi, .. } => {
                            TBasis::Legendre { degree: *degree, lo, hi }.eval_into(x[k], pv, pd)
                        }
                        _ => TBasis::Monomial { degree: *degree }.eval_into(x[k], pv, pd),
                    }
                }
                for (i, exps) in self.exponents.iter().enumerate() {
                    let mut v = 1.0;
                    for (k, &e) in exps.iter().enumerate() {
                        v *= s.pw[k * stride + e as usize];
                    }
                    let mut d = 0.0;
                    for (k, &e) in exps.iter().enumerate() {
                        if e == 0 || dx[k] == 0.0 {
                            continue;
                        }
                        let mut part = s.pwd[k * stride + e as usize] * dx[k];
                        for (l, &el) in exps.iter().enumerate() {
                            if l != k {
                                part *= s.pw[l * stride + el as usize];
                            }
                        }
                        d += part;
                    }
                    s.ax[i] = v;
                    s.axd[i] = d;
                }
            }
            XBasis::Rbf { centers, bandwidth, .. } => {
                let h2 = bandwidth * bandwidth;
                s.ax[0] = 1.0;
                s.axd[0] = 0.0;
                for (i, c) in centers.iter().enumerate() {
                    let mut r2 = 0.0;
                    let mut rd = 0.0;
                    for k in 0..c.len() {
                        let r = x[k] - c[k];
                        r2 += r * r;
                        rd += r * dx[k];
                    }
                    let v = (-0.5 * r2 / h2).exp();
                    s.ax[i + 1] = v;
                    s.axd[i + 1] = -v * rd / h2;
                }
            }
        }
    }

    /// Values `φ(x, t)` and the directional derivative
    /// `∇_x φ · dx + ∂_t φ · dt`, written into `val` and `tan`.
    pub fn jet_into(&self, x: &[f64], t: f64, dx: &[f64], dt: f64, val: &mut [f64], tan: &mut [f64], s: &mut Scratch) {
        self.x_into(x, dx, s);
        s.bt.resize(self.nt, 0.0);
        s.btd.resize(self.nt, 0.0);
        let (tt, sgn) = if self.spec.split_at_zero {
            (t.abs(), if t.is_sign_negative() { -1.0 } else { 1.0 })
        } else {
            (t, 1.0)
        };
        self.spec.t.eval_into(tt, &mut s.bt, &mut s.btd);
        let (start, len) = self.active_range(t);
        val.fill(0.0);
        tan.fill(0.0);
        let (v, d) = (&mut val[start..start + len], &mut tan[start..start + len]);
        for i in 0..self.nx {
            for k in 0..self.nt {
                let j = i * self.nt + k;
                v[j] = s.ax[i] * s.bt[k];
                d[j] = s.axd[i] * s.bt[k] + s.ax[i] * sgn * s.btd[k] * dt;
            }
        }
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        let mut val = vec![0.0; self.len()];
        let mut tan = vec![0.0; self.len()];
        let dx = vec![0.0; self.x_dim()];
        self.jet_into(x, t, &dx, 0.0, &mut val, &mut tan, &mut Scratch::default());
        val
    }

    /// `(φ, ∇_x φ · dx + ∂_t φ · dt)`.
    pub fn jet(&self, x: &[f64], t: f64, dx: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
        let mut val = vec![0.0; self.len()];
        let mut tan = vec![0.0; self.len()];
        self.jet_into(x, t, dx, dt, &mut val, &mut tan, &mut Scratch::default());
        (val, tan)
    }
}
