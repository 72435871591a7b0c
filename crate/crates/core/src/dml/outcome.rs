use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TreatmentKind};
use crate::error::{Error, Result};
use crate::features::{FeatureMap, TBasis};
use crate::riesz::RieszBasis;

/// Ridge regression `γ̂(d, z)` on polynomial features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub basis: RieszBasis,
    pub coef: Vec<f64>,
}

/// Default outcome basis: per-arm polynomials in `z` for binary treatments,
/// a joint polynomial in `(d, z)` otherwise.
pub fn outcome_basis(kind: TreatmentKind, dz: usize, degree: usize) -> Result<RieszBasis> {
    Ok(match kind {
        TreatmentKind::Binary => RieszBasis::ArmPolynomial { dz, degree },
        TreatmentKind::Continuous => RieszBasis::Polynomial {
            features: FeatureMap::polynomial(dz + 1, degree, TBasis::Monomial { degree: 0 }, false)?,
        },
    })
}

/// Solve `(GᵀG/n + ridge I) c = Gᵀv/n` for the rows of `g`.
pub(crate) fn ridge_solve(gram: DMatrix<f64>, rhs: DVector<f64>, ridge: f64) -> Result<Vec<f64>> {
    let p = rhs.len();
    let m = gram + DMatrix::identity(p, p) * ridge;
    let sol = match m.clone().cholesky() {
        Some(ch) => Some(ch.solve(&rhs)),
        None => m.lu().solve(&rhs),
    };
    match sol {
        Some(c) if c.iter().all(|v| v.is_finite()) => Ok(c.iter().copied().collect()),
        _ => Err(Error::Singular(format!("{p}x{p} ridge system"))),
    }
}

/// Fit `γ̂` by ridge regression on `rows`.
pub fn fit_outcome(ds: &Dataset, rows: &[usize], basis: RieszBasis, ridge: f64) -> Result<OutcomeModel> {
    if rows.is_empty() {
        return Err(Error::Validation("outcome regression needs a non-empty training split".into()));
    }
    let p = basis.len();
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    for &i in rows {
        let (phi, _) = basis.eval(&ds.x(i));
        let v = DVector::from_vec(phi);
        gram.ger(1.0, &v, &v, 1.0);
        rhs.axpy(ds.y(i), &v, 1.0);
    }
    let n = rows.len() as f64;
    let coef = ridge_solve(gram / n, rhs / n, ridge)?;
    Ok(OutcomeModel { basis, coef })
}

impl OutcomeModel {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.basis.eval(x).0.iter().zip(&self.coef).map(|(a, b)| a * b).sum()
    }

    /// `∂_d γ̂` at `x = (d, z)`; zero for the per-arm basis.
    pub fn d_value(&self, x: &[f64]) -> f64 {
        self.basis.eval(x).1.iter().zip(&self.coef).map(|(a, b)| a * b).sum()
    }
}
