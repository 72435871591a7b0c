use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreatmentKind {
    /// Treatment coded as -1 / +1.
    Binary,
    Continuous,
}

/// Observed `(Y, D, Z)` rows. Covariates are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    outcomes: Vec<f64>,
    treatments: Vec<f64>,
    covariates: Vec<f64>,
    dz: usize,
    kind: TreatmentKind,
}

impl Dataset {
    pub fn new(
        outcomes: Vec<f64>,
        treatments: Vec<f64>,
        covariates: Vec<f64>,
        dz: usize,
        kind: TreatmentKind,
    ) -> Result<Self> {
        let n = outcomes.len();
        if n == 0 {
            return Err(Error::Validation("dataset must have at least one row".into()));
        }
        if treatments.len() != n || covariates.len() != n * dz {
            return Err(Error::Validation(format!(
                "column lengths differ: y={}, d={}, z={} (expected {}x{})",
                n,
                treatments.len(),
                covariates.len(),
                n,
                dz
            )));
        }
        if let Some(i) = outcomes
            .iter()
            .chain(&treatments)
            .chain(&covariates)
            .position(|v| !v.is_finite())
        {
            return Err(Error::Validation(format!("non-finite value at flat position {i}")));
        }
        if kind == TreatmentKind::Binary {
            if let Some(i) = treatments.iter().position(|&d| d != 1.0 && d != -1.0) {
                return Err(Error::Validation(format!(
                    "binary treatment must be -1 or 1, row {} has {}",
                    i, treatments[i]
                )));
            }
        }
        Ok(Self { outcomes, treatments, covariates, dz, kind })
    }

    pub fn n(&self) -> usize {
        self.outcomes.len()
    }

    pub fn dz(&self) -> usize {
        self.dz
    }

    pub fn kind(&self) -> TreatmentKind {
        self.kind
    }

    pub fn y(&self, i: usize) -> f64 {
        self.outcomes[i]
    }

    pub fn d(&self, i: usize) -> f64 {
        self.treatments[i]
    }

    pub fn z(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.dz..(i + 1) * self.dz]
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn treatments(&self) -> &[f64] {
        &self.treatments
    }

    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    /// Regressor row `x = (d, z)`.
    pub fn x(&self, i: usize) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dz + 1);
        x.push(self.treatments[i]);
        x.extend_from_slice(self.z(i));
        x
    }

    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let mut z = Vec::with_capacity(rows.len() * self.dz);
        for &i in rows {
            z.extend_from_slice(self.z(i));
        }
        Self::new(
            rows.iter().map(|&i| self.outcomes[i]).collect(),
            rows.iter().map(|&i| self.treatments[i]).collect(),
            z,
            self.dz,
            self.kind,
        )
    }

    /// Flat covariate rows of the units with treatment equal to `arm`.
    pub fn covariates_where(&self, arm: f64) -> Vec<f64> {
        (0..self.n())
            .filter(|&i| self.treatments[i] == arm)
            .flat_map(|i| self.z(i).iter().copied())
            .collect()
    }

    /// Flat `(d, z)` rows.
    pub fn regressor_rows(&self) -> Vec<f64> {
        (0..self.n()).flat_map(|i| self.x(i)).collect()
    }

    /// Share of units with `D = 1`.
    pub fn treated_share(&self) -> f64 {
        self.treatments.iter().filter(|&&d| d == 1.0).count() as f64 / self.n() as f64
    }
}
