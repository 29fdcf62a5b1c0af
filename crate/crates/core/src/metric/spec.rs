//! JSON metric specification files.
//!
//! ```json
//! { "dim": 2, "family": "radial_power", "r_c": 1.0, "params": {"m1": 2.0},
//!   "alpha": {"kind": "power", "coef": 1.0, "exponent": -1.0} }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_escape_metric, build_exterior_escape_metric, Alpha, Family, MetricField, PBoundary, QField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaSpec {
    Zero,
    Power { coef: f64, exponent: f64 },
    ShiftedPower { coef: f64, exponent: f64, shift: f64 },
}

impl From<&AlphaSpec> for Alpha {
    fn from(a: &AlphaSpec) -> Self {
        match *a {
            AlphaSpec::Zero => Alpha::Zero,
            AlphaSpec::Power { coef, exponent } => Alpha::Power { coef, exponent },
            AlphaSpec::ShiftedPower { coef, exponent, shift } => Alpha::ShiftedPower { coef, exponent, shift },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QSpec {
    Zero,
    /// `q(r) = Σ c r^p`, given as `[[c, p], ...]`.
    ScalarProfile { terms: Vec<[f64; 2]> },
}

impl From<&QSpec> for QField {
    fn from(q: &QSpec) -> Self {
        match q {
            QSpec::Zero => QField::Zero,
            QSpec::ScalarProfile { terms } => QField::ScalarProfile {
                terms: terms.iter().map(|t| (t[0], t[1])).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub r: Vec<f64>,
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub dim: usize,
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_c: Option<f64>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exterior: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AlphaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_field: Option<QSpec>,
    /// Scalar boundary matrix `P = p I` for the exterior construction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_boundary: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableSpec>,
}

impl MetricSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("metric spec: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read metric spec {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn required(&self, key: &str) -> Result<f64> {
        self.params.get(key).copied().ok_or_else(|| {
            Error::Config(format!("family {} requires parameter '{key}'", self.family.name()))
        })
    }

    fn optional(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    pub fn build(&self) -> Result<MetricField> {
        let r_c = self.r_c.unwrap_or(1.0);
        let alpha = self.alpha.as_ref().map(Alpha::from);
        let q = self.q_field.as_ref().map(QField::from).unwrap_or(QField::Zero);
        let mut metric = match self.family {
            Family::Euclidean => {
                let mut m = MetricField::euclidean(self.dim)?;
                m.r_c = r_c;
                m
            }
            Family::RadialPower => MetricField::radial_power(
                self.dim,
                self.required("m1")?,
                self.optional("m2"),
                r_c,
                self.exterior.unwrap_or(false),
            )?,
            Family::RadialExp => MetricField::radial_exp(
                self.dim,
                self.required("m1")?,
                self.required("m2")?,
                self.required("s1")?,
                self.required("s2")?,
                r_c,
            )?,
            Family::Cylinder => MetricField::cylinder(self.dim, self.optional("R0").unwrap_or(2.0), r_c)?,
            Family::Prop21General => build_escape_metric(alpha.clone().unwrap_or(Alpha::Zero), q, r_c, self.dim)?,
            Family::Prop22Exterior => {
                let p = self.p_boundary.map_or(PBoundary::Identity, PBoundary::Scalar);
                build_exterior_escape_metric(alpha.clone().unwrap_or(Alpha::Zero), q, p, r_c, self.dim)?
            }
            Family::Tabulated => {
                let table = self
                    .table
                    .as_ref()
                    .ok_or_else(|| Error::Config("tabulated family requires a 'table' with r and phi".into()))?;
                MetricField::tabulated_profile(
                    self.dim,
                    r_c,
                    table.r.clone(),
                    table.phi.clone(),
                    self.exterior.unwrap_or(false),
                    alpha.clone().unwrap_or(Alpha::Zero),
                )?
            }
        };
        if let Some(a) = alpha {
            metric = metric.with_alpha(a);
        }
        if let Some(rho_c) = self.optional("rho_c") {
            metric = metric.with_rho_c(rho_c);
        }
        Ok(metric)
    }
}
