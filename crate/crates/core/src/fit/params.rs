use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::{AttentionWeights, ChoiceParams, ModelKind};

/// Unconstrained fit parameters: `sigma_i = exp(s_i)`, `gamma = exp(g)`,
/// `beta = exp(b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub s: Vec<f64>,
    pub g: f64,
    /// Present only for the exemplar model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

impl RawParams {
    /// All positive parameters start at one.
    pub fn init(dim: usize, kind: ModelKind) -> Self {
        Self {
            s: vec![0.0; dim],
            g: 0.0,
            b: (kind == ModelKind::Exemplar).then_some(0.0),
        }
    }

    pub fn kind(&self) -> ModelKind {
        if self.b.is_some() {
            ModelKind::Exemplar
        } else {
            ModelKind::Prototype
        }
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }

    /// Flat layout `[s_0 .. s_{d-1}, g, b?]` used by the optimizer.
    pub fn len(&self) -> usize {
        self.s.len() + 1 + usize::from(self.b.is_some())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&self.s);
        out.push(self.g);
        out.extend(self.b);
        out
    }

    pub fn from_flat(flat: &[f64], dim: usize, kind: ModelKind) -> Result<Self> {
        let expected = dim + 1 + usize::from(kind == ModelKind::Exemplar);
        if flat.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: flat.len() });
        }
        let params = Self {
            s: flat[..dim].to_vec(),
            g: flat[dim],
            b: (kind == ModelKind::Exemplar).then(|| flat[dim + 1]),
        };
        params.check_finite()?;
        Ok(params)
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.to_flat().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("raw parameters".into()))
        }
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.s.iter().map(|s| s.exp()).collect()
    }

    pub fn gamma(&self) -> f64 {
        self.g.exp()
    }

    pub fn beta(&self) -> Option<f64> {
        self.b.map(f64::exp)
    }

    pub fn transform(&self) -> Result<(AttentionWeights, ChoiceParams)> {
        self.check_finite()?;
        Ok((
            AttentionWeights::new(self.sigma())?,
            ChoiceParams::new(self.gamma(), self.beta())?,
        ))
    }
}
