use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::numcore::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
        }
    }

    /// f'(pre) expressed through the pre-activation and the output.
    #[inline]
    pub fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::Sigmoid => out * (1.0 - out),
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sharing {
    /// One private recurrent block per query relation.
    PerRelation,
    /// A single block serves every query relation.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityMode {
    None,
    LearnedEntity,
    TypeSum,
    EntityPlusTypeSum,
}

impl EntityMode {
    pub fn is_none(self) -> bool {
        self == EntityMode::None
    }

    pub fn uses_learned_entities(self) -> bool {
        matches!(self, EntityMode::LearnedEntity | EntityMode::EntityPlusTypeSum)
    }

    pub fn uses_types(self) -> bool {
        matches!(self, EntityMode::TypeSum | EntityMode::EntityPlusTypeSum)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Relation embedding size.
    pub d: usize,
    /// Hidden state size.
    pub h: usize,
    /// Entity and type embedding size.
    pub m: usize,
    pub activation: Activation,
    pub sharing: Sharing,
    pub entity_mode: EntityMode,
}

impl ModelConfig {
    /// Per-relation sigmoid encoder without entities.
    pub fn path_rnn(d: usize, h: usize) -> Self {
        Self {
            d,
            h,
            m: 1,
            activation: Activation::Sigmoid,
            sharing: Sharing::PerRelation,
            entity_mode: EntityMode::None,
        }
    }

    /// Shared ReLU encoder.
    pub fn single(d: usize, h: usize, m: usize, entity_mode: EntityMode) -> Self {
        Self {
            d,
            h,
            m,
            activation: Activation::Relu,
            sharing: Sharing::Shared,
            entity_mode,
        }
    }

    /// Path-query configuration: one size for entities, relations and
    /// hidden units, with a learned entity table.
    pub fn path_query(dim: usize) -> Self {
        Self::single(dim, dim, dim, EntityMode::LearnedEntity)
    }

    /// Parses the command-line model names
    /// `pathrnn | single | single+ent | single+types | single+ent+types`.
    pub fn preset(name: &str, d: usize, h: usize, m: usize) -> Result<Self, ModelError> {
        let cfg = match name {
            "pathrnn" => Self::path_rnn(d, h),
            "single" => Self::single(d, h, m, EntityMode::None),
            "single+ent" => Self::single(d, h, m, EntityMode::LearnedEntity),
            "single+types" => Self::single(d, h, m, EntityMode::TypeSum),
            "single+ent+types" => Self::single(d, h, m, EntityMode::EntityPlusTypeSum),
            other => {
                return Err(ModelError::Config(format!(
                    "unknown model `{other}` (expected pathrnn, single, single+ent, single+types or single+ent+types)"
                )))
            }
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.d == 0 || self.h == 0 || self.m == 0 {
            return Err(ModelError::Config(String::from("d, h and m must be positive")));
        }
        Ok(())
    }
}

/// Vocabulary sizes the parameter tables are built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub relations: usize,
    pub query_relations: usize,
    pub types: usize,
    pub entities: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let p = ModelConfig::preset("pathrnn", 4, 5, 3).unwrap();
        assert_eq!(p.sharing, Sharing::PerRelation);
        assert_eq!(p.activation, Activation::Sigmoid);
        let s = ModelConfig::preset("single+ent+types", 4, 5, 3).unwrap();
        assert_eq!(s.entity_mode, EntityMode::EntityPlusTypeSum);
        assert_eq!(s.activation, Activation::Relu);
        assert!(ModelConfig::preset("lstm", 1, 1, 1).is_err());
        assert!(ModelConfig::single(0, 1, 1, EntityMode::None).validate().is_err());
    }

    #[test]
    fn relu_derivative_is_zero_at_kink() {
        assert_eq!(Activation::Relu.derivative(0.0, 0.0), 0.0);
        assert_eq!(Activation::Relu.derivative(1e-300, 1e-300), 1.0);
    }
}
