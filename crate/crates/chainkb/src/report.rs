//! JSON reports.

use serde::Serialize;

use chainkb_core::eval::EvalReport;
use chainkb_core::{KnowledgeGraph, PoolingKind};

#[derive(Debug, Clone, Serialize)]
pub struct RelationSummary {
    pub relation: String,
    /// Absent when the relation has no positive triple to rank.
    pub ap: Option<f64>,
    pub positives: usize,
    pub candidates: usize,
    /// Candidates without any connecting path, ranked last.
    pub pathless: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalSummary {
    #[serde(rename = "MAP")]
    pub map: Option<f64>,
    pub pooling: String,
    pub relations: Vec<RelationSummary>,
    pub positives: usize,
    pub candidates: usize,
    pub pathless: usize,
    pub config: serde_json::Value,
}

impl EvalSummary {
    pub fn new(
        kg: &KnowledgeGraph,
        report: &EvalReport,
        pooling: PoolingKind,
        config: serde_json::Value,
    ) -> Self {
        let relations: Vec<RelationSummary> = report
            .relations
            .iter()
            .map(|r| RelationSummary {
                relation: kg.relation_name(r.relation).to_string(),
                ap: r.ap,
                positives: r.positives,
                candidates: r.candidates,
                pathless: r.pathless,
            })
            .collect();
        Self {
            map: report.map,
            pooling: pooling.to_string(),
            positives: relations.iter().map(|r| r.positives).sum(),
            candidates: relations.iter().map(|r| r.candidates).sum(),
            pathless: relations.iter().map(|r| r.pathless).sum(),
            relations,
            config,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PathQuerySummary {
    pub variant: String,
    #[serde(rename = "MQ")]
    pub mq: Option<f64>,
    /// MQ of the untrained initial parameters.
    pub control_mq: Option<f64>,
    pub train_queries: usize,
    pub test_queries: usize,
    pub final_loss: Option<f64>,
    pub config: serde_json::Value,
}
