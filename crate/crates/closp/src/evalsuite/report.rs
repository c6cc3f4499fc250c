//! Report containers and their two serializations: a flat JSON document
//! and an aligned plain-text table (values shown as percentages).

use serde_json::{Map, Number, Value};

use crate::evalsuite::classify::MacroPrf;
use crate::vocab::LABELS;

/// Mean metrics at one cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSummary {
    pub k: usize,
    pub ndcg: f64,
    pub precision: f64,
    pub recall: f64,
}

/// All cutoffs for one query.
#[derive(Debug, Clone)]
pub struct QueryMetrics {
    pub text: String,
    pub at: Vec<CutoffSummary>,
}

#[derive(Debug, Clone)]
pub struct RetrievalReport {
    pub scope: String,
    pub index_size: usize,
    pub mean: Vec<CutoffSummary>,
    pub per_query: Vec<QueryMetrics>,
    /// Aligned with the vocabulary; None when the class has no
    /// single-label query in the evaluated set.
    pub per_class_ndcg: Vec<Option<f64>>,
}

fn num(v: f64) -> Value {
    Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
}

impl RetrievalReport {
    pub fn flat_json(&self) -> Value {
        let mut doc = Map::new();
        doc.insert("scope".into(), Value::String(self.scope.clone()));
        doc.insert("index_size".into(), Value::from(self.index_size));
        doc.insert("query_count".into(), Value::from(self.per_query.len()));
        for m in &self.mean {
            doc.insert(format!("mean_ndcg@{}", m.k), num(m.ndcg));
            doc.insert(format!("mean_p@{}", m.k), num(m.precision));
            doc.insert(format!("mean_r@{}", m.k), num(m.recall));
        }
        for (label, value) in LABELS.iter().zip(&self.per_class_ndcg) {
            let v = value.map(num).unwrap_or(Value::Null);
            doc.insert(format!("class_ndcg:{label}"), v);
        }
        for q in &self.per_query {
            for m in &q.at {
                doc.insert(format!("query:{}:ndcg@{}", q.text, m.k), num(m.ndcg));
                doc.insert(format!("query:{}:p@{}", q.text, m.k), num(m.precision));
                doc.insert(format!("query:{}:r@{}", q.text, m.k), num(m.recall));
            }
        }
        Value::Object(doc)
    }

    pub fn text_table(&self) -> String {
        let mut out = format!(
            "scope {}   items {}   queries {}\n\n{:<6}{:>10}{:>10}{:>10}\n",
            self.scope,
            self.index_size,
            self.per_query.len(),
            "K",
            "nDCG%",
            "P%",
            "R%"
        );
        for m in &self.mean {
            out.push_str(&format!(
                "{:<6}{:>10.2}{:>10.2}{:>10.2}\n",
                m.k,
                100.0 * m.ndcg,
                100.0 * m.precision,
                100.0 * m.recall
            ));
        }
        out.push_str(&format!("\n{:<28}{:>10}\n", "class", "nDCG%"));
        for (label, value) in LABELS.iter().zip(&self.per_class_ndcg) {
            match value {
                Some(v) => out.push_str(&format!("{:<28}{:>10.2}\n", label, 100.0 * v)),
                None => out.push_str(&format!("{:<28}{:>10}\n", label, "-")),
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ClassificationReport {
    pub threshold: f64,
    pub item_count: usize,
    pub scores: MacroPrf,
}

impl ClassificationReport {
    pub fn flat_json(&self) -> Value {
        let mut doc = Map::new();
        doc.insert("threshold".into(), num(self.threshold));
        doc.insert("item_count".into(), Value::from(self.item_count));
        doc.insert("macro_p".into(), num(self.scores.precision));
        doc.insert("macro_r".into(), num(self.scores.recall));
        doc.insert("macro_f1".into(), num(self.scores.f1));
        for (label, c) in LABELS.iter().zip(&self.scores.per_class) {
            doc.insert(format!("class_p:{label}"), num(c.precision));
            doc.insert(format!("class_r:{label}"), num(c.recall));
            doc.insert(format!("class_f1:{label}"), num(c.f1));
            doc.insert(format!("class_support:{label}"), Value::from(c.support));
        }
        Value::Object(doc)
    }

    pub fn text_table(&self) -> String {
        let mut out = format!(
            "items {}   threshold {:.6}\nmacro  P% {:.2}   R% {:.2}   F1% {:.2}\n\n{:<28}{:>8}{:>8}{:>8}{:>9}\n",
            self.item_count,
            self.threshold,
            100.0 * self.scores.precision,
            100.0 * self.scores.recall,
            100.0 * self.scores.f1,
            "class",
            "P%",
            "R%",
            "F1%",
            "support"
        );
        for (label, c) in LABELS.iter().zip(&self.scores.per_class) {
            out.push_str(&format!(
                "{:<28}{:>8.2}{:>8.2}{:>8.2}{:>9}\n",
                label,
                100.0 * c.precision,
                100.0 * c.recall,
                100.0 * c.f1,
                c.support
            ));
        }
        out
    }
}
