//! Runtime evaluation of inequalities: each line records both sides, the
//! relation, whether it held, and the signed margin.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LedgerLine {
    pub id: String,
    pub lhs: f64,
    pub relation: Relation,
    pub rhs: f64,
    pub pass: bool,
    /// rhs − lhs for upper bounds, lhs − rhs for lower bounds.
    pub margin: f64,
    /// Hard lines abort or fail a run; soft lines are reported only.
    pub hard: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl LedgerLine {
    pub fn new(id: impl Into<String>, lhs: f64, relation: Relation, rhs: f64) -> Self {
        let (pass, margin) = match relation {
            Relation::Le => (lhs <= rhs, rhs - lhs),
            Relation::Lt => (lhs < rhs, rhs - lhs),
            Relation::Ge => (lhs >= rhs, lhs - rhs),
            Relation::Gt => (lhs > rhs, lhs - rhs),
        };
        LedgerLine { id: id.into(), lhs, relation, rhs, pass, margin, hard: false, note: None }
    }

    pub fn le(id: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        LedgerLine::new(id, lhs, Relation::Le, rhs)
    }

    pub fn lt(id: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        LedgerLine::new(id, lhs, Relation::Lt, rhs)
    }

    pub fn ge(id: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        LedgerLine::new(id, lhs, Relation::Ge, rhs)
    }

    pub fn gt(id: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        LedgerLine::new(id, lhs, Relation::Gt, rhs)
    }

    pub fn hard(mut self) -> Self {
        self.hard = true;
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Ledger {
    pub lines: Vec<LedgerLine>,
}

impl Ledger {
    pub fn push(&mut self, line: LedgerLine) {
        self.lines.push(line);
    }

    pub fn extend(&mut self, other: Ledger) {
        self.lines.extend(other.lines);
    }

    pub fn all_pass(&self) -> bool {
        self.lines.iter().all(|l| l.pass)
    }

    pub fn hard_failures(&self) -> Vec<&LedgerLine> {
        self.lines.iter().filter(|l| l.hard && !l.pass).collect()
    }

    pub fn soft_failures(&self) -> Vec<&LedgerLine> {
        self.lines.iter().filter(|l| !l.hard && !l.pass).collect()
    }

    pub fn get(&self, id: &str) -> Option<&LedgerLine> {
        self.lines.iter().find(|l| l.id == id)
    }
}
