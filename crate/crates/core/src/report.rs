//! Check records shared by every suite.

use serde::Serialize;

use crate::exact::ExactScalar;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CheckRecord {
    pub model: String,
    pub check: String,
    /// Gated records decide the exit status; the rest are informational.
    pub gated: bool,
    pub passed: bool,
    pub cases: usize,
    /// 1-based frame indices of the first failing case (F first, then F⊥).
    pub indices: Vec<usize>,
    pub lhs: String,
    pub rhs: String,
    pub detail: String,
}

impl CheckRecord {
    pub fn numeric(model: &str, check: &str, gated: bool, passed: bool, detail: String) -> Self {
        CheckRecord {
            model: model.into(),
            check: check.into(),
            gated,
            passed,
            cases: 1,
            indices: Vec::new(),
            lhs: String::new(),
            rhs: String::new(),
            detail,
        }
    }

    pub fn status(&self) -> &'static str {
        match (self.passed, self.gated) {
            (true, _) => "pass",
            (false, true) => "FAIL",
            (false, false) => "mismatch",
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    pub records: Vec<CheckRecord>,
}

impl Report {
    pub fn push(&mut self, r: CheckRecord) {
        self.records.push(r);
    }

    pub fn extend(&mut self, other: Report) {
        self.records.extend(other.records);
    }

    pub fn gated_pass(&self) -> bool {
        self.records.iter().filter(|r| r.gated).all(|r| r.passed)
    }

    pub fn find(&self, check: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.check == check)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| r.gated && !r.passed)
    }
}

/// Accumulates exact comparisons for one identity and keeps the first failure.
pub(crate) struct ExactLaw {
    rec: CheckRecord,
}

impl ExactLaw {
    pub fn new(model: &str, check: &str, gated: bool) -> Self {
        ExactLaw {
            rec: CheckRecord {
                model: model.into(),
                check: check.into(),
                gated,
                passed: true,
                cases: 0,
                indices: Vec::new(),
                lhs: String::new(),
                rhs: String::new(),
                detail: String::new(),
            },
        }
    }

    pub fn compare(&mut self, idx: &[usize], lhs: &ExactScalar, rhs: &ExactScalar) {
        self.rec.cases += 1;
        if self.rec.passed && lhs != rhs {
            self.rec.passed = false;
            self.rec.indices = idx.iter().map(|i| i + 1).collect();
            self.rec.lhs = lhs.to_string();
            self.rec.rhs = rhs.to_string();
        }
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.rec.detail = d.into();
        self
    }

    pub fn finish(self) -> CheckRecord {
        self.rec
    }
}
