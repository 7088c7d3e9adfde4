// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// One term of a regression formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Intercept,
    Factor(String),
    Numeric(String),
    /// Product of two factors' coded columns.
    Interaction(String, String),
}

impl Term {
    pub fn factor(name: &str) -> Self {
        Term::Factor(name.into())
    }

    pub fn numeric(name: &str) -> Self {
        Term::Numeric(name.into())
    }

    pub fn interaction(a: &str, b: &str) -> Self {
        Term::Interaction(a.into(), b.into())
    }
}

/// Named columns of raw observations, before coding.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Frame {
    n: usize,
    factors: BTreeMap<String, Vec<String>>,
    numerics: BTreeMap<String, Vec<f64>>,
}

impl Frame {
    pub fn new(n: usize) -> Self {
        Frame { n, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn factor<S: AsRef<str>>(mut self, name: &str, labels: &[S]) -> Result<Self> {
        self.check_len(name, labels.len())?;
        self.factors.insert(name.into(), labels.iter().map(|s| s.as_ref().to_string()).collect());
        Ok(self)
    }

    pub fn numeric(mut self, name: &str, values: &[f64]) -> Result<Self> {
        self.check_len(name, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("column {name}: non-finite value at row {i}")));
        }
        self.numerics.insert(name.into(), values.to_vec());
        Ok(self)
    }

    fn check_len(&self, name: &str, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::Invalid(format!("column {name} has {len} rows, frame has {}", self.n)));
        }
        Ok(())
    }
}

/// A hypothetical observation to encode for contrasts.
///
/// Factors left out contribute zero to every coded column, which under sum
/// coding is the unweighted average over their levels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RowSpec {
    factors: BTreeMap<String, String>,
    numerics: BTreeMap<String, f64>,
}

impl RowSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn level(mut self, factor: &str, level: &str) -> Self {
        self.factors.insert(factor.into(), level.into());
        self
    }

    pub fn value(mut self, name: &str, v: f64) -> Self {
        self.numerics.insert(name.into(), v);
        self
    }
}

/// Sum-coded row of level `j` among `k`: `k - 1` columns, the last level
/// coded -1 everywhere.
pub fn sum_code(j: usize, k: usize) -> Vec<f64> {
    (0..k - 1)
        .map(|c| {
            if j == c {
                1.0
            } else if j == k - 1 {
                -1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Coded predictors plus response.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub column_names: Vec<String>,
    /// `n_rows x n_cols`.
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    terms: Vec<Term>,
    levels: BTreeMap<String, Vec<String>>,
}

impl DesignMatrix {
    /// Codes `frame` with factor levels in sorted order.
    pub fn build(frame: &Frame, terms: &[Term], y: &[f64]) -> Result<Self> {
        Self::build_with_levels(frame, terms, y, &BTreeMap::new())
    }

    /// Like [`build`](Self::build), with an explicit level order for some
    /// factors. Every observed label must appear in the given order.
    pub fn build_with_levels(
        frame: &Frame,
        terms: &[Term],
        y: &[f64],
        order: &BTreeMap<String, Vec<String>>,
    ) -> Result<Self> {
        if y.len() != frame.n {
            return Err(Error::Invalid(format!("response has {} rows, frame has {}", y.len(), frame.n)));
        }
        let mut levels = BTreeMap::new();
        let factor_names = terms.iter().flat_map(|t| match t {
            Term::Factor(f) => vec![f],
            Term::Interaction(a, b) => vec![a, b],
            _ => vec![],
        });
        for name in factor_names {
            let labels = frame.factors.get(name).ok_or_else(|| Error::Missing(format!("factor {name} in frame")))?;
            let observed: BTreeSet<&String> = labels.iter().collect();
            let lv = match order.get(name) {
                Some(given) => {
                    if let Some(l) = observed.iter().find(|l| !given.contains(l)) {
                        return Err(Error::Invalid(format!("factor {name}: level {l} missing from the given order")));
                    }
                    given.iter().filter(|l| observed.contains(l)).cloned().collect()
                }
                None => observed.into_iter().cloned().collect(),
            };
            levels.insert(name.clone(), lv);
        }
        for t in terms {
            if let Term::Numeric(v) = t {
                if !frame.numerics.contains_key(v) {
                    return Err(Error::Missing(format!("numeric column {v} in frame")));
                }
            }
        }

        let mut d = DesignMatrix {
            column_names: Vec::new(),
            x: DMatrix::zeros(0, 0),
            y: y.to_vec(),
            terms: terms.to_vec(),
            levels,
        };
        d.column_names = d.names();
        let p = d.column_names.len();
        let mut x = DMatrix::zeros(frame.n, p);
        for i in 0..frame.n {
            let mut spec = RowSpec::new();
            for (f, labels) in &frame.factors {
                spec.factors.insert(f.clone(), labels[i].clone());
            }
            for (v, values) in &frame.numerics {
                spec.numerics.insert(v.clone(), values[i]);
            }
            let row = d.encode(&spec)?;
            for (j, v) in row.into_iter().enumerate() {
                x[(i, j)] = v;
            }
        }
        d.x = x;
        Ok(d)
    }

    fn names(&self) -> Vec<String> {
        let coded = |f: &str| -> Vec<String> {
            let lv = &self.levels[f];
            lv[..lv.len().saturating_sub(1)].iter().map(|l| format!("{f}[{l}]")).collect()
        };
        let mut out = Vec::new();
        for t in &self.terms {
            match t {
                Term::Intercept => out.push("(Intercept)".to_string()),
                Term::Factor(f) => out.extend(coded(f)),
                Term::Numeric(v) => out.push(v.clone()),
                Term::Interaction(a, b) => {
                    for ca in coded(a) {
                        for cb in coded(b) {
                            out.push(format!("{ca}:{cb}"));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.ncols()
    }

    pub fn levels(&self, factor: &str) -> Option<&[String]> {
        self.levels.get(factor).map(|v| v.as_slice())
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Coded predictor row of a hypothetical observation.
    pub fn encode(&self, row: &RowSpec) -> Result<Vec<f64>> {
        let coded = |f: &str| -> Result<Vec<f64>> {
            let lv = &self.levels[f];
            match row.factors.get(f) {
                None => Ok(vec![0.0; lv.len().saturating_sub(1)]),
                Some(l) => {
                    let j = lv
                        .iter()
                        .position(|x| x == l)
                        .ok_or_else(|| Error::Invalid(format!("factor {f} has no level {l:?}")))?;
                    Ok(sum_code(j, lv.len()))
                }
            }
        };
        let mut out = Vec::with_capacity(self.column_names.len());
        for t in &self.terms {
            match t {
                Term::Intercept => out.push(1.0),
                Term::Factor(f) => out.extend(coded(f)?),
                Term::Numeric(v) => out.push(row.numerics.get(v).copied().unwrap_or(0.0)),
                Term::Interaction(a, b) => {
                    let (ca, cb) = (coded(a)?, coded(b)?);
                    for va in &ca {
                        for vb in &cb {
                            out.push(va * vb);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Copy with one extra numeric column appended.
    pub fn with_column(&self, name: &str, values: &[f64]) -> Result<Self> {
        if values.len() != self.n_rows() {
            return Err(Error::Invalid(format!(
                "column {name} has {} rows, design has {}",
                values.len(),
                self.n_rows()
            )));
        }
        let mut d = self.clone();
        let p = d.n_cols();
        d.x = d.x.clone().insert_column(p, 0.0);
        for (i, v) in values.iter().enumerate() {
            d.x[(i, p)] = *v;
        }
        d.column_names.push(name.into());
        d.terms.push(Term::Numeric(name.into()));
        Ok(d)
    }

    /// Checks the invariants a beta regression needs.
    pub fn validate(&self) -> Result<()> {
        let (n, p) = (self.n_rows(), self.n_cols());
        if n <= p {
            return Err(Error::Precondition(format!("design has {n} rows for {p} columns")));
        }
        if let Some(i) = self.y.iter().position(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::Precondition(format!(
                "response {} at row {i} is outside (0, 1); smooth the response first",
                self.y[i]
            )));
        }
        for (j, name) in self.column_names.iter().enumerate() {
            if name == "(Intercept)" {
                continue;
            }
            let col = self.x.column(j);
            if col.iter().all(|v| *v == col[0]) {
                return Err(Error::Invalid(format!("design column {name} is constant")));
            }
        }
        let sv = self.x.clone().singular_values();
        let max = sv.max();
        if sv.iter().any(|s| *s <= 1e-10 * max) {
            return Err(Error::Precondition(format!(
                "design columns are linearly dependent ({})",
                self.column_names.join(", ")
            )));
        }
        Ok(())
    }
}
