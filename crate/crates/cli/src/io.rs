//! File formats: problem JSON, verify input, Stein input, and CSV helpers.

use std::fs;
use std::io::Write;
use std::path::Path;

use cdare_core::{CMatrix, CdareProblem, Sign};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// `{"n": int, "sign": "plus"|"minus", "A": ..., "G": ..., "H": ...}` with
/// matrices as row-major nested `[re, im]` arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub n: usize,
    pub sign: Sign,
    #[serde(rename = "A")]
    pub a: CMatrix,
    #[serde(rename = "G")]
    pub g: CMatrix,
    #[serde(rename = "H")]
    pub h: CMatrix,
}

impl ProblemFile {
    pub fn from_problem(p: &CdareProblem) -> Self {
        ProblemFile {
            n: p.n(),
            sign: p.sign(),
            a: p.a().clone(),
            g: p.g().clone(),
            h: p.h().clone(),
        }
    }

    pub fn into_problem(self, sign_override: Option<Sign>) -> Result<CdareProblem, CliError> {
        for (field, m) in [("A", &self.a), ("G", &self.g), ("H", &self.h)] {
            if m.rows() != self.n || m.cols() != self.n {
                return Err(CliError::Data(format!(
                    "field `{field}` is {}x{}, but `n` is {}",
                    m.rows(),
                    m.cols(),
                    self.n
                )));
            }
        }
        let sign = sign_override.unwrap_or(self.sign);
        CdareProblem::new(self.a, self.g, self.h, sign)
            .map_err(|e| CliError::Data(format!("invalid problem: {e}")))
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct VerifyFile {
    #[serde(flatten)]
    pub problem: ProblemFile,
    #[serde(rename = "X", default)]
    pub x: Option<CMatrix>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteinFile {
    #[serde(rename = "A")]
    pub a: CMatrix,
    #[serde(rename = "Q")]
    pub q: CMatrix,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("malformed JSON in {}: {e}", path.display())))
}

/// Reads a candidate solution from either a plain `{"X": ...}` file or a
/// solve report (`x_pos`).
pub fn read_solution(path: &Path) -> Result<CMatrix, CliError> {
    let v: serde_json::Value = read_json(path)?;
    let m = v.get("X").or_else(|| v.get("x_pos")).ok_or_else(|| {
        CliError::Data(format!("{}: expected field `X` or `x_pos`", path.display()))
    })?;
    serde_json::from_value(m.clone())
        .map_err(|e| CliError::Data(format!("{}: bad solution matrix: {e}", path.display())))
}

/// Writes to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, content)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Data(format!("cannot write stdout: {e}")))
        }
    }
}

/// 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Data(format!("csv: {e}"));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Data(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::Data(format!("csv: {e}")))
}
