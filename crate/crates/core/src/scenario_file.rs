//! Line-oriented scenario files.
//!
//! ```text
//! # comment
//! label = kodaira_thurston
//! algebra = heisenberg_r
//! class = almost_kahler
//! dim = 4
//! c 1 2 3 = 1          # [e1, e2] = 1 e3, indices 1-based, i < j
//! g 1 = 1 0 0 0        # metric rows
//! J 1 = 0 0 -1 0       # row i of J: J e_k = sum_i J[i][k] e_i
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::algebra::LieAlgebraSpec;
use crate::catalog::{ExpectedClass, Scenario, ScenarioError};

/// A parse or validation failure with a stable code.
#[derive(Debug, Error, Clone, PartialEq)]
pub struct ParseError {
    pub code: &'static str,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{} (line {l}): {}", self.code, self.message),
            None => write!(f, "{}: {}", self.code, self.message),
        }
    }
}

impl From<ScenarioError> for ParseError {
    fn from(e: ScenarioError) -> Self {
        let message = e.to_string();
        let message = message
            .strip_prefix(e.code())
            .and_then(|m| m.strip_prefix(": "))
            .unwrap_or(&message)
            .to_string();
        ParseError {
            code: e.code(),
            line: None,
            message,
        }
    }
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        code: "SYNTAX",
        line: Some(line),
        message: message.into(),
    }
}

fn parse_number(line: usize, s: &str) -> Result<f64, ParseError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(syntax(line, format!("'{s}' is not a finite number"))),
    }
}

fn parse_index(line: usize, s: &str) -> Result<usize, ParseError> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(syntax(line, format!("'{s}' is not a 1-based index"))),
    }
}

#[derive(Default)]
struct Raw {
    label: Option<String>,
    algebra: Option<String>,
    class: Option<ExpectedClass>,
    dim: Option<(usize, usize)>,
    brackets: BTreeMap<(usize, usize, usize), (f64, usize)>,
    g: BTreeMap<usize, (Vec<f64>, usize)>,
    j: BTreeMap<usize, (Vec<f64>, usize)>,
}

fn set_once<T>(slot: &mut Option<T>, value: T, line: usize, key: &str) -> Result<(), ParseError> {
    if slot.is_some() {
        return Err(syntax(line, format!("duplicate '{key}'")));
    }
    *slot = Some(value);
    Ok(())
}

fn read_lines(text: &str) -> Result<Raw, ParseError> {
    let mut raw = Raw::default();
    for (idx, full) in text.lines().enumerate() {
        let ln = idx + 1;
        let content = full.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (lhs, rhs) = content
            .split_once('=')
            .ok_or_else(|| syntax(ln, "expected 'key = value'"))?;
        let key: Vec<&str> = lhs.split_whitespace().collect();
        let rhs = rhs.trim();
        match key.as_slice() {
            ["label"] => set_once(&mut raw.label, rhs.to_string(), ln, "label")?,
            ["algebra"] => set_once(&mut raw.algebra, rhs.to_string(), ln, "algebra")?,
            ["class"] => {
                let c = rhs.parse::<ExpectedClass>().map_err(|e| syntax(ln, e))?;
                set_once(&mut raw.class, c, ln, "class")?;
            }
            ["dim"] => {
                let d = rhs
                    .parse::<usize>()
                    .map_err(|_| syntax(ln, format!("'{rhs}' is not a dimension")))?;
                if d < 2 || d % 2 != 0 {
                    return Err(syntax(ln, format!("dimension must be even and at least 2, got {d}")));
                }
                set_once(&mut raw.dim, (d, ln), ln, "dim")?;
            }
            ["c", i, j, k] => {
                let (i, j, k) = (parse_index(ln, i)?, parse_index(ln, j)?, parse_index(ln, k)?);
                let v = parse_number(ln, rhs)?;
                if i == j {
                    return Err(syntax(ln, "c i j k needs i != j"));
                }
                // an i > j entry restates the twin of (j, i)
                let (key, v) = if i < j { ((i, j, k), v) } else { ((j, i, k), -v) };
                if let Some(&(prev, prev_ln)) = raw.brackets.get(&key) {
                    if prev != v {
                        return Err(syntax(
                            ln,
                            format!(
                                "conflicts with line {prev_ln}: antisymmetry requires c {} {} {} = {}",
                                key.0, key.1, key.2, prev
                            ),
                        ));
                    }
                }
                raw.brackets.insert(key, (v, ln));
            }
            [m @ ("g" | "J"), i] => {
                let i = parse_index(ln, i)?;
                let row = rhs
                    .split_whitespace()
                    .map(|s| parse_number(ln, s))
                    .collect::<Result<Vec<_>, _>>()?;
                let rows = if *m == "g" { &mut raw.g } else { &mut raw.j };
                if rows.insert(i, (row, ln)).is_some() {
                    return Err(syntax(ln, format!("duplicate row {m} {i}")));
                }
            }
            _ => return Err(syntax(ln, format!("unknown key '{}'", lhs.trim()))),
        }
    }
    Ok(raw)
}

fn assemble_matrix(
    name: &str,
    rows: &BTreeMap<usize, (Vec<f64>, usize)>,
    dim: usize,
    last_line: usize,
) -> Result<DMatrix<f64>, ParseError> {
    let mut m = DMatrix::zeros(dim, dim);
    for (&i, (row, ln)) in rows {
        if i > dim {
            return Err(syntax(*ln, format!("row {name} {i} exceeds dim = {dim}")));
        }
        if row.len() != dim {
            return Err(syntax(
                *ln,
                format!("row {name} {i} has {} entries, expected {dim}", row.len()),
            ));
        }
        for (k, v) in row.iter().enumerate() {
            m[(i - 1, k)] = *v;
        }
    }
    if let Some(missing) = (1..=dim).find(|i| !rows.contains_key(i)) {
        return Err(syntax(last_line, format!("missing row {name} {missing}")));
    }
    Ok(m)
}

/// Parse and fully validate a scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let raw = read_lines(text)?;
    let last_line = text.lines().count().max(1);
    let (dim, _) = raw.dim.ok_or_else(|| syntax(last_line, "missing 'dim'"))?;
    let mut brackets = Vec::with_capacity(raw.brackets.len());
    for (&(i, j, k), &(v, ln)) in &raw.brackets {
        if j > dim || k > dim {
            return Err(syntax(ln, format!("index exceeds dim = {dim}")));
        }
        brackets.push((i - 1, j - 1, k - 1, v));
    }
    let label = raw.label.unwrap_or_else(|| "custom".to_string());
    let algebra_name = raw.algebra.unwrap_or_else(|| label.clone());
    let algebra = LieAlgebraSpec::from_brackets(&algebra_name, dim, &brackets).map_err(ScenarioError::from)?;
    let g = assemble_matrix("g", &raw.g, dim, last_line)?;
    if let Some((i, k)) = (0..dim)
        .flat_map(|i| (0..dim).map(move |k| (i, k)))
        .find(|&(i, k)| g[(i, k)] != g[(k, i)])
    {
        return Err(ParseError {
            code: "NOT_SPD",
            line: raw.g.get(&(i + 1)).map(|r| r.1),
            message: format!("metric is not symmetric at ({}, {})", i + 1, k + 1),
        });
    }
    let j = assemble_matrix("J", &raw.j, dim, last_line)?;
    let class = raw.class.unwrap_or(ExpectedClass::Generic);
    Ok(Scenario::new(label, algebra, g, j, class)?)
}

/// Serialize so that [`parse_scenario`] reproduces the scenario bit for bit.
pub fn write_scenario(s: &Scenario) -> String {
    let n = s.algebra.dim();
    let mut out = String::new();
    let _ = writeln!(out, "label = {}", s.label);
    let _ = writeln!(out, "algebra = {}", s.algebra.name());
    let _ = writeln!(out, "class = {}", s.expected_class);
    let _ = writeln!(out, "dim = {n}");
    for i in 0..n {
        for j in i + 1..n {
            for k in 0..n {
                let v = s.algebra.c(k, i, j);
                if v != 0.0 {
                    let _ = writeln!(out, "c {} {} {} = {v:e}", i + 1, j + 1, k + 1);
                }
            }
        }
    }
    for (name, m) in [("g", s.pair.g()), ("J", s.pair.j())] {
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|k| format!("{:e}", m[(i, k)])).collect();
            let _ = writeln!(out, "{name} {} = {}", i + 1, row.join(" "));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{builtin, builtin_names};

    const KT: &str = "\
# Kodaira-Thurston
dim = 4
class = almost_kahler
c 1 2 3 = 1
g 1 = 1 0 0 0
g 2 = 0 1 0 0
g 3 = 0 0 1 0
g 4 = 0 0 0 1
J 1 = 0 0 -1 0
J 2 = 0 0 0 -1
J 3 = 1 0 0 0
J 4 = 0 1 0 0
";

    #[test]
    fn builtins_round_trip() {
        for name in builtin_names() {
            let s = builtin(name).unwrap();
            let text = write_scenario(&s);
            assert_eq!(parse_scenario(&text).unwrap(), s, "{text}");
        }
    }

    #[test]
    fn twin_is_inferred() {
        let s = parse_scenario(KT).unwrap();
        assert_eq!(s.algebra.c(2, 0, 1), 1.0);
        assert_eq!(s.algebra.c(2, 1, 0), -1.0);
        assert_eq!(s.pair.j(), builtin("kodaira_thurston").unwrap().pair.j());
    }

    #[test]
    fn consistent_twin_line_is_accepted() {
        let text = KT.replace("c 1 2 3 = 1\n", "c 1 2 3 = 1\nc 2 1 3 = -1\n");
        assert!(parse_scenario(&text).is_ok());
        let text = KT.replace("c 1 2 3 = 1\n", "c 1 2 3 = 1\nc 2 1 3 = 1\n");
        assert_eq!(parse_scenario(&text).unwrap_err().code, "SYNTAX");
    }

    #[test]
    fn float_text_round_trips() {
        let g = [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, 123456.789e10];
        for v in g {
            assert_eq!(format!("{v:e}").parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn j_squared_violation() {
        let s = 0.999f64.sqrt();
        let text = KT
            .replace("J 1 = 0 0 -1 0", &format!("J 1 = 0 0 {} 0", -s))
            .replace("J 2 = 0 0 0 -1", &format!("J 2 = 0 0 0 {}", -s))
            .replace("J 3 = 1 0 0 0", &format!("J 3 = {s} 0 0 0"))
            .replace("J 4 = 0 1 0 0", &format!("J 4 = 0 {s} 0 0"));
        assert_eq!(parse_scenario(&text).unwrap_err().code, "J_SQUARED");
    }

    #[test]
    fn diagnostics_codes() {
        let cases = [
            (KT.replace("c 1 2 3 = 1", "c 1 2 3 = 1\nc 1 3 1 = 1"), "JACOBI", None),
            (KT.replace("g 1 = 1 0 0 0", "g 1 = 2 0 0 0"), "INCOMPATIBLE", None),
            (KT.replace("g 1 = 1 0 0 0", "g 1 = -1 0 0 0"), "NOT_SPD", None),
            (KT.replace("g 1 = 1 0 0 0", "g 1 = 1 0.5 0 0"), "NOT_SPD", Some(5)),
            (KT.replace("g 2 = 0 1 0 0", "g 2 = 0 1 0"), "SYNTAX", Some(6)),
            (KT.replace("c 1 2 3 = 1", "c 1 2 3 = x"), "SYNTAX", Some(4)),
            (KT.replace("c 1 2 3 = 1", "c 1 1 3 = 1"), "SYNTAX", Some(4)),
            (KT.replace("c 1 2 3 = 1", "c 1 2 5 = 1"), "SYNTAX", Some(4)),
            (KT.replace("dim = 4", "dim = 3"), "SYNTAX", Some(2)),
            (
                KT.replace("class = almost_kahler", "class = kahler"),
                "CLASS_MISMATCH",
                None,
            ),
            (KT.replace("J 4 = 0 1 0 0\n", ""), "SYNTAX", Some(11)),
            (format!("{KT}frobnicate = 1\n"), "SYNTAX", Some(13)),
            (format!("{KT}dim = 4\n"), "SYNTAX", Some(13)),
        ];
        for (text, code, line) in cases {
            let err = parse_scenario(&text).unwrap_err();
            assert_eq!(err.code, code, "{err}\n{text}");
            if line.is_some() {
                assert_eq!(err.line, line, "{err}");
            }
        }
    }
}
