//! Problem and gain file formats.
//!
//! A problem file is a JSON document:
//!
//! ```json
//! {
//!   "name": "double_integrator",
//!   "dims": [2, 1, 1, 2, 2],
//!   "A":   { "rows": 2, "cols": 2, "data": [0, 1, 0, 0] },
//!   "B1":  { "rows": 2, "cols": 1, "data": [0, 1] },
//!   "B":   { "rows": 2, "cols": 1, "data": [0, 1] },
//!   "C1":  { "rows": 2, "cols": 2, "data": [1, 0, 0, 0] },
//!   "D11": { "rows": 2, "cols": 1, "data": [0, 0] },
//!   "D12": { "rows": 2, "cols": 1, "data": [0, 1] },
//!   "C":   { "rows": 2, "cols": 2, "data": [1, 0, 0, 1] }
//! }
//! ```
//!
//! `dims` is `[n_x, n_w, n_u, n_y, n_z]` and `data` is row-major. Unknown
//! and duplicate keys are rejected, as is any matrix whose `data` length
//! differs from `rows * cols`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{validate_plant, Dims, GainMatrix, PlantRealization};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Debug)]
struct MatrixBlock(DMatrix<f64>);

impl<'de> Deserialize<'de> for MatrixBlock {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = RawMatrix::deserialize(de)?;
        let expected = raw
            .rows
            .checked_mul(raw.cols)
            .ok_or_else(|| serde::de::Error::custom("rows * cols overflows"))?;
        if raw.data.len() != expected {
            return Err(serde::de::Error::custom(format!(
                "matrix is {}x{} but data has {} entries",
                raw.rows,
                raw.cols,
                raw.data.len()
            )));
        }
        Ok(MatrixBlock(DMatrix::from_row_slice(
            raw.rows, raw.cols, &raw.data,
        )))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    name: String,
    dims: [usize; 5],
    #[serde(rename = "A")]
    a: MatrixBlock,
    #[serde(rename = "B1")]
    b1: MatrixBlock,
    #[serde(rename = "B")]
    b: MatrixBlock,
    #[serde(rename = "C1")]
    c1: MatrixBlock,
    #[serde(rename = "D11")]
    d11: MatrixBlock,
    #[serde(rename = "D12")]
    d12: MatrixBlock,
    #[serde(rename = "C")]
    c: MatrixBlock,
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parses and validates a problem document.
pub fn parse_problem(text: &str) -> Result<PlantRealization> {
    let raw: RawProblem = serde_json::from_str(text).map_err(parse_error)?;
    let [n_x, n_w, n_u, n_y, n_z] = raw.dims;
    let dims = Dims::new(n_x, n_w, n_u, n_y, n_z)?;
    validate_plant(PlantRealization {
        name: raw.name,
        dims,
        a: raw.a.0,
        b1: raw.b1.0,
        b: raw.b.0,
        c1: raw.c1.0,
        d11: raw.d11.0,
        d12: raw.d12.0,
        c: raw.c.0,
    })
}

/// Reads a problem file from disk.
pub fn load_problem(path: impl AsRef<Path>) -> Result<PlantRealization> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_problem(&text)
}

/// Shortest scientific representation that parses back to the same value.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn write_matrix(out: &mut String, m: &DMatrix<f64>) {
    let _ = write!(
        out,
        "{{ \"rows\": {}, \"cols\": {}, \"data\": [",
        m.nrows(),
        m.ncols()
    );
    let mut first = true;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if !first {
                out.push_str(", ");
            }
            first = false;
            out.push_str(&format_f64(m[(r, c)]));
        }
    }
    out.push_str("] }");
}

/// Serializes a plant in the problem file format. All entries must be
/// finite (a validated plant always is).
pub fn write_problem(plant: &PlantRealization) -> String {
    let d = plant.dims;
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(
        out,
        "  \"name\": {},",
        serde_json::to_string(&plant.name).expect("string serialization")
    );
    let _ = writeln!(
        out,
        "  \"dims\": [{}, {}, {}, {}, {}],",
        d.n_x, d.n_w, d.n_u, d.n_y, d.n_z
    );
    let blocks = plant.blocks();
    for (i, (name, m, _, _)) in blocks.iter().enumerate() {
        let _ = write!(out, "  \"{name}\": ");
        write_matrix(&mut out, m);
        out.push_str(if i + 1 < blocks.len() { ",\n" } else { "\n" });
    }
    out.push_str("}\n");
    out
}

/// Parses a gain document `{ "rows": .., "cols": .., "data": [..] }`.
pub fn parse_gain_json(text: &str) -> Result<GainMatrix> {
    let block: MatrixBlock = serde_json::from_str(text).map_err(parse_error)?;
    crate::model::check_finite("F", &block.0)?;
    Ok(GainMatrix(block.0))
}

/// Parses an inline gain such as `"-1, -2"` or `"1 2; 3 4"`: rows separated
/// by `;`, entries by commas or whitespace.
pub fn parse_gain_inline(text: &str) -> Result<GainMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, row) in text.split(';').enumerate() {
        let mut entries = Vec::new();
        for (j, tok) in row
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .enumerate()
        {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: 1,
                column: 0,
                message: format!("row {i}, entry {j}: cannot parse {tok:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    matrix: "F",
                    row: i,
                    col: j,
                });
            }
            entries.push(v);
        }
        rows.push(entries);
    }
    let cols = rows.first().map_or(0, Vec::len);
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Parse {
            line: 1,
            column: 0,
            message: "gain rows must be non-empty and of equal length".into(),
        });
    }
    let data: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(GainMatrix(DMatrix::from_row_slice(rows.len(), cols, &data)))
}

/// Serde adapter writing non-finite floats as the string tokens `inf`,
/// `-inf` and `nan`; finite values stay JSON numbers.
pub mod float_sentinel {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&super::format_f64(*v))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Token(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Token(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!(
                    "unexpected float token {other:?}"
                ))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DI: &str = r#"{
      "name": "double_integrator",
      "dims": [2, 1, 1, 2, 2],
      "A":   { "rows": 2, "cols": 2, "data": [0, 1, 0, 0] },
      "B1":  { "rows": 2, "cols": 1, "data": [0, 1] },
      "B":   { "rows": 2, "cols": 1, "data": [0, 1] },
      "C1":  { "rows": 2, "cols": 2, "data": [1, 0, 0, 0] },
      "D11": { "rows": 2, "cols": 1, "data": [0, 0] },
      "D12": { "rows": 2, "cols": 1, "data": [0, 1] },
      "C":   { "rows": 2, "cols": 2, "data": [1, 0, 0, 1] }
    }"#;

    #[test]
    fn parses_double_integrator() {
        let p = parse_problem(DI).unwrap();
        assert_eq!(p.name, "double_integrator");
        assert_eq!(p.dims, Dims::new(2, 1, 1, 2, 2).unwrap());
        assert_eq!(p.a[(0, 1)], 1.0);
        assert_eq!(p.c1[(0, 0)], 1.0);
    }

    #[test]
    fn missing_matrix_is_rejected() {
        let text = DI.replace(r#""D12": { "rows": 2, "cols": 1, "data": [0, 1] },"#, "");
        let err = parse_problem(&text).unwrap_err();
        match err {
            Error::Parse { message, .. } => assert!(message.contains("D12"), "{message}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_matrix_reports_position() {
        let text = DI.replace("[0, 1, 0, 0]", "[0, 1, 0]");
        match parse_problem(&text).unwrap_err() {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 4);
                assert!(message.contains("3 entries"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_matrix_is_rejected() {
        let text = DI.replace(
            r#""C":   { "rows": 2, "cols": 2, "data": [1, 0, 0, 1] }"#,
            r#""C":   { "rows": 2, "cols": 2, "data": [1, 0, 0, 1] }, "A": { "rows": 2, "cols": 2, "data": [0, 1, 0, 0] }"#,
        );
        match parse_problem(&text).unwrap_err() {
            Error::Parse { message, .. } => assert!(message.contains("duplicate"), "{message}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shape_disagreeing_with_dims() {
        let text = DI.replace(
            r#""B":   { "rows": 2, "cols": 1, "data": [0, 1] }"#,
            r#""B":   { "rows": 2, "cols": 2, "data": [0, 1, 0, 0] }"#,
        );
        assert!(matches!(
            parse_problem(&text),
            Err(Error::DimensionMismatch { matrix: "B", .. })
        ));
    }

    #[test]
    fn write_then_parse_is_exact() {
        let mut p = parse_problem(DI).unwrap();
        p.a[(1, 0)] = 0.1 + 0.2;
        p.b1[(0, 0)] = -1.0e-300;
        p.c[(1, 1)] = std::f64::consts::PI;
        let text = write_problem(&p);
        assert!(text.contains("3.141592653589793e0"));
        assert_eq!(parse_problem(&text).unwrap(), p);
    }

    #[test]
    fn inline_gains() {
        let g = parse_gain_inline("-1, -2").unwrap();
        assert_eq!(g.0.shape(), (1, 2));
        assert_eq!(g.0[(0, 1)], -2.0);
        let g = parse_gain_inline("1 2; 3 4").unwrap();
        assert_eq!(g.0[(1, 0)], 3.0);
        assert!(parse_gain_inline("1 2; 3").is_err());
        assert!(parse_gain_inline("").is_err());
        assert!(parse_gain_inline("x").is_err());
        assert!(parse_gain_inline("inf").is_err());
    }

    #[test]
    fn gain_json() {
        let g = parse_gain_json(r#"{"rows":1,"cols":2,"data":[-1,-2]}"#).unwrap();
        assert_eq!(g.0, DMatrix::from_row_slice(1, 2, &[-1.0, -2.0]));
        assert!(parse_gain_json(r#"{"rows":1,"cols":2,"data":[-1]}"#).is_err());
    }
}
