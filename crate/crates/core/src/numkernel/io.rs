//! Matrix files: plain CSV (one row per line) and the JSON form
//! `{"rows":n,"cols":m,"data":[...]}` with row-major data. Values are written
//! with 17 significant digits so that reading them back is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Mat;
use crate::error::{Error, Result};

/// 17 significant digits in scientific notation.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))
}

pub fn matrix_to_csv(m: &Mat) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_f64(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<Mat> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(parse_f64)
            .collect::<Result<Vec<f64>>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!(
                    "line {}: expected {} columns, found {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty matrix".into()));
    }
    let (n, m) = (rows.len(), rows[0].len());
    Ok(Mat::from_fn(n, m, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&Mat> for MatrixJson {
    fn from(m: &Mat) -> Self {
        let data = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)])
            .collect();
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

impl TryFrom<MatrixJson> for Mat {
    type Error = Error;

    fn try_from(mj: MatrixJson) -> Result<Mat> {
        if mj.data.len() != mj.rows * mj.cols {
            return Err(Error::Parse(format!(
                "matrix declares {}x{} but has {} entries",
                mj.rows,
                mj.cols,
                mj.data.len()
            )));
        }
        Ok(Mat::from_row_slice(mj.rows, mj.cols, &mj.data))
    }
}

pub fn matrix_to_json(m: &Mat) -> String {
    let data: Vec<String> = MatrixJson::from(m).data.into_iter().map(format_f64).collect();
    format!(
        "{{\"rows\":{},\"cols\":{},\"data\":[{}]}}\n",
        m.nrows(),
        m.ncols(),
        data.join(",")
    )
}

pub fn matrix_from_json(text: &str) -> Result<Mat> {
    let mj: MatrixJson =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("matrix json: {e}")))?;
    Mat::try_from(mj)
}

/// Reads a matrix file; `.json` selects the JSON form, anything else CSV.
pub fn read_matrix(path: &Path) -> Result<Mat> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if is_json(path) {
        matrix_from_json(&text)
    } else {
        matrix_from_csv(&text)
    }
}

pub fn write_matrix(path: &Path, m: &Mat) -> Result<()> {
    let text = if is_json(path) {
        matrix_to_json(m)
    } else {
        matrix_to_csv(m)
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Serde adapter storing a matrix in the JSON matrix form.
pub mod mat_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{Mat, MatrixJson};

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        MatrixJson::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
        let mj = MatrixJson::deserialize(d)?;
        Mat::try_from(mj).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_matrix() -> impl Strategy<Value = Mat> {
        (1usize..5, 1usize..5).prop_flat_map(|(r, c)| {
            proptest::collection::vec(
                prop_oneof![
                    any::<f64>().prop_filter("finite", |v| v.is_finite()),
                    -1e3..1e3f64
                ],
                r * c,
            )
            .prop_map(move |d| Mat::from_row_slice(r, c, &d))
        })
    }

    proptest! {
        #[test]
        fn csv_and_json_are_bit_exact(m in arb_matrix()) {
            let csv = matrix_from_csv(&matrix_to_csv(&m)).unwrap();
            let json = matrix_from_json(&matrix_to_json(&m)).unwrap();
            for (x, y) in m.iter().zip(csv.iter()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
            for (x, y) in m.iter().zip(json.iter()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(format_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(format_f64(-2.0), "-2.0000000000000000e0");
    }

    #[test]
    fn ragged_csv_rejected() {
        assert!(matrix_from_csv("1,2\n3\n").is_err());
        assert!(matrix_from_csv("\n\n").is_err());
    }

    #[test]
    fn json_length_checked() {
        assert!(matrix_from_json(r#"{"rows":2,"cols":2,"data":[1,2,3]}"#).is_err());
        let m = matrix_from_json(r#"{"rows":2,"cols":1,"data":[1.5,-2]}"#).unwrap();
        assert_eq!(m[(1, 0)], -2.0);
    }
}
