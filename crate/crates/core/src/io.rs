//! JSON and CSV file formats.
//!
//! A measure file looks like
//!
//! ```json
//! { "space": {"labels": ["a", "b"], "dist": [[0, 1], [1, 0]]},
//!   "weights": ["1/2", "1/2"] }
//! ```
//!
//! where `space` may instead be `{"points": [[x, ...], ...], "metric": "l2" | "linf"}`
//! (optionally with `labels`). Weights are `"num/den"` strings so they
//! round-trip exactly. Distance matrices can also come from CSV with a
//! header row of labels.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, EmbeddedSpace, FiniteMetricSpace, Metric};
use crate::rational::{self, Rational};

fn field<'a>(v: &'a Value, key: &str, at: &str) -> Result<&'a Value> {
    v.get(key)
        .ok_or_else(|| Error::schema(at, format!("missing required field {key:?}")))
}

fn array<'a>(v: &'a Value, at: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| Error::schema(at, "expected an array"))
}

fn number(v: &Value, at: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::schema(at, "expected a number"))
}

fn matrix(v: &Value, at: &str) -> Result<Vec<Vec<f64>>> {
    array(v, at)?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let at = format!("{at}/{i}");
            array(row, &at)?
                .iter()
                .enumerate()
                .map(|(j, x)| number(x, &format!("{at}/{j}")))
                .collect()
        })
        .collect()
}

fn labels(v: &Value, at: &str) -> Result<Vec<String>> {
    array(v, at)?
        .iter()
        .enumerate()
        .map(|(i, l)| match l {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            _ => Err(Error::schema(format!("{at}/{i}"), "expected a string label")),
        })
        .collect()
}

/// Parses a space object found at JSON pointer `at`.
pub fn space_from_json(v: &Value, at: &str) -> Result<FiniteMetricSpace> {
    if !v.is_object() {
        return Err(Error::schema(at, "expected an object"));
    }
    if let Some(dist) = v.get("dist") {
        let dist = matrix(dist, &format!("{at}/dist"))?;
        let labels = match v.get("labels") {
            Some(l) => labels(l, &format!("{at}/labels"))?,
            None => (0..dist.len()).map(|i| i.to_string()).collect(),
        };
        return FiniteMetricSpace::new(labels, dist);
    }
    if let Some(points) = v.get("points") {
        let points = matrix(points, &format!("{at}/points"))?;
        let metric = match v.get("metric") {
            None => Metric::L2,
            Some(m) => m
                .as_str()
                .and_then(Metric::parse)
                .ok_or_else(|| Error::schema(format!("{at}/metric"), "expected \"l2\" or \"linf\""))?,
        };
        let space = EmbeddedSpace::new(points, metric)?.materialize()?;
        return match v.get("labels") {
            Some(l) => {
                FiniteMetricSpace::new_unchecked_triangle(labels(l, &format!("{at}/labels"))?, space.matrix())
            }
            None => Ok(space),
        };
    }
    Err(Error::schema(at, "space needs either \"dist\" or \"points\""))
}

pub fn space_to_json(space: &FiniteMetricSpace) -> Value {
    json!({ "labels": space.labels(), "dist": space.matrix() })
}

fn weight(v: &Value, at: &str) -> Result<Rational> {
    match v {
        Value::String(s) => rational::parse(s)
            .ok_or_else(|| Error::schema(at, format!("{s:?} is not a rational \"num/den\""))),
        Value::Number(n) if n.is_i64() => Ok(rational::int(n.as_i64().unwrap())),
        _ => Err(Error::schema(at, "expected a rational string such as \"1/3\"")),
    }
}

/// Parses a measure document; the space is shared if `space` is given.
pub fn measure_from_json(v: &Value, space: Option<&Arc<FiniteMetricSpace>>) -> Result<DiscreteMeasure> {
    let parsed = Arc::new(space_from_json(field(v, "space", "")?, "/space")?);
    let space = match space {
        Some(s) if **s == *parsed => s.clone(),
        _ => parsed,
    };
    let weights: Vec<Rational> = array(field(v, "weights", "")?, "/weights")?
        .iter()
        .enumerate()
        .map(|(i, w)| weight(w, &format!("/weights/{i}")))
        .collect::<Result<_>>()?;
    if weights.len() != space.len() {
        return Err(Error::schema(
            "/weights",
            format!("expected {} weights, got {}", space.len(), weights.len()),
        ));
    }
    DiscreteMeasure::new(space, weights)
}

pub fn measure_to_json(mu: &DiscreteMeasure) -> Value {
    json!({
        "space": space_to_json(mu.space()),
        "weights": mu.weights().iter().map(rational::format).collect::<Vec<_>>(),
    })
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_measure(path: impl AsRef<Path>) -> Result<DiscreteMeasure> {
    measure_from_json(&read_json(path.as_ref())?, None)
}

/// Loads a measure reusing `space` when the file describes the same space.
pub fn load_measure_on(path: impl AsRef<Path>, space: &Arc<FiniteMetricSpace>) -> Result<DiscreteMeasure> {
    measure_from_json(&read_json(path.as_ref())?, Some(space))
}

pub fn save_measure(mu: &DiscreteMeasure, path: impl AsRef<Path>) -> Result<()> {
    write_json(path, &measure_to_json(mu))
}

/// A space from a `.csv` distance matrix, a bare space object, or the
/// `space` field of a measure file.
pub fn load_space(path: impl AsRef<Path>) -> Result<FiniteMetricSpace> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return load_distance_csv(path);
    }
    let v = read_json(path)?;
    match v.get("space") {
        Some(s) => space_from_json(s, "/space"),
        None => space_from_json(&v, ""),
    }
}

/// A square distance matrix with a header row of labels.
pub fn distance_csv_from_reader(reader: impl std::io::Read) -> Result<FiniteMetricSpace> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let labels: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut dist = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>().map_err(|_| {
                    Error::schema(
                        format!("row {}, column {}", i + 1, j + 1),
                        format!("{cell:?} is not a number"),
                    )
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        dist.push(row);
    }
    FiniteMetricSpace::new(labels, dist)
}

pub fn load_distance_csv(path: impl AsRef<Path>) -> Result<FiniteMetricSpace> {
    distance_csv_from_reader(fs::File::open(path)?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: impl AsRef<Path>, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn measure_round_trip() {
        let s = Arc::new(FiniteMetricSpace::line(&[0.0, 0.1, 2.5]).unwrap());
        let mu = DiscreteMeasure::new(s, vec![ratio(1, 3), ratio(1, 6), ratio(1, 2)]).unwrap();
        let back = measure_from_json(&measure_to_json(&mu), None).unwrap();
        assert_eq!(back, mu);
    }

    #[test]
    fn schema_errors_carry_pointers() {
        let v: Value =
            serde_json::from_str(r#"{"space": {"dist": [[0, 1], [1, "x"]]}, "weights": ["1/2", "1/2"]}"#)
                .unwrap();
        let e = measure_from_json(&v, None).unwrap_err().to_string();
        assert!(e.contains("/space/dist/1/1"), "{e}");
        let v: Value =
            serde_json::from_str(r#"{"space": {"dist": [[0, 1], [1, 0]]}, "weights": ["1/2", "bad"]}"#)
                .unwrap();
        let e = measure_from_json(&v, None).unwrap_err().to_string();
        assert!(e.contains("/weights/1"), "{e}");
        let v: Value =
            serde_json::from_str(r#"{"space": {"dist": [[0, 1], [1, 0]]}, "weights": ["1/2", "1/3"]}"#)
                .unwrap();
        let e = measure_from_json(&v, None).unwrap_err().to_string();
        assert!(e.contains("weights must sum to 1"), "{e}");
    }

    #[test]
    fn points_and_csv() {
        let v: Value = serde_json::from_str(r#"{"points": [[0, 0], [1, 2]], "metric": "linf"}"#).unwrap();
        let s = space_from_json(&v, "").unwrap();
        assert_eq!(s.d(0, 1), 2.0);
        let csv = "a,b,c\n0,1,2\n1,0,1\n2,1,0\n";
        let s = distance_csv_from_reader(csv.as_bytes()).unwrap();
        assert_eq!(s.labels(), &["a", "b", "c"]);
        assert_eq!(s.d(0, 2), 2.0);
    }
}
