//! The fixed CSV row schema and JSON number formatting.

use std::io::{self, Write};

use serde_json::Value;

pub const COLUMNS: [&str; 14] = [
    "x",
    "v",
    "n",
    "b",
    "y",
    "bound_name",
    "log_value",
    "value",
    "branch",
    "p_hat",
    "ci_low",
    "ci_high",
    "verdict",
    "seed",
];

/// One output record; absent fields are written as empty cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Row {
    pub x: Option<f64>,
    pub v: Option<f64>,
    pub n: Option<u64>,
    pub b: Option<f64>,
    pub y: Option<f64>,
    pub bound_name: String,
    pub log_value: Option<f64>,
    pub value: Option<f64>,
    pub branch: Option<String>,
    pub p_hat: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub verdict: Option<String>,
    pub seed: Option<u64>,
}

/// 17 significant digits, enough to round-trip any `f64`. Negative zero prints as zero.
pub fn format_float(value: f64) -> String {
    if value == 0.0 {
        "0.0000000000000000e0".into()
    } else if value.is_nan() {
        "nan".into()
    } else if value == f64::INFINITY {
        "inf".into()
    } else if value == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{value:.16e}")
    }
}

fn cell_f(value: Option<f64>) -> String {
    value.map(format_float).unwrap_or_default()
}

fn cell_u(value: Option<u64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

impl Row {
    pub fn cells(&self) -> [String; 14] {
        [
            cell_f(self.x),
            cell_f(self.v),
            cell_u(self.n),
            cell_f(self.b),
            cell_f(self.y),
            self.bound_name.clone(),
            cell_f(self.log_value),
            cell_f(self.value),
            self.branch.clone().unwrap_or_default(),
            cell_f(self.p_hat),
            cell_f(self.ci_low),
            cell_f(self.ci_high),
            self.verdict.clone().unwrap_or_default(),
            cell_u(self.seed),
        ]
    }

    pub fn to_json(&self) -> Value {
        let f = |v: Option<f64>| v.map_or(Value::Null, number);
        let u = |v: Option<u64>| v.map_or(Value::Null, Value::from);
        let s = |v: &Option<String>| v.clone().map_or(Value::Null, Value::from);
        let mut map = serde_json::Map::new();
        map.insert("x".into(), f(self.x));
        map.insert("v".into(), f(self.v));
        map.insert("n".into(), u(self.n));
        map.insert("b".into(), f(self.b));
        map.insert("y".into(), f(self.y));
        map.insert("bound_name".into(), Value::from(self.bound_name.clone()));
        map.insert("log_value".into(), f(self.log_value));
        map.insert("value".into(), f(self.value));
        map.insert("branch".into(), s(&self.branch));
        map.insert("p_hat".into(), f(self.p_hat));
        map.insert("ci_low".into(), f(self.ci_low));
        map.insert("ci_high".into(), f(self.ci_high));
        map.insert("verdict".into(), s(&self.verdict));
        map.insert("seed".into(), u(self.seed));
        Value::Object(map)
    }
}

/// JSON has no infinities; non-finite values become `null`.
pub fn number(value: f64) -> Value {
    let value = if value == 0.0 { 0.0 } else { value };
    serde_json::Number::from_f64(value).map_or(Value::Null, Value::Number)
}

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> io::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(COLUMNS)?;
    for row in rows {
        writer.write_record(row.cells())?;
    }
    writer.flush()
}

pub fn write_json<W: Write>(value: &Value, mut out: W) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2f64.powf(-2.0 / 3.0), 1e-300, -7.25e12] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_float(f64::NEG_INFINITY), "-inf");
        assert_eq!(format_float(-0.0), format_float(0.0));
        assert_eq!(number(-0.0).to_string(), "0.0");
    }

    #[test]
    fn empty_fields_keep_their_columns() {
        let mut buf = Vec::new();
        let row = Row {
            bound_name: "H_n".into(),
            n: Some(2),
            ..Row::default()
        };
        write_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), ",,2,,,H_n,,,,,,,,");
    }

    #[test]
    fn json_rows_use_null_for_missing_and_infinite() {
        let row = Row {
            log_value: Some(f64::NEG_INFINITY),
            value: Some(0.0),
            ..Row::default()
        };
        let j = row.to_json();
        assert_eq!(j["log_value"], Value::Null);
        assert_eq!(j["value"], serde_json::json!(0.0));
        assert_eq!(j["seed"], Value::Null);
        assert_eq!(j.as_object().unwrap().len(), 14);
    }
}
