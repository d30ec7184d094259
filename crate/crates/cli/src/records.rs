//! Result records and their CSV / JSON encodings.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value as Json};

use crate::config::Format;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(i64),
    Text(String),
    Missing,
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<u32> for Value {
    fn from(x: u32) -> Self {
        Value::Int(x.into())
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as i64)
    }
}

impl From<bool> for Value {
    fn from(x: bool) -> Self {
        Value::Text(x.to_string())
    }
}

impl From<&str> for Value {
    fn from(x: &str) -> Self {
        Value::Text(x.to_string())
    }
}

impl From<String> for Value {
    fn from(x: String) -> Self {
        Value::Text(x)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(x: Option<T>) -> Self {
        x.map_or(Value::Missing, Into::into)
    }
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn csv_field(&self) -> String {
        match self {
            Value::Num(x) => format_sig(*x, 12),
            Value::Int(i) => i.to_string(),
            Value::Text(s) => s.clone(),
            Value::Missing => String::new(),
        }
    }

    fn to_json(&self) -> Json {
        match self {
            Value::Num(x) => json!(x),
            Value::Int(i) => json!(i),
            Value::Text(s) => json!(s),
            Value::Missing => Json::Null,
        }
    }
}

/// `x` with `digits` significant digits, in the style of C's `%.{digits}g`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Record {
    /// Echoed inputs, emitted in alphabetical order.
    pub inputs: BTreeMap<String, Value>,
    /// Outputs in insertion order.
    pub outputs: Vec<(String, Value)>,
    pub notes: Vec<String>,
    /// Seconds spent; JSON only, so CSV stays reproducible.
    pub wall_time: f64,
}

impl Record {
    pub fn input(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.inputs.insert(key.to_string(), value.into());
        self
    }

    pub fn output(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        let value = value.into();
        match self.outputs.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.outputs.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.inputs
            .get(key)
            .or_else(|| self.outputs.iter().find(|(k, _)| k == key).map(|(_, v)| v))
    }

    pub fn num(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(Value::as_f64)
    }
}

/// Column layout shared by a set of records: the union of input keys in
/// alphabetical order, then outputs in order of first appearance, then notes.
fn columns(records: &[Record]) -> (Vec<String>, Vec<String>) {
    let mut inputs: Vec<String> = records
        .iter()
        .flat_map(|r| r.inputs.keys().cloned())
        .collect();
    inputs.sort();
    inputs.dedup();
    let mut outputs: Vec<String> = Vec::new();
    for r in records {
        for (k, _) in &r.outputs {
            if !outputs.contains(k) {
                outputs.push(k.clone());
            }
        }
    }
    (inputs, outputs)
}

pub fn to_csv(records: &[Record]) -> Result<String> {
    let (inputs, outputs) = columns(records);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let header = inputs
        .iter()
        .chain(&outputs)
        .map(String::as_str)
        .chain(std::iter::once("notes"));
    w.write_record(header).map_err(csv_error)?;
    for r in records {
        let mut row: Vec<String> = inputs
            .iter()
            .map(|k| r.inputs.get(k).map_or_else(String::new, Value::csv_field))
            .collect();
        row.extend(outputs.iter().map(|k| {
            r.outputs
                .iter()
                .find(|(name, _)| name == k)
                .map_or_else(String::new, |(_, v)| v.csv_field())
        }));
        row.push(r.notes.join("; "));
        w.write_record(&row).map_err(csv_error)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::config(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::config(e.to_string()))
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::config(format!("csv encoding: {e}"))
}

pub fn record_json(r: &Record) -> Json {
    let inputs: Map<String, Json> = r
        .inputs
        .iter()
        .map(|(k, v)| (k.clone(), v.to_json()))
        .collect();
    let outputs: Map<String, Json> = r
        .outputs
        .iter()
        .map(|(k, v)| (k.clone(), v.to_json()))
        .collect();
    json!({
        "inputs": inputs,
        "outputs": outputs,
        "notes": r.notes,
        "wall_time_s": r.wall_time,
    })
}

pub fn to_json(records: &[Record]) -> String {
    let list: Vec<Json> = records.iter().map(record_json).collect();
    let mut s = serde_json::to_string_pretty(&list).expect("records serialize");
    s.push('\n');
    s
}

pub fn encode(records: &[Record], format: Format) -> Result<String> {
    match format {
        Format::Csv => to_csv(records),
        Format::Json => Ok(to_json(records)),
    }
}
