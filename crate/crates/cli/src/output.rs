//! Output formatting: every invocation emits one record, as JSON
//! (`schema_version` "1") or as a CSV table whose rows echo their inputs.
//! All floating-point values are rounded to 12 significant digits before
//! serialization, so the two formats carry identical numbers and repeated
//! runs are byte-stable.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "json" => Some(Format::Json),
            "csv" => Some(Format::Csv),
            _ => None,
        }
    }
}

#[derive(Serialize)]
pub struct OutputRecord<I: Serialize, R: Serialize> {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub inputs: I,
    pub results: R,
}

impl<I: Serialize, R: Serialize> OutputRecord<I, R> {
    pub fn new(command: &'static str, inputs: I, results: R) -> Self {
        Self {
            schema_version: "1",
            command,
            inputs,
            results,
        }
    }

    pub fn print_json(&self) {
        println!("{}", serde_json::to_string_pretty(self).expect("record serializes"));
    }
}

/// Rounds to 12 significant digits; the common value every emitted copy of
/// a number is derived from.
pub fn sig12(value: f64) -> f64 {
    if value == 0.0 || !value.is_finite() {
        return value;
    }
    format!("{value:.11e}").parse().expect("rounded float parses")
}

/// CSV cell for an f64 that has already been rounded with [`sig12`].
pub fn cell(value: f64) -> String {
    format!("{value}")
}

pub fn optional_cell<T: ToString>(value: Option<T>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

pub fn print_csv(header: &[&str], rows: &[Vec<String>]) {
    println!("{}", header.join(","));
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        println!("{}", row.join(","));
    }
}
