//! Row schema and CSV/JSON emission.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::CliError;
use crate::settings::{Format, Settings};

pub const COLUMNS: [&str; 11] =
    ["L_km", "N_source", "lambda_opt", "p_x_opt", "eps_bar", "eps_pe", "eps_pa", "e_pdc", "p11", "key_bits", "rate"];

/// One result row. Empty cells (`None`) mark quantities that do not apply or,
/// for `key_bits` and `rate`, an infeasible point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
#[allow(non_snake_case)]
pub struct Row {
    pub L_km: f64,
    pub N_source: Option<u64>,
    pub lambda_opt: Option<f64>,
    pub p_x_opt: Option<f64>,
    pub eps_bar: Option<f64>,
    pub eps_pe: Option<f64>,
    pub eps_pa: Option<f64>,
    pub e_pdc: Option<f64>,
    pub p11: Option<f64>,
    pub key_bits: Option<f64>,
    pub rate: Option<f64>,
}

/// 17 significant digits, enough to read back the same double.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl Row {
    pub fn feasible(&self) -> bool {
        self.rate.is_some()
    }

    pub fn cell(&self, column: &str) -> Option<String> {
        let f = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        Some(match column {
            "L_km" => fmt_f64(self.L_km),
            "N_source" => self.N_source.map(|n| n.to_string()).unwrap_or_default(),
            "lambda_opt" => f(self.lambda_opt),
            "p_x_opt" => f(self.p_x_opt),
            "eps_bar" => f(self.eps_bar),
            "eps_pe" => f(self.eps_pe),
            "eps_pa" => f(self.eps_pa),
            "e_pdc" => f(self.e_pdc),
            "p11" => f(self.p11),
            "key_bits" => f(self.key_bits),
            "rate" => f(self.rate),
            _ => return None,
        })
    }
}

/// Checks a user column selection against the schema.
pub fn select_columns(spec: Option<&str>) -> Result<Vec<&'static str>, CliError> {
    let Some(spec) = spec else {
        return Ok(COLUMNS.to_vec());
    };
    spec.split(',')
        .map(|c| {
            let c = c.trim();
            COLUMNS.iter().find(|k| **k == c).copied().ok_or_else(|| CliError::Usage(format!("unknown column `{c}`")))
        })
        .collect()
}

/// Header lines shared by all table outputs; they double as a config file.
pub fn header_lines(command: &str, settings: &Settings, extra: &[(&str, String)]) -> Vec<String> {
    let mut lines = vec![format!("sixstate {} {command}", env!("CARGO_PKG_VERSION"))];
    lines.extend(settings.pairs().into_iter().map(|(k, v)| format!("{k} = {v}")));
    lines.extend(extra.iter().map(|(k, v)| format!("{k} = {v}")));
    lines
}

pub fn render_table(
    format: Format,
    header: &[String],
    columns: &[&str],
    rows: &[Row],
    extra_json: Option<serde_json::Value>,
) -> Result<String, CliError> {
    match format {
        Format::Csv => {
            let mut out = String::new();
            for line in header {
                let _ = writeln!(out, "# {line}");
            }
            let _ = writeln!(out, "{}", columns.join(","));
            for row in rows {
                let cells: Vec<String> = columns.iter().map(|c| row.cell(c).unwrap_or_default()).collect();
                let _ = writeln!(out, "{}", cells.join(","));
            }
            Ok(out)
        }
        Format::Json => {
            let rows: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    let full = serde_json::to_value(r)?;
                    let mut obj = serde_json::Map::new();
                    for c in columns {
                        obj.insert((*c).to_string(), full[*c].clone());
                    }
                    Ok(serde_json::Value::Object(obj))
                })
                .collect::<Result<_, serde_json::Error>>()?;
            let mut doc = serde_json::json!({ "header": header, "rows": rows });
            if let Some(extra) = extra_json {
                doc["details"] = extra;
            }
            let mut s = serde_json::to_string_pretty(&doc)?;
            s.push('\n');
            Ok(s)
        }
    }
}
