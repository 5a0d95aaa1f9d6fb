//! Deterministic report output: canonical JSON with sorted keys and
//! fixed-precision floats, and RFC-4180-style CSV grids.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::grid::GridFunction;
use crate::lattice::Lattice;

/// Serializes a JSON value canonically: object keys sorted, every float
/// printed with twelve significant digits, no insignificant whitespace
/// variation. Identical inputs produce byte-identical output.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, value: &Value, indent: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                let _ = write!(out, "{}", format_float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => {
            let _ = write!(out, "{}", Value::String(s.clone()));
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                write_value(out, item, indent + 1);
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            // canonical form sorts keys regardless of the map backend
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                let _ = write!(out, "{}: ", Value::String((*key).clone()));
                write_value(out, &map[*key], indent + 1);
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push('}');
        }
    }
}

/// Fixed 12-significant-digit scientific form, a valid JSON number.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0.0".to_string();
    }
    if !x.is_finite() {
        // not representable in JSON; make the failure visible but parseable
        return "null".to_string();
    }
    format!("{x:.11e}")
}

/// JSON value for a float, rounded to the canonical precision.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    serde_json::json!(rounded)
}

/// JSON pair {re, im} for a complex number.
pub fn complex(z: C64) -> Value {
    serde_json::json!({ "re": num(z.re), "im": num(z.im) })
}

/// Hex SHA-256 of the raw config text.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// JSON form of a grid function: the lattice header plus (t, x, re, im)
/// quadruples for the cells in the support, in sorted cell order.
pub fn grid_json(g: &GridFunction) -> Value {
    let lattice = g.lattice();
    let mut cells = Vec::new();
    for t in 0..lattice.n_t {
        for x in 0..lattice.n_x {
            let v = g.value(t, x);
            if v != C64::ZERO {
                cells.push(serde_json::json!([t, x, num(v.re), num(v.im)]));
            }
        }
    }
    serde_json::json!({ "lattice": lattice_json(lattice), "cells": cells })
}

/// JSON form of a Weyl sum: one entry per term with the coefficient and
/// the canonical on-shell data of the smearing as (re, im) pairs.
pub fn weyl_sum_json(a: &crate::algebra::WeylSum) -> Value {
    let terms: Vec<Value> = a
        .terms()
        .iter()
        .map(|(c, f)| {
            let data: Vec<Value> = f
                .data()
                .iter()
                .map(|v| serde_json::json!([num(v.re), num(v.im)]))
                .collect();
            serde_json::json!({
                "coeff_re": num(c.re),
                "coeff_im": num(c.im),
                "smearing": data,
            })
        })
        .collect();
    Value::Array(terms)
}

/// Writes a grid function as CSV rows (t, x, re, im) with a lattice
/// header line, listing only the cells in the support.
pub fn write_grid_csv(path: &Path, g: &GridFunction) -> Result<()> {
    let lattice = g.lattice();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# lattice n_t={} n_x={} dt={} dx={}",
        lattice.n_t,
        lattice.n_x,
        format_float(lattice.dt),
        format_float(lattice.dx)
    );
    out.push_str("t,x,re,im\n");
    for t in 0..lattice.n_t {
        for x in 0..lattice.n_x {
            let v = g.value(t, x);
            if v != C64::ZERO {
                let _ = writeln!(out, "{t},{x},{},{}", format_float(v.re), format_float(v.im));
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes generic CSV with a header row; every numeric cell uses the
/// canonical float form.
pub fn write_rows_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| format_float(*x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Assembles the standard report envelope.
#[allow(clippy::too_many_arguments)]
pub fn envelope(
    experiment: &str,
    hash: &str,
    seed: u64,
    inputs: Value,
    outputs: Value,
    residuals: Value,
    tolerances: Value,
    pass: bool,
) -> Value {
    serde_json::json!({
        "experiment": experiment,
        "config_hash": hash,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "inputs": inputs,
        "outputs": outputs,
        "residuals": residuals,
        "tolerances": tolerances,
        "pass": pass,
    })
}

/// Serializes a lattice for input echoing.
pub fn lattice_json(l: Lattice) -> Value {
    serde_json::json!({
        "n_t": l.n_t,
        "n_x": l.n_x,
        "dt": num(l.dt),
        "dx": num(l.dx),
    })
}
