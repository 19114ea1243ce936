//! JSON bodies whose numbers are always written in plain decimal notation.
//!
//! `serde_json` prints `1e-8` for small floats; clients comparing against
//! decimal strings (and some spreadsheet imports) mishandle that, so floats
//! are formatted with Rust's `Display`, which never uses an exponent.

use std::io;

use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use serde::Serialize;
use serde_json::ser::Formatter;

#[derive(Debug, Clone, Copy, Default)]
pub struct DecimalFormatter;

impl Formatter for DecimalFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.fract() == 0.0 && value.abs() < 1e15 {
            write!(writer, "{value:.1}")
        } else {
            write!(writer, "{value}")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn to_decimal_json<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, DecimalFormatter);
    value.serialize(&mut ser)?;
    Ok(out)
}

/// Response wrapper serializing with [`DecimalFormatter`].
pub struct DecimalJson<T>(pub StatusCode, pub T);

impl<T: Serialize> IntoResponse for DecimalJson<T> {
    fn into_response(self) -> Response {
        match to_decimal_json(&self.1) {
            Ok(body) => (self.0, [(header::CONTENT_TYPE, "application/json")], body).into_response(),
            Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_and_integral_floats() {
        let s = String::from_utf8(to_decimal_json(&serde_json::json!({"a": 1e-8, "b": 2.0, "c": 0.8})).unwrap()).unwrap();
        assert_eq!(s, r#"{"a":0.00000001,"b":2.0,"c":0.8}"#);
        let s = String::from_utf8(to_decimal_json(&[1.5e-12f64, f64::NAN]).unwrap()).unwrap();
        assert_eq!(s, "[0.0000000000015,null]");
    }
}
