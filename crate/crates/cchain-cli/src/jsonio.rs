//! JSON and CSV emission with round-trip-exact floats: every f64 is
//! written with 17 significant digits.

use serde::Serialize;
use std::io::{self, Write};

struct Sci17;

impl serde_json::ser::Formatter for Sci17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        debug_assert!(value.is_finite(), "non-finite float in JSON output");
        write!(writer, "{value:.16e}")
    }
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sci17);
    value.serialize(&mut ser).expect("report serialization");
    out.push(b'\n');
    out
}

pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}
