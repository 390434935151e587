//! JSON emission with 17 significant digits per float.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;

struct Digits17;

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn to_string<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Digits17);
    value.serialize(&mut ser).expect("in-memory JSON serialization");
    String::from_utf8(out).expect("JSON is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        let v = [0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0];
        let s = to_string(&v);
        assert!(s.starts_with("[1.0000000000000001e-1,"), "{s}");
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn non_finite_becomes_null() {
        assert_eq!(to_string(&[f64::NAN]), "[null]");
    }
}
