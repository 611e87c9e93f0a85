//! Base64 packing of little-endian `f64` arrays shared by every file format.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;

use crate::error::{Error, Result};

pub fn encode_f64(values: impl IntoIterator<Item = f64>) -> String {
    let bytes: Vec<u8> = values.into_iter().flat_map(f64::to_le_bytes).collect();
    STANDARD.encode(bytes)
}

/// Decodes a blob written by [`encode_f64`]. `field` names the JSON field in errors.
pub fn decode_f64(field: &str, blob: &str, expected_len: usize) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(blob)
        .map_err(|e| Error::parse(field, e.to_string()))?;
    if bytes.len() != expected_len * 8 {
        return Err(Error::parse(
            field,
            format!(
                "expected {} values ({} bytes), found {} bytes",
                expected_len,
                expected_len * 8,
                bytes.len()
            ),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(values in proptest::collection::vec(any::<f64>(), 0..64)) {
            let blob = encode_f64(values.iter().copied());
            let back = decode_f64("values", &blob, values.len()).unwrap();
            let a: Vec<u64> = values.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn wrong_length_names_field() {
        let blob = encode_f64([1.0, 2.0]);
        let err = decode_f64("weights", &blob, 3).unwrap_err();
        assert!(err.to_string().contains("weights"));
    }

    #[test]
    fn garbage_is_a_parse_error() {
        assert!(matches!(
            decode_f64("values", "@@not base64@@", 1),
            Err(Error::Parse { .. })
        ));
    }
}
