//! Exact enumeration, asymptotics and uniform random generation of maps on
//! surfaces with boundary whose faces have prescribed degrees.

pub mod exact_series;
pub mod tree_gf;
pub mod char_system;
pub mod maps;
pub mod surface;
pub mod scheme_constants;
pub mod asymptotics_enum;
pub mod sampler_limit;
pub mod verification;

use num_bigint::BigInt;
use num_traits::ToPrimitive;

/// Integers that fit in `i64` become JSON numbers, larger ones strings.
pub(crate) fn serialize_bigint<S: serde::Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
    match v.to_i64() {
        Some(x) => s.serialize_i64(x),
        None => s.serialize_str(&v.to_string()),
    }
}
