//! Serde helpers writing complex numbers as `[re, im]`.

use num_complex::Complex64 as C;
use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;

pub fn one<S: Serializer>(z: &C, s: S) -> Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

pub fn many<S: Serializer, const N: usize>(zs: &[C; N], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(N))?;
    for z in zs {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}
