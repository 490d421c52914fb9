//! JSON-friendly serializers: vectors as flat lists, matrices as row lists,
//! complex numbers as `{re, im}`.

use serde::ser::{SerializeSeq, SerializeStruct};
use serde::Serializer;

use crate::{Complex, Matrix, Vector};

pub fn vector<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

pub fn vectors<S: Serializer>(vs: &[Vector], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(vs.len()))?;
    for v in vs {
        seq.serialize_element(v.as_slice())?;
    }
    seq.end()
}

pub fn matrix<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    s.collect_seq(rows)
}

struct ComplexRef<'a>(&'a Complex);

impl serde::Serialize for ComplexRef<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Complex", 2)?;
        st.serialize_field("re", &self.0.re)?;
        st.serialize_field("im", &self.0.im)?;
        st.end()
    }
}

pub fn complexes<S: Serializer>(zs: &[Complex], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(zs.iter().map(ComplexRef))
}
