//! Serde adapters for dense matrices: shape plus column-major values.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
struct Dense {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

pub(crate) mod mat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        Dense { rows: m.nrows(), cols: m.ncols(), data: m.as_slice().to_vec() }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let dense = Dense::deserialize(d)?;
        if dense.rows.checked_mul(dense.cols) != Some(dense.data.len()) {
            return Err(D::Error::custom("matrix shape does not match its data length"));
        }
        Ok(DMatrix::from_vec(dense.rows, dense.cols, dense.data))
    }
}

pub(crate) mod vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}
