use crate::embedding::{tag_of, EmbeddingSet, Mat};
use crate::error::{Error, Result};

/// Concatenation `[v1, alpha * v2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CatCombiner {
    pub alpha: f64,
}

impl CatCombiner {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(CatCombiner { alpha })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(alloc::format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

pub fn cat_combine(v1: &EmbeddingSet, v2: &EmbeddingSet, alpha: f64) -> Result<EmbeddingSet> {
    check_alpha(alpha)?;
    v2.require_rows(v1.n(), "cat_combine row count")?;
    let (d1, d2) = (v1.dim(), v2.dim());
    let a = v1.vectors();
    let b = v2.vectors();
    let out = Mat::from_fn(v1.n(), d1 + d2, |i, j| {
        if j < d1 {
            a[(i, j)]
        } else {
            alpha * b[(i, j - d1)]
        }
    });
    EmbeddingSet::new(out, tag_of(v1, v2, "cat"))
}

/// Inverse of `cat_combine`: splits off the first `d1` columns and undoes
/// the `alpha` scaling on the rest.
pub fn split_cat(v: &EmbeddingSet, d1: usize, alpha: f64) -> Result<(EmbeddingSet, EmbeddingSet)> {
    check_alpha(alpha)?;
    if d1 == 0 || d1 >= v.dim() {
        return Err(Error::invalid(alloc::format!("cannot split {} columns at {d1}", v.dim())));
    }
    let m = v.vectors();
    let a = m.columns(0, d1).into_owned();
    let b = m.columns(d1, v.dim() - d1).into_owned() / alpha;
    Ok((EmbeddingSet::new(a, "view1")?, EmbeddingSet::new(b, "view2")?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn set(rows: &[&[f64]]) -> EmbeddingSet {
        EmbeddingSet::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<alloc::vec::Vec<_>>(), "t").unwrap()
    }

    #[test]
    fn concatenation_examples() {
        let v1 = set(&[&[1.0, 2.0]]);
        let v2 = set(&[&[3.0]]);
        assert_eq!(cat_combine(&v1, &v2, 1.0).unwrap().row(0), vec![1.0, 2.0, 3.0]);
        assert_eq!(cat_combine(&v1, &v2, 0.5).unwrap().row(0), vec![1.0, 2.0, 1.5]);
    }

    #[test]
    fn zero_alpha_rejected() {
        let v1 = set(&[&[1.0, 2.0]]);
        let v2 = set(&[&[3.0]]);
        let err = cat_combine(&v1, &v2, 0.0).unwrap_err();
        assert!(alloc::format!("{err}").contains("alpha must be positive"));
    }

    #[test]
    fn row_mismatch_rejected() {
        let v1 = set(&[&[1.0], &[2.0]]);
        let v2 = set(&[&[3.0]]);
        assert!(matches!(cat_combine(&v1, &v2, 1.0), Err(Error::DimensionMismatch { .. })));
    }

    proptest! {
        #[test]
        fn split_recovers_inputs(
            rows in 1usize..6,
            d1 in 1usize..4,
            d2 in 1usize..4,
            vals in proptest::collection::vec(-1e3f64..1e3, 48),
        ) {
            let a = Mat::from_fn(rows, d1, |i, j| vals[i * d1 + j]);
            let b = Mat::from_fn(rows, d2, |i, j| vals[24 + i * d2 + j]);
            let v1 = EmbeddingSet::new(a.clone(), "a").unwrap();
            let v2 = EmbeddingSet::new(b.clone(), "b").unwrap();
            let c = cat_combine(&v1, &v2, 1.0).unwrap();
            let (x, y) = split_cat(&c, d1, 1.0).unwrap();
            prop_assert_eq!(x.vectors(), &a);
            prop_assert_eq!(y.vectors(), &b);
        }
    }
}
