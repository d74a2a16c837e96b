use ndarray::Array2;

use super::RetrievalError;

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>, RetrievalError> {
    let n = l2_norm(v);
    if n == 0.0 || !n.is_finite() {
        return Err(RetrievalError::ZeroVector);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Concatenation of the two unit-normalised vectors.
pub fn fuse(a: &[f64], b: &[f64]) -> Result<Vec<f64>, RetrievalError> {
    let mut out = l2_normalize(a)?;
    out.extend(l2_normalize(b)?);
    Ok(out)
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Pairwise Euclidean distances, queries × gallery.
pub fn distance_matrix<Q, G>(queries: &[Q], gallery: &[G]) -> Result<Array2<f64>, RetrievalError>
where
    Q: AsRef<[f64]>,
    G: AsRef<[f64]>,
{
    let dim = queries
        .first()
        .map(|q| q.as_ref().len())
        .or_else(|| gallery.first().map(|g| g.as_ref().len()))
        .unwrap_or(0);
    for v in queries.iter().map(AsRef::as_ref).chain(gallery.iter().map(AsRef::as_ref)) {
        if v.len() != dim {
            return Err(RetrievalError::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
    }
    Ok(Array2::from_shape_fn((queries.len(), gallery.len()), |(i, j)| {
        euclidean(queries[i].as_ref(), gallery[j].as_ref())
    }))
}
