use nalgebra::DMatrix;

/// Singular values below `SVD_RELATIVE_CUTOFF · σ_max` are treated as zero.
pub const SVD_RELATIVE_CUTOFF: f64 = 1e-10;

/// Moore–Penrose pseudoinverse via the singular value decomposition.
pub fn pseudoinverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd computed with u");
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let sigma_max = svd.singular_values.max();
    let cutoff = SVD_RELATIVE_CUTOFF * sigma_max;

    let mut out = DMatrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += v_t.row(k).transpose() * u.column(k).transpose() / s;
        }
    }
    out
}

/// Orthonormal basis of the right nullspace of `m`, one vector per column.
///
/// The numerical rank uses the same relative cutoff as [`pseudoinverse`].
/// Each basis vector is sign-normalised so its largest entry is positive.
pub fn nullspace_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if rows == 0 || m.amax() == 0.0 {
        return DMatrix::identity(cols, cols);
    }
    // pad to at least square so the SVD returns the full right basis
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.rows_mut(0, rows).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let cutoff = SVD_RELATIVE_CUTOFF * svd.singular_values.max();

    let null_rows: Vec<usize> =
        svd.singular_values.iter().enumerate().filter(|(_, &s)| s <= cutoff).map(|(k, _)| k).collect();
    let mut basis = DMatrix::zeros(cols, null_rows.len());
    for (c, &k) in null_rows.iter().enumerate() {
        let mut v = v_t.row(k).transpose();
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v.neg_mut();
        }
        basis.set_column(c, &v);
    }
    basis
}
