//! Dense linear algebra shared by every stage of the pipeline.
//!
//! Everything here is a pure function of its inputs. Matrices are
//! [`nalgebra::DMatrix<f64>`]; subspaces are carried around as [`Basis`]
//! values holding an orthonormal column matrix.

use nalgebra::DMatrix;

use crate::error::{invalid, mismatch, HnnError, Result};

pub type Matrix = DMatrix<f64>;

static SEQUENTIAL: std::sync::Once = std::sync::Once::new();

/// Relative singular-value cutoff (against the largest singular value) used
/// wherever a numerical rank is needed.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Two directions are considered shared when `1 - cos(angle) <= angle_tol`.
pub const DEFAULT_ANGLE_TOL: f64 = 1e-6;

/// Thin singular value decomposition `a = u * diag(s) * vt`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `n x m` with orthonormal columns, `m = min(n, p)`.
    pub u: Matrix,
    /// Descending, nonnegative.
    pub s: Vec<f64>,
    /// `m x p` with orthonormal rows.
    pub vt: Matrix,
}

impl Svd {
    pub fn rank(&self, rank_tol: f64) -> usize {
        let Some(&top) = self.s.first() else {
            return 0;
        };
        if top <= 0.0 {
            return 0;
        }
        self.s.iter().take_while(|&&s| s > rank_tol * top).count()
    }

    /// `sum_i f(s_i) u_i v_i^T` over the leading `k` triplets.
    fn recompose_with(&self, k: usize, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.u.nrows();
        let p = self.vt.ncols();
        if k == 0 {
            return Matrix::zeros(n, p);
        }
        let mut left = self.u.columns(0, k).into_owned();
        for (j, mut col) in left.column_iter_mut().enumerate() {
            col *= f(self.s[j]);
        }
        left * self.vt.rows(0, k)
    }
}

/// Orthonormal basis of a subspace of `R^n`. A basis with zero columns
/// represents the trivial subspace `{0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    matrix: Matrix,
}

impl Basis {
    pub fn empty(n: usize) -> Self {
        Basis {
            matrix: Matrix::zeros(n, 0),
        }
    }

    /// Wraps a matrix whose columns are already orthonormal. Not checked.
    pub fn from_orthonormal(matrix: Matrix) -> Self {
        Basis { matrix }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }

    /// `P = B B^T`.
    pub fn projector(&self) -> Matrix {
        &self.matrix * self.matrix.transpose()
    }
}

pub fn check_finite(a: &Matrix, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(HnnError::NonFinite(what.to_string()))
    }
}

/// Full thin SVD with singular values sorted in descending order.
pub fn svd(a: &Matrix) -> Result<Svd> {
    let (n, p) = a.shape();
    let m = n.min(p);
    if m == 0 {
        return Ok(Svd {
            u: Matrix::zeros(n, 0),
            s: Vec::new(),
            vt: Matrix::zeros(0, p),
        });
    }
    check_finite(a, "SVD input")?;
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
    let fa = faer::Mat::<f64>::from_fn(n, p, |i, j| a[(i, j)]);
    let dec = fa
        .thin_svd()
        .map_err(|_| HnnError::SvdNoConvergence { rows: n, cols: p })?;
    let (fu, fs, fv) = (dec.U(), dec.S().column_vector(), dec.V());
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| fs[j].total_cmp(&fs[i]));
    let s: Vec<f64> = order.iter().map(|&k| fs[k].max(0.0)).collect();
    if s.iter().any(|v| !v.is_finite()) {
        return Err(HnnError::SvdNoConvergence { rows: n, cols: p });
    }
    let u = Matrix::from_fn(n, m, |i, j| fu[(i, order[j])]);
    let vt = Matrix::from_fn(m, p, |i, j| fv[(j, order[i])]);
    Ok(Svd { u, s, vt })
}

pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    Ok(svd(a)?.s)
}

pub fn nuclear_norm(a: &Matrix) -> Result<f64> {
    Ok(singular_values(a)?.iter().sum())
}

pub fn numerical_rank(a: &Matrix, rank_tol: f64) -> Result<usize> {
    Ok(svd(a)?.rank(rank_tol))
}

/// Soft-thresholding of the singular values: `sum_i (s_i - cutoff)_+ u_i v_i^T`,
/// the proximal map of `cutoff * ||.||_*`.
pub fn soft_threshold_svd(x: &Matrix, cutoff: f64) -> Result<Matrix> {
    if !(cutoff >= 0.0) || !cutoff.is_finite() {
        return Err(invalid(format!("soft-threshold cutoff must be >= 0, got {cutoff}")));
    }
    let dec = svd(x)?;
    Ok(soft_threshold_decomposed(&dec, cutoff))
}

/// Soft-thresholding from an existing decomposition.
pub fn soft_threshold_decomposed(dec: &Svd, cutoff: f64) -> Matrix {
    let kept = dec.s.iter().take_while(|&&s| s > cutoff).count();
    dec.recompose_with(kept, |s| s - cutoff)
}

/// Column-wise concatenation `[a_1 a_2 ...]`.
pub fn hcat(blocks: &[&Matrix]) -> Result<Matrix> {
    let Some(first) = blocks.first() else {
        return Err(invalid("cannot concatenate zero blocks"));
    };
    let n = first.nrows();
    if blocks.iter().any(|b| b.nrows() != n) {
        return Err(mismatch("concatenated blocks must share the row count"));
    }
    let total: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(n, total);
    let mut offset = 0;
    for b in blocks {
        out.columns_mut(offset, b.ncols()).copy_from(b);
        offset += b.ncols();
    }
    Ok(out)
}

/// Orthonormal basis of the column space of `a`. The numerical rank counts
/// singular values above `rank_tol * s_1`.
pub fn column_basis(a: &Matrix, rank_tol: f64) -> Result<Basis> {
    if !(rank_tol > 0.0) {
        return Err(invalid(format!("rank_tol must be positive, got {rank_tol}")));
    }
    let dec = svd(a)?;
    let r = dec.rank(rank_tol);
    Ok(Basis::from_orthonormal(dec.u.columns(0, r).into_owned()))
}

/// Left singular directions of `a` whose singular value exceeds the
/// absolute threshold `cutoff`.
pub(crate) fn directions_above(a: &Matrix, cutoff: f64) -> Result<Basis> {
    let dec = svd(a)?;
    let r = dec.s.iter().take_while(|&&s| s > cutoff).count();
    Ok(Basis::from_orthonormal(dec.u.columns(0, r).into_owned()))
}

/// Smallest singular value of `P_perp B` (for orthonormal `B`) that still
/// counts as a direction outside the removed subspace. A singular value of
/// `P_perp B` is the sine of a principal angle, so this matches the
/// intersection rule `1 - cos <= angle_tol`.
pub(crate) fn sine_cutoff(angle_tol: f64) -> f64 {
    let c = (1.0 - angle_tol).max(0.0);
    (1.0 - c * c).max(0.0).sqrt()
}

/// Basis of `C(P_perp_removed * basis)`, the part of `basis` left after
/// removing `removed`.
pub fn residual_basis(basis: &Basis, removed: &Basis, angle_tol: f64) -> Result<Basis> {
    if basis.rows() != removed.rows() {
        return Err(mismatch("residual_basis: bases live in different spaces"));
    }
    if basis.is_empty() {
        return Ok(Basis::empty(basis.rows()));
    }
    if removed.is_empty() {
        return Ok(basis.clone());
    }
    let residual = project(removed, basis.matrix(), true)?;
    directions_above(&residual, sine_cutoff(angle_tol))
}

/// Basis of the sum `C_1 + ... + C_k`. Directions whose concatenated singular
/// value `sqrt(1 - cos)` falls at or below `sqrt(angle_tol)` are treated as
/// duplicates.
pub fn span_of(bases: &[&Basis], angle_tol: f64) -> Result<Basis> {
    let Some(first) = bases.first() else {
        return Err(invalid("span_of needs at least one basis"));
    };
    let n = first.rows();
    if bases.iter().any(|b| b.rows() != n) {
        return Err(mismatch("span_of: bases live in different spaces"));
    }
    let nonempty: Vec<&Matrix> = bases
        .iter()
        .filter(|b| !b.is_empty())
        .map(|b| b.matrix())
        .collect();
    match nonempty.len() {
        0 => Ok(Basis::empty(n)),
        1 => Ok(Basis::from_orthonormal(nonempty[0].clone())),
        _ => {
            let stacked = hcat(&nonempty)?;
            directions_above(&stacked, angle_tol.sqrt())
        }
    }
}

/// `P a` or `(I - P) a` with `P = B B^T`.
pub fn project(basis: &Basis, a: &Matrix, complement: bool) -> Result<Matrix> {
    if basis.rows() != a.nrows() {
        return Err(mismatch(format!(
            "projection basis has {} rows, matrix has {}",
            basis.rows(),
            a.nrows()
        )));
    }
    let b = basis.matrix();
    let onto = if basis.is_empty() {
        Matrix::zeros(a.nrows(), a.ncols())
    } else {
        b * (b.transpose() * a)
    };
    Ok(if complement { a - onto } else { onto })
}

/// Cosines of the principal angles between `C(a)` and `C(b)`, descending,
/// clamped to `[0, 1]`.
pub fn principal_angle_cosines(a: &Basis, b: &Basis) -> Result<Vec<f64>> {
    if a.rows() != b.rows() {
        return Err(mismatch("principal angles: bases live in different spaces"));
    }
    if a.is_empty() || b.is_empty() {
        return Err(invalid("principal angles need nonzero-dimensional subspaces"));
    }
    let cross = a.matrix().transpose() * b.matrix();
    let mut cos: Vec<f64> = svd(&cross)?.s.into_iter().map(|c| c.clamp(0.0, 1.0)).collect();
    cos.sort_by(|x, y| y.total_cmp(x));
    Ok(cos)
}

/// Basis of `C(a) ∩ C(b)`: the principal directions whose cosine exceeds
/// `1 - angle_tol`.
pub fn subspace_intersection(a: &Basis, b: &Basis, angle_tol: f64) -> Result<Basis> {
    if a.rows() != b.rows() {
        return Err(mismatch("intersection: bases live in different spaces"));
    }
    if a.is_empty() || b.is_empty() {
        return Ok(Basis::empty(a.rows()));
    }
    let cross = a.matrix().transpose() * b.matrix();
    let dec = svd(&cross)?;
    let k = dec.s.iter().take_while(|&&c| c > 1.0 - angle_tol).count();
    if k == 0 {
        return Ok(Basis::empty(a.rows()));
    }
    // Average the two representations of each shared direction, then
    // re-orthonormalize.
    let from_a = a.matrix() * dec.u.columns(0, k);
    let from_b = b.matrix() * dec.vt.rows(0, k).transpose();
    let mid = (from_a + from_b) * 0.5;
    let q = mid.qr().q();
    Ok(Basis::from_orthonormal(q.columns(0, k).into_owned()))
}

/// Moore-Penrose pseudoinverse; singular values at or below `rank_tol * s_1`
/// are treated as zero.
pub fn pseudo_inverse(a: &Matrix, rank_tol: f64) -> Result<Matrix> {
    let (n, p) = a.shape();
    let dec = svd(a)?;
    let r = dec.rank(rank_tol);
    if r == 0 {
        return Ok(Matrix::zeros(p, n));
    }
    let mut v = dec.vt.rows(0, r).transpose();
    for (j, mut col) in v.column_iter_mut().enumerate() {
        col /= dec.s[j];
    }
    Ok(v * dec.u.columns(0, r).transpose())
}

/// Median of the Marchenko-Pastur law with aspect ratio `beta = m / n <= 1`
/// and unit variance.
pub fn marchenko_pastur_median(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(invalid(format!("aspect ratio must lie in (0, 1], got {beta}")));
    }
    let sq = beta.sqrt();
    let center = 1.0 + beta;
    let half_width = 2.0 * sq;
    // x = center - half_width * cos(phi) turns the density into a smooth
    // integrand on [0, pi].
    let integrand = |phi: f64| {
        let s = phi.sin();
        let x = center - half_width * phi.cos();
        if x <= 0.0 {
            // only reachable at phi = 0 when beta = 1: limit of sin^2/x
            half_width * half_width / (2.0 * std::f64::consts::PI * beta)
        } else {
            half_width * half_width * s * s / (2.0 * std::f64::consts::PI * beta * x)
        }
    };
    let cdf = |phi: f64| simpson(&integrand, 0.0, phi, 2000);
    let (mut lo, mut hi) = (0.0_f64, std::f64::consts::PI);
    let to_x = |phi: f64| center - half_width * phi.cos();
    while to_x(hi) - to_x(lo) > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(to_x(0.5 * (lo + hi)))
}

pub(crate) fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

fn median(sorted_desc: &[f64]) -> f64 {
    let m = sorted_desc.len();
    if m % 2 == 1 {
        sorted_desc[m / 2]
    } else {
        0.5 * (sorted_desc[m / 2 - 1] + sorted_desc[m / 2])
    }
}

/// Noise standard deviation from the median singular value:
/// `s_med / sqrt(max(n, p) * mu_beta)` with `mu_beta` the Marchenko-Pastur
/// median at `beta = min(n, p) / max(n, p)`.
pub fn estimate_noise_mad(x: &Matrix) -> Result<f64> {
    let (n, p) = x.shape();
    if n.min(p) < 2 {
        return Err(invalid(format!("noise estimate needs at least 2x2 input, got {n}x{p}")));
    }
    let s = singular_values(x)?;
    let big = n.max(p) as f64;
    let beta = n.min(p) as f64 / big;
    let mu = marchenko_pastur_median(beta)?;
    Ok(median(&s) / (big * mu).sqrt())
}
