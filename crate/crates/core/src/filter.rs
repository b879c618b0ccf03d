//! Filter update: cluster quadratic forms, the coefficient Gram matrix `S`,
//! candidate filters from its eigenvectors, and polynomial filtering in the
//! Laplacian eigenbasis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::clustering::Partition;
use crate::error::{Error, Result};
use crate::graph::{eig_sym, SpectralDecomposition};

/// Allowed deviation of `sum h_t^2` from one.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// Polynomial coefficients `h_0 .. h_{T-1}` of `H(lambda) = sum_t h_t lambda^t`,
/// kept at unit Euclidean norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FilterCoefficients(Vec<f64>);

impl FilterCoefficients {
    /// Accepts coefficients that already have unit norm.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::structural("filter needs at least one coefficient"));
        }
        let sq: f64 = coeffs.iter().map(|c| c * c).sum();
        if !sq.is_finite() || (sq - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::structural(format!(
                "filter coefficients must have unit norm, squared norm is {sq}"
            )));
        }
        Ok(Self(coeffs))
    }

    /// Rescales arbitrary nonzero coefficients to unit norm.
    pub fn normalized(coeffs: Vec<f64>) -> Result<Self> {
        let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::structural("cannot normalize a zero filter"));
        }
        Self::new(coeffs.into_iter().map(|c| c / norm).collect())
    }

    /// The all-pass filter `H(lambda) = 1` of order `t_order`.
    pub fn identity(t_order: usize) -> Self {
        let mut c = vec![0.0; t_order.max(1)];
        c[0] = 1.0;
        Self(c)
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|c| -c).collect())
    }

    /// `H(lambda)` by Horner's rule.
    pub fn response(&self, lambda: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &h| acc * lambda + h)
    }
}

impl TryFrom<Vec<f64>> for FilterCoefficients {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FilterCoefficients> for Vec<f64> {
    fn from(h: FilterCoefficients) -> Self {
        h.0
    }
}

/// Which diagonal to use for the inter-class matrix `C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CForm {
    /// `N/vol_c + sum_k |V_k|/vol_k - 2|V_c|/vol_c`: exactly reproduces the
    /// inter-class cut as `tr(F^T C F)`.
    #[default]
    Derived,
    /// `N/vol_c - sum_k |V_k|/vol_k - 2|V_c|/vol_c`.
    Literal,
}

/// Per-cluster bookkeeping shared by the dense and matrix-free forms of `B` and `C`.
struct Blocks<'a> {
    labels: &'a [usize],
    sizes: Vec<f64>,
    vols: &'a [f64],
    c_diag: Vec<f64>,
}

impl<'a> Blocks<'a> {
    fn new(part: &'a Partition, vols: &'a [f64], form: CForm) -> Result<Self> {
        if vols.len() != part.k() {
            return Err(Error::structural(format!(
                "{} volumes for {} clusters",
                vols.len(),
                part.k()
            )));
        }
        if let Some(v) = vols.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::structural(format!(
                "cluster volume {v} is not positive"
            )));
        }
        let sizes: Vec<f64> = part.sizes().into_iter().map(|s| s as f64).collect();
        let n = part.len() as f64;
        let kappa: f64 = sizes.iter().zip(vols).map(|(s, v)| s / v).sum();
        let sign = match form {
            CForm::Derived => 1.0,
            CForm::Literal => -1.0,
        };
        let c_diag = sizes
            .iter()
            .zip(vols)
            .map(|(s, v)| n / v + sign * kappa - 2.0 * s / v)
            .collect();
        Ok(Self {
            labels: part.labels(),
            sizes,
            vols,
            c_diag,
        })
    }

    fn k(&self) -> usize {
        self.vols.len()
    }
}

/// Dense intra-class matrix `B`: `(|V_c| - 1)/vol_c` on the diagonal,
/// `-1/vol_c` within a cluster, zero across clusters.
pub fn build_b(part: &Partition, vols: &[f64]) -> Result<DMatrix<f64>> {
    let b = Blocks::new(part, vols, CForm::Derived)?;
    let n = part.len();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let c = b.labels[i];
        if b.labels[j] != c {
            0.0
        } else if i == j {
            (b.sizes[c] - 1.0) / b.vols[c]
        } else {
            -1.0 / b.vols[c]
        }
    }))
}

/// Dense inter-class matrix `C`: zero within clusters off the diagonal and
/// `-(1/vol_c + 1/vol_b)` between clusters `c != b`.
pub fn build_c(part: &Partition, vols: &[f64], form: CForm) -> Result<DMatrix<f64>> {
    let b = Blocks::new(part, vols, form)?;
    let n = part.len();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let (ci, cj) = (b.labels[i], b.labels[j]);
        if i == j {
            b.c_diag[ci]
        } else if ci == cj {
            0.0
        } else {
            -(1.0 / b.vols[ci] + 1.0 / b.vols[cj])
        }
    }))
}

/// Matrix-free `(B - gamma C) x`, linear in the number of nodes per column.
pub fn apply_bc(
    part: &Partition,
    vols: &[f64],
    gamma: f64,
    x: &DMatrix<f64>,
    form: CForm,
) -> Result<DMatrix<f64>> {
    let b = Blocks::new(part, vols, form)?;
    apply_blocks(&b, gamma, gamma != 0.0, x)
}

fn apply_blocks(b: &Blocks, gamma: f64, with_c: bool, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = b.labels.len();
    if x.nrows() != n {
        return Err(Error::structural(format!(
            "operand has {} rows for {n} nodes",
            x.nrows()
        )));
    }
    let k = b.k();
    let mut out = DMatrix::zeros(n, x.ncols());
    let mut sums = vec![0.0; k];
    for (col, mut dst) in x.column_iter().zip(out.column_iter_mut()) {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (i, &c) in b.labels.iter().enumerate() {
            sums[c] += col[i];
        }
        let total: f64 = sums.iter().sum();
        let weighted: f64 = sums.iter().zip(b.vols).map(|(s, v)| s / v).sum();
        for (i, &c) in b.labels.iter().enumerate() {
            let xi = col[i];
            let bx = (b.sizes[c] * xi - sums[c]) / b.vols[c];
            let value = if with_c {
                let cross = (total - sums[c]) / b.vols[c] + (weighted - sums[c] / b.vols[c]);
                let cx = b.c_diag[c] * xi - cross;
                bx - gamma * cx
            } else {
                bx
            };
            dst[i] = value;
        }
    }
    Ok(out)
}

fn trace_form(x: &DMatrix<f64>, mx: &DMatrix<f64>) -> f64 {
    x.iter().zip(mx.iter()).map(|(a, b)| a * b).sum()
}

/// `(tr(F^T B F), tr(F^T C F))`.
pub fn quadratic_traces(
    attrs: &DMatrix<f64>,
    part: &Partition,
    vols: &[f64],
    form: CForm,
) -> Result<(f64, f64)> {
    let b = Blocks::new(part, vols, form)?;
    let bx = apply_blocks(&b, 0.0, false, attrs)?;
    // (B - C) x, so C x = B x - (B - C) x
    let bmc = apply_blocks(&b, 1.0, true, attrs)?;
    let tb = trace_form(attrs, &bx);
    let tc = tb - trace_form(attrs, &bmc);
    Ok((tb, tc))
}

/// Balance factor `tr(F^T B F) / tr(F^T C F)` putting association and cut on
/// the same scale.
pub fn select_gamma(
    attrs: &DMatrix<f64>,
    part: &Partition,
    vols: &[f64],
    form: CForm,
) -> Result<f64> {
    let (tb, tc) = quadratic_traces(attrs, part, vols, form)?;
    if !(tc > 0.0) {
        return Err(Error::degenerate(format!(
            "inter-class trace is {tc}; the partition has no cut to balance against"
        )));
    }
    Ok((tb / tc).max(0.0))
}

/// The node attributes expressed in a Laplacian eigenbasis, ready for
/// repeated polynomial filtering.
#[derive(Debug, Clone)]
pub struct FilterBank {
    spectrum: SpectralDecomposition,
    /// `U^T F`
    coords: DMatrix<f64>,
}

impl FilterBank {
    pub fn new(spectrum: SpectralDecomposition, attrs: &DMatrix<f64>) -> Result<Self> {
        if attrs.nrows() != spectrum.dim() {
            return Err(Error::structural(format!(
                "attributes have {} rows, spectrum has dimension {}",
                attrs.nrows(),
                spectrum.dim()
            )));
        }
        let coords = spectrum.eigenvectors.tr_mul(attrs);
        Ok(Self { spectrum, coords })
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    fn apply_diagonal(&self, diag: &DVector<f64>) -> DMatrix<f64> {
        let mut scaled = self.coords.clone();
        for (mut row, d) in scaled.row_iter_mut().zip(diag.iter()) {
            row *= *d;
        }
        &self.spectrum.eigenvectors * scaled
    }

    /// `U H(Lambda) U^T F`.
    pub fn filter(&self, h: &FilterCoefficients) -> DMatrix<f64> {
        let diag = self.spectrum.eigenvalues.map(|l| h.response(l));
        self.apply_diagonal(&diag)
    }

    /// `P_t = U Lambda^t U^T F` for `t = 0 .. t_order - 1`.
    pub fn powers(&self, t_order: usize) -> Vec<DMatrix<f64>> {
        let n = self.spectrum.dim();
        let mut lam_t = DVector::from_element(n, 1.0);
        let mut out = Vec::with_capacity(t_order);
        for t in 0..t_order {
            if t > 0 {
                lam_t.component_mul_assign(&self.spectrum.eigenvalues);
            }
            out.push(self.apply_diagonal(&lam_t));
        }
        out
    }

    /// `S_ij = tr(P_i^T (B - gamma C) P_j)`, symmetrized.
    pub fn s_matrix(
        &self,
        part: &Partition,
        vols: &[f64],
        gamma: f64,
        t_order: usize,
        form: CForm,
    ) -> Result<DMatrix<f64>> {
        if t_order == 0 {
            return Err(Error::structural("filter order must be at least 1"));
        }
        let blocks = Blocks::new(part, vols, form)?;
        let p = self.powers(t_order);
        let q = p
            .iter()
            .map(|pt| apply_blocks(&blocks, gamma, true, pt))
            .collect::<Result<Vec<_>>>()?;
        let mut s = DMatrix::zeros(t_order, t_order);
        for i in 0..t_order {
            for j in 0..t_order {
                s[(i, j)] = trace_form(&p[i], &q[j]);
            }
        }
        Ok((&s + s.transpose()) * 0.5)
    }
}

pub fn apply_filter(
    spectrum: &SpectralDecomposition,
    h: &FilterCoefficients,
    attrs: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    Ok(FilterBank::new(spectrum.clone(), attrs)?.filter(h))
}

pub fn build_s(
    spectrum: &SpectralDecomposition,
    attrs: &DMatrix<f64>,
    part: &Partition,
    vols: &[f64],
    gamma: f64,
    t_order: usize,
    form: CForm,
) -> Result<DMatrix<f64>> {
    FilterBank::new(spectrum.clone(), attrs)?.s_matrix(part, vols, gamma, t_order, form)
}

/// Eigenvectors of `S` as filters, ascending by eigenvalue.
#[derive(Debug, Clone)]
pub struct Candidates {
    pub filters: Vec<FilterCoefficients>,
    pub eigenvalues: Vec<f64>,
}

/// Each candidate's largest-magnitude coefficient is made positive; the sign
/// of a filter never changes squared distances between filtered rows.
pub fn candidate_filters(s: &DMatrix<f64>) -> Result<Candidates> {
    let evd = eig_sym(s)?;
    let filters = evd
        .eigenvectors
        .column_iter()
        .map(|col| {
            let mut v: Vec<f64> = col.iter().copied().collect();
            let pivot =
                v.iter().copied().fold(
                    0.0_f64,
                    |best, c| if c.abs() > best.abs() { c } else { best },
                );
            if pivot < 0.0 {
                v.iter_mut().for_each(|c| *c = -*c);
            }
            FilterCoefficients::normalized(v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Candidates {
        filters,
        eigenvalues: evd.eigenvalues.iter().copied().collect(),
    })
}

pub fn filter_response(h: &FilterCoefficients, grid: &[f64]) -> Vec<f64> {
    grid.iter().map(|&l| h.response(l)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalized_laplacian, Adjacency, AttributedGraph};

    fn part(labels: &[usize]) -> Partition {
        Partition::from_labels(labels.to_vec()).unwrap()
    }

    #[test]
    fn unit_norm_is_enforced() {
        assert!(FilterCoefficients::new(vec![1.0, 0.0]).is_ok());
        assert!(FilterCoefficients::new(vec![1.0, 1.0]).is_err());
        assert!(FilterCoefficients::new(vec![]).is_err());
        let h = FilterCoefficients::normalized(vec![3.0, 4.0]).unwrap();
        assert!((h.coeffs()[0] - 0.6).abs() < 1e-15);
        assert!(FilterCoefficients::normalized(vec![0.0, 0.0]).is_err());
        let parsed: Result<FilterCoefficients, _> = serde_json::from_str("[0.5, 0.5]");
        assert!(parsed.is_err());
    }

    #[test]
    fn b_for_one_pair_and_singletons() {
        let v = 3.0;
        let b = build_b(&part(&[0, 0]), &[v]).unwrap();
        assert_eq!(
            b,
            DMatrix::from_row_slice(2, 2, &[1. / v, -1. / v, -1. / v, 1. / v])
        );
        let b = build_b(&part(&[0, 1, 2]), &[1.0, 2.0, 3.0]).unwrap();
        assert!(b.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn c_cases() {
        let c = build_c(&part(&[0, 0, 0]), &[5.0], CForm::Derived).unwrap();
        assert!(c.iter().all(|&x| x == 0.0));
        let lit = build_c(&part(&[0, 0, 0]), &[5.0], CForm::Literal).unwrap();
        assert!(lit[(0, 0)] != 0.0);

        let (v1, v2) = (2.0, 5.0);
        let c = build_c(&part(&[0, 1]), &[v1, v2], CForm::Derived).unwrap();
        let s = 1.0 / v1 + 1.0 / v2;
        let want = DMatrix::from_row_slice(2, 2, &[s, -s, -s, s]);
        assert!((c - want).amax() < 1e-15);
    }

    #[test]
    fn apply_bc_small_cases() {
        let v = 4.0;
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let y = apply_bc(&part(&[0, 0]), &[v], 0.0, &x, CForm::Derived).unwrap();
        assert_eq!(y, DMatrix::from_column_slice(2, 1, &[1.0 / v, -1.0 / v]));

        let p = part(&[0, 1, 1, 0, 2]);
        let ones = DMatrix::from_element(5, 1, 1.0);
        let y = apply_bc(&p, &[1.0, 2.0, 3.0], 0.0, &ones, CForm::Derived).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn rejects_bad_volumes() {
        assert!(build_b(&part(&[0, 1]), &[1.0]).is_err());
        assert!(build_b(&part(&[0, 1]), &[1.0, 0.0]).is_err());
    }

    #[test]
    fn gamma_needs_a_cut() {
        let f = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0]);
        assert!(matches!(
            select_gamma(&f, &part(&[0, 0, 0]), &[4.0], CForm::Derived),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn gamma_balances_traces() {
        let f = DMatrix::from_row_slice(4, 2, &[0., 1., 1., 0., 3., 3., 2., 4.]);
        let p = part(&[0, 0, 1, 1]);
        let vols = [2.0, 3.0];
        let g = select_gamma(&f, &p, &vols, CForm::Derived).unwrap();
        let b = build_b(&p, &vols).unwrap();
        let c = build_c(&p, &vols, CForm::Derived).unwrap();
        let tb = (f.transpose() * b * &f).trace();
        let tc = (f.transpose() * c * &f).trace();
        assert!((tb - g * tc).abs() <= 1e-12 * tb.abs());
    }

    fn path_spectrum() -> SpectralDecomposition {
        let adj = Adjacency::from_edges(2, [(0, 1, 1.0)]).unwrap();
        let g = AttributedGraph::new(adj, DMatrix::zeros(2, 1), None).unwrap();
        eig_sym(&normalized_laplacian(&g)).unwrap()
    }

    #[test]
    fn identity_and_laplacian_filters() {
        let spec = path_spectrum();
        let f = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let same = apply_filter(&spec, &FilterCoefficients::identity(3), &f).unwrap();
        assert!((same - &f).amax() < 1e-14);
        let h = FilterCoefficients::new(vec![0.0, 1.0]).unwrap();
        let lf = apply_filter(&spec, &h, &f).unwrap();
        assert!((lf - DMatrix::from_column_slice(2, 1, &[1.0, -1.0])).amax() < 1e-14);
    }

    #[test]
    fn first_order_s_is_the_trace() {
        let spec = path_spectrum();
        let f = DMatrix::from_column_slice(2, 1, &[1.0, 0.5]);
        let p = part(&[0, 1]);
        let vols = [1.5, 2.5];
        let s = build_s(&spec, &f, &p, &vols, 0.7, 1, CForm::Derived).unwrap();
        let m = build_b(&p, &vols).unwrap() - build_c(&p, &vols, CForm::Derived).unwrap() * 0.7;
        let want = (f.transpose() * m * &f).trace();
        assert!((s[(0, 0)] - want).abs() <= 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn candidates_of_diagonal_s() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let c = candidate_filters(&s).unwrap();
        assert_eq!(c.filters[0].coeffs(), &[1.0, 0.0]);
        assert_eq!(c.filters[1].coeffs(), &[0.0, 1.0]);
        assert_eq!(c.eigenvalues, vec![1.0, 2.0]);

        let zero = candidate_filters(&DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(zero.filters.len(), 3);
        for h in &zero.filters {
            let sq: f64 = h.coeffs().iter().map(|x| x * x).sum();
            assert!((sq - 1.0).abs() <= UNIT_NORM_TOL);
        }
    }

    #[test]
    fn responses() {
        let h = FilterCoefficients::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(filter_response(&h, &[0.0, 0.7, 2.0]), vec![1.0, 1.0, 1.0]);
        let h = FilterCoefficients::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(h.response(2.0), 2.0);
        // unnormalized coefficients go through the raw polynomial
        let raw = FilterCoefficients(vec![1.0, -1.0, 0.5]);
        assert_eq!(raw.response(1.0), 0.5);
    }
}
