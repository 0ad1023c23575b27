//! Lowest eigenpairs of sparse symmetric operators.
//!
//! The iterative path is a locally optimal block preconditioned conjugate
//! gradient method with a Jacobi preconditioner; small problems go to a dense
//! symmetric eigensolver, which also serves as the test oracle.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{dot, norm, SparseSymOperator};

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenOptions {
    /// Relative residual tolerance, see [`Spectrum`].
    pub tol: f64,
    pub max_iterations: usize,
    /// Seed of the initial block.
    pub seed: u64,
    /// Problems up to this size are solved densely.
    pub dense_threshold: usize,
    /// Iterations between recomputations of `M·X` from scratch.
    pub refresh_every: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tol: 1e-12, max_iterations: 5000, seed: 42, dense_threshold: 1000, refresh_every: 25 }
    }
}

/// Lowest eigenpairs, ascending.
///
/// Each residual `‖Mx − λx‖` is at most `tol·(1 + |λ|)·scale(M)` when
/// `converged` is set, `scale(M)` being the largest absolute row sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    fn truncate(&mut self, k: usize) {
        self.eigenvalues.truncate(k);
        self.eigenvectors.truncate(k);
        self.residuals.truncate(k);
    }
}

fn residual(m: &SparseSymOperator, x: &[f64], lambda: f64) -> f64 {
    let mx = m.apply(x);
    mx.iter().zip(x).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt()
}

/// The `k` lowest eigenpairs from a dense symmetric decomposition.
pub fn dense_eigs(m: &SparseSymOperator, k: usize) -> Spectrum {
    let n = m.dim();
    let k = k.min(n);
    let eig = SymmetricEigen::new(m.matrix().to_dense());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors: Vec<Vec<f64>> = order[..k]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    let residuals = eigenvectors.iter().zip(&eigenvalues).map(|(x, &l)| residual(m, x, l)).collect();
    Spectrum { eigenvalues, eigenvectors, residuals, iterations: 0, converged: true }
}

/// `k` lowest eigenpairs with the library defaults, `tol` overriding.
pub fn smallest_eigs(m: &SparseSymOperator, k: usize, tol: f64) -> Result<Spectrum> {
    smallest_eigs_with(m, k, &EigenOptions { tol, ..EigenOptions::default() }, &[])
}

/// `k` lowest eigenpairs; dense for small problems, iterative otherwise.
/// `warm` vectors, if any, seed the leading columns of the starting block.
pub fn smallest_eigs_with(m: &SparseSymOperator, k: usize, opts: &EigenOptions, warm: &[Vec<f64>]) -> Result<Spectrum> {
    if k == 0 || k > m.dim() {
        return Err(Error::InvalidArgument(format!("requested {k} eigenpairs of a {}-dimensional operator", m.dim())));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if m.dim() <= opts.dense_threshold {
        return Ok(dense_eigs(m, k));
    }
    lobpcg(m, k, opts, warm)
}

/// Block of column vectors together with their images under the operator.
struct Block {
    x: DMatrix<f64>,
    mx: DMatrix<f64>,
}

fn apply_block(m: &SparseSymOperator, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for c in 0..x.ncols() {
        let col: Vec<f64> = x.column(c).iter().copied().collect();
        let y = m.apply(&col);
        out.column_mut(c).copy_from_slice(&y);
    }
    out
}

/// Orthonormalizes the columns of `y` against themselves, dropping
/// directions whose Gram eigenvalue is below `drop` (columns are first
/// scaled to unit length). Returns the combination matrix.
fn orthonormal_combination(y: &DMatrix<f64>, drop: f64) -> Option<DMatrix<f64>> {
    let p = y.ncols();
    let mut scale = DMatrix::zeros(p, p);
    let mut any = false;
    for c in 0..p {
        let nrm = y.column(c).norm();
        if nrm > 0.0 && nrm.is_finite() {
            scale[(c, c)] = 1.0 / nrm;
            any = true;
        }
    }
    if !any {
        return None;
    }
    let ys = y * &scale;
    let gram = ys.transpose() * &ys;
    let eig = SymmetricEigen::new(gram);
    let keep: Vec<usize> = (0..p).filter(|&i| eig.eigenvalues[i] > drop).collect();
    if keep.is_empty() {
        return None;
    }
    let mut comb = DMatrix::zeros(p, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        let s = 1.0 / eig.eigenvalues[i].sqrt();
        comb.column_mut(j).copy_from(&(eig.eigenvectors.column(i) * s));
    }
    Some(scale * comb)
}

/// Removes from `y` (and its image) the components along the orthonormal
/// `q`, then orthonormalizes what is left. Two passes.
fn extend_basis(q: &Block, y: Block) -> Option<Block> {
    let mut y = y;
    for _ in 0..2 {
        let c = q.x.transpose() * &y.x;
        y.x -= &q.x * &c;
        y.mx -= &q.mx * &c;
        let comb = orthonormal_combination(&y.x, 1e-12)?;
        y = Block { x: &y.x * &comb, mx: &y.mx * &comb };
    }
    Some(y)
}

fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Iterative solve for the `k` lowest eigenpairs (no dense fallback).
pub fn lobpcg(m: &SparseSymOperator, k: usize, opts: &EigenOptions, warm: &[Vec<f64>]) -> Result<Spectrum> {
    let n = m.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("requested {k} eigenpairs of a {n}-dimensional operator")));
    }
    let bs = (2 * k).max(8).min(n / 3).max(k);
    let scale = m.scale().max(f64::MIN_POSITIVE);
    let precond: Vec<f64> = {
        let d = m.matrix().diagonal_values();
        let floor = 1e-3 * d.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        d.iter().map(|v| 1.0 / v.abs().max(floor)).collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x0 = DMatrix::zeros(n, bs);
    for c in 0..bs {
        match warm.get(c).filter(|w| w.len() == n) {
            Some(w) => x0.column_mut(c).copy_from_slice(w),
            None => {
                for r in 0..n {
                    x0[(r, c)] = rng.gen::<f64>() - 0.5;
                }
            }
        }
    }
    let comb = orthonormal_combination(&x0, 1e-12)
        .ok_or_else(|| Error::InvalidArgument("degenerate starting block".into()))?;
    let x0 = x0 * comb;
    let mx0 = apply_block(m, &x0);
    let (mut x, mut lambda) = rayleigh_ritz(&Block { x: x0, mx: mx0 }, bs.min(n));
    let mut p: Option<Block> = None;
    let mut residuals = vec![f64::INFINITY; bs];
    let mut iterations = 0;

    loop {
        // residuals of the current Ritz pairs
        let mut r = x.mx.clone();
        for c in 0..x.x.ncols() {
            let l = lambda[c];
            let mut col = r.column_mut(c);
            col.axpy(-l, &x.x.column(c), 1.0);
            residuals[c] = col.norm();
        }
        let worst = (0..k)
            .map(|c| residuals[c] / (opts.tol * (1.0 + lambda[c].abs()) * scale))
            .fold(0.0, f64::max);
        log::debug!("lobpcg iteration {iterations}: lambda0 = {:.12e}, worst scaled residual {worst:.3e}", lambda[0]);
        if worst <= 1.0 {
            break;
        }
        if iterations >= opts.max_iterations {
            let worst_residual = (0..k).map(|c| residuals[c]).fold(0.0, f64::max);
            return Err(Error::NoConvergence { iterations, worst_residual });
        }
        iterations += 1;

        // preconditioned residuals, only for unconverged columns
        let active: Vec<usize> = (0..x.x.ncols())
            .filter(|&c| residuals[c] > opts.tol * (1.0 + lambda[c].abs()) * scale)
            .collect();
        let mut w = DMatrix::zeros(n, active.len());
        for (j, &c) in active.iter().enumerate() {
            for i in 0..n {
                w[(i, j)] = precond[i] * r[(i, c)];
            }
        }
        let mut basis = Block { x: x.x.clone(), mx: x.mx.clone() };
        let wx = {
            let c = basis.x.transpose() * &w;
            w -= &basis.x * c;
            match orthonormal_combination(&w, 1e-12) {
                Some(comb) => {
                    let wn = &w * comb;
                    let mw = apply_block(m, &wn);
                    extend_basis(&basis, Block { x: wn, mx: mw })
                }
                None => None,
            }
        };
        if let Some(b) = wx {
            basis = Block { x: hcat(&basis.x, &b.x), mx: hcat(&basis.mx, &b.mx) };
        }
        if let Some(pb) = p.take() {
            if let Some(b) = extend_basis(&basis, pb) {
                basis = Block { x: hcat(&basis.x, &b.x), mx: hcat(&basis.mx, &b.mx) };
            }
        }
        let xcols = x.x.ncols();
        let (coef, new_lambda) = ritz_coefficients(&basis, xcols);
        let new_x = Block { x: &basis.x * &coef, mx: &basis.mx * &coef };
        // search direction: the part of the update outside the old block
        let rest = basis.x.ncols() - xcols;
        p = if rest > 0 {
            let c_rest = coef.rows(xcols, rest).into_owned();
            let px = basis.x.columns(xcols, rest) * &c_rest;
            let pmx = basis.mx.columns(xcols, rest) * &c_rest;
            Some(Block { x: px, mx: pmx })
        } else {
            None
        };
        x = new_x;
        lambda = new_lambda;
        if opts.refresh_every > 0 && iterations % opts.refresh_every == 0 {
            x.mx = apply_block(m, &x.x);
            if let Some(pb) = p.as_mut() {
                pb.mx = apply_block(m, &pb.x);
            }
        }
    }

    let mut out = finish(m, &x, &lambda, iterations);
    out.truncate(k);
    Ok(out)
}

/// Ritz pairs of an orthonormal basis; returns the `keep` lowest.
fn rayleigh_ritz(basis: &Block, keep: usize) -> (Block, Vec<f64>) {
    let (coef, lambda) = ritz_coefficients(basis, keep);
    (Block { x: &basis.x * &coef, mx: &basis.mx * &coef }, lambda)
}

fn ritz_coefficients(basis: &Block, keep: usize) -> (DMatrix<f64>, Vec<f64>) {
    let g = basis.x.transpose() * &basis.mx;
    let g = (&g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let keep = keep.min(order.len());
    let mut coef = DMatrix::zeros(basis.x.ncols(), keep);
    for (j, &i) in order[..keep].iter().enumerate() {
        coef.column_mut(j).copy_from(&eig.eigenvectors.column(i));
    }
    (coef, order[..keep].iter().map(|&i| eig.eigenvalues[i]).collect())
}

fn finish(m: &SparseSymOperator, x: &Block, lambda: &[f64], iterations: usize) -> Spectrum {
    let mut eigenvectors = Vec::with_capacity(lambda.len());
    let mut residuals = Vec::with_capacity(lambda.len());
    for c in 0..lambda.len() {
        let mut v: Vec<f64> = x.x.column(c).iter().copied().collect();
        let nrm = norm(&v);
        v.iter_mut().for_each(|e| *e /= nrm);
        residuals.push(residual(m, &v, lambda[c]));
        eigenvectors.push(v);
    }
    Spectrum { eigenvalues: lambda.to_vec(), eigenvectors, residuals, iterations, converged: true }
}

/// Eigenvalues within this relative distance of the lowest one are treated as
/// one (numerically degenerate) ground level.
pub const CLUSTER_TOL: f64 = 1e-8;

/// Node values of the ground state below this fraction of its maximum are at
/// round-off level.
pub const GROUND_FLOOR: f64 = 1e-9;

/// Largest tolerated negative node value, relative to the maximum. Central
/// differences in the angular term do not preserve positivity exactly, so
/// the discrete ground state can dip slightly below zero near sharp corners.
pub const GROUND_DEFECT_MAX: f64 = 1e-2;

/// Level below which node values of a ground state are not resolved: the
/// larger of the round-off floor and the most negative node value. Fails when
/// the vector is too far from positive.
pub fn ground_floor(f: &[f64]) -> Result<f64> {
    let top = f.iter().fold(0.0_f64, |m, v| m.max(*v));
    let (node, min) = f
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("vector is non-empty");
    if top <= 0.0 || -min > GROUND_DEFECT_MAX * top {
        return Err(Error::NonPositiveGroundState { min, node });
    }
    Ok((GROUND_FLOOR * top).max(-min))
}

/// Ground state of `h_β₀`: the lowest eigenvalue and a positive eigenvector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundState {
    pub energy: f64,
    #[serde(skip)]
    pub vector: Vec<f64>,
    /// Smallest node value of the unit-norm ground state; slightly negative
    /// values are tolerated, see [`ground_floor`].
    pub margin: f64,
    /// Number of eigenvalues in the lowest cluster.
    pub degeneracy: usize,
    /// Nodes whose value is at round-off level.
    pub floor_nodes: usize,
    /// Distance from the lowest eigenvalue to the first one outside the
    /// cluster, when it was computed.
    pub gap: Option<f64>,
    pub iterations: usize,
    /// The lowest computed eigenpairs.
    #[serde(skip)]
    pub low: Spectrum,
}

impl GroundState {
    /// Level below which node values are not resolved; see [`ground_floor`].
    pub fn floor(&self) -> f64 {
        ground_floor(&self.vector).unwrap_or(0.0)
    }
}

/// Lowest eigenpair with the sign chosen so that the mean is positive.
///
/// When the bottom of the spectrum is a cluster of numerically equal
/// eigenvalues (thin domains with several equivalent wells), the returned
/// vector is the normalized projection of the constant vector onto the
/// cluster, i.e. the symmetric combination.
pub fn ground_state(h: &SparseSymOperator) -> Result<GroundState> {
    ground_state_with(h, &EigenOptions::default())
}

pub fn ground_state_with(h: &SparseSymOperator, opts: &EigenOptions) -> Result<GroundState> {
    let n = h.dim();
    let mut k = 4.min(n);
    let mut warm: Vec<Vec<f64>> = Vec::new();
    let (spec, size) = loop {
        let spec = smallest_eigs_with(h, k, opts, &warm)?;
        let l0 = spec.eigenvalues[0];
        let size = spec.eigenvalues.iter().take_while(|&&l| l - l0 <= CLUSTER_TOL * (1.0 + l0.abs())).count();
        if size < k || k == n {
            break (spec, size);
        }
        warm = spec.eigenvectors;
        k = (2 * k).min(n);
    };
    let mut f = if size == 1 {
        spec.eigenvectors[0].clone()
    } else {
        let mut f = vec![0.0; n];
        for v in &spec.eigenvectors[..size] {
            let c: f64 = v.iter().sum();
            f.iter_mut().zip(v).for_each(|(a, b)| *a += c * b);
        }
        let nrm = norm(&f);
        f.iter_mut().for_each(|a| *a /= nrm);
        f
    };
    if f.iter().sum::<f64>() < 0.0 {
        f.iter_mut().for_each(|v| *v = -*v);
    }
    let floor = ground_floor(&f)?;
    let margin = f.iter().copied().fold(f64::INFINITY, f64::min);
    let floor_nodes = f.iter().filter(|&&v| v <= floor).count();
    Ok(GroundState {
        energy: spec.eigenvalues[0],
        vector: f,
        margin,
        degeneracy: size,
        floor_nodes,
        gap: spec.eigenvalues.get(size).map(|l| l - spec.eigenvalues[0]),
        iterations: spec.iterations,
        low: spec,
    })
}

/// Noise floor below which an eigenvalue counts as negative.
pub fn negative_threshold(h: &SparseSymOperator) -> f64 {
    1e-10 * h.scale()
}

/// All eigenvalues below `−1e-10·scale(H)`, found by doubling the request
/// until a nonnegative eigenvalue shows up.
pub fn negative_eigs(h: &SparseSymOperator, cap: usize) -> Result<Spectrum> {
    negative_eigs_with(h, cap, &EigenOptions::default(), &[])
}

pub fn negative_eigs_with(h: &SparseSymOperator, cap: usize, opts: &EigenOptions, warm: &[Vec<f64>]) -> Result<Spectrum> {
    if cap == 0 {
        return Err(Error::InvalidArgument("cap must be at least 1".into()));
    }
    let tol_neg = negative_threshold(h);
    let n = h.dim();
    let mut want = 4usize;
    let mut seed: Vec<Vec<f64>> = warm.to_vec();
    loop {
        let k = want.min(n);
        let mut spec = smallest_eigs_with(h, k, opts, &seed)?;
        let count = spec.eigenvalues.iter().take_while(|&&l| l < -tol_neg).count();
        if count < k || k == n {
            spec.truncate(count);
            if count > cap {
                return Err(Error::CapExceeded { found: count });
            }
            return Ok(spec);
        }
        if k >= cap {
            return Err(Error::CapExceeded { found: count });
        }
        seed = spec.eigenvectors;
        want *= 2;
    }
}

/// Dense reference for the lowest eigenvalues of a dense symmetric matrix.
pub fn dense_reference(m: &DMatrix<f64>) -> DVector<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    DVector::from_vec(v)
}

/// Maximum pairwise overlap `|⟨x_i, x_j⟩|`, `i ≠ j`.
pub fn max_overlap(vectors: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..vectors.len() {
        for j in 0..i {
            worst = worst.max(dot(&vectors[i], &vectors[j]).abs());
        }
    }
    worst
}
