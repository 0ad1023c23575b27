//! Sparse discretizations of the cross-section operators, the fibre
//! operators `H(s)` and the straightened 3D operator.

use serde::{Deserialize, Serialize};

use crate::eigensolve::ground_floor;
use crate::error::{Error, Result};
use crate::geometry::{CrossSection, Link, DIRECTIONS};
use crate::profiles::TwistProfile;
use crate::sparse::{CsrMatrix, Provenance, SparseOperator, SparseSymOperator};

/// Default memory ceiling for the 3D operator.
pub const DEFAULT_MEMORY_BUDGET: usize = 2 << 30;

/// How stencil arms that leave the domain are closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTreatment {
    /// Linear extrapolation through the zero at the wall crossing
    /// (ghost value `u·(1 − 1/θ)` for a wall at fraction `θ` of a step).
    /// Second order on curved boundaries.
    #[default]
    Ghost,
    /// Out-of-domain neighbours are plain zeros. First order on curved
    /// boundaries.
    Staircase,
}

/// Ghost-value factor for an arm, or `None` when the arm lands on a node.
fn ghost_factor(link: Link, bt: BoundaryTreatment) -> Option<f64> {
    match (link, bt) {
        (Link::Node(_), _) => None,
        (Link::Wall(_), BoundaryTreatment::Staircase) => Some(0.0),
        (Link::Wall(theta), BoundaryTreatment::Ghost) => Some(1.0 - 1.0 / theta),
    }
}

/// Five-point Dirichlet Laplacian with the default (ghost) closure.
pub fn assemble_laplacian(cs: &CrossSection) -> SparseSymOperator {
    assemble_laplacian_with(cs, BoundaryTreatment::default())
}

pub fn assemble_laplacian_with(cs: &CrossSection, bt: BoundaryTreatment) -> SparseSymOperator {
    let ih2 = 1.0 / (cs.spacing() * cs.spacing());
    let mut t = Vec::with_capacity(5 * cs.len());
    for k in 0..cs.len() {
        let mut diag = 0.0;
        for &link in cs.links(k) {
            match ghost_factor(link, bt) {
                None => {
                    if let Link::Node(q) = link {
                        t.push((k, q, -ih2));
                    }
                    diag += ih2;
                }
                Some(g) => diag += ih2 * (1.0 - g),
            }
        }
        t.push((k, k, diag));
    }
    let m = CsrMatrix::from_triplets(cs.len(), cs.len(), &t);
    SparseSymOperator::from_parts_unchecked(m, Provenance::Laplacian)
}

/// Central-difference angular derivative `t₂∂₃ − t₃∂₂`.
pub fn assemble_angular(cs: &CrossSection) -> SparseOperator {
    assemble_angular_with(cs, BoundaryTreatment::default())
}

pub fn assemble_angular_with(cs: &CrossSection, bt: BoundaryTreatment) -> SparseOperator {
    let h = cs.spacing();
    let mut t = Vec::with_capacity(4 * cs.len());
    for (k, node) in cs.nodes().iter().enumerate() {
        let mut diag = 0.0;
        for (&link, &(di, dj)) in cs.links(k).iter().zip(DIRECTIONS.iter()) {
            let coef = (node.t2 * dj as f64 - node.t3 * di as f64) / (2.0 * h);
            if coef == 0.0 {
                continue;
            }
            match (link, ghost_factor(link, bt)) {
                (Link::Node(q), _) => t.push((k, q, coef)),
                (_, Some(g)) => diag += coef * g,
                _ => unreachable!(),
            }
        }
        if diag != 0.0 {
            t.push((k, k, diag));
        }
    }
    SparseOperator::new(CsrMatrix::from_triplets(cs.len(), cs.len(), &t))
}

/// `h_β₀ = L + β₀²·AᵀA`.
pub fn assemble_h_beta0(cs: &CrossSection, beta0: f64) -> SparseSymOperator {
    assemble_h_beta0_with(cs, beta0, BoundaryTreatment::default())
}

pub fn assemble_h_beta0_with(cs: &CrossSection, beta0: f64, bt: BoundaryTreatment) -> SparseSymOperator {
    let lap = assemble_laplacian_with(cs, bt);
    if beta0 == 0.0 {
        return SparseSymOperator::from_parts_unchecked(lap.matrix().clone(), Provenance::HBeta0);
    }
    let gram = assemble_angular_with(cs, bt).gram(Provenance::AngularGram);
    let m = lap.matrix().add_scaled(1.0, gram.matrix(), beta0 * beta0);
    SparseSymOperator::from_parts_unchecked(m, Provenance::HBeta0)
}

/// How the second angular derivative of `f` is formed in the potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondDerivative {
    /// `A(Af)`.
    Composed,
    /// `−AᵀAf`, the variational form of the same quantity. With it
    /// `⟨f, V f⟩` reproduces `‖Af‖²` exactly, matching the angular term of
    /// `h_β₀`.
    #[default]
    Gram,
}

/// Per-node ratios `∂_αf/f` and `∂²_αf/f`, fixed for a given ground state.
#[derive(Debug, Clone)]
pub struct GroundRatios {
    first: Vec<f64>,
    second: Vec<f64>,
    q99: f64,
    q99_second: f64,
    beta0: f64,
    floor_nodes: usize,
}

impl GroundRatios {
    /// Precomputes the ratios. Nodes where `f` is not resolved (at or below
    /// [`ground_floor`]) get zero ratios.
    pub fn new(cs: &CrossSection, angular: &SparseOperator, f: &[f64], beta0: f64, mode: SecondDerivative) -> Result<Self> {
        let floor = ground_floor(f)?;
        let af = angular.apply(f);
        let a2f = match mode {
            SecondDerivative::Composed => angular.apply(&af),
            SecondDerivative::Gram => angular.matrix().transpose().mul_vec(&af).iter().map(|v| -v).collect(),
        };
        let ratio = |a: &f64, b: &f64| if *b > floor { a / b } else { 0.0 };
        let first: Vec<f64> = af.iter().zip(f).map(|(a, b)| ratio(a, b)).collect();
        let second: Vec<f64> = a2f.iter().zip(f).map(|(a, b)| ratio(a, b)).collect();
        let floor_nodes = f.iter().filter(|&&v| v <= floor).count();
        let mut deep: Vec<usize> = (0..cs.len()).filter(|&k| cs.is_deep(k, 2) && f[k] > floor).collect();
        if deep.is_empty() {
            deep = (0..cs.len()).filter(|&k| f[k] > floor).collect();
        }
        let q99 = percentile(&mut deep.iter().map(|&k| first[k].abs()).collect::<Vec<_>>(), 0.99);
        let q99_second = percentile(&mut deep.iter().map(|&k| second[k].abs()).collect::<Vec<_>>(), 0.99);
        Ok(GroundRatios { first, second, q99, q99_second, beta0, floor_nodes })
    }

    /// 99th percentile of `|Af|/f` over resolved nodes at least two steps
    /// inside.
    pub fn q99(&self) -> f64 {
        self.q99
    }

    /// Same percentile for the second-derivative ratio.
    pub fn q99_second(&self) -> f64 {
        self.q99_second
    }

    /// Nodes where `f` was at round-off level and `V` is set to zero.
    pub fn floor_nodes(&self) -> usize {
        self.floor_nodes
    }

    pub fn first(&self) -> &[f64] {
        &self.first
    }

    pub fn second(&self) -> &[f64] {
        &self.second
    }

    /// `V(s, ·)` clamped at `±V_cap(s)`, each of the two terms contributing
    /// its coefficient times its own 99th percentile to the cap.
    pub fn potential(&self, profile: &TwistProfile, alpha_sq: f64, s: f64) -> Potential {
        self.potential_with(profile, alpha_sq, s, true)
    }

    /// `V(s, ·)`, clamped only when `clamp` is set; the cap and the count of
    /// nodes beyond it are reported either way.
    pub fn potential_with(&self, profile: &TwistProfile, alpha_sq: f64, s: f64, clamp: bool) -> Potential {
        let m = profile.mu(s);
        let md = profile.mu_dot(s);
        let drive = m * (2.0 * self.beta0 - m);
        if m == 0.0 && md == 0.0 {
            return Potential { values: vec![0.0; self.first.len()], cap: 0.0, clamped: 0 };
        }
        let cap = (md.abs() * self.q99 + drive.abs() * self.q99_second) / alpha_sq;
        let mut clamped = 0;
        let values = self
            .first
            .iter()
            .zip(&self.second)
            .map(|(p1, p2)| {
                let v = -(md * p1 - drive * p2) / alpha_sq;
                if v.abs() > cap {
                    clamped += 1;
                    if clamp { v.clamp(-cap, cap) } else { v }
                } else {
                    v
                }
            })
            .collect();
        Potential { values, cap, clamped }
    }
}

/// Nearest-rank-with-interpolation percentile; reorders `v`.
fn percentile(v: &mut [f64], q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// A sampled effective potential.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub values: Vec<f64>,
    pub cap: f64,
    /// Nodes where `|V|` exceeded the cap.
    pub clamped: usize,
}

/// `V(s, ·)` for the ground state `f` of `h_β₀`.
pub fn effective_potential(
    cs: &CrossSection,
    f: &[f64],
    profile: &TwistProfile,
    alpha_sq: f64,
    s: f64,
) -> Result<Potential> {
    let angular = assemble_angular(cs);
    let ratios = GroundRatios::new(cs, &angular, f, profile.beta0(), SecondDerivative::default())?;
    Ok(ratios.potential(profile, alpha_sq, s))
}

/// `H(s) = h_β₀ + diag(V) − E·I` from a precomputed `h_β₀` and potential.
pub fn h_of_s(h_beta0: &SparseSymOperator, potential: &[f64], e: f64) -> SparseSymOperator {
    let d: Vec<f64> = potential.iter().map(|v| v - e).collect();
    h_beta0.with_diagonal(&d, Provenance::HOfS)
}

/// `H(s)` assembled from scratch.
pub fn assemble_h_of_s(
    cs: &CrossSection,
    f: &[f64],
    e: f64,
    profile: &TwistProfile,
    alpha_sq: f64,
    s: f64,
) -> Result<SparseSymOperator> {
    let h = assemble_h_beta0(cs, profile.beta0());
    let v = effective_potential(cs, f, profile, alpha_sq, s)?;
    Ok(h_of_s(&h, &v.values, e))
}

/// Axial grid of the truncated tube: `n_s` interior nodes on `(−L, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxialGrid {
    pub l_trunc: f64,
    pub n_s: usize,
}

impl AxialGrid {
    pub fn spacing(&self) -> f64 {
        2.0 * self.l_trunc / (self.n_s + 1) as f64
    }

    pub fn node(&self, m: usize) -> f64 {
        -self.l_trunc + (m + 1) as f64 * self.spacing()
    }
}

/// Rough peak memory of [`assemble_3d`] in bytes.
pub fn estimate_3d_bytes(cs: &CrossSection, n_s: usize) -> usize {
    let angular = assemble_angular(cs);
    let per_slice = cs.len() + angular.matrix().nnz();
    let gram_nnz = 3 * angular.matrix().gram().nnz() + 6 * cs.len();
    // B (and its transpose) plus the Gram product and the final sum
    16 * n_s * (3 * per_slice + 2 * gram_nnz) + 24 * n_s * per_slice
}

/// Straightened 3D operator `I_s⊗L + BᵀB`, `B = D_s⊗I + Θ⊗A`, s-major.
pub fn assemble_3d(cs: &CrossSection, profile: &TwistProfile, l_trunc: f64, n_s: usize) -> Result<SparseSymOperator> {
    assemble_3d_with(cs, profile, l_trunc, n_s, DEFAULT_MEMORY_BUDGET)
}

pub fn assemble_3d_with(
    cs: &CrossSection,
    profile: &TwistProfile,
    l_trunc: f64,
    n_s: usize,
    budget: usize,
) -> Result<SparseSymOperator> {
    if l_trunc <= profile.s0() {
        return Err(Error::TruncationTooSmall { l_trunc, s0: profile.s0() });
    }
    if n_s < 16 {
        return Err(Error::InvalidArgument(format!("n_s = {n_s} is below the minimum of 16")));
    }
    let required = estimate_3d_bytes(cs, n_s);
    if required > budget {
        return Err(Error::MemoryBudget { required, budget });
    }
    let grid = AxialGrid { l_trunc, n_s };
    let hs = grid.spacing();
    let nw = cs.len();
    let lap = assemble_laplacian(cs);
    let angular = assemble_angular(cs);

    // Block row m of B is the forward difference between axial nodes m-1 and
    // m (ends pinned to zero), plus θ̇(s_m)·A acting on node m; row n_s has
    // only the difference part.
    let mut t = Vec::with_capacity((n_s + 1) * (2 * nw + angular.matrix().nnz()));
    for m in 0..=n_s {
        for w in 0..nw {
            let row = m * nw + w;
            if m > 0 {
                t.push((row, (m - 1) * nw + w, -1.0 / hs));
            }
            if m < n_s {
                t.push((row, m * nw + w, 1.0 / hs));
                let td = profile.theta_dot(grid.node(m));
                let (cols, vals) = angular.matrix().row(w);
                for (&c, &v) in cols.iter().zip(vals) {
                    t.push((row, m * nw + c, td * v));
                }
            }
        }
    }
    let b = CsrMatrix::from_triplets((n_s + 1) * nw, n_s * nw, &t);
    drop(t);
    let btb = b.gram();
    drop(b);
    let slices = CsrMatrix::identity(n_s).kron(lap.matrix());
    let h3 = btb.add_scaled(1.0, &slices, 1.0);
    Ok(SparseSymOperator::from_parts_unchecked(h3, Provenance::H3d))
}
