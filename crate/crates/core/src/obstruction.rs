//! The endpoint obstruction system.
//!
//! Points `A`, `B_1 … B_κ`, `C` (each `N = dim Sᵈ` points) are joined by
//! geodesics. An integral restricted to the `A` points determines, through
//! the endpoint velocities of the `A → B_ℓ` geodesics, its restrictions at
//! `B_ℓ`, and from there at `C`. Requiring the `C` restrictions to agree for
//! all `ℓ` gives a homogeneous linear system in the `N²` coefficients at `A`
//! whose kernel contains the restrictions of every degree-`d` integral.
//!
//! Velocities are expressed in an orthonormal frame of `g` at each point, and
//! the two endpoint velocities of every geodesic are scaled by a common factor
//! so that they have unit average size. Both leave the system's kernel intact
//! because integrals are homogeneous in velocity.
//!
//! The kernel is decided on the equivalent consistency system with one scalar
//! equation `α_src(w₀) = α_dst(w₁)` per geodesic and unknowns at every point.
//! It has the same kernel as the stacked `Φ^{BC}_ℓ Φ^{AB}_ℓ − Φ^{BC}_1 Φ^{AB}_1`
//! (every decisive matrix is invertible) but avoids the products of inverse
//! Veronese matrices, whose conditioning grows quickly with `d`. The zero
//! threshold is set from a measured noise level: the system is rebuilt from
//! geodesics re-solved at a tenfold tighter tolerance, and the spectral norm
//! of the difference is the noise estimate.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::{batch_connect, solve_bvp_from, GeodesicSegment, Tolerances};
use crate::integrals::CoefficientField;
use crate::kernel::{kernel_analysis, Floor, KernelAnalysis, KernelDim, RankRule};
use crate::metric::{Frame, MetricField};
use crate::sym_poly::{condition_number, SymPolyElement, SymPolySpace};

pub const DEFAULT_KAPPA: usize = 3;
pub const MAX_ATTEMPTS: usize = 100;
/// Points are drawn inside this fraction of the disc radius.
pub const SAMPLE_RADIUS: f64 = 0.8;
/// Minimum pairwise distance between sampled points, relative to the radius.
pub const MIN_SEPARATION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObstructionSettings {
    pub kappa: usize,
    pub cond_max: f64,
    pub tolerances: Tolerances,
    /// Minimum ratio between the last kept and first discarded singular value.
    pub gap_min: f64,
    /// The zero threshold is `noise_margin` times the measured noise.
    pub noise_margin: f64,
    /// Threshold never drops below `rel_floor · σ₁`.
    pub rel_floor: f64,
}

impl Default for ObstructionSettings {
    fn default() -> Self {
        Self {
            kappa: DEFAULT_KAPPA,
            cond_max: 1e8,
            tolerances: Tolerances {
                ivp_tol: 1e-13,
                ..Tolerances::default()
            },
            gap_min: 1e6,
            noise_margin: 100.0,
            rel_floor: 1e-13,
        }
    }
}

/// Scaled frame velocities of the geodesics from one point set to another,
/// indexed `[source][target]`.
#[derive(Debug, Clone)]
pub struct Leg {
    pub outgoing: Vec<Vec<DVector<f64>>>,
    pub incoming: Vec<Vec<DVector<f64>>>,
}

impl Leg {
    pub fn from_segments(segs: &[Vec<GeodesicSegment>], source_frames: &[Frame], target_frames: &[Frame]) -> Leg {
        let mut outgoing = Vec::with_capacity(segs.len());
        let mut incoming = Vec::with_capacity(segs.len());
        for (i, row) in segs.iter().enumerate() {
            let mut out_row = Vec::with_capacity(row.len());
            let mut in_row = Vec::with_capacity(row.len());
            for (j, seg) in row.iter().enumerate() {
                let (w0, w1) = endpoint_velocities(seg, &source_frames[i], &target_frames[j]);
                out_row.push(w0);
                in_row.push(w1);
            }
            outgoing.push(out_row);
            incoming.push(in_row);
        }
        Leg { outgoing, incoming }
    }

    /// Segments `[source][target]` reversed into `[target][source]`.
    pub fn reverse_segments(segs: &[Vec<GeodesicSegment>]) -> Vec<Vec<GeodesicSegment>> {
        let targets = segs.first().map_or(0, |r| r.len());
        (0..targets).map(|j| segs.iter().map(|row| row[j].reversed()).collect()).collect()
    }

    /// Condition numbers of every incoming set (per target) and outgoing set
    /// (per source).
    pub fn decisiveness(&self, space: &SymPolySpace) -> Vec<f64> {
        let sources = self.outgoing.len();
        let targets = self.outgoing.first().map_or(0, |r| r.len());
        let mut conds = Vec::with_capacity(sources + targets);
        for j in 0..targets {
            let set: Vec<DVector<f64>> = (0..sources).map(|i| self.incoming[i][j].clone()).collect();
            conds.push(condition_number(&space.veronese_matrix(&set)));
        }
        for i in 0..sources {
            conds.push(condition_number(&space.veronese_matrix(&self.outgoing[i])));
        }
        conds
    }
}

/// Frame components of both endpoint velocities, scaled by `2 / (|w₀| + |w₁|)`.
fn endpoint_velocities(seg: &GeodesicSegment, source: &Frame, target: &Frame) -> (DVector<f64>, DVector<f64>) {
    let w0 = source.to_frame(&DVector::from_row_slice(&seg.v_start));
    let w1 = target.to_frame(&DVector::from_row_slice(&seg.v_end));
    let lambda = 2.0 / (w0.norm() + w1.norm());
    (w0 * lambda, w1 * lambda)
}

#[derive(Debug, Clone)]
pub struct PointConfiguration {
    pub space: SymPolySpace,
    pub kappa: usize,
    pub seed: u64,
    /// Number of sampling attempts used (1 when the first draw succeeded).
    pub attempts: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<Vec<f64>>>,
    pub c: Vec<Vec<f64>>,
    pub frames_a: Vec<Frame>,
    pub frames_b: Vec<Vec<Frame>>,
    pub frames_c: Vec<Frame>,
    /// `[ℓ][i][j]`: `A_i → B_{ℓ,j}`.
    pub seg_ab: Vec<Vec<Vec<GeodesicSegment>>>,
    /// `[ℓ][i][j]`: `B_{ℓ,i} → C_j`.
    pub seg_bc: Vec<Vec<Vec<GeodesicSegment>>>,
    pub legs_ab: Vec<Leg>,
    pub legs_bc: Vec<Leg>,
    pub decisive_certs: Vec<f64>,
}

impl PointConfiguration {
    pub fn max_bvp_residual(&self) -> f64 {
        self.seg_ab
            .iter()
            .chain(&self.seg_bc)
            .flatten()
            .flatten()
            .map(|s| s.bvp_residual)
            .fold(0.0, f64::max)
    }

    pub fn max_condition(&self) -> f64 {
        self.decisive_certs.iter().cloned().fold(0.0, f64::max)
    }

    pub fn segment_count(&self) -> usize {
        self.seg_ab.iter().chain(&self.seg_bc).flatten().map(|r| r.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LegKind {
    AB,
    BC,
}

fn draw_points(rng: &mut ChaCha8Rng, n: usize, count: usize, radius: f64) -> Option<Vec<Vec<f64>>> {
    let r = SAMPLE_RADIUS * radius;
    let sep = MIN_SEPARATION * radius;
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut tries = 0;
    while pts.len() < count {
        tries += 1;
        if tries > 10_000 * count {
            return None;
        }
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-r..r)).collect();
        if x.iter().map(|v| v * v).sum::<f64>() >= r * r {
            continue;
        }
        let far = pts
            .iter()
            .all(|p| p.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() >= sep * sep);
        if far {
            pts.push(x);
        }
    }
    Some(pts)
}

fn try_configuration(
    m: &MetricField,
    space: &SymPolySpace,
    settings: &ObstructionSettings,
    seed: u64,
    attempt: usize,
) -> Result<PointConfiguration> {
    let n = space.n();
    let big_n = space.dim();
    let kappa = settings.kappa;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(attempt as u64);
    let pts = draw_points(&mut rng, n, (kappa + 2) * big_n, m.domain_radius())
        .ok_or_else(|| Error::InvalidParameter("disc too small for the requested point count".into()))?;
    let a: Vec<Vec<f64>> = pts[..big_n].to_vec();
    let b: Vec<Vec<Vec<f64>>> = (0..kappa)
        .map(|l| pts[(l + 1) * big_n..(l + 2) * big_n].to_vec())
        .collect();
    let c: Vec<Vec<f64>> = pts[(kappa + 1) * big_n..].to_vec();

    let frames = |set: &[Vec<f64>]| -> Result<Vec<Frame>> { set.iter().map(|x| m.frame(x)).collect() };
    let frames_a = frames(&a)?;
    let frames_b = b.iter().map(|set| frames(set)).collect::<Result<Vec<_>>>()?;
    let frames_c = frames(&c)?;

    let tol = &settings.tolerances;
    let mut seg_ab = Vec::with_capacity(kappa);
    let mut seg_bc = Vec::with_capacity(kappa);
    let mut legs_ab = Vec::with_capacity(kappa);
    let mut legs_bc = Vec::with_capacity(kappa);
    let mut decisive_certs = Vec::new();
    for l in 0..kappa {
        let ab = batch_connect(m, &a, &b[l], tol)?;
        let bc = batch_connect(m, &b[l], &c, tol)?;
        let leg_ab = Leg::from_segments(&ab, &frames_a, &frames_b[l]);
        let leg_bc = Leg::from_segments(&bc, &frames_b[l], &frames_c);
        for leg in [&leg_ab, &leg_bc] {
            for cond in leg.decisiveness(space) {
                if !(cond <= settings.cond_max) {
                    return Err(Error::IllConditioned { cond, cond_max: settings.cond_max });
                }
                decisive_certs.push(cond);
            }
        }
        seg_ab.push(ab);
        seg_bc.push(bc);
        legs_ab.push(leg_ab);
        legs_bc.push(leg_bc);
    }
    Ok(PointConfiguration {
        space: space.clone(),
        kappa,
        seed,
        attempts: attempt + 1,
        a,
        b,
        c,
        frames_a,
        frames_b,
        frames_c,
        seg_ab,
        seg_bc,
        legs_ab,
        legs_bc,
        decisive_certs,
    })
}

/// Draw `A`, `B_ℓ`, `C`, solve every connecting geodesic and certify all
/// decisive sets. Failed draws are retried on fresh random streams.
pub fn sample_configuration(
    m: &MetricField,
    space: &SymPolySpace,
    settings: &ObstructionSettings,
    seed: u64,
) -> Result<PointConfiguration> {
    if settings.kappa < 2 {
        return Err(Error::InvalidParameter("kappa must be at least 2".into()));
    }
    if space.n() != m.dim() {
        return Err(Error::InvalidParameter(format!(
            "polynomial space has {} variables, metric has dimension {}",
            space.n(),
            m.dim()
        )));
    }
    let mut last = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        match try_configuration(m, space, settings, seed, attempt) {
            Ok(cfg) => return Ok(cfg),
            Err(e @ Error::InvalidParameter(_)) => return Err(e),
            Err(e) => last = e.to_string(),
        }
    }
    Err(Error::ConfigurationExhausted { attempts: MAX_ATTEMPTS, last })
}

/// `Φ` for one leg: block row `j` is `M_j⁻¹ R_j` where `M_j` stacks the
/// Veronese images of the velocities arriving at target `j` and `R_j` places
/// the Veronese image of the departing velocity from source `i` in block
/// column `i`.
pub fn transport_from_leg(space: &SymPolySpace, leg: &Leg, cond_max: f64) -> Result<DMatrix<f64>> {
    let big_n = space.dim();
    let sources = leg.outgoing.len();
    let targets = leg.outgoing.first().map_or(0, |r| r.len());
    let mut phi = DMatrix::zeros(targets * big_n, sources * big_n);
    for j in 0..targets {
        let arriving: Vec<DVector<f64>> = (0..sources).map(|i| leg.incoming[i][j].clone()).collect();
        let mj = space.veronese_matrix(&arriving);
        let cond = condition_number(&mj);
        if !(cond <= cond_max) {
            return Err(Error::IllConditioned { cond, cond_max });
        }
        let mut rj = DMatrix::zeros(sources, sources * big_n);
        for i in 0..sources {
            let row = space.veronese(leg.outgoing[i][j].as_slice());
            rj.view_mut((i, i * big_n), (1, big_n)).copy_from(&row.transpose());
        }
        let block = mj
            .lu()
            .solve(&rj)
            .ok_or(Error::IllConditioned { cond: f64::INFINITY, cond_max })?;
        phi.view_mut((j * big_n, 0), (big_n, sources * big_n)).copy_from(&block);
    }
    Ok(phi)
}

pub fn transport_map(cfg: &PointConfiguration, l: usize, kind: LegKind, cond_max: f64) -> Result<DMatrix<f64>> {
    let leg = match kind {
        LegKind::AB => &cfg.legs_ab[l],
        LegKind::BC => &cfg.legs_bc[l],
    };
    transport_from_leg(&cfg.space, leg, cond_max)
}

/// Stack of `Φ^{BC}_ℓ Φ^{AB}_ℓ − Φ^{BC}_1 Φ^{AB}_1` over `ℓ = 2 … κ`.
pub fn obstruction_matrix(cfg: &PointConfiguration, cond_max: f64) -> Result<DMatrix<f64>> {
    let composed: Vec<DMatrix<f64>> = (0..cfg.kappa)
        .into_par_iter()
        .map(|l| Ok(transport_map(cfg, l, LegKind::BC, cond_max)? * transport_map(cfg, l, LegKind::AB, cond_max)?))
        .collect::<Result<_>>()?;
    let block = composed[0].nrows();
    let cols = composed[0].ncols();
    let mut out = DMatrix::zeros(block * (cfg.kappa - 1), cols);
    for l in 1..cfg.kappa {
        out.view_mut(((l - 1) * block, 0), (block, cols))
            .copy_from(&(&composed[l] - &composed[0]));
    }
    Ok(out)
}

/// Column offset of the unknowns at point `p` of set `set` (`0` = A,
/// `1..=κ` = B_ℓ, `κ + 1` = C).
fn block_offset(big_n: usize, set: usize, p: usize) -> usize {
    (set * big_n + p) * big_n
}

/// One row `veronese(w₀)·α_src − veronese(w₁)·α_dst` per geodesic; unknowns
/// are the frame coefficients at all `(κ + 2) N` points, `A` first.
pub fn consistency_system(space: &SymPolySpace, legs_ab: &[Leg], legs_bc: &[Leg]) -> DMatrix<f64> {
    let big_n = space.dim();
    let kappa = legs_ab.len();
    let cols = (kappa + 2) * big_n * big_n;
    let rows = 2 * kappa * big_n * big_n;
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for l in 0..kappa {
        for (leg, src, dst) in [(&legs_ab[l], 0, l + 1), (&legs_bc[l], l + 1, kappa + 1)] {
            for i in 0..leg.outgoing.len() {
                for j in 0..leg.outgoing[i].len() {
                    let a = space.veronese(leg.outgoing[i][j].as_slice());
                    let b = space.veronese(leg.incoming[i][j].as_slice());
                    let (ca, cb) = (block_offset(big_n, src, i), block_offset(big_n, dst, j));
                    for c in 0..big_n {
                        out[(r, ca + c)] += a[c];
                        out[(r, cb + c)] -= b[c];
                    }
                    r += 1;
                }
            }
        }
    }
    out
}

/// Re-solve every configuration geodesic from its current initial velocity
/// under `tol`, returning the resulting legs.
pub fn reference_legs(m: &MetricField, cfg: &PointConfiguration, tol: &Tolerances) -> Result<(Vec<Leg>, Vec<Leg>)> {
    let resolve = |segs: &Vec<Vec<GeodesicSegment>>, targets: &[Vec<f64>]| -> Result<Vec<Vec<GeodesicSegment>>> {
        segs.par_iter()
            .map(|row| {
                row.iter()
                    .zip(targets)
                    .map(|(s, xb)| solve_bvp_from(m, &s.start, xb, &s.v_start, tol))
                    .collect::<Result<Vec<_>>>()
            })
            .collect()
    };
    let mut ab = Vec::with_capacity(cfg.kappa);
    let mut bc = Vec::with_capacity(cfg.kappa);
    for l in 0..cfg.kappa {
        ab.push(Leg::from_segments(&resolve(&cfg.seg_ab[l], &cfg.b[l])?, &cfg.frames_a, &cfg.frames_b[l]));
        bc.push(Leg::from_segments(&resolve(&cfg.seg_bc[l], &cfg.c)?, &cfg.frames_b[l], &cfg.frames_c));
    }
    Ok((ab, bc))
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max)
}

/// Frame coefficients at each `A` point of a coordinate-basis field,
/// concatenated.
pub fn restriction_vector(field: &dyn CoefficientField, cfg: &PointConfiguration) -> Result<DVector<f64>> {
    let space = &cfg.space;
    let big_n = space.dim();
    let mut out = DVector::zeros(big_n * cfg.a.len());
    for (i, (x, frame)) in cfg.a.iter().zip(&cfg.frames_a).enumerate() {
        let coeffs = field.coefficients(x)?.coeffs;
        let local = space.induced_map(&frame.e.transpose()) * coeffs;
        out.rows_mut(i * big_n, big_n).copy_from(&local);
    }
    Ok(out)
}

fn hamiltonian_block(space: &SymPolySpace, frame: &Frame) -> DVector<f64> {
    let q = DMatrix::from_diagonal(&DVector::from_vec(frame.signs.clone())) * 0.5;
    space.quadratic_form_power(&q).coeffs
}

/// The trivial solution `(Hᵠ|_{A_1}, …, Hᵠ|_{A_N})` for `d = 2q`, unit norm.
/// In frame coordinates `H = ½ Σ ε_k w_k²` at every point.
pub fn trivial_vector(cfg: &PointConfiguration) -> Option<DVector<f64>> {
    let space = &cfg.space;
    if !space.degree().is_multiple_of(2) {
        return None;
    }
    let big_n = space.dim();
    let mut out = DVector::zeros(big_n * cfg.a.len());
    for (i, frame) in cfg.frames_a.iter().enumerate() {
        out.rows_mut(i * big_n, big_n).copy_from(&hamiltonian_block(space, frame));
    }
    let norm = out.norm();
    Some(out / norm)
}

/// The trivial solution over all points of the consistency system, unit norm.
fn trivial_system_vector(cfg: &PointConfiguration) -> Option<DVector<f64>> {
    let space = &cfg.space;
    if !space.degree().is_multiple_of(2) {
        return None;
    }
    let big_n = space.dim();
    let frames = cfg.frames_a.iter().chain(cfg.frames_b.iter().flatten()).chain(&cfg.frames_c);
    let mut out = DVector::zeros((cfg.kappa + 2) * big_n * big_n);
    for (p, frame) in frames.enumerate() {
        out.rows_mut(p * big_n, big_n).copy_from(&hamiltonian_block(space, frame));
    }
    let norm = out.norm();
    Some(out / norm)
}

#[derive(Debug, Clone)]
pub struct Deflation {
    pub nontrivial_dim: KernelDim,
    pub basis: Vec<DVector<f64>>,
    /// `‖M ĥ‖` for the unit trivial vector `ĥ` (even `d` only).
    pub trivial_residual: Option<f64>,
    /// Whether the trivial vector was judged to lie in the kernel.
    pub trivial_in_kernel: bool,
    /// Singular values of the kernel basis projected off `ĥ`, descending.
    pub projected_singular_values: Vec<f64>,
}

/// Remove the trivial ray from the kernel of the consistency system. For odd
/// `d` nothing is removed. For even `d` the unit trivial vector `ĥ` counts as
/// a kernel vector when `‖S ĥ‖` is below the zero threshold; the basis is then
/// projected onto the complement of `ĥ` and its weakest direction dropped.
pub fn deflate_trivial(system: &DMatrix<f64>, analysis: &KernelAnalysis, cfg: &PointConfiguration) -> Deflation {
    let h = match trivial_system_vector(cfg) {
        None => {
            return Deflation {
                nontrivial_dim: analysis.dim,
                basis: analysis.basis.clone(),
                trivial_residual: None,
                trivial_in_kernel: false,
                projected_singular_values: vec![],
            }
        }
        Some(h) => h,
    };
    let residual = (system * &h).norm();
    let k = analysis.floor_dim();
    let in_kernel = k > 0 && residual <= analysis.threshold;

    let mut projected_singular_values = vec![];
    let mut basis = analysis.basis.clone();
    if in_kernel {
        let b = DMatrix::from_columns(&analysis.basis);
        let proj = &b - &h * (h.transpose() * &b);
        let svd = proj.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|x, y| svd.singular_values[*y].total_cmp(&svd.singular_values[*x]));
        projected_singular_values = order.iter().map(|&i| svd.singular_values[i]).collect();
        basis = order[..k - 1].iter().map(|&i| u.column(i).into_owned()).collect();
    }
    let nontrivial_dim = match analysis.dim {
        KernelDim::Determinate(raw) if in_kernel => KernelDim::Determinate(raw - 1),
        other => other,
    };
    Deflation {
        nontrivial_dim,
        basis,
        trivial_residual: Some(residual),
        trivial_in_kernel: in_kernel,
        projected_singular_values,
    }
}

/// Orthonormal basis of the span of the `A` blocks of consistency-system
/// vectors.
fn a_part_basis(vectors: &[DVector<f64>], len: usize) -> Vec<DVector<f64>> {
    if vectors.is_empty() {
        return vec![];
    }
    let parts: Vec<DVector<f64>> = vectors.iter().map(|v| v.rows(0, len).into_owned()).collect();
    let m = DMatrix::from_columns(&parts);
    let svd = m.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..parts.len()).collect();
    order.sort_by(|x, y| svd.singular_values[*y].total_cmp(&svd.singular_values[*x]));
    order.iter().map(|&i| u.column(i).into_owned()).collect()
}

#[derive(Debug, Clone)]
pub struct ObstructionReport {
    pub metric: String,
    pub n: usize,
    pub d: usize,
    pub kappa: usize,
    pub config_seed: u64,
    pub attempts: usize,
    pub settings: ObstructionSettings,
    /// Singular values of the stacked transport differences, descending.
    pub singular_values: Vec<f64>,
    /// Singular values of the consistency system, descending.
    pub system_singular_values: Vec<f64>,
    /// Measured noise level of the consistency system.
    pub noise: f64,
    /// Zero threshold used for the rank cut.
    pub threshold: f64,
    /// `N² − raw_kernel_dim` (floor count when indeterminate).
    pub rank: usize,
    pub raw_kernel_dim: KernelDim,
    pub nontrivial_kernel_dim: KernelDim,
    pub gap_ratio: f64,
    /// Orthonormal `N²`-vectors spanning the raw kernel (frame coefficients at `A`).
    pub kernel_basis: Vec<DVector<f64>>,
    pub nontrivial_basis: Vec<DVector<f64>>,
    /// Spectral norm of the stacked transport differences.
    pub matrix_norm: f64,
    /// `‖S ĥ‖` for the unit trivial vector (even `d`).
    pub trivial_residual: Option<f64>,
    pub projected_singular_values: Vec<f64>,
    pub max_bvp_residual: f64,
    pub max_condition: f64,
}

/// Everything produced by one obstruction analysis.
#[derive(Debug, Clone)]
pub struct ObstructionRun {
    pub cfg: PointConfiguration,
    /// Stacked transport differences, `(κ − 1) N² × N²`.
    pub matrix: DMatrix<f64>,
    /// Consistency system, `2κN² × (κ + 2)N²`.
    pub system: DMatrix<f64>,
    pub report: ObstructionReport,
}

/// Configuration, obstruction matrix, kernel and deflation in one go.
pub fn analyze(m: &MetricField, d: usize, settings: &ObstructionSettings, seed: u64) -> Result<ObstructionRun> {
    if d == 0 {
        return Err(Error::InvalidParameter("degree must be at least 1".into()));
    }
    let space = SymPolySpace::new(m.dim(), d);
    let cfg = sample_configuration(m, &space, settings, seed)?;
    let matrix = obstruction_matrix(&cfg, settings.cond_max)?;
    let system = consistency_system(&space, &cfg.legs_ab, &cfg.legs_bc);
    if matrix.iter().chain(system.iter()).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateResult {
            point: vec![],
            reason: "obstruction system has non-finite entries".into(),
        });
    }
    let tighter = Tolerances {
        ivp_tol: 0.1 * settings.tolerances.ivp_tol,
        ..settings.tolerances
    };
    let (ref_ab, ref_bc) = reference_legs(m, &cfg, &tighter)?;
    let noise = spectral_norm(&(&system - consistency_system(&space, &ref_ab, &ref_bc)));
    let sigma_max = spectral_norm(&system);
    let threshold = (settings.noise_margin * noise).max(settings.rel_floor * sigma_max);
    let rule = RankRule {
        gap_min: settings.gap_min,
        floor: Floor::Absolute(threshold),
    };
    let analysis = kernel_analysis(&system, &rule);
    let deflation = deflate_trivial(&system, &analysis, &cfg);
    let nn = space.dim() * space.dim();
    let matrix_sv = {
        let mut v: Vec<f64> = matrix.clone().svd(false, false).singular_values.iter().cloned().collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    let report = ObstructionReport {
        metric: m.label().to_string(),
        n: m.dim(),
        d,
        kappa: settings.kappa,
        config_seed: seed,
        attempts: cfg.attempts,
        settings: *settings,
        matrix_norm: matrix_sv.first().cloned().unwrap_or(0.0),
        singular_values: matrix_sv,
        system_singular_values: analysis.singular_values.clone(),
        noise,
        threshold,
        rank: nn.saturating_sub(analysis.floor_dim()),
        raw_kernel_dim: analysis.dim,
        nontrivial_kernel_dim: deflation.nontrivial_dim,
        gap_ratio: analysis.gap_ratio,
        kernel_basis: a_part_basis(&analysis.basis, nn),
        nontrivial_basis: a_part_basis(&deflation.basis, nn),
        trivial_residual: deflation.trivial_residual,
        projected_singular_values: deflation.projected_singular_values,
        max_bvp_residual: cfg.max_bvp_residual(),
        max_condition: cfg.max_condition(),
    };
    Ok(ObstructionRun { cfg, matrix, system, report })
}

/// Candidate integral at `x` from its restrictions at the `A` points, in the
/// coordinate velocity basis.
pub fn reconstruct_integral(
    kernel_vec: &DVector<f64>,
    cfg: &PointConfiguration,
    m: &MetricField,
    x: &[f64],
    settings: &ObstructionSettings,
) -> Result<SymPolyElement> {
    let space = &cfg.space;
    let big_n = space.dim();
    if kernel_vec.len() != big_n * cfg.a.len() {
        return Err(Error::InvalidInput(format!(
            "kernel vector has {} entries, expected {}",
            kernel_vec.len(),
            big_n * cfg.a.len()
        )));
    }
    let target = vec![x.to_vec()];
    let segs = batch_connect(m, &cfg.a, &target, &settings.tolerances)?;
    let frame_x = m.frame(x)?;
    let mut mat = DMatrix::zeros(big_n, big_n);
    let mut rhs = DVector::zeros(big_n);
    for (i, row) in segs.iter().enumerate() {
        let (w0, w1) = endpoint_velocities(&row[0], &cfg.frames_a[i], &frame_x);
        mat.row_mut(i).copy_from(&space.veronese(w1.as_slice()).transpose());
        rhs[i] = kernel_vec.rows(i * big_n, big_n).dot(&space.veronese(w0.as_slice()));
    }
    let cond = condition_number(&mat);
    if !(cond <= settings.cond_max) {
        return Err(Error::IllConditioned { cond, cond_max: settings.cond_max });
    }
    let beta = mat
        .lu()
        .solve(&rhs)
        .ok_or(Error::IllConditioned { cond: f64::INFINITY, cond_max: settings.cond_max })?;
    let e_inv_t = frame_x.e_inv.transpose();
    Ok(space.element(space.induced_map(&e_inv_t) * beta))
}

/// A kernel vector viewed as a coefficient field, reconstructed on demand.
pub struct ReconstructedField<'a> {
    pub vector: DVector<f64>,
    pub cfg: &'a PointConfiguration,
    pub metric: &'a MetricField,
    pub settings: ObstructionSettings,
}

impl CoefficientField for ReconstructedField<'_> {
    fn space(&self) -> &SymPolySpace {
        &self.cfg.space
    }

    fn coefficients(&self, x: &[f64]) -> Result<SymPolyElement> {
        reconstruct_integral(&self.vector, self.cfg, self.metric, x, &self.settings)
    }
}

impl ReconstructedField<'_> {
    /// Reconstruct on a `per_axis^n` grid over `[−R/2, R/2]ⁿ`, skipping
    /// points within the minimum separation of an `A` point.
    pub fn on_grid(&self, per_axis: usize) -> Vec<(Vec<f64>, Result<SymPolyElement>)> {
        let n = self.metric.dim();
        let half = 0.5 * self.metric.domain_radius();
        let total = per_axis.pow(n as u32);
        let sep = MIN_SEPARATION * self.metric.domain_radius();
        let points: Vec<Vec<f64>> = (0..total)
            .map(|idx| {
                let mut rest = idx;
                (0..n)
                    .map(|_| {
                        let k = rest % per_axis;
                        rest /= per_axis;
                        -half + 2.0 * half * k as f64 / (per_axis - 1).max(1) as f64
                    })
                    .collect()
            })
            .filter(|x: &Vec<f64>| {
                self.cfg
                    .a
                    .iter()
                    .all(|a| a.iter().zip(x).map(|(p, q)| (p - q).powi(2)).sum::<f64>() >= sep * sep)
            })
            .collect();
        points
            .into_par_iter()
            .map(|x| {
                let r = self.coefficients(&x);
                (x, r)
            })
            .collect()
    }
}
