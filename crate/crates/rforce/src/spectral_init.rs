//! Reservoir connectivity construction.
//!
//! Two families of initialization are provided: the classic sparse normal
//! draw, and spectral construction where the reservoir matrix is assembled
//! from an explicit eigendecomposition `M = V B V'` with `V` orthogonal and
//! `B` the real block form of a planned eigenvalue cloud. The planner places
//! eigenvalues on circular arcs in the upper half plane (conjugates are
//! implied); arc radii, angular ranges and per-arc densities follow the
//! segmented nonuniform layout, with six ablation layouts kept around for
//! comparison sweeps.

use nalgebra::{Complex, DMatrix};
use rand::distributions::{Bernoulli, Distribution, Uniform};
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Base radius multipliers of the four-arc construction; realized radii are
/// these times the gain.
pub const ARC_RADII: [f64; 4] = [0.7, 0.72, 0.9, 1.2];

/// Radius multipliers of the nonuniform-spacing ablations.
pub const ABLATION_RADII: [f64; 4] = [0.70, 0.81, 0.88, 1.2];

/// Anchor of the density rule: arcs near this radius receive more weight.
const DENSITY_ANCHOR: f64 = 1.15;

/// Lower clamp for the density denominator `|r - anchor|`, which would
/// otherwise blow up when an arc lands exactly on the anchor.
const DENSITY_DENOM_FLOOR: f64 = 1e-3;

/// Largest-radius threshold switching the planner into capped mode, where
/// the outer arc receives a fixed 1% of the eigenvalues.
const CAP_RADIUS: f64 = 1.55;
const CAP_FRACTION: f64 = 0.01;

/// How the reservoir was initialized. Carried through records and checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitKind {
    Normal { sparsity: f64, g: f64 },
    Rforce { g: f64 },
    Ablation { variant: AblationKind, g: f64 },
}

impl std::fmt::Display for InitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitKind::Normal { .. } => write!(f, "normal"),
            InitKind::Rforce { .. } => write!(f, "rforce"),
            InitKind::Ablation { variant, .. } => write!(f, "{variant}"),
        }
    }
}

/// Ablation layouts of the arc placement, ordered as studied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationKind {
    /// A single half circle of radius `g`.
    OneCircle,
    /// `m` concentric half circles, uniformly spaced radii, equal counts.
    FourUniform,
    /// Four half circles at the nonuniform radii, equal counts.
    FourNonuniform,
    /// Four half circles at the nonuniform radii, density-weighted counts.
    FourNonuniformDensity,
    /// Quarter-plane segments at the nonuniform radii, density-weighted.
    SegmentedNonuniformDensity,
    /// Segmented variant with the outer arc pinned to the second arc's
    /// angular range for every gain.
    SegmentedFixedOverlap,
}

impl std::fmt::Display for AblationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AblationKind::OneCircle => "one-circle",
            AblationKind::FourUniform => "four-uniform",
            AblationKind::FourNonuniform => "four-nonuniform",
            AblationKind::FourNonuniformDensity => "four-nonuniform-density",
            AblationKind::SegmentedNonuniformDensity => "segmented-nonuniform-density",
            AblationKind::SegmentedFixedOverlap => "segmented-fixed-overlap",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for AblationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "one-circle" => AblationKind::OneCircle,
            "four-uniform" => AblationKind::FourUniform,
            "four-nonuniform" => AblationKind::FourNonuniform,
            "four-nonuniform-density" => AblationKind::FourNonuniformDensity,
            "segmented-nonuniform-density" => AblationKind::SegmentedNonuniformDensity,
            "segmented-fixed-overlap" => AblationKind::SegmentedFixedOverlap,
            other => return Err(Error::argument(format!("unknown ablation kind `{other}`"))),
        })
    }
}

/// An N x N reservoir connectivity matrix plus provenance.
#[derive(Clone, Debug)]
pub struct ReservoirMatrix {
    pub entries: DMatrix<f64>,
    pub init_kind: InitKind,
}

impl ReservoirMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }
}

/// One circular arc of planned eigenvalues in the upper half plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumArc {
    pub radius: f64,
    pub theta_min_deg: f64,
    pub theta_max_deg: f64,
    pub count: usize,
}

/// Placement plan for `n_half` upper-half-plane eigenvalues; the conjugate
/// half is implied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPlan {
    pub arcs: Vec<SpectrumArc>,
    pub g: f64,
    pub n_half: usize,
    pub kind: InitKind,
}

impl SpectrumPlan {
    pub fn total_count(&self) -> usize {
        self.arcs.iter().map(|a| a.count).sum()
    }

    fn validate(&self) -> Result<()> {
        if self.total_count() != self.n_half {
            return Err(Error::argument("arc counts do not sum to n/2"));
        }
        for a in &self.arcs {
            if a.radius <= 0.0 {
                return Err(Error::argument("arc radius must be positive"));
            }
            if !(0.0..=180.0).contains(&a.theta_min_deg)
                || !(0.0..=180.0).contains(&a.theta_max_deg)
                || a.theta_min_deg > a.theta_max_deg
            {
                return Err(Error::argument("arc angular range invalid"));
            }
        }
        Ok(())
    }
}

/// An eigenvalue sampled from a plan, tagged with the arc it came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedEigenvalue {
    pub re: f64,
    pub im: f64,
    pub arc_index: usize,
}

impl PlannedEigenvalue {
    pub fn value(&self) -> Complex<f64> {
        Complex::new(self.re, self.im)
    }
}

/// Orthogonal eigenvector basis with recorded conjugate-pair columns.
#[derive(Clone, Debug)]
pub struct OrthogonalBasis {
    pub columns: DMatrix<f64>,
    pub pairing: Vec<(usize, usize)>,
}

impl OrthogonalBasis {
    pub fn n(&self) -> usize {
        self.columns.nrows()
    }

    /// Max-norm deviation of `V'V` from the identity.
    pub fn orthogonality_defect(&self) -> f64 {
        let vtv = self.columns.tr_mul(&self.columns);
        let n = vtv.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((vtv[(i, j)] - target).abs());
            }
        }
        worst
    }
}

/// Sparse normal reservoir: each entry is zero with probability `1 - p`,
/// otherwise drawn from `N(0, 1/sqrt(p n))`.
pub fn sample_normal_reservoir(n: usize, p: f64, seed: u64) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::argument("reservoir needs at least 2 units"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::argument("sparsity p must lie in (0, 1]"));
    }
    let mut rng = stream(seed, Purpose::Reservoir);
    let keep = Bernoulli::new(p).expect("validated p");
    let normal = Normal::new(0.0, 1.0 / (p * n as f64).sqrt()).expect("positive std");
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let on = keep.sample(&mut rng);
            let v = normal.sample(&mut rng);
            if on {
                m[(i, j)] = v;
            }
        }
    }
    Ok(m)
}

/// Feedback (or error-injection) weights, i.i.d. uniform on (-1, 1).
pub fn sample_feedback(n: usize, k: usize, seed: u64) -> Result<DMatrix<f64>> {
    sample_uniform_matrix(n, k, seed, Purpose::Feedback)
}

pub(crate) fn sample_uniform_matrix(
    n: usize,
    k: usize,
    seed: u64,
    purpose: Purpose,
) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::argument("matrix needs at least 2 rows"));
    }
    if k < 1 {
        return Err(Error::argument("matrix needs at least 1 column"));
    }
    let mut rng = stream(seed, purpose);
    let dist = Uniform::new(-1.0f64, 1.0);
    Ok(DMatrix::from_fn(n, k, |_, _| dist.sample(&mut rng)))
}

/// Orthogonal basis with conjugate-pair structure, obtained from the real
/// Schur form of an antisymmetric matrix `A = G - G'` with `G` standard
/// normal. `A` is orthogonally similar to a block-diagonal matrix of 2x2
/// rotation generators, so the Schur vectors come in invariant-plane pairs:
/// exactly the column pairs a real spectral assembly needs.
pub fn generate_orthogonal_basis(n: usize, seed: u64) -> Result<OrthogonalBasis> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::argument("basis size must be even and >= 2"));
    }
    let mut rng = stream(seed, Purpose::Basis);
    let normal = Normal::new(0.0f64, 1.0).expect("unit std");
    let gauss: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| normal.sample(&mut rng));
    let antisym = &gauss - gauss.transpose();

    let scale = antisym.amax();
    let schur = nalgebra::linalg::Schur::try_new(antisym, f64::EPSILON, 100 * n).ok_or_else(
        || Error::Numerical(format!("Schur decomposition did not converge for n = {n}")),
    )?;
    let (q, t) = schur.unpack();

    // Read the pair structure off the quasi-triangular factor: a nonzero
    // subdiagonal entry marks a 2x2 block. For antisymmetric input every
    // block is generically 2x2; leftover 1x1 blocks (beta ~ 0) are paired
    // with each other so the assembly stays well defined.
    let tol = 1e-10 * scale.max(1.0);
    let mut pairing = Vec::with_capacity(n / 2);
    let mut singles = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].abs() > tol {
            pairing.push((i, i + 1));
            i += 2;
        } else {
            singles.push(i);
            i += 1;
        }
    }
    for pair in singles.chunks(2) {
        if let [a, b] = *pair {
            pairing.push((a, b));
        }
    }
    if pairing.len() != n / 2 {
        return Err(Error::Numerical(
            "Schur form produced an odd number of unpaired columns".into(),
        ));
    }

    let mut basis = OrthogonalBasis { columns: q, pairing };
    if basis.orthogonality_defect() > 1e-8 {
        gram_schmidt_in_place(&mut basis.columns);
        if basis.orthogonality_defect() > 1e-8 {
            return Err(Error::Numerical(
                "basis re-orthonormalization failed to reach tolerance".into(),
            ));
        }
    }
    Ok(basis)
}

fn gram_schmidt_in_place(v: &mut DMatrix<f64>) {
    let n = v.ncols();
    for j in 0..n {
        for i in 0..j {
            let proj = v.column(i).dot(&v.column(j));
            let vi = v.column(i).clone_owned();
            v.column_mut(j).axpy(-proj, &vi, 1.0);
        }
        let norm = v.column(j).norm();
        if norm > 0.0 {
            v.column_mut(j).scale_mut(1.0 / norm);
        }
    }
}

/// Density weights of the four-arc rule over `radii` (already scaled by the
/// gain). Returns per-arc fractions summing to 1. Above the cap radius the
/// outer arc is pinned to 1% and the rest share 99% by weight.
fn density_fractions(radii: &[f64], g: f64) -> Vec<f64> {
    let m = radii.len();
    let weight = |r: f64| g * g / (r - DENSITY_ANCHOR).abs().max(DENSITY_DENOM_FLOOR);
    let r_max = radii.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if r_max <= CAP_RADIUS {
        let ls: Vec<f64> = radii.iter().map(|&r| weight(r)).collect();
        let total: f64 = ls.iter().sum();
        ls.iter().map(|l| l / total).collect()
    } else {
        let ls: Vec<f64> = radii[..m - 1].iter().map(|&r| weight(r)).collect();
        let total: f64 = ls.iter().sum();
        let mut out: Vec<f64> = ls
            .iter()
            .map(|l| (1.0 - CAP_FRACTION) * l / total)
            .collect();
        out.push(CAP_FRACTION);
        out
    }
}

/// Convert fractions into integer counts summing to `total` by the
/// largest-remainder method. Ties resolve to the lower index.
fn largest_remainder(fractions: &[f64], total: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = Vec::with_capacity(fractions.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(fractions.len());
    let mut assigned = 0usize;
    for (i, &f) in fractions.iter().enumerate() {
        let exact = f * total as f64;
        let floor = exact.floor() as usize;
        counts.push(floor);
        assigned += floor;
        remainders.push((i, exact - floor as f64));
    }
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for &(i, _) in remainders.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Angular ranges (degrees) of the three inner arcs for a given gain.
fn inner_angle_ranges(g: f64) -> [(f64, f64); 3] {
    if g < 1.8 {
        [(60.0, 120.0), (120.0, 180.0), (0.0, 60.0)]
    } else {
        [(72.0, 144.0), (0.0, 72.0), (144.0, 180.0)]
    }
}

/// Four-arc segmented plan: radii `[0.7, 0.72, 0.9, 1.2] * g`, density per
/// the inverse-distance rule, inner arcs on gain-dependent sectors, and the
/// outer arc sharing the third arc's sector below gain 1.4 and the first
/// arc's sector above.
pub fn plan_rforce(g: f64, n: usize) -> Result<SpectrumPlan> {
    if g <= 0.0 {
        return Err(Error::argument("gain must be positive"));
    }
    if n < 2 || n % 2 != 0 {
        return Err(Error::argument("unit count must be even and >= 2"));
    }
    let radii: Vec<f64> = ARC_RADII.iter().map(|r| r * g).collect();
    let fractions = density_fractions(&radii, g);
    let counts = largest_remainder(&fractions, n / 2);
    let inner = inner_angle_ranges(g);
    let outer = if g < 1.4 { inner[2] } else { inner[0] };
    let ranges = [inner[0], inner[1], inner[2], outer];

    let arcs = radii
        .iter()
        .zip(ranges.iter())
        .zip(counts.iter())
        .map(|((&radius, &(lo, hi)), &count)| SpectrumArc {
            radius,
            theta_min_deg: lo,
            theta_max_deg: hi,
            count,
        })
        .collect();
    let plan = SpectrumPlan {
        arcs,
        g,
        n_half: n / 2,
        kind: InitKind::Rforce { g },
    };
    plan.validate()?;
    Ok(plan)
}

/// Ablation layouts. `m` is the circle count of the uniform-spacing variant
/// and is ignored by the four fixed-radius layouts.
pub fn plan_ablation(kind: AblationKind, g: f64, n: usize, m: usize) -> Result<SpectrumPlan> {
    if g <= 0.0 {
        return Err(Error::argument("gain must be positive"));
    }
    if n < 2 || n % 2 != 0 {
        return Err(Error::argument("unit count must be even and >= 2"));
    }
    if m < 1 {
        return Err(Error::argument("circle count m must be >= 1"));
    }
    let n_half = n / 2;
    let full = (0.0, 180.0);
    let (radii, ranges, fractions): (Vec<f64>, Vec<(f64, f64)>, Vec<f64>) = match kind {
        AblationKind::OneCircle => (vec![g], vec![full], vec![1.0]),
        AblationKind::FourUniform => {
            // Endpoints come from the gain sweep range [1, 2]: the largest
            // circle at 1.2 * g / g_min, the smallest at 1.4 * g / g_max.
            let (g_min, g_max) = (1.0, 2.0);
            let r_lo = 1.4 * g / g_max;
            let r_hi = 1.2 * g / g_min;
            let radii: Vec<f64> = (0..m)
                .map(|i| {
                    if m == 1 {
                        r_hi
                    } else {
                        r_lo + (r_hi - r_lo) * i as f64 / (m - 1) as f64
                    }
                })
                .collect();
            let fr = vec![1.0 / m as f64; m];
            (radii, vec![full; m], fr)
        }
        AblationKind::FourNonuniform => {
            let radii: Vec<f64> = ABLATION_RADII.iter().map(|r| r * g).collect();
            (radii, vec![full; 4], vec![0.25; 4])
        }
        AblationKind::FourNonuniformDensity => {
            let radii: Vec<f64> = ABLATION_RADII.iter().map(|r| r * g).collect();
            let fr = density_fractions(&radii, g);
            (radii, vec![full; 4], fr)
        }
        AblationKind::SegmentedNonuniformDensity => {
            let radii: Vec<f64> = ABLATION_RADII.iter().map(|r| r * g).collect();
            let fr = density_fractions(&radii, g);
            let quarters = vec![(0.0, 45.0), (45.0, 90.0), (90.0, 135.0), (135.0, 180.0)];
            (radii, quarters, fr)
        }
        AblationKind::SegmentedFixedOverlap => {
            let radii: Vec<f64> = ABLATION_RADII.iter().map(|r| r * g).collect();
            let fr = density_fractions(&radii, g);
            // Outer arc pinned to the second arc's sector for every gain.
            let sectors = vec![(0.0, 45.0), (45.0, 90.0), (90.0, 135.0), (45.0, 90.0)];
            (radii, sectors, fr)
        }
    };
    let counts = largest_remainder(&fractions, n_half);
    let arcs = radii
        .iter()
        .zip(ranges.iter())
        .zip(counts.iter())
        .map(|((&radius, &(lo, hi)), &count)| SpectrumArc {
            radius,
            theta_min_deg: lo,
            theta_max_deg: hi,
            count,
        })
        .collect();
    let plan = SpectrumPlan {
        arcs,
        g,
        n_half,
        kind: InitKind::Ablation { variant: kind, g },
    };
    plan.validate()?;
    Ok(plan)
}

/// Draw the concrete eigenvalues of a plan: per arc, `count` angles uniform
/// on the closed angular range.
pub fn sample_plan_eigenvalues(plan: &SpectrumPlan, seed: u64) -> Vec<PlannedEigenvalue> {
    let mut rng = stream(seed, Purpose::Angles);
    let mut out = Vec::with_capacity(plan.n_half);
    for (arc_index, arc) in plan.arcs.iter().enumerate() {
        let dist = Uniform::new_inclusive(
            arc.theta_min_deg.to_radians(),
            arc.theta_max_deg.to_radians(),
        );
        for _ in 0..arc.count {
            let theta = dist.sample(&mut rng);
            out.push(PlannedEigenvalue {
                re: arc.radius * theta.cos(),
                im: arc.radius * theta.sin(),
                arc_index,
            });
        }
    }
    out
}

/// Realize a plan on a basis: `M = V B V'` where `B` carries one
/// `[[a, b], [-b, a]]` block per planned eigenvalue `a + ib` on the paired
/// columns. All arithmetic is real, so `M` is exactly real with spectrum
/// equal to the sampled values and their conjugates.
pub fn assemble_reservoir(
    basis: &OrthogonalBasis,
    plan: &SpectrumPlan,
    seed: u64,
) -> Result<ReservoirMatrix> {
    plan.validate()?;
    let n = basis.n();
    if n != 2 * plan.total_count() {
        return Err(Error::argument(format!(
            "basis dimension {n} does not match plan size {}",
            2 * plan.total_count()
        )));
    }
    if basis.pairing.len() != plan.n_half {
        return Err(Error::argument("basis pairing does not cover all columns"));
    }
    let eigs = sample_plan_eigenvalues(plan, seed);
    Ok(assemble_from_eigenvalues(basis, plan, &eigs))
}

/// Deterministic assembly given already-sampled eigenvalues.
pub fn assemble_from_eigenvalues(
    basis: &OrthogonalBasis,
    plan: &SpectrumPlan,
    eigs: &[PlannedEigenvalue],
) -> ReservoirMatrix {
    let n = basis.n();
    let mut block = DMatrix::zeros(n, n);
    for (eig, &(c1, c2)) in eigs.iter().zip(basis.pairing.iter()) {
        block[(c1, c1)] = eig.re;
        block[(c1, c2)] = eig.im;
        block[(c2, c1)] = -eig.im;
        block[(c2, c2)] = eig.re;
    }
    let vb = &basis.columns * block;
    let entries = vb * basis.columns.transpose();
    ReservoirMatrix {
        entries,
        init_kind: plan.kind.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_reservoir_moments() {
        let m = sample_normal_reservoir(1000, 0.1, 7).unwrap();
        let nonzero: Vec<f64> = m.iter().cloned().filter(|v| *v != 0.0).collect();
        let frac = nonzero.len() as f64 / 1e6;
        assert!((0.09..=0.11).contains(&frac), "nonzero fraction {frac}");
        let mean = nonzero.iter().sum::<f64>() / nonzero.len() as f64;
        let var =
            nonzero.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nonzero.len() as f64;
        let std = var.sqrt();
        assert!((std - 0.1).abs() < 0.01, "nonzero std {std}");
    }

    #[test]
    fn normal_reservoir_small_and_deterministic() {
        let m = sample_normal_reservoir(2, 1.0, 0).unwrap();
        assert_eq!(m.nrows(), 2);
        assert!(m.iter().all(|v| v.is_finite()));
        let a = sample_normal_reservoir(1000, 0.1, 7).unwrap();
        let b = sample_normal_reservoir(1000, 0.1, 7).unwrap();
        assert_eq!(a, b);
        assert!(sample_normal_reservoir(1, 0.5, 0).is_err());
        assert!(sample_normal_reservoir(10, 0.0, 0).is_err());
        assert!(sample_normal_reservoir(10, 1.5, 0).is_err());
    }

    #[test]
    fn feedback_uniform_range_and_mean() {
        let w = sample_feedback(1000, 1, 3).unwrap();
        assert!(w.iter().all(|v| *v > -1.0 && *v < 1.0));
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        assert!(mean.abs() < 0.1, "mean {mean}");
        let w2 = sample_feedback(4, 66, 1).unwrap();
        assert_eq!((w2.nrows(), w2.ncols()), (4, 66));
        assert_eq!(sample_feedback(1000, 1, 3).unwrap(), w);
    }

    #[test]
    fn basis_orthogonality() {
        let b = generate_orthogonal_basis(256, 5).unwrap();
        assert!(b.orthogonality_defect() <= 1e-8);
        assert_eq!(b.pairing.len(), 128);
    }

    #[test]
    fn basis_two_by_two() {
        let b = generate_orthogonal_basis(2, 0).unwrap();
        let det = b.columns[(0, 0)] * b.columns[(1, 1)] - b.columns[(0, 1)] * b.columns[(1, 0)];
        assert!((det.abs() - 1.0).abs() < 1e-12);
        assert!(generate_orthogonal_basis(3, 0).is_err());
    }

    #[test]
    fn basis_roundtrips_antisymmetric_spectrum() {
        // Rebuild the antisymmetric source from its own Schur pieces: with
        // the basis columns and the block magnitudes, V B V' must equal A.
        let n = 64;
        let seed = 11;
        let mut rng = stream(seed, Purpose::Basis);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let gauss = DMatrix::from_fn(n, n, |_, _| normal.sample(&mut rng));
        let antisym = &gauss - gauss.transpose();

        let basis = generate_orthogonal_basis(n, seed).unwrap();
        // Recover each block from A directly: b = v1' A v2.
        let mut block = DMatrix::zeros(n, n);
        for &(c1, c2) in &basis.pairing {
            let v1 = basis.columns.column(c1);
            let v2 = basis.columns.column(c2);
            let b = (antisym.clone() * v2).dot(&v1);
            block[(c1, c2)] = b;
            block[(c2, c1)] = -b;
        }
        let rebuilt = &basis.columns * block * basis.columns.transpose();
        let defect = (&rebuilt - &antisym).amax();
        assert!(defect <= 1e-8, "round-trip defect {defect}");
    }

    #[test]
    fn rforce_plan_g15() {
        let plan = plan_rforce(1.5, 1000).unwrap();
        let radii: Vec<f64> = plan.arcs.iter().map(|a| a.radius).collect();
        for (r, want) in radii.iter().zip([1.05, 1.08, 1.35, 1.8]) {
            assert!((r - want).abs() < 1e-12);
        }
        assert_eq!(plan.total_count(), 500);
        // Densities: weights g^2 / |r - 1.15| = (22.5, 32.1429, 11.25),
        // 99% shared over the inner three plus a fixed 1% outer arc.
        let fr: Vec<f64> = plan
            .arcs
            .iter()
            .map(|a| a.count as f64 / 500.0)
            .collect();
        for (f, want) in fr.iter().zip([0.3381, 0.4830, 0.1690, 0.01]) {
            assert!((f - want).abs() < 2e-3, "fraction {f} vs {want}");
        }
        // Outer arc copies the first arc's range at this gain.
        assert_eq!(
            (plan.arcs[3].theta_min_deg, plan.arcs[3].theta_max_deg),
            (60.0, 120.0)
        );
        assert_eq!(
            (plan.arcs[2].theta_min_deg, plan.arcs[2].theta_max_deg),
            (0.0, 60.0)
        );
    }

    #[test]
    fn rforce_plan_g12_uncapped() {
        let plan = plan_rforce(1.2, 1000).unwrap();
        let radii: Vec<f64> = plan.arcs.iter().map(|a| a.radius).collect();
        for (r, want) in radii.iter().zip([0.84, 0.864, 1.08, 1.44]) {
            assert!((r - want).abs() < 1e-12);
        }
        let fr: Vec<f64> = plan
            .arcs
            .iter()
            .map(|a| a.count as f64 / 500.0)
            .collect();
        for (f, want) in fr.iter().zip([0.1319, 0.1430, 0.5841, 0.1410]) {
            assert!((f - want).abs() < 2e-3, "fraction {f} vs {want}");
        }
        // r_max = 1.44 <= 1.55: all four arcs share by weight, outer arc
        // copies the third arc's range below gain 1.4.
        assert_eq!(
            (plan.arcs[3].theta_min_deg, plan.arcs[3].theta_max_deg),
            (0.0, 60.0)
        );
        assert!(plan.arcs.iter().all(|a| a.count > 0));
    }

    #[test]
    fn ablation_layouts() {
        let one = plan_ablation(AblationKind::OneCircle, 1.5, 100, 1).unwrap();
        assert_eq!(one.arcs.len(), 1);
        assert!((one.arcs[0].radius - 1.5).abs() < 1e-12);
        assert_eq!(one.arcs[0].count, 50);

        let uni = plan_ablation(AblationKind::FourUniform, 1.0, 1000, 4).unwrap();
        let radii: Vec<f64> = uni.arcs.iter().map(|a| a.radius).collect();
        assert!((radii[0] - 0.7).abs() < 1e-12);
        assert!((radii[3] - 1.2).abs() < 1e-12);
        let counts: Vec<usize> = uni.arcs.iter().map(|a| a.count).collect();
        assert_eq!(counts, vec![125, 125, 125, 125]);

        let nonuni = plan_ablation(AblationKind::FourNonuniform, 2.0, 8, 4).unwrap();
        let radii: Vec<f64> = nonuni.arcs.iter().map(|a| a.radius).collect();
        for (r, want) in radii.iter().zip([1.4, 1.62, 1.76, 2.4]) {
            assert!((r - want).abs() < 1e-12);
        }

        let pinned = plan_ablation(AblationKind::SegmentedFixedOverlap, 1.0, 100, 4).unwrap();
        assert_eq!(
            (pinned.arcs[3].theta_min_deg, pinned.arcs[3].theta_max_deg),
            (45.0, 90.0)
        );
    }

    #[test]
    fn assemble_pure_rotation_block() {
        let basis = OrthogonalBasis {
            columns: DMatrix::identity(2, 2),
            pairing: vec![(0, 1)],
        };
        let plan = SpectrumPlan {
            arcs: vec![SpectrumArc {
                radius: 1.0,
                theta_min_deg: 90.0,
                theta_max_deg: 90.0,
                count: 1,
            }],
            g: 1.0,
            n_half: 1,
            kind: InitKind::Rforce { g: 1.0 },
        };
        let m = assemble_reservoir(&basis, &plan, 0).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((&m.entries - &want).amax() < 1e-12);
    }

    #[test]
    fn assemble_matches_planned_spectrum() {
        let n = 128;
        let plan = plan_rforce(1.5, n).unwrap();
        let basis = generate_orthogonal_basis(n, 9).unwrap();
        let eigs = sample_plan_eigenvalues(&plan, 21);
        let m = assemble_from_eigenvalues(&basis, &plan, &eigs);
        assert!(m.is_finite());

        let mut planned: Vec<(f64, f64)> = eigs
            .iter()
            .flat_map(|e| [(e.re, e.im), (e.re, -e.im)])
            .collect();
        let mut computed: Vec<(f64, f64)> = m
            .entries
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|c| (c.re, c.im))
            .collect();
        let key = |a: &(f64, f64), b: &(f64, f64)| {
            a.0.partial_cmp(&b.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap())
        };
        planned.sort_by(key);
        computed.sort_by(key);
        for (p, c) in planned.iter().zip(computed.iter()) {
            assert!((p.0 - c.0).abs() < 1e-6 && (p.1 - c.1).abs() < 1e-6);
        }
    }

    #[test]
    fn assemble_dimension_mismatch() {
        let plan = plan_rforce(1.5, 64).unwrap();
        let basis = generate_orthogonal_basis(32, 1).unwrap();
        assert!(assemble_reservoir(&basis, &plan, 0).is_err());
    }

    #[test]
    fn counts_sum_exactly_on_gain_grid() {
        for i in 0..=10 {
            let g = 1.0 + 0.1 * i as f64;
            let plan = plan_rforce(g, 1000).unwrap();
            assert_eq!(plan.total_count(), 500, "g = {g}");
        }
    }

    #[test]
    fn cap_rule_matches_positivity() {
        for i in 0..=10 {
            let g = 1.0 + 0.1 * i as f64;
            let plan = plan_rforce(g, 1000).unwrap();
            let r_max = plan
                .arcs
                .iter()
                .map(|a| a.radius)
                .fold(f64::NEG_INFINITY, f64::max);
            let capped = r_max > CAP_RADIUS;
            let outer_frac = plan.arcs[3].count as f64 / 500.0;
            if capped {
                assert!((outer_frac - 0.01).abs() < 2e-3, "g = {g}");
            } else {
                assert!(plan.arcs.iter().all(|a| a.count > 0), "g = {g}");
                assert!(outer_frac > 0.01, "g = {g}");
            }
        }
    }
}
