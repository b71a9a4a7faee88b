//! Reference family generators for tests, sweeps, and demos.
//!
//! Five kinds are provided: orthonormal coordinate bases, sampled
//! trigonometric families with shifted frequencies, non-orthogonal
//! triangular bases (dense Gram matrix, so the weighted double sum really
//! differs from the quadratic sum), random orthogonal bases with
//! prescribed-decay perturbations, and a degenerate negative control with
//! two equal candidate vectors.
//!
//! Generation is a pure function of the spec: identical specs, including
//! the seed, produce bitwise-identical families.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{biorthogonal, BasisFamily, DualFamily, PerturbedFamily};
use crate::sampling::DeterministicSampler;
use crate::DEFAULT_RANK_TOL;

/// Family kinds the generator knows how to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// Identity coordinate columns; the reference orthonormal case.
    Orthonormal,
    /// L2-normalized samples of trigonometric functions on an equispaced
    /// grid over one period; candidates use shifted frequencies.
    FourierPerturbed,
    /// Normalized prefix-of-ones columns; independent but far from
    /// orthogonal.
    Triangular,
    /// Random orthogonal base columns with random-direction perturbations
    /// of prescribed norm.
    RandomDecay,
    /// Negative control: the candidate family repeats its first vector.
    Degenerate,
}

/// Recipe for one generated family pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub kind: FamilyKind,
    pub dim: usize,
    pub count: usize,
    /// Decay exponent: the i-th perturbation norm is `scale * i^(-alpha)`.
    #[serde(default)]
    pub alpha: f64,
    /// Scale factor of the perturbation norms.
    #[serde(default)]
    pub scale: f64,
    /// Per-index frequency shifts for the trigonometric kind; empty means
    /// all zero.
    #[serde(default)]
    pub frequency_shifts: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl CorpusSpec {
    /// Whether the prescribed decay keeps the sum of squared perturbation
    /// norms convergent in the infinite limit (`alpha > 1/2`).
    pub fn quadratic_regime(&self) -> bool {
        self.alpha > 0.5
    }
}

/// A generated family pair together with the dual that links them.
#[derive(Debug, Clone)]
pub struct GeneratedFamily {
    pub basis: BasisFamily,
    pub dual: DualFamily,
    pub perturbed: PerturbedFamily,
}

/// Metadata sidecar content for a generated spec.
pub fn metadata_json(spec: &CorpusSpec) -> serde_json::Value {
    serde_json::json!({
        "spec": spec,
        "quadratic_regime": spec.quadratic_regime(),
    })
}

fn validate(spec: &CorpusSpec) -> Result<()> {
    if spec.dim == 0 {
        return Err(Error::BadSpec("dimension must be at least 1".into()));
    }
    if spec.count == 0 {
        return Err(Error::BadSpec("count must be at least 1".into()));
    }
    if spec.count > spec.dim {
        return Err(Error::BadSpec(format!(
            "count {} exceeds dimension {}",
            spec.count, spec.dim
        )));
    }
    if !spec.alpha.is_finite() {
        return Err(Error::BadSpec(format!("decay exponent {} is not finite", spec.alpha)));
    }
    if !spec.scale.is_finite() || spec.scale < 0.0 {
        return Err(Error::BadSpec(format!(
            "perturbation scale {} must be finite and nonnegative",
            spec.scale
        )));
    }
    if spec.frequency_shifts.iter().any(|s| !s.is_finite()) {
        return Err(Error::BadSpec("frequency shifts contain a non-finite value".into()));
    }
    match spec.kind {
        FamilyKind::FourierPerturbed => {
            if !(spec.frequency_shifts.is_empty() || spec.frequency_shifts.len() == spec.count) {
                return Err(Error::BadSpec(format!(
                    "{} frequency shifts for {} vectors (need none or one per vector)",
                    spec.frequency_shifts.len(),
                    spec.count
                )));
            }
        }
        FamilyKind::Degenerate if spec.count < 2 => {
            return Err(Error::BadSpec(
                "degenerate kind needs at least two vectors to repeat one".into(),
            ));
        }
        _ => {}
    }
    Ok(())
}

/// Builds the family pair described by the spec.
pub fn generate(spec: &CorpusSpec) -> Result<GeneratedFamily> {
    validate(spec)?;
    let mut sampler = DeterministicSampler::new(spec.seed);
    match spec.kind {
        FamilyKind::Orthonormal => {
            let base = identity_columns(spec.dim, spec.count);
            from_decay_deltas(spec, base, &mut sampler)
        }
        FamilyKind::Triangular => {
            let base = triangular_columns(spec.dim, spec.count);
            from_decay_deltas(spec, base, &mut sampler)
        }
        FamilyKind::RandomDecay => {
            let base = random_orthogonal_columns(spec.dim, spec.count, &mut sampler)?;
            from_decay_deltas(spec, base, &mut sampler)
        }
        FamilyKind::FourierPerturbed => fourier_family(spec),
        FamilyKind::Degenerate => degenerate_family(spec),
    }
}

/// First `count` coordinate columns of the identity.
fn identity_columns(dim: usize, count: usize) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(dim, count);
    for i in 0..count {
        m[(i, i)] = 1.0;
    }
    m
}

/// Column i (1-based) holds 1/sqrt(i) in its first i coordinates.
fn triangular_columns(dim: usize, count: usize) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(dim, count);
    for j in 0..count {
        let value = 1.0 / ((j + 1) as f64).sqrt();
        for i in 0..=j {
            m[(i, j)] = value;
        }
    }
    m
}

/// Orthonormal frame drawn from the rotation-invariant distribution: thin QR
/// of a Gaussian matrix with the sign of each R diagonal entry fixed.
fn random_orthogonal_columns(
    dim: usize,
    count: usize,
    sampler: &mut DeterministicSampler,
) -> Result<DMatrix<f64>> {
    let gaussian = DMatrix::<f64>::from_fn(dim, count, |_, _| sampler.normal());
    let qr = gaussian.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..count {
        if r[(j, j)] < 0.0 {
            for i in 0..dim {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(q)
}

/// Random-direction deltas with norms `scale * i^(-alpha)`, attached to the
/// dual of the given base.
fn from_decay_deltas(
    spec: &CorpusSpec,
    base: DMatrix<f64>,
    sampler: &mut DeterministicSampler,
) -> Result<GeneratedFamily> {
    let basis = BasisFamily::new(base, DEFAULT_RANK_TOL)?;
    let dual = biorthogonal(&basis)?;
    let mut deltas = DMatrix::<f64>::zeros(spec.dim, spec.count);
    if spec.scale > 0.0 {
        for i in 0..spec.count {
            let norm = spec.scale * ((i + 1) as f64).powf(-spec.alpha);
            let direction = sampler.unit_vector(spec.dim)?;
            deltas.set_column(i, &(direction * norm));
        }
    }
    let perturbed = PerturbedFamily::from_deltas(&dual, deltas)?;
    Ok(GeneratedFamily {
        basis,
        dual,
        perturbed,
    })
}

/// Sampled value ladder: index 1 is the constant function, even indices are
/// cosines of frequency i/2, odd indices above 1 are sines of frequency
/// (i-1)/2. Stays below the grid's aliasing limit for count <= dim.
fn trig_samples(dim: usize, index_1b: usize, shift: f64) -> Vec<f64> {
    let frequency = if index_1b == 1 {
        0.0
    } else if index_1b.is_multiple_of(2) {
        (index_1b / 2) as f64
    } else {
        ((index_1b - 1) / 2) as f64
    };
    let use_sine = index_1b > 1 && index_1b % 2 == 1;
    let shifted = frequency + shift;
    (0..dim)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / dim as f64;
            if use_sine {
                (shifted * t).sin()
            } else {
                (shifted * t).cos()
            }
        })
        .collect()
}

fn normalized_column(samples: Vec<f64>, index_1b: usize) -> Result<nalgebra::DVector<f64>> {
    let v = nalgebra::DVector::from_vec(samples);
    let norm = v.norm();
    if norm <= 1e-12 {
        return Err(Error::BadSpec(format!(
            "sampled vector {index_1b} is numerically zero on the grid"
        )));
    }
    Ok(v / norm)
}

fn fourier_family(spec: &CorpusSpec) -> Result<GeneratedFamily> {
    let mut base = DMatrix::<f64>::zeros(spec.dim, spec.count);
    let mut candidate = DMatrix::<f64>::zeros(spec.dim, spec.count);
    for i in 0..spec.count {
        let shift = spec.frequency_shifts.get(i).copied().unwrap_or(0.0);
        let e = normalized_column(trig_samples(spec.dim, i + 1, 0.0), i + 1)?;
        let f = normalized_column(trig_samples(spec.dim, i + 1, shift), i + 1)?;
        base.set_column(i, &e);
        candidate.set_column(i, &f);
    }
    let basis = BasisFamily::new(base, DEFAULT_RANK_TOL)?;
    let dual = biorthogonal(&basis)?;
    let perturbed = PerturbedFamily::new(&dual, candidate)?;
    Ok(GeneratedFamily {
        basis,
        dual,
        perturbed,
    })
}

/// Identity base with the candidate family repeating its first vector, so
/// independence fails by construction.
fn degenerate_family(spec: &CorpusSpec) -> Result<GeneratedFamily> {
    let basis = BasisFamily::new(identity_columns(spec.dim, spec.count), DEFAULT_RANK_TOL)?;
    let dual = biorthogonal(&basis)?;
    let mut candidate = dual.matrix().clone();
    let first = candidate.column(0).into_owned();
    candidate.set_column(1, &first);
    let perturbed = PerturbedFamily::new(&dual, candidate)?;
    Ok(GeneratedFamily {
        basis,
        dual,
        perturbed,
    })
}
