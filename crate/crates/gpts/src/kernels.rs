//! Kernels between root-to-leaf tree paths.
//!
//! A path kernel is fully described by its chi-sequence: `chi[d]` is the
//! kernel value between any two paths that differ on exactly `d` nodes.
//! Three families are provided: the normalized linear and Gaussian kernels
//! on the node-indicator feature space, and the unnormalized discounted-MDP
//! kernel, plus the explicit sparse feature embedding for normalized
//! sequences.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Kernel family a [`ChiSequence`] was generated from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    Gaussian,
    Mdp,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::Linear => write!(f, "linear"),
            KernelKind::Gaussian => write!(f, "gaussian"),
            KernelKind::Mdp => write!(f, "mdp"),
        }
    }
}

/// Free parameters of the kernel family (width for Gaussian, discount for MDP).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

/// Kernel profile `chi[0..=D]` over a `(B, D)` tree: `chi[d]` is the kernel
/// value between two depth-`D` paths with `d` nodes not in common.
///
/// Values are nonincreasing and nonnegative; the sequence is *normalized*
/// when `chi[0] == 1`. Serializes to `{kind, B, D, params, values}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSequence {
    pub kind: KernelKind,
    #[serde(rename = "B")]
    pub branching: usize,
    #[serde(rename = "D")]
    pub depth: usize,
    pub params: KernelParams,
    pub values: Vec<f64>,
}

impl ChiSequence {
    /// Kernel value for `d` differing nodes.
    pub fn value(&self, differing: usize) -> f64 {
        self.values[differing]
    }

    /// Self-kernel `kappa(x, x) = chi[0]` (the prior variance of one arm).
    pub fn chi_zero(&self) -> f64 {
        self.values[0]
    }

    /// True iff `chi[0] == 1`, the regime where the explicit feature
    /// embedding of [`feature_map`] exists.
    pub fn is_normalized(&self) -> bool {
        self.values[0] == 1.0
    }

    /// Number of arms `N = B^D`.
    pub fn num_paths(&self) -> Result<u128> {
        checked_pow(self.branching, self.depth)
    }

    /// `N` as a float, usable even when `B^D` overflows integer range.
    pub fn num_paths_f64(&self) -> f64 {
        (self.branching as f64).powi(self.depth as i32)
    }

    /// Number of tree nodes `N_n = (B^{D+1} - 1) / (B - 1)`.
    pub fn num_nodes(&self) -> Result<u128> {
        let p = checked_pow(self.branching, self.depth + 1)?;
        Ok((p - 1) / (self.branching as u128 - 1))
    }

    /// Whether the constants of the width-dependent spectral bounds are
    /// defined for this sequence. Always true for the linear kernel; for the
    /// Gaussian kernel requires `s > 1 / sqrt(log B)`; never for the MDP
    /// kernel (its analysis goes through the depth schedule instead).
    pub fn bound_regime_ok(&self) -> bool {
        match self.kind {
            KernelKind::Linear => true,
            KernelKind::Gaussian => {
                let s = self.params.s.unwrap_or(0.0);
                s > gaussian_width_threshold(self.branching)
            }
            KernelKind::Mdp => false,
        }
    }

    /// Check the structural invariants: length `D + 1`, nonnegative,
    /// nonincreasing.
    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.depth + 1 {
            return Err(Error::Parameter(format!(
                "chi sequence has {} values, expected D + 1 = {}",
                self.values.len(),
                self.depth + 1
            )));
        }
        if self.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Parameter("chi values must be finite and >= 0".into()));
        }
        if self.values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Parameter("chi values must be nonincreasing".into()));
        }
        Ok(())
    }
}

/// Smallest Gaussian width for which the spectral-bound constants stay
/// positive: `1 / sqrt(log B)`.
pub fn gaussian_width_threshold(branching: usize) -> f64 {
    1.0 / (branching as f64).ln().sqrt()
}

fn checked_pow(base: usize, exp: usize) -> Result<u128> {
    let exp = u32::try_from(exp)
        .map_err(|_| Error::Parameter(format!("exponent {exp} out of range")))?;
    (base as u128)
        .checked_pow(exp)
        .ok_or_else(|| Error::Parameter(format!("{base}^{exp} overflows")))
}

fn check_shape(branching: usize, depth: usize) -> Result<()> {
    if branching < 2 {
        return Err(Error::Parameter(format!("branching factor must be >= 2, got {branching}")));
    }
    if depth < 1 {
        return Err(Error::Parameter(format!("depth must be >= 1, got {depth}")));
    }
    Ok(())
}

/// Normalized linear kernel: `chi[d] = (D + 1 - d) / (D + 1)`, the fraction
/// of nodes two paths have in common.
pub fn chi_linear(branching: usize, depth: usize) -> Result<ChiSequence> {
    check_shape(branching, depth)?;
    let values = (0..=depth)
        .map(|d| (depth + 1 - d) as f64 / (depth + 1) as f64)
        .collect();
    Ok(ChiSequence {
        kind: KernelKind::Linear,
        branching,
        depth,
        params: KernelParams::default(),
        values,
    })
}

/// Gaussian kernel of width `s` on the node-indicator feature space:
/// `chi[d] = exp(-d / s^2)`.
pub fn chi_gaussian(branching: usize, depth: usize, s: f64) -> Result<ChiSequence> {
    check_shape(branching, depth)?;
    if s <= 0.0 || !s.is_finite() {
        return Err(Error::Parameter(format!("gaussian width must be > 0, got {s}")));
    }
    let values = (0..=depth).map(|d| (-(d as f64) / (s * s)).exp()).collect();
    Ok(ChiSequence {
        kind: KernelKind::Gaussian,
        branching,
        depth,
        params: KernelParams { s: Some(s), gamma: None },
        values,
    })
}

/// Discounted-MDP kernel: with `h = D - d` actions in common,
/// `chi[d] = (1 - gamma^{2h}) / (1 - gamma^2)`.
///
/// Not normalized: `chi[0]` grows with depth and `chi[D] = 0` exactly.
pub fn chi_mdp(branching: usize, depth: usize, gamma: f64) -> Result<ChiSequence> {
    check_shape(branching, depth)?;
    if gamma <= 0.0 || gamma >= 1.0 || gamma.is_nan() {
        return Err(Error::Parameter(format!("discount must lie in (0, 1), got {gamma}")));
    }
    let denom = 1.0 - gamma * gamma;
    let values = (0..=depth)
        .map(|d| {
            let h = (depth - d) as i32;
            (1.0 - gamma.powi(2 * h)) / denom
        })
        .collect();
    Ok(ChiSequence {
        kind: KernelKind::Mdp,
        branching,
        depth,
        params: KernelParams { s: None, gamma: Some(gamma) },
        values,
    })
}

/// A root-to-leaf path, stored as its action indices (the node at depth `i`
/// is identified by the first `i` actions, so a path is its own node-id
/// sequence).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Path {
    actions: Vec<u32>,
}

impl Path {
    pub fn new(actions: Vec<u32>) -> Self {
        Path { actions }
    }

    /// Depth `D` of the path (number of actions; the node count is `D + 1`).
    pub fn depth(&self) -> usize {
        self.actions.len()
    }

    pub fn actions(&self) -> &[u32] {
        &self.actions
    }

    /// Length of the longest common action prefix with `other`.
    pub fn common_prefix_len(&self, other: &Path) -> usize {
        common_prefix_len(&self.actions, &other.actions)
    }

    /// Number of node positions where two equal-depth paths differ
    /// (`D` minus the common action prefix; the root is always shared).
    pub fn differing_nodes(&self, other: &Path) -> usize {
        self.depth() - self.common_prefix_len(other)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for a in &self.actions {
            if !first {
                write!(f, "-")?;
            }
            write!(f, "{a}")?;
            first = false;
        }
        Ok(())
    }
}

pub(crate) fn common_prefix_len(a: &[u32], b: &[u32]) -> usize {
    a.iter().zip(b.iter()).take_while(|(x, y)| x == y).count()
}

/// Kernel value between two paths: `chi[d]` with `d` the number of differing
/// nodes. Both paths must have the depth the chi-sequence was built for.
pub fn kernel_eval(chi: &ChiSequence, a: &Path, b: &Path) -> Result<f64> {
    for p in [a, b] {
        if p.depth() != chi.depth {
            return Err(Error::DepthMismatch { expected: chi.depth, found: p.depth() });
        }
    }
    Ok(chi.value(a.differing_nodes(b)))
}

/// One nonzero coordinate of a path embedding: the node (as an action
/// prefix; empty = root) and its weight.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureEntry {
    pub node: Vec<u32>,
    pub weight: f64,
}

/// Sparse embedding of a path in the space indexed by all tree nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    entries: Vec<FeatureEntry>,
}

impl FeatureVector {
    pub fn entries(&self) -> &[FeatureEntry] {
        &self.entries
    }

    /// Inner product with another embedding. For two path embeddings of the
    /// same chi-sequence this reproduces `kernel_eval` exactly.
    pub fn dot(&self, other: &FeatureVector) -> f64 {
        let mut sum = 0.0;
        for e in &self.entries {
            if let Some(o) = other.entries.iter().find(|o| o.node == e.node) {
                sum += e.weight * o.weight;
            }
        }
        sum
    }
}

/// Explicit feature embedding of a path for a normalized chi-sequence:
/// weight `sqrt(chi[D])` on the root and `sqrt(chi[D-i] - chi[D-i+1])` on the
/// path's depth-`i` node. Inner products of embeddings telescope back to the
/// kernel values.
pub fn feature_map(chi: &ChiSequence, path: &Path) -> Result<FeatureVector> {
    if !chi.is_normalized() {
        return Err(Error::UnsupportedKernel(format!(
            "feature embedding requires a normalized chi sequence (chi[0] = 1), got chi[0] = {}",
            chi.chi_zero()
        )));
    }
    if path.depth() != chi.depth {
        return Err(Error::DepthMismatch { expected: chi.depth, found: path.depth() });
    }
    let d = chi.depth;
    let mut entries = Vec::with_capacity(d + 1);
    entries.push(FeatureEntry { node: Vec::new(), weight: chi.value(d).sqrt() });
    for i in 1..=d {
        entries.push(FeatureEntry {
            node: path.actions()[..i].to_vec(),
            weight: (chi.value(d - i) - chi.value(d - i + 1)).max(0.0).sqrt(),
        });
    }
    Ok(FeatureVector { entries })
}
