//! Eigenanalysis of the whole-tree kernel matrix.
//!
//! The kernel matrix on all `N = B^D` paths of a uniform `(B, D)` tree has a
//! recursive block structure and exactly `D + 1` distinct eigenvalues with
//! known multiplicities, computable in closed form from the chi-sequence.
//! This module provides the closed form, the dense brute-force construction
//! used as an oracle on small trees, the nonincreasing reindexing of the
//! eigenvalues, per-kernel bracketing bounds on that sequence, and prior
//! sampling of reward functions on small trees.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{kernel_eval, ChiSequence, KernelKind, Path};

/// Default cap on `N = B^D` for dense constructions.
pub const DEFAULT_GRAM_CAP: usize = 4096;

/// One distinct eigenvalue of the whole-tree kernel matrix together with its
/// multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralLine {
    pub lambda: f64,
    pub multiplicity: u128,
}

/// The `D + 1` distinct eigenvalues of `K_{B,D}` in nondecreasing order.
///
/// Multiplicities are `(B - 1) B^{D - i}` for the first `D` lines and `1`
/// for the top one; they always sum to `N`.
#[derive(Clone, Debug, Serialize)]
pub struct Spectrum {
    pub lines: Vec<SpectralLine>,
    #[serde(rename = "B")]
    pub branching: usize,
    #[serde(rename = "D")]
    pub depth: usize,
    pub chi: ChiSequence,
}

impl Spectrum {
    pub fn num_paths(&self) -> u128 {
        self.lines.iter().map(|l| l.multiplicity).sum()
    }

    /// `sum_i nu_i * lambda_i`, which must equal `N * chi[0]`.
    pub fn trace(&self) -> f64 {
        self.lines.iter().map(|l| l.multiplicity as f64 * l.lambda).sum()
    }

    /// Largest eigenvalue (the one carried by the all-ones eigenvector).
    pub fn top(&self) -> f64 {
        self.lines[self.depth].lambda
    }

    /// Eigenvalues rewritten as a nonincreasing sequence.
    pub fn reorder(&self) -> OrderedEigs {
        OrderedEigs { spectrum: self.clone() }
    }

    /// Expand by multiplicity into a nondecreasing vector of length `N`
    /// (small trees only).
    pub fn expand(&self, cap: usize) -> Result<Vec<f64>> {
        let n = self.num_paths();
        if n > cap as u128 {
            return Err(Error::SizeCap { requested: n, cap });
        }
        let mut out = Vec::with_capacity(n as usize);
        for line in &self.lines {
            for _ in 0..line.multiplicity {
                out.push(line.lambda);
            }
        }
        Ok(out)
    }
}

/// Closed-form spectrum of the whole-tree kernel matrix:
/// `lambda_i = sum_{j=0}^{i-1} B^j (chi[j] - chi[j+1])` for `i <= D`, and the
/// top eigenvalue adds `B^D chi[D]`. Accepts unnormalized sequences (the MDP
/// kernel) as well.
pub fn closed_form_spectrum(chi: &ChiSequence) -> Spectrum {
    let b = chi.branching;
    let d = chi.depth;
    let mut lines = Vec::with_capacity(d + 1);
    let mut partial = 0.0;
    let mut b_pow = 1.0; // B^j
    for i in 1..=d {
        partial += b_pow * (chi.value(i - 1) - chi.value(i));
        b_pow *= b as f64;
        lines.push(SpectralLine {
            lambda: partial,
            multiplicity: (b as u128 - 1) * (b as u128).pow((d - i) as u32),
        });
    }
    // b_pow is now B^D.
    lines.push(SpectralLine { lambda: partial + b_pow * chi.value(d), multiplicity: 1 });
    Spectrum { lines, branching: b, depth: d, chi: chi.clone() }
}

/// The spectrum re-listed as a nonincreasing sequence `lh[1] >= ... >= lh[N]`,
/// indexed lazily so huge trees stay cheap.
#[derive(Clone, Debug)]
pub struct OrderedEigs {
    spectrum: Spectrum,
}

impl OrderedEigs {
    pub fn len(&self) -> u128 {
        self.spectrum.num_paths()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// `lh[t]` for `1 <= t <= N`: the top eigenvalue at `t = 1`, then the
    /// distinct value of index `D - i` where `i` is the unique integer with
    /// `B^i < t <= B^{i+1}`.
    pub fn get(&self, t: u128) -> f64 {
        let n = self.len();
        assert!(t >= 1 && t <= n, "eigenvalue index {t} out of range [1, {n}]");
        let d = self.spectrum.depth;
        if t == 1 {
            return self.spectrum.lines[d].lambda;
        }
        // Smallest p with B^p >= t, so i = p - 1.
        let b = self.spectrum.branching as u128;
        let mut p = 0usize;
        let mut pow = 1u128;
        while pow < t {
            pow = pow.saturating_mul(b);
            p += 1;
        }
        let i = p - 1;
        self.spectrum.lines[d - 1 - i].lambda
    }

    /// First `n` entries of the sequence.
    pub fn leading(&self, n: usize) -> Vec<f64> {
        let n = (n as u128).min(self.len()) as usize;
        (1..=n).map(|t| self.get(t as u128)).collect()
    }

    /// Materialize the whole sequence (small trees only).
    pub fn to_vec(&self, cap: usize) -> Result<Vec<f64>> {
        let n = self.len();
        if n > cap as u128 {
            return Err(Error::SizeCap { requested: n, cap });
        }
        Ok(self.leading(n as usize))
    }
}

/// All `B^D` paths of the uniform tree in canonical order (path `i` spells
/// the base-`B` digits of `i`, most significant first). This is the row and
/// column order of [`build_gram`].
pub fn enumerate_paths(branching: usize, depth: usize) -> Vec<Path> {
    let n = (branching as u128).pow(depth as u32) as usize;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut actions = vec![0u32; depth];
        let mut rem = i;
        for slot in actions.iter_mut().rev() {
            *slot = (rem % branching) as u32;
            rem /= branching;
        }
        out.push(Path::new(actions));
    }
    out
}

/// Index of a path in the [`enumerate_paths`] order.
pub fn path_index(branching: usize, path: &Path) -> usize {
    path.actions().iter().fold(0usize, |acc, &a| acc * branching + a as usize)
}

fn gram_cap_check(chi: &ChiSequence, cap: usize) -> Result<usize> {
    let n = chi.num_paths()?;
    if n > cap as u128 {
        return Err(Error::SizeCap { requested: n, cap });
    }
    Ok(n as usize)
}

/// Dense kernel matrix on all paths, assembled by the recursive block form:
/// depth 1 is `(chi[0] - chi[1]) I + chi[1] J`, and each deeper level places
/// the previous matrix on the diagonal with constant `chi[d] J` blocks
/// elsewhere. Oracle for small trees; errors once `N` exceeds `cap`.
pub fn build_gram_with_cap(chi: &ChiSequence, cap: usize) -> Result<DMatrix<f64>> {
    gram_cap_check(chi, cap)?;
    let b = chi.branching;
    let mut gram = DMatrix::from_element(b, b, chi.value(1));
    for i in 0..b {
        gram[(i, i)] = chi.value(0);
    }
    for level in 2..=chi.depth {
        let prev = gram;
        let m = prev.nrows();
        let mut next = DMatrix::from_element(m * b, m * b, chi.value(level));
        for block in 0..b {
            next.view_mut((block * m, block * m), (m, m)).copy_from(&prev);
        }
        gram = next;
    }
    Ok(gram)
}

/// [`build_gram_with_cap`] at the default cap.
pub fn build_gram(chi: &ChiSequence) -> Result<DMatrix<f64>> {
    build_gram_with_cap(chi, DEFAULT_GRAM_CAP)
}

/// Independent construction of the same matrix by direct pairwise kernel
/// evaluation over enumerated paths; used to cross-check the block recursion.
pub fn build_gram_pairwise(chi: &ChiSequence) -> Result<DMatrix<f64>> {
    let n = gram_cap_check(chi, DEFAULT_GRAM_CAP)?;
    let paths = enumerate_paths(chi.branching, chi.depth);
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel_eval(chi, &paths[i], &paths[j])?;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    Ok(gram)
}

/// Width constants of the Gaussian kernel: `q_s = B exp(-1/s^2)`,
/// `C_s = (1 - q_s/B) / (q_s - 1)`, and their product, which controls the
/// spectral bounds and shrinks as the width grows.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WidthConstants {
    pub q_s: f64,
    pub c_s: f64,
    pub product: f64,
}

/// Compute the width constants; requires `s > 1 / sqrt(log B)` so that
/// `q_s > 1` and the constants stay positive.
pub fn width_constants(branching: usize, s: f64) -> Result<WidthConstants> {
    if branching < 2 {
        return Err(Error::Parameter(format!("branching factor must be >= 2, got {branching}")));
    }
    let threshold = crate::kernels::gaussian_width_threshold(branching);
    if s <= threshold || s.is_nan() {
        return Err(Error::Regime(format!(
            "gaussian width {s} <= 1/sqrt(log {branching}) = {threshold:.6}; spectral constants undefined"
        )));
    }
    let q_s = branching as f64 * (-1.0 / (s * s)).exp();
    let c_s = (1.0 - q_s / branching as f64) / (q_s - 1.0);
    Ok(WidthConstants { q_s, c_s, product: c_s * q_s })
}

/// Lower and upper bounds bracketing `lh[t]`.
///
/// For `t > 1` these are the boxed per-kernel expressions
/// (`(N - t) / ((B-1)(D+1)t)` to `(NB - t) / ((B-1)(D+1)t)` for the linear
/// kernel, `C_s (N e^{-D/s^2} - t)/t` to `C_s (N q_s - t)/t` for the Gaussian
/// kernel in its valid regime). At `t = 1` the sequence starts at the top
/// eigenvalue, which is known exactly, so both endpoints equal it.
pub fn lambda_hat_bounds(chi: &ChiSequence, t: u128) -> Result<(f64, f64)> {
    if t < 1 {
        return Err(Error::Parameter("eigenvalue index t must be >= 1".into()));
    }
    if t == 1 {
        let top = closed_form_spectrum(chi).top();
        return Ok((top, top));
    }
    let n = chi.num_paths_f64();
    let b = chi.branching as f64;
    let tf = t as f64;
    match chi.kind {
        KernelKind::Linear => {
            let denom = (b - 1.0) * (chi.depth as f64 + 1.0) * tf;
            Ok(((n - tf) / denom, (n * b - tf) / denom))
        }
        KernelKind::Gaussian => {
            let s = chi.params.s.ok_or_else(|| {
                Error::Parameter("gaussian chi sequence is missing its width".into())
            })?;
            let w = width_constants(chi.branching, s)?;
            let decay = (-(chi.depth as f64) / (s * s)).exp();
            Ok((w.c_s * (n * decay - tf) / tf, w.c_s * (n * w.q_s - tf) / tf))
        }
        KernelKind::Mdp => Err(Error::UnsupportedKernel(
            "no closed-form eigenvalue brackets for the MDP kernel".into(),
        )),
    }
}

/// A reward function drawn from the zero-mean prior on a small tree: one
/// value per path in [`enumerate_paths`] order.
#[derive(Clone, Debug, Serialize)]
pub struct GpSample {
    pub values: Vec<f64>,
    pub best_index: usize,
    pub f_star: f64,
}

impl GpSample {
    pub fn value(&self, branching: usize, path: &Path) -> f64 {
        self.values[path_index(branching, path)]
    }
}

/// Draw `f ~ N(0, K_{B,D})` by factorizing the dense kernel matrix (with a
/// `1e-10` diagonal jitter). Small trees only.
pub fn sample_gp_prior<R: Rng + ?Sized>(chi: &ChiSequence, rng: &mut R) -> Result<GpSample> {
    let mut gram = build_gram(chi)?;
    let n = gram.nrows();
    for i in 0..n {
        gram[(i, i)] += 1e-10;
    }
    let chol = nalgebra::Cholesky::new(gram)
        .ok_or_else(|| Error::Input("whole-tree kernel matrix is not positive definite".into()))?;
    let z = nalgebra::DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let f = chol.l() * z;
    let values: Vec<f64> = f.iter().copied().collect();
    let (best_index, f_star) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    Ok(GpSample { values, best_index, f_star })
}
