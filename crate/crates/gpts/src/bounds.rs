//! Computable information-gain and regret bounds.
//!
//! Everything here is a pure function of extracted quantities (horizons,
//! eigenvalue sequences, kernel constants, noise); nothing reads search
//! state. The bound chain is: the algorithm's information gain is at most
//! the maximum information gain, which submodularity bounds by
//! `1/(1 - e^{-1})` times the greedy information gain; the greedy gain in
//! turn is an explicit function of the whole-tree kernel eigenvalues, whose
//! decay the per-kernel bounds quantify.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{ChiSequence, KernelKind};
use crate::spectrum::{width_constants, OrderedEigs};

/// `1 / (1 - e^{-1})`, the submodularity constant.
pub fn submodularity_factor() -> f64 {
    1.0 / (1.0 - (-1.0f64).exp())
}

/// Information actually gained from the played arms:
/// `1/2 log det(I + noise^{-2} K_T)`, evaluated through a Cholesky
/// factorization. `gram` is the kernel matrix on the played arms.
pub fn infogain_actual(gram: &DMatrix<f64>, noise_var: f64) -> Result<f64> {
    if noise_var <= 0.0 || noise_var.is_nan() {
        return Err(Error::Parameter(format!(
            "information gain needs noise_var > 0, got {noise_var}"
        )));
    }
    let t = gram.nrows();
    if gram.ncols() != t {
        return Err(Error::Input("kernel matrix must be square".into()));
    }
    if t == 0 {
        return Ok(0.0);
    }
    let tol = 1e-9 * (1.0 + gram.amax());
    for i in 0..t {
        for j in (i + 1)..t {
            if (gram[(i, j)] - gram[(j, i)]).abs() > tol {
                return Err(Error::Input("kernel matrix must be symmetric".into()));
            }
        }
    }
    // PSD check on K itself: a tolerance shift must make it factorizable.
    let mut shifted = gram.clone();
    for i in 0..t {
        shifted[(i, i)] += tol;
    }
    if nalgebra::Cholesky::new(shifted).is_none() {
        return Err(Error::Input("kernel matrix is not positive semidefinite".into()));
    }
    let mut m = DMatrix::identity(t, t);
    m += gram / noise_var;
    let chol = nalgebra::Cholesky::new(m).ok_or_else(|| {
        Error::Input("I + noise^{-2} K is not positive definite".into())
    })?;
    // Half the log-determinant: the factor's diagonal product is sqrt(det).
    let half_logdet: f64 = (0..t).map(|i| chol.l_dirty()[(i, i)].ln()).sum();
    Ok(half_logdet)
}

/// [`infogain_actual`] on the kernel matrix of a played-arm sequence.
pub fn infogain_of_arms(
    chi: &ChiSequence,
    arms: &[&crate::kernels::Path],
    noise_var: f64,
) -> Result<f64> {
    let t = arms.len();
    let mut gram = DMatrix::zeros(t, t);
    for i in 0..t {
        for j in i..t {
            let v = crate::kernels::kernel_eval(chi, arms[i], arms[j])?;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    infogain_actual(&gram, noise_var)
}

/// Greedy information gain and its allocation over eigendirections.
#[derive(Clone, Debug, Serialize)]
pub struct GreedyInfogain {
    pub value: f64,
    /// `allocation[i]` = number of times eigendirection `i + 1` was picked;
    /// entries sum to the horizon.
    pub allocation: Vec<u64>,
}

/// Simulate the greedy design that always measures along the eigendirection
/// with the largest updated eigenvalue `lh_i / (1 + noise^{-2} m_i lh_i)`,
/// then report `1/2 sum log(1 + noise^{-2} m_i lh_i)`.
pub fn infogain_greedy(
    eigs: &OrderedEigs,
    horizon: usize,
    noise_var: f64,
) -> Result<GreedyInfogain> {
    if noise_var <= 0.0 || noise_var.is_nan() {
        return Err(Error::Parameter(format!(
            "greedy information gain needs noise_var > 0, got {noise_var}"
        )));
    }
    let active = (horizon as u128).min(eigs.len()) as usize;
    let lambdas = eigs.leading(active);
    let mut counts = vec![0u64; active];
    let inv_noise = 1.0 / noise_var;
    for _ in 0..horizon {
        let mut best = 0usize;
        let mut best_val = f64::NEG_INFINITY;
        for (i, &l) in lambdas.iter().enumerate() {
            let updated = l / (1.0 + inv_noise * counts[i] as f64 * l);
            if updated > best_val {
                best_val = updated;
                best = i;
            }
        }
        counts[best] += 1;
    }
    let value = 0.5
        * lambdas
            .iter()
            .zip(counts.iter())
            .map(|(&l, &m)| (1.0 + inv_noise * m as f64 * l).ln())
            .sum::<f64>();
    Ok(GreedyInfogain { value, allocation: counts })
}

/// Kernel-independent caps on the maximum information gain:
/// `(T/2) log(1 + noise^{-2} T)` and, independent of time,
/// `(N_n/2) log(1 + noise^{-2} N_n)` with `N_n` the node count.
pub fn infogain_bound_kernel_independent(
    horizon: usize,
    num_nodes: f64,
    noise_var: f64,
) -> Result<(f64, f64)> {
    if noise_var <= 0.0 || noise_var.is_nan() {
        return Err(Error::Parameter(format!("bounds need noise_var > 0, got {noise_var}")));
    }
    let t = horizon as f64;
    let bound_t = 0.5 * t * (1.0 + t / noise_var).ln();
    let bound_nn = 0.5 * num_nodes * (1.0 + num_nodes / noise_var).ln();
    Ok((bound_t, bound_nn))
}

/// The `N * c / t` envelope constant of `lh_t` for the given kernel:
/// `C_s q_s` for the Gaussian kernel (valid width regime), and
/// `B / ((B - 1)(D + 1))` for the linear kernel.
pub fn eigenvalue_envelope_constant(chi: &ChiSequence) -> Result<f64> {
    match chi.kind {
        KernelKind::Linear => {
            Ok(chi.branching as f64
                / ((chi.branching as f64 - 1.0) * (chi.depth as f64 + 1.0)))
        }
        KernelKind::Gaussian => {
            let s = chi.params.s.ok_or_else(|| {
                Error::Parameter("gaussian chi sequence is missing its width".into())
            })?;
            Ok(width_constants(chi.branching, s)?.product)
        }
        KernelKind::Mdp => Err(Error::UnsupportedKernel(
            "no eigenvalue envelope constant for the MDP kernel".into(),
        )),
    }
}

/// Sum-of-log-eigenvalues bound:
/// `I*(T) <= T log((1/lh_T + noise^{-2}) N c e) / (2 (1 - e^{-1})) + D log B`
/// with `c` the envelope constant of [`eigenvalue_envelope_constant`]. The
/// additive `D log B` term is carried over from the Gaussian derivation for
/// the linear kernel as well.
pub fn infogain_bound_sumlog(
    eigs: &OrderedEigs,
    horizon: usize,
    noise_var: f64,
) -> Result<f64> {
    if horizon == 0 {
        return Ok(0.0);
    }
    if noise_var <= 0.0 || noise_var.is_nan() {
        return Err(Error::Parameter(format!("bounds need noise_var > 0, got {noise_var}")));
    }
    let chi = &eigs.spectrum().chi;
    let c = eigenvalue_envelope_constant(chi)?;
    let n = chi.num_paths_f64();
    let t_idx = (horizon as u128).min(eigs.len());
    let lambda_t = eigs.get(t_idx);
    if lambda_t <= 0.0 || lambda_t.is_nan() {
        return Err(Error::DegenerateUpdate(format!(
            "lh_T = {lambda_t} <= 0; the log-eigenvalue bound is undefined"
        )));
    }
    let log_term = ((1.0 / lambda_t + 1.0 / noise_var) * n * c * std::f64::consts::E).ln();
    Ok(0.5 * submodularity_factor() * log_term * horizon as f64
        + chi.depth as f64 * (chi.branching as f64).ln())
}

/// Eigenvalue tail-sum bound on the gain accrued after `t_star`:
/// `I*(T) - I*(T_*) <= N c log(min(T, N) / T_*) / (2 (1 - e^{-1}))`;
/// zero when `T <= T_*`.
pub fn infogain_bound_tailsum(
    horizon: usize,
    t_star: usize,
    num_paths: f64,
    envelope: f64,
) -> Result<f64> {
    if t_star < 1 {
        return Err(Error::Parameter(format!("t_star must be >= 1, got {t_star}")));
    }
    if horizon <= t_star {
        return Ok(0.0);
    }
    let capped = (horizon as f64).min(num_paths);
    let ratio = (capped / t_star as f64).max(1.0);
    Ok(0.5 * submodularity_factor() * num_paths * envelope * ratio.ln())
}

/// Aggregate constant governing how many distinct eigendirections the greedy
/// design touches:
/// `A_s = N C_s q_s (e^{-D/s^2} - 1) / (e^{-D/s^2} - 1 - q_s / 2)`.
pub fn a_s_constant(branching: usize, depth: usize, s: f64) -> Result<f64> {
    let w = width_constants(branching, s)?;
    let n = (branching as f64).powi(depth as i32);
    let decay = (-(depth as f64) / (s * s)).exp();
    Ok(n * w.product * (decay - 1.0) / (decay - 1.0 - w.q_s / 2.0))
}

/// Smallest count `T'` of distinct eigendirections with
/// `T'^2 + T' - noise^{-2} A_s T = 0`: explicitly
/// `T' = (-1 + sqrt(1 + 4 noise^{-2} A_s T)) / 2`. Also reports whether
/// `T' < T`.
pub fn t_prime(horizon: usize, a_s: f64, noise_var: f64) -> (f64, bool) {
    let t = horizon as f64;
    let value = 0.5 * (-1.0 + (1.0 + 4.0 * a_s * t / noise_var).sqrt());
    (value, value < t)
}

/// Result of the split-point scan.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TStar {
    pub value: usize,
    /// False when no split point satisfied the marginal-cost rule within `N`
    /// (the scan then reports `N`).
    pub satisfied: bool,
}

/// Smallest `T_* >= 1` at which moving the next index into the log-sum costs
/// at least as much as leaving it in the tail, i.e. the first index where
/// `log((1/lh_{T_*+1} + noise^{-2}) N c e)(T_*+1) - N c log(T_*+1)` reaches
/// `log((1/lh_{T_*} + noise^{-2}) N c e) T_* - N c log(T_*)`.
/// Equality counts as satisfied. Independent of the horizon; Gaussian
/// kernels in the valid width regime only.
pub fn t_star(eigs: &OrderedEigs, noise_var: f64) -> Result<TStar> {
    let chi = &eigs.spectrum().chi;
    if chi.kind != KernelKind::Gaussian {
        return Err(Error::Regime(format!(
            "the split-point rule is defined for the Gaussian kernel, got {}",
            chi.kind
        )));
    }
    if noise_var <= 0.0 || noise_var.is_nan() {
        return Err(Error::Parameter(format!("t_star needs noise_var > 0, got {noise_var}")));
    }
    let c = eigenvalue_envelope_constant(chi)?;
    let n = chi.num_paths_f64();
    let n_int = eigs.len();
    let log_term = |t: u128| -> f64 {
        ((1.0 / eigs.get(t) + 1.0 / noise_var) * n * c * std::f64::consts::E).ln()
    };
    let mut t = 1u128;
    while t < n_int {
        let lhs = log_term(t + 1) * (t + 1) as f64 - n * c * ((t + 1) as f64).ln();
        let rhs = log_term(t) * t as f64 - n * c * (t as f64).ln();
        if lhs >= rhs {
            return Ok(TStar { value: t as usize, satisfied: true });
        }
        t += 1;
    }
    Ok(TStar { value: n_int as usize, satisfied: false })
}

/// Combined information-gain bound for a chosen split: the log-sum bound
/// evaluated at `T_*` (a constant in `T`) plus the tail-sum from `T_*` to
/// `T`. Useful for checking that [`t_star`] picks a local optimum.
pub fn combined_infogain_bound(
    eigs: &OrderedEigs,
    horizon: usize,
    t_star: usize,
    noise_var: f64,
) -> Result<f64> {
    let chi = &eigs.spectrum().chi;
    let c = eigenvalue_envelope_constant(chi)?;
    let head = infogain_bound_sumlog(eigs, t_star, noise_var)?;
    let tail = infogain_bound_tailsum(horizon, t_star, chi.num_paths_f64(), c)?;
    Ok(head + tail)
}

/// High-probability regret bound:
/// `R_T <= sqrt(16 / log(1 + noise^{-2}) * log(N T^2 pi^2 / (6 delta)) * T * I_u)`.
pub fn regret_bound(
    horizon: usize,
    num_arms: f64,
    delta: f64,
    noise_var: f64,
    infogain: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) || delta == 0.0 {
        return Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if noise_var <= 0.0 || noise_var.is_nan() {
        return Err(Error::Parameter(format!(
            "regret bound needs noise_var > 0, got {noise_var}"
        )));
    }
    if infogain < 0.0 || infogain.is_nan() {
        return Err(Error::Parameter(format!("infogain must be >= 0, got {infogain}")));
    }
    let t = horizon as f64;
    let conf = (num_arms * t * t * std::f64::consts::PI.powi(2) / (6.0 * delta)).ln();
    Ok((16.0 / (1.0 + 1.0 / noise_var).ln() * conf * t * infogain).sqrt())
}

/// Outcome of checking `I_u <= I_g / (1 - e^{-1})`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChainVerdict {
    pub actual: f64,
    pub greedy: f64,
    pub limit: f64,
    pub holds: bool,
}

/// Check the submodularity chain on values computed for the same kernel,
/// noise and horizon. A violation is a build bug, never a bad input.
pub fn submodularity_chain(actual: f64, greedy: f64) -> ChainVerdict {
    let limit = submodularity_factor() * greedy;
    ChainVerdict { actual, greedy, limit, holds: actual <= limit + 1e-9 }
}

/// Everything the bound evaluators need, extracted once.
#[derive(Clone, Debug)]
pub struct BoundInputs {
    pub chi: ChiSequence,
    pub horizon: usize,
    pub noise_var: f64,
    pub delta: f64,
    /// Measured information gain of a run, when available; otherwise the
    /// regret bound is evaluated at the tightest computable upper bound.
    pub infogain: Option<f64>,
}

/// Serializable report of every computable bound value and diagnostic.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub kernel: ChiSequence,
    pub horizon: usize,
    pub noise_var: f64,
    pub delta: f64,
    pub num_arms: f64,
    pub num_nodes: f64,
    pub bound_horizon: f64,
    pub bound_nodes: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope_constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_sumlog: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_star: Option<TStar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_tailsum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_combined: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<crate::spectrum::WidthConstants>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_prime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_prime_below_horizon: Option<bool>,
    pub infogain_used: f64,
    pub infogain_is_measured: bool,
    pub regret_bound: f64,
    pub notes: Vec<String>,
}

impl BoundInputs {
    /// Evaluate every bound this kernel supports.
    pub fn report(&self) -> Result<BoundReport> {
        self.chi.validate()?;
        let num_arms = self.chi.num_paths_f64();
        let num_nodes = match self.chi.num_nodes() {
            Ok(n) => n as f64,
            Err(_) => {
                (num_arms * self.chi.branching as f64 - 1.0) / (self.chi.branching as f64 - 1.0)
            }
        };
        let (bound_horizon, bound_nodes) =
            infogain_bound_kernel_independent(self.horizon, num_nodes, self.noise_var)?;
        let mut notes = Vec::new();
        let eigs = crate::spectrum::closed_form_spectrum(&self.chi).reorder();

        let envelope = eigenvalue_envelope_constant(&self.chi).ok();
        let bound_sumlog = match self.chi.kind {
            KernelKind::Mdp => None,
            _ => match infogain_bound_sumlog(&eigs, self.horizon, self.noise_var) {
                Ok(v) => {
                    if self.chi.kind == KernelKind::Linear {
                        notes.push(
                            "linear-kernel log-sum bound reuses the additive D log B term \
                             from the Gaussian derivation"
                                .to_string(),
                        );
                    }
                    Some(v)
                }
                Err(Error::Regime(msg)) => {
                    notes.push(msg);
                    None
                }
                Err(e) => return Err(e),
            },
        };

        let mut width = None;
        let mut a_s = None;
        let mut t_prime_value = None;
        let mut t_prime_flag = None;
        let mut t_star_result = None;
        let mut bound_tailsum = None;
        let mut bound_combined = None;
        if self.chi.kind == KernelKind::Gaussian {
            if let Some(s) = self.chi.params.s {
                match width_constants(self.chi.branching, s) {
                    Ok(w) => {
                        width = Some(w);
                        let a = a_s_constant(self.chi.branching, self.chi.depth, s)?;
                        a_s = Some(a);
                        let (tp, below) = t_prime(self.horizon, a, self.noise_var);
                        t_prime_value = Some(tp);
                        t_prime_flag = Some(below);
                        let ts = t_star(&eigs, self.noise_var)?;
                        t_star_result = Some(ts);
                        bound_tailsum = Some(infogain_bound_tailsum(
                            self.horizon,
                            ts.value,
                            num_arms,
                            w.product,
                        )?);
                        bound_combined = Some(combined_infogain_bound(
                            &eigs,
                            self.horizon,
                            ts.value,
                            self.noise_var,
                        )?);
                    }
                    Err(Error::Regime(msg)) => notes.push(msg),
                    Err(e) => return Err(e),
                }
            }
        }

        let mut upper = bound_horizon.min(bound_nodes);
        if let Some(v) = bound_sumlog {
            upper = upper.min(v);
        }
        if let Some(v) = bound_combined {
            upper = upper.min(v);
        }
        let (infogain_used, measured) = match self.infogain {
            Some(v) => (v, true),
            None => (upper, false),
        };
        let regret =
            regret_bound(self.horizon, num_arms, self.delta, self.noise_var, infogain_used)?;
        Ok(BoundReport {
            kernel: self.chi.clone(),
            horizon: self.horizon,
            noise_var: self.noise_var,
            delta: self.delta,
            num_arms,
            num_nodes,
            bound_horizon,
            bound_nodes,
            envelope_constant: envelope,
            bound_sumlog,
            t_star: t_star_result,
            bound_tailsum,
            bound_combined,
            width,
            a_s,
            t_prime: t_prime_value,
            t_prime_below_horizon: t_prime_flag,
            infogain_used,
            infogain_is_measured: measured,
            regret_bound: regret,
            notes,
        })
    }
}
