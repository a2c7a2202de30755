//! Dynamic-programming core: exact log-domain partition-function tables.
//!
//! Free table (pinning strength `h`, charges `omega`):
//!
//! ```text
//!     Z_0 = 1,   Z_m = e^(h + omega_m) sum_{t=1}^{m} p(t) Z_{m-t}
//! ```
//!
//! Contact-constrained table at `h = 0` (the conditional path law given the
//! contact number does not depend on `h`, so one table serves every `h`):
//!
//! ```text
//!     Z_{0,0} = 1,   Z_{m,l} = e^(omega_m) sum_t p(t) Z_{m-t, l-1}
//! ```
//!
//! Row `l` of the constrained table is a log-domain convolution of row `l-1`
//! with `log p`. The hot builder evaluates that convolution blockwise in the
//! linear domain with per-block max scaling: inputs are exponentiated once per
//! block relative to the block max, block-pair products are plain fused
//! multiply-adds, and each output block accumulates pair contributions scaled
//! by `exp(pair_scale - block_upper_bound) <= 1`. A pair may be skipped for an
//! output block only when its best possible term sits more than
//! [`PRUNE_WINDOW`] nats below a lower bound that holds for *every* cell of
//! that block (the minimum over the block of a per-cell bound assembled from
//! the first few `t` terms), so pruning never touches a cell's leading digits
//! no matter how wildly magnitudes swing inside a block. A quadratic-time
//! reference builder is kept for cross-checks.

use thiserror::Error;

use crate::disorder::ChargeSequence;
use crate::law::InterArrivalLaw;
use crate::numerics::{log_sum_exp, Kahan};

/// Polymer size and pinning strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolymerParams {
    pub n: usize,
    pub h: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum DpError {
    #[error("need {need} charges but the sequence has {got}")]
    ChargesTooShort { need: usize, got: usize },
    #[error("pinning strength must be finite (got {0})")]
    BadPinning(f64),
    #[error("polymer length must be >= 1")]
    EmptyPolymer,
    #[error("l_max = {l_max} outside 1..={n}")]
    BadLMax { l_max: usize, n: usize },
    #[error("table would need {need} bytes (cap {cap})")]
    TableTooLarge { need: u128, cap: u128 },
    #[error("operation needs the full table (l_max = n) but l_max = {l_max} < n = {n}")]
    PartialTable { l_max: usize, n: usize },
    #[error("packed table has {got} entries, shape requires {expect}")]
    WrongDataLength { expect: usize, got: usize },
}

/// Hard cap on a single table allocation.
pub const MAX_TABLE_BYTES: u128 = 3 << 30;

/// Linear-domain block width of the convolution kernel.
const BLOCK: usize = 64;

/// Pairs this many nats below an achieved value in an output block are
/// dropped; each dropped pair contributes < e^-50 of the block max.
const PRUNE_WINDOW: f64 = 50.0;

fn check_inputs(n: usize, h: f64, charges: &ChargeSequence) -> Result<(), DpError> {
    if n == 0 {
        return Err(DpError::EmptyPolymer);
    }
    if !h.is_finite() {
        return Err(DpError::BadPinning(h));
    }
    if charges.len() < n {
        return Err(DpError::ChargesTooShort { need: n, got: charges.len() });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// free table
// ---------------------------------------------------------------------------

/// Log partition functions `ln Z_{m,h}(omega)` for every prefix `m <= n`,
/// together with the exact conditional contact moments accumulated along the
/// same recursion. Immutable once built.
#[derive(Debug, Clone)]
pub struct FreeTable {
    params: PolymerParams,
    log_z: Vec<f64>,
    /// `E[L_m]` under the length-`m` free measure (ratio recursion `A_m/Z_m`).
    contact_mean: Vec<f64>,
    /// `E[L_m^2]` likewise.
    contact_sq: Vec<f64>,
}

impl FreeTable {
    pub fn build(
        params: PolymerParams,
        charges: &ChargeSequence,
        law: &InterArrivalLaw,
    ) -> Result<Self, DpError> {
        let PolymerParams { n, h } = params;
        check_inputs(n, h, charges)?;
        let need = 3 * (n as u128 + 1) * 8;
        if need > MAX_TABLE_BYTES {
            return Err(DpError::TableTooLarge { need, cap: MAX_TABLE_BYTES });
        }
        let lp = law.log_p_dense(law.scan_limit(n));
        let mut log_z = vec![0.0f64; n + 1];
        let mut mean = vec![0.0f64; n + 1];
        let mut sq = vec![0.0f64; n + 1];
        for m in 1..=n {
            let t_hi = m.min(lp.len() - 1);
            // pass 1: running max of ln p(t) + ln Z_{m-t}
            let mut max = f64::NEG_INFINITY;
            for t in 1..=t_hi {
                let v = lp[t] + log_z[m - t];
                if v > max {
                    max = v;
                }
            }
            debug_assert!(max > f64::NEG_INFINITY, "p(1) > 0 keeps every Z positive");
            // pass 2: normalized sum, plus the contact-moment averages
            // E[L_m] = sum_t q_m(t) (E[L_{m-t}] + 1) over the backward kernel
            // q_m(t) ∝ p(t) Z_{m-t}; terms below the window are irrelevant to
            // both at < e^-45 relative weight
            let mut acc = 0.0;
            let mut acc_mean = 0.0;
            let mut acc_sq = 0.0;
            let cut = max - 45.0;
            for t in 1..=t_hi {
                let v = lp[t] + log_z[m - t];
                if v >= cut {
                    let w = (v - max).exp();
                    acc += w;
                    let a = mean[m - t];
                    acc_mean += w * (a + 1.0);
                    acc_sq += w * (sq[m - t] + 2.0 * a + 1.0);
                }
            }
            log_z[m] = h + charges.charge(m) + max + acc.ln();
            mean[m] = acc_mean / acc;
            sq[m] = acc_sq / acc;
        }
        Ok(FreeTable { params, log_z, contact_mean: mean, contact_sq: sq })
    }

    pub fn params(&self) -> PolymerParams {
        self.params
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    /// `ln Z_{m,h}(omega)` for `0 <= m <= n`.
    pub fn log_z(&self, m: usize) -> f64 {
        self.log_z[m]
    }

    /// `ln Z_{n,h}(omega)`.
    pub fn log_partition(&self) -> f64 {
        self.log_z[self.params.n]
    }

    /// Exact `E[L_n]` under the free measure.
    pub fn contact_mean(&self) -> f64 {
        self.contact_mean[self.params.n]
    }

    /// Exact `Var[L_n]` under the free measure.
    pub fn contact_var(&self) -> f64 {
        let m = self.contact_mean[self.params.n];
        self.contact_sq[self.params.n] - m * m
    }
}

// ---------------------------------------------------------------------------
// suffix table
// ---------------------------------------------------------------------------

/// `ln W_a = ln Z_{n-a, h}(theta^a omega)`: the partition function of the
/// polymer segment to the right of `a`, for every split point `a`. Built by
/// one backward sweep; `W_n = 1`.
#[derive(Debug, Clone)]
pub struct SuffixTable {
    params: PolymerParams,
    log_w: Vec<f64>,
}

impl SuffixTable {
    pub fn build(
        params: PolymerParams,
        charges: &ChargeSequence,
        law: &InterArrivalLaw,
    ) -> Result<Self, DpError> {
        let PolymerParams { n, h } = params;
        check_inputs(n, h, charges)?;
        let lp = law.log_p_dense(law.scan_limit(n));
        let mut log_w = vec![0.0f64; n + 1];
        for a in (0..n).rev() {
            let t_hi = (n - a).min(lp.len() - 1);
            let mut max = f64::NEG_INFINITY;
            for t in 1..=t_hi {
                let v = lp[t] + h + charges.charge(a + t) + log_w[a + t];
                if v > max {
                    max = v;
                }
            }
            let mut acc = 0.0;
            let cut = max - 45.0;
            for t in 1..=t_hi {
                let v = lp[t] + h + charges.charge(a + t) + log_w[a + t];
                if v >= cut {
                    acc += (v - max).exp();
                }
            }
            log_w[a] = max + acc.ln();
        }
        Ok(SuffixTable { params, log_w })
    }

    pub fn params(&self) -> PolymerParams {
        self.params
    }

    /// `ln Z_{n-a,h}(theta^a omega)` for `0 <= a <= n`.
    pub fn log_w(&self, a: usize) -> f64 {
        self.log_w[a]
    }
}

/// Contact marginals `P[X_a = 1] = Z_a W_a / Z_n` for `a = 0..=n`
/// (`a = 0` and `a = n` are contacts by construction).
pub fn contact_marginals(free: &FreeTable, suffix: &SuffixTable) -> Vec<f64> {
    assert_eq!(free.params(), suffix.params(), "tables from different polymers");
    let n = free.n();
    let log_zn = free.log_partition();
    let mut marg: Vec<f64> = (0..=n)
        .map(|a| {
            let v = (free.log_z(a) + suffix.log_w(a) - log_zn).exp();
            v.clamp(0.0, 1.0)
        })
        .collect();
    // the endpoints are contacts by definition; the a = 0 entry otherwise
    // carries the forward-vs-backward rounding difference of the two tables
    marg[0] = 1.0;
    marg[n] = 1.0;
    marg
}

// ---------------------------------------------------------------------------
// constrained table
// ---------------------------------------------------------------------------

/// Triangular table `ln Z_{m,l}` (at `h = 0`, charges included) for
/// `0 <= l <= l_max`, `l <= m <= n`. Row `l` is stored contiguously over `m`.
#[derive(Debug, Clone)]
pub struct ConstrainedTable {
    n: usize,
    l_max: usize,
    /// row `l` occupies `offsets[l] .. offsets[l] + (n - l + 1)`, entry
    /// `m` at `offsets[l] + (m - l)`
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl ConstrainedTable {
    /// Blocked builder. `l_max` bounds the contact numbers materialized
    /// (everything a sampler conditioned on `l <= l_max` or a distribution
    /// over all `l` needs is `l_max = n`).
    pub fn build(
        n: usize,
        charges: &ChargeSequence,
        law: &InterArrivalLaw,
        l_max: usize,
    ) -> Result<Self, DpError> {
        Self::build_impl(n, charges, law, l_max, false)
    }

    /// Straightforward quadratic-per-entry builder (two-pass log-sum-exp for
    /// every cell). Same results as [`ConstrainedTable::build`] to ~1e-12;
    /// exists to certify the blocked kernel and for tiny tables.
    pub fn build_naive(
        n: usize,
        charges: &ChargeSequence,
        law: &InterArrivalLaw,
        l_max: usize,
    ) -> Result<Self, DpError> {
        Self::build_impl(n, charges, law, l_max, true)
    }

    fn build_impl(
        n: usize,
        charges: &ChargeSequence,
        law: &InterArrivalLaw,
        l_max: usize,
        naive: bool,
    ) -> Result<Self, DpError> {
        check_inputs(n, 0.0, charges)?;
        if l_max == 0 || l_max > n {
            return Err(DpError::BadLMax { l_max, n });
        }
        let mut offsets = Vec::with_capacity(l_max + 2);
        let mut total = 0usize;
        for l in 0..=l_max {
            offsets.push(total);
            total += n - l + 1;
        }
        offsets.push(total);
        let need = total as u128 * 8;
        if need > MAX_TABLE_BYTES {
            return Err(DpError::TableTooLarge { need, cap: MAX_TABLE_BYTES });
        }
        let mut data = vec![f64::NEG_INFINITY; total];
        data[0] = 0.0; // Z_{0,0} = 1
        let lp = law.log_p_dense(law.scan_limit(n));
        // row 1: Z_{m,1} = e^(omega_m) p(m)
        for m in 1..=n {
            data[offsets[1] + (m - 1)] = charges.charge(m) + lp.get(m).copied().unwrap_or(f64::NEG_INFINITY);
        }
        let p_blocks = if naive { None } else { Some(BlockSummary::of(&lp[1..])) };
        for l in 2..=l_max {
            let (head, tail) = data.split_at_mut(offsets[l]);
            let prev = &head[offsets[l - 1]..];
            let out = &mut tail[..n - l + 1];
            if let Some(pb) = &p_blocks {
                convolve_blocked(pb, &lp, prev, out);
            } else {
                convolve_naive(&lp, prev, out);
            }
            for (d, slot) in out.iter_mut().enumerate() {
                if *slot != f64::NEG_INFINITY {
                    *slot += charges.charge(l + d);
                }
            }
        }
        Ok(ConstrainedTable { n, l_max, offsets, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// `ln Z_{m,l}`; `-inf` outside the stored domain (which is exact for
    /// `l > m`, and a domain error for `l > l_max` that callers guard).
    pub fn log_z(&self, m: usize, l: usize) -> f64 {
        if m > self.n || l > self.l_max || l > m || (l == 0 && m > 0) {
            return f64::NEG_INFINITY;
        }
        self.data[self.offsets[l] + (m - l)]
    }

    /// Flat packed storage (row-by-row), for persistence.
    pub(crate) fn raw_data(&self) -> &[f64] {
        &self.data
    }

    /// Rebuilds a table from packed storage produced by [`Self::raw_data`].
    pub(crate) fn from_raw(n: usize, l_max: usize, data: Vec<f64>) -> Result<Self, DpError> {
        if n == 0 {
            return Err(DpError::EmptyPolymer);
        }
        if l_max == 0 || l_max > n {
            return Err(DpError::BadLMax { l_max, n });
        }
        let mut offsets = Vec::with_capacity(l_max + 2);
        let mut total = 0usize;
        for l in 0..=l_max {
            offsets.push(total);
            total += n - l + 1;
        }
        offsets.push(total);
        if data.len() != total {
            return Err(DpError::WrongDataLength { expect: total, got: data.len() });
        }
        Ok(ConstrainedTable { n, l_max, offsets, data })
    }
}

/// Per-block maxima and max-relative exponentials of a log-domain vector,
/// the scaled linear form used by the blocked convolution.
pub(crate) struct BlockSummary {
    max: Vec<f64>,
    /// `exp(x - block_max)` per entry, 0.0 for `-inf`
    scaled: Vec<f64>,
}

impl BlockSummary {
    pub(crate) fn of(xs: &[f64]) -> Self {
        let nb = xs.len().div_ceil(BLOCK);
        let mut max = vec![f64::NEG_INFINITY; nb];
        let mut scaled = vec![0.0f64; xs.len()];
        for b in 0..nb {
            let lo = b * BLOCK;
            let hi = ((b + 1) * BLOCK).min(xs.len());
            for &x in &xs[lo..hi] {
                if x > max[b] {
                    max[b] = x;
                }
            }
            if max[b] > f64::NEG_INFINITY {
                for i in lo..hi {
                    if xs[i] != f64::NEG_INFINITY {
                        scaled[i] = (xs[i] - max[b]).exp();
                    }
                }
            }
        }
        BlockSummary { max, scaled }
    }
}

/// Number of leading `t` terms used to assemble the per-cell value lower
/// bound that licenses pruning.
const LB_PROBE: usize = 8;

/// `out[d-1] = ln sum_{t=1}^{d} p(t) P_{d-t}` for `d = 1..=out.len()`, where
/// `lp[t]` is `ln p(t)` (index 0 unused) and `prev[i]` is `ln P_i`.
/// Reference implementation: two-pass log-sum-exp per output.
pub(crate) fn convolve_naive(lp: &[f64], prev: &[f64], out: &mut [f64]) {
    let t_hi_all = lp.len() - 1;
    for (idx, slot) in out.iter_mut().enumerate() {
        let d = idx + 1;
        let t_hi = d.min(t_hi_all);
        let t_lo = 1.max(d.saturating_sub(prev.len() - 1));
        let mut max = f64::NEG_INFINITY;
        for t in t_lo..=t_hi {
            let v = lp[t] + prev[d - t];
            if v > max {
                max = v;
            }
        }
        if max == f64::NEG_INFINITY {
            *slot = f64::NEG_INFINITY;
            continue;
        }
        let mut acc = 0.0;
        for t in t_lo..=t_hi {
            let v = lp[t] + prev[d - t];
            if v >= max - 60.0 {
                acc += (v - max).exp();
            }
        }
        *slot = max + acc.ln();
    }
}

/// Blocked scaled-linear convolution; see the module docs for the scaling and
/// pruning invariants.
pub(crate) fn convolve_blocked(pb: &BlockSummary, lp: &[f64], prev: &[f64], out: &mut [f64]) {
    let d_len = out.len();
    let rb = BlockSummary::of(prev);
    let nb_p = pb.max.len();
    let nb_r = rb.max.len();
    let nb_o = d_len.div_ceil(BLOCK);
    // sweep 1a: per-output-block scale (upper bound over touching pairs)
    let mut ub = vec![f64::NEG_INFINITY; nb_o];
    for j in 0..nb_p {
        if pb.max[j] == f64::NEG_INFINITY || j * BLOCK >= d_len {
            continue;
        }
        for k in 0..nb_r {
            let base = j * BLOCK + k * BLOCK;
            if base >= d_len || rb.max[k] == f64::NEG_INFINITY {
                continue;
            }
            let s = pb.max[j] + rb.max[k];
            for ob in [j + k, j + k + 1] {
                if ob < nb_o {
                    if s > ub[ob] {
                        ub[ob] = s;
                    }
                } else {
                    break;
                }
            }
        }
    }
    // sweep 1b: a lower bound valid for every cell of each output block.
    // Each cell's value is at least its best term among t = 1..=LB_PROBE
    // (a sum of nonnegative terms dominates any single term); the block
    // minimum of that bound licenses pruning for the whole block. Blocks
    // holding a cell with no finite probe term get -inf and prune nothing.
    let mut lb = vec![f64::NEG_INFINITY; nb_o];
    let t_probe = LB_PROBE.min(lp.len() - 1);
    for ob in 0..nb_o {
        let lo = ob * BLOCK;
        let hi = ((ob + 1) * BLOCK).min(d_len);
        let mut worst = f64::INFINITY;
        for idx in lo..hi {
            let d = idx + 1;
            let mut cell = f64::NEG_INFINITY;
            for t in 1..=t_probe.min(d) {
                if d - t < prev.len() {
                    let v = lp[t] + prev[d - t];
                    if v > cell {
                        cell = v;
                    }
                }
            }
            if cell < worst {
                worst = cell;
            }
        }
        lb[ob] = worst;
    }
    // sweep 2: scaled accumulation
    let mut acc = vec![0.0f64; d_len];
    let mut scratch = vec![0.0f64; 2 * BLOCK];
    for j in 0..nb_p {
        if pb.max[j] == f64::NEG_INFINITY || j * BLOCK >= d_len {
            continue;
        }
        let p_lo = j * BLOCK;
        let p_hi = ((j + 1) * BLOCK).min(lp.len() - 1);
        let ep = &pb.scaled[p_lo..p_hi];
        for k in 0..nb_r {
            let base = p_lo + k * BLOCK;
            if base >= d_len || rb.max[k] == f64::NEG_INFINITY {
                continue;
            }
            let s = pb.max[j] + rb.max[k];
            let (ob1, ob2) = (j + k, j + k + 1);
            let need1 = ob1 < nb_o && s >= lb[ob1] - PRUNE_WINDOW;
            let need2 = ob2 < nb_o && s >= lb[ob2] - PRUNE_WINDOW;
            if !need1 && !need2 {
                continue;
            }
            let r_lo = k * BLOCK;
            let r_hi = ((k + 1) * BLOCK).min(prev.len());
            let er = &rb.scaled[r_lo..r_hi];
            let len = ep.len() + er.len() - 1;
            scratch[..len].fill(0.0);
            for (ti, &pv) in ep.iter().enumerate() {
                if pv == 0.0 {
                    continue;
                }
                for (ri, &rv) in er.iter().enumerate() {
                    scratch[ti + ri] += pv * rv;
                }
            }
            let g1 = if need1 { (s - ub[ob1]).exp() } else { 0.0 };
            let g2 = if need2 && ob2 < nb_o { (s - ub[ob2]).exp() } else { 0.0 };
            for (x, &v) in scratch[..len].iter().enumerate() {
                let idx = base + x;
                if idx >= d_len {
                    break;
                }
                if v > 0.0 {
                    let g = if idx / BLOCK == ob1 { g1 } else { g2 };
                    if g > 0.0 {
                        acc[idx] += v * g;
                    }
                }
            }
        }
    }
    for (idx, slot) in out.iter_mut().enumerate() {
        *slot = if acc[idx] > 0.0 { ub[idx / BLOCK] + acc[idx].ln() } else { f64::NEG_INFINITY };
    }
}

// ---------------------------------------------------------------------------
// contact-number law
// ---------------------------------------------------------------------------

/// `ln P_{n,h,omega}[L_n = l]` for `l = 0..=n`, from a full constrained table:
/// `P[L_n = l] ∝ e^{h l} Z_{n,l}`.
pub fn ln_contact_distribution(cons: &ConstrainedTable, h: f64) -> Result<Vec<f64>, DpError> {
    if cons.l_max() < cons.n() {
        return Err(DpError::PartialTable { l_max: cons.l_max(), n: cons.n() });
    }
    if !h.is_finite() {
        return Err(DpError::BadPinning(h));
    }
    let n = cons.n();
    let mut lw: Vec<f64> = (0..=n).map(|l| h * l as f64 + cons.log_z(n, l)).collect();
    let norm = log_sum_exp(&lw);
    for v in &mut lw {
        *v -= norm;
    }
    Ok(lw)
}

/// `ln sum_l e^{h l} Z_{n,l}`: the free log partition function reassembled
/// from the constrained table (equals [`FreeTable::log_partition`] on the
/// same charges up to accumulated rounding).
pub fn log_partition_from_constrained(cons: &ConstrainedTable, h: f64) -> Result<f64, DpError> {
    if cons.l_max() < cons.n() {
        return Err(DpError::PartialTable { l_max: cons.l_max(), n: cons.n() });
    }
    let n = cons.n();
    let lw: Vec<f64> = (0..=n).map(|l| h * l as f64 + cons.log_z(n, l)).collect();
    Ok(log_sum_exp(&lw))
}

/// Mean and variance of a distribution given as log-probabilities over
/// `0..len`.
pub fn ln_moments(ln_dist: &[f64]) -> (f64, f64) {
    let mut mean = Kahan::default();
    for (l, &lp) in ln_dist.iter().enumerate() {
        if lp > f64::NEG_INFINITY {
            mean.add(l as f64 * lp.exp());
        }
    }
    let mean = mean.total();
    let mut var = Kahan::default();
    for (l, &lp) in ln_dist.iter().enumerate() {
        if lp > f64::NEG_INFINITY {
            let d = l as f64 - mean;
            var.add(d * d * lp.exp());
        }
    }
    (mean, var.total())
}
