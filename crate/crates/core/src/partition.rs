//! Interval decomposition of the channel with a smooth partition of unity.
//!
//! The vertical domain [-L, L] is split into intervals I_j = [a_j, b_j] on
//! which the viscosity is nearly constant: the admission rule bounds
//! sup mu / inf mu over the *tripled* interval 3I_j (clamped to the domain)
//! by [`VISCOSITY_RATIO_LIMIT`], so that freezing the viscosity outside I_j
//! changes it by a bounded factor. Intervals are grown greedily outward from
//! y = 0, each one as long as the ratio rule allows, with candidate
//! endpoints drawn from the profile's sample grid plus the domain edges.
//!
//! On top of the intervals sits a smooth partition of unity
//! chi_j = b_j / sqrt(sum_l b_l^2), where each bump b_j equals 1 on its own
//! interval and falls to 0 across a ramp of width 0.45 min(|I_j|, |I_{j+1}|)
//! outside the shared endpoint. The 0.45 factor keeps the two ramps meeting
//! inside any interval strictly shorter than the interval itself, so at most
//! two cutoffs overlap anywhere, supp chi_j stays inside 3I_j, and the
//! normalizing sum of squares never drops below 1.
//!
//! For each interval, [`extend_viscosity`] produces the localized profile
//! mu_j = mu(a_j) sum_{l<j} chi_l^2 + mu chi_j^2 + mu(b_j) sum_{l>j} chi_l^2,
//! which agrees with mu on the core of I_j and freezes to the endpoint
//! values outside; its extremes set the local dissipation floor
//! nu_j = sigma^2 / sup mu_j and slope floor u_j = sigma / sup mu_j.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::profiles::{ShearEquilibrium, ViscosityProfile};

/// Largest allowed sup/inf viscosity ratio over a tripled interval.
pub const VISCOSITY_RATIO_LIMIT: f64 = 50.0;
/// Largest allowed sup/inf ratio of an extended (frozen) viscosity.
pub const EXTENSION_RATIO_LIMIT: f64 = 100.0;
/// Shortest interval the greedy builder will accept away from the edges.
pub const MIN_INTERVAL_LEN: f64 = 1.0;
/// Longest interval the greedy builder will produce.
pub const MAX_INTERVAL_LEN: f64 = 1000.0;
/// Hard cap on the interval count.
pub const MAX_INTERVALS: usize = 1000;

/// One closed interval [a, b] of the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, y: f64) -> bool {
        self.a <= y && y <= self.b
    }
}

/// Ordered interval cover of [-L, L] with smooth square-summing cutoffs.
#[derive(Debug, Clone)]
pub struct Partition {
    intervals: Vec<Interval>,
    /// Ramp width at each interior boundary b_j = a_{j+1}; length J - 1.
    ramps: Vec<f64>,
    half_length: f64,
}

/// Range min/max in O(1) after O(n log n) preprocessing.
struct SparseTable {
    mins: Vec<Vec<f64>>,
    maxs: Vec<Vec<f64>>,
}

impl SparseTable {
    fn new(values: &[f64]) -> Self {
        let n = values.len();
        let levels = (usize::BITS - n.leading_zeros()) as usize;
        let mut mins = Vec::with_capacity(levels);
        let mut maxs = Vec::with_capacity(levels);
        mins.push(values.to_vec());
        maxs.push(values.to_vec());
        for lev in 1..levels {
            let half = 1usize << (lev - 1);
            let width = 1usize << lev;
            let prev_min = &mins[lev - 1];
            let prev_max = &maxs[lev - 1];
            let mut row_min = Vec::with_capacity(n + 1 - width);
            let mut row_max = Vec::with_capacity(n + 1 - width);
            for i in 0..=n - width {
                row_min.push(prev_min[i].min(prev_min[i + half]));
                row_max.push(prev_max[i].max(prev_max[i + half]));
            }
            mins.push(row_min);
            maxs.push(row_max);
        }
        SparseTable { mins, maxs }
    }

    /// (min, max) over the inclusive index range [lo, hi].
    fn query(&self, lo: usize, hi: usize) -> (f64, f64) {
        debug_assert!(lo <= hi && hi < self.mins[0].len());
        let span = hi - lo + 1;
        let lev = (usize::BITS - 1 - span.leading_zeros()) as usize;
        let tail = hi + 1 - (1usize << lev);
        (
            self.mins[lev][lo].min(self.mins[lev][tail]),
            self.maxs[lev][lo].max(self.maxs[lev][tail]),
        )
    }
}

/// sup/inf of the sampled viscosity over [lo, hi] clamped to the domain.
fn sampled_ratio(table: &SparseTable, l: f64, dy: f64, n: usize, lo: f64, hi: f64) -> f64 {
    let lo = lo.max(-l);
    let hi = hi.min(l);
    let i_lo = (((lo + l) / dy - 1e-9).ceil().max(0.0)) as usize;
    let i_hi = ((((hi + l) / dy + 1e-9).floor()) as usize).min(n - 1);
    let (mn, mx) = table.query(i_lo.min(n - 1), i_hi.max(i_lo.min(n - 1)));
    mx / mn
}

/// True when the tripled interval of [a, b] keeps the viscosity ratio legal.
fn triple_ok(table: &SparseTable, l: f64, dy: f64, n: usize, a: f64, b: f64) -> bool {
    let len = b - a;
    sampled_ratio(table, l, dy, n, a - len, b + len) <= VISCOSITY_RATIO_LIMIT
}

/// Grow intervals from 0 toward +L over the sampled viscosity.
///
/// Each step first offers the domain edge (which closes the side and is
/// exempt from the remainder rule), then the largest grid candidate that
/// keeps the tripled-interval ratio legal while leaving at least
/// MIN_INTERVAL_LEN of channel to cover afterwards. Because the tripled
/// range only grows with the endpoint, admissibility is monotone and the
/// first admissible candidate scanning downward is the maximal one.
fn grow_side(table: &SparseTable, l: f64, dy: f64, n: usize) -> Result<Vec<Interval>> {
    let mut out = Vec::new();
    let mut a = 0.0f64;
    while l - a > 1e-12 {
        if out.len() >= MAX_INTERVALS {
            return Err(Error::TooManyIntervals(out.len()));
        }
        // domain edge first: it ends the side, so no remainder constraint
        if l - a <= MAX_INTERVAL_LEN && triple_ok(table, l, dy, n, a, l) {
            out.push(Interval { a, b: l });
            break;
        }
        let cap = (a + MAX_INTERVAL_LEN).min(l - MIN_INTERVAL_LEN);
        let mut hi_idx = ((cap + l) / dy + 1e-9).floor() as usize;
        hi_idx = hi_idx.min(n - 1);
        let lo_idx = ((a + MIN_INTERVAL_LEN + l) / dy - 1e-9).ceil() as usize;
        let mut found = None;
        let mut idx = hi_idx;
        while idx >= lo_idx {
            let b = -l + idx as f64 * dy;
            if b > a + 1e-12 && triple_ok(table, l, dy, n, a, b) {
                found = Some(b);
                break;
            }
            if idx == 0 {
                break;
            }
            idx -= 1;
        }
        match found {
            Some(b) => {
                out.push(Interval { a, b });
                a = b;
            }
            None => {
                return Err(Error::IntervalTooShort {
                    index: out.len(),
                    length: l - a,
                });
            }
        }
    }
    Ok(out)
}

/// Build the interval decomposition for a viscosity profile.
///
/// Intervals grow greedily from y = 0 in both directions; the admission
/// rule is evaluated on the profile's own sample grid, so the decomposition
/// is a deterministic function of the sampled profile.
pub fn build_partition(profile: &ViscosityProfile) -> Result<Partition> {
    let l = profile.half_length();
    let dy = profile.spacing();
    let n = profile.len();
    let table = SparseTable::new(profile.mu());

    let right = grow_side(&table, l, dy, n)?;

    // mirror the viscosity samples to reuse the same grower for y < 0:
    // position p carries mu(-p), so mirrored[i] = mu[n - i] with one extra
    // entry at position +L (the reflection of the sample at -L); position -L
    // itself reflects to +L, which is not a sample, and borrows the
    // outermost value. Every query on the mirror then sees exactly the
    // values a scan of the true grid over the reflected range sees, so
    // reflected intervals re-check cleanly against the raw samples.
    let mirrored: Vec<f64> = (0..=n).map(|i| profile.mu()[(n - i).min(n - 1)]).collect();
    let mirror_table = SparseTable::new(&mirrored);
    let left_mirrored = grow_side(&mirror_table, l, dy, n + 1)?;

    let mut intervals: Vec<Interval> = left_mirrored
        .iter()
        .rev()
        .map(|iv| Interval { a: -iv.b, b: -iv.a })
        .collect();
    intervals.extend(right);

    if intervals.len() > MAX_INTERVALS {
        return Err(Error::TooManyIntervals(intervals.len()));
    }

    let ramps = intervals
        .windows(2)
        .map(|w| 0.45 * w[0].len().min(w[1].len()))
        .collect();

    Ok(Partition {
        intervals,
        ramps,
        half_length: l,
    })
}

/// C-infinity step: 0 for x <= 0, 1 for x >= 1, strictly increasing between.
fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let fx = (-1.0 / x).exp();
        let f1 = (-1.0 / (1.0 - x)).exp();
        fx / (fx + f1)
    }
}

impl Partition {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn ramps(&self) -> &[f64] {
        &self.ramps
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    /// Index of the interval containing y (ties at shared endpoints resolve
    /// to the left interval; out-of-domain points clamp to the outermost).
    pub fn locate(&self, y: f64) -> usize {
        let y = y.clamp(-self.half_length, self.half_length);
        self.intervals
            .partition_point(|iv| iv.b < y)
            .min(self.intervals.len() - 1)
    }

    /// Raw bump of interval j: 1 on [a_j, b_j], a smooth ramp outside the
    /// interior boundaries, and a continued plateau past the domain edges.
    fn bump(&self, j: usize, y: f64) -> f64 {
        let iv = &self.intervals[j];
        if iv.contains(y) {
            1.0
        } else if y < iv.a {
            match j.checked_sub(1).map(|i| self.ramps[i]) {
                None => 1.0,
                Some(r) => smooth_step(1.0 - (iv.a - y) / r),
            }
        } else {
            match self.ramps.get(j) {
                None => 1.0,
                Some(&r) => smooth_step(1.0 - (y - iv.b) / r),
            }
        }
    }

    /// Normalized cutoff chi_j(y); grid-free and exact everywhere.
    pub fn chi(&self, j: usize, y: f64) -> f64 {
        let y = y.clamp(-self.half_length, self.half_length);
        let i = self.locate(y);
        if j + 1 < i || i + 1 < j {
            return 0.0;
        }
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(self.intervals.len() - 1);
        let mut sum = 0.0;
        let mut own = 0.0;
        for l in lo..=hi {
            let b = self.bump(l, y);
            sum += b * b;
            if l == j {
                own = b;
            }
        }
        own / sum.sqrt()
    }

    /// chi_j sampled on an arbitrary set of heights.
    pub fn chi_on_grid(&self, j: usize, ys: &[f64]) -> Vec<f64> {
        ys.iter().map(|&y| self.chi(j, y)).collect()
    }

    /// Numerical sup of |chi_j|, |chi_j'|, |chi_j''| over the cutoff's
    /// support, by centered differences on a fine probe grid.
    pub fn chi_bounds(&self, j: usize) -> [f64; 3] {
        let iv = &self.intervals[j];
        let margin_l = j
            .checked_sub(1)
            .map(|i| self.ramps[i])
            .unwrap_or(0.1 * iv.len());
        let margin_r = self.ramps.get(j).cloned().unwrap_or(0.1 * iv.len());
        let lo = iv.a - 1.5 * margin_l;
        let hi = iv.b + 1.5 * margin_r;
        let m = 8192usize;
        let h = (hi - lo) / m as f64;
        let vals: Vec<f64> = (0..=m).map(|i| self.chi(j, lo + i as f64 * h)).collect();
        let c0 = vals.iter().cloned().fold(0.0, f64::max);
        let mut c1 = 0.0f64;
        let mut c2 = 0.0f64;
        for i in 1..m {
            let d1 = (vals[i + 1] - vals[i - 1]) / (2.0 * h);
            let d2 = (vals[i + 1] - 2.0 * vals[i] + vals[i - 1]) / (h * h);
            c1 = c1.max(d1.abs());
            c2 = c2.max(d2.abs());
        }
        [c0, c1, c2]
    }
}

/// Viscosity frozen outside one interval, with its local floors.
#[derive(Debug, Clone)]
pub struct LocalViscosity {
    pub index: usize,
    pub interval: Interval,
    /// Extended profile sampled on the equilibrium's y-grid.
    pub mu_ext: Vec<f64>,
    pub sup: f64,
    pub inf: f64,
    /// Local dissipation floor sigma^2 / sup mu_j.
    pub nu: f64,
    /// Local slope floor sigma / sup mu_j.
    pub u: f64,
}

impl LocalViscosity {
    /// Local decay rate nu_j^{1/3} = sigma^{2/3} / (sup mu_j)^{1/3}.
    pub fn rate(&self) -> f64 {
        self.nu.cbrt()
    }
}

/// Freeze the viscosity outside interval j using the cutoff weights.
pub fn extend_viscosity(
    eq: &ShearEquilibrium,
    part: &Partition,
    j: usize,
) -> Result<LocalViscosity> {
    let profile = eq.profile();
    let iv = part.intervals()[j];
    let mu_a = profile.eval(iv.a).0;
    let mu_b = profile.eval(iv.b).0;
    let last = part.len() - 1;

    let mut mu_ext = Vec::with_capacity(profile.len());
    for (&y, &mu_y) in profile.ys().iter().zip(profile.mu()) {
        let i = part.locate(y);
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(last);
        let mut below = 0.0;
        let mut own = 0.0;
        let mut above = 0.0;
        for l in lo..=hi {
            let c = part.chi(l, y);
            let c2 = c * c;
            match l.cmp(&j) {
                std::cmp::Ordering::Less => below += c2,
                std::cmp::Ordering::Equal => own = c2,
                std::cmp::Ordering::Greater => above += c2,
            }
        }
        mu_ext.push(mu_a * below + mu_y * own + mu_b * above);
    }

    let sup = mu_ext.iter().cloned().fold(f64::MIN, f64::max);
    let inf = mu_ext.iter().cloned().fold(f64::MAX, f64::min);
    let ratio = sup / inf;
    if ratio > EXTENSION_RATIO_LIMIT {
        return Err(Error::ExtensionRatio {
            index: j,
            ratio,
            limit: EXTENSION_RATIO_LIMIT,
        });
    }
    let sigma = eq.sigma();
    Ok(LocalViscosity {
        index: j,
        interval: iv,
        mu_ext,
        sup,
        inf,
        nu: sigma * sigma / sup,
        u: sigma / sup,
    })
}

/// Extended viscosities for every interval of the partition.
pub fn localized_data(eq: &ShearEquilibrium, part: &Partition) -> Result<Vec<LocalViscosity>> {
    (0..part.len()).map(|j| extend_viscosity(eq, part, j)).collect()
}

/// Serializable account of one interval for run manifests.
#[derive(Debug, Clone, Serialize)]
pub struct IntervalReport {
    pub a: f64,
    pub b: f64,
    pub ramp_left: Option<f64>,
    pub ramp_right: Option<f64>,
    pub sup_mu_ext: f64,
    pub inf_mu_ext: f64,
    pub nu: f64,
    pub u: f64,
    pub rate: f64,
    pub chi_bounds: [f64; 3],
}

/// Serializable account of the whole decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct PartitionReport {
    pub count: usize,
    pub intervals: Vec<IntervalReport>,
}

/// Assemble the manifest report (intervals, ramps, local floors, cutoff
/// derivative bounds) for a built partition.
pub fn report(eq: &ShearEquilibrium, part: &Partition) -> Result<PartitionReport> {
    let mut intervals = Vec::with_capacity(part.len());
    for j in 0..part.len() {
        let local = extend_viscosity(eq, part, j)?;
        intervals.push(IntervalReport {
            a: local.interval.a,
            b: local.interval.b,
            ramp_left: j.checked_sub(1).map(|i| part.ramps()[i]),
            ramp_right: part.ramps().get(j).cloned(),
            sup_mu_ext: local.sup,
            inf_mu_ext: local.inf,
            nu: local.nu,
            u: local.u,
            rate: local.rate(),
            chi_bounds: part.chi_bounds(j),
        });
    }
    Ok(PartitionReport {
        count: part.len(),
        intervals,
    })
}
