//! Location-at-a-time measure computation with bounded working memory.
//!
//! The naive route materialises the full `(J+1) x n` statistic field. This
//! module never does: it walks the domain one location at a time, computes
//! the column of `J+1` statistics for that location, ranks it, folds the
//! ranks into per-function running states, and discards the column. Peak
//! memory is `O(J s)` for the scan plus `O(J)` per requested measure,
//! independent of `n`.
//!
//! Every update rule is commutative and associative over locations, so
//! disjoint location blocks can be scanned by independent workers and merged
//! in any order. The implementation merges in block order to keep results
//! bit-identical across thread counts; the running minima and the rank-slot
//! states are exactly order-independent, and the area deficit uses
//! compensated summation so that any merge order agrees within 1e-12.

use std::io::{Read as IoRead, Write as IoWrite};
use std::path::Path;

use crate::dataset::{DesignSpec, FunctionalDataset};
use crate::error::{Error, Result};
use crate::glm::{ColumnEvaluator, DesignContext};
use crate::parallel;
use crate::permutation::{PermutationPlan, PlanFingerprint, Scheme};
use crate::rank::{
    continuous_ranks_into, ordinary_ranks_into, MeasureKind, MeasureVector, TiePolicy,
};

/// Hard capacity of the rank-slot state; the active limit is configurable
/// up to this bound.
pub const MAX_ERL_SLOTS: usize = 8;

/// Default number of active rank slots.
pub const DEFAULT_ERL_SLOTS: usize = 6;

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    // Error-free transform: returns (fl(a+b), exact residual). Symmetric in
    // its arguments, which makes every merge below commutative bit-for-bit.
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Running minimum, the whole update rule for the pmin and cont states.
pub fn update_running_min(state: &mut f64, rank: f64) {
    if rank < *state {
        *state = rank;
    }
}

/// Area state: the smallest ceiled continuous extremeness rank seen so far,
/// and the summed deficit of locations dipping below that ceiling.
///
/// Invariants: fresh state is `(inf, 0)`; once `r` is finite the deficit
/// satisfies `0 <= deficit < locations-seen`, because each contribution lies
/// in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaState {
    r: f64,
    d: f64,
    comp: f64,
}

impl AreaState {
    pub fn new() -> Self {
        AreaState { r: f64::INFINITY, d: 0.0, comp: 0.0 }
    }

    /// Folds in one continuous extremeness rank `C`:
    ///
    /// * `ceil(C) > r`: no change (the location cannot dip below the final
    ///   ceiling: `ceil(C) > r` forces `C > r` for integer `r`);
    /// * `ceil(C) = r`: deficit grows by `ceil(C) - C`;
    /// * `ceil(C) < r`: the ceiling drops and the deficit restarts at
    ///   `ceil(C) - C`. Previous contributions had `C >= r_new`, so they
    ///   vanish from the defining sum exactly.
    pub fn update(&mut self, ext: f64) {
        let c = ext.ceil();
        if c > self.r {
            return;
        }
        if c == self.r {
            let (s, e) = two_sum(self.d, c - ext);
            self.d = s;
            self.comp += e;
        } else {
            self.r = c;
            self.d = c - ext;
            self.comp = 0.0;
        }
    }

    /// Same branch rules applied to a whole scanned block.
    pub fn merge(&mut self, other: &AreaState) {
        if other.r < self.r {
            *self = *other;
        } else if other.r == self.r {
            let (s, e) = two_sum(self.d, other.d);
            self.d = s;
            self.comp = self.comp + other.comp + e;
        }
    }

    /// `(r - deficit/n) / (J+1)`.
    pub fn finalize(&self, locations: usize, functions: usize) -> f64 {
        debug_assert!(self.r.is_finite());
        debug_assert!(self.deficit() >= 0.0 && self.deficit() < locations as f64);
        (self.r - self.deficit() / locations as f64) / functions as f64
    }

    pub fn rank_ceiling(&self) -> f64 {
        self.r
    }

    pub fn deficit(&self) -> f64 {
        self.d + self.comp
    }
}

impl Default for AreaState {
    fn default() -> Self {
        Self::new()
    }
}

/// The smallest distinct extremeness ranks seen at any location, with exact
/// multiplicities: a run-length prefix of the function's ascending-sorted
/// extremeness-rank vector.
///
/// Invariants: active ranks strictly increase; a slot's count is positive
/// exactly when its rank is finite; a rank present among the `limit`
/// smallest distinct values of the stream always carries its full
/// multiplicity (inserts beyond the last slot are discarded, never partial).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErlSlots {
    ranks: [f64; MAX_ERL_SLOTS],
    counts: [u32; MAX_ERL_SLOTS],
    limit: u8,
}

impl ErlSlots {
    pub fn new(limit: usize) -> Self {
        assert!((2..=MAX_ERL_SLOTS).contains(&limit));
        ErlSlots {
            ranks: [f64::INFINITY; MAX_ERL_SLOTS],
            counts: [0; MAX_ERL_SLOTS],
            limit: limit as u8,
        }
    }

    pub fn insert(&mut self, rank: f64) {
        let lim = self.limit as usize;
        for i in 0..lim {
            if rank == self.ranks[i] {
                self.counts[i] += 1;
                return;
            }
            if rank < self.ranks[i] {
                for k in (i + 1..lim).rev() {
                    self.ranks[k] = self.ranks[k - 1];
                    self.counts[k] = self.counts[k - 1];
                }
                self.ranks[i] = rank;
                self.counts[i] = 1;
                return;
            }
        }
    }

    /// Keeps the `limit` smallest distinct ranks of the union, adding counts
    /// where both sides hold the same rank. Because a rank among the union's
    /// smallest is among each side's smallest wherever it occurs, the merged
    /// counts stay exact.
    pub fn merge(&mut self, other: &ErlSlots) {
        debug_assert_eq!(self.limit, other.limit);
        let lim = self.limit as usize;
        let mut ranks = [f64::INFINITY; MAX_ERL_SLOTS];
        let mut counts = [0u32; MAX_ERL_SLOTS];
        let (mut i, mut j) = (0, 0);
        for o in 0..lim {
            let a = self.ranks[i];
            let b = other.ranks[j];
            if a.is_infinite() && b.is_infinite() {
                break;
            }
            if a == b {
                ranks[o] = a;
                counts[o] = self.counts[i] + other.counts[j];
                i += 1;
                j += 1;
            } else if a < b {
                ranks[o] = a;
                counts[o] = self.counts[i];
                i += 1;
            } else {
                ranks[o] = b;
                counts[o] = other.counts[j];
                j += 1;
            }
        }
        self.ranks = ranks;
        self.counts = counts;
    }

    /// Locations accounted for by the stored slots. Less than the scanned
    /// total exactly when some ranks fell beyond the last slot.
    pub fn coverage(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn ranks(&self) -> &[f64] {
        &self.ranks[..self.limit as usize]
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts[..self.limit as usize]
    }

    pub fn limit(&self) -> usize {
        self.limit as usize
    }
}

/// Three-way outcome of comparing two rank-slot states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErlOrder {
    AMoreExtreme,
    BMoreExtreme,
    Tie,
}

fn slot_cmp(a: &ErlSlots, b: &ErlSlots) -> std::cmp::Ordering {
    debug_assert_eq!(a.limit, b.limit);
    for i in 0..a.limit as usize {
        let by_rank = a.ranks[i].total_cmp(&b.ranks[i]);
        if !by_rank.is_eq() {
            return by_rank;
        }
        // Same rank: the longer run keeps the smaller value at the first
        // position where the shorter run has already moved on.
        let by_count = b.counts[i].cmp(&a.counts[i]);
        if !by_count.is_eq() {
            return by_count;
        }
    }
    std::cmp::Ordering::Equal
}

/// Lexicographic comparison over `(rank_1, count_1, rank_2, count_2, ...)`:
/// smaller rank is more extreme, larger count is more extreme. States whose
/// stored slots agree entirely compare as a tie.
pub fn erl_compare(a: &ErlSlots, b: &ErlSlots) -> ErlOrder {
    match slot_cmp(a, b) {
        std::cmp::Ordering::Less => ErlOrder::AMoreExtreme,
        std::cmp::Ordering::Greater => ErlOrder::BMoreExtreme,
        std::cmp::Ordering::Equal => ErlOrder::Tie,
    }
}

/// Like [`erl_compare`], plus whether the outcome is exact. A non-tie is
/// always exact. A tie is exact only when the slots cover every scanned
/// location; otherwise the order would need ranks beyond the last slot and
/// the tie is a conservative fallback.
pub fn erl_compare_resolved(a: &ErlSlots, b: &ErlSlots, locations: usize) -> (ErlOrder, bool) {
    let order = erl_compare(a, b);
    let resolved = order != ErlOrder::Tie || a.coverage() == locations as u64;
    (order, resolved)
}

/// Which measures to stream and how.
#[derive(Debug, Clone)]
pub struct StreamingConfig {
    pub measures: Vec<MeasureKind>,
    /// Locations per worker unit; also the merge granularity.
    pub block_size: usize,
    pub tie_policy: TiePolicy,
    /// Active rank slots per function, `2..=MAX_ERL_SLOTS`.
    pub erl_slots: usize,
}

impl Default for StreamingConfig {
    fn default() -> Self {
        StreamingConfig {
            measures: MeasureKind::ALL.to_vec(),
            block_size: 1024,
            tie_policy: TiePolicy::MidRank,
            erl_slots: DEFAULT_ERL_SLOTS,
        }
    }
}

impl StreamingConfig {
    fn validate(&self) -> Result<()> {
        if self.measures.is_empty() {
            return Err(Error::Config("no measures requested".into()));
        }
        for (i, kind) in self.measures.iter().enumerate() {
            if self.measures[..i].contains(kind) {
                return Err(Error::Config(format!("measure '{kind}' listed twice")));
            }
        }
        if self.block_size == 0 {
            return Err(Error::Config("block size must be positive".into()));
        }
        if !(2..=MAX_ERL_SLOTS).contains(&self.erl_slots) {
            return Err(Error::Config(format!(
                "rank slot count {} outside 2..={MAX_ERL_SLOTS}",
                self.erl_slots
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct Wants {
    fmax: bool,
    pmin: bool,
    erl: bool,
    cont: bool,
    area: bool,
}

impl Wants {
    fn new(measures: &[MeasureKind]) -> Self {
        Wants {
            fmax: measures.contains(&MeasureKind::Fmax),
            pmin: measures.contains(&MeasureKind::Pmin),
            erl: measures.contains(&MeasureKind::Erl),
            cont: measures.contains(&MeasureKind::Cont),
            area: measures.contains(&MeasureKind::Area),
        }
    }

    fn needs_ordinary(&self) -> bool {
        self.pmin || self.erl
    }

    fn needs_continuous(&self) -> bool {
        self.cont || self.area
    }
}

/// One set of per-function running states; a worker's view of its block.
struct BlockStates {
    functions: usize,
    wants: Wants,
    fmax: Vec<f64>,
    pmin: Vec<f64>,
    cont: Vec<f64>,
    area: Vec<AreaState>,
    erl: Vec<ErlSlots>,
}

impl BlockStates {
    fn new(functions: usize, wants: Wants, erl_slots: usize) -> Self {
        BlockStates {
            functions,
            wants,
            fmax: if wants.fmax { vec![f64::NEG_INFINITY; functions] } else { Vec::new() },
            pmin: if wants.pmin { vec![f64::INFINITY; functions] } else { Vec::new() },
            cont: if wants.cont { vec![f64::INFINITY; functions] } else { Vec::new() },
            area: if wants.area { vec![AreaState::new(); functions] } else { Vec::new() },
            erl: if wants.erl { vec![ErlSlots::new(erl_slots); functions] } else { Vec::new() },
        }
    }

    fn absorb_location(&mut self, column: &[f64], ordinary: &[f64], continuous: &[f64]) {
        let m = self.functions as f64;
        for j in 0..self.functions {
            if self.wants.fmax && column[j] > self.fmax[j] {
                self.fmax[j] = column[j];
            }
            if self.wants.needs_ordinary() {
                let ext = m + 1.0 - ordinary[j];
                if self.wants.pmin {
                    update_running_min(&mut self.pmin[j], ext);
                }
                if self.wants.erl {
                    self.erl[j].insert(ext);
                }
            }
            if self.wants.needs_continuous() {
                let ext = m - continuous[j];
                if self.wants.cont {
                    update_running_min(&mut self.cont[j], ext);
                }
                if self.wants.area {
                    self.area[j].update(ext);
                }
            }
        }
    }

    fn merge(&mut self, other: &BlockStates) {
        for j in 0..self.functions {
            if self.wants.fmax && other.fmax[j] > self.fmax[j] {
                self.fmax[j] = other.fmax[j];
            }
            if self.wants.pmin {
                update_running_min(&mut self.pmin[j], other.pmin[j]);
            }
            if self.wants.cont {
                update_running_min(&mut self.cont[j], other.cont[j]);
            }
            if self.wants.area {
                self.area[j].merge(&other.area[j]);
            }
            if self.wants.erl {
                self.erl[j].merge(&other.erl[j]);
            }
        }
    }
}

/// Finished measures plus the diagnostics only the scan can produce.
#[derive(Debug, Clone)]
pub struct StreamingOutput {
    /// One vector per requested measure, in request order.
    pub measures: Vec<MeasureVector>,
    /// Per-function rank-slot states, present when erl was requested.
    pub erl_states: Option<Vec<ErlSlots>>,
    /// Permutation functions whose order against the observed function was
    /// not decided by the stored slots.
    pub erl_unresolved: usize,
    /// Degenerate-fit statistics capped across all locations and functions.
    pub capped: usize,
    pub locations: usize,
}

impl StreamingOutput {
    pub fn measure(&self, kind: MeasureKind) -> Option<&MeasureVector> {
        self.measures.iter().find(|m| m.kind == kind)
    }
}

fn locate(err: Error, location: usize) -> Error {
    match err {
        Error::Numerical(msg) => Error::Numerical(format!("location {}: {msg}", location + 1)),
        other => other,
    }
}

/// Scans `range` into `states`, returning the number of capped statistics.
fn scan_locations(
    dataset: &FunctionalDataset,
    ctx: &DesignContext,
    plan: &PermutationPlan,
    tie_policy: TiePolicy,
    range: std::ops::Range<usize>,
    states: &mut BlockStates,
) -> Result<usize> {
    let mut eval = ColumnEvaluator::new(ctx, plan, dataset)?;
    let m = eval.len();
    let mut column = vec![0.0; m];
    let mut ordinary = vec![0.0; m];
    let mut continuous = vec![0.0; m];
    let mut order = Vec::with_capacity(m);
    let mut capped = 0;
    for r in range {
        capped += eval.column(r, &mut column).map_err(|e| locate(e, r))?;
        if states.wants.needs_ordinary() {
            ordinary_ranks_into(&column, tie_policy, &mut order, &mut ordinary);
        }
        if states.wants.needs_continuous() {
            continuous_ranks_into(&column, &mut order, &mut continuous);
        }
        states.absorb_location(&column, &ordinary, &continuous);
    }
    Ok(capped)
}

fn finalize(
    states: BlockStates,
    capped: usize,
    plan: &PermutationPlan,
    config: &StreamingConfig,
    locations: usize,
) -> StreamingOutput {
    let m = states.functions;
    let fingerprint = plan.fingerprint();
    let mut erl_values: Option<Vec<f64>> = None;
    let mut erl_unresolved = 0;
    if states.wants.erl {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| slot_cmp(&states.erl[a], &states.erl[b]));
        let mut values = vec![0.0; m];
        let mut i = 0;
        while i < m {
            let mut j = i;
            while j + 1 < m && slot_cmp(&states.erl[order[j + 1]], &states.erl[order[i]]).is_eq()
            {
                j += 1;
            }
            for &idx in &order[i..=j] {
                values[idx] = i as f64 / m as f64;
            }
            i = j + 1;
        }
        erl_unresolved = (1..m)
            .filter(|&j| !erl_compare_resolved(&states.erl[j], &states.erl[0], locations).1)
            .count();
        erl_values = Some(values);
    }
    let measures = config
        .measures
        .iter()
        .map(|&kind| {
            let values = match kind {
                MeasureKind::Fmax => states.fmax.clone(),
                MeasureKind::Pmin => states.pmin.iter().map(|v| v / m as f64).collect(),
                MeasureKind::Cont => states.cont.iter().map(|v| v / m as f64).collect(),
                MeasureKind::Area => {
                    states.area.iter().map(|a| a.finalize(locations, m)).collect()
                }
                MeasureKind::Erl => erl_values.clone().unwrap(),
            };
            MeasureVector { kind, values, fingerprint: Some(fingerprint.clone()) }
        })
        .collect();
    StreamingOutput {
        measures,
        erl_states: if states.wants.erl { Some(states.erl) } else { None },
        erl_unresolved,
        capped,
        locations,
    }
}

/// Block-parallel scan. Workers hold private states for disjoint location
/// blocks; the merge runs in block order, so the output does not depend on
/// the number of threads.
pub fn streaming_run(
    dataset: &FunctionalDataset,
    design: &DesignSpec,
    plan: &PermutationPlan,
    config: &StreamingConfig,
) -> Result<StreamingOutput> {
    config.validate()?;
    let n = dataset.locations();
    let wants = Wants::new(&config.measures);
    let functions = plan.count() + 1;
    let blocks = n.div_ceil(config.block_size);
    let ctx = DesignContext::new(design)?;
    let results: Vec<Result<(BlockStates, usize)>> = parallel::map_indexed(blocks, |b| {
        let lo = b * config.block_size;
        let hi = (lo + config.block_size).min(n);
        let mut states = BlockStates::new(functions, wants, config.erl_slots);
        let capped = scan_locations(dataset, &ctx, plan, config.tie_policy, lo..hi, &mut states)?;
        Ok((states, capped))
    });
    let mut iter = results.into_iter();
    let (mut acc, mut capped) = iter.next().expect("dataset has at least one location")?;
    for res in iter {
        let (states, c) = res?;
        acc.merge(&states);
        capped += c;
    }
    Ok(finalize(acc, capped, plan, config, n))
}

/// Single-worker scan holding exactly one state set; the reference for the
/// memory ceiling.
pub fn streaming_run_sequential(
    dataset: &FunctionalDataset,
    design: &DesignSpec,
    plan: &PermutationPlan,
    config: &StreamingConfig,
) -> Result<StreamingOutput> {
    config.validate()?;
    let n = dataset.locations();
    let wants = Wants::new(&config.measures);
    let ctx = DesignContext::new(design)?;
    let mut states = BlockStates::new(plan.count() + 1, wants, config.erl_slots);
    let capped = scan_locations(dataset, &ctx, plan, config.tie_policy, 0..n, &mut states)?;
    Ok(finalize(states, capped, plan, config, n))
}

/// Partial scan state for resuming long runs: everything the scan has
/// folded so far, plus enough identity to refuse a mismatched resume.
pub struct StreamingCheckpoint {
    fingerprint: PlanFingerprint,
    measures: Vec<MeasureKind>,
    tie_policy: TiePolicy,
    erl_slots: usize,
    locations_done: usize,
    locations_total: usize,
    capped: usize,
    states: BlockStates,
}

impl StreamingCheckpoint {
    pub fn locations_done(&self) -> usize {
        self.locations_done
    }
}

/// Runs the sequential scan up to `stop_after` locations and packages the
/// states for a later [`streaming_resume`].
pub fn streaming_run_partial(
    dataset: &FunctionalDataset,
    design: &DesignSpec,
    plan: &PermutationPlan,
    config: &StreamingConfig,
    stop_after: usize,
) -> Result<StreamingCheckpoint> {
    config.validate()?;
    let n = dataset.locations();
    if stop_after > n {
        return Err(Error::Config(format!(
            "cannot scan {stop_after} of {n} locations"
        )));
    }
    let wants = Wants::new(&config.measures);
    let ctx = DesignContext::new(design)?;
    let mut states = BlockStates::new(plan.count() + 1, wants, config.erl_slots);
    let capped =
        scan_locations(dataset, &ctx, plan, config.tie_policy, 0..stop_after, &mut states)?;
    Ok(StreamingCheckpoint {
        fingerprint: plan.fingerprint(),
        measures: config.measures.clone(),
        tie_policy: config.tie_policy,
        erl_slots: config.erl_slots,
        locations_done: stop_after,
        locations_total: n,
        capped,
        states,
    })
}

/// Completes a checkpointed scan over the remaining locations.
pub fn streaming_resume(
    dataset: &FunctionalDataset,
    design: &DesignSpec,
    plan: &PermutationPlan,
    config: &StreamingConfig,
    checkpoint: StreamingCheckpoint,
) -> Result<StreamingOutput> {
    config.validate()?;
    if checkpoint.fingerprint != plan.fingerprint() {
        return Err(Error::PlanMismatch(
            "checkpoint was taken under a different permutation plan".into(),
        ));
    }
    if checkpoint.measures != config.measures
        || checkpoint.tie_policy != config.tie_policy
        || checkpoint.erl_slots != config.erl_slots
    {
        return Err(Error::Config(
            "checkpoint was taken under a different streaming configuration".into(),
        ));
    }
    let n = dataset.locations();
    if checkpoint.locations_total != n {
        return Err(Error::Config(format!(
            "checkpoint covers a {}-location domain, dataset has {n}",
            checkpoint.locations_total
        )));
    }
    let ctx = DesignContext::new(design)?;
    let mut states = checkpoint.states;
    let mut capped = checkpoint.capped;
    capped += scan_locations(
        dataset,
        &ctx,
        plan,
        config.tie_policy,
        checkpoint.locations_done..n,
        &mut states,
    )?;
    Ok(finalize(states, capped, plan, config, n))
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"PGST";
const CHECKPOINT_VERSION: u16 = 1;

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(Error::parse(self.path, 0, "truncated checkpoint"));
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Writes a checkpoint as a little-endian binary image.
pub fn save_checkpoint(path: &Path, checkpoint: &StreamingCheckpoint) -> Result<()> {
    let st = &checkpoint.states;
    let m = st.functions;
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let mut mask = 0u8;
    for (bit, kind) in MeasureKind::ALL.iter().enumerate() {
        if checkpoint.measures.contains(kind) {
            mask |= 1 << bit;
        }
    }
    buf.push(mask);
    buf.push(match checkpoint.tie_policy {
        TiePolicy::MidRank => 0,
        TiePolicy::MinRank => 1,
    });
    buf.push(checkpoint.erl_slots as u8);
    let fp = &checkpoint.fingerprint;
    put_u64(&mut buf, fp.seed);
    put_u64(&mut buf, fp.subjects as u64);
    put_u64(&mut buf, fp.count as u64);
    buf.push(match fp.scheme {
        Scheme::Raw => 0,
        Scheme::FreedmanLane => 1,
    });
    put_u64(&mut buf, fp.digest);
    put_u64(&mut buf, checkpoint.locations_done as u64);
    put_u64(&mut buf, checkpoint.locations_total as u64);
    put_u64(&mut buf, checkpoint.capped as u64);
    put_u64(&mut buf, m as u64);
    for v in &st.fmax {
        put_f64(&mut buf, *v);
    }
    for v in &st.pmin {
        put_f64(&mut buf, *v);
    }
    for v in &st.cont {
        put_f64(&mut buf, *v);
    }
    for a in &st.area {
        put_f64(&mut buf, a.r);
        put_f64(&mut buf, a.d);
        put_f64(&mut buf, a.comp);
    }
    for e in &st.erl {
        for i in 0..checkpoint.erl_slots {
            put_f64(&mut buf, e.ranks[i]);
            buf.extend_from_slice(&e.counts[i].to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<StreamingCheckpoint> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor { bytes: &bytes, pos: 0, path };
    if cur.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::parse(path, 0, "not a checkpoint file"));
    }
    let version = u16::from_le_bytes(cur.take(2)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::parse(path, 0, format!("unsupported checkpoint version {version}")));
    }
    let mask = cur.take(1)?[0];
    let measures: Vec<MeasureKind> = MeasureKind::ALL
        .iter()
        .enumerate()
        .filter(|(bit, _)| mask & (1 << bit) != 0)
        .map(|(_, &k)| k)
        .collect();
    let tie_policy = match cur.take(1)?[0] {
        0 => TiePolicy::MidRank,
        1 => TiePolicy::MinRank,
        other => return Err(Error::parse(path, 0, format!("unknown tie policy {other}"))),
    };
    let erl_slots = cur.take(1)?[0] as usize;
    if !(2..=MAX_ERL_SLOTS).contains(&erl_slots) {
        return Err(Error::parse(path, 0, format!("rank slot count {erl_slots} out of range")));
    }
    let seed = cur.u64()?;
    let subjects = cur.u64()? as usize;
    let count = cur.u64()? as usize;
    let scheme = match cur.take(1)?[0] {
        0 => Scheme::Raw,
        1 => Scheme::FreedmanLane,
        other => return Err(Error::parse(path, 0, format!("unknown scheme {other}"))),
    };
    let digest = cur.u64()?;
    let fingerprint = PlanFingerprint { seed, subjects, count, scheme, digest };
    let locations_done = cur.u64()? as usize;
    let locations_total = cur.u64()? as usize;
    let capped = cur.u64()? as usize;
    let m = cur.u64()? as usize;
    let wants = Wants::new(&measures);
    let mut states = BlockStates::new(m, wants, erl_slots);
    for v in &mut states.fmax {
        *v = cur.f64()?;
    }
    for v in &mut states.pmin {
        *v = cur.f64()?;
    }
    for v in &mut states.cont {
        *v = cur.f64()?;
    }
    for a in &mut states.area {
        a.r = cur.f64()?;
        a.d = cur.f64()?;
        a.comp = cur.f64()?;
    }
    for e in &mut states.erl {
        for i in 0..erl_slots {
            e.ranks[i] = cur.f64()?;
            e.counts[i] = cur.u32()?;
        }
    }
    if cur.pos != bytes.len() {
        return Err(Error::parse(path, 0, "trailing bytes after checkpoint"));
    }
    Ok(StreamingCheckpoint {
        fingerprint,
        measures,
        tie_policy,
        erl_slots,
        locations_done,
        locations_total,
        capped,
        states,
    })
}
