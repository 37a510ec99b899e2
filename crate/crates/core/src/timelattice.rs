//! Staircase paths on the multi-time lattice.
//!
//! A lattice with `steps` cells per axis and cell widths `ε_j` carries
//! monotone axis-aligned paths from the origin to `(steps, …, steps)`. In two
//! time dimensions every such path is parameterised by its starting axis and
//! a weakly increasing multi-index `m_1 ≤ … ≤ m_{steps−1}`: the path takes its
//! `i`-th unit step along the starting axis at height `m_{i−1}` (with
//! `m_0 = 0`) on the other axis.
//!
//! Redundancy is resolved by canonical form: zero-length moves are dropped
//! and consecutive moves along one axis are merged, and two paths are the
//! same iff their canonical forms agree.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `steps` accepted for 2-time enumeration.
pub const MAX_STEPS_2D: u32 = 8;
/// Largest `steps` accepted for 3-time enumeration.
pub const MAX_STEPS_3D: u32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub n_times: usize,
    pub steps: u32,
    pub widths: Vec<f64>,
}

impl LatticeSpec {
    pub fn new(n_times: usize, steps: u32, widths: Vec<f64>) -> Result<Self> {
        if n_times < 2 {
            return Err(Error::InvalidArgument(format!("n_times = {n_times} < 2")));
        }
        if steps < 1 {
            return Err(Error::InvalidArgument(
                "lattice needs at least one step per axis".into(),
            ));
        }
        if widths.len() != n_times || widths.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "need {n_times} positive finite widths, got {widths:?}"
            )));
        }
        Ok(Self {
            n_times,
            steps,
            widths,
        })
    }

    /// Unit-width lattice.
    pub fn unit(n_times: usize, steps: u32) -> Result<Self> {
        Self::new(n_times, steps, vec![1.0; n_times])
    }

    /// Total duration `steps · ε_j` along each axis.
    pub fn extents(&self) -> Vec<f64> {
        self.widths.iter().map(|w| w * self.steps as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Move {
    pub axis: usize,
    pub length: u32,
}

impl Move {
    pub fn new(axis: usize, length: u32) -> Self {
        Self { axis, length }
    }
}

/// Monotone axis-aligned path on the lattice.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StaircasePath {
    start: Vec<i64>,
    moves: Vec<Move>,
}

impl StaircasePath {
    pub fn new(start: Vec<i64>, moves: Vec<Move>) -> Result<Self> {
        if let Some(m) = moves.iter().find(|m| m.axis >= start.len()) {
            return Err(Error::IndexOutOfRange {
                index: m.axis,
                len: start.len(),
            });
        }
        Ok(Self { start, moves })
    }

    pub fn from_origin(n_times: usize, moves: Vec<Move>) -> Result<Self> {
        Self::new(vec![0; n_times], moves)
    }

    pub fn empty(n_times: usize) -> Self {
        Self {
            start: vec![0; n_times],
            moves: Vec::new(),
        }
    }

    pub fn n_times(&self) -> usize {
        self.start.len()
    }

    pub fn start(&self) -> &[i64] {
        &self.start
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn end(&self) -> Vec<i64> {
        let mut e = self.start.clone();
        for m in &self.moves {
            e[m.axis] += m.length as i64;
        }
        e
    }

    pub fn total_length(&self) -> u64 {
        self.moves.iter().map(|m| m.length as u64).sum()
    }

    /// Drops zero-length moves and merges consecutive same-axis moves.
    pub fn canonical(&self) -> Self {
        let mut out: Vec<Move> = Vec::with_capacity(self.moves.len());
        for m in self.moves.iter().filter(|m| m.length > 0) {
            match out.last_mut() {
                Some(last) if last.axis == m.axis => last.length += m.length,
                _ => out.push(*m),
            }
        }
        Self {
            start: self.start.clone(),
            moves: out,
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.moves.iter().all(|m| m.length > 0)
            && self.moves.windows(2).all(|w| w[0].axis != w[1].axis)
    }

    /// Unit-step word, one axis index per lattice step.
    pub fn word(&self) -> Vec<usize> {
        self.moves
            .iter()
            .flat_map(|m| std::iter::repeat_n(m.axis, m.length as usize))
            .collect()
    }

    pub fn from_word(n_times: usize, word: &[usize]) -> Result<Self> {
        let moves = word.iter().map(|&a| Move::new(a, 1)).collect();
        Ok(Self::from_origin(n_times, moves)?.canonical())
    }

    /// First axis actually moved along, if any.
    pub fn starting_axis(&self) -> Option<usize> {
        self.moves.iter().find(|m| m.length > 0).map(|m| m.axis)
    }

    /// Same path with every move along `a` relabelled `b` and vice versa.
    pub fn swap_axes(&self, a: usize, b: usize) -> Self {
        let swap = |x: usize| {
            if x == a {
                b
            } else if x == b {
                a
            } else {
                x
            }
        };
        let mut start = self.start.clone();
        start.swap(a, b);
        Self {
            start,
            moves: self
                .moves
                .iter()
                .map(|m| Move::new(swap(m.axis), m.length))
                .collect(),
        }
    }

    /// Concatenation `self` then `next`; `next` must start where `self` ends.
    pub fn then(&self, next: &Self) -> Result<Self> {
        if next.start != self.end() {
            return Err(Error::InvalidArgument(format!(
                "paths do not connect: {:?} vs {:?}",
                self.end(),
                next.start
            )));
        }
        let mut moves = self.moves.clone();
        moves.extend_from_slice(&next.moves);
        Ok(Self {
            start: self.start.clone(),
            moves,
        })
    }
}

impl fmt::Display for StaircasePath {
    /// `0,0|t1:2,t2:1,t1:1` (axes are 1-based in text).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let start: Vec<String> = self.start.iter().map(|c| c.to_string()).collect();
        let moves: Vec<String> = self
            .moves
            .iter()
            .map(|m| format!("t{}:{}", m.axis + 1, m.length))
            .collect();
        write!(f, "{}|{}", start.join(","), moves.join(","))
    }
}

impl FromStr for StaircasePath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (start, moves) = s
            .split_once('|')
            .ok_or_else(|| Error::PathParse(format!("missing '|' in {s:?}")))?;
        let start: Vec<i64> = start
            .split(',')
            .map(|c| c.trim().parse::<i64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::PathParse(format!("bad start point {start:?}: {e}")))?;
        let mut parsed = Vec::new();
        for tok in moves.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (axis, len) = tok
                .strip_prefix('t')
                .and_then(|r| r.split_once(':'))
                .ok_or_else(|| Error::PathParse(format!("bad move {tok:?}")))?;
            let axis: usize = axis
                .parse()
                .map_err(|_| Error::PathParse(format!("bad axis in {tok:?}")))?;
            if axis == 0 {
                return Err(Error::PathParse(format!("axes are 1-based: {tok:?}")));
            }
            let length: u32 = len
                .parse()
                .map_err(|_| Error::PathParse(format!("bad length in {tok:?}")))?;
            parsed.push(Move::new(axis - 1, length));
        }
        StaircasePath::new(start, parsed)
    }
}

impl Serialize for StaircasePath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for StaircasePath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Two-time multi-index: starting axis plus weakly increasing heights.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathMultiIndex {
    pub starting_axis: usize,
    pub values: Vec<u32>,
}

/// Order in which the two transverse axes are traversed at one corner of a
/// three-time path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CornerOrder {
    /// Lower-numbered transverse axis first.
    LowFirst,
    HighFirst,
}

/// Three-time multi-index of the permutation-measure family: heights on the
/// two transverse axes after each unit step of the starting axis, plus the
/// traversal order at each of the `steps` transitions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathMultiIndex3 {
    pub starting_axis: usize,
    pub low: Vec<u32>,
    pub high: Vec<u32>,
    pub corners: Vec<CornerOrder>,
}

fn other_axes(n_times: usize, axis: usize) -> Vec<usize> {
    (0..n_times).filter(|&a| a != axis).collect()
}

fn check_weakly_increasing(values: &[u32], steps: u32, what: &str) -> Result<()> {
    if values.len() != steps as usize - 1 {
        return Err(Error::InvalidMultiIndex(format!(
            "{what}: expected {} values, got {}",
            steps - 1,
            values.len()
        )));
    }
    if values.iter().any(|&v| v > steps) {
        return Err(Error::InvalidMultiIndex(format!(
            "{what}: value above {steps}"
        )));
    }
    if values.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidMultiIndex(format!(
            "{what}: not weakly increasing"
        )));
    }
    Ok(())
}

/// Canonical path encoded by a two-time multi-index.
pub fn path_from_multiindex(spec: &LatticeSpec, idx: &PathMultiIndex) -> Result<StaircasePath> {
    if spec.n_times != 2 {
        return Err(Error::InvalidMultiIndex(
            "two-time multi-index on a non 2-time lattice".into(),
        ));
    }
    if idx.starting_axis > 1 {
        return Err(Error::InvalidMultiIndex(format!(
            "starting axis {}",
            idx.starting_axis
        )));
    }
    check_weakly_increasing(&idx.values, spec.steps, "multi-index")?;
    let a = idx.starting_axis;
    let b = 1 - a;
    let mut moves = Vec::with_capacity(2 * spec.steps as usize);
    let mut prev = 0;
    for i in 0..spec.steps as usize {
        moves.push(Move::new(a, 1));
        let next = idx.values.get(i).copied().unwrap_or(spec.steps);
        moves.push(Move::new(b, next - prev));
        prev = next;
    }
    Ok(StaircasePath::from_origin(2, moves)?.canonical())
}

/// Inverse of [`path_from_multiindex`].
pub fn multiindex_from_path(spec: &LatticeSpec, path: &StaircasePath) -> Result<PathMultiIndex> {
    let n = spec.steps as i64;
    if path.n_times() != 2 || path.start() != [0, 0] || path.end() != vec![n, n] {
        return Err(Error::InvalidMultiIndex(format!(
            "{path} is not an origin-to-corner 2-time path"
        )));
    }
    let a = path
        .starting_axis()
        .ok_or_else(|| Error::InvalidMultiIndex("empty path".into()))?;
    let b = 1 - a;
    let mut height = 0u32;
    let mut heights = Vec::with_capacity(spec.steps as usize);
    for m in path.moves() {
        if m.axis == a {
            heights.extend(std::iter::repeat_n(height, m.length as usize));
        } else {
            debug_assert_eq!(m.axis, b);
            height += m.length;
        }
    }
    debug_assert_eq!(heights[0], 0);
    Ok(PathMultiIndex {
        starting_axis: a,
        values: heights[1..].to_vec(),
    })
}

/// Path of the three-time permutation-measure family.
pub fn path_from_multiindex3(spec: &LatticeSpec, idx: &PathMultiIndex3) -> Result<StaircasePath> {
    if spec.n_times != 3 {
        return Err(Error::InvalidMultiIndex(
            "three-time multi-index on a non 3-time lattice".into(),
        ));
    }
    if idx.starting_axis > 2 {
        return Err(Error::InvalidMultiIndex(format!(
            "starting axis {}",
            idx.starting_axis
        )));
    }
    check_weakly_increasing(&idx.low, spec.steps, "low heights")?;
    check_weakly_increasing(&idx.high, spec.steps, "high heights")?;
    if idx.corners.len() != spec.steps as usize {
        return Err(Error::InvalidMultiIndex(format!(
            "expected {} corner orders, got {}",
            spec.steps,
            idx.corners.len()
        )));
    }
    let a = idx.starting_axis;
    let tr = other_axes(3, a);
    let (lo_ax, hi_ax) = (tr[0], tr[1]);
    let mut moves = Vec::new();
    let (mut lo, mut hi) = (0u32, 0u32);
    for i in 0..spec.steps as usize {
        moves.push(Move::new(a, 1));
        let nlo = idx.low.get(i).copied().unwrap_or(spec.steps);
        let nhi = idx.high.get(i).copied().unwrap_or(spec.steps);
        let (first, second) = match idx.corners[i] {
            CornerOrder::LowFirst => (Move::new(lo_ax, nlo - lo), Move::new(hi_ax, nhi - hi)),
            CornerOrder::HighFirst => (Move::new(hi_ax, nhi - hi), Move::new(lo_ax, nlo - lo)),
        };
        moves.push(first);
        moves.push(second);
        lo = nlo;
        hi = nhi;
    }
    Ok(StaircasePath::from_origin(3, moves)?.canonical())
}

/// Weakly increasing sequences of `len` values in `[0, max]`, lexicographic.
pub fn weakly_increasing(len: usize, max: u32) -> Vec<Vec<u32>> {
    fn rec(len: usize, lo: u32, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for v in lo..=max {
            cur.push(v);
            rec(len, v, max, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(len, 0, max, &mut Vec::with_capacity(len), &mut out);
    out
}

/// Every monotone staircase path from the origin to `(steps, …, steps)`,
/// once each.
///
/// Two-time paths are ordered by starting axis and then by multi-index.
/// Three-time paths are ordered by their unit-step word, which groups them
/// by starting axis.
pub fn enumerate_paths(spec: &LatticeSpec) -> Result<Vec<StaircasePath>> {
    match spec.n_times {
        2 => {
            if spec.steps > MAX_STEPS_2D {
                return Err(Error::TooLarge(format!(
                    "2-time steps {} > {MAX_STEPS_2D}",
                    spec.steps
                )));
            }
            let seqs = weakly_increasing(spec.steps as usize - 1, spec.steps);
            let mut out = Vec::with_capacity(2 * seqs.len());
            for axis in 0..2 {
                for values in &seqs {
                    out.push(path_from_multiindex(
                        spec,
                        &PathMultiIndex {
                            starting_axis: axis,
                            values: values.clone(),
                        },
                    )?);
                }
            }
            Ok(out)
        }
        3 => {
            if spec.steps > MAX_STEPS_3D {
                return Err(Error::TooLarge(format!(
                    "3-time steps {} > {MAX_STEPS_3D}",
                    spec.steps
                )));
            }
            let mut out = Vec::new();
            let mut remaining = vec![spec.steps; 3];
            let mut word = Vec::with_capacity(3 * spec.steps as usize);
            words_rec(&mut remaining, &mut word, &mut out);
            out.into_iter()
                .map(|w| StaircasePath::from_word(3, &w))
                .collect()
        }
        n => Err(Error::UnsupportedCombination(format!(
            "path enumeration for {n} time directions"
        ))),
    }
}

fn words_rec(remaining: &mut [u32], word: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if remaining.iter().all(|&r| r == 0) {
        out.push(word.clone());
        return;
    }
    for axis in 0..remaining.len() {
        if remaining[axis] > 0 {
            remaining[axis] -= 1;
            word.push(axis);
            words_rec(remaining, word, out);
            word.pop();
            remaining[axis] += 1;
        }
    }
}

/// Closed-form path count `(N·steps)! / (steps!)^N`.
pub fn count_paths(spec: &LatticeSpec) -> u128 {
    let n = spec.steps as u128;
    // Product of binomials C(k·n, n) for k = 2..N avoids large factorials.
    let mut total: u128 = 1;
    for k in 2..=spec.n_times as u128 {
        total *= binomial(k * n, n);
    }
    total
}

/// Independent count: scans every word over the axes of length
/// `N·steps` and keeps those using each axis exactly `steps` times.
pub fn brute_force_count(spec: &LatticeSpec) -> Result<u128> {
    let n = spec.n_times as u64;
    let len = spec.n_times as u32 * spec.steps;
    let total = n
        .checked_pow(len)
        .filter(|&t| t <= 1 << 26)
        .ok_or_else(|| Error::TooLarge(format!("{n}^{len} words")))?;
    let mut count = 0u128;
    let mut uses = vec![0u32; spec.n_times];
    for mut w in 0..total {
        uses.iter_mut().for_each(|u| *u = 0);
        for _ in 0..len {
            uses[(w % n) as usize] += 1;
            w /= n;
        }
        if uses.iter().all(|&u| u == spec.steps) {
            count += 1;
        }
    }
    Ok(count)
}

pub fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

// ---------------------------------------------------------------------------
// Redundancy analysis
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPath {
    pub path: StaircasePath,
    pub weight: f64,
}

/// A parameterised path family, possibly with repeated geometric paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFamily {
    pub name: String,
    pub n_times: usize,
    pub steps: u32,
    pub terms: Vec<WeightedPath>,
}

impl PathFamily {
    pub fn unweighted(
        name: impl Into<String>,
        n_times: usize,
        steps: u32,
        paths: Vec<StaircasePath>,
    ) -> Self {
        Self {
            name: name.into(),
            n_times,
            steps,
            terms: paths
                .into_iter()
                .map(|path| WeightedPath { path, weight: 1.0 })
                .collect(),
        }
    }

    /// Concatenates the terms of several families.
    pub fn union(name: impl Into<String>, parts: &[PathFamily]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty family union".into()))?;
        if parts
            .iter()
            .any(|p| p.n_times != first.n_times || p.steps != first.steps)
        {
            return Err(Error::InvalidArgument(
                "family union over different lattices".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            n_times: first.n_times,
            steps: first.steps,
            terms: parts.iter().flat_map(|p| p.terms.iter().cloned()).collect(),
        })
    }
}

/// Two-time family with `k` free breakpoints `0 < n_1 < … < n_k < steps`
/// along `axis` and free heights `0 ≤ m_1 ≤ … ≤ m_k ≤ steps`, generated
/// without any redundancy constraint. `k = 1` is the single-corner family
/// with free `n_1`; `k = 2` the two-corner family.
pub fn raw_breakpoint_family(steps: u32, k: usize, axis: usize) -> Result<PathFamily> {
    if axis > 1 {
        return Err(Error::InvalidArgument(format!(
            "axis {axis} on a 2-time lattice"
        )));
    }
    let b = 1 - axis;
    let mut paths = Vec::new();
    let interior: Vec<u32> = (1..steps).collect();
    for breaks in combinations(&interior, k) {
        for heights in weakly_increasing(k, steps) {
            let mut moves = Vec::new();
            let (mut pn, mut pm) = (0u32, 0u32);
            for (n, m) in breaks.iter().zip(&heights) {
                moves.push(Move::new(axis, n - pn));
                moves.push(Move::new(b, m - pm));
                pn = *n;
                pm = *m;
            }
            moves.push(Move::new(axis, steps - pn));
            moves.push(Move::new(b, steps - pm));
            paths.push(StaircasePath::from_origin(2, moves)?);
        }
    }
    Ok(PathFamily::unweighted(
        format!("raw-{k}-corner-t{}", axis + 1),
        2,
        steps,
        paths,
    ))
}

fn combinations(items: &[u32], k: usize) -> Vec<Vec<u32>> {
    fn rec(items: &[u32], k: usize, start: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, k, 0, &mut Vec::new(), &mut out);
    out
}

/// Two-time family with every breakpoint fixed, `n_i = i`: the multi-index
/// family for one starting axis.
pub fn constrained_family(spec: &LatticeSpec, axis: usize) -> Result<PathFamily> {
    let paths = weakly_increasing(spec.steps as usize - 1, spec.steps)
        .into_iter()
        .map(|values| {
            path_from_multiindex(
                spec,
                &PathMultiIndex {
                    starting_axis: axis,
                    values,
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathFamily::unweighted(
        format!("fixed-breakpoints-t{}", axis + 1),
        2,
        spec.steps,
        paths,
    ))
}

/// `P(n, r) = n! / (n − r)!`.
pub fn permutation_count(n: u32, r: u32) -> u64 {
    if r > n {
        return 0;
    }
    ((n - r + 1)..=n).map(|x| x as u64).product()
}

/// Three-time permutation-measure family for one starting axis: both
/// traversal orders at every transition, each weighted by `1/P(2, r)` with
/// `r` the number of transverse axes that do not move at that transition.
pub fn permutation_family_3d(spec: &LatticeSpec, axis: usize) -> Result<PathFamily> {
    if spec.n_times != 3 {
        return Err(Error::InvalidArgument(
            "permutation family needs a 3-time lattice".into(),
        ));
    }
    let n = spec.steps;
    let seqs = weakly_increasing(n as usize - 1, n);
    let mut terms = Vec::new();
    for low in &seqs {
        for high in &seqs {
            let mut lo_full = vec![0u32];
            lo_full.extend(low);
            lo_full.push(n);
            let mut hi_full = vec![0u32];
            hi_full.extend(high);
            hi_full.push(n);
            let r: Vec<u32> = (0..n as usize)
                .map(|i| {
                    (lo_full[i] == lo_full[i + 1]) as u32 + (hi_full[i] == hi_full[i + 1]) as u32
                })
                .collect();
            for mask in 0..(1u64 << n) {
                let corners: Vec<CornerOrder> = (0..n as usize)
                    .map(|i| {
                        if mask >> i & 1 == 0 {
                            CornerOrder::LowFirst
                        } else {
                            CornerOrder::HighFirst
                        }
                    })
                    .collect();
                let path = path_from_multiindex3(
                    spec,
                    &PathMultiIndex3 {
                        starting_axis: axis,
                        low: low.clone(),
                        high: high.clone(),
                        corners,
                    },
                )?;
                let weight = r
                    .iter()
                    .map(|&ri| 1.0 / permutation_count(2, ri) as f64)
                    .product();
                terms.push(WeightedPath { path, weight });
            }
        }
    }
    Ok(PathFamily {
        name: format!("permutation-measure-t{}", axis + 1),
        n_times: 3,
        steps: n,
        terms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionClass {
    pub path: StaircasePath,
    pub multiplicity: usize,
    pub weighted_multiplicity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub name: String,
    pub terms: usize,
    pub distinct_paths: usize,
    /// multiplicity → number of geometric paths with that multiplicity
    pub histogram: BTreeMap<usize, usize>,
    /// Classes with multiplicity above one.
    pub collisions: Vec<CollisionClass>,
    /// Every geometric path has weighted multiplicity exactly one.
    pub weighted_all_ones: bool,
    /// Monotone corner-to-corner paths not represented in the family.
    pub missing_paths: usize,
}

impl FamilyReport {
    pub fn all_ones(&self) -> bool {
        self.histogram.keys().all(|&k| k == 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupReport {
    pub families: Vec<FamilyReport>,
}

/// Groups each family's terms by canonical form and reports multiplicities.
pub fn dedup_report(families: &[PathFamily]) -> DedupReport {
    let reports = families
        .iter()
        .map(|fam| {
            let mut classes: BTreeMap<StaircasePath, (usize, f64)> = BTreeMap::new();
            for t in &fam.terms {
                let e = classes.entry(t.path.canonical()).or_insert((0, 0.0));
                e.0 += 1;
                e.1 += t.weight;
            }
            let mut histogram = BTreeMap::new();
            for (mult, _) in classes.values() {
                *histogram.entry(*mult).or_insert(0) += 1;
            }
            let collisions = classes
                .iter()
                .filter(|(_, (m, _))| *m > 1)
                .map(|(p, (m, w))| CollisionClass {
                    path: p.clone(),
                    multiplicity: *m,
                    weighted_multiplicity: *w,
                })
                .collect();
            let weighted_all_ones = classes.values().all(|(_, w)| (w - 1.0).abs() < 1e-12);
            let total = LatticeSpec::unit(fam.n_times, fam.steps)
                .map(|s| count_paths(&s))
                .unwrap_or(0);
            let corner = vec![fam.steps as i64; fam.n_times];
            let present = classes
                .keys()
                .filter(|p| p.start().iter().all(|&c| c == 0) && p.end() == corner)
                .count() as u128;
            FamilyReport {
                name: fam.name.clone(),
                terms: fam.terms.len(),
                distinct_paths: classes.len(),
                histogram,
                collisions,
                weighted_all_ones,
                missing_paths: total.saturating_sub(present) as usize,
            }
        })
        .collect();
    DedupReport { families: reports }
}
