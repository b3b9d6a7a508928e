//! Product states, chain geometry and constrained-basis enumeration.
//!
//! Sites are numbered `1..=N`. A [`ProductState`] packs its occupations into a
//! `u64` with site 1 in the most significant position, so numeric order on the
//! code is the lexicographic order of the `g`/`r` string read from site 1.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Largest chain handled by unfiltered enumeration of all `2^N` states.
pub const DEFAULT_BASIS_CAP: usize = 24;

/// Hard limit from the `u64` packing.
pub const MAX_SITES: usize = 63;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProductState {
    code: u64,
    len: u8,
}

impl ProductState {
    pub fn ground(n: usize) -> Self {
        assert!(n <= MAX_SITES, "at most {MAX_SITES} sites");
        Self { code: 0, len: n as u8 }
    }

    pub fn all_rydberg(n: usize) -> Self {
        let mut s = Self::ground(n);
        s.code = Self::mask(n);
        s
    }

    /// Build a state from a list of excited sites (1-based).
    pub fn from_sites(n: usize, sites: &[usize]) -> Result<Self> {
        if n > MAX_SITES {
            return Err(Error::InvalidChain(format!("{n} sites exceeds {MAX_SITES}")));
        }
        let mut s = Self::ground(n);
        for &i in sites {
            if i == 0 || i > n {
                return Err(Error::OutOfRange { index: i, limit: n });
            }
            s.code |= 1 << (n - i);
        }
        Ok(s)
    }

    /// Raw code with site 1 as the most significant bit.
    pub fn from_code(code: u64, n: usize) -> Self {
        assert!(n <= MAX_SITES);
        debug_assert!(code <= Self::mask(n));
        Self { code, len: n as u8 }
    }

    fn mask(n: usize) -> u64 {
        if n == 0 {
            0
        } else {
            u64::MAX >> (64 - n)
        }
    }

    #[inline]
    pub fn code(&self) -> u64 {
        self.code
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    fn bit(&self, site: usize) -> u64 {
        1 << (self.len as usize - site)
    }

    /// Whether `site` (1-based) is in the Rydberg state.
    #[inline]
    pub fn is_excited(&self, site: usize) -> bool {
        debug_assert!(site >= 1 && site <= self.len());
        self.code & self.bit(site) != 0
    }

    #[inline]
    pub fn flipped(&self, site: usize) -> Self {
        Self {
            code: self.code ^ self.bit(site),
            len: self.len,
        }
    }

    pub fn excitation_count(&self) -> usize {
        self.code.count_ones() as usize
    }

    pub fn excited_sites(&self) -> Vec<usize> {
        (1..=self.len()).filter(|&i| self.is_excited(i)).collect()
    }

    /// Global `g <-> r` relabeling.
    pub fn complement(&self) -> Self {
        Self {
            code: !self.code & Self::mask(self.len()),
            len: self.len,
        }
    }

    /// Append `extra` ground sites after site N.
    pub fn padded(&self, extra: usize) -> Self {
        let n = self.len() + extra;
        assert!(n <= MAX_SITES);
        Self {
            code: self.code << extra,
            len: n as u8,
        }
    }

    /// Occupations of sites `1..=cut` and `cut+1..=N` as two packed codes.
    pub fn split(&self, cut: usize) -> (u64, u64) {
        let right_len = self.len() - cut;
        (self.code >> right_len, self.code & Self::mask(right_len))
    }
}

impl fmt::Display for ProductState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 1..=self.len() {
            f.write_str(if self.is_excited(i) { "r" } else { "g" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for ProductState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{self}>")
    }
}

impl FromStr for ProductState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() > MAX_SITES {
            return Err(Error::ParseState(s.to_string()));
        }
        let mut code = 0u64;
        for c in s.chars() {
            code <<= 1;
            match c {
                'g' => {}
                'r' => code |= 1,
                _ => return Err(Error::ParseState(s.to_string())),
            }
        }
        Ok(Self {
            code,
            len: s.len() as u8,
        })
    }
}

impl Serialize for ProductState {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ProductState {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

/// Chain geometry and interaction law.
///
/// Frequencies are angular, in rad/µs (a value of `2π·5` means 2π×5 MHz).
/// Lengths are in µm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    n: usize,
    boundary: Boundary,
    spacing: f64,
    /// `V_0 .. V_{kmax-1}`: interaction at separation `j` is `couplings[j-1]`.
    couplings: Vec<f64>,
    c6: Option<f64>,
    /// Perturbed atom coordinates (µm), chain axis first, set by disorder sampling.
    positions: Option<Vec<[f64; 3]>>,
}

impl ChainSpec {
    /// Explicit interaction list `V_0..V_{kmax-1}`.
    pub fn with_couplings(n: usize, boundary: Boundary, spacing: f64, couplings: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidChain("site count must be positive".into()));
        }
        if n > MAX_SITES {
            return Err(Error::InvalidChain(format!("{n} sites exceeds {MAX_SITES}")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidChain(format!("spacing must be positive, got {spacing}")));
        }
        if couplings.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidChain("non-finite interaction".into()));
        }
        Ok(Self {
            n,
            boundary,
            spacing,
            couplings,
            c6: None,
            positions: None,
        })
    }

    /// Van der Waals law `V_{j-1} = C6 / (j a)^6` truncated at `kmax`.
    pub fn from_c6(n: usize, boundary: Boundary, spacing: f64, c6: f64, kmax: usize) -> Result<Self> {
        if !(c6 > 0.0 && c6.is_finite()) {
            return Err(Error::InvalidChain(format!("C6 must be positive, got {c6}")));
        }
        let couplings = (1..=kmax).map(|j| c6 / (j as f64 * spacing).powi(6)).collect();
        let mut spec = Self::with_couplings(n, boundary, spacing, couplings)?;
        spec.c6 = Some(c6);
        Ok(spec)
    }

    /// Infer `C6` from a measured nearest-neighbour interaction at this spacing.
    pub fn from_nearest(n: usize, boundary: Boundary, spacing: f64, v0: f64, kmax: usize) -> Result<Self> {
        Self::from_c6(n, boundary, spacing, v0 * spacing.powi(6), kmax)
    }

    /// `C6` inferred from `nth` interaction order (1-based) lying on the van der Waals law.
    pub fn from_order(n: usize, boundary: Boundary, spacing: f64, order: usize, v: f64, kmax: usize) -> Result<Self> {
        Self::from_c6(n, boundary, spacing, v * (order as f64 * spacing).powi(6), kmax)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn kmax(&self) -> usize {
        self.couplings.len()
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    /// `V_{j-1}`, the clean interaction at separation `j` (1-based).
    pub fn coupling(&self, separation: usize) -> f64 {
        self.couplings[separation - 1]
    }

    /// Explicit `C6`, or the one implied by `V_0` and the spacing.
    pub fn c6(&self) -> f64 {
        self.c6
            .unwrap_or_else(|| self.couplings.first().copied().unwrap_or(0.0) * self.spacing.powi(6))
    }

    pub fn positions(&self) -> Option<&[[f64; 3]]> {
        self.positions.as_deref()
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_sites(mut self, n: usize) -> Self {
        self.n = n;
        self.positions = None;
        self
    }

    /// Attach perturbed positions along the chain axis; pair interactions
    /// rescale as `d^-6`.
    pub fn with_positions(self, positions: Vec<f64>) -> Result<Self> {
        self.with_coordinates(positions.into_iter().map(|x| [x, 0.0, 0.0]).collect())
    }

    pub fn with_coordinates(mut self, positions: Vec<[f64; 3]>) -> Result<Self> {
        if positions.len() != self.n {
            return Err(Error::LengthMismatch {
                left: positions.len(),
                right: self.n,
            });
        }
        self.positions = Some(positions);
        Ok(self)
    }

    /// Site reached from `i` after `j` steps, or `None` past an open edge.
    pub fn neighbour(&self, i: usize, j: usize) -> Option<usize> {
        match self.boundary {
            Boundary::Open => (i + j <= self.n).then_some(i + j),
            Boundary::Periodic => {
                if j.is_multiple_of(self.n) {
                    None
                } else {
                    Some((i - 1 + j) % self.n + 1)
                }
            }
        }
    }

    /// Interaction between site `i` and the site `j` steps to its right.
    pub fn pair_coupling(&self, i: usize, j: usize) -> f64 {
        let clean = self.coupling(j);
        match &self.positions {
            None => clean,
            Some(x) => {
                let k = match self.neighbour(i, j) {
                    Some(k) => k,
                    None => return 0.0,
                };
                let (a, b) = (x[i - 1], x[k - 1]);
                let mut dx = b[0] - a[0];
                if k < i {
                    dx += self.n as f64 * self.spacing;
                }
                let d2 = dx * dx + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2);
                let nominal = j as f64 * self.spacing;
                clean * (nominal * nominal / d2).powi(3)
            }
        }
    }

    /// Diagonal interaction energy `sum V Q_i Q_{i+j}` truncated at `kmax`.
    pub fn interaction_energy(&self, state: &ProductState) -> f64 {
        let mut e = 0.0;
        for j in 1..=self.kmax() {
            for i in 1..=self.n {
                if !state.is_excited(i) {
                    continue;
                }
                if let Some(k) = self.neighbour(i, j) {
                    if state.is_excited(k) {
                        e += self.pair_coupling(i, j);
                    }
                }
            }
        }
        e
    }
}

/// Number of occupied pairs at separation `order`.
pub fn classical_energy(state: &ProductState, spec: &ChainSpec, order: usize) -> Result<usize> {
    if order == 0 || order > spec.kmax() {
        return Err(Error::OrderOutOfRange {
            order,
            kmax: spec.kmax(),
        });
    }
    check_len(state, spec)?;
    Ok(pair_count(state, spec.n(), spec.boundary(), order))
}

/// Pair count at a given separation without the `kmax` check.
pub fn pair_count(state: &ProductState, n: usize, boundary: Boundary, separation: usize) -> usize {
    let code = state.code();
    match boundary {
        Boundary::Open => {
            if separation >= n {
                0
            } else {
                (code & (code >> separation)).count_ones() as usize
            }
        }
        Boundary::Periodic => {
            if separation.is_multiple_of(n) {
                return 0;
            }
            let s = separation % n;
            let mask = ProductState::mask(n);
            let rotated = ((code << s) | (code >> (n - s))) & mask;
            (code & rotated).count_ones() as usize
        }
    }
}

fn check_len(state: &ProductState, spec: &ChainSpec) -> Result<()> {
    if state.len() != spec.n() {
        return Err(Error::LengthMismatch {
            left: state.len(),
            right: spec.n(),
        });
    }
    Ok(())
}

/// Configuration class of a state with no adjacent excitations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConfigClass {
    Odd,
    Even,
    Mixed,
}

impl fmt::Display for ConfigClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConfigClass::Odd => "odd",
            ConfigClass::Even => "even",
            ConfigClass::Mixed => "mixed",
        })
    }
}

/// Classify by the parity of the excited sites. The all-ground state is
/// `Odd` by convention.
pub fn classify_configuration(state: &ProductState) -> Result<ConfigClass> {
    let code = state.code();
    if code & (code >> 1) != 0 {
        return Err(Error::OutsidePrimaryBlock(state.to_string()));
    }
    Ok(parity_class(state))
}

/// Parity class ignoring adjacency (used for labelling arbitrary states).
pub fn parity_class(state: &ProductState) -> ConfigClass {
    let mut odd = false;
    let mut even = false;
    for i in state.excited_sites() {
        if i % 2 == 1 {
            odd = true;
        } else {
            even = true;
        }
    }
    match (odd, even) {
        (_, false) => ConfigClass::Odd,
        (false, true) => ConfigClass::Even,
        (true, true) => ConfigClass::Mixed,
    }
}

pub fn hamming_distance(a: &ProductState, b: &ProductState) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok((a.code() ^ b.code()).count_ones() as usize)
}

/// All `2^N` states (or the filtered subset) in lexicographic order.
pub fn enumerate_basis(spec: &ChainSpec, filter: Option<&dyn Fn(&ProductState) -> bool>) -> Result<Vec<ProductState>> {
    enumerate_basis_capped(spec, filter, DEFAULT_BASIS_CAP)
}

pub fn enumerate_basis_capped(
    spec: &ChainSpec,
    filter: Option<&dyn Fn(&ProductState) -> bool>,
    cap: usize,
) -> Result<Vec<ProductState>> {
    let n = spec.n();
    if n > cap.min(MAX_SITES) {
        return Err(Error::BasisTooLarge { sites: n, cap });
    }
    let all = (0..(1u64 << n)).map(|c| ProductState::from_code(c, n));
    Ok(match filter {
        None => all.collect(),
        Some(f) => all.filter(|s| f(s)).collect(),
    })
}

/// Predicate selecting states with zero `V_0` energy under the spec's boundary.
pub fn zero_v0(spec: &ChainSpec) -> impl Fn(&ProductState) -> bool + '_ {
    move |s| pair_count(s, spec.n(), spec.boundary(), 1) == 0
}

/// The primary `V_0` block (no adjacent excitations), generated directly so
/// that it is usable beyond the dense enumeration cap.
pub fn primary_block(spec: &ChainSpec) -> Vec<ProductState> {
    let n = spec.n();
    let periodic = spec.boundary() == Boundary::Periodic && n > 1;
    let mut out = Vec::new();
    // Depth-first with 'g' before 'r' from site 1 yields lexicographic order.
    fn rec(site: usize, n: usize, code: u64, first: bool, prev: bool, periodic: bool, out: &mut Vec<ProductState>) {
        if site > n {
            out.push(ProductState::from_code(code, n));
            return;
        }
        rec(site + 1, n, code << 1, first, false, periodic, out);
        let blocked = prev || (periodic && site == n && first);
        if !blocked {
            rec(site + 1, n, (code << 1) | 1, first || site == 1, true, periodic, out);
        }
    }
    // `first` is only meaningful once site 1 has been decided.
    fn start(n: usize, periodic: bool, out: &mut Vec<ProductState>) {
        if n == 0 {
            return;
        }
        rec(2, n, 0, false, false, periodic, out);
        rec(2, n, 1, true, true, periodic, out);
    }
    start(n, periodic, &mut out);
    out
}

/// An ordered, duplicate-free set of product states on a fixed chain length.
#[derive(Clone, PartialEq, Eq)]
pub struct Basis {
    n: usize,
    states: Vec<ProductState>,
    complete: bool,
}

impl fmt::Debug for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Basis")
            .field("sites", &self.n)
            .field("dim", &self.states.len())
            .field("complete", &self.complete)
            .finish()
    }
}

impl Basis {
    /// Every product state of an `n`-site chain.
    pub fn full(n: usize) -> Result<Self> {
        if n > DEFAULT_BASIS_CAP {
            return Err(Error::BasisTooLarge {
                sites: n,
                cap: DEFAULT_BASIS_CAP,
            });
        }
        Ok(Self {
            n,
            states: (0..(1u64 << n)).map(|c| ProductState::from_code(c, n)).collect(),
            complete: true,
        })
    }

    /// Sorts and deduplicates; all states must have `n` sites.
    pub fn from_states(n: usize, mut states: Vec<ProductState>) -> Result<Self> {
        if let Some(bad) = states.iter().find(|s| s.len() != n) {
            return Err(Error::LengthMismatch {
                left: bad.len(),
                right: n,
            });
        }
        states.sort_unstable();
        states.dedup();
        let complete = n < 64 && states.len() as u64 == 1u64 << n;
        Ok(Self { n, states, complete })
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn states(&self) -> &[ProductState] {
        &self.states
    }

    pub fn get(&self, i: usize) -> ProductState {
        self.states[i]
    }

    #[inline]
    pub fn index_of(&self, s: &ProductState) -> Option<usize> {
        if s.len() != self.n {
            return None;
        }
        if self.complete {
            return Some(s.code() as usize);
        }
        self.states.binary_search(s).ok()
    }

    /// Sub-basis of the given indices.
    pub fn subset(&self, indices: &[usize]) -> Basis {
        let states = indices.iter().map(|&i| self.states[i]).collect();
        Basis::from_states(self.n, states).expect("same chain length")
    }

    /// SHA-256 of the newline-delimited state list.
    pub fn hash_hex(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.states {
            h.update(s.to_string().as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.len() * (self.n + 1));
        for s in &self.states {
            out.push_str(&s.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let states: Vec<ProductState> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        let n = states.first().map_or(0, |s| s.len());
        Self::from_states(n, states)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(n: usize) -> ChainSpec {
        ChainSpec::with_couplings(n, Boundary::Open, 3.73, vec![64.0, 1.0, 0.09]).unwrap()
    }

    fn st(s: &str) -> ProductState {
        s.parse().unwrap()
    }

    #[test]
    fn two_site_enumeration() {
        let v = enumerate_basis(&open(2), None).unwrap();
        let names: Vec<String> = v.iter().map(|s| s.to_string()).collect();
        assert_eq!(names, ["gg", "gr", "rg", "rr"]);
    }

    #[test]
    fn primary_block_count_matches_brute_force() {
        let oracle = (0u32..(1 << 13)).filter(|x| x & (x >> 1) == 0).count();
        assert_eq!(oracle, 610);
        let spec = open(13);
        let f = zero_v0(&spec);
        let filtered = enumerate_basis(&spec, Some(&f)).unwrap();
        assert_eq!(filtered.len(), 610);
        assert_eq!(primary_block(&spec), filtered);
    }

    #[test]
    fn periodic_ring_of_three() {
        let spec = open(3).with_boundary(Boundary::Periodic);
        let f = zero_v0(&spec);
        let v = enumerate_basis(&spec, Some(&f)).unwrap();
        let names: Vec<String> = v.iter().map(|s| s.to_string()).collect();
        assert_eq!(names, ["ggg", "ggr", "grg", "rgg"]);
        assert_eq!(primary_block(&spec), v);
    }

    #[test]
    fn periodic_primary_block_matches_filter() {
        for n in 2..=12 {
            let spec = open(n).with_boundary(Boundary::Periodic);
            let f = zero_v0(&spec);
            assert_eq!(primary_block(&spec), enumerate_basis(&spec, Some(&f)).unwrap(), "n={n}");
        }
    }

    #[test]
    fn cap_is_enforced() {
        let spec = open(25);
        assert!(matches!(enumerate_basis(&spec, None), Err(Error::BasisTooLarge { .. })));
        assert!(Basis::full(25).is_err());
    }

    #[test]
    fn classical_energy_examples() {
        let s5 = open(5);
        assert_eq!(classical_energy(&st("rgrgr"), &s5, 1).unwrap(), 0);
        assert_eq!(classical_energy(&st("rgrgr"), &s5, 2).unwrap(), 2);
        assert_eq!(classical_energy(&st("rr"), &open(2), 1).unwrap(), 1);
        assert!(matches!(
            classical_energy(&st("rgrgr"), &s5, 4),
            Err(Error::OrderOutOfRange { .. })
        ));
        assert!(classical_energy(&st("rgrgr"), &s5, 0).is_err());
        // Periodic wrap: sites 1 and 5 are adjacent on the ring.
        let ring = s5.clone().with_boundary(Boundary::Periodic);
        assert_eq!(classical_energy(&st("rgrgr"), &ring, 1).unwrap(), 1);
    }

    #[test]
    fn classification_examples() {
        let z4 = ProductState::from_sites(13, &[1, 5, 9, 13]).unwrap();
        assert_eq!(classify_configuration(&z4).unwrap(), ConfigClass::Odd);
        let even = ProductState::from_sites(13, &[2, 8, 12]).unwrap();
        assert_eq!(classify_configuration(&even).unwrap(), ConfigClass::Even);
        let mixed = ProductState::from_sites(8, &[2, 5]).unwrap();
        assert_eq!(classify_configuration(&mixed).unwrap(), ConfigClass::Mixed);
        assert_eq!(classify_configuration(&ProductState::ground(6)).unwrap(), ConfigClass::Odd);
        assert!(matches!(
            classify_configuration(&st("grrg")),
            Err(Error::OutsidePrimaryBlock(_))
        ));
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming_distance(&st("rgr"), &st("rgr")).unwrap(), 0);
        assert_eq!(hamming_distance(&st("ggg"), &st("rrr")).unwrap(), 3);
        let a = ProductState::from_sites(13, &[1, 5, 9, 13]).unwrap();
        let b = ProductState::from_sites(13, &[3, 7, 11]).unwrap();
        // Oracle: compare characters directly.
        let oracle = a
            .to_string()
            .chars()
            .zip(b.to_string().chars())
            .filter(|(x, y)| x != y)
            .count();
        assert_eq!(oracle, 7);
        assert_eq!(hamming_distance(&a, &b).unwrap(), 7);
        assert!(hamming_distance(&st("rg"), &st("rgg")).is_err());
    }

    #[test]
    fn c6_law() {
        let spec = ChainSpec::from_nearest(13, Boundary::Open, 3.73, 64.0, 3).unwrap();
        assert!((spec.coupling(1) / spec.coupling(2) - 64.0).abs() < 1e-9);
        assert!(spec.coupling(2) > spec.coupling(3));
        assert!(ChainSpec::with_couplings(3, Boundary::Open, 0.0, vec![1.0]).is_err());
    }

    #[test]
    fn positions_rescale_pairs() {
        let spec = ChainSpec::from_nearest(3, Boundary::Open, 2.0, 10.0, 2).unwrap();
        let clean = spec.clone().with_positions(vec![0.0, 2.0, 4.0]).unwrap();
        assert!((clean.pair_coupling(1, 1) - 10.0).abs() < 1e-12);
        let squeezed = spec.with_positions(vec![0.0, 1.0, 4.0]).unwrap();
        assert!((squeezed.pair_coupling(1, 1) - 10.0 * 64.0).abs() < 1e-9);
        assert!((squeezed.pair_coupling(1, 2) - spec_v1()).abs() < 1e-9);
        fn spec_v1() -> f64 {
            10.0 / 64.0
        }
    }

    #[test]
    fn text_round_trip() {
        let basis = Basis::from_states(4, primary_block(&open(4))).unwrap();
        let back = Basis::from_text(&basis.to_text()).unwrap();
        assert_eq!(basis, back);
        assert!("grx".parse::<ProductState>().is_err());
    }
}
