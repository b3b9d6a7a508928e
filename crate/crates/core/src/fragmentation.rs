//! Krylov sectors of constrained Hamiltonians: connectivity, the
//! energy/configuration basis ordering, frozen states, domain walls and
//! matrix plots.

use std::fmt::Write as _;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::basis::{classify_configuration, pair_count, parity_class, Boundary, ChainSpec, ConfigClass, ProductState};
use crate::error::{Error, Result};
use crate::operator::{OperatorMatrix, CONNECTIVITY_EPS};

/// Labels attached to one component. Counts are `None` when members disagree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentLabel {
    pub v0_block: Option<usize>,
    pub v1_block: Option<usize>,
    pub config_class: ConfigClass,
    pub n_dw: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovDecomposition {
    components: Vec<Vec<usize>>,
    membership: Vec<usize>,
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Connected components of the graph of off-diagonal entries above
/// [`CONNECTIVITY_EPS`], ordered by smallest member.
pub fn connected_components(h: &OperatorMatrix) -> KrylovDecomposition {
    let m = h.csr();
    let dim = m.dim();
    let mut uf = UnionFind::new(dim);
    for (r, c, v) in m.triplets() {
        if r < c && v.norm() > CONNECTIVITY_EPS {
            uf.union(r, c);
        }
    }
    let mut id_of_root = vec![usize::MAX; dim];
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut membership = vec![0; dim];
    // Ascending scan assigns ids in order of smallest member.
    for i in 0..dim {
        let root = uf.find(i);
        if id_of_root[root] == usize::MAX {
            id_of_root[root] = components.len();
            components.push(Vec::new());
        }
        let id = id_of_root[root];
        components[id].push(i);
        membership[i] = id;
    }
    let d = KrylovDecomposition { components, membership };
    debug_assert_eq!(d.crossing_weight(h), 0.0);
    d
}

impl KrylovDecomposition {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn component(&self, id: usize) -> &[usize] {
        &self.components[id]
    }

    pub fn component_of(&self, index: usize) -> usize {
        self.membership[index]
    }

    /// Component containing `state`, if the state is in the operator's basis.
    pub fn component_of_state(&self, h: &OperatorMatrix, state: &ProductState) -> Option<usize> {
        h.basis().index_of(state).map(|i| self.membership[i])
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.components.iter().map(Vec::len).collect()
    }

    /// `Σ |H_ij|` over entries joining different components. Zero for a
    /// valid decomposition of `h`.
    pub fn crossing_weight(&self, h: &OperatorMatrix) -> f64 {
        h.csr()
            .triplets()
            .filter(|&(r, c, _)| self.membership[r] != self.membership[c])
            .map(|(_, _, v)| v.norm())
            .sum()
    }

    /// Labels for every component. Domain walls are counted only for
    /// components inside the primary block.
    pub fn labels(&self, h: &OperatorMatrix, spec: &ChainSpec) -> Vec<ComponentLabel> {
        let basis = h.basis();
        self.components
            .iter()
            .map(|members| {
                let uniform = |f: &dyn Fn(&ProductState) -> Option<usize>| -> Option<usize> {
                    let first = f(&basis.get(members[0]))?;
                    members.iter().all(|&i| f(&basis.get(i)) == Some(first)).then_some(first)
                };
                let v0 = uniform(&|s| Some(pair_count(s, spec.n(), spec.boundary(), 1)));
                let v1 = uniform(&|s| Some(pair_count(s, spec.n(), spec.boundary(), 2)));
                let n_dw = uniform(&|s| count_domain_walls(s, spec).ok());
                let first_class = parity_class(&basis.get(members[0]));
                let config_class = if members.iter().all(|&i| parity_class(&basis.get(i)) == first_class) {
                    first_class
                } else {
                    ConfigClass::Mixed
                };
                ComponentLabel {
                    v0_block: v0,
                    v1_block: v1,
                    config_class,
                    n_dw,
                }
            })
            .collect()
    }

    /// One line per component: id, size, labels and a reference into the
    /// member list written by [`Self::members_text`].
    pub fn export_summary(&self, labels: &[ComponentLabel], members_file: &str) -> String {
        let opt = |x: Option<usize>| x.map_or_else(|| "-".to_string(), |v| v.to_string());
        let mut out = String::from("# component size v0_block v1_block config_class n_dw members\n");
        for (id, (c, l)) in self.components.iter().zip(labels).enumerate() {
            let _ = writeln!(
                out,
                "{id} {} {} {} {} {} {members_file}#{id}",
                c.len(),
                opt(l.v0_block),
                opt(l.v1_block),
                l.config_class,
                opt(l.n_dw)
            );
        }
        out
    }

    /// `component_id state` for every basis state, grouped by component.
    pub fn members_text(&self, h: &OperatorMatrix) -> String {
        let mut out = String::new();
        for (id, c) in self.components.iter().enumerate() {
            for &i in c {
                let _ = writeln!(out, "{id} {}", h.basis().get(i));
            }
        }
        out
    }
}

/// Sorting level of a block marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortLevel {
    V0Block,
    ConfigGroup,
    V1Block,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMarker {
    pub level: SortLevel,
    /// First sorted position of the block.
    pub start: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortedBasis {
    /// `permutation[k]` is the basis index placed at sorted position `k`.
    pub permutation: Vec<usize>,
    pub markers: Vec<BlockMarker>,
    /// Configuration class per sorted position; `None` outside the primary block.
    pub groups: Vec<Option<ConfigClass>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct SortKey {
    v0: usize,
    class: Option<ConfigClass>,
    v1: usize,
    code: u64,
}

/// Order by `V_0` pair count, then configuration class inside the primary
/// block, then `V_1` pair count, then lexicographically.
pub fn sorted_basis(h: &OperatorMatrix, spec: &ChainSpec) -> SortedBasis {
    let basis = h.basis();
    let (n, bc) = (spec.n(), spec.boundary());
    let keys: Vec<SortKey> = basis
        .states()
        .iter()
        .map(|s| {
            let v0 = pair_count(s, n, bc, 1);
            SortKey {
                v0,
                class: (v0 == 0).then(|| parity_class(s)),
                v1: pair_count(s, n, bc, 2),
                code: s.code(),
            }
        })
        .collect();
    let mut permutation: Vec<usize> = (0..basis.len()).collect();
    permutation.sort_by_key(|&i| keys[i]);
    let mut markers = Vec::new();
    let mut prev: Option<SortKey> = None;
    for (pos, &i) in permutation.iter().enumerate() {
        let k = keys[i];
        let new_v0 = prev.is_none_or(|p| p.v0 != k.v0);
        let new_class = new_v0 || prev.is_none_or(|p| p.class != k.class);
        let new_v1 = new_class || prev.is_none_or(|p| p.v1 != k.v1);
        if new_v0 {
            markers.push(BlockMarker {
                level: SortLevel::V0Block,
                start: pos,
                label: format!("v0={}", k.v0),
            });
        }
        if new_class {
            if let Some(c) = k.class {
                markers.push(BlockMarker {
                    level: SortLevel::ConfigGroup,
                    start: pos,
                    label: c.to_string(),
                });
            }
        }
        if new_v1 {
            markers.push(BlockMarker {
                level: SortLevel::V1Block,
                start: pos,
                label: format!("v1={}", k.v1),
            });
        }
        prev = Some(k);
    }
    let groups = permutation.iter().map(|&i| keys[i].class).collect();
    SortedBasis {
        permutation,
        markers,
        groups,
    }
}

impl SortedBasis {
    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    /// Sorted positions `[start, end)` of the blocks at `level`.
    pub fn blocks(&self, level: SortLevel) -> Vec<Range<usize>> {
        let starts: Vec<usize> = self.markers.iter().filter(|m| m.level == level).map(|m| m.start).collect();
        let end_of = |k: usize| -> usize {
            // A block ends where any coarser-or-equal marker begins.
            self.markers
                .iter()
                .filter(|m| m.level <= level && m.start > starts[k])
                .map(|m| m.start)
                .min()
                .unwrap_or(self.len())
        };
        (0..starts.len()).map(|k| starts[k]..end_of(k)).collect()
    }

    /// `Σ |H_ij|` over entries joining two different configuration groups
    /// of the primary block.
    pub fn cross_group_mass(&self, h: &OperatorMatrix) -> f64 {
        let mut group_of = vec![None; self.len()];
        for (pos, &i) in self.permutation.iter().enumerate() {
            group_of[i] = self.groups[pos];
        }
        h.csr()
            .triplets()
            .filter(|&(r, c, _)| matches!((group_of[r], group_of[c]), (Some(a), Some(b)) if a != b))
            .map(|(_, _, v)| v.norm())
            .sum()
    }
}

/// States with no off-diagonal couplings (singleton components).
pub fn find_frozen_states(h: &OperatorMatrix) -> Vec<ProductState> {
    let m = h.csr();
    (0..m.dim())
        .filter(|&r| m.row(r).all(|(c, v)| c == r || v.norm() <= CONNECTIVITY_EPS))
        .map(|r| h.basis().get(r))
        .collect()
}

/// Frozen-state counts of the operator produced by `build` for each size.
pub fn frozen_state_count_scan(
    sizes: impl IntoIterator<Item = usize>,
    build: impl Fn(usize) -> Result<OperatorMatrix>,
) -> Result<Vec<(usize, usize)>> {
    sizes.into_iter().map(|n| Ok((n, find_frozen_states(&build(n)?).len()))).collect()
}

/// Least-squares fit `ln(count) = intercept + slope N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn exponential_fit(counts: &[(usize, usize)]) -> Option<ExponentialFit> {
    let pts: Vec<(f64, f64)> = counts.iter().filter(|c| c.1 > 0).map(|&(n, c)| (n as f64, (c as f64).ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(ExponentialFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Breakdown of a primary-block state into single-parity subchains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubchainParse {
    /// Excited sites of each subchain, left to right.
    pub subchains: Vec<Vec<usize>>,
    /// Even-length ground clusters between consecutive excitations; on a
    /// ring this includes the cluster across the seam.
    pub walls: usize,
}

impl SubchainParse {
    /// Parity of the leftmost subchain (`true` for odd sites).
    pub fn leftmost_parity_odd(&self) -> Option<bool> {
        self.subchains.first().map(|c| c[0] % 2 == 1)
    }
}

pub fn parse_subchains(state: &ProductState, boundary: Boundary) -> SubchainParse {
    let ex = state.excited_sites();
    let mut subchains: Vec<Vec<usize>> = Vec::new();
    let mut walls = 0;
    for (k, &i) in ex.iter().enumerate() {
        if k > 0 && (i - ex[k - 1]) % 2 == 1 {
            walls += 1;
            subchains.push(Vec::new());
        }
        if subchains.is_empty() {
            subchains.push(Vec::new());
        }
        subchains.last_mut().unwrap().push(i);
    }
    if boundary == Boundary::Periodic && !ex.is_empty() && (ex[0] + state.len() - ex[ex.len() - 1]) % 2 == 1 {
        walls += 1;
    }
    SubchainParse { subchains, walls }
}

fn check_primary(state: &ProductState, boundary: Boundary) -> Result<()> {
    classify_configuration(state)?;
    let n = state.len();
    if boundary == Boundary::Periodic && n > 2 && state.is_excited(1) && state.is_excited(n) {
        return Err(Error::OutsidePrimaryBlock(state.to_string()));
    }
    Ok(())
}

/// Domain-wall number of a primary-block state. Open chains count every
/// separating cluster; on a ring the walls are counted in pairs, with the
/// unpaired seam wall of odd rings dropped.
pub fn count_domain_walls(state: &ProductState, spec: &ChainSpec) -> Result<usize> {
    if state.len() != spec.n() {
        return Err(Error::LengthMismatch {
            left: state.len(),
            right: spec.n(),
        });
    }
    check_primary(state, spec.boundary())?;
    let w = parse_subchains(state, spec.boundary()).walls;
    Ok(match spec.boundary() {
        Boundary::Open => w,
        Boundary::Periodic => w / 2,
    })
}

/// The projector-sum domain-wall operator for rings, evaluated on a product
/// state. Can be half-integer.
pub fn ring_wall_operator(state: &ProductState) -> f64 {
    let n = state.len();
    let q = |i: usize| -> f64 {
        let site = (i + n - 1) % n + 1;
        if state.is_excited(site) {
            1.0
        } else {
            0.0
        }
    };
    let p = |i: usize| 1.0 - q(i);
    let (s, np) = if n.is_multiple_of(2) {
        (n / 2, 0.0)
    } else {
        ((n - 1) / 2, q(n) * p(1) - p(n) * q(1))
    };
    let sum: f64 = (1..=s)
        .map(|i| {
            (q(2 * i - 1) * p(2 * i) - p(2 * i) * q(2 * i + 1)).abs() + (q(2 * i) * p(2 * i + 1) - p(2 * i - 1) * q(2 * i)).abs()
        })
        .sum();
    np / 2.0 + sum / 2.0
}

/// Per-sector wall counts for states that may contain adjacent excitations:
/// the chain is cut at every `rr` pair and each remaining sector is parsed
/// as an open chain.
pub fn sector_domain_walls(state: &ProductState) -> Vec<usize> {
    let n = state.len();
    let mut sectors = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let mut i = 1;
    while i <= n {
        if state.is_excited(i) && i < n && state.is_excited(i + 1) {
            sectors.push(std::mem::take(&mut current));
            while i <= n && state.is_excited(i) {
                i += 1;
            }
            continue;
        }
        if state.is_excited(i) {
            current.push(i);
        }
        i += 1;
    }
    sectors.push(current);
    sectors
        .iter()
        .map(|ex| ex.windows(2).filter(|w| (w[1] - w[0]) % 2 == 1).count())
        .collect()
}

/// `|H_ij|` over a window of the sorted basis.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPlot {
    pub window: Range<usize>,
    pub grid: Vec<Vec<f64>>,
    /// Marker positions relative to the window start.
    pub markers: Vec<BlockMarker>,
}

pub fn matrix_plot(h: &OperatorMatrix, order: &SortedBasis, window: Range<usize>) -> Result<MatrixPlot> {
    if window.start > window.end || window.end > h.dim() {
        return Err(Error::OutOfRange {
            index: window.end,
            limit: h.dim(),
        });
    }
    let w = window.len();
    let mut pos_of = vec![usize::MAX; h.dim()];
    for (pos, &i) in order.permutation.iter().enumerate() {
        pos_of[i] = pos;
    }
    let mut grid = vec![vec![0.0; w]; w];
    for &i in &order.permutation[window.clone()] {
        let r = pos_of[i] - window.start;
        for (c, v) in h.csr().row(i) {
            let pc = pos_of[c];
            if window.contains(&pc) {
                grid[r][pc - window.start] = v.norm();
            }
        }
    }
    let markers = order
        .markers
        .iter()
        .filter(|m| window.contains(&m.start))
        .map(|m| BlockMarker {
            start: m.start - window.start,
            ..m.clone()
        })
        .collect();
    Ok(MatrixPlot { window, grid, markers })
}

impl MatrixPlot {
    /// Whitespace-separated rows of magnitudes.
    pub fn to_text(&self) -> String {
        let mut out = format!("# window {}..{}\n", self.window.start, self.window.end);
        for m in &self.markers {
            let _ = writeln!(out, "# marker {:?} {} {}", m.level, m.start, m.label);
        }
        for row in &self.grid {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.6e}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Heatmap with one cell per entry and lines at block boundaries.
    pub fn to_svg(&self, cell: f64) -> String {
        let w = self.grid.len();
        let side = cell * w as f64;
        let max = self.grid.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{side}\" height=\"{side}\" viewBox=\"0 0 {side} {side}\">\n<rect width=\"{side}\" height=\"{side}\" fill=\"white\"/>\n"
        );
        for (r, row) in self.grid.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let shade = (255.0 * (1.0 - v / max)).round() as u8;
                let _ = writeln!(
                    out,
                    "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({shade},{shade},255)\"/>",
                    c as f64 * cell,
                    r as f64 * cell
                );
            }
        }
        for m in &self.markers {
            let (color, width) = match m.level {
                SortLevel::V0Block => ("black", 1.5),
                SortLevel::ConfigGroup => ("red", 1.0),
                SortLevel::V1Block => ("gray", 0.5),
            };
            let x = m.start as f64 * cell;
            let _ = writeln!(
                out,
                "<line x1=\"{x}\" y1=\"0\" x2=\"{x}\" y2=\"{side}\" stroke=\"{color}\" stroke-width=\"{width}\"/>\n<line x1=\"0\" y1=\"{x}\" x2=\"{side}\" y2=\"{x}\" stroke=\"{color}\" stroke-width=\"{width}\"/>"
            );
        }
        out.push_str("</svg>\n");
        out
    }
}
