//! Uniform partitions of `[0, 1]` into cells, and pixel graphs over them.

use std::fmt;

use crate::error::{Error, Result};
use crate::kernels::KernelKind;

const CONTACT_TOL: f64 = 1e-12;

/// `p` cells `U_j = [j/p, (j+1)/p)` (last one closed) over an `R`-point
/// midpoint grid, with `p | R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Partition {
    p: usize,
    r: usize,
}

/// Builds the uniform partition with `p` cells for an `R`-point grid.
pub fn make_partition(r: usize, p: usize) -> Result<Partition> {
    Partition::new(r, p)
}

impl Partition {
    pub fn new(r: usize, p: usize) -> Result<Self> {
        if r == 0 || p == 0 {
            return Err(Error::Config(format!(
                "grid size R = {r} and partition size p = {p} must both be positive"
            )));
        }
        if !r.is_multiple_of(p) {
            return Err(Error::Config(format!(
                "partition size p = {p} does not divide grid size R = {r}"
            )));
        }
        Ok(Partition { p, r })
    }

    pub fn cells(&self) -> usize {
        self.p
    }

    pub fn grid_len(&self) -> usize {
        self.r
    }

    /// Grid points per cell.
    pub fn block_len(&self) -> usize {
        self.r / self.p
    }

    pub fn cell_of(&self, grid_index: usize) -> usize {
        grid_index / self.block_len()
    }

    /// Grid index range held by cell `j`.
    pub fn block_range(&self, j: usize) -> std::ops::Range<usize> {
        let b = self.block_len();
        j * b..(j + 1) * b
    }

    /// Closed endpoints of cell `j`.
    pub fn cell_bounds(&self, j: usize) -> (f64, f64) {
        (j as f64 / self.p as f64, (j + 1) as f64 / self.p as f64)
    }
}

/// Closed rectangle `[u0, u1] × [v0, v1]`; degenerate rectangles are points or segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub u0: f64,
    pub u1: f64,
    pub v0: f64,
    pub v1: f64,
}

impl Rect {
    pub fn point(u: f64, v: f64) -> Self {
        Rect { u0: u, u1: u, v0: v, v1: v }
    }
}

/// Continuum description of a conditional-independence graph on `[0, 1]²`.
#[derive(Debug, Clone, PartialEq)]
pub enum TruthSpec {
    /// `{(u, v) : |u - v| ≤ width}`.
    DiagBand { width: f64 },
    /// `{(u, v) : |u - v| ∈ {0} ∪ distances}`.
    DistanceSet { distances: Vec<f64> },
    /// `{(u, v) : |⌊qu⌋ - ⌊qv⌋| ≤ radius}`.
    LatticeBand { q: u32, radius: u32 },
    RectangleUnion { rects: Vec<Rect> },
    Union(Vec<TruthSpec>),
}

impl TruthSpec {
    /// Analytic continuum graph associated with a benchmark kernel.
    ///
    /// The graphs for the integrated Brownian and Pólya kernels are only known
    /// approximately; see [`crate::harness::population_recovery`] for the
    /// reference used when scoring.
    pub fn for_kernel(kind: &KernelKind) -> TruthSpec {
        match kind {
            KernelKind::Gaussian | KernelKind::Brownian => TruthSpec::DiagBand { width: 0.0 },
            KernelKind::IntegratedBrownian => TruthSpec::DistanceSet { distances: vec![0.5] },
            KernelKind::Polya { .. } => {
                let corners = [0.0, 0.2, 0.8, 1.0];
                let rects = corners
                    .iter()
                    .flat_map(|&u| corners.iter().map(move |&v| Rect::point(u, v)))
                    .collect();
                TruthSpec::Union(vec![
                    TruthSpec::DistanceSet { distances: vec![0.8] },
                    TruthSpec::RectangleUnion { rects },
                ])
            }
            KernelKind::InterpolatedKms { q, .. } => TruthSpec::LatticeBand { q: *q, radius: 1 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        match self {
            TruthSpec::DiagBand { width } if !(0.0..=1.0).contains(width) => {
                Err(Error::Config(format!("band width {width} outside [0, 1]")))
            }
            TruthSpec::DistanceSet { distances } if !distances.iter().all(|&d| unit(d)) => {
                Err(Error::Config("distances must lie in [0, 1]".into()))
            }
            TruthSpec::LatticeBand { q: 0, .. } => Err(Error::Config("lattice size q must be positive".into())),
            TruthSpec::RectangleUnion { rects } => {
                for r in rects {
                    if !(unit(r.u0) && unit(r.u1) && unit(r.v0) && unit(r.v1) && r.u0 <= r.u1 && r.v0 <= r.v1) {
                        return Err(Error::Config(format!("invalid rectangle {r:?}")));
                    }
                }
                Ok(())
            }
            TruthSpec::Union(parts) => parts.iter().try_for_each(TruthSpec::validate),
            _ => Ok(()),
        }
    }

    /// Does the closed pixel `cell_i × cell_j` touch the closure of the set?
    fn touches(&self, part: &Partition, i: usize, j: usize) -> bool {
        let p = part.cells();
        let k = i.abs_diff(j) as f64;
        match self {
            TruthSpec::DiagBand { width } => (k - 1.0) / p as f64 <= width + CONTACT_TOL,
            TruthSpec::DistanceSet { distances } => {
                let lo = ((k - 1.0) / p as f64).max(0.0);
                let hi = (k + 1.0) / p as f64;
                lo <= CONTACT_TOL
                    || distances
                        .iter()
                        .any(|&d| d >= lo - CONTACT_TOL && d <= hi + CONTACT_TOL)
            }
            TruthSpec::LatticeBand { q, radius } => {
                let (a_lo, a_hi) = lattice_span(*q as usize, p, i);
                let (b_lo, b_hi) = lattice_span(*q as usize, p, j);
                let gap = if a_hi < b_lo {
                    b_lo - a_hi
                } else if b_hi < a_lo {
                    a_lo - b_hi
                } else {
                    0
                };
                gap <= *radius as usize
            }
            TruthSpec::RectangleUnion { rects } => {
                let (ui0, ui1) = part.cell_bounds(i);
                let (vj0, vj1) = part.cell_bounds(j);
                rects.iter().any(|r| {
                    r.u0 <= ui1 + CONTACT_TOL
                        && r.u1 >= ui0 - CONTACT_TOL
                        && r.v0 <= vj1 + CONTACT_TOL
                        && r.v1 >= vj0 - CONTACT_TOL
                })
            }
            TruthSpec::Union(parts) => parts.iter().any(|s| s.touches(part, i, j)),
        }
    }
}

/// Lattice cells `[k/q, (k+1)/q)` met by the interior of partition cell `i`.
fn lattice_span(q: usize, p: usize, i: usize) -> (usize, usize) {
    let lo = i * q / p;
    let hi = ((i + 1) * q).div_ceil(p) - 1;
    (lo, hi.max(lo))
}

/// Pixel (i, j) is kept when the closed pixel meets the closed continuum set
/// (lattice bands are matched cell by cell, see [`TruthSpec::LatticeBand`]).
/// The result is symmetrised and the diagonal is always set.
pub fn pixelate_truth(spec: &TruthSpec, partition: &Partition) -> PixelGraph {
    let p = partition.cells();
    let mut g = PixelGraph::empty(p);
    for i in 0..p {
        for j in i..p {
            if i == j || spec.touches(partition, i, j) || spec.touches(partition, j, i) {
                g.set(i, j, true);
                g.set(j, i, true);
            }
        }
    }
    g
}

/// Symmetric boolean adjacency over `p` cells; diagonal always set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PixelGraph {
    p: usize,
    adj: Vec<bool>,
}

impl PixelGraph {
    fn empty(p: usize) -> Self {
        PixelGraph { p, adj: vec![false; p * p] }
    }

    pub fn diagonal(p: usize) -> Self {
        let mut g = Self::empty(p);
        for i in 0..p {
            g.set(i, i, true);
        }
        g
    }

    pub fn complete(p: usize) -> Self {
        PixelGraph { p, adj: vec![true; p * p] }
    }

    /// Builds a graph from an arbitrary relation, symmetrising by OR and
    /// forcing the diagonal.
    pub fn from_fn(p: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut g = Self::empty(p);
        for i in 0..p {
            for j in 0..p {
                if i == j || f(i, j) {
                    g.set(i, j, true);
                    g.set(j, i, true);
                }
            }
        }
        g
    }

    pub fn cells(&self) -> usize {
        self.p
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.p + j]
    }

    fn set(&mut self, i: usize, j: usize, value: bool) {
        self.adj[i * self.p + j] = value;
    }

    /// Number of included ordered pixels, diagonal included.
    pub fn count(&self) -> usize {
        self.adj.iter().filter(|&&b| b).count()
    }

    pub fn is_complete(&self) -> bool {
        self.adj.iter().all(|&b| b)
    }

    pub fn is_subset_of(&self, other: &PixelGraph) -> bool {
        self.p == other.p && self.adj.iter().zip(&other.adj).all(|(&a, &b)| !a || b)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.p).all(|i| (0..self.p).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Merges `factor × factor` pixel blocks with OR.
    pub fn coarsen(&self, factor: usize) -> Result<PixelGraph> {
        if factor == 0 || !self.p.is_multiple_of(factor) {
            return Err(Error::Config(format!(
                "coarsening factor {factor} does not divide p = {}",
                self.p
            )));
        }
        let q = self.p / factor;
        let mut g = Self::empty(q);
        for i in 0..self.p {
            for j in 0..self.p {
                if self.get(i, j) {
                    g.set(i / factor, j / factor, true);
                }
            }
        }
        Ok(g)
    }

    /// Rows of space-separated `0`/`1`.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.p * (2 * self.p + 1));
        for i in 0..self.p {
            for j in 0..self.p {
                if j > 0 {
                    out.push(' ');
                }
                out.push(if self.get(i, j) { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    /// Parses the format written by [`PixelGraph::to_text`]. Lines starting
    /// with `#` and blank lines are ignored. The matrix must be square,
    /// symmetric, and carry a full diagonal.
    pub fn parse_text(text: &str, path: &str) -> Result<PixelGraph> {
        let parse_err = |line: usize, column: usize, message: String| Error::Parse {
            path: path.to_string(),
            line,
            column,
            message,
        };
        let mut rows: Vec<(usize, Vec<bool>)> = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut row = Vec::new();
            for (col, tok) in trimmed.split_whitespace().enumerate() {
                match tok {
                    "0" => row.push(false),
                    "1" => row.push(true),
                    other => return Err(parse_err(ln + 1, col + 1, format!("expected 0 or 1, found `{other}`"))),
                }
            }
            rows.push((ln + 1, row));
        }
        let p = rows.len();
        if p == 0 {
            return Err(parse_err(1, 1, "empty graph file".into()));
        }
        let mut g = Self::empty(p);
        for (i, (ln, row)) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(parse_err(*ln, 1, format!("expected {p} entries, found {}", row.len())));
            }
            for (j, &b) in row.iter().enumerate() {
                g.set(i, j, b);
            }
        }
        for i in 0..p {
            if !g.get(i, i) {
                return Err(parse_err(rows[i].0, i + 1, "diagonal entry must be 1".into()));
            }
        }
        if !g.is_symmetric() {
            return Err(parse_err(1, 1, "adjacency matrix is not symmetric".into()));
        }
        Ok(g)
    }
}

impl fmt::Display for PixelGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band(p: usize, w: usize) -> PixelGraph {
        PixelGraph::from_fn(p, |i, j| i.abs_diff(j) <= w)
    }

    #[test]
    fn partition_sizes() {
        let part = make_partition(600, 20).unwrap();
        assert_eq!(part.block_len(), 30);
        assert_eq!(part.cell_of(29), 0);
        assert_eq!(part.cell_of(30), 1);
        assert_eq!(part.cell_of(599), 19);
        let part = make_partition(4, 4).unwrap();
        assert_eq!(part.block_len(), 1);
        let err = make_partition(6, 4).unwrap_err().to_string();
        assert!(err.contains('6') && err.contains('4'), "{err}");
    }

    #[test]
    fn diagonal_band_pixelation() {
        let part = make_partition(600, 20).unwrap();
        let g = pixelate_truth(&TruthSpec::DiagBand { width: 0.0 }, &part);
        assert_eq!(g, band(20, 1));
        assert_eq!(g.count(), 58);
    }

    #[test]
    fn distance_set_pixelation() {
        let part = make_partition(600, 20).unwrap();
        let g = pixelate_truth(&TruthSpec::DistanceSet { distances: vec![0.5] }, &part);
        let expect = PixelGraph::from_fn(20, |i, j| matches!(i.abs_diff(j), 0 | 1 | 9 | 10 | 11));
        assert_eq!(g, expect);
    }

    #[test]
    fn full_rectangle_is_complete() {
        for p in [1, 3, 20] {
            let part = make_partition(60, p).unwrap();
            let spec = TruthSpec::RectangleUnion { rects: vec![Rect { u0: 0.0, u1: 1.0, v0: 0.0, v1: 1.0 }] };
            assert!(pixelate_truth(&spec, &part).is_complete());
        }
    }

    #[test]
    fn lattice_band_cells() {
        let part = make_partition(600, 20).unwrap();
        let g = pixelate_truth(&TruthSpec::LatticeBand { q: 10, radius: 1 }, &part);
        assert_eq!(g, PixelGraph::from_fn(20, |i, j| (i / 2).abs_diff(j / 2) <= 1));
        let part = make_partition(600, 10).unwrap();
        let g = pixelate_truth(&TruthSpec::LatticeBand { q: 10, radius: 1 }, &part);
        assert_eq!(g, band(10, 1));
    }

    #[test]
    fn nested_bands_are_monotone() {
        let part = make_partition(600, 30).unwrap();
        let widths = [0.0, 0.01, 0.05, 0.1, 0.3, 1.0];
        for pair in widths.windows(2) {
            let a = pixelate_truth(&TruthSpec::DiagBand { width: pair[0] }, &part);
            let b = pixelate_truth(&TruthSpec::DiagBand { width: pair[1] }, &part);
            assert!(a.is_subset_of(&b));
        }
    }

    #[test]
    fn refinement_coherence() {
        let fine = make_partition(600, 40).unwrap();
        let coarse = make_partition(600, 20).unwrap();
        for kind in KernelKind::benchmark() {
            let spec = TruthSpec::for_kernel(&kind);
            let a = pixelate_truth(&spec, &fine).coarsen(2).unwrap();
            let b = pixelate_truth(&spec, &coarse);
            assert_eq!(a, b, "{kind}");
            assert!(b.is_symmetric());
            assert!((0..20).all(|i| b.get(i, i)));
        }
    }

    #[test]
    fn text_round_trip_and_errors() {
        let g = band(5, 1);
        assert_eq!(PixelGraph::parse_text(&g.to_text(), "g").unwrap(), g);
        assert!(PixelGraph::parse_text("1 0\n0 2\n", "g").is_err());
        assert!(PixelGraph::parse_text("1 1\n0 1\n", "g").is_err());
        assert!(PixelGraph::parse_text("0 0\n0 1\n", "g").is_err());
        assert!(PixelGraph::parse_text("1 0 0\n0 1\n", "g").is_err());
    }
}
