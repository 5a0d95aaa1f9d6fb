//! Finite 1+1-dimensional spacetime grid with discrete causal structure.
//!
//! Causality is defined by the unit-slope stencil cone of the leapfrog
//! update: a cell (t, x) causally precedes (t', x') iff t' >= t and the
//! circular distance between x and x' is at most t' - t. With dt/dx <= 1
//! this cone contains the continuum light cone, so every support theorem
//! of the solvers holds cellwise on this discrete relation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat, spatially periodic spacetime grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    /// Number of time slices.
    pub n_t: usize,
    /// Number of spatial sites on the periodic circle.
    pub n_x: usize,
    /// Time spacing.
    pub dt: f64,
    /// Space spacing.
    pub dx: f64,
}

impl Lattice {
    /// Builds a lattice, enforcing `n_t, n_x >= 3` and the Courant
    /// condition `dt/dx <= 1`.
    pub fn new(n_t: usize, n_x: usize, dt: f64, dx: f64) -> Result<Self> {
        if n_t < 3 || n_x < 3 {
            return Err(Error::InvalidLattice(format!(
                "need n_t >= 3 and n_x >= 3, got {n_t}x{n_x}"
            )));
        }
        if dt <= 0.0 || dx <= 0.0 || dt.is_nan() || dx.is_nan() {
            return Err(Error::InvalidLattice(format!(
                "spacings must be positive, got dt = {dt}, dx = {dx}"
            )));
        }
        if dt / dx > 1.0 {
            return Err(Error::InvalidLattice(format!(
                "Courant condition dt/dx <= 1 violated: dt/dx = {}",
                dt / dx
            )));
        }
        Ok(Self { n_t, n_x, dt, dx })
    }

    /// Total number of cells.
    pub fn cells(&self) -> usize {
        self.n_t * self.n_x
    }

    /// Flat index of cell (t, x); x is reduced modulo `n_x`.
    #[inline]
    pub fn index(&self, t: usize, x: usize) -> usize {
        t * self.n_x + (x % self.n_x)
    }

    /// Circular distance between two spatial sites.
    #[inline]
    pub fn circ_dist(&self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b) % self.n_x;
        d.min(self.n_x - d)
    }

    /// Volume element dt*dx of one cell.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.dt * self.dx
    }
}

/// A single cell, time-major ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub t: usize,
    pub x: usize,
}

impl Cell {
    pub fn new(t: usize, x: usize) -> Self {
        Self { t, x }
    }
}

/// How two regions relate under the discrete causal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CausalOrder {
    /// Each region lies in the causal complement of the other.
    Disjoint,
    /// J^-(first) does not meet second: the second region is nowhere in
    /// the causal past of the first.
    SecondNotInPastOfFirst,
    /// J^-(second) does not meet first.
    FirstNotInPastOfSecond,
    /// The regions overlap causally in both directions.
    NotOrderable,
}

/// A set of cells of one lattice.
///
/// Stored as a sorted cell set; JSON serialization is the sorted list of
/// (t, x) pairs together with the lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    lattice: Lattice,
    cells: BTreeSet<Cell>,
}

impl Region {
    /// Builds a region from cells, reducing spatial indices modulo `n_x`
    /// and rejecting out-of-range time indices.
    pub fn new<I: IntoIterator<Item = Cell>>(lattice: Lattice, cells: I) -> Result<Self> {
        let mut set = BTreeSet::new();
        for c in cells {
            if c.t >= lattice.n_t {
                return Err(Error::CellOutOfRange {
                    t: c.t,
                    x: c.x,
                    n_t: lattice.n_t,
                    n_x: lattice.n_x,
                });
            }
            set.insert(Cell::new(c.t, c.x % lattice.n_x));
        }
        Ok(Self { lattice, cells: set })
    }

    /// The empty region.
    pub fn empty(lattice: Lattice) -> Self {
        Self { lattice, cells: BTreeSet::new() }
    }

    /// Every cell of the lattice.
    pub fn full(lattice: Lattice) -> Self {
        let cells = (0..lattice.n_t)
            .flat_map(|t| (0..lattice.n_x).map(move |x| Cell::new(t, x)))
            .collect();
        Self { lattice, cells }
    }

    /// A rectangle [t0, t1] x [x0, x1] (x-range taken circularly if
    /// x1 < x0).
    pub fn rect(lattice: Lattice, t0: usize, t1: usize, x0: usize, x1: usize) -> Result<Self> {
        if t0 > t1 || t1 >= lattice.n_t {
            return Err(Error::CellOutOfRange { t: t1, x: x0, n_t: lattice.n_t, n_x: lattice.n_x });
        }
        let width = if x1 >= x0 { x1 - x0 } else { lattice.n_x - x0 + x1 };
        let mut cells = BTreeSet::new();
        for t in t0..=t1 {
            for dx in 0..=width {
                cells.insert(Cell::new(t, (x0 + dx) % lattice.n_x));
            }
        }
        Ok(Self { lattice, cells })
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, cell: Cell) -> bool {
        self.cells.contains(&Cell::new(cell.t, cell.x % self.lattice.n_x))
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.cells.is_subset(&other.cells)
    }

    pub fn union(&self, other: &Region) -> Result<Region> {
        if self.lattice != other.lattice {
            return Err(Error::LatticeMismatch);
        }
        Ok(Region {
            lattice: self.lattice,
            cells: self.cells.union(&other.cells).copied().collect(),
        })
    }

    pub fn intersection(&self, other: &Region) -> Result<Region> {
        if self.lattice != other.lattice {
            return Err(Error::LatticeMismatch);
        }
        Ok(Region {
            lattice: self.lattice,
            cells: self.cells.intersection(&other.cells).copied().collect(),
        })
    }

    pub fn difference(&self, other: &Region) -> Result<Region> {
        if self.lattice != other.lattice {
            return Err(Error::LatticeMismatch);
        }
        Ok(Region {
            lattice: self.lattice,
            cells: self.cells.difference(&other.cells).copied().collect(),
        })
    }

    /// Earliest time slice occupied, or None if empty.
    pub fn t_min(&self) -> Option<usize> {
        self.cells.iter().map(|c| c.t).min()
    }

    /// Latest time slice occupied, or None if empty.
    pub fn t_max(&self) -> Option<usize> {
        self.cells.iter().map(|c| c.t).max()
    }

    fn to_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.lattice.cells()];
        for c in &self.cells {
            mask[self.lattice.index(c.t, c.x)] = true;
        }
        mask
    }

    fn from_mask(lattice: Lattice, mask: &[bool]) -> Region {
        let mut cells = BTreeSet::new();
        for t in 0..lattice.n_t {
            for x in 0..lattice.n_x {
                if mask[lattice.index(t, x)] {
                    cells.insert(Cell::new(t, x));
                }
            }
        }
        Region { lattice, cells }
    }

    /// Discrete causal future J^+: all cells (t', x') with t' >= t and
    /// circular |x' - x| <= t' - t for some member cell (t, x). Includes
    /// the region itself. Errors on an empty region.
    pub fn causal_future(&self) -> Result<Region> {
        self.cone(true)
    }

    /// Discrete causal past J^-, the time reflection of `causal_future`.
    pub fn causal_past(&self) -> Result<Region> {
        self.cone(false)
    }

    fn cone(&self, future: bool) -> Result<Region> {
        if self.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let lat = self.lattice;
        let n_x = lat.n_x;
        let seed = self.to_mask();
        let mut out = vec![false; lat.cells()];
        let mut frontier = vec![false; n_x];
        let slices: Box<dyn Iterator<Item = usize>> = if future {
            Box::new(0..lat.n_t)
        } else {
            Box::new((0..lat.n_t).rev())
        };
        let mut scratch = vec![false; n_x];
        for t in slices {
            // dilate previous frontier by one site in each circular direction
            for x in 0..n_x {
                scratch[x] = frontier[x]
                    || frontier[(x + 1) % n_x]
                    || frontier[(x + n_x - 1) % n_x]
                    || seed[lat.index(t, x)];
            }
            frontier.copy_from_slice(&scratch);
            for x in 0..n_x {
                out[lat.index(t, x)] = frontier[x];
            }
        }
        Ok(Region::from_mask(lat, &out))
    }

    /// J(S) = J^+(S) union J^-(S).
    pub fn causal_influence(&self) -> Result<Region> {
        self.causal_future()?.union(&self.causal_past()?)
    }

    /// Causal complement: cells joined to the region by no causal path.
    pub fn causal_complement(&self) -> Result<Region> {
        let j = self.causal_influence()?;
        Region::full(self.lattice).difference(&j)
    }

    /// Causal hull J^+ intersect J^-; the result is causally convex.
    pub fn causal_hull(&self) -> Result<Region> {
        self.causal_future()?.intersection(&self.causal_past()?)
    }

    /// True iff the region equals its causal hull.
    pub fn is_causally_convex(&self) -> Result<bool> {
        Ok(self.causal_hull()? == *self)
    }

    /// The in/out regions (M^+, M^-) = (M \ J^-, M \ J^+) of a coupling
    /// region. Errors when the region touches the first or last slice,
    /// since then one of them contains no full time slice.
    pub fn in_out_regions(&self) -> Result<(Region, Region)> {
        if self.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let t_min = self.t_min().unwrap();
        let t_max = self.t_max().unwrap();
        if t_min == 0 || t_max == self.lattice.n_t - 1 {
            return Err(Error::CouplingTouchesBoundary);
        }
        let full = Region::full(self.lattice);
        let m_plus = full.difference(&self.causal_past()?)?;
        let m_minus = full.difference(&self.causal_future()?)?;
        Ok((m_plus, m_minus))
    }

    /// Width of the minimal circular arc covering the spatial footprint,
    /// in sites. Equals `n_x` when the footprint covers all sites.
    pub fn footprint_width(&self) -> usize {
        let n_x = self.lattice.n_x;
        let mut occupied = vec![false; n_x];
        for c in &self.cells {
            occupied[c.x] = true;
        }
        let sites: Vec<usize> = (0..n_x).filter(|&x| occupied[x]).collect();
        if sites.is_empty() {
            return 0;
        }
        if sites.len() == n_x {
            return n_x;
        }
        // largest circular gap between consecutive occupied sites
        let mut max_gap = 0;
        for i in 0..sites.len() {
            let next = sites[(i + 1) % sites.len()];
            let gap = if i + 1 == sites.len() {
                n_x - sites[i] + next
            } else {
                next - sites[i]
            };
            max_gap = max_gap.max(gap);
        }
        n_x - max_gap + 1
    }

    /// True when the causal cone emanating from this region closes up
    /// around the periodic spatial circle within the simulated time
    /// extent, in the future (`future = true`) or past direction: some
    /// in-grid slice of J^+/- covers every spatial site.
    ///
    /// Regions already spanning every spatial site do not count as
    /// wrapping; the predicate detects a localized cone meeting itself.
    pub fn cone_wraps_directed(&self, future: bool) -> bool {
        if self.is_empty() {
            return false;
        }
        let lat = self.lattice;
        let n_x = lat.n_x;
        if self.footprint_width() >= n_x {
            return false;
        }
        let seed = self.to_mask();
        let mut frontier = vec![false; n_x];
        let mut scratch = vec![false; n_x];
        let slices: Box<dyn Iterator<Item = usize>> = if future {
            Box::new(0..lat.n_t)
        } else {
            Box::new((0..lat.n_t).rev())
        };
        for t in slices {
            for x in 0..n_x {
                scratch[x] = frontier[x]
                    || frontier[(x + 1) % n_x]
                    || frontier[(x + n_x - 1) % n_x]
                    || seed[lat.index(t, x)];
            }
            frontier.copy_from_slice(&scratch);
            if frontier.iter().all(|b| *b) {
                return true;
            }
        }
        false
    }

    /// True when the cone wraps in either time direction.
    pub fn cone_wraps(&self) -> bool {
        self.cone_wraps_directed(true) || self.cone_wraps_directed(false)
    }
}

/// Classifies the causal order of two non-empty regions of one lattice.
pub fn causal_orderability(first: &Region, second: &Region) -> Result<CausalOrder> {
    if first.lattice != second.lattice {
        return Err(Error::LatticeMismatch);
    }
    if first.is_empty() || second.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if second.is_subset(&first.causal_complement()?) {
        return Ok(CausalOrder::Disjoint);
    }
    if first.causal_past()?.intersection(second)?.is_empty() {
        return Ok(CausalOrder::SecondNotInPastOfFirst);
    }
    if second.causal_past()?.intersection(first)?.is_empty() {
        return Ok(CausalOrder::FirstNotInPastOfSecond);
    }
    Ok(CausalOrder::NotOrderable)
}
