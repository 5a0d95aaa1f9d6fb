//! Complex-valued functions on the lattice and their multi-component
//! bundles; the smearing inputs of every solver and algebra operation.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Cell, Lattice, Region};

/// A complex function on lattice cells, stored densely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    lattice: Lattice,
    values: Vec<C64>,
}

impl GridFunction {
    pub fn zeros(lattice: Lattice) -> Self {
        Self { lattice, values: vec![C64::ZERO; lattice.cells()] }
    }

    /// Builds from explicit (cell, value) pairs; unspecified cells are zero.
    pub fn from_cells<I: IntoIterator<Item = (Cell, C64)>>(lattice: Lattice, items: I) -> Result<Self> {
        let mut g = Self::zeros(lattice);
        for (c, v) in items {
            if c.t >= lattice.n_t {
                return Err(Error::CellOutOfRange { t: c.t, x: c.x, n_t: lattice.n_t, n_x: lattice.n_x });
            }
            g.values[lattice.index(c.t, c.x)] += v;
        }
        Ok(g)
    }

    /// Unit impulse at a single cell.
    pub fn delta(lattice: Lattice, t: usize, x: usize) -> Result<Self> {
        Self::from_cells(lattice, [(Cell::new(t, x), C64::ONE)])
    }

    /// Fills from a closure over (t, x).
    pub fn from_fn(lattice: Lattice, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut g = Self::zeros(lattice);
        for t in 0..lattice.n_t {
            for x in 0..lattice.n_x {
                g.values[lattice.index(t, x)] = f(t, x);
            }
        }
        g
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    #[inline]
    pub fn value(&self, t: usize, x: usize) -> C64 {
        self.values[self.lattice.index(t, x)]
    }

    #[inline]
    pub fn set(&mut self, t: usize, x: usize, v: C64) {
        let i = self.lattice.index(t, x);
        self.values[i] = v;
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    /// Tight support: the exact set of nonzero cells.
    pub fn support(&self) -> Region {
        let lat = self.lattice;
        let cells = (0..lat.n_t).flat_map(|t| {
            let row = &self.values[t * lat.n_x..(t + 1) * lat.n_x];
            row.iter()
                .enumerate()
                .filter(|(_, v)| **v != C64::ZERO)
                .map(move |(x, _)| Cell::new(t, x))
                .collect::<Vec<_>>()
        });
        Region::new(lat, cells).expect("support cells are in range")
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == C64::ZERO)
    }

    /// True when every value has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    pub fn conj(&self) -> Self {
        Self { lattice: self.lattice, values: self.values.iter().map(|v| v.conj()).collect() }
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self { lattice: self.lattice, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.lattice != other.lattice {
            return Err(Error::LatticeMismatch);
        }
        Ok(Self {
            lattice: self.lattice,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(-C64::ONE))
    }

    /// Pointwise product with a real profile.
    pub fn mul_profile(&self, profile: &[f64]) -> Self {
        Self {
            lattice: self.lattice,
            values: self.values.iter().zip(profile).map(|(v, p)| v * p).collect(),
        }
    }

    /// Max-norm over all cells.
    pub fn norm_inf(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// l2 norm weighted by the cell volume.
    pub fn norm_l2(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.lattice.cell_volume()).sqrt()
    }
}

/// An ordered bundle of grid functions on one lattice; component 0 is the
/// system field, the rest are probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiComponentFunction {
    components: Vec<GridFunction>,
}

impl MultiComponentFunction {
    pub fn new(components: Vec<GridFunction>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::LayoutMismatch);
        }
        let lat = components[0].lattice();
        if components.iter().any(|c| c.lattice() != lat) {
            return Err(Error::LatticeMismatch);
        }
        Ok(Self { components })
    }

    pub fn zeros(lattice: Lattice, n_components: usize) -> Self {
        Self { components: vec![GridFunction::zeros(lattice); n_components] }
    }

    /// Embeds one grid function at a component index, zero elsewhere.
    pub fn embed(lattice: Lattice, n_components: usize, index: usize, g: GridFunction) -> Result<Self> {
        if index >= n_components || g.lattice() != lattice {
            return Err(Error::LayoutMismatch);
        }
        let mut f = Self::zeros(lattice, n_components);
        f.components[index] = g;
        Ok(f)
    }

    pub fn lattice(&self) -> Lattice {
        self.components[0].lattice()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &GridFunction {
        &self.components[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut GridFunction {
        &mut self.components[i]
    }

    pub fn components(&self) -> &[GridFunction] {
        &self.components
    }

    /// Union of the component supports.
    pub fn support(&self) -> Region {
        let mut r = Region::empty(self.lattice());
        for c in &self.components {
            r = r.union(&c.support()).expect("same lattice");
        }
        r
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.is_zero())
    }

    pub fn is_real(&self) -> bool {
        self.components.iter().all(|c| c.is_real())
    }

    pub fn conj(&self) -> Self {
        Self { components: self.components.iter().map(|c| c.conj()).collect() }
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self { components: self.components.iter().map(|g| g.scaled(c)).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n_components() != other.n_components() {
            return Err(Error::LayoutMismatch);
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.add(b))
            .collect::<Result<_>>()?;
        Ok(Self { components })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(-C64::ONE))
    }

    pub fn norm_inf(&self) -> f64 {
        self.components.iter().map(|c| c.norm_inf()).fold(0.0, f64::max)
    }
}
