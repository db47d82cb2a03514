//! Tie-line graph of the benchmark network.

use alloc::vec::Vec;

use thiserror::Error;

use crate::model::{AreaId, EEA_AREAS};

/// Tie-line lengths between area centroids in 10³ km, ordered as
/// [`crate::model::ISO_CODES`]. Zero means the areas are not connected.
#[rustfmt::skip]
pub const TIE_LINE_LENGTHS: [[f64; EEA_AREAS]; EEA_AREAS] = [
    [0.0, 0.0, 0.0, 0.0, 2.65, 0.0, 0.0, 0.0, 0.0, 4.82, 0.0, 5.61, 0.0, 4.76, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5.88, 1.85, 0.0, 0.0, 5.58], // AT
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 4.69, 5.77, 0.0, 0.0, 13.19, 0.0, 0.0, 0.0, 1.75, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], // BE
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 4.02, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 3.01, 0.0, 0.0, 0.0, 0.0, 0.0], // BG
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 3.61, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.12, 0.0, 0.0, 0.0], // HR
    [2.65, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5.13, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 4.67, 0.0, 0.0, 4.33, 0.0, 0.0, 0.0, 0.0], // CZ
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5.03, 0.0, 0.0, 17.82, 0.0, 0.0, 0.0, 5.44, 11.56, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 10.22, 0.0], // DK
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 6.37, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], // EE
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 6.37, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 8.99, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 8.89, 0.0], // FI
    [0.0, 4.69, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 9.35, 0.0, 0.0, 12.38, 11.19, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 8.58, 0.0, 6.09], // FR
    [4.82, 5.77, 0.0, 0.0, 5.13, 5.03, 0.0, 0.0, 9.35, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 4.98, 15.23, 9.06, 0.0, 0.0, 0.0, 0.0, 0.0, 13.41, 4.84], // DE
    [0.0, 0.0, 4.02, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 10.94, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], // GR
    [5.61, 0.0, 0.0, 3.61, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5.87, 1.48, 4.63, 0.0, 0.0, 0.0], // HU
    [0.0, 13.19, 0.0, 0.0, 0.0, 17.82, 0.0, 0.0, 12.38, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 13.84, 27.51, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], // IE
    [4.76, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 11.19, 0.0, 10.94, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 3.81, 0.0, 0.0, 5.84], // IT
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.69, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], // LV
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.69, 0.0, 0.0, 0.0, 5.55, 0.0, 0.0, 0.0, 0.0, 0.0, 10.14, 0.0], // LT
    [0.0, 1.75, 0.0, 0.0, 0.0, 5.44, 0.0, 0.0, 0.0, 4.98, 0.0, 0.0, 13.84, 0.0, 0.0, 0.0, 0.0, 16.99, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], // NL
    [0.0, 0.0, 0.0, 0.0, 0.0, 11.56, 0.0, 8.99, 0.0, 15.23, 0.0, 0.0, 27.51, 0.0, 0.0, 0.0, 16.99, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.28, 0.0], // NO
    [0.0, 0.0, 0.0, 0.0, 4.67, 0.0, 0.0, 0.0, 0.0, 9.06, 0.0, 0.0, 0.0, 0.0, 0.0, 5.55, 0.0, 0.0, 0.0, 0.0, 0.0, 3.37, 0.0, 0.0, 10.93, 0.0], // PL
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 4.34, 0.0, 0.0], // PT
    [0.0, 0.0, 3.01, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5.87, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], // RO
    [5.88, 0.0, 0.0, 0.0, 4.33, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.48, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 3.37, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], // SK
    [1.85, 0.0, 0.0, 2.12, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 4.63, 0.0, 3.81, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], // SI
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 8.58, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 4.34, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], // ES
    [0.0, 0.0, 0.0, 0.0, 0.0, 10.22, 0.0, 8.89, 0.0, 13.41, 0.0, 0.0, 0.0, 0.0, 0.0, 10.14, 0.0, 2.28, 10.93, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], // SE
    [5.58, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 6.09, 4.84, 0.0, 0.0, 0.0, 5.84, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], // CH
];

/// Number of tie lines in the embedded table (nonzero upper-triangle entries).
pub const EEA_TIE_LINES: usize = 53;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("tie line {a}-{b} has non-positive distance {d}")]
    NonPositiveDistance { a: usize, b: usize, d: f64 },
    #[error("tie line {a}-{b} has non-positive gain {k}")]
    NonPositiveGain { a: usize, b: usize, k: f64 },
    #[error("tie line connects area {0} to itself")]
    SelfLoop(usize),
    #[error("area index {index} out of range for {n_areas} areas")]
    AreaOutOfRange { index: usize, n_areas: usize },
    #[error("duplicate tie line {a}-{b}")]
    Duplicate { a: usize, b: usize },
    #[error("expected {expected} angles, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Undirected transmission link between two areas.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TieLine {
    pub a: AreaId,
    pub b: AreaId,
    /// Distance [km].
    pub d: f64,
    /// Gain [km·GW/deg].
    pub k: f64,
}

impl TieLine {
    pub fn connects(&self, x: AreaId, y: AreaId) -> bool {
        (self.a == x && self.b == y) || (self.a == y && self.b == x)
    }
}

/// Synchronizing coefficient `k / d` of a tie line [GW/deg].
pub fn tie_coefficient(line: &TieLine) -> Result<f64, TopologyError> {
    if !(line.d > 0.0) {
        return Err(TopologyError::NonPositiveDistance {
            a: line.a.index(),
            b: line.b.index(),
            d: line.d,
        });
    }
    Ok(line.k / line.d)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub area: usize,
    /// Tie coefficient of the connecting line [GW/deg].
    pub coefficient: f64,
}

/// Immutable tie-line graph over the first `n_areas` benchmark areas.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    n_areas: usize,
    lines: Vec<TieLine>,
    adjacency: Vec<Vec<Neighbor>>,
}

impl Topology {
    pub fn new(n_areas: usize, lines: Vec<TieLine>) -> Result<Self, TopologyError> {
        let mut adjacency: Vec<Vec<Neighbor>> = alloc::vec![Vec::new(); n_areas];
        for (idx, line) in lines.iter().enumerate() {
            let (a, b) = (line.a.index(), line.b.index());
            for index in [a, b] {
                if index >= n_areas {
                    return Err(TopologyError::AreaOutOfRange { index, n_areas });
                }
            }
            if a == b {
                return Err(TopologyError::SelfLoop(a));
            }
            if !(line.k > 0.0) {
                return Err(TopologyError::NonPositiveGain { a, b, k: line.k });
            }
            if lines[..idx].iter().any(|l| l.connects(line.a, line.b)) {
                return Err(TopologyError::Duplicate { a, b });
            }
            let coefficient = tie_coefficient(line)?;
            adjacency[a].push(Neighbor { area: b, coefficient });
            adjacency[b].push(Neighbor { area: a, coefficient });
        }
        for list in &mut adjacency {
            list.sort_by_key(|n| n.area);
        }
        Ok(Topology {
            n_areas,
            lines,
            adjacency,
        })
    }

    /// Areas without any tie line.
    pub fn isolated(n_areas: usize) -> Self {
        Topology::new(n_areas, Vec::new()).expect("empty topology is valid")
    }

    pub fn n_areas(&self) -> usize {
        self.n_areas
    }

    pub fn lines(&self) -> &[TieLine] {
        &self.lines
    }

    pub fn neighbors(&self, area: usize) -> &[Neighbor] {
        &self.adjacency[area]
    }

    pub fn line(&self, a: AreaId, b: AreaId) -> Option<&TieLine> {
        self.lines.iter().find(|l| l.connects(a, b))
    }

    /// Sets the gain of an existing line.
    pub fn with_gain(mut self, a: AreaId, b: AreaId, k: f64) -> Result<Self, TopologyError> {
        let mut lines = core::mem::take(&mut self.lines);
        if let Some(line) = lines.iter_mut().find(|l| l.connects(a, b)) {
            line.k = k;
        }
        Topology::new(self.n_areas, lines)
    }

    /// Sum over neighbours of the tie coefficients, the diagonal of the
    /// weighted graph Laplacian.
    pub fn coefficient_sum(&self, area: usize) -> f64 {
        self.adjacency[area].iter().map(|n| n.coefficient).sum()
    }

    pub fn is_connected(&self) -> bool {
        if self.n_areas == 0 {
            return true;
        }
        let mut seen = alloc::vec![false; self.n_areas];
        let mut stack = alloc::vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for n in &self.adjacency[i] {
                if !seen[n.area] {
                    seen[n.area] = true;
                    stack.push(n.area);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// The 26-area European network: one tie line per nonzero upper-triangle
/// table entry, with `d` in km and unit gain.
pub fn build_eea_topology() -> Topology {
    let mut lines = Vec::with_capacity(EEA_TIE_LINES);
    for i in 0..EEA_AREAS {
        for j in (i + 1)..EEA_AREAS {
            let len = TIE_LINE_LENGTHS[i][j];
            if len > 0.0 {
                lines.push(TieLine {
                    a: AreaId::new(i).unwrap(),
                    b: AreaId::new(j).unwrap(),
                    d: len * 1000.0,
                    k: 1.0,
                });
            }
        }
    }
    Topology::new(EEA_AREAS, lines).expect("embedded table is a valid topology")
}

/// Tie-line power flowing out of each area [GW]:
/// `Σ_{j∈N(i)} T_ij (Δδ_i − Δδ_j)`.
pub fn tie_power(angles: &[f64], topo: &Topology) -> Result<Vec<f64>, TopologyError> {
    let mut out = alloc::vec![0.0; topo.n_areas()];
    tie_power_into(angles, topo, &mut out)?;
    Ok(out)
}

pub fn tie_power_into(angles: &[f64], topo: &Topology, out: &mut [f64]) -> Result<(), TopologyError> {
    let n = topo.n_areas();
    for found in [angles.len(), out.len()] {
        if found != n {
            return Err(TopologyError::DimensionMismatch { expected: n, found });
        }
    }
    for (i, p) in out.iter_mut().enumerate() {
        *p = topo
            .neighbors(i)
            .iter()
            .map(|nb| nb.coefficient * (angles[i] - angles[nb.area]))
            .sum();
    }
    Ok(())
}
