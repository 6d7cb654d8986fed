//! Queue-free realization of the graphical construction for oriented
//! constraints. Every constraining site has a smaller global index, so a
//! site's spin path depends only on the paths of lower-indexed sites; paths
//! are built site by site in index order, one time window at a time. The
//! realization is the one the event-driven engine produces from the same
//! stream, including the rule that simultaneous rings resolve toward lower
//! indices.

use super::stream::{RandomnessStream, SiteClock};
use crate::error::{dimension, validation, Result};
use crate::lattice::{Model, Region};
use crate::measure::SpinConfig;

pub(crate) struct Sweep {
    /// Offsets into `nbrs`, one range per local site.
    offsets: Vec<usize>,
    nbrs: Vec<u32>,
    /// Per `(site, neighbour slot)`: changes of that neighbour at or before
    /// the site's last processed ring.
    cursors: Vec<u32>,
    clocks: Vec<SiteClock>,
    next: Vec<(f64, bool)>,
    initial: Vec<bool>,
    spin: Vec<bool>,
    /// Times at which each site's spin changed, increasing.
    changes: Vec<Vec<f64>>,
    horizon: f64,
}

impl Sweep {
    pub fn new(model: &Model, region: &Region, initial: &SpinConfig, stream: &RandomnessStream) -> Result<Self> {
        if initial.len() != region.len() {
            return Err(dimension("initial configuration does not match the region"));
        }
        let sites = region.sites();
        let g = model.geometry();
        let mut offsets = Vec::with_capacity(sites.len() + 1);
        let mut nbrs = Vec::new();
        offsets.push(0);
        for &s in sites {
            for &y in model.neighborhood(s) {
                if y >= s {
                    return Err(validation("constraints must point to lower-indexed sites"));
                }
                let k = region
                    .position(y)
                    .ok_or_else(|| validation("region is not closed under the constraints"))?;
                nbrs.push(k as u32);
            }
            offsets.push(nbrs.len());
        }
        let mut clocks = Vec::with_capacity(sites.len());
        let mut next = Vec::with_capacity(sites.len());
        for (k, &s) in sites.iter().enumerate() {
            let mut c = stream.site_clock(g.coords(s), k, model.p());
            next.push(c.next_ring());
            clocks.push(c);
        }
        let initial = initial.to_bools();
        Ok(Self {
            cursors: vec![0; nbrs.len()],
            offsets,
            nbrs,
            clocks,
            next,
            spin: initial.clone(),
            initial,
            changes: vec![Vec::new(); sites.len()],
            horizon: 0.0,
        })
    }

    /// Extends every path through time `t`.
    pub fn extend(&mut self, t: f64) {
        if t <= self.horizon {
            return;
        }
        for k in 0..self.clocks.len() {
            let range = self.offsets[k]..self.offsets[k + 1];
            loop {
                let (time, coin) = self.next[k];
                if time > t {
                    break;
                }
                let mut free = true;
                for slot in range.clone() {
                    let y = self.nbrs[slot] as usize;
                    let ch = &self.changes[y];
                    let mut c = self.cursors[slot] as usize;
                    while c < ch.len() && ch[c] <= time {
                        c += 1;
                    }
                    self.cursors[slot] = c as u32;
                    // spin of y at `time` is its initial value flipped c times
                    if self.initial[y] ^ (c % 2 == 1) {
                        free = false;
                    }
                }
                if free && self.spin[k] != coin {
                    self.spin[k] = coin;
                    self.changes[k].push(time);
                }
                self.next[k] = self.clocks[k].next_ring();
            }
        }
        self.horizon = t;
    }

    pub fn changes(&self, k: usize) -> &[f64] {
        &self.changes[k]
    }

    #[cfg(test)]
    pub fn initial(&self, k: usize) -> bool {
        self.initial[k]
    }

    #[cfg(test)]
    pub fn config(&self) -> SpinConfig {
        SpinConfig::from_bools(&self.spin)
    }
}
