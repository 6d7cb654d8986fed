use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::stream::{RandomnessStream, SiteClock};
use crate::error::{dimension, Result};
use crate::lattice::{Model, Region};
use crate::measure::SpinConfig;

/// One processed ring.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    /// Global site index.
    pub site: usize,
    /// `c_x` evaluated just before the ring.
    pub constraint: bool,
    pub coin: bool,
    /// Legal ring: the spin was reset to the coin.
    pub applied: bool,
    /// The reset changed the spin value.
    pub changed: bool,
}

#[derive(Clone, Copy, Debug)]
struct Pending {
    time: f64,
    site: u32,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Ties in time go to the lower global site index.
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.site.cmp(&other.site))
    }
}

/// Event-driven realization of the graphical construction on a region.
///
/// A priority queue holds the next ring of every site in the region; rings
/// are processed in global time order and each site's Poisson stream is
/// extended one ring at a time.
pub struct Trajectory<'a> {
    model: &'a Model,
    region: &'a Region,
    spins: Vec<bool>,
    clocks: Vec<SiteClock>,
    coins: Vec<bool>,
    queue: BinaryHeap<Reverse<Pending>>,
    last_time: f64,
    ties: u64,
}

impl<'a> Trajectory<'a> {
    /// `initial` is indexed by region-local position.
    pub fn new(
        model: &'a Model,
        region: &'a Region,
        initial: &SpinConfig,
        stream: &RandomnessStream,
    ) -> Result<Self> {
        if initial.len() != region.len() {
            return Err(dimension(format!(
                "initial configuration has {} spins, region has {} sites",
                initial.len(),
                region.len()
            )));
        }
        let geometry = model.geometry();
        let mut spins = vec![false; model.num_sites()];
        for (k, &s) in region.sites().iter().enumerate() {
            spins[s] = initial.get(k);
        }
        let mut clocks = Vec::with_capacity(region.len());
        let mut coins = Vec::with_capacity(region.len());
        let mut queue = BinaryHeap::with_capacity(region.len());
        for (k, &s) in region.sites().iter().enumerate() {
            let mut clock = stream.site_clock(geometry.coords(s), k, model.p());
            let (time, coin) = clock.next_ring();
            clocks.push(clock);
            coins.push(coin);
            queue.push(Reverse(Pending {
                time,
                site: s as u32,
            }));
        }
        Ok(Self {
            model,
            region,
            spins,
            clocks,
            coins,
            queue,
            last_time: 0.0,
            ties: 0,
        })
    }

    pub fn next_time(&self) -> Option<f64> {
        self.queue.peek().map(|r| r.0.time)
    }

    /// Processes the next ring.
    pub fn step(&mut self) -> Option<Event> {
        let Reverse(Pending { time, site }) = self.queue.pop()?;
        let site = site as usize;
        if time == self.last_time {
            self.ties += 1;
            log::warn!("ring-time tie at t = {time}; resolved by site index");
        }
        self.last_time = time;
        let pos = self.region.position(site).expect("queued site is in region");
        let spins = &self.spins;
        let constraint = self.model.constraint_with(site, |y| spins[y]);
        let coin = self.coins[pos];
        let changed = constraint && self.spins[site] != coin;
        if constraint {
            self.spins[site] = coin;
        }
        let (next, next_coin) = self.clocks[pos].next_ring();
        self.coins[pos] = next_coin;
        self.queue.push(Reverse(Pending {
            time: next,
            site: site as u32,
        }));
        Some(Event {
            time,
            site,
            constraint,
            coin,
            applied: constraint,
            changed,
        })
    }

    /// Processes the next ring if it happens no later than `horizon`.
    pub fn step_until(&mut self, horizon: f64) -> Option<Event> {
        match self.next_time() {
            Some(t) if t <= horizon => self.step(),
            _ => None,
        }
    }

    pub fn spin(&self, site: usize) -> bool {
        self.spins[site]
    }

    pub fn constraint(&self, site: usize) -> bool {
        let spins = &self.spins;
        self.model.constraint_with(site, |y| spins[y])
    }

    /// Current configuration in region-local order.
    pub fn config(&self) -> SpinConfig {
        let bools: Vec<bool> = self.region.sites().iter().map(|&s| self.spins[s]).collect();
        SpinConfig::from_bools(&bools)
    }

    pub fn ties(&self) -> u64 {
        self.ties
    }

    pub fn region(&self) -> &Region {
        self.region
    }
}
