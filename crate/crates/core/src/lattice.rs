//! Lattice geometry and oriented constraint families.
//!
//! Sites of the box `[1, n]^d` are addressed either by 1-based coordinates or
//! by a flat index. The flat index is lexicographic with the first coordinate
//! most significant:
//!
//! ```text
//! index(x) = sum_j (x_j - 1) * n^(d - j)
//! ```
//!
//! so `x_* = (1, ..., 1)` is index 0 and `x^* = (n, ..., n)` is `n^d - 1`.
//! Exact-state ids and exported files rely on this ordering staying fixed.

use std::collections::BTreeMap;

use serde_json::json;

use crate::error::{range, validation, Result};

/// Explicit constraining sets keyed by site coordinates (1-based).
pub type CustomConstraints = BTreeMap<Vec<usize>, Vec<Vec<usize>>>;

const MAX_SITES: usize = u32::MAX as usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Geometry {
    d: usize,
    n: usize,
    num_sites: usize,
    coords: Vec<u32>,
}

impl Geometry {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d == 0 {
            return Err(validation("dimension d must be at least 1"));
        }
        if n == 0 {
            return Err(validation("side length n must be at least 1"));
        }
        let num_sites = u32::try_from(d)
            .ok()
            .and_then(|d| n.checked_pow(d))
            .filter(|&s| s <= MAX_SITES)
            .ok_or_else(|| validation(format!("lattice [1,{n}]^{d} has too many sites")))?;
        let mut coords = Vec::with_capacity(num_sites * d);
        let mut x = vec![1u32; d];
        for _ in 0..num_sites {
            coords.extend_from_slice(&x);
            for j in (0..d).rev() {
                if (x[j] as usize) < n {
                    x[j] += 1;
                    break;
                }
                x[j] = 1;
            }
        }
        Ok(Self {
            d,
            n,
            num_sites,
            coords,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    /// Flat index of 1-based coordinates, or `None` outside the box.
    pub fn index_of(&self, x: &[usize]) -> Option<usize> {
        if x.len() != self.d {
            return None;
        }
        let mut idx = 0usize;
        for &xj in x {
            if xj < 1 || xj > self.n {
                return None;
            }
            idx = idx * self.n + (xj - 1);
        }
        Some(idx)
    }

    /// 1-based coordinates of a site.
    pub fn coords(&self, site: usize) -> &[u32] {
        &self.coords[site * self.d..(site + 1) * self.d]
    }

    pub fn coords_vec(&self, site: usize) -> Vec<usize> {
        self.coords(site).iter().map(|&c| c as usize).collect()
    }

    /// `sum_j x_j`, in `[d, d * n]`.
    pub fn level(&self, site: usize) -> usize {
        self.coords(site).iter().map(|&c| c as usize).sum()
    }

    pub fn min_level(&self) -> usize {
        self.d
    }

    pub fn max_level(&self) -> usize {
        self.d * self.n
    }

    /// The unconstrained corner `(1, ..., 1)`.
    pub fn corner(&self) -> usize {
        0
    }

    /// The opposite corner `(n, ..., n)`.
    pub fn far_corner(&self) -> usize {
        self.num_sites - 1
    }

    fn check_level(&self, i: usize) -> Result<()> {
        if i < self.min_level() || i > self.max_level() {
            return Err(range(format!(
                "level {i} outside [{}, {}]",
                self.min_level(),
                self.max_level()
            )));
        }
        Ok(())
    }

    /// Sites with coordinate sum exactly `i`, sorted by index.
    pub fn hyperplane(&self, i: usize) -> Result<Vec<usize>> {
        self.check_level(i)?;
        Ok((0..self.num_sites).filter(|&s| self.level(s) == i).collect())
    }

    /// Sites with coordinate sum at most `i`, sorted by index.
    pub fn lower_set(&self, i: usize) -> Result<Vec<usize>> {
        self.check_level(i)?;
        Ok((0..self.num_sites).filter(|&s| self.level(s) <= i).collect())
    }

    /// `K_x^* ∩ Λ_n`: all `x - sum α_j e_j` with `α ∈ {0,1}^d \ {0}` that stay in the box.
    pub fn maximal_neighborhood(&self, site: usize) -> Vec<usize> {
        let x = self.coords_vec(site);
        let mut out = Vec::new();
        for mask in 1u64..(1u64 << self.d) {
            let y: Option<Vec<usize>> = x
                .iter()
                .enumerate()
                .map(|(j, &xj)| {
                    if mask >> j & 1 == 1 {
                        xj.checked_sub(1).filter(|&v| v >= 1)
                    } else {
                        Some(xj)
                    }
                })
                .collect();
            if let Some(idx) = y.and_then(|y| self.index_of(&y)) {
                out.push(idx);
            }
        }
        out.sort_unstable();
        out
    }

    /// `{x - e_j} ∩ Λ_n`.
    pub fn north_east_neighborhood(&self, site: usize) -> Vec<usize> {
        let mut x = self.coords_vec(site);
        let mut out = Vec::new();
        for j in 0..self.d {
            if x[j] > 1 {
                x[j] -= 1;
                out.extend(self.index_of(&x));
                x[j] += 1;
            }
        }
        out.sort_unstable();
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintFamily {
    /// `C_x = {x - e_j : j = 1..d} ∩ Λ_n`.
    NorthEast,
    /// `C_x = K_x^* ∩ Λ_n`.
    Maximal,
    Custom(CustomConstraints),
}

impl ConstraintFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ConstraintFamily::NorthEast => "northeast",
            ConstraintFamily::Maximal => "maximal",
            ConstraintFamily::Custom(_) => "custom",
        }
    }
}

/// One KCM instance: geometry, constraint family and the spin-1 density `p`.
#[derive(Clone, Debug)]
pub struct Model {
    geometry: Geometry,
    family: ConstraintFamily,
    p: f64,
    q: f64,
    neighborhoods: Vec<Vec<usize>>,
}

impl Model {
    pub fn new(geometry: Geometry, family: ConstraintFamily, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(validation(format!("p must lie in (0, 1), got {p}")));
        }
        let neighborhoods = match &family {
            ConstraintFamily::NorthEast => (0..geometry.num_sites())
                .map(|s| geometry.north_east_neighborhood(s))
                .collect(),
            ConstraintFamily::Maximal => (0..geometry.num_sites())
                .map(|s| geometry.maximal_neighborhood(s))
                .collect(),
            ConstraintFamily::Custom(map) => custom_neighborhoods(&geometry, map)?,
        };
        Ok(Self {
            geometry,
            family,
            p,
            q: 1.0 - p,
            neighborhoods,
        })
    }

    pub fn north_east(d: usize, n: usize, p: f64) -> Result<Self> {
        Self::new(Geometry::new(d, n)?, ConstraintFamily::NorthEast, p)
    }

    pub fn maximal(d: usize, n: usize, p: f64) -> Result<Self> {
        Self::new(Geometry::new(d, n)?, ConstraintFamily::Maximal, p)
    }

    /// Same geometry and constraints with a different density.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.geometry.clone(), self.family.clone(), p)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn family(&self) -> &ConstraintFamily {
        &self.family
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn num_sites(&self) -> usize {
        self.geometry.num_sites()
    }

    /// `C_x` as sorted site indices; empty exactly for the corner `x_*`.
    pub fn neighborhood(&self, site: usize) -> &[usize] {
        &self.neighborhoods[site]
    }

    /// `c_x(σ)`: true iff every spin in `C_x` is 0. `spin(y)` reads the current spin at `y`.
    #[inline]
    pub fn constraint_with(&self, site: usize, mut spin: impl FnMut(usize) -> bool) -> bool {
        self.neighborhoods[site].iter().all(|&y| !spin(y))
    }

    /// JSON description used in metadata headers and model hashes.
    pub fn describe(&self) -> serde_json::Value {
        let custom = match &self.family {
            ConstraintFamily::Custom(map) => {
                let m: serde_json::Map<String, serde_json::Value> = map
                    .iter()
                    .map(|(k, v)| (coord_key(k), json!(v)))
                    .collect();
                serde_json::Value::Object(m)
            }
            _ => serde_json::Value::Null,
        };
        json!({
            "d": self.geometry.dim(),
            "n": self.geometry.side(),
            "p": self.p,
            "family": self.family.name(),
            "custom": custom,
        })
    }
}

/// `"x1,x2,..."`, the key format custom constraint maps use in config files.
pub fn coord_key(x: &[usize]) -> String {
    x.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

pub fn parse_coord_key(key: &str) -> Result<Vec<usize>> {
    key.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| validation(format!("bad site coordinate key {key:?}")))
        })
        .collect()
}

fn custom_neighborhoods(geometry: &Geometry, map: &CustomConstraints) -> Result<Vec<Vec<usize>>> {
    let mut out = vec![Vec::new(); geometry.num_sites()];
    for (x, list) in map {
        let site = geometry
            .index_of(x)
            .ok_or_else(|| validation(format!("custom constraint site {x:?} is outside the lattice")))?;
        let allowed = geometry.maximal_neighborhood(site);
        let mut cs = Vec::with_capacity(list.len());
        for y in list {
            let ys = geometry
                .index_of(y)
                .ok_or_else(|| validation(format!("constraint {y:?} of site {x:?} is outside the lattice")))?;
            if !allowed.contains(&ys) {
                return Err(validation(format!(
                    "constraint {y:?} of site {x:?} is not in K_x^* (must be x minus a nonzero 0/1 vector)"
                )));
            }
            cs.push(ys);
        }
        cs.sort_unstable();
        cs.dedup();
        out[site] = cs;
    }
    if !out[geometry.corner()].is_empty() {
        return Err(validation("the corner (1,...,1) must be unconstrained"));
    }
    for (site, cs) in out.iter().enumerate().skip(1) {
        if cs.is_empty() {
            return Err(validation(format!(
                "site {:?} has an empty constraining set",
                geometry.coords_vec(site)
            )));
        }
    }
    Ok(out)
}

/// A set of sites closed under the constraint family, on which the dynamics
/// can run autonomously. Sites are kept in increasing global index order;
/// that order is the bit order of region-local state ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    sites: Vec<usize>,
    position: Vec<u32>,
    label: RegionLabel,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RegionLabel {
    Full,
    Lower(usize),
    Custom,
}

const ABSENT: u32 = u32::MAX;

impl Region {
    pub fn full(model: &Model) -> Self {
        let n = model.num_sites();
        Self {
            sites: (0..n).collect(),
            position: (0..n as u32).collect(),
            label: RegionLabel::Full,
        }
    }

    /// `U_i`, all sites with level at most `i`.
    pub fn lower_set(model: &Model, i: usize) -> Result<Self> {
        let sites = model.geometry().lower_set(i)?;
        let label = if i == model.geometry().max_level() {
            RegionLabel::Full
        } else {
            RegionLabel::Lower(i)
        };
        let r = Self::build(model, sites, label);
        r.check_closed(model)?;
        Ok(r)
    }

    /// Arbitrary site set; must be closed under `x -> C_x`.
    pub fn from_sites(model: &Model, mut sites: Vec<usize>) -> Result<Self> {
        sites.sort_unstable();
        sites.dedup();
        if let Some(&s) = sites.iter().find(|&&s| s >= model.num_sites()) {
            return Err(validation(format!("site index {s} is outside the lattice")));
        }
        let label = if sites.len() == model.num_sites() {
            RegionLabel::Full
        } else {
            RegionLabel::Custom
        };
        let r = Self::build(model, sites, label);
        r.check_closed(model)?;
        Ok(r)
    }

    /// Smallest constraint-closed region containing `seeds`.
    pub fn closure_of(model: &Model, seeds: &[usize]) -> Result<Self> {
        let mut member = vec![false; model.num_sites()];
        let mut stack: Vec<usize> = Vec::new();
        for &s in seeds {
            if s >= model.num_sites() {
                return Err(validation(format!("site index {s} is outside the lattice")));
            }
            if !member[s] {
                member[s] = true;
                stack.push(s);
            }
        }
        while let Some(x) = stack.pop() {
            for &y in model.neighborhood(x) {
                if !member[y] {
                    member[y] = true;
                    stack.push(y);
                }
            }
        }
        let sites = (0..model.num_sites()).filter(|&s| member[s]).collect();
        Self::from_sites(model, sites)
    }

    fn build(model: &Model, sites: Vec<usize>, label: RegionLabel) -> Self {
        let mut position = vec![ABSENT; model.num_sites()];
        for (k, &s) in sites.iter().enumerate() {
            position[s] = k as u32;
        }
        Self {
            sites,
            position,
            label,
        }
    }

    fn check_closed(&self, model: &Model) -> Result<()> {
        for &x in &self.sites {
            if let Some(&y) = model.neighborhood(x).iter().find(|&&y| !self.contains(y)) {
                return Err(validation(format!(
                    "region is not closed under the constraints: {:?} needs {:?}",
                    model.geometry().coords_vec(x),
                    model.geometry().coords_vec(y)
                )));
            }
        }
        Ok(())
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn label(&self) -> &RegionLabel {
        &self.label
    }

    pub fn contains(&self, site: usize) -> bool {
        self.position.get(site).is_some_and(|&p| p != ABSENT)
    }

    /// Region-local position of a global site.
    pub fn position(&self, site: usize) -> Option<usize> {
        match self.position.get(site) {
            Some(&p) if p != ABSENT => Some(p as usize),
            _ => None,
        }
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.sites.iter().all(|&s| other.contains(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sites_of(g: &Geometry, xs: &[&[usize]]) -> Vec<usize> {
        let mut v: Vec<usize> = xs.iter().map(|x| g.index_of(x).unwrap()).collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn index_round_trip() {
        for (d, n) in [(1, 5), (2, 3), (3, 4), (4, 2)] {
            let g = Geometry::new(d, n).unwrap();
            for s in 0..g.num_sites() {
                assert_eq!(g.index_of(&g.coords_vec(s)), Some(s));
            }
            assert_eq!(g.coords_vec(g.corner()), vec![1; d]);
            assert_eq!(g.coords_vec(g.far_corner()), vec![n; d]);
        }
    }

    #[test]
    fn lexicographic_order() {
        let g = Geometry::new(2, 3).unwrap();
        assert_eq!(g.index_of(&[1, 2]), Some(1));
        assert_eq!(g.index_of(&[2, 1]), Some(3));
        assert_eq!(g.index_of(&[0, 1]), None);
        assert_eq!(g.index_of(&[4, 1]), None);
    }

    #[test]
    fn hyperplane_examples() {
        let g = Geometry::new(2, 3).unwrap();
        assert_eq!(
            g.hyperplane(4).unwrap(),
            sites_of(&g, &[&[1, 3], &[2, 2], &[3, 1]])
        );
        assert_eq!(g.hyperplane(2).unwrap(), vec![g.corner()]);
        let g3 = Geometry::new(3, 2).unwrap();
        assert_eq!(g3.hyperplane(6).unwrap(), vec![g3.far_corner()]);
        assert!(matches!(g.hyperplane(1), Err(crate::KcmError::Range(_))));
        assert!(matches!(g.hyperplane(7), Err(crate::KcmError::Range(_))));
    }

    #[test]
    fn lower_sets_nest() {
        let g = Geometry::new(3, 3).unwrap();
        for i in g.min_level() + 1..=g.max_level() {
            let mut u = g.lower_set(i - 1).unwrap();
            u.extend(g.hyperplane(i).unwrap());
            u.sort_unstable();
            assert_eq!(u, g.lower_set(i).unwrap());
        }
        assert_eq!(g.lower_set(g.max_level()).unwrap().len(), g.num_sites());
    }

    #[test]
    fn neighborhood_examples() {
        let ne = Model::north_east(2, 3, 0.3).unwrap();
        let g = ne.geometry().clone();
        let x = g.index_of(&[3, 3]).unwrap();
        assert_eq!(ne.neighborhood(x), sites_of(&g, &[&[2, 3], &[3, 2]]).as_slice());
        assert!(ne.neighborhood(g.corner()).is_empty());

        let mx = Model::maximal(2, 3, 0.3).unwrap();
        assert_eq!(
            mx.neighborhood(x),
            sites_of(&g, &[&[2, 2], &[2, 3], &[3, 2]]).as_slice()
        );
    }

    #[test]
    fn boundary_sites_intersect_box() {
        let ne = Model::north_east(2, 3, 0.3).unwrap();
        let g = ne.geometry();
        let x = g.index_of(&[1, 3]).unwrap();
        assert_eq!(ne.neighborhood(x), &[g.index_of(&[1, 2]).unwrap()]);
    }

    #[test]
    fn constraint_examples() {
        let ne = Model::north_east(2, 3, 0.3).unwrap();
        let g = ne.geometry();
        let x = g.index_of(&[2, 2]).unwrap();
        let south = g.index_of(&[2, 1]).unwrap();
        let west = g.index_of(&[1, 2]).unwrap();
        let mut spins = vec![false; g.num_sites()];
        assert!(ne.constraint_with(x, |y| spins[y]));
        spins[west] = true;
        assert!(!ne.constraint_with(x, |y| spins[y]));
        spins[west] = false;
        spins[south] = true;
        assert!(!ne.constraint_with(x, |y| spins[y]));
        let all_ones = vec![true; g.num_sites()];
        assert!(ne.constraint_with(g.corner(), |y| all_ones[y]));
    }

    #[test]
    fn custom_family_validation() {
        let g = Geometry::new(2, 2).unwrap();
        let mut map = CustomConstraints::new();
        map.insert(vec![1, 2], vec![vec![1, 1]]);
        map.insert(vec![2, 1], vec![vec![1, 1]]);
        map.insert(vec![2, 2], vec![vec![1, 1]]);
        let m = Model::new(g.clone(), ConstraintFamily::Custom(map.clone()), 0.4).unwrap();
        assert_eq!(m.neighborhood(3), &[0]);

        let mut missing = map.clone();
        missing.remove(&vec![2, 2]);
        assert!(Model::new(g.clone(), ConstraintFamily::Custom(missing), 0.4).is_err());

        let mut not_oriented = map.clone();
        not_oriented.insert(vec![1, 2], vec![vec![2, 1]]);
        assert!(Model::new(g.clone(), ConstraintFamily::Custom(not_oriented), 0.4).is_err());

        let mut corner = map.clone();
        corner.insert(vec![1, 1], vec![vec![1, 1]]);
        assert!(Model::new(g.clone(), ConstraintFamily::Custom(corner), 0.4).is_err());

        let mut outside = map;
        outside.insert(vec![3, 1], vec![vec![2, 1]]);
        assert!(Model::new(g, ConstraintFamily::Custom(outside), 0.4).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Model::north_east(2, 2, 0.0).is_err());
        assert!(Model::north_east(2, 2, 1.0).is_err());
        assert!(Model::north_east(2, 2, f64::NAN).is_err());
        assert!(Geometry::new(0, 2).is_err());
        assert!(Geometry::new(2, 0).is_err());
        assert!(Geometry::new(8, 1 << 8).is_err());
    }

    #[test]
    fn regions() {
        let m = Model::north_east(2, 4, 0.3).unwrap();
        let u = Region::lower_set(&m, 4).unwrap();
        assert_eq!(u.len(), 6);
        assert_eq!(u.label(), &RegionLabel::Lower(4));
        assert!(u.is_subset_of(&Region::full(&m)));
        assert_eq!(Region::lower_set(&m, 8).unwrap().label(), &RegionLabel::Full);

        let g = m.geometry();
        let top = g.index_of(&[2, 2]).unwrap();
        assert!(Region::from_sites(&m, vec![top]).is_err());
        let c = Region::closure_of(&m, &[top]).unwrap();
        assert_eq!(c.sites(), sites_of(g, &[&[1, 1], &[1, 2], &[2, 1], &[2, 2]]).as_slice());
        assert_eq!(c.position(top), Some(3));
        assert_eq!(c.position(g.index_of(&[1, 3]).unwrap()), None);
    }
}
