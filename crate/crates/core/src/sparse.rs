//! Sparse families of dyadic cubes.
//!
//! A family S is sparse with factor `eta` against a carrier measure when for
//! every member Q the carrier mass of the union of strictly smaller members
//! inside Q is at most `eta * carrier(Q)`. Unions of dyadic cubes decompose
//! exactly into maximal members, so all checks here are exact sums, not
//! samplings.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dyadic::{parse_depth_header, Carrier, Cube, Grid};
use crate::error::{Error, Result};

/// Exhaustive subfamily enumeration refuses families larger than this.
pub const ENUMERATION_CAP: usize = 20;

/// A verified sparse family over a grid. Construction checks the sparsity
/// inequality; operators downstream rely on the `verified` flag.
#[derive(Debug, Clone)]
pub struct SparseFamily {
    grid: Grid,
    cubes: Vec<Cube>,
    carrier: Carrier,
    factor: f64,
    verified: bool,
}

impl SparseFamily {
    /// Verify `cubes` against `carrier` and build the family. Duplicates are
    /// dropped; cubes are kept sorted coarse-to-fine.
    pub fn verified(grid: Grid, cubes: Vec<Cube>, carrier: Carrier, factor: f64) -> Result<Self> {
        check_factor(factor)?;
        let cubes = canonicalize(grid, cubes)?;
        if cubes.is_empty() {
            return Err(Error::Precondition("a sparse family must be nonempty".into()));
        }
        if !sparsity_holds(grid, &cubes, &carrier, factor)? {
            return Err(Error::Precondition(format!(
                "family of {} cubes fails the {factor}-sparsity inequality",
                cubes.len()
            )));
        }
        Ok(SparseFamily { grid, cubes, carrier, factor, verified: true })
    }

    /// Internal constructor for sets whose sparsity is guaranteed by
    /// construction (incremental tracker output).
    pub(crate) fn new_prechecked(grid: Grid, cubes: Vec<Cube>, carrier: Carrier, factor: f64) -> Self {
        debug_assert!(sparsity_holds(grid, &cubes, &carrier, factor).unwrap_or(false));
        SparseFamily { grid, cubes, carrier, factor, verified: true }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn members(&self) -> &[Cube] {
        &self.cubes
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn carrier(&self) -> &Carrier {
        &self.carrier
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    pub fn is_verified(&self) -> bool {
        self.verified
    }

    pub fn contains(&self, cube: Cube) -> bool {
        self.cubes.binary_search(&cube).is_ok()
    }

    /// Maximal members (those not strictly inside another member).
    pub fn maximal_members(&self) -> Vec<Cube> {
        let set: BTreeSet<Cube> = self.cubes.iter().copied().collect();
        self.cubes
            .iter()
            .copied()
            .filter(|&q| closest_member_ancestor(&set, q).is_none())
            .collect()
    }

    /// Text form: `depth L`, then one `level index` pair per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("depth {}\n", self.grid.depth());
        for q in &self.cubes {
            s.push_str(&format!("{} {}\n", q.level(), q.index()));
        }
        s
    }

    /// Parse the text form and verify against the given carrier and factor.
    pub fn from_text(text: &str, carrier: Carrier, factor: f64) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty family file".into()))?;
        let grid = Grid::new(parse_depth_header(header)?)?;
        let mut cubes = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            match (it.next(), it.next(), it.next()) {
                (Some(l), Some(k), None) => {
                    let level: u32 =
                        l.parse().map_err(|_| Error::Parse(format!("bad level `{l}`")))?;
                    let index: usize =
                        k.parse().map_err(|_| Error::Parse(format!("bad index `{k}`")))?;
                    cubes.push(Cube::new(level, index)?);
                }
                _ => return Err(Error::Parse(format!("expected `level index`, got `{line}`"))),
            }
        }
        SparseFamily::verified(grid, cubes, carrier, factor)
    }
}

fn check_factor(factor: f64) -> Result<()> {
    if !(factor > 0.0 && factor < 1.0) {
        return Err(Error::parameter("factor", format!("0 < factor < 1, got {factor}")));
    }
    Ok(())
}

fn canonicalize(grid: Grid, cubes: Vec<Cube>) -> Result<Vec<Cube>> {
    let mut set = BTreeSet::new();
    for q in cubes {
        if !grid.contains(q) {
            return Err(Error::CubeOutsideGrid {
                level: q.level(),
                index: q.index(),
                depth: grid.depth(),
            });
        }
        set.insert(q);
    }
    Ok(set.into_iter().collect())
}

/// The minimal member strictly containing `q`, if any (walk up the ancestry).
fn closest_member_ancestor(members: &BTreeSet<Cube>, q: Cube) -> Option<Cube> {
    let mut cur = q;
    while let Some(p) = cur.parent() {
        if members.contains(&p) {
            return Some(p);
        }
        cur = p;
    }
    None
}

/// Does `cubes` satisfy the sparsity inequality against `carrier`?
///
/// For each member Q the union of strictly smaller members equals the
/// disjoint union of the members whose closest member-ancestor is Q, so the
/// union mass is an exact sum of cube masses.
pub fn is_sparse(grid: Grid, cubes: &[Cube], carrier: &Carrier, factor: f64) -> Result<bool> {
    check_factor(factor)?;
    let cubes = canonicalize(grid, cubes.to_vec())?;
    sparsity_holds(grid, &cubes, carrier, factor)
}

fn sparsity_holds(grid: Grid, cubes: &[Cube], carrier: &Carrier, factor: f64) -> Result<bool> {
    let set: BTreeSet<Cube> = cubes.iter().copied().collect();
    let mut covered: BTreeMap<Cube, f64> = BTreeMap::new();
    for &q in cubes {
        if let Some(anc) = closest_member_ancestor(&set, q) {
            *covered.entry(anc).or_insert(0.0) += carrier.measure(grid, q)?;
        }
    }
    for &q in cubes {
        let mass = covered.get(&q).copied().unwrap_or(0.0);
        if mass > factor * carrier.measure(grid, q)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Disjoint parts `E_Q = Q \ union of strictly smaller members`, as sorted
/// leaf index sets. The parts partition the union of the family.
pub fn disjoint_parts(family: &SparseFamily) -> BTreeMap<Cube, Vec<usize>> {
    let set: BTreeSet<Cube> = family.cubes.iter().copied().collect();
    let grid = family.grid;
    let mut removed: BTreeMap<Cube, Vec<Cube>> = BTreeMap::new();
    for &q in &family.cubes {
        if let Some(anc) = closest_member_ancestor(&set, q) {
            removed.entry(anc).or_default().push(q);
        }
    }
    let mut out = BTreeMap::new();
    for &q in &family.cubes {
        let mut mask: Vec<bool> = vec![true; q.leaf_len(grid)];
        let base = q.leaf_range(grid).start;
        if let Some(children) = removed.get(&q) {
            for c in children {
                for i in c.leaf_range(grid) {
                    mask[i - base] = false;
                }
            }
        }
        let leaves: Vec<usize> =
            mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| base + i).collect();
        out.insert(q, leaves);
    }
    out
}

/// Incremental sparsity bookkeeping. Cubes must be inserted coarse-to-fine;
/// then a new cube only adds mass to its closest member-ancestor (in all
/// higher ancestors it is already covered by that member).
pub(crate) struct SparsityTracker<'a> {
    grid: Grid,
    carrier: &'a Carrier,
    factor: f64,
    members: HashMap<Cube, usize>,
    order: Vec<Cube>,
    covered: Vec<f64>,
    budget: Vec<f64>, // factor * carrier(Q) per member
}

pub(crate) struct AddRecord {
    ancestor: Option<usize>,
    mass: f64,
}

impl<'a> SparsityTracker<'a> {
    pub fn new(grid: Grid, carrier: &'a Carrier, factor: f64) -> Self {
        SparsityTracker {
            grid,
            carrier,
            factor,
            members: HashMap::new(),
            order: Vec::new(),
            covered: Vec::new(),
            budget: Vec::new(),
        }
    }

    pub fn members(&self) -> &[Cube] {
        &self.order
    }

    fn closest_ancestor(&self, q: Cube) -> Option<usize> {
        let mut cur = q;
        while let Some(p) = cur.parent() {
            if let Some(&i) = self.members.get(&p) {
                return Some(i);
            }
            cur = p;
        }
        None
    }

    pub fn can_add(&self, q: Cube) -> Result<bool> {
        if let Some(&last) = self.order.last() {
            debug_assert!(q.level() >= last.level(), "insert coarse-to-fine");
        }
        match self.closest_ancestor(q) {
            None => Ok(true),
            Some(i) => {
                let mass = self.carrier.measure(self.grid, q)?;
                Ok(self.covered[i] + mass <= self.budget[i])
            }
        }
    }

    /// Add without feasibility check (caller already called `can_add`).
    pub fn add(&mut self, q: Cube) -> Result<AddRecord> {
        let anc = self.closest_ancestor(q);
        let mass = self.carrier.measure(self.grid, q)?;
        if let Some(i) = anc {
            self.covered[i] += mass;
        }
        self.members.insert(q, self.order.len());
        self.order.push(q);
        self.covered.push(0.0);
        self.budget.push(self.factor * mass);
        Ok(AddRecord { ancestor: anc, mass })
    }

    /// Undo the most recent `add`.
    pub fn pop(&mut self, rec: AddRecord) {
        let q = self.order.pop().expect("pop without add");
        self.members.remove(&q);
        self.covered.pop();
        self.budget.pop();
        if let Some(i) = rec.ancestor {
            self.covered[i] -= rec.mass;
        }
    }
}

/// Random sparse family: visit cubes coarse-to-fine, admit the root, then
/// admit each cube with probability `density` provided admission keeps the
/// family sparse. Deterministic for a fixed seed.
pub fn random_sparse_family(
    grid: Grid,
    carrier: Carrier,
    factor: f64,
    density: f64,
    seed: u64,
) -> Result<SparseFamily> {
    check_factor(factor)?;
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::parameter("density", format!("0 < density <= 1, got {density}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tracker = SparsityTracker::new(grid, &carrier, factor);
    for q in grid.cubes() {
        if q.level() == 0 {
            tracker.add(q)?;
            continue;
        }
        // Always consume one draw per cube so the stream is depth-stable.
        let coin: f64 = rng.gen();
        if coin < density && tracker.can_add(q)? {
            tracker.add(q)?;
        }
    }
    let cubes = tracker.members().to_vec();
    Ok(SparseFamily::new_prechecked(grid, cubes, carrier, factor))
}

/// Exhaustive enumeration of all subsets of `family` that are sparse with
/// factor 1/2 against `carrier` (the subfamily condition of the testing
/// constants). Lazily yields each subset, the empty one included.
pub fn enumerate_sparse_subfamilies<'a>(
    family: &'a SparseFamily,
    carrier: &'a Carrier,
) -> Result<SubfamilyIter<'a>> {
    if family.len() > ENUMERATION_CAP {
        return Err(Error::Capacity(format!(
            "exhaustive subfamily enumeration is capped at {ENUMERATION_CAP} cubes \
             (family has {}); use the greedy mode",
            family.len()
        )));
    }
    Ok(SubfamilyIter::new(family, carrier, 0.5))
}

/// DFS over include/exclude decisions in coarse-to-fine order with sparsity
/// pruning: once a subset violates the inequality no superset can repair it.
pub struct SubfamilyIter<'a> {
    family: &'a SparseFamily,
    tracker: SparsityTracker<'a>,
    // Decision stack: (position, included, undo record for included decisions)
    stack: Vec<(usize, bool, Option<AddRecord>)>,
    started: bool,
    done: bool,
}

impl<'a> SubfamilyIter<'a> {
    fn new(family: &'a SparseFamily, carrier: &'a Carrier, factor: f64) -> Self {
        SubfamilyIter {
            family,
            tracker: SparsityTracker::new(family.grid, carrier, factor),
            stack: Vec::new(),
            started: false,
            done: false,
        }
    }

    fn descend(&mut self) {
        // Extend the current prefix with "exclude" decisions to a full leaf.
        while self.stack.len() < self.family.len() {
            self.stack.push((self.stack.len(), false, None));
        }
    }

    fn current(&self) -> Vec<Cube> {
        self.tracker.members().to_vec()
    }

    /// Advance to the next decision leaf in DFS order, flipping the deepest
    /// "exclude" into "include" when feasible.
    fn advance(&mut self) -> bool {
        loop {
            let (pos, included, rec) = match self.stack.pop() {
                Some(t) => t,
                None => return false,
            };
            if included {
                self.tracker.pop(rec.expect("include carries a record"));
                continue;
            }
            let cube = self.family.cubes[pos];
            if self.tracker.can_add(cube).unwrap_or(false) {
                let rec = self.tracker.add(cube).expect("feasible add");
                self.stack.push((pos, true, Some(rec)));
                self.descend();
                return true;
            }
            // Include is infeasible: whole subtree below "include" is pruned.
        }
    }
}

impl<'a> Iterator for SubfamilyIter<'a> {
    type Item = Vec<Cube>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            self.descend(); // the all-exclude leaf: the empty subfamily
            return Some(self.current());
        }
        if self.advance() {
            Some(self.current())
        } else {
            self.done = true;
            None
        }
    }
}

/// Sparsity bookkeeping for arbitrary insertion order. Each member tracks its
/// family parent (closest member-ancestor) and the mass of its maximal member
/// descendants; inserting a coarser cube re-parents the members it swallows.
struct GeneralTracker<'a> {
    grid: Grid,
    carrier: &'a Carrier,
    factor: f64,
    members: HashMap<Cube, usize>,
    cubes: Vec<Cube>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    roots: Vec<usize>,
    covered: Vec<f64>,
    mass: Vec<f64>,
}

impl<'a> GeneralTracker<'a> {
    fn new(grid: Grid, carrier: &'a Carrier, factor: f64) -> Self {
        GeneralTracker {
            grid,
            carrier,
            factor,
            members: HashMap::new(),
            cubes: Vec::new(),
            parent: Vec::new(),
            children: Vec::new(),
            roots: Vec::new(),
            covered: Vec::new(),
            mass: Vec::new(),
        }
    }

    fn closest_ancestor(&self, q: Cube) -> Option<usize> {
        let mut cur = q;
        while let Some(p) = cur.parent() {
            if let Some(&i) = self.members.get(&p) {
                return Some(i);
            }
            cur = p;
        }
        None
    }

    /// Admit `q` if the subset stays sparse; returns whether it was admitted.
    fn try_add(&mut self, q: Cube) -> Result<bool> {
        if self.members.contains_key(&q) {
            return Ok(false);
        }
        let q_mass = self.carrier.measure(self.grid, q)?;
        let anc = self.closest_ancestor(q);
        // Members q would swallow: current maximal descendants of q, which are
        // exactly the children of `anc` (or roots) strictly inside q.
        let pool: &[usize] = match anc {
            Some(a) => &self.children[a],
            None => &self.roots,
        };
        let moved: Vec<usize> =
            pool.iter().copied().filter(|&i| q.strictly_contains(self.cubes[i])).collect();
        let moved_mass: f64 = moved.iter().map(|&i| self.mass[i]).sum();
        if moved_mass > self.factor * q_mass {
            return Ok(false);
        }
        if let Some(a) = anc {
            if self.covered[a] + q_mass - moved_mass > self.factor * self.mass[a] {
                return Ok(false);
            }
        }
        // Commit.
        let idx = self.cubes.len();
        self.members.insert(q, idx);
        self.cubes.push(q);
        self.parent.push(anc);
        self.children.push(moved.clone());
        self.covered.push(moved_mass);
        self.mass.push(q_mass);
        for &i in &moved {
            self.parent[i] = Some(idx);
        }
        match anc {
            Some(a) => {
                self.children[a].retain(|i| !moved.contains(i));
                self.children[a].push(idx);
                self.covered[a] += q_mass - moved_mass;
            }
            None => {
                self.roots.retain(|i| !moved.contains(i));
                self.roots.push(idx);
            }
        }
        Ok(true)
    }
}

/// Greedy subfamily construction: admit cubes in descending `scores` order
/// whenever admission keeps the subset 1/2-sparse against `carrier`. Yields
/// one maximal-by-inclusion subset per starting offset in the priority order,
/// a deterministic sequence.
pub fn greedy_sparse_subfamilies(
    family: &SparseFamily,
    carrier: &Carrier,
    scores: &[f64],
) -> Result<Vec<Vec<Cube>>> {
    if scores.len() != family.len() {
        return Err(Error::parameter("scores", "one score per family member"));
    }
    let mut order: Vec<usize> = (0..family.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let mut out = Vec::new();
    for start in 0..order.len() {
        let mut tracker = GeneralTracker::new(family.grid, carrier, 0.5);
        for &i in &order[start..] {
            tracker.try_add(family.cubes[i])?;
        }
        let mut picked = tracker.cubes.clone();
        picked.sort();
        out.push(picked);
    }
    Ok(out)
}
