//! Principal cubes and their stopping-time forest, the packing inequality,
//! parallel stopping projections, and level-set slicing of a sparse family
//! by the localized `A_infty` constant.

use std::collections::{BTreeMap, BTreeSet};

use crate::characteristics::{ainf_exp_local, fujii_wilson_local, AinfFlavor};
use crate::dyadic::{pairwise_sum, Cube, CubeSums, Grid, StepFn};
use crate::error::{Error, Result};
use crate::gauge::{decay_integral, EntropyGauge};
use crate::par;
use crate::sparse::SparseFamily;

/// Stopping-time forest of principal cubes for a pair `(f, u)`: generation 0
/// holds the maximal members, and each deeper generation holds, per parent
/// `F`, the maximal members `Q` strictly inside `F` whose `u`-average of `f`
/// exceeds twice the parent's. Built over family members only.
#[derive(Debug, Clone)]
pub struct PrincipalForest {
    grid: Grid,
    generations: Vec<Vec<Cube>>,
    children: BTreeMap<Cube, Vec<Cube>>,
    parent: BTreeMap<Cube, Cube>,
    avg: BTreeMap<Cube, f64>,
    f: StepFn,
    u: StepFn,
}

impl PrincipalForest {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn generations(&self) -> &[Vec<Cube>] {
        &self.generations
    }

    /// All principal cubes, coarse generations first.
    pub fn cubes(&self) -> impl Iterator<Item = Cube> + '_ {
        self.generations.iter().flatten().copied()
    }

    pub fn len(&self) -> usize {
        self.generations.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.generations.is_empty()
    }

    /// Stopping children of a principal cube; empty for non-principal input.
    pub fn children_of(&self, f_cube: Cube) -> &[Cube] {
        self.children.get(&f_cube).map_or(&[], Vec::as_slice)
    }

    /// The stopping parent: the minimal principal cube containing `q`.
    /// `None` when `q` is not a member of the source family.
    pub fn projection(&self, q: Cube) -> Option<Cube> {
        self.parent.get(&q).copied()
    }

    /// `<f>^u_F` for a principal cube.
    pub fn average_at(&self, f_cube: Cube) -> Option<f64> {
        self.avg.get(&f_cube).copied()
    }

    /// Largest `u(union of stopping children) / u(F)` over principal cubes;
    /// strictly below 1/2 by the stopping-time construction.
    pub fn max_child_mass_ratio(&self) -> f64 {
        let u_sums = CubeSums::new(&self.u);
        let mut worst = 0.0f64;
        for (f_cube, kids) in &self.children {
            if kids.is_empty() {
                continue;
            }
            let kid_terms: Vec<f64> = kids.iter().map(|&k| u_sums.integral(k)).collect();
            let ratio = pairwise_sum(&kid_terms) / u_sums.integral(*f_cube);
            worst = worst.max(ratio);
        }
        worst
    }
}

/// Build the principal-cube forest of `(f, u)` over the members of `family`
/// with the doubling threshold 2.
pub fn principal_cubes(f: &StepFn, u: &StepFn, family: &SparseFamily) -> Result<PrincipalForest> {
    let grid = family.grid();
    if f.grid() != grid || u.grid() != grid {
        return Err(Error::GridMismatch(f.grid().depth(), grid.depth()));
    }
    if !f.is_nonnegative() {
        return Err(Error::Precondition("principal cubes need f >= 0".into()));
    }
    if !u.is_strictly_positive() {
        return Err(Error::DegenerateWeight("u must be strictly positive".into()));
    }

    let fu_sums = CubeSums::new(&f.zip_with(u, |a, b| a * b)?);
    let u_sums = CubeSums::new(u);
    let avg_of = |q: Cube| fu_sums.integral(q) / u_sums.integral(q);

    let members: Vec<Cube> = family.members().to_vec();
    let member_set: BTreeSet<Cube> = members.iter().copied().collect();
    let is_maximal = |q: Cube| {
        let mut cur = q;
        while let Some(p) = cur.parent() {
            if member_set.contains(&p) {
                return false;
            }
            cur = p;
        }
        true
    };

    let roots: Vec<Cube> = members.iter().copied().filter(|&q| is_maximal(q)).collect();
    let mut generations = vec![roots.clone()];
    let mut children: BTreeMap<Cube, Vec<Cube>> = BTreeMap::new();
    let mut avg: BTreeMap<Cube, f64> = roots.iter().map(|&q| (q, avg_of(q))).collect();

    let mut current = roots;
    // Strict inclusion drops the level each generation, so this terminates
    // within grid depth rounds.
    for _ in 0..=grid.depth() {
        let mut next = Vec::new();
        for &fc in &current {
            let bar = 2.0 * avg[&fc];
            let exceeds =
                |q: Cube| fc.contains(q) && q != fc && avg_of(q) > bar;
            let mut kids = Vec::new();
            for &q in &members {
                if !exceeds(q) {
                    continue;
                }
                // Keep only inclusion-maximal candidates.
                let mut shadowed = false;
                let mut cur = q;
                while let Some(p) = cur.parent() {
                    if p == fc {
                        break;
                    }
                    if member_set.contains(&p) && exceeds(p) {
                        shadowed = true;
                        break;
                    }
                    cur = p;
                }
                if !shadowed {
                    kids.push(q);
                }
            }
            for &k in &kids {
                avg.insert(k, avg_of(k));
            }
            next.extend_from_slice(&kids);
            children.insert(fc, kids);
        }
        if next.is_empty() {
            break;
        }
        generations.push(next.clone());
        current = next;
    }

    let principal: BTreeSet<Cube> = generations.iter().flatten().copied().collect();
    let mut parent = BTreeMap::new();
    for &q in &members {
        let mut cur = q;
        loop {
            if principal.contains(&cur) {
                parent.insert(q, cur);
                break;
            }
            match cur.parent() {
                Some(p) => cur = p,
                None => {
                    return Err(Error::Precondition(format!(
                        "member ({},{}) has no principal ancestor",
                        q.level(),
                        q.index()
                    )))
                }
            }
        }
    }

    Ok(PrincipalForest {
        grid,
        generations,
        children,
        parent,
        avg,
        f: f.clone(),
        u: u.clone(),
    })
}

/// `sum_F (<f>^u_F)^p u(F) / ||f||_{L^p(u)}^p` over the principal cubes.
/// Bounded by `2 (p')^p`: the stopping sets carry at least half the mass of
/// their cube and the weighted dyadic maximal operator has `L^p(u)` norm at
/// most `p'`.
pub fn packing_check(forest: &PrincipalForest, p: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::parameter("p", format!("1 < p < inf, got {p}")));
    }
    let u_sums = CubeSums::new(&forest.u);
    let fu = forest.f.zip_with(&forest.u, |a, b| a.powf(p) * b)?;
    let norm_p = CubeSums::new(&fu).integral(forest.grid.root());
    if norm_p == 0.0 {
        return Err(Error::Domain("packing ratio needs f not identically zero".into()));
    }
    let terms: Vec<f64> = forest
        .cubes()
        .map(|fc| forest.avg[&fc].powf(p) * u_sums.integral(fc))
        .collect();
    Ok(pairwise_sum(&terms) / norm_p)
}

/// Partition of the family members by stopping pair: `Q` lands in the block
/// `(F, G)` with `F` its principal parent in `forest_f` and `G` in
/// `forest_g`. Blocks are disjoint and cover the family.
pub fn parallel_projection(
    family: &SparseFamily,
    forest_f: &PrincipalForest,
    forest_g: &PrincipalForest,
) -> Result<BTreeMap<(Cube, Cube), Vec<Cube>>> {
    let mut blocks: BTreeMap<(Cube, Cube), Vec<Cube>> = BTreeMap::new();
    for &q in family.members() {
        let (pf, pg) = match (forest_f.projection(q), forest_g.projection(q)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::Precondition(format!(
                    "member ({},{}) is missing from a forest; both forests \
                     must be built over this family",
                    q.level(),
                    q.index()
                )))
            }
        };
        blocks.entry((pf, pg)).or_default().push(q);
    }
    Ok(blocks)
}

/// Partition of the family by dyadic bands of the localized `A_infty`
/// constant: band `a` holds the members with `2^a <= A_infty(v, Q) < 2^(a+1)`.
/// Localized constants are at least 1, so `a >= 0`.
pub fn slice_by_ainf(
    family: &SparseFamily,
    v: &StepFn,
    flavor: AinfFlavor,
) -> Result<BTreeMap<u32, Vec<Cube>>> {
    if v.grid() != family.grid() {
        return Err(Error::GridMismatch(v.grid().depth(), family.grid().depth()));
    }
    let vals = par::map_collect(family.members(), |&q| match flavor {
        AinfFlavor::FujiiWilson => fujii_wilson_local(v, q),
        AinfFlavor::Exponential => ainf_exp_local(v, q),
    });
    let mut bands: BTreeMap<u32, Vec<Cube>> = BTreeMap::new();
    for (&q, val) in family.members().iter().zip(vals) {
        // The constants are >= 1 up to rounding; clamp before taking logs.
        let a = val?.max(1.0).log2().floor() as u32;
        bands.entry(a).or_default().push(q);
    }
    Ok(bands)
}

/// Compare the band decay sum against its integral majorant: returns
/// `(sum over occupied bands of 1/phi(2^a)^power, (1/ln 2) int_{1/2}^inf
/// dt/(t phi(t)^power))`. Since `phi` is nondecreasing, each band term is at
/// most `1/ln 2` times the integral over `[2^(a-1), 2^a]`, so the first
/// component never exceeds the second; the second is `inf` when the integral
/// diverges.
pub fn band_decay_sum(
    bands: &BTreeMap<u32, Vec<Cube>>,
    gauge: &EntropyGauge,
    power: f64,
) -> Result<(f64, f64)> {
    let terms: Vec<f64> = bands
        .iter()
        .filter(|(_, qs)| !qs.is_empty())
        .map(|(&a, _)| 1.0 / gauge.eval(2.0f64.powi(a as i32)).powf(power))
        .collect();
    let discrete = pairwise_sum(&terms);
    let integral = decay_integral(gauge, power)?;
    let bound =
        if integral.diverges { f64::INFINITY } else { integral.value / std::f64::consts::LN_2 };
    Ok((discrete, bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::Carrier;
    use crate::sparse::random_sparse_family;

    fn grid(depth: u32) -> Grid {
        Grid::new(depth).unwrap()
    }

    fn cube(l: u32, k: usize) -> Cube {
        Cube::new(l, k).unwrap()
    }

    fn family(g: Grid, cubes: &[(u32, usize)]) -> SparseFamily {
        let cubes = cubes.iter().map(|&(l, k)| cube(l, k)).collect();
        SparseFamily::verified(g, cubes, Carrier::Lebesgue, 0.5).unwrap()
    }

    #[test]
    fn constant_f_stops_at_maximal_cubes() {
        let g = grid(2);
        let fam = family(g, &[(0, 0), (1, 0), (2, 0)]);
        let one = StepFn::constant(g, 1.0);
        let forest = principal_cubes(&one, &one, &fam).unwrap();
        assert_eq!(forest.generations().len(), 1);
        assert_eq!(forest.generations()[0], vec![cube(0, 0)]);
        for &q in fam.members() {
            assert_eq!(forest.projection(q), Some(cube(0, 0)));
        }
        assert_eq!(forest.max_child_mass_ratio(), 0.0);
    }

    #[test]
    fn spike_produces_one_child_generation() {
        // f = (9,1,1,1): root average 3, left-half average 5 (no stop),
        // first quarter average 9 > 6 (stop).
        let g = grid(2);
        let fam = family(g, &[(0, 0), (1, 0), (2, 0)]);
        let one = StepFn::constant(g, 1.0);
        let f = StepFn::new(g, vec![9.0, 1.0, 1.0, 1.0]).unwrap();
        let forest = principal_cubes(&f, &one, &fam).unwrap();
        assert_eq!(forest.generations().len(), 2);
        assert_eq!(forest.generations()[1], vec![cube(2, 0)]);
        assert_eq!(forest.children_of(cube(0, 0)), &[cube(2, 0)]);
        assert_eq!(forest.projection(cube(1, 0)), Some(cube(0, 0)));
        assert_eq!(forest.projection(cube(2, 0)), Some(cube(2, 0)));
        assert!((forest.average_at(cube(0, 0)).unwrap() - 3.0).abs() <= 1e-14);
        assert!((forest.average_at(cube(2, 0)).unwrap() - 9.0).abs() <= 1e-14);
        assert!((forest.max_child_mass_ratio() - 0.25).abs() <= 1e-14);
    }

    #[test]
    fn projection_is_monotone_in_inclusion() {
        let g = grid(4);
        let fam = random_sparse_family(g, Carrier::Lebesgue, 0.5, 0.9, 31).unwrap();
        let u = StepFn::from_fn(g, |i| 1.0 + 0.25 * ((i * 3) % 5) as f64);
        let f = StepFn::from_fn(g, |i| ((i * 7) % 11) as f64);
        let forest = principal_cubes(&f, &u, &fam).unwrap();
        for &a in fam.members() {
            for &b in fam.members() {
                if a.contains(b) {
                    let pa = forest.projection(a).unwrap();
                    let pb = forest.projection(b).unwrap();
                    assert!(pa.contains(pb), "projection must preserve inclusion");
                }
            }
        }
    }

    #[test]
    fn stopping_children_carry_at_most_half_the_mass() {
        for seed in [1u64, 7, 23] {
            let g = grid(4);
            let fam = random_sparse_family(g, Carrier::Lebesgue, 0.5, 0.9, seed).unwrap();
            let u = StepFn::from_fn(g, |i| 1.0 + 0.5 * ((i * 5) % 7) as f64);
            let f = StepFn::from_fn(g, |i| (0.2 + ((i * 11) % 13) as f64).powi(2));
            let forest = principal_cubes(&f, &u, &fam).unwrap();
            assert!(forest.max_child_mass_ratio() <= 0.5, "seed {seed}");
        }
    }

    #[test]
    fn packing_trivial_instance_is_exactly_one() {
        let g = grid(1);
        let fam = family(g, &[(0, 0)]);
        let one = StepFn::constant(g, 1.0);
        let forest = principal_cubes(&one, &one, &fam).unwrap();
        let r = packing_check(&forest, 2.0).unwrap();
        assert!((r - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn packing_bounded_and_scale_invariant() {
        let g = grid(4);
        let fam = random_sparse_family(g, Carrier::Lebesgue, 0.5, 0.9, 13).unwrap();
        let u = StepFn::from_fn(g, |i| 1.0 + 0.3 * ((i * 3) % 5) as f64);
        let f = StepFn::from_fn(g, |i| 0.1 + ((i * 7) % 9) as f64);
        for p in [1.5, 2.0, 3.0] {
            let conj = p / (p - 1.0);
            let forest = principal_cubes(&f, &u, &fam).unwrap();
            let r = packing_check(&forest, p).unwrap();
            assert!(r <= 2.0 * conj.powf(p), "p {p} ratio {r}");
            let scaled = principal_cubes(&f.scale(4.0), &u, &fam).unwrap();
            let rs = packing_check(&scaled, p).unwrap();
            assert!((r - rs).abs() <= 1e-12 * r, "p {p}: {r} vs {rs}");
        }
        assert!(matches!(packing_check(&principal_cubes(&f, &u, &fam).unwrap(), 1.0),
            Err(Error::Parameter { .. })));
    }

    #[test]
    fn parallel_projection_partitions_the_family() {
        let g = grid(4);
        let fam = random_sparse_family(g, Carrier::Lebesgue, 0.5, 0.9, 41).unwrap();
        let one = StepFn::constant(g, 1.0);
        let f = StepFn::from_fn(g, |i| 0.5 + ((i * 3) % 7) as f64);
        let h = StepFn::from_fn(g, |i| 0.5 + ((i * 5) % 4) as f64);
        let ff = principal_cubes(&f, &one, &fam).unwrap();
        let fg = principal_cubes(&h, &one, &fam).unwrap();
        let blocks = parallel_projection(&fam, &ff, &fg).unwrap();
        let mut seen = BTreeSet::new();
        for ((pf, pg), qs) in &blocks {
            for &q in qs {
                assert!(pf.contains(q) && pg.contains(q));
                assert!(seen.insert(q), "blocks must be disjoint");
            }
        }
        assert_eq!(seen.len(), fam.len(), "blocks must cover the family");
    }

    #[test]
    fn constant_pair_gives_single_block() {
        let g = grid(2);
        let fam = family(g, &[(0, 0), (1, 0), (2, 0)]);
        let one = StepFn::constant(g, 1.0);
        let forest = principal_cubes(&one, &one, &fam).unwrap();
        let blocks = parallel_projection(&fam, &forest, &forest).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[&(cube(0, 0), cube(0, 0))].len(), 3);
    }

    #[test]
    fn unit_weight_lands_in_band_zero() {
        let g = grid(2);
        let fam = family(g, &[(0, 0), (2, 0), (2, 2)]);
        let one = StepFn::constant(g, 1.0);
        for flavor in [AinfFlavor::FujiiWilson, AinfFlavor::Exponential] {
            let bands = slice_by_ainf(&fam, &one, flavor).unwrap();
            assert_eq!(bands.len(), 1);
            assert_eq!(bands[&0].len(), fam.len());
        }
    }

    #[test]
    fn oscillating_weight_fills_higher_bands_and_partitions() {
        // v = (8, 1/8): the root's exponential constant is the plain average
        // 4.0625 (geometric mean 1), i.e. band 2; the leaf constant is 1.
        let g = grid(1);
        let fam = family(g, &[(0, 0), (1, 0)]);
        let v = StepFn::new(g, vec![8.0, 0.125]).unwrap();
        let bands = slice_by_ainf(&fam, &v, AinfFlavor::Exponential).unwrap();
        assert_eq!(bands[&2], vec![cube(0, 0)]);
        assert_eq!(bands[&0], vec![cube(1, 0)]);
        let total: usize = bands.values().map(Vec::len).sum();
        assert_eq!(total, fam.len());
    }

    #[test]
    fn band_decay_sum_respects_integral_bound() {
        let g = grid(1);
        let fam = family(g, &[(0, 0), (1, 0)]);
        let v = StepFn::new(g, vec![8.0, 0.125]).unwrap();
        let bands = slice_by_ainf(&fam, &v, AinfFlavor::Exponential).unwrap();
        let gauge = EntropyGauge::log_power(1.5).unwrap();
        let (lhs, rhs) = band_decay_sum(&bands, &gauge, 1.0).unwrap();
        assert!(lhs > 0.0 && lhs <= rhs, "lhs {lhs} rhs {rhs}");
        let power_gauge = EntropyGauge::power(1.0).unwrap();
        let (l2, r2) = band_decay_sum(&bands, &power_gauge, 2.0).unwrap();
        assert!(l2 <= r2);
        let flat = EntropyGauge::constant(1.0).unwrap();
        let (_, r3) = band_decay_sum(&bands, &flat, 1.0).unwrap();
        assert!(r3.is_infinite());
    }
}
