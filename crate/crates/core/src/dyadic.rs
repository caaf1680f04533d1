//! The dyadic tree on `[0,1)`: cubes addressed by (level, index), step
//! functions constant on leaf cells, exact averages and integrals, and the
//! localized dyadic maximal operator.
//!
//! All sums of leaf values run through pairwise tree summation, so an average
//! over a cube equals the corresponding node of a bottom-up aggregation bit
//! for bit. That keeps every downstream constant reproducible.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Hard default cap on grid depth; 2^16 leaves is the largest tree we enumerate.
pub const MAX_DEPTH: u32 = 16;

/// The dyadic grid on `[0,1)` at depth `L`: leaves are the 2^L half-open
/// intervals of length 2^-L.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    depth: u32,
}

impl Grid {
    pub fn new(depth: u32) -> Result<Self> {
        Self::with_cap(depth, MAX_DEPTH)
    }

    /// [`Grid::new`] with a caller-chosen depth cap.
    pub fn with_cap(depth: u32, cap: u32) -> Result<Self> {
        if depth > cap {
            return Err(Error::parameter("depth", format!("depth <= {cap}, got {depth}")));
        }
        Ok(Grid { depth })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn leaf_count(&self) -> usize {
        1usize << self.depth
    }

    /// Lebesgue measure of one leaf, 2^-L (exact in binary).
    pub fn leaf_measure(&self) -> f64 {
        0.5f64.powi(self.depth as i32)
    }

    pub fn root(&self) -> Cube {
        Cube { level: 0, index: 0 }
    }

    pub fn contains(&self, cube: Cube) -> bool {
        cube.level <= self.depth && cube.index < (1usize << cube.level)
    }

    /// Every cube of every level, coarse to fine, index-ascending within a level.
    pub fn cubes(&self) -> impl Iterator<Item = Cube> + '_ {
        (0..=self.depth).flat_map(|level| {
            (0..(1usize << level)).map(move |index| Cube { level, index })
        })
    }

    pub fn cube_count(&self) -> usize {
        (1usize << (self.depth + 1)) - 1
    }

    pub(crate) fn check(&self, cube: Cube) -> Result<()> {
        if self.contains(cube) {
            Ok(())
        } else {
            Err(Error::CubeOutsideGrid { level: cube.level, index: cube.index, depth: self.depth })
        }
    }
}

/// A dyadic cube `[k 2^-l, (k+1) 2^-l)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cube {
    level: u32,
    index: usize,
}

impl Cube {
    pub fn new(level: u32, index: usize) -> Result<Self> {
        if index >= (1usize << level) {
            return Err(Error::parameter("index", format!("index < 2^{level}, got {index}")));
        }
        Ok(Cube { level, index })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Lebesgue measure 2^-l.
    pub fn measure(&self) -> f64 {
        0.5f64.powi(self.level as i32)
    }

    pub fn parent(&self) -> Option<Cube> {
        if self.level == 0 {
            None
        } else {
            Some(Cube { level: self.level - 1, index: self.index >> 1 })
        }
    }

    pub fn children(&self) -> [Cube; 2] {
        let l = self.level + 1;
        [Cube { level: l, index: self.index << 1 }, Cube { level: l, index: (self.index << 1) | 1 }]
    }

    /// Containment in the dyadic order: `self` contains `other`.
    pub fn contains(&self, other: Cube) -> bool {
        other.level >= self.level && (other.index >> (other.level - self.level)) == self.index
    }

    pub fn strictly_contains(&self, other: Cube) -> bool {
        other.level > self.level && self.contains(other)
    }

    /// Leaf indices covered by this cube on a depth-`L` grid.
    pub fn leaf_range(&self, grid: Grid) -> std::ops::Range<usize> {
        let shift = grid.depth - self.level;
        (self.index << shift)..((self.index + 1) << shift)
    }

    pub fn leaf_len(&self, grid: Grid) -> usize {
        1usize << (grid.depth - self.level)
    }

    pub fn left_endpoint(&self) -> f64 {
        self.index as f64 * self.measure()
    }
}

impl fmt::Debug for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q({},{})", self.level, self.index)
    }
}

/// A step function constant on the leaves of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFn {
    grid: Grid,
    values: Vec<f64>,
}

impl StepFn {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.leaf_count() {
            return Err(Error::parameter(
                "values",
                format!("expected {} leaf values, got {}", grid.leaf_count(), values.len()),
            ));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("step function values must be finite".into()));
        }
        Ok(StepFn { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        StepFn { grid, values: vec![value; grid.leaf_count()] }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize) -> f64) -> Self {
        StepFn { grid, values: (0..grid.leaf_count()).map(&mut f).collect() }
    }

    /// Indicator of a cube.
    pub fn indicator(grid: Grid, cube: Cube) -> Result<Self> {
        grid.check(cube)?;
        let mut values = vec![0.0; grid.leaf_count()];
        for i in cube.leaf_range(grid) {
            values[i] = 1.0;
        }
        Ok(StepFn { grid, values })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> StepFn {
        StepFn { grid: self.grid, values: self.values.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_with(&self, other: &StepFn, f: impl Fn(f64, f64) -> f64) -> Result<StepFn> {
        same_grid(self, other)?;
        let values =
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(StepFn { grid: self.grid, values })
    }

    pub fn powf(&self, e: f64) -> StepFn {
        self.map(|x| x.powf(e))
    }

    pub fn scale(&self, c: f64) -> StepFn {
        self.map(|x| c * x)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.values.iter().all(|&x| x > 0.0 && x.is_finite())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&x| x >= 0.0)
    }

    /// Text form: `depth L` on the first line, leaf values on the second.
    pub fn to_text(&self) -> String {
        let mut s = format!("depth {}\n", self.grid.depth);
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(&format!("{v}"));
        }
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<StepFn> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty step function file".into()))?;
        let depth = parse_depth_header(header)?;
        let grid = Grid::new(depth)?;
        let rest: Vec<&str> = lines.collect();
        let mut values = Vec::with_capacity(grid.leaf_count());
        for tok in rest.join(" ").split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Parse(format!("bad leaf value `{tok}`")))?;
            values.push(v);
        }
        StepFn::new(grid, values)
    }
}

pub(crate) fn parse_depth_header(header: &str) -> Result<u32> {
    let mut it = header.split_whitespace();
    match (it.next(), it.next(), it.next()) {
        (Some("depth"), Some(d), None) => {
            d.parse().map_err(|_| Error::Parse(format!("bad depth `{d}`")))
        }
        _ => Err(Error::Parse(format!("expected `depth L` header, got `{header}`"))),
    }
}

pub(crate) fn same_grid(a: &StepFn, b: &StepFn) -> Result<()> {
    if a.grid != b.grid {
        Err(Error::GridMismatch(a.grid.depth, b.grid.depth))
    } else {
        Ok(())
    }
}

/// Pairwise tree sum of a slice. For power-of-two lengths the bracketing is
/// exactly the bottom-up dyadic aggregation used by [`CubeSums`].
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Carrier measure for sparsity and integration: Lebesgue or a weight.
#[derive(Debug, Clone)]
pub enum Carrier {
    Lebesgue,
    Weight(Arc<StepFn>),
}

impl Carrier {
    pub fn weight(w: StepFn) -> Self {
        Carrier::Weight(Arc::new(w))
    }

    /// Measure of a cube under this carrier.
    pub fn measure(&self, grid: Grid, cube: Cube) -> Result<f64> {
        grid.check(cube)?;
        match self {
            Carrier::Lebesgue => Ok(cube.measure()),
            Carrier::Weight(w) => {
                if w.grid() != grid {
                    return Err(Error::GridMismatch(w.grid().depth, grid.depth));
                }
                Ok(pairwise_sum(&w.values()[cube.leaf_range(grid)]) * grid.leaf_measure())
            }
        }
    }
}

/// Plain average of `f` over a cube.
pub fn average(f: &StepFn, cube: Cube) -> Result<f64> {
    f.grid.check(cube)?;
    let slice = &f.values[cube.leaf_range(f.grid)];
    Ok(pairwise_sum(slice) / slice.len() as f64)
}

/// Weighted average `<f>_Q^w = int_Q f w / int_Q w`.
pub fn weighted_average(f: &StepFn, w: &StepFn, cube: Cube) -> Result<f64> {
    same_grid(f, w)?;
    f.grid.check(cube)?;
    let range = cube.leaf_range(f.grid);
    let num: Vec<f64> =
        f.values[range.clone()].iter().zip(&w.values[range.clone()]).map(|(&a, &b)| a * b).collect();
    let den = pairwise_sum(&w.values[range]);
    if den <= 0.0 {
        return Err(Error::DegenerateWeight(format!("weight mass over {cube:?} is {den}")));
    }
    Ok(pairwise_sum(&num) / den)
}

/// `int_Q f dmu` for Lebesgue or a weight carrier.
pub fn integrate(f: &StepFn, cube: Cube, carrier: &Carrier) -> Result<f64> {
    f.grid.check(cube)?;
    let range = cube.leaf_range(f.grid);
    match carrier {
        Carrier::Lebesgue => Ok(pairwise_sum(&f.values[range]) * f.grid.leaf_measure()),
        Carrier::Weight(w) => {
            same_grid(f, w)?;
            let prod: Vec<f64> =
                f.values[range.clone()].iter().zip(&w.values()[range]).map(|(&a, &b)| a * b).collect();
            Ok(pairwise_sum(&prod) * f.grid.leaf_measure())
        }
    }
}

/// `L^p` norm against a weight: `(int |f|^p w)^{1/p}`. `p` must be finite and >= 1.
pub fn lp_norm(f: &StepFn, w: &StepFn, p: f64) -> Result<f64> {
    same_grid(f, w)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::parameter("p", format!("1 <= p < inf, got {p}")));
    }
    let terms: Vec<f64> =
        f.values.iter().zip(&w.values).map(|(&a, &b)| a.abs().powf(p) * b).collect();
    Ok((pairwise_sum(&terms) * f.grid.leaf_measure()).powf(1.0 / p))
}

/// Localized dyadic maximal function `M(v 1_Q)(x) = max { <v>_{Q'} : x in Q' subseteq Q }`,
/// zero outside `Q`. `v` must be nonnegative.
pub fn dyadic_maximal(v: &StepFn, cube: Cube) -> Result<StepFn> {
    v.grid.check(cube)?;
    if !v.is_nonnegative() {
        return Err(Error::Domain("dyadic_maximal requires a nonnegative input".into()));
    }
    let sums = CubeSums::new(v);
    let mut out = vec![0.0; v.grid.leaf_count()];
    descend_max(&sums, v.grid, cube, f64::NEG_INFINITY, &mut |leaf, m| out[leaf] = m);
    StepFn::new(v.grid, out)
}

/// Walk the subtree of `cube`, tracking the running max of averages along the
/// root-to-leaf path; `emit` is called once per leaf.
fn descend_max(sums: &CubeSums, grid: Grid, cube: Cube, running: f64, emit: &mut impl FnMut(usize, f64)) {
    let m = running.max(sums.average(cube));
    if cube.level == grid.depth() {
        emit(cube.index, m);
    } else {
        let [a, b] = cube.children();
        descend_max(sums, grid, a, m, emit);
        descend_max(sums, grid, b, m, emit);
    }
}

/// Bottom-up per-cube leaf sums: `sum(Q)` is the pairwise tree sum of the
/// leaves under `Q`, for every cube at once.
#[derive(Debug, Clone)]
pub struct CubeSums {
    grid: Grid,
    // levels[l][k] = sum of leaf values under cube (l,k)
    levels: Vec<Vec<f64>>,
}

impl CubeSums {
    pub fn new(f: &StepFn) -> Self {
        let depth = f.grid.depth();
        let mut levels: Vec<Vec<f64>> = Vec::with_capacity(depth as usize + 1);
        levels.push(f.values.clone());
        for _ in 0..depth {
            let prev = levels.last().unwrap();
            let next: Vec<f64> =
                (0..prev.len() / 2).map(|k| prev[2 * k] + prev[2 * k + 1]).collect();
            levels.push(next);
        }
        levels.reverse();
        CubeSums { grid: f.grid, levels }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Sum of leaf values under the cube.
    pub fn sum(&self, cube: Cube) -> f64 {
        self.levels[cube.level as usize][cube.index]
    }

    /// `int_Q f` under Lebesgue measure.
    pub fn integral(&self, cube: Cube) -> f64 {
        self.sum(cube) * self.grid.leaf_measure()
    }

    /// Plain average over the cube.
    pub fn average(&self, cube: Cube) -> f64 {
        self.sum(cube) / cube.leaf_len(self.grid) as f64
    }
}
