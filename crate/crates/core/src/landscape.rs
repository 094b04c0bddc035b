//! Terminal-position landscapes over a grid of complex controls, with
//! level-curve extraction and branch-cut detection.

use crate::dynamics::{integrate_ivp, ControlParameter, IvpOptions};
use crate::error::{Error, Result};
use crate::model::PhysicalSystem;
use crate::saddles::CoordinateMode;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Rectangular grid of complex control values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.re_min, self.re_max, self.im_min, self.im_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.re_max <= self.re_min || self.im_max <= self.im_min {
            return Err(Error::InvalidInput(
                "grid bounds must be finite and increasing".into(),
            ));
        }
        if self.n_re < 2 || self.n_im < 2 {
            return Err(Error::InvalidInput(
                "grid needs at least 2 nodes per axis".into(),
            ));
        }
        if self.n_re.saturating_mul(self.n_im) > 25_000_000 {
            return Err(Error::InvalidInput("grid too large".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_re * self.n_im
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn d_re(&self) -> f64 {
        (self.re_max - self.re_min) / (self.n_re - 1) as f64
    }

    pub fn d_im(&self) -> f64 {
        (self.im_max - self.im_min) / (self.n_im - 1) as f64
    }

    /// Control value at node (i, j); i runs along the real axis.
    pub fn node(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(
            self.re_min + i as f64 * self.d_re(),
            self.im_min + j as f64 * self.d_im(),
        )
    }

    /// Row-major index: rows are constant imaginary part.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n_re + i
    }

    /// The same window at twice the resolution.
    pub fn refined(&self) -> Self {
        Self {
            n_re: 2 * self.n_re - 1,
            n_im: 2 * self.n_im - 1,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    Ok,
    PoleHit,
    StepUnderflow,
    Overflow,
    Failed,
}

impl NodeStatus {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::PoleHit => "pole_hit",
            Self::StepUnderflow => "step_underflow",
            Self::Overflow => "overflow",
            Self::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ok" => Self::Ok,
            "pole_hit" => Self::PoleHit,
            "step_underflow" => Self::StepUnderflow,
            "overflow" => Self::Overflow,
            "failed" => Self::Failed,
            _ => return None,
        })
    }

    fn from_error(e: &Error) -> Self {
        match e {
            Error::PoleHit { .. } | Error::PoleEvaluation(_) => Self::PoleHit,
            Error::StepUnderflow { .. } => Self::StepUnderflow,
            Error::Overflow(_) => Self::Overflow,
            _ => Self::Failed,
        }
    }
}

/// Values of a complex function of the control on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeGrid {
    pub spec: GridSpec,
    pub values: Vec<Complex64>,
    pub status: Vec<NodeStatus>,
}

impl LandscapeGrid {
    /// Evaluate `f` at every node in parallel; node order is row-major.
    pub fn build<F>(spec: GridSpec, f: F) -> Result<Self>
    where
        F: Fn(Complex64) -> Result<Complex64> + Sync,
    {
        spec.validate()?;
        let results: Vec<(Complex64, NodeStatus)> = (0..spec.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k % spec.n_re, k / spec.n_re);
                match f(spec.node(i, j)) {
                    Ok(v) if v.re.is_finite() && v.im.is_finite() => (v, NodeStatus::Ok),
                    Ok(_) => (Complex64::new(f64::NAN, f64::NAN), NodeStatus::Overflow),
                    Err(e) => (
                        Complex64::new(f64::NAN, f64::NAN),
                        NodeStatus::from_error(&e),
                    ),
                }
            })
            .collect();
        let (values, status) = results.into_iter().unzip();
        Ok(Self {
            spec,
            values,
            status,
        })
    }

    pub fn value(&self, i: usize, j: usize) -> Option<Complex64> {
        let k = self.spec.index(i, j);
        (self.status[k] == NodeStatus::Ok).then_some(self.values[k])
    }

    pub fn failures(&self) -> usize {
        self.status.iter().filter(|s| **s != NodeStatus::Ok).count()
    }
}

/// Terminal position x(1) (or sinh x(1)) over a grid of controls.
pub fn scan(
    sys: &PhysicalSystem,
    spec: &GridSpec,
    mode: CoordinateMode,
    sign: i8,
    ivp: &IvpOptions,
) -> Result<LandscapeGrid> {
    LandscapeGrid::build(*spec, |c| {
        let ctrl = ControlParameter::for_system(sys, c);
        integrate_ivp(sys, ctrl, sign, ivp).map(|p| mode.map(p.terminal()))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LevelSpec {
    /// Im(value) = 0
    ImZero,
    /// Re(value) = level
    ReLevel(f64),
}

impl LevelSpec {
    fn field(&self, v: Complex64) -> f64 {
        match *self {
            Self::ImZero => v.im,
            Self::ReLevel(c) => v.re - c,
        }
    }
}

/// A polyline of control values along one connected piece of a level set.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelCurve {
    pub level: LevelSpec,
    pub points: Vec<Complex64>,
}

/// Edge identifiers: horizontal edge from node (i, j) is 2k, vertical is 2k + 1.
fn h_edge(spec: &GridSpec, i: usize, j: usize) -> usize {
    2 * spec.index(i, j)
}

fn v_edge(spec: &GridSpec, i: usize, j: usize) -> usize {
    2 * spec.index(i, j) + 1
}

/// Marching-squares extraction of a level set. Cells touching failed nodes
/// or flagged branch-cut edges are skipped.
pub fn extract_level_curves(grid: &LandscapeGrid, level: LevelSpec) -> Result<Vec<LevelCurve>> {
    let spec = &grid.spec;
    let cut_edges = flagged_edges(grid, &CutOptions::default());
    let mut blocked = vec![false; 2 * spec.len()];
    for e in cut_edges {
        blocked[e.id] = true;
    }
    let f = |i: usize, j: usize| grid.value(i, j).map(|v| level.field(v));
    // segments as pairs of (edge id, point)
    let mut segments: Vec<[(usize, Complex64); 2]> = Vec::new();
    for j in 0..spec.n_im - 1 {
        for i in 0..spec.n_re - 1 {
            let (Some(a), Some(b), Some(c), Some(d)) =
                (f(i, j), f(i + 1, j), f(i + 1, j + 1), f(i, j + 1))
            else {
                continue;
            };
            let edges = [
                h_edge(spec, i, j),
                v_edge(spec, i + 1, j),
                h_edge(spec, i, j + 1),
                v_edge(spec, i, j),
            ];
            if edges.iter().any(|&e| blocked[e]) {
                continue;
            }
            let corners = [
                (spec.node(i, j), a),
                (spec.node(i + 1, j), b),
                (spec.node(i + 1, j + 1), c),
                (spec.node(i, j + 1), d),
            ];
            let mut hits: Vec<(usize, Complex64)> = Vec::with_capacity(4);
            for k in 0..4 {
                let (p, fp) = corners[k];
                let (q, fq) = corners[(k + 1) % 4];
                if (fp > 0.0) != (fq > 0.0) {
                    let t = fp / (fp - fq);
                    hits.push((edges[k], p + (q - p) * t));
                }
            }
            match hits.len() {
                2 => segments.push([hits[0], hits[1]]),
                4 => {
                    let centre = 0.25 * (a + b + c + d);
                    if (centre > 0.0) == (a > 0.0) {
                        segments.push([hits[0], hits[3]]);
                        segments.push([hits[1], hits[2]]);
                    } else {
                        segments.push([hits[0], hits[1]]);
                        segments.push([hits[2], hits[3]]);
                    }
                }
                _ => {}
            }
        }
    }
    if segments.is_empty() {
        return Err(Error::EmptyContour);
    }
    Ok(link_segments(&segments)
        .into_iter()
        .map(|points| LevelCurve { level, points })
        .collect())
}

fn link_segments(segments: &[[(usize, Complex64); 2]]) -> Vec<Vec<Complex64>> {
    use std::collections::BTreeMap;
    let mut by_edge: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, s) in segments.iter().enumerate() {
        by_edge.entry(s[0].0).or_default().push(k);
        by_edge.entry(s[1].0).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();
    // start from open ends first so open curves come out whole
    let mut order: Vec<usize> = (0..segments.len()).collect();
    order.sort_by_key(|&k| {
        let open = segments[k].iter().any(|(e, _)| by_edge[e].len() == 1);
        (!open, k)
    });
    for start in order {
        if used[start] {
            continue;
        }
        used[start] = true;
        let s = segments[start];
        let (first, last) = if by_edge[&s[1].0].len() == 1 {
            (s[1], s[0])
        } else {
            (s[0], s[1])
        };
        let mut pts = vec![first.1, last.1];
        let mut edge = last.0;
        loop {
            let next = by_edge[&edge].iter().copied().find(|&k| !used[k]);
            let Some(k) = next else { break };
            used[k] = true;
            let seg = segments[k];
            let (_, far) = if seg[0].0 == edge {
                (seg[0], seg[1])
            } else {
                (seg[1], seg[0])
            };
            pts.push(far.1);
            edge = far.0;
        }
        out.push(pts);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CutOptions {
    /// An edge is flagged when its jump exceeds kappa times the median jump
    /// of nearby parallel edges.
    pub kappa: f64,
    /// Chains with fewer flagged edges are discarded.
    pub min_edges: usize,
    /// Edges touching values larger than this are treated as poles, not cuts.
    pub divergence: f64,
    /// Edges touching a value this many times the local median magnitude are
    /// treated as pole spikes.
    pub spike_ratio: f64,
}

impl Default for CutOptions {
    fn default() -> Self {
        Self {
            kappa: 20.0,
            min_edges: 6,
            divergence: 1e3,
            spike_ratio: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct FlaggedEdge {
    id: usize,
    cells: [Option<(usize, usize)>; 2],
    midpoint: Complex64,
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v[v.len() / 2])
}

fn flagged_edges(grid: &LandscapeGrid, opts: &CutOptions) -> Vec<FlaggedEdge> {
    let spec = &grid.spec;
    let (nr, ni) = (spec.n_re, spec.n_im);
    let local_scale: Vec<f64> = (0..spec.len())
        .map(|k| {
            let (i, j) = ((k % nr) as i64, (k / nr) as i64);
            let mut m = Vec::with_capacity(25);
            for dj in -2..=2 {
                for di in -2..=2 {
                    let (ii, jj) = (i + di, j + dj);
                    if ii >= 0 && jj >= 0 && ii < nr as i64 && jj < ni as i64 {
                        if let Some(v) = grid.value(ii as usize, jj as usize) {
                            m.push(v.norm());
                        }
                    }
                }
            }
            median(&mut m).unwrap_or(0.0)
        })
        .collect();
    let usable = |v: Complex64, k: usize| {
        v.norm() <= opts.divergence && v.norm() <= opts.spike_ratio * local_scale[k].max(1.0)
    };
    // jump along each horizontal (dir 0) and vertical (dir 1) edge
    let jump = |dir: usize, i: usize, j: usize| -> Option<f64> {
        let (i2, j2) = if dir == 0 { (i + 1, j) } else { (i, j + 1) };
        if i2 >= nr || j2 >= ni {
            return None;
        }
        let (a, b) = (grid.value(i, j)?, grid.value(i2, j2)?);
        (usable(a, spec.index(i, j)) && usable(b, spec.index(i2, j2))).then(|| (b - a).norm())
    };
    let mut out = Vec::new();
    for dir in 0..2 {
        for j in 0..ni {
            for i in 0..nr {
                let Some(d) = jump(dir, i, j) else { continue };
                if d <= 1e-12 {
                    continue;
                }
                let mut near = Vec::with_capacity(24);
                for dj in -2i64..=2 {
                    for di in -2i64..=2 {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let (ii, jj) = (i as i64 + di, j as i64 + dj);
                        if ii < 0 || jj < 0 {
                            continue;
                        }
                        if let Some(x) = jump(dir, ii as usize, jj as usize) {
                            near.push(x);
                        }
                    }
                }
                let Some(med) = median(&mut near) else {
                    continue;
                };
                // a cut separates two smooth sides: the collinear edges on
                // either side must be small too
                let before = if dir == 0 {
                    i.checked_sub(1).and_then(|im| jump(0, im, j))
                } else {
                    j.checked_sub(1).and_then(|jm| jump(1, i, jm))
                };
                let after = if dir == 0 {
                    jump(0, i + 1, j)
                } else {
                    jump(1, i, j + 1)
                };
                let isolated = [before, after]
                    .iter()
                    .flatten()
                    .all(|&x| d > opts.kappa * x);
                if d > opts.kappa * med && isolated {
                    let (id, cells, mid) = if dir == 0 {
                        let cells = [
                            j.checked_sub(1).map(|jm| (i, jm)),
                            (j + 1 < ni).then_some((i, j)),
                        ];
                        (
                            h_edge(spec, i, j),
                            cells,
                            0.5 * (spec.node(i, j) + spec.node(i + 1, j)),
                        )
                    } else {
                        let cells = [
                            i.checked_sub(1).map(|im| (im, j)),
                            (i + 1 < nr).then_some((i, j)),
                        ];
                        (
                            v_edge(spec, i, j),
                            cells,
                            0.5 * (spec.node(i, j) + spec.node(i, j + 1)),
                        )
                    };
                    out.push(FlaggedEdge {
                        id,
                        cells,
                        midpoint: mid,
                    });
                }
            }
        }
    }
    out
}

/// A connected chain of flagged jumps: a branch cut crossing the window.
#[derive(Debug, Clone, PartialEq)]
pub struct CutChain {
    /// Midpoints of the flagged edges.
    pub points: Vec<Complex64>,
}

/// Chains of discontinuities in the landscape.
pub fn detect_branch_cuts(grid: &LandscapeGrid, opts: &CutOptions) -> Vec<CutChain> {
    let spec = &grid.spec;
    let edges = flagged_edges(grid, opts);
    let ncell = (spec.n_re - 1) * (spec.n_im - 1);
    let cell_id = |c: (usize, usize)| c.1 * (spec.n_re - 1) + c.0;
    let mut parent: Vec<usize> = (0..ncell).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for e in &edges {
        if let [Some(p), Some(q)] = e.cells {
            let (a, b) = (find(&mut parent, cell_id(p)), find(&mut parent, cell_id(q)));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<Complex64>> =
        std::collections::BTreeMap::new();
    for e in &edges {
        let Some(&c) = e.cells.iter().flatten().next() else {
            continue;
        };
        let root = find(&mut parent, cell_id(c));
        groups.entry(root).or_default().push(e.midpoint);
    }
    groups
        .into_values()
        .filter(|pts| pts.len() >= opts.min_edges)
        .map(|points| CutChain { points })
        .collect()
}

/// Number of isolated divergence sites: strict local maxima of |value|
/// (over the 8 neighbours) exceeding `ratio` times the median magnitude, plus
/// connected clusters of failed nodes.
pub fn divergence_sites(grid: &LandscapeGrid, ratio: f64) -> usize {
    let spec = &grid.spec;
    let (nr, ni) = (spec.n_re as i64, spec.n_im as i64);
    let mag: Vec<f64> = (0..spec.len())
        .map(|k| {
            if grid.status[k] == NodeStatus::Ok {
                grid.values[k].norm()
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let mut finite: Vec<f64> = mag.iter().copied().filter(|m| m.is_finite()).collect();
    let floor = ratio * median(&mut finite).unwrap_or(0.0);
    let neighbours = |k: usize| {
        let (i, j) = ((k % spec.n_re) as i64, (k / spec.n_re) as i64);
        (-1..=1)
            .flat_map(move |dj| (-1..=1).map(move |di| (i + di, j + dj)))
            .filter(move |&(ii, jj)| (ii, jj) != (i, j) && ii >= 0 && jj >= 0 && ii < nr && jj < ni)
            .map(|(ii, jj)| spec.index(ii as usize, jj as usize))
    };
    let peaks = (0..spec.len())
        .filter(|&k| mag[k].is_finite() && mag[k] > floor && neighbours(k).all(|q| mag[q] < mag[k]))
        .count();
    let mut seen = vec![false; spec.len()];
    let mut clusters = 0;
    for start in 0..spec.len() {
        if mag[start].is_finite() || seen[start] {
            continue;
        }
        clusters += 1;
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(k) = stack.pop() {
            for q in neighbours(k) {
                if !mag[q].is_finite() && !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
    }
    peaks + clusters
}

/// Integral of the derivative of the landscape function around a circle,
/// by the trapezoidal rule. Zero for a single-valued analytic function; the
/// jump across a cut otherwise.
pub fn loop_monodromy<F>(
    derivative: F,
    centre: Complex64,
    radius: f64,
    points: usize,
) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let n = points.max(8);
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let dz = Complex64::new(0.0, radius) * Complex64::from_polar(1.0, phi);
        sum += derivative(centre + Complex64::from_polar(radius, phi))? * dz;
    }
    Ok(sum * (2.0 * std::f64::consts::PI / n as f64))
}
