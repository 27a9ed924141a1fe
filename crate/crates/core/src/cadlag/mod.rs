//! Cadlag step functions on [0,1], their completed graphs, and the exact
//! M2 (graph-Hausdorff under the l-infinity point metric) and uniform
//! distances, plus a sampled-net Hausdorff oracle.

mod hausdorff;

use std::io::{self, BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("jump times must be strictly increasing, offender at position {0}")]
    NonIncreasingTimes(usize),
    #[error("jump time {0} outside (0, 1]")]
    TimeOutOfRange(f64),
    #[error("non-finite value in step function")]
    NonFinite,
    #[error("partial sum path needs at least one increment")]
    EmptySeries,
    #[error("scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("sampled Hausdorff spacing must be positive, got {0}")]
    NonPositiveSpacing(f64),
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Right-continuous step function on [0,1] with left limits. `values[k]`
/// holds on [t_k, t_{k+1}) with t_0 = 0; the last value holds up to and
/// including t = 1. Zero-height jumps are merged at construction and
/// coincident jump times rejected, so every stored jump is a real jump.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    jump_times: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    /// Builds from the value at 0 and (time, new value) pairs in time order.
    pub fn new(initial: f64, jumps: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, PathError> {
        if !initial.is_finite() {
            return Err(PathError::NonFinite);
        }
        let mut jump_times = Vec::new();
        let mut values = vec![initial];
        for (k, (t, v)) in jumps.into_iter().enumerate() {
            if !(t > 0.0 && t <= 1.0) {
                return Err(PathError::TimeOutOfRange(t));
            }
            if !v.is_finite() {
                return Err(PathError::NonFinite);
            }
            if let Some(&prev) = jump_times.last() {
                if t <= prev {
                    return Err(PathError::NonIncreasingTimes(k));
                }
            }
            let current = *values.last().expect("nonempty");
            if v == current {
                continue; // zero-height jump: merged away
            }
            jump_times.push(t);
            values.push(v);
        }
        Ok(StepFunction { jump_times, values })
    }

    pub fn constant(c: f64) -> Self {
        StepFunction::new(c, []).expect("constant is valid")
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn initial_value(&self) -> f64 {
        self.values[0]
    }

    pub fn terminal_value(&self) -> f64 {
        *self.values.last().expect("nonempty")
    }

    /// x(t) for t in [0, 1].
    pub fn value(&self, t: f64) -> f64 {
        assert!((0.0..=1.0).contains(&t), "evaluation time {t} outside [0,1]");
        let idx = self.jump_times.partition_point(|&jt| jt <= t);
        self.values[idx]
    }

    /// x(t-) for t in (0, 1]; x(0-) is defined as x(0).
    pub fn left_limit(&self, t: f64) -> f64 {
        assert!((0.0..=1.0).contains(&t), "evaluation time {t} outside [0,1]");
        let idx = self.jump_times.partition_point(|&jt| jt < t);
        self.values[idx]
    }

    /// Plateau decomposition: bounds of length values)+1 tiling [0,1].
    /// A jump at t = 1 yields a degenerate final plateau [1,1].
    pub(crate) fn plateau_bounds(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.values.len() + 1);
        b.push(0.0);
        b.extend_from_slice(&self.jump_times);
        b.push(1.0);
        b
    }

    /// Writes breakpoint rows `t,value` with exact round-trip formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,value")?;
        writeln!(w, "0,{}", self.values[0])?;
        for (t, v) in self.jump_times.iter().zip(&self.values[1..]) {
            writeln!(w, "{t},{v}")?;
        }
        Ok(())
    }

    /// Reads the format produced by `write_csv`.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, PathError> {
        let mut lines = r.lines().enumerate();
        let header = match lines.next() {
            Some((_, Ok(h))) => h,
            _ => return Err(PathError::Csv { line: 1, msg: "missing header".into() }),
        };
        if header.trim() != "t,value" {
            return Err(PathError::Csv { line: 1, msg: format!("expected header `t,value`, got `{header}`") });
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| PathError::Csv { line: i + 1, msg: e.to_string() })?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(2, ',');
            let t_raw = parts.next().unwrap_or("");
            let v_raw = parts.next().ok_or_else(|| PathError::Csv { line: i + 1, msg: "expected `t,value`".into() })?;
            let t: f64 = t_raw.trim().parse().map_err(|_| PathError::Csv { line: i + 1, msg: format!("bad time `{t_raw}`") })?;
            let v: f64 = v_raw.trim().parse().map_err(|_| PathError::Csv { line: i + 1, msg: format!("bad value `{v_raw}`") })?;
            rows.push((i + 1, t, v));
        }
        let Some(&(first_line, t0, v0)) = rows.first() else {
            return Err(PathError::Csv { line: 2, msg: "no breakpoint rows".into() });
        };
        if t0 != 0.0 {
            return Err(PathError::Csv { line: first_line, msg: format!("first breakpoint must be at t = 0, got {t0}") });
        }
        StepFunction::new(v0, rows[1..].iter().map(|&(_, t, v)| (t, v)))
    }
}

/// One axis-aligned piece of a completed graph, ordered along the path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: (f64, f64),
    pub end: (f64, f64),
}

impl Segment {
    pub fn is_horizontal(&self) -> bool {
        self.start.1 == self.end.1
    }
}

/// Completed graph of a step function: the connected chain of horizontal
/// plateau segments and vertical jump segments from (0, x(0)) to (1, x(1)).
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedGraph {
    segments: Vec<Segment>,
}

impl CompletedGraph {
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }
}

/// Scaled, drifted partial-sum path: x(t) = (sum_{i <= floor(nt)} y_i
/// - floor(nt) * drift) / scale, jumping at i/n.
pub fn partial_sum_path(y: &[f64], scale: f64, drift: f64) -> Result<StepFunction, PathError> {
    if y.is_empty() {
        return Err(PathError::EmptySeries);
    }
    if !(scale > 0.0) {
        return Err(PathError::NonPositiveScale(scale));
    }
    let n = y.len();
    let mut running = 0.0f64;
    let mut jumps = Vec::with_capacity(n);
    for (i, &inc) in y.iter().enumerate() {
        running += inc;
        let k = (i + 1) as f64;
        jumps.push((k / n as f64, (running - k * drift) / scale));
    }
    StepFunction::new(0.0, jumps)
}

/// There is no vertical segment at t = 0 (x(0-) := x(0)); a jump at t = 1
/// contributes the final vertical segment ending at (1, x(1)).
pub fn completed_graph(x: &StepFunction) -> CompletedGraph {
    let mut segments = Vec::with_capacity(2 * x.jump_times.len() + 1);
    let mut cursor = (0.0f64, x.values[0]);
    for (k, &t) in x.jump_times.iter().enumerate() {
        if t > cursor.0 {
            let end = (t, cursor.1);
            segments.push(Segment { start: cursor, end });
            cursor = end;
        }
        let end = (t, x.values[k + 1]);
        segments.push(Segment { start: cursor, end });
        cursor = end;
    }
    if cursor.0 < 1.0 {
        segments.push(Segment { start: cursor, end: (1.0, cursor.1) });
    }
    CompletedGraph { segments }
}

/// Exact Hausdorff distance between the completed graphs under
/// d((t1,z1),(t2,z2)) = max(|t1-t2|, |z1-z2|). Exact up to floating-point
/// rounding for any step-function inputs.
pub fn m2_distance(x1: &StepFunction, x2: &StepFunction) -> f64 {
    hausdorff::m2_exact(x1, x2)
}

/// sup_t |x1(t) - x2(t)|, evaluated exactly over the merged breakpoints.
pub fn uniform_distance(x1: &StepFunction, x2: &StepFunction) -> f64 {
    let mut best = (x1.values[0] - x2.values[0]).abs();
    let (t1, t2) = (&x1.jump_times, &x2.jump_times);
    let (mut i, mut j) = (0usize, 0usize);
    while i < t1.len() || j < t2.len() {
        // Advance past the next merged breakpoint; ties advance both.
        if j >= t2.len() || (i < t1.len() && t1[i] <= t2[j]) {
            if j < t2.len() && t2[j] == t1[i] {
                j += 1;
            }
            i += 1;
        } else {
            j += 1;
        }
        let d = (x1.values[i] - x2.values[j]).abs();
        if d > best {
            best = d;
        }
    }
    best
}

/// Hausdorff distance estimated from finite nets placed along every
/// completed-graph segment at l-infinity spacing <= h, each net measured
/// against the other graph exactly. A net underestimates its side by at most
/// h/2 (every graph point lies within h/2 of the net, and distance to the
/// other graph is 1-Lipschitz), so exact - h/2 <= result <= exact.
pub fn sampled_hausdorff(x1: &StepFunction, x2: &StepFunction, h: f64) -> Result<f64, PathError> {
    if !(h > 0.0) {
        return Err(PathError::NonPositiveSpacing(h));
    }
    let (ga, gb) = (completed_graph(x1), completed_graph(x2));
    let a = net_points(&ga, h);
    let b = net_points(&gb, h);
    Ok(directed_net(&a, &gb).max(directed_net(&b, &ga)))
}

/// Max over the completed graph of the spatial coordinate, which is the max
/// over stored values.
pub fn sup_functional(x: &StepFunction) -> f64 {
    x.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn net_points(g: &CompletedGraph, h: f64) -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    for s in g.segments() {
        let len = (s.end.0 - s.start.0).abs().max((s.end.1 - s.start.1).abs());
        let pieces = (len / h).ceil().max(1.0) as usize;
        for k in 0..=pieces {
            let lambda = k as f64 / pieces as f64;
            pts.push((
                s.start.0 + lambda * (s.end.0 - s.start.0),
                s.start.1 + lambda * (s.end.1 - s.start.1),
            ));
        }
    }
    pts
}

fn directed_net(src: &[(f64, f64)], tgt: &CompletedGraph) -> f64 {
    let mut worst = 0.0f64;
    for &(t, z) in src {
        let mut best = f64::INFINITY;
        for s in tgt.segments() {
            // Axis-aligned segments coincide with their bounding box, so the
            // l-infinity distance is the larger of the per-axis interval gaps.
            let (x0, x1) = ordered(s.start.0, s.end.0);
            let (y0, y1) = ordered(s.start.1, s.end.1);
            let gap_t = (x0 - t).max(t - x1).max(0.0);
            let gap_z = (y0 - z).max(z - y1).max(0.0);
            best = best.min(gap_t.max(gap_z));
        }
        if best > worst {
            worst = best;
        }
    }
    worst
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a <= b { (a, b) } else { (b, a) }
}
