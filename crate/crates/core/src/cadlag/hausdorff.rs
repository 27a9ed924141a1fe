//! Exact graph-Hausdorff (M2) engines.
//!
//! Small inputs use candidate enumeration: along each source segment the
//! distance-to-target envelope is a pointwise min of "valley" functions
//! max(c, dist(x, [a,b])), whose maximum over the segment sits at a segment
//! endpoint, a valley kink, or a crossing of two active valley pieces. All
//! such points are enumerated with O(1) upper bounds so full envelope
//! evaluations stay rare.
//!
//! Large inputs use a decision procedure: the directed excess above rho
//! reduces to existence of a time t where one graph's upper plateau value
//! exceeds a rolling max of the other graph's plateau values over the window
//! [t-rho, t+rho] by more than rho. Each direction and sign is a linear
//! monotone-deque sweep; a bisection over the f64 bit lattice then pins the
//! distance to one ulp.

use std::collections::VecDeque;

use super::{completed_graph, uniform_distance, CompletedGraph, StepFunction};

const ENUM_JUMP_LIMIT: usize = 127;

pub(super) fn m2_exact(x1: &StepFunction, x2: &StepFunction) -> f64 {
    if x1.jump_times().len() <= ENUM_JUMP_LIMIT && x2.jump_times().len() <= ENUM_JUMP_LIMIT {
        enumerated(x1, x2)
    } else {
        bisected(x1, x2)
    }
}

#[derive(Debug, Clone, Copy)]
enum SegGeom {
    Horizontal { t0: f64, t1: f64, z: f64 },
    Vertical { t: f64, zlo: f64, zhi: f64 },
}

use SegGeom::{Horizontal, Vertical};

impl SegGeom {
    fn endpoints(&self) -> [(f64, f64); 2] {
        match *self {
            Horizontal { t0, t1, z } => [(t0, z), (t1, z)],
            Vertical { t, zlo, zhi } => [(t, zlo), (t, zhi)],
        }
    }

    fn param_range(&self) -> (f64, f64) {
        match *self {
            Horizontal { t0, t1, .. } => (t0, t1),
            Vertical { zlo, zhi, .. } => (zlo, zhi),
        }
    }
}

fn geoms(g: &CompletedGraph) -> Vec<SegGeom> {
    g.segments()
        .iter()
        .map(|s| {
            if s.is_horizontal() {
                Horizontal { t0: s.start.0, t1: s.end.0, z: s.start.1 }
            } else {
                Vertical { t: s.start.0, zlo: s.start.1.min(s.end.1), zhi: s.start.1.max(s.end.1) }
            }
        })
        .collect()
}

fn int_dist(x: f64, lo: f64, hi: f64) -> f64 {
    (lo - x).max(x - hi).max(0.0)
}

fn dist_to_graph(t: f64, z: f64, segs: &[SegGeom]) -> f64 {
    let mut best = f64::INFINITY;
    for s in segs {
        let d = match *s {
            Horizontal { t0, t1, z: w } => int_dist(t, t0, t1).max((z - w).abs()),
            Vertical { t: u, zlo, zhi } => (t - u).abs().max(int_dist(z, zlo, zhi)),
        };
        if d < best {
            best = d;
            if best == 0.0 {
                break;
            }
        }
    }
    best
}

/// Distance from the point of `seg` at parameter x to `tgt`, as a function
/// of x: max(c, dist(x, [a, b])).
#[derive(Debug, Clone, Copy)]
struct Valley {
    a: f64,
    b: f64,
    c: f64,
}

fn valley(seg: &SegGeom, tgt: &SegGeom) -> Valley {
    match (*seg, *tgt) {
        (Horizontal { z, .. }, Horizontal { t0, t1, z: w }) => Valley { a: t0, b: t1, c: (z - w).abs() },
        (Horizontal { z, .. }, Vertical { t: u, zlo, zhi }) => Valley { a: u, b: u, c: int_dist(z, zlo, zhi) },
        (Vertical { t, .. }, Horizontal { t0, t1, z: w }) => Valley { a: w, b: w, c: int_dist(t, t0, t1) },
        (Vertical { t, .. }, Vertical { t: u, zlo, zhi }) => Valley { a: zlo, b: zhi, c: (t - u).abs() },
    }
}

fn env_eval(x: f64, valleys: &[Valley]) -> f64 {
    let mut best = f64::INFINITY;
    for v in valleys {
        let f = v.c.max(int_dist(x, v.a, v.b));
        if f < best {
            best = f;
            if best == 0.0 {
                break;
            }
        }
    }
    best
}

fn directed_enumerated(src: &[SegGeom], tgt: &[SegGeom]) -> f64 {
    let mut best = 0.0_f64;
    for s in src {
        for (t, z) in s.endpoints() {
            let d = dist_to_graph(t, z, tgt);
            if d > best {
                best = d;
            }
        }
    }
    let mut valleys: Vec<Valley> = Vec::with_capacity(tgt.len());
    for s in src {
        let (xlo, xhi) = s.param_range();
        valleys.clear();
        valleys.extend(tgt.iter().map(|g| valley(s, g)));
        for v in &valleys {
            // env <= this valley everywhere, and it equals c at its kinks
            if v.c > best {
                for x in [v.a - v.c, v.a, v.b, v.b + v.c] {
                    if x > xlo && x < xhi {
                        let d = env_eval(x, &valleys);
                        if d > best {
                            best = d;
                        }
                    }
                }
            }
        }
        for i in 0..valleys.len() {
            let Valley { a: ai, b: bi, c: ci } = valleys[i];
            for j in 0..valleys.len() {
                if i == j {
                    continue;
                }
                let Valley { a: aj, b: bj, c: cj } = valleys[j];
                // rising flank of i meets falling flank of j
                let xm = 0.5 * (bi + aj);
                let vr = xm - bi;
                let vf = aj - xm;
                let bound = vr.min(vf);
                if bound > best && vr >= ci && vf >= cj && xm > xlo && xm < xhi {
                    let d = env_eval(xm, &valleys);
                    if d > best {
                        best = d;
                    }
                }
                // either flank of i meets the floor of j at height cj
                if cj > best && cj >= ci {
                    for x in [bi + cj, ai - cj] {
                        if x > xlo && x < xhi && x >= aj - cj && x <= bj + cj {
                            let d = env_eval(x, &valleys);
                            if d > best {
                                best = d;
                            }
                        }
                    }
                }
            }
        }
    }
    best
}

pub(super) fn enumerated(x1: &StepFunction, x2: &StepFunction) -> f64 {
    let a = geoms(&completed_graph(x1));
    let b = geoms(&completed_graph(x2));
    directed_enumerated(&a, &b).max(directed_enumerated(&b, &a))
}

/// True iff some source plateau value exceeds the rolling max of target
/// plateau values over [t - rho, t + rho] by more than rho, for some t in
/// the source plateau's closed span. Plateau j of the target is in the
/// window exactly for t in [tb[j] - rho, tb[j+1] + rho]; the rolling max
/// only drops just after an exit position, so sampling span starts and
/// just-after-exit points inside each span is exhaustive.
fn gap_exceeds(sb: &[f64], sv: &[f64], tb: &[f64], tv: &[f64], rho: f64) -> bool {
    let m = tv.len();
    let tgt_min = tv.iter().copied().fold(f64::INFINITY, f64::min);
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut next_admit = 0usize;
    let mut exit_ptr = 0usize;
    for k in 0..sv.len() {
        let (a, b) = (sb[k], sb[k + 1]);
        let v = sv[k];
        if v - tgt_min <= rho {
            // cannot trigger on this span; retire its exit events
            while exit_ptr < m && tb[exit_ptr + 1] + rho < b {
                exit_ptr += 1;
            }
            continue;
        }
        while next_admit < m && tb[next_admit] - rho <= a {
            let val = tv[next_admit];
            while deque.back().is_some_and(|&j| tv[j] <= val) {
                deque.pop_back();
            }
            deque.push_back(next_admit);
            next_admit += 1;
        }
        while deque.front().is_some_and(|&j| tb[j + 1] + rho < a) {
            deque.pop_front();
        }
        let front = deque.front().copied().expect("some target plateau always overlaps the window");
        if v - tv[front] > rho {
            return true;
        }
        while exit_ptr < m {
            let e = tb[exit_ptr + 1] + rho;
            if e >= b {
                break;
            }
            exit_ptr += 1;
            if e < a {
                continue;
            }
            while next_admit < m && tb[next_admit] - rho <= e {
                let val = tv[next_admit];
                while deque.back().is_some_and(|&j| tv[j] <= val) {
                    deque.pop_back();
                }
                deque.push_back(next_admit);
                next_admit += 1;
            }
            while deque.front().is_some_and(|&j| tb[j + 1] + rho <= e) {
                deque.pop_front();
            }
            if let Some(&f) = deque.front() {
                if v - tv[f] > rho {
                    return true;
                }
            }
        }
    }
    false
}

pub(super) fn bisected(x1: &StepFunction, x2: &StepFunction) -> f64 {
    let u = uniform_distance(x1, x2);
    if u == 0.0 {
        return 0.0;
    }
    let b1 = x1.plateau_bounds();
    let b2 = x2.plateau_bounds();
    let v1 = x1.values();
    let v2 = x2.values();
    let n1: Vec<f64> = v1.iter().map(|v| -v).collect();
    let n2: Vec<f64> = v2.iter().map(|v| -v).collect();
    // distance > rho iff some directed side (up or down, from either graph)
    // pokes out of the other graph's rho-neighborhood
    let decision = |rho: f64| {
        gap_exceeds(&b1, v1, &b2, v2, rho)
            || gap_exceeds(&b1, &n1, &b2, &n2, rho)
            || gap_exceeds(&b2, v2, &b1, v1, rho)
            || gap_exceeds(&b2, &n2, &b1, &n1, rho)
    };
    if !decision(0.0) {
        return 0.0;
    }
    let mut hi = u;
    while decision(hi) {
        // the uniform distance dominates; this is pure defence
        hi = hi.next_up();
    }
    let mut lo_bits = 0u64;
    let mut hi_bits = hi.to_bits();
    // nonnegative f64 ordering matches bit ordering; invariant:
    // decision(lo) holds, decision(hi) fails
    while lo_bits + 1 < hi_bits {
        let mid = lo_bits + (hi_bits - lo_bits) / 2;
        if decision(f64::from_bits(mid)) {
            lo_bits = mid;
        } else {
            hi_bits = mid;
        }
    }
    f64::from_bits(hi_bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn step(initial: f64, jumps: &[(f64, f64)]) -> StepFunction {
        StepFunction::new(initial, jumps.iter().copied()).unwrap()
    }

    #[test]
    fn engines_agree_on_worked_examples() {
        let cases = [
            (step(0.0, &[(0.5, 1.0)]), step(0.0, &[(0.5, 1.0)]), 0.0),
            (step(0.0, &[(0.5, 1.0)]), step(0.0, &[(0.6, 1.0)]), 0.6 - 0.5),
            (StepFunction::constant(0.0), step(0.0, &[(0.3, 0.5)]), 0.5),
            (StepFunction::constant(1.0), StepFunction::constant(-2.0), 3.0),
            (step(0.0, &[(1.0, 2.0)]), StepFunction::constant(0.0), 2.0),
        ];
        for (x, y, want) in &cases {
            let e = enumerated(x, y);
            let b = bisected(x, y);
            assert_eq!(e, *want, "enumerated");
            assert!((b - want).abs() <= 4.0 * f64::EPSILON, "bisected {b} vs {want}");
            assert!((e - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn single_jump_time_shift_is_exact_in_enumeration() {
        for k in 1..8u32 {
            let delta = k as f64 / 64.0;
            let x = step(0.0, &[(0.5, 1.0)]);
            let y = step(0.0, &[(0.5 + delta, 1.0)]);
            assert_eq!(enumerated(&x, &y), delta);
            assert!((bisected(&x, &y) - delta).abs() <= 4.0 * f64::EPSILON);
        }
    }

    fn random_step(rng: &mut ChaCha8Rng, max_jumps: usize) -> StepFunction {
        let j = rng.random_range(0..=max_jumps);
        let mut times: Vec<f64> = (0..j).map(|_| rng.random_range(0.01..1.0)).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        if rng.random::<f64>() < 0.2 {
            if let Some(last) = times.last_mut() {
                *last = 1.0;
            }
        }
        let initial = rng.random_range(-2.0..2.0);
        let jumps: Vec<(f64, f64)> = times.iter().map(|&t| (t, rng.random_range(-2.0..2.0))).collect();
        StepFunction::new(initial, jumps).unwrap()
    }

    #[test]
    fn engines_agree_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x4d32);
        for case in 0..60 {
            let x = random_step(&mut rng, 25);
            let y = random_step(&mut rng, 25);
            let e = enumerated(&x, &y);
            let b = bisected(&x, &y);
            assert!((e - b).abs() <= 1e-12, "case {case}: enumerated {e} vs bisected {b}");
            assert_eq!(enumerated(&y, &x), e, "case {case}: asymmetric");
            let u = uniform_distance(&x, &y);
            assert!(e <= u + 1e-12, "case {case}: {e} above uniform {u}");
            if case % 6 == 0 {
                let s = crate::cadlag::sampled_hausdorff(&x, &y, 1e-2).unwrap();
                assert!((e - s).abs() <= 1e-2, "case {case}: exact {e} vs sampled {s}");
            }
        }
    }

    #[test]
    fn bisected_handles_degenerate_final_plateaus() {
        let x = step(0.0, &[(0.4, 1.5), (1.0, -1.0)]);
        let y = step(0.0, &[(1.0, 2.0)]);
        let e = enumerated(&x, &y);
        let b = bisected(&x, &y);
        assert!((e - b).abs() <= 1e-12, "{e} vs {b}");
    }
}
