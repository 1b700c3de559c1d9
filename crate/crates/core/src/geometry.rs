//! Arcs on a circle of circumference `L`.
//!
//! A firm's selling area is the open arc `(center - radius, center + radius)`
//! taken modulo `L`. Everything here is a pure function of its inputs.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{MarketError, Result};

/// An open arc on a circle of circumference `circumference`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    center: f64,
    radius: f64,
    circumference: f64,
}

impl Arc {
    /// Builds an arc, wrapping `center` into `[0, L)`.
    ///
    /// The radius must lie in `[0, L/2]`; use [`Arc::clamped`] to cap it instead.
    pub fn new(center: f64, radius: f64, circumference: f64) -> Result<Self> {
        if !(circumference.is_finite() && circumference > 0.0) {
            return Err(MarketError::Config(format!(
                "circumference must be finite and positive, got {circumference}"
            )));
        }
        if !center.is_finite() {
            return Err(MarketError::Domain(format!("non-finite center {center}")));
        }
        if !(radius.is_finite() && radius >= 0.0 && radius <= circumference / 2.0) {
            return Err(MarketError::Domain(format!(
                "radius {radius} outside [0, {}]",
                circumference / 2.0
            )));
        }
        Ok(Self {
            center: wrap(center, circumference),
            radius,
            circumference,
        })
    }

    /// Like [`Arc::new`] but caps the radius at `L/2`.
    pub fn clamped(center: f64, radius: f64, circumference: f64) -> Result<Self> {
        Self::new(center, radius.min(circumference / 2.0), circumference)
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn circumference(&self) -> f64 {
        self.circumference
    }

    /// Selling area `S = 2r`.
    pub fn length(&self) -> f64 {
        2.0 * self.radius
    }

    /// Same arc with a new radius; the caller guarantees `0 <= radius <= L/2`.
    pub(crate) fn with_radius(self, radius: f64) -> Self {
        debug_assert!(radius >= 0.0 && radius <= self.circumference / 2.0);
        Self { radius, ..self }
    }

    /// Same arc rotated by `delta` around the circle.
    pub fn shifted(&self, delta: f64) -> Self {
        Self {
            center: wrap(self.center + delta, self.circumference),
            ..*self
        }
    }
}

/// Maps `x` into `[0, l)`.
pub(crate) fn wrap(x: f64, l: f64) -> f64 {
    let w = x.rem_euclid(l);
    // rem_euclid may round up to exactly l for tiny negative inputs
    if w >= l {
        0.0
    } else {
        // + 0.0 turns -0.0 into 0.0
        w + 0.0
    }
}

/// Shortest distance between two points on the circle.
pub fn circular_distance(x: f64, y: f64, l: f64) -> f64 {
    let d = (x - y).rem_euclid(l);
    d.min(l - d)
}

/// Distance travelled going right (increasing coordinate) from `from` to `to`.
pub fn directed_distance(from: f64, to: f64, l: f64) -> f64 {
    (to - from).rem_euclid(l)
}

/// Whether `x` lies strictly inside the arc.
pub fn arc_contains(arc: &Arc, x: f64) -> bool {
    circular_distance(x, arc.center, arc.circumference) < arc.radius
}

fn check_same_circle(a: &Arc, b: &Arc) -> Result<()> {
    if a.circumference == b.circumference {
        Ok(())
    } else {
        Err(MarketError::CircumferenceMismatch(
            a.circumference,
            b.circumference,
        ))
    }
}

fn arc_order(a: &Arc, b: &Arc) -> Ordering {
    a.center
        .total_cmp(&b.center)
        .then(a.radius.total_cmp(&b.radius))
}

/// Length of the intersection of two arcs.
///
/// The pair is put in a canonical order first, so the result is bit-for-bit
/// symmetric in its arguments.
pub fn arc_overlap(a: &Arc, b: &Arc) -> Result<f64> {
    check_same_circle(a, b)?;
    let (p, q) = if arc_order(a, b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    let l = p.circumference;
    let d = directed_distance(p.center, q.center, l);
    // Unroll the circle: p sits on [-r_p, r_p], q has images at d - L, d, d + L.
    let mut total = 0.0;
    for image in [d - l, d, d + l] {
        let lo = (-p.radius).max(image - q.radius);
        let hi = p.radius.min(image + q.radius);
        if hi > lo {
            total += hi - lo;
        }
    }
    Ok(total.min(2.0 * p.radius.min(q.radius)))
}

/// Running sum with Neumaier compensation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Total overlap `Omega_i` of every arc with all the others.
///
/// Endpoint sweep in `O(N log N)`: the coverage count `c(x)` is piecewise
/// constant between endpoints, and inside arc `i` we have
/// `Omega_i = integral of (c(x) - 1)` over the arc. A prefix integral of the
/// excess coverage `max(c - 1, 0)` is built once, so each arc costs two lookups.
pub fn total_overlaps(arcs: &[Arc]) -> Result<Vec<f64>> {
    let n = arcs.len();
    let Some(first) = arcs.first() else {
        return Ok(Vec::new());
    };
    for a in &arcs[1..] {
        check_same_circle(first, a)?;
    }
    if n == 1 {
        return Ok(vec![0.0]);
    }
    let l = first.circumference;

    // Each arc contributes one piece, or two when it wraps past L.
    let mut pieces: Vec<(usize, f64, f64)> = Vec::with_capacity(2 * n);
    for (i, a) in arcs.iter().enumerate() {
        if a.radius == 0.0 {
            continue;
        }
        let mut start = a.center - a.radius;
        if start < 0.0 {
            start += l;
            if start >= l {
                start = 0.0;
            }
        }
        let end = start + a.length();
        if end <= l {
            pieces.push((i, start, end));
        } else {
            pieces.push((i, start, l));
            pieces.push((i, 0.0, end - l));
        }
    }

    // (position, +1 open / -1 close, piece slot)
    let mut events: Vec<(f64, i32, usize)> = Vec::with_capacity(2 * pieces.len());
    for (slot, &(_, lo, hi)) in pieces.iter().enumerate() {
        events.push((lo, 1, 2 * slot));
        events.push((hi, -1, 2 * slot + 1));
    }
    events.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    // Distinct breakpoints, the prefix excess integral at each, and the
    // breakpoint index of every event.
    let mut prefix: Vec<f64> = Vec::with_capacity(events.len());
    let mut at: Vec<usize> = vec![0; events.len()];
    let mut acc = CompensatedSum::default();
    let mut cover: i32 = 0;
    let mut last_pos = f64::NAN;
    for &(pos, delta, slot) in &events {
        if pos != last_pos {
            if !prefix.is_empty() {
                let excess = (cover - 1).max(0);
                if excess > 0 {
                    acc.add((pos - last_pos) * f64::from(excess));
                }
            }
            prefix.push(acc.value());
            last_pos = pos;
        }
        cover += delta;
        at[slot] = prefix.len() - 1;
    }

    let mut omega = vec![0.0; n];
    for (slot, &(i, _, _)) in pieces.iter().enumerate() {
        let lo = prefix[at[2 * slot]];
        let hi = prefix[at[2 * slot + 1]];
        omega[i] += hi - lo;
    }
    Ok(omega)
}

/// `O(N^2)` reference for [`total_overlaps`]: the direct pairwise sum.
pub fn total_overlaps_pairwise(arcs: &[Arc]) -> Result<Vec<f64>> {
    let n = arcs.len();
    let mut omega = vec![CompensatedSum::default(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let o = arc_overlap(&arcs[i], &arcs[j])?;
            omega[i].add(o);
            omega[j].add(o);
        }
    }
    Ok(omega.iter().map(CompensatedSum::value).collect())
}

/// The firm `k != i` reached first when walking right from firm `i`.
///
/// Distance is `(x_k - x_i) mod L`; coincident centers are at distance zero.
/// Ties go to the smallest index.
pub fn nearest_right_neighbor(arcs: &[Arc], i: usize) -> Result<usize> {
    if arcs.len() < 2 {
        return Err(MarketError::InsufficientPopulation {
            needed: 2,
            got: arcs.len(),
        });
    }
    if i >= arcs.len() {
        return Err(MarketError::Domain(format!(
            "index {i} out of range for {} arcs",
            arcs.len()
        )));
    }
    let l = arcs[i].circumference;
    let origin = arcs[i].center;
    let mut best: Option<(f64, usize)> = None;
    for (k, a) in arcs.iter().enumerate() {
        if k == i {
            continue;
        }
        let d = directed_distance(origin, a.center, l);
        match best {
            Some((bd, _)) if d >= bd => {}
            _ => best = Some((d, k)),
        }
    }
    Ok(best.map(|(_, k)| k).expect("at least one other arc"))
}

/// [`nearest_right_neighbor`] for every firm at once, in `O(N log N)`.
pub fn right_neighbors(arcs: &[Arc]) -> Result<Vec<usize>> {
    let n = arcs.len();
    if n < 2 {
        return Err(MarketError::InsufficientPopulation { needed: 2, got: n });
    }
    let l = arcs[0].circumference;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| arcs[a].center.total_cmp(&arcs[b].center).then(a.cmp(&b)));

    let mut neighbor = vec![0; n];
    for p in 0..n {
        let i = order[p];
        let origin = arcs[i].center;
        let mut best: Option<(f64, usize)> = None;
        // Coincident centers sit at distance zero but may precede p in the order.
        let mut q = p;
        while q > 0 && arcs[order[q - 1]].center == origin {
            q -= 1;
        }
        if order[q] != i {
            neighbor[i] = order[q];
            continue;
        }
        for step in 1..n {
            let k = order[(p + step) % n];
            let d = directed_distance(origin, arcs[k].center, l);
            match best {
                Some((bd, bk)) => {
                    if d > bd {
                        break;
                    }
                    if d < bd || k < bk {
                        best = Some((d, k));
                    }
                }
                None => best = Some((d, k)),
            }
        }
        neighbor[i] = best.map(|(_, k)| k).expect("n >= 2");
    }
    Ok(neighbor)
}
