//! Multi-species ASEP on a finite segment or ring.
//!
//! Every bond carries a Poisson clock of rate `1 + q` and a uniform mark
//! `U` in `[0, 1+q)`. When bond `(n, n+1)` rings, the labels swap if
//! `X_n < X_{n+1}` and `U < 1`, or if `X_n > X_{n+1}` and `U >= 1`.
//! Smaller labels are stronger particles.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, precondition, Result};
use crate::qseries::check_q;
use crate::queuesim::replica_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Closed,
}

/// Initial labels, asymmetry and time horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeConfig {
    pub sites: Vec<i64>,
    pub q: f64,
    pub horizon: f64,
    pub boundary: Boundary,
}

impl LatticeConfig {
    fn validate(&self) -> Result<()> {
        check_q(self.q)?;
        if self.sites.len() < 2 {
            return Err(domain("the lattice needs at least two sites"));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(domain("time horizon must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Mutable lattice state with single-ring updates.
#[derive(Debug, Clone)]
pub struct AsepSystem {
    sites: Vec<i64>,
    q: f64,
    boundary: Boundary,
}

impl AsepSystem {
    pub fn new(config: &LatticeConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            sites: config.sites.clone(),
            q: config.q,
            boundary: config.boundary,
        })
    }

    pub fn sites(&self) -> &[i64] {
        &self.sites
    }

    pub fn bond_count(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => self.sites.len(),
            Boundary::Closed => self.sites.len() - 1,
        }
    }

    fn right_of(&self, bond: usize) -> usize {
        (bond + 1) % self.sites.len()
    }

    /// Applies a ring of `bond` with mark `u in [0, 1+q)`; returns whether the
    /// labels swapped.
    pub fn ring(&mut self, bond: usize, u: f64) -> bool {
        let r = self.right_of(bond);
        let (a, b) = (self.sites[bond], self.sites[r]);
        let swap = (a < b && u < 1.0) || (a > b && u >= 1.0 && u < 1.0 + self.q);
        if swap {
            self.sites.swap(bond, r);
        }
        swap
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub events: u64,
    pub swaps: u64,
    pub final_sites: Vec<i64>,
    /// The final labels are a permutation of the initial ones.
    pub conserved: bool,
}

#[derive(PartialEq)]
struct Clock {
    time: f64,
    bond: usize,
}

impl Eq for Clock {}

impl PartialOrd for Clock {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Clock {
    // Reversed so the max-heap pops the earliest clock.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.bond.cmp(&self.bond))
    }
}

/// Harris-clock simulation up to `config.horizon` using a next-event queue
/// over all bonds.
pub fn simulate(config: &LatticeConfig, seed: u64) -> Result<TrajectorySummary> {
    let mut sys = AsepSystem::new(config)?;
    let mut rng = replica_rng(seed, 0);
    let rate = 1.0 + config.q;
    let exp = Exp::new(rate).map_err(|e| domain(e.to_string()))?;
    let mut heap: BinaryHeap<Clock> = (0..sys.bond_count())
        .map(|bond| Clock {
            time: exp.sample(&mut rng),
            bond,
        })
        .collect();
    let (mut events, mut swaps) = (0u64, 0u64);
    while let Some(Clock { time, bond }) = heap.pop() {
        if time > config.horizon {
            break;
        }
        let u: f64 = rng.random::<f64>() * rate;
        if sys.ring(bond, u) {
            swaps += 1;
        }
        events += 1;
        heap.push(Clock {
            time: time + exp.sample(&mut rng),
            bond,
        });
    }
    let mut before = config.sites.clone();
    let mut after = sys.sites.clone();
    before.sort_unstable();
    after.sort_unstable();
    Ok(TrajectorySummary {
        events,
        swaps,
        conserved: before == after,
        final_sites: sys.sites,
    })
}

/// Index set with O(1) insert, remove and uniform pick.
struct ActiveSet {
    items: Vec<usize>,
    pos: Vec<usize>,
}

impl ActiveSet {
    const ABSENT: usize = usize::MAX;

    fn new(n: usize) -> Self {
        Self {
            items: Vec::new(),
            pos: vec![Self::ABSENT; n],
        }
    }

    fn set(&mut self, i: usize, present: bool) {
        let here = self.pos[i] != Self::ABSENT;
        if present && !here {
            self.pos[i] = self.items.len();
            self.items.push(i);
        } else if !present && here {
            let p = self.pos[i];
            let last = *self.items.last().unwrap();
            self.items.swap_remove(p);
            if last != i {
                self.pos[last] = p;
            }
            self.pos[i] = Self::ABSENT;
        }
    }

    fn len(&self) -> usize {
        self.items.len()
    }

    fn pick<R: Rng>(&self, rng: &mut R) -> usize {
        self.items[rng.random_range(0..self.items.len())]
    }
}

/// Outcome of [`second_class_speed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedSample {
    pub lattice: usize,
    pub horizon: f64,
    pub q: f64,
    /// `Y_0(T) / ((1-q) T)` for every valid replicate, in replicate order.
    pub speeds: Vec<f64>,
    /// Final displacement `Y_0(T)` per replicate (`None` when invalid).
    pub positions: Vec<Option<i64>>,
    /// Replicates whose particle came within the safety margin of the far
    /// side of the ring.
    pub invalid: u64,
}

impl SpeedSample {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("replicate,final_position,speed\n");
        let scale = (1.0 - self.q) * self.horizon;
        for (r, p) in self.positions.iter().enumerate() {
            match p {
                Some(y) => out.push_str(&format!("{r},{y},{:.16e}\n", *y as f64 / scale)),
                None => out.push_str(&format!("{r},,\n")),
            }
        }
        out
    }
}

fn safety_margin(horizon: f64) -> usize {
    10 + (6.0 * horizon.sqrt()).ceil() as usize
}

/// Runs one replicate from step initial data on a ring of `lattice` sites:
/// first-class particles left of the origin, the second-class particle at the
/// origin, holes to the right. Only bonds whose ordered pair can swap are
/// scheduled; this is the same continuous-time chain as the Harris
/// construction since idle clocks change nothing.
fn second_class_run(lattice: usize, horizon: f64, q: f64, seed: u64, replica: u64) -> Option<i64> {
    let origin = lattice / 2;
    let mut sites: Vec<i8> = (0..lattice)
        .map(|i| match i.cmp(&origin) {
            Ordering::Less => -1,
            Ordering::Equal => 0,
            Ordering::Greater => 1,
        })
        .collect();
    let mut rng = replica_rng(seed, replica);
    let mut forward = ActiveSet::new(lattice);
    let mut backward = ActiveSet::new(lattice);
    let classify = |s: &[i8], b: usize| {
        let (a, c) = (s[b], s[(b + 1) % lattice]);
        (a < c, a > c)
    };
    for b in 0..lattice {
        let (f, k) = classify(&sites, b);
        forward.set(b, f);
        backward.set(b, k && q > 0.0);
    }
    let margin = safety_margin(horizon);
    let mut pos = origin;
    let mut t = 0.0;
    loop {
        let rate = forward.len() as f64 + q * backward.len() as f64;
        if rate == 0.0 {
            break;
        }
        let u: f64 = rng.random();
        t += -(1.0 - u).ln() / rate;
        if t > horizon {
            break;
        }
        let pick_forward = rng.random::<f64>() * rate < forward.len() as f64;
        let b = if pick_forward {
            forward.pick(&mut rng)
        } else {
            backward.pick(&mut rng)
        };
        let r = (b + 1) % lattice;
        sites.swap(b, r);
        if pos == b {
            pos = r;
        } else if pos == r {
            pos = b;
        }
        if pos < margin || pos + margin >= lattice {
            return None;
        }
        for bb in [(b + lattice - 1) % lattice, b, r] {
            let (f, k) = classify(&sites, bb);
            forward.set(bb, f);
            backward.set(bb, k && q > 0.0);
        }
    }
    Some(pos as i64 - origin as i64)
}

/// Empirical speeds `Y_0(T) / ((1-q) T)` of a second-class particle started
/// at the origin between a block of first-class particles and holes.
pub fn second_class_speed(lattice: usize, horizon: f64, q: f64, reps: u64, seed: u64) -> Result<SpeedSample> {
    check_q(q)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(domain("time horizon must be positive"));
    }
    let needed = 2.0 * (1.0 - q) * horizon + 2.0 * safety_margin(horizon) as f64;
    if (lattice as f64) <= needed {
        return Err(precondition(format!(
            "ring of {lattice} sites is too small for T={horizon}; need more than {needed:.0}"
        )));
    }
    let positions: Vec<Option<i64>> = (0..reps)
        .into_par_iter()
        .map(|r| second_class_run(lattice, horizon, q, seed, r))
        .collect();
    let scale = (1.0 - q) * horizon;
    Ok(SpeedSample {
        lattice,
        horizon,
        q,
        speeds: positions.iter().flatten().map(|&y| y as f64 / scale).collect(),
        invalid: positions.iter().filter(|p| p.is_none()).count() as u64,
        positions,
    })
}
