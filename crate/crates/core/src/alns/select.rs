use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

/// Roulette-wheel scores and success counts for one operator pool.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorState {
    pub scores: Vec<f64>,
    pub hits: Vec<u64>,
    initial: f64,
}

impl OperatorState {
    pub fn new(len: usize, initial: f64) -> Self {
        OperatorState { scores: vec![initial; len], hits: vec![0; len], initial }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn reset_scores(&mut self) {
        self.scores.iter_mut().for_each(|s| *s = self.initial);
    }

    pub fn reward(&mut self, op: usize, amount: f64) {
        self.scores[op] += amount;
    }
}

/// Draws index `i` with probability `score_i / sum`.
pub fn select_operator<R: Rng + ?Sized>(state: &OperatorState, rng: &mut R) -> usize {
    assert!(!state.is_empty(), "empty operator pool");
    pick_weighted(&state.scores, rng).unwrap_or(0)
}

/// Weighted draw; uniform when every weight is zero. `None` for an empty slice.
pub fn pick_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    if weights.is_empty() {
        return None;
    }
    match WeightedIndex::new(weights) {
        Ok(dist) => Some(dist.sample(rng)),
        Err(_) => Some(rng.gen_range(0..weights.len())),
    }
}

/// Adapts the degree of destruction; returns the new `(q, w)`.
pub fn resize_neighborhood<R: Rng + ?Sized>(
    enlarge_after: u32,
    w: u32,
    q: usize,
    q_min: usize,
    q_max: usize,
    p: f64,
    rng: &mut R,
) -> (usize, u32) {
    let (mut q, mut w) = (q, w);
    if w > enlarge_after && q < q_max {
        q += 1;
        w = 0;
    }
    let reduce: f64 = rng.gen();
    if reduce < p && q > q_min {
        q -= 1;
        w = 0;
    }
    (q, w)
}
