use ndarray::{Array1, Array2};
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

/// One environment step as stored for replay. Reward and cost are raw.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub cost: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Row-stacked transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub costs: Array1<f64>,
    pub next_states: Array2<f64>,
    /// 1 for terminal transitions.
    pub terminal: Array1<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn from_transitions(items: &[&Transition]) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::config("empty batch"))?;
        let (n, sd, ad) = (items.len(), first.state.len(), first.action.len());
        let mut b = Batch {
            states: Array2::zeros((n, sd)),
            actions: Array2::zeros((n, ad)),
            rewards: Array1::zeros(n),
            costs: Array1::zeros(n),
            next_states: Array2::zeros((n, sd)),
            terminal: Array1::zeros(n),
        };
        for (i, t) in items.iter().enumerate() {
            if t.state.len() != sd || t.next_state.len() != sd || t.action.len() != ad {
                return Err(Error::Dimension {
                    expected: sd,
                    actual: t.state.len(),
                });
            }
            b.states.row_mut(i).assign(&Array1::from(t.state.clone()));
            b.actions.row_mut(i).assign(&Array1::from(t.action.clone()));
            b.next_states
                .row_mut(i)
                .assign(&Array1::from(t.next_state.clone()));
            b.rewards[i] = t.reward;
            b.costs[i] = t.cost;
            b.terminal[i] = if t.terminal { 1.0 } else { 0.0 };
        }
        Ok(b)
    }
}

/// Fixed-capacity ring buffer; the oldest transition is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("replay buffer capacity must be positive"));
        }
        Ok(Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            inserted: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Total insertions, including overwritten ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        self.inserted += 1;
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform sample of distinct stored transitions.
    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<Batch> {
        if size == 0 || size > self.items.len() {
            return Err(Error::config(format!(
                "cannot sample {size} transitions from a buffer holding {}",
                self.items.len()
            )));
        }
        let picked: Vec<&Transition> = index::sample(rng, self.items.len(), size)
            .into_iter()
            .map(|i| &self.items[i])
            .collect();
        Batch::from_transitions(&picked)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(i: usize) -> Transition {
        Transition {
            state: vec![i as f64],
            action: vec![0.0, 1.0],
            reward: i as f64,
            cost: 0.5,
            next_state: vec![i as f64 + 1.0],
            terminal: i % 24 == 23,
        }
    }

    #[test]
    fn overwrites_oldest() {
        let mut b = ReplayBuffer::new(5).unwrap();
        for i in 0..12 {
            b.push(t(i));
        }
        assert_eq!(b.len(), 5);
        assert_eq!(b.inserted(), 12);
        let mut kept: Vec<f64> = b.iter().map(|x| x.reward).collect();
        kept.sort_by(f64::total_cmp);
        assert_eq!(kept, vec![7.0, 8.0, 9.0, 10.0, 11.0]);
    }

    #[test]
    fn sample_is_distinct_and_stored() {
        let mut b = ReplayBuffer::new(100).unwrap();
        for i in 0..40 {
            b.push(t(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch = b.sample(40, &mut rng).unwrap();
        let mut r = batch.rewards.to_vec();
        r.sort_by(f64::total_cmp);
        assert_eq!(r, (0..40).map(|i| i as f64).collect::<Vec<_>>());
        for i in 0..batch.len() {
            assert_eq!(batch.next_states[[i, 0]], batch.states[[i, 0]] + 1.0);
            assert_eq!(
                batch.terminal[i] == 1.0,
                batch.rewards[i] as usize % 24 == 23
            );
        }
        assert!(b.sample(41, &mut rng).is_err());
        assert!(b.sample(0, &mut rng).is_err());
    }

    #[test]
    fn zero_capacity_is_rejected() {
        assert!(ReplayBuffer::new(0).is_err());
    }
}
