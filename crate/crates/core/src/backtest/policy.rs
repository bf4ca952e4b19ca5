use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{decide, Action, BacktestError};
use crate::indicators::FeatureVector;
use crate::neat::{Genome, RecurrentNetwork};

/// Something that turns one bar's features into a trading action.
pub trait Policy {
    /// Called once before the first bar of a run.
    fn reset(&mut self);
    fn act(&mut self, features: &FeatureVector<f64>) -> Result<Action, BacktestError>;
}

/// Policy driven by a decoded genome.
#[derive(Debug, Clone)]
pub struct NetworkPolicy {
    net: RecurrentNetwork<f64>,
}

impl NetworkPolicy {
    pub fn new(genome: &Genome) -> Self {
        NetworkPolicy {
            net: RecurrentNetwork::decode(genome),
        }
    }
}

impl Policy for NetworkPolicy {
    fn reset(&mut self) {
        self.net.reset();
    }

    fn act(&mut self, features: &FeatureVector<f64>) -> Result<Action, BacktestError> {
        let [buy, sell, volume] = self.net.activate(&features.to_inputs())?;
        decide(buy, sell, volume)
    }
}

/// Buys with all equity at the first opportunity, then holds.
#[derive(Debug, Clone, Default)]
pub struct BuyAndHold {
    entered: bool,
}

impl Policy for BuyAndHold {
    fn reset(&mut self) {
        self.entered = false;
    }

    fn act(&mut self, _: &FeatureVector<f64>) -> Result<Action, BacktestError> {
        if self.entered {
            Ok(Action::Hold)
        } else {
            self.entered = true;
            Ok(Action::Buy(1.0))
        }
    }
}

/// Never trades.
#[derive(Debug, Clone, Copy, Default)]
pub struct Inert;

impl Policy for Inert {
    fn reset(&mut self) {}

    fn act(&mut self, _: &FeatureVector<f64>) -> Result<Action, BacktestError> {
        Ok(Action::Hold)
    }
}

/// Uniformly random actions and sizes; reproducible from its seed.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        RandomPolicy {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for RandomPolicy {
    fn reset(&mut self) {
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
    }

    fn act(&mut self, _: &FeatureVector<f64>) -> Result<Action, BacktestError> {
        let frac: f64 = self.rng.random();
        Ok(match self.rng.random_range(0..3) {
            0 => Action::Buy(frac),
            1 => Action::Sell(frac),
            _ => Action::Hold,
        })
    }
}
