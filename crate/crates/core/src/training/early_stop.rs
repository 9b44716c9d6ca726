/// Tracks the best validation loss and how long ago it was seen.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopState {
    pub best_loss: f64,
    pub best_epoch: Option<usize>,
    pub since_improvement: usize,
    pub patience: usize,
}

impl EarlyStopState {
    pub fn new(patience: usize) -> Self {
        Self {
            best_loss: f64::INFINITY,
            best_epoch: None,
            since_improvement: 0,
            patience,
        }
    }

    /// Records an epoch's validation loss; returns `true` when it is a new
    /// minimum (strictly lower, no minimum delta).
    pub fn update(&mut self, epoch: usize, val_loss: f64) -> bool {
        if val_loss < self.best_loss {
            self.best_loss = val_loss;
            self.best_epoch = Some(epoch);
            self.since_improvement = 0;
            true
        } else {
            self.since_improvement += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.since_improvement >= self.patience
    }
}
