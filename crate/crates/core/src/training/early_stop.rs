/// Outcome of feeding one epoch's validation metric to [`EarlyStopping`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops after `patience` consecutive epochs without a strict improvement.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            best_epoch: 0,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, metric: f64) -> StopDecision {
        if self.best.is_none_or(|b| metric > b) {
            self.best = Some(metric);
            self.best_epoch = epoch;
            self.stale = 0;
            return StopDecision::Improved;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_after_epoch_three_stops_at_eight() {
        let mut es = EarlyStopping::new(5);
        let trace = [0.1, 0.2, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3];
        let mut stopped = None;
        for (i, &m) in trace.iter().enumerate() {
            if es.observe(i + 1, m) == StopDecision::Stop {
                stopped = Some(i + 1);
                break;
            }
        }
        assert_eq!(stopped, Some(8));
        assert_eq!(es.best_epoch(), 3);
    }

    #[test]
    fn monotone_improvement_never_stops() {
        let mut es = EarlyStopping::new(5);
        for e in 1..=50 {
            assert_eq!(es.observe(e, e as f64), StopDecision::Improved);
        }
        assert_eq!(es.best_epoch(), 50);
    }

    #[test]
    fn dips_count_as_stale() {
        let mut es = EarlyStopping::new(2);
        assert_eq!(es.observe(1, 0.5), StopDecision::Improved);
        assert_eq!(es.observe(2, 0.4), StopDecision::Continue);
        assert_eq!(es.observe(3, 0.6), StopDecision::Improved);
        assert_eq!(es.observe(4, 0.6), StopDecision::Continue);
        assert_eq!(es.observe(5, 0.1), StopDecision::Stop);
        assert_eq!(es.best(), Some(0.6));
    }
}
