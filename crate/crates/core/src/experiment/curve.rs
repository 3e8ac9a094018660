use serde::{Deserialize, Serialize};

/// One evaluation point of a training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}
