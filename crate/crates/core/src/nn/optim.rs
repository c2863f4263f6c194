use crate::error::{Error, Result};

/// Classical momentum: `v′ = µ·v − η·g`, then `w′ = w + v′`. Updates in place.
pub fn sgd_momentum_step(
    params: &mut [f64],
    grads: &[f64],
    velocity: &mut [f64],
    learning_rate: f64,
    momentum: f64,
) -> Result<()> {
    if grads.len() != params.len() || velocity.len() != params.len() {
        return Err(Error::DimensionMismatch {
            context: "momentum step",
            expected: params.len(),
            found: if grads.len() != params.len() {
                grads.len()
            } else {
                velocity.len()
            },
        });
    }
    for ((w, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v - learning_rate * g;
        *w += *v;
    }
    Ok(())
}

/// Momentum optimizer owning its velocity buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Momentum {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: Vec<f64>,
}

impl Momentum {
    pub fn new(param_count: usize, learning_rate: f64, momentum: f64) -> Self {
        Momentum {
            learning_rate,
            momentum,
            velocity: vec![0.0; param_count],
        }
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        sgd_momentum_step(params, grads, &mut self.velocity, self.learning_rate, self.momentum)
    }
}
