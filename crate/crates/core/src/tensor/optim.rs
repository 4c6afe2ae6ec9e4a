//! Adam, RMSProp, Adagrad and Adadelta, updating [`Parameter`]s in place.
//!
//! Per-parameter state lives in the parameter's two slots:
//!
//! | kind     | slot1                 | slot2              |
//! |----------|-----------------------|--------------------|
//! | Adam     | first moment `m`      | second moment `v`  |
//! | RMSProp  | mean square `E[g^2]`  | unused             |
//! | Adagrad  | sum of squares `G`    | unused             |
//! | Adadelta | `E[g^2]`              | `E[dx^2]`          |

use serde::{Deserialize, Serialize};

use super::Parameter;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    RmsProp,
    Adagrad,
    Adadelta,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 4] = [
        OptimizerKind::Adam,
        OptimizerKind::RmsProp,
        OptimizerKind::Adagrad,
        OptimizerKind::Adadelta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::RmsProp => "rmsprop",
            OptimizerKind::Adagrad => "adagrad",
            OptimizerKind::Adadelta => "adadelta",
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "rmsprop" => Ok(OptimizerKind::RmsProp),
            "adagrad" => Ok(OptimizerKind::Adagrad),
            "adadelta" => Ok(OptimizerKind::Adadelta),
            other => Err(Error::InvalidConfig(format!("unknown optimizer '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// Adam first-moment decay.
    pub beta1: f64,
    /// Adam second-moment decay.
    pub beta2: f64,
    /// RMSProp / Adadelta averaging decay.
    pub rho: f64,
    pub epsilon: f64,
    /// Number of updates applied so far.
    pub step: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Optimizer {
        let (rho, epsilon) = match kind {
            OptimizerKind::Adadelta => (0.95, 1e-6),
            _ => (0.9, 1e-8),
        };
        Optimizer {
            kind,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            rho,
            epsilon,
            step: 0,
        }
    }

    /// Apply one update to every parameter from its accumulated gradient.
    /// Gradients are checked for finiteness before anything is modified.
    pub fn apply<'a, I>(&mut self, params: I) -> Result<()>
    where
        I: IntoIterator<Item = (&'a str, &'a mut Parameter)>,
    {
        let params: Vec<(&str, &mut Parameter)> = params.into_iter().collect();
        if let Some((name, _)) = params.iter().find(|(_, p)| !p.grad.all_finite()) {
            return Err(Error::NonFiniteGradient {
                name: name.to_string(),
            });
        }
        self.step += 1;
        for (_, p) in params {
            self.update(p);
        }
        Ok(())
    }

    fn update(&self, p: &mut Parameter) {
        let lr = self.learning_rate;
        let eps = self.epsilon;
        let value = p.value.data_mut();
        let grad = p.grad.data();
        let s1 = p.slot1.data_mut();
        let s2 = p.slot2.data_mut();
        match self.kind {
            OptimizerKind::Adam => {
                let (b1, b2) = (self.beta1, self.beta2);
                let t = self.step as i32;
                let c1 = 1.0 - b1.powi(t);
                let c2 = 1.0 - b2.powi(t);
                for i in 0..value.len() {
                    let g = grad[i];
                    s1[i] = b1 * s1[i] + (1.0 - b1) * g;
                    s2[i] = b2 * s2[i] + (1.0 - b2) * g * g;
                    let m_hat = s1[i] / c1;
                    let v_hat = s2[i] / c2;
                    value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
            OptimizerKind::RmsProp => {
                let rho = self.rho;
                for i in 0..value.len() {
                    let g = grad[i];
                    s1[i] = rho * s1[i] + (1.0 - rho) * g * g;
                    value[i] -= lr * g / (s1[i].sqrt() + eps);
                }
            }
            OptimizerKind::Adagrad => {
                for i in 0..value.len() {
                    let g = grad[i];
                    s1[i] += g * g;
                    value[i] -= lr * g / (s1[i].sqrt() + eps);
                }
            }
            OptimizerKind::Adadelta => {
                let rho = self.rho;
                for i in 0..value.len() {
                    let g = grad[i];
                    s1[i] = rho * s1[i] + (1.0 - rho) * g * g;
                    let delta = (s2[i] + eps).sqrt() / (s1[i] + eps).sqrt() * g;
                    s2[i] = rho * s2[i] + (1.0 - rho) * delta * delta;
                    value[i] -= lr * delta;
                }
            }
        }
    }
}
