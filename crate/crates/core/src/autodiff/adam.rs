use ndarray::{ArrayD, Zip};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction over a list of parameter arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step_count: u64,
    pub first_moment: Vec<ArrayD<f64>>,
    pub second_moment: Vec<ArrayD<f64>>,
}

impl Adam {
    /// Zero moments shaped like `params`.
    pub fn new(config: AdamConfig, params: &[ArrayD<f64>]) -> Self {
        let zeros: Vec<_> = params.iter().map(|p| ArrayD::zeros(p.raw_dim())).collect();
        Adam { config, step_count: 0, first_moment: zeros.clone(), second_moment: zeros }
    }

    pub fn step(&mut self, params: &mut [ArrayD<f64>], grads: &[ArrayD<f64>]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::LengthMismatch { left: params.len(), right: grads.len() });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first_moment) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "adam: parameter {:?}, gradient {:?}, moment {:?}",
                    p.shape(),
                    g.shape(),
                    m.shape()
                )));
            }
        }
        self.step_count += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step_count as i32;
        let (c1, c2) = (1.0 - beta1.powi(t), 1.0 - beta2.powi(t));
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first_moment).zip(&mut self.second_moment) {
            Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr0;

    fn scalar(v: f64) -> Vec<ArrayD<f64>> {
        vec![arr0(v).into_dyn()]
    }

    #[test]
    fn first_step_is_learning_rate() {
        let mut p = scalar(0.0);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        adam.step(&mut p, &scalar(1.0)).unwrap();
        assert!((p[0][[]] + 1e-3 / (1.0 + 1e-8)).abs() < 1e-18);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = scalar(0.7);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        for _ in 0..5 {
            adam.step(&mut p, &scalar(0.0)).unwrap();
        }
        assert_eq!(p[0][[]], 0.7);
        assert_eq!(adam.step_count, 5);
    }

    #[test]
    fn constant_gradient_steps_stay_near_lr() {
        let mut p = scalar(0.0);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        let mut prev = 0.0;
        for _ in 0..10 {
            adam.step(&mut p, &scalar(1.0)).unwrap();
            let step = prev - p[0][[]];
            assert!((0.0009..=0.001).contains(&step), "{step}");
            prev = p[0][[]];
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut p = scalar(0.0);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        let g = vec![ArrayD::zeros(vec![2])];
        assert!(matches!(adam.step(&mut p, &g), Err(Error::ShapeMismatch(_))));
    }
}
