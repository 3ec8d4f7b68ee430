//! Adaptive-moment (Adam) steps over flat parameter vectors. Shared by the
//! classifier and the gender-dimension trainer.

/// Adam state. `step` applies one descent update in place.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(learning_rate: f64, n_params: usize) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_quadratic() {
        // f(x) = Σ (x_i − i)², ∇f = 2(x − target)
        let target = [1.0, -2.0, 3.0];
        let mut x = vec![0.0; 3];
        let mut adam = Adam::new(0.05, 3);
        for _ in 0..2000 {
            let grads: Vec<f64> = x.iter().zip(&target).map(|(xi, t)| 2.0 * (xi - t)).collect();
            adam.step(&mut x, &grads);
        }
        for (xi, t) in x.iter().zip(&target) {
            assert!((xi - t).abs() < 1e-3, "{xi} vs {t}");
        }
    }

    #[test]
    fn first_step_has_learning_rate_magnitude() {
        let mut x = vec![0.0];
        let mut adam = Adam::new(0.1, 1);
        adam.step(&mut x, &[42.0]);
        // m̂/√v̂ = 1 on the first step regardless of gradient scale.
        assert!((x[0] + 0.1).abs() < 1e-6);
    }
}
