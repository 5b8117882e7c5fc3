//! Adam with bias-corrected moment estimates.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> Default for AdamParams<T> {
    fn default() -> Self {
        AdamParams { learning_rate: T::lit(0.01), beta1: T::lit(0.9), beta2: T::lit(0.999), epsilon: T::lit(1e-8) }
    }
}

#[derive(Debug, Clone)]
pub struct Adam<T> {
    params: AdamParams<T>,
    m: Vec<T>,
    v: Vec<T>,
    beta1_t: T,
    beta2_t: T,
    step: usize,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: AdamParams<T>, dim: usize) -> Self {
        Adam { params, m: vec![T::zero(); dim], v: vec![T::zero(); dim], beta1_t: T::one(), beta2_t: T::one(), step: 0 }
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Applies one update to `x` in place given its gradient.
    pub fn step(&mut self, x: &mut [T], grad: &[T]) {
        assert_eq!(x.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        let AdamParams { learning_rate, beta1, beta2, epsilon } = self.params;
        self.step += 1;
        self.beta1_t *= beta1;
        self.beta2_t *= beta2;
        let bc1 = T::one() - self.beta1_t;
        let bc2 = T::one() - self.beta2_t;
        for i in 0..x.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (T::one() - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (T::one() - beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            x[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // Bias correction makes the first step exactly lr * sign(g) (up to eps).
        let mut adam = Adam::new(AdamParams { learning_rate: 0.1, ..Default::default() }, 2);
        let mut x = [1.0_f64, -1.0];
        adam.step(&mut x, &[3.0, -0.5]);
        assert!((x[0] - 0.9).abs() < 1e-7);
        assert!((x[1] + 0.9).abs() < 1e-7);
        assert_eq!(adam.steps_taken(), 1);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut adam = Adam::new(AdamParams { learning_rate: 0.05_f64, ..Default::default() }, 3);
        let target = [1.0, -2.0, 0.5];
        let mut x = [0.0; 3];
        for _ in 0..3000 {
            let g: Vec<f64> = x.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
            adam.step(&mut x, &g);
        }
        for (a, b) in x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut adam = Adam::new(AdamParams::<f32>::default(), 2);
        let mut x = [4.0_f32, 4.0];
        for _ in 0..10 {
            adam.step(&mut x, &[0.0, 0.0]);
        }
        assert_eq!(x, [4.0, 4.0]);
    }
}
