//! Small numerical helpers shared across modules.

/// Compensated accumulator.  All long sums of nonuniform magnitudes in this
/// crate go through this instead of a bare `+=`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_beats_naive_on_harmonic_tail() {
        // 1 + eps + eps + ... with eps below the ulp of 1: naive summation
        // drops every term, the compensated one keeps them.
        let eps = f64::EPSILON / 4.0;
        let n = 1_000_000;
        let mut k = Kahan::new();
        k.add(1.0);
        for _ in 0..n {
            k.add(eps);
        }
        let expected = 1.0 + eps * n as f64;
        assert!((k.value() - expected).abs() < 1e-12 * expected);
    }
}
