use super::{Matrix, Rng};

/// A model whose trainable values can be visited as named flat groups.
///
/// Gradients use the same type as the parameters, so a gradient container is
/// simply `params.zeros_like()` and flattening order is shared between them.
pub trait ParamSet {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64]));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, g| n += g.len());
        n
    }

    fn group_names(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        self.visit(&mut |name, g| out.push((name.to_string(), g.len())));
        out
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit(&mut |_, g| out.extend_from_slice(g));
        out
    }

    fn load_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        self.visit_mut(&mut |_, g| {
            g.copy_from_slice(&flat[offset..offset + g.len()]);
            offset += g.len();
        });
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }

    fn fill(&mut self, value: f64) {
        self.visit_mut(&mut |_, g| g.iter_mut().for_each(|v| *v = value));
    }

    fn zeros_like(&self) -> Self
    where
        Self: Clone + Sized,
    {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    /// `self += other`, group by group.
    fn accumulate(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let flat = other.to_flat();
        let mut offset = 0;
        self.visit_mut(&mut |_, g| {
            for v in g.iter_mut() {
                *v += flat[offset];
                offset += 1;
            }
        });
    }

    fn scale_all(&mut self, s: f64) {
        self.visit_mut(&mut |_, g| g.iter_mut().for_each(|v| *v *= s));
    }
}

/// Glorot-uniform initialization, `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot(rng: &mut Rng, fan_in: usize, fan_out: usize) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.uniform(-limit, limit))
        .collect();
    Matrix::from_vec(fan_in, fan_out, data).expect("shape matches by construction")
}
