//! Square two-dimensional complex FFTs built from `rustfft` row transforms.
//!
//! Plans are cached per side length in a process-wide table; the plans
//! themselves are immutable, so sharing them across threads is safe. Each
//! [`Fft2`] owns its scratch buffers, which keeps callers free of shared
//! mutable state.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// An `n × n` transform with its own scratch space.
///
/// Forward transforms are normalized by `1/n²`, so that the output holds the
/// Fourier-series coefficients `c_k` with `u(x_j) = Σ_k c_k e^{2πi k·j/n}`.
/// Inverse transforms are unnormalized.
pub(crate) struct Fft2 {
    n: usize,
    plans: Arc<Plans>,
    scratch: Vec<Complex64>,
}

impl Fft2 {
    pub(crate) fn new(n: usize) -> Self {
        let plans = plans(n);
        let len = plans
            .forward
            .get_inplace_scratch_len()
            .max(plans.inverse.get_inplace_scratch_len());
        Self {
            n,
            plans,
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub(crate) fn forward(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n * self.n);
        self.apply(data, true);
        let norm = 1.0 / (self.n * self.n) as f64;
        for c in data.iter_mut() {
            *c *= norm;
        }
    }

    pub(crate) fn inverse(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n * self.n);
        self.apply(data, false);
    }

    fn apply(&mut self, data: &mut [Complex64], forward: bool) {
        let plan = if forward {
            &self.plans.forward
        } else {
            &self.plans.inverse
        };
        plan.process_with_scratch(data, &mut self.scratch);
        transpose_square(data, self.n);
        plan.process_with_scratch(data, &mut self.scratch);
        transpose_square(data, self.n);
    }
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}
