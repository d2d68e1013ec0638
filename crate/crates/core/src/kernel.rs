//! Compactly supported ABC acceptance kernels, normalized so that
//! `K_eps(0) = 1` and `K_eps(u) = 0` for `u > eps`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSpec {
    Uniform,
    Epanechnikov,
    Triangle,
    Quartic,
    Triweight,
    Tricube,
}

impl KernelSpec {
    pub const ALL: [KernelSpec; 6] = [
        KernelSpec::Uniform,
        KernelSpec::Epanechnikov,
        KernelSpec::Triangle,
        KernelSpec::Quartic,
        KernelSpec::Triweight,
        KernelSpec::Tricube,
    ];

    /// Profile on `z = u / eps >= 0`, already divided by its value at zero.
    fn profile(self, z: f64) -> f64 {
        if z > 1.0 {
            return 0.0;
        }
        match self {
            KernelSpec::Uniform => 1.0,
            KernelSpec::Epanechnikov => 1.0 - z * z,
            KernelSpec::Triangle => 1.0 - z,
            KernelSpec::Quartic => (1.0 - z * z).powi(2),
            KernelSpec::Triweight => (1.0 - z * z).powi(3),
            KernelSpec::Tricube => (1.0 - z * z * z).powi(3),
        }
    }

    /// `K_eps(u)` without argument checks.
    ///
    /// `u = +inf` is the failed-simulation sentinel and maps to 0. `eps = +inf`
    /// is the prior-level tolerance and maps every finite `u` to 1.
    pub fn weight(self, u: f64, eps: f64) -> f64 {
        if u == f64::INFINITY {
            return 0.0;
        }
        if eps == f64::INFINITY {
            return 1.0;
        }
        self.profile(u / eps)
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelSpec::Uniform => "uniform",
            KernelSpec::Epanechnikov => "epanechnikov",
            KernelSpec::Triangle => "triangle",
            KernelSpec::Quartic => "quartic",
            KernelSpec::Triweight => "triweight",
            KernelSpec::Tricube => "tricube",
        }
    }
}

/// Checked kernel evaluation `K(u / eps) / K(0)`.
pub fn kernel_eval(kernel: KernelSpec, u: f64, eps: f64) -> Result<f64> {
    if u.is_nan() || u < 0.0 {
        return invalid(format!("kernel argument must be a nonnegative number, got {u}"));
    }
    if eps.is_nan() || eps <= 0.0 {
        return invalid(format!("kernel tolerance must be positive, got {eps}"));
    }
    Ok(kernel.weight(u, eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_inside_tolerance() {
        assert_eq!(kernel_eval(KernelSpec::Uniform, 0.5, 0.6).unwrap(), 1.0);
        assert_eq!(kernel_eval(KernelSpec::Uniform, 0.6, 0.6).unwrap(), 1.0);
        assert_eq!(kernel_eval(KernelSpec::Uniform, 0.6000001, 0.6).unwrap(), 0.0);
    }

    #[test]
    fn one_at_zero() {
        for k in KernelSpec::ALL {
            assert_eq!(kernel_eval(k, 0.0, 1.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn epanechnikov_value() {
        // 1 - 0.5^2, and the unnormalized form (3/4)(1 - z^2) / (3/4)
        let direct = kernel_eval(KernelSpec::Epanechnikov, 0.5, 1.0).unwrap();
        let raw = |z: f64| 0.75 * (1.0 - z * z);
        assert!((direct - 0.75).abs() < 1e-15);
        assert!((direct - raw(0.5) / raw(0.0)).abs() < 1e-15);
    }

    #[test]
    fn argument_errors() {
        assert!(kernel_eval(KernelSpec::Uniform, f64::NAN, 1.0).is_err());
        assert!(kernel_eval(KernelSpec::Uniform, -0.1, 1.0).is_err());
        assert!(kernel_eval(KernelSpec::Uniform, 0.1, 0.0).is_err());
        assert!(kernel_eval(KernelSpec::Uniform, 0.1, -1.0).is_err());
    }

    #[test]
    fn sentinels() {
        for k in KernelSpec::ALL {
            assert_eq!(k.weight(f64::INFINITY, 1.0), 0.0);
            assert_eq!(k.weight(1e300, f64::INFINITY), 1.0);
        }
    }

    #[test]
    fn grid_shape_properties() {
        for k in KernelSpec::ALL {
            for &eps in &[0.01, 0.3, 1.0, 4.5, 100.0] {
                let mut prev = 1.0;
                for i in 0..=400 {
                    let u = eps * 2.0 * i as f64 / 400.0;
                    let v = kernel_eval(k, u, eps).unwrap();
                    assert!((0.0..=1.0).contains(&v));
                    assert!(v <= prev, "{k:?} increases at u={u}");
                    if u > eps {
                        assert_eq!(v, 0.0);
                    }
                    prev = v;
                }
            }
        }
    }

    proptest! {
        #[test]
        fn nonincreasing(u1 in 0.0f64..10.0, du in 0.0f64..10.0, eps in 1e-3f64..10.0, idx in 0usize..6) {
            let k = KernelSpec::ALL[idx];
            prop_assert!(k.weight(u1 + du, eps) <= k.weight(u1, eps));
        }
    }
}
