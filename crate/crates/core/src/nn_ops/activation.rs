use crate::tensor::{Real, Tensor};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
}

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub fn gelu_scalar(x: f64) -> f64 {
    x * normal_cdf(x)
}

/// d/dx [x Φ(x)] = Φ(x) + x φ(x)
#[inline]
pub fn gelu_grad_scalar(x: f64) -> f64 {
    normal_cdf(x) + x * normal_pdf(x)
}

/// Exact (erf-based) GELU.
pub fn gelu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| T::from_acc(gelu_scalar(v.acc())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_points() {
        assert_eq!(gelu_scalar(0.0), 0.0);
        assert!((gelu_scalar(10.0) - 10.0).abs() <= 1e-6);
        assert!(gelu_scalar(-10.0).abs() <= 1e-6);
    }

    #[test]
    fn monotone_on_grid() {
        // GELU dips to its minimum near -0.75, so only the range right of that is monotone.
        let ys: Vec<f64> = (0..10_000)
            .map(|i| -0.75 + 10.75 * i as f64 / 9_999.0)
            .map(gelu_scalar)
            .collect();
        assert!(ys.windows(2).all(|p| p[1] >= p[0]));
    }

    #[test]
    fn dips_left_of_the_minimum() {
        assert!(gelu_scalar(-2.0) > gelu_scalar(-1.0));
        assert!(gelu_grad_scalar(-1.0) < 0.0);
    }
}
