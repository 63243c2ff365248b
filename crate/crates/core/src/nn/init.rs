use rand::Rng;

use super::tensor::Tensor;

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`. A vector of length `n` is
/// treated as an `n × 1` map.
pub fn glorot_uniform<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Tensor {
    let (fan_out, fan_in) = match shape {
        [r, c] => (*r, *c),
        [n] => (*n, 1),
        _ => (shape.iter().product(), 1),
    };
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-a..a)).collect();
    Tensor::from_vec(shape, data).expect("length matches shape")
}
