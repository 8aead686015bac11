//! Sinusoidal frequency encoding.
//!
//! Lifts view directions and the scalar audio/blink signals into
//! `[sin(2^k pi s), cos(2^k pi s)]` for k below `n_freqs`, component-major.

use crate::real::Real;

pub fn freq_dim(n_components: usize, n_freqs: usize) -> usize {
    2 * n_components * n_freqs
}

/// Encode each component of `input` in order; `out` must hold
/// `freq_dim(input.len(), n_freqs)` values.
pub fn frequency_encode<T: Real>(input: &[T], n_freqs: usize, out: &mut [T]) {
    assert!(n_freqs >= 1);
    debug_assert_eq!(out.len(), freq_dim(input.len(), n_freqs));
    let pi = T::from_f64(std::f64::consts::PI);
    let mut o = 0;
    for &s in input {
        let mut freq = pi;
        for _ in 0..n_freqs {
            let arg = freq * s;
            out[o] = arg.sin();
            out[o + 1] = arg.cos();
            o += 2;
            freq = freq + freq;
        }
    }
}

pub fn frequency_encode_scalar<T: Real>(s: T, n_freqs: usize) -> Vec<T> {
    let mut out = vec![T::zero(); freq_dim(1, n_freqs)];
    frequency_encode(&[s], n_freqs, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_input_gives_unit_cosines() {
        let out = frequency_encode_scalar(0.0f64, 5);
        for k in 0..5 {
            assert_eq!(out[2 * k], 0.0);
            assert_eq!(out[2 * k + 1], 1.0);
        }
    }

    #[test]
    fn half_hits_quarter_turn() {
        // sin(pi/2) = 1, cos(pi/2) = 0
        let out = frequency_encode_scalar(0.5f64, 1);
        assert!((out[0] - 1.0).abs() < 1e-15);
        assert!(out[1].abs() < 1e-15);
    }

    #[test]
    fn golden_vector_point_three() {
        // Independently evaluated [sin(2^k pi 0.3), cos(2^k pi 0.3)], k<4.
        let want = [
            0.8090169943749475,
            0.5877852522924731,
            0.9510565162951536,
            -0.30901699437494734,
            -0.587785252292473,
            -0.8090169943749476,
            0.9510565162951535,
            0.30901699437494773,
        ];
        let out = frequency_encode_scalar(0.3f64, 4);
        for (a, b) in out.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn vector_input_is_component_major() {
        let mut out = vec![0.0f64; freq_dim(2, 2)];
        frequency_encode(&[0.25, 0.5], 2, &mut out);
        let first = frequency_encode_scalar(0.25f64, 2);
        let second = frequency_encode_scalar(0.5f64, 2);
        assert_eq!(&out[..4], &first[..]);
        assert_eq!(&out[4..], &second[..]);
    }
}
