//! Band-limited pseudo-speech and sparse blink drivers, 25 fps.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FPS: f64 = 25.0;

/// Sum of three seeded sinusoids, clipped to [-1, 1]. Deterministic per
/// (frame, seed); frames are independent so generation can run in parallel.
pub fn pseudo_speech(frame: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6175_6469_6f00);
    let amps = [0.55, 0.4, 0.3];
    let mut a = 0.0;
    let t = frame as f64 / FPS;
    for amp in amps {
        let freq: f64 = rng.gen_range(0.6..3.5);
        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        a += amp * (std::f64::consts::TAU * freq * t + phase).sin();
    }
    a.clamp(-1.0, 1.0)
}

/// Sparse triangular blink pulses in [0, 1]; a 6-frame pulse roughly every
/// couple of seconds at a seeded period.
pub fn blink_signal(frame: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x626c_696e_6b00);
    let period: usize = rng.gen_range(45..70);
    let offset: usize = rng.gen_range(0..period);
    let width = 6usize;
    let pos = (frame + period - (offset % period)) % period;
    if pos >= width {
        return 0.0;
    }
    // Triangular ramp 0 -> 1 -> 0 over `width` frames.
    let half = width as f64 / 2.0;
    let x = pos as f64 + 0.5;
    (1.0 - (x - half).abs() / half).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn audio_stays_clipped_and_moves() {
        let vals: Vec<f64> = (0..500).map(|f| pseudo_speech(f, 42)).collect();
        assert!(vals.iter().all(|v| (-1.0..=1.0).contains(v)));
        let spread = vals.iter().cloned().fold(f64::MIN, f64::max)
            - vals.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread > 0.8, "audio should sweep a wide range: {spread}");
    }

    #[test]
    fn blink_is_sparse_and_peaks() {
        let vals: Vec<f64> = (0..500).map(|f| blink_signal(f, 42)).collect();
        assert!(vals.iter().all(|v| (0.0..=1.0).contains(v)));
        let active = vals.iter().filter(|v| **v > 0.0).count();
        assert!(active > 10 && active < 150, "blinks active {active}/500");
        assert!(vals.iter().cloned().fold(f64::MIN, f64::max) > 0.6);
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(pseudo_speech(123, 7), pseudo_speech(123, 7));
        assert_ne!(pseudo_speech(123, 7), pseudo_speech(123, 8));
        assert_eq!(blink_signal(55, 3), blink_signal(55, 3));
    }
}
