//! The spectral convolution at the heart of a Fourier layer.
//!
//! With one channel and every mode retained, `irdft(mode_mix(rdft(v)))` is a
//! circular convolution; truncating the retained modes removes the high
//! frequencies of the input.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use woplab::autodiff::{spectral, ParameterStore, Tape, Tensor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 16;
    let modes = spectral::max_modes(n);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let kernel: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();

    // Mode weights R[k] are the kernel's DFT, conjugate-symmetric for real
    // kernels, so only k = 0..=n/2 are needed.
    let mut r = Vec::with_capacity(2 * modes);
    for k in 0..modes {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, &h) in kernel.iter().enumerate() {
            let a = -2.0 * PI * (k * j) as f64 / n as f64;
            re += h * a.cos();
            im += h * a.sin();
        }
        r.extend([re, im]);
    }

    let mut params = ParameterStore::new();
    params.insert("r", Tensor::complex(vec![modes, 1, 1], r)?)?;
    let mut tape = Tape::new(&params);
    let x = tape.constant(Tensor::new(vec![1, 1, n], v.clone())?);
    let w = tape.param("r")?;
    let spec = tape.rdft_truncated(x, modes)?;
    let mixed = tape.mode_mix(spec, w)?;
    let y = tape.irdft(mixed, n)?;

    let mut worst = 0.0f64;
    for (i, got) in tape.value(y).data().iter().enumerate() {
        let direct: f64 = (0..n).map(|j| kernel[j] * v[(i + n - j) % n]).sum();
        worst = worst.max((got - direct).abs());
    }
    println!("spectral path vs direct circular convolution: max difference {worst:.2e}");

    let mut detached = Tape::detached();
    let wave: Vec<f64> = (0..n)
        .map(|i| (2.0 * PI * i as f64 / n as f64).sin() + 0.5 * (12.0 * PI * i as f64 / n as f64).cos())
        .collect();
    let x = detached.constant(Tensor::new(vec![1, 1, n], wave.clone())?);
    for keep in [modes, 4, 2] {
        let s = detached.rdft_truncated(x, keep)?;
        let back = detached.irdft(s, n)?;
        let lost: f64 = detached
            .value(back)
            .data()
            .iter()
            .zip(&wave)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        println!("keep {keep:>2} modes: reconstruction error {lost:.3e}");
    }
    Ok(())
}
