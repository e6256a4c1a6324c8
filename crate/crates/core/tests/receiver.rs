mod common;

use common::{rel_err, Oracle};
use cpocma_core::rx::{sign_slice, Demodulator};
use cpocma_core::tx::modulate_subcarrier;
use cpocma_core::{transmit, BitFrame, CarrierConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const S1: [i8; 16] = [1, -1, -1, -1, 1, 1, 1, -1, 1, 1, 1, 1, 1, 1, -1, 1];
const S2: [i8; 16] = [-1, -1, 1, -1, 1, 1, 1, -1, 1, 1, -1, -1, -1, 1, -1, -1];

fn random_frame(rng: &mut ChaCha8Rng, n: usize, m: usize) -> BitFrame {
    let flat = (0..n * m)
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect();
    BitFrame::from_flat(n, m, flat).unwrap()
}

#[test]
fn two_sequence_example_decodes() {
    let cfg = CarrierConfig::new(1.0, 2, 128.0).unwrap();
    let frame = BitFrame::from_rows(vec![S1.to_vec(), S2.to_vec()]).unwrap();
    let out = Demodulator::new(&cfg)
        .demodulate_detailed(&transmit(&frame, &cfg).unwrap(), 16)
        .unwrap();
    assert_eq!(out.frame, frame);
    // slot 1 mixes the two signs, slot 2 has both at -1
    assert_eq!(
        (
            out.decisions[0].d_index,
            out.decisions[0].n_plus,
            out.decisions[0].n_minus
        ),
        (2, 1, 1)
    );
    assert_eq!(
        (
            out.decisions[1].d_index,
            out.decisions[1].n_plus,
            out.decisions[1].n_minus
        ),
        (3, 0, 2)
    );
}

#[test]
fn isolated_symbol_samples_match_quadrature() {
    let oracle = Oracle::new();
    for f in [1.0, 0.3125e6] {
        let cfg = CarrierConfig::new(f, 3, 128.0 * f).unwrap();
        let demod = Demodulator::new(&cfg);
        let tc = cfg.symbol_period();
        for n in 1..=3 {
            let r = n as f64;
            let w = modulate_subcarrier(&[1], n, &cfg).unwrap();
            let (xi, y) = demod.sample(&w, 1).unwrap();
            let e = oracle.pp(r, r, 0.0);
            let q = oracle.po(r, r, 0.0);
            assert!(
                rel_err(xi.get(n - 1, 0) / tc, e) < 1e-3,
                "f={f} n={n}: xi {} vs {e}",
                xi.get(n - 1, 0) / tc
            );
            assert!(
                rel_err(y.get(n - 1, 0) / tc, q) < 1e-3,
                "f={f} n={n}: y {} vs {q}",
                y.get(n - 1, 0) / tc
            );
        }
    }
}

#[test]
fn cross_correlation_is_small() {
    let cfg = CarrierConfig::new(1.0, 2, 128.0).unwrap();
    let demod = Demodulator::new(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut cross_sq, mut self_abs, mut count) = (0.0, 0.0, 0usize);
    for _ in 0..20 {
        let frame = random_frame(&mut rng, 2, 64);
        let u1 = modulate_subcarrier(frame.row(0), 1, &cfg).unwrap();
        let u2 = modulate_subcarrier(frame.row(1), 2, &cfg).unwrap();
        let (_, y_cross) = demod.sample(&u1, 64).unwrap();
        let (_, y_self) = demod.sample(&u2, 64).unwrap();
        for m in 0..64 {
            cross_sq += y_cross.get(1, m).powi(2);
            self_abs += y_self.get(1, m).abs();
            count += 1;
        }
    }
    let rms = (cross_sq / count as f64).sqrt();
    let mean = self_abs / count as f64;
    assert!(rms < 0.1 * mean, "cross rms {rms} vs self mean {mean}");
}

#[test]
fn single_subcarrier_reduces_to_sign_slicer() {
    let cfg = CarrierConfig::new(1.0, 1, 64.0).unwrap();
    let demod = Demodulator::new(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..20u64 {
        let frame = random_frame(&mut rng, 1, 128);
        let clean = transmit(&frame, &cfg).unwrap();
        let sigma = 0.5 * (1.0 + seed as f64 / 10.0) * 8.0;
        let r = cpocma_core::channel::apply_awgn(&clean, sigma, seed).unwrap();
        let out = demod.demodulate_detailed(&r, 128).unwrap();
        assert_eq!(out.frame.row(0), sign_slice(out.xi.row(0)).as_slice());
    }
}
