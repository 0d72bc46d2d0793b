use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ehll::martingale::MartingaleCounter;
use ehll::{
    CardinalitySketch, ChangeProbability, EhllSketch, EhllTcSketch, HashedElement, HllSketch,
    HllTcSketch,
};

fn stream(trial: u64, n: u64) -> Vec<HashedElement> {
    (0..n)
        .map(|i| {
            let mut e = [0u8; 16];
            e[..8].copy_from_slice(&(trial ^ 0x5bd1_e995_0000_0000).to_le_bytes());
            e[8..].copy_from_slice(&i.to_le_bytes());
            ehll::hash64(&e, 77)
        })
        .collect()
}

struct Summary {
    mean: f64,
    var: f64,
    mean_v: f64,
}

fn summarize(xs: &[(f64, f64)]) -> Summary {
    let t = xs.len() as f64;
    let mean = xs.iter().map(|x| x.0).sum::<f64>() / t;
    let var = xs.iter().map(|x| (x.0 - mean).powi(2)).sum::<f64>() / (t - 1.0);
    let mean_v = xs.iter().map(|x| x.1).sum::<f64>() / t;
    Summary { mean, var, mean_v }
}

// Var(E_n) and E[V_n] agree; the mean is n under two fixed orders, and the
// two orders give different per-trial values.
#[test]
fn unbiased_under_two_orders_and_variance_matches_retrospective() {
    let (n, trials) = (10_000u64, 2000u64);
    let mut forward = Vec::new();
    let mut shuffled = Vec::new();
    let mut differ = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for t in 0..trials {
        let mut s = stream(t, n);
        let mut a = MartingaleCounter::new(EhllSketch::new(8, 77).unwrap());
        s.iter().for_each(|&h| {
            a.insert_hash(h);
        });
        s.shuffle(&mut rng);
        let mut b = MartingaleCounter::new(EhllSketch::new(8, 77).unwrap());
        s.iter().for_each(|&h| {
            b.insert_hash(h);
        });
        // same set, same final sketch
        assert_eq!(a.sketch(), b.sketch());
        differ += (a.estimate() != b.estimate()) as u32;
        forward.push((a.estimate(), a.retro_variance()));
        shuffled.push((b.estimate(), b.retro_variance()));
    }
    assert!(differ as u64 > trials * 9 / 10);
    let nf = n as f64;
    for sum in [summarize(&forward), summarize(&shuffled)] {
        let se = (sum.var / trials as f64).sqrt();
        assert!(
            (sum.mean - nf).abs() <= 3.0 * se,
            "mean {} se {se}",
            sum.mean
        );
        assert!(
            (sum.var / sum.mean_v - 1.0).abs() <= 0.10,
            "{} vs {}",
            sum.var,
            sum.mean_v
        );
    }
}

#[test]
fn martingale_wraps_every_register_sketch() {
    let s = stream(1, 5000);
    let mut h = MartingaleCounter::new(HllSketch::new(6, 77).unwrap());
    let mut htc = MartingaleCounter::new(HllTcSketch::new(6, 77).unwrap());
    let mut etc = MartingaleCounter::new(EhllTcSketch::new(6, 77).unwrap());
    for &x in &s {
        h.insert_hash(x);
        htc.insert_hash(x);
        etc.insert_hash(x);
    }
    for e in [h.estimate(), htc.estimate(), etc.estimate()] {
        assert!((e / 5000.0 - 1.0).abs() < 0.25, "{e}");
    }
    assert!(etc.retro_variance() > 0.0);
}

// The bare sketch never resyncs, so this measures incremental maintenance alone.
#[test]
fn no_drift_over_ten_million_updates() {
    let mut s = EhllSketch::new(12, 1).unwrap();
    let mut x = 0x243f_6a88_85a3_08d3u64;
    for _ in 0..10_000_000u64 {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        s.insert_hash(HashedElement::new(x));
    }
    let scratch = s.term_sum_from_scratch();
    let drift = (s.term_sum() as f64 - scratch as f64).abs() / scratch as f64;
    assert!(drift < 1e-9);
    assert_eq!(s.term_sum(), scratch);
}

#[test]
fn estimate_at_least_number_of_changes() {
    let mut c = MartingaleCounter::new(HllSketch::new(5, 77).unwrap());
    let mut changes = 0;
    let mut last_v = 0.0;
    for h in stream(9, 3000) {
        changes += c.insert_hash(h) as u32;
        assert!(c.retro_variance() >= last_v);
        last_v = c.retro_variance();
    }
    assert!(c.estimate() >= changes as f64);
}
