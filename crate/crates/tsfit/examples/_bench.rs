use std::time::Instant;
use tsfit::predictor::*;
use tsfit::prob::SeededRng;
use tsfit::simdata::{gen_spike, SpikeConfig};
fn main() {
    let ds = gen_spike(&SpikeConfig { n_samples: 1000, t: 80, ..SpikeConfig::default() }, &SeededRng::new(1, 0));
    let t0 = Instant::now();
    let hyper = PredictorHyper { hidden: 64, epochs: 50, batch: 100, val_fraction: 0.2, lr: 1e-3 };
    let (_m, r) = train_predictor(&ds, &hyper, &SeededRng::new(7, 0)).unwrap();
    println!("50 epochs: {:.1}s", t0.elapsed().as_secs_f64());
    for (i, a) in r.val_auroc.iter().enumerate() {
        if i % 5 == 0 || i == 49 { println!("epoch {i}: val_auroc {a:.4} val_loss {:.4} train_loss {:.4}", r.val_loss[i], r.train_loss[i]); }
    }
}
