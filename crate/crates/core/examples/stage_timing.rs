//! Per-stage timing of patch sampling at the default patch size.

use std::time::Instant;

use plaque_engine::noise::apply_ct_noise;
use plaque_engine::phantom::{generate_phantom, PhantomConfig};
use plaque_engine::rng::derive_rng;
use plaque_engine::sampler::{sample_patch, SamplerConfig};
use plaque_engine::transforms::{apply_window_bank, augment};
use plaque_engine::volume::crop;

fn main() {
    let (v, m) = generate_phantom(&PhantomConfig::default()).expect("phantom");
    let cfg = SamplerConfig::default();
    let d = cfg.patch_size;
    let a = m.foreground()[0];
    let c = m.coords(a).map(|x| x as i64 - (d / 2) as i64);
    let n = 10;
    let mut rng = derive_rng(1, "timing", 0);

    let t = Instant::now();
    let (mut hu, mut art) = (crop(&v, c, [d; 3]).unwrap(), crop(&m, c, [d; 3]).unwrap());
    for _ in 0..n {
        hu = crop(&v, c, [d; 3]).unwrap();
        art = crop(&m, c, [d; 3]).unwrap();
    }
    println!("crop      {:8.2} ms", t.elapsed().as_secs_f64() * 1e3 / n as f64);
    let t = Instant::now();
    let p = cfg.augment.sample(&mut rng);
    let mut aug = hu.clone();
    for _ in 0..n {
        aug = augment(&hu, &art, &p, cfg.interpolation).unwrap().0;
    }
    println!("augment   {:8.2} ms", t.elapsed().as_secs_f64() * 1e3 / n as f64);
    let t = Instant::now();
    for _ in 0..n {
        aug = apply_ct_noise(&aug, &cfg.noise, &mut rng);
    }
    println!("noise     {:8.2} ms", t.elapsed().as_secs_f64() * 1e3 / n as f64);
    let t = Instant::now();
    for _ in 0..n {
        std::hint::black_box(apply_window_bank(&aug, &cfg.windows));
    }
    println!("window    {:8.2} ms", t.elapsed().as_secs_f64() * 1e3 / n as f64);
    let t = Instant::now();
    for i in 0..n {
        std::hint::black_box(sample_patch(&v, &m, "timing", i as u64, &cfg).unwrap());
    }
    println!("sample    {:8.2} ms", t.elapsed().as_secs_f64() * 1e3 / n as f64);
}
