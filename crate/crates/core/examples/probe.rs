// probe: half-constant cell maps, 8 seeds
use stance_core::corpus::{Instance, Stance};
use stance_core::encoders::Variant;
use stance_core::eval::per_class_prf;
use stance_core::train::{predict_dataset, train_supervised, ModelConfig};
use stance_core::textprep::AliasMap;
use rand::seq::SliceRandom;
use rand::Rng;

fn build(seed: u64, cellmap: usize) -> (Vec<Instance>, Vec<Instance>, Vec<Instance>) {
    let mut rng = stance_core::util::seeded_rng(seed, 9000);
    let fillers = ["the", "a", "see", "today", "really", "people", "say", "still", "very", "now", "here", "think"];
    let mut all = Vec::new();
    let mut id = 0;
    for keyword in ["sun", "rain"] {
        for base in 0..200 {
            let len = rng.gen_range(4..8);
            let mut words: Vec<&str> = (0..len).map(|_| fillers[rng.gen_range(0..fillers.len())]).collect();
            let pos = rng.gen_range(0..=words.len());
            words.insert(pos, keyword);
            let tweet = words.join(" ");
            for target in ["alpha", "beta"] {
                let stance = match (cellmap, target, keyword) {
                    // map2: alpha constant FAVOR; beta splits A/N on keyword
                    (2, "alpha", _) => Stance::Favor,
                    (2, "beta", "sun") => Stance::Against,
                    (2, "beta", "rain") => Stance::None,
                    // map3: beta constant NONE; alpha splits F/A on keyword
                    (3, "alpha", "sun") => Stance::Favor,
                    (3, "alpha", "rain") => Stance::Against,
                    (3, "beta", _) => Stance::None,
                    _ => unreachable!(),
                };
                id += 1;
                all.push((base, Instance { id: id.to_string(), target: target.into(), tweet: tweet.clone(), stance: Some(stance) }));
            }
        }
    }
    let mut bases: Vec<usize> = (0..200).collect();
    bases.shuffle(&mut rng);
    let test_b: std::collections::HashSet<usize> = bases[..25].iter().copied().collect();
    let dev_b: std::collections::HashSet<usize> = bases[25..50].iter().copied().collect();
    let (mut train, mut dev, mut test) = (vec![], vec![], vec![]);
    for (base, inst) in all {
        if test_b.contains(&base) { test.push(inst) } else if dev_b.contains(&base) { dev.push(inst) } else { train.push(inst) }
    }
    (train, dev, test)
}

fn main() {
    for cellmap in [2usize, 3] {
        for variant in [Variant::BiCond, Variant::TweetCondTar, Variant::TweetOnly] {
            print!("map{cellmap} {:<13}: ", variant.as_str());
            for seed in 1..=8u64 {
                let (train, dev, test) = build(seed, cellmap);
                let cfg = ModelConfig {
                    variant, input_dim: 16, hidden_dim: 16,
                    max_epochs: 30, lr: 1e-3, dropout: 0.1, batch_size: 16, seed,
                    ..ModelConfig::default()
                };
                let (model, _) = train_supervised(&train, &dev, &cfg, None).unwrap();
                let gold: Vec<Stance> = test.iter().map(|i| i.stance.unwrap()).collect();
                let pred: Vec<Stance> = predict_dataset(&model, &test, &AliasMap::default()).unwrap().iter().map(|(s, _)| *s).collect();
                print!("{:.3} ", per_class_prf(&gold, &pred).unwrap().macro_f1);
            }
            println!();
        }
    }
}
