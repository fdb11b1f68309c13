use std::collections::HashSet;

use mann_core::batch::mirror_batch;
use mann_core::config::{ModelConfig, Variant};
use mann_core::eval::{evaluate, BucketKey, Predictor};
use mann_core::model::{Model, RunOptions};
use mann_core::optim::{clip_global_norm, Adam};
use mann_core::params::ParamStore;
use mann_core::stack_memory::Action;
use mann_core::train::{read_metrics_csv, train, write_metrics_csv, Split, TrainConfig};
use mann_core::Result;
use mann_tasks::dataset::Dataset;
use mann_tasks::m10ae::{eval_m10ae, gen_m10ae_dataset, M10aeSample};
use mann_tasks::mirror::{gen_mirror_dataset, MirrorSample};
use mann_tensor::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_mirror(variant: Variant, seed: u64) -> ModelConfig {
    ModelConfig { controller_dim: 16, memory_cells: 8, cell_dim: 6, ..ModelConfig::mirror(variant, seed) }
}

#[test]
fn adam_solves_a_quadratic() {
    // f(x, y) = (x - 3)^2 + 10 (y + 1)^2
    let mut params = ParamStore::<f64>::new();
    params.insert("p", Array2::from_shape_vec((1, 2), vec![-4.0, 5.0]).unwrap());
    let mut adam = Adam::new(&params, 0.05, 0.9, 0.999, 1e-8);
    let mut steps = 0;
    loop {
        let p = params.get("p").unwrap().clone();
        let (x, y) = (p[[0, 0]], p[[0, 1]]);
        if (x - 3.0).abs() < 1e-6 && (y + 1.0).abs() < 1e-6 {
            break;
        }
        assert!(steps < 5000, "not converged: ({x}, {y})");
        let mut grads = ParamStore::new();
        grads.insert("p", Array2::from_shape_vec((1, 2), vec![2.0 * (x - 3.0), 20.0 * (y + 1.0)]).unwrap());
        adam.step(&mut params, &grads);
        steps += 1;
    }
}

#[test]
fn clipping_keeps_direction() {
    let mut grads = ParamStore::<f64>::new();
    grads.insert("a", Array2::from_shape_vec((1, 2), vec![30.0, -40.0]).unwrap());
    let before = clip_global_norm(&mut grads, 10.0);
    assert_eq!(before, 50.0);
    let g = grads.get("a").unwrap();
    assert!((g[[0, 0]] - 6.0).abs() < 1e-12 && (g[[0, 1]] + 8.0).abs() < 1e-12);
}

fn mirror_sets(seed: u64) -> (Dataset, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (
        Dataset::Mirror(gen_mirror_dataset(200, 1, 3, &mut rng).unwrap()),
        Dataset::Mirror(gen_mirror_dataset(40, 1, 3, &mut rng).unwrap()),
    )
}

#[test]
fn training_is_bit_identical_across_reruns() {
    let (tr, dev) = mirror_sets(1);
    let cfg = TrainConfig { max_steps: 60, eval_every: 20, seed: 4, ..Default::default() };
    for variant in Variant::ALL {
        let run = || {
            let mut model = Model::<f64>::new(small_mirror(variant, 3)).unwrap();
            let out = train(&mut model, &cfg, &tr, &dev).unwrap();
            let mut csv = Vec::new();
            write_metrics_csv(&out.metrics, &mut csv).unwrap();
            (csv, model.params)
        };
        let (a, pa) = run();
        let (b, pb) = run();
        assert_eq!(a, b, "{variant}");
        assert_eq!(pa, pb, "{variant}");
    }
}

#[test]
fn metrics_have_one_row_per_split_and_eval() {
    let (tr, dev) = mirror_sets(2);
    let cfg = TrainConfig { max_steps: 100, eval_every: 25, ..Default::default() };
    let mut model = Model::<f64>::new(small_mirror(Variant::Lstm, 0)).unwrap();
    let out = train(&mut model, &cfg, &tr, &dev).unwrap();
    for split in [Split::Train, Split::Dev] {
        let rows: Vec<usize> = out.metrics.iter().filter(|r| r.split == split).map(|r| r.step).collect();
        assert_eq!(rows, vec![25, 50, 75, 100]);
    }
    let mut csv = Vec::new();
    write_metrics_csv(&out.metrics, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("step,split,loss,accuracy\n"));
    assert_eq!(read_metrics_csv(&text).unwrap(), out.metrics);
}

#[test]
fn training_loss_decreases() {
    let (tr, dev) = mirror_sets(3);
    let cfg = TrainConfig { max_steps: 300, eval_every: 50, ..Default::default() };
    let mut model = Model::<f64>::new(small_mirror(Variant::Sann, 1)).unwrap();
    let out = train(&mut model, &cfg, &tr, &dev).unwrap();
    let train_rows: Vec<f64> = out.metrics.iter().filter(|r| r.split == Split::Train).map(|r| r.loss).collect();
    assert!(train_rows.last().unwrap() < &(0.9 * train_rows[0]), "{train_rows:?}");
}

#[test]
fn sann_overfits_a_single_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let samples: Vec<MirrorSample> = gen_mirror_dataset(32, 4, 4, &mut rng).unwrap();
    let data = Dataset::Mirror(samples);
    let mut model = Model::<f32>::new(ModelConfig::mirror(Variant::Sann, 2)).unwrap();
    let cfg = TrainConfig { max_steps: 2000, eval_every: 100, stop_at_dev_accuracy: Some(1.0), ..Default::default() };
    let out = train(&mut model, &cfg, &data, &data).unwrap();
    assert_eq!(out.summary.best_dev_accuracy, Some(1.0), "{:?}", out.summary);
    assert_eq!(model.score(&data, None).unwrap().accuracy(), 1.0);
}

#[test]
fn forced_push_puts_transformed_state_on_top() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples = gen_mirror_dataset(3, 2, 2, &mut rng).unwrap();
    let model = Model::<f64>::new(small_mirror(Variant::Sann, 9)).unwrap();
    let batch = mirror_batch::<f64>(&samples).unwrap();
    let pass = model.forward(&batch, &RunOptions { forced_action: Some(Action::Push(0)) }).unwrap();
    let push = model.params.get("stack.push").unwrap();
    let bias = model.params.get("stack.push_bias").unwrap();
    for step in &pass.steps {
        let h = pass.tape.value(step.hidden);
        let expected = h.dot(push) + bias;
        let top = pass.tape.value(step.memory[0]);
        assert!((top - &expected).iter().all(|d| d.abs() < 1e-12));
        assert_eq!(pass.tape.value(step.readout.unwrap()), top);
    }
}

#[test]
fn lstm_output_comes_from_the_controller_alone() {
    let model = Model::<f64>::new(small_mirror(Variant::Lstm, 0)).unwrap();
    assert_eq!(model.params.get("out.weight").unwrap().nrows(), 16);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let batch = mirror_batch::<f64>(&gen_mirror_dataset(2, 1, 1, &mut rng).unwrap()).unwrap();
    let pass = model.forward(&batch, &RunOptions::default()).unwrap();
    assert_eq!(pass.steps.len(), 3);
    assert!(pass.steps.iter().all(|s| s.readout.is_none() && s.memory.is_empty()));
}

struct Oracle;

impl Predictor for Oracle {
    fn predict_mirror(&self, samples: &[MirrorSample]) -> Result<Vec<Vec<u16>>> {
        Ok(samples.iter().map(MirrorSample::target).collect())
    }
    fn predict_m10ae(&self, samples: &[M10aeSample]) -> Result<Vec<u8>> {
        Ok(samples.iter().map(|s| eval_m10ae(&s.tokens).unwrap()).collect())
    }
}

struct Guesser(std::cell::RefCell<ChaCha8Rng>);

impl Predictor for Guesser {
    fn predict_mirror(&self, samples: &[MirrorSample]) -> Result<Vec<Vec<u16>>> {
        let mut rng = self.0.borrow_mut();
        Ok(samples.iter().map(|s| (0..s.len()).map(|_| rng.random_range(0..512)).collect()).collect())
    }
    fn predict_m10ae(&self, samples: &[M10aeSample]) -> Result<Vec<u8>> {
        let mut rng = self.0.borrow_mut();
        Ok(samples.iter().map(|_| rng.random_range(0..10)).collect())
    }
}

#[test]
fn oracle_stub_scores_perfectly() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mirror = Dataset::Mirror(gen_mirror_dataset(300, 1, 10, &mut rng).unwrap());
    let m10ae = Dataset::M10ae(gen_m10ae_dataset(300, 6, &mut HashSet::new(), &mut rng));
    for data in [mirror, m10ae] {
        let report = evaluate(&Oracle, &data, BucketKey::default_for(&data), None).unwrap();
        assert_eq!(report.accuracy, Some(1.0));
        assert!(report.buckets.iter().all(|b| b.count == 0 || b.accuracy == Some(1.0)));
        assert_eq!(report.buckets.iter().map(|b| b.count).sum::<usize>(), data.len());
    }
}

#[test]
fn random_stub_scores_at_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let data = Dataset::M10ae(gen_m10ae_dataset(20_000, 14, &mut HashSet::new(), &mut rng));
    let guesser = Guesser(std::cell::RefCell::new(ChaCha8Rng::seed_from_u64(3)));
    let acc = evaluate(&guesser, &data, BucketKey::NLpo, None).unwrap().accuracy.unwrap();
    assert!((acc - 0.1).abs() <= 0.02, "{acc}");
}

#[test]
fn untrained_mirror_model_scores_zero_beyond_length_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = Dataset::Mirror(gen_mirror_dataset(400, 2, 5, &mut rng).unwrap());
    let model = Model::<f64>::new(small_mirror(Variant::Sann, 0)).unwrap();
    let report = evaluate(&model, &data, BucketKey::Length, Some((1, 6))).unwrap();
    for b in &report.buckets {
        match b.bucket {
            1 | 6 => assert_eq!((b.count, b.accuracy), (0, None)),
            _ => assert_eq!(b.accuracy, Some(0.0)),
        }
    }
    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.contains("\n1,0,null\n") && text.ends_with("all,400,0\n"), "{text}");
}
