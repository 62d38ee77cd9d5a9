mod common;

use bearing_crnn::data::signal::{decode_vib1, encode_vib1};
use bearing_crnn::data::{assemble, one_hot, split, window};
use bearing_crnn::training::{
    accuracy, adagrad_step, confusion, msle_grad, msle_loss, AdagradState,
};
use bearing_crnn::{CrnnConfig, CrnnModel, Rng, SignalMatrix, SplitSpec, Tensor};
use proptest::prelude::*;

fn tensor(len: usize, lo: f64, hi: f64) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(lo..hi, len).prop_map(move |v| Tensor::from_vec(&[v.len()], v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn msle_nonnegative_and_zero_only_on_equality(
        y in tensor(12, -0.9, 3.0),
        yhat in tensor(12, -0.9, 3.0),
    ) {
        let l = msle_loss(&y, &yhat).unwrap();
        prop_assert!(l >= 0.0);
        prop_assert_eq!(msle_loss(&y, &y).unwrap(), 0.0);
        if y != yhat {
            prop_assert!(l > 0.0);
        }
    }

    #[test]
    fn msle_grad_matches_central_differences(
        y in tensor(6, 0.0, 1.0),
        yhat in tensor(6, 0.01, 0.99),
    ) {
        let g = msle_grad(&y, &yhat).unwrap();
        let h = 1e-6;
        for i in 0..6 {
            let mut up = yhat.clone();
            up.data_mut()[i] += h;
            let mut down = yhat.clone();
            down.data_mut()[i] -= h;
            let n = (msle_loss(&y, &up).unwrap() - msle_loss(&y, &down).unwrap()) / (2.0 * h);
            let a = g.data()[i];
            prop_assert!((a - n).abs() <= 1e-7 * a.abs().max(n.abs()).max(1e-3));
        }
    }

    #[test]
    fn adagrad_accumulator_never_decreases(
        grads in prop::collection::vec(tensor(5, -3.0, 3.0), 1..20),
        lr in 0.0f64..1.0,
    ) {
        let mut p = Tensor::zeros(&[5]).unwrap();
        let mut s = AdagradState::for_param(&p);
        let mut prev = s.accumulator.clone();
        for g in &grads {
            adagrad_step(&mut p, g, &mut s, lr, 1e-7).unwrap();
            for (a, b) in s.accumulator.data().iter().zip(prev.data()) {
                prop_assert!(a >= b);
            }
            prev = s.accumulator.clone();
        }
    }

    #[test]
    fn adagrad_steps_shrink_under_constant_gradient(g in 0.01f64..5.0, lr in 0.001f64..1.0, n in 2usize..30) {
        let mut p = Tensor::zeros(&[1]).unwrap();
        let grad = Tensor::from_vec(&[1], vec![g]).unwrap();
        let mut s = AdagradState::for_param(&p);
        let mut last = f64::INFINITY;
        for _ in 0..n {
            let before = p.data()[0];
            adagrad_step(&mut p, &grad, &mut s, lr, 0.0).unwrap();
            let step = (before - p.data()[0]).abs();
            prop_assert!(step <= last);
            last = step;
        }
    }

    #[test]
    fn confusion_trace_over_sum_is_accuracy(
        pairs in prop::collection::vec((0usize..5, 0usize..5), 1..200),
    ) {
        let (preds, labels): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let cm = confusion(&preds, &labels, 5).unwrap();
        prop_assert_eq!(cm.total(), preds.len() as u64);
        prop_assert_eq!(cm.accuracy(), accuracy(&preds, &labels).unwrap());
    }

    #[test]
    fn window_count_is_floor(rows in 1usize..500, cols in 1usize..4, len in 1usize..60) {
        let m = SignalMatrix::new(rows, cols, vec![0.5; rows * cols], 1.0).unwrap();
        match window(&m, len) {
            Ok(w) => {
                prop_assert_eq!(w.shape(), &[rows / len, len, cols][..]);
            }
            Err(_) => prop_assert!(rows < len),
        }
    }

    #[test]
    fn vib1_round_trip(rows in 1usize..40, cols in 1usize..5, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let data: Vec<f64> = (0..rows * cols).map(|_| f64::from(rng.normal() as f32)).collect();
        let m = SignalMatrix::new(rows, cols, data, 48_000.0).unwrap();
        let back = decode_vib1(&encode_vib1(&m).unwrap()).unwrap();
        prop_assert_eq!(back.data(), m.data());
    }

    #[test]
    fn shape_chain_matches_forward(
        t in 8usize..40,
        c in 1usize..3,
        k in 1usize..8,
        pool in 1usize..4,
        f in 1usize..4,
        h in 1usize..4,
        classes in 2usize..5,
        batch in 2usize..4,
    ) {
        let mut cfg = CrnnConfig::new(t, c, classes);
        cfg.conv_kernel = k;
        cfg.pool_size = pool;
        cfg.conv_filters = f;
        cfg.lstm_units = h;
        match cfg.shape_chain() {
            Ok(chain) => {
                prop_assert_eq!(&chain[1].shape, &vec![t - k + 1, f]);
                prop_assert_eq!(&chain[4].shape, &vec![(t - k + 1) / pool, f]);
                let model = CrnnModel::build(cfg, &mut Rng::new(1)).unwrap();
                let x = Tensor::uniform(&mut Rng::new(2), &[batch, t, c], -1.0, 1.0).unwrap();
                let y = model.infer(&x).unwrap();
                prop_assert_eq!(y.shape(), &[batch, classes][..]);
                prop_assert!(y.data().iter().all(|&v| v > 0.0 && v < 1.0));
            }
            Err(_) => prop_assert!(t < k || t - k + 1 < pool),
        }
    }

    #[test]
    fn stratified_split_is_a_partition(per_class in 2usize..12, classes in 2usize..4, seed in any::<u64>()) {
        let parts: Vec<(String, Tensor)> = (0..classes)
            .map(|c| {
                let data = (0..per_class * 3).map(|i| (c * 1000 + i) as f64).collect();
                (format!("c{c}"), Tensor::from_vec(&[per_class, 3, 1], data).unwrap())
            })
            .collect();
        let ws = assemble(parts).unwrap();
        let n = ws.len();
        let spec = SplitSpec { train_fraction: 0.5, batch_size: 1, seed, stratified: true };
        let (train, test) = split(&ws, &spec).unwrap();
        prop_assert_eq!(train.len() + test.len(), n);
        let mut seen: Vec<u64> = train.samples().data().iter().chain(test.samples().data()).map(|v| v.to_bits()).collect();
        seen.sort();
        let mut all: Vec<u64> = ws.samples().data().iter().map(|v| v.to_bits()).collect();
        all.sort();
        prop_assert_eq!(seen, all);
        for (c, &count) in train.class_counts().iter().enumerate() {
            let share = count as f64 / train.len() as f64;
            let want = ws.class_counts()[c] as f64 / n as f64;
            prop_assert!((share - want).abs() <= 1.0 / train.len() as f64 + 1e-12);
        }
    }

    #[test]
    fn one_hot_rows_sum_to_one(labels in prop::collection::vec(0usize..6, 1..30)) {
        let t = one_hot(&labels, 6).unwrap();
        for (i, &l) in labels.iter().enumerate() {
            let row = &t.data()[i * 6..(i + 1) * 6];
            prop_assert_eq!(row.iter().sum::<f64>(), 1.0);
            prop_assert_eq!(row[l], 1.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn inference_is_pure_and_permutation_equivariant(seed in any::<u64>(), perm_seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let model = CrnnModel::build(common::toy_config(), &mut rng).unwrap();
        let x = Tensor::uniform(&mut rng, &[6, 20, 2], -2.0, 2.0).unwrap();
        let mut perm: Vec<usize> = (0..6).collect();
        Rng::new(perm_seed).shuffle(&mut perm);
        let base = model.infer(&x).unwrap();
        prop_assert_eq!(&model.infer(&x).unwrap(), &base);
        prop_assert_eq!(model.infer(&x.gather(&perm).unwrap()).unwrap(), base.gather(&perm).unwrap());
    }
}
