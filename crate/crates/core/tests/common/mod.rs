//! Independent oracles and randomized checks, shared by the integration tests
//! and the acceptance runner.
#![allow(dead_code)]

use embpred_core::nncore::rng::{stream_rng, Stream, StreamRng};

pub fn rng(seed: u64, index: u64) -> StreamRng {
    stream_rng(seed, Stream::Derive, index)
}

pub mod grad {
    //! Central finite differences in f64 against hand-written backward passes
    //! run in f64 and f32.

    use super::rng;
    use embpred_core::model::{Batch, EmbNet, ModelConfig, ModelLayout};
    use embpred_core::nncore::{
        softmax_cross_entropy, BatchNorm1d, Dropout, Embedding, Linear, Mode, Real, Relu, Tensor2,
    };
    use embpred_core::preprocess::{CatSpec, ContSpec};
    use rand::Rng;

    pub const TOL_F32: f64 = 1e-3;
    pub const TOL_F64: f64 = 1e-6;
    /// Small enough that a perturbation practically never crosses a ReLU kink.
    pub const STEP: f64 = 1e-6;

    #[derive(Debug, Clone, Copy, Default)]
    pub struct Worst {
        pub cases: usize,
        pub f32: f64,
        pub f64: f64,
    }

    impl Worst {
        fn record(&mut self, e32: f64, e64: f64) {
            self.cases += 1;
            self.f32 = self.f32.max(e32);
            self.f64 = self.f64.max(e64);
        }

        pub fn passes(&self) -> bool {
            self.f32 < TOL_F32 && self.f64 < TOL_F64
        }
    }

    /// ‖a − n‖ / max(‖a‖, ‖n‖), zero when both vanish.
    pub fn rel_err(a: &[f64], n: &[f64]) -> f64 {
        assert_eq!(a.len(), n.len());
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: f64 = a.iter().zip(n).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale = norm(a).max(norm(n));
        if scale == 0.0 {
            0.0
        } else {
            diff / scale
        }
    }

    /// Fourth-order central stencil; its truncation error stays negligible
    /// even where batch norm sees a nearly constant column.
    fn numeric(theta: &[f64], mut loss: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
        let mut t = theta.to_vec();
        (0..t.len())
            .map(|i| {
                let orig = t[i];
                let mut at = |d: f64| {
                    t[i] = orig + d;
                    loss(&t)
                };
                let g = (8.0 * (at(STEP) - at(-STEP)) - (at(2.0 * STEP) - at(-2.0 * STEP))) / (12.0 * STEP);
                t[i] = orig;
                g
            })
            .collect()
    }

    /// Random values exactly representable in f32, so both precisions see the same point.
    fn randv(r: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
        (0..n)
            .map(|_| ((r.random::<f64>() * 2.0 - 1.0) * scale) as f32 as f64)
            .collect()
    }

    fn tensor<T: Real>(rows: usize, cols: usize, v: &[f64]) -> Tensor2<T> {
        Tensor2::from_vec(rows, cols, v.iter().map(|&x| T::of(x)).collect()).unwrap()
    }

    fn weighted_sum<T: Real>(y: &Tensor2<T>, w: &[f64]) -> f64 {
        y.data().iter().zip(w).map(|(a, b)| a.to_f64_lossless() * b).sum()
    }

    fn flat<T: Real>(t: &Tensor2<T>) -> Vec<f64> {
        t.data().iter().map(|v| v.to_f64_lossless()).collect()
    }

    fn check(worst: &mut Worst, theta: &[f64], loss: impl FnMut(&[f64]) -> f64, g64: Vec<f64>, g32: Vec<f64>) {
        let n = numeric(theta, loss);
        worst.record(rel_err(&g32, &n), rel_err(&g64, &n));
    }

    pub fn embedding(cases: usize, seed: u64) -> Worst {
        let mut w = Worst::default();
        for c in 0..cases {
            let mut r = rng(seed, c as u64);
            let (n, d, b) = (r.random_range(1..7), r.random_range(1..5), r.random_range(1..9));
            let idx: Vec<u32> = (0..b).map(|_| r.random_range(0..n as u32)).collect();
            let theta = randv(&mut r, n * d, 1.0);
            let wt = randv(&mut r, b * d, 1.0);
            fn grad<T: Real>(n: usize, d: usize, idx: &[u32], theta: &[f64], wt: &[f64]) -> Vec<f64> {
                let mut e = Embedding::new("e", tensor::<T>(n, d, theta));
                e.forward(idx).unwrap();
                e.backward(&tensor(idx.len(), d, wt)).unwrap();
                flat(&e.table.grad)
            }
            let loss = |t: &[f64]| {
                let e = Embedding::new("e", tensor::<f64>(n, d, t));
                weighted_sum(&e.infer(&idx).unwrap(), &wt)
            };
            check(
                &mut w,
                &theta,
                loss,
                grad::<f64>(n, d, &idx, &theta, &wt),
                grad::<f32>(n, d, &idx, &theta, &wt),
            );
        }
        w
    }

    pub fn linear(cases: usize, seed: u64) -> Worst {
        let mut w = Worst::default();
        for c in 0..cases {
            let mut r = rng(seed, 1000 + c as u64);
            let (i, o, b) = (r.random_range(1..6), r.random_range(1..5), r.random_range(1..6));
            let theta = randv(&mut r, i * o + o + b * i, 1.0);
            let wt = randv(&mut r, b * o, 1.0);
            let split = |t: &[f64]| {
                (
                    t[..i * o].to_vec(),
                    t[i * o..i * o + o].to_vec(),
                    t[i * o + o..].to_vec(),
                )
            };
            fn grad<T: Real>(
                i: usize,
                o: usize,
                b: usize,
                parts: (Vec<f64>, Vec<f64>, Vec<f64>),
                wt: &[f64],
            ) -> Vec<f64> {
                let mut l =
                    Linear::new(tensor::<T>(i, o, &parts.0), parts.1.iter().map(|&v| T::of(v)).collect()).unwrap();
                l.forward(&tensor(b, i, &parts.2)).unwrap();
                let dx = l.backward(&tensor(b, o, wt)).unwrap();
                [flat(&l.weight.grad), flat(&l.bias.grad), flat(&dx)].concat()
            }
            let loss = |t: &[f64]| {
                let (wm, bv, x) = split(t);
                let l = Linear::new(tensor::<f64>(i, o, &wm), bv).unwrap();
                weighted_sum(&l.infer(&tensor(b, i, &x)).unwrap(), &wt)
            };
            check(
                &mut w,
                &theta,
                loss,
                grad::<f64>(i, o, b, split(&theta), &wt),
                grad::<f32>(i, o, b, split(&theta), &wt),
            );
        }
        w
    }

    pub fn relu(cases: usize, seed: u64) -> Worst {
        let mut w = Worst::default();
        for c in 0..cases {
            let mut r = rng(seed, 2000 + c as u64);
            let (rows, cols) = (r.random_range(1..6), r.random_range(1..6));
            // keep inputs away from the kink at 0
            let theta: Vec<f64> = randv(&mut r, rows * cols, 1.0)
                .into_iter()
                .map(|v| if v.abs() < 0.05 { v.signum() * 0.05 + v } else { v })
                .map(|v| v as f32 as f64)
                .collect();
            let wt = randv(&mut r, rows * cols, 1.0);
            fn grad<T: Real>(rows: usize, cols: usize, theta: &[f64], wt: &[f64]) -> Vec<f64> {
                let mut l = Relu::default();
                l.forward(&tensor::<T>(rows, cols, theta));
                flat(&l.backward(&tensor::<T>(rows, cols, wt)).unwrap())
            }
            let loss = |t: &[f64]| weighted_sum(&Relu::infer(&tensor::<f64>(rows, cols, t)), &wt);
            check(
                &mut w,
                &theta,
                loss,
                grad::<f64>(rows, cols, &theta, &wt),
                grad::<f32>(rows, cols, &theta, &wt),
            );
        }
        w
    }

    pub fn batchnorm(cases: usize, seed: u64) -> Worst {
        let mut w = Worst::default();
        for c in 0..cases {
            let mut r = rng(seed, 3000 + c as u64);
            let (b, f) = (r.random_range(2..8), r.random_range(1..5));
            let mode = if c % 2 == 0 { Mode::Train } else { Mode::Eval };
            let theta = randv(&mut r, b * f + 2 * f, 2.0);
            let running_mean = randv(&mut r, f, 1.0);
            let running_var: Vec<f64> = randv(&mut r, f, 1.0).iter().map(|v| v.abs() + 0.5).collect();
            let wt = randv(&mut r, b * f, 1.0);
            let build = |t: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
                (
                    t[..b * f].to_vec(),
                    t[b * f..b * f + f].to_vec(),
                    t[b * f + f..].to_vec(),
                )
            };
            fn make<T: Real>(f: usize, g: &[f64], be: &[f64], rm: &[f64], rv: &[f64]) -> BatchNorm1d<T> {
                let mut bn = BatchNorm1d::<T>::new(f, 0.1, 1e-5).unwrap();
                bn.gamma.value = tensor(1, f, g);
                bn.beta.value = tensor(1, f, be);
                bn.running_mean = rm.iter().map(|&v| T::of(v)).collect();
                bn.running_var = rv.iter().map(|&v| T::of(v)).collect();
                bn
            }
            let grad = |prec64: bool| -> Vec<f64> {
                let (x, g, be) = build(&theta);
                fn run<T: Real>(
                    bn: &mut BatchNorm1d<T>,
                    b: usize,
                    f: usize,
                    x: &[f64],
                    mode: Mode,
                    wt: &[f64],
                ) -> Vec<f64> {
                    bn.forward(&tensor(b, f, x), mode).unwrap();
                    let dx = bn.backward(&tensor(b, f, wt)).unwrap();
                    [flat(&dx), flat(&bn.gamma.grad), flat(&bn.beta.grad)].concat()
                }
                if prec64 {
                    run(
                        &mut make::<f64>(f, &g, &be, &running_mean, &running_var),
                        b,
                        f,
                        &x,
                        mode,
                        &wt,
                    )
                } else {
                    run(
                        &mut make::<f32>(f, &g, &be, &running_mean, &running_var),
                        b,
                        f,
                        &x,
                        mode,
                        &wt,
                    )
                }
            };
            let loss = |t: &[f64]| {
                let (x, g, be) = build(t);
                let mut bn = make::<f64>(f, &g, &be, &running_mean, &running_var);
                weighted_sum(&bn.forward(&tensor(b, f, &x), mode).unwrap(), &wt)
            };
            check(&mut w, &theta, loss, grad(true), grad(false));
        }
        w
    }

    pub fn dropout(cases: usize, seed: u64) -> Worst {
        let mut w = Worst::default();
        for c in 0..cases {
            let mut r = rng(seed, 4000 + c as u64);
            let (rows, cols) = (r.random_range(1..7), r.random_range(1..7));
            let p = r.random::<f64>() * 0.6;
            let theta = randv(&mut r, rows * cols, 1.0);
            let wt = randv(&mut r, rows * cols, 1.0);
            let mask_seed = c as u64;
            fn grad<T: Real>(p: f64, rows: usize, cols: usize, theta: &[f64], wt: &[f64], s: u64) -> Vec<f64> {
                let mut d = Dropout::new(p).unwrap();
                d.forward(&tensor::<T>(rows, cols, theta), Mode::Train, &mut super::rng(s, 99));
                flat(&d.backward(&tensor::<T>(rows, cols, wt)).unwrap())
            }
            let loss = |t: &[f64]| {
                let mut d = Dropout::new(p).unwrap();
                let y = d.forward(
                    &tensor::<f64>(rows, cols, t),
                    Mode::Train,
                    &mut super::rng(mask_seed, 99),
                );
                weighted_sum(&y, &wt)
            };
            check(
                &mut w,
                &theta,
                loss,
                grad::<f64>(p, rows, cols, &theta, &wt, mask_seed),
                grad::<f32>(p, rows, cols, &theta, &wt, mask_seed),
            );
        }
        w
    }

    pub fn cross_entropy(cases: usize, seed: u64) -> Worst {
        let mut w = Worst::default();
        for c in 0..cases {
            let mut r = rng(seed, 5000 + c as u64);
            let b = r.random_range(1..9);
            let theta = randv(&mut r, b * 2, 4.0);
            let targets: Vec<u8> = (0..b).map(|_| r.random_range(0..2u8)).collect();
            fn grad<T: Real>(b: usize, theta: &[f64], targets: &[u8]) -> Vec<f64> {
                flat(&softmax_cross_entropy(&tensor::<T>(b, 2, theta), targets).unwrap().1)
            }
            let loss = |t: &[f64]| softmax_cross_entropy(&tensor::<f64>(b, 2, t), &targets).unwrap().0;
            check(
                &mut w,
                &theta,
                loss,
                grad::<f64>(b, &theta, &targets),
                grad::<f32>(b, &theta, &targets),
            );
        }
        w
    }

    /// The assembled network in train mode (dropout mask fixed by seed), loss =
    /// cross-entropy, gradient with respect to every parameter.
    pub fn network(cases: usize, seed: u64) -> Worst {
        let mut w = Worst::default();
        for c in 0..cases {
            let mut r = rng(seed, 6000 + c as u64);
            let n_cat = r.random_range(0..3);
            let n_cont = r.random_range(if n_cat == 0 { 1 } else { 0 }..4);
            let layout = ModelLayout {
                cat: (0..n_cat)
                    .map(|j| CatSpec {
                        name: format!("c{j}"),
                        cardinality: r.random_range(2..7),
                    })
                    .collect(),
                cont: (0..n_cont)
                    .map(|j| ContSpec {
                        name: format!("x{j}"),
                        log1p: false,
                    })
                    .collect(),
            };
            let depth = r.random_range(1..3);
            let cfg = ModelConfig {
                hidden_sizes: (0..depth).map(|_| r.random_range(2..7)).collect(),
                emb_dropout: 0.2,
                hidden_dropout: 0.2,
                seed: c as u64,
                ..Default::default()
            };
            // two-row batches make batch norm nearly input-independent, leaving
            // gradients at the roundoff floor of the finite differences
            let b = r.random_range(4..10);
            let batch64 = Batch::<f64> {
                cat: layout
                    .cat
                    .iter()
                    .map(|s| (0..b).map(|_| r.random_range(0..s.cardinality as u32)).collect())
                    .collect(),
                cont: tensor(b, n_cont, &randv(&mut r, b * n_cont, 2.0)),
                target: (0..b).map(|_| r.random_range(0..2u8)).collect(),
            };
            let batch32 = Batch::<f32> {
                cat: batch64.cat.clone(),
                cont: batch64.cont.cast(),
                target: batch64.target.clone(),
            };
            let mut base = EmbNet::<f64>::new(layout, &cfg).unwrap();
            let sizes: Vec<usize> = base.params_mut().iter().map(|p| p.len()).collect();
            let theta = randv(&mut r, sizes.iter().sum(), 0.8);
            fn load<T: Real>(net: &mut EmbNet<T>, theta: &[f64]) {
                let mut off = 0;
                for p in net.params_mut() {
                    for v in p.value.data_mut() {
                        *v = T::of(theta[off]);
                        off += 1;
                    }
                }
            }
            load(&mut base, &theta);
            let drop_seed = 7 + c as u64;
            fn grad<T: Real>(net: &EmbNet<f64>, theta: &[f64], batch: &Batch<T>, s: u64) -> Vec<f64> {
                let mut n: EmbNet<T> = net.cast();
                load(&mut n, theta);
                n.zero_grad();
                let logits = n.forward(batch, &mut super::rng(s, 77)).unwrap();
                let (_, dl) = softmax_cross_entropy(&logits, &batch.target).unwrap();
                n.backward(&dl).unwrap();
                n.params_mut().iter().flat_map(|p| flat(&p.grad)).collect()
            }
            let loss = |t: &[f64]| {
                let mut n = base.clone();
                load(&mut n, t);
                let logits = n.forward(&batch64, &mut super::rng(drop_seed, 77)).unwrap();
                softmax_cross_entropy(&logits, &batch64.target).unwrap().0
            };
            check(
                &mut w,
                &theta,
                loss,
                grad::<f64>(&base, &theta, &batch64, drop_seed),
                grad::<f32>(&base, &theta, &batch32, drop_seed),
            );
        }
        w
    }

    /// `(name, result)` for every layer and the assembled network.
    pub fn suite(cases: usize, seed: u64) -> Vec<(&'static str, Worst)> {
        vec![
            ("embedding", embedding(cases, seed)),
            ("linear", linear(cases, seed)),
            ("relu", relu(cases, seed)),
            ("batchnorm", batchnorm(cases, seed)),
            ("dropout", dropout(cases, seed)),
            ("softmax_cross_entropy", cross_entropy(cases, seed)),
            ("embnet", network(cases, seed)),
        ]
    }
}

pub mod auc {
    use super::rng;
    use embpred_core::metrics::{auroc, roc_curve, trapezoid_area};
    use rand::Rng;

    /// Counts concordant pairs directly; ties count one half.
    pub fn brute_force(scores: &[f64], labels: &[u8]) -> f64 {
        let mut twice = 0u64;
        let mut pairs = 0u64;
        for (i, &si) in scores.iter().enumerate() {
            if labels[i] != 1 {
                continue;
            }
            for (j, &sj) in scores.iter().enumerate() {
                if labels[j] != 0 {
                    continue;
                }
                pairs += 1;
                twice += if si > sj {
                    2
                } else if si == sj {
                    1
                } else {
                    0
                };
            }
        }
        twice as f64 / (2 * pairs) as f64
    }

    /// Up to 200 rows, half the instances drawn from a coarse grid so ties abound.
    pub fn instance(seed: u64, index: u64) -> (Vec<f64>, Vec<u8>) {
        let mut r = rng(seed, index);
        let n = r.random_range(2..=200);
        let grid = if r.random::<bool>() {
            Some(r.random_range(1..=12))
        } else {
            None
        };
        let p = r.random_range(0.05..0.95);
        let scores = (0..n)
            .map(|_| match grid {
                Some(g) => r.random_range(0..=g) as f64 / g as f64,
                None => r.random::<f64>(),
            })
            .collect();
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(r.random::<f64>() < p)).collect();
        labels[0] = 0;
        labels[n - 1] = 1;
        (scores, labels)
    }

    /// Largest `(|auroc − brute force|, |trapezoid − auroc|)` over the instances.
    pub fn check(instances: u64, seed: u64) -> (f64, f64, usize) {
        let (mut e1, mut e2, mut tied) = (0.0f64, 0.0f64, 0);
        for i in 0..instances {
            let (s, l) = instance(seed, i);
            let mut sorted = s.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                tied += 1;
            }
            let a = auroc(&s, &l).unwrap();
            e1 = e1.max((a - brute_force(&s, &l)).abs());
            e2 = e2.max((trapezoid_area(&roc_curve(&s, &l).unwrap()) - a).abs());
        }
        (e1, e2, tied)
    }
}

pub mod smote {
    use super::rng;
    use embpred_core::preprocess::{CatSpec, ContSpec, EncodedMatrix};
    use embpred_core::smote::{oversample_with_origins, CategoricalStrategy, SmoteConfig};
    use rand::Rng;

    pub fn random_matrix(r: &mut impl Rng, min_rows: usize) -> EncodedMatrix {
        let n_cat = r.random_range(0..4);
        let n_cont = r.random_range(if n_cat == 0 { 1 } else { 0 }..5);
        let cards: Vec<usize> = (0..n_cat).map(|_| r.random_range(1..6)).collect();
        let mut m = EncodedMatrix::empty(
            cards
                .iter()
                .enumerate()
                .map(|(j, &c)| CatSpec {
                    name: format!("c{j}"),
                    cardinality: c,
                })
                .collect(),
            (0..n_cont)
                .map(|j| ContSpec {
                    name: format!("x{j}"),
                    log1p: false,
                })
                .collect(),
        );
        let n_min = r.random_range(min_rows..min_rows + 25);
        let n_maj = r.random_range(n_min + 1..n_min + 60);
        let minority_label = r.random_range(0..2u8);
        let mut rows = Vec::new();
        for i in 0..n_min + n_maj {
            let label = if i < n_min { minority_label } else { 1 - minority_label };
            // occasional exact duplicates exercise the tie-breaking rule
            if i > 0 && r.random::<f64>() < 0.1 {
                let (c, x, _): &(Vec<u32>, Vec<f64>, u8) = &rows[r.random_range(0..i)];
                let dup = (c.clone(), x.clone(), label);
                rows.push(dup);
                continue;
            }
            let c: Vec<u32> = cards.iter().map(|&k| r.random_range(0..k as u32)).collect();
            let x: Vec<f64> = (0..n_cont)
                .map(|_| (r.random::<f64>() * 6.0 - 3.0).round() / 2.0 + r.random::<f64>() * 0.1)
                .collect();
            rows.push((c, x, label));
        }
        // interleave classes so minority rows are not a prefix
        for i in (1..rows.len()).rev() {
            rows.swap(i, r.random_range(0..=i));
        }
        for (c, x, t) in &rows {
            m.push_row(c, x, &vec![false; n_cont], *t);
        }
        m
    }

    fn pop_std(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
    }

    /// Brute-force neighbour list: full sort by (distance, index).
    pub fn oracle_neighbors(m: &EncodedMatrix, row: usize, k: usize) -> Vec<usize> {
        let label = m.target[row];
        let pool: Vec<usize> = (0..m.n_rows()).filter(|&r| m.target[r] == label).collect();
        let mut stds: Vec<f64> = (0..m.n_cont())
            .map(|j| pop_std(&pool.iter().map(|&r| m.cont_row(r)[j]).collect::<Vec<_>>()))
            .collect();
        stds.sort_by(f64::total_cmp);
        let delta = match stds.len() {
            0 => 1.0,
            n if n % 2 == 1 => stds[n / 2],
            n => (stds[n / 2 - 1] + stds[n / 2]) / 2.0,
        };
        let mut all: Vec<(f64, usize)> = pool
            .iter()
            .filter(|&&r| r != row)
            .map(|&r| {
                let mut d = 0.0;
                for j in 0..m.n_cont() {
                    d += (m.cont_row(row)[j] - m.cont_row(r)[j]).powi(2);
                }
                for j in 0..m.n_cat() {
                    if m.cat_row(row)[j] != m.cat_row(r)[j] {
                        d += delta * delta;
                    }
                }
                (d, r)
            })
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|(_, r)| r).collect()
    }

    #[derive(Debug, Default, Clone, Copy)]
    pub struct Tally {
        pub matrices: usize,
        pub synthetic: usize,
    }

    /// Runs every SMOTE property on random matrices until `min_synthetic`
    /// synthetic rows have been checked. Returns the first violation.
    pub fn check(min_synthetic: usize, seed: u64) -> Result<Tally, String> {
        let mut t = Tally::default();
        let mut i = 0u64;
        while t.synthetic < min_synthetic {
            let mut r = rng(seed, 10_000 + i);
            i += 1;
            let k = r.random_range(1..6);
            let m = random_matrix(&mut r, k + 1);
            let cfg = SmoteConfig {
                k_neighbors: k,
                seed: i,
                categorical_strategy: if r.random::<bool>() {
                    CategoricalStrategy::MajorityVote
                } else {
                    CategoricalStrategy::CopySeed
                },
                categorical_penalty: None,
            };
            let (out, origins) = oversample_with_origins(&m, &cfg).map_err(|e| e.to_string())?;
            let ctx = format!("matrix {i}");
            let (neg, pos) = out.class_counts();
            if neg != pos {
                return Err(format!("{ctx}: classes {neg}/{pos}"));
            }
            if out.select_rows(&(0..m.n_rows()).collect::<Vec<_>>()) != m {
                return Err(format!("{ctx}: original rows changed"));
            }
            let (again, _) = oversample_with_origins(&m, &cfg).map_err(|e| e.to_string())?;
            let bits = |x: &EncodedMatrix| x.cont.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            if again.cat != out.cat || bits(&again) != bits(&out) || again.target != out.target {
                return Err(format!("{ctx}: rerun differs"));
            }
            let mut hood_cache = std::collections::HashMap::new();
            for (s, o) in origins.iter().enumerate() {
                let row = m.n_rows() + s;
                let hood = hood_cache
                    .entry(o.seed_row)
                    .or_insert_with(|| oracle_neighbors(&m, o.seed_row, k));
                if &o.neighborhood != hood {
                    return Err(format!(
                        "{ctx}: neighbourhood of {} {:?} != oracle {:?}",
                        o.seed_row, o.neighborhood, hood
                    ));
                }
                if !hood.contains(&o.neighbor_row) {
                    return Err(format!("{ctx}: neighbour {} outside neighbourhood", o.neighbor_row));
                }
                if out.target[row] != m.target[o.seed_row] {
                    return Err(format!("{ctx}: synthetic row {row} has the wrong label"));
                }
                for j in 0..m.n_cont() {
                    let (a, b) = (m.cont_row(o.seed_row)[j], m.cont_row(o.neighbor_row)[j]);
                    let v = out.cont_row(row)[j];
                    if v < a.min(b) || v > a.max(b) {
                        return Err(format!("{ctx}: row {row} col {j} value {v} outside [{a}, {b}]"));
                    }
                }
                for j in 0..m.n_cat() {
                    let v = out.cat_row(row)[j];
                    let seed_v = m.cat_row(o.seed_row)[j];
                    let attested = v == seed_v || hood.iter().any(|&h| m.cat_row(h)[j] == v);
                    if !attested {
                        return Err(format!("{ctx}: row {row} categorical {j} = {v} not attested"));
                    }
                    if cfg.categorical_strategy == CategoricalStrategy::CopySeed && v != seed_v {
                        return Err(format!("{ctx}: copy strategy changed the seed's value"));
                    }
                    if cfg.categorical_strategy == CategoricalStrategy::MajorityVote {
                        let count =
                            |x: u32| usize::from(seed_v == x) + hood.iter().filter(|&&h| m.cat_row(h)[j] == x).count();
                        let best = count(v);
                        let seed_count = count(seed_v);
                        let max = (0..m.cat_specs[j].cardinality as u32).map(count).max().unwrap();
                        if best != max || (seed_count == max && v != seed_v) {
                            return Err(format!("{ctx}: row {row} categorical {j} is not the majority vote"));
                        }
                    }
                }
            }
            t.matrices += 1;
            t.synthetic += origins.len();
        }
        Ok(t)
    }

    /// Seeds at (0, 0) and (1, 1) with k = 1: every synthetic point lies on the
    /// diagonal segment. Returns the number of rows checked.
    pub fn segment_check(rows: usize, seed: u64) -> Result<usize, String> {
        let mut m = EncodedMatrix::empty(
            vec![],
            vec![
                ContSpec {
                    name: "a".into(),
                    log1p: false,
                },
                ContSpec {
                    name: "b".into(),
                    log1p: false,
                },
            ],
        );
        m.push_row(&[], &[0.0, 0.0], &[false, false], 1);
        m.push_row(&[], &[1.0, 1.0], &[false, false], 1);
        for i in 0..rows + 2 {
            m.push_row(&[], &[i as f64, -1.0], &[false, false], 0);
        }
        let cfg = SmoteConfig {
            k_neighbors: 1,
            seed,
            ..Default::default()
        };
        let (out, _) = oversample_with_origins(&m, &cfg).map_err(|e| e.to_string())?;
        let n = out.n_rows() - m.n_rows();
        for r in m.n_rows()..out.n_rows() {
            let p = out.cont_row(r);
            if p[0] != p[1] || !(0.0..=1.0).contains(&p[0]) {
                return Err(format!("synthetic point {p:?} is off the segment"));
            }
        }
        Ok(n)
    }
}

pub mod prep {
    use super::rng;
    use embpred_core::ingest::{generate_synthetic, RawTable};
    use embpred_core::preprocess::{filter_diabetes, keep_first_encounter, run_pipeline, transform_and_standardize};
    use embpred_core::schema::DatasetSchema;
    use rand::Rng;
    use regex::Regex;
    use std::collections::{HashMap, HashSet};

    /// Largest `|mean|` and `|std − 1|` over non-constant standardized columns,
    /// and the number of constant columns skipped.
    pub fn standardization(rows: usize, seed: u64) -> (f64, f64, usize) {
        let schema = DatasetSchema::uci_diabetes();
        let raw = generate_synthetic(&schema, rows, 0.112, seed).unwrap();
        let p = run_pipeline(&raw, &schema).unwrap();
        let (m, s) = transform_and_standardize(&p.matrix).unwrap();
        let k = m.n_cont();
        let n = m.n_rows() as f64;
        let (mut worst_mean, mut worst_std, mut constant) = (0.0f64, 0.0f64, 0);
        for j in 0..k {
            if s.stats[j].std <= 1e-12 {
                constant += 1;
                continue;
            }
            let col: Vec<f64> = (0..m.n_rows()).map(|r| m.cont[r * k + j]).collect();
            let mean = col.iter().sum::<f64>() / n;
            let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            worst_mean = worst_mean.max(mean.abs());
            worst_std = worst_std.max((std - 1.0).abs());
        }
        (worst_mean, worst_std, constant)
    }

    /// After dedup: patient ids unique, and each survivor is that patient's
    /// smallest encounter. Returns `(rows before, rows after)`.
    pub fn dedup(rows: usize, seed: u64) -> Result<(usize, usize), String> {
        let schema = DatasetSchema::uci_diabetes();
        let raw = generate_synthetic(&schema, rows, 0.112, seed).unwrap();
        let pid = raw.column_index(&schema.patient_id).unwrap();
        let eid = raw.column_index(&schema.encounter_id).unwrap();
        let mut first: HashMap<&str, i64> = HashMap::new();
        for r in &raw.rows {
            let e: i64 = r[eid].parse().unwrap();
            let slot = first.entry(r[pid].as_str()).or_insert(e);
            *slot = (*slot).min(e);
        }
        let out = keep_first_encounter(&raw, &schema).map_err(|e| e.to_string())?;
        let mut seen = HashSet::new();
        for r in &out.rows {
            if !seen.insert(r[pid].clone()) {
                return Err(format!("patient {} kept twice", r[pid]));
            }
            if r[eid].parse::<i64>().unwrap() != first[r[pid].as_str()] {
                return Err(format!("patient {} kept a later encounter", r[pid]));
            }
        }
        if seen.len() != first.len() {
            return Err("a patient disappeared".into());
        }
        Ok((raw.row_count(), out.row_count()))
    }

    /// Codes near the 250 family: exact hits, suffixes, prefixes and noise.
    fn noise(r: &mut impl Rng, lo: usize, hi: usize) -> String {
        const ALPHABET: &[u8] = b"0123456789.VE-";
        let n = r.random_range(lo..hi);
        (0..n)
            .map(|_| ALPHABET[r.random_range(0..ALPHABET.len())] as char)
            .collect()
    }

    /// Codes near the 250 family: exact hits, suffixes, prefixes and noise.
    pub fn fuzz_code(r: &mut impl Rng) -> String {
        match r.random_range(0..6) {
            0 => format!("250.{}", noise(r, 0, 4)),
            1 => format!("250{}", noise(r, 0, 3)),
            2 => {
                let head = noise(r, 1, 3);
                format!("{head}250{}", noise(r, 0, 3))
            }
            3 => format!("25{}", noise(r, 0, 4)),
            4 => "250".to_string(),
            _ => noise(r, 0, 7),
        }
    }

    /// Compares the diabetes filter with a regex on `codes` fuzzed rows.
    /// Returns `(codes, matches)`.
    pub fn diabetes_fuzz(codes: usize, seed: u64) -> Result<(usize, usize), String> {
        let re = Regex::new(r"^250(\..*)?$").unwrap();
        let schema = DatasetSchema::uci_diabetes();
        let mut r = rng(seed, 20_000);
        let rows: Vec<Vec<String>> = (0..codes)
            .map(|_| vec![fuzz_code(&mut r), "401.9".into(), "V45".into()])
            .collect();
        let expected: Vec<bool> = rows.iter().map(|row| re.is_match(&row[0])).collect();
        let tagged = RawTable::new(
            vec!["diag_1".into(), "diag_2".into(), "diag_3".into(), "row".into()],
            rows.iter()
                .enumerate()
                .map(|(i, row)| {
                    let mut v = row.clone();
                    v.push(i.to_string());
                    v
                })
                .collect(),
        )
        .unwrap();
        let kept = filter_diabetes(&tagged, &schema).map_err(|e| e.to_string())?;
        let kept_ids: HashSet<usize> = kept.rows.iter().map(|row| row[3].parse().unwrap()).collect();
        for (i, &e) in expected.iter().enumerate() {
            if e != kept_ids.contains(&i) {
                return Err(format!("code '{}': regex says {e}, filter disagrees", rows[i][0]));
            }
        }
        Ok((codes, kept_ids.len()))
    }
}

pub mod fixtures {
    use super::rng;
    use embpred_core::ingest::generate_synthetic;
    use embpred_core::model::{
        model_from_bytes, model_to_bytes, train, Batch, EmbNet, ModelBundle, ModelConfig, ModelLayout,
    };
    use embpred_core::preprocess::{run_pipeline, transform_and_standardize, EncodedMatrix};
    use embpred_core::schema::DatasetSchema;
    use rand::Rng;

    /// Preprocessed synthetic cohort, before scaling.
    pub fn cohort(rows: usize, seed: u64) -> (EncodedMatrix, DatasetSchema) {
        let schema = DatasetSchema::uci_diabetes();
        let raw = generate_synthetic(&schema, rows, 0.112, seed).unwrap();
        let p = run_pipeline(&raw, &schema).unwrap();
        (p.matrix, p.schema)
    }

    /// A briefly trained bundle plus the unscaled data it was trained on.
    pub fn trained_bundle(seed: u64) -> (ModelBundle, EncodedMatrix, DatasetSchema) {
        let (matrix, schema) = cohort(600, seed);
        let (scaled, standardizer) = transform_and_standardize(&matrix).unwrap();
        let config = ModelConfig {
            hidden_sizes: vec![32, 16],
            epochs: 2,
            batch_size: 64,
            seed,
            ..Default::default()
        };
        let mut net = EmbNet::<f32>::new(ModelLayout::of(&scaled), &config).unwrap();
        train(&mut net, &scaled, &config, |_| {}).unwrap();
        (
            ModelBundle {
                schema: schema.clone(),
                standardizer,
                net,
            },
            matrix,
            schema,
        )
    }

    /// Serializes and reloads `bundle`, then compares logits bit for bit on
    /// `batches` random batches. Returns the number of rows compared.
    pub fn logits_roundtrip(
        bundle: &ModelBundle,
        data: &EncodedMatrix,
        schema: &DatasetSchema,
        batches: usize,
        seed: u64,
    ) -> Result<usize, String> {
        let bytes = model_to_bytes(bundle).map_err(|e| e.to_string())?;
        let loaded = model_from_bytes(&bytes).map_err(|e| e.to_string())?;
        if model_to_bytes(&loaded).map_err(|e| e.to_string())? != bytes {
            return Err("re-serialized model differs".into());
        }
        let a = bundle.prepare(data, schema).map_err(|e| e.to_string())?;
        let b = loaded.prepare(data, schema).map_err(|e| e.to_string())?;
        let mut r = rng(seed, 30_000);
        let mut rows_seen = 0;
        for i in 0..batches {
            let n = r.random_range(1..=64);
            let rows: Vec<usize> = (0..n).map(|_| r.random_range(0..a.n_rows())).collect();
            let la = bundle.net.infer(&Batch::gather(&a, &rows)).map_err(|e| e.to_string())?;
            let lb = loaded.net.infer(&Batch::gather(&b, &rows)).map_err(|e| e.to_string())?;
            let bits = |t: &[f32]| t.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            if bits(la.data()) != bits(lb.data()) {
                return Err(format!("batch {i}: logits differ after reload"));
            }
            rows_seen += n;
        }
        Ok(rows_seen)
    }
}
