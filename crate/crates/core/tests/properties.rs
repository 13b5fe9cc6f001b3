use approx::assert_relative_eq;
use kaufs::evalmetrics::{acc, distance_correlation, kmeans_fit, nmi, ClusteringLabels};
use kaufs::kaufs::{fit, rank_rows, update_h, update_w, FactorPair, Problem};
use kaufs::kernelspace::{alignment, center, gram, sign_split};
use kaufs::mkaufs::{project_simplex, solve_eta};
use kaufs::{DataMatrix, GramMatrix, Kernel, SolverConfig};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-10.0f64..10.0, rows * cols)
        .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

fn symmetric(n: usize) -> impl Strategy<Value = Array2<f64>> {
    matrix(n, n).prop_map(|m| (&m + &m.t()) * 0.5)
}

fn data(n: usize, d: usize) -> impl Strategy<Value = DataMatrix> {
    matrix(n, d).prop_map(|v| DataMatrix::from_values(v, None).unwrap())
}

fn kernel() -> impl Strategy<Value = Kernel> {
    prop_oneof![
        Just(Kernel::Linear),
        (1u32..4).prop_map(|degree| Kernel::Polynomial { offset: 1.0, degree }),
        (0.5f64..20.0).prop_map(|sigma| Kernel::Gaussian { sigma }),
        (0.5f64..20.0).prop_map(|sigma| Kernel::Laplacian { sigma }),
    ]
}

fn labels(n: usize, c: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..c, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn centering_is_idempotent_and_zeroes_row_sums(k in symmetric(7)) {
        let c = center(&GramMatrix::raw(k).unwrap()).unwrap();
        let cc = center(&c).unwrap();
        let scale = 1.0 + c.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in c.values().iter().zip(cc.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
        for row in c.values().rows() {
            prop_assert!(row.sum().abs() <= 1e-11 * scale);
        }
        prop_assert_eq!(c.values(), &c.values().t().to_owned());
    }

    #[test]
    fn sign_split_is_exact(m in matrix(5, 6)) {
        let s = sign_split(&m);
        for ((p, n), v) in s.pos.iter().zip(&s.neg).zip(&m) {
            prop_assert!(*p >= 0.0 && *n >= 0.0);
            prop_assert!(*p == 0.0 || *n == 0.0);
            prop_assert_eq!((p - n).to_bits(), v.to_bits());
        }
    }

    #[test]
    fn alignment_is_symmetric_and_scale_invariant(x in data(8, 3), ka in kernel(), kb in kernel(), s in 0.1f64..10.0) {
        let a = gram(&x, &ka).unwrap();
        let b = gram(&x, &kb).unwrap();
        if let (Ok(ab), Ok(ba)) = (alignment(&a, &b, true), alignment(&b, &a, true)) {
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&ab));
            let scaled = GramMatrix::raw(a.values() * s).unwrap();
            let sab = alignment(&scaled, &b, true).unwrap();
            prop_assert!((sab - ab).abs() < 1e-9);
            let self_align = alignment(&a, &a, true).unwrap();
            prop_assert!((self_align - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gram_matrices_are_symmetric(x in data(6, 4), k in kernel()) {
        let g = gram(&x, &k).unwrap();
        prop_assert_eq!(g.values(), &g.values().t().to_owned());
    }

    #[test]
    fn simplex_projection_is_feasible_and_nearest(v in prop::collection::vec(-5.0f64..5.0, 1..6),
                                                 probe in prop::collection::vec(0.0f64..1.0, 6)) {
        let p = project_simplex(&v);
        prop_assert!(p.iter().all(|&e| e >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Any other simplex point is no closer to v.
        let total: f64 = probe[..v.len()].iter().sum::<f64>() + 1e-9;
        let q: Vec<f64> = probe[..v.len()].iter().map(|x| (x + 1e-9 / v.len() as f64) / total).collect();
        let dist = |a: &[f64]| a.iter().zip(&v).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        prop_assert!(dist(&p) <= dist(&q) + 1e-12);
    }

    #[test]
    fn eta_satisfies_kkt(scores in prop::collection::vec(-3.0f64..3.0, 1..6), gamma in 0.01f64..10.0) {
        let w = solve_eta(&scores, gamma).unwrap();
        // Gradient −fᵢ/2 + γηᵢ equals a common λ on the support and is ≥ λ off it.
        let grad: Vec<f64> = scores.iter().zip(&w.eta).map(|(f, e)| -0.5 * f + gamma * e).collect();
        let lambda = grad.iter().zip(&w.eta).filter(|(_, e)| **e > 0.0).map(|(g, _)| *g)
            .fold(f64::INFINITY, f64::min);
        for (g, e) in grad.iter().zip(&w.eta) {
            if *e > 0.0 {
                prop_assert!((g - lambda).abs() < 1e-9);
            } else {
                prop_assert!(*g >= lambda - 1e-9);
            }
        }
    }

    #[test]
    fn eta_is_monotone_in_scores(scores in prop::collection::vec(-3.0f64..3.0, 2..6), gamma in 0.01f64..10.0,
                                 i in 0usize..6, bump in 0.0f64..2.0) {
        let i = i % scores.len();
        let base = solve_eta(&scores, gamma).unwrap();
        let mut raised = scores.clone();
        raised[i] += bump;
        let up = solve_eta(&raised, gamma).unwrap();
        prop_assert!(up.eta[i] >= base.eta[i] - 1e-12);
    }

    #[test]
    fn updates_preserve_nonnegativity(x in data(10, 5), k in kernel(), seed in 0u64..1000,
                                      alpha in 0.1f64..10.0, beta in 0.1f64..10.0) {
        let kc = center(&gram(&x, &k).unwrap()).unwrap();
        let cfg = SolverConfig { alpha, beta, ..Default::default() };
        let problem = Problem::new(&x, &kc, &cfg).unwrap();
        let f = FactorPair::random(5, 2, seed);
        let w = update_w(&f, problem.split(), &cfg).unwrap();
        prop_assert!(w.min_entry() >= 0.0);
        let h = update_h(&w, problem.split(), &cfg).unwrap();
        prop_assert!(h.min_entry() >= 0.0);
        prop_assert_eq!(&h.w, &w.w);
    }

    #[test]
    fn ranking_is_a_permutation_sorted_by_norm(w in matrix(8, 3)) {
        let w = w.mapv(f64::abs);
        let (idx, norms) = rank_rows(&w);
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..8).collect::<Vec<_>>());
        prop_assert!(idx.windows(2).all(|p| norms[p[0]] > norms[p[1]] || (norms[p[0]] == norms[p[1]] && p[0] < p[1])));
    }

    #[test]
    fn acc_and_nmi_ignore_label_permutations(truth in labels(20, 3), pred in labels(20, 4), perm in Just(()).prop_perturb(|_, mut r| {
        let mut p: Vec<usize> = (0..4).collect();
        for i in (1..4).rev() { p.swap(i, r.random_range(0..=i)); }
        p
    })) {
        let t = ClusteringLabels::from_ids(&truth).unwrap();
        let p = ClusteringLabels::from_ids(&pred).unwrap();
        let permuted: Vec<usize> = pred.iter().map(|&l| perm[l]).collect();
        let q = ClusteringLabels::from_ids(&permuted).unwrap();
        prop_assert_eq!(acc(&p, &t).unwrap(), acc(&q, &t).unwrap());
        prop_assert!((nmi(&p, &t).unwrap() - nmi(&q, &t).unwrap()).abs() < 1e-12);
        let a = acc(&p, &t).unwrap();
        let m = nmi(&p, &t).unwrap();
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&m));
        prop_assert_eq!(acc(&t, &t).unwrap(), 1.0);
        prop_assert!((nmi(&p, &t).unwrap() - nmi(&t, &p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn distance_correlation_is_symmetric_and_affine_invariant(x in prop::collection::vec(-5.0f64..5.0, 12),
                                                              y in prop::collection::vec(-5.0f64..5.0, 12),
                                                              a in 0.1f64..10.0, b in -5.0f64..5.0) {
        let x = Array1::from(x);
        let y = Array1::from(y);
        let xy = distance_correlation(x.view(), y.view()).unwrap();
        let yx = distance_correlation(y.view(), x.view()).unwrap();
        prop_assert!((xy - yx).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&xy));
        let moved = x.mapv(|v| -a * v + b);
        let m = distance_correlation(moved.view(), y.view()).unwrap();
        prop_assert!((m - xy).abs() < 1e-9);
    }

    #[test]
    fn kmeans_sse_never_increases(x in matrix(15, 2), c in 1usize..5, seed in 0u64..100) {
        let fit = kmeans_fit(&x, c, seed).unwrap();
        prop_assert!(fit.sse_history.windows(2).all(|p| p[1] <= p[0] * (1.0 + 1e-12) + 1e-12));
        prop_assert_eq!(fit.labels.len(), 15);
    }
}

#[test]
fn fit_is_reproducible_across_thread_counts() {
    let x = DataMatrix::from_values(
        Array2::from_shape_fn((12, 6), |(i, j)| ((i * 7 + j * 3) % 11) as f64 - 5.0),
        None,
    )
    .unwrap();
    let kc = center(&gram(&x, &Kernel::Linear).unwrap()).unwrap();
    let cfg = SolverConfig { alpha: 10.0, beta: 10.0, seed: 4, ..Default::default() };
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| fit(&x, &kc, 3, &cfg).unwrap());
    let b = four.install(|| fit(&x, &kc, 3, &cfg).unwrap());
    assert_eq!(a, b);
    assert_relative_eq!(a.trace.objective_per_iter[0], b.trace.objective_per_iter[0]);
}
