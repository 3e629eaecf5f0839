use proptest::prelude::*;
use qpratio::exact::brute_force_qp_ratio;
use qpratio::generators::check_expr1;
use qpratio::hardness::{
    brute_force_weighted_kand, check_smallball, dictator_profile, fourier, gen_kand,
    inverse_fourier, kand_to_qpratio, profile_vector, ug_components, ug_to_intermediate, BoolFn,
    PartialLabeling, UgEdge, UgInstance,
};
use qpratio::{eval_qp_intermediate, FractionalAssignment};

fn table(max_r: usize) -> impl Strategy<Value = BoolFn> {
    (0..=max_r).prop_flat_map(|r| {
        prop::collection::vec(-1.0f64..=1.0, 1 << r).prop_map(move |t| BoolFn::new(r, t).unwrap())
    })
}

fn permutation(r: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..r).collect::<Vec<_>>()).prop_shuffle()
}

/// Cycle constraint graph on `v` vertices with random permutations, plus a
/// random partial labeling.
fn ug_cycle() -> impl Strategy<Value = (UgInstance, PartialLabeling)> {
    (3usize..=4, 2usize..=3).prop_flat_map(|(v, r)| {
        (
            prop::collection::vec(permutation(r), v),
            prop::collection::vec(prop::option::of(0..r), v),
        )
            .prop_map(move |(perms, labels)| {
                let edges = perms
                    .into_iter()
                    .enumerate()
                    .map(|(u, pi)| UgEdge {
                        u,
                        v: (u + 1) % v,
                        pi,
                    })
                    .collect();
                (
                    UgInstance::new(v, r, edges).unwrap(),
                    PartialLabeling::new(labels, r).unwrap(),
                )
            })
    })
}

proptest! {
    #[test]
    fn parseval_holds(f in table(10)) {
        let energy: f64 = fourier(&f).iter().map(|c| c * c).sum();
        prop_assert!((energy - f.l2_sq()).abs() <= 1e-10, "{energy} vs {}", f.l2_sq());
    }

    #[test]
    fn transform_is_an_involution(f in table(10)) {
        let back = inverse_fourier(&fourier(&f));
        for (a, b) in back.iter().zip(f.table()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn smallball_never_fails(f in table(12)) {
        prop_assert!(check_smallball(&f).holds);
    }

    #[test]
    fn expr1_holds_on_random_gammas(case in 0usize..3, raw in prop::collection::vec(0.0f64..=1.0, 25)) {
        let (big_m, m) = [(4, 16), (8, 16), (4, 25)][case];
        let g = &raw[..m];
        prop_assume!(g.iter().any(|&x| x > 0.0));
        let (ratio, holds) = check_expr1(g, big_m, m).unwrap();
        prop_assert!(holds, "ratio {ratio} at M = {big_m}, m = {m}");
    }

    #[test]
    fn ug_matrix_matches_components((ug, l) in ug_cycle()) {
        let (inter, _) = ug_to_intermediate(&ug, 3).unwrap();
        let prof = dictator_profile(&ug, &l).unwrap();
        let comp = ug_components(&ug, &prof).unwrap();
        let x = FractionalAssignment::new(profile_vector(&prof)).unwrap();
        let direct = eval_qp_intermediate(&inter, &x).unwrap().value;
        prop_assert!((direct - comp.ratio).abs() <= 1e-9 * (1.0 + comp.ratio.abs()), "{direct} vs {}", comp.ratio);
    }

    #[test]
    fn perfect_labeling_reaches_ratio_one(v in 3usize..=5, r in 2usize..=4, labels in prop::collection::vec(0usize..4, 5), perms in prop::collection::vec(Just((0..4).collect::<Vec<usize>>()).prop_shuffle(), 5)) {
        let labels: Vec<usize> = labels[..v].iter().map(|&x| x % r).collect();
        let edges = (0..v)
            .map(|u| {
                let w = (u + 1) % v;
                let mut pi: Vec<usize> = perms[u].iter().copied().filter(|&x| x < r).collect();
                let at = pi.iter().position(|&x| x == labels[w]).unwrap();
                pi.swap(at, labels[u]);
                UgEdge { u, v: w, pi }
            })
            .collect();
        let ug = UgInstance::new(v, r, edges).unwrap();
        let l = PartialLabeling::new(labels.into_iter().map(Some).collect(), r).unwrap();
        let comp = ug_components(&ug, &dictator_profile(&ug, &l).unwrap()).unwrap();
        prop_assert!(comp.ratio >= 1.0 - 1e-12, "ratio {}", comp.ratio);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn kand_replication_preserves_the_scaled_optimum(m in 1usize..=3, k in 1usize..=3, w in 1usize..=3, seed in any::<u64>()) {
        let inst = gen_kand(3, m, k, None, seed).unwrap();
        let (img, _) = kand_to_qpratio(&inst, 0.5, Some(w), 12).unwrap();
        let image_opt = brute_force_qp_ratio(&img, 12).unwrap().1.value;
        prop_assert_eq!(image_opt, brute_force_weighted_kand(&inst, w, 12).unwrap());
    }

    #[test]
    fn planted_kand_is_complete(n in 6usize..20, k in 2usize..=4, x in prop::collection::vec(any::<bool>(), 20), seed in any::<u64>()) {
        let x: Vec<i8> = x[..n].iter().map(|&b| if b { 1 } else { -1 }).collect();
        let alpha = 0.25;
        let inst = gen_kand(n, 4 * n, k, Some((&x, alpha)), seed).unwrap();
        let (f, g) = inst.planted_pair().unwrap();
        let theta = inst.theta(alpha, &f, &g).unwrap();
        prop_assert!(theta >= k as f64 / 2.0, "theta {theta} < k/2");
    }
}
