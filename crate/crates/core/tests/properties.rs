use gfflab_core::exploration::{explore, harmonic_support};
use gfflab_core::geometry::{boundary_sets, enumerate_edges};
use gfflab_core::overlay::{build_overlay, LazyOverlay};
use gfflab_core::percolation::{
    chemical_distance, circuit_direct, circuit_dual, label_clusters, one_arm_boundary,
    one_arm_bulk, ClusterLabels, Mode,
};
use gfflab_core::rng::RngStream;
use gfflab_core::sampler::{FieldSample, SpectralSampler};
use gfflab_core::{Annulus, BoxSpec, Site};
use proptest::prelude::*;

fn field_strategy(n: u32) -> impl Strategy<Value = FieldSample> {
    let bx = BoxSpec::new(n);
    prop::collection::vec(-2.0f64..2.0, bx.len())
        .prop_map(move |v| FieldSample::from_values(bx, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn offsets_round_trip(n in 0u32..20, x in -25i32..25, y in -25i32..25) {
        let bx = BoxSpec::new(n);
        let s = Site::new(x, y);
        match bx.offset(s) {
            Some(o) => prop_assert_eq!(bx.site(o), s),
            None => prop_assert!(s.norm_inf() > bx.radius()),
        }
    }

    #[test]
    fn edge_ids_are_a_bijection(n in 0u32..8) {
        let bx = BoxSpec::new(n);
        let edges = enumerate_edges(&bx);
        prop_assert_eq!(edges.len(), bx.num_edges());
        for (id, (a, b)) in edges.iter().enumerate() {
            prop_assert_eq!(bx.edge_id(*a, *b), Some(id));
            prop_assert_eq!(bx.edge_id(*b, *a), Some(id));
        }
    }

    #[test]
    fn boundary_sets_partition_neighbours(n in 1u32..10, k in 0i32..6) {
        let bx = BoxSpec::new(n);
        prop_assume!(k <= bx.radius());
        let (inner, outer) = boundary_sets(&bx, k).unwrap();
        for s in &inner {
            prop_assert_eq!(s.norm_inf(), k);
        }
        for s in &outer {
            prop_assert_eq!(s.norm_inf(), k + 1);
        }
    }

    #[test]
    fn labels_are_idempotent_and_consistent(f in field_strategy(5), h in -1.0f64..1.0) {
        let a = label_clusters(&f, h, Mode::Discrete, None).unwrap();
        let b = label_clusters(&f, h, Mode::Discrete, None).unwrap();
        prop_assert_eq!(&a, &b);
        let bx = f.box_spec();
        for s in bx.sites() {
            let id = a.id(s);
            prop_assert_eq!(id == ClusterLabels::CLOSED, f.get(s) < h);
            if id != ClusterLabels::CLOSED {
                for t in bx.neighbors_in(s) {
                    if f.get(t) >= h {
                        prop_assert_eq!(a.id(t), id);
                    }
                }
            }
        }
    }

    #[test]
    fn events_are_monotone_in_h(f in field_strategy(8), h1 in -1.5f64..1.5, dh in 0.0f64..1.0) {
        let h2 = h1 + dh;
        let arm = |h| one_arm_bulk(&f, h, Mode::Discrete, 0.5, None).unwrap();
        let bd = |h| one_arm_boundary(&f, h, Mode::Discrete, None).unwrap();
        let ann = Annulus::new(2, 4).unwrap();
        prop_assert!(!arm(h2) || arm(h1));
        prop_assert!(!bd(h2) || bd(h1));
        prop_assert!(!circuit_dual(&f, h2, ann) || circuit_dual(&f, h1, ann));
    }

    #[test]
    fn duality_agrees_with_winding_search(f in field_strategy(8), h in -0.5f64..0.5, k in 1u32..4, w in 1u32..5) {
        let ann = Annulus::new(k, (k + w).min(8)).unwrap();
        prop_assert_eq!(circuit_dual(&f, h, ann), circuit_direct(&f, h, ann));
    }

    #[test]
    fn chemical_distance_dominates_sup_distance(f in field_strategy(6), h in -1.0f64..0.5, ax in -6i32..7, ay in -6i32..7, bx_ in -6i32..7, by in -6i32..7) {
        let (a, b) = (Site::new(ax, ay), Site::new(bx_, by));
        let d = chemical_distance(&f, h, &[a], &[b]);
        if let Some(d) = d.distance {
            prop_assert!(d as i32 >= a.dist_inf(b));
            // Triangle inequality through the midpoint set {a}.
            let back = chemical_distance(&f, h, &[b], &[a]).distance;
            prop_assert_eq!(back, Some(d));
        }
    }

    #[test]
    fn metric_refines_discrete(seed in 0u64..1000, h in -1.0f64..1.0) {
        let bx = BoxSpec::new(6);
        let st = RngStream::new(seed, 1);
        let f = SpectralSampler::new(bx).sample(&st);
        let ov = build_overlay(&f, h, 4.0, &st);
        let m = one_arm_bulk(&f, h, Mode::Metric, 0.5, Some(&ov)).unwrap();
        let d = one_arm_bulk(&f, h, Mode::Discrete, 0.5, None).unwrap();
        prop_assert!(!m || d);
        let mut lazy = LazyOverlay::new(&f, h, 4.0, &st);
        use gfflab_core::overlay::EdgeGate;
        for (id, (a, b)) in enumerate_edges(&bx).into_iter().enumerate().step_by(7) {
            prop_assert_eq!(lazy.is_open(bx.offset_unchecked(a), bx.offset_unchecked(b)), ov.is_open_id(id));
        }
    }

    #[test]
    fn exploration_is_deterministic(f in field_strategy(6), h in -1.0f64..1.0) {
        let a = explore(&f, h, &[Site::ORIGIN], None).unwrap();
        let b = explore(&f, h, &[Site::ORIGIN], None).unwrap();
        prop_assert_eq!(&a, &b);
        let d = harmonic_support(f.box_spec(), a.all_revealed());
        for s in &d {
            prop_assert!(a.all_revealed().contains(s));
        }
    }
}
