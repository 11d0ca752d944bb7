use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use projseq::compiler::{compile, depth_bound, embed_povm, CompileOptions};
use projseq::fixtures;
use projseq::io::{tree_from_json, tree_to_json};
use projseq::quantum::born_distribution;
use projseq::realizability::find_commuting_projector;
use projseq::simulator::exact_distribution;
use projseq::verifier::{verify, Tolerances};

const INSTANCES: usize = 30;

#[test]
fn random_instances_reproduce_born_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for n in 0..INSTANCES {
        let (povm, p) = fixtures::random_realizable_instance(&mut rng);
        for reorder in [true, false] {
            let options = CompileOptions {
                skip_stage1: false,
                reorder,
            };
            let tree = compile(&povm, &p, options).unwrap();
            for _ in 0..5 {
                for state in [
                    fixtures::random_pure_state(povm.dim(), &mut rng),
                    fixtures::random_mixed_state(povm.dim(), &mut rng),
                ] {
                    let got = exact_distribution(&tree, &state).unwrap().probabilities;
                    let want = born_distribution(&povm, &state).unwrap();
                    for (g, w) in got.iter().zip(&want) {
                        assert!((g - w).abs() <= 1e-9, "instance {n}: {got:?} vs {want:?}");
                    }
                }
            }
        }
    }
}

#[test]
fn random_instances_verify_within_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for n in 0..INSTANCES {
        let (povm, p) = fixtures::random_realizable_instance(&mut rng);
        let tree = compile(&povm, &p, CompileOptions::default()).unwrap();
        let report = verify(&tree, &povm, Tolerances::default()).unwrap();
        assert!(report.passed, "instance {n}: {report:?}");
        let bound = depth_bound(&povm, &p, &tree.element_order, false).unwrap();
        assert_eq!(report.depth_bound, bound);
        assert!(tree.depth() <= bound);
    }
}

#[test]
fn reordering_never_increases_the_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..INSTANCES {
        let (povm, p) = fixtures::random_realizable_instance(&mut rng);
        let plain = compile(
            &povm,
            &p,
            CompileOptions {
                skip_stage1: false,
                reorder: false,
            },
        )
        .unwrap();
        let reordered = compile(&povm, &p, CompileOptions::default()).unwrap();
        let b_plain = depth_bound(&povm, &p, &plain.element_order, false).unwrap();
        let b_re = depth_bound(&povm, &p, &reordered.element_order, false).unwrap();
        assert!(b_re <= b_plain);
    }
}

#[test]
fn found_projector_compiles_as_well_as_the_planted_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..INSTANCES {
        let (povm, _) = fixtures::random_realizable_instance(&mut rng);
        let p = find_commuting_projector(&povm)
            .unwrap()
            .projector
            .expect("realizable");
        let tree = compile(&povm, &p, CompileOptions::default()).unwrap();
        assert!(verify(&tree, &povm, Tolerances::default()).unwrap().passed);
    }
}

#[test]
fn embedded_random_povms_verify() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10 {
        let povm = fixtures::random_povm(3, 3, &mut rng);
        let (embedded, p) = embed_povm(&povm);
        let tree = compile(
            &embedded,
            &p,
            CompileOptions {
                skip_stage1: true,
                reorder: true,
            },
        )
        .unwrap();
        assert!(
            verify(&tree, &embedded, Tolerances::default())
                .unwrap()
                .passed
        );
    }
}

#[test]
fn trees_survive_json_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let (povm, p) = fixtures::random_realizable_instance(&mut rng);
        let mut tree = compile(&povm, &p, CompileOptions::default()).unwrap();
        assert_eq!(tree_from_json(&tree_to_json(&tree).unwrap()).unwrap(), tree);
        tree.strip_operators();
        let back = tree_from_json(&tree_to_json(&tree).unwrap()).unwrap();
        assert_eq!(back, tree);
        assert!(verify(&back, &povm, Tolerances::default()).unwrap().passed);
    }
}
