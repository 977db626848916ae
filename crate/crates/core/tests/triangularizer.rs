use isolab::algebra::{ONE, ZERO};
use isolab::triangularizer::*;
use isolab::{c, Error, Mat2C, C};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CASES: [CaseTag; 5] = [
    CaseTag::Commuting,
    CaseTag::F1Zero,
    CaseTag::F0Zero,
    CaseTag::PZero,
    CaseTag::Generic,
];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn diagonal_pair_is_commuting() {
    let m0 = Mat2C::diag(c(2.0, 0.0), c(0.5, 0.0));
    let m1 = Mat2C::diag(c(3.0, 0.0), c(1.0 / 3.0, 0.0));
    let p = PairProblem::from_matrices(m0, m1).unwrap();
    assert_eq!(p.r0, c(2.0, 0.0));
    assert_eq!(p.r1, c(3.0, 0.0));
    assert_eq!(classify(&p).unwrap(), CaseTag::Commuting);
    let sol = solve(&p, None, true).unwrap();
    assert_eq!((sol.f0, sol.f1), (ZERO, ZERO));
    assert!(verify(&p, &sol).unwrap().max() <= 1e-14);
}

#[test]
fn eigenvalue_labeling() {
    let m = Mat2C::diag(c(0.5, 0.0), c(2.0, 0.0));
    assert_eq!(label_eigenvalue(&m).unwrap(), c(2.0, 0.0));
    // unimodular eigenvalues: larger real part wins, then larger imaginary part
    let u = C::from_polar(1.0, 0.7);
    assert_eq!(label_eigenvalue(&Mat2C::diag(u.conj(), u)).unwrap().im, u.im);
    let w = C::from_polar(1.0, 2.0);
    let z = label_eigenvalue(&Mat2C::diag(w, w.conj())).unwrap();
    assert!((z - w).norm() < 1e-14);
}

#[test]
fn invalid_problems_are_rejected() {
    let m = Mat2C::diag(c(2.0, 0.0), c(0.5, 0.0));
    assert!(matches!(
        PairProblem::new(m * 2.0, m, c(2.0, 0.0), c(2.0, 0.0)),
        Err(Error::InvalidInput(_))
    ));
    assert!(matches!(
        PairProblem::new(m, m, c(3.0, 0.0), c(2.0, 0.0)),
        Err(Error::InvalidInput(_))
    ));
    let j = Mat2C::new(ONE, ONE, ZERO, ONE);
    assert!(PairProblem::new(j, m, ONE, c(2.0, 0.0)).is_err());
}

#[test]
fn random_generic_pairs_solve() {
    let mut g = rng(11);
    let mut worst = 0.0_f64;
    let mut solved = 0;
    while solved < 10_000 {
        let p = match PairProblem::from_matrices(random_sl2(&mut g), random_sl2(&mut g)) {
            Ok(p) => p,
            Err(_) => continue,
        };
        if classify(&p) != Ok(CaseTag::Generic) {
            continue;
        }
        let f = C::new(g.gen_range(-2.0..2.0), g.gen_range(-2.0..2.0));
        for sol in solve_both(&p, Some(f)).unwrap() {
            assert_eq!(sol.f1, f);
            worst = worst.max(verify(&p, &sol).unwrap().max());
        }
        solved += 1;
    }
    assert!(worst <= 1e-10, "worst residual {worst:e}");
}

#[test]
fn every_case_classifies_and_solves() {
    let mut g = rng(12);
    for tag in CASES {
        for _ in 0..500 {
            let p = constructed_problem(&mut g, tag);
            assert_eq!(classify(&p).unwrap(), tag);
            let [a, b] = solve_both(&p, None).unwrap();
            assert_eq!(a.case_tag, tag);
            for sol in [a, b] {
                let rep = verify(&p, &sol).unwrap();
                assert!(rep.max() <= 1e-10, "{tag:?}: {rep:?}");
            }
            match tag {
                CaseTag::F1Zero => assert_eq!((a.f0, a.f1), (ONE, ZERO)),
                CaseTag::F0Zero => assert_eq!((a.f0, a.f1), (ZERO, ONE)),
                CaseTag::PZero => {
                    let expect = -(p.r0 - ONE / p.r0) * (p.r1 - ONE / p.r1);
                    assert!((a.f0 * a.f1 - expect).norm() <= 1e-10 * expect.norm());
                }
                _ => {}
            }
        }
    }
}

#[test]
fn basis_change_characterizes_cases() {
    let mut g = rng(13);
    for _ in 0..200 {
        let [p, q, r, s] = constructed_problem(&mut g, CaseTag::F1Zero).basis_change().unwrap();
        assert!(q.norm() < 1e-10 && r.norm() > 1e-6 && (p * s - q * r - 1.0).norm() < 1e-10);
        let [_, q, r, _] = constructed_problem(&mut g, CaseTag::F0Zero).basis_change().unwrap();
        assert!(r.norm() < 1e-10 && q.norm() > 1e-6);
        let [p, ..] = constructed_problem(&mut g, CaseTag::PZero).basis_change().unwrap();
        assert!(p.norm() < 1e-10);
        let [.., s] = constructed_problem(&mut g, CaseTag::Unsolvable).basis_change().unwrap();
        assert!(s.norm() < 1e-10);
    }
}

#[test]
fn sign_flip_and_perturbation() {
    let mut g = rng(14);
    for tag in CASES {
        let p = constructed_problem(&mut g, tag);
        let [a, b] = solve_both(&p, None).unwrap();
        let (ka, kb) = (a.k.unwrap(), b.k.unwrap());
        assert_eq!(ka, -kb);
        if tag != CaseTag::Commuting {
            // the other square-root branch of the normalizing factors
            let other = solve(&p, None, false).unwrap().k.unwrap();
            assert!((ka + other).norm() <= 1e-12 * ka.norm(), "{tag:?}");
        }
        let flipped = PairSolution { k: Some(-ka), ..a };
        assert_eq!(verify(&p, &flipped).unwrap(), verify(&p, &a).unwrap());
        let d = Mat2C::new(c(1e-6, 0.0), ZERO, c(0.0, 1e-6), ZERO);
        let perturbed = PairSolution { k: Some(ka + d), ..a };
        let rep = verify(&p, &perturbed).unwrap();
        assert!(rep.max() >= 1e-7, "{tag:?}: {rep:?}");
    }
}

#[test]
fn unsolvable_annihilation_tests_agree() {
    let mut g = rng(15);
    for _ in 0..10_000 {
        let p = constructed_problem(&mut g, CaseTag::Unsolvable);
        let d = discriminants(&p);
        assert!(d.a3 <= CLASSIFY_TOL && d.a4 <= CLASSIFY_TOL, "{d:?}");
        let q = constructed_problem(&mut g, CaseTag::Generic);
        let d = discriminants(&q);
        assert!(d.a3 > 10.0 * CLASSIFY_TOL && d.a4 > 10.0 * CLASSIFY_TOL, "{d:?}");
    }
}

#[test]
fn unsolvable_pair_is_reported() {
    let mut g = rng(16);
    let p = constructed_problem(&mut g, CaseTag::Unsolvable);
    assert!(matches!(solve(&p, None, true), Err(Error::UnsolvablePair(_))));
    let generic = constructed_problem(&mut g, CaseTag::Generic);
    assert!(matches!(
        swapped_diagonal_solutions(&generic),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn swapped_diagonals_solve_unsolvable_pairs() {
    let mut g = rng(17);
    for _ in 0..1000 {
        let p = constructed_problem(&mut g, CaseTag::Unsolvable);
        let [a, b] = swapped_diagonal_solutions(&p).unwrap();
        assert_eq!(a.case_tag, CaseTag::F1Zero);
        assert_eq!(b.case_tag, CaseTag::F0Zero);
        assert!(verify(&p.swapped(false, true), &a).unwrap().max() <= 1e-10);
        assert!(verify(&p.swapped(true, false), &b).unwrap().max() <= 1e-10);
    }
}

#[test]
fn f_product_expressions_agree() {
    let mut g = rng(18);
    for tag in [CaseTag::Generic, CaseTag::PZero] {
        for _ in 0..2000 {
            let p = constructed_problem(&mut g, tag);
            let forms = f_product_forms(&p);
            let scale = (1.0 + p.m0.norm()) * (1.0 + p.m1.norm());
            for i in 0..4 {
                for j in 0..i {
                    assert!((forms[i] - forms[j]).norm() <= 1e-10 * scale, "{forms:?}");
                }
            }
            let sol = solve(&p, None, true).unwrap();
            assert!((sol.f0 * sol.f1 - forms[0]).norm() <= 1e-10 * scale);
        }
    }
}

#[test]
fn near_threshold_is_ambiguous() {
    let m0 = Mat2C::diag(c(2.0, 0.0), c(0.5, 0.0));
    let upper = |e: f64| Mat2C::new(c(3.0, 0.0), c(e, 0.0), ZERO, c(1.0 / 3.0, 0.0));
    let probe = PairProblem::new(m0, upper(1e-3), c(2.0, 0.0), c(3.0, 0.0)).unwrap();
    let unit = discriminants(&probe).commutator / 1e-3;
    let eps = 5.0 * CLASSIFY_TOL / unit;
    let p = PairProblem::new(m0, upper(eps), c(2.0, 0.0), c(3.0, 0.0)).unwrap();
    assert!(matches!(classify(&p), Err(Error::AmbiguousClassification(_))));
    let p = PairProblem::new(m0, upper(1e3 * eps), c(2.0, 0.0), c(3.0, 0.0)).unwrap();
    assert_eq!(classify(&p).unwrap(), CaseTag::F1Zero);
}

#[test]
fn jsonl_batch() {
    let mut g = rng(19);
    let a = constructed_problem(&mut g, CaseTag::Generic);
    let b = constructed_problem(&mut g, CaseTag::Unsolvable);
    let line = |p: &PairProblem| {
        serde_json::to_string(&BatchInput {
            m0: p.m0,
            m1: p.m1,
            r0: Some(p.r0),
            r1: Some(p.r1),
            f: None,
        })
        .unwrap()
    };
    let input = format!("{}\n\n{}\nnot json\n", line(&a), line(&b));
    let out: Vec<BatchOutput> = solve_jsonl(&input)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(out.len(), 3);
    assert_eq!(out[0].index, 0);
    assert_eq!(out[0].solution.unwrap().case_tag, CaseTag::Generic);
    assert!(out[0].residuals.unwrap().max() <= 1e-10);
    assert_eq!(out[1].index, 2);
    assert!(out[1].error.as_ref().unwrap().contains("nsolvable"));
    assert!(out[2].error.is_some());
}
