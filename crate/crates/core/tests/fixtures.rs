use cwtori::family::{jordan_fixture, MuForm};
use cwtori::holonomy::{circle_samples, classify, eigen_structure, holonomy_pair, Case, ClassifyOptions, EigenOptions, TransportOptions};
use cwtori::quat::C64;
use cwtori::TorusLattice;

fn lattice() -> TorusLattice {
    TorusLattice::new(C64::new(2.0, 0.0), C64::new(0.5, 1.5)).unwrap()
}

#[test]
fn zero_form_is_case_three_a() {
    let form = MuForm::zero(16, 16, lattice());
    let label = classify(&form, &circle_samples(0.5, 8), &ClassifyOptions::default()).unwrap();
    assert_eq!(label.label, Case::IIIa);
}

#[test]
fn jordan_fixture_is_case_three_b() {
    let form = jordan_fixture(16, 16, lattice(), C64::new(0.4, -0.2));
    assert!(form.symmetry_residual(C64::new(0.3, 0.5)) < 1e-14);
    let label = classify(&form, &circle_samples(0.5, 8), &ClassifyOptions::default()).unwrap();
    assert_eq!(label.label, Case::IIIb);
}

#[test]
fn jordan_fixture_holonomy_is_unipotent() {
    let form = jordan_fixture(16, 16, lattice(), C64::new(0.4, -0.2));
    let mu = C64::new(0.2, 0.6);
    let (h1, _) = holonomy_pair(&form, mu, (0.0, 0.0), &TransportOptions::default()).unwrap();
    let x = h1.h - cwtori::family::CMatN::<4>::identity();
    assert!((x * x).norm() < 1e-12 && x.norm() > 1e-2);
    let e = eigen_structure(&h1.h, &EigenOptions::default());
    assert_eq!((e.unit_multiplicity, e.rank1), (4, 2));
}
