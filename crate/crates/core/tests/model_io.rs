mod common;

use std::path::PathBuf;

use adiabat::almost::almost_isometric_check;
use adiabat::clifford::PhiBundleSpec;
use adiabat::frame::LieFrameModel;
use adiabat::grid::CoordFoliatedTorus;
use adiabat::model_io::*;
use adiabat::Error;

fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn load(name: &str) -> adiabat::Result<ModelFile> {
    load_model(&models_dir().join(name))
}

#[test]
fn every_shipped_model_except_the_broken_one_loads() {
    for entry in std::fs::read_dir(models_dir()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let r = load_model(&path);
        if name == "jacobi_violation.toml" {
            assert!(matches!(r, Err(Error::Jacobi { .. })), "{r:?}");
        } else {
            assert!(r.is_ok(), "{name}: {r:?}");
        }
    }
}

fn same_metric(a: &CoordFoliatedTorus, b: &CoordFoliatedTorus) -> bool {
    let n = a.n();
    [0.1, 0.37, 0.62, 0.9].iter().all(|&s| {
        let x: Vec<f64> = (0..n).map(|i| (s * (i + 1) as f64).fract()).collect();
        (0..n).all(|mu| (0..n).all(|nu| (a.entry(mu, nu).map_or(0.0, |f| f.eval(&x)) - b.entry(mu, nu).map_or(0.0, |f| f.eval(&x))).abs() < 1e-15))
    })
}

#[test]
fn warped_file_matches_builtin() {
    let ModelFile::Grid { model, phi } = load("warped.toml").unwrap() else { panic!("grid expected") };
    assert!(same_metric(&model, &CoordFoliatedTorus::warped(2, 2, 0.5)));
    assert_eq!(phi, PhiBundleSpec::normal());
}

#[test]
fn tilted_file_matches_test_model() {
    let ModelFile::Grid { model, phi } = load("tilted.toml").unwrap() else { panic!("grid expected") };
    let t = common::tilted_model(1.0);
    assert!(same_metric(&model, &t));
    assert_eq!(phi.rank(2), 4);
}

#[test]
fn kodaira_thurston_files() {
    let ModelFile::Frame { model, split, .. } = load("kodaira_thurston_split.toml").unwrap() else { panic!() };
    assert_eq!(model, LieFrameModel::kodaira_thurston(&[1, 4]).unwrap().with_id("kodaira_thurston_split"));
    assert!(almost_isometric_check(&split.unwrap()).gated_pass());
    let ModelFile::Frame { split, .. } = load("kodaira_thurston_bad_split.toml").unwrap() else { panic!() };
    assert!(!almost_isometric_check(&split.unwrap()).gated_pass());
}

#[test]
fn frame_round_trip() {
    let m = LieFrameModel::new(
        "rt",
        4,
        &[2, 4],
        &[adiabat::frame::Bracket::new(1, 3, 2, num_rational::BigRational::new((-3).into(), 7.into()))],
    )
    .unwrap();
    let spec = ModelSpec::Frame(FrameSpec::from_model(&m, None, &PhiBundleSpec::trivial()));
    let text = spec.to_toml().unwrap();
    assert!(text.contains("-3/7"), "{text}");
    let ModelFile::Frame { model, split, phi } = parse_model(&text).unwrap() else { panic!() };
    assert_eq!(model, m);
    assert!(split.is_none());
    assert!(phi.is_trivial());
}

#[test]
fn grid_round_trip() {
    let m = common::twisted_model();
    let phi = PhiBundleSpec::single(adiabat::clifford::PhiKind::Sym, 2);
    let text = ModelSpec::Grid(GridSpec::from_model(&m, &phi)).to_toml().unwrap();
    let ModelFile::Grid { model, phi: back } = parse_model(&text).unwrap() else { panic!() };
    assert_eq!(model.gf, m.gf);
    assert_eq!(model.gp, m.gp);
    assert_eq!(back, phi);
}

#[test]
fn malformed_files_are_rejected() {
    let bad = [
        "kind = \"frame\"\nid = \"x\"\nn = 2\nleaf = [1]\nbrackets = [[1, 2, 2, \"1/0\"]]\n",
        "kind = \"frame\"\nid = \"x\"\nn = 2\nleaf = [3]\n",
        "kind = \"frame\"\nid = \"x\"\nn = 3\nleaf = [1]\nsplit = { f1 = [2], f2 = [1] }\n",
        "kind = \"grid\"\nid = \"x\"\np = 1\nq = 1\n[[metric]]\nblock = \"side\"\nrow = 0\ncol = 0\n",
        "kind = \"grid\"\nid = \"x\"\np = 1\nq = 1\n[[metric]]\nblock = \"leaf\"\nrow = 0\ncol = 1\n",
        "kind = \"grid\"\nid = \"x\"\np = 1\nq = 1\nphi = [{ kind = \"tensor\", k = 1 }]\n",
        "kind = \"torus\"\nid = \"x\"\n",
        "not toml at all [",
    ];
    for text in bad {
        assert!(parse_model(text).is_err(), "accepted: {text}");
    }
}
