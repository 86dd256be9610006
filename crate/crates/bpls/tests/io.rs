use std::path::{Path, PathBuf};

use bpls::artifact::ModelArtifact;
use bpls::config::{PositiveTraits, RunConfig};
use bpls::error::CliError;
use bpls::fit::{fit_model, prediction_rng, FitOptions};
use bpls::table::{load_csv, load_predictors, write_dataset, CsvLayout};
use bpls_core::data::RawDataset;
use bpls_core::model::{ModelVariant, VariantKind};
use bpls_core::synth::{generate, SynthConfig, Sparsity};
use bpls_core::{Matrix, RngStream};

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn small_data(seed: u64) -> (RawDataset, RawDataset) {
    let cfg = SynthConfig { n_train: 40, n_test: 15, p: 6, r: 2, q_true: 2, sigma2: 0.1, psi2: 0.1, sparsity: Sparsity::None, seed };
    let d = generate(&cfg, &mut RngStream::new(seed)).unwrap();
    (d.train, d.test)
}

fn quick_options(kind: VariantKind) -> FitOptions {
    let mut cfg = RunConfig::default();
    cfg.chain.burn_in = 200;
    cfg.chain.keep = 1000;
    cfg.chain.seed = 17;
    cfg.variant = ModelVariant::new(kind);
    FitOptions::from_config(&cfg)
}

#[test]
fn three_row_file_with_one_response() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.csv", "a,b,y\n1,2,3\n4,5,6.5\n7,8,9\n");
    let d = load_csv(&p, &CsvLayout::new(vec!["y".into()])).unwrap();
    assert_eq!((d.x.rows(), d.x.cols(), d.y.cols()), (3, 2, 1));
    assert_eq!(d.x_names, ["a", "b"]);
    assert_eq!(d.y[(1, 0)], 6.5);
}

#[test]
fn non_numeric_cell_reports_its_location() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.csv", "a,b,c,d,e,y\n1,2,3,4,5,6\n1,2,3,4,oops,6\n");
    match load_csv(&p, &CsvLayout::new(vec!["y".into()])) {
        Err(CliError::Parse { row, col, .. }) => assert_eq!((row, col), (2, 5)),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn rows_with_missing_cells_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.csv", "a,b,y\n1,,3\n4,5,6\n7,8,NA\n1,1,1\n");
    match load_csv(&p, &CsvLayout::new(vec!["y".into()])) {
        Err(CliError::MissingCells { rows, .. }) => assert_eq!(rows, vec![1, 3]),
        other => panic!("expected missing cells, got {other:?}"),
    }
}

#[test]
fn unknown_response_is_a_missing_column() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.csv", "a,b,y\n1,2,3\n4,5,6\n");
    let e = load_csv(&p, &CsvLayout::new(vec!["z".into()])).unwrap_err();
    assert!(matches!(e, CliError::MissingColumn { ref name, .. } if name == "z"));
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn semicolon_delimiter() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.csv", "a;y\n1.5;2\n3;4\n");
    let layout = CsvLayout { delimiter: b';', responses: vec!["y".into()] };
    assert_eq!(load_csv(&p, &layout).unwrap().x[(0, 0)], 1.5);
}

#[test]
fn grain_shaped_file_keeps_its_shape() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = RngStream::new(3);
    let x = Matrix::from_fn(166, 235, |_, _| rng.normal());
    let y = Matrix::from_fn(166, 2, |_, _| rng.normal());
    let names = |p: &str, k: usize| (1..=k).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let d = RawDataset::new(x, y, names("w", 235), vec!["protein".into(), "moisture".into()]).unwrap();
    let p = dir.path().join("grain.csv");
    write_dataset(&p, &d).unwrap();
    let back = load_csv(&p, &CsvLayout::new(vec!["protein".into(), "moisture".into()])).unwrap();
    assert_eq!((back.x.rows(), back.x.cols(), back.y.cols()), (166, 235, 2));
    assert_eq!(back, d, "written values must parse back exactly");
}

#[test]
fn prediction_schema_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let names: Vec<String> = vec!["a".into(), "b".into()];
    let y = vec!["y".to_string()];
    let ok = write(dir.path(), "ok.csv", "a,b\n1,2\n");
    assert!(load_predictors(&ok, b',', &names, &y).unwrap().y.is_none());
    let with_y = write(dir.path(), "wy.csv", "a,y,b\n1,5,2\n");
    let got = load_predictors(&with_y, b',', &names, &y).unwrap();
    assert_eq!(got.x.row(0), [1.0, 2.0]);
    assert_eq!(got.y.unwrap()[(0, 0)], 5.0);
    let extra = write(dir.path(), "extra.csv", "a,b,c\n1,2,3\n");
    let e = load_predictors(&extra, b',', &names, &y).unwrap_err();
    assert!(matches!(e, CliError::SchemaMismatch { .. }), "{e}");
    let renamed = write(dir.path(), "renamed.csv", "a,c\n1,2\n");
    assert!(matches!(load_predictors(&renamed, b',', &names, &y), Err(CliError::SchemaMismatch { .. })));
}

#[test]
fn artifact_round_trip_is_exact() {
    for kind in [VariantKind::Bpls, VariantKind::SsBpls, VariantKind::LBpls] {
        let (train, test) = small_data(5);
        let model = fit_model(&train, &quick_options(kind), None).unwrap();
        let art = ModelArtifact::from_fit(&model);
        let bytes = art.to_bytes().unwrap();
        let back = ModelArtifact::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, art, "{kind:?}");
        assert_eq!(back.to_bytes().unwrap(), bytes);

        let direct = model.predict(&test.x, 0.95, &mut prediction_rng(1)).unwrap();
        let reloaded = back.predict(&test.x, 0.95, &mut prediction_rng(1)).unwrap();
        assert_eq!(direct, reloaded);
        assert_eq!(art.report(Some(&test.x)).unwrap(), back.report(Some(&test.x)).unwrap());
    }
}

#[test]
fn transformed_traits_round_trip_changepoints() {
    let (mut train, test) = small_data(8);
    for i in 0..train.n() {
        train.y[(i, 1)] = 1.0 + train.y[(i, 1)].exp();
    }
    let mut opts = quick_options(VariantKind::Bpls);
    opts.positive_traits = PositiveTraits::Auto;
    let model = fit_model(&train, &opts, None).unwrap();
    assert!(model.transform.changepoints[0].is_none());
    assert!(model.transform.changepoints[1].is_some());
    let art = ModelArtifact::from_fit(&model);
    let back = ModelArtifact::from_bytes(&art.to_bytes().unwrap(), Path::new("mem")).unwrap();
    assert_eq!(back.transform, model.transform);
    let pred = back.predict(&test.x, 0.9, &mut prediction_rng(2)).unwrap();
    for i in 0..test.x.rows() {
        assert!(pred.original.lower[(i, 1)] > 0.0, "positive trait keeps positive support");
        assert!(pred.original.lower[(i, 1)] <= pred.original.upper[(i, 1)]);
    }
}

#[test]
fn corrupted_artifacts_are_rejected() {
    let (train, _) = small_data(6);
    let model = fit_model(&train, &quick_options(VariantKind::Bpls), None).unwrap();
    let bytes = ModelArtifact::from_fit(&model).to_bytes().unwrap();
    let p = Path::new("mem");

    let mut flipped = bytes.clone();
    let last = flipped.len() - 1;
    flipped[last] ^= 1;
    assert!(matches!(ModelArtifact::from_bytes(&flipped, p), Err(CliError::Artifact { .. })));

    let mut wrong_version = bytes.clone();
    let at = bytes.windows(11).position(|w| w == b"version = 1").unwrap() + 10;
    wrong_version[at] = b'9';
    let e = ModelArtifact::from_bytes(&wrong_version, p).unwrap_err();
    assert!(e.to_string().contains("version"), "{e}");
    assert_eq!(e.exit_code(), 4);

    assert!(ModelArtifact::from_bytes(&bytes[..bytes.len() - 8], p).is_err());
    assert!(ModelArtifact::from_bytes(b"not a model", p).is_err());
}

#[test]
fn named_positive_trait_must_exist() {
    let (train, _) = small_data(9);
    let mut opts = quick_options(VariantKind::Bpls);
    opts.positive_traits = PositiveTraits::Named(vec!["nope".into()]);
    assert!(matches!(fit_model(&train, &opts, None), Err(CliError::Usage(_))));
}
