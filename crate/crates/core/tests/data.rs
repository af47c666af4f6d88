use attrsparse::data::{generate_blobs, generate_synthetic, load_csv, translate_features, BlobSpec, Schema, Span, SplitKind, SyntheticSpec};
use attrsparse::{DatasetF32, DatasetF64, Error};
use std::io::Write;
use std::path::PathBuf;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn synthetic_moments() {
    let spec = SyntheticSpec::new(vec![1.0, 0.0], vec![0.1, 0.1], 0.5, 42).unwrap();
    let ds: DatasetF64 = generate_synthetic(&spec, 100_000).unwrap();
    for (i, a) in [(0, 1.0), (1, 0.0)] {
        let yx: Vec<f64> = (0..ds.n_examples()).map(|k| ds.signed_label(k) * ds.row(k)[i]).collect();
        let (m, se) = mean_se(&yx);
        assert!((m - a).abs() <= 3.0 * se, "feature {i}: {m} ± {se}");
    }
    let ys: Vec<f64> = ds.labels().iter().map(|&y| y as f64).collect();
    let (m, se) = mean_se(&ys);
    assert!(m.abs() <= 3.0 * se);

    let again: DatasetF64 = generate_synthetic(&spec, 100_000).unwrap();
    assert_eq!(ds.features(), again.features());
    assert_eq!(ds.labels(), again.labels());
}

#[test]
fn synthetic_class_balance() {
    let spec = SyntheticSpec::new(vec![0.5], vec![1.0], 0.2, 1).unwrap();
    let ds: DatasetF64 = generate_synthetic(&spec, 50_000).unwrap();
    let pos: Vec<f64> = ds.labels().iter().map(|&y| f64::from(u8::from(y == 1))).collect();
    let (m, se) = mean_se(&pos);
    assert!((m - 0.2).abs() <= 3.0 * se);
}

#[test]
fn synthetic_spec_validation() {
    assert!(SyntheticSpec::new(vec![1.0], vec![0.0], 0.5, 0).is_err());
    assert!(SyntheticSpec::new(vec![1.0], vec![1.0], 1.0, 0).is_err());
    assert!(SyntheticSpec::new(vec![1.0, 2.0], vec![1.0], 0.5, 0).is_err());
    let s = SyntheticSpec::new(vec![1.0], vec![1.0], 0.5, 0).unwrap();
    assert!(generate_synthetic::<f64>(&s, 0).is_err());
}

/// Within each class the features are independent, so the partial
/// correlation given `y` vanishes.
#[test]
fn synthetic_conditional_independence() {
    let spec = SyntheticSpec::new(vec![1.0, -0.5, 0.3], vec![1.0, 0.5, 2.0], 0.5, 3).unwrap();
    let ds: DatasetF64 = generate_synthetic(&spec, 100_000).unwrap();
    let n = ds.n_examples();
    // Residualize on the class mean.
    let resid = |i: usize| -> Vec<f64> {
        let mut sums = [0.0; 2];
        let mut counts = [0.0; 2];
        for k in 0..n {
            let c = usize::from(ds.label(k) == 1);
            sums[c] += ds.row(k)[i];
            counts[c] += 1.0;
        }
        (0..n)
            .map(|k| {
                let c = usize::from(ds.label(k) == 1);
                ds.row(k)[i] - sums[c] / counts[c]
            })
            .collect()
    };
    let r: Vec<Vec<f64>> = (0..3).map(resid).collect();
    for i in 0..3 {
        for j in (i + 1)..3 {
            let prod: Vec<f64> = (0..n).map(|k| r[i][k] * r[j][k]).collect();
            let (m, se) = mean_se(&prod);
            assert!(m.abs() <= 3.0 * se, "({i},{j}): {m} ± {se}");
        }
    }
}

#[test]
fn translation_is_idempotent_and_holds_out_of_sample() {
    let spec = SyntheticSpec::new(vec![0.8, -0.4, 0.0], vec![1.0, 1.0, 1.0], 0.5, 5).unwrap();
    let raw: DatasetF64 = generate_synthetic(&spec, 40_000).unwrap();
    let shifted = raw.to_parts();
    let mut parts = shifted;
    parts.features.mapv_inplace(|v| v + 3.0);
    let raw = DatasetF64::new(parts).unwrap();

    let (t1, a1) = translate_features(&raw).unwrap();
    let (t2, a2) = translate_features(&t1).unwrap();
    let s1 = t1.shift().unwrap();
    let s2 = t2.shift().unwrap();
    for i in 0..3 {
        assert!((s2[i] - s1[i]).abs() <= 1e-12);
        assert!((a2.a[i] - a1.a[i]).abs() <= 1e-12);
        assert!((s1[i] - 3.0).abs() < 0.05);
    }

    // Held-out conditional means match â·y.
    let test = t1.indices(SplitKind::Test);
    for i in 0..3 {
        for y in [1, -1] {
            let vals: Vec<f64> = test.iter().filter(|&&k| t1.label(k) == y).map(|&k| t1.row(k)[i]).collect();
            let (m, se) = mean_se(&vals);
            let expect = a1.a[i] * y as f64;
            // The estimate of â carries its own training-split error.
            assert!((m - expect).abs() <= 3.0 * se * (1.0 + (3.0f64 / 7.0).sqrt()), "feature {i}, y={y}");
        }
    }
}

#[test]
fn mushroom_encoding() {
    let dir = data_dir();
    let schema = Schema::load(&dir.join("mushroom.schema.toml")).unwrap();
    let ds: DatasetF64 = load_csv(&dir.join("mushroom.csv"), &schema, "class", 0).unwrap();
    assert_eq!(ds.dim(), 98);
    assert_eq!(ds.n_examples(), 5644);
    assert_eq!(ds.encoding_map().len(), 22);
    assert!(ds.label_map().contains(&("e".to_string(), 1)));
    for col in ds.encoding_map() {
        assert!(matches!(col.span, Span::Categorical { .. }));
        for k in 0..ds.n_examples() {
            let ones: f64 = col.span.positions().map(|p| ds.row(k)[p]).sum();
            assert_eq!(ones, 1.0);
        }
    }

    // Decoding recovers the file's values.
    let text = std::fs::read_to_string(dir.join("mushroom.csv")).unwrap();
    let first: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let decoded = ds.decode_row(0);
    for (c, v) in decoded.iter().enumerate() {
        assert_eq!(v.as_deref(), Some(first[c]));
    }
    let n_train = ds.indices(SplitKind::Train).len();
    assert_eq!(n_train, (0.7 * 5644.0f64).round() as usize);
}

#[test]
fn spambase_standardized_on_training_split() {
    let dir = data_dir();
    let schema = Schema::load(&dir.join("spambase.schema.toml")).unwrap();
    let ds: DatasetF64 = load_csv(&dir.join("spambase.csv"), &schema, "spam", 0).unwrap();
    assert_eq!(ds.dim(), 57);
    let train = ds.indices(SplitKind::Train);
    for i in 0..ds.dim() {
        let m = train.iter().map(|&k| ds.row(k)[i]).sum::<f64>() / train.len() as f64;
        assert!(m.abs() < 1e-9);
    }
}

#[test]
fn split_seed_changes_split_but_not_content() {
    let dir = data_dir();
    let schema = Schema::load(&dir.join("mushroom.schema.toml")).unwrap();
    let a: DatasetF64 = load_csv(&dir.join("mushroom.csv"), &schema, "class", 0).unwrap();
    let b: DatasetF64 = load_csv(&dir.join("mushroom.csv"), &schema, "class", 0).unwrap();
    let c: DatasetF64 = load_csv(&dir.join("mushroom.csv"), &schema, "class", 1).unwrap();
    assert_eq!(a.split(), b.split());
    assert_ne!(a.split().fingerprint(), c.split().fingerprint());
    assert_eq!(a.labels(), c.labels());
}

#[test]
fn small_csv_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "color,y\nred,a\nblue,b\nred,a").unwrap();
    let schema = Schema::from_toml_str(
        "[[columns]]\nname = \"color\"\nkind = \"categorical\"\n[[columns]]\nname = \"y\"\nkind = \"label\"\n",
    )
    .unwrap();
    let ds: DatasetF32 = load_csv(&path, &schema, "y", 0).unwrap();
    assert_eq!(ds.dim(), 2);
    assert_eq!(ds.encoding_map().len(), 1);

    let missing = load_csv::<f64>(&dir.path().join("nope.csv"), &schema, "y", 0);
    assert!(matches!(missing, Err(Error::Io { .. })));

    std::fs::write(&path, "color,y\nred,a\nblue,b\ngreen,c\n").unwrap();
    assert!(matches!(load_csv::<f64>(&path, &schema, "y", 0), Err(Error::LabelCount { .. })));
}

#[test]
fn dataset_json_round_trip_is_exact() {
    let ds: DatasetF64 = generate_blobs(&BlobSpec::default(), 50).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.json");
    ds.save_json(&path).unwrap();
    let back = DatasetF64::load_json(&path).unwrap();
    assert_eq!(back.features(), ds.features());
    assert_eq!(back.labels(), ds.labels());
    assert_eq!(back.image_shape(), Some((8, 8)));
    assert_eq!(back.split(), ds.split());
}

#[test]
fn blobs_are_in_unit_range() {
    let ds: DatasetF64 = generate_blobs(&BlobSpec::default(), 200).unwrap();
    assert_eq!(ds.dim(), 64);
    assert!(ds.features().iter().all(|&v| (0.0..=1.0).contains(&v)));
    let again: DatasetF64 = generate_blobs(&BlobSpec::default(), 200).unwrap();
    assert_eq!(ds.features(), again.features());
}
