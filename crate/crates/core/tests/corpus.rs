use std::path::{Path, PathBuf};

use hdrestore::audio::{write_wav, AudioBuffer};
use hdrestore::dsp::{Cutoff, FilterKind};
use hdrestore::sim::{generate_corpus, load_pair, regenerate, CorpusManifest, CorpusOptions, NoiseSource, Split, Subset};

fn write_clean(dir: &Path, n: usize) -> Vec<PathBuf> {
    (0..n)
        .map(|k| {
            let p = dir.join(format!("clean{k}.wav"));
            let x: Vec<f64> = (0..8000)
                .map(|i| {
                    let t = i as f64 / 16_000.0;
                    0.3 * (std::f64::consts::TAU * (180.0 + 40.0 * k as f64) * t).sin()
                        + 0.1 * (std::f64::consts::TAU * 1300.0 * t).sin()
                })
                .collect();
            write_wav(&p, &AudioBuffer::new(x, 16_000)).unwrap();
            p
        })
        .collect()
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn generation_is_deterministic_and_regenerable() {
    let root = tempfile::tempdir().unwrap();
    let clean_dir = root.path().join("clean");
    std::fs::create_dir_all(&clean_dir).unwrap();
    let clean = write_clean(&clean_dir, 3);
    for subset in Subset::ALL {
        let opts = CorpusOptions {
            subset,
            split: Split::Test,
            seed: 42,
            count: 5,
            noise: NoiseSource::Synthetic,
        };
        let a = root.path().join(format!("a{subset}"));
        let b = root.path().join(format!("b{subset}"));
        let m = generate_corpus(&clean, &a, &opts).unwrap();
        generate_corpus(&clean, &b, &opts).unwrap();
        let ta = tree(&a);
        // Manifests differ only by their base directory, which is not written.
        assert_eq!(ta, tree(&b));
        assert_eq!(m.records.len(), 5);

        let read = CorpusManifest::read(a.join("manifest.tsv")).unwrap();
        let c = root.path().join(format!("c{subset}"));
        regenerate(&read, &c).unwrap();
        for (name, bytes) in tree(&c) {
            let orig = ta.iter().find(|(n, _)| *n == name).unwrap();
            assert_eq!(orig.1, bytes, "{name}");
        }

        for r in &read.records {
            let (x, y) = load_pair::<f32>(&read, r).unwrap();
            assert_eq!(x.len(), y.len());
            assert!(y.samples.iter().all(|v| v.abs() <= 1.0));
            if subset == Subset::B {
                let b = r.spec.bandlimit.unwrap();
                assert_eq!(b.kind, FilterKind::Lowpass);
                assert!(matches!(b.cutoff, Cutoff::Single(f) if [4000.0, 5000.0, 6000.0, 7000.0].contains(&f)));
            }
        }
    }
}

#[test]
fn empty_inputs_rejected() {
    let root = tempfile::tempdir().unwrap();
    let opts = CorpusOptions {
        subset: Subset::N,
        split: Split::Train,
        seed: 1,
        count: 0,
        noise: NoiseSource::Synthetic,
    };
    assert!(generate_corpus(&[PathBuf::from("x.wav")], root.path(), &opts).is_err());
}
