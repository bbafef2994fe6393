mod common;

use common::fixtures::{mixing_data, regression_data, square_grid};
use rpbart::archive::{archive_from_str, archive_to_string, read_archive, write_archive, ArchiveError};
use rpbart::data::TrainingData;
use rpbart::mixing::{fit_mix, weights_at};
use rpbart::sampler::{run_mcmc, Hyperparameters, Schedule};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};

fn short() -> Hyperparameters {
    Hyperparameters {
        m: 8,
        schedule: Schedule { burn_in: 50, draws: 40, thin: 2, adaptation: 50 },
        ..Default::default()
    }
}

#[test]
fn reloaded_regression_fit_predicts_identically() {
    let (x, y) = regression_data(60, 0.1, 1);
    let data = TrainingData::new(&x, y, None, None).unwrap();
    let post = run_mcmc(&data, &short(), 1).unwrap();

    let path = std::env::temp_dir().join(format!("rpbart-archive-test-{}.rpbart", std::process::id()));
    {
        let mut out = BufWriter::new(File::create(&path).unwrap());
        write_archive(&post, &mut out).unwrap();
        out.flush().unwrap();
    }
    let back = read_archive(BufReader::new(File::open(&path).unwrap())).unwrap();
    std::fs::remove_file(&path).unwrap();

    let grid = square_grid(9, -3.0, 3.0);
    assert_eq!(post.predict(&grid).unwrap(), back.predict(&grid).unwrap());
    assert_eq!(back.draws.len(), 40);
    assert_eq!(archive_to_string(&back).unwrap(), archive_to_string(&post).unwrap());
}

#[test]
fn reloaded_mixing_fit_keeps_labels_and_weights() {
    let d = mixing_data(50, 0.05, 2);
    let ids = vec!["low".to_string(), "high".to_string()];
    let post = fit_mix(&d.x, d.y, &d.fhat, &ids, &short(), None, 2).unwrap();
    let back = archive_from_str(&archive_to_string(&post).unwrap()).unwrap();
    assert_eq!(back.labels.models, ids);
    let grid = square_grid(5, -2.0, 2.0);
    assert_eq!(weights_at(&post, &grid).unwrap(), weights_at(&back, &grid).unwrap());
}

#[test]
fn truncated_archive_is_rejected() {
    let (x, y) = regression_data(20, 0.1, 3);
    let data = TrainingData::new(&x, y, None, None).unwrap();
    let text = archive_to_string(&run_mcmc(&data, &short(), 3).unwrap()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let cut = lines[..lines.len() * 2 / 3].join("\n");
    assert!(archive_from_str(&cut).is_err());
    let bad = text.replacen("tree ", "tree x", 1);
    assert!(matches!(archive_from_str(&bad), Err(ArchiveError::Parse { .. })));
}
