use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;

use dialseg::scorer::{load_embedding_table, EmbeddingError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LINES: usize = 400_000;

#[test]
fn loads_400k_line_vector_file() {
    let dim = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut text = String::with_capacity(LINES * 80);
    for i in 0..LINES {
        write!(text, "tok{i}").unwrap();
        for _ in 0..dim {
            write!(text, " {:.5}", rng.random_range(-1.0f32..1.0)).unwrap();
        }
        text.push('\n');
    }
    let table = load_embedding_table(text.as_bytes()).unwrap();
    assert_eq!(table.len(), LINES);
    assert_eq!(table.dim(), dim);
    assert_eq!(table.duplicates(), 0);
    assert!(table.get("tok399999").is_some());

    // one bad record at the end is reported with its line number
    text.push_str("broken 1 2\n");
    match load_embedding_table(text.as_bytes()) {
        Err(EmbeddingError::Dimension { line, expected, found }) => {
            assert_eq!((line, expected, found), (LINES + 1, dim, 2))
        }
        other => panic!("expected dimension error, got {other:?}"),
    }
}

/// Points at a real public word-vector text file when `DIALSEG_VECTOR_FILE` is set.
#[test]
fn loads_external_vector_file() {
    let Some(path) = std::env::var_os("DIALSEG_VECTOR_FILE") else {
        eprintln!("DIALSEG_VECTOR_FILE not set; skipping");
        return;
    };
    let table = load_embedding_table(BufReader::new(File::open(path).unwrap())).unwrap();
    assert!(!table.is_empty());
    eprintln!(
        "{} vectors of dimension {}, {} duplicates",
        table.len(),
        table.dim(),
        table.duplicates()
    );
}
