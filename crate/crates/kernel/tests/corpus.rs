//! Differential corpus: each `tests/corpus/*.py` runs as one cell and its
//! stdout must equal the `.out` file recorded from CPython.

use std::path::Path;
use std::time::Duration;

use nbfix_kernel::{Kernel, MiniKernel};

#[test]
fn corpus_matches_cpython_output() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus");
    let mut names: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "py"))
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for path in names {
        let code = std::fs::read_to_string(&path).unwrap();
        let expected = std::fs::read_to_string(path.with_extension("out")).unwrap();
        let work = tempfile::tempdir().unwrap();
        let mut k = MiniKernel::new(work.path().to_path_buf()).unwrap();
        let r = k.execute(&code, Duration::from_secs(20)).unwrap();
        assert_eq!(r.ename, None, "{}: {:?}", path.display(), r.traceback);
        for (i, (got, want)) in r.stdout.lines().zip(expected.lines()).enumerate() {
            assert_eq!(got, want, "{} line {}", path.display(), i + 1);
        }
        assert_eq!(r.stdout, expected, "{}", path.display());
    }
}
