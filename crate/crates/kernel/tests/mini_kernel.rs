use std::time::{Duration, Instant};

use nbfix_kernel::{ExecResult, Kernel, MiniKernel, TIMEOUT_ENAME};

const T: Duration = Duration::from_secs(10);

fn kernel() -> (tempfile::TempDir, MiniKernel) {
    let dir = tempfile::tempdir().unwrap();
    let k = MiniKernel::new(dir.path().to_path_buf()).unwrap();
    (dir, k)
}

fn run(k: &mut MiniKernel, code: &str) -> ExecResult {
    k.execute(code, T).unwrap()
}

#[test]
fn namespace_persists_between_cells() {
    let (_d, mut k) = kernel();
    let r = run(&mut k, "x = 5");
    assert!(!r.is_error());
    assert_eq!(r.result_repr, None);
    let r = run(&mut k, "print(x)");
    assert_eq!(r.stdout, "5\n");
}

#[test]
fn last_expression_is_the_result() {
    let (_d, mut k) = kernel();
    assert_eq!(run(&mut k, "1 + 1").result_repr.as_deref(), Some("2"));
    assert_eq!(run(&mut k, "x = 'a'\nx").result_repr.as_deref(), Some("'a'"));
    assert_eq!(run(&mut k, "None").result_repr, None);
    assert_eq!(run(&mut k, "print('hi')").result_repr, None);
}

#[test]
fn zero_division_traceback() {
    let (_d, mut k) = kernel();
    let r = run(&mut k, "print('before')\n1/0");
    assert_eq!(r.stdout, "before\n");
    assert_eq!(r.ename.as_deref(), Some("ZeroDivisionError"));
    assert_eq!(r.evalue.as_deref(), Some("division by zero"));
    assert_eq!(r.result_repr, None);
    assert_eq!(
        r.traceback.as_deref(),
        Some(
            "Traceback (most recent call last):\n  File \"<cell-1>\", line 2, in <module>\n    1/0\nZeroDivisionError: division by zero"
        )
    );
}

#[test]
fn traceback_lists_every_frame() {
    let (_d, mut k) = kernel();
    let r = run(&mut k, "def f(x):\n    return g(x)\ndef g(y):\n    return y / 0\nf(1)");
    let expected = "Traceback (most recent call last):
  File \"<cell-1>\", line 5, in <module>
    f(1)
  File \"<cell-1>\", line 2, in f
    return g(x)
  File \"<cell-1>\", line 4, in g
    return y / 0
ZeroDivisionError: division by zero";
    assert_eq!(r.traceback.as_deref(), Some(expected));
}

#[test]
fn functions_keep_their_defining_cell_in_tracebacks() {
    let (_d, mut k) = kernel();
    run(&mut k, "def bad():\n    return undefined_name");
    let r = run(&mut k, "bad()");
    let tb = r.traceback.unwrap();
    assert!(tb.contains("File \"<cell-2>\", line 1, in <module>"), "{tb}");
    assert!(tb.contains("File \"<cell-1>\", line 2, in bad\n    return undefined_name"), "{tb}");
    assert!(tb.ends_with("NameError: name 'undefined_name' is not defined"));
}

#[test]
fn syntax_and_indentation_errors() {
    let (_d, mut k) = kernel();
    let r = run(&mut k, "x = (1,");
    assert_eq!(r.ename.as_deref(), Some("SyntaxError"));
    let r = run(&mut k, "if True:\n        a = 1\n    b = 2");
    assert_eq!(r.ename.as_deref(), Some("IndentationError"));
    let r = run(&mut k, "class A:\n    pass");
    assert_eq!(r.ename.as_deref(), Some("SyntaxError"));
}

#[test]
fn common_error_messages_match_python() {
    let (_d, mut k) = kernel();
    let cases = [
        ("'a' + 1", "TypeError", "can only concatenate str (not \"int\") to str"),
        ("[1][5]", "IndexError", "list index out of range"),
        ("{'a': 1}['b']", "KeyError", "'b'"),
        ("int('x1')", "ValueError", "invalid literal for int() with base 10: 'x1'"),
        ("None.foo", "AttributeError", "'NoneType' object has no attribute 'foo'"),
        ("len(3)", "TypeError", "object of type 'int' has no len()"),
        ("import pandas as pd", "ModuleNotFoundError", "No module named 'pandas'"),
        ("open('missing.csv')", "FileNotFoundError", "[Errno 2] No such file or directory: 'missing.csv'"),
        ("a, b = [1, 2, 3]", "ValueError", "too many values to unpack (expected 2)"),
        ("float('abc')", "ValueError", "could not convert string to float: 'abc'"),
    ];
    for (code, ename, evalue) in cases {
        let r = run(&mut k, code);
        assert_eq!(r.ename.as_deref(), Some(ename), "{code}");
        assert_eq!(r.evalue.as_deref(), Some(evalue), "{code}");
    }
}

#[test]
fn shell_lines_run_in_the_workdir() {
    let (d, mut k) = kernel();
    std::fs::write(d.path().join("data.csv"), "a,b\n1,2\n").unwrap();
    let r = run(&mut k, "!ls");
    assert_eq!(r.stdout, "data.csv\n");
    let r = run(&mut k, "!exit 3");
    assert!(r.stderr.contains("exit code 3"), "{:?}", r.stderr);
    assert!(!r.is_error());
    let r = run(&mut k, "x = 1\n!echo hi\nprint(x)");
    assert_eq!(r.stdout, "hi\n1\n");
}

#[test]
fn relative_paths_resolve_against_the_workdir() {
    let (d, mut k) = kernel();
    std::fs::write(d.path().join("log.txt"), "first\nsecond\n").unwrap();
    let r = run(&mut k, "with open('log.txt') as f:\n    lines = f.readlines()\nprint(len(lines), lines[1].strip())");
    assert_eq!(r.stdout, "2 second\n", "{:?}", r.traceback);
    let r = run(&mut k, "f = open('out.txt', 'w')\nf.write('x=1\\n')\nf.close()\nimport os\nos.listdir()");
    assert_eq!(r.result_repr.as_deref(), Some("['log.txt', 'out.txt']"));
    assert_eq!(std::fs::read_to_string(d.path().join("out.txt")).unwrap(), "x=1\n");
}

#[test]
fn reset_clears_the_namespace() {
    let (_d, mut k) = kernel();
    run(&mut k, "x = 1");
    k.reset().unwrap();
    let r = run(&mut k, "x");
    assert_eq!(r.ename.as_deref(), Some("NameError"));
}

#[test]
fn kernels_are_isolated() {
    let (_a, mut k1) = kernel();
    let (_b, mut k2) = kernel();
    run(&mut k1, "shared = 1");
    assert_eq!(run(&mut k2, "shared").ename.as_deref(), Some("NameError"));
    assert_eq!(run(&mut k1, "shared").result_repr.as_deref(), Some("1"));
}

#[test]
fn timeout_interrupts_and_cannot_be_caught() {
    let (_d, mut k) = kernel();
    let start = Instant::now();
    let r = k
        .execute("try:\n    while True:\n        pass\nexcept Exception:\n    print('caught')", Duration::from_millis(300))
        .unwrap();
    assert!(start.elapsed() < Duration::from_secs(3));
    assert_eq!(r.ename.as_deref(), Some(TIMEOUT_ENAME));
    assert_eq!(r.stdout, "");
    let start = Instant::now();
    let r = k.execute("import time\ntime.sleep(30)", Duration::from_millis(200)).unwrap();
    assert!(start.elapsed() < Duration::from_secs(2));
    assert_eq!(r.ename.as_deref(), Some(TIMEOUT_ENAME));
    let r = k.execute("!sleep 30", Duration::from_millis(200)).unwrap();
    assert_eq!(r.ename.as_deref(), Some(TIMEOUT_ENAME));
    assert_eq!(run(&mut k, "2 * 21").result_repr.as_deref(), Some("42"));
}

#[test]
fn runaway_recursion_is_a_recursion_error() {
    let (_d, mut k) = kernel();
    let r = run(&mut k, "def f(n):\n    return f(n + 1)\nf(0)");
    assert_eq!(r.ename.as_deref(), Some("RecursionError"));
    assert!(r.traceback.unwrap().lines().count() < 1000);
}

#[test]
fn ping_reports_protocol_version() {
    let (_d, mut k) = kernel();
    assert_eq!(k.ping().unwrap(), nbfix_kernel::PROTOCOL_VERSION);
}
