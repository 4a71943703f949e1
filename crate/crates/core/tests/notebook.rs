use nbfix_core::notebook::{Cell, CellKind, Notebook, NotebookError, Output};
use proptest::prelude::*;

const MIXED: &str = include_str!("fixtures/mixed_v45.ipynb");
const MIXED_GOLDEN: &str = include_str!("fixtures/mixed_v45.golden.ipynb");
const COMPACT: &str = include_str!("fixtures/compact_v44.ipynb");
const COMPACT_GOLDEN: &str = include_str!("fixtures/compact_v44.golden.ipynb");

#[test]
fn serialization_matches_reference_writer() {
    // Golden files were written by the reference nbformat library.
    assert_eq!(Notebook::parse(MIXED).unwrap().serialize(), MIXED_GOLDEN);
    assert_eq!(Notebook::parse(COMPACT).unwrap().serialize(), COMPACT_GOLDEN);
}

#[test]
fn code_then_markdown() {
    let nb = Notebook::parse(COMPACT).unwrap();
    let cells = nb.cells();
    assert_eq!((cells[0].index(), cells[0].kind), (1, CellKind::Code));
    assert_eq!((cells[1].index(), cells[1].kind), (2, CellKind::Markdown));
    assert!(cells[1].outputs.is_empty() && cells[1].execution_count.is_none());
    assert_eq!(cells[1].source, "# Title\nbody");
}

#[test]
fn outputs_and_metadata_survive() {
    let nb = Notebook::parse(MIXED).unwrap();
    assert_eq!(nb.format_version, (4, 5));
    assert_eq!(nb.metadata["nbfix_custom"]["owner"], "data-team");
    assert_eq!(nb.cell(1).unwrap().outputs, vec![Output::Stream { name: "stdout".into(), text: "5\n".into() }]);
    assert!(matches!(&nb.cell(4).unwrap().outputs[0], Output::Error { ename, .. } if ename == "ZeroDivisionError"));
    assert_eq!(nb.cell(5).unwrap().source, "");
    let again = Notebook::parse(&nb.serialize()).unwrap();
    assert_eq!(again, nb);
    assert_eq!(again.metadata["nbfix_custom"]["tags"][1], 2);
}

#[test]
fn inserted_cells_get_ids_in_v45() {
    let nb = Notebook::parse(MIXED).unwrap();
    let (nb, n) = nb.insert_cell(None, "y = 2").unwrap();
    let id = nb.cell(n).unwrap().id.clone().unwrap();
    assert!(nb.cells()[..n - 1].iter().all(|c| c.id.as_deref() != Some(id.as_str())));
    let (v44, n) = Notebook::parse(COMPACT).unwrap().insert_cell(None, "y").unwrap();
    assert!(v44.cell(n).unwrap().id.is_none());
}

#[test]
fn raw_cells_are_rejected() {
    let text = r#"{"cells":[{"cell_type":"raw","metadata":{},"source":"x"}],"metadata":{},"nbformat":4,"nbformat_minor":4}"#;
    assert!(matches!(Notebook::parse(text), Err(NotebookError::Parse { .. })));
}

fn cell_strategy() -> impl Strategy<Value = Cell> {
    (any::<bool>(), "[a-z0-9 =+()\n#'\"é]{0,30}").prop_map(|(code, src)| if code { Cell::code(src) } else { Cell::markdown(src) })
}

#[derive(Debug, Clone)]
enum Op {
    Edit(usize, String),
    Insert(Option<usize>, String),
}

fn op_strategy() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0usize..8, "[a-z]{0,5}").prop_map(|(n, s)| Op::Edit(n, s)),
        (proptest::option::of(0usize..8), "[a-z]{0,5}").prop_map(|(p, s)| Op::Insert(p, s)),
    ]
}

proptest! {
    #[test]
    fn round_trip(cells in proptest::collection::vec(cell_strategy(), 0..6)) {
        let nb = Notebook::from_cells(cells);
        let once = Notebook::parse(&nb.serialize()).unwrap();
        let twice = Notebook::parse(&once.serialize()).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(once.serialize(), nb.serialize());
    }

    #[test]
    fn indices_stay_contiguous(cells in proptest::collection::vec(cell_strategy(), 0..4), ops in proptest::collection::vec(op_strategy(), 0..10)) {
        let mut nb = Notebook::from_cells(cells);
        for op in ops {
            let next = match op {
                Op::Edit(n, s) => nb.apply_edit(n, &s).ok(),
                Op::Insert(p, s) => nb.insert_cell(p, &s).ok().map(|(nb, _)| nb),
            };
            if let Some(next) = next {
                nb = next;
            }
            let indices: Vec<usize> = nb.cells().iter().map(|c| c.index()).collect();
            prop_assert_eq!(indices, (1..=nb.len()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn render_splits_back_into_sources(sources in proptest::collection::vec("[a-z =\n]{0,20}", 1..6)) {
        let nb = Notebook::from_cells(sources.iter().map(Cell::code));
        let sep = "#%%#";
        let text = nb.render_for_prompt(sep).unwrap();
        let parts: Vec<&str> = text.split(&format!("\n{sep}\n")).collect();
        prop_assert_eq!(parts, sources.iter().map(String::as_str).collect::<Vec<_>>());
    }

    #[test]
    fn edit_touches_only_its_target(sources in proptest::collection::vec("[a-z]{0,8}", 1..6), pick in 0usize..6, new in "[a-z]{0,8}") {
        let nb = Notebook::from_cells(sources.iter().map(Cell::code));
        let target = pick % nb.len() + 1;
        let edited = nb.apply_edit(target, &new).unwrap();
        for (before, after) in nb.cells().iter().zip(edited.cells()) {
            if before.index() == target {
                prop_assert_eq!(&after.source, &new);
            } else {
                prop_assert_eq!(before, after);
            }
        }
    }
}
