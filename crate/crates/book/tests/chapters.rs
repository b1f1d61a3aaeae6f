use std::path::Path;

/// Every chapter listed in SUMMARY.md is included by the doc-test crate, and
/// every chapter file is listed.
#[test]
fn summary_and_doc_tests_cover_the_same_chapters() {
    let book = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../book/src");
    let summary = std::fs::read_to_string(book.join("SUMMARY.md")).unwrap();
    let mut listed: Vec<String> = summary
        .split("](")
        .skip(1)
        .map(|s| s.split(')').next().unwrap().to_string())
        .collect();
    listed.sort();
    let mut files: Vec<String> = std::fs::read_dir(&book)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".md") && n != "SUMMARY.md")
        .collect();
    files.sort();
    assert_eq!(listed, files);
    let lib = include_str!("../src/lib.rs");
    for f in &files {
        assert!(lib.contains(&format!("book/src/{f}")), "{f} is not doc-tested");
    }
}
