use std::collections::BTreeSet;

use proptest::prelude::*;

use super::*;
use crate::doctree::{Block, SectionItem};
use crate::tokens::{word_count, WordCounter};

fn words(tag: &str, n: usize) -> String {
    (0..n).map(|i| format!("{tag}{i}")).collect::<Vec<_>>().join(" ")
}

/// S1{p1, p2}, S2{p3}; ten words per paragraph.
fn seven_node_tree() -> DocTree {
    DocTree::from_text_blocks(
        "t",
        vec![Block::section("S1", vec![words("a", 10), words("b", 10)]), Block::section("S2", vec![words("c", 10)])],
    )
}

fn selected_set(sel: &Selection) -> BTreeSet<NodeId> {
    sel.ids().into_iter().collect()
}

/// Independent replay: closure by fixpoint over all nodes, cost by counting
/// the text of a separately written assembler.
fn oracle(tree: &DocTree, scores: &[f64], budget: usize, stop: bool) -> BTreeSet<NodeId> {
    fn render(tree: &DocTree, id: NodeId, sel: &BTreeSet<NodeId>, out: &mut Vec<Option<String>>) {
        let n = tree.node(id);
        match n.kind {
            NodeKind::Paragraph => out.push(sel.contains(&id).then(|| n.content.clone().unwrap())),
            _ => {
                let title = n.title.clone().unwrap_or_default();
                if sel.contains(&id) && !title.is_empty() {
                    let hashes = if n.kind == NodeKind::Section { "#" } else { "##" };
                    out.push(Some(format!("{hashes} {title}")));
                }
                for &c in &n.children {
                    render(tree, c, sel, out);
                }
            }
        }
    }
    fn text(tree: &DocTree, sel: &BTreeSet<NodeId>) -> String {
        let mut raw = Vec::new();
        render(tree, tree.root, sel, &mut raw);
        let mut blocks: Vec<String> = Vec::new();
        let mut pending = false;
        for b in raw {
            match b {
                None => pending = true,
                Some(s) => {
                    if pending {
                        blocks.push("...".into());
                    }
                    pending = false;
                    blocks.push(s);
                }
            }
        }
        if pending && !blocks.is_empty() {
            blocks.push("...".into());
        }
        blocks.join("\n\n")
    }
    let mut order: Vec<NodeId> = (0..tree.len()).filter(|&i| i != tree.root).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let mut sel = BTreeSet::new();
    for n in order {
        if sel.contains(&n) {
            continue;
        }
        let mut next = sel.clone();
        next.extend(tree.subtree(n));
        loop {
            let before = next.len();
            for id in 0..tree.len() {
                let kids = tree.children(id);
                if id != tree.root && !kids.is_empty() && kids.iter().all(|c| next.contains(c)) {
                    next.insert(id);
                }
            }
            if next.len() == before {
                break;
            }
        }
        if word_count(&text(tree, &next)) <= budget {
            sel = next;
        } else if stop {
            break;
        }
    }
    sel
}

fn assign(tree: &DocTree, pairs: &[(&str, f64)]) -> Vec<f64> {
    let mut s = vec![0.0; tree.len()];
    for &(label, v) in pairs {
        let id = (0..tree.len())
            .find(|&i| {
                let n = tree.node(i);
                n.title.as_deref() == Some(label) || n.content.as_deref().is_some_and(|c| c.starts_with(label))
            })
            .unwrap();
        s[id] = v;
    }
    s
}

#[test]
fn worked_example_takes_first_section_with_its_paragraphs() {
    let t = seven_node_tree();
    // S1 0.9 {p1 0.8, p2 0.1}, S2 0.5 {p3 0.6}
    let scores = assign(&t, &[("S1", 0.9), ("a0", 0.8), ("b0", 0.1), ("S2", 0.5), ("c0", 0.6)]);
    // 20 paragraph words + "# S1" + one marker for the omitted p3
    let sel = select(&t, &scores, Budget::new(23).unwrap(), &WordCounter, false);
    let s1 = t.children(t.root)[0];
    let expected: BTreeSet<NodeId> = t.subtree(s1).into_iter().collect();
    assert_eq!(selected_set(&sel), expected);
    assert_eq!(sel.tokens, 23);
    assert_eq!(expected, oracle(&t, &scores, 23, false));
}

#[test]
fn tiny_budget_selects_nothing() {
    let t = seven_node_tree();
    let sel = select(&t, &vec![0.5; t.len()], Budget::new(1).unwrap(), &WordCounter, false);
    assert!(sel.ids().is_empty());
    assert!(sel.trace.empty);
    assert_eq!(assemble(&t, &sel.selected), "");
}

#[test]
fn full_budget_selects_everything() {
    let t = seven_node_tree();
    let full = CostModel::new(&t, &WordCounter).cost(&vec![true; t.len()]);
    let sel = select(&t, &vec![0.1; t.len()], Budget::new(full).unwrap(), &WordCounter, false);
    assert_eq!(sel.ids().len(), t.len() - 1);
    let text = assemble(&t, &sel.selected);
    assert!(!text.contains(MARKER));
    assert!(text.starts_with("# S1\n\na0"));
}

#[test]
fn leaf_selection_marks_gaps_and_omits_headings() {
    let t = seven_node_tree();
    let p2 = t.leaves()[1];
    let mut sel = vec![false; t.len()];
    sel[p2] = true;
    assert_eq!(assemble(&t, &sel), format!("...\n\n{}\n\n...", words("b", 10)));
}

#[test]
fn completing_siblings_promotes_the_parent() {
    let t = seven_node_tree();
    let [p1, p2, _] = t.leaves()[..] else { unreachable!() };
    let mut selected = vec![false; t.len()];
    selected[p1] = true;
    let (added, promoted) = closure(&t, p2, &selected);
    assert_eq!(added, [p2]);
    assert_eq!(promoted, [t.parent(p1).unwrap()]);
}

#[test]
fn selecting_a_section_takes_its_subsections() {
    let t = DocTree::from_text_blocks(
        "t",
        vec![Block::Section {
            title: "S".into(),
            items: vec![
                SectionItem::Paragraph("x".into()),
                SectionItem::Subsection { title: "U".into(), paragraphs: vec!["y".into(), "z".into()] },
            ],
        }],
    );
    let s = t.children(t.root)[0];
    let (added, promoted) = closure(&t, s, &vec![false; t.len()]);
    assert_eq!(added.len(), 5);
    assert!(promoted.is_empty());
}

#[test]
fn stop_mode_ends_at_first_overflow() {
    let t = seven_node_tree();
    let scores = assign(&t, &[("S1", 0.9), ("a0", 0.8), ("b0", 0.1), ("S2", 0.5), ("c0", 0.6)]);
    let sel = select(&t, &scores, Budget::new(15).unwrap(), &WordCounter, true);
    assert!(sel.ids().is_empty());
    assert_eq!(sel.trace.steps.last().unwrap().action, StepAction::Stopped);
    let skip = select(&t, &scores, Budget::new(15).unwrap(), &WordCounter, false);
    assert_eq!(skip.ids(), [t.leaves()[0]]);
}

fn arb_tree() -> impl Strategy<Value = DocTree> {
    let para = ("[a-z]{4}", 1usize..30).prop_map(|(tag, n)| words(&tag, n));
    let sub = (prop::bool::ANY, prop::collection::vec(para.clone(), 0..3));
    let item = prop_oneof![
        para.clone().prop_map(SectionItem::Paragraph),
        sub.prop_map(|(t, ps)| SectionItem::Subsection { title: if t { "Sub".into() } else { String::new() }, paragraphs: ps })
    ];
    let section = (prop::bool::ANY, prop::collection::vec(item, 0..4))
        .prop_map(|(t, items)| Block::Section { title: if t { "Sec".into() } else { String::new() }, items });
    (prop::option::of(prop::collection::vec(para, 1..3)), prop::collection::vec(section, 0..4)).prop_map(|(abs, secs)| {
        let mut blocks: Vec<Block<String>> = abs.map(Block::Abstract).into_iter().collect();
        blocks.extend(secs);
        DocTree::from_text_blocks("p", blocks)
    })
}

fn arb_case() -> impl Strategy<Value = (DocTree, Vec<f64>, usize)> {
    arb_tree().prop_flat_map(|t| {
        let n = t.len();
        (Just(t), prop::collection::vec(0u8..5, n).prop_map(|v| v.into_iter().map(|x| f64::from(x) / 4.0).collect()), 1usize..120)
    })
}

proptest! {
    #[test]
    fn matches_oracle_and_respects_budget((t, scores, budget) in arb_case(), stop in prop::bool::ANY) {
        let sel = select(&t, &scores, Budget::new(budget).unwrap(), &WordCounter, stop);
        prop_assert_eq!(selected_set(&sel), oracle(&t, &scores, budget, stop));
        let text = assemble(&t, &sel.selected);
        prop_assert_eq!(word_count(&text), sel.tokens);
        prop_assert!(sel.tokens <= budget);
        prop_assert!(closure_violations(&t, &sel.selected).is_empty());
    }

    #[test]
    fn stop_mode_is_monotone_in_budget((t, scores, b) in arb_case(), extra in 0usize..80) {
        let small = selected_set(&select(&t, &scores, Budget::new(b).unwrap(), &WordCounter, true));
        let large = selected_set(&select(&t, &scores, Budget::new(b + extra).unwrap(), &WordCounter, true));
        prop_assert!(small.is_subset(&large));
    }

    #[test]
    fn output_follows_document_order(t in arb_tree(), mask in prop::collection::vec(prop::bool::ANY, 64)) {
        let mut sel = vec![false; t.len()];
        for leaf in t.leaves() {
            sel[leaf] = mask[leaf % 64];
        }
        let text = assemble(&t, &sel);
        let mut pos = 0;
        for leaf in t.leaves().into_iter().filter(|&l| sel[l]) {
            let c = t.node(leaf).content.as_deref().unwrap();
            let found = text[pos..].find(c).map(|p| p + pos);
            prop_assert!(found.is_some());
            pos = found.unwrap() + c.len();
        }
    }
}
