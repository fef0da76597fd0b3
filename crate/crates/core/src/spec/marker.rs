use super::{AppSpec, Asc, AscKind, AscTemplate};

/// Input-slot types of `template` in left-to-right order.
pub fn type_sequence(asc: &Asc, template: &AscTemplate) -> Vec<String> {
    template
        .slots()
        .filter_map(|name| asc.input(name).map(|s| s.ty.clone()))
        .collect()
}

/// Longest common subsequence of `a` and `b` as `(index_in_a, index_in_b)`
/// pairs. When `a` embeds completely in `b`, the returned positions in `b`
/// are the leftmost embedding.
pub fn lcs_alignment<T: PartialEq>(a: &[T], b: &[T]) -> Vec<(usize, usize)> {
    let (n, m) = (a.len(), b.len());
    // suffix table: len[i][j] = |LCS(a[i..], b[j..])|
    let mut len = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            len[i][j] = if a[i] == b[j] {
                len[i + 1][j + 1] + 1
            } else {
                len[i + 1][j].max(len[i][j + 1])
            };
        }
    }
    let mut pairs = Vec::with_capacity(len[0][0]);
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i] == b[j] && len[i][j] == len[i + 1][j + 1] + 1 {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if len[i][j + 1] == len[i][j] {
            j += 1;
        } else {
            i += 1;
        }
    }
    pairs
}

/// Recomputes every utility constraint from scratch.
///
/// For each (action template, utility template) pair the utility's type
/// sequence is aligned against the action's; when the whole utility sequence
/// is matched, the aligned action slots are starred. Stars are unioned over
/// utilities and templates.
pub fn mark_utility_constraints(spec: &AppSpec) -> AppSpec {
    let mut marked = spec.clone();
    let utility_seqs: Vec<Vec<String>> = spec
        .utilities()
        .flat_map(|u| u.templates.iter().map(move |t| type_sequence(u, t)))
        .collect();

    for asc in marked.ascs.iter_mut() {
        for slot in asc.inputs.iter_mut() {
            slot.starred = false;
        }
        if asc.kind != AscKind::Action {
            continue;
        }
        let mut starred = Vec::new();
        for template in &asc.templates {
            let action_seq = type_sequence(asc, template);
            let slot_names: Vec<&str> = template.slots().collect();
            for u_seq in &utility_seqs {
                if u_seq.is_empty() {
                    continue;
                }
                let alignment = lcs_alignment(u_seq, &action_seq);
                if alignment.len() == u_seq.len() {
                    starred.extend(alignment.iter().map(|&(_, j)| slot_names[j].to_string()));
                }
            }
        }
        for slot in asc.inputs.iter_mut() {
            slot.starred = starred.contains(&slot.name);
        }
    }
    marked
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lcs_basic() {
        let a = ["direction", "block_set"];
        let b = ["block_set", "direction", "number"];
        assert_eq!(lcs_alignment(&a, &b).len(), 1);
        let b = ["x", "direction", "y", "block_set"];
        assert_eq!(lcs_alignment(&a, &b), vec![(0, 1), (1, 3)]);
    }

    #[test]
    fn lcs_prefers_leftmost_embedding() {
        let a = ["t"];
        let b = ["t", "t", "t"];
        assert_eq!(lcs_alignment(&a, &b), vec![(0, 0)]);
        let a = ["t", "u"];
        let b = ["t", "t", "u", "u"];
        assert_eq!(lcs_alignment(&a, &b), vec![(0, 0), (1, 2)]);
    }

    #[test]
    fn lcs_empty_inputs() {
        let empty: [&str; 0] = [];
        assert!(lcs_alignment(&empty, &["a"]).is_empty());
        assert!(lcs_alignment(&["a"], &empty).is_empty());
    }
}
