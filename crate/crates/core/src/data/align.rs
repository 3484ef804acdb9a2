use super::{LabeledSentence, INCORRECT};
use crate::error::{Error, Result};

/// One step of a token-level edit script from source to corrected text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Match { source: usize, target: usize },
    Substitute { source: usize, target: usize },
    Delete { source: usize },
    /// Corrected token `target` inserted before source position `before`
    /// (`before == source.len()` appends).
    Insert { before: usize, target: usize },
}

/// Minimum-cost edit script (unit costs for substitution, insertion and
/// deletion). Among equal-cost scripts the backtrace from the end prefers
/// match, then substitution, then deletion, then insertion.
pub fn edit_script<S: AsRef<str>>(source: &[S], corrected: &[S]) -> Vec<EditOp> {
    let (n, m) = (source.len(), corrected.len());
    let eq = |i: usize, j: usize| source[i].as_ref() == corrected[j].as_ref();
    let width = m + 1;
    let mut cost = vec![0usize; (n + 1) * width];
    for i in 0..=n {
        for j in 0..=m {
            cost[i * width + j] = if i == 0 {
                j
            } else if j == 0 {
                i
            } else {
                let diag = cost[(i - 1) * width + j - 1] + usize::from(!eq(i - 1, j - 1));
                let del = cost[(i - 1) * width + j] + 1;
                let ins = cost[i * width + j - 1] + 1;
                diag.min(del).min(ins)
            };
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = cost[i * width + j];
        if i > 0 && j > 0 && eq(i - 1, j - 1) && cost[(i - 1) * width + j - 1] == here {
            ops.push(EditOp::Match {
                source: i - 1,
                target: j - 1,
            });
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && cost[(i - 1) * width + j - 1] + 1 == here {
            ops.push(EditOp::Substitute {
                source: i - 1,
                target: j - 1,
            });
            i -= 1;
            j -= 1;
        } else if i > 0 && cost[(i - 1) * width + j] + 1 == here {
            ops.push(EditOp::Delete { source: i - 1 });
            i -= 1;
        } else {
            ops.push(EditOp::Insert {
                before: i,
                target: j - 1,
            });
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

/// Labels source tokens changed by a correction. Substituted and deleted
/// tokens are incorrect; an insertion labels the source token after the
/// insertion point (the last token for insertions at the end).
pub fn align_correction<S: AsRef<str>>(source: &[S], corrected: &[S]) -> Result<LabeledSentence> {
    if source.is_empty() {
        return Err(Error::Contract("cannot align an empty source sentence".into()));
    }
    let tokens: Vec<String> = source.iter().map(|s| s.as_ref().to_string()).collect();
    let last = tokens.len() - 1;
    let mut sentence = LabeledSentence::clean(tokens);
    for op in edit_script(source, corrected) {
        match op {
            EditOp::Match { .. } => {}
            EditOp::Substitute { source, .. } | EditOp::Delete { source } => {
                sentence.labels[source] = INCORRECT;
            }
            EditOp::Insert { before, .. } => sentence.labels[before.min(last)] = INCORRECT,
        }
    }
    Ok(sentence)
}
