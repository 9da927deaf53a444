/// Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - distance / max(len)`; 1.0 for two empty strings.
pub fn normalized_levenshtein(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Full-matrix recursion-free reference.
    fn reference(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for (j, cell) in d[0].iter_mut().enumerate() {
            *cell = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
                d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
            }
        }
        d[a.len()][b.len()]
    }

    #[test]
    fn classic_values() {
        assert_eq!(normalized_levenshtein("abc", "abc"), 1.0);
        assert_eq!(normalized_levenshtein("", "abc"), 0.0);
        assert_eq!(normalized_levenshtein("", ""), 1.0);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert!((normalized_levenshtein("kitten", "sitting") - (1.0 - 3.0 / 7.0)).abs() < 1e-15);
    }

    #[test]
    fn counts_chars_not_bytes() {
        assert_eq!(levenshtein("∀x", "∃x"), 1);
        assert!((normalized_levenshtein("∀x", "∃x") - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn matches_reference(a in "[ab∀]{0,12}", b in "[ab∀]{0,12}") {
            prop_assert_eq!(levenshtein(&a, &b), reference(&a, &b));
        }

        #[test]
        fn symmetric_and_identity(a in ".{0,16}", b in ".{0,16}") {
            let s = normalized_levenshtein(&a, &b);
            prop_assert_eq!(s, normalized_levenshtein(&b, &a));
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s == 1.0, a == b);
        }
    }
}
