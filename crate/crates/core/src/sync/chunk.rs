//! Splitting over-length text for sinks with a post length limit.
//!
//! Text that fits is posted verbatim. Otherwise it is cut on character
//! boundaries into `n` parts, each followed by ` (i/n)`. Every part gets the
//! same text budget, `limit - width(n)`, where `width(n) = 4 + 2·digits(n)`
//! is the widest suffix in the series, and `n` is the smallest count that
//! fits the text under that budget.

use thiserror::Error;

/// Smallest accepted post length limit.
pub const MIN_POST_LENGTH: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChunkError {
    #[error("post length limit {limit} is below the minimum of {MIN_POST_LENGTH}")]
    LimitTooSmall { limit: usize },
    #[error("{chars} characters cannot be split into parts of at most {limit} characters")]
    Unsplittable { chars: usize, limit: usize },
}

fn digits(mut n: usize) -> usize {
    let mut d = 1;
    while n >= 10 {
        n /= 10;
        d += 1;
    }
    d
}

/// Width of the suffix reserved in every part of an `n`-part series.
pub fn suffix_width(n: usize) -> usize {
    4 + 2 * digits(n)
}

/// How many posts `chars` characters need under `limit`.
pub fn part_count(chars: usize, limit: usize) -> Result<usize, ChunkError> {
    if limit < MIN_POST_LENGTH {
        return Err(ChunkError::LimitTooSmall { limit });
    }
    if chars <= limit {
        return Ok(1);
    }
    // Try each suffix digit count in turn; the first whose ceiling fits is
    // minimal because fewer digits always leave more room per part.
    for d in 1.. {
        let reserved = 4 + 2 * d;
        if reserved >= limit {
            break;
        }
        let capacity = limit - reserved;
        let n = chars.div_ceil(capacity).max(2);
        if digits(n) <= d {
            return Ok(n);
        }
    }
    Err(ChunkError::Unsplittable { chars, limit })
}

/// Render `text` as the ordered posts for a sink limited to `limit`
/// characters (`None` = unlimited).
pub fn chunk_for_sink(text: &str, limit: Option<usize>) -> Result<Vec<String>, ChunkError> {
    let Some(limit) = limit else {
        return Ok(vec![text.to_owned()]);
    };
    let chars: Vec<char> = text.chars().collect();
    let n = part_count(chars.len(), limit)?;
    if n == 1 {
        return Ok(vec![text.to_owned()]);
    }
    let capacity = limit - suffix_width(n);
    Ok(chars
        .chunks(capacity)
        .enumerate()
        .map(|(i, part)| {
            let mut post: String = part.iter().collect();
            post.push_str(&format!(" ({}/{n})", i + 1));
            post
        })
        .collect())
}

/// Undo [`chunk_for_sink`] for a multi-part series.
pub fn reassemble(posts: &[String]) -> String {
    if posts.len() <= 1 {
        return posts.concat();
    }
    let n = posts.len();
    posts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let suffix = format!(" ({}/{n})", i + 1);
            p.strip_suffix(&suffix).unwrap_or(p).to_owned()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute force: the least n ≥ 2 for which n equal parts of
    /// `limit - suffix_width(n)` characters hold the text.
    fn oracle(chars: usize, limit: usize) -> Option<usize> {
        if chars <= limit {
            return Some(1);
        }
        (2..=chars).find(|&n| {
            let w = 4 + 2 * n.to_string().len();
            w < limit && n * (limit - w) >= chars
        })
    }

    #[test]
    fn worked_case_300_at_140() {
        let text: String = (0..300).map(|i| char::from(b'a' + (i % 26) as u8)).collect();
        let posts = chunk_for_sink(&text, Some(140)).unwrap();
        assert_eq!(posts.len(), 3);
        let text_lens: Vec<usize> = posts.iter().map(|p| p.chars().count() - 6).collect();
        assert_eq!(text_lens, [134, 134, 32]);
        assert!(posts[0].ends_with(" (1/3)") && posts[2].ends_with(" (3/3)"));
        assert_eq!(reassemble(&posts), text);
    }

    #[test]
    fn short_texts_pass_verbatim() {
        let hundred = "x".repeat(100);
        assert_eq!(chunk_for_sink(&hundred, Some(140)).unwrap(), [hundred]);
        let exact = "y".repeat(140);
        assert_eq!(chunk_for_sink(&exact, Some(140)).unwrap(), std::slice::from_ref(&exact));
        assert_eq!(chunk_for_sink(&exact, None).unwrap(), [exact]);
        assert_eq!(chunk_for_sink("", Some(10)).unwrap(), [""]);
    }

    #[test]
    fn limits_below_ten_are_rejected() {
        assert_eq!(
            chunk_for_sink("hello", Some(9)),
            Err(ChunkError::LimitTooSmall { limit: 9 })
        );
        assert!(chunk_for_sink("hello", Some(10)).is_ok());
    }

    #[test]
    fn counts_characters_not_bytes() {
        let text = "ü".repeat(141);
        let posts = chunk_for_sink(&text, Some(140)).unwrap();
        assert_eq!(posts.len(), 2);
        assert!(posts.iter().all(|p| p.chars().count() <= 140));
    }

    #[test]
    fn impossible_splits_match_the_oracle() {
        // At limit 10 a 10+ part series leaves only 2 characters per part, and
        // a 100+ part series leaves none.
        assert_eq!(part_count(198, 10), Ok(99));
        assert_eq!(oracle(198, 10), Some(99));
        assert_eq!(
            part_count(199, 10),
            Err(ChunkError::Unsplittable { chars: 199, limit: 10 })
        );
        assert_eq!(oracle(199, 10), None);
    }

    #[test]
    fn digit_boundary_exhaustive_for_small_limits() {
        for limit in 10..40 {
            for chars in 0..1200 {
                assert_eq!(part_count(chars, limit).ok(), oracle(chars, limit), "{chars}@{limit}");
            }
        }
    }

    proptest! {
        #[test]
        fn chunks_reassemble_and_fit(text in "\\PC{0,2000}", limit in 10usize..=500) {
            let chars = text.chars().count();
            match chunk_for_sink(&text, Some(limit)) {
                Ok(posts) => {
                    prop_assert_eq!(Some(posts.len()), oracle(chars, limit));
                    prop_assert!(posts.iter().all(|p| p.chars().count() <= limit));
                    prop_assert_eq!(reassemble(&posts), text);
                }
                Err(_) => prop_assert_eq!(oracle(chars, limit), None),
            }
        }
    }
}
