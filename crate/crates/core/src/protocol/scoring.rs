/// True iff `target` occurs in `response` as a whole token, ignoring case and surrounding
/// punctuation. No stemming: `refashion` does not score for `fashion`.
pub fn score_response(response: &str, target: &str) -> bool {
    let target = normalize_token(target);
    if target.is_empty() {
        return false;
    }
    response
        .split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '-' || c == '\u{2019}'))
        .map(normalize_token)
        .any(|tok| tok == target)
}

fn normalize_token(s: &str) -> String {
    s.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase().replace('\u{2019}', "'")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert!(score_response("The word is Fashion.", "fashion"));
        assert!(!score_response("passion", "fashion"));
        assert!(!score_response("refashion", "fashion"));
    }

    #[test]
    fn markup_and_quotes() {
        assert!(score_response("**FASHION**", "fashion"));
        assert!(score_response("\"fashion\"", "fashion"));
        assert!(score_response("I think it's: fashion/style", "fashion"));
        assert!(!score_response("fashion-forward", "fashion"));
        assert!(!score_response("", "fashion"));
        assert!(score_response("It's o'clock.", "o'clock"));
    }
}
