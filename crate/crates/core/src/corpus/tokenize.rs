use super::Token;

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}'
                | '\u{2019}'
                | '\u{201C}'
                | '\u{201D}'
                | '\u{00AB}'
                | '\u{00BB}'
                | '\u{2013}'
                | '\u{2014}'
                | '\u{2026}'
                | '\u{00BF}'
                | '\u{00A1}'
        )
}

/// Whitespace tokenizer for unparsed text.
///
/// Leading and trailing punctuation is stripped from each piece and empty
/// pieces are dropped. Lemmas are the lowercased forms; POS is `X` and the
/// tokens carry no head or label.
pub fn fallback_tokenize(text: &str) -> Vec<Token> {
    text.split_whitespace()
        .map(|piece| piece.trim_matches(is_punct))
        .filter(|piece| !piece.is_empty())
        .enumerate()
        .map(|(i, form)| Token {
            index: i + 1,
            form: form.to_string(),
            lemma: form.to_lowercase(),
            pos: "X".to_string(),
            head: None,
            deprel: None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lemmas(text: &str) -> Vec<String> {
        fallback_tokenize(text).into_iter().map(|t| t.lemma).collect()
    }

    #[test]
    fn splits_and_strips() {
        assert_eq!(lemmas("Cera missed milestones."), ["cera", "missed", "milestones"]);
        assert_eq!(lemmas("\"stress,\" anxiety"), ["stress", "anxiety"]);
        assert!(lemmas("").is_empty());
        assert!(lemmas(" -- ... ").is_empty());
    }

    #[test]
    fn keeps_inner_punctuation_and_case_of_form() {
        let toks = fallback_tokenize("U.S. co-op's \u{201C}Big\u{201D}");
        let forms: Vec<_> = toks.iter().map(|t| t.form.as_str()).collect();
        assert_eq!(forms, ["U.S", "co-op's", "Big"]);
        assert_eq!(toks[2].lemma, "big");
        assert_eq!(toks[2].index, 3);
        assert!(toks.iter().all(|t| t.head.is_none() && t.pos == "X"));
    }
}
