/// Lowercases, drops punctuation and the articles a/an/the, and collapses
/// whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lower = text.to_lowercase();
    let no_punct: String = lower.chars().map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' }).collect();
    no_punct.split_whitespace().filter(|w| !matches!(*w, "a" | "an" | "the")).collect::<Vec<_>>().join(" ")
}

/// True if any non-empty alias occurs in the context after normalization.
/// Matches are on word boundaries.
pub fn answer_in_context(context: &str, aliases: &[String]) -> bool {
    let ctx = format!(" {} ", normalize_answer(context));
    aliases.iter().map(|a| normalize_answer(a)).filter(|a| !a.is_empty()).any(|a| ctx.contains(&format!(" {a} ")))
}

/// Fraction of (context, aliases) pairs whose answer is present; 0 for no
/// pairs.
pub fn recall<'a, I>(items: I) -> f64
where
    I: IntoIterator<Item = (&'a str, &'a [String])>,
{
    let (mut hit, mut n) = (0usize, 0usize);
    for (ctx, aliases) in items {
        n += 1;
        hit += usize::from(answer_in_context(ctx, aliases));
    }
    if n == 0 {
        0.0
    } else {
        hit as f64 / n as f64
    }
}
