/// Split `text` into words. Any character that is not alphanumeric acts as
/// a separator, so punctuation never survives.
pub fn split_words(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty())
}

/// [`split_words`] plus lowercasing.
pub fn words(text: &str) -> Vec<String> {
    split_words(text).map(str::to_lowercase).collect()
}
