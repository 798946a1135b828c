use std::borrow::Cow;

pub const NUM_TOKEN: &str = "<num>";

/// Lazy tokenizer: alphanumeric runs, lowercased, shorter than two
/// characters dropped, all-digit runs replaced by `<num>`.
pub struct Tokens<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Tokens<'a> {
    pub fn new(text: &'a str) -> Self {
        Tokens { text, pos: 0 }
    }
}

impl<'a> Iterator for Tokens<'a> {
    type Item = Cow<'a, str>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let rest = &self.text[self.pos..];
            let start = rest.find(char::is_alphanumeric)?;
            let run = &rest[start..];
            let len = run.find(|c: char| !c.is_alphanumeric()).unwrap_or(run.len());
            let word = &run[..len];
            self.pos += start + len;
            let mut chars = word.chars();
            if chars.next().is_none() || chars.next().is_none() {
                continue;
            }
            if word.chars().all(char::is_numeric) {
                return Some(Cow::Borrowed(NUM_TOKEN));
            }
            if word.chars().any(char::is_uppercase) {
                return Some(Cow::Owned(word.to_lowercase()));
            }
            return Some(Cow::Borrowed(word));
        }
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    Tokens::new(text).map(Cow::into_owned).collect()
}
