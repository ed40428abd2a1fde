use std::fmt::Write as _;

use crate::error::{invalid, Result};

/// Per-frame tuples of `N` token indices, 1-based in `[1, M]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    tokens: Vec<u32>,
    groups: usize,
    codebook_size: usize,
    /// Length in samples of the audio the tokens describe.
    signal_len: usize,
}

impl TokenSequence {
    /// `tokens` is row-major, `frames x groups`.
    pub fn new(tokens: Vec<u32>, groups: usize, codebook_size: usize, signal_len: usize) -> Result<Self> {
        if groups == 0 || tokens.len() % groups != 0 {
            return Err(invalid(format!(
                "{} tokens do not form whole frames of {groups}",
                tokens.len()
            )));
        }
        if let Some(bad) = tokens.iter().find(|&&t| t == 0 || t as usize > codebook_size) {
            return Err(invalid(format!("token {bad} outside 1..={codebook_size}")));
        }
        Ok(Self {
            tokens,
            groups,
            codebook_size,
            signal_len,
        })
    }

    pub fn frames(&self) -> usize {
        self.tokens.len() / self.groups
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn codebook_size(&self) -> usize {
        self.codebook_size
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn frame(&self, t: usize) -> &[u32] {
        &self.tokens[t * self.groups..(t + 1) * self.groups]
    }

    pub fn iter_frames(&self) -> impl Iterator<Item = &[u32]> {
        self.tokens.chunks(self.groups)
    }

    /// All tokens of one group (branch), in frame order.
    pub fn group(&self, n: usize) -> Vec<u32> {
        self.iter_frames().map(|f| f[n]).collect()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.tokens
    }

    /// Text form: a `#` header line followed by one frame per line with `N`
    /// space-separated 1-based indices.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# frames={} groups={} codebook_size={} samples={}\n",
            self.frames(),
            self.groups,
            self.codebook_size,
            self.signal_len
        );
        for frame in self.iter_frames() {
            let line: Vec<String> = frame.iter().map(u32::to_string).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| invalid("empty token stream"))?
            .strip_prefix('#')
            .ok_or_else(|| invalid("token stream missing header"))?;
        let mut fields = std::collections::HashMap::new();
        for kv in header.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| invalid(format!("bad header field {kv:?}")))?;
            let v: usize = v.parse().map_err(|_| invalid(format!("bad header value {kv:?}")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| invalid(format!("header lacks {k}")));
        let (frames, groups, m, samples) = (get("frames")?, get("groups")?, get("codebook_size")?, get("samples")?);
        let mut tokens = Vec::with_capacity(frames * groups);
        for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            let row: Vec<u32> = line
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| invalid(format!("line {}: bad token {s:?}", i + 2))))
                .collect::<Result<_>>()?;
            if row.len() != groups {
                return Err(invalid(format!("line {}: expected {groups} tokens", i + 2)));
            }
            tokens.extend(row);
        }
        if tokens.len() != frames * groups {
            return Err(invalid("frame count does not match header"));
        }
        Self::new(tokens, groups, m, samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let t = TokenSequence::new(vec![1, 2, 3, 4, 256, 7, 9, 1], 4, 256, 640).unwrap();
        let text = t.to_text();
        assert!(text.contains("\n1 2 3 4\n256 7 9 1\n"));
        assert_eq!(TokenSequence::from_text(&text).unwrap(), t);
    }

    #[test]
    fn range_checked() {
        assert!(TokenSequence::new(vec![0, 1], 2, 4, 0).is_err());
        assert!(TokenSequence::new(vec![5, 1], 2, 4, 0).is_err());
        assert!(TokenSequence::new(vec![1, 1, 1], 2, 4, 0).is_err());
    }
}
