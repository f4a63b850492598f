//! Just enough XML checking to validate generated SVG: tags must nest and
//! close, attributes must be quoted.

/// Returns `Err` with a description when `text` is not well-formed enough to
/// be an SVG document.
pub fn check_well_formed(text: &str) -> Result<(), String> {
    let mut stack: Vec<String> = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find('<') {
        rest = &rest[start + 1..];
        if let Some(decl) = rest.strip_prefix('?') {
            let end = decl.find("?>").ok_or("unterminated declaration")?;
            rest = &decl[end + 2..];
            continue;
        }
        if let Some(comment) = rest.strip_prefix("!--") {
            let end = comment.find("-->").ok_or("unterminated comment")?;
            rest = &comment[end + 3..];
            continue;
        }
        if let Some(bang) = rest.strip_prefix('!') {
            let end = bang.find('>').ok_or("unterminated <! section")?;
            rest = &bang[end + 1..];
            continue;
        }
        let end = rest.find('>').ok_or("unterminated tag")?;
        let tag = &rest[..end];
        rest = &rest[end + 1..];
        if quotes_unbalanced(tag) {
            return Err(format!("unbalanced attribute quotes in <{tag}>"));
        }
        if let Some(name) = tag.strip_prefix('/') {
            match stack.pop() {
                Some(open) if open == name.trim() => {}
                Some(open) => return Err(format!("</{}> closes <{open}>", name.trim())),
                None => return Err(format!("</{}> without opener", name.trim())),
            }
        } else if !tag.ends_with('/') {
            let name = tag.split_whitespace().next().ok_or("empty tag")?;
            stack.push(name.to_string());
        }
    }
    if stack.is_empty() {
        Ok(())
    } else {
        Err(format!("unclosed tags: {stack:?}"))
    }
}

fn quotes_unbalanced(tag: &str) -> bool {
    tag.chars().filter(|c| *c == '"').count() % 2 == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_minimal_svg() {
        let svg = r#"<?xml version="1.0"?><svg xmlns="http://www.w3.org/2000/svg">
            <!-- grid --><g><rect x="0" y="0" width="5" height="5"/><text>hi</text></g></svg>"#;
        assert!(check_well_formed(svg).is_ok());
    }

    #[test]
    fn rejects_mismatch_and_unclosed() {
        assert!(check_well_formed("<svg><g></svg>").is_err());
        assert!(check_well_formed("<svg><g>").is_err());
        assert!(check_well_formed(r#"<svg width="3><g/></svg>"#).is_err());
    }
}
