//! Newick serialization of merge trees, with a reader that reconstructs the
//! tree from the branch lengths.
//!
//! Branch lengths are written as exact decimal height differences (every
//! finite binary float has a finite decimal expansion), and the reader sums
//! branches in exact decimal arithmetic before rounding once per node, so
//! merge heights survive a round trip bit-identically.

use super::{validate_tree, ClusterError, Merge, MergeTree};

/// A nonnegative decimal number: big-endian base-10 `digits` scaled by
/// `10^-scale`. Just enough exact arithmetic for branch lengths.
#[derive(Clone)]
struct Dec {
    digits: Vec<u8>,
    scale: usize,
}

impl Dec {
    fn zero() -> Self {
        Dec {
            digits: vec![0],
            scale: 0,
        }
    }

    /// Parses a nonnegative decimal literal, scientific notation included.
    fn parse(text: &str) -> Option<Self> {
        let text = text.strip_prefix('+').unwrap_or(text);
        let (mantissa, exp) = match text.split_once(['e', 'E']) {
            Some((m, e)) => (m, e.parse::<i64>().ok()?),
            None => (text, 0),
        };
        if exp.abs() > 400 {
            return None;
        }
        let (int_part, frac_part) = match mantissa.split_once('.') {
            Some((i, f)) => (i, f),
            None => (mantissa, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return None;
        }
        let mut digits: Vec<u8> = int_part
            .bytes()
            .chain(frac_part.bytes())
            .map(|b| b - b'0')
            .collect();
        let mut scale = frac_part.len() as i64 - exp;
        while scale < 0 {
            digits.push(0);
            scale += 1;
        }
        Some(Dec {
            digits,
            scale: scale as usize,
        })
    }

    /// The exact decimal expansion of a finite nonnegative float.
    fn from_f64(x: f64) -> Self {
        assert!(
            x.is_finite() && x >= 0.0,
            "merge heights must be finite and nonnegative"
        );
        let bits = x.to_bits();
        let exp_field = ((bits >> 52) & 0x7ff) as i64;
        let mantissa = bits & ((1u64 << 52) - 1);
        let (m, e2) = if exp_field == 0 {
            (mantissa, -1074i64)
        } else {
            (mantissa | (1u64 << 52), exp_field - 1075)
        };
        let frac_digits = if m == 0 {
            0
        } else {
            (-(e2 + i64::from(m.trailing_zeros()))).max(0) as usize
        };
        Dec::parse(&format!("{x:.frac_digits$}")).expect("an exact expansion parses")
    }

    fn render(&self) -> String {
        let mut digits = self.digits.clone();
        if digits.len() <= self.scale {
            let pad = self.scale + 1 - digits.len();
            digits.splice(0..0, std::iter::repeat(0).take(pad));
        }
        let split = digits.len() - self.scale;
        let int: String = digits[..split].iter().map(|d| (d + b'0') as char).collect();
        let int = int.trim_start_matches('0');
        let int = if int.is_empty() { "0" } else { int };
        let frac: String = digits[split..].iter().map(|d| (d + b'0') as char).collect();
        let frac = frac.trim_end_matches('0');
        if frac.is_empty() {
            int.to_string()
        } else {
            format!("{int}.{frac}")
        }
    }

    fn to_f64(&self) -> f64 {
        self.render().parse().unwrap_or(f64::INFINITY)
    }
}

/// Both operands on a common scale, left-padded to a common digit count.
fn aligned(a: &Dec, b: &Dec) -> (Vec<u8>, Vec<u8>, usize) {
    let scale = a.scale.max(b.scale);
    let mut da = a.digits.clone();
    da.resize(da.len() + scale - a.scale, 0);
    let mut db = b.digits.clone();
    db.resize(db.len() + scale - b.scale, 0);
    let len = da.len().max(db.len());
    let pad = |v: Vec<u8>| {
        let mut out = vec![0u8; len - v.len()];
        out.extend(v);
        out
    };
    (pad(da), pad(db), scale)
}

fn add(a: &Dec, b: &Dec) -> Dec {
    let (da, db, scale) = aligned(a, b);
    let mut out = vec![0u8; da.len() + 1];
    let mut carry = 0u8;
    for i in (0..da.len()).rev() {
        let s = da[i] + db[i] + carry;
        out[i + 1] = s % 10;
        carry = s / 10;
    }
    out[0] = carry;
    Dec { digits: out, scale }
}

/// `a - b`, or None when `b > a`.
fn sub(a: &Dec, b: &Dec) -> Option<Dec> {
    let (da, db, scale) = aligned(a, b);
    let mut out = vec![0u8; da.len()];
    let mut borrow = 0i8;
    for i in (0..da.len()).rev() {
        let mut d = da[i] as i8 - db[i] as i8 - borrow;
        if d < 0 {
            d += 10;
            borrow = 1;
        } else {
            borrow = 0;
        }
        out[i] = d as u8;
    }
    if borrow != 0 {
        return None;
    }
    Some(Dec { digits: out, scale })
}

/// Standard Newick text: nested parentheses, leaf names, branch lengths as
/// exact decimal height differences, terminated by `;`. Children appear in
/// merge order (left child first).
pub fn to_newick(tree: &MergeTree) -> String {
    fn write_node(tree: &MergeTree, cluster: usize, parent: &Dec, out: &mut String) {
        let m = tree.leaves.len();
        let height = if cluster < m {
            out.push_str(&tree.leaves[cluster]);
            Dec::zero()
        } else {
            let merge = &tree.merges[cluster - m];
            let height = Dec::from_f64(merge.height);
            out.push('(');
            write_node(tree, merge.a, &height, out);
            out.push(',');
            write_node(tree, merge.b, &height, out);
            out.push(')');
            height
        };
        let branch = sub(parent, &height).expect("merge heights never decrease");
        out.push(':');
        out.push_str(&branch.render());
    }

    let root = tree.merges.last().expect("a tree has at least one merge");
    let root_height = Dec::from_f64(root.height);
    let mut out = String::from("(");
    write_node(tree, root.a, &root_height, &mut out);
    out.push(',');
    write_node(tree, root.b, &root_height, &mut out);
    out.push_str(");");
    out
}

struct Parsed {
    children: Vec<Parsed>,
    name: String,
    branch: Option<String>,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_space(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_space();
        self.text.get(self.pos).copied()
    }

    fn expect(&mut self, byte: u8) -> Result<(), ClusterError> {
        match self.peek() {
            Some(b) if b == byte => {
                self.pos += 1;
                Ok(())
            }
            other => Err(ClusterError::BadNewick(format!(
                "expected '{}' at byte {}, found {:?}",
                byte as char,
                self.pos,
                other.map(|b| b as char)
            ))),
        }
    }

    fn token(&mut self) -> String {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.text.len()
            && !matches!(self.text[self.pos], b'(' | b')' | b',' | b':' | b';')
        {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.text[start..self.pos])
            .trim()
            .to_string()
    }

    fn node(&mut self) -> Result<Parsed, ClusterError> {
        let mut children = Vec::new();
        let name;
        if self.peek() == Some(b'(') {
            self.pos += 1;
            children.push(self.node()?);
            while self.peek() == Some(b',') {
                self.pos += 1;
                children.push(self.node()?);
            }
            self.expect(b')')?;
            name = self.token();
        } else {
            name = self.token();
            if name.is_empty() {
                return Err(ClusterError::BadNewick(format!(
                    "empty leaf name at byte {}",
                    self.pos
                )));
            }
        }
        let branch = if self.peek() == Some(b':') {
            self.pos += 1;
            Some(self.token())
        } else {
            None
        };
        Ok(Parsed {
            children,
            name,
            branch,
        })
    }
}

struct Internal<'a> {
    node: &'a Parsed,
    height: f64,
    depth: usize,
    first_leaf: usize,
}

/// Walks the parsed tree: numbers leaves in traversal order and records each
/// internal node with its height, depth, and the traversal index of its first
/// leaf. A node's height is its first child's height plus that child's branch
/// (summed exactly in decimal); the second child must agree within 1e-9
/// relative. Returns this node's height.
fn collect<'a>(
    node: &'a Parsed,
    depth: usize,
    leaves: &mut Vec<String>,
    leaf_ids: &mut Vec<(*const Parsed, usize)>,
    internals: &mut Vec<Internal<'a>>,
) -> Result<(Dec, f64), ClusterError> {
    if node.children.is_empty() {
        leaves.push(node.name.clone());
        leaf_ids.push((node as *const Parsed, leaves.len() - 1));
        return Ok((Dec::zero(), 0.0));
    }
    if node.children.len() != 2 {
        return Err(ClusterError::BadNewick(format!(
            "node has {} children, trees here are binary",
            node.children.len()
        )));
    }
    let first_leaf = leaves.len();
    let mut height: Option<(Dec, f64)> = None;
    for child in &node.children {
        let (child_dec, _) = collect(child, depth + 1, leaves, leaf_ids, internals)?;
        let raw = child
            .branch
            .as_ref()
            .ok_or_else(|| ClusterError::BadNewick("a child lacks a branch length".into()))?;
        let branch = Dec::parse(raw)
            .ok_or_else(|| ClusterError::BadNewick(format!("bad branch length {raw:?}")))?;
        let candidate_dec = add(&child_dec, &branch);
        let candidate = candidate_dec.to_f64();
        if !candidate.is_finite() {
            return Err(ClusterError::BadNewick("non-finite merge height".into()));
        }
        match &height {
            None => height = Some((candidate_dec, candidate)),
            Some((_, h)) => {
                if (candidate - h).abs() > 1e-9 * h.abs().max(1.0) {
                    return Err(ClusterError::BadNewick(format!(
                        "children disagree on a merge height: {h} vs {candidate}"
                    )));
                }
            }
        }
    }
    let (height_dec, height) = height.expect("two children");
    internals.push(Internal {
        node,
        height,
        depth,
        first_leaf,
    });
    Ok((height_dec, height))
}

/// Reads a tree written by [`to_newick`]. Leaves are numbered in traversal
/// order; merges are ordered by height ascending, breaking ties by depth
/// (deeper first) then by first leaf encountered. A root branch length is
/// accepted and ignored.
pub fn from_newick(text: &str) -> Result<MergeTree, ClusterError> {
    let mut parser = Parser {
        text: text.as_bytes(),
        pos: 0,
    };
    let root = parser.node()?;
    parser.expect(b';')?;
    parser.skip_space();
    if parser.pos != parser.text.len() {
        return Err(ClusterError::BadNewick(format!(
            "trailing content after ';' at byte {}",
            parser.pos
        )));
    }
    if root.children.is_empty() {
        return Err(ClusterError::BadNewick("a single leaf is not a tree".into()));
    }

    let mut leaves = Vec::new();
    let mut leaf_ids: Vec<(*const Parsed, usize)> = Vec::new();
    let mut internals = Vec::new();
    collect(&root, 0, &mut leaves, &mut leaf_ids, &mut internals)?;

    internals.sort_by(|x, y| {
        x.height
            .total_cmp(&y.height)
            .then(y.depth.cmp(&x.depth))
            .then(x.first_leaf.cmp(&y.first_leaf))
    });

    let m = leaves.len();
    let resolve = |node: &Parsed| -> usize {
        let ptr = node as *const Parsed;
        if node.children.is_empty() {
            leaf_ids
                .iter()
                .find(|(p, _)| *p == ptr)
                .expect("every leaf was numbered")
                .1
        } else {
            m + internals
                .iter()
                .position(|i| std::ptr::eq(i.node, node))
                .expect("every internal node was collected")
        }
    };

    let merges: Vec<Merge> = internals
        .iter()
        .map(|internal| {
            let mut a = resolve(&internal.node.children[0]);
            let mut b = resolve(&internal.node.children[1]);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            Merge {
                a,
                b,
                height: internal.height,
                size: 0,
            }
        })
        .collect();

    let mut tree = MergeTree { leaves, merges };
    for s in 0..tree.merges.len() {
        tree.merges[s].size = tree.members(m + s).len();
    }
    validate_tree(&tree).map_err(ClusterError::BadNewick)?;
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::ward_linkage;
    use crate::nncore::Rng;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn exact_decimal_arithmetic_holds_up() {
        let five = Dec::from_f64(5.0);
        assert_eq!(five.render(), "5");
        let tenth = Dec::from_f64(0.1);
        assert_eq!(tenth.render(), "0.1000000000000000055511151231257827021181583404541015625");
        assert_eq!(tenth.to_f64(), 0.1);
        assert_eq!(add(&five, &tenth).to_f64(), five.to_f64() + 0.1);
        assert_eq!(sub(&five, &tenth).unwrap().to_f64(), 4.9);
        assert!(sub(&tenth, &five).is_none());
        assert_eq!(Dec::parse("2.5e3").unwrap().render(), "2500");
        assert_eq!(Dec::parse("25e-4").unwrap().render(), "0.0025");
        assert!(Dec::parse("-1").is_none());
        assert!(Dec::parse("1e9999").is_none());
        assert!(Dec::parse(".").is_none());
        assert_eq!(Dec::parse(".5").unwrap().to_f64(), 0.5);
    }

    #[test]
    fn two_leaves_format_as_the_classic_example() {
        let tree = ward_linkage(
            &["a".to_string(), "b".to_string()],
            &[vec![0.0, 0.0], vec![3.0, 4.0]],
        )
        .unwrap();
        assert_eq!(to_newick(&tree), "(a:5,b:5);");
    }

    #[test]
    fn three_leaf_example_nests_the_near_pair() {
        let tree = ward_linkage(&labels(3), &[vec![0.0], vec![1.0], vec![10.0]]).unwrap();
        let text = to_newick(&tree);
        assert!(text.starts_with("(p2:"), "{text}");
        assert!(text.contains("(p0:1,p1:1):"), "{text}");
        assert!(text.ends_with(");"), "{text}");
        let back = from_newick(&text).unwrap();
        assert_eq!(back.signature(), tree.signature());
        assert_eq!(
            back.merges[1].height, tree.merges[1].height,
            "bit-exact heights"
        );
    }

    #[test]
    fn random_trees_round_trip_with_exact_heights() {
        let mut rng = Rng::new(77);
        for m in 2..=8 {
            for _ in 0..3 {
                let points: Vec<Vec<f64>> = (0..m)
                    .map(|_| (0..3).map(|_| rng.uniform(-5.0, 5.0)).collect())
                    .collect();
                let tree = ward_linkage(&labels(m), &points).unwrap();
                let back = from_newick(&to_newick(&tree)).unwrap();
                let (sig_a, sig_b) = (tree.signature(), back.signature());
                for (a, b) in sig_a.iter().zip(&sig_b) {
                    assert_eq!(a.0, b.0, "partitions");
                    assert_eq!(a.1, b.1, "heights must survive the round trip bit-exactly");
                }
                let mut sorted_a = tree.leaves.clone();
                let mut sorted_b = back.leaves.clone();
                sorted_a.sort();
                sorted_b.sort();
                assert_eq!(sorted_a, sorted_b);
            }
        }
    }

    #[test]
    fn malformed_text_is_rejected() {
        assert!(from_newick("(a:1,b:2").is_err());
        assert!(from_newick("(a:1,b:1);trailing").is_err());
        assert!(from_newick("(a:1,b:2,c:3);").is_err());
        assert!(from_newick("a;").is_err());
        assert!(from_newick("(a:oops,b:2);").is_err());
        assert!(from_newick("(a:-1,b:1);").is_err(), "negative branch");
        assert!(
            from_newick("(a:1,(b:2,c:2));").is_err(),
            "missing branch length"
        );
        assert!(
            from_newick("((a:1,b:1):5,(c:1,d:1):9);").is_err(),
            "inconsistent heights"
        );
    }

    #[test]
    fn whitespace_and_root_branch_lengths_are_tolerated() {
        let tree = from_newick(" ( a:5 , b:5 ) :0 ;\n").unwrap();
        assert_eq!(tree.leaves, vec!["a".to_string(), "b".to_string()]);
        assert_eq!(tree.merges[0].height, 5.0);
    }
}
