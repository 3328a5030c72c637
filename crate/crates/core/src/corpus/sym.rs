//! Interned label strings.
//!
//! Lemmas, POS tags and arc labels repeat heavily, and the edit search clones
//! and compares trees constantly, so tree labels are interned once into
//! process-lifetime strings. Equality and hashing go by address.

use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy)]
pub struct Sym(&'static str);

fn interner() -> &'static RwLock<HashSet<&'static str>> {
    static INTERNER: OnceLock<RwLock<HashSet<&'static str>>> = OnceLock::new();
    INTERNER.get_or_init(|| RwLock::new(HashSet::new()))
}

impl Sym {
    pub fn new(s: &str) -> Sym {
        if let Some(&found) = interner().read().expect("interner lock").get(s) {
            return Sym(found);
        }
        let mut set = interner().write().expect("interner lock");
        if let Some(&found) = set.get(s) {
            return Sym(found);
        }
        let leaked: &'static str = Box::leak(s.to_owned().into_boxed_str());
        set.insert(leaked);
        Sym(leaked)
    }

    pub fn as_str(self) -> &'static str {
        self.0
    }

    /// Address of the interned string; a cheap total order with no meaning
    /// beyond the current process.
    pub(crate) fn addr(self) -> usize {
        self.0.as_ptr() as usize
    }
}

impl PartialEq for Sym {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.0, other.0)
    }
}

impl Eq for Sym {}

impl Hash for Sym {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.addr().hash(state)
    }
}

impl PartialOrd for Sym {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic, so sorted output is stable across runs.
impl Ord for Sym {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.cmp(other.0)
    }
}

impl std::ops::Deref for Sym {
    type Target = str;
    fn deref(&self) -> &str {
        self.0
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self.0, f)
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

impl From<&str> for Sym {
    fn from(s: &str) -> Self {
        Sym::new(s)
    }
}

impl PartialEq<str> for Sym {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for Sym {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

impl Serialize for Sym {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.0)
    }
}

impl<'de> Deserialize<'de> for Sym {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = std::borrow::Cow::<'de, str>::deserialize(d)?;
        Ok(Sym::new(&s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_is_unique() {
        let a = Sym::new("dog");
        let b = Sym::new(&String::from("dog"));
        assert_eq!(a, b);
        assert_eq!(a.addr(), b.addr());
        assert_ne!(a, Sym::new("Dog"));
        assert_eq!(a, "dog");
        assert!(Sym::new("apple") < Sym::new("banana"));
    }

    #[test]
    fn serde_as_string() {
        let s = Sym::new("nsubj");
        assert_eq!(serde_json::to_string(&s).unwrap(), "\"nsubj\"");
        let back: Sym = serde_json::from_str("\"nsubj\"").unwrap();
        assert_eq!(back, s);
    }
}
