//! Name-keyed registries of interchangeable strategies.
//!
//! A registry maps a name to a factory producing a boxed trait object. Specs
//! have the form `name` or `name:param`; the part after the first colon is
//! passed to the factory unparsed.

use crate::error::{Error, Result};

type Factory<T> = Box<dyn Fn(Option<&str>) -> Result<Box<T>> + Send + Sync>;

pub struct Entry<T: ?Sized> {
    pub name: &'static str,
    pub summary: &'static str,
    factory: Factory<T>,
}

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: Vec<Entry<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Registry {
            kind,
            entries: Vec::new(),
        }
    }

    /// Adds or replaces the entry called `name`.
    pub fn register<F>(&mut self, name: &'static str, summary: &'static str, factory: F)
    where
        F: Fn(Option<&str>) -> Result<Box<T>> + Send + Sync + 'static,
    {
        self.entries.retain(|e| e.name != name);
        self.entries.push(Entry {
            name,
            summary,
            factory: Box::new(factory),
        });
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name).collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = &Entry<T>> {
        self.entries.iter()
    }

    pub fn create(&self, spec: &str) -> Result<Box<T>> {
        let (name, param) = match spec.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p.trim())),
            None => (spec.trim(), None),
        };
        let entry = self
            .entries
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            })?;
        (entry.factory)(param)
    }
}

/// Parses an optional numeric factory parameter.
pub fn parse_param(param: Option<&str>, default: f64) -> Result<f64> {
    match param {
        None | Some("") => Ok(default),
        Some(p) => p
            .parse::<f64>()
            .map_err(|_| Error::InvalidConfig(format!("expected a number, got '{p}'"))),
    }
}
