use std::collections::BTreeMap;
use std::path::Path;

/// Place name → (latitude, longitude), loaded from a JSON object mapping
/// `"City, Country"` to `[lat, lon]`. Lookups ignore case and surrounding
/// whitespace.
#[derive(Debug, Clone, PartialEq)]
pub struct Gazetteer {
    places: BTreeMap<String, (f64, f64)>,
}

#[derive(Debug, thiserror::Error)]
pub enum GazetteerError {
    #[error("cannot read gazetteer: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed gazetteer: {0}")]
    Malformed(String),
}

impl Gazetteer {
    pub fn bundled() -> Self {
        Self::from_json(include_str!("../../data/gazetteer.json"))
            .expect("bundled gazetteer is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GazetteerError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self, GazetteerError> {
        let raw: BTreeMap<String, (f64, f64)> =
            serde_json::from_str(text).map_err(|e| GazetteerError::Malformed(e.to_string()))?;
        let mut places = BTreeMap::new();
        for (name, (lat, lon)) in raw {
            if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
                return Err(GazetteerError::Malformed(format!(
                    "{name}: ({lat}, {lon}) out of range"
                )));
            }
            if places.insert(key(&name), (lat, lon)).is_some() {
                return Err(GazetteerError::Malformed(format!("{name} listed twice")));
            }
        }
        Ok(Self { places })
    }

    pub fn lookup(&self, place: &str) -> Option<(f64, f64)> {
        self.places.get(&key(place)).copied()
    }

    pub fn len(&self) -> usize {
        self.places.len()
    }

    pub fn is_empty(&self) -> bool {
        self.places.is_empty()
    }
}

fn key(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}
