use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use super::{Result, TaskgenError};

const BUNDLED_CSV: &str = include_str!("../../data/cities.csv");

/// City → country facts. Each city appears once; each country has at least
/// two cities.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    entries: Vec<(String, String)>,
    city_index: HashMap<String, usize>,
    by_country: BTreeMap<String, Vec<String>>,
}

impl KnowledgeBase {
    pub fn new(entries: Vec<(String, String)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(TaskgenError::InvalidKb("no entries".into()));
        }
        let mut city_index = HashMap::with_capacity(entries.len());
        let mut by_country: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, (city, country)) in entries.iter().enumerate() {
            if city.is_empty() || country.is_empty() {
                return Err(TaskgenError::InvalidKb(format!("row {} has an empty field", i + 1)));
            }
            if city_index.insert(city.clone(), i).is_some() {
                return Err(TaskgenError::InvalidKb(format!("duplicate city `{city}`")));
            }
            by_country.entry(country.clone()).or_default().push(city.clone());
        }
        if let Some((country, _)) = by_country.iter().find(|(_, cities)| cities.len() < 2) {
            return Err(TaskgenError::InvalidKb(format!(
                "country `{country}` has fewer than two cities"
            )));
        }
        Ok(Self {
            entries,
            city_index,
            by_country,
        })
    }

    /// The sample knowledge base shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_reader(BUNDLED_CSV.as_bytes()).expect("bundled knowledge base is valid")
    }

    /// Reads a UTF-8 CSV with header `city,country`.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "city" || &headers[1] != "country" {
            return Err(TaskgenError::InvalidKb(format!(
                "expected header `city,country`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut entries = Vec::new();
        for record in rdr.records() {
            let record = record?;
            entries.push((record[0].to_string(), record[1].to_string()));
        }
        Self::new(entries)
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn country_of(&self, city: &str) -> Option<&str> {
        self.city_index.get(city).map(|&i| self.entries[i].1.as_str())
    }

    /// Countries in sorted order.
    pub fn countries(&self) -> Vec<&str> {
        self.by_country.keys().map(String::as_str).collect()
    }

    pub fn cities_in(&self, country: &str) -> &[String] {
        self.by_country.get(country).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn num_countries(&self) -> usize {
        self.by_country.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_kb_has_enough_coverage() {
        let kb = KnowledgeBase::bundled();
        assert!(kb.num_countries() >= 20);
        for c in kb.countries() {
            assert!(kb.cities_in(c).len() >= 5, "{c}");
        }
        assert_eq!(kb.country_of("Boston"), Some("United States"));
        assert_eq!(kb.country_of("Dortmund"), Some("Germany"));
        assert_eq!(kb.country_of("Atlantis"), None);
    }

    #[test]
    fn rejects_duplicates_and_singleton_countries() {
        let dup = "city,country\nParis,France\nParis,Texas\nLyon,France\n";
        assert!(matches!(
            KnowledgeBase::from_reader(dup.as_bytes()),
            Err(TaskgenError::InvalidKb(_))
        ));
        let lonely = "city,country\nParis,France\nLyon,France\nRome,Italy\n";
        assert!(KnowledgeBase::from_reader(lonely.as_bytes()).is_err());
        assert!(KnowledgeBase::from_reader("city,country\n".as_bytes()).is_err());
        assert!(KnowledgeBase::from_reader("town,nation\nA,B\n".as_bytes()).is_err());
    }

    #[test]
    fn quoted_fields_are_accepted() {
        let csv = "city,country\n\"Washington, D.C.\",United States\nBoston,United States\n";
        let kb = KnowledgeBase::from_reader(csv.as_bytes()).unwrap();
        assert_eq!(kb.country_of("Washington, D.C."), Some("United States"));
    }
}
