//! Independent label recomputation. Reads only the structured `meta` of a
//! statement plus the knowledge base; the stored label and the generator's
//! bookkeeping fields (`true_count`) are never consulted.

use serde_json::Value;

use super::{parse_and_eval, KnowledgeBase, LabeledStatement, Result, TaskId, TaskgenError};

fn field<'a>(s: &'a LabeledStatement, name: &'static str) -> Result<&'a Value> {
    s.meta
        .get(name)
        .ok_or(TaskgenError::MissingMeta { id: s.id, field: name })
}

fn text_field<'a>(s: &'a LabeledStatement, name: &'static str) -> Result<&'a str> {
    field(s, name)?
        .as_str()
        .ok_or(TaskgenError::MissingMeta { id: s.id, field: name })
}

fn text_list<'a>(s: &'a LabeledStatement, name: &'static str) -> Result<Vec<&'a str>> {
    let bad = || TaskgenError::MissingMeta { id: s.id, field: name };
    field(s, name)?
        .as_array()
        .ok_or_else(bad)?
        .iter()
        .map(|v| v.as_str().ok_or_else(bad))
        .collect()
}

fn count_list(s: &LabeledStatement, name: &'static str) -> Result<Vec<u64>> {
    let bad = || TaskgenError::MissingMeta { id: s.id, field: name };
    field(s, name)?
        .as_array()
        .ok_or_else(bad)?
        .iter()
        .map(|v| v.as_u64().ok_or_else(bad))
        .collect()
}

fn lookup<'a>(kb: &'a KnowledgeBase, s: &LabeledStatement, city: &str) -> Result<&'a str> {
    kb.country_of(city).ok_or_else(|| TaskgenError::UnknownCity {
        id: s.id,
        city: city.to_string(),
    })
}

fn count_in(kb: &KnowledgeBase, s: &LabeledStatement, cities: &[&str], country: &str) -> Result<u64> {
    let mut m = 0;
    for city in cities {
        if lookup(kb, s, city)? == country {
            m += 1;
        }
    }
    Ok(m)
}

/// Truth value of a statement computed from first principles.
pub fn oracle_label(s: &LabeledStatement, kb: &KnowledgeBase) -> Result<bool> {
    match s.task {
        TaskId::F0 | TaskId::F1 => {
            let city = text_field(s, "city")?;
            let country = text_field(s, "country")?;
            let member = lookup(kb, s, city)? == country;
            Ok(if s.task == TaskId::F0 { member } else { !member })
        }
        TaskId::F2 => {
            let cities = text_list(s, "cities")?;
            let countries = text_list(s, "countries")?;
            if cities.len() != 2 || countries.len() != 2 {
                return Err(TaskgenError::MissingMeta { id: s.id, field: "cities" });
            }
            let mut all = true;
            for (city, country) in cities.iter().zip(&countries) {
                all &= lookup(kb, s, city)? == *country;
            }
            Ok(all)
        }
        TaskId::F3 | TaskId::F4 | TaskId::F4N3 | TaskId::F4N4 => {
            let country = text_field(s, "country")?;
            let cities = text_list(s, "cities")?;
            let stated = field(s, "stated_k")?
                .as_u64()
                .ok_or(TaskgenError::MissingMeta { id: s.id, field: "stated_k" })?;
            Ok(count_in(kb, s, &cities, country)? == stated)
        }
        TaskId::F5 => {
            let countries = text_list(s, "countries")?;
            let cities = text_list(s, "cities")?;
            let stated = count_list(s, "stated_k")?;
            if countries.len() != 2 || stated.len() != 2 {
                return Err(TaskgenError::MissingMeta { id: s.id, field: "stated_k" });
            }
            Ok(count_in(kb, s, &cities, countries[0])? == stated[0]
                && count_in(kb, s, &cities, countries[1])? == stated[1])
        }
        TaskId::A1 | TaskId::A2 | TaskId::A3 => {
            let statement = text_field(s, "statement")?;
            let (lhs, rhs) = statement
                .split_once('=')
                .ok_or_else(|| TaskgenError::Parse(statement.into()))?;
            Ok(parse_and_eval(lhs)? == parse_and_eval(rhs)?)
        }
    }
}
